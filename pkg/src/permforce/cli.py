"""Command line interface.

Every subcommand writes JSON to stdout (or --out).  Exit codes: 0 success or
certified non-forcing, 1 undecided / refused / failed check, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .forcing import (
    LemmaViolation,
    classify_set,
    dependence,
    explained_non_forcing,
    search_dependent_sets,
    valid_zero_sum_orders,
    verify_constant_cover,
    verify_zero_sums,
    FormalCombination,
)
from .gradpoly import (
    b_vector,
    evaluate,
    gradient_polynomial,
    k_sign_canary,
    mirror_polynomial,
    polynomial_sum,
    sum_formula_eval,
)
from .exact import rank
from .perm import Permutation, enumerate_permutations, format_rational, pattern_density
from .permuton import (
    StepPermuton,
    constant_matrix,
    matrix_from_json,
    mc_density,
    sample_points,
    samples_to_csv,
    segment_permuton,
    step_density,
)
from .witness import DependentGradientsError, WitnessError, find_alpha0, find_witness, verify_witness

logger = logging.getLogger("permforce")

EXIT_OK, EXIT_UNDECIDED, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _perm(text: str) -> Permutation:
    try:
        return Permutation.parse(text)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _emit(args, payload, pretty_text: str | None = None) -> None:
    if args.pretty and pretty_text is not None:
        text = pretty_text
    else:
        text = json.dumps(payload, separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_density(args) -> int:
    pattern = _perm(args.pattern)
    sources = [s for s in (args.within, args.matrix, args.uniform, args.alpha) if s is not None]
    if len(sources) != 1:
        raise InputError("give exactly one of --in, --matrix, --uniform, --alpha")
    if args.within is not None:
        value = pattern_density(pattern, _perm(args.within))
        _emit(args, {"value": format_rational(value)}, format_rational(value))
        return EXIT_OK
    if args.alpha is not None:
        if not 0 <= args.alpha <= 1:
            raise InputError("--alpha must lie in [0, 1]")
        permuton = segment_permuton(args.alpha)
    else:
        if args.uniform is not None:
            if args.uniform < 1:
                raise InputError("--uniform needs a positive order")
            mat = constant_matrix(args.uniform)
        else:
            try:
                mat = matrix_from_json(Path(args.matrix).read_text())
            except OSError as exc:
                raise InputError(f"cannot read matrix file: {exc}") from None
        if args.samples is None:
            value = step_density(pattern, mat)
            _emit(args, {"value": format_rational(value)}, format_rational(value))
            return EXIT_OK
        permuton = StepPermuton(mat)
    samples = args.samples if args.samples is not None else 10**6
    if samples < 1:
        raise InputError("--samples must be positive")
    est = mc_density(pattern, permuton, samples, args.seed, args.threads)
    _emit(args, est.to_json(), f"{est.estimate:.6f} +- {est.stderr:.6f} ({samples} samples, seed {args.seed})")
    return EXIT_OK


def _grid_text(coeffs) -> str:
    cells = [[format_rational(c) for c in row] for row in coeffs]
    width = max(len(c) for row in cells for c in row)
    return "\n".join(" ".join(c.rjust(width) for c in row) for row in cells)


def cmd_gradpoly(args) -> int:
    pi = _perm(args.perm)
    if len(pi) < 2:
        raise InputError(f"gradient polynomials need order >= 2, got {pi}")
    poly = mirror_polynomial(pi) if args.mirror else gradient_polynomial(pi)
    _emit(args, poly.to_json(len(pi)), _grid_text(poly.coeffs))
    return EXIT_OK


def _report_text(rep: dict) -> str:
    lines = [f"set: {{{', '.join(rep['set'])}}}", f"status: {rep['status']}"]
    if "kernel" in rep:
        lines.append(f"kernel: ({', '.join(rep['kernel'])})")
    for p in rep["lemma_patterns"]:
        lines.append(f"pattern: {p}")
    lines.append(f"verdict: {rep['verdict']}")
    return "\n".join(lines)


def cmd_depcheck(args) -> int:
    perms = [_perm(p) for p in args.perms]
    try:
        rep = classify_set(perms)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(args, rep, _report_text(rep))
    return EXIT_OK if rep["status"] == "independent" else EXIT_UNDECIDED


def cmd_search(args) -> int:
    try:
        hits = search_dependent_sets(args.max_order, args.size, threads=args.threads)
    except LemmaViolation as exc:
        print(json.dumps({"error": f"lemma violation: {exc}"}), file=sys.stderr)
        return EXIT_UNDECIDED
    lines = []
    for perms, res in hits:
        rep = {
            "set": [str(p) for p in perms],
            "status": res.status,
            "kernel": [format_rational(t) for t in res.kernel],
        }
        lines.append(json.dumps(rep, separators=(",", ":")))
    text = "\n".join(lines)
    if args.pretty:
        text = "\n".join(f"{{{', '.join(map(str, p))}}}  kernel ({', '.join(map(format_rational, r.kernel))})"
                         for p, r in hits) or "no dependent sets"
    if args.out:
        Path(args.out).write_text(text + ("\n" if text else ""))
    elif text:
        print(text)
    return EXIT_OK


def cmd_witness(args) -> int:
    perms = [_perm(p) for p in args.perms]
    if any(len(p) < 2 for p in perms):
        raise InputError("order-1 permutations have density 1 in every permuton")
    try:
        rep = find_witness(perms, n=args.n, r=args.r, tol=args.tol, max_iter=args.max_iter)
    except DependentGradientsError as exc:
        _emit(args, {"set": [str(p) for p in perms], "refused": True, "reason": str(exc)}, f"refused: {exc}")
        return EXIT_UNDECIDED
    except WitnessError as exc:
        _emit(args, {"set": [str(p) for p in perms], "refused": False, "error": str(exc)}, f"failed: {exc}")
        return EXIT_UNDECIDED
    check = verify_witness(rep, digits=args.digits)
    out = rep.to_json()
    out["verification"] = check.to_json()
    text = "\n".join([
        f"set: {{{', '.join(rep.perms)}}}  n={rep.n}  pinned {rep.pinned} = {rep.r:g}",
        "x = " + ", ".join(f"{v:.12g}" for v in rep.x),
        f"max residual (float): {max(rep.residuals):.3g}",
        f"exact re-check at {args.digits} digits: {'pass' if check.ok else 'FAIL'}; witness: {check.is_witness}",
    ])
    _emit(args, out, text)
    return EXIT_OK if check.is_witness else EXIT_UNDECIDED


def cmd_malpha(args) -> int:
    try:
        res = find_alpha0(args.samples, args.tol, args.seed, threads=args.threads)
    except WitnessError as exc:
        _emit(args, {"error": str(exc)}, f"failed: {exc}")
        return EXIT_UNDECIDED
    text = "\n".join(
        [f"alpha0 = {res.alpha0:.6f}  bracket [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}]"]
        + [f"d({p}) = {e.estimate:.5f} +- {e.stderr:.5f}" for p, e in res.densities.items()]
    )
    _emit(args, res.to_json(), text)
    return EXIT_OK


def cmd_sample(args) -> int:
    if (args.alpha is None) == (args.matrix is None):
        raise InputError("give exactly one of --alpha, --matrix")
    if args.alpha is not None:
        permuton = segment_permuton(args.alpha)
    else:
        permuton = StepPermuton(matrix_from_json(Path(args.matrix).read_text()))
    csv = samples_to_csv(sample_points(permuton, args.count, args.seed))
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    return EXIT_OK


# --------------------------------------------------------------------------
# lemma suite

_PROBE_POINTS = [(Fraction(1, 3), Fraction(2, 5)), (Fraction(3, 7), Fraction(1, 2)), (Fraction(1, 5), Fraction(4, 5))]


def lemma_suite(max_order: int) -> list[dict]:
    """Run every structural check up to `max_order`; one row per check."""
    rows = []

    def record(name, fn):
        try:
            ok, detail = fn()
        except LemmaViolation as exc:
            ok, detail = False, str(exc)
        rows.append({"check": name, "passed": bool(ok), "detail": detail})

    orders = range(2, max_order + 1)

    def b_basis():
        for k in orders:
            bs = [b_vector(k, a).entries for a in range(2, k + 1)]
            if any(sum(b) for b in bs) or rank([[1] * k] + bs) != k:
                return False, f"k={k}"
        return True, f"k <= {max_order}"

    def sums_vanish():
        bad = [k for k in orders if not polynomial_sum(gradient_polynomial(p) for p in enumerate_permutations(k)).is_zero()]
        return not bad, f"failing orders {bad}" if bad else f"k <= {max_order}"

    def mirror():
        bad = [str(p) for k in orders for p in enumerate_permutations(k)
               if mirror_polynomial(p) != gradient_polynomial(p).substitute_one_minus_alpha()]
        return not bad, f"{len(bad)} mismatches" if bad else "all permutations"

    def two_routes():
        bad = [str(p) for k in orders for p in enumerate_permutations(k)
               if any(evaluate(gradient_polynomial(p), a, b) != sum_formula_eval(p, a, b) for a, b in _PROBE_POINTS)]
        return not bad, f"{len(bad)} mismatches" if bad else "coefficient form = sum formula"

    found = {}

    def search(size):
        def run():
            hits = search_dependent_sets(max_order, size)
            found[size] = hits
            if size == 1:
                return not hits, f"{len(hits)} dependent singletons"
            if size == 2:
                names = [tuple(map(str, p)) for p, _ in hits]
                return names == [("12", "21")], f"dependent pairs {names}"
            return True, f"{len(hits)} dependent triples, all within the structural constraints"
        return run

    def cover_identities():
        n_checked = 0
        for size in (2, 3):
            for perms, res in found.get(size, []):
                for v in res.kernel_basis:
                    sub = [p for t, p in zip(v, perms) if t]
                    ts = [t for t in v if t]
                    for h in valid_zero_sum_orders(sub):
                        n_checked += 1
                        if not verify_zero_sums(sub, ts, h):
                            return False, f"zero sums fail for {list(map(str, perms))}, h={h}"
                    if len({len(p) for p in sub}) == 1 and not verify_constant_cover(FormalCombination.of(sub, ts)):
                        return False, f"non-constant cover for {list(map(str, perms))}"
        return True, f"{n_checked} zero-sum identities"

    def explained():
        bad = [list(map(str, p)) for size in (1, 2, 3) for p, _ in found.get(size, []) if not explained_non_forcing(p)]
        return not bad, f"unexplained dependent sets {bad}" if bad else "every dependent set matches a non-forcing pattern"

    record("b-vectors span the complement of the all-ones vector", b_basis)
    record("gradient polynomials of all k-permutations sum to zero", sums_vanish)
    record("mirror polynomial equals substitution alpha -> 1 - alpha", mirror)
    record("coefficient form agrees with the explicit sum", two_routes)
    record("no dependent singleton", search(1))
    record("only dependent pair is {12, 21}", search(2))
    record("dependent triples obey the order constraints", search(3))
    record("cover-matrix identities on every dependent set", cover_identities)
    record("every dependent set of size <= 3 is explained", explained)
    return rows


def cmd_verify_lemmas(args) -> int:
    if not 2 <= args.max_order <= 5:
        raise InputError("--max-order must lie in [2, 5]")
    if args.canary:
        with k_sign_canary():
            rows = lemma_suite(args.max_order)
    else:
        rows = lemma_suite(args.max_order)
    text = "\n".join(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']}  ({r['detail']})" for r in rows)
    _emit(args, {"max_order": args.max_order, "canary": args.canary, "rows": rows}, text)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_UNDECIDED


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permforce", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="human-readable output instead of JSON")
    common.add_argument("--out", help="write output to this path")
    common.add_argument("--threads", type=int, default=1, help="worker count for search / sampling")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", parents=[common], help="pattern density (exact or Monte Carlo)")
    p.add_argument("--pattern", required=True)
    p.add_argument("--in", dest="within", help="finite permutation to count in")
    p.add_argument("--matrix", help="doubly stochastic matrix JSON file")
    p.add_argument("--uniform", type=int, help="constant matrix of this order")
    p.add_argument("--alpha", type=float, help="segment permuton parameter in [0, 1]")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("gradpoly", parents=[common], help="gradient polynomial coefficients")
    p.add_argument("perm")
    p.add_argument("--mirror", action="store_true")
    p.set_defaults(func=cmd_gradpoly)

    p = sub.add_parser("depcheck", parents=[common], help="linear dependence / non-forcing certificate")
    p.add_argument("perms", nargs="+")
    p.set_defaults(func=cmd_depcheck)

    p = sub.add_parser("search", parents=[common], help="exhaustive search for dependent sets")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--max-order", type=int, required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("witness", parents=[common], help="numerical non-uniform witness")
    p.add_argument("perms", nargs="+")
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=float, default=1 / 20)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--digits", type=int, default=12)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("malpha", parents=[common], help="locate alpha0 in the segment family")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_malpha)

    p = sub.add_parser("sample", parents=[common], help="dump permuton samples as CSV")
    p.add_argument("--alpha", type=float)
    p.add_argument("--matrix")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify-lemmas", parents=[common], help="run the structural lemma suite")
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--canary", action="store_true", help="corrupt one K constant (negative control)")
    p.set_defaults(func=cmd_verify_lemmas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.threads < 1:
        parser.error("--threads must be positive")
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
