"""Command-line entry point: ``tensorclt <command> ...``.

Exit codes: 0 success, 1 usage/input error, 2 a verification check failed.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, decomposition, empirics, models
from .coefficients import seminorm_profile
from .errors import InputOutputError, ScaleError, SpecError, TensorCLTError
from .report import render_report
from .tensor_core import SymmetricCoefficients, double_tensor_from_dict, read_json

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Format(argparse.RawDescriptionHelpFormatter):
    pass


def _alpha_grid(text: str) -> list[float]:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected start:stop:step") from exc
    if step <= 0 or lo > hi:
        raise argparse.ArgumentTypeError("need start <= stop and step > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _common(p: argparse.ArgumentParser, seed: bool = False, samples: bool = False) -> None:
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    if seed:
        p.add_argument("--seed", type=int, help="seed for the random generator (required for sampling)")
    if samples:
        p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count M")


def _components_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--components", type=Path,
                   help='JSON file {"components": [{"n", "s", "values"}, ...]} holding xi_1, ..., xi_d')
    p.add_argument("--random", action="store_true", help="draw random Hoeffding components instead")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--higher-scale", type=float, default=0.1, help="scale of the random xi_s for s >= 2")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensorclt", description="Normal approximation for random tensors and permutation statistics.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", formatter_class=_Format, help="estimate or compute tensor parameters",
                       description=(
                           "Compute delta_s = E[X_i X_j] for index pairs sharing s coordinates, sigma_s from the\n"
                           "binomial inversion of delta, the oscillation E|Q - delta_1| over overlap-one pairs,\n"
                           "the parallelepipedal product pc, and the moment constants B, K3, K4.\n"
                           "Monte Carlo estimates carry delta-method standard errors; --exact uses closed\n"
                           "forms for the slice-product model."))
    p.add_argument("--model", type=Path, required=True, help="model file (JSON)")
    p.add_argument("--exact", action="store_true", help="closed-form parameters (slice-product only)")
    _common(p, seed=True, samples=True)

    p = sub.add_parser("bound", help="evaluate a Kolmogorov-distance bound")
    bsub = p.add_subparsers(dest="target", required=True, parser_class=_Parser)

    q = bsub.add_parser("tensor", formatter_class=_Format, help="bound for the tensor form <theta, X>",
                        description=(
                            "Bound d_K(<theta, X>, N(0, sigma^2)) for a symmetric order-d coefficient tensor\n"
                            "with vanishing diagonal, ||theta||_1 = 1, and sigma^2 = sum_s C(d,s)^2 s! Sigma_s ||theta||_s^2.\n"
                            "E1 collects 5 osc^(1-alpha), 5 |delta_0|^(1-alpha), the delta_0 mismatch of ||theta||_0,\n"
                            "6 kappa / n^(1-alpha) and 4 ||theta||_0^2 / n. E2 is 2^36 K3 delta_1^(-3/2) times the\n"
                            "cubic row sum. E3 is 3 kappa sum_(s>=2) C(d,s) sqrt(s! Sigma_s) ||theta||_s / (d sqrt(delta_1)).\n"
                            "The bound is informative when delta_1 dominates osc^alpha, B^alpha and (kappa/n)^alpha.\n"
                            "--extendible swaps osc for sqrt(pc) (infinitely extendible tensors).\n"
                            "The split exponent alpha is free; --alpha-grid sweeps it."))
    q.add_argument("--params", type=Path, required=True, help="parameter JSON (output of estimate)")
    q.add_argument("--coefficients", type=Path, required=True, help="coefficient JSON")
    g = q.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--alpha-grid", type=_alpha_grid, help="start:stop:step")
    q.add_argument("--extendible", action="store_true",
                   help="use the pc-driven bound for infinitely extendible tensors")
    _common(q)

    q = bsub.add_parser("vector", formatter_class=_Format, help="bound for d = 1 linear forms",
                        description=(
                            "First-order bounds for sum_i theta_i X_i: a general unit vector, the\n"
                            "normalized sum of k entries, or isotropic entries where the bound is\n"
                            "driven by tau = n * pc and K4."))
    q.add_argument("--params", type=Path, required=True)
    q.add_argument("--variant", choices=("general", "sum-of-k", "isotropic"), default="general")
    q.add_argument("--theta", type=Path, help="JSON array with the unit vector theta")
    q.add_argument("--k", type=int)
    q.add_argument("--C", type=float, help="constant with |delta_0| <= C/n (sum-of-k)")
    _common(q)

    q = bsub.add_parser("poly", formatter_class=_Format, help="bound for a homogeneous polynomial on the slice",
                        description=(
                            "Bound d_K for f(xi) = sum_F a_F prod_(i in F) xi_i with xi uniform on the\n"
                            "k-slice of {0,1}^n, compared to a normal law with the exact variance.\n"
                            "Also reports the variance window center p^d (1-p)^d ||a||_0^2 and its radius,\n"
                            "together with the Levy concentration terms."))
    q.add_argument("--coefficients", type=Path, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--eps", type=float, default=0.0, help="Levy window width")
    _common(q)

    q = bsub.add_parser("finpop", formatter_class=_Format, help="bound for T = t(pi(1), ..., pi(d))",
                        description=(
                            "Bound for a statistic of a d-subset of a shuffled population, built from the\n"
                            "l2 and l3 norms of its Hoeffding pieces g_1, ..., g_d: a cubic ratio term\n"
                            "(||g_1||_3/||g_1||_2)^3/sqrt(dn) and a sum over s >= 2 of (d/sqrt(n))^(s-1)/s!\n"
                            "times ||g_s||_2/||g_1||_2."))
    q.add_argument("--population", type=Path, required=True,
                   help='JSON {"n": int, "g": [nested arrays g_1, ..., g_d], "mean": float?}')
    _common(q)

    p = sub.add_parser("decompose", formatter_class=_Format, help="rewrite Z as a weighted W-statistic",
                       description=(
                           "Split Z(pi) = sum_i z(i, pi o i) into sum_s n^(r-s) w_(s,r) W[H zeta_s] plus a constant,\n"
                           "where zeta_s averages out trailing coordinates and H is the Hoeffding projection.\n"
                           "z must be symmetric under joint permutations and vanish on repeated indices.\n"
                           "--verify-exhaustive checks the identity for every permutation."))
    p.add_argument("--tensor", type=Path, required=True, help='JSON {"n", "s", "values"} for z')
    p.add_argument("--verify-exhaustive", action="store_true")
    p.add_argument("--tol", type=float, help="tolerance for the symmetry and diagonal checks")
    p.add_argument("--budget", type=int, default=40_320, help="maximum number of permutations to enumerate")
    _common(p)

    p = sub.add_parser("simulate", help="simulate statistics")
    ssub = p.add_subparsers(dest="target", required=True, parser_class=_Parser)
    q = ssub.add_parser("wstat", formatter_class=_Format, help="law of W against the normal approximation",
                        description=(
                            "Compute the law of W(pi) = sum_s sum_(i injective) xi_s(i, pi o i) for uniform pi,\n"
                            "exactly for small n or by sampling, and report the Kolmogorov distance to N(0,1)\n"
                            "next to the Bolthausen-plus-higher-order bound and the DKW sampling slack.\n"
                            "Exits 2 if the distance exceeds the clamped bound plus three DKW radii."))
    _components_arg(q)
    q.add_argument("--exact", action="store_true", help="enumerate all n! permutations (n <= 8)")
    q.add_argument("--confidence", type=float, default=0.999)
    _common(q, seed=True, samples=True)

    p = sub.add_parser("verify", help="brute-force checks of identities")
    vsub = p.add_subparsers(dest="target", required=True, parser_class=_Parser)
    q = vsub.add_parser("identities", formatter_class=_Format, help="moment identities of the exchangeable pair",
                        description=(
                            "Enumerate every (pi1, I1, I2) with pi2 = pi1 o (I1 I2) and check\n"
                            "E[Xi_1^2] = 1, E[Xi_1 - Xi_1' | pi1] = (2/n) Xi_1, E[(Xi_1 - Xi_1')^2] = 4/n,\n"
                            "E|Xi_1 - Xi_1'|^3 <= 64 Lambda / n^2, and the second-moment bounds for Xi_s, s >= 2."))
    _components_arg(q)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--tol", type=float, default=1e-9)
    _common(q)
    q = vsub.add_parser("pair", formatter_class=_Format, help="exactness of the transposition pair",
                        description=(
                            "Count outcomes of (pi1, I1, I2, pi2) and confirm that pi1 and pi2 are each\n"
                            "independent of (I1, I2), pi2 is uniform, and (pi1, pi2) is exchangeable."))
    q.add_argument("--n", type=int, default=4)
    _common(q)
    q = vsub.add_parser("gamma", formatter_class=_Format, help="closed form of the gamma constants",
                        description="Compare gamma_(s,r) = (-1)^(r-s) C(r,s) with the triangular recursion\n"
                                    "gamma_(s-1,r) = -sum_(x=s..r) C(x, s-1) gamma_(x,r).")
    q.add_argument("--rmax", type=int, default=10)
    _common(q)
    q = vsub.add_parser("variance", formatter_class=_Format, help="variance formula against brute force",
                        description="Compare sum_s C(d,s)^2 s! sigma_s ||theta||_s^2 with the direct double sum\n"
                                    "sum_(i,j) theta_i theta_j delta_(|Im i & Im j|) on random instances.")
    q.add_argument("--instances", type=int, default=100)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--tol", type=float, default=1e-10)
    _common(q)
    return parser


# -- helpers ----------------------------------------------------------------------

def _load_components(args) -> list[np.ndarray]:
    if args.random:
        if args.seed is None:
            raise SpecError("--random needs --seed")
        rng = np.random.default_rng(args.seed)
        comps = [empirics.normalize_first(empirics.random_hoeffding(args.n, 1, rng))]
        for s in range(2, args.d + 1):
            comps.append(args.higher_scale * empirics.random_hoeffding(args.n, s, rng))
        return comps
    if args.components is None:
        raise SpecError("give --components or --random")
    data = read_json(args.components)
    if not isinstance(data, dict) or set(data) != {"components"}:
        raise SpecError('component file must be {"components": [...]}')
    return [double_tensor_from_dict(c) for c in data["components"]]


def _need_seed(args) -> int:
    if args.seed is None:
        raise SpecError("sampling needs an explicit --seed")
    return args.seed


def _cmd_estimate(args):
    m = models.ModelSpec.load(args.model)
    if args.exact:
        if m.kind != "slice-product":
            raise SpecError("--exact is available for slice-product models only")
        return models.exact_slice_params(m.n, int(m.payload["k"]), m.d), EXIT_OK
    return models.estimate_params(m, args.samples, _need_seed(args)), EXIT_OK


def _cmd_bound(args):
    if args.target in ("tensor", "vector"):
        params = bounds.params_from_mapping(read_json(args.params))
    if args.target == "tensor":
        profile = seminorm_profile(SymmetricCoefficients.load(args.coefficients))
        fn = bounds.extendible_tensor_bound if args.extendible else bounds.tensor_bound
        if args.alpha_grid:
            rows = []
            for rep in bounds.alpha_sweep(fn, params, profile, args.alpha_grid):
                rows.append(rep.to_dict())
            return rows, EXIT_OK
        return fn(params, profile, args.alpha), EXIT_OK
    if args.target == "vector":
        theta = None if args.theta is None else read_json(args.theta)
        return bounds.vector_bound(params, theta, args.variant, args.k, args.C), EXIT_OK
    if args.target == "poly":
        return bounds.slice_polynomial_bound(SymmetricCoefficients.load(args.coefficients), args.k, args.eps), EXIT_OK
    data = read_json(args.population)
    unknown = set(data) - {"n", "g", "mean"}
    if unknown or "g" not in data or "n" not in data:
        raise SpecError('population file must be {"n": int, "g": [...], "mean": float?}')
    g = [np.asarray(x, dtype=float) for x in data["g"]]
    return bounds.finite_population_bound(bounds.population_norms(g), int(data["n"]), len(g), data.get("mean")), EXIT_OK


def _cmd_decompose(args):
    z = double_tensor_from_dict(read_json(args.tensor))
    result = decomposition.decompose_z(z, args.tol)
    report = {
        "r": result.r,
        "n": result.n,
        "constant": result.constant,
        "weights": [w for w, _ in result.components],
        "components": [xi.tolist() for _, xi in result.components],
    }
    if not args.verify_exhaustive:
        return report, EXIT_OK
    if math.factorial(result.n) > args.budget:
        raise ScaleError(f"{result.n}! permutations exceed budget {args.budget}")
    check = decomposition.verify_exhaustive(z, result)
    report["verification"] = check
    return report, EXIT_OK if check["failures"] == 0 else EXIT_FAILED


def _cmd_simulate(args):
    comps = _load_components(args)
    n = comps[0].shape[0]
    if args.exact:
        dist = empirics.exact_wstat_distribution(comps, n)
        slack = 0.0
        samples = None
    else:
        dist = empirics.EmpiricalDistribution.from_samples(
            empirics.simulate_wstat(comps, args.samples, _need_seed(args)))
        slack = empirics.dkw_radius(args.samples, args.confidence)
        samples = args.samples
    if args.format == "csv":
        return dist, EXIT_OK
    dk = empirics.kolmogorov_distance(dist)
    try:
        bound = bounds.permutation_statistic_bound(comps)
        clamped = bound.clamped
        bound_dict = bound.to_dict()
    except TensorCLTError as exc:
        bound_dict, clamped = {"error": str(exc)}, None
    ok = clamped is None or dk <= clamped + 3 * slack
    report = {
        "n": n,
        "d": len(comps),
        "exact": bool(args.exact),
        "samples": samples,
        "seed": None if args.exact else args.seed,
        "kolmogorov_distance": dk,
        "dkw_radius": slack,
        "mean": dist.mean(),
        "variance": dist.variance(),
        "bound": bound_dict,
        "consistent": ok,
    }
    return report, EXIT_OK if ok else EXIT_FAILED


def _cmd_verify(args):
    if args.target == "identities":
        comps = _load_components(args)
        report = empirics.verify_identities(comps, rel_tol=args.tol)
    elif args.target == "pair":
        report = empirics.verify_pair(args.n)
    elif args.target == "gamma":
        report = empirics.verify_gamma(args.rmax)
    else:
        report = empirics.verify_variance(args.instances, args.seed, rel_tol=args.tol)
    return report, EXIT_OK if report["passed"] else EXIT_FAILED


COMMANDS = {
    "estimate": _cmd_estimate,
    "bound": _cmd_bound,
    "decompose": _cmd_decompose,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, code = COMMANDS[args.command](args)
        payload = render_report(report, args.format)
        if args.out is None:
            sys.stdout.buffer.write(payload)
            sys.stdout.flush()
        else:
            try:
                args.out.write_bytes(payload)
            except OSError as exc:
                raise InputOutputError(f"cannot write {args.out}: {exc.strerror}") from exc
    except TensorCLTError as exc:
        print(f"tensorclt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream reader closed early, e.g. piping into head
        sys.stderr.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
