"""Evaluators for the Berry-Esseen, Levy-concentration and oscillation bounds.

Every evaluator returns a :class:`BoundReport`.  Its ``terms`` are the named
error contributions, ``total`` is their sum, and ``clamped`` is
``min(1, total)``, since a Kolmogorov distance never exceeds one.  A vanishing
denominator makes a term infinite rather than raising.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    DeltaVector,
    SeminormProfile,
    set_row_cubic,
    set_seminorm,
    sigma_from_delta,
)
from .errors import (
    DegenerateError,
    DimensionError,
    MissingMomentError,
    NotHoeffdingError,
    NotNormalizedError,
    OverflowRangeError,
    RangeError,
    SmallNError,
)
from .hoeffding import is_hoeffding
from .models import TensorParams, exact_slice_params
from .tensor_core import SymmetricCoefficients, double_order

C1 = 451
KAPPA1 = 4320
MAX_CONSTANT_ORDER = 12
INF = math.inf


def _check_order(d: int) -> int:
    d = int(d)
    if d < 1:
        raise RangeError("d must be positive")
    if d > MAX_CONSTANT_ORDER:
        raise OverflowRangeError(f"constants for d={d} are not supported; use the log_* variants")
    return d


def kappa(d: int) -> float:
    d = _check_order(d)
    return float(20 * d**3 * 18**d * math.factorial(2 * d))


def const_Cd(d: int) -> float:
    d = _check_order(d)
    return 5.0 * d * d * math.exp(d) * math.factorial(2 * d)


def const_C1() -> float:
    return float(C1)


def log_kappa(d: int) -> float:
    return math.log(20) + 3 * math.log(d) + d * math.log(18) + math.lgamma(2 * d + 1)


def log_Cd(d: int) -> float:
    return math.log(5) + 2 * math.log(d) + d + math.lgamma(2 * d + 1)


def _div(num: float, den: float) -> float:
    if den == 0:
        return 0.0 if num == 0 else INF
    return num / den


def _pos_pow(x: float, e: float) -> float:
    return 0.0 if x <= 0 else x**e


@dataclass
class BoundReport:
    name: str
    terms: dict[str, float]
    sigma2: float | None = None
    sigma1_2: float | None = None
    feasible: bool = True
    diagnostic: str = ""
    constants: dict[str, float] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))

    @property
    def clamped(self) -> float:
        return min(1.0, self.total)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "terms": dict(self.terms),
            "total": self.total,
            "clamped": self.clamped,
            "sigma2": self.sigma2,
            "sigma1_2": self.sigma1_2,
            "feasible": self.feasible,
            "diagnostic": self.diagnostic,
            "constants": dict(self.constants),
            "warnings": list(self.warnings),
        }
        out.update(self.extras)
        return out


# -- gaussian comparisons -------------------------------------------------------

def gaussian_comparison(mu1: float, sigma1: float, mu2: float, sigma2: float) -> float:
    """Upper bound for ``d_K(N(mu1, sigma1^2), N(mu2, sigma2^2))``."""
    if sigma1 < 0 or sigma2 < 0:
        raise RangeError("standard deviations must be nonnegative")
    top = max(sigma1, sigma2)
    if top == 0:
        raise DegenerateError("both standard deviations vanish")
    return (abs(mu1 - mu2) + abs(sigma1 - sigma2)) / top


def mixture_comparison(EY2: float, sigma: float) -> float:
    """Upper bound for ``d_K`` between a gaussian mixture ``N(Y, sigma^2)`` and ``N(0, sigma^2)``."""
    if sigma <= 0 or EY2 < 0:
        raise RangeError("need sigma > 0 and E[Y^2] >= 0")
    return EY2 / (2.0 * math.sqrt(2.0 * math.pi * math.e) * sigma * sigma)


# -- permutation statistics -------------------------------------------------------

def permutation_statistic_bound(components: Sequence[np.ndarray], n: int | None = None, tol: float | None = None) -> BoundReport:
    """Kolmogorov bound for a normalized W-statistic built from Hoeffding tensors ``xi_1..xi_d``."""
    comps = [np.asarray(x, dtype=float) for x in components]
    if not comps:
        raise DimensionError("need at least the first-order component")
    d = len(comps)
    for s, xi in enumerate(comps, start=1):
        order, size = double_order(xi)
        if order != s:
            raise DimensionError(f"component {s} has order {order}")
        if n is None:
            n = size
        if size != n:
            raise DimensionError(f"component {s} has size {size}, expected {n}")
        if not is_hoeffding(xi, tol):
            raise NotHoeffdingError(f"component of order {s} is not a Hoeffding tensor")
    if d >= 2 and n < 4 * d * d:
        raise SmallNError(f"need n >= 4 d^2 = {4 * d * d}, got n={n}")
    beta = [float(np.sum(xi**2)) for xi in comps]
    if abs(beta[0] - (n - 1)) > 1e-9 * max(1.0, n - 1):
        raise NotNormalizedError(f"sum of squares of xi_1 is {beta[0]}, expected n - 1 = {n - 1}")
    lam = float(np.sum(np.abs(comps[0]) ** 3))
    cd = const_Cd(d)
    terms = {
        "bolthausen": 2.0**18 * C1 * lam / n,
        "higher": cd * sum(math.sqrt(beta[s - 1] / float(n) ** s) for s in range(2, d + 1)),
    }
    return BoundReport(
        name="permutation-statistic",
        terms=terms,
        sigma2=1.0,
        constants={"C1": C1, "Cd": cd},
        extras={"beta": beta, "Lambda": lam, "n": n, "d": d},
    )


def finite_population_bound(
    g_norms: Sequence[tuple[float, float]], n: int, d: int | None = None, mean: float | None = None
) -> BoundReport:
    """Bound for ``T = t(pi(1), ..., pi(d))`` from the norms ``(||g_s||_2, ||g_s||_3)`` of its pieces."""
    d = len(g_norms) if d is None else int(d)
    if len(g_norms) != d:
        raise DimensionError(f"expected {d} norm pairs, got {len(g_norms)}")
    if n < 4 * d * d:
        raise RangeError(f"need n >= 4 d^2 = {4 * d * d}")
    l2_1, l3_1 = (float(x) for x in g_norms[0])
    if l2_1 <= 0:
        raise RangeError("the first-order piece must be nonzero")
    cd = const_Cd(d)
    terms = {
        "bolthausen": 2.0**19 * C1 / math.sqrt(d * n) * (l3_1 / l2_1) ** 3,
        "higher": 2.0
        * cd
        * sum(
            (d / math.sqrt(n)) ** (s - 1) / math.factorial(s) * float(g_norms[s - 1][0]) / l2_1
            for s in range(2, d + 1)
        ),
    }
    sigma2 = d / (n - 1) * (1 - d / n) * l2_1**2
    extras = {"n": n, "d": d}
    if mean is not None:
        extras["mu"] = float(mean)
    return BoundReport("finite-population", terms, sigma2=sigma2, constants={"C1": C1, "Cd": cd}, extras=extras)


def population_norms(g: Sequence[np.ndarray]) -> list[tuple[float, float]]:
    out = []
    for gs in g:
        a = np.abs(np.asarray(gs, dtype=float))
        out.append((float(np.sqrt(np.sum(a**2))), float(np.sum(a**3) ** (1 / 3))))
    return out


# -- random tensors -----------------------------------------------------------------

def _variance(profile: SeminormProfile, sigma: Sequence[float]) -> float:
    d = profile.d
    return float(
        sum(math.comb(d, s) ** 2 * math.factorial(s) * sigma[s] * profile.values[s] ** 2 for s in range(d + 1))
    )


def _check_normalized(profile: SeminormProfile) -> None:
    if abs(profile.values[1] - 1.0) > 1e-9:
        raise NotNormalizedError(f"first seminorm is {profile.values[1]}; rescale theta so that it equals 1")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise RangeError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _param_warnings(params: TensorParams) -> list[str]:
    out = []
    if any(abs(x) > 1 + 1e-12 for x in params.delta):
        out.append("some delta_t lies outside [-1, 1]")
    se = params.stderr.get("delta1") if params.stderr else None
    if se and params.delta[1] < 10 * se:
        out.append(f"delta_1 = {params.delta[1]:.3g} is below 10 standard errors ({se:.3g})")
    return out


def tensor_bound(params: TensorParams, profile: SeminormProfile, alpha: float) -> BoundReport:
    """Kolmogorov bound ``E1 + E2 + E3`` for ``<theta, X>`` against ``N(0, sigma^2)``."""
    alpha = _check_alpha(alpha)
    _check_normalized(profile)
    d, n = params.d, params.n
    if profile.d != d:
        raise DimensionError(f"profile order {profile.d} differs from tensor order {d}")
    kap = kappa(d)
    d0, d1 = params.delta[0], params.delta[1]
    t0sq = profile.values[0] ** 2
    limits = {
        "osc": _pos_pow(params.osc, alpha),
        "B": _pos_pow(params.B, alpha),
        "kappa/n": (kap / n) ** alpha,
    }
    binding = max(limits, key=limits.get)
    feasible = d1 >= limits[binding]
    diagnostic = f"delta_1 = {d1:.6g} vs max term {binding} = {limits[binding]:.6g}"

    E1 = (
        5 * _pos_pow(params.osc, 1 - alpha)
        + 5 * _pos_pow(abs(d0), 1 - alpha)
        + abs(_div(d0 * (t0sq - 1), d * d * d1))
        + 6 * kap / n ** (1 - alpha)
        + 4 * t0sq / n
    )
    E2 = 2.0**36 * _div(params.K3, _pos_pow(d1, 1.5)) * profile.row_cubic if profile.row_cubic else 0.0
    slack = 16 * d * d * 2**d / n
    acc = sum(
        math.comb(d, s) * math.sqrt(math.factorial(s)) * math.sqrt(max(0.0, params.sigma[s] + slack)) * profile.values[s]
        for s in range(2, d + 1)
    )
    E3 = 3 * kap * _div(acc, d * _pos_pow(d1, 0.5))
    report = BoundReport(
        name="random-tensor",
        terms={"E1": E1, "E2": E2, "E3": E3},
        sigma2=_variance(profile, params.sigma),
        sigma1_2=d * d * (1 - t0sq / n) * d1,
        feasible=feasible,
        diagnostic=diagnostic,
        constants={"kappa": kap},
        extras={"alpha": alpha},
        warnings=_param_warnings(params),
    )
    return report


def extendible_tensor_bound(params: TensorParams, profile: SeminormProfile, alpha: float) -> BoundReport:
    """Bound ``E''1 + E''2 + E''3`` for infinitely extendible tensors."""
    alpha = _check_alpha(alpha)
    _check_normalized(profile)
    d = params.d
    if params.pc is None:
        raise MissingMomentError("pc is required")
    kap = kappa(d)
    d0, d1 = params.delta[0], params.delta[1]
    notes = _param_warnings(params)
    if any(x < 0 for x in params.delta) or any(x < 0 for x in params.sigma):
        notes.append("negative delta or Sigma: inputs are not those of an extendible tensor; using |delta_0| and clamping Sigma at 0")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    t0sq = profile.values[0] ** 2
    limits = {"pc": _pos_pow(params.pc, alpha / 2), "delta0": _pos_pow(abs(d0), alpha)}
    binding = max(limits, key=limits.get)
    E1 = (
        5 * _pos_pow(params.pc, (1 - alpha) / 2)
        + 5 * _pos_pow(abs(d0), 1 - alpha)
        + _div(abs(d0), d * d * d1) * abs(t0sq - 1)
    )
    E2 = 2.0**36 * _div(params.K3, _pos_pow(d1, 1.5)) * profile.row_cubic if profile.row_cubic else 0.0
    acc = sum(
        math.comb(d, s) * math.sqrt(math.factorial(s)) * math.sqrt(max(0.0, params.sigma[s])) * profile.values[s]
        for s in range(2, d + 1)
    )
    E3 = 3 * kap * _div(acc, d * _pos_pow(d1, 0.5))
    return BoundReport(
        name="extendible-tensor",
        terms={"E1": E1, "E2": E2, "E3": E3},
        sigma2=_variance(profile, params.sigma),
        feasible=d1 > limits[binding],
        diagnostic=f"delta_1 = {d1:.6g} vs max term {binding} = {limits[binding]:.6g}",
        constants={"kappa": kap},
        extras={"alpha": alpha},
        warnings=notes,
    )


def vector_bound(
    params: TensorParams,
    theta: Sequence[float] | None = None,
    variant: str = "general",
    k: int | None = None,
    C: float | None = None,
) -> BoundReport:
    """Vector (``d = 1``) bounds: a general unit ``theta``, the normalized sum of ``k`` entries, or isotropic entries."""
    if params.d != 1:
        raise DimensionError("vector bounds need d = 1")
    n = params.n
    d0 = params.delta[0]
    notes = _param_warnings(params)
    consts = {"kappa1": KAPPA1}
    if variant == "sum-of-k":
        if k is None or not 1 <= k <= n:
            raise RangeError(f"k must lie in [1, {n}]")
        C = n * abs(d0) if C is None else float(C)
        if abs(d0) > C / n + 1e-15:
            raise RangeError(f"|delta_0| = {abs(d0)} exceeds C/n = {C / n}")
        terms = {
            "osc": 5 * params.osc,
            "k/n": (8 * C + KAPPA1 + 1) * k / n,
            "cubic": KAPPA1 * params.K3 / math.sqrt(k),
        }
        return BoundReport("vector-sum", terms, sigma2=params.delta[1] + (k - 1) * d0,
                           constants=consts, extras={"k": k, "C": C}, warnings=notes)
    if theta is None:
        raise DimensionError("theta is required for this variant")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n,):
        raise DimensionError(f"theta must have length {n}")
    if abs(float(np.sum(theta**2)) - 1) > 1e-9:
        raise NotNormalizedError("theta must be a unit vector")
    total = float(np.sum(theta))
    cubic = float(np.sum(np.abs(theta) ** 3))
    sigma2 = d0 * total**2 + (params.delta[1] - d0)
    if variant == "general":
        terms = {
            "osc": 5 * params.osc,
            "delta0": 6 * abs(d0),
            "kappa1/n": KAPPA1 / n,
            "sum": (abs(d0) + 1 / n) * total**2,
            "cubic": KAPPA1 * params.K3 * cubic,
        }
        return BoundReport("vector", terms, sigma2=sigma2, constants=consts, warnings=notes)
    if variant == "isotropic":
        if params.K4 is None or params.pc is None:
            raise MissingMomentError("isotropic variant needs K4 and pc")
        tau = n * params.pc
        terms = {
            "leading": (5 * math.sqrt(tau) + 5 * math.sqrt(params.K4) + KAPPA1) / math.sqrt(n),
            "sum": total**2 / n,
            "cubic": 2 * KAPPA1 * params.K3 * cubic,
        }
        return BoundReport("vector-isotropic", terms, sigma2=1.0, constants=consts,
                           extras={"tau": tau}, warnings=notes)
    raise ValueError(f"unknown variant {variant!r}")


def osc_upper_bounds(params: TensorParams, flavor: str) -> float:
    n, d = params.n, params.d

    def need(name):
        value = getattr(params, name)
        if value is None:
            raise MissingMomentError(f"flavor {flavor!r} needs {name}")
        return value

    if flavor == "fourth-moment":
        return math.sqrt(need("pc")) + math.sqrt(need("K4")) / math.sqrt(n)
    if flavor == "third-moment":
        return math.sqrt(need("pc")) + 4 * need("K3") / n**0.25
    if flavor == "tensor-fourth":
        return math.sqrt(need("pc")) + 5 * d / math.sqrt(n) * math.sqrt(abs(params.delta[1]) + need("K4"))
    if flavor == "dissociated":
        return 16 * d * (need("K3") + 1) / n**0.25
    if flavor == "mixture":
        return math.sqrt(need("pc")) + 16 * d * (need("K3") + 1) / n**0.25
    raise ValueError(f"unknown flavor {flavor!r}")


# -- polynomials on the slice ------------------------------------------------------------

def slice_k_range(n: int, d: int) -> tuple[float, float]:
    """Admissible ``k`` interval for the slice bound."""
    width = 2 * kappa(d) * n ** (1 - 1 / (2 * d))
    return width, n - width


def slice_polynomial_bound(c: SymmetricCoefficients, k: int, eps: float = 0.0) -> BoundReport:
    """Variance window and Levy-concentration bound for ``f(xi)`` with ``xi`` uniform on the ``k``-slice."""
    n, d = c.n, c.d
    if not 0 <= k <= n:
        raise RangeError(f"k={k} outside [0, {n}]")
    if eps < 0:
        raise RangeError("eps must be nonnegative")
    if n < 2 * d:
        raise RangeError(f"need n >= 2d = {2 * d} for the slice parameters")
    p = k / n
    q = 1 - p
    kap = kappa(d)
    a = [set_seminorm(c, s) for s in range(d + 1)]
    cubic = set_row_cubic(c)
    sig = exact_slice_params(n, k, d).sigma
    sigma2 = float(sum(sig[s] * a[s] ** 2 for s in range(d + 1)))
    sigma2 = max(sigma2, 0.0) if sigma2 > -1e-12 else sigma2
    center = sum(p ** (2 * d - s) * q**s * a[s] ** 2 for s in range(1, d + 1))
    A = _div(12 * d * d * 2**d * a[0] ** 2, q**d * n)
    Bc = _div(12 * d * d * 2**d, p * q**d * n)
    radius = A + Bc * sigma2
    if Bc < 1:
        # sigma^2 <= center + A + B sigma^2
        sigma2_max = (center + A) / (1 - Bc)
        conservative = A + Bc * sigma2_max
    else:
        conservative = INF
    sigma = math.sqrt(max(sigma2, 0.0))
    terms = {
        "gaussian": _div(eps, math.sqrt(2 * math.pi) * sigma),
        "kappa": _div(16 * kap, math.sqrt(p) * math.sqrt(n)),
        "mean": _div(12 * d * d * a[0] ** 2, q * a[1] ** 2 * n),
        "cubic": _div(2.0**39 * p**1.5 * cubic, p ** (3 * d) * q**1.5 * a[1] ** 3),
        "higher": _div(
            16 * kap * math.sqrt(p) * sum(math.sqrt(p ** (2 * d - s) * q**s) * a[s] for s in range(2, d + 1)),
            p**d * math.sqrt(q) * a[1],
        ),
    }
    lo, hi = slice_k_range(n, d)
    n_ok = math.log(n) >= 2 * d * math.log(4 * kap) if n > 0 else False
    hypothesis_met = n_ok and lo <= k <= hi
    notes = []
    if p in (0.0, 1.0):
        notes.append(f"degenerate p = {p}: some terms are infinite")
    return BoundReport(
        name="slice-polynomial",
        terms=terms,
        sigma2=sigma2,
        feasible=hypothesis_met,
        diagnostic="size hypotheses met" if hypothesis_met else "size hypotheses not met; formulas evaluated anyway",
        constants={"kappa": kap},
        extras={
            "p": p,
            "k": k,
            "eps": eps,
            "hypothesis_met": hypothesis_met,
            "variance_center": center,
            "variance_radius": radius,
            "variance_radius_conservative": conservative,
            "variance_in_window": abs(sigma2 - center) <= radius * (1 + 1e-12) + 1e-15,
            "set_seminorms": a,
        },
        warnings=notes,
    )


def alpha_sweep(evaluator, params, profile, alphas: Sequence[float]) -> list[BoundReport]:
    return [evaluator(params, profile, a) for a in alphas]


def params_from_mapping(data: Mapping) -> TensorParams:
    """Build :class:`TensorParams` from a plain mapping (``sigma`` is derived when absent)."""
    delta = tuple(float(x) for x in data["delta"])
    sigma = tuple(data.get("sigma") or sigma_from_delta(DeltaVector(delta)).sigma)
    return TensorParams(
        n=int(data["n"]),
        d=int(data["d"]),
        delta=delta,
        sigma=tuple(float(x) for x in sigma),
        osc=float(data.get("osc", 0.0)),
        pc=None if data.get("pc") is None else float(data["pc"]),
        B=float(data.get("B", 0.0)),
        K3=float(data.get("K3", 1.0)),
        K4=None if data.get("K4") is None else float(data["K4"]),
        provenance=str(data.get("provenance", "user")),
        samples=data.get("samples"),
        seed=data.get("seed"),
        stderr={str(k): float(v) for k, v in (data.get("stderr") or {}).items()},
    )
