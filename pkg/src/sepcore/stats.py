"""Test statistics on the sample core and random-matrix reference quantities.

All statistics here are functions of the eigenvalues of the sample core, or
of the singular values of its rearrangement, so their null distributions do
not depend on the separable component of the data covariance and can be
calibrated exactly by Monte Carlo under any fully specified sampling
distribution.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import matcore
from ._tw1 import tw1_cdf, tw1_quantile  # noqa: F401  (re-exported)
from .errors import SingularSample
from .kcd import SeparableFactor
from .matcore import Shape

__all__ = [
    "StatKind",
    "EdgeQuantities",
    "TestReport",
    "t1",
    "t2",
    "t3",
    "t3_singular_sum",
    "lrt",
    "xi_plus",
    "edge_quantities",
    "identity_edge_quantities",
    "t1_transforms",
    "t2_transform",
    "t3_transform",
    "mp_log_moment",
    "tw1_cdf",
    "tw1_quantile",
    "mp_density",
    "mp_cdf",
    "mp_support",
    "bbp_limit",
    "ks_distance",
    "normal_quantile",
]


class StatKind(str, enum.Enum):
    T1 = "t1"      # largest core eigenvalue
    T1A = "t1a"    # gamma0 n^(2/3) (T1 - E+), deterministic centering
    T1B = "t1b"    # gamma0 n^(2/3) (T1 - E+hat), centering from the fitted factor
    T2 = "t2"      # extended LRT sphericity statistic of the core
    T2T = "t2t"    # T2 recentred by the limiting log moment
    T3 = "t3"      # ||C||_F^2 / p - 1  (John statistic of the core)
    T3T = "t3t"    # n T3 - p - 1
    T3S = "t3s"    # sum of rearrangement singular values / sqrt(p) - 1
    LRT = "lrt"    # classical separability likelihood ratio (needs n >= p)


#: Raw statistic underlying each transformed kind.
BASE_KIND = {
    StatKind.T1A: StatKind.T1,
    StatKind.T1B: StatKind.T1,
    StatKind.T2T: StatKind.T2,
    StatKind.T3T: StatKind.T3,
}


@dataclass(frozen=True)
class EdgeQuantities:
    """Centering/scaling constants for the largest-eigenvalue statistic."""

    gamma_hat: float
    xi_plus: float
    gamma0: float
    e_plus: float


@dataclass(frozen=True)
class TestReport:
    kind: StatKind
    raw: float
    transformed: float | None
    n: int
    shape: Shape
    calibration: dict
    critical_value: float
    reject: bool
    alpha: float

    def to_dict(self) -> dict:
        return {
            "stat": self.kind.value,
            "raw": self.raw,
            "transformed": self.transformed,
            "n": self.n,
            "p1": self.shape.p1,
            "p2": self.shape.p2,
            "calibration": self.calibration,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "alpha": self.alpha,
        }


def t1(core_eigs: np.ndarray) -> float:
    """Largest eigenvalue of the sample core; equals 1 iff the core is spherical."""
    core_eigs = np.asarray(core_eigs, dtype=float)
    if core_eigs.size == 0:
        raise ValueError("empty spectrum")
    return float(np.max(core_eigs))


def t2(core_eigs: np.ndarray, p: int) -> float:
    """Extended-LRT sphericity statistic applied to core eigenvalues.

    Uses the simplification available on cores, whose eigenvalues sum to p:
    ``-sum_i log(u_i + 1) + p log p``.
    """
    u = np.asarray(core_eigs, dtype=float)
    if u.size != p:
        raise ValueError(f"expected {p} eigenvalues, got {u.size}")
    u = matcore.clamp_psd_eigenvalues(u)
    return float(-np.sum(np.log1p(u)) + p * np.log(p))


def t3(core: np.ndarray) -> float:
    """John-type statistic ||C||_F^2 / p - 1 of the sample core."""
    c = np.asarray(core, dtype=float)
    p = c.shape[0]
    return float(np.sum(c * c) / p - 1.0)


def t3_singular_sum(core: np.ndarray, shape: Shape) -> float:
    """Sum of rearrangement singular values over sqrt(p), minus 1."""
    sigma = matcore.singular_values(matcore.rearrange(np.asarray(core, dtype=float), shape))
    return float(np.sum(sigma) / np.sqrt(shape.p) - 1.0)


def lrt(s: np.ndarray, k: SeparableFactor, n: int) -> float:
    """Separability likelihood ratio n (log|K2 (x) K1| - log|S|).

    Requires a strictly positive definite sample covariance (so n >= p).
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    if n < p:
        raise SingularSample(f"LRT needs n >= p, got n={n}, p={p}")
    sign, logdet_s = np.linalg.slogdet(s)
    if sign <= 0 or not np.isfinite(logdet_s):
        raise SingularSample("sample covariance is rank deficient")
    return float(n * (k.logdet() - logdet_s))


def _edge_integrand(x: float, eigs: np.ndarray) -> float:
    r = eigs * x / (1.0 - eigs * x)
    return float(np.mean(r * r))


def xi_plus(eigs: np.ndarray, gamma_hat: float, max_iter: int = 200) -> float:
    """Unique root of mean((t x / (1 - t x))^2) = 1/gamma_hat on [0, 1/max(t)).

    The integrand is strictly increasing in x on the interval, so plain
    bisection converges; the defining residual is checked to 1e-12 relative.
    """
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs <= 0):
        raise ValueError("spectrum must be strictly positive")
    target = 1.0 / gamma_hat
    lo = 0.0
    hi = (1.0 - 1e-14) / float(np.max(eigs))
    if _edge_integrand(hi, eigs) < target:
        raise RuntimeError("bisection bracket failed; target not reachable")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _edge_integrand(mid, eigs) < target:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    if abs(_edge_integrand(x, eigs) - target) > 1e-12 * max(1.0, target):
        raise RuntimeError("bisection did not meet the residual tolerance")
    return x


def edge_quantities(eigs: np.ndarray, n: int, p: int) -> EdgeQuantities:
    """Edge constants (xi+, gamma0, E+) for a reference spectrum ``eigs``."""
    eigs = np.asarray(eigs, dtype=float)
    gamma_hat = p / n
    x = xi_plus(eigs, gamma_hat)
    denom = 1.0 - eigs * x
    inv_gamma0_cubed = gamma_hat * float(np.mean((eigs / denom) ** 3)) + 1.0 / x**3
    gamma0 = inv_gamma0_cubed ** (-1.0 / 3.0)
    e_plus = (1.0 + gamma_hat * float(np.mean(eigs * x / denom))) / x
    return EdgeQuantities(gamma_hat=gamma_hat, xi_plus=x, gamma0=gamma0, e_plus=e_plus)


def identity_edge_quantities(n: int, p: int) -> EdgeQuantities:
    """Closed-form edge constants for the identity reference spectrum."""
    g = p / n
    sg = np.sqrt(g)
    return EdgeQuantities(
        gamma_hat=g,
        xi_plus=1.0 / (1.0 + sg),
        gamma0=(sg / (1.0 + sg) ** 4) ** (1.0 / 3.0),
        e_plus=(1.0 + sg) ** 2,
    )


def t1_transforms(
    t1_val: float,
    edge_i: EdgeQuantities,
    edge_hat: EdgeQuantities | None,
    n: int,
) -> tuple[float, float | None]:
    """Tracy-Widom domain transforms of the largest core eigenvalue.

    The first uses the deterministic centering E+; the second recentres by
    the E+ of the inverse fitted Kronecker factor and is only available when
    that factor is known (simulation paths).  Both use the deterministic
    scale gamma0.
    """
    scale = edge_i.gamma0 * n ** (2.0 / 3.0)
    t1a = scale * (t1_val - edge_i.e_plus)
    t1b = scale * (t1_val - edge_hat.e_plus) if edge_hat is not None else None
    return t1a, t1b


def _mp_log_moment_branch(y: float, low_ratio: bool) -> float:
    sy = np.sqrt(y)
    a1 = (y + 2.0 - np.sqrt(y * y + 4.0)) / (2.0 * sy)
    value = -0.5 * (2.0 * a1 / sy - (y + 1.0) / y * np.log(sy / a1))
    if low_ratio:
        value -= 0.5 * ((1.0 - y) / y) * (np.log(1.0 - a1 * sy) + np.log(sy / a1 - y))
    else:
        value -= 0.5 * ((y - 1.0) / y) * (np.log(1.0 - a1 / sy) + np.log(sy / a1 - 1.0))
    return float(value)


def mp_log_moment(y: float) -> float:
    """Limit of mean(log(1 + u_i)) for eigenvalues u of a ratio-y Wishart.

    Piecewise closed form with a branch split at y = 1; both branches agree
    at the split.
    """
    if y <= 0:
        raise ValueError("ratio must be positive")
    return _mp_log_moment_branch(y, low_ratio=y < 1.0)


def t2_transform(t2_val: float, n: int, p: int) -> float:
    """Recentre T2 by its limiting log moment: T2 + p F(log(1+x)) - p log p."""
    return float(t2_val + p * mp_log_moment(p / n) - p * np.log(p))


def t3_transform(t3_val: float, n: int, p: int) -> float:
    """Affine map n T3 - p - 1 used for reporting and tabulated critical values."""
    return float(n * t3_val - p - 1.0)


def mp_support(gamma: float, sigma2: float = 1.0) -> tuple[float, float]:
    """Support edges sigma^2 (1 -+ sqrt(gamma))^2 of the Marchenko-Pastur bulk."""
    sg = np.sqrt(gamma)
    return sigma2 * (1.0 - sg) ** 2, sigma2 * (1.0 + sg) ** 2


def mp_density(x, gamma: float, sigma2: float = 1.0):
    """Absolutely continuous part of the Marchenko-Pastur density.

    For gamma > 1 there is an additional point mass 1 - 1/gamma at zero,
    accounted for by :func:`mp_cdf`.
    """
    if gamma <= 0 or sigma2 <= 0:
        raise ValueError("gamma and sigma2 must be positive")
    lo, hi = mp_support(gamma, sigma2)
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xv = np.where(inside, x, 1.0)
    out = np.where(
        inside,
        np.sqrt(np.maximum((hi - xv) * (xv - lo), 0.0)) / (2.0 * np.pi * sigma2 * gamma * xv),
        0.0,
    )
    return float(out) if out.ndim == 0 else out


# Gauss-Legendre rule reused by mp_cdf; 128 nodes on the trig-substituted
# integrand is accurate to well below the 1e-8 mass contract.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


def mp_cdf(x, gamma: float, sigma2: float = 1.0):
    """Marchenko-Pastur CDF, including the atom at zero when gamma > 1.

    The bulk integral is evaluated after the substitution
    x = lo + (hi - lo) sin^2(theta), which removes the inverse-square-root
    edge singularities and leaves a smooth integrand for fixed-order
    Gauss-Legendre quadrature.
    """
    if gamma <= 0 or sigma2 <= 0:
        raise ValueError("gamma and sigma2 must be positive")
    lo, hi = mp_support(gamma, sigma2)
    atom = max(0.0, 1.0 - 1.0 / gamma)
    x = np.asarray(x, dtype=float)
    frac = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    theta_x = np.arcsin(np.sqrt(frac))

    # integrate g(theta) = (hi-lo)^2 sin^2 cos^2 / (pi sigma2 gamma t(theta))
    half = theta_x[..., None] / 2.0
    nodes = half * (_GL_NODES + 1.0)
    t = lo + (hi - lo) * np.sin(nodes) ** 2
    g = (hi - lo) ** 2 * (np.sin(nodes) * np.cos(nodes)) ** 2 / (np.pi * sigma2 * gamma * t)
    bulk = np.sum(g * _GL_WEIGHTS, axis=-1) * half[..., 0]

    out = np.where(x < 0.0, 0.0, atom + bulk)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def bbp_limit(a: float, gamma: float, sigma2: float = 1.0) -> float:
    """Almost-sure limit of a sample eigenvalue over a spiked bulk.

    ``a`` is the ratio of the population spike to the noise level sigma^2.
    Above the detection threshold 1 + sqrt(gamma) the spike separates;
    otherwise the sample eigenvalue sticks to the bulk edge.
    """
    if a < 1.0:
        raise ValueError("spike ratio must be >= 1")
    sg = np.sqrt(gamma)
    if a > 1.0 + sg:
        return float(sigma2 * (a + gamma * a / (a - 1.0)))
    return float(sigma2 * (1.0 + sg) ** 2)


def ks_distance(empirical_eigs: np.ndarray, reference_cdf) -> float:
    """Kolmogorov-Smirnov distance between an ESD and a reference CDF.

    Both distribution functions are evaluated right-continuously at the jump
    points of the empirical distribution, so an ESD compared against itself
    gives exactly zero.  For a continuous reference this undershoots the
    full supremum by at most 1/m, immaterial at the pooled sample sizes the
    diagnostics use.
    """
    x = np.sort(np.asarray(empirical_eigs, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("empty spectrum")
    f = np.asarray(reference_cdf(x), dtype=float)
    # ties: the empirical CDF at a repeated value is the highest step
    ecdf = np.searchsorted(x, x, side="right") / m
    return float(np.max(np.abs(f - ecdf)))


def normal_quantile(q: float, mean: float = 0.0, variance: float = 1.0) -> float:
    """Quantile of a normal reference law (used for asymptotic comparisons)."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    return float(mean + np.sqrt(variance) * ndtri(q))
