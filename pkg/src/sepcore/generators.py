"""Population core constructions, shrinkage families, and data samplers.

A (population) core is a PSD matrix whose partial traces are p2 I and p1 I;
equivalently its own separable component is the identity.  Rank-r
partial-isotropy cores C = (1 - lambda) A A^T + lambda I exist only for
dimension triples (p1, p2, r) classified by :func:`rank_feasible`;
:func:`make_rank_r_core` builds the factor A for the three explicit
constructions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import IncompatibleParameters
from .kcd import kcd as run_kcd
from .matcore import Shape

CORE_CONSTRAINT_TOL = 1e-6


class Construction(str, enum.Enum):
    SQUARE2 = "square2"        # (p1, p1, 2)
    LADDER2 = "ladder2"        # ((k+1)m, km, 2)
    ORTHOBLOCK = "orthoblock"  # (r p2, p2, r), transposed when p2 = r p1


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    case: str | None                       # "strict" | "zero" | "gcd-square"
    constructions: tuple[Construction, ...]


@dataclass(frozen=True)
class Gaussian:
    name = "gaussian"


@dataclass(frozen=True)
class GammaStd:
    """Gamma(alpha, beta) standardized to mean 0, variance 1."""

    alpha: float
    beta: float

    @property
    def name(self) -> str:
        return f"gamma:{self.alpha:g},{self.beta:g}"


@dataclass(frozen=True)
class StudentT:
    """Student t with nu degrees of freedom, used raw (variance nu/(nu-2))."""

    nu: float

    @property
    def name(self) -> str:
        return f"t:{self.nu:g}"


Distribution = Gaussian | GammaStd | StudentT


def parse_distribution(text: str) -> Distribution:
    """Parse 'gaussian', 'gamma:alpha,beta', or 't:nu'."""
    text = text.strip().lower()
    if text == "gaussian":
        return Gaussian()
    if text.startswith("gamma:"):
        alpha, beta = (float(v) for v in text[len("gamma:"):].split(","))
        return GammaStd(alpha, beta)
    if text.startswith("t:"):
        return StudentT(float(text[len("t:"):]))
    raise ValueError(f"unknown distribution {text!r}")


@dataclass(frozen=True)
class SamplerSpec:
    dist: Distribution
    seed: int | None = None
    centered: bool = False  # subtract the sample mean before the covariance


@dataclass(frozen=True)
class CoreModel:
    """A materialized population core with an optional predicted spectrum."""

    shape: Shape
    matrix: np.ndarray
    description: str
    predicted_spikes: np.ndarray | None = None

    def __post_init__(self):
        shape = self.shape
        err1 = np.max(np.abs(matcore.partial_trace_1(self.matrix, shape) - shape.p2 * np.eye(shape.p1)))
        err2 = np.max(np.abs(matcore.partial_trace_2(self.matrix, shape) - shape.p1 * np.eye(shape.p2)))
        if max(err1, err2) > CORE_CONSTRAINT_TOL:
            raise ValueError(f"matrix violates the core partial-trace constraints by {max(err1, err2):.2e}")


def rank_feasible(p1: int, p2: int, r: int) -> Feasibility:
    """Classify (p1, p2, r) by the rank-r core existence trichotomy.

    The discriminant p1^2 + p2^2 - r p1 p2 must be negative, zero, or equal
    to gcd(p1, p2)^2; otherwise no rank-r core exists.
    """
    if min(p1, p2, r) < 1:
        raise ValueError("p1, p2, r must be positive integers")
    disc = p1 * p1 + p2 * p2 - r * p1 * p2
    d = math.gcd(p1, p2)
    if disc < 0:
        return Feasibility(True, "strict", ())
    if disc == 0:
        return Feasibility(True, "zero", _constructions(p1, p2, r))
    if disc == d * d:
        return Feasibility(True, "gcd-square", _constructions(p1, p2, r))
    return Feasibility(False, None, ())


def _constructions(p1: int, p2: int, r: int) -> tuple[Construction, ...]:
    out = []
    if r == 2 and p1 == p2:
        out.append(Construction.SQUARE2)
    if r == 2:
        hi, lo = max(p1, p2), min(p1, p2)
        m = hi - lo
        if m > 0 and lo % m == 0:
            out.append(Construction.LADDER2)
    if max(p1, p2) == r * min(p1, p2) and not (r == 2 and p1 == p2):
        out.append(Construction.ORTHOBLOCK)
    return tuple(out)


def haar_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign-corrected R diagonal)."""
    z = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def _haar_avoiding_identity(dim: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        o = haar_orthogonal(dim, rng)
        eye = np.eye(dim)
        if min(np.linalg.norm(o - eye), np.linalg.norm(o + eye)) > 1e-6:
            return o


def make_rank_r_core(
    p1: int, p2: int, r: int, construction: Construction, rng: np.random.Generator
) -> np.ndarray:
    """Factor A (p x r, columns vec(A_i)) with A A^T a rank-r core.

    The blocks satisfy sum_i A_i A_i^T = p2 I and sum_i A_i^T A_i = p1 I.
    Free orthogonal blocks are drawn Haar; the square construction rejects
    inner rotations within 1e-6 of +-I, which would collapse the rank.
    """
    construction = Construction(construction)
    if construction == Construction.SQUARE2:
        if p1 != p2 or r != 2:
            raise IncompatibleParameters(f"square2 needs p1 == p2 and r == 2, got ({p1}, {p2}, {r})")
        d = rng.uniform(0.2, 0.8)
        u = haar_orthogonal(p1, rng)
        v = haar_orthogonal(p1, rng)
        o = _haar_avoiding_identity(p1, rng)
        w1 = d * u @ v.T
        w2 = np.sqrt(1.0 - d * d) * u @ o @ v.T
        blocks = [np.sqrt(p1) * w1, np.sqrt(p1) * w2]
    elif construction == Construction.LADDER2:
        if r != 2:
            raise IncompatibleParameters("ladder2 needs r == 2")
        if p1 < p2:
            return _transpose_factor(make_rank_r_core(p2, p1, r, construction, rng), p2, p1, r)
        m = p1 - p2
        if m == 0 or p2 % m != 0:
            raise IncompatibleParameters(f"ladder2 needs (p1, p2) = ((k+1)m, km), got ({p1}, {p2})")
        k = p2 // m
        u = haar_orthogonal(p1, rng)
        v = haar_orthogonal(p2, rng)
        ublocks = [u[:, i * m:(i + 1) * m] for i in range(k + 1)]
        vblocks = [v[:, i * m:(i + 1) * m] for i in range(k)]
        a1 = np.zeros((p1, p2))
        a2 = np.zeros((p1, p2))
        for i in range(k):
            o = haar_orthogonal(m, rng)
            a1 += np.sqrt(m * (k - i)) * ublocks[i] @ vblocks[i].T
            a2 += np.sqrt(m * (i + 1)) * ublocks[i + 1] @ o @ vblocks[i].T
        blocks = [a1, a2]
    elif construction == Construction.ORTHOBLOCK:
        if p1 == r * p2:
            o = haar_orthogonal(p1, rng)
            blocks = [np.sqrt(p2) * o[:, i * p2:(i + 1) * p2] for i in range(r)]
        elif p2 == r * p1:
            return _transpose_factor(make_rank_r_core(p2, p1, r, construction, rng), p2, p1, r)
        else:
            raise IncompatibleParameters(f"orthoblock needs max(p1, p2) == r min(p1, p2), got ({p1}, {p2}, {r})")
    else:  # pragma: no cover
        raise IncompatibleParameters(f"unknown construction {construction}")
    return np.column_stack([b.reshape(-1, order="F") for b in blocks])


def _transpose_factor(a: np.ndarray, p1: int, p2: int, r: int) -> np.ndarray:
    """Swap the roles of the two dimensions: vec(A_i) -> vec(A_i^T)."""
    cols = [a[:, i].reshape(p1, p2, order="F").T.reshape(-1, order="F") for i in range(r)]
    return np.column_stack(cols)


def partial_isotropy_core(a: np.ndarray, lam: float) -> np.ndarray:
    """Materialize C = (1 - lambda) A A^T + lambda I."""
    p = a.shape[0]
    return (1.0 - lam) * (a @ a.T) + lam * np.eye(p)


def predicted_spikes(a: np.ndarray, lam: float, construction: Construction) -> np.ndarray:
    """Full predicted spectrum of (1 - lambda) A A^T + lambda I, descending.

    Ladder and orthoblock factors have r equal spikes (1 - lambda) p / r
    + lambda; the square construction has two spikes from the quadratic in
    the Gram determinant.
    """
    construction = Construction(construction)
    p, r = a.shape
    if construction in (Construction.LADDER2, Construction.ORTHOBLOCK):
        spikes = np.full(r, (1.0 - lam) * p / r + lam)
    else:
        p1 = int(round(np.sqrt(p)))
        gram = a.T @ a
        beta = float(np.linalg.det(gram)) / p1**2
        disc = np.sqrt(max(1.0 - 4.0 * beta / p1**2, 0.0))
        alphas = np.array([(1.0 + disc) / 2.0, (1.0 - disc) / 2.0])
        spikes = (1.0 - lam) * p1**2 * alphas + lam
    return np.concatenate([np.sort(spikes)[::-1], np.full(p - r, lam)])


def rank_r_core_model(
    p1: int, p2: int, r: int, lam: float, construction: Construction, rng: np.random.Generator
) -> CoreModel:
    """Partial-isotropy rank-r core model with its predicted spectrum."""
    a = make_rank_r_core(p1, p2, r, construction, rng)
    shape = Shape(p1, p2)
    return CoreModel(
        shape=shape,
        matrix=partial_isotropy_core(a, lam),
        description=f"{Construction(construction).value} r={r} lam={lam:g}",
        predicted_spikes=predicted_spikes(a, lam, construction),
    )


def random_core(shape: Shape, spectrum_hint: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Core of a random covariance with the given spectrum and Haar eigenvectors."""
    hint = np.asarray(spectrum_hint, dtype=float)
    if hint.size != shape.p or np.any(hint <= 0):
        raise ValueError("spectrum_hint must be p positive values")
    gamma = haar_orthogonal(shape.p, rng)
    sigma = matcore.symmetrize((gamma * hint) @ gamma.T)
    return run_kcd(sigma, n=None, shape=shape).core


def shrink_core(c: np.ndarray, w: float) -> np.ndarray:
    """Convex shrinkage w C + (1 - w) I toward the spherical core."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must be in [0, 1]")
    p = c.shape[0]
    return w * c + (1.0 - w) * np.eye(p)


def preset_spectrum(name: str, p: int) -> np.ndarray:
    """Spectrum recipe for a shipped spiked-core preset (c1 strong, c2 mild)."""
    if p % 2:
        raise ValueError("presets need even p")
    if name == "c1":
        return np.concatenate([[10.0], np.full(p // 2 - 1, 4.0), np.full(p // 2, 1.0)])
    if name == "c2":
        return np.concatenate([[4.0], np.full(p // 2 - 1, 3.0), np.full(p // 2, 2.0)])
    raise ValueError(f"unknown preset {name!r}; available: c1, c2")


def preset_core(name: str, shape: Shape, rng: np.random.Generator) -> CoreModel:
    matrix = random_core(shape, preset_spectrum(name, shape.p), rng)
    return CoreModel(shape=shape, matrix=matrix, description=f"preset {name}")


def shrunk_model(base: CoreModel, w: float) -> CoreModel:
    return CoreModel(
        shape=base.shape,
        matrix=shrink_core(base.matrix, w),
        description=f"{base.description} w={w:g}",
    )


def draw_data(n: int, p: int, dist: Distribution, rng: np.random.Generator) -> np.ndarray:
    """n x p matrix of i.i.d. draws from the base distribution."""
    if isinstance(dist, Gaussian):
        return rng.standard_normal((n, p))
    if isinstance(dist, GammaStd):
        w = rng.gamma(shape=dist.alpha, scale=1.0 / dist.beta, size=(n, p))
        return (w - dist.alpha / dist.beta) / np.sqrt(dist.alpha / dist.beta**2)
    if isinstance(dist, StudentT):
        return rng.standard_t(dist.nu, size=(n, p))
    raise TypeError(f"unknown distribution {dist!r}")


def sample_covariance_rng(
    n: int,
    root: np.ndarray | None,
    dist: Distribution,
    rng: np.random.Generator,
    centered: bool = False,
) -> np.ndarray:
    """Sample covariance of n draws with covariance root @ root.T (root=None: identity)."""
    p = root.shape[0] if root is not None else None
    if p is None:
        raise ValueError("root is required; pass np.eye(p) or use a p hint")
    z = draw_data(n, p, dist, rng)
    y = z @ root.T
    if centered:
        if n < 2:
            raise ValueError("centering needs n >= 2")
        y = y - y.mean(axis=0, keepdims=True)
    return matcore.symmetrize(y.T @ y / n)


def sample_covariance(n: int, root: np.ndarray, sampler: SamplerSpec) -> np.ndarray:
    """Deterministic sample covariance for a seeded sampler spec."""
    if sampler.seed is None:
        raise ValueError("sampler.seed must be set")
    rng = np.random.default_rng(sampler.seed)
    return sample_covariance_rng(n, root, sampler.dist, rng, centered=sampler.centered)
