"""Kronecker-core decomposition of covariance matrices.

The separable component of a covariance ``S`` is the minimizer of
``d(K; S) = tr(K^-1 S) + log|K|`` over ``K = K2 (x) K1``, i.e. the Kronecker
MLE.  It is computed by the flip-flop iteration, alternating the two
closed-form stationarity conditions

    K1 = (1 / (n p2)) sum_i Y_i K2^-1 Y_i^T
    K2 = (1 / (n p1)) sum_i Y_i^T K1^-1 Y_i

until both hold to tolerance.  The core component is ``C = H^-1 S H^-T``
where ``H`` is the identified square root (Cholesky or symmetric) of
``K2 (x) K1``; ``C = I`` exactly when ``S`` is separable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import matcore
from .errors import InsufficientSamples, SingularIterate
from .matcore import Shape, kron_conjugate, symmetrize


class RootKind(str, enum.Enum):
    """Which identified square root of the separable component defines the core."""

    CHOLESKY = "cholesky"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class FlipFlopConfig:
    max_iter: int = 500
    rel_tol: float = 1e-11          # relative change of the objective
    init: np.ndarray | None = None  # initial p2 x p2 factor; identity if None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


@dataclass(frozen=True)
class SeparableFactor:
    """SPD factor pair (k1, k2) representing K = k2 (x) k1.

    Identified by the determinant balance |k1|^(1/p1) = |k2|^(1/p2).
    """

    k1: np.ndarray
    k2: np.ndarray
    shape: Shape

    def matrix(self) -> np.ndarray:
        return np.kron(self.k2, self.k1)

    def logdet(self) -> float:
        s1 = 2.0 * np.sum(np.log(np.diag(matcore.cholesky(self.k1))))
        s2 = 2.0 * np.sum(np.log(np.diag(matcore.cholesky(self.k2))))
        return self.shape.p2 * s1 + self.shape.p1 * s2

    def root(self, kind: RootKind) -> tuple[np.ndarray, np.ndarray]:
        """Factor roots (h1, h2) with h_i h_i^T = k_i; h2 (x) h1 is the identified root."""
        if kind == RootKind.CHOLESKY:
            return matcore.cholesky(self.k1), matcore.cholesky(self.k2)
        return matcore.sym_sqrt(self.k1), matcore.sym_sqrt(self.k2)


@dataclass(frozen=True)
class KcdResult:
    kron: SeparableFactor
    root: np.ndarray       # identified square root H of kron.matrix()
    core: np.ndarray       # C = H^-1 S H^-T
    iterations: int
    objective: float       # d(K; S) at the final iterate
    converged: bool
    kind: RootKind


@dataclass
class _FlipFlopState:
    k1: np.ndarray
    k2: np.ndarray
    iterations: int
    objective: float
    converged: bool
    residual: float
    objective_trace: list[float] = field(default_factory=list)


def min_samples(shape: Shape) -> float:
    """Existence threshold for the Kronecker MLE of a sample covariance."""
    return shape.p1 / shape.p2 + shape.p2 / shape.p1


def _check_samples(n: int, shape: Shape) -> None:
    if n < min_samples(shape) - 1e-12:
        raise InsufficientSamples(
            f"n={n} below existence threshold p1/p2 + p2/p1 = {min_samples(shape):.6g} "
            f"for shape ({shape.p1}, {shape.p2})"
        )


def _spd_inverse(m: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    """Inverse and log-determinant of an SPD matrix via Cholesky."""
    try:
        c, low = sla.cho_factor(m, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise SingularIterate(f"{what} lost positive definiteness: {exc}") from exc
    diag = np.diag(c)
    if np.min(diag) <= 0.0 or not np.all(np.isfinite(diag)):
        raise SingularIterate(f"{what} lost positive definiteness")
    inv = sla.cho_solve((c, low), np.eye(m.shape[0]), check_finite=False)
    return symmetrize(inv), 2.0 * float(np.sum(np.log(diag)))


def _flip_flop(update1, update2, shape: Shape, cfg: FlipFlopConfig) -> _FlipFlopState:
    """Generic flip-flop loop over half-step updates.

    ``update1(w2)`` returns the p1 factor given the inverse of the p2 factor;
    ``update2(w1)`` the reverse.  Each half step is an exact coordinate
    minimization, so the objective is non-increasing sweep to sweep.
    """
    p1, p2, p = shape.p1, shape.p2, shape.p
    if cfg.init is None:
        k2 = np.eye(p2)
        w2, ld2 = np.eye(p2), 0.0
    else:
        k2 = symmetrize(np.asarray(cfg.init, dtype=float))
        w2, ld2 = _spd_inverse(k2, "initial factor")

    resid_tol = 10.0 * cfg.rel_tol
    prev_obj = None
    obj = np.inf
    trace = []
    residual = np.inf
    k1 = np.eye(p1)
    it = 0
    for it in range(1, cfg.max_iter + 1):
        k1 = symmetrize(update1(w2))
        w1, ld1 = _spd_inverse(k1, "p1 factor")
        k2 = symmetrize(update2(w1))
        w2, ld2 = _spd_inverse(k2, "p2 factor")

        # determinant balance |k1|^(1/p1) = |k2|^(1/p2); leaves K unchanged
        shift = (ld2 / p2 - ld1 / p1) / 2.0
        k1 *= np.exp(shift)
        k2 *= np.exp(-shift)
        w1 *= np.exp(-shift)
        w2 *= np.exp(shift)
        ld1 += p1 * shift
        ld2 -= p2 * shift

        # the k2 half-step makes tr(K^-1 S) = p exactly at (k1, k2)
        obj = p + p2 * ld1 + p1 * ld2
        trace.append(obj)

        probe = symmetrize(update1(w2))
        residual = float(np.linalg.norm(probe - k1) / np.linalg.norm(k1))
        if (
            prev_obj is not None
            and abs(obj - prev_obj) <= cfg.rel_tol * max(1.0, abs(obj))
            and residual <= resid_tol
        ):
            return _FlipFlopState(k1, k2, it, obj, True, residual, trace)
        prev_obj = obj

    return _FlipFlopState(k1, k2, it, obj, False, residual, trace)


def _flip_flop_cov(s: np.ndarray, shape: Shape, cfg: FlipFlopConfig) -> _FlipFlopState:
    """Flip-flop driven by the blocks of a covariance matrix."""
    t = matcore.block_view(symmetrize(s), shape)

    def update1(w2):
        return np.tensordot(w2, t, axes=([0, 1], [0, 2])) / shape.p2

    def update2(w1):
        return np.tensordot(w1, t, axes=([0, 1], [1, 3])) / shape.p1

    return _flip_flop(update1, update2, shape, cfg)


def _flip_flop_data(y: np.ndarray, shape: Shape, cfg: FlipFlopConfig) -> _FlipFlopState:
    """Flip-flop driven by stacked data matrices ``y`` of shape (n, p1, p2)."""
    n = y.shape[0]

    def update1(w2):
        m = y @ w2
        return np.tensordot(m, y, axes=([0, 2], [0, 2])) / (n * shape.p2)

    def update2(w1):
        m = np.matmul(w1, y)
        return np.tensordot(y, m, axes=([0, 1], [0, 1])) / (n * shape.p1)

    return _flip_flop(update1, update2, shape, cfg)


def unstack(data: np.ndarray, shape: Shape) -> np.ndarray:
    """Rows of ``data`` (n, p) as data matrices (n, p1, p2), column-stacked vec."""
    n = data.shape[0]
    if data.shape[1] != shape.p:
        raise ValueError(f"rows have length {data.shape[1]}, expected {shape.p}")
    return np.ascontiguousarray(data.reshape(n, shape.p2, shape.p1).transpose(0, 2, 1))


def kronecker_mle(
    shape: Shape,
    s: np.ndarray | None = None,
    data: np.ndarray | None = None,
    n: int | None = None,
    cfg: FlipFlopConfig | None = None,
) -> SeparableFactor:
    """Separable (Kronecker) component of a covariance matrix.

    Exactly one of ``s`` (a p x p covariance, with ``n`` the sample count
    behind it) or ``data`` (an n x p matrix of column-stacked vec rows) must
    be given.  ``n is None`` with ``s`` treats ``s`` as a population
    covariance and skips the sample-size existence check.

    Raises
    ------
    InsufficientSamples
        If ``n`` is below ``p1/p2 + p2/p1``.
    SingularIterate
        If an iterate loses positive definiteness.
    """
    state = _mle_state(shape, s=s, data=data, n=n, cfg=cfg)
    return SeparableFactor(state.k1, state.k2, shape)


def _mle_state(
    shape: Shape,
    s: np.ndarray | None = None,
    data: np.ndarray | None = None,
    n: int | None = None,
    cfg: FlipFlopConfig | None = None,
) -> _FlipFlopState:
    cfg = cfg or FlipFlopConfig()
    if (s is None) == (data is None):
        raise ValueError("provide exactly one of s= or data=")
    if data is not None:
        data = np.asarray(data, dtype=float)
        if not np.all(np.isfinite(data)):
            raise ValueError("data contains non-finite entries")
        _check_samples(data.shape[0], shape)
        return _flip_flop_data(unstack(data, shape), shape, cfg)
    s = np.asarray(s, dtype=float)
    if n is not None:
        _check_samples(n, shape)
    return _flip_flop_cov(s, shape, cfg)


def core(
    s: np.ndarray, k: SeparableFactor, kind: RootKind = RootKind.CHOLESKY
) -> tuple[np.ndarray, np.ndarray]:
    """Whiten ``s`` by the identified root of ``k``: returns (H, C = H^-1 s H^-T)."""
    shape = k.shape
    h1, h2 = k.root(kind)
    if kind == RootKind.CHOLESKY:
        eye1, eye2 = np.eye(shape.p1), np.eye(shape.p2)
        a1 = sla.solve_triangular(h1, eye1, lower=True, check_finite=False)
        a2 = sla.solve_triangular(h2, eye2, lower=True, check_finite=False)
    else:
        a1 = np.linalg.inv(h1)
        a2 = np.linalg.inv(h2)
    c = symmetrize(kron_conjugate(a1, a2, symmetrize(s), shape))
    return np.kron(h2, h1), c


def kcd(
    s: np.ndarray,
    n: int | None,
    shape: Shape,
    kind: RootKind = RootKind.CHOLESKY,
    cfg: FlipFlopConfig | None = None,
) -> KcdResult:
    """Full Kronecker-core decomposition of ``s``: S = H C H^T with H H^T separable."""
    s = symmetrize(np.asarray(s, dtype=float))
    state = _mle_state(shape, s=s, n=n, cfg=cfg)
    k = SeparableFactor(state.k1, state.k2, shape)
    h, c = core(s, k, kind)
    return KcdResult(
        kron=k,
        root=h,
        core=c,
        iterations=state.iterations,
        objective=state.objective,
        converged=state.converged,
        kind=kind,
    )
