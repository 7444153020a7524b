"""Monte Carlo calibration, size/power studies, and spectral diagnostics.

Replicates are seeded from (master_seed, replicate index), so results are
bit-identical regardless of the worker count, and reductions always happen
in replicate order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import generators, matcore, stats
from .errors import ConfigMismatch, SepcoreError
from .generators import Construction, Distribution, Gaussian, SamplerSpec, draw_data
from .kcd import RootKind, SeparableFactor, kcd as run_kcd
from .matcore import Shape
from .stats import StatKind

DEFAULT_REPS = 1000


@dataclass(frozen=True)
class McConfig:
    n: int
    shape: Shape
    reps: int = DEFAULT_REPS
    sampler: SamplerSpec = SamplerSpec(Gaussian())
    alpha: float = 0.05
    master_seed: int = 0
    root_kind: RootKind = RootKind.CHOLESKY
    stats: tuple[StatKind, ...] = (StatKind.T1, StatKind.T2, StatKind.T3)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not self.stats:
            raise ValueError("at least one statistic is required")

    def meta(self) -> dict:
        return {
            "n": self.n,
            "p1": self.shape.p1,
            "p2": self.shape.p2,
            "reps": self.reps,
            "dist": self.sampler.dist.name,
            "centered": self.sampler.centered,
            "alpha": self.alpha,
            "master_seed": self.master_seed,
            "root_kind": self.root_kind.value,
            "stats": [k.value for k in self.stats],
        }


@dataclass(frozen=True)
class McResult:
    samples: dict[StatKind, np.ndarray]
    critical_values: dict[StatKind, float]
    meta: dict

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "critical_values": {k.value: v for k, v in self.critical_values.items()},
            "samples": {k.value: v.tolist() for k, v in self.samples.items()},
        }


@dataclass(frozen=True)
class PowerResult:
    description: str
    reps: int
    rates: dict[StatKind, float]
    se: dict[StatKind, float]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "core": self.description,
            "reps": self.reps,
            "power": {k.value: v for k, v in self.rates.items()},
            "se": {k.value: v for k, v in self.se.items()},
            "meta": self.meta,
        }


@dataclass(frozen=True)
class Tw1Reference:
    def quantile(self, q: float) -> float:
        return stats.tw1_quantile(q)


@dataclass(frozen=True)
class NormalReference:
    mean: float
    variance: float

    def quantile(self, q: float) -> float:
        return stats.normal_quantile(q, self.mean, self.variance)


@dataclass(frozen=True)
class QuantileReference:
    """A fixed critical value, e.g. a Monte Carlo quantile from another run."""

    value: float

    def quantile(self, q: float) -> float:
        return self.value


def replicate_rng(master_seed: int, index: int, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(salt, index)))


def _run_ordered(count: int, worker, threads: int) -> list:
    threads = max(1, min(threads, count))
    if threads == 1:
        return [worker(j) for j in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(count)))


def mc_quantile(samples: np.ndarray, alpha: float) -> float:
    """Order statistic ceil((1 - alpha) J) of the sorted sample (type-1 quantile)."""
    j = samples.size
    k = math.ceil((1.0 - alpha) * j)
    return float(np.sort(samples)[max(k, 1) - 1])


def _needs(kinds, *wanted) -> bool:
    return any(k in kinds for k in wanted)


def compute_statistics(
    s: np.ndarray,
    n: int,
    shape: Shape,
    kinds: tuple[StatKind, ...],
    root_kind: RootKind = RootKind.CHOLESKY,
    edge_i: stats.EdgeQuantities | None = None,
) -> dict[StatKind, float]:
    """All requested statistics of one sample covariance via its KCD."""
    res = run_kcd(s, n, shape, root_kind)
    p = shape.p
    out: dict[StatKind, float] = {}
    eigs = None
    if _needs(kinds, StatKind.T1, StatKind.T1A, StatKind.T1B, StatKind.T2, StatKind.T2T):
        eigs = matcore.eig_sym(res.core)[0]
    if _needs(kinds, StatKind.T1, StatKind.T1A, StatKind.T1B):
        t1_val = stats.t1(eigs)
        if StatKind.T1 in kinds:
            out[StatKind.T1] = t1_val
        if StatKind.T1A in kinds or StatKind.T1B in kinds:
            edge_i = edge_i or stats.identity_edge_quantities(n, p)
            edge_hat = None
            if StatKind.T1B in kinds:
                e1 = np.linalg.eigvalsh(res.kron.k1)
                e2 = np.linalg.eigvalsh(res.kron.k2)
                edge_hat = stats.edge_quantities(1.0 / np.outer(e2, e1).ravel(), n, p)
            t1a, t1b = stats.t1_transforms(t1_val, edge_i, edge_hat, n)
            if StatKind.T1A in kinds:
                out[StatKind.T1A] = t1a
            if StatKind.T1B in kinds:
                out[StatKind.T1B] = t1b
    if _needs(kinds, StatKind.T2, StatKind.T2T):
        t2_val = stats.t2(eigs, p)
        if StatKind.T2 in kinds:
            out[StatKind.T2] = t2_val
        if StatKind.T2T in kinds:
            out[StatKind.T2T] = stats.t2_transform(t2_val, n, p)
    if _needs(kinds, StatKind.T3, StatKind.T3T):
        t3_val = stats.t3(res.core)
        if StatKind.T3 in kinds:
            out[StatKind.T3] = t3_val
        if StatKind.T3T in kinds:
            out[StatKind.T3T] = stats.t3_transform(t3_val, n, p)
    if StatKind.T3S in kinds:
        out[StatKind.T3S] = stats.t3_singular_sum(res.core, shape)
    if StatKind.LRT in kinds:
        out[StatKind.LRT] = stats.lrt(s, res.kron, n)
    return out


def _sample_cov(
    n: int,
    shape: Shape,
    dist: Distribution,
    rng: np.random.Generator,
    root: np.ndarray | None,
    centered: bool,
) -> np.ndarray:
    z = draw_data(n, shape.p, dist, rng)
    y = z if root is None else z @ root.T
    if centered:
        y = y - y.mean(axis=0, keepdims=True)
    return matcore.symmetrize(y.T @ y / n)


def _replicate_worker(cfg: McConfig, root: np.ndarray | None, edge_i, salt: int):
    def worker(j: int) -> dict[StatKind, float]:
        rng = replicate_rng(cfg.master_seed, j, salt)
        s = _sample_cov(cfg.n, cfg.shape, cfg.sampler.dist, rng, root, cfg.sampler.centered)
        try:
            return compute_statistics(s, cfg.n, cfg.shape, cfg.stats, cfg.root_kind, edge_i)
        except SepcoreError as exc:
            raise SepcoreError(f"replicate {j} failed: {exc}") from exc

    return worker


def _edge_if_needed(cfg: McConfig):
    if _needs(cfg.stats, StatKind.T1A, StatKind.T1B):
        return stats.identity_edge_quantities(cfg.n, cfg.shape.p)
    return None


def simulate_null(cfg: McConfig, threads: int = 1) -> McResult:
    """Null replicates under the identity covariance and their MC critical values.

    Kronecker-invariance of every statistic makes the identity the generic
    null: critical values calibrated here apply to any separable covariance.
    """
    start = time.perf_counter()
    rows = _run_ordered(cfg.reps, _replicate_worker(cfg, None, _edge_if_needed(cfg), salt=0), threads)
    samples = {k: np.array([row[k] for row in rows]) for k in cfg.stats}
    crit = {k: mc_quantile(v, cfg.alpha) for k, v in samples.items()}
    meta = cfg.meta() | {"wall_time": time.perf_counter() - start, "kind": "null"}
    return McResult(samples=samples, critical_values=crit, meta=meta)


def empirical_size(cfg: McConfig, reference, threads: int = 1) -> float:
    """Fraction of null replicates exceeding the reference (1 - alpha) quantile."""
    if len(cfg.stats) != 1:
        raise ValueError("empirical_size needs exactly one statistic in cfg.stats")
    kind = cfg.stats[0]
    crit = reference.quantile(1.0 - cfg.alpha)
    result = simulate_null(cfg, threads=threads)
    return float(np.mean(result.samples[kind] > crit))


def empirical_power(
    core: generators.CoreModel,
    cfg: McConfig,
    calibration: McResult,
    threads: int = 1,
    premultiply: np.ndarray | None = None,
) -> PowerResult:
    """Rejection rates against calibrated critical values under a core alternative.

    ``premultiply`` applies a fixed separable root to the data (same seeds);
    by Kronecker-invariance it must not change any rejection decision, which
    is exercised as a self-check in the test suite.
    """
    for key in ("n", "p1", "p2", "dist", "centered", "alpha", "root_kind"):
        if calibration.meta.get(key) != cfg.meta()[key]:
            raise ConfigMismatch(
                f"calibration {key}={calibration.meta.get(key)!r} does not match config {cfg.meta()[key]!r}"
            )
    missing = [k.value for k in cfg.stats if k not in calibration.critical_values]
    if missing:
        raise ConfigMismatch(f"calibration lacks critical values for {missing}")
    root = matcore.sym_sqrt(core.matrix)
    if premultiply is not None:
        root = premultiply @ root
    start = time.perf_counter()
    rows = _run_ordered(cfg.reps, _replicate_worker(cfg, root, _edge_if_needed(cfg), salt=1), threads)
    rates, se = {}, {}
    for k in cfg.stats:
        values = np.array([row[k] for row in rows])
        rate = float(np.mean(values > calibration.critical_values[k]))
        rates[k] = rate
        se[k] = float(np.sqrt(rate * (1.0 - rate) / cfg.reps))
    meta = cfg.meta() | {"wall_time": time.perf_counter() - start, "kind": "power"}
    return PowerResult(description=core.description, reps=cfg.reps, rates=rates, se=se, meta=meta)


def bbp_study(
    construction: Construction,
    c_values,
    p1: int,
    p2: int,
    n: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> list[dict]:
    """Mean top sample-core eigenvalues of spiked cores against their BBP limits.

    The non-spike level is lambda = 1 / (1 + r c / p), which pins the
    spike-to-noise ratio at 1 + c.
    """
    construction = Construction(construction)
    r = 2 if construction in (Construction.SQUARE2, Construction.LADDER2) else max(p1, p2) // min(p1, p2)
    shape = Shape(p1, p2)
    gamma = shape.p / n
    rows = []
    for ci, c in enumerate(c_values):
        lam = 1.0 / (1.0 + r * c / shape.p)

        def worker(j: int, lam=lam, ci=ci):
            rng = replicate_rng(seed, j, salt=1000 + ci)
            a = generators.make_rank_r_core(p1, p2, r, construction, rng)
            root = matcore.sym_sqrt(generators.partial_isotropy_core(a, lam))
            s = _sample_cov(n, shape, Gaussian(), rng, root, centered=False)
            res = run_kcd(s, n, shape)
            return matcore.eig_sym(res.core)[0][:r]

        tops = np.array(_run_ordered(reps, worker, threads))
        rows.append(
            {
                "c": float(c),
                "lam": lam,
                "gamma_hat": gamma,
                "spike_ratio": 1.0 + c,
                "limit": stats.bbp_limit(1.0 + c, gamma, lam),
                "bulk_edge": stats.bbp_limit(1.0, gamma, lam),
                "mean_eigs": tops.mean(axis=0).tolist(),
                "reps": reps,
            }
        )
    return rows


@dataclass(frozen=True)
class EsdDiagnostic:
    ks: float
    gamma_hat: float
    retained: int
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray

    def to_dict(self) -> dict:
        return {
            "ks": self.ks,
            "gamma_hat": self.gamma_hat,
            "retained": self.retained,
            "histogram_counts": self.histogram_counts.tolist(),
            "histogram_edges": self.histogram_edges.tolist(),
        }


def esd_diagnostic(cfg: McConfig, threads: int = 1, bins: int = 60) -> EsdDiagnostic:
    """KS distance between the pooled null core ESD and the MP law.

    When gamma_hat > 1 the p - n structurally zero eigenvalues of each
    replicate are dropped and the comparison is against the MP law
    conditioned on (0, inf), mirroring how the atom is usually displayed.
    """
    p = cfg.shape.p
    gamma_hat = p / cfg.n

    def worker(j: int) -> np.ndarray:
        rng = replicate_rng(cfg.master_seed, j, salt=2)
        s = _sample_cov(cfg.n, cfg.shape, cfg.sampler.dist, rng, None, cfg.sampler.centered)
        res = run_kcd(s, cfg.n, cfg.shape, cfg.root_kind)
        eigs = matcore.eig_sym(res.core)[0]
        if gamma_hat > 1.0:
            eigs = eigs[eigs > matcore.RANK_RTOL * eigs[0]]
        return eigs

    pooled = np.concatenate(_run_ordered(cfg.reps, worker, threads))
    if gamma_hat > 1.0:
        atom = 1.0 - 1.0 / gamma_hat

        def reference(x):
            return (stats.mp_cdf(x, gamma_hat) - atom) / (1.0 - atom)

    else:

        def reference(x):
            return stats.mp_cdf(x, gamma_hat)

    ks = stats.ks_distance(pooled, reference)
    counts, edges = np.histogram(pooled, bins=bins)
    return EsdDiagnostic(
        ks=ks,
        gamma_hat=gamma_hat,
        retained=pooled.size,
        histogram_counts=counts,
        histogram_edges=edges,
    )


@dataclass(frozen=True)
class T3LimitCheck:
    mean_t3: float
    mean_separable_ratio: float
    reps: int


def t3_limit_check(
    n: int,
    shape: Shape,
    reps: int,
    seed: int,
    k_factors: SeparableFactor | None = None,
    threads: int = 1,
) -> T3LimitCheck:
    """Mean of T3 under the Gaussian null, with the non-invariant contrast.

    The contrast statistic ||S||_F^2 / sigma_1(R(S))^2 - 1 skips the core
    map; its mean moves with the separable factor while mean T3 does not.
    """
    root = None
    if k_factors is not None:
        h1, h2 = k_factors.root(RootKind.CHOLESKY)
        root = np.kron(h2, h1)

    def worker(j: int) -> tuple[float, float]:
        rng = replicate_rng(seed, j, salt=3)
        s = _sample_cov(n, shape, Gaussian(), rng, root, centered=False)
        res = run_kcd(s, n, shape)
        sigma1 = matcore.singular_values(matcore.rearrange(s, shape))[0]
        ratio = float(np.sum(s * s) / sigma1**2 - 1.0)
        return stats.t3(res.core), ratio

    rows = np.array(_run_ordered(reps, worker, threads))
    return T3LimitCheck(mean_t3=float(rows[:, 0].mean()), mean_separable_ratio=float(rows[:, 1].mean()), reps=reps)
