"""Cross-module invariant suite behind ``sepcore validate``.

Each check returns a result row instead of raising, so the CLI can print a
full per-invariant report and exit nonzero if anything failed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore, stats
from .generators import haar_orthogonal
from .kcd import kcd as run_kcd, kronecker_mle
from .kcd import RootKind
from .matcore import Shape

CHECK_SHAPES = (Shape(2, 3), Shape(4, 4), Shape(4, 2))

COUNTEREXAMPLE_COV = 0.5 * np.array(
    [
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, -1.0, 0.0],
        [0.0, -1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 1.0],
    ]
)
COUNTEREXAMPLE_CORE = np.array(
    [
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, -1.0, 0.0],
        [0.0, -1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 1.0],
    ]
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_psd(rng: np.random.Generator, p: int, rank: int | None = None) -> np.ndarray:
    g = rng.standard_normal((p, rank or p + 2))
    return matcore.symmetrize(g @ g.T / g.shape[1])


def check_partial_traces(rng) -> CheckResult:
    worst = 0.0
    for shape in CHECK_SHAPES:
        for _ in range(5):
            m = _random_psd(rng, shape.p)
            t = np.trace(m)
            worst = max(
                worst,
                abs(np.trace(matcore.partial_trace_1(m, shape)) - t) / max(abs(t), 1.0),
                abs(np.trace(matcore.partial_trace_2(m, shape)) - t) / max(abs(t), 1.0),
            )
    return CheckResult("partial-trace-consistency", worst <= 1e-10, f"max rel err {worst:.2e}")


def check_rearrangement(rng) -> CheckResult:
    ok = True
    detail = []
    for shape in CHECK_SHAPES:
        m = _random_psd(rng, shape.p)
        r = matcore.rearrange(m, shape)
        iso = abs(np.linalg.norm(r) - np.linalg.norm(m))
        roundtrip = np.array_equal(matcore.rearrange_inverse(r, shape), m)
        ok = ok and iso == 0.0 and roundtrip
        detail.append(f"{shape.p1}x{shape.p2}: iso {iso:.1e}, roundtrip {roundtrip}")
    return CheckResult("rearrangement-isometry", ok, "; ".join(detail))


def check_core_constraints(rng) -> CheckResult:
    worst = 0.0
    for shape in CHECK_SHAPES:
        for _ in range(3):
            s = _random_psd(rng, shape.p)
            res = run_kcd(s, None, shape)
            worst = max(
                worst,
                np.max(np.abs(matcore.partial_trace_1(res.core, shape) - shape.p2 * np.eye(shape.p1))),
                np.max(np.abs(matcore.partial_trace_2(res.core, shape) - shape.p1 * np.eye(shape.p2))),
                abs(np.trace(res.core) - shape.p),
            )
    return CheckResult("core-partial-traces", worst <= 1e-6, f"max abs err {worst:.2e}")


def check_rearranged_core_singular_value(rng) -> CheckResult:
    worst = 0.0
    for shape in CHECK_SHAPES:
        s = _random_psd(rng, shape.p)
        res = run_kcd(s, None, shape)
        sigma1 = matcore.singular_values(matcore.rearrange(res.core, shape))[0]
        worst = max(worst, abs(sigma1 - np.sqrt(shape.p)))
    return CheckResult("rearranged-core-top-singular-value", worst <= 1e-7, f"max |s1 - sqrt(p)| {worst:.2e}")


def check_equivariance(rng) -> CheckResult:
    worst = 0.0
    for shape in (Shape(2, 3), Shape(4, 4)):
        for _ in range(3):
            sigma = _random_psd(rng, shape.p)
            g1 = rng.standard_normal((shape.p1, shape.p1))
            g2 = rng.standard_normal((shape.p2, shape.p2))
            g = np.kron(g2, g1)
            lhs = kronecker_mle(shape, s=g @ sigma @ g.T).matrix()
            rhs = g @ kronecker_mle(shape, s=sigma).matrix() @ g.T
            worst = max(worst, np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    return CheckResult("kronecker-map-equivariance", worst <= 1e-7, f"max rel err {worst:.2e}")


def check_spectrum_invariance(rng) -> CheckResult:
    shape = Shape(3, 2)
    worst = 0.0
    s0 = _random_psd(rng, shape.p)
    for kind in (RootKind.CHOLESKY, RootKind.SYMMETRIC):
        base = np.sort(np.linalg.eigvalsh(run_kcd(s0, None, shape, kind).core))
        for _ in range(3):
            k1 = _random_psd(rng, shape.p1) + np.eye(shape.p1)
            k2 = _random_psd(rng, shape.p2) + np.eye(shape.p2)
            half = np.kron(matcore.cholesky(k2), matcore.cholesky(k1))
            moved = np.sort(
                np.linalg.eigvalsh(run_kcd(half @ s0 @ half.T, None, shape, kind).core)
            )
            worst = max(worst, np.max(np.abs(moved - base)) / np.max(base))
    return CheckResult("core-spectrum-invariance", worst <= 1e-8, f"max rel err {worst:.2e}")


def check_counterexample(rng) -> CheckResult:
    shape = Shape(2, 2)
    res = run_kcd(COUNTEREXAMPLE_COV, 2, shape, RootKind.CHOLESKY)
    k_err = np.max(np.abs(res.kron.matrix() - 0.5 * np.eye(4)))
    c_err = np.max(np.abs(res.core - COUNTEREXAMPLE_CORE))
    ok = k_err <= 1e-8 and c_err <= 1e-8
    return CheckResult("counterexample-regression", ok, f"K err {k_err:.2e}, core err {c_err:.2e}")


def check_tw1_table(rng) -> CheckResult:
    grid = np.linspace(-6, 4, 101)
    cdf = np.asarray(stats.tw1_cdf(grid))
    monotone = bool(np.all(np.diff(cdf) >= 0))
    roundtrip = max(abs(stats.tw1_quantile(stats.tw1_cdf(x)) - x) for x in (-3.0, -1.0, 0.5, 2.0))
    median = stats.tw1_quantile(0.5)
    ok = monotone and roundtrip <= 1e-4 and -1.4 <= median <= -1.1
    return CheckResult(
        "tw1-table-sanity", ok, f"monotone {monotone}, roundtrip {roundtrip:.1e}, median {median:.3f}"
    )


def check_haar_orthogonality(rng) -> CheckResult:
    worst = 0.0
    for dim in (1, 3, 8):
        o = haar_orthogonal(dim, rng)
        worst = max(worst, np.max(np.abs(o.T @ o - np.eye(dim))))
    return CheckResult("haar-orthogonality", worst <= 1e-10, f"max residual {worst:.2e}")


ALL_CHECKS = (
    check_partial_traces,
    check_rearrangement,
    check_core_constraints,
    check_rearranged_core_singular_value,
    check_equivariance,
    check_spectrum_invariance,
    check_counterexample,
    check_tw1_table,
    check_haar_orthogonality,
)


def run_all(seed: int = 20240817) -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS:
        rng = np.random.default_rng(seed)
        try:
            results.append(fn(rng))
        except Exception as exc:  # a crash is a failure, not an abort
            name = fn.__name__.removeprefix("check_").replace("_", "-")
            results.append(CheckResult(name, False, f"raised {type(exc).__name__}: {exc}"))
    return results
