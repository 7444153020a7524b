"""Command-line front-end.

Commands: ``test`` (separability test on a data file), ``calibrate``
(critical-value tables), ``power`` (power curves), ``null-dist`` (null
samples for histogramming), ``diagnose`` (MP/BBP spectral diagnostics), and
``validate`` (cross-module invariant suite).

Exit codes: 0 success, 1 validation-suite failure, 2 input error, 3 numeric
failure.  Errors are emitted as JSON on stderr.  All outputs are
deterministic given the command line and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import checks, generators, montecarlo, stats
from .errors import SepcoreError
from .generators import Gaussian, SamplerSpec, parse_distribution
from .kcd import RootKind, min_samples
from .matcore import Shape, symmetrize
from .montecarlo import McConfig, simulate_null
from .stats import StatKind, TestReport


class InputError(Exception):
    pass


BASE_STATS = (StatKind.T1, StatKind.T2, StatKind.T3, StatKind.T3S, StatKind.LRT)
TRANSFORM_FOR = {StatKind.T1: StatKind.T1A, StatKind.T2: StatKind.T2T, StatKind.T3: StatKind.T3T}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: str | None, header: list[str], rows: list[list]) -> None:
    formatted = [[_fmt(v) for v in row] for row in rows]
    if path is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(formatted)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(formatted)


def _write_json(path: str | None, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_data(path: str, shape: Shape, row_major: bool) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
        skip = 0
        try:
            [float(v) for v in first.strip().split(",") if v != ""]
        except ValueError:
            skip = 1
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except OSError as exc:
        raise InputError(f"cannot read data file: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"cannot parse data file: {exc}") from exc
    if data.shape[1] != shape.p:
        raise InputError(f"rows have {data.shape[1]} columns, expected p1*p2 = {shape.p}")
    if not np.all(np.isfinite(data)):
        raise InputError("data contains non-finite entries")
    if row_major:
        # row i of the file is vec of the data matrix with p2 fastest; convert
        # to the column-stacked layout used internally
        perm = np.array([a * shape.p2 + c for c in range(shape.p2) for a in range(shape.p1)])
        data = data[:, perm]
    return data


def _parse_stats(text: str) -> list[StatKind]:
    kinds = []
    for token in text.split(","):
        token = token.strip().lower()
        try:
            kind = StatKind(token)
        except ValueError as exc:
            raise InputError(f"unknown statistic {token!r}") from exc
        if kind not in BASE_STATS:
            raise InputError(f"--stat takes base statistics {[k.value for k in BASE_STATS]}, got {token!r}")
        kinds.append(kind)
    if not kinds:
        raise InputError("empty statistic list")
    return kinds


def cmd_test(args) -> int:
    shape = Shape(args.p1, args.p2)
    data = _load_data(args.data, shape, args.row_major)
    n = data.shape[0]
    if n <= min_samples(shape):
        raise InputError(f"n = {n} must exceed p1/p2 + p2/p1 = {min_samples(shape):.6g}")
    kinds = _parse_stats(args.stat)
    if StatKind.LRT in kinds and n < shape.p:
        raise InputError(f"lrt needs n >= p, got n = {n}, p = {shape.p}")
    if args.calib == "asymptotic" and any(k != StatKind.T1 for k in kinds):
        raise InputError("asymptotic calibration is only available for t1")
    dist = parse_distribution(args.dist)

    y = data - data.mean(axis=0, keepdims=True) if args.center else data
    s = symmetrize(y.T @ y / n)
    compute = tuple(kinds) + tuple(TRANSFORM_FOR[k] for k in kinds if k in TRANSFORM_FOR)
    values = montecarlo.compute_statistics(s, n, shape, compute, RootKind(args.root))

    reports = []
    if args.calib == "mc":
        cfg = McConfig(
            n=n,
            shape=shape,
            reps=args.reps,
            sampler=SamplerSpec(dist, centered=args.center),
            alpha=args.alpha,
            master_seed=args.seed,
            root_kind=RootKind(args.root),
            stats=tuple(kinds),
        )
        null = simulate_null(cfg, threads=args.threads)
        calibration = {"method": "mc", "reps": args.reps, "seed": args.seed, "dist": dist.name}
        for kind in kinds:
            crit = null.critical_values[kind]
            reports.append(
                TestReport(
                    kind=kind,
                    raw=values[kind],
                    transformed=values.get(TRANSFORM_FOR.get(kind)),
                    n=n,
                    shape=shape,
                    calibration=calibration,
                    critical_value=crit,
                    reject=bool(values[kind] > crit),
                    alpha=args.alpha,
                )
            )
    else:
        crit = stats.tw1_quantile(1.0 - args.alpha)
        calibration = {"method": "asymptotic", "reference": "tw1"}
        for kind in kinds:
            transformed = values[StatKind.T1A]
            reports.append(
                TestReport(
                    kind=kind,
                    raw=values[kind],
                    transformed=transformed,
                    n=n,
                    shape=shape,
                    calibration=calibration,
                    critical_value=crit,
                    reject=bool(transformed > crit),
                    alpha=args.alpha,
                )
            )
    _write_json(args.out, {"reports": [r.to_dict() for r in reports]})
    return 0


def _read_config(path: str, section: str, required: set, optional: dict) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"invalid TOML: {exc}") from exc
    unknown_top = set(doc) - {section}
    if unknown_top:
        raise InputError(f"unknown config sections {sorted(unknown_top)}")
    if section not in doc:
        raise InputError(f"missing [{section}] section")
    body = doc[section]
    unknown = set(body) - set(required) - set(optional)
    if unknown:
        raise InputError(f"unknown keys in [{section}]: {sorted(unknown)}")
    missing = set(required) - set(body)
    if missing:
        raise InputError(f"missing keys in [{section}]: {sorted(missing)}")
    out = dict(optional)
    out.update(body)
    return out


def _stat_list(raw) -> tuple[StatKind, ...]:
    if not isinstance(raw, list) or not raw:
        raise InputError("stats must be a non-empty list")
    kinds = []
    for token in raw:
        try:
            kinds.append(StatKind(str(token).lower()))
        except ValueError as exc:
            raise InputError(f"unknown statistic {token!r}") from exc
    return tuple(kinds)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(entropy=list(parts)).generate_state(1, np.uint64)[0])


def cmd_calibrate(args) -> int:
    cfg = _read_config(
        args.config,
        "calibrate",
        required={"grid", "stats"},
        optional={
            "reps": 1000,
            "alpha": 0.05,
            "dist": "gaussian",
            "seed": 0,
            "root": "cholesky",
            "center": False,
            "out": None,
        },
    )
    kinds = _stat_list(cfg["stats"])
    dist = parse_distribution(cfg["dist"])
    rows = []
    for entry in cfg["grid"]:
        if len(entry) != 3:
            raise InputError(f"grid entries must be [p1, p2, n], got {entry}")
        p1, p2, n = (int(v) for v in entry)
        shape = Shape(p1, p2)
        mc = McConfig(
            n=n,
            shape=shape,
            reps=int(cfg["reps"]),
            sampler=SamplerSpec(dist, centered=bool(cfg["center"])),
            alpha=float(cfg["alpha"]),
            master_seed=_derive_seed(int(cfg["seed"]), p1, p2, n),
            root_kind=RootKind(cfg["root"]),
            stats=kinds,
        )
        result = simulate_null(mc, threads=args.threads)
        rows.append([p1, p2, n] + [result.critical_values[k] for k in kinds])
    _write_csv(cfg["out"], ["p1", "p2", "n"] + [k.value for k in kinds], rows)
    return 0


def cmd_power(args) -> int:
    cfg = _read_config(
        args.config,
        "power",
        required={"preset", "w", "gammas", "n"},
        optional={
            "stats": ["t1", "t2", "t3"],
            "reps_null": 1000,
            "reps_power": 1000,
            "alpha": 0.05,
            "dist": "gaussian",
            "seed": 0,
            "root": "cholesky",
            "center": False,
            "out": None,
        },
    )
    kinds = _stat_list(cfg["stats"])
    dist = parse_distribution(cfg["dist"])
    ws = [float(w) for w in cfg["w"]]
    if any(not 0.0 <= w <= 1.0 for w in ws):
        raise InputError("w values must be in [0, 1]")
    rows = []
    for n in (int(v) for v in cfg["n"]):
        root_n = np.sqrt(n)
        for g1, g2 in ((float(a), float(b)) for a, b in cfg["gammas"]):
            p1, p2 = g1 * root_n, g2 * root_n
            if abs(p1 - round(p1)) > 1e-9 or abs(p2 - round(p2)) > 1e-9:
                raise InputError(f"(gamma1, gamma2, n) = ({g1}, {g2}, {n}) gives non-integer dimensions")
            p1, p2 = int(round(p1)), int(round(p2))
            shape = Shape(p1, p2)
            use = tuple(k for k in kinds if not (k == StatKind.LRT and shape.p > n))
            base_seed = _derive_seed(int(cfg["seed"]), p1, p2, n)
            rng = np.random.default_rng(_derive_seed(int(cfg["seed"]), p1, p2, n, 7))
            base = generators.preset_core(cfg["preset"], shape, rng)
            null_cfg = McConfig(
                n=n,
                shape=shape,
                reps=int(cfg["reps_null"]),
                sampler=SamplerSpec(dist, centered=bool(cfg["center"])),
                alpha=float(cfg["alpha"]),
                master_seed=base_seed,
                root_kind=RootKind(cfg["root"]),
                stats=use,
            )
            calibration = simulate_null(null_cfg, threads=args.threads)
            for w in ws:
                model = generators.shrunk_model(base, w)
                power_cfg = McConfig(
                    n=n,
                    shape=shape,
                    reps=int(cfg["reps_power"]),
                    sampler=SamplerSpec(dist, centered=bool(cfg["center"])),
                    alpha=float(cfg["alpha"]),
                    master_seed=_derive_seed(int(cfg["seed"]), p1, p2, n, int(round(w * 1000))),
                    root_kind=RootKind(cfg["root"]),
                    stats=use,
                )
                result = montecarlo.empirical_power(model, power_cfg, calibration, threads=args.threads)
                for kind in use:
                    rows.append([kind.value, w, n, g1, g2, result.rates[kind], result.se[kind]])
    _write_csv(cfg["out"], ["stat", "w", "n", "gamma1_hat", "gamma2_hat", "power", "se"], rows)
    return 0


def cmd_null_dist(args) -> int:
    cfg = _read_config(
        args.config,
        "null",
        required={"p1", "p2", "n"},
        optional={
            "stats": ["t1a", "t2t", "t3t"],
            "reps": 1000,
            "alpha": 0.05,
            "dist": "gaussian",
            "seed": 0,
            "root": "cholesky",
            "center": False,
            "out_samples": None,
            "out_summary": None,
        },
    )
    kinds = _stat_list(cfg["stats"])
    shape = Shape(int(cfg["p1"]), int(cfg["p2"]))
    mc = McConfig(
        n=int(cfg["n"]),
        shape=shape,
        reps=int(cfg["reps"]),
        sampler=SamplerSpec(parse_distribution(cfg["dist"]), centered=bool(cfg["center"])),
        alpha=float(cfg["alpha"]),
        master_seed=int(cfg["seed"]),
        root_kind=RootKind(cfg["root"]),
        stats=kinds,
    )
    result = simulate_null(mc, threads=args.threads)
    rows = [[result.samples[k][j] for k in kinds] for j in range(mc.reps)]
    _write_csv(cfg["out_samples"], [k.value for k in kinds], rows)
    summary: dict = {"meta": result.meta, "critical_values": {}, "moments": {}, "size_vs_tw1": {}}
    for k in kinds:
        v = result.samples[k]
        summary["critical_values"][k.value] = result.critical_values[k]
        summary["moments"][k.value] = {"mean": float(v.mean()), "sd": float(v.std(ddof=1))}
        if k in (StatKind.T1A, StatKind.T1B):
            crit = stats.tw1_quantile(1.0 - mc.alpha)
            summary["size_vs_tw1"][k.value] = float(np.mean(v > crit))
    _write_json(cfg["out_summary"], summary)
    return 0


def cmd_diagnose(args) -> int:
    cfg = _read_config(
        args.config,
        "diagnose",
        required={"p1", "p2", "n"},
        optional={
            "seed": 0,
            "dist": "gaussian",
            "mp_seeds": 5,
            "bbp": None,
            "out_samples": None,
            "out_summary": None,
        },
    )
    shape = Shape(int(cfg["p1"]), int(cfg["p2"]))
    n = int(cfg["n"])
    mc = McConfig(
        n=n,
        shape=shape,
        reps=int(cfg["mp_seeds"]),
        sampler=SamplerSpec(parse_distribution(cfg["dist"])),
        master_seed=int(cfg["seed"]),
        stats=(StatKind.T3,),
    )
    diag = montecarlo.esd_diagnostic(mc, threads=args.threads)
    summary: dict = {"mp": diag.to_dict()}
    if cfg["bbp"] is not None:
        bbp = cfg["bbp"]
        unknown = set(bbp) - {"construction", "c", "reps"}
        if unknown:
            raise InputError(f"unknown keys in bbp block: {sorted(unknown)}")
        rows = montecarlo.bbp_study(
            generators.Construction(bbp.get("construction", "orthoblock")),
            [float(c) for c in bbp.get("c", [0.2, 2.4])],
            shape.p1,
            shape.p2,
            n,
            int(bbp.get("reps", 200)),
            int(cfg["seed"]),
            threads=args.threads,
        )
        summary["bbp"] = rows
    if cfg["out_samples"] is not None:
        edges = diag.histogram_edges
        mids = (edges[:-1] + edges[1:]) / 2.0
        _write_csv(cfg["out_samples"], ["bin_mid", "count"], [[m, int(c)] for m, c in zip(mids, diag.histogram_counts)])
    _write_json(cfg["out_summary"], summary)
    return 0


def cmd_validate(args) -> int:
    results = checks.run_all()
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name}  ({res.detail})")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sepcore", description=__doc__)
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("SEPCORE_THREADS", "1")),
        help="worker cap for Monte Carlo loops (output is independent of this)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run a separability test on a CSV data file")
    t.add_argument("--data", required=True, help="CSV, one row per observation (vec of the data matrix)")
    t.add_argument("--p1", type=int, required=True)
    t.add_argument("--p2", type=int, required=True)
    t.add_argument("--stat", default="t3", help="comma-separated: t1,t2,t3,t3s,lrt")
    t.add_argument("--calib", choices=["mc", "asymptotic"], default="mc")
    t.add_argument("--dist", default="gaussian", help="gaussian | gamma:a,b | t:nu")
    t.add_argument("--reps", type=int, default=1000)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--center", action="store_true", help="subtract the sample mean first")
    t.add_argument("--root", choices=["cholesky", "symmetric"], default="cholesky")
    t.add_argument("--row-major", action="store_true", help="rows are row-major vecs; convert on ingest")
    t.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    t.set_defaults(func=cmd_test)

    for name, fn, help_text in (
        ("calibrate", cmd_calibrate, "critical-value table from a TOML config"),
        ("power", cmd_power, "power curves from a TOML config"),
        ("null-dist", cmd_null_dist, "null-distribution samples from a TOML config"),
        ("diagnose", cmd_diagnose, "MP/BBP spectral diagnostics from a TOML config"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="TOML config file")
        p.set_defaults(func=fn)

    v = sub.add_parser("validate", help="run the cross-module invariant suite")
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        args.threads = 1
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(json.dumps({"error": "input", "message": str(exc)}) + "\n")
        return 2
    except (ValueError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": "input", "message": str(exc)}) + "\n")
        return 2
    except (SepcoreError, np.linalg.LinAlgError, RuntimeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
