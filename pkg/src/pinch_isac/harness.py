"""Random-realization sweeps, result files and summaries.

Each realization ``i`` draws its users, target prior and random baselines
from a stream seeded by ``(seed, i)``, so rows do not depend on execution
order or worker count.  Rows go to the output file as soon as their
realization finishes, in realization order.  Wall-clock times are kept out
of the main file (they would break byte-for-byte reproducibility) and go
to a ``.timing.csv`` sidecar instead.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import baselines, channel, fisher, multi_pa, oracles, single_pa
from .errors import InfeasibleStart, ValidationError
from .scenario import FILE_KEYS, SystemConfig, TransceiverLayout, realization_rng, sample_realization

log = logging.getLogger(__name__)

MODES = ("single-cc", "single-sc", "single-pareto", "multi-sc", "multi-cc",
         "multi-pareto", "baselines", "verify")
SCHEMA_VERSION = 1
CSV_COLUMNS = ("config_hash", "seed", "mode", "scheme", "sweep_variable", "sweep_value",
               "realization_id", "alpha", "rate", "bcrb", "iterations", "feasible",
               "check_error", "error")
SUMMARY_COLUMNS = ("mode", "scheme", "sweep_variable", "sweep_value", "alpha", "rows",
                   "feasible_rows", "mean_rate", "p10_rate", "p90_rate",
                   "mean_bcrb", "p10_bcrb", "p90_bcrb")
SINGLE_ALPHAS = tuple(np.linspace(0.0, 1.0, 21))
# bookkeeping notes written next to the results
MODE_NOTES = {
    "single-sc": "bcrb is the one-dimensional bound (target y known)",
    "single-pareto": "bcrb is the one-dimensional bound (target y known)",
    "single-cc": "bcrb not evaluated",
}


@dataclass(frozen=True)
class SweepSpec:
    mode: str
    sweep_variable: tuple[str, tuple[float, ...]] | None = None
    num_realizations: int = 50
    output_path: str | None = None
    seed: int | None = None
    output_format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError("mode", f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.num_realizations < 1:
            raise ValidationError("num_realizations", "must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ValidationError("format", "must be csv or json")
        if self.sweep_variable is not None:
            name, values = self.sweep_variable
            if not values or not all(math.isfinite(float(v)) for v in values):
                raise ValidationError("sweep", "sweep values must be finite and non-empty")


@dataclass
class ResultRow:
    config_hash: str
    seed: int
    mode: str
    scheme: str
    sweep_variable: str = ""
    sweep_value: float | None = None
    realization_id: int = 0
    alpha: float | None = None
    rate: float | None = None
    bcrb: float | None = None
    iterations: int = 0
    feasible: bool = True
    check_error: float | None = None
    error: str = ""
    wall_time_ms: float = field(default=0.0, compare=False)

    def csv_record(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ("" if math.isnan(value) else repr(value))
    return str(value)


# sweep plumbing

def resolve_sweep_name(name: str) -> str:
    """Map a file key or attribute name to a SystemConfig attribute (or 'alpha')."""
    if name == "alpha":
        return name
    if name in FILE_KEYS:
        return FILE_KEYS[name]
    if name in FILE_KEYS.values():
        return name
    raise ValidationError("sweep", f"unknown sweep variable {name!r}")


def sweep_configs(spec: SweepSpec, cfg: SystemConfig):
    """Yield (sweep_value, cfg, alphas) for every sweep point."""
    if spec.sweep_variable is None:
        yield None, cfg, None
        return
    name, values = spec.sweep_variable
    attr = resolve_sweep_name(name)
    if attr == "alpha":
        yield None, cfg, tuple(float(v) for v in values)
        return
    for v in values:
        yield float(v), cfg.replace(**{attr: v}), None


# per-mode work for one realization

def _metrics_row(base: dict, scheme: str, fn) -> dict:
    t0 = time.perf_counter()
    row = dict(base, scheme=scheme)
    try:
        row.update(fn())
    except Exception as exc:  # recorded, never aborts the sweep
        row.update(error=f"{type(exc).__name__}: {exc}", feasible=False)
    row["wall_time_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def _layout_metrics(users, prior, layout, cfg):
    rate, value = baselines.layout_metrics(users, prior, layout, cfg)
    feasible = bool(channel.user_snrs(users, layout, cfg).min() >= cfg.min_snr)
    return dict(rate=rate, bcrb=value, feasible=feasible)


def _single_cc(users, prior, rng, cfg, alphas, base):
    x_rand = float(rng.uniform(0.0, cfg.region_x))

    def rate_at(x):
        return lambda: dict(rate=channel.multicast_rate(users, [x], cfg))

    x_cc, _ = single_pa.cc_optimal_tx(users, cfg)
    return [_metrics_row(base, "cc", rate_at(x_cc)),
            _metrics_row(base, "random", rate_at(x_rand)),
            _metrics_row(base, "centered", rate_at(cfg.region_x / 2.0))]


def _single_sc(users, prior, rng, cfg, alphas, base):
    x_t, x_r = (float(v) for v in rng.uniform(0.0, cfg.region_x, size=2))

    def pair(make):
        def run():
            xt, xr = make()
            return dict(rate=channel.multicast_rate(users, [xt], cfg),
                        bcrb=float(single_pa.bcrb_1d(xt, xr, prior, cfg)))
        return run

    def sc():
        layout = single_pa.sc_optimal_layout(prior, cfg)
        return layout.tx_x[0], layout.rx_x[0]

    def cc():
        xt, _ = single_pa.cc_optimal_tx(users, cfg)
        return xt, single_pa.rx_best_response(xt, prior, cfg)

    mid = cfg.region_x / 2.0
    return [_metrics_row(base, "sc", pair(sc)),
            _metrics_row(base, "cc", pair(cc)),
            _metrics_row(base, "random", pair(lambda: (x_t, x_r))),
            _metrics_row(base, "centered", pair(lambda: (mid, mid)))]


def _single_pareto(users, prior, rng, cfg, alphas, base):
    rows = []
    for a in alphas or SINGLE_ALPHAS:
        def run(a=a):
            pt = single_pa.pareto_single(a, users, prior, cfg)
            return dict(rate=pt.rate, bcrb=1.0 / pt.sensing_rate)
        rows.append(_metrics_row(dict(base, alpha=float(a)), "pareto", run))
    return rows


def _alg1_with_warm_start(users, prior, cfg):
    try:
        return multi_pa.alg1_sensing_centric(multi_pa.uniform_layout(cfg), users, prior, cfg)
    except InfeasibleStart:
        return multi_pa.alg1_sensing_centric(multi_pa.cc_warm_start(users, cfg), users, prior, cfg)


def _multi_sc(users, prior, rng, cfg, alphas, base):
    rand = baselines.random_layout(cfg, rng)

    def sc():
        try:
            state, result = _alg1_with_warm_start(users, prior, cfg)
        except InfeasibleStart:
            return dict(feasible=False, rate=math.nan, bcrb=math.nan)
        return dict(rate=state.rate_trace[-1], bcrb=result.bcrb, iterations=state.iteration)

    return [_metrics_row(base, "sc", sc),
            _metrics_row(base, "random", lambda: _layout_metrics(users, prior, rand, cfg)),
            _metrics_row(base, "centered",
                         lambda: _layout_metrics(users, prior, baselines.centered_layout(cfg), cfg))]


def _multi_cc(users, prior, rng, cfg, alphas, base):
    rand = baselines.random_layout(cfg, rng)

    def cc():
        state, al = multi_pa.alg2_comm_centric(multi_pa.uniform_layout(cfg), users, prior, cfg)
        rate, value = baselines.layout_metrics(users, prior, state.layout, cfg)
        return dict(rate=rate, bcrb=value, iterations=al.inner_iter, feasible=state.feasible)

    return [_metrics_row(base, "cc", cc),
            _metrics_row(base, "random", lambda: _layout_metrics(users, prior, rand, cfg)),
            _metrics_row(base, "centered",
                         lambda: _layout_metrics(users, prior, baselines.centered_layout(cfg), cfg))]


def _multi_pareto(users, prior, rng, cfg, alphas, base):
    alphas = alphas or multi_pa.DEFAULT_ALPHAS
    t0 = time.perf_counter()
    try:
        points = multi_pa.alg3_pareto_scan(alphas, multi_pa.uniform_layout(cfg), users, prior, cfg)
    except Exception as exc:
        return [dict(base, scheme="pareto", error=f"{type(exc).__name__}: {exc}", feasible=False,
                     wall_time_ms=(time.perf_counter() - t0) * 1e3)]
    per = (time.perf_counter() - t0) * 1e3 / len(points)
    return [dict(base, scheme="pareto", alpha=float(p.alpha), rate=p.rate, bcrb=p.bcrb,
                 iterations=p.iterations, wall_time_ms=per) for p in points]


def _baselines(users, prior, rng, cfg, alphas, base):
    rand = baselines.random_layout(cfg, rng)

    ula_cfg = baselines.UlaConfig(n_elements=cfg.ula_elements)

    def ula(fn):
        return lambda: dict(zip(("rate", "bcrb"), fn(users, prior, cfg, ula_cfg)))

    return [_metrics_row(base, "random", lambda: _layout_metrics(users, prior, rand, cfg)),
            _metrics_row(base, "centered",
                         lambda: _layout_metrics(users, prior, baselines.centered_layout(cfg), cfg)),
            _metrics_row(base, "ula-analog", ula(baselines.ula_analog_bf)),
            _metrics_row(base, "ula-digital", ula(baselines.ula_digital_bf))]


VERIFY_MC_SAMPLES = 100_000


def _verify(users, prior, rng, cfg, alphas, base):
    layout = baselines.random_layout(cfg, rng)
    rule = fisher.ghq_rule(cfg.ghq_nodes)
    target = (float(rng.normal(prior.mean_x, prior.std_x)), float(rng.normal(prior.mean_y, prior.std_y)))

    def check(fn, tol):
        def run():
            err = fn()
            return dict(check_error=err, feasible=bool(err <= tol))
        return run

    def jac():
        fast = [fisher.jacobian_entry(a, target, layout, cfg) for a in "xy"]
        ref = oracles.finite_diff_mean_jacobian(target, layout, cfg)
        return oracles.OracleReport.compare(ref, fast, 1).relative_error

    def ghq_mc():
        mean, se = oracles.mc_ofim(layout, prior, VERIFY_MC_SAMPLES, rng, cfg)
        fast = fisher.ofim(layout, prior, rule, cfg)
        return oracles.OracleReport.compare(mean, fast, VERIFY_MC_SAMPLES).relative_error

    def elementwise():
        q = int(rng.integers(layout.tx_x.size))
        cands = multi_pa.local_feasible_set("tx", q, layout, cfg)
        x = float(cands[rng.integers(cands.size)])
        fast = fisher.ofim_elementwise("tx", q, x, layout, prior, rule, cfg)
        ref = fisher.ofim(layout.with_element("tx", q, x), prior, rule, cfg)
        snr_fast = channel.ElementwiseSnr(users, layout, q, cfg).snrs([x])[:, 0]
        snr_ref = [oracles.direct_user_snr(u, layout.with_element("tx", q, x).tx_x, cfg)
                   for u in users.positions]
        return max(oracles.OracleReport.compare(ref, fast, 1).relative_error,
                   oracles.OracleReport.compare(snr_ref, snr_fast, 1).relative_error)

    def cc():
        x_fast, _ = single_pa.cc_optimal_tx(users, cfg)
        grid_n = 10_000
        x_ref = oracles.exhaustive_single_pa_cc(users, cfg, grid_n)
        f_fast = oracles.minmax_sq_distance(x_fast, users, cfg)
        f_ref = oracles.minmax_sq_distance(x_ref, users, cfg)
        return float(max(f_fast - f_ref, 0.0) / f_ref)

    return [_metrics_row(base, "jacobian", check(jac, 1e-5)),
            _metrics_row(base, "ghq-vs-mc", check(ghq_mc, 0.05)),
            _metrics_row(base, "elementwise", check(elementwise, 1e-10)),
            _metrics_row(base, "cc-vs-exhaustive", check(cc, 1e-12))]


RUNNERS = {
    "single-cc": _single_cc, "single-sc": _single_sc, "single-pareto": _single_pareto,
    "multi-sc": _multi_sc, "multi-cc": _multi_cc, "multi-pareto": _multi_pareto,
    "baselines": _baselines, "verify": _verify,
}


def _single_pa_config(mode: str, cfg: SystemConfig) -> SystemConfig:
    return cfg.replace(n_tx=1, n_rx=1) if mode.startswith("single") else cfg


def run_realization(mode: str, cfg: SystemConfig, seed: int, index: int, alphas,
                    base: dict) -> list[ResultRow]:
    """All rows of one realization; exceptions become error rows."""
    cfg = _single_pa_config(mode, cfg)
    rng = realization_rng(seed, index)
    users, prior = sample_realization(cfg, rng)
    base = dict(base, realization_id=index)
    try:
        records = RUNNERS[mode](users, prior, rng, cfg, alphas, base)
    except Exception as exc:
        records = [dict(base, scheme=mode, error=f"{type(exc).__name__}: {exc}", feasible=False)]
    return [ResultRow(**r) for r in records]


def _tasks(spec: SweepSpec, cfg: SystemConfig):
    seed = cfg.rng_seed if spec.seed is None else spec.seed
    chash = cfg.config_hash()
    name = spec.sweep_variable[0] if spec.sweep_variable else ""
    for value, point_cfg, alphas in sweep_configs(spec, cfg):
        for i in range(spec.num_realizations):
            base = dict(config_hash=chash, seed=seed, mode=spec.mode,
                        sweep_variable=name, sweep_value=value)
            yield (spec.mode, point_cfg, seed, i, alphas, base)


def _call(task):
    return run_realization(*task)


def iter_rows(spec: SweepSpec, cfg: SystemConfig) -> Iterable[list[ResultRow]]:
    """Rows grouped by realization, in sweep then realization order."""
    tasks = list(_tasks(spec, cfg))
    if spec.workers <= 1:
        for t in tasks:
            yield _call(t)
        return
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        yield from pool.map(_call, tasks)


def run_sweep(spec: SweepSpec, cfg: SystemConfig) -> list[ResultRow]:
    """Run every sweep point and realization.

    With an ``output_path`` and CSV format the rows are appended to disk
    as each realization completes; a summary and a timing sidecar are
    written at the end.
    """
    rows: list[ResultRow] = []
    path = Path(spec.output_path) if spec.output_path else None
    if path is not None and spec.output_format == "csv":
        with _open_csv(path) as (fh, writer):
            for group in iter_rows(spec, cfg):
                for r in group:
                    writer.writerow(r.csv_record())
                fh.flush()
                rows.extend(group)
    else:
        for group in iter_rows(spec, cfg):
            rows.extend(group)
        if path is not None:
            emit_results(rows, "json", path, cfg, spec)
    if path is not None and rows:
        write_summary(rows, _sidecar(path, "summary"))
        write_timing(rows, _sidecar(path, "timing"))
    return rows


class _open_csv:
    def __init__(self, path: Path):
        self.path = path

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(self.path, "w", newline="")
        writer = csv.writer(self.fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        return self.fh, writer

    def __exit__(self, *exc):
        self.fh.close()
        return False


def _sidecar(path: Path, kind: str) -> Path:
    return path.with_name(f"{path.stem}.{kind}.csv")


# output

def emit_results(rows: Sequence[ResultRow], fmt: str, path, cfg: SystemConfig | None = None,
                 spec: SweepSpec | None = None) -> None:
    """Write rows as CSV (fixed header) or as a versioned JSON envelope."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with _open_csv(path) as (_, writer):
            for r in rows:
                writer.writerow(r.csv_record())
        return
    if fmt != "json":
        raise ValueError(f"unknown format {fmt!r}")
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "columns": list(CSV_COLUMNS),
        "config_hash": rows[0].config_hash,
        "config": cfg.to_file_dict() if cfg is not None else None,
        "sweep": _spec_dict(spec),
        "notes": MODE_NOTES.get(rows[0].mode, ""),
        "rows": [{c: _json_value(getattr(r, c)) for c in CSV_COLUMNS} for r in rows],
    }
    with open(path, "w") as fh:
        json.dump(envelope, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _spec_dict(spec: SweepSpec | None):
    if spec is None:
        return None
    d = dataclasses.asdict(spec)
    d.pop("output_path", None)
    d.pop("workers", None)
    return d


def load_results(path) -> list[ResultRow]:
    """Read rows back from a JSON envelope written by :func:`emit_results`."""
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("unsupported schema version")
    return [ResultRow(**row) for row in data["rows"]]


def _stats(values):
    vals = np.array([v for v in values if v is not None and np.isfinite(v)], float)
    if vals.size == 0:
        return (None, None, None)
    return (float(vals.mean()), float(np.percentile(vals, 10)), float(np.percentile(vals, 90)))


def summarize(rows: Sequence[ResultRow]) -> list[dict]:
    """Mean and 10/90 percentiles per (mode, scheme, sweep value, alpha)."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.mode, r.scheme, r.sweep_variable, r.sweep_value, r.alpha), []).append(r)
    out = []
    for key, members in groups.items():
        ok = [m for m in members if not m.error]
        rate = _stats([m.rate for m in ok])
        value = _stats([m.bcrb for m in ok])
        out.append(dict(zip(SUMMARY_COLUMNS, (*key, len(members), sum(m.feasible for m in ok),
                                              *rate, *value))))
    return out


def write_summary(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for rec in summarize(rows):
            writer.writerow([_fmt(rec[c]) for c in SUMMARY_COLUMNS])


def write_timing(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("mode", "scheme", "sweep_value", "realization_id", "alpha", "wall_time_ms"))
        for r in rows:
            writer.writerow([_fmt(v) for v in (r.mode, r.scheme, r.sweep_value, r.realization_id,
                                               r.alpha, round(r.wall_time_ms, 3))])
