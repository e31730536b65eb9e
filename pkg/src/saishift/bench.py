"""Benchmark harness: configure a problem, run one shift strategy, record costs.

A run produces one :class:`BenchRecord` per processed vector (indices
``1..M``). The optimize-and-run strategy adds a record with index 0 that
carries the cost of the shift search, so cumulative curves start at that
offset.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dense import BreakdownError
from .derivative import DerivativeParams
from .krylov import SaiParams, sai_expmv
from .problems import (
    AnisoSpec,
    ConvDiffSpec,
    InitialStateSpec,
    build_aniso,
    build_convdiff,
    gaussian_states,
    normal_states,
)
from .shift import (
    IncrementalState,
    OptimizeConfig,
    ShiftInterval,
    incremental_update,
    optimize_and_run,
)
from .sparse import FactorizationError, shifted_lu, write_matrix_market

log = logging.getLogger(__name__)

CSV_HEADER = "vector_index,delta_used,arnoldi_iters,lu_count,wall_time_s,residual_norm,cumulative_time_s"
STRATEGIES = ("fixed", "optimize_and_run", "incremental")
PROBLEMS = ("conv_diff", "aniso")

# keys that must agree for two CSVs to be compared
COMPARABLE_KEYS = (
    "problem", "n", "peclet", "lam", "theta", "aniso_divide_by_h2", "t", "tol",
    "seed", "num_vectors", "covariance_scale", "initial_states",
)

# trial vectors for the shift search come from their own RNG stream
TRIAL_STREAM = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce one benchmark run.

    ``fixed_delta`` and ``hi`` default per problem (0.1 for ``conv_diff``,
    0.07 for ``aniso``) when left as None.
    """

    problem: str = "conv_diff"
    n: int = 200
    peclet: float = 1000.0
    lam: float = 5000.0
    theta: float = math.pi / 4
    aniso_divide_by_h2: bool = False
    t: float = 1e-4
    tol: float = 1e-6
    max_iters: int = 300
    strategy: str = "fixed"
    fixed_delta: float | None = None
    lo: float = 0.01
    hi: float | None = None
    K: int = 25
    N: int = 1
    num_vectors: int = 20
    seed: int = 0
    covariance_scale: float = 0.05
    initial_states: str = "gaussian"
    brent_tol: float = 1e-5
    max_brent_iters: int = 50
    stop_width: float = 1e-5
    delta_gamma: float = 1e-7
    reorthogonalize: bool = False
    output: str | None = None
    export_matrix: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.initial_states not in ("gaussian", "normal"):
            raise ConfigError("initial_states must be 'gaussian' or 'normal'")
        if not self.tol > 0 or not self.t > 0:
            raise ConfigError("t and tol must be positive")
        if self.n < 3 or self.max_iters < 1 or self.num_vectors < 0:
            raise ConfigError("need n >= 3, max_iters >= 1 and num_vectors >= 0")
        if self.strategy == "optimize_and_run" and (self.K < 1 or self.N < 1):
            raise ConfigError("optimize_and_run needs K >= 1 and N >= 1")
        if not 0 < self.lo < self.upper:
            raise ConfigError(f"need 0 < lo < hi, got [{self.lo}, {self.upper}]")
        if not self.delta > 0:
            raise ConfigError("fixed_delta must be positive")

    @property
    def delta(self):
        if self.fixed_delta is not None:
            return self.fixed_delta
        return 0.1 if self.problem == "conv_diff" else 0.07

    @property
    def upper(self):
        if self.hi is not None:
            return self.hi
        return 0.1 if self.problem == "conv_diff" else 0.07

    def problem_spec(self):
        if self.problem == "conv_diff":
            return ConvDiffSpec(self.n, self.peclet)
        return AnisoSpec(self.n, self.lam, self.theta, self.aniso_divide_by_h2)

    def items(self):
        """Resolved ``(key, value)`` pairs, problem defaults filled in."""
        out = dataclasses.asdict(self)
        out["fixed_delta"] = self.delta
        out["hi"] = self.upper
        return out.items()

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``key -> string`` pairs, converting by field type."""
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in pairs.items():
            if key not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _convert(key, raw, kinds[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides=()):
        """Read a flat ``key = value`` file; ``#`` starts a comment.

        ``overrides`` are ``key=value`` strings applied on top.
        """
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        pairs = parse_pairs(text.splitlines(), source=str(path))
        pairs.update(parse_pairs(overrides, source="override"))
        return cls.from_pairs(pairs)


def parse_pairs(lines, source="config"):
    pairs = {}
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{k}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{k}: empty key")
        pairs[key] = value
    return pairs


def _convert(key, raw, kind):
    kind = str(kind)
    if raw.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


@dataclass
class BenchRecord:
    """One CSV row.

    ``lu_count`` and ``cumulative_time_s`` are running totals up to and
    including this record; ``arnoldi_iters`` and ``wall_time_s`` are per row.
    Row 0 of optimize-and-run holds the shift search.
    """

    vector_index: int
    delta_used: float
    arnoldi_iters: int
    lu_count: int
    wall_time_s: float
    residual_norm: float
    cumulative_time_s: float


@dataclass
class BenchResult:
    config: RunConfig | None
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def vector_records(self):
        return [r for r in self.records if r.vector_index >= 1]


def initial_vectors(cfg, stream=0, count=None):
    spec = InitialStateSpec(cfg.seed, cfg.covariance_scale, cfg.num_vectors if count is None else count)
    gen = gaussian_states if cfg.initial_states == "gaussian" else normal_states
    return gen(spec, cfg.problem_spec(), stream=stream)


def build_matrix(cfg):
    spec = cfg.problem_spec()
    return build_convdiff(spec) if cfg.problem == "conv_diff" else build_aniso(spec)


class _Recorder:
    def __init__(self, tol):
        self.tol = tol
        self.records = []
        self.lu_total = 0
        self.clock = 0.0
        self.failed = []

    def add(self, index, delta, out, lu_built, elapsed):
        self.lu_total += lu_built
        self.clock += elapsed
        if out is None:
            iters, res = 0, math.inf
        else:
            iters, res = out.iterations, out.residual_norm
        if index >= 1 and not res < self.tol:
            self.failed.append(index)
        self.records.append(
            BenchRecord(index, delta, iters, self.lu_total, elapsed, res, self.clock)
        )


def _solve(A, v, p, lu):
    try:
        return sai_expmv(A, v, p, lu=lu)
    except BreakdownError as exc:
        log.warning("Krylov breakdown: %s", exc)
        return None


def run_benchmark(cfg, A=None, vectors=None, baseline=None):
    """Run the strategy named in ``cfg`` and return a :class:`BenchResult`.

    Parameters
    ----------
    cfg : RunConfig
    A : SparseMatrix, optional
        Prebuilt matrix; assembled from ``cfg`` when omitted.
    vectors : list of ndarray, optional
        Starting vectors; drawn from ``cfg`` when omitted.
    baseline : BenchResult, optional
        A fixed-shift run on the same problem; adds ``m_min_*`` entries to the
        summary.

    Notes
    -----
    Only solver calls are timed. A vector that fails to converge, or whose
    Krylov process breaks down, is kept with its residual (``inf`` on
    breakdown) and listed in ``summary["unconverged"]``.
    """
    if A is None:
        A = build_matrix(cfg)
    if vectors is None:
        vectors = initial_vectors(cfg) if cfg.num_vectors > 0 else []
    rec = _Recorder(cfg.tol)
    summary = {"strategy": cfg.strategy, "num_vectors": len(vectors)}
    if vectors:
        runner = {"fixed": _run_fixed, "optimize_and_run": _run_optimize, "incremental": _run_incremental}
        summary.update(runner[cfg.strategy](cfg, A, vectors, rec))
    per_vector = [r for r in rec.records if r.vector_index >= 1]
    summary["mean_arnoldi_iters"] = (
        float(np.mean([r.arnoldi_iters for r in per_vector])) if per_vector else 0.0
    )
    summary["total_arnoldi_iters"] = sum(r.arnoldi_iters for r in rec.records)
    summary["total_lu"] = rec.lu_total
    summary["total_time_s"] = rec.clock
    summary["unconverged"] = rec.failed
    result = BenchResult(cfg, rec.records, summary)
    if baseline is not None:
        summary.update(crossover(baseline.records, result.records))
    return result


def _run_fixed(cfg, A, vectors, rec):
    delta = cfg.delta
    p = SaiParams(delta * cfg.t, cfg.t, cfg.tol, cfg.max_iters, cfg.reorthogonalize)
    t0 = time.perf_counter()
    lu = shifted_lu(A, p.gamma)
    setup = time.perf_counter() - t0
    for i, v in enumerate(vectors, 1):
        t0 = time.perf_counter()
        out = _solve(A, v, p, lu)
        elapsed = time.perf_counter() - t0
        # the factorization is charged to the first vector
        rec.add(i, delta, out, int(i == 1), elapsed + (setup if i == 1 else 0.0))
    return {"delta_star": delta}


def _run_optimize(cfg, A, vectors, rec):
    trials = initial_vectors(cfg, stream=TRIAL_STREAM, count=cfg.N)
    ocfg = OptimizeConfig(trials, cfg.K, cfg.tol, cfg.t, cfg.brent_tol, cfg.max_brent_iters)
    t0 = time.perf_counter()
    opt = optimize_and_run(A, ocfg, ShiftInterval(cfg.lo, cfg.upper))
    elapsed = time.perf_counter() - t0
    delta = opt.delta_star
    rec.lu_total += opt.evals
    rec.clock += elapsed
    rec.records.append(
        BenchRecord(0, delta, opt.arnoldi_iters, rec.lu_total, elapsed, opt.f_min, rec.clock)
    )
    p = SaiParams(delta * cfg.t, cfg.t, cfg.tol, cfg.max_iters, cfg.reorthogonalize)
    t0 = time.perf_counter()
    lu = shifted_lu(A, p.gamma)
    setup = time.perf_counter() - t0
    for i, v in enumerate(vectors, 1):
        t0 = time.perf_counter()
        out = _solve(A, v, p, lu)
        elapsed = time.perf_counter() - t0
        rec.add(i, delta, out, int(i == 1), elapsed + (setup if i == 1 else 0.0))
    return {"delta_star": delta, "evals": opt.evals, "brent_converged": opt.converged}


def _run_incremental(cfg, A, vectors, rec):
    state = IncrementalState(ShiftInterval(cfg.lo, cfg.upper), stop_width=cfg.stop_width)
    dp = DerivativeParams(
        SaiParams(state.interval.midpoint * cfg.t, cfg.t, cfg.tol, cfg.max_iters, cfg.reorthogonalize),
        cfg.delta_gamma,
    )
    phase1 = 0
    missing = 0
    lu = None
    for i, v in enumerate(vectors, 1):
        if not state.converged:
            delta = state.interval.midpoint
            t0 = time.perf_counter()
            try:
                out, state = incremental_update(state, A, v, dp, cfg.t)
            except (BreakdownError, FactorizationError) as exc:
                log.warning("vector %d: %s", i, exc)
                out = None
                state = dataclasses.replace(state, vectors_processed=state.vectors_processed + 1)
            elapsed = time.perf_counter() - t0
            phase1 += 1
            if out is None or out.derivative is None:
                missing += 1
            rec.add(i, delta, out, 1, elapsed)
            continue
        delta = state.converged_delta
        p = SaiParams(delta * cfg.t, cfg.t, cfg.tol, cfg.max_iters, cfg.reorthogonalize)
        built = 0
        t0 = time.perf_counter()
        if lu is None:
            lu = shifted_lu(A, p.gamma)
            built = 1
        out = _solve(A, v, p, lu)
        rec.add(i, delta, out, built, time.perf_counter() - t0)
    return {
        "delta_star": state.converged_delta,
        "phase1_length": phase1,
        "missing_derivatives": missing,
        "final_interval": [state.interval.lo, state.interval.hi],
    }


def crossover(fixed_records, adaptive_records, lu_weight=0.0):
    """Smallest vector index where the adaptive run is cheaper than the fixed one.

    Cumulative cost by wall time and by the proxy
    ``cumulative Arnoldi iterations + lu_weight * factorizations``. Setup
    rows (index 0) count towards the cumulative totals but are never
    candidates. Returns ``None`` entries when no crossover happens.
    """
    f_time, f_iter = _cumulative(fixed_records, lu_weight)
    a_time, a_iter = _cumulative(adaptive_records, lu_weight)
    common = sorted(set(f_time) & set(a_time))
    by_time = next((m for m in common if a_time[m] < f_time[m]), None)
    by_iter = next((m for m in common if a_iter[m] < f_iter[m]), None)
    return {"m_min_time": by_time, "m_min_iters": by_iter}


def _cumulative(records, lu_weight):
    times, iters = {}, {}
    total = 0.0
    for r in sorted(records, key=lambda r: r.vector_index):
        total += r.arnoldi_iters
        if r.vector_index >= 1:
            times[r.vector_index] = r.cumulative_time_s
            iters[r.vector_index] = total + lu_weight * r.lu_count
    return times, iters


def crossover_report(fixed, adaptive, lu_weight=0.0):
    """Compare two benchmark results (or CSV paths) and format a text table.

    Raises
    ------
    ConfigError
        If the two runs were made on different problems or vector sets.
    """
    if isinstance(fixed, (str, Path)):
        fixed = read_csv(fixed)
    if isinstance(adaptive, (str, Path)):
        adaptive = read_csv(adaptive)
    fc, ac = _config_of(fixed), _config_of(adaptive)
    diff = [k for k in COMPARABLE_KEYS if k in fc and k in ac and fc[k] != ac[k]]
    if diff:
        raise ConfigError("runs are not comparable, differing keys: " + ", ".join(diff))
    res = crossover(fixed.records, adaptive.records, lu_weight)
    f_time, f_iter = _cumulative(fixed.records, lu_weight)
    a_time, a_iter = _cumulative(adaptive.records, lu_weight)
    lines = [f"{'M':>4} {'fixed_time_s':>14} {'adaptive_time_s':>16} {'fixed_cost':>12} {'adaptive_cost':>14}"]
    for m in sorted(set(f_time) & set(a_time)):
        lines.append(f"{m:>4} {f_time[m]:>14.4f} {a_time[m]:>16.4f} {f_iter[m]:>12.1f} {a_iter[m]:>14.1f}")
    for key, label in (("m_min_time", "by wall time"), ("m_min_iters", "by iteration cost")):
        value = res[key]
        lines.append(f"M_min {label}: {value if value is not None else 'none within M'}")
    return res, "\n".join(lines)


def _config_of(result):
    if result.config is None:
        return {}
    if isinstance(result.config, dict):
        return result.config
    return {k: _fmt(v) for k, v in result.config.items()}


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def emit_csv(result, path):
    """Write records, then the config and summary as ``#`` comment lines.

    Floats use the shortest decimal that round-trips. ``path`` may also be an
    open text stream.
    """
    lines = [CSV_HEADER]
    for r in result.records:
        lines.append(",".join(_fmt(getattr(r, f.name)) for f in dataclasses.fields(BenchRecord)))
    if result.config is not None:
        for key, value in _config_items(result.config):
            lines.append(f"# config.{key} = {_fmt(value)}")
    for key, value in result.summary.items():
        lines.append(f"# summary.{key} = {_fmt(value)}")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text)


def _config_items(config):
    return config.items() if isinstance(config, dict) else RunConfig.items(config)


def read_csv(path):
    """Inverse of :func:`emit_csv`; config and summary values stay strings."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != CSV_HEADER:
        raise ConfigError(f"{path}: missing or unexpected CSV header")
    records, config, summary = [], {}, {}
    for line in text[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" = ")
            section, _, name = key.partition(".")
            (config if section == "config" else summary)[name] = value
            continue
        if not line.strip():
            continue
        f = line.split(",")
        if len(f) != 7:
            raise ConfigError(f"{path}: malformed row {line!r}")
        records.append(
            BenchRecord(int(f[0]), float(f[1]), int(f[2]), int(f[3]), float(f[4]), float(f[5]), float(f[6]))
        )
    return BenchResult(config, records, summary)


def export_matrix(cfg, A, path):
    comment = f"{cfg.problem} n={cfg.n}"
    write_matrix_market(path, A, comment=comment)
