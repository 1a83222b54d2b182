"""Monte-Carlo sweeps over one scenario parameter and their CSV/JSON output.

Every drop is seeded from ``(base_seed, point index, drop index)`` only, and
results are merged back in index order, so the emitted bytes do not depend
on how many workers ran the sweep.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import BaselineKind, baseline_precoder
from .channel import ScenarioConfig, drop_seed, generate_drop
from .core import backoff, channel_sinrs, clipped, secrecy_rate_exact
from .forms import build_forms, build_forms_partial
from .gpi import GpiSettings, gpi_solve_infinite_L, gpi_solve_se_max, solve_fbl
from .joint import CsitMode, JointSettings, joint_solve, rate_scale
from .reliability import ReliabilityState, make_caps, solve_phase2

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "sweep_var", "sweep_value", "algorithm", "seed", "sum_secrecy_rate",
    "sum_secrecy_rate_clipped", "sum_rate", "max_error_prob", "max_leakage",
    "outer_iters", "inner_iters_total", "wall_ms",
)

ALGORITHMS = (
    "alg1", "alg1-cov", "alg2", "alg2-cov", "fbl-se-max",
    "rzf", "rzf-eve", "zf", "zf-eve", "mrt",
)

#: Short names accepted for the swept variable.
SWEEP_ALIASES = {
    "P": "power_dbm", "P_dBm": "power_dbm", "power_dbm": "power_dbm",
    "L": "blocklength", "blocklength": "blocklength",
    "N": "n_antennas", "n_antennas": "n_antennas",
    "K": "n_users", "n_users": "n_users",
    "M": "n_eves", "n_eves": "n_eves",
}
_INT_VARS = {"blocklength", "n_antennas", "n_users", "n_eves"}


@dataclass(frozen=True)
class SweepSpec:
    """Everything that determines a sweep's output."""

    var: str = "power_dbm"
    values: tuple = (-10.0, 0.0, 10.0, 20.0)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    algorithms: tuple = ALGORITHMS
    drops: int = 50
    base_seed: int = 0
    cap_low: float = 1e-6
    cap_high: float = 2e-6
    tol: float = 0.01
    max_iter: int = 15
    tol_out: float = 0.01
    max_outer: int = 5
    timing: bool = False

    def __post_init__(self):
        if self.var not in SWEEP_ALIASES:
            raise ValueError(f"cannot sweep {self.var!r}; choose from {sorted(SWEEP_ALIASES)}")
        var = SWEEP_ALIASES[self.var]
        object.__setattr__(self, "var", var)
        vals = tuple(int(v) if var in _INT_VARS else float(v) for v in self.values)
        if not vals:
            raise ValueError("sweep needs at least one value")
        if list(vals) != sorted(vals):
            raise ValueError("sweep values must be sorted")
        object.__setattr__(self, "values", vals)
        algs = tuple(self.algorithms)
        unknown = set(algs) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        object.__setattr__(self, "algorithms", algs)
        if self.drops < 1:
            raise ValueError("drops must be at least 1")

    def scenario_at(self, point: int) -> ScenarioConfig:
        return self.scenario.replace(**{self.var: self.values[point]})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        d["algorithms"] = list(self.algorithms)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        if isinstance(data.get("scenario"), dict):
            data["scenario"] = ScenarioConfig(**data["scenario"])
        for key in ("values", "algorithms"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class MetricRow:
    sweep_var: str
    sweep_value: float
    algorithm: str
    seed: int
    sum_secrecy_rate: float
    sum_secrecy_rate_clipped: float
    sum_rate: float
    max_error_prob: float
    max_leakage: float
    outer_iters: int
    inner_iters_total: int
    wall_ms: float
    error: str | None = None

    def csv_values(self) -> list:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def drop_metrics(f, eps, delta, channels, params) -> dict:
    """Exact-rate metrics of one precoder and reliability state on a drop."""
    per_user = secrecy_rate_exact(f, channels, eps, delta, params)
    rho_user, _ = channel_sinrs(f, channels, params)
    user_rate = np.log2(1.0 + rho_user) - backoff(rho_user, eps, params.blocklength)
    return dict(
        sum_secrecy_rate=float(np.sum(per_user)),
        sum_secrecy_rate_clipped=float(np.sum(clipped(per_user))),
        sum_rate=float(np.sum(user_rate)),
        max_error_prob=float(np.max(eps)),
        max_leakage=float(np.max(delta)),
    )


class DropContext:
    """Per-drop forms, caps and normalizers shared by several algorithms, built lazily."""

    def __init__(self, channels, params, spec: SweepSpec):
        self.channels = channels
        self.params = params
        self.spec = spec
        self.gpi = GpiSettings(tol=spec.tol, max_iter=spec.max_iter)
        self.eps_cap, self.delta_cap = make_caps(channels.n_users, channels.n_eves,
                                                 spec.cap_low, spec.cap_high)
        self._forms = {}
        self._r_inf = {}

    def forms(self, mode: CsitMode):
        if mode not in self._forms:
            build = build_forms_partial if mode is CsitMode.COVARIANCE else build_forms
            self._forms[mode] = build(self.channels, self.params)
        return self._forms[mode]

    def r_inf(self, mode: CsitMode):
        if mode not in self._r_inf:
            res = gpi_solve_infinite_L(self.forms(mode), self.params, self.gpi)
            self._r_inf[mode] = (res.r_inf, res.iterations)
        return self._r_inf[mode]

    def joint_settings(self, mode: CsitMode) -> JointSettings:
        return JointSettings(tol_out=self.spec.tol_out, max_outer=self.spec.max_outer,
                             gpi=self.gpi, eps_cap=self.eps_cap, delta_cap=self.delta_cap,
                             csit=mode)

    def phase2(self, f) -> ReliabilityState:
        r_inf, _ = self.r_inf(CsitMode.PERFECT)
        return solve_phase2(f, self.forms(CsitMode.PERFECT), self.eps_cap, self.delta_cap,
                            rate_scale(r_inf), self.params)


def run_algorithm(name: str, ctx: DropContext):
    """Run one algorithm on a drop; returns ``(f, eps, delta, outer, inner)``."""
    ch, params = ctx.channels, ctx.params
    if name in ("alg1", "alg1-cov"):
        mode = CsitMode.COVARIANCE if name.endswith("cov") else CsitMode.PERFECT
        res = solve_fbl(ctx.forms(mode), ctx.eps_cap, ctx.delta_cap, params, ctx.gpi)
        return res.f, ctx.eps_cap, ctx.delta_cap, 0, res.iterations
    if name in ("alg2", "alg2-cov"):
        mode = CsitMode.COVARIANCE if name.endswith("cov") else CsitMode.PERFECT
        r_inf, inf_iters = ctx.r_inf(mode)
        res = joint_solve(ch, params, ctx.joint_settings(mode), r_inf=r_inf)
        return res.f, res.eps, res.delta, res.outer_iterations, res.inner_iterations + inf_iters
    if name == "fbl-se-max":
        res = gpi_solve_se_max(ctx.forms(CsitMode.PERFECT), ctx.eps_cap, params, ctx.gpi)
        st = ctx.phase2(res.f)
        return res.f, st.eps, st.delta, 0, res.iterations
    f = baseline_precoder(BaselineKind(name), ch, params)
    st = ctx.phase2(f)
    return f, st.eps, st.delta, 0, 0


def run_drop(spec: SweepSpec, point: int, drop: int) -> list:
    """All requested algorithms on one drop, in the spec's algorithm order."""
    cfg = spec.scenario_at(point)
    ss = drop_seed(spec.base_seed, point, drop)
    seed = int(ss.generate_state(1, np.uint32)[0])
    channels = generate_drop(cfg, ss)
    params = cfg.fbl_params()
    ctx = DropContext(channels, params, spec)
    rows = []
    for name in spec.algorithms:
        t0 = time.perf_counter()
        try:
            f, eps, delta, outer, inner = run_algorithm(name, ctx)
            m = drop_metrics(f, eps, delta, channels, params)
            err = None
        except Exception as exc:  # recorded and the sweep goes on
            log.warning("drop (%d, %d) %s failed: %s", point, drop, name, exc)
            m = dict.fromkeys(("sum_secrecy_rate", "sum_secrecy_rate_clipped", "sum_rate",
                               "max_error_prob", "max_leakage"), math.nan)
            outer = inner = 0
            err = f"{type(exc).__name__}: {exc}"
        wall = (time.perf_counter() - t0) * 1e3 if spec.timing else 0.0
        rows.append(MetricRow(spec.var, spec.values[point], name, seed, outer_iters=outer,
                              inner_iters_total=inner, wall_ms=wall, error=err, **m))
    return rows


def _run_task(args):
    spec, point, drop = args
    return run_drop(spec, point, drop)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Every (point, drop) of the sweep; rows ordered by point, drop, algorithm."""
    tasks = [(spec, p, d) for p in range(len(spec.values)) for d in range(spec.drops)]
    if workers <= 1:
        chunks = map(_run_task, tasks)
        return [row for chunk in chunks for row in chunk]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [row for chunk in chunks for row in chunk]


def summarize(rows) -> list:
    """Mean and standard error per (sweep value, algorithm), failed rows skipped."""
    groups = {}
    for r in rows:
        groups.setdefault((r.sweep_value, r.algorithm), []).append(r)
    out = []
    for (value, alg), rs in groups.items():
        ok = [r for r in rs if r.error is None]
        entry = {"sweep_value": value, "algorithm": alg, "drops": len(rs), "failed": len(rs) - len(ok)}
        for key in ("sum_secrecy_rate", "sum_secrecy_rate_clipped", "sum_rate",
                    "max_error_prob", "max_leakage"):
            x = np.array([getattr(r, key) for r in ok], dtype=float)
            entry[key] = float(x.mean()) if x.size else math.nan
            entry[key + "_stderr"] = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        out.append(entry)
    return out


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def to_json(rows, spec: SweepSpec | None = None) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": spec.to_dict() if spec is not None else None,
        "rows": [asdict(r) for r in rows],
    }
    return json.dumps(doc, indent=1, allow_nan=True)


def rows_from_json(text: str) -> list:
    doc = json.loads(text)
    return [MetricRow(**r) for r in doc["rows"]]


def emit(rows, path, fmt: str = "csv", spec: SweepSpec | None = None) -> Path:
    """Write rows as CSV or JSON; I/O errors name the offending path."""
    path = Path(path)
    text = to_csv(rows) if fmt == "csv" else to_json(rows, spec)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {fmt} output to {path}: {exc}") from exc
    return path


def with_timing(spec: SweepSpec, on: bool = True) -> SweepSpec:
    return replace(spec, timing=on)
