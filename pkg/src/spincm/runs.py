"""Experiment orchestration shared by the service endpoints and the CLI.

A ``RunConfig`` turns into a validated context (algebra, r-matrix family,
initial state), is driven through the RK4 oracle and/or the exact solver, and
comes back as a flat table plus metadata ready for CSV/JSON emission.  All
randomness is seeded from the config, and floats are rendered with 17
significant digits, so identical configs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import factor, models, numint
from .config import RunConfig
from .dynr import RFamily
from .errors import DimensionError, DomainViolationError, SpincmError, ValidationError
from .liealg import LieAlgebraData, build_algebra, gelement, spin_from_dict
from .models import (ReducedState, ReducedTodaState, SpinCMState, TodaState,
                     Trajectory)


@dataclass
class RunContext:
    cfg: RunConfig
    algebra: LieAlgebraData
    rfamily: RFamily
    pi: list
    constants: dict


@dataclass
class TrajectoryResult:
    config: dict
    system: str
    method: str
    columns: list
    rows: list
    status: str
    horizon: float | None = None
    failure: str | None = None
    diagnostics: dict = field(default_factory=dict)


def build_context(cfg: RunConfig) -> RunContext:
    algebra = build_algebra(cfg.algebra.series, cfg.algebra.rank)
    pi = sorted(set(cfg.pi_prime))
    rfamily = RFamily(algebra, pi)
    constants = {}
    if cfg.initial.c:
        for key, val in cfg.initial.c.items():
            try:
                idx = int(key)
            except ValueError:
                raise ValidationError(f"initial.c: key '{key}' is not a simple-root index")
            if not 1 <= idx <= algebra.rank:
                raise ValidationError(f"initial.c: index {idx} outside 1..{algebra.rank}")
            if idx not in pi:
                raise ValidationError(f"initial.c: index {idx} not in pi_prime {pi}")
            constants[idx] = float(val)
    return RunContext(cfg, algebra, rfamily, pi, constants)


def initial_state(ctx: RunContext):
    cfg = ctx.cfg
    alg = ctx.algebra
    pos = np.asarray(cfg.position_vector, dtype=float)
    p = np.asarray(cfg.initial.p, dtype=float)
    try:
        spin = spin_from_dict(alg, cfg.initial.spin_h, cfg.initial.spin)
    except DimensionError as err:
        raise ValidationError(f"initial.spin: {err}")
    if cfg.system == "spin-cm":
        _require_domain(ctx, pos)
        if cfg.method in ("exact", "both") and np.max(np.abs(spin.h), initial=0.0) > 1e-10:
            raise ValidationError(
                "initial.spin_h: the exact method requires a vanishing Cartan spin component")
        return SpinCMState(pos, p, spin)
    if cfg.system == "reduced-cm":
        _require_domain(ctx, pos)
        simple = spin.r[alg.simple_idx]
        if np.max(np.abs(simple - 1.0)) > 1e-9 or np.max(np.abs(spin.h), initial=0.0) > 1e-9:
            raise ValidationError(
                "initial.spin: reduced-cm states need coefficient 1 on every simple "
                "root and no Cartan component")
        return ReducedState(pos, p, gelement(alg, None, spin.r))
    if cfg.system == "spin-toda":
        return TodaState(pos, p, spin)
    return ReducedTodaState(pos, p)


def _require_domain(ctx: RunContext, q: np.ndarray) -> None:
    try:
        ctx.rfamily.check_domain(q)
    except DomainViolationError as err:
        raise ValidationError(f"initial position: {err}")


def flow_and_monitors(ctx: RunContext):
    cfg = ctx.cfg
    if cfg.system == "spin-cm":
        return (models.spin_cm_flow(ctx.rfamily),
                numint.monitor_suite("spin-cm", rfamily=ctx.rfamily))
    if cfg.system == "reduced-cm":
        return (models.reduced_cm_flow(ctx.rfamily),
                numint.monitor_suite("reduced-cm", rfamily=ctx.rfamily))
    if cfg.system == "spin-toda":
        return (models.toda_flow(ctx.algebra, ctx.pi),
                numint.monitor_suite("spin-toda", algebra=ctx.algebra, pi_prime=ctx.pi))
    return (models.reduced_toda_flow(ctx.algebra, ctx.constants, ctx.pi),
            numint.monitor_suite("reduced-toda", algebra=ctx.algebra, pi_prime=ctx.pi,
                                 constants=ctx.constants))


def _rk4_dt(cfg: RunConfig) -> float:
    return cfg.time.dt if cfg.time.dt is not None else 1e-3


def _exact_times(cfg: RunConfig) -> np.ndarray:
    if cfg.time.n_samples is not None:
        return np.linspace(0.0, cfg.time.t_max, cfg.time.n_samples)
    dt = _rk4_dt(cfg)
    n = max(1, int(round(cfg.time.t_max / dt)))
    samples = min(n + 1, 513)
    return np.linspace(0.0, cfg.time.t_max, max(samples, 5))


def _solve_exact_traj(ctx: RunContext, st0, times) -> Trajectory:
    cfg = ctx.cfg
    if cfg.system == "spin-cm":
        return factor.solve_spin_cm(ctx.rfamily, st0, times)
    if cfg.system == "reduced-cm":
        return factor.solve_reduced_cm(ctx.rfamily, st0, times)
    if cfg.system == "spin-toda":
        return factor.solve_toda(ctx.algebra, st0, ctx.pi, times)
    return factor.solve_toda_reduced(ctx.algebra, st0.x, st0.p, ctx.constants,
                                     ctx.pi, times)


def run_simulate(cfg: RunConfig) -> TrajectoryResult:
    ctx = build_context(cfg)
    st0 = initial_state(ctx)
    flow, monitors = flow_and_monitors(ctx)
    traj = numint.integrate(flow, st0, numint.IntegratorConfig(
        dt=_rk4_dt(cfg), t_max=cfg.time.t_max, monitors=monitors))
    return trajectory_result(ctx, traj, "rk4")


def run_solve_exact(cfg: RunConfig) -> TrajectoryResult:
    ctx = build_context(cfg)
    st0 = initial_state(ctx)
    _, monitors = flow_and_monitors(ctx)
    if cfg.time.t_max == 0.0:
        traj = Trajectory(times=np.zeros(1), states=[st0])
    else:
        traj = _solve_exact_traj(ctx, st0, _exact_times(cfg))
    numint.attach_monitors(traj, monitors)
    return trajectory_result(ctx, traj, "exact")


def run_compare(cfg: RunConfig) -> dict:
    """Exact vs RK4 on a shared grid; sup-norm deviations per state component."""
    if cfg.method != "both":
        raise ValidationError("method: compare requires method = 'both'")
    ctx = build_context(cfg)
    st0 = initial_state(ctx)
    flow, monitors = flow_and_monitors(ctx)
    dt = cfg.time.dt if cfg.time.dt is not None else 1e-4
    n_steps = max(1, int(round(cfg.time.t_max / dt)))
    dt = cfg.time.t_max / n_steps
    sub = max(1, n_steps // 500)
    while n_steps % sub:
        sub -= 1
    ref = numint.integrate(flow, st0, numint.IntegratorConfig(dt=dt, t_max=cfg.time.t_max,
                                                              monitors=monitors))
    times = ref.times[::sub]
    if len(times) < 5:
        raise ValidationError("time: comparison grid needs at least five shared samples")
    exact = _solve_exact_traj(ctx, st0, times)
    warnings = []
    if ref.status == "truncated":
        warnings.append(f"rk4 truncated at t = {ref.horizon}: {ref.failure}")
    if exact.status == "truncated":
        warnings.append(f"exact truncated at t = {exact.horizon}: {exact.failure}")
    ref_states = ref.states[::sub]
    n_common = min(len(exact.states), len(ref_states))
    fields = _state_fields(cfg.system)
    per_field = {name: 0.0 for name in fields}
    for k in range(n_common):
        for name in fields:
            va = getattr(exact.states[k], name)
            vb = getattr(ref_states[k], name)
            if hasattr(va, "r"):
                dev = max(float(np.max(np.abs(va.h - vb.h), initial=0.0)),
                          float(np.max(np.abs(va.r - vb.r))))
            else:
                dev = float(np.max(np.abs(va - vb)))
            per_field[name] = max(per_field[name], dev)
    max_dev = max(per_field.values())
    return {
        "config": _resolved_config(cfg),
        "system": cfg.system,
        "per_field": per_field,
        "max_deviation": max_dev,
        "tolerance": cfg.tolerance,
        "pass": bool(max_dev <= cfg.tolerance),
        "n_compared": n_common,
        "common_t_max": float(times[n_common - 1]),
        "status_exact": exact.status,
        "status_rk4": ref.status,
        "warnings": warnings,
        "exact_diagnostics": _diagnostic_summary(exact),
    }


def _state_fields(system: str):
    return {
        "spin-cm": ("q", "p", "xi"),
        "reduced-cm": ("q", "p", "s"),
        "spin-toda": ("x", "p", "eta"),
        "reduced-toda": ("x", "p"),
    }[system]


def _diagnostic_summary(traj: Trajectory) -> dict:
    out = {}
    for key, val in traj.diagnostics.items():
        if isinstance(val, np.ndarray) and val.size:
            out[key] = float(np.max(np.abs(val)))
        elif isinstance(val, (int, float)):
            out[key] = float(val)
    return out


# ----------------------------------------------------------------------
# table rendering
# ----------------------------------------------------------------------

def _spin_columns(alg: LieAlgebraData, prefix: str, with_h: bool):
    cols = []
    if with_h:
        cols += [f"{prefix}_h{i + 1}" for i in range(alg.rank)]
    cols += [f"{prefix}[{alg.root_key(i)}]" for i in range(alg.num_roots)]
    return cols


def _state_columns(ctx: RunContext):
    alg = ctx.algebra
    n = alg.rank
    sys_tag = ctx.cfg.system
    if sys_tag == "spin-cm":
        return ([f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
                + _spin_columns(alg, "xi", True))
    if sys_tag == "reduced-cm":
        return ([f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
                + _spin_columns(alg, "s", False))
    if sys_tag == "spin-toda":
        return ([f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
                + _spin_columns(alg, "eta", True))
    return [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]


def _state_row(ctx: RunContext, st) -> list:
    sys_tag = ctx.cfg.system
    if sys_tag == "spin-cm":
        vec = np.concatenate([st.q, st.p, st.xi.h, st.xi.r])
    elif sys_tag == "reduced-cm":
        vec = np.concatenate([st.q, st.p, st.s.r])
    elif sys_tag == "spin-toda":
        vec = np.concatenate([st.x, st.p, st.eta.h, st.eta.r])
    else:
        vec = np.concatenate([st.x, st.p])
    return [float(v) for v in vec]


def _resolved_config(cfg: RunConfig) -> dict:
    out = json.loads(cfg.model_dump_json())
    # the destination is not run content; dropping it keeps identical runs
    # byte-identical regardless of where they are written
    out["output"].pop("path", None)
    return out


def trajectory_result(ctx: RunContext, traj: Trajectory, method: str) -> TrajectoryResult:
    columns = ["t"] + _state_columns(ctx)
    mon_cols = []
    mon_arrays = []
    for name in sorted(traj.monitors):
        arr = traj.monitors[name]
        if arr.ndim == 1:
            mon_cols.append(name)
            mon_arrays.append(arr[:, None])
        else:
            mon_cols += [f"{name}_{j + 1}" for j in range(arr.shape[1])]
            mon_arrays.append(arr)
    columns += mon_cols
    rows = []
    for k, st in enumerate(traj.states):
        row = [float(traj.times[k])] + _state_row(ctx, st)
        for arr in mon_arrays:
            row += [float(v) for v in arr[k]]
        rows.append(row)
    return TrajectoryResult(
        config=_resolved_config(ctx.cfg),
        system=ctx.cfg.system,
        method=method,
        columns=columns,
        rows=rows,
        status=traj.status,
        horizon=traj.horizon,
        failure=traj.failure,
        diagnostics=_diagnostic_summary(traj),
    )


def _csv_field(name: str) -> str:
    if "," in name or '"' in name:
        return '"' + name.replace('"', '""') + '"'
    return name


def render_csv(result: TrajectoryResult) -> str:
    """CSV with the resolved config embedded as a leading comment line."""
    meta = {
        "config": result.config, "system": result.system, "method": result.method,
        "status": result.status, "horizon": result.horizon, "failure": result.failure,
        "diagnostics": result.diagnostics,
    }
    lines = ["# " + json.dumps(meta, sort_keys=True, separators=(",", ":"))]
    lines.append(",".join(_csv_field(c) for c in result.columns))
    for row in result.rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def result_to_json(result: TrajectoryResult) -> dict:
    return {
        "config": result.config,
        "system": result.system,
        "method": result.method,
        "columns": result.columns,
        "rows": result.rows,
        "status": result.status,
        "horizon": result.horizon,
        "failure": result.failure,
        "diagnostics": result.diagnostics,
    }


def render_output(result: TrajectoryResult, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result_to_json(result), sort_keys=True, indent=1) + "\n"
    return render_csv(result)
