"""Fixed-step classic Runge-Kutta oracle with invariant monitoring.

The integrator works on flat vectors supplied by a ``FlowSystem`` adapter
(see ``models``); monitors are evaluated on unpacked states after the run.
A step-halving rerun provides a deterministic global-error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PreconditionError, SpincmError
from .models import FlowSystem, Trajectory


@dataclass
class IntegratorConfig:
    dt: float
    t_max: float
    monitors: dict = field(default_factory=dict)
    tolerance: float = 1e-6
    estimate_error: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise PreconditionError("dt must be positive")
        if self.t_max < 0:
            raise PreconditionError("t_max must be nonnegative")


def rk4_step(rhs: Callable, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _run(rhs, y0, dt, n_steps):
    ys = [np.asarray(y0, dtype=float).copy()]
    failure = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n_steps):
            try:
                y = rk4_step(rhs, ys[-1], dt)
            except SpincmError as err:
                failure = (k, err)
                break
            if not np.all(np.isfinite(y)):
                failure = (k, PreconditionError("state left the finite domain"))
                break
            ys.append(y)
    return ys, failure


def integrate(system: FlowSystem, state0, cfg: IntegratorConfig) -> Trajectory:
    """Integrate a flow with classic RK4 on a fixed grid.

    Domain errors raised by the right-hand side truncate the trajectory at the
    last completed step.  With ``estimate_error`` a dt/2 rerun is compared at
    the shared grid points and the worst deviation recorded; the trajectory
    gains an ``accuracy_warning`` diagnostic if it exceeds the tolerance.
    """
    y0 = system.pack(state0)
    n_steps = int(round(cfg.t_max / cfg.dt)) if cfg.t_max > 0 else 0
    ys, failure = _run(system.rhs, y0, cfg.dt, n_steps)
    times = cfg.dt * np.arange(len(ys))
    states = [system.unpack(y) for y in ys]
    traj = Trajectory(times=times, states=states)
    if failure is not None:
        traj.status = "truncated"
        traj.horizon = float(times[-1])
        traj.failure = f"{type(failure[1]).__name__}: {failure[1]}"
    if cfg.estimate_error and len(ys) > 1:
        fine, fine_fail = _run(system.rhs, y0, 0.5 * cfg.dt, 2 * (len(ys) - 1))
        if fine_fail is None:
            err = max(float(np.max(np.abs(ys[k] - fine[2 * k])))
                      for k in range(len(ys)))
            traj.diagnostics["error_estimate"] = err
            if err > cfg.tolerance:
                traj.diagnostics["accuracy_warning"] = True
    attach_monitors(traj, cfg.monitors)
    return traj


def attach_monitors(traj: Trajectory, monitors: dict) -> None:
    for name, fn in monitors.items():
        vals = [np.atleast_1d(np.asarray(fn(st), dtype=float)) for st in traj.states]
        arr = np.stack(vals)
        traj.monitors[name] = arr[:, 0] if arr.shape[1] == 1 else arr


def monitor_suite(system: str, *, rfamily=None, algebra=None, pi_prime=None,
                  constants=None) -> dict:
    """Standard monitor set per system tag: energy, momentum map, Lax spectrum."""
    from . import models

    if system == "spin-cm":
        r = rfamily

        def spec(st):
            return np.sort(np.linalg.eigvals(models.lax_L(r, st).to_matrix()).real)

        return {
            "energy": lambda st: models.spin_cm_hamiltonian(r, st),
            "momentum_norm": lambda st: float(np.linalg.norm(st.xi.h)),
            "lax_spectrum": spec,
        }
    if system == "reduced-cm":
        r = rfamily
        return {
            "energy": lambda st: models.reduced_hamiltonian(r, st),
            "simple_coeffs": lambda st: st.s.r[r.algebra.simple_idx],
        }
    if system == "spin-toda":
        alg, pi = algebra, pi_prime

        def spec(st):
            lax, _ = models.toda_lax_pair(alg, st, pi)
            return np.sort(np.linalg.eigvals(lax.to_matrix()).real)

        return {
            "energy": lambda st: models.toda_hamiltonian(alg, st, pi),
            "momentum_norm": lambda st: float(np.linalg.norm(st.eta.h)),
            "lax_spectrum": spec,
        }
    if system == "reduced-toda":
        alg, pi, c = algebra, pi_prime, constants
        return {
            "energy": lambda st: models.reduced_toda_hamiltonian(alg, st, c, pi),
        }
    raise PreconditionError(f"unknown system tag '{system}'")
