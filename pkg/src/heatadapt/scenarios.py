"""Closed-loop assemblies of plant, observer and controller.

Each runner advances the coupled system with a fixed per-step order:
read boundary values, evaluate the feedback and the innovation, update
the reciprocal estimate, then step the plant with the pre-update
estimate and step the observer.  Using the pre-update estimate keeps
plant and observer consistent with the continuous-time simultaneity;
the O(dt) splitting error this introduces is covered by the energy
residual checks in the test suite.

Runs are deterministic: identical inputs produce bit-identical traces
on one platform.  A run whose state norm passes 1e12 stops early with a
blow-up marker in the trace instead of raising; open-loop instability
is an expected, recorded outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .control import adaptive_u0, servo_boundary, servo_eval, zeta_step
from .domain import (
    ConfigError,
    GridFunction,
    Grid,
    Params,
    ReferenceSignal,
    SimConfig,
    Trace,
    TRACE_COLUMNS,
)
from .fdm import FluxBC, grad_values, l2_norm, step_heat

__all__ = [
    "ScenarioState",
    "BLOWUP_NORM",
    "benchmark_initial_state",
    "run_open_loop",
    "run_observer",
    "run_stabilization",
    "run_tracking",
    "run_error_system",
]

#: state norm at which a run is declared blown up and terminated
BLOWUP_NORM = 1e12


@dataclass(frozen=True)
class ScenarioState:
    """State of a run at one instant: fields, estimate and last inputs.

    For error-system runs, ``w`` holds the error field and ``zeta`` the
    parameter error; ``what`` is None for runs without an observer.
    """

    t: float
    w: GridFunction
    what: GridFunction | None
    zeta: float
    last_u0: float
    last_u: float


def benchmark_initial_state(grid: Grid, q: float) -> GridFunction:
    """The standard initial profile w(x, 0) = q x - 1."""
    return GridFunction(grid, q * grid.nodes - 1.0)


class _Recorder:
    """Accumulates per-sample scalars, extras and snapshots for a Trace."""

    def __init__(self, extra_names: tuple[str, ...] = ()):
        self.times: list[float] = []
        self.cols: dict[str, list[float]] = {k: [] for k in TRACE_COLUMNS}
        self.extras: dict[str, list[float]] = {k: [] for k in extra_names}
        self.snapshots: list[tuple[float, dict[str, np.ndarray]]] = []

    def row(self, t: float, **values: float) -> None:
        self.times.append(t)
        for k in self.cols:
            self.cols[k].append(values.get(k, 0.0))
        for k in self.extras:
            self.extras[k].append(values[k])

    def snap(self, t: float, fields: dict[str, np.ndarray]) -> None:
        self.snapshots.append((t, {k: v.copy() for k, v in fields.items()}))

    def build(self, final_state, blown_up=False, blow_up_time=None) -> Trace:
        return Trace(
            times=np.array(self.times),
            scalars={k: np.array(v) for k, v in self.cols.items()},
            extras={k: np.array(v) for k, v in self.extras.items()},
            snapshots=self.snapshots,
            final_state=final_state,
            blown_up=blown_up,
            blow_up_time=blow_up_time,
        )


def _check_grid(config: SimConfig, *fields: GridFunction) -> None:
    for f in fields:
        if f.grid != config.grid:
            raise ConfigError("initial data must live on the configured grid")


def _sq_norm(values: np.ndarray, dx: float) -> float:
    v2 = values * values
    return dx * (v2.sum() - 0.5 * (v2[0] + v2[-1]))


def run_open_loop(p: Params, config: SimConfig, w0: GridFunction) -> Trace:
    """Simulate the uncontrolled plant (u = 0) and record the growth of ||w||.

    With q > 1 the boundary convection wins and the state grows without
    bound; the run then stops at the blow-up threshold with the marker
    set rather than raising.
    """
    _check_grid(config, w0)
    dt, stride, snap_stride = config.dt, config.sample_stride, config.snapshot_stride
    q = p.q
    w = w0
    rec = _Recorder()
    blown, t_blow = False, None

    def record(t: float, w: GridFunction, nrm: float) -> None:
        rec.row(
            t, u0=0.0, u=0.0, zeta=0.0,
            w0=w.values[0], w1=w.values[-1], wnorm=nrm,
            obs_err_norm=0.0, E=0.0, F=0.0,
        )

    n_steps = config.n_steps
    for k in range(n_steps):
        t = k * dt
        if k % stride == 0:
            record(t, w, l2_norm(w))
        if snap_stride and k % snap_stride == 0:
            rec.snap(t, {"w": w.values})
        w = step_heat(w, FluxBC(-q * w.values[0], 0.0), dt)
        if math.sqrt(_sq_norm(w.values, config.grid.dx)) > BLOWUP_NORM:
            blown, t_blow = True, (k + 1) * dt
            break
    t_end = t_blow if blown else n_steps * dt
    record(t_end, w, l2_norm(w))
    if snap_stride:
        rec.snap(t_end, {"w": w.values})
    final = ScenarioState(t=t_end, w=w, what=None, zeta=0.0, last_u0=0.0, last_u=0.0)
    return rec.build(final, blown_up=blown, blow_up_time=t_blow)


def _run_observer_loop(
    p: Params,
    config: SimConfig,
    w0: GridFunction,
    what0: GridFunction,
    zeta0: float,
    u0_of: Callable[[float, GridFunction], float],
) -> Trace:
    """Common plant + observer + update-law loop.

    u0_of(t, what) supplies the controller value, either from an
    external signal (observer scenario) or from the adaptive feedback
    law (stabilization scenario).
    """
    _check_grid(config, w0, what0)
    dt, stride, snap_stride = config.dt, config.sample_stride, config.snapshot_stride
    dx = config.grid.dx
    q, b, c1, sgn = p.q, p.b, p.c1, p.sign_b
    half_b = 0.5 * abs(b)
    inv_b = 1.0 / b
    w, what, zeta = w0, what0, zeta0
    rec = _Recorder(extra_names=("diss_cum",))
    blown, t_blow = False, None
    diss_cum = 0.0
    u0 = u = 0.0

    def record(t: float) -> None:
        werr = w.values - what.values
        e = 0.5 * _sq_norm(werr, dx)
        zt = inv_b - zeta
        f = e + half_b * zt * zt
        rec.row(
            t, u0=u0, u=u, zeta=zeta,
            w0=w.values[0], w1=w.values[-1],
            wnorm=math.sqrt(_sq_norm(w.values, dx)),
            obs_err_norm=math.sqrt(2.0 * e), E=e, F=f, diss_cum=diss_cum,
        )

    n_steps = config.n_steps
    for k in range(n_steps):
        t = k * dt
        u0 = u0_of(t, what)
        innov = w.values[-1] - what.values[-1]
        u = zeta * u0
        if k % stride == 0:
            record(t)
        if snap_stride and k % snap_stride == 0:
            rec.snap(t, {"w": w.values, "what": what.values})
        gerr = grad_values(w.values - what.values, dx)
        diss_cum += dt * (_sq_norm(gerr, dx) + c1 * innov * innov)
        zeta_new = zeta_step(zeta, sgn, innov, u0, dt)
        left = -q * w.values[0]
        w = step_heat(w, FluxBC(left, b * u), dt)
        what = step_heat(what, FluxBC(left, u0 + c1 * innov), dt)
        zeta = zeta_new
        if math.sqrt(_sq_norm(w.values, dx)) > BLOWUP_NORM:
            blown, t_blow = True, (k + 1) * dt
            break
    t_end = t_blow if blown else n_steps * dt
    u0 = u0_of(t_end, what)
    u = zeta * u0
    record(t_end)
    if snap_stride:
        rec.snap(t_end, {"w": w.values, "what": what.values})
    final = ScenarioState(t=t_end, w=w, what=what, zeta=zeta, last_u0=u0, last_u=u)
    return rec.build(final, blown_up=blown, blow_up_time=t_blow)


def run_observer(
    p: Params,
    config: SimConfig,
    w0: GridFunction,
    what0: GridFunction,
    zeta0: float,
    u0_signal: Callable[[float], float],
) -> Trace:
    """Plant under u = zeta * u0 with an externally supplied u0(t).

    Exercises the observer and the update law in isolation from any
    feedback design; the plant may well be diverging while the
    estimation error decays.
    """
    return _run_observer_loop(p, config, w0, what0, zeta0, lambda t, _what: u0_signal(t))


def run_stabilization(
    p: Params,
    config: SimConfig,
    w0: GridFunction,
    what0: GridFunction,
    zeta0: float,
) -> Trace:
    """Full adaptive output-feedback stabilization loop."""
    est = p.estimator_view()
    return _run_observer_loop(
        p, config, w0, what0, zeta0, lambda t, what: adaptive_u0(what, est)
    )


def run_tracking(
    p: Params,
    config: SimConfig,
    w0: GridFunction,
    zhat0: GridFunction,
    zeta0: float,
    ref: ReferenceSignal,
) -> Trace:
    """Adaptive output tracking of the reference at the unactuated end.

    The observer estimates the shifted state z = w - v, where v is the
    servo solution built from the reference's derivative series; its
    boundary data v(1,t), v_x(1,t) enter the observer flux and the
    feedback.  The trace records the tracking error w(0,t) - r(t) and
    the servo slope series (the signal whose excitation decides whether
    the reciprocal estimate converges) alongside the standard columns.
    """
    _check_grid(config, w0, zhat0)
    dt, stride, snap_stride = config.dt, config.sample_stride, config.snapshot_stride
    dx = config.grid.dx
    q, b, c1, sgn = p.q, p.b, p.c1, p.sign_b
    est = p.estimator_view()
    J = config.servo_truncation_J
    half_b = 0.5 * abs(b)
    inv_b = 1.0 / b
    nodes = config.grid.nodes
    w, zhat, zeta = w0, zhat0, zeta0
    rec = _Recorder(extra_names=("tracking_err", "ref", "v1", "vx1"))
    blown, t_blow = False, None
    u0 = u = 0.0
    servo = servo_boundary(ref, q, 0.0, J)

    def record(t: float) -> float:
        v_vals = servo_eval(ref, q, nodes, t, J)
        zerr = w.values - v_vals - zhat.values
        e = 0.5 * _sq_norm(zerr, dx)
        zt = inv_b - zeta
        f = e + half_b * zt * zt
        nrm = math.sqrt(_sq_norm(w.values, dx))
        r_t = ref.derivative(0, t)
        rec.row(
            t, u0=u0, u=u, zeta=zeta,
            w0=w.values[0], w1=w.values[-1], wnorm=nrm,
            obs_err_norm=math.sqrt(2.0 * e), E=e, F=f,
            tracking_err=w.values[0] - r_t, ref=r_t,
            v1=servo.v1, vx1=servo.vx1,
        )
        return nrm

    n_steps = config.n_steps
    for k in range(n_steps):
        t = k * dt
        servo = servo_boundary(ref, q, t, J)
        u0 = adaptive_u0(zhat, est, servo)
        innov = w.values[-1] - servo.v1 - zhat.values[-1]
        u = zeta * u0
        if k % stride == 0:
            record(t)
        if snap_stride and k % snap_stride == 0:
            rec.snap(t, {"w": w.values, "what": zhat.values})
        zeta_new = zeta_step(zeta, sgn, innov, u0, dt)
        r_t = ref.derivative(0, t)
        w_at_0 = w.values[0]
        w = step_heat(w, FluxBC(-q * w_at_0, b * u), dt)
        zhat = step_heat(
            zhat, FluxBC(-q * (w_at_0 - r_t), u0 + c1 * innov - servo.vx1), dt
        )
        zeta = zeta_new
        if math.sqrt(_sq_norm(w.values, dx)) > BLOWUP_NORM:
            blown, t_blow = True, (k + 1) * dt
            break
    t_end = t_blow if blown else n_steps * dt
    servo = servo_boundary(ref, q, t_end, J)
    u0 = adaptive_u0(zhat, est, servo)
    u = zeta * u0
    record(t_end)
    if snap_stride:
        rec.snap(t_end, {"w": w.values, "what": zhat.values})
    final = ScenarioState(t=t_end, w=w, what=zhat, zeta=zeta, last_u0=u0, last_u=u)
    return rec.build(final, blown_up=blown, blow_up_time=t_blow)


def run_error_system(
    p: Params,
    config: SimConfig,
    wtilde0: GridFunction,
    zetatilde0: float,
    u0_signal: Callable[[float], float],
) -> Trace:
    """Directly simulate the estimation-error dynamics.

    The error field obeys the heat equation with zero flux at x = 0 and
    flux -b ztilde u0 - c1 werr(1) at x = 1, while the parameter error
    obeys ztilde' = sign(b) u0 werr(1).  Algebraically identical to the
    difference of plant and observer in :func:`run_observer`, which
    makes this the finite-difference half of the spectral cross-check.
    The ``zeta`` column holds the parameter error and ``wnorm`` equals
    ``obs_err_norm``; ``diss_cum`` accumulates
    dt * (||werr_x||^2 + c1 werr(1)^2) for energy-identity tests.
    """
    _check_grid(config, wtilde0)
    dt, stride, snap_stride = config.dt, config.sample_stride, config.snapshot_stride
    dx = config.grid.dx
    b, c1, sgn = p.b, p.c1, p.sign_b
    half_b = 0.5 * abs(b)
    wt, zt = wtilde0, zetatilde0
    rec = _Recorder(extra_names=("diss_cum",))
    blown, t_blow = False, None
    diss_cum = 0.0
    u0 = 0.0

    def record(t: float) -> float:
        e = 0.5 * _sq_norm(wt.values, dx)
        nrm = math.sqrt(2.0 * e)
        rec.row(
            t, u0=u0, u=0.0, zeta=zt,
            w0=wt.values[0], w1=wt.values[-1], wnorm=nrm,
            obs_err_norm=nrm, E=e, F=e + half_b * zt * zt, diss_cum=diss_cum,
        )
        return nrm

    n_steps = config.n_steps
    for k in range(n_steps):
        t = k * dt
        u0 = u0_signal(t)
        wt1 = wt.values[-1]
        if k % stride == 0:
            record(t)
        if snap_stride and k % snap_stride == 0:
            rec.snap(t, {"w": wt.values})
        g = grad_values(wt.values, dx)
        diss_cum += dt * (_sq_norm(g, dx) + c1 * wt1 * wt1)
        zt_new = zt + dt * sgn * u0 * wt1
        wt = step_heat(wt, FluxBC(0.0, -b * zt * u0 - c1 * wt1), dt)
        zt = zt_new
        if math.sqrt(_sq_norm(wt.values, dx)) > BLOWUP_NORM:
            blown, t_blow = True, (k + 1) * dt
            break
    t_end = t_blow if blown else n_steps * dt
    u0 = u0_signal(t_end)
    record(t_end)
    if snap_stride:
        rec.snap(t_end, {"w": wt.values})
    final = ScenarioState(t=t_end, w=wt, what=None, zeta=zt, last_u0=u0, last_u=0.0)
    return rec.build(final, blown_up=blown, blow_up_time=t_blow)
