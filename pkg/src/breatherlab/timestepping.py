"""Adaptive implicit time stepping with step-doubling error control.

One driver serves both flows. A "substep" advances the state by one
implicit solve; the driver compares one full step against two half steps,
accepts the half-step result when the discrepancy-based local error
estimate stays below error_tol * dt, and rescales dt from the estimate.

Accepted substeps are logged as (tag, t, dt) so a run can be replayed
bitwise, which is how the comparison principle is checked with identical
step sequences.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NewtonDiverged, StepUnderflow

Substep = Callable[[np.ndarray, float, float], np.ndarray]

STARTUP = "s"
MAIN = "m"

_SAFETY = 0.9
_MAX_GROW = 2.0
_MAX_SHRINK = 0.1
_UNDERFLOW = 1e-14


def evolve_adaptive(
    y0: np.ndarray,
    t_points: Sequence[float],
    substep: Substep,
    order: int,
    error_tol: float,
    dt_init: float,
    dt_max: float,
    startup_substep: Substep | None = None,
    startup_steps: int = 0,
    startup_dt_first: float | None = None,
    est_margin: int = 0,
    probes: Sequence[int] = (),
    max_steps: int = 2_000_000,
):
    """March y0 from t_points[0], landing exactly on every later t_point.

    Returns (snapshots, step_log): one state copy per t_point (the first is
    y0 itself) and the accepted substep log.

    The optional startup phase takes `startup_steps` uncontrolled damped
    steps with geometrically growing dt starting from dt_init. It exists to
    absorb stiff initial transients that the error-controlled main scheme
    would otherwise resolve at prohibitive cost; pass startup_steps=0 for
    smooth initial data.

    est_margin excludes that many entries at each end of the state from
    the error-estimate norm. Nodes next to a moving Dirichlet boundary are
    slaved to the exact boundary value with a physical tracking lag that
    does not shrink with dt; measuring them gives the estimate a
    dt-independent floor that deadlocks the controller. Their values stay
    pinned through the boundary data, so excluding them is safe; they must
    simply be kept out of verification windows (which stay several length
    units inside the domain regardless).

    probes lists state indices whose value is recorded after every
    accepted substep; the returned traces dict maps each index to
    (times, values) arrays. Traces feed nested-domain runs that reuse a
    parent solution as boundary data.
    """
    t_points = [float(t) for t in t_points]
    if len(t_points) < 1:
        raise ValueError("need at least the initial time")
    if any(b <= a for a, b in zip(t_points, t_points[1:])):
        raise ValueError("snapshot times must be strictly increasing")
    if t_points[0] < 0.0:
        raise ValueError("start time must be >= 0")

    t = t_points[0]
    y = np.array(y0, dtype=float)
    snapshots = [y.copy()]
    log: list[tuple[str, float, float]] = []
    probes = tuple(int(i) for i in probes)
    trace_t: list[float] = [t]
    trace_v: dict[int, list[float]] = {i: [float(y[i])] for i in probes}

    def traces():
        ts = np.asarray(trace_t)
        return {i: (ts, np.asarray(trace_v[i])) for i in probes}

    def record_state(time_now: float) -> None:
        if probes:
            trace_t.append(time_now)
            for i in probes:
                trace_v[i].append(float(y[i]))

    if len(t_points) == 1:
        return snapshots, log, traces()

    i_next = 1
    dt = float(dt_init)

    if startup_steps > 0:
        if startup_substep is None:
            startup_substep = substep
        # The startup phase covers the horizon a clean doubling ladder of
        # `startup_steps` steps from dt_init would reach; the ladder itself
        # may start lower (startup_dt_first matched to the data's fastest
        # timescale keeps every Newton solve perturbative) and divergence
        # retries shrink the current step but never the horizon.
        horizon = t_points[0] + dt_init * (2.0 ** startup_steps - 1.0)
        horizon = min(horizon, t + 0.25 * (t_points[i_next] - t))
        dt_s = float(dt_init if startup_dt_first is None
                     else min(startup_dt_first, dt_init))
        retries = 0
        streak = 0
        while t < horizon:
            dt_s = min(dt_s, horizon - t)
            try:
                y = startup_substep(y, t, dt_s)
            except NewtonDiverged:
                retries += 1
                if retries > 2000 or dt_s < 1e-200:
                    raise StepUnderflow(f"startup stalled at t={t} with dt={dt_s}")
                dt_s *= 0.5
                streak = 0
                continue
            log.append((STARTUP, t, dt_s))
            t += dt_s
            record_state(t)
            streak += 1
            # Regrow only after consecutive successes so a hard stretch is
            # walked through instead of oscillating fail/retry around it.
            if streak >= 2:
                dt_s *= 2.0
        dt = dt_s

    if est_margin < 0 or 2 * est_margin >= y.size - 2:
        raise ValueError(f"est_margin={est_margin} leaves no node to measure")
    sl = slice(est_margin, y.size - est_margin)

    shrink = 2.0 ** order - 1.0
    steps = 0
    while i_next < len(t_points):
        steps += 1
        if steps > max_steps:
            raise StepUnderflow(
                f"exceeded {max_steps} steps before t={t_points[i_next]}; "
                "solver configuration is mis-tuned for this problem"
            )
        if dt < _UNDERFLOW * dt_init:
            raise StepUnderflow(f"dt={dt} fell below 1e-14 * dt_init at t={t}")

        target = t_points[i_next]
        dt_use = min(dt, dt_max)
        landing = t + dt_use >= target - 1e-12 * max(1.0, abs(target))
        if landing:
            dt_use = target - t

        try:
            y_big = substep(y, t, dt_use)
            y_mid = substep(y, t, 0.5 * dt_use)
            y_new = substep(y_mid, t + 0.5 * dt_use, 0.5 * dt_use)
        except NewtonDiverged:
            dt = 0.5 * dt_use
            continue

        est = float(np.max(np.abs(y_new[sl] - y_big[sl]))) / shrink
        tol_step = error_tol * dt_use
        if est <= tol_step:
            log.append((MAIN, t, 0.5 * dt_use))
            log.append((MAIN, t + 0.5 * dt_use, 0.5 * dt_use))
            y = y_new
            t = target if landing else t + dt_use
            record_state(t)
            if landing:
                snapshots.append(y.copy())
                i_next += 1
            if est == 0.0:
                factor = _MAX_GROW
            else:
                factor = _SAFETY * (tol_step / est) ** (1.0 / order)
            grown = dt_use * min(_MAX_GROW, max(_MAX_SHRINK, factor))
            # A landing step may be artificially short; never let it drag
            # the working dt down.
            dt = max(grown, dt) if landing else grown
        else:
            factor = _SAFETY * (tol_step / est) ** (1.0 / order)
            dt = dt_use * min(0.9, max(_MAX_SHRINK, factor))

    return snapshots, log, traces()


def replay(
    y0: np.ndarray,
    log: Sequence[tuple[str, float, float]],
    substep: Substep,
    startup_substep: Substep | None = None,
) -> np.ndarray:
    """Re-apply a recorded substep sequence to (possibly different) data."""
    if startup_substep is None:
        startup_substep = substep
    y = np.array(y0, dtype=float)
    for tag, t, dt in log:
        y = (startup_substep if tag == STARTUP else substep)(y, t, dt)
    return y
