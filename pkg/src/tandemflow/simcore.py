"""Event-driven simulator for two fluid queues in tandem behind traffic lights.

Queue 1 drains into queue 2. Each queue is gated by a fixed-cycle light:
blocked on [k*c_i, k*c_i + theta_i), served on [k*c_i + theta_i, (k+1)*c_i).
All inflow and service rates are piecewise constant, so queue contents are
piecewise linear and every event epoch (light switch, rate jump, queue
emptying or filling) is computed in closed form.  There is no time stepping:
the trajectory is exact up to floating-point rounding.

The simulator emits an annotated event log carrying one-sided limits of every
rate at every discontinuity.  Downstream consumers (sensitivity accumulators,
finite-difference checks) work from that log alone.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

INF = math.inf

# Event kinds.  Plain ints keep the event loop cheap.
RED_START = 0
GREEN_START = 1
EXO_RATE_JUMP = 2
INTERNAL_RATE_JUMP = 3
BUSY_START = 4
EMPTY_START = 5
CONTROL_CYCLE_BOUNDARY = 6

KIND_NAMES = {
    RED_START: "RedStart",
    GREEN_START: "GreenStart",
    EXO_RATE_JUMP: "ExogenousRateJump",
    INTERNAL_RATE_JUMP: "InternalRateJump",
    BUSY_START: "BusyStart",
    EMPTY_START: "EmptyStart",
    CONTROL_CYCLE_BOUNDARY: "ControlCycleBoundary",
}

# Process labels for exogenous rate jumps.
PROC_ALPHA1 = "alpha1"
PROC_ALPHA2_TILDE = "alpha2_tilde"


@dataclass(frozen=True, slots=True)
class PhasePlan:
    """Fixed-cycle light timing for both intersections.

    theta_i is the red duration of queue i's light; it must lie strictly
    inside (0, c_i) so every cycle has both a red and a green interval.
    """

    c1: float
    c2: float
    theta1: float
    theta2: float

    def __post_init__(self) -> None:
        for c, th, i in ((self.c1, self.theta1, 1), (self.c2, self.theta2, 2)):
            if not (math.isfinite(c) and c > 0.0):
                raise ValueError(f"c{i} must be a positive finite cycle length, got {c!r}")
            if not (0.0 < th < c):
                raise ValueError(f"theta{i}={th!r} outside the open interval (0, c{i}={c!r})")

    def cycle(self, queue: int) -> float:
        return self.c1 if queue == 1 else self.c2

    def red(self, queue: int) -> float:
        return self.theta1 if queue == 1 else self.theta2


class PiecewiseConstantRate:
    """Right-continuous step function used for every rate process.

    `segments` is a sequence of (start_epoch, rate) pairs; the first epoch
    must be 0.0, epochs must increase strictly, rates are finite and >= 0.
    The value on [epochs[j], epochs[j+1]) is rates[j]; `horizon` bounds the
    domain of validity.
    """

    __slots__ = ("epochs", "rates", "horizon")

    def __init__(self, segments, horizon: float):
        epochs = [float(e) for e, _ in segments]
        rates = [float(r) for _, r in segments]
        if not epochs:
            raise ValueError("at least one segment required")
        if epochs[0] != 0.0:
            raise ValueError(f"first segment must start at 0.0, got {epochs[0]!r}")
        for a, b in zip(epochs, epochs[1:]):
            if not b > a:
                raise ValueError(f"segment epochs must increase strictly ({a!r} -> {b!r})")
        for r in rates:
            if not (math.isfinite(r) and r >= 0.0):
                raise ValueError(f"rates must be finite and nonnegative, got {r!r}")
        horizon = float(horizon)
        if not (math.isfinite(horizon) and horizon > epochs[-1]):
            raise ValueError(f"horizon {horizon!r} must exceed the last segment epoch {epochs[-1]!r}")
        self.epochs = epochs
        self.rates = rates
        self.horizon = horizon

    def rate_at(self, t: float) -> float:
        """Value at time t (right-continuous lookup), for 0 <= t < horizon."""
        if t < 0.0 or t >= self.horizon:
            raise ValueError(f"t={t!r} outside [0, {self.horizon!r})")
        return self.rates[bisect_right(self.epochs, t) - 1]

    @property
    def segments(self) -> list[tuple[float, float]]:
        return list(zip(self.epochs, self.rates))

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"PiecewiseConstantRate({self.segments!r}, horizon={self.horizon!r})"


def constant_rate(rate: float, horizon: float) -> PiecewiseConstantRate:
    """Single-segment process holding `rate` on [0, horizon)."""
    return PiecewiseConstantRate([(0.0, rate)], horizon)


@dataclass(frozen=True, slots=True)
class ServiceProfile:
    """Service (departure) rate profile applied during green intervals.

    mode "constant": queue i is served at beta_max_i whenever its light is
    green.  mode "ramp": the rate follows a nondecreasing staircase over
    elapsed green time (start-up ramp), given as a PiecewiseConstantRate
    whose epochs are offsets from the green onset.  Service is always 0
    during red.
    """

    mode: str
    beta_max1: float
    beta_max2: float
    ramp1: PiecewiseConstantRate | None = None
    ramp2: PiecewiseConstantRate | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("constant", "ramp"):
            raise ValueError(f"mode must be 'constant' or 'ramp', got {self.mode!r}")
        for b, i in ((self.beta_max1, 1), (self.beta_max2, 2)):
            if not (math.isfinite(b) and b > 0.0):
                raise ValueError(f"beta_max{i} must be positive and finite, got {b!r}")
        if self.mode == "constant":
            if self.ramp1 is not None or self.ramp2 is not None:
                raise ValueError("constant mode takes no ramp staircases")
            return
        for ramp, bmax, i in ((self.ramp1, self.beta_max1, 1), (self.ramp2, self.beta_max2, 2)):
            if ramp is None:
                raise ValueError(f"ramp mode requires a staircase for queue {i}")
            prev = -INF
            for v in ramp.rates:
                if v < prev:
                    raise ValueError(f"ramp{i} staircase must be nondecreasing")
                prev = v
            if prev > bmax:
                raise ValueError(f"ramp{i} staircase exceeds beta_max{i}={bmax!r}")


@dataclass(slots=True)
class Event:
    """One discontinuity of the coupled system, with one-sided rate limits.

    Annotation fields ending in _l / _r are the limits just before and just
    after this event.  When several events share an epoch they are applied
    in a fixed priority order (light switches, exogenous jumps, internal
    jumps, emptyings, fillings; queue 1 before queue 2) and each event's
    limits bracket its own change only, so per-event jumps never double
    count a coincident change.  `alpha2` is the merged inflow to queue 2,
    `d1` the instantaneous outflow of queue 1.

    BusyStart events record the event that switched their queue's net
    inflow positive in trigger_kind / trigger_queue (trigger_kind == -1
    means no identified trigger).
    """

    epoch: float
    kind: int
    queue: int
    process: str
    x1: float
    x2: float
    busy1_l: bool
    busy1_r: bool
    busy2_l: bool
    busy2_r: bool
    green1_l: bool
    green1_r: bool
    green2_l: bool
    green2_r: bool
    a1_l: float
    a1_r: float
    a2t_l: float
    a2t_r: float
    b1_l: float
    b1_r: float
    b2_l: float
    b2_r: float
    d1_l: float
    d1_r: float
    alpha2_l: float
    alpha2_r: float
    trigger_kind: int = -1
    trigger_queue: int = 0


@dataclass(slots=True)
class TandemTrajectory:
    """Exact piecewise-linear sample path over [t0, t1).

    breakpoints holds (epoch, x1, x2) at t0, at every event epoch and at t1;
    events is the annotated log, bracketed by ControlCycleBoundary markers
    whose annotations give the state entering and leaving the window.
    """

    t0: float
    t1: float
    phi: float
    breakpoints: list[tuple[float, float, float]]
    events: list[Event]

    def end_state(self) -> tuple[float, float]:
        _, x1, x2 = self.breakpoints[-1]
        return (x1, x2)

    def state_at(self, t: float) -> tuple[float, float]:
        """Linear interpolation of (x1, x2); exact at breakpoints."""
        if not (self.t0 <= t <= self.t1):
            raise ValueError(f"t={t!r} outside [{self.t0!r}, {self.t1!r}]")
        pts = self.breakpoints
        epochs = [p[0] for p in pts]
        j = bisect_right(epochs, t) - 1
        tj, x1, x2 = pts[j]
        if t == tj or j == len(pts) - 1:
            return (x1, x2)
        tk, y1, y2 = pts[j + 1]
        w = (t - tj) / (tk - tj)
        return (x1 + w * (y1 - x1), x2 + w * (y2 - x2))


def outflow_rate(x: float, alpha: float, beta: float) -> float:
    """Instantaneous departure rate of a queue: beta while backed up, else
    the arrivals pass straight through."""
    return beta if x > 0.0 else alpha


def merge_inflow(delta1: float, alpha2_tilde: float, phi: float) -> float:
    """Inflow to queue 2: fraction phi of queue 1's outflow plus the side
    street's own arrivals."""
    return phi * delta1 + alpha2_tilde


def build_switch_epochs(plan: PhasePlan, horizon: float, t0: float = 0.0):
    """All light-switch events in [t0, horizon) as (epoch, kind, queue),
    sorted by epoch with queue 1 first on ties.  Epochs are k*c_i products,
    never running sums, so repeated calls agree bitwise."""
    if not horizon > t0 >= 0.0:
        raise ValueError(f"need 0 <= t0 < horizon, got t0={t0!r} horizon={horizon!r}")
    out = []
    for queue, c, th in ((1, plan.c1, plan.theta1), (2, plan.c2, plan.theta2)):
        k = max(int(t0 // c) - 1, 0)
        while True:
            base = k * c
            if base >= horizon:
                break
            if base >= t0:
                out.append((base, RED_START, queue))
            g = base + th
            if t0 <= g < horizon:
                out.append((g, GREEN_START, queue))
            k += 1
    out.sort(key=lambda e: (e[0], e[2], e[1]))
    return out


def _phase_at_left(c: float, th: float, t0: float) -> tuple[bool, float]:
    """Light state just before t0: (green, green_onset_epoch).

    Switches at exactly t0 count as not yet applied.  At t0 == 0 there is
    no prior cycle; the pre-window state is red with no onset.
    """
    if t0 <= 0.0:
        return (False, 0.0)
    k = int(t0 // c)
    while k * c > t0:
        k -= 1
    while (k + 1) * c <= t0:
        k += 1
    u = t0 - k * c
    if u == 0.0:
        if k == 0:
            return (False, 0.0)
        return (True, (k - 1) * c + th)  # tail of the previous cycle's green
    if u <= th:
        return (False, 0.0)
    return (True, k * c + th)


def simulate(
    arrivals1: PiecewiseConstantRate,
    arrivals2_tilde: PiecewiseConstantRate,
    plan: PhasePlan,
    service: ServiceProfile,
    phi: float,
    x0: tuple[float, float],
    horizon: float,
    t0: float = 0.0,
) -> TandemTrajectory:
    """Run the tandem system exactly over the window [t0, horizon).

    Scheduled events at t0 are applied at the window start; scheduled events
    at the horizon belong to the next window.  A queue that drains to zero
    exactly at the horizon still logs its EmptyStart so the end state is an
    exact zero.  The log is bracketed by ControlCycleBoundary markers: the
    opening marker carries the state entering the window (before any events
    at t0), the closing one the state at the horizon.
    """
    if not (0.0 <= t0 < horizon):
        raise ValueError(f"need 0 <= t0 < horizon, got t0={t0!r} horizon={horizon!r}")
    for arr, name in ((arrivals1, "arrivals1"), (arrivals2_tilde, "arrivals2_tilde")):
        if arr.horizon < horizon:
            raise ValueError(f"{name} ends at {arr.horizon!r}, before the simulation horizon {horizon!r}")
    if not (0.0 <= phi <= 1.0):
        raise ValueError(f"phi must lie in [0, 1], got {phi!r}")
    x1, x2 = float(x0[0]), float(x0[1])
    if x1 < 0.0 or x2 < 0.0:
        raise ValueError(f"initial queue contents must be nonnegative, got {x0!r}")

    is_ramp = service.mode == "ramp"
    bmax1, bmax2 = service.beta_max1, service.beta_max2

    # Light switch schedule and pre-window phases.
    sw = build_switch_epochs(plan, horizon, t0)
    nsw = len(sw)
    isw = 0
    green1, onset1 = _phase_at_left(plan.c1, plan.theta1, t0)
    green2, onset2 = _phase_at_left(plan.c2, plan.theta2, t0)

    # Staircase step schedules for the current green interval (absolute
    # epochs strictly after t0; the onset value itself is not a step).
    st1e: list[float] = []
    st1v: list[float] = []
    st2e: list[float] = []
    st2v: list[float] = []

    def _green_rate(queue: int, onset: float) -> float:
        if not is_ramp:
            return bmax1 if queue == 1 else bmax2
        ramp = service.ramp1 if queue == 1 else service.ramp2
        el = t0 - onset
        return ramp.rates[bisect_right(ramp.epochs, el) - 1]

    def _pending_steps(queue: int, onset: float, after: float):
        if not is_ramp:
            return [], []
        ramp = service.ramp1 if queue == 1 else service.ramp2
        eps, vals = [], []
        for off, v in zip(ramp.epochs, ramp.rates):
            e = onset + off
            if e > after and e < horizon:
                eps.append(e)
                vals.append(v)
        return eps, vals

    b1 = _green_rate(1, onset1) if green1 else 0.0
    b2 = _green_rate(2, onset2) if green2 else 0.0
    if green1:
        st1e, st1v = _pending_steps(1, onset1, t0)
    if green2:
        st2e, st2v = _pending_steps(2, onset2, t0)
    ist1 = ist2 = 0

    # Exogenous arrival pointers; entries at exactly t0 are pending events.
    a1eps, a1rates = arrivals1.epochs, arrivals1.rates
    a2eps, a2rates = arrivals2_tilde.epochs, arrivals2_tilde.rates
    na1, na2 = len(a1eps), len(a2eps)
    ia1 = bisect_left(a1eps, t0)
    ia2 = bisect_left(a2eps, t0)
    a1 = a1rates[ia1 - 1] if ia1 > 0 else 0.0
    a2t = a2rates[ia2 - 1] if ia2 > 0 else 0.0

    busy1 = x1 > 0.0
    busy2 = x2 > 0.0

    events: list[Event] = []
    breakpoints: list[tuple[float, float, float]] = []
    append_event = events.append

    d1 = b1 if busy1 else a1
    al2 = phi * d1 + a2t

    # Opening marker: the state entering the window, both limits equal.
    append_event(Event(
        t0, CONTROL_CYCLE_BOUNDARY, 0, "", x1, x2,
        busy1, busy1, busy2, busy2, green1, green1, green2, green2,
        a1, a1, a2t, a2t, b1, b1, b2, b2, d1, d1, al2, al2,
    ))

    t = t0
    first_batch = True
    while True:
        d1 = b1 if busy1 else a1
        al2 = phi * d1 + a2t
        s1 = a1 - b1 if busy1 else 0.0
        s2 = al2 - b2 if busy2 else 0.0

        if first_batch:
            # Events scheduled exactly at t0 are applied before any motion.
            cand = t0
            pred1 = pred2 = INF
            first_batch = False
        else:
            cand = horizon
            if isw < nsw:
                e = sw[isw][0]
                if e < cand:
                    cand = e
            if ia1 < na1:
                e = a1eps[ia1]
                if e < cand:
                    cand = e
            if ia2 < na2:
                e = a2eps[ia2]
                if e < cand:
                    cand = e
            if ist1 < len(st1e):
                e = st1e[ist1]
                if e < cand:
                    cand = e
            if ist2 < len(st2e):
                e = st2e[ist2]
                if e < cand:
                    cand = e
            pred1 = t + x1 / (b1 - a1) if s1 < 0.0 else INF
            pred2 = t + x2 / (b2 - al2) if s2 < 0.0 else INF
            if pred1 < cand:
                cand = pred1
            if pred2 < cand:
                cand = pred2

            dt = cand - t
            if s1 != 0.0:
                x1 += s1 * dt
            if s2 != 0.0:
                x2 += s2 * dt
            t = cand

        empt1 = empt2 = False
        if busy1:
            if cand == pred1:
                x1 = 0.0
                empt1 = True
            elif s1 < 0.0 and x1 <= 0.0:
                x1 = 0.0  # drain completing within one rounding ulp of cand
                empt1 = True
        if busy2:
            if cand == pred2:
                x2 = 0.0
                empt2 = True
            elif s2 < 0.0 and x2 <= 0.0:
                x2 = 0.0
                empt2 = True

        at_end = cand == horizon

        # ---- batch at epoch t: fixed priority order ----
        trig1k = trig2k = -1
        trig1q = trig2q = 0

        def _check_triggers(kind: int, queue: int) -> None:
            nonlocal trig1k, trig1q, trig2k, trig2q
            if not busy1 and trig1k < 0 and a1 - b1 > 0.0:
                trig1k, trig1q = kind, queue
            if not busy2 and trig2k < 0 and phi * (b1 if busy1 else a1) + a2t - b2 > 0.0:
                trig2k, trig2q = kind, queue

        def _emit(kind, queue, proc, la1, la2t, lb1, lb2, lg1, lg2, lbz1, lbz2,
                  tk=-1, tq=0):
            ld1 = lb1 if lbz1 else la1
            nd1 = b1 if busy1 else a1
            append_event(Event(
                t, kind, queue, proc, x1, x2,
                lbz1, busy1, lbz2, busy2, lg1, green1, lg2, green2,
                la1, a1, la2t, a2t, lb1, b1, lb2, b2,
                ld1, nd1, phi * ld1 + la2t, phi * nd1 + a2t,
                tk, tq,
            ))

        if not at_end:
            # Light switches.
            while isw < nsw and sw[isw][0] == t:
                _, kind, queue = sw[isw]
                isw += 1
                la1, la2t, lb1, lb2 = a1, a2t, b1, b2
                lg1, lg2, lbz1, lbz2 = green1, green2, busy1, busy2
                if queue == 1:
                    if kind == GREEN_START:
                        green1, onset1 = True, t
                        b1 = (service.ramp1.rates[0] if is_ramp else bmax1)
                        st1e, st1v = _pending_steps(1, t, t)
                        ist1 = 0
                    else:
                        green1, b1 = False, 0.0
                        ist1 = len(st1e)
                else:
                    if kind == GREEN_START:
                        green2, onset2 = True, t
                        b2 = (service.ramp2.rates[0] if is_ramp else bmax2)
                        st2e, st2v = _pending_steps(2, t, t)
                        ist2 = 0
                    else:
                        green2, b2 = False, 0.0
                        ist2 = len(st2e)
                _check_triggers(kind, queue)
                _emit(kind, queue, "", la1, la2t, lb1, lb2, lg1, lg2, lbz1, lbz2)

            # Exogenous rate jumps (skipped when the value does not change).
            while ia1 < na1 and a1eps[ia1] == t:
                new = a1rates[ia1]
                ia1 += 1
                if new != a1:
                    la1, la2t, lb1, lb2 = a1, a2t, b1, b2
                    a1 = new
                    _check_triggers(EXO_RATE_JUMP, 1)
                    _emit(EXO_RATE_JUMP, 1, PROC_ALPHA1, la1, la2t, lb1, lb2,
                          green1, green2, busy1, busy2)
            while ia2 < na2 and a2eps[ia2] == t:
                new = a2rates[ia2]
                ia2 += 1
                if new != a2t:
                    la1, la2t, lb1, lb2 = a1, a2t, b1, b2
                    a2t = new
                    _check_triggers(EXO_RATE_JUMP, 2)
                    _emit(EXO_RATE_JUMP, 2, PROC_ALPHA2_TILDE, la1, la2t, lb1, lb2,
                          green1, green2, busy1, busy2)

            # Service staircase steps; only visible while the queue is busy.
            while ist1 < len(st1e) and st1e[ist1] == t:
                new = st1v[ist1]
                ist1 += 1
                if new != b1:
                    la1, la2t, lb1, lb2 = a1, a2t, b1, b2
                    b1 = new
                    if busy1:
                        _check_triggers(INTERNAL_RATE_JUMP, 1)
                        _emit(INTERNAL_RATE_JUMP, 1, "", la1, la2t, lb1, lb2,
                              green1, green2, busy1, busy2)
            while ist2 < len(st2e) and st2e[ist2] == t:
                new = st2v[ist2]
                ist2 += 1
                if new != b2:
                    la1, la2t, lb1, lb2 = a1, a2t, b1, b2
                    b2 = new
                    if busy2:
                        _emit(INTERNAL_RATE_JUMP, 2, "", la1, la2t, lb1, lb2,
                              green1, green2, busy1, busy2)

        # Emptyings determined by drainage up to t (also logged at the horizon).
        if empt1:
            lbz1 = busy1
            busy1 = False
            _emit(EMPTY_START, 1, "", a1, a2t, b1, b2, green1, green2, lbz1, busy2)
        if empt2:
            lbz2 = busy2
            busy2 = False
            _emit(EMPTY_START, 2, "", a1, a2t, b1, b2, green1, green2, busy1, lbz2)

        # Fillings, evaluated on the post-batch rates; queue 1 may cascade
        # into queue 2 through its outflow jump.
        if not at_end:
            if not busy1 and a1 - b1 > 0.0:
                lbz1 = busy1
                busy1 = True
                if not busy2 and trig2k < 0 and phi * b1 + a2t - b2 > 0.0:
                    trig2k, trig2q = BUSY_START, 1
                _emit(BUSY_START, 1, "", a1, a2t, b1, b2, green1, green2, lbz1, busy2,
                      trig1k, trig1q)
            if not busy2 and (phi * (b1 if busy1 else a1) + a2t) - b2 > 0.0:
                lbz2 = busy2
                busy2 = True
                _emit(BUSY_START, 2, "", a1, a2t, b1, b2, green1, green2, busy1, lbz2,
                      trig2k, trig2q)

        breakpoints.append((t, x1, x2))
        if at_end:
            d1 = b1 if busy1 else a1
            al2 = phi * d1 + a2t
            append_event(Event(
                t, CONTROL_CYCLE_BOUNDARY, 0, "", x1, x2,
                busy1, busy1, busy2, busy2, green1, green1, green2, green2,
                a1, a1, a2t, a2t, b1, b1, b2, b2, d1, d1, al2, al2,
            ))
            break

    return TandemTrajectory(t0, horizon, phi, breakpoints, events)


def queue_integral(traj: TandemTrajectory, t_a: float, t_b: float) -> tuple[float, float]:
    """Time-averaged queue contents over [t_a, t_b): exact trapezoid sums
    over the piecewise-linear path, divided by the window length."""
    if not (traj.t0 <= t_a < t_b <= traj.t1):
        raise ValueError(
            f"window [{t_a!r}, {t_b!r}) not inside the simulated span "
            f"[{traj.t0!r}, {traj.t1!r})")
    pts = traj.breakpoints
    epochs = [p[0] for p in pts]
    j = bisect_right(epochs, t_a) - 1
    acc1 = acc2 = 0.0
    xl1, xl2 = traj.state_at(t_a)
    tl = t_a
    while tl < t_b:
        j += 1
        if j >= len(pts) or pts[j][0] >= t_b:
            xr1, xr2 = traj.state_at(t_b)
            tr = t_b
        else:
            tr, xr1, xr2 = pts[j]
        dt = tr - tl
        acc1 += 0.5 * (xl1 + xr1) * dt
        acc2 += 0.5 * (xl2 + xr2) * dt
        tl, xl1, xl2 = tr, xr1, xr2
    w = t_b - t_a
    return (acc1 / w, acc2 / w)
