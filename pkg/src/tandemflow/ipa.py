"""Sample-path derivatives of queue content with respect to red durations.

Between events the queue trajectories are linear in time and affine in the
red durations theta, so each derivative of interest is piecewise constant
and changes only at logged events.  The accumulators below hold one such
derivative (the instantaneous value) together with its running time
integral over the active window; dividing the integrals by the window
length gives the sensitivity of the window-averaged contents G.

Three derivatives matter.  d x_1/d theta_1 and d x_2/d theta_2 behave the
same way (a queue against its own light): while the queue stays busy, every
green onset raises the value by the service rate it postpones, and red
onsets leave it unchanged because the rate they remove reappears in the
next cycle's tally.  d x_2/d theta_1 is driven by queue 1's outflow jumps:
events whose epoch shifts with theta_1 (queue 1 green onsets, service
staircase steps, queue 1 emptyings) move a jump of queue 2's inflow, and
each such moving jump contributes its height times the epoch's shift rate.
d x_1/d theta_2 is structurally zero: queue 1 never sees queue 2.

All rules read one-sided limits off the event annotations; nothing here
re-simulates or replays trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .simcore import (
    BUSY_START,
    CONTROL_CYCLE_BOUNDARY,
    EMPTY_START,
    GREEN_START,
    INTERNAL_RATE_JUMP,
    RED_START,
    Event,
    TandemTrajectory,
)

NAN = math.nan


@dataclass(slots=True)
class DiagIpaAccumulator:
    """d x_i / d theta_i for queue i against its own light.

    The value decomposes as (cycle_sum + beta_now) - beta_at_start over the
    current busy period: beta_at_start is the service rate just after the
    period began, beta_now the current service rate, and cycle_sum collects
    the left-limit service rate at every red onset the period has survived.
    current_value is recomputed from these parts with a fixed operation
    order so a direct evaluation from the log can match it bit for bit.
    """

    queue: int
    current_value: float = 0.0
    running_integral: float = 0.0
    busy: bool = False
    cycle_sum: float = 0.0
    beta_now: float = 0.0
    beta_at_start: float = 0.0
    t_prev: float = NAN

    def advance_to(self, t: float) -> None:
        """Integrate the (constant) value forward to time t."""
        if math.isnan(self.t_prev):
            raise ValueError("accumulator not initialized; feed the opening window marker first")
        if t < self.t_prev:
            raise ValueError(f"time went backwards: {t!r} < {self.t_prev!r}")
        self.running_integral += self.current_value * (t - self.t_prev)
        self.t_prev = t


@dataclass(slots=True)
class CrossIpaAccumulator:
    """d x_2 / d theta_1: queue 2's sensitivity to queue 1's red duration.

    g1 and g2 are read-only gauges of the staircase-service contribution
    accrued since the last anchoring event (the green onset contained in
    queue 1's current busy period, or that period's start when it began
    mid-green).  They are identically zero under constant-rate service and
    are not inputs to the value recursion, which books each staircase step
    as it happens.

    flagged_busy_starts counts queue 2 busy starts attributed to a queue 1
    emptying.  No mechanism in the model produces that attribution, so the
    handling (epoch shift borrowed from the emptying's own shift rate) is
    defensive; a nonzero count deserves a look at the scenario.
    """

    current_value: float = 0.0
    running_integral: float = 0.0
    busy2: bool = False
    g1: float = 0.0
    g2: float = 0.0
    flagged_busy_starts: int = 0
    t_prev: float = NAN
    _release_rate: float = 0.0  # epoch shift of the latest queue 1 emptying
    _anchor_mode: int = 0  # 0 none, 1 green onset, 2 busy start mid-green
    _anchor_beta: float = 0.0
    _beta1: float = 0.0

    def advance_to(self, t: float) -> None:
        if math.isnan(self.t_prev):
            raise ValueError("accumulator not initialized; feed the opening window marker first")
        if t < self.t_prev:
            raise ValueError(f"time went backwards: {t!r} < {self.t_prev!r}")
        self.running_integral += self.current_value * (t - self.t_prev)
        self.t_prev = t

    def _refresh_gauges(self, phi: float) -> None:
        self.g1 = phi * (self._anchor_beta - self._beta1) if self._anchor_mode == 1 else 0.0
        self.g2 = phi * (self._anchor_beta - self._beta1) if self._anchor_mode == 2 else 0.0


@dataclass(frozen=True, slots=True)
class JacobianEstimate:
    """Window-averaged sensitivity matrix dG/dtheta.

    Lower triangular by construction: queue 1 is upstream, so j12 is an
    exact structural zero, not a computed small number.
    """

    j11: float
    j21: float
    j22: float
    window: float

    @property
    def j12(self) -> float:
        return 0.0

    def rows(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.j11, 0.0), (self.j21, self.j22))


def _marker_init_diag(acc: DiagIpaAccumulator, ev: Event) -> None:
    busy = ev.busy1_r if acc.queue == 1 else ev.busy2_r
    acc.busy = busy
    acc.cycle_sum = 0.0
    if busy:
        b = ev.b1_r if acc.queue == 1 else ev.b2_r
        acc.beta_now = b
        acc.beta_at_start = b
    else:
        acc.beta_now = 0.0
        acc.beta_at_start = 0.0
    acc.current_value = (acc.cycle_sum + acc.beta_now) - acc.beta_at_start
    acc.running_integral = 0.0
    acc.t_prev = ev.epoch


def diag_on_event(acc: DiagIpaAccumulator, ev: Event) -> DiagIpaAccumulator:
    """Advance the diagonal accumulator through one logged event.

    The first event fed in must be the opening window marker; it fixes the
    initial busy state and resets the integral.  The derivative of a queue
    busy at the window start is 0 there: the window inherits its starting
    content as a constant.
    """
    if math.isnan(acc.t_prev):
        if ev.kind != CONTROL_CYCLE_BOUNDARY:
            raise ValueError("event log must open with a window marker")
        _marker_init_diag(acc, ev)
        return acc
    acc.advance_to(ev.epoch)
    kind = ev.kind
    if kind == CONTROL_CYCLE_BOUNDARY or ev.queue != acc.queue:
        return acc
    if kind == BUSY_START:
        acc.busy = True
        acc.cycle_sum = 0.0
        b = ev.b1_r if acc.queue == 1 else ev.b2_r
        acc.beta_now = b
        acc.beta_at_start = b
        acc.current_value = (acc.cycle_sum + acc.beta_now) - acc.beta_at_start
    elif kind == EMPTY_START:
        acc.busy = False
        acc.current_value = 0.0
    elif acc.busy:
        if kind == RED_START:
            # The rate lost from beta_now reappears in the survived-cycle
            # tally, so the value itself does not move here.
            acc.cycle_sum += ev.b1_l if acc.queue == 1 else ev.b2_l
            acc.beta_now = ev.b1_r if acc.queue == 1 else ev.b2_r
            acc.current_value = (acc.cycle_sum + acc.beta_now) - acc.beta_at_start
        elif kind == GREEN_START or kind == INTERNAL_RATE_JUMP:
            acc.beta_now = ev.b1_r if acc.queue == 1 else ev.b2_r
            acc.current_value = (acc.cycle_sum + acc.beta_now) - acc.beta_at_start
    return acc


def cross_on_event(
    acc: CrossIpaAccumulator,
    ev: Event,
    diag1: DiagIpaAccumulator,
    phi: float,
) -> CrossIpaAccumulator:
    """Advance the cross accumulator through one logged event.

    diag1 must still hold its left-limit value at this epoch: feed each
    event here before feeding it to queue 1's diagonal accumulator.
    """
    if math.isnan(acc.t_prev):
        if ev.kind != CONTROL_CYCLE_BOUNDARY:
            raise ValueError("event log must open with a window marker")
        acc.busy2 = ev.busy2_r
        acc.current_value = 0.0
        acc.running_integral = 0.0
        acc._release_rate = 0.0
        acc._anchor_mode = 0
        acc._anchor_beta = 0.0
        acc._beta1 = ev.b1_r
        acc._refresh_gauges(phi)
        acc.t_prev = ev.epoch
        return acc
    acc.advance_to(ev.epoch)
    kind = ev.kind
    if kind == CONTROL_CYCLE_BOUNDARY:
        return acc
    queue = ev.queue

    if kind == EMPTY_START:
        if queue == 2:
            acc.current_value = 0.0
            acc.busy2 = False
        else:
            # Queue 1 drains out: the perturbation stored in its content is
            # released into queue 2's inflow at a shifting epoch.
            drain = ev.b1_l - ev.a1_l
            acc._release_rate = diag1.current_value / drain if drain > 0.0 else 0.0
            if acc.busy2:
                acc.current_value += phi * diag1.current_value
            acc._anchor_mode = 0
            acc._refresh_gauges(phi)
        return acc

    if kind == BUSY_START:
        if queue == 2:
            acc.busy2 = True
            tk, tq = ev.trigger_kind, ev.trigger_queue
            if tq == 1 and (tk == GREEN_START or tk == INTERNAL_RATE_JUMP):
                shift = 1.0  # onset rides queue 1's red duration one for one
            elif tq == 1 and tk == EMPTY_START:
                shift = acc._release_rate
                acc.flagged_busy_starts += 1
            else:
                shift = 0.0
            if shift != 0.0:
                acc.current_value = -(ev.alpha2_r - ev.b2_r) * shift
            else:
                acc.current_value = 0.0
        else:
            # Queue 1 filling never shifts with theta_1; no value change.
            acc._beta1 = ev.b1_r
            if ev.green1_r:
                acc._anchor_mode = 2
                acc._anchor_beta = ev.b1_r
            else:
                acc._anchor_mode = 0
            acc._refresh_gauges(phi)
        return acc

    if queue == 1:
        if kind == GREEN_START:
            if acc.busy2:
                acc.current_value += ev.alpha2_l - ev.alpha2_r
            acc._beta1 = ev.b1_r
            if ev.busy1_l:
                acc._anchor_mode = 1
                acc._anchor_beta = ev.b1_r
            else:
                acc._anchor_mode = 0
            acc._refresh_gauges(phi)
        elif kind == INTERNAL_RATE_JUMP:
            if acc.busy2:
                acc.current_value += ev.alpha2_l - ev.alpha2_r
            acc._beta1 = ev.b1_r
            acc._refresh_gauges(phi)
        elif kind == RED_START:
            # Fixed-epoch inflow drop: no sensitivity carried.
            acc._beta1 = ev.b1_r
            acc._anchor_mode = 0
            acc._refresh_gauges(phi)
    return acc


def assemble_jacobian(
    diag1: DiagIpaAccumulator,
    diag2: DiagIpaAccumulator,
    cross: CrossIpaAccumulator,
    window: float,
) -> JacobianEstimate:
    """Divide the three running integrals by the shared window length."""
    if not window > 0.0:
        raise ValueError(f"window length must be positive, got {window!r}")
    return JacobianEstimate(
        j11=diag1.running_integral / window,
        j21=cross.running_integral / window,
        j22=diag2.running_integral / window,
        window=window,
    )


def diag_closed_form(t: float, events: list[Event], queue: int = 1) -> float:
    """d x_q / d theta_q at time t evaluated directly from the log.

    Re-derives the busy span containing t and tallies the red onsets it
    survived, using the same arithmetic and operation order as the running
    accumulator, so the two agree exactly rather than approximately.
    Events at epoch t are included (right-limit convention).
    """
    if not events:
        raise ValueError("empty event log")
    if not (events[0].epoch <= t <= events[-1].epoch):
        raise ValueError(
            f"t={t!r} outside the logged span [{events[0].epoch!r}, {events[-1].epoch!r}]")
    busy = False
    cycle_sum = 0.0
    beta_at_start = 0.0
    beta_t = 0.0
    for i, ev in enumerate(events):
        if ev.epoch > t:
            break
        b_r = ev.b1_r if queue == 1 else ev.b2_r
        beta_t = b_r
        kind = ev.kind
        if i == 0:
            busy = ev.busy1_r if queue == 1 else ev.busy2_r
            if busy:
                cycle_sum = 0.0
                beta_at_start = b_r
            continue
        if ev.queue != queue:
            continue
        if kind == BUSY_START:
            busy = True
            cycle_sum = 0.0
            beta_at_start = b_r
        elif kind == EMPTY_START:
            busy = False
        elif kind == RED_START and busy:
            cycle_sum += ev.b1_l if queue == 1 else ev.b2_l
    if not busy:
        return 0.0
    return (cycle_sum + beta_t) - beta_at_start


def run_window(
    traj: TandemTrajectory,
) -> tuple[JacobianEstimate, DiagIpaAccumulator, DiagIpaAccumulator, CrossIpaAccumulator]:
    """Drive fresh accumulators over a simulated window's event log."""
    d1 = DiagIpaAccumulator(queue=1)
    d2 = DiagIpaAccumulator(queue=2)
    cx = CrossIpaAccumulator()
    phi = traj.phi
    for ev in traj.events:
        cross_on_event(cx, ev, d1, phi)
        diag_on_event(d1, ev)
        diag_on_event(d2, ev)
    jac = assemble_jacobian(d1, d2, cx, traj.t1 - traj.t0)
    return jac, d1, d2, cx
