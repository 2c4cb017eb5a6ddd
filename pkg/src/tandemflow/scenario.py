"""Seeded arrival-process generation and experiment configuration.

Arrivals follow an off/on pattern: the rate alternates between zero and a
level held for the whole on stage, with both stage durations drawn uniform
and each on level drawn once from a band of width 2*zeta around the mean.

Randomness comes from numpy's Philox counter generator (Philox4x64-10),
which takes an explicit key: we key every stream with (seed, stream_index)
so any single process of any replication can be regenerated in isolation,
bit for bit, on any platform.  Stream index convention:

    stream = 2 * replication + process      (process 0: queue 1 arrivals,
                                             process 1: queue 2 side street)

Per stage the generator is consumed in a fixed order: one uniform for the
off duration (times off_max), one for the on duration (times on_max), one
for the on level (mean * (1 + zeta * (2u - 1))).  The level draw happens
even when zeta = 0, so sweeping zeta with a fixed seed perturbs only the
levels, never the timing; that is what makes common-random-number
comparisons across zeta (and across controller modes) meaningful.
Realizations are prefix-stable: a longer horizon extends, never reshuffles,
the segments of a shorter one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .regulator import (
    CENTRALIZED,
    DECENTRALIZED,
    CycleRecord,
    GuardConfig,
    make_traffic_plant,
    run_closed_loop,
)
from .simcore import PiecewiseConstantRate, ServiceProfile


class ConfigError(ValueError):
    """Bad key, bad value, or bad combination in an experiment config."""


@dataclass(frozen=True, slots=True)
class OnOffSpec:
    """Distribution of one off/on arrival process."""

    mean_rate: float
    zeta: float
    off_max: float
    on_max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean_rate) and self.mean_rate > 0.0):
            raise ValueError(f"mean_rate must be positive, got {self.mean_rate!r}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta!r}")
        for nm, v in (("off_max", self.off_max), ("on_max", self.on_max)):
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{nm} must be positive, got {v!r}")


def gen_onoff(spec: OnOffSpec, seed: int, horizon: float, stream: int = 0) -> PiecewiseConstantRate:
    """One seeded realization of an off/on process over [0, horizon).

    Pure function of (spec, seed, stream): the Philox key is [seed, stream]
    and draws follow the fixed per-stage order documented in the module
    docstring.  Zero-length stages (a uniform draw of exactly 0.0) are
    skipped without consuming extra draws.
    """
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))
    rnd = gen.random
    segs: list[tuple[float, float]] = []
    t = 0.0
    mean, zeta = spec.mean_rate, spec.zeta
    off_max, on_max = spec.off_max, spec.on_max
    while t < horizon:
        off = rnd() * off_max
        if off > 0.0:
            segs.append((t, 0.0))
            t += off
            if t >= horizon:
                break
        on = rnd() * on_max
        level = mean * (1.0 + zeta * (2.0 * rnd() - 1.0))
        if on > 0.0:
            segs.append((t, level))
            t += on
    return PiecewiseConstantRate(segs, horizon)


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """Full description of one experiment; field names double as the keys
    of the flat config-file format.

    The defaults reproduce the reference stochastic setup: unit light
    cycles, 20 of them per control cycle, 50 control cycles, bursty
    arrivals with mean 4.1 into queue 1 and a side street at one tenth of
    that, 90 percent of queue 1's outflow feeding queue 2, constant
    service at rate 5, targets (0.1, 0.1), and both red durations started
    at 0.8.

    The stage-duration bounds are calibrated so that the closed loop
    settles near red durations (0.31, 0.41): mean on fraction 0.357 puts
    the effective load at 1.46, the level that makes both time-averaged
    queue targets of 0.1 sit at those equilibria.
    """

    c1: float = 1.0
    c2: float = 1.0
    cycles_per_control: int = 20
    num_control_cycles: int = 50
    alpha1_mean: float = 4.1
    alpha1_zeta: float = 0.3
    alpha1_off_max: float = 0.063
    alpha1_on_max: float = 0.035
    alpha2_mean: float = 0.41
    alpha2_zeta: float = 0.3
    alpha2_off_max: float = 0.063
    alpha2_on_max: float = 0.035
    phi: float = 0.9
    beta_max1: float = 5.0
    beta_max2: float = 5.0
    service_mode: str = "constant"
    r1: float = 0.1
    r2: float = 0.1
    theta1_init: float = 0.8
    theta2_init: float = 0.8
    mode: str = CENTRALIZED
    eps_j: float = 1e-3
    step_cap: float = 0.25
    theta_min_frac: float = 0.02
    theta_max_frac: float = 0.98
    seed: int = 1
    replications: int = 10

    def __post_init__(self) -> None:
        if self.mode not in (CENTRALIZED, DECENTRALIZED):
            raise ConfigError(f"mode must be {CENTRALIZED!r} or {DECENTRALIZED!r}, got {self.mode!r}")
        if self.service_mode != "constant":
            raise ConfigError(
                "service_mode supports only 'constant' here; staircase service "
                "profiles carry per-step data and are built programmatically "
                "via ServiceProfile")
        for nm in ("cycles_per_control", "replications"):
            v = getattr(self, nm)
            if v < 1:
                raise ConfigError(f"{nm} must be >= 1, got {v!r}")
        # 0 control cycles is legal: it yields an empty run (header only).
        if self.num_control_cycles < 0:
            raise ConfigError(
                f"num_control_cycles must be >= 0, got {self.num_control_cycles!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed!r}")
        if not 0.0 <= self.phi <= 1.0:
            raise ConfigError(f"phi={self.phi!r} outside [0, 1]")
        for nm in ("c1", "c2", "beta_max1", "beta_max2"):
            v = getattr(self, nm)
            if not v > 0.0:
                raise ConfigError(f"{nm} must be > 0, got {v!r}")
        for nm in ("r1", "r2"):
            v = getattr(self, nm)
            if not v >= 0.0:
                raise ConfigError(f"{nm} must be >= 0, got {v!r}")
        for th, c, nm in ((self.theta1_init, self.c1, "theta1_init"),
                          (self.theta2_init, self.c2, "theta2_init")):
            if not 0.0 < th < c:
                raise ConfigError(f"{nm}={th!r} outside (0, {c!r})")
        # Spec objects validate their own numeric ranges eagerly.
        self.alpha1_spec()
        self.alpha2_spec()
        self.guards()

    def alpha1_spec(self) -> OnOffSpec:
        return OnOffSpec(self.alpha1_mean, self.alpha1_zeta,
                         self.alpha1_off_max, self.alpha1_on_max)

    def alpha2_spec(self) -> OnOffSpec:
        return OnOffSpec(self.alpha2_mean, self.alpha2_zeta,
                         self.alpha2_off_max, self.alpha2_on_max)

    def guards(self) -> GuardConfig:
        return GuardConfig.from_fractions(
            self.c1, self.c2, epsilon_j=self.eps_j, step_frac=self.step_cap,
            min_frac=self.theta_min_frac, max_frac=self.theta_max_frac)

    def service_profile(self) -> ServiceProfile:
        return ServiceProfile("constant", self.beta_max1, self.beta_max2)

    def horizon(self) -> float:
        return self.num_control_cycles * self.cycles_per_control * self.c1

    def arrival_pair(self, replication: int = 0) -> tuple[PiecewiseConstantRate, PiecewiseConstantRate]:
        """Both arrival realizations for one replication (streams 2r, 2r+1)."""
        h = self.horizon()
        return (
            gen_onoff(self.alpha1_spec(), self.seed, h, stream=2 * replication),
            gen_onoff(self.alpha2_spec(), self.seed, h, stream=2 * replication + 1),
        )


def default_paper_config() -> ExperimentConfig:
    """The reference stochastic setup; see ExperimentConfig's defaults."""
    return ExperimentConfig()


def run_replication(cfg: ExperimentConfig, replication: int = 0) -> list[CycleRecord]:
    """Run one seeded closed-loop replication of the configured experiment.

    Zero control cycles is a legal degenerate case: no arrivals are even
    generated and the record list is empty.
    """
    if cfg.num_control_cycles == 0:
        return []
    arrivals1, arrivals2_tilde = cfg.arrival_pair(replication)
    plant = make_traffic_plant(arrivals1, arrivals2_tilde, cfg.c1, cfg.c2,
                               cfg.service_profile(), cfg.phi,
                               cfg.cycles_per_control)
    return run_closed_loop(plant, (cfg.r1, cfg.r2),
                           (cfg.theta1_init, cfg.theta2_init),
                           cfg.num_control_cycles, cfg.mode, cfg.guards())


_INT_KEYS = {"cycles_per_control", "num_control_cycles", "seed", "replications"}
_STR_KEYS = {"service_mode", "mode"}
_ALL_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat `key = value` format; '#' starts a comment.

    Unknown and duplicate keys are rejected with their line number; keys
    left out keep their defaults.
    """
    kwargs: dict[str, object] = {}
    at_line: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in kwargs:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {at_line[key]})")
        at_line[key] = lineno
        if key in _STR_KEYS:
            kwargs[key] = val
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: key {key!r} needs an integer, got {val!r}") from None
        else:
            try:
                kwargs[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: key {key!r} needs a number, got {val!r}") from None
    try:
        return ExperimentConfig(**kwargs)  # type: ignore[arg-type]
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_text(cfg: ExperimentConfig) -> str:
    """Render a config as the flat file format, every key explicit."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {v}" if isinstance(v, str) else f"{f.name} = {v!r}")
    return "\n".join(lines) + "\n"
