"""Fixed heuristic strategies, strategy mixtures, and policy pair evaluation.

Heuristics act on their own observation only.  Periodic ones fire when
tau % period == 0.  Defender heuristics that pick "the most probed server"
never reimage when no probes have been observed at all; reimaging untouched
servers would only take them down for nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mtdgame.env import ADVERSARY, DEFENDER, EnvConfig, MtdEnv, Observation
from mtdgame.seeds import derive_seed, spawn_rng


class PurePolicy:
    """A deterministic-or-randomized rule mapping observations to actions."""

    player: str
    label: str

    def act(self, obs: Observation, tau: int, rng: np.random.Generator) -> int | None:
        raise NotImplementedError


class NoOpPolicy(PurePolicy):
    def __init__(self, player: str, label: str = "noop"):
        self.player = player
        self.label = label

    def act(self, obs, tau, rng):
        return None


def _pick(candidates: np.ndarray, rng: np.random.Generator) -> int:
    if candidates.size == 1:
        return int(candidates[0])
    return int(candidates[rng.integers(candidates.size)])


def _believed_takeable(obs: Observation) -> np.ndarray:
    # servers the adversary thinks are up and does not control
    return np.flatnonzero((obs.data[:, 0] == 1) & (obs.data[:, 3] == 0))


class UniformAdversary(PurePolicy):
    """Every `period` steps, probe a random server believed up and uncontrolled."""

    def __init__(self, period: int = 1, label: str = "uniform"):
        self.player = ADVERSARY
        self.period = int(period)
        self.label = label

    def act(self, obs, tau, rng):
        if tau % self.period:
            return None
        cand = _believed_takeable(obs)
        if cand.size == 0:
            return None
        return _pick(cand, rng)


class MaxProbeAdversary(PurePolicy):
    """Every `period` steps, probe the most-probed server it does not control."""

    def __init__(self, period: int = 1, label: str = "maxprobe"):
        self.player = ADVERSARY
        self.period = int(period)
        self.label = label

    def act(self, obs, tau, rng):
        if tau % self.period:
            return None
        cand = _believed_takeable(obs)
        if cand.size == 0:
            return None
        prog = obs.data[cand, 2]
        return _pick(cand[prog == prog.max()], rng)


class ControlThresholdAdversary(PurePolicy):
    """Probe (most-probed targeting) only while controlling less than a
    threshold fraction of the servers."""

    def __init__(self, threshold: float = 0.5, label: str = "control_threshold"):
        self.player = ADVERSARY
        self.threshold = float(threshold)
        self.label = label

    def act(self, obs, tau, rng):
        m = obs.data.shape[0]
        if obs.data[:, 3].sum() / m >= self.threshold:
            return None
        cand = _believed_takeable(obs)
        if cand.size == 0:
            return None
        prog = obs.data[cand, 2]
        return _pick(cand[prog == prog.max()], rng)


class UniformDefender(PurePolicy):
    """Every `period` steps, reimage a random up server."""

    def __init__(self, period: int = 4, label: str = "uniform"):
        self.player = DEFENDER
        self.period = int(period)
        self.label = label

    def act(self, obs, tau, rng):
        if tau % self.period:
            return None
        cand = np.flatnonzero(obs.data[:, 0] == 1)
        if cand.size == 0:
            return None
        return _pick(cand, rng)


class MaxProbeDefender(PurePolicy):
    """Every `period` steps, reimage the up server with the most observed
    probes, provided anything was probed at all."""

    def __init__(self, period: int = 4, label: str = "maxprobe"):
        self.player = DEFENDER
        self.period = int(period)
        self.label = label

    def act(self, obs, tau, rng):
        if tau % self.period:
            return None
        cand = np.flatnonzero(obs.data[:, 0] == 1)
        if cand.size == 0:
            return None
        seen = obs.data[cand, 2]
        top = seen.max()
        if top == 0:
            return None
        return _pick(cand[seen == top], rng)


class ProbeCountPeriodDefender(PurePolicy):
    """Reimage servers that went quiet after being probed, or were probed
    past a count limit.

    A server qualifies when it is up, has at least one observed probe, and
    either no probe has been observed for `period` steps or its observed
    count exceeds `probe_limit`.  One qualifying server is reimaged per
    step, chosen uniformly.
    """

    def __init__(self, period: int = 4, probe_limit: int = 7, label: str = "pcp"):
        self.player = DEFENDER
        self.period = int(period)
        self.probe_limit = int(probe_limit)
        self.label = label

    def act(self, obs, tau, rng):
        d = obs.data
        quiet = (d[:, 0] == 1) & (d[:, 2] >= 1) & (
            (d[:, 3] >= self.period) | (d[:, 2] > self.probe_limit)
        )
        cand = np.flatnonzero(quiet)
        if cand.size == 0:
            return None
        return _pick(cand, rng)


def expected_defender_control(obs: Observation, gain: float,
                              literal_exponent: bool = False) -> float:
    """Defender's estimate of how many up servers it still controls.

    Treats every observed probe on a server except the last as failed, so a
    server with k observed probes is compromised with probability
    1 - exp(-gain * k), or zero when never probed.  With literal_exponent
    the last probe is counted as the (k+1)-th instead.  Down servers are
    excluded, they count for nobody.
    """
    d = obs.data
    total = 0.0
    for i in range(d.shape[0]):
        if d[i, 0] != 1:
            continue
        k = int(d[i, 2])
        if k == 0:
            p = 0.0
        else:
            exponent = k + 1 if literal_exponent else k
            p = 1.0 - math.exp(-gain * exponent)
        total += 1.0 - p
    return total


class ControlThresholdDefender(PurePolicy):
    """Reimage the most-suspect server when expected control drops below a
    threshold fraction, at most once per `period` steps."""

    def __init__(self, threshold: float = 0.8, period: int = 4,
                 gain: float = 0.05, literal_exponent: bool = False,
                 label: str = "control_threshold"):
        self.player = DEFENDER
        self.threshold = float(threshold)
        self.period = int(period)
        self.gain = float(gain)
        self.literal_exponent = bool(literal_exponent)
        self.label = label

    def act(self, obs, tau, rng):
        d = obs.data
        # time since this defender's most recent reimage anywhere
        if d[:, 4].min() < self.period:
            return None
        m = d.shape[0]
        expected = expected_defender_control(obs, self.gain, self.literal_exponent)
        if expected > m * self.threshold:
            return None
        cand = np.flatnonzero(d[:, 0] == 1)
        if cand.size == 0:
            return None
        seen = d[cand, 2]
        return _pick(cand[seen == seen.max()], rng)


def default_adversaries(cfg: EnvConfig, probe_period: int = 1,
                        threshold: float = 0.5) -> list[PurePolicy]:
    """The standard adversary heuristic set."""
    return [
        NoOpPolicy(ADVERSARY),
        UniformAdversary(period=probe_period),
        MaxProbeAdversary(period=probe_period),
        ControlThresholdAdversary(threshold=threshold),
    ]


def default_defenders(cfg: EnvConfig, reimage_period: int = 4,
                      threshold: float = 0.8, probe_limit: int = 7) -> list[PurePolicy]:
    """The standard defender heuristic set."""
    return [
        NoOpPolicy(DEFENDER),
        UniformDefender(period=reimage_period),
        MaxProbeDefender(period=reimage_period),
        ProbeCountPeriodDefender(period=reimage_period, probe_limit=probe_limit),
        ControlThresholdDefender(threshold=threshold, period=reimage_period,
                                 gain=cfg.probe_gain),
    ]


@dataclass(frozen=True)
class MixedStrategy:
    """Probability weights aligned with an ordered pure policy list."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if (w < -1e-12).any() or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise ValueError(f"weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))

    def sample(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(np.cumsum(self.weights), rng.random(), side="right"))


@dataclass(frozen=True)
class PairPayoff:
    """Monte-Carlo estimate of one policy pair's discounted returns."""

    u_adv: float
    u_def: float
    se_adv: float
    se_def: float
    episodes: int


def run_episode(adv: PurePolicy, deff: PurePolicy, cfg: EnvConfig,
                seed: int, env: MtdEnv | None = None) -> tuple[float, float]:
    """One full episode; returns both players' discounted returns."""
    if env is None:
        env = MtdEnv(cfg)
    obs_a, obs_d = env.reset(derive_seed(seed, "env"))
    rng_a = spawn_rng(seed, "adv")
    rng_d = spawn_rng(seed, "def")
    g = 1.0
    ret_a = 0.0
    ret_d = 0.0
    for t in range(cfg.horizon):
        a = adv.act(obs_a, t, rng_a)
        d = deff.act(obs_d, t, rng_d)
        out = env.step(a, d)
        ret_a += g * out.reward_adv
        ret_d += g * out.reward_def
        g *= cfg.discount
        obs_a = out.obs_adv
        obs_d = out.obs_def
    return ret_a, ret_d


def evaluate_pair(adv: PurePolicy, deff: PurePolicy, cfg: EnvConfig,
                  episodes: int, seed: int) -> PairPayoff:
    """Average discounted return of a policy pair over seeded episodes."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if adv.player != ADVERSARY or deff.player != DEFENDER:
        raise ValueError("evaluate_pair needs (adversary, defender) in that order")
    env = MtdEnv(cfg)
    ra = np.empty(episodes)
    rd = np.empty(episodes)
    for e in range(episodes):
        ra[e], rd[e] = run_episode(adv, deff, cfg, derive_seed(seed, "episode", e), env)
    if episodes == 1:
        se_a = se_d = 0.0
    else:
        se_a = float(ra.std(ddof=1) / math.sqrt(episodes))
        se_d = float(rd.std(ddof=1) / math.sqrt(episodes))
    return PairPayoff(float(ra.mean()), float(rd.mean()), se_a, se_d, episodes)
