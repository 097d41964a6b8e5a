"""Double oracle loop: grow both policy sets with trained best responses
until neither player's new policy beats the current equilibrium.

Each iteration solves the restricted game, trains a defender best response
against the adversary's equilibrium mixture, re-solves, then trains an
adversary best response against the updated defender mixture.  New policies
join their set unconditionally; convergence is declared when both trained
responses in the same iteration fail to improve on the equilibrium value by
more than eps_do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from mtdgame.env import ADVERSARY, DEFENDER, ConfigError, EnvConfig
from mtdgame.nash import EmpiricalGame, EquilibriumResult, build_game, extend_game, solve_msne
from mtdgame.policies import MixedStrategy, PurePolicy
from mtdgame.qlearn import TrainConfig, train_best_response
from mtdgame.seeds import derive_seed


@dataclass(frozen=True)
class DoConfig:
    eps_do: float = 1.0          # payoff-units slack for "no improvement"
    max_iterations: int = 10     # oracle-call pairs; 0 solves the initial game only
    eval_episodes: int = 50      # Monte-Carlo episodes per payoff cell
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def validate(self) -> "DoConfig":
        if not math.isfinite(self.eps_do) or self.eps_do < 0.0:
            raise ConfigError(f"eps_do must be finite and >= 0, got {self.eps_do!r}")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")
        self.train.validate()
        return self


@dataclass(frozen=True)
class DoRecord:
    """History row written after the initial solve and after every oracle call."""

    call: int
    value_adv: float
    value_def: float
    trained: str           # "", "adversary" or "defender"
    br_payoff: float       # nan on the initial row
    converged_adv: bool
    converged_def: bool


@dataclass
class DoState:
    adv_policies: list[PurePolicy]
    def_policies: list[PurePolicy]
    game: EmpiricalGame
    history: list[DoRecord]
    oracle_calls: int
    converged: bool


def converged(br_payoff: float, eq_value: float, eps_do: float) -> bool:
    """True when the trained response fails to improve by more than eps_do."""
    return br_payoff <= eq_value + eps_do


def dqn_oracle(env_cfg: EnvConfig, tc: TrainConfig):
    """Default best-response oracle backed by Q-learning."""

    def oracle(player: str, opponents: list[PurePolicy], mix: MixedStrategy,
               seed: int, label: str) -> PurePolicy:
        policy, _ = train_best_response(
            player, opponents, mix, env_cfg, replace(tc, seed=seed), label=label)
        return policy

    return oracle


def run_double_oracle(env_cfg: EnvConfig, initial_adv: list[PurePolicy],
                      initial_def: list[PurePolicy], do_cfg: DoConfig,
                      oracle=None, jobs: int = 1,
                      ) -> tuple[DoState, EquilibriumResult]:
    """Run the loop and return the final state and equilibrium."""
    do_cfg = do_cfg.validate()
    env_cfg = env_cfg.validate()
    if oracle is None:
        oracle = dqn_oracle(env_cfg, do_cfg.train)
    adv = list(initial_adv)
    deff = list(initial_def)
    game = build_game(adv, deff, env_cfg, do_cfg.eval_episodes,
                      derive_seed(do_cfg.seed, "game"), jobs=jobs)
    eq = solve_msne(game)
    history = [DoRecord(0, eq.value_adv, eq.value_def, "", float("nan"), False, False)]
    calls = 0
    done = False
    for it in range(1, do_cfg.max_iterations + 1):
        # defender responds to the adversary's current mixture
        pol_d = oracle(DEFENDER, adv, MixedStrategy(eq.sigma_adv),
                       derive_seed(do_cfg.seed, "oracle", it, DEFENDER),
                       f"def_br_{it:02d}")
        game = extend_game(game, pol_d, env_cfg, derive_seed(do_cfg.seed, "game"),
                           jobs=jobs)
        deff.append(pol_d)
        calls += 1
        br_d = float(eq.sigma_adv @ game.u_def[:, -1])
        conv_d = converged(br_d, eq.value_def, do_cfg.eps_do)
        eq = solve_msne(game)
        prev_conv_a = history[-1].converged_adv
        history.append(DoRecord(calls, eq.value_adv, eq.value_def, DEFENDER,
                                br_d, prev_conv_a, conv_d))

        # adversary responds to the updated defender mixture
        pol_a = oracle(ADVERSARY, deff, MixedStrategy(eq.sigma_def),
                       derive_seed(do_cfg.seed, "oracle", it, ADVERSARY),
                       f"adv_br_{it:02d}")
        game = extend_game(game, pol_a, env_cfg, derive_seed(do_cfg.seed, "game"),
                           jobs=jobs)
        adv.append(pol_a)
        calls += 1
        br_a = float(game.u_adv[-1] @ eq.sigma_def)
        conv_a = converged(br_a, eq.value_adv, do_cfg.eps_do)
        eq = solve_msne(game)
        history.append(DoRecord(calls, eq.value_adv, eq.value_def, ADVERSARY,
                                br_a, conv_a, conv_d))
        if conv_a and conv_d:
            done = True
            break
    state = DoState(adv, deff, game, history, calls, done)
    return state, eq
