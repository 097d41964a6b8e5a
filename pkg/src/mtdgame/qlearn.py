"""Deep Q-learning best-response trainer, written directly on numpy.

The network is a two-hidden-layer tanh MLP mapping a normalized observation
vector to one action value per server plus one for no-op.  Training follows
standard one-step Q-learning with a uniform replay buffer, epsilon-greedy
exploration decayed linearly over the first fraction of all steps, and one
gradient step per environment step once the buffer can fill a batch.
Episode ends are time-limit truncations, not terminal states, so targets
keep their bootstrap term there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mtdgame.env import ADVERSARY, DEFENDER, ConfigError, EnvConfig, MtdEnv, Observation
from mtdgame.policies import MixedStrategy, PurePolicy
from mtdgame.seeds import derive_seed, spawn_rng

# Input scaling constants: probe counts saturate at 30, elapsed-time fields
# at 100.  Beyond those the exact value carries no tactical information.
_PROGRESS_SCALE = 30.0
_ELAPSED_SCALE = 100.0


class NumericalError(RuntimeError):
    """Training or solving produced non-finite numbers."""


@dataclass(frozen=True)
class TrainConfig:
    """Best-response training hyperparameters."""

    gamma: float = 0.99
    epsilon_fraction: float = 0.2   # fraction of total steps spent decaying
    epsilon_final: float = 0.02
    learning_rate: float = 0.0005
    batch_size: int = 32
    episodes: int = 500
    horizon: int = 1000
    replay_capacity: int = 5000
    optimizer: str = "adam"         # "adam" or "sgd"
    target_update: int = 0          # copy period for a frozen target net, 0 = off
    seed: int = 0

    @property
    def total_steps(self) -> int:
        return self.episodes * self.horizon

    def validate(self) -> "TrainConfig":
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma!r}")
        if not 0.0 < self.epsilon_fraction <= 1.0:
            raise ConfigError(f"epsilon_fraction must lie in (0, 1], got {self.epsilon_fraction!r}")
        if not 0.0 <= self.epsilon_final <= 1.0:
            raise ConfigError(f"epsilon_final must lie in [0, 1], got {self.epsilon_final!r}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size!r}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes!r}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon!r}")
        if self.replay_capacity < self.batch_size:
            raise ConfigError("replay_capacity must be at least batch_size")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.target_update < 0:
            raise ConfigError("target_update must be >= 0")
        return self


def network_input(obs: Observation, cfg: EnvConfig) -> np.ndarray:
    """Normalize an observation into the network's input vector.

    Pure function of the observation and config: statuses and control flags
    stay 0/1, time_to_up is divided by the downtime, probe counts by 30 and
    elapsed times by 100, both clamped to 1.
    """
    x = obs.data.astype(np.float64)
    x[:, 1] /= cfg.downtime
    np.minimum(x[:, 2] / _PROGRESS_SCALE, 1.0, out=x[:, 2])
    if obs.player == ADVERSARY:
        np.minimum(x[:, 4] / _ELAPSED_SCALE, 1.0, out=x[:, 4])
    else:
        np.minimum(x[:, 3] / _ELAPSED_SCALE, 1.0, out=x[:, 3])
        np.minimum(x[:, 4] / _ELAPSED_SCALE, 1.0, out=x[:, 4])
    return x.reshape(-1)


class QNetwork:
    """Tanh MLP with a linear head, Glorot-uniform initial weights."""

    def __init__(self, input_dim: int, output_dim: int,
                 rng: np.random.Generator, hidden: tuple[int, ...] = (32, 32)):
        self.input_dim = input_dim
        self.output_dim = output_dim
        dims = [input_dim, *hidden, output_dim]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Action values; accepts a single vector or a batch of rows."""
        h = np.atleast_2d(x)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k != last:
                np.tanh(h, out=h)
        return h[0] if x.ndim == 1 else h

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "QNetwork":
        dup = object.__new__(QNetwork)
        dup.input_dim = self.input_dim
        dup.output_dim = self.output_dim
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup


def loss_and_gradients(net: QNetwork, x: np.ndarray, actions: np.ndarray,
                       targets: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared error on the taken actions' values, with its gradients.

    Only the chosen action's output contributes per sample; the returned
    list matches net.parameters() order.
    """
    batch = x.shape[0]
    # forward, keeping activations
    z1 = x @ net.weights[0].T + net.biases[0]
    h1 = np.tanh(z1)
    z2 = h1 @ net.weights[1].T + net.biases[1]
    h2 = np.tanh(z2)
    q = h2 @ net.weights[2].T + net.biases[2]
    rows = np.arange(batch)
    diff = q[rows, actions] - targets
    loss = float(diff @ diff) / batch
    # backward
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * diff / batch
    dw3 = dq.T @ h2
    db3 = dq.sum(axis=0)
    dh2 = dq @ net.weights[2]
    dz2 = dh2 * (1.0 - h2 * h2)
    dw2 = dz2.T @ h1
    db2 = dz2.sum(axis=0)
    dh1 = dz2 @ net.weights[1]
    dz1 = dh1 * (1.0 - h1 * h1)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return loss, [dw1, db1, dw2, db2, dw3, db3]


class AdamOptimizer:
    def __init__(self, params: list[np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def apply(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class SgdOptimizer:
    def __init__(self, params: list[np.ndarray], learning_rate: float):
        self.lr = learning_rate

    def apply(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


def make_optimizer(tc: TrainConfig, params: list[np.ndarray]):
    if tc.optimizer == "sgd":
        return SgdOptimizer(params, tc.learning_rate)
    return AdamOptimizer(params, tc.learning_rate)


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.empty((capacity, obs_dim))
        self.next_obs = np.empty((capacity, obs_dim))
        self.actions = np.empty(capacity, dtype=np.int64)
        self.rewards = np.empty(capacity)
        self.truncated = np.empty(capacity, dtype=bool)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def push(self, obs, action, next_obs, reward, truncated) -> None:
        i = self._pos
        self.obs[i] = obs
        self.actions[i] = action
        self.next_obs[i] = next_obs
        self.rewards[i] = reward
        self.truncated[i] = truncated
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=batch)
        return (self.obs[idx], self.actions[idx], self.next_obs[idx],
                self.rewards[idx], self.truncated[idx])


def epsilon_value(tc: TrainConfig, step: int) -> float:
    """Linear decay from 1 to epsilon_final over the first fraction of steps."""
    decay_steps = tc.epsilon_fraction * tc.total_steps
    if step >= decay_steps:
        return tc.epsilon_final
    return 1.0 + (tc.epsilon_final - 1.0) * (step / decay_steps)


def td_targets(net: QNetwork, next_obs: np.ndarray, rewards: np.ndarray,
               gamma: float, truncated: np.ndarray | None = None) -> np.ndarray:
    """One-step targets r + gamma * max_a' Q(s', a').

    Time-limit truncation does not zero the bootstrap: the game would have
    continued, the episode merely stopped being recorded.
    """
    q_next = net.forward(np.atleast_2d(next_obs))
    return rewards + gamma * q_next.max(axis=1)


def train_step(net: QNetwork, optimizer, batch, gamma: float,
               target_net: QNetwork | None = None) -> float:
    """One gradient update; returns the pre-update loss."""
    obs, actions, next_obs, rewards, truncated = batch
    bootstrap_net = target_net if target_net is not None else net
    y = td_targets(bootstrap_net, next_obs, rewards, gamma, truncated)
    loss, grads = loss_and_gradients(net, obs, actions, y)
    optimizer.apply(net.parameters(), grads)
    return loss


class QNetworkPolicy(PurePolicy):
    """Greedy policy of a trained network.  Ties go to the lowest index;
    the last action index means no-op."""

    def __init__(self, player: str, net: QNetwork, cfg: EnvConfig, label: str):
        self.player = player
        self.net = net
        self.cfg = cfg
        self.label = label

    def act(self, obs, tau, rng):
        q = self.net.forward(network_input(obs, self.cfg))
        a = int(np.argmax(q))
        return None if a == self.cfg.num_servers else a


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    end_step: int
    return_discounted: float
    return_raw: float


def _check_finite(net: QNetwork, episode: int) -> None:
    for p in net.parameters():
        if not np.isfinite(p).all():
            raise NumericalError(f"non-finite network parameters after episode {episode}")


def train_best_response(player: str, opponents: list[PurePolicy],
                        opponent_mix: MixedStrategy, env_cfg: EnvConfig,
                        tc: TrainConfig, label: str = "qnet",
                        ) -> tuple[QNetworkPolicy, list[EpisodeRecord]]:
    """Train a Q-network for one player against a frozen opponent mixture.

    The opponent's pure policy is drawn once per episode.  Returns the
    greedy policy over the final network and the per-episode learning curve.
    """
    if player not in (ADVERSARY, DEFENDER):
        raise ValueError(f"unknown player {player!r}")
    if len(opponents) != opponent_mix.weights.size:
        raise ValueError("mixture length does not match the opponent set")
    opp_side = DEFENDER if player == ADVERSARY else ADVERSARY
    for p in opponents:
        if p.player != opp_side:
            raise ValueError(f"opponent {p.label} plays {p.player}, expected {opp_side}")
    tc = tc.validate()
    env_cfg = env_cfg.validate()
    if tc.horizon > env_cfg.horizon:
        raise ConfigError(
            f"training horizon {tc.horizon} exceeds the environment's {env_cfg.horizon}")
    m = env_cfg.num_servers
    obs_dim = 5 * m
    n_actions = m + 1

    net = QNetwork(obs_dim, n_actions, spawn_rng(tc.seed, "init"))
    target = net.copy() if tc.target_update else None
    optimizer = make_optimizer(tc, net.parameters())
    buf = ReplayBuffer(tc.replay_capacity, obs_dim)
    explore_rng = spawn_rng(tc.seed, "explore")
    replay_rng = spawn_rng(tc.seed, "replay")
    mix_rng = spawn_rng(tc.seed, "mixture")

    env = MtdEnv(env_cfg)
    curve: list[EpisodeRecord] = []
    gstep = 0
    for ep in range(tc.episodes):
        obs_a, obs_d = env.reset(derive_seed(tc.seed, "episode", ep))
        opponent = opponents[opponent_mix.sample(mix_rng)]
        opp_rng = spawn_rng(tc.seed, "opp", ep)
        my_obs, opp_obs = (obs_a, obs_d) if player == ADVERSARY else (obs_d, obs_a)
        x = network_input(my_obs, env_cfg)
        disc = 0.0
        raw = 0.0
        g = 1.0
        for t in range(tc.horizon):
            if explore_rng.random() < epsilon_value(tc, gstep):
                a_idx = int(explore_rng.integers(n_actions))
            else:
                a_idx = int(np.argmax(net.forward(x)))
            my_action = None if a_idx == m else a_idx
            opp_action = opponent.act(opp_obs, t, opp_rng)
            if player == ADVERSARY:
                out = env.step(my_action, opp_action)
                r, my_next, opp_next = out.reward_adv, out.obs_adv, out.obs_def
            else:
                out = env.step(opp_action, my_action)
                r, my_next, opp_next = out.reward_def, out.obs_def, out.obs_adv
            x_next = network_input(my_next, env_cfg)
            buf.push(x, a_idx, x_next, r, out.done)
            if len(buf) >= tc.batch_size:
                loss = train_step(net, optimizer, buf.sample(tc.batch_size, replay_rng),
                                  tc.gamma, target)
                if not math.isfinite(loss):
                    raise NumericalError(f"non-finite loss at step {gstep}")
                if target is not None and tc.target_update and gstep % tc.target_update == 0:
                    target = net.copy()
            disc += g * r
            raw += r
            g *= tc.gamma
            gstep += 1
            x = x_next
            opp_obs = opp_next
        _check_finite(net, ep)
        curve.append(EpisodeRecord(ep, gstep, disc, raw))
    return QNetworkPolicy(player, net, env_cfg, label), curve
