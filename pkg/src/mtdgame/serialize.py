"""File formats for policies, mixtures, games, and run artifacts.

Heuristic policies are one self-describing line.  Trained networks use a
small text format with full-precision floats, so a reloaded policy picks
exactly the same greedy actions.  All CSV output uses repr floats and a
fixed newline to make reruns byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from mtdgame.double_oracle import DoRecord
from mtdgame.env import ADVERSARY, DEFENDER, EnvConfig
from mtdgame.nash import EmpiricalGame, EquilibriumResult
from mtdgame.policies import (
    ControlThresholdAdversary,
    ControlThresholdDefender,
    MaxProbeAdversary,
    MaxProbeDefender,
    MixedStrategy,
    NoOpPolicy,
    ProbeCountPeriodDefender,
    PurePolicy,
    UniformAdversary,
    UniformDefender,
)
from mtdgame.qlearn import EpisodeRecord, QNetwork, QNetworkPolicy

MAGIC = "MTDPOLICY"
FORMAT_VERSION = 1


class PolicyFormatError(ValueError):
    pass


def _heuristic_line(policy: PurePolicy) -> str:
    if isinstance(policy, NoOpPolicy):
        name, params = "noop", {}
    elif isinstance(policy, UniformAdversary):
        name, params = "uniform", {"period": policy.period}
    elif isinstance(policy, MaxProbeAdversary):
        name, params = "maxprobe", {"period": policy.period}
    elif isinstance(policy, ControlThresholdAdversary):
        name, params = "control_threshold", {"threshold": policy.threshold}
    elif isinstance(policy, UniformDefender):
        name, params = "uniform", {"period": policy.period}
    elif isinstance(policy, MaxProbeDefender):
        name, params = "maxprobe", {"period": policy.period}
    elif isinstance(policy, ProbeCountPeriodDefender):
        name, params = "pcp", {"period": policy.period, "probe_limit": policy.probe_limit}
    elif isinstance(policy, ControlThresholdDefender):
        name, params = "control_threshold", {
            "threshold": policy.threshold, "period": policy.period,
            "gain": policy.gain, "literal_exponent": int(policy.literal_exponent)}
    else:
        raise PolicyFormatError(f"cannot serialize policy type {type(policy).__name__}")
    parts = [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
             for k, v in params.items()]
    return " ".join(["heuristic", policy.player, name, *parts])


def save_policy(policy: PurePolicy, path: str | Path) -> None:
    path = Path(path)
    if isinstance(policy, QNetworkPolicy):
        lines = [f"{MAGIC} {FORMAT_VERSION} qnet {policy.player} {policy.cfg.num_servers}"]
        net = policy.net
        for w, b in zip(net.weights, net.biases):
            lines.append(f"{w.shape[0]} {w.shape[1]}")
            for row in w:
                lines.append(" ".join(repr(float(v)) for v in row))
            lines.append(" ".join(repr(float(v)) for v in b))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        path.write_text(_heuristic_line(policy) + "\n", encoding="utf-8")


_HEURISTIC_BUILDERS = {
    (ADVERSARY, "noop"): lambda p: NoOpPolicy(ADVERSARY),
    (ADVERSARY, "uniform"): lambda p: UniformAdversary(period=int(p.get("period", 1))),
    (ADVERSARY, "maxprobe"): lambda p: MaxProbeAdversary(period=int(p.get("period", 1))),
    (ADVERSARY, "control_threshold"): lambda p: ControlThresholdAdversary(
        threshold=float(p.get("threshold", 0.5))),
    (DEFENDER, "noop"): lambda p: NoOpPolicy(DEFENDER),
    (DEFENDER, "uniform"): lambda p: UniformDefender(period=int(p.get("period", 4))),
    (DEFENDER, "maxprobe"): lambda p: MaxProbeDefender(period=int(p.get("period", 4))),
    (DEFENDER, "pcp"): lambda p: ProbeCountPeriodDefender(
        period=int(p.get("period", 4)), probe_limit=int(p.get("probe_limit", 7))),
    (DEFENDER, "control_threshold"): lambda p: ControlThresholdDefender(
        threshold=float(p.get("threshold", 0.8)), period=int(p.get("period", 4)),
        gain=float(p.get("gain", 0.05)),
        literal_exponent=bool(int(p.get("literal_exponent", 0)))),
}


def load_policy(path: str | Path, env_cfg: EnvConfig,
                label: str | None = None) -> PurePolicy:
    """Read a policy file.  env_cfg supplies the normalization constants a
    network policy needs; its server count must match the file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise PolicyFormatError(f"{path}: empty policy file")
    head = lines[0].split()
    if head[0] == MAGIC:
        return _load_qnet(path, lines, env_cfg, label)
    if head[0] != "heuristic":
        raise PolicyFormatError(f"{path}: unrecognized policy header {lines[0]!r}")
    if len(head) < 3:
        raise PolicyFormatError(f"{path}: malformed heuristic line")
    player, name = head[1], head[2]
    params = {}
    for tok in head[3:]:
        if "=" not in tok:
            raise PolicyFormatError(f"{path}: malformed parameter {tok!r}")
        k, _, v = tok.partition("=")
        params[k] = v
    builder = _HEURISTIC_BUILDERS.get((player, name))
    if builder is None:
        raise PolicyFormatError(f"{path}: unknown heuristic {player}/{name}")
    policy = builder(params)
    if label is not None:
        policy.label = label
    return policy


def _load_qnet(path, lines, env_cfg, label):
    head = lines[0].split()
    if len(head) != 5 or head[1] != str(FORMAT_VERSION) or head[2] != "qnet":
        raise PolicyFormatError(f"{path}: bad network header {lines[0]!r}")
    player = head[3]
    if player not in (ADVERSARY, DEFENDER):
        raise PolicyFormatError(f"{path}: unknown player {player!r}")
    m = int(head[4])
    if m != env_cfg.num_servers:
        raise PolicyFormatError(
            f"{path}: policy is for {m} servers, config has {env_cfg.num_servers}")
    weights = []
    biases = []
    pos = 1
    try:
        while pos < len(lines) and lines[pos].strip():
            rows, cols = (int(t) for t in lines[pos].split())
            pos += 1
            w = np.array([[float(t) for t in lines[pos + r].split()]
                          for r in range(rows)])
            if w.shape != (rows, cols):
                raise PolicyFormatError(f"{path}: layer shape mismatch")
            pos += rows
            b = np.array([float(t) for t in lines[pos].split()])
            if b.shape != (rows,):
                raise PolicyFormatError(f"{path}: bias shape mismatch")
            pos += 1
            weights.append(w)
            biases.append(b)
    except (ValueError, IndexError) as exc:
        raise PolicyFormatError(f"{path}: corrupt network body: {exc}") from None
    if not weights:
        raise PolicyFormatError(f"{path}: network has no layers")
    net = object.__new__(QNetwork)
    net.input_dim = weights[0].shape[1]
    net.output_dim = weights[-1].shape[0]
    net.weights = weights
    net.biases = biases
    return QNetworkPolicy(player, net, env_cfg, label or path.stem)


def save_mixture(policies: list[PurePolicy], mix: MixedStrategy,
                 directory: str | Path, mixture_name: str = "mixture.txt") -> Path:
    """Write each policy beside a weights file referencing them by filename."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for policy, w in zip(policies, mix.weights):
        fname = f"{policy.label}.policy"
        save_policy(policy, directory / fname)
        lines.append(f"{float(w)!r} {fname}")
    out = directory / mixture_name
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def load_mixture(path: str | Path, env_cfg: EnvConfig,
                 ) -> tuple[list[PurePolicy], MixedStrategy]:
    path = Path(path)
    policies = []
    weights = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(maxsplit=1)
        if len(parts) != 2:
            raise PolicyFormatError(f"{path}:{lineno}: expected '<weight> <file>'")
        try:
            w = float(parts[0])
        except ValueError:
            raise PolicyFormatError(f"{path}:{lineno}: bad weight {parts[0]!r}") from None
        ref = path.parent / parts[1]
        if not ref.exists():
            raise PolicyFormatError(f"{path}:{lineno}: missing policy file {parts[1]!r}")
        policies.append(load_policy(ref, env_cfg))
        weights.append(w)
    if not policies:
        raise PolicyFormatError(f"{path}: empty mixture")
    try:
        mix = MixedStrategy(np.array(weights))
    except ValueError as exc:
        raise PolicyFormatError(f"{path}: {exc}") from None
    players = {p.player for p in policies}
    if len(players) != 1:
        raise PolicyFormatError(f"{path}: mixture mixes players {sorted(players)}")
    return policies, mix


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


GAME_HEADER = ["adv_policy", "def_policy", "u_a", "u_d", "se_a", "se_d"]


def save_game(game: EmpiricalGame, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(GAME_HEADER)
        for i, rl in enumerate(game.row_labels):
            for j, cl in enumerate(game.col_labels):
                w.writerow([rl, cl,
                            repr(float(game.u_adv[i, j])),
                            repr(float(game.u_def[i, j])),
                            repr(float(game.se_adv[i, j])),
                            repr(float(game.se_def[i, j]))])


def load_game(path: str | Path, episodes: int = 0) -> EmpiricalGame:
    """Rebuild a game from its CSV.  Label order follows first appearance;
    the policies themselves are not recoverable from the file."""
    rows: list[str] = []
    cols: list[str] = []
    cells = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GAME_HEADER:
            raise PolicyFormatError(f"{path}: unexpected header {header}")
        for rec in reader:
            if len(rec) != 6:
                raise PolicyFormatError(f"{path}: malformed row {rec}")
            rl, cl = rec[0], rec[1]
            if rl not in rows:
                rows.append(rl)
            if cl not in cols:
                cols.append(cl)
            cells[(rl, cl)] = tuple(float(v) for v in rec[2:])
    if not cells:
        raise PolicyFormatError(f"{path}: empty game")
    u_a = np.empty((len(rows), len(cols)))
    u_d = np.empty_like(u_a)
    s_a = np.empty_like(u_a)
    s_d = np.empty_like(u_a)
    for i, rl in enumerate(rows):
        for j, cl in enumerate(cols):
            if (rl, cl) not in cells:
                raise PolicyFormatError(f"{path}: missing cell ({rl}, {cl})")
            u_a[i, j], u_d[i, j], s_a[i, j], s_d[i, j] = cells[(rl, cl)]
    return EmpiricalGame(tuple(rows), tuple(cols), u_a, u_d, s_a, s_d, episodes)


def save_equilibrium(result: EquilibriumResult, row_labels, col_labels,
                     path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["player", "policy_label", "probability"])
        for lab, p in zip(row_labels, result.sigma_adv):
            w.writerow([ADVERSARY, lab, repr(float(p))])
        for lab, p in zip(col_labels, result.sigma_def):
            w.writerow([DEFENDER, lab, repr(float(p))])
        fh.write(f"# value_a={float(result.value_adv)!r} "
                 f"value_d={float(result.value_def)!r} "
                 f"regret_a={float(result.regret_adv)!r} "
                 f"regret_d={float(result.regret_def)!r} "
                 f"method={result.method}\n")


def save_learning_curve(curve: list[EpisodeRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["step", "episode", "return_discounted", "return_raw"])
        for rec in curve:
            w.writerow([rec.end_step, rec.episode,
                        repr(float(rec.return_discounted)),
                        repr(float(rec.return_raw))])


def save_do_curve(history: list[DoRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["iteration", "value_a", "value_d", "new_policy_player",
                    "new_policy_payoff", "converged_a", "converged_d"])
        for rec in history:
            w.writerow([rec.call, repr(float(rec.value_adv)),
                        repr(float(rec.value_def)), rec.trained,
                        repr(float(rec.br_payoff)),
                        int(rec.converged_adv), int(rec.converged_def)])


def load_do_curve(path: str | Path) -> list[DoRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            out.append(DoRecord(int(rec[0]), float(rec[1]), float(rec[2]), rec[3],
                                float(rec[4]), bool(int(rec[5])), bool(int(rec[6]))))
    return out
