"""Empirical bimatrix games and mixed Nash equilibrium computation.

The empirical game holds Monte-Carlo payoff estimates for every pair of an
adversary (row) policy and defender (column) policy.  solve_msne finds one
mixed equilibrium with Lemke-Howson pivoting, falling back to support
enumeration on small games, and always verifies the result with an
independent regret check before returning it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from mtdgame.env import ADVERSARY, DEFENDER, EnvConfig
from mtdgame.policies import PairPayoff, PurePolicy, evaluate_pair
from mtdgame.seeds import derive_seed


class EquilibriumError(RuntimeError):
    """No equilibrium passed the regret check."""


@dataclass(frozen=True)
class EmpiricalGame:
    """Estimated payoff matrices over ordered policy sets.

    Rows index adversary policies, columns defender policies.  Instances
    are never mutated; extending the sets produces a new game.
    """

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    u_adv: np.ndarray
    u_def: np.ndarray
    se_adv: np.ndarray
    se_def: np.ndarray
    episodes: int
    row_policies: tuple[PurePolicy, ...] | None = None
    col_policies: tuple[PurePolicy, ...] | None = None

    def __post_init__(self):
        shape = (len(self.row_labels), len(self.col_labels))
        for name in ("u_adv", "u_def", "se_adv", "se_def"):
            mat = getattr(self, name)
            if mat.shape != shape:
                raise ValueError(f"{name} has shape {mat.shape}, expected {shape}")
            if not np.isfinite(mat).all():
                raise ValueError(f"{name} contains non-finite entries")
        if len(set(self.row_labels)) != len(self.row_labels):
            raise ValueError("duplicate row labels")
        if len(set(self.col_labels)) != len(self.col_labels):
            raise ValueError("duplicate column labels")


def _cell(adv: PurePolicy, deff: PurePolicy, env_cfg: EnvConfig,
          episodes: int, seed: int, evaluator) -> PairPayoff:
    # The cell seed depends on the labels only, so growing the game never
    # changes previously computed entries.
    return evaluator(adv, deff, env_cfg, episodes,
                     derive_seed(seed, "pair", adv.label, deff.label))


def build_game(adv_policies: list[PurePolicy], def_policies: list[PurePolicy],
               env_cfg: EnvConfig, episodes: int, seed: int,
               evaluator=evaluate_pair, jobs: int = 1) -> EmpiricalGame:
    """Evaluate every policy pair and assemble the empirical game."""
    rows, cols = len(adv_policies), len(def_policies)
    if rows == 0 or cols == 0:
        raise ValueError("both policy sets must be nonempty")
    u_a = np.empty((rows, cols))
    u_d = np.empty((rows, cols))
    s_a = np.empty((rows, cols))
    s_d = np.empty((rows, cols))
    pairs = [(i, j) for i in range(rows) for j in range(cols)]
    if jobs > 1:
        results = _parallel_cells(adv_policies, def_policies, pairs, env_cfg,
                                  episodes, seed, evaluator, jobs)
    else:
        results = {(i, j): _cell(adv_policies[i], def_policies[j], env_cfg,
                                 episodes, seed, evaluator) for i, j in pairs}
    for (i, j), pp in results.items():
        u_a[i, j] = pp.u_adv
        u_d[i, j] = pp.u_def
        s_a[i, j] = pp.se_adv
        s_d[i, j] = pp.se_def
    return EmpiricalGame(
        row_labels=tuple(p.label for p in adv_policies),
        col_labels=tuple(p.label for p in def_policies),
        u_adv=u_a, u_def=u_d, se_adv=s_a, se_def=s_d,
        episodes=episodes,
        row_policies=tuple(adv_policies), col_policies=tuple(def_policies),
    )


def _parallel_cells(adv_policies, def_policies, pairs, env_cfg, episodes,
                    seed, evaluator, jobs):
    from concurrent.futures import ProcessPoolExecutor

    results = {}
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {
            pool.submit(_cell, adv_policies[i], def_policies[j], env_cfg,
                        episodes, seed, evaluator): (i, j)
            for i, j in pairs
        }
        for fut, key in futures.items():
            results[key] = fut.result()
    return results


def extend_game(game: EmpiricalGame, policy: PurePolicy, env_cfg: EnvConfig,
                seed: int, evaluator=evaluate_pair, jobs: int = 1) -> EmpiricalGame:
    """Add one policy, evaluating only the new row or column."""
    if game.row_policies is None or game.col_policies is None:
        raise ValueError("cannot extend a game loaded without policies")
    if policy.player == ADVERSARY:
        if policy.label in game.row_labels:
            raise ValueError(f"duplicate row label {policy.label!r}")
        new_cells = [_cell(policy, d, env_cfg, game.episodes, seed, evaluator)
                     for d in game.col_policies]
        row_a = np.array([[c.u_adv for c in new_cells]])
        row_d = np.array([[c.u_def for c in new_cells]])
        row_sa = np.array([[c.se_adv for c in new_cells]])
        row_sd = np.array([[c.se_def for c in new_cells]])
        return replace(
            game,
            row_labels=game.row_labels + (policy.label,),
            u_adv=np.vstack([game.u_adv, row_a]),
            u_def=np.vstack([game.u_def, row_d]),
            se_adv=np.vstack([game.se_adv, row_sa]),
            se_def=np.vstack([game.se_def, row_sd]),
            row_policies=game.row_policies + (policy,),
        )
    if policy.player == DEFENDER:
        if policy.label in game.col_labels:
            raise ValueError(f"duplicate column label {policy.label!r}")
        new_cells = [_cell(a, policy, env_cfg, game.episodes, seed, evaluator)
                     for a in game.row_policies]
        col_a = np.array([[c.u_adv] for c in new_cells])
        col_d = np.array([[c.u_def] for c in new_cells])
        col_sa = np.array([[c.se_adv] for c in new_cells])
        col_sd = np.array([[c.se_def] for c in new_cells])
        return replace(
            game,
            col_labels=game.col_labels + (policy.label,),
            u_adv=np.hstack([game.u_adv, col_a]),
            u_def=np.hstack([game.u_def, col_d]),
            se_adv=np.hstack([game.se_adv, col_sa]),
            se_def=np.hstack([game.se_def, col_sd]),
            col_policies=game.col_policies + (policy,),
        )
    raise ValueError(f"unknown player {policy.player!r}")


def mixed_utility(game: EmpiricalGame, sigma_adv: np.ndarray,
                  sigma_def: np.ndarray) -> tuple[float, float]:
    """Expected payoffs of a mixed strategy profile."""
    return (float(sigma_adv @ game.u_adv @ sigma_def),
            float(sigma_adv @ game.u_def @ sigma_def))


def regret(game: EmpiricalGame, sigma_adv: np.ndarray,
           sigma_def: np.ndarray) -> tuple[float, float]:
    """Best pure-deviation gain for each player, floored at zero."""
    pa = game.u_adv @ sigma_def
    pd = sigma_adv @ game.u_def
    reg_a = float(pa.max() - sigma_adv @ pa)
    reg_d = float(pd.max() - pd @ sigma_def)
    return max(reg_a, 0.0), max(reg_d, 0.0)


@dataclass(frozen=True)
class EquilibriumResult:
    sigma_adv: np.ndarray
    sigma_def: np.ndarray
    value_adv: float
    value_def: float
    regret_adv: float
    regret_def: float
    method: str


# ---------------------------------------------------------------------------
# Lemke-Howson.
#
# Labels 0..m-1 belong to row strategies, m..m+n-1 to column strategies.
# Two tableaus: in TX the structural variables are the row player's weights
# x (columns 0..m-1) with one slack per column strategy (columns m..m+n-1);
# TY holds the column player's weights y (columns m..m+n-1) with one slack
# per row strategy (columns 0..m-1).  In both, the column index of a
# variable equals its label.  Starting from the all-slack basis, drop one
# label, then alternately pivot the duplicated label into the other tableau
# until the dropped label reappears.  The ratio test breaks ties
# lexicographically over the initial identity columns, which resolves
# degenerate games (empirical games often contain identical rows).
# ---------------------------------------------------------------------------

class _PivotFailure(Exception):
    pass


def _lex_pivot(tab: np.ndarray, basis: list[int], col: int,
               lex_cols: range) -> int:
    pivot_col = tab[:, col]
    rows = np.flatnonzero(pivot_col > 1e-9)
    if rows.size == 0:
        raise _PivotFailure("unbounded pivot direction")
    best = rows[0]
    for r in rows[1:]:
        cb, cr = pivot_col[best], pivot_col[r]
        decided = False
        for c in (tab.shape[1] - 1, *lex_cols):
            a = tab[r, c] / cr
            b = tab[best, c] / cb
            if not math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12):
                if a < b:
                    best = r
                decided = True
                break
        if not decided and basis[r] < basis[best]:
            best = r
    piv = tab[best] / tab[best, col]
    colv = tab[:, col].copy()
    colv[best] = 0.0
    tab -= np.outer(colv, piv)
    tab[best] = piv
    leaving = basis[best]
    basis[best] = col
    return leaving


def _lemke_howson(a_pos: np.ndarray, b_pos: np.ndarray, first_label: int,
                  max_pivots: int) -> tuple[np.ndarray, np.ndarray]:
    m, n = a_pos.shape
    tx = np.hstack([b_pos.T, np.eye(n), np.ones((n, 1))])
    ty = np.hstack([np.eye(m), a_pos, np.ones((m, 1))])
    basis_x = list(range(m, m + n))
    basis_y = list(range(m))
    lex_x = range(m, m + n)
    lex_y = range(m)
    entering = first_label
    in_x = first_label < m
    for _ in range(max_pivots):
        if in_x:
            leaving = _lex_pivot(tx, basis_x, entering, lex_x)
        else:
            leaving = _lex_pivot(ty, basis_y, entering, lex_y)
        if leaving == first_label:
            break
        entering = leaving
        in_x = not in_x
    else:
        raise _PivotFailure("pivot limit exceeded")
    x = np.zeros(m)
    y = np.zeros(n)
    for r, lab in enumerate(basis_x):
        if lab < m:
            x[lab] = tx[r, -1]
    for r, lab in enumerate(basis_y):
        if lab >= m:
            y[lab - m] = ty[r, -1]
    if x.sum() <= 0 or y.sum() <= 0:
        raise _PivotFailure("returned to the artificial equilibrium")
    x = np.clip(x, 0.0, None)
    y = np.clip(y, 0.0, None)
    return x / x.sum(), y / y.sum()


def _support_enumeration(u_a: np.ndarray, u_d: np.ndarray, tol: float):
    """First equilibrium over equal-size supports in lexicographic order."""
    m, n = u_a.shape
    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            a_rows = u_a[list(rows)]
            d_rows = u_d[list(rows)]
            for cols in itertools.combinations(range(n), k):
                a_sub = a_rows[:, list(cols)]
                d_sub = d_rows[:, list(cols)]
                # y makes the chosen rows indifferent, x the chosen columns
                left_y = np.zeros((k + 1, k + 1))
                left_y[:k, :k] = a_sub
                left_y[:k, k] = -1.0
                left_y[k, :k] = 1.0
                left_x = np.zeros((k + 1, k + 1))
                left_x[:k, :k] = d_sub.T
                left_x[:k, k] = -1.0
                left_x[k, :k] = 1.0
                rhs = np.zeros(k + 1)
                rhs[k] = 1.0
                try:
                    sol_y = np.linalg.solve(left_y, rhs)
                    sol_x = np.linalg.solve(left_x, rhs)
                except np.linalg.LinAlgError:
                    continue
                if (sol_y[:k] < -1e-9).any() or (sol_x[:k] < -1e-9).any():
                    continue
                x = np.zeros(m)
                y = np.zeros(n)
                x[list(rows)] = np.clip(sol_x[:k], 0.0, None)
                y[list(cols)] = np.clip(sol_y[:k], 0.0, None)
                if x.sum() <= 0 or y.sum() <= 0:
                    continue
                x /= x.sum()
                y /= y.sum()
                pa = u_a @ y
                pd = x @ u_d
                if pa.max() - x @ pa <= tol and pd.max() - pd @ y <= tol:
                    return x, y
    return None


_SUPPORT_ENUM_LIMIT = 12


def solve_msne(game: EmpiricalGame, tol: float | None = None) -> EquilibriumResult:
    """One mixed equilibrium of the empirical game, regret-verified.

    Deterministic: Lemke-Howson is tried from every starting label in order
    and the first verified equilibrium wins.  tol defaults to 1e-6 of the
    payoff scale.
    """
    u_a, u_d = game.u_adv, game.u_def
    m, n = u_a.shape
    if tol is None:
        scale = max(1.0, float(np.abs(u_a).max()), float(np.abs(u_d).max()))
        tol = 1e-6 * scale
    # Shifting each player's payoffs by a constant changes no equilibria;
    # Lemke-Howson needs positive matrices.
    a_pos = u_a - u_a.min() + 1.0
    b_pos = u_d - u_d.min() + 1.0
    max_pivots = 200 + 20 * (m + n)
    for label in range(m + n):
        try:
            x, y = _lemke_howson(a_pos, b_pos, label, max_pivots)
        except _PivotFailure:
            continue
        reg_a, reg_d = regret(game, x, y)
        if reg_a <= tol and reg_d <= tol:
            va, vd = mixed_utility(game, x, y)
            return EquilibriumResult(x, y, va, vd, reg_a, reg_d, "lemke_howson")
    if min(m, n) <= _SUPPORT_ENUM_LIMIT:
        found = _support_enumeration(u_a, u_d, tol)
        if found is not None:
            x, y = found
            reg_a, reg_d = regret(game, x, y)
            va, vd = mixed_utility(game, x, y)
            return EquilibriumResult(x, y, va, vd, reg_a, reg_d, "support_enumeration")
    raise EquilibriumError(
        f"no equilibrium within regret tolerance {tol:g} for a {m}x{n} game")
