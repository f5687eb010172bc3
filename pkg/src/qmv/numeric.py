"""Numerical analyses on explicit state spaces.

Reachability probabilities (value iteration with graph precomputation),
whole step-bounded CDFs, MA expected time, MA time-bounded reachability via
digitization, and deterministic scheduler extraction.

Value iteration is plain Jacobi iteration with an absolute-residual stopping
criterion.  That criterion is not sound in general (it can stop early on
slowly mixing models); the intended scale is desk-size case studies whose
results are cross-checked against closed forms and brute-force oracles.

States are processed in index-ascending order with sparse flattened
transition arrays, so every analysis is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qmv.core import (
    Direction,
    ExplicitStateSpace,
    ModelClass,
    PropertyKind,
    ValueResult,
    target_mask,
)


class SolverError(Exception):
    """A numerical analysis could not produce a trustworthy result."""


class NonConvergence(SolverError):
    """Value iteration hit the iteration cap.

    ``partial`` carries the last iterate's value at the initial state; for
    iterations from below it is a lower bound on the true value.
    """

    def __init__(self, message: str, partial: ValueResult):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SolverConfig:
    """Numerical tuning knobs.

    ``epsilon`` is the absolute residual at which value iteration stops;
    ``time_bound_error`` is the a-priori digitization error allowed for MA
    time-bounded reachability; ``max_horizon`` caps step-bounded CDFs and
    ``max_digitization_steps`` caps the digitization step count.
    """

    epsilon: float = 1e-6
    max_iterations: int = 1_000_000
    time_bound_error: float = 1e-4
    max_horizon: int = 1_000_000
    max_digitization_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("epsilon", "max_iterations", "time_bound_error",
                     "max_horizon", "max_digitization_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class CdfResult:
    """Reach-probability CDF over step horizons t = 0..t_max."""

    values: tuple[float, ...]
    monotone: bool

    @property
    def final(self) -> float:
        return self.values[-1]


@dataclass(frozen=True)
class DecisionRow:
    """One scheduler decision at a state with two or more choices."""

    state: int
    values: dict[str, int | bool]
    choice: int
    action: str | None
    owner: int


# --------------------------------------------------------------------------
# sparse flattened transition structure


@dataclass
class _Mat:
    """Per-state alternatives flattened into branch arrays.

    Every state has at least one alternative.  An alternative is an
    immediate Choice, the embedded jump distribution of a Markovian state,
    or an artificial self-loop for absorbing states.  ``alt_choice`` holds
    the choice index within the state's choice tuple, or -1 for embedded
    jumps and self-loops.  ``alt_cost`` is the expected residence time of
    the alternative (0 for immediate ones).
    """

    alt_ptr: np.ndarray    # n_states+1
    alt_state: np.ndarray  # per alternative: owning state
    alt_choice: np.ndarray
    alt_cost: np.ndarray
    br_ptr: np.ndarray     # n_alts+1
    br_prob: np.ndarray
    br_tgt: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.alt_ptr) - 1

    @property
    def alt_starts(self) -> np.ndarray:
        return self.alt_ptr[:-1]

    @property
    def br_starts(self) -> np.ndarray:
        return self.br_ptr[:-1]


def _flatten(space: ExplicitStateSpace, *, time_costs: bool) -> _Mat:
    alt_ptr = [0]
    alt_state: list[int] = []
    alt_choice: list[int] = []
    alt_cost: list[float] = []
    br_ptr = [0]
    br_prob: list[float] = []
    br_tgt: list[int] = []
    for s in range(space.n_states):
        added = 0
        for ci, choice in enumerate(space.choices[s]):
            for p, t in choice.distribution.branches:
                br_prob.append(p)
                br_tgt.append(t)
            br_ptr.append(len(br_prob))
            alt_state.append(s)
            alt_choice.append(ci)
            alt_cost.append(0.0)
            added += 1
        mk = space.markovian[s]
        if added == 0 and mk is not None and not mk.masked:
            for r, t in mk.entries:
                br_prob.append(r / mk.exit_rate)
                br_tgt.append(t)
            br_ptr.append(len(br_prob))
            alt_state.append(s)
            alt_choice.append(-1)
            alt_cost.append(1.0 / mk.exit_rate if time_costs else 0.0)
            added += 1
        if added == 0:
            # absorbing: artificial zero-cost self-loop keeps arrays total
            br_prob.append(1.0)
            br_tgt.append(s)
            br_ptr.append(len(br_prob))
            alt_state.append(s)
            alt_choice.append(-1)
            alt_cost.append(0.0)
            added = 1
        alt_ptr.append(alt_ptr[-1] + added)
    return _Mat(
        np.asarray(alt_ptr, dtype=np.int64),
        np.asarray(alt_state, dtype=np.int64),
        np.asarray(alt_choice, dtype=np.int64),
        np.asarray(alt_cost, dtype=np.float64),
        np.asarray(br_ptr, dtype=np.int64),
        np.asarray(br_prob, dtype=np.float64),
        np.asarray(br_tgt, dtype=np.int64),
    )


def _alt_values(mat: _Mat, V: np.ndarray) -> np.ndarray:
    contrib = mat.br_prob * V[mat.br_tgt]
    return np.add.reduceat(contrib, mat.br_starts) + mat.alt_cost


def _opt_per_state(mat: _Mat, alt_vals: np.ndarray, maximize: bool) -> np.ndarray:
    if maximize:
        return np.maximum.reduceat(alt_vals, mat.alt_starts)
    return np.minimum.reduceat(alt_vals, mat.alt_starts)


# --------------------------------------------------------------------------
# graph precomputations


def _predecessors(mat: _Mat) -> tuple[np.ndarray, np.ndarray]:
    """CSR-style predecessor lists: (ptr over states, predecessor array)."""
    src = mat.alt_state[np.searchsorted(
        mat.br_ptr, np.arange(len(mat.br_prob)), side="right") - 1]
    order = np.argsort(mat.br_tgt, kind="stable")
    tgt_sorted = mat.br_tgt[order]
    src_sorted = src[order]
    ptr = np.searchsorted(tgt_sorted, np.arange(mat.n_states + 1))
    return ptr, src_sorted


def _backward_reachable(mat: _Mat, seeds: np.ndarray) -> np.ndarray:
    """States with a path (any alternative) into ``seeds``."""
    ptr, preds = _predecessors(mat)
    reached = seeds.copy()
    stack = list(np.flatnonzero(seeds))
    while stack:
        t = stack.pop()
        for p in preds[ptr[t]:ptr[t + 1]]:
            if not reached[p]:
                reached[p] = True
                stack.append(p)
    return reached


def _backward_reachable_avoiding(mat: _Mat, seeds: np.ndarray,
                                 blocked: np.ndarray) -> np.ndarray:
    """States reaching ``seeds`` along paths whose interior avoids ``blocked``."""
    ptr, preds = _predecessors(mat)
    reached = seeds.copy()
    stack = list(np.flatnonzero(seeds))
    while stack:
        t = stack.pop()
        for p in preds[ptr[t]:ptr[t + 1]]:
            if not reached[p] and not blocked[p]:
                reached[p] = True
                stack.append(p)
    return reached


def _exists_avoiding(mat: _Mat, target: np.ndarray) -> np.ndarray:
    """States where some scheduler avoids ``target`` forever (min prob 0)."""
    keep = ~target
    while True:
        br_in = keep[mat.br_tgt]
        alt_all = np.logical_and.reduceat(br_in, mat.br_starts)
        new = np.logical_or.reduceat(alt_all, mat.alt_starts) & keep
        if np.array_equal(new, keep):
            return keep
        keep = new


def _exists_almost_sure(mat: _Mat, target: np.ndarray) -> np.ndarray:
    """States where some scheduler reaches ``target`` with probability 1."""
    u = np.ones(mat.n_states, dtype=bool)
    while True:
        v = target.copy()
        while True:
            br_ok = u[mat.br_tgt]
            br_hit = v[mat.br_tgt]
            alt_ok = (np.logical_and.reduceat(br_ok, mat.br_starts)
                      & np.logical_or.reduceat(br_hit, mat.br_starts))
            new = v | np.logical_or.reduceat(alt_ok, mat.alt_starts)
            if np.array_equal(new, v):
                break
            v = new
        if np.array_equal(v, u):
            return u
        u = v


def _all_almost_sure(mat: _Mat, target: np.ndarray) -> np.ndarray:
    """States where every scheduler reaches ``target`` with probability 1."""
    escape = _exists_avoiding(mat, target)
    can_escape = _backward_reachable_avoiding(mat, escape, target)
    return ~can_escape


def _zero_time_trap(space: ExplicitStateSpace, mat: _Mat,
                    target: np.ndarray) -> np.ndarray:
    """Non-target states that can cycle forever through immediate choices."""
    has_choice = np.array(
        [len(cs) > 0 for cs in space.choices], dtype=bool)
    keep = has_choice & ~target
    immediate_alt = mat.alt_choice >= 0
    while True:
        br_in = keep[mat.br_tgt]
        alt_all = np.logical_and.reduceat(br_in, mat.br_starts) & immediate_alt
        new = np.logical_or.reduceat(alt_all, mat.alt_starts) & keep
        if np.array_equal(new, keep):
            return keep
        keep = new


# --------------------------------------------------------------------------
# value iteration and scheduler extraction


def _iterate(mat: _Mat, V: np.ndarray, free: np.ndarray, maximize: bool,
             cfg: SolverConfig, *, probabilities: bool,
             initial: int, info: dict) -> tuple[np.ndarray, int, float]:
    if not free.any():
        return V, 0, 0.0
    residual = math.inf
    for iteration in range(1, cfg.max_iterations + 1):
        opt = _opt_per_state(mat, _alt_values(mat, V), maximize)
        new = np.where(free, opt, V)
        # pinned +inf entries produce inf-inf=NaN, but `where=free`
        # excludes them from the residual
        with np.errstate(invalid="ignore"):
            residual = float(np.max(np.abs(new - V), where=free, initial=0.0))
        V = new
        if probabilities and (V.min() < -1e-9 or
                              V.max(where=~np.isinf(V), initial=0.0) > 1 + 1e-9):
            raise SolverError(
                f"iteration left [0,1]: min {V.min()}, max {V.max()}")
        if residual <= cfg.epsilon:
            return V, iteration, residual
    raise NonConvergence(
        f"no convergence after {cfg.max_iterations} iterations "
        f"(residual {residual:.3e})",
        ValueResult(float(V[initial]), cfg.max_iterations, residual,
                    None, dict(info, converged=0.0)))


def _extract_scheduler(
    space: ExplicitStateSpace,
    mat: _Mat,
    V: np.ndarray,
    free: np.ndarray,
    maximize: bool,
    target: np.ndarray,
    cfg: SolverConfig,
    *,
    progress: bool,
    stay_zero: np.ndarray | None = None,
) -> dict[int, int]:
    """Deterministic memoryless scheduler attaining ``V``.

    Ties break to the lowest choice index; where ``progress`` is set
    (maximizing reachability, minimizing time), the choice must also make
    progress toward the target through value-optimal alternatives, which
    keeps the induced chain from idling in value-preserving cycles.
    ``stay_zero`` marks states whose scheduler must remain inside that set
    (minimal-probability extraction).
    """
    alt_vals = _alt_values(mat, V)
    tol = 10 * cfg.epsilon
    n = mat.n_states
    opt = _opt_per_state(mat, alt_vals, maximize)
    with np.errstate(invalid="ignore"):
        # inf-valued alternatives of inf-valued states give NaN gaps, which
        # compare False and are correctly excluded
        candidate = np.abs(alt_vals - opt[mat.alt_state]) <= tol

    dist = None
    if progress:
        dist = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        dist[target] = 0
        # BFS from the target, backwards over candidate alternatives only
        frontier = list(np.flatnonzero(target))
        ptr, preds_all = _predecessors(mat)
        # membership test per edge: recompute candidate sources per branch
        br_alt = np.searchsorted(mat.br_ptr,
                                 np.arange(len(mat.br_prob)), side="right") - 1
        cand_edge_src: dict[int, list[int]] = {}
        for b in range(len(mat.br_prob)):
            if candidate[br_alt[b]]:
                cand_edge_src.setdefault(
                    int(mat.br_tgt[b]), []).append(int(mat.alt_state[br_alt[b]]))
        seen = target.copy()
        while frontier:
            nxt = []
            for t in frontier:
                for p in cand_edge_src.get(t, ()):
                    if not seen[p]:
                        seen[p] = True
                        dist[p] = dist[t] + 1
                        nxt.append(p)
            frontier = nxt

    scheduler: dict[int, int] = {}
    for s in range(n):
        n_choices = len(space.choices[s])
        if n_choices == 0:
            continue
        a0, a1 = mat.alt_ptr[s], mat.alt_ptr[s + 1]
        if stay_zero is not None and stay_zero[s]:
            # pick a choice that keeps the avoidance certificate
            chosen = 0
            for a in range(a0, a1):
                tgts = mat.br_tgt[mat.br_ptr[a]:mat.br_ptr[a + 1]]
                if stay_zero[tgts].all():
                    chosen = int(mat.alt_choice[a])
                    break
            scheduler[s] = chosen
            continue
        if not free[s]:
            scheduler[s] = 0
            continue
        cands = [a for a in range(a0, a1) if candidate[a]]
        if not cands:
            cands = [a0]
        chosen = cands[0]
        if progress and dist is not None and dist[s] < np.iinfo(np.int64).max:
            for a in cands:
                tgts = mat.br_tgt[mat.br_ptr[a]:mat.br_ptr[a + 1]]
                if (dist[tgts] < dist[s]).any():
                    chosen = a
                    break
        scheduler[s] = int(mat.alt_choice[chosen])
    return scheduler


# --------------------------------------------------------------------------
# public analyses


def reach_prob(
    space: ExplicitStateSpace,
    target,
    direction: Direction,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> ValueResult:
    """Optimal probability of eventually reaching ``target``.

    Works on all three model classes; for MA the timing is irrelevant and
    Markovian states contribute their embedded jump distribution.  Returns
    the value at the initial state and a deterministic memoryless scheduler
    over all states with at least one choice.
    """
    mask = target_mask(space, target)
    mat = _flatten(space, time_costs=False)
    maximize = direction is Direction.MAX
    if maximize:
        zero = ~_backward_reachable(mat, mask)
        one = _exists_almost_sure(mat, mask)
    else:
        zero = _exists_avoiding(mat, mask)
        one = _all_almost_sure(mat, mask)
    zero &= ~mask
    one |= mask

    V = np.zeros(space.n_states, dtype=np.float64)
    V[one] = 1.0
    free = ~(one | zero)
    info = {"pinned_zero": float(zero.sum()), "pinned_one": float(one.sum())}
    V, iterations, residual = _iterate(
        mat, V, free, maximize, cfg, probabilities=True,
        initial=space.initial, info=info)
    scheduler = _extract_scheduler(
        space, mat, V, free, maximize, mask, cfg,
        progress=maximize, stay_zero=zero if not maximize else None)
    return ValueResult(float(V[space.initial]), iterations, residual,
                       scheduler, info)


def step_bounded_cdf(
    space: ExplicitStateSpace,
    target,
    direction: Direction,
    t_max: int,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CdfResult:
    """Reach probability within t steps, for every t = 0..t_max.

    DTMC: forward transient iteration of the state distribution with the
    target made absorbing — one vector per step, no unfolding.  MDP:
    backward step-bounded value iteration, recording the horizon-k value of
    the initial state for each k.
    """
    if space.model_class is ModelClass.MA:
        raise SolverError("step-bounded analysis needs a DTMC or MDP "
                          "(MA models take time bounds)")
    if t_max < 0:
        raise SolverError("t_max must be nonnegative")
    if t_max > cfg.max_horizon:
        raise SolverError(
            f"horizon {t_max} exceeds the configured cap {cfg.max_horizon}")
    mask = target_mask(space, target)
    mat = _flatten(space, time_costs=False)

    if space.model_class is ModelClass.DTMC:
        br_src = mat.alt_state[np.searchsorted(
            mat.br_ptr, np.arange(len(mat.br_prob)), side="right") - 1]
        pi = np.zeros(space.n_states, dtype=np.float64)
        pi[space.initial] = 1.0
        acc = float(pi[mask].sum())
        pi[mask] = 0.0
        values = [acc]
        for _ in range(t_max):
            nxt = np.zeros_like(pi)
            np.add.at(nxt, mat.br_tgt, pi[br_src] * mat.br_prob)
            pi = nxt
            acc += float(pi[mask].sum())
            pi[mask] = 0.0
            values.append(acc)
    else:
        maximize = direction is Direction.MAX
        V = mask.astype(np.float64)
        values = [float(V[space.initial])]
        for _ in range(t_max):
            opt = _opt_per_state(mat, _alt_values(mat, V), maximize)
            V = np.where(mask, 1.0, opt)
            values.append(float(V[space.initial]))

    monotone = all(b >= a for a, b in zip(values, values[1:]))
    return CdfResult(tuple(values), monotone)


def ma_expected_time(
    space: ExplicitStateSpace,
    target,
    direction: Direction,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> ValueResult:
    """Optimal expected time (minutes) until ``target`` in an MA.

    States from which the target cannot be reached appropriately — for min:
    by no scheduler almost surely; for max: avoidable with positive
    probability by some scheduler — take the value +infinity (``math.inf``),
    which propagates exactly and never overflows.
    """
    if space.model_class is not ModelClass.MA:
        raise SolverError("expected time is defined for MA models only")
    mask = target_mask(space, target)
    mat = _flatten(space, time_costs=True)
    maximize = direction is Direction.MAX
    if maximize:
        finite = _all_almost_sure(mat, mask)
    else:
        finite = _exists_almost_sure(mat, mask)
        trap = _zero_time_trap(space, mat, mask) & finite
        if trap.any():
            raise SolverError(
                "minimum expected time is ill-defined: zero-time cycle "
                f"through states {np.flatnonzero(trap).tolist()[:10]}")

    V = np.zeros(space.n_states, dtype=np.float64)
    V[~finite] = math.inf
    V[mask] = 0.0
    free = finite & ~mask
    info = {"pinned_inf": float((~finite).sum()),
            "target_states": float(mask.sum())}
    V, iterations, residual = _iterate(
        mat, V, free, maximize, cfg, probabilities=False,
        initial=space.initial, info=info)
    scheduler = _extract_scheduler(
        space, mat, V, free, maximize, mask, cfg, progress=not maximize)
    return ValueResult(float(V[space.initial]), iterations, residual,
                       scheduler, info)


def ma_time_bounded(
    space: ExplicitStateSpace,
    target,
    direction: Direction,
    time_bound: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> ValueResult:
    """Optimal probability of reaching ``target`` within ``time_bound`` minutes.

    Digitization: the horizon is cut into k slices with
    (λ_max·t)²/(2k) ≤ ``cfg.time_bound_error``; per slice a Markovian state
    jumps with probability 1−e^(−E·δ), and immediate states are resolved by
    an inner fixpoint (they take no time).  The a-priori error bound and k
    are reported in the result metadata.
    """
    if space.model_class is not ModelClass.MA:
        raise SolverError("time-bounded analysis is defined for MA models")
    if time_bound < 0:
        raise SolverError("time bound must be nonnegative")
    mask = target_mask(space, target)
    maximize = direction is Direction.MAX
    n = space.n_states

    exit_rates = np.array(
        [mk.exit_rate if (mk is not None and not mk.masked and not cs) else 0.0
         for mk, cs in zip(space.markovian, space.choices)])
    lam_max = float(exit_rates.max()) if n else 0.0
    if lam_max > 0 and time_bound > 0:
        k = max(1, math.ceil((lam_max * time_bound) ** 2
                             / (2 * cfg.time_bound_error)))
    else:
        k = 0
    if k > cfg.max_digitization_steps:
        raise SolverError(
            f"digitization needs {k} steps, above the configured cap "
            f"{cfg.max_digitization_steps}; increase time_bound_error or "
            "reduce the bound")
    delta = time_bound / k if k else 0.0
    err_bound = ((lam_max * time_bound) ** 2 / (2 * k)) if k else 0.0

    # markovian rows (non-target states only; targets are absorbing)
    m_states = [s for s in range(n)
                if exit_rates[s] > 0 and not mask[s]]
    m_idx = np.asarray(m_states, dtype=np.int64)
    m_ptr = [0]
    m_prob: list[float] = []
    m_tgt: list[int] = []
    for s in m_states:
        mk = space.markovian[s]
        for r, t in mk.entries:
            m_prob.append(r / mk.exit_rate)
            m_tgt.append(t)
        m_ptr.append(len(m_prob))
    m_prob_a = np.asarray(m_prob)
    m_tgt_a = np.asarray(m_tgt, dtype=np.int64)
    m_starts = np.asarray(m_ptr[:-1], dtype=np.int64)
    jump = -np.expm1(-exit_rates[m_idx] * delta) if len(m_idx) else np.empty(0)
    stay = np.exp(-exit_rates[m_idx] * delta) if len(m_idx) else np.empty(0)

    # immediate rows (non-target states with choices)
    i_states = [s for s in range(n) if space.choices[s] and not mask[s]]
    i_idx = np.asarray(i_states, dtype=np.int64)
    i_alt_ptr = [0]
    i_br_ptr = [0]
    i_prob: list[float] = []
    i_tgt: list[int] = []
    for s in i_states:
        for choice in space.choices[s]:
            for p, t in choice.distribution.branches:
                i_prob.append(p)
                i_tgt.append(t)
            i_br_ptr.append(len(i_prob))
        i_alt_ptr.append(i_alt_ptr[-1] + len(space.choices[s]))
    i_prob_a = np.asarray(i_prob)
    i_tgt_a = np.asarray(i_tgt, dtype=np.int64)
    i_br_starts = np.asarray(i_br_ptr[:-1], dtype=np.int64)
    i_alt_starts = np.asarray(i_alt_ptr[:-1], dtype=np.int64)

    def settle(V: np.ndarray) -> np.ndarray:
        """Inner fixpoint: resolve immediate states at one time level."""
        if not len(i_idx):
            return V
        for _ in range(cfg.max_iterations):
            alt_vals = np.add.reduceat(i_prob_a * V[i_tgt_a], i_br_starts)
            if maximize:
                opt = np.maximum.reduceat(alt_vals, i_alt_starts)
            else:
                opt = np.minimum.reduceat(alt_vals, i_alt_starts)
            resid = float(np.max(np.abs(opt - V[i_idx]), initial=0.0))
            V[i_idx] = opt
            if resid <= cfg.epsilon:
                return V
        raise NonConvergence(
            "inner fixpoint over immediate states did not converge",
            ValueResult(float(V[space.initial]), cfg.max_iterations,
                        math.inf, None, {}))

    V = mask.astype(np.float64)
    V = settle(V)
    for _ in range(k):
        if len(m_idx):
            emb = np.add.reduceat(m_prob_a * V[m_tgt_a], m_starts)
            V = V.copy()
            V[m_idx] = jump * emb + stay * V[m_idx]
        V = settle(V)

    info = {"digitization_steps": float(k), "error_bound": err_bound,
            "lambda_max": lam_max, "step_size": delta}
    return ValueResult(float(V[space.initial]), k, err_bound, None, info)


# --------------------------------------------------------------------------
# scheduler utilities


def describe_scheduler(
    space: ExplicitStateSpace, scheduler: dict[int, int]
) -> list[DecisionRow]:
    """Tabulate the scheduler's decisions at genuine decision states."""
    rows = []
    for s in sorted(scheduler):
        if len(space.choices[s]) < 2:
            continue
        choice = space.choices[s][scheduler[s]]
        rows.append(DecisionRow(
            state=s,
            values=space.state_values(s),
            choice=scheduler[s],
            action=choice.action,
            owner=choice.owner,
        ))
    return rows


def induced_chain(
    space: ExplicitStateSpace, scheduler: dict[int, int]
) -> ExplicitStateSpace:
    """Freeze a scheduler: keep only the chosen choice in every state."""
    new_choices = []
    for s, cs in enumerate(space.choices):
        if not cs:
            new_choices.append(())
        else:
            new_choices.append((cs[scheduler[s]],))
    return ExplicitStateSpace(
        model_class=space.model_class,
        layout=space.layout,
        valuations=space.valuations,
        choices=tuple(new_choices),
        markovian=space.markovian,
        initial=space.initial,
        components=space.components,
        labels=space.labels,
        name=space.name,
    )


def reachable_under(
    space: ExplicitStateSpace, scheduler: dict[int, int]
) -> np.ndarray:
    """States reachable from the initial state when following ``scheduler``."""
    seen = np.zeros(space.n_states, dtype=bool)
    seen[space.initial] = True
    stack = [space.initial]
    while stack:
        s = stack.pop()
        succs: list[int] = []
        cs = space.choices[s]
        if cs:
            succs.extend(t for _, t in cs[scheduler[s]].distribution.branches)
        else:
            mk = space.markovian[s]
            if mk is not None and not mk.masked:
                succs.extend(t for _, t in mk.entries)
        for t in succs:
            if not seen[t]:
                seen[t] = True
                stack.append(t)
    return seen


def check_property(
    space: ExplicitStateSpace,
    prop,
    cfg: SolverConfig = DEFAULT_CONFIG,
    constants: dict | None = None,
):
    """Dispatch a parsed property to the matching analysis.

    Returns a :class:`ValueResult`; consumers wanting whole CDFs should use
    :func:`step_bounded_cdf` directly — here only the value at the full
    bound is reported, wrapped as a ValueResult.
    """
    target = target_mask(space, prop.target, constants)
    if prop.kind is PropertyKind.REACH_PROB:
        return reach_prob(space, target, prop.direction, cfg)
    if prop.kind is PropertyKind.STEP_BOUNDED_REACH_PROB:
        cdf = step_bounded_cdf(space, target, prop.direction, prop.bound, cfg)
        return ValueResult(cdf.final, prop.bound, 0.0, None,
                           {"monotone": float(cdf.monotone)})
    if prop.kind is PropertyKind.TIME_BOUNDED_REACH_PROB:
        return ma_time_bounded(space, target, prop.direction, prop.bound, cfg)
    if prop.kind is PropertyKind.EXPECTED_TIME:
        return ma_expected_time(space, target, prop.direction, cfg)
    raise SolverError(f"unsupported property kind {prop.kind}")
