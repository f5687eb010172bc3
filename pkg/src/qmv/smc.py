"""Statistical model checking and lightweight scheduler sampling.

Simulation resolves nondeterminism through a *resolver* (state index →
choice index).  Lightweight scheduler sampling (LSS) represents a scheduler
as a 32-bit integer id: at a decision state the choice is
``FNV-1a-64(id ++ encoded state) mod k``, so a single integer determines a
complete deterministic memoryless scheduler.  In *global* mode the encoded
state covers every variable; in *distributed* mode only the variables
observed by the component that owns the decision, which restricts sampling
to schedulers implementable with local information.

Everything is reproducible: per-run seeds are derived by hashing
``(master_seed, run_index)``, so results do not depend on worker count or
execution order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Iterable, Sequence

import numpy as np

from qmv.core import (
    Direction,
    ExplicitStateSpace,
    ModelClass,
    Property,
    PropertyKind,
    scheduler_owner,
    target_mask,
)
from qmv.lang.explore import check_good_for_distribution

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash; fixed constants, platform-independent."""
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def encode_state(
    space: ExplicitStateSpace,
    state: int,
    projection: str | Iterable[int] = "all",
) -> bytes:
    """Serialize a state's (projected) valuation to bytes.

    Each included variable contributes its value as 8 bytes, little-endian
    two's complement (booleans as 0/1), in layout order.  ``projection`` is
    ``"all"`` or an iterable of layout indices; excluded variables
    contribute nothing.
    """
    row = space.valuations[state]
    if projection == "all":
        indices: Sequence[int] = range(space.n_variables)
    else:
        indices = sorted(projection)
    return b"".join(
        int(row[i]).to_bytes(8, "little", signed=True) for i in indices)


def lss_decide(scheduler_id: int, state_bytes: bytes, k: int) -> int:
    """Deterministic choice of one of ``k`` alternatives.

    Hashes the 4-byte little-endian scheduler id followed by the encoded
    state and reduces modulo ``k``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    j = fnv1a64(scheduler_id.to_bytes(4, "little") + state_bytes)
    return j % k


def run_seed(master_seed: int, run_index: int) -> int:
    """Per-run seed: hash of (master seed, run index), both 8 bytes LE."""
    return fnv1a64(master_seed.to_bytes(8, "little", signed=False)
                   + run_index.to_bytes(8, "little", signed=False))


# --------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SmcConfig:
    """Monte Carlo settings: fixed ``runs``, or an (epsilon, delta) pair
    sized by the Okamoto bound N = ceil(ln(2/delta) / (2 epsilon^2))."""

    runs: int | None = None
    epsilon: float | None = None
    delta: float | None = None
    master_seed: int = 0
    max_steps: int = 100_000

    def __post_init__(self):
        if self.runs is None:
            if self.epsilon is None or self.delta is None:
                raise ValueError("need runs or an (epsilon, delta) pair")
            if not (0 < self.epsilon < 1 and 0 < self.delta < 1):
                raise ValueError("epsilon and delta must lie in (0, 1)")
        elif self.runs < 1:
            raise ValueError("runs must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def n_runs(self) -> int:
        if self.runs is not None:
            return self.runs
        return math.ceil(math.log(2 / self.delta) / (2 * self.epsilon ** 2))


@dataclass(frozen=True)
class LssConfig:
    """Lightweight scheduler sampling settings.

    ``m`` scheduler ids are drawn uniformly (with replacement) from
    ``sampler_seed``; each is evaluated with one full ``inner`` estimate.
    """

    m: int
    mode: str = "global"  # "global" | "distributed"
    direction: Direction = Direction.MAX
    inner: SmcConfig = field(default_factory=lambda: SmcConfig(runs=1000))
    sampler_seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.mode not in ("global", "distributed"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class SmcEstimate:
    """Estimated probability with a confidence interval.

    The interval is the (epsilon, delta) guarantee when the run count was
    Okamoto-sized, otherwise a 95% normal approximation.
    """

    mean: float
    ci_low: float
    ci_high: float
    runs: int
    truncated: int = 0

    def __post_init__(self):
        if not (self.ci_low <= self.mean <= self.ci_high):
            raise ValueError("confidence interval does not bracket the mean")

    @property
    def half_width(self) -> float:
        return max(self.ci_high - self.mean, self.mean - self.ci_low)


@dataclass(frozen=True)
class RunOutcome:
    """One simulation run: did it hit the target, and how far did it get."""

    hit: bool
    steps: int
    elapsed: float
    truncated: bool = False


@dataclass(frozen=True)
class LssResult:
    """Best sampled scheduler id with its estimate and the whole table."""

    best_id: int
    best: SmcEstimate
    table: tuple[tuple[int, SmcEstimate], ...]
    mode: str
    distinct_behaviors: int


class NotGoodForDistribution(ValueError):
    """Distributed-mode sampling on a model with shared decisions."""

    def __init__(self, states: list[int]):
        preview = states[:20]
        super().__init__(
            "model is not good for distribution: states "
            f"{preview}{'...' if len(states) > len(preview) else ''} have "
            "choices owned by more than one component")
        self.states = states


# --------------------------------------------------------------------------
# simulation

Resolver = Callable[[int], int]


def _sample_index(rng: Random, pairs, total: float) -> int:
    """Sample a (weight, target) list proportionally to weight."""
    u = rng.random() * total
    acc = 0.0
    for w, t in pairs:
        acc += w
        if u < acc:
            return t
    return pairs[-1][1]


def simulate_run(
    space: ExplicitStateSpace,
    resolver: Resolver | None,
    prop: Property,
    seed: int,
    *,
    max_steps: int = 100_000,
) -> RunOutcome:
    """Simulate one path; all randomness comes from ``seed``.

    Markovian states sample an Exp(exit_rate) sojourn and a successor by
    rate proportion; immediate states ask the resolver when there are two
    or more choices, then sample the branch.  The outcome is a hit when a
    target state is entered within the property's bound (steps for
    step-bounded, minutes for time-bounded, ``max_steps`` as a safety net
    for unbounded properties — exceeding it records a truncated miss).
    """
    if prop.kind is PropertyKind.EXPECTED_TIME:
        raise ValueError("expected-time properties are not simulated; "
                         "use the numeric analysis")
    if prop.kind is PropertyKind.TIME_BOUNDED_REACH_PROB \
            and space.model_class is not ModelClass.MA:
        raise ValueError("time bounds need an MA model")
    if prop.kind is PropertyKind.STEP_BOUNDED_REACH_PROB \
            and space.model_class is ModelClass.MA:
        raise ValueError("step bounds need a DTMC or MDP model")
    mask = prop.target if isinstance(prop.target, np.ndarray) \
        else target_mask(space, prop.target)
    rng = Random(seed)
    state = space.initial
    steps = 0
    elapsed = 0.0
    step_bound = prop.bound if prop.kind is PropertyKind.STEP_BOUNDED_REACH_PROB else None
    time_bound = prop.bound if prop.kind is PropertyKind.TIME_BOUNDED_REACH_PROB else None

    while True:
        if mask[state]:
            return RunOutcome(True, steps, elapsed)
        if step_bound is not None and steps >= step_bound:
            return RunOutcome(False, steps, elapsed)
        if steps >= max_steps:
            return RunOutcome(False, steps, elapsed, truncated=True)
        choices = space.choices[state]
        if choices:
            k = len(choices)
            if k == 1:
                idx = 0
            else:
                if resolver is None:
                    raise ValueError(
                        f"state {state} has {k} choices but no resolver "
                        "was supplied")
                idx = resolver(state)
            dist = choices[idx].distribution
            if all(t == state for _, t in dist.branches):
                # pure self-loop under a memoryless resolver: the state can
                # never change again, so this is a definitive miss
                return RunOutcome(False, steps, elapsed)
            state = _sample_index(rng, dist.branches, 1.0)
        else:
            mk = space.markovian[state]
            if mk is None or mk.masked \
                    or all(t == state for _, t in mk.entries):
                # absorbing non-target state: the run can never succeed
                return RunOutcome(False, steps, elapsed)
            sojourn = -math.log(1.0 - rng.random()) / mk.exit_rate
            elapsed += sojourn
            if time_bound is not None and elapsed > time_bound:
                return RunOutcome(False, steps, elapsed)
            state = _sample_index(rng, mk.entries, mk.exit_rate)
        steps += 1


def estimate(
    space: ExplicitStateSpace,
    resolver: Resolver | None,
    prop: Property,
    cfg: SmcConfig,
    *,
    workers: int = 1,
    constants: dict | None = None,
) -> SmcEstimate:
    """Monte Carlo estimate of a reachability property.

    Per-run seeds depend only on (master_seed, run index), and aggregation
    is a commutative sum, so the result is identical for any ``workers``.
    """
    n = cfg.n_runs()
    mask = target_mask(space, prop.target, constants)
    resolved = Property(prop.kind, prop.direction, mask, prop.bound,
                        prop.text)

    def run_block(lo: int, hi: int) -> tuple[int, int]:
        hits = truncated = 0
        for r in range(lo, hi):
            out = simulate_run(space, resolver, resolved,
                               run_seed(cfg.master_seed, r),
                               max_steps=cfg.max_steps)
            hits += out.hit
            truncated += out.truncated
        return hits, truncated

    if workers <= 1:
        blocks = [run_block(0, n)]
    else:
        bounds = [(i * n // workers, (i + 1) * n // workers)
                  for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda b: run_block(*b), bounds))
    hits = sum(b[0] for b in blocks)
    truncated = sum(b[1] for b in blocks)

    mean = hits / n
    if cfg.runs is None:
        half = cfg.epsilon
    else:
        half = 1.96 * math.sqrt(mean * (1.0 - mean) / n)
    return SmcEstimate(
        mean=mean,
        ci_low=max(0.0, mean - half),
        ci_high=min(1.0, mean + half),
        runs=n,
        truncated=truncated,
    )


# --------------------------------------------------------------------------
# lightweight scheduler sampling


def sample_scheduler_ids(sampler_seed: int, m: int) -> list[int]:
    """m uniform 32-bit scheduler ids (with replacement)."""
    rng = Random(sampler_seed)
    return [rng.getrandbits(32) for _ in range(m)]


def _projections(space: ExplicitStateSpace, mode: str) -> dict[int, bytes]:
    """Per decision state: the encoded observation the scheduler hashes."""
    out: dict[int, bytes] = {}
    for s in range(space.n_states):
        if len(space.choices[s]) < 2:
            continue
        if mode == "global":
            out[s] = encode_state(space, s, "all")
        else:
            owner = scheduler_owner(space, s)
            out[s] = encode_state(space, s, space.observed_indices(owner))
    return out


def _behavior_signature(
    space: ExplicitStateSpace, decisions: dict[int, int]
) -> tuple[tuple[int, int], ...]:
    """Decisions at the decision states reachable under those decisions.

    Two scheduler ids with equal signatures make identical choices on every
    path that can occur, so (under common run seeds) their estimates are
    bit-identical and can be shared.
    """
    seen = {space.initial}
    stack = [space.initial]
    sig = []
    while stack:
        s = stack.pop()
        cs = space.choices[s]
        succs: Iterable[int]
        if cs:
            idx = decisions.get(s, 0)
            if len(cs) >= 2:
                sig.append((s, idx))
            succs = (t for _, t in cs[idx].distribution.branches)
        else:
            mk = space.markovian[s]
            succs = (t for _, t in mk.entries) if mk is not None \
                and not mk.masked else ()
        for t in succs:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return tuple(sorted(sig))


def lss(
    space: ExplicitStateSpace,
    prop: Property,
    cfg: LssConfig,
    *,
    workers: int = 1,
    constants: dict | None = None,
) -> LssResult:
    """Sample m scheduler ids and keep the best estimate.

    direction=max keeps the maximum estimate (an underapproximation of the
    true maximum, since only m schedulers are tried); min keeps the minimum
    (an overapproximation of the true minimum).  ``distributed`` mode
    requires the model to be good for distribution and hashes only the
    owner's observed variables, ``global`` mode hashes the full state.
    """
    if cfg.mode == "distributed":
        violations = check_good_for_distribution(space)
        if violations:
            raise NotGoodForDistribution(violations)
    projections = _projections(space, cfg.mode)
    ids = sample_scheduler_ids(cfg.sampler_seed, cfg.m)

    cache: dict[tuple, SmcEstimate] = {}
    table: list[tuple[int, SmcEstimate]] = []
    for sid in ids:
        decisions = {
            s: lss_decide(sid, obs, len(space.choices[s]))
            for s, obs in projections.items()
        }
        sig = _behavior_signature(space, decisions)
        est = cache.get(sig)
        if est is None:
            est = estimate(space, decisions.__getitem__, prop, cfg.inner,
                           workers=workers, constants=constants)
            cache[sig] = est
        table.append((sid, est))

    best_i = 0
    for i, (_, est) in enumerate(table):
        if cfg.direction is Direction.MAX:
            if est.mean > table[best_i][1].mean:
                best_i = i
        elif est.mean < table[best_i][1].mean:
            best_i = i
    return LssResult(
        best_id=table[best_i][0],
        best=table[best_i][1],
        table=tuple(table),
        mode=cfg.mode,
        distinct_behaviors=len(cache),
    )
