"""Exact joint-location distributions for k tracked cards.

Tracking the positions of k chosen cards under a semi-random transposition
shuffle is itself a Markov chain on ordered k-tuples of distinct positions
(the card labels never matter, only where the tracked cards sit). This
module evolves that chain exactly: one step pushes mass along every
transposition the two hands can produce, weighted by the left-hand rule and
the uniform right hand. From the exact distribution we get total-variation
curves, worst-case-over-starts curves, partial mixing times, and cutoff
profiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import __version__ as _pkg_version
from .deck import ShuffleKind, ShuffleRule
from .errors import HorizonError, MassDriftError, ParameterError
from .indexing import DEFAULT_STATE_CAP, KTupleIndexer
from .rng import DEFAULT_SEED, RandomStream

MASS_TOL = 1e-10
# Largest #starts x #states product the exhaustive start scan will hold in RAM.
_EXHAUSTIVE_BUDGET = 9_000_000
_TARGET_CACHE_BUDGET = 40_000_000


def tv_distance(p, q) -> float:
    """Total variation distance, i.e. half the L1 distance."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ParameterError("distributions must have equal length")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass
class KTupleDistribution:
    """Probability vector over the indexer's ordered k-tuples."""

    indexer: KTupleIndexer
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (self.indexer.count,):
            raise ParameterError("probability vector has wrong length")
        self.validate()

    @classmethod
    def point_mass(cls, indexer: KTupleIndexer, positions) -> "KTupleDistribution":
        probs = np.zeros(indexer.count)
        probs[indexer.encode(positions)] = 1.0
        return cls(indexer, probs)

    def validate(self):
        if (self.probs < -MASS_TOL).any():
            raise MassDriftError("negative probability mass")
        drift = abs(float(self.probs.sum()) - 1.0)
        if drift > MASS_TOL:
            raise MassDriftError(f"probability mass drifted by {drift:.3e}")

    def tv_to_uniform(self) -> float:
        return tv_distance(self.probs, np.full(self.indexer.count, 1.0 / self.indexer.count))


def uniform_k_marginal(n: int, k: int, cap: int = DEFAULT_STATE_CAP) -> KTupleDistribution:
    """The uniform distribution on ordered distinct k-tuples (the fixed point)."""
    indexer = KTupleIndexer(n, k, cap=cap)
    return KTupleDistribution(indexer, np.full(indexer.count, 1.0 / indexer.count))


class LumpedEvolver:
    """One-step pushforward for the k-tuple location chain.

    For a state T = (p_1..p_k), a step transposes positions (L, R). The
    tuple changes only if the transposition touches a tracked position:
    moving card i to q happens through the ordered hand pairs (L=p_i, R=q)
    and (L=q, R=p_i) (the latter only counted when q is untracked, so the
    tracked-tracked swap is not double counted). Everything else is a
    self-loop of total weight (1 - l(T)) (n-k)/n where l(T) is the left
    rule's mass on the tracked positions.
    """

    def __init__(self, rule: ShuffleRule, k: int, cap: int = DEFAULT_STATE_CAP):
        self.rule = rule
        self.n = rule.n
        self.k = k
        self.indexer = KTupleIndexer(self.n, k, cap=cap)
        self._pos0 = self.indexer.all_positions0()
        self._cache_targets = self.indexer.count * k * self.n <= _TARGET_CACHE_BUDGET
        self._targets: dict = {}
        self._step_matrices: dict = {}

    # -- transposition targets ------------------------------------------------

    def _target(self, i: int, q: int) -> np.ndarray:
        """State index after transposing (p_i, q), vectorized over states."""
        key = (i, q)
        cached = self._targets.get(key)
        if cached is not None:
            return cached
        pos = self._pos0.astype(np.int64)
        old = pos[:, i].copy()
        hit = pos == q
        hit[:, i] = False
        rows = hit.any(axis=1)
        pos[hit] = old[rows]  # the tracked card that sat at q takes p_i
        pos[:, i] = q
        tgt = self.indexer.encode_many(pos)
        if self._cache_targets:
            self._targets[key] = tgt
        return tgt

    # -- single step ----------------------------------------------------------

    def step(self, probs: np.ndarray, t: int) -> np.ndarray:
        rule = self.rule
        if rule.kind is ShuffleKind.TOP_TO_RANDOM:
            return self._step_point_mass(probs, 0)
        if rule.kind is ShuffleKind.CYCLIC_TO_RANDOM:
            return self._step_point_mass(probs, rule.cyclic_position(t) - 1)
        lvec = rule.left_distribution(t)
        return self._step_general(probs, lvec)

    def _step_point_mass(self, probs: np.ndarray, left0: int) -> np.ndarray:
        n, k, count = self.n, self.k, self.indexer.count
        pos = self._pos0
        miss = ~(pos == left0).any(axis=1)
        new = probs * (miss * ((n - k) / n))
        w_miss = probs * miss / n
        for j in range(k):
            # right hand lands on tracked card j, which moves to the left slot
            new += np.bincount(self._target(j, left0), weights=w_miss, minlength=count)
        for i in range(k):
            idx = np.flatnonzero(pos[:, i] == left0)
            if idx.size == 0:
                continue
            # left hand holds card i: it moves to the uniform right position
            w = probs[idx] / n
            sub = pos[idx].astype(np.int64)
            old = sub[:, i].copy()
            for q in range(n):
                moved = sub.copy()
                hit = moved == q
                hit[:, i] = False
                rows = hit.any(axis=1)
                moved[hit] = old[rows]
                moved[:, i] = q
                np.add.at(new, self.indexer.encode_many(moved), w)
        return new

    def _step_general(self, probs: np.ndarray, lvec: np.ndarray) -> np.ndarray:
        n, k, count = self.n, self.k, self.indexer.count
        pos = self._pos0
        left_on_tracked = lvec[pos].sum(axis=1)
        new = probs * (1.0 - left_on_tracked) * ((n - k) / n)
        left_at = [lvec[pos[:, i]] for i in range(k)]
        for q in range(n):
            untracked_q = ~(pos == q).any(axis=1)
            lq = lvec[q] * untracked_q
            for i in range(k):
                w = probs * ((left_at[i] + lq) / n)
                new += np.bincount(self._target(i, q), weights=w, minlength=count)
        return new

    # -- sparse step matrices (for many simultaneous starts) -------------------

    def _matrix_key(self, t: int):
        rule = self.rule
        if rule.is_time_homogeneous:
            return 0
        if rule.kind is ShuffleKind.CYCLIC_TO_RANDOM:
            return rule.cyclic_position(t)
        return (t - 1) % len(rule.custom)

    def step_matrix_T(self, t: int) -> sp.csr_matrix:
        """Transposed one-step kernel K^T, so columns of K^T @ D evolve."""
        key = self._matrix_key(t)
        mat = self._step_matrices.get(key)
        if mat is not None:
            return mat
        n, k, count = self.n, self.k, self.indexer.count
        pos = self._pos0
        lvec = self.rule.left_distribution(t)
        src = [np.arange(count, dtype=np.int64)]
        dst = [np.arange(count, dtype=np.int64)]
        val = [(1.0 - lvec[pos].sum(axis=1)) * ((n - k) / n)]
        left_at = [lvec[pos[:, i]] for i in range(k)]
        for q in range(n):
            untracked_q = ~(pos == q).any(axis=1)
            lq = lvec[q] * untracked_q
            for i in range(k):
                w = (left_at[i] + lq) / n
                keep = np.flatnonzero(w)
                if keep.size == 0:
                    continue
                src.append(keep)
                dst.append(self._target(i, q)[keep])
                val.append(w[keep])
        mat = sp.coo_matrix(
            (np.concatenate(val), (np.concatenate(dst), np.concatenate(src))),
            shape=(count, count),
        ).tocsr()
        self._step_matrices[key] = mat
        return mat

    def evolve_columns(self, dense: np.ndarray, t: int) -> np.ndarray:
        return self.step_matrix_T(t) @ dense


def lumped_step(
    dist: KTupleDistribution, rule: ShuffleRule, t: int
) -> KTupleDistribution:
    """Push a k-tuple distribution through one shuffle step at time t."""
    if rule.n != dist.indexer.n:
        raise ParameterError("rule and distribution disagree on deck size")
    evolver = LumpedEvolver(rule, dist.indexer.k, cap=dist.indexer.cap)
    return KTupleDistribution(evolver.indexer, evolver.step(dist.probs, t))


def single_card_matrix(rule: ShuffleRule, t: int) -> np.ndarray:
    """Row-stochastic n x n one-step matrix for a single tracked card.

    Entry (p-1, q-1) is the chance a card at position p sits at q after the
    step. Row p mixes the two ways the card moves: its own position drawn by
    the left hand (then it follows the uniform right hand), or the right
    hand landing on it (then it jumps to the left slot).
    """
    n = rule.n
    lvec = rule.left_distribution(t)
    mat = (lvec[:, None] + lvec[None, :]) / n
    diag = lvec / n + (1.0 - lvec) * (1.0 - 1.0 / n)
    np.fill_diagonal(mat, diag)
    return mat


# -- curves -------------------------------------------------------------------


@dataclass
class TVCurve:
    """Total-variation values on a time grid, plus how they were computed."""

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ParameterError("times and values must align")

    def value_at(self, t: int) -> float:
        hits = np.flatnonzero(self.times == t)
        if hits.size == 0:
            raise ParameterError(f"t={t} not on the curve grid")
        return float(self.values[hits[0]])

    def to_csv(self, path, sidecar: bool = True):
        write_csv(path, "t,tv", zip(self.times.tolist(), self.values.tolist()))
        if sidecar:
            write_sidecar(path, self.metadata)


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: str, rows):
    """Write rows deterministically (repr floats, LF endings)."""
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def write_sidecar(path, metadata: dict):
    meta = dict(metadata)
    meta.setdefault("version", _pkg_version)
    with open(str(path) + ".meta.json", "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _check_times(times) -> np.ndarray:
    arr = np.asarray(list(times), dtype=np.int64)
    if arr.size == 0:
        raise ParameterError("need at least one time point")
    if (arr < 0).any():
        raise ParameterError("times must be non-negative")
    if (np.diff(arr) <= 0).any():
        raise ParameterError("times must be strictly increasing")
    return arr


def exact_tv_curve(
    rule: ShuffleRule,
    k: int,
    start,
    times,
    cap: int = DEFAULT_STATE_CAP,
) -> TVCurve:
    """Exact TV-to-uniform of the k tracked cards from one start tuple.

    ``start`` is the 1-based tuple of the tracked cards' initial positions;
    ``times`` the (strictly increasing) step counts to record.
    """
    times = _check_times(times)
    evolver = LumpedEvolver(rule, k, cap=cap)
    uniform = 1.0 / evolver.indexer.count
    probs = KTupleDistribution.point_mass(evolver.indexer, start).probs
    values = np.empty(times.size)
    cursor = 0
    if times[cursor] == 0:
        values[0] = 0.5 * np.abs(probs - uniform).sum()
        cursor += 1
    for t in range(1, int(times[-1]) + 1):
        probs = evolver.step(probs, t)
        if cursor < times.size and times[cursor] == t:
            drift = abs(float(probs.sum()) - 1.0)
            if drift > MASS_TOL:
                raise MassDriftError(f"probability mass drifted by {drift:.3e}")
            values[cursor] = 0.5 * np.abs(probs - uniform).sum()
            cursor += 1
    meta = _curve_metadata(rule, k, evolver, "single-start")
    meta["start"] = list(map(int, start))
    return TVCurve(times, values, meta)


def _curve_metadata(rule, k, evolver, strategy) -> dict:
    return {
        "rule": rule.kind.value,
        "n": rule.n,
        "k": k,
        "states": evolver.indexer.count,
        "cap": evolver.indexer.cap,
        "start_strategy": strategy,
    }


def canonical_starts(rule: ShuffleRule, k: int) -> list[tuple]:
    """Start tuples covering every worst-case class, when symmetry allows.

    With a uniform left hand all positions are exchangeable, so one start
    suffices. With the left hand pinned to the top, positions 2..n are
    exchangeable and classes are distinguished only by which coordinate (if
    any) sits at position 1.
    """
    n = rule.n
    if rule.kind is ShuffleKind.RANDOM_TO_RANDOM:
        return [tuple(range(1, k + 1))]
    if rule.kind is ShuffleKind.TOP_TO_RANDOM:
        pool = list(range(2, k + 1))
        reps = [tuple(range(2, k + 2))]
        for j in range(k):
            reps.append(tuple(pool[:j] + [1] + pool[j:]))
        return reps
    raise ParameterError(f"no canonical start classes for rule {rule.kind.value}")


def _sampled_starts(n: int, k: int, sample: int) -> list[tuple]:
    """Structured starts (contiguous, shifted, spread) plus a seeded sample."""
    cands = [tuple(range(1, k + 1)), tuple(range(2, k + 2))]
    shift = max(1, n // k)
    spread = tuple(1 + (j * shift) % n for j in range(k))
    if len(set(spread)) == k:
        cands.append(spread)
    starts, seen = [], set()
    for c in cands:
        if c not in seen:
            seen.add(c)
            starts.append(c)
    rng = RandomStream(DEFAULT_SEED, 977).generator
    while len(starts) < sample:
        cand = tuple(int(x) + 1 for x in rng.choice(n, size=k, replace=False))
        if cand not in seen:
            seen.add(cand)
            starts.append(cand)
    return starts


def worst_case_curve(
    rule: ShuffleRule,
    k: int,
    times,
    start_strategy: str = "auto",
    cap: int = DEFAULT_STATE_CAP,
    sample: int = 64,
) -> TVCurve:
    """Max-over-starts exact TV curve.

    For rules with an exchangeability argument the max runs over canonical
    class representatives and is the true worst case. Otherwise every start
    tuple is scanned when the state space is small enough, else a structured
    plus seeded random start set is used and the curve is only a lower bound
    on the true worst case (flagged in metadata).
    """
    times = _check_times(times)
    evolver = LumpedEvolver(rule, k, cap=cap)
    count = evolver.indexer.count

    if start_strategy == "auto":
        try:
            starts = canonical_starts(rule, k)
            strategy = "exact-canonical"
        except ParameterError:
            if count * count <= _EXHAUSTIVE_BUDGET:
                starts = None  # all of them, via the dense identity
                strategy = "exhaustive"
            else:
                starts = _sampled_starts(rule.n, k, sample)
                strategy = "sampled-lower-bound"
    elif start_strategy == "exhaustive":
        if count * count > _EXHAUSTIVE_BUDGET:
            raise ParameterError(
                f"exhaustive start scan needs {count}^2 cells, over the budget"
            )
        starts, strategy = None, "exhaustive"
    elif start_strategy == "canonical":
        starts, strategy = canonical_starts(rule, k), "exact-canonical"
    elif start_strategy == "sampled":
        starts = _sampled_starts(rule.n, k, sample)
        strategy = "sampled-lower-bound"
    else:
        raise ParameterError(f"unknown start strategy '{start_strategy}'")

    values = _max_tv_over_starts(evolver, starts, times)
    meta = _curve_metadata(rule, k, evolver, strategy)
    meta["lower_bound_only"] = strategy == "sampled-lower-bound"
    if starts is not None:
        meta["starts"] = len(starts)
    return TVCurve(times, values, meta)


def _max_tv_over_starts(evolver: LumpedEvolver, starts, times: np.ndarray) -> np.ndarray:
    count = evolver.indexer.count
    uniform = 1.0 / count
    if starts is None:
        dense = np.eye(count)
        values = np.empty(times.size)
        cursor = 0
        if times[cursor] == 0:
            values[0] = 1.0 - uniform
            cursor += 1
        for t in range(1, int(times[-1]) + 1):
            dense = evolver.evolve_columns(dense, t)
            if cursor < times.size and times[cursor] == t:
                values[cursor] = float(
                    0.5 * np.abs(dense - uniform).sum(axis=0).max()
                )
                cursor += 1
        return values
    dists = [
        KTupleDistribution.point_mass(evolver.indexer, s).probs for s in starts
    ]
    values = np.empty(times.size)
    cursor = 0
    if times[cursor] == 0:
        values[0] = 1.0 - uniform
        cursor += 1
    for t in range(1, int(times[-1]) + 1):
        dists = [evolver.step(d, t) for d in dists]
        if cursor < times.size and times[cursor] == t:
            values[cursor] = max(
                0.5 * float(np.abs(d - uniform).sum()) for d in dists
            )
            cursor += 1
    return values


@dataclass
class MixingTime:
    t: int
    tv: float
    epsilon: float
    horizon: int
    strategy: str


def partial_mixing_time(
    rule: ShuffleRule,
    k: int,
    epsilon: float,
    horizon: int | None = None,
    cap: int = DEFAULT_STATE_CAP,
    start_strategy: str = "auto",
) -> MixingTime:
    """Smallest t with worst-case exact TV below epsilon.

    Monotonicity is not assumed: the scan walks t upward and stops at the
    first time the threshold actually holds.
    """
    if not 0.0 < epsilon < 1.0:
        raise ParameterError("epsilon must lie in (0, 1)")
    n = rule.n
    if horizon is None:
        horizon = int(math.ceil(n * (math.log(max(k, 2)) + 4.0 * max(1.0, -math.log(epsilon)))))
    evolver = LumpedEvolver(rule, k, cap=cap)
    count = evolver.indexer.count
    uniform = 1.0 / count

    if start_strategy == "auto":
        try:
            starts = canonical_starts(rule, k)
            strategy = "exact-canonical"
        except ParameterError:
            if count * count <= _EXHAUSTIVE_BUDGET:
                starts, strategy = None, "exhaustive"
            else:
                starts = _sampled_starts(n, k, 64)
                strategy = "sampled-lower-bound"
    else:
        curve_strategy = start_strategy
        if curve_strategy == "canonical":
            starts, strategy = canonical_starts(rule, k), "exact-canonical"
        elif curve_strategy == "exhaustive":
            starts, strategy = None, "exhaustive"
        else:
            starts = _sampled_starts(n, k, 64)
            strategy = "sampled-lower-bound"

    tv = 1.0 - uniform
    if tv < epsilon:
        return MixingTime(0, tv, epsilon, horizon, strategy)
    if starts is None:
        state = np.eye(count)
        for t in range(1, horizon + 1):
            state = evolver.evolve_columns(state, t)
            tv = float(0.5 * np.abs(state - uniform).sum(axis=0).max())
            if tv < epsilon:
                return MixingTime(t, tv, epsilon, horizon, strategy)
    else:
        dists = [KTupleDistribution.point_mass(evolver.indexer, s).probs for s in starts]
        for t in range(1, horizon + 1):
            dists = [evolver.step(d, t) for d in dists]
            tv = max(0.5 * float(np.abs(d - uniform).sum()) for d in dists)
            if tv < epsilon:
                return MixingTime(t, tv, epsilon, horizon, strategy)
    raise HorizonError(
        f"worst-case TV still {tv:.6g} >= {epsilon} at the horizon {horizon}",
        last_value=tv,
    )


@dataclass
class CutoffProfile:
    alphas: np.ndarray
    times: np.ndarray
    values: np.ndarray
    bounds: np.ndarray
    metadata: dict

    def rows(self):
        return zip(
            self.alphas.tolist(),
            self.times.tolist(),
            self.values.tolist(),
            self.bounds.tolist(),
        )

    def to_csv(self, path, sidecar: bool = True):
        write_csv(path, "alpha,t,tv,bound", self.rows())
        if sidecar:
            write_sidecar(path, self.metadata)


def cutoff_profile(
    rule: ShuffleRule,
    k: int,
    alphas,
    cap: int = DEFAULT_STATE_CAP,
) -> CutoffProfile:
    """Worst-case TV at times center + alpha*n (rounded down).

    The center is n log k for the top rule and n log k / 2 for the uniform
    rule, where the sharp profiles e^{-alpha} and e^{-2 alpha} are the
    comparison bounds. Other rules center at 0.5006 n log k and carry the
    generic k e^{-t/n} bound, capped at 1.
    """
    alphas = np.asarray(list(alphas), dtype=float)
    if alphas.size == 0:
        raise ParameterError("need at least one alpha")
    n = rule.n
    if rule.kind is ShuffleKind.TOP_TO_RANDOM:
        center = n * math.log(k) if k > 1 else 0.0
        bound_fn = lambda a, t: math.exp(-a)
    elif rule.kind is ShuffleKind.RANDOM_TO_RANDOM:
        center = 0.5 * n * math.log(k) if k > 1 else 0.0
        bound_fn = lambda a, t: math.exp(-2.0 * a)
    else:
        center = 0.5006 * n * math.log(k) if k > 1 else 0.0
        bound_fn = lambda a, t: min(1.0, k * math.exp(-t / n))
    times = np.array([math.floor(center + a * n) for a in alphas], dtype=np.int64)
    if (times < 0).any():
        raise ParameterError("center + alpha*n must be non-negative after rounding")
    grid = np.unique(times)
    curve = worst_case_curve(rule, k, grid, cap=cap)
    tv_by_t = dict(zip(curve.times.tolist(), curve.values.tolist()))
    values = np.array([tv_by_t[int(t)] for t in times])
    bounds = np.array([bound_fn(a, t) for a, t in zip(alphas, times)])
    meta = dict(curve.metadata)
    meta.update({"center": center, "profile": "cutoff"})
    return CutoffProfile(alphas, times, values, bounds, meta)
