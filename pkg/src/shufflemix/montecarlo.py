"""Sampling estimators and executable coupling constructions.

Everything here simulates only the positions of the tracked cards, never
whole decks: a transposition at (left, right) moves a tracked card iff it
sits at one of the two positions, so a size-k position vector is a faithful
state. All routines draw from per-block substreams of one master stream:
trials are processed in fixed blocks of ``_TRIAL_BLOCK``, block b using
``stream.substream(b)``, with a fixed draw schedule per step (left hand
first, then right hand, then any construction-specific draws). Results
therefore depend only on (master seed, parameters), not on how blocks
would be scheduled across workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .deck import Permutation, ShuffleKind, ShuffleRule
from .errors import CapExceededError, ParameterError
from .indexing import DEFAULT_STATE_CAP, KTupleIndexer
from .rng import DEFAULT_SEED, RandomStream

_TRIAL_BLOCK = 16384


@dataclass(frozen=True)
class MCEstimate:
    """A point estimate with its standard error and run metadata."""

    value: float
    std_error: float
    samples: int
    seed: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.std_error < 0.0:
            raise ParameterError("std_error must be non-negative")
        if self.samples < 1:
            raise ParameterError("samples must be at least 1")


@dataclass(frozen=True)
class BoundFit:
    """A multiplicative constant fitted so constant * shape >= data.

    ``shape`` names the formula the constant multiplies; residuals are
    constant * shape - data per grid point (all non-negative when the fit
    certifies the bound).
    """

    constant: float
    shape: str
    residuals: np.ndarray


@dataclass(frozen=True)
class KDeckCouplingParams:
    """Sizes and coin bias for the k-deck coupling simulator."""

    n: int
    k: int
    horizon: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"need k >= 1 tracked cards, got {self.k}")
        if self.n <= self.k:
            raise ParameterError(
                f"need n > k (a non-special card must exist), got n={self.n}, k={self.k}"
            )
        if self.horizon is None:
            object.__setattr__(self, "horizon", 20 * self.n)
        if self.horizon < 1:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        p = self.coin_p
        if not 0.0 < p <= 1.0 + 1e-12:
            raise ParameterError(
                f"coin bias 1/(k/n + (1-1/n)^k) = {p!r} is outside (0, 1]; "
                f"k={self.k} is too large for n={self.n}"
            )

    @property
    def coin_p(self) -> float:
        n, k = self.n, self.k
        return 1.0 / (k / n + (1.0 - 1.0 / n) ** k)


@dataclass(frozen=True)
class CouplingResult:
    """Per-trial coupling times from a two-deck simulation.

    ``match_times[i]`` is the first step after which the tracked card sits
    at the same position in both decks (0 when already matched at the
    start); ``designed_times`` is the first step the construction's
    designated success event fires (the right hand landing on the second
    deck's copy), recorded only by the one-sided coupling. -1 marks a
    trial censored at the horizon.
    """

    kind: str
    n: int
    trials: int
    horizon: int
    seed: int
    match_times: np.ndarray
    designed_times: np.ndarray | None
    final_positions: np.ndarray
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class KDeckCouplingResult:
    """Mismatch statistics from the (k+1)-deck coupling simulation."""

    params: KDeckCouplingParams
    cards: tuple
    trials: int
    seed: int
    diagnostic: bool
    mismatch_times: np.ndarray  # first step the matching breaks; -1 = never
    situation_counts: np.ndarray  # (trials, 4) occurrences of each risk situation
    r0_histogram: np.ndarray
    details: dict = field(default_factory=dict)


def _as_stream(rng) -> RandomStream:
    if rng is None:
        return RandomStream(DEFAULT_SEED)
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(int(rng))


def _blocks(trials: int):
    lo = 0
    index = 0
    while lo < trials:
        size = min(_TRIAL_BLOCK, trials - lo)
        yield index, lo, size
        lo += size
        index += 1


def _left_positions(rule: ShuffleRule, t: int, gen, size: int):
    """Left-hand position(s) at step t: a scalar for deterministic rules,
    one value per trial otherwise."""
    if rule.kind is ShuffleKind.TOP_TO_RANDOM:
        return 1
    if rule.kind is ShuffleKind.CYCLIC_TO_RANDOM:
        return rule.cyclic_position(t)
    if rule.kind is ShuffleKind.RANDOM_TO_RANDOM:
        return gen.integers(1, rule.n + 1, size=size)
    probs = rule.left_distribution(t)
    return gen.choice(rule.n, size=size, p=probs) + 1


def _swap_positions(pos: np.ndarray, left, right) -> np.ndarray:
    """Apply the transposition (left, right) to an array of positions.

    ``pos`` has trials along axis 0; left/right are scalars or per-trial
    vectors and broadcast across the remaining axes.
    """
    l = np.asarray(left)
    r = np.asarray(right)
    if l.ndim:
        l = l.reshape(l.shape + (1,) * (pos.ndim - 1))
    if r.ndim:
        r = r.reshape(r.shape + (1,) * (pos.ndim - 1))
    hit_l = pos == l
    hit_r = pos == r
    out = np.where(hit_l, np.broadcast_to(r, pos.shape), pos)
    return np.where(hit_r & ~hit_l, np.broadcast_to(l, pos.shape), out)


def _start_positions(cards, start, n: int) -> np.ndarray:
    cards = np.asarray(cards, dtype=np.int64)
    if cards.ndim != 1 or cards.size == 0:
        raise ParameterError("cards must be a non-empty 1-d sequence")
    if np.unique(cards).size != cards.size:
        raise ParameterError("cards must be distinct")
    if cards.min() < 1 or cards.max() > n:
        raise ParameterError(f"cards must lie in 1..{n}")
    if start is None:
        return cards
    if isinstance(start, Permutation):
        return np.asarray(start.positions_of(cards.tolist()), dtype=np.int64)
    pos = np.asarray(start, dtype=np.int64)
    if pos.shape != cards.shape:
        raise ParameterError("start positions must align with cards")
    return pos


# ---------------------------------------------------------------------------
# plug-in TV estimator


def plugin_tv_from_counts(counts: np.ndarray, samples: int):
    """Plug-in TV to uniform from a frequency table, with delta-method SE."""
    n_states = counts.size
    p_hat = counts / samples
    diff = p_hat - 1.0 / n_states
    tv = 0.5 * float(np.abs(diff).sum())
    sign = np.where(diff >= 0.0, 1.0, -1.0)
    g = float(np.sum(sign * p_hat))
    se = math.sqrt(max(1.0 - g * g, 0.0) / (4.0 * samples))
    return tv, se


def mc_tv_plugin(
    rule: ShuffleRule,
    n: int,
    k: int,
    cards,
    start,
    t: int,
    samples: int,
    rng=None,
    cap: int = DEFAULT_STATE_CAP,
) -> MCEstimate:
    """Monte Carlo plug-in estimate of the k-card TV distance to uniform.

    Simulates ``samples`` independent trajectories of the tracked cards'
    positions for t steps, tabulates the final k-tuples, and returns
    (1/2) sum_s |f_s/M - 1/N|. The estimator is biased upward by roughly
    sqrt(N/(2 pi M)); the bias is reported, not corrected.
    """
    if rule.n != n:
        raise ParameterError(f"rule is for n={rule.n}, got n={n}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    if samples < 1:
        raise ParameterError(f"samples must be positive, got {samples}")
    if cards is None:
        cards = np.arange(1, k + 1)
    if len(cards) != k:
        raise ParameterError(f"expected {k} cards, got {len(cards)}")
    try:
        indexer = KTupleIndexer(n, k, cap=cap)
    except CapExceededError as exc:
        raise CapExceededError(
            f"{exc}; the frequency table is too large, use the "
            "statistic-based lower bound instead"
        ) from None
    start_pos = _start_positions(cards, start, n)
    stream = _as_stream(rng)
    if samples < 100 * indexer.count:
        warnings.warn(
            f"samples={samples} is below 100x the state count "
            f"{indexer.count}; the plug-in estimate will be bias-dominated",
            stacklevel=2,
        )
    counts = np.zeros(indexer.count, dtype=np.int64)
    for b, _, size in _blocks(samples):
        gen = stream.substream(b).generator
        pos = np.tile(start_pos, (size, 1))
        for s in range(1, t + 1):
            left = _left_positions(rule, s, gen, size)
            right = gen.integers(1, n + 1, size=size)
            pos = _swap_positions(pos, left, right)
        codes = indexer.encode_many(pos - 1)
        counts += np.bincount(codes, minlength=indexer.count)
    tv, se = plugin_tv_from_counts(counts, samples)
    details = {
        "state_count": int(indexer.count),
        "bias_estimate": math.sqrt(indexer.count / (2.0 * math.pi * samples)),
        "bias_note": "plug-in TV is biased upward by O(sqrt(states/samples))",
        "undersampled": samples < 100 * indexer.count,
    }
    return MCEstimate(
        value=tv,
        std_error=se,
        samples=samples,
        seed=stream.master_seed,
        details=details,
    )


# ---------------------------------------------------------------------------
# distinguishing-statistic lower bound


def uniform_fixed_point_tail(n: int, k: int, threshold: int) -> float:
    """P(more than ``threshold`` of k given cards are fixed) under a
    uniform permutation of n cards, by inclusion-exclusion."""
    if not 0 < k <= n:
        raise ParameterError(f"need 0 < k <= n, got k={k}, n={n}")
    total = 0.0
    for j in range(threshold + 1, k + 1):
        acc = 0.0
        for i in range(0, k - j + 1):
            falling = 1.0
            for step_ in range(j + i):
                falling *= n - step_
            acc += (-1.0) ** i * math.comb(k - j, i) / falling
        total += math.comb(k, j) * acc
    return total


def tv_lower_bound_fixed_cards(
    rule: ShuffleRule,
    n: int,
    k: int,
    t: int,
    c_threshold: int,
    samples: int,
    rng=None,
) -> MCEstimate:
    """TV lower bound from the never-touched-cards statistic.

    Tracks k cards starting in the bottom k positions; X_t counts those
    never selected by either hand up to t (such a card still sits at its
    start position, so {X_t > C} implies {more than C of the k cards
    fixed}). The bound is |Phat(X_t > C) - P_uniform(fixed count > C)|,
    the uniform tail computed exactly.
    """
    if rule.n != n:
        raise ParameterError(f"rule is for n={rule.n}, got n={n}")
    if c_threshold < 1:
        raise ParameterError(f"threshold must be at least 1, got {c_threshold}")
    if samples < 1:
        raise ParameterError(f"samples must be positive, got {samples}")
    if not 0 < k <= n:
        raise ParameterError(f"need 0 < k <= n, got k={k}")
    start_pos = np.arange(n - k + 1, n + 1, dtype=np.int64)
    stream = _as_stream(rng)
    exceed = 0
    sum_x = 0.0
    sum_x2 = 0.0
    exceed_fixed = 0
    for b, _, size in _blocks(samples):
        gen = stream.substream(b).generator
        pos = np.tile(start_pos, (size, 1))
        touched = np.zeros((size, k), dtype=bool)
        for s in range(1, t + 1):
            left = _left_positions(rule, s, gen, size)
            right = gen.integers(1, n + 1, size=size)
            l_arr = np.asarray(left)
            l_col = l_arr[:, None] if l_arr.ndim else l_arr
            touched |= (pos == l_col) | (pos == right[:, None])
            pos = _swap_positions(pos, left, right)
        x = k - touched.sum(axis=1)
        fixed = (pos == start_pos).sum(axis=1)
        exceed += int(np.count_nonzero(x > c_threshold))
        exceed_fixed += int(np.count_nonzero(fixed > c_threshold))
        sum_x += float(x.sum())
        sum_x2 += float((x.astype(np.float64) ** 2).sum())
    p_hat = exceed / samples
    tail = uniform_fixed_point_tail(n, k, c_threshold)
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / samples) / samples)
    mean_x = sum_x / samples
    var_x = sum_x2 / samples - mean_x * mean_x
    details = {
        "p_hat": p_hat,
        "p_hat_fixed": exceed_fixed / samples,
        "uniform_tail": tail,
        "mean_statistic": mean_x,
        "var_statistic": var_x,
        "threshold": int(c_threshold),
        "start_positions": start_pos.tolist(),
    }
    return MCEstimate(
        value=abs(p_hat - tail),
        std_error=se,
        samples=samples,
        seed=stream.master_seed,
        details=details,
    )


# ---------------------------------------------------------------------------
# two-deck couplings for one tracked card


def _resolve_start_pair(start_pair, card: int, n: int):
    if start_pair is None:
        return 1, None
    if len(start_pair) != 2:
        raise ParameterError("start_pair must have two entries")
    resolved = []
    for entry in start_pair:
        if entry is None:
            resolved.append(None)
            continue
        if isinstance(entry, Permutation):
            resolved.append(entry.position_of(card))
            continue
        value = int(entry)
        if not 1 <= value <= n:
            raise ParameterError(f"start position {value} outside 1..{n}")
        resolved.append(value)
    if resolved[0] is None:
        raise ParameterError("the first deck's start position must be given")
    return resolved[0], resolved[1]


def couple_one_card(
    rule: ShuffleRule,
    n: int,
    card: int,
    start_pair=None,
    horizon: int | None = None,
    trials: int = 100_000,
    rng=None,
) -> CouplingResult:
    """Two decks, shared left hand, right hand mirrored across the pair.

    Deck two always selects position R; deck one selects R unless R hits
    one of the two copies of the tracked card, in which case the choices
    are swapped so the card is either chosen in both decks (R on deck
    two's copy: the designed success event, Geometric(1/n)) or in neither.
    Both realized co-location times and designed success times are
    returned; each deck's right-hand choice stays uniform, which the
    result's tallies verify.
    """
    if rule.n != n:
        raise ParameterError(f"rule is for n={rule.n}, got n={n}")
    if not 1 <= card <= n:
        raise ParameterError(f"card must lie in 1..{n}, got {card}")
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    if horizon is None:
        horizon = 20 * n
    x0, y0 = _resolve_start_pair(start_pair, card, n)
    stream = _as_stream(rng)
    designed_all = []
    match_all = []
    finals = []
    hist_one = np.zeros(n, dtype=np.int64)
    hist_two = np.zeros(n, dtype=np.int64)
    for b, _, size in _blocks(trials):
        gen = stream.substream(b).generator
        x = np.full(size, x0, dtype=np.int64)
        y = (
            gen.integers(1, n + 1, size=size)
            if y0 is None
            else np.full(size, y0, dtype=np.int64)
        )
        designed = np.full(size, -1, dtype=np.int64)
        match = np.where(x == y, 0, -1).astype(np.int64)
        for s in range(1, horizon + 1):
            left = _left_positions(rule, s, gen, size)
            right = gen.integers(1, n + 1, size=size)
            fires = (designed < 0) & (right == y)
            designed[fires] = s
            r_one = np.where(right == x, y, np.where(right == y, x, right))
            hist_one += np.bincount(r_one - 1, minlength=n)
            hist_two += np.bincount(right - 1, minlength=n)
            x = _swap_positions(x, left, r_one)
            y = _swap_positions(y, left, right)
            newly = (match < 0) & (x == y)
            match[newly] = s
        designed_all.append(designed)
        match_all.append(match)
        finals.append(np.stack([x, y], axis=1))
    designed = np.concatenate(designed_all)
    match = np.concatenate(match_all)
    chi_one = stats.chisquare(hist_one)
    chi_two = stats.chisquare(hist_two)
    details = {
        "right_hist_deck_one": hist_one,
        "right_hist_deck_two": hist_two,
        "chisq_p_deck_one": float(chi_one.pvalue),
        "chisq_p_deck_two": float(chi_two.pvalue),
        "censored_designed": int(np.count_nonzero(designed < 0)),
        "censored_match": int(np.count_nonzero(match < 0)),
        "start_pair": (x0, y0),
        "card": card,
    }
    return CouplingResult(
        kind="one-card",
        n=n,
        trials=trials,
        horizon=horizon,
        seed=stream.master_seed,
        match_times=match,
        designed_times=designed,
        final_positions=np.concatenate(finals),
        details=details,
    )


def couple_two_hands_random(
    n: int,
    card: int,
    start_pair=None,
    horizon: int | None = None,
    trials: int = 100_000,
    rng=None,
) -> CouplingResult:
    """Both hands mirrored between two decks of the uniform-left rule.

    Deck two's hands are deck one's with the two copies' positions
    swapped, so an unmatched pair matches exactly when one hand lands on
    deck one's copy while the other hand misses both copies: probability
    2(1 - 2/n)/n per step, twice the one-sided rate.
    """
    if n < 2:
        raise ParameterError(f"deck size must be at least 2, got {n}")
    if not 1 <= card <= n:
        raise ParameterError(f"card must lie in 1..{n}, got {card}")
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    if horizon is None:
        horizon = 20 * n
    x0, y0 = _resolve_start_pair(start_pair, card, n)
    stream = _as_stream(rng)
    match_all = []
    finals = []
    hist_left = np.zeros(n, dtype=np.int64)
    hist_right = np.zeros(n, dtype=np.int64)
    for b, _, size in _blocks(trials):
        gen = stream.substream(b).generator
        x = np.full(size, x0, dtype=np.int64)
        y = (
            gen.integers(1, n + 1, size=size)
            if y0 is None
            else np.full(size, y0, dtype=np.int64)
        )
        match = np.where(x == y, 0, -1).astype(np.int64)
        for s in range(1, horizon + 1):
            left = gen.integers(1, n + 1, size=size)
            right = gen.integers(1, n + 1, size=size)
            m_left = np.where(left == x, y, np.where(left == y, x, left))
            m_right = np.where(right == x, y, np.where(right == y, x, right))
            hist_left += np.bincount(m_left - 1, minlength=n)
            hist_right += np.bincount(m_right - 1, minlength=n)
            x = _swap_positions(x, left, right)
            y = _swap_positions(y, m_left, m_right)
            newly = (match < 0) & (x == y)
            match[newly] = s
        match_all.append(match)
        finals.append(np.stack([x, y], axis=1))
    match = np.concatenate(match_all)
    chi_left = stats.chisquare(hist_left)
    chi_right = stats.chisquare(hist_right)
    details = {
        "chisq_p_mirrored_left": float(chi_left.pvalue),
        "chisq_p_mirrored_right": float(chi_right.pvalue),
        "censored_match": int(np.count_nonzero(match < 0)),
        "match_rate_per_step": 2.0 * (1.0 - 2.0 / n) / n,
        "start_pair": (x0, y0),
        "card": card,
    }
    return CouplingResult(
        kind="two-hand",
        n=n,
        trials=trials,
        horizon=horizon,
        seed=stream.master_seed,
        match_times=match,
        designed_times=None,
        final_positions=np.concatenate(finals),
        details=details,
    )


def survival_counts(times: np.ndarray, horizon: int) -> np.ndarray:
    """survivors[t] = number of trials still unmatched after step t,
    for t = 0..horizon; censored trials (-1) survive throughout."""
    times = np.asarray(times)
    finite = times[times >= 0]
    dead = np.cumsum(np.bincount(finite, minlength=horizon + 1)[: horizon + 1])
    return times.size - dead


# ---------------------------------------------------------------------------
# the (k+1)-deck coupling


def _crossed_risk(S: np.ndarray, R: np.ndarray, idx: np.ndarray, own: np.ndarray):
    """Risk flag for the designated reference deck idx (one per trial):
    its right hand lands on another tracked card in its own deck, or some
    other reference deck's right hand lands on that deck's own card."""
    size, k = R.shape
    rows = np.arange(size)
    deck_positions = S[rows, 1 + idx, :]
    eq = deck_positions == R[rows, idx][:, None]
    eq[rows, idx] = False
    other_position_hit = eq.any(axis=1)
    other_own_hit = (own.sum(axis=1) - own[rows, idx]) > 0
    return other_position_hit | other_own_hit


def couple_k_decks(
    rule: ShuffleRule,
    params: KDeckCouplingParams,
    cards,
    trials: int,
    rng=None,
    diagnostic: bool = False,
) -> KDeckCouplingResult:
    """Coupled deck versus k independent single-card reference decks.

    All k+1 decks share the left hand. Decks 1..k draw independent
    uniform right hands R^1..R^k; deck 0's right hand is built from them:
    if the left hand sits on one of deck 0's tracked cards, copy that
    card's reference deck; otherwise flip a coin with heads probability
    1/(k/n + (1-1/n)^k) - tails picks a tracked position of deck 0
    uniformly, heads draws U uniform on all positions and either copies
    the reference deck whose card U hit, redirects to a reference deck
    that just hit its own card (the set E), or keeps U. Deck 0's right
    hand stays uniform; trials stop at the first position mismatch unless
    ``diagnostic`` keeps them running for the situation counters.

    In the default mode broken trials are dropped from the simulated set
    and consume no further draws, so the draw stream depends on the
    mismatch history; it is still a pure function of seed and parameters.
    """
    n, k = params.n, params.k
    if rule.n != n:
        raise ParameterError(f"rule is for n={rule.n}, got n={n}")
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    cards = np.asarray(cards, dtype=np.int64)
    if cards.size != k:
        raise ParameterError(f"expected {k} cards, got {cards.size}")
    start_pos = _start_positions(cards, None, n)
    if k * k * math.log(max(params.horizon, 2)) >= n:
        warnings.warn(
            f"k^2 log(horizon) = {k * k * math.log(params.horizon):.1f} is not "
            f"small against n={n}; the mismatch bound will be weak",
            stacklevel=2,
        )
    p_heads = params.coin_p
    dtype = np.int32 if n < 2**31 - 1 else np.int64
    # the tracked non-special card for the uniformity spot-check
    extra_card = next(c for c in range(1, n + 1) if c not in set(cards.tolist()))
    stream = _as_stream(rng)
    horizon = params.horizon
    mismatch_all = []
    sits_all = []
    hist = np.zeros(n, dtype=np.int64)
    nonspecial_hits = 0
    steps_tallied = 0
    col = np.arange(k)
    for b, _, size in _blocks(trials):
        gen = stream.substream(b).generator
        S = np.broadcast_to(start_pos.astype(dtype), (size, k + 1, k)).copy()
        extra = np.full(size, extra_card, dtype=dtype)
        mismatch = np.full(size, -1, dtype=np.int64)
        sits = np.zeros((size, 4), dtype=np.int64)
        run_rows = np.arange(size)
        for s in range(1, horizon + 1):
            cur = run_rows.size
            if cur == 0:
                break
            left = _left_positions(rule, s, gen, cur)
            R = gen.integers(1, n + 1, size=(cur, k), dtype=dtype)
            coin = gen.random(cur)
            tails_idx = gen.integers(0, k, size=cur)
            u_draw = gen.integers(1, n + 1, size=cur, dtype=dtype)
            pick_draw = gen.random(cur)

            rows = np.arange(cur)
            left_arr = np.broadcast_to(np.asarray(left, dtype=dtype), (cur,))
            intact = (
                mismatch[run_rows] < 0
                if diagnostic
                else np.ones(cur, dtype=bool)
            )
            spec0 = S[:, 0, :]
            l_eq = spec0 == left_arr[:, None]
            l_any = l_eq.any(axis=1)
            l_idx = np.argmax(l_eq, axis=1)
            tails = coin >= p_heads
            ref_own_pos = S[rows[:, None], 1 + col[None, :], col[None, :]]
            own = R == ref_own_pos
            e_size = own.sum(axis=1)
            cum = np.cumsum(own, axis=1)
            target = np.floor(pick_draw * e_size).astype(np.int64) + 1
            pick = np.argmax((cum == target[:, None]) & own, axis=1)
            u_eq = spec0 == u_draw[:, None]
            u_any = u_eq.any(axis=1)
            u_idx = np.argmax(u_eq, axis=1)
            r0 = np.where(
                l_any,
                R[rows, l_idx],
                np.where(
                    tails,
                    spec0[rows, tails_idx],
                    np.where(
                        u_any,
                        R[rows, u_idx],
                        np.where(e_size > 0, R[rows, pick], u_draw),
                    ),
                ),
            )

            sit1 = l_any & _crossed_risk(S, R, l_idx, own)
            sit2 = ~l_any & tails & _crossed_risk(S, R, tails_idx, own)
            sit3 = ~l_any & ~tails & u_any & _crossed_risk(S, R, u_idx, own)
            sit4 = ~l_any & ~tails & ~u_any & (e_size > 1)
            sits[run_rows[sit1], 0] += 1
            sits[run_rows[sit2], 1] += 1
            sits[run_rows[sit3], 2] += 1
            sits[run_rows[sit4], 3] += 1

            # uniformity tallies only while the matching is intact
            hist += np.bincount(r0[intact] - 1, minlength=n)
            nonspecial_hits += int(np.count_nonzero((r0 == extra) & intact))
            steps_tallied += int(np.count_nonzero(intact))

            r_full = np.concatenate([r0[:, None], R], axis=1)
            l3 = left_arr[:, None, None]
            r3 = r_full[:, :, None]
            hit_l = S == l3
            hit_r = S == r3
            S = np.where(
                hit_l,
                np.broadcast_to(r3, S.shape),
                np.where(hit_r & ~hit_l, np.broadcast_to(l3, S.shape), S),
            )
            extra = _swap_positions(extra, left_arr, r0)

            ref_diag = S[rows[:, None], 1 + col[None, :], col[None, :]]
            broken = (ref_diag != S[:, 0, :]).any(axis=1)
            newly = broken & intact
            mismatch[run_rows[newly]] = s
            if not diagnostic and broken.any():
                keep = ~broken
                S = S[keep]
                extra = extra[keep]
                run_rows = run_rows[keep]
        mismatch_all.append(mismatch)
        sits_all.append(sits)
    mismatch = np.concatenate(mismatch_all)
    sits = np.concatenate(sits_all, axis=0)
    chi = stats.chisquare(hist) if hist.sum() else None
    rate = nonspecial_hits / steps_tallied if steps_tallied else float("nan")
    details = {
        "r0_chisq_p": float(chi.pvalue) if chi is not None else float("nan"),
        "nonspecial_card": int(extra_card),
        "nonspecial_hit_rate": rate,
        "nonspecial_hit_expected": 1.0 / n,
        "nonspecial_hit_se": (
            math.sqrt((1.0 / n) * (1.0 - 1.0 / n) / steps_tallied)
            if steps_tallied
            else float("nan")
        ),
        "steps_tallied": int(steps_tallied),
        "intact_at_horizon": int(np.count_nonzero(mismatch < 0)),
        "coin_p": p_heads,
    }
    return KDeckCouplingResult(
        params=params,
        cards=tuple(int(c) for c in cards),
        trials=trials,
        seed=stream.master_seed,
        diagnostic=diagnostic,
        mismatch_times=mismatch,
        situation_counts=sits,
        r0_histogram=hist,
        details=details,
    )


def fit_mismatch_bound(result: KDeckCouplingResult, times=None) -> BoundFit:
    """Fit the constant in front of t k^2/n^2 + k^2 log(t)/n so the bound
    dominates the empirical mismatch probability on the given time grid."""
    params = result.params
    n, k = params.n, params.k
    if times is None:
        times = np.unique(
            np.linspace(1, params.horizon, 32, dtype=np.int64)
        )
    times = np.asarray(times, dtype=np.int64)
    if times.min() < 1:
        raise ParameterError("fit times must be at least 1")
    survivors = survival_counts(result.mismatch_times, params.horizon)
    fail_prob = 1.0 - survivors[times] / result.trials
    shape = times * k * k / n**2 + k * k * np.log(times) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(shape > 0, fail_prob / shape, 0.0)
    constant = float(np.max(ratios)) if ratios.size else 0.0
    residuals = constant * shape - fail_prob
    return BoundFit(
        constant=constant,
        shape="t*k^2/n^2 + k^2*log(t)/n",
        residuals=residuals,
    )


# ---------------------------------------------------------------------------
# left-hand hit counting


def left_hand_hit_count(
    rule: ShuffleRule,
    n: int,
    k: int,
    cards,
    t: int,
    trials: int,
    rng=None,
) -> MCEstimate:
    """Mean number of times the left hand lands on a tracked card by t,
    with the implied constant against the envelope k (t/n + log t)."""
    if rule.n != n:
        raise ParameterError(f"rule is for n={rule.n}, got n={n}")
    if t < 1:
        raise ParameterError(f"t must be at least 1, got {t}")
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    if cards is None:
        cards = np.arange(1, k + 1)
    if len(cards) != k:
        raise ParameterError(f"expected {k} cards, got {len(cards)}")
    start_pos = _start_positions(cards, None, n)
    stream = _as_stream(rng)
    sum_hits = 0.0
    sum_hits2 = 0.0
    for b, _, size in _blocks(trials):
        gen = stream.substream(b).generator
        pos = np.tile(start_pos, (size, 1))
        hits = np.zeros(size, dtype=np.int64)
        for s in range(1, t + 1):
            left = _left_positions(rule, s, gen, size)
            right = gen.integers(1, n + 1, size=size)
            l_arr = np.asarray(left)
            l_col = l_arr[:, None] if l_arr.ndim else l_arr
            hits += (pos == l_col).sum(axis=1)
            pos = _swap_positions(pos, left, right)
        sum_hits += float(hits.sum())
        sum_hits2 += float((hits.astype(np.float64) ** 2).sum())
    mean = sum_hits / trials
    var = max(sum_hits2 / trials - mean * mean, 0.0)
    se = math.sqrt(var / trials)
    shape = k * (t / n + math.log(t))
    details = {
        "fit_constant": mean / shape,
        "fit_shape": "k*(t/n + log(t))",
        "shape_value": shape,
    }
    return MCEstimate(
        value=mean,
        std_error=se,
        samples=trials,
        seed=stream.master_seed,
        details=details,
    )
