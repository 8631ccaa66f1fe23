"""Antenna-subset enumeration and the transmit-selection rules.

Every rule returns a :class:`SelectionOutcome` carrying the chosen subset,
its per-stream squared projection heights, and the decode order a
decision-feedback receiver should use (linear receivers ignore it).

Ties are broken toward the lexicographically smallest candidate so runs
are reproducible; under the continuous channel model ties have
probability zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import as_channel_matrix, projection_height_sq

#: Stable rule identifiers used by the CLI and in output files.
RULES = ("maxmin", "first-fixed", "first-ordered", "qr-greedy", "random")


@dataclass(frozen=True)
class AntennaSubset:
    """Strictly increasing transmit-column indices of one candidate subset."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("antenna subset cannot be empty")
        if min(idx) < 0 or any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"subset indices must be distinct, ascending and non-negative: {self.indices}")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SubsetMetrics:
    """Per-stream squared projection heights of a subset and their minimum.

    ``heights[i]`` is the squared height of column ``subset.indices[i]``
    against the span of the other selected columns; ``min_height`` is the
    weakest stream and governs high-SNR behaviour.
    """

    subset: AntennaSubset
    heights: tuple[float, ...]
    min_height: float


@dataclass(frozen=True)
class SelectionOutcome:
    """Chosen subset, its metrics, and the receiver decode order.

    ``decode_order`` is a permutation of stream positions 0..L-1 within
    the sorted subset; the first entry is decoded first.
    """

    rule: str
    subset: AntennaSubset
    metrics: SubsetMetrics
    decode_order: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.decode_order) != list(range(len(self.subset))):
            raise ValueError(f"decode_order {self.decode_order} is not a permutation of 0..{len(self.subset) - 1}")


def enumerate_subsets(n_t: int, L: int) -> list[AntennaSubset]:
    """All size-L column subsets of ``n_t`` antennas in lexicographic order.

    The first (n_t-1 choose L-1) subsets are exactly those containing
    column 0.
    """
    if L < 1:
        raise ValueError(f"subset size must be positive, got {L}")
    if L > n_t:
        raise ValueError(f"cannot choose {L} antennas out of {n_t}")
    return [AntennaSubset(c) for c in itertools.combinations(range(int(n_t)), int(L))]


def subset_metrics(H, subset: AntennaSubset) -> SubsetMetrics:
    """Per-stream squared projection heights for ``subset`` columns of ``H``."""
    H = as_channel_matrix(H)
    if H.shape[0] < len(subset):
        raise ValueError(f"need at least {len(subset)} receive rows, got {H.shape[0]}")
    idx = subset.indices
    heights = []
    for i, k in enumerate(idx):
        others = idx[:i] + idx[i + 1:]
        heights.append(projection_height_sq(H, k, others).height_sq)
    return SubsetMetrics(subset=subset, heights=tuple(heights), min_height=min(heights))


def _require_dims(H: np.ndarray, L: int) -> None:
    n_r, n_t = H.shape
    if L < 1 or n_t < L or n_r < L:
        raise ValueError(f"selection of {L} streams needs n_t >= {L} and n_r >= {L}, got {n_t}x{n_r}")


def select_maxmin(H, L: int) -> SelectionOutcome:
    """Pick the subset whose weakest stream (smallest height) is largest.

    This is the outage-optimal rule for linear receivers; the decode
    order defaults to the identity and callers may substitute an ordered
    one from the receivers module.
    """
    H = as_channel_matrix(H)
    _require_dims(H, L)
    best = None
    for subset in enumerate_subsets(H.shape[1], L):
        m = subset_metrics(H, subset)
        if best is None or m.min_height > best.min_height:
            best = m
    return SelectionOutcome("maxmin", best.subset, best, tuple(range(L)))


def select_first_layer_fixed(H) -> SelectionOutcome:
    """Two-stream rule maximizing the first decoded layer under fixed order.

    Decoding always starts from the smaller-index stream of the pair, so
    the rule maximizes the height of column k against column j over pairs
    k < j.
    """
    H = as_channel_matrix(H)
    _require_dims(H, 2)
    best_val, best_pair = -1.0, None
    for k, j in itertools.combinations(range(H.shape[1]), 2):
        val = projection_height_sq(H, k, (j,)).height_sq
        if val > best_val:
            best_val, best_pair = val, (k, j)
    subset = AntennaSubset(best_pair)
    return SelectionOutcome("first-fixed", subset, subset_metrics(H, subset), (0, 1))


def select_first_layer_ordered(H) -> SelectionOutcome:
    """Two-stream rule maximizing the first decoded layer over both orders.

    For each pair both heights are candidates; the stream achieving the
    maximum is decoded first.
    """
    H = as_channel_matrix(H)
    _require_dims(H, 2)
    best_val, best_pair, best_first = -1.0, None, 0
    for k, j in itertools.combinations(range(H.shape[1]), 2):
        h_kj = projection_height_sq(H, k, (j,)).height_sq
        h_jk = projection_height_sq(H, j, (k,)).height_sq
        val = max(h_kj, h_jk)
        if val > best_val:
            best_val, best_pair = val, (k, j)
            best_first = 0 if h_kj >= h_jk else 1
    subset = AntennaSubset(best_pair)
    order = (0, 1) if best_first == 0 else (1, 0)
    return SelectionOutcome("first-ordered", subset, subset_metrics(H, subset), order)


def select_qr_greedy(H, L: int) -> SelectionOutcome:
    """Incremental selection of the column with the largest projection
    height onto the complement of the already-selected span.

    Step one therefore picks the largest-norm column.  Detection runs in
    reverse selection order: the last-selected antenna's stream is
    decoded first.
    """
    H = as_channel_matrix(H)
    _require_dims(H, L)
    n_t = H.shape[1]
    selected: list[int] = []
    for _ in range(L):
        best_val, best_col = -1.0, None
        for j in range(n_t):
            if j in selected:
                continue
            val = projection_height_sq(H, j, selected).height_sq
            if val > best_val:
                best_val, best_col = val, j
        selected.append(best_col)
    subset = AntennaSubset(tuple(sorted(selected)))
    pos = {col: i for i, col in enumerate(subset.indices)}
    decode_order = tuple(pos[col] for col in reversed(selected))
    return SelectionOutcome("qr-greedy", subset, subset_metrics(H, subset), decode_order)


def select_random(H, L: int, rng: np.random.Generator) -> SelectionOutcome:
    """Uniformly random subset; the no-selection baseline."""
    H = as_channel_matrix(H)
    _require_dims(H, L)
    subsets = enumerate_subsets(H.shape[1], L)
    subset = subsets[int(rng.integers(0, len(subsets)))]
    return SelectionOutcome("random", subset, subset_metrics(H, subset), tuple(range(L)))


def select(rule: str, H, L: int, rng: np.random.Generator | None = None) -> SelectionOutcome:
    """Dispatch by rule identifier; ``rng`` is required for "random"."""
    if rule == "maxmin":
        return select_maxmin(H, L)
    if rule == "first-fixed":
        if L != 2:
            raise ValueError("first-fixed selection is defined for L = 2 only")
        return select_first_layer_fixed(H)
    if rule == "first-ordered":
        if L != 2:
            raise ValueError("first-ordered selection is defined for L = 2 only")
        return select_first_layer_ordered(H)
    if rule == "qr-greedy":
        return select_qr_greedy(H, L)
    if rule == "random":
        if rng is None:
            raise ValueError("random selection needs an explicit rng")
        return select_random(H, L, rng)
    raise ValueError(f"unknown selection rule {rule!r}; expected one of {RULES}")
