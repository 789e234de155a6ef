"""Weighted directed flow network and its descriptive statistics.

A :class:`FlowNetwork` indexes the accounts appearing in an aggregated link
set and stores the links as parallel integer arrays (source index,
destination index, flow in yen, transfer frequency).  The adjacency is
unweighted and self-loop free; both weights live on the link arrays.

Statistics follow the population convention throughout: moments divide by
n, skewness is m3 / m2^1.5 and kurtosis is the non-excess m4 / m2^2 (a
normal distribution scores 3, not 0).  CCDFs are computed over distinct
observed values with inclusive comparison, fraction(v) = P(x >= v).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _sps

from .ingest import AggregatedLink

__all__ = [
    "FlowNetwork",
    "SummaryStats",
    "Ccdf",
    "build_network",
    "degree_stats",
    "net_flow_per_node",
    "ccdf",
    "summary",
    "degree_correlation",
]


class DuplicateLinkError(ValueError):
    """An ordered pair appeared more than once in the link set."""


def _csr_from_edges(
    heads: np.ndarray, tails: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Group edges by head node: (indptr, neighbor array, edge-id array)."""
    order = np.lexsort((tails, heads))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, heads + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, tails[order], order


@dataclass(frozen=True)
class FlowNetwork:
    """Immutable node-indexed weighted directed graph.

    node_ids maps index -> account identifier (sorted lexicographically);
    src/dst/flow/freq are parallel int64 arrays of length M sorted by
    (src, dst).  M is the number of directed links, N the number of
    distinct accounts.
    """

    node_ids: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    flow: np.ndarray
    freq: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return int(self.src.shape[0])

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.node_ids)}

    @cached_property
    def _pair_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def has_link(self, i: int, j: int) -> bool:
        """Adjacency predicate A_ij for node indices i, j."""
        return (i, j) in self._pair_set

    @cached_property
    def out_adj(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, dst, link_id) grouped by source node."""
        return _csr_from_edges(self.src, self.dst, self.n_nodes)

    @cached_property
    def in_adj(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, src, link_id) grouped by destination node."""
        return _csr_from_edges(self.dst, self.src, self.n_nodes)

    def out_neighbors(self, i: int) -> np.ndarray:
        indptr, nbrs, _ = self.out_adj
        return nbrs[indptr[i] : indptr[i + 1]]

    def in_neighbors(self, i: int) -> np.ndarray:
        indptr, nbrs, _ = self.in_adj
        return nbrs[indptr[i] : indptr[i + 1]]

    def weights(self, kind: str) -> np.ndarray:
        """Per-link weight array B: 'flow' -> f_ij, 'frequency' -> g_ij."""
        if kind == "flow":
            return self.flow
        if kind == "frequency":
            return self.freq
        raise ValueError(f"unknown weight kind {kind!r}")

    def subnetwork(self, nodes: np.ndarray) -> tuple["FlowNetwork", np.ndarray]:
        """Induced subnetwork on the given node indices.

        Returns the subnetwork plus the array mapping subnetwork index ->
        original index (the sorted ``nodes``).
        """
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(nodes.size)
        keep = (remap[self.src] >= 0) & (remap[self.dst] >= 0)
        sub = FlowNetwork(
            node_ids=tuple(self.node_ids[i] for i in nodes.tolist()),
            src=remap[self.src[keep]],
            dst=remap[self.dst[keep]],
            flow=self.flow[keep].copy(),
            freq=self.freq[keep].copy(),
        )
        return sub, nodes


def build_network(links: Sequence[AggregatedLink] | Iterable[AggregatedLink]) -> FlowNetwork:
    """Index an aggregated link set into a :class:`FlowNetwork`.

    Raises :class:`DuplicateLinkError` on a repeated ordered pair (broken
    aggregation upstream) and ValueError on a self-loop.
    """
    links = list(links)
    names = sorted({l.source for l in links} | {l.destination for l in links})
    index = {name: i for i, name in enumerate(names)}
    m = len(links)
    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    flow = np.empty(m, dtype=np.int64)
    freq = np.empty(m, dtype=np.int64)
    for k, link in enumerate(links):
        if link.source == link.destination:
            raise ValueError(f"self-loop link {link.source!r} -> itself")
        src[k] = index[link.source]
        dst[k] = index[link.destination]
        flow[k] = link.flow
        freq[k] = link.frequency
    order = np.lexsort((dst, src))
    src, dst, flow, freq = src[order], dst[order], flow[order], freq[order]
    if m > 1:
        dup = (np.diff(src) == 0) & (np.diff(dst) == 0)
        if dup.any():
            k = int(np.flatnonzero(dup)[0])
            raise DuplicateLinkError(
                f"duplicate link {names[src[k]]!r} -> {names[dst[k]]!r}"
            )
    return FlowNetwork(node_ids=tuple(names), src=src, dst=dst, flow=flow, freq=freq)


def degree_stats(net: FlowNetwork) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node (in_degree, out_degree, net_degree = in - out)."""
    out_deg = np.bincount(net.src, minlength=net.n_nodes).astype(np.int64)
    in_deg = np.bincount(net.dst, minlength=net.n_nodes).astype(np.int64)
    return in_deg, out_deg, in_deg - out_deg


def net_flow_per_node(net: FlowNetwork, kind: str = "flow") -> np.ndarray:
    """Per-node incoming minus outgoing weight, exact int64 arithmetic.

    Sums to zero over all nodes because every link contributes once with
    each sign.
    """
    w = net.weights(kind)
    bal = np.zeros(net.n_nodes, dtype=np.int64)
    np.add.at(bal, net.dst, w)
    np.subtract.at(bal, net.src, w)
    return bal


@dataclass(frozen=True)
class Ccdf:
    """Complementary cumulative distribution over distinct observed values.

    fraction[k] = P(x >= value[k]); fractions are non-increasing, start at
    1.0 for the minimum observed value, and stay strictly positive.
    """

    values: np.ndarray
    fractions: np.ndarray


def ccdf(values: Iterable[float] | np.ndarray) -> Ccdf:
    """CCDF of a nonempty multiset, inclusive convention."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
    if arr.size == 0:
        raise ValueError("ccdf of an empty multiset is undefined")
    uniq, counts = np.unique(arr, return_counts=True)
    # count of x >= v for each distinct v: total minus count of strictly smaller
    below = np.concatenate(([0], np.cumsum(counts)[:-1]))
    frac = (arr.size - below) / arr.size
    return Ccdf(values=uniq, fractions=frac)


@dataclass(frozen=True)
class SummaryStats:
    """Population-convention summary of a multiset.

    skewness/kurtosis are None when the variance is zero (undefined, not 0).
    """

    n: int
    minimum: float
    maximum: float
    median: float
    mean: float
    std: float
    skewness: float | None
    kurtosis: float | None

    def as_dict(self) -> dict[str, float | int | None]:
        return {
            "n": self.n,
            "min": self.minimum,
            "max": self.maximum,
            "median": self.median,
            "mean": self.mean,
            "std": self.std,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
        }


def summary(values: Iterable[float] | np.ndarray) -> SummaryStats:
    """Min/max/median plus population moments of a multiset.

    Moments divide by n; skewness = m3 / m2^1.5, kurtosis = m4 / m2^2
    (non-excess).  Requires at least 2 values.
    """
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("summary requires at least 2 values")
    mean = float(arr.mean())
    centered = arr - mean
    m2 = float(np.mean(centered**2))
    skew: float | None
    kurt: float | None
    if m2 == 0.0:
        skew = None
        kurt = None
    else:
        m3 = float(np.mean(centered**3))
        m4 = float(np.mean(centered**4))
        skew = m3 / m2**1.5
        kurt = m4 / m2**2
    return SummaryStats(
        n=int(arr.size),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        median=float(np.median(arr)),
        mean=mean,
        std=float(np.sqrt(m2)),
        skewness=skew,
        kurtosis=kurt,
    )


def degree_correlation(net: FlowNetwork) -> tuple[float, float]:
    """(Pearson r, Kendall tau-b) between per-node in- and out-degree.

    Tau-b is the tie-corrected variant; integer degrees tie heavily.
    Returns (nan, nan) when either margin has zero variance.
    """
    if net.n_nodes < 2:
        raise ValueError("degree correlation requires at least 2 nodes")
    in_deg, out_deg, _ = degree_stats(net)
    x = in_deg.astype(np.float64)
    y = out_deg.astype(np.float64)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return (float("nan"), float("nan"))
    sx = x - x.mean()
    sy = y - y.mean()
    r = float(np.dot(sx, sy) / np.sqrt(np.dot(sx, sx) * np.dot(sy, sy)))
    tau = float(_sps.kendalltau(x, y, variant="b").statistic)
    return (r, tau)
