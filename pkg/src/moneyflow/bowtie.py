"""Bowtie decomposition of a directed network into GSCC, IN, OUT and TE.

Every node of the giant weakly connected component (GWCC) is assigned to
exactly one of four classes: the largest strongly connected component
(GSCC), the upstream nodes that reach it (IN), the downstream nodes it
reaches (OUT), and the remaining tendrils (TE).  Nodes outside the GWCC
get their own label and are excluded from component reports.

All algorithms run on the unweighted adjacency.  SCCs come from an
iterative Tarjan pass (explicit stacks, no recursion), weak components
from the same pass on the symmetrized adjacency, and IN/OUT membership
plus hop distances from multi-source BFS out of the GSCC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import FlowNetwork, _csr_from_edges

__all__ = [
    "GSCC",
    "IN",
    "OUT",
    "TE",
    "OUTSIDE",
    "COMPONENT_NAMES",
    "BowtiePartition",
    "DistanceProfile",
    "weakly_connected_components",
    "strongly_connected_components",
    "classify_bowtie",
    "distance_profile",
]

GSCC, IN, OUT, TE, OUTSIDE = 0, 1, 2, 3, 4
COMPONENT_NAMES = ("GSCC", "IN", "OUT", "TE", "outside_GWCC")


def _tarjan_scc(indptr: list[int], nbrs: list[int], n: int) -> tuple[np.ndarray, int]:
    """Strongly connected components of a CSR adjacency, iteratively.

    Returns (component id per node, component count).  Ids are normalized
    so that components are numbered by their smallest member index.
    """
    UNSET = -1
    disc = [UNSET] * n
    low = [0] * n
    on_stack = bytearray(n)
    comp = [UNSET] * n
    scc_stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if disc[root] != UNSET:
            continue
        work: list[list[int]] = [[root, indptr[root]]]
        disc[root] = low[root] = counter
        counter += 1
        scc_stack.append(root)
        on_stack[root] = 1
        while work:
            frame = work[-1]
            v, ptr = frame
            if ptr < indptr[v + 1]:
                frame[1] = ptr + 1
                w = nbrs[ptr]
                if disc[w] == UNSET:
                    disc[w] = low[w] = counter
                    counter += 1
                    scc_stack.append(w)
                    on_stack[w] = 1
                    work.append([w, indptr[w]])
                elif on_stack[w] and disc[w] < low[v]:
                    low[v] = disc[w]
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    if low[v] < low[parent]:
                        low[parent] = low[v]
                if low[v] == disc[v]:
                    while True:
                        w = scc_stack.pop()
                        on_stack[w] = 0
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
    # renumber components in order of their minimum node index
    labels = np.asarray(comp, dtype=np.int64)
    first = np.full(ncomp, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n, dtype=np.int64))
    remap = np.empty(ncomp, dtype=np.int64)
    remap[np.argsort(first, kind="stable")] = np.arange(ncomp)
    return remap[labels], ncomp


def _adjacency_lists(src: np.ndarray, dst: np.ndarray, n: int) -> tuple[list[int], list[int]]:
    indptr, nbrs, _ = _csr_from_edges(src, dst, n)
    return indptr.tolist(), nbrs.tolist()


def strongly_connected_components(net: FlowNetwork) -> tuple[np.ndarray, int]:
    """Maximal mutual-reachability classes: (label per node, class count).

    Labels are normalized by smallest member index, so the output is
    deterministic for a given network.
    """
    indptr, nbrs = _adjacency_lists(net.src, net.dst, net.n_nodes)
    return _tarjan_scc(indptr, nbrs, net.n_nodes)


def weakly_connected_components(net: FlowNetwork) -> tuple[np.ndarray, int]:
    """Connected classes of the symmetrized adjacency: (labels, count)."""
    heads = np.concatenate([net.src, net.dst])
    tails = np.concatenate([net.dst, net.src])
    indptr, nbrs = _adjacency_lists(heads, tails, net.n_nodes)
    return _tarjan_scc(indptr, nbrs, net.n_nodes)


def _largest_class(labels: np.ndarray, ncomp: int, member_mask: np.ndarray | None = None) -> int:
    """Class id with the most members; ties go to the smallest id.

    Because ids are ordered by minimum member index, the tie winner is the
    class containing the smallest node index.
    """
    if member_mask is None:
        sizes = np.bincount(labels, minlength=ncomp)
    else:
        sizes = np.bincount(labels[member_mask], minlength=ncomp)
    return int(np.argmax(sizes))


def _bfs_levels(
    indptr: list[int], nbrs: list[int], sources: np.ndarray, n: int
) -> np.ndarray:
    """Multi-source BFS hop distance; unreachable nodes get -1."""
    dist = np.full(n, -1, dtype=np.int64)
    dist[sources] = 0
    frontier = sources.tolist()
    level = 0
    dist_l = dist.tolist()
    while frontier:
        level += 1
        nxt: list[int] = []
        for v in frontier:
            for k in range(indptr[v], indptr[v + 1]):
                w = nbrs[k]
                if dist_l[w] < 0:
                    dist_l[w] = level
                    nxt.append(w)
        frontier = nxt
    return np.asarray(dist_l, dtype=np.int64)


@dataclass(frozen=True)
class BowtiePartition:
    """Assignment of every node to GSCC / IN / OUT / TE / outside_GWCC.

    ``labels[i]`` is one of the module-level component codes; the four
    walnut classes partition the GWCC exactly.
    """

    labels: np.ndarray

    @property
    def sizes(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(COMPONENT_NAMES))
        return {name: int(counts[code]) for code, name in enumerate(COMPONENT_NAMES)}

    @property
    def gwcc_size(self) -> int:
        return int(np.sum(self.labels != OUTSIDE))

    def members(self, code: int) -> np.ndarray:
        return np.flatnonzero(self.labels == code)

    def component_name(self, i: int) -> str:
        return COMPONENT_NAMES[self.labels[i]]


def classify_bowtie(net: FlowNetwork) -> BowtiePartition:
    """Walnut classification of all nodes.

    GSCC is the largest SCC inside the GWCC; IN holds the GWCC nodes with
    a directed path into the GSCC, OUT the nodes the GSCC reaches, TE the
    rest of the GWCC.  |GSCC| + |IN| + |OUT| + |TE| = |GWCC| by
    construction.
    """
    n = net.n_nodes
    if n == 0:
        raise ValueError("cannot classify an empty network")
    wcc, n_wcc = weakly_connected_components(net)
    gwcc_id = _largest_class(wcc, n_wcc)
    in_gwcc = wcc == gwcc_id

    scc, n_scc = strongly_connected_components(net)
    gscc_id = _largest_class(scc, n_scc, member_mask=in_gwcc)
    gscc_nodes = np.flatnonzero(scc == gscc_id)

    fwd_ptr, fwd_nbr = _adjacency_lists(net.src, net.dst, n)
    rev_ptr, rev_nbr = _adjacency_lists(net.dst, net.src, n)
    dist_from_gscc = _bfs_levels(fwd_ptr, fwd_nbr, gscc_nodes, n)
    dist_to_gscc = _bfs_levels(rev_ptr, rev_nbr, gscc_nodes, n)

    labels = np.full(n, OUTSIDE, dtype=np.int8)
    labels[in_gwcc] = TE
    labels[in_gwcc & (dist_to_gscc > 0)] = IN
    labels[in_gwcc & (dist_from_gscc > 0)] = OUT
    labels[scc == gscc_id] = GSCC
    return BowtiePartition(labels=labels)


@dataclass(frozen=True)
class DistanceProfile:
    """Hop-distance histograms between the core and its skins.

    ``in_to_gscc[d]`` counts IN nodes whose shortest directed path into
    the GSCC has d hops; ``gscc_to_out[d]`` counts OUT nodes at d hops
    from the GSCC.  Totals equal the component sizes and all d >= 1.
    """

    in_to_gscc: dict[int, int]
    gscc_to_out: dict[int, int]

    @staticmethod
    def _ratios(hist: dict[int, int]) -> dict[int, float]:
        total = sum(hist.values())
        if total == 0:
            return {}
        return {d: c / total for d, c in sorted(hist.items())}

    def in_ratios(self) -> dict[int, float]:
        return self._ratios(self.in_to_gscc)

    def out_ratios(self) -> dict[int, float]:
        return self._ratios(self.gscc_to_out)


def distance_profile(net: FlowNetwork, partition: BowtiePartition) -> DistanceProfile:
    """Shortest distances IN -> GSCC and GSCC -> OUT, as histograms.

    IN distances come from a multi-source BFS on reversed links seeded at
    the GSCC (so a hop count along reversed links equals the forward-path
    length into the core); OUT distances from the forward BFS.
    """
    n = net.n_nodes
    gscc_nodes = partition.members(GSCC)
    fwd_ptr, fwd_nbr = _adjacency_lists(net.src, net.dst, n)
    rev_ptr, rev_nbr = _adjacency_lists(net.dst, net.src, n)
    dist_to = _bfs_levels(rev_ptr, rev_nbr, gscc_nodes, n)
    dist_from = _bfs_levels(fwd_ptr, fwd_nbr, gscc_nodes, n)

    def _hist(nodes: np.ndarray, dist: np.ndarray) -> dict[int, int]:
        values, counts = np.unique(dist[nodes], return_counts=True)
        return {int(d): int(c) for d, c in zip(values, counts)}

    return DistanceProfile(
        in_to_gscc=_hist(partition.members(IN), dist_to),
        gscc_to_out=_hist(partition.members(OUT), dist_from),
    )
