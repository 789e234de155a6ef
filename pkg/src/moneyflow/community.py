"""Flow-based community detection by minimizing the map equation.

A weighted random walk follows out-links with probability 1 - tau and
teleports with probability tau (always, on dangling nodes); the teleport
landing distribution is proportional to out-strength.  The two-level map
equation scores a partition by the description length of that walk:

    L(M) = q H(exit module distribution)
           + sum_m (q_m + p_m) H(within-module visit distribution)

where p_i are stationary visit rates and q_m is the rate of leaving
module m (link steps and teleport steps both count).  The optimizer is a
greedy node-mover with module aggregation and seeded restarts, applied
recursively inside each community to build a hierarchy; a community that
no split improves is irreducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log2
from typing import Iterable, Iterator, Sequence

import numpy as np

from .network import FlowNetwork, _csr_from_edges

__all__ = [
    "TAU",
    "Walk",
    "EmptyModuleError",
    "build_walk",
    "map_equation_value",
    "Community",
    "CommunityTree",
    "detect_communities",
    "LevelRow",
    "CommunityReport",
    "community_report",
    "flat_table",
]

TAU = 0.15
_MIN_GAIN = 1e-12


class EmptyModuleError(ValueError):
    """A partition contains a module with no members."""


def _plogp(x: float) -> float:
    return x * log2(x) if x > 0.0 else 0.0


def _plogp_vec(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


@dataclass(frozen=True)
class Walk:
    """Stationary walk quantities, closed under module aggregation.

    p: visit rates; a_i = p_i times the node's teleport probability (tau,
    or 1 on dangling nodes); t: teleport landing distribution; src/dst/
    flow: stationary link-step rates p_src (1 - tau) w_e / s_src.
    node_term fixes sum_i p_i log2 p_i at the original node resolution so
    aggregated evaluations stay comparable.
    """

    n: int
    p: np.ndarray
    a: np.ndarray
    t: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    flow: np.ndarray
    node_term: float


def build_walk(
    net: FlowNetwork,
    kind: str = "frequency",
    tau: float = TAU,
    tol: float = 1e-14,
    max_iter: int = 10_000,
) -> Walk:
    """Power-iterate the teleporting walk to its stationary distribution."""
    if net.n_links == 0:
        raise ValueError("network has no links; the walk is undefined")
    n = net.n_nodes
    w = net.weights(kind).astype(np.float64)
    s = np.zeros(n)
    np.add.at(s, net.src, w)
    t = s / s.sum()
    tau_eff = np.where(s > 0, tau, 1.0)
    out_norm = w / s[net.src]
    p = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        link = np.zeros(n)
        np.add.at(link, net.dst, p[net.src] * (1.0 - tau) * out_norm)
        p_new = link + t * float(p @ tau_eff)
        p_new /= p_new.sum()
        delta = float(np.abs(p_new - p).sum())
        p = p_new
        if delta < tol:
            break
    else:
        raise RuntimeError("stationary distribution did not converge")
    flow = p[net.src] * (1.0 - tau) * out_norm
    return Walk(
        n=n,
        p=p,
        a=p * tau_eff,
        t=t,
        src=net.src.copy(),
        dst=net.dst.copy(),
        flow=flow,
        node_term=float(_plogp_vec(p).sum()),
    )


def _value_for(walk: Walk, labels: np.ndarray) -> float:
    """Exact four-term evaluation of the map equation for given labels."""
    nmod = int(labels.max()) + 1 if labels.size else 0
    sizes = np.bincount(labels, minlength=nmod)
    if np.any(sizes == 0):
        raise EmptyModuleError("partition assigns no nodes to some module id")
    P = np.bincount(labels, weights=walk.p, minlength=nmod)
    A = np.bincount(labels, weights=walk.a, minlength=nmod)
    T = np.bincount(labels, weights=walk.t, minlength=nmod)
    ext = labels[walk.src] != labels[walk.dst]
    OUT = np.bincount(
        labels[walk.src[ext]], weights=walk.flow[ext], minlength=nmod
    )
    q = A * (1.0 - T) + OUT
    q_tot = float(q.sum())
    return (
        _plogp(q_tot)
        - 2.0 * float(_plogp_vec(q).sum())
        + float(_plogp_vec(q + P).sum())
        - walk.node_term
    )


def _coerce_labels(net: FlowNetwork, partition) -> np.ndarray:
    """Accept labels aligned to node index, or groups of node ids."""
    seq = list(partition)
    if seq and isinstance(seq[0], (list, tuple, set, frozenset)):
        labels = np.full(net.n_nodes, -1, dtype=np.int64)
        for m, group in enumerate(seq):
            if len(group) == 0:
                raise EmptyModuleError(f"module {m} is empty")
            for name in group:
                labels[net.index_of[name]] = m
        if np.any(labels < 0):
            raise ValueError("partition does not cover all nodes")
        return labels
    labels = np.asarray(seq, dtype=np.int64)
    if labels.shape != (net.n_nodes,):
        raise ValueError("label array length must equal the node count")
    if labels.size and labels.min() < 0:
        raise ValueError("module labels must be non-negative")
    return labels


def map_equation_value(
    net: FlowNetwork,
    partition,
    kind: str = "frequency",
    tau: float = TAU,
) -> float:
    """Description length (bits) of the walk under the given partition.

    partition is either an int label per node (aligned with net.node_ids)
    or an iterable of node-id groups covering every node exactly once.
    """
    labels = _coerce_labels(net, partition)
    return _value_for(build_walk(net, kind=kind, tau=tau), labels)


def _csr_lists(heads: np.ndarray, tails: np.ndarray, vals: np.ndarray, n: int):
    indptr, nbrs, order = _csr_from_edges(heads, tails, n)
    return indptr.tolist(), nbrs.tolist(), vals[order].tolist()


def _local_moves(
    walk: Walk,
    out_csr,
    in_csr,
    labels: np.ndarray,
    value: float,
    rng: np.random.Generator,
    history: list[float],
    max_passes: int = 200,
) -> tuple[np.ndarray, float]:
    """Greedy single-node moves until a full pass makes no improvement.

    Mutates labels in place; every accepted move strictly lowers the
    running value, which is appended to history move by move.
    """
    n = walk.n
    optr, onbr, oflow = out_csr
    iptr, inbr, iflow = in_csr
    p = walk.p.tolist()
    a = walk.a.tolist()
    t = walk.t.tolist()
    fout_total = np.zeros(n)
    np.add.at(fout_total, walk.src, walk.flow)
    fout_total = fout_total.tolist()

    P = np.bincount(labels, weights=walk.p, minlength=n)
    A = np.bincount(labels, weights=walk.a, minlength=n)
    T = np.bincount(labels, weights=walk.t, minlength=n)
    ext = labels[walk.src] != labels[walk.dst]
    OUT = np.bincount(labels[walk.src[ext]], weights=walk.flow[ext], minlength=n)
    size = np.bincount(labels, minlength=n)
    q = A * (1.0 - T) + OUT
    q_tot = float(q.sum())
    P, A, T, OUT, q = (arr.tolist() for arr in (P, A, T, OUT, q))
    size = size.tolist()
    free = [m for m in range(n - 1, -1, -1) if size[m] == 0]
    lab = labels.tolist()

    for _ in range(max_passes):
        moved = 0
        for v in rng.permutation(n).tolist():
            alpha = lab[v]
            fo: dict[int, float] = {}
            for k in range(optr[v], optr[v + 1]):
                m = lab[onbr[k]]
                fo[m] = fo.get(m, 0.0) + oflow[k]
            fi: dict[int, float] = {}
            for k in range(iptr[v], iptr[v + 1]):
                m = lab[inbr[k]]
                fi[m] = fi.get(m, 0.0) + iflow[k]
            cands = set(fo) | set(fi)
            cands.discard(alpha)
            if size[alpha] > 1 and free:
                cands.add(free[-1])
            if not cands:
                continue

            lone = size[alpha] == 1
            if lone:
                P_a1 = A_a1 = T_a1 = OUT_a1 = q_a1 = 0.0
            else:
                P_a1 = P[alpha] - p[v]
                A_a1 = A[alpha] - a[v]
                T_a1 = T[alpha] - t[v]
                OUT_a1 = OUT[alpha] - fout_total[v] + fo.get(alpha, 0.0) + fi.get(alpha, 0.0)
                q_a1 = A_a1 * (1.0 - T_a1) + OUT_a1
            removed = (
                -2.0 * _plogp(q_a1)
                + _plogp(q_a1 + P_a1)
                + 2.0 * _plogp(q[alpha])
                - _plogp(q[alpha] + P[alpha])
            )

            best_delta = -_MIN_GAIN
            best_beta = alpha
            best_state = None
            for beta in sorted(cands):
                P_b1 = P[beta] + p[v]
                A_b1 = A[beta] + a[v]
                T_b1 = T[beta] + t[v]
                OUT_b1 = OUT[beta] + fout_total[v] - fo.get(beta, 0.0) - fi.get(beta, 0.0)
                q_b1 = A_b1 * (1.0 - T_b1) + OUT_b1
                q_tot1 = q_tot - q[alpha] - q[beta] + q_a1 + q_b1
                delta = (
                    removed
                    - 2.0 * _plogp(q_b1)
                    + _plogp(q_b1 + P_b1)
                    + 2.0 * _plogp(q[beta])
                    - _plogp(q[beta] + P[beta])
                    + _plogp(q_tot1)
                    - _plogp(q_tot)
                )
                if delta < best_delta:
                    best_delta = delta
                    best_beta = beta
                    best_state = (P_b1, A_b1, T_b1, OUT_b1, q_b1, q_tot1)

            if best_beta == alpha:
                continue
            beta = best_beta
            if size[beta] == 0:
                free.pop()
            P[alpha], A[alpha], T[alpha] = P_a1, A_a1, T_a1
            OUT[alpha], q[alpha] = OUT_a1, q_a1
            size[alpha] -= 1
            if size[alpha] == 0:
                free.append(alpha)
            P[beta], A[beta], T[beta], OUT[beta], q[beta], q_tot = best_state
            size[beta] += 1
            lab[v] = beta
            value += best_delta
            history.append(value)
            moved += 1
        if moved == 0:
            break
    labels[:] = lab
    return labels, value


def _aggregate(walk: Walk, inv: np.ndarray, k: int) -> Walk:
    """Merge modules into super-nodes, dropping now-internal self-flows."""
    p = np.bincount(inv, weights=walk.p, minlength=k)
    a = np.bincount(inv, weights=walk.a, minlength=k)
    t = np.bincount(inv, weights=walk.t, minlength=k)
    hs = inv[walk.src]
    ts = inv[walk.dst]
    keep = hs != ts
    key = hs[keep] * np.int64(k) + ts[keep]
    uniq, pos = np.unique(key, return_inverse=True)
    flow = np.bincount(pos, weights=walk.flow[keep], minlength=uniq.size)
    return Walk(
        n=k,
        p=p,
        a=a,
        t=t,
        src=(uniq // k).astype(np.int64),
        dst=(uniq % k).astype(np.int64),
        flow=flow,
        node_term=walk.node_term,
    )


def _optimize_once(
    walk: Walk, out_csr, in_csr, rng: np.random.Generator
) -> tuple[np.ndarray, float, list[float]]:
    """One restart: move/aggregate cycles plus a final flat refinement."""
    history: list[float] = []
    node_to_module = np.arange(walk.n)
    g = walk
    g_out, g_in = out_csr, in_csr
    labels = np.arange(g.n)
    value = _value_for(g, labels)
    history.append(value)
    while True:
        labels, value = _local_moves(g, g_out, g_in, labels, value, rng, history)
        uniq, inv = np.unique(labels, return_inverse=True)
        node_to_module = inv[node_to_module]
        if uniq.size == g.n:
            break
        g = _aggregate(g, inv, uniq.size)
        g_out = _csr_lists(g.src, g.dst, g.flow, g.n)
        g_in = _csr_lists(g.dst, g.src, g.flow, g.n)
        labels = np.arange(g.n)
    if g.n != walk.n:
        labels = node_to_module.copy()
        labels, value = _local_moves(walk, out_csr, in_csr, labels, value, rng, history)
        _, labels = np.unique(labels, return_inverse=True)
    else:
        labels = node_to_module
    return labels, value, history


def _best_partition(
    walk: Walk, entropy: tuple[int, ...], trials: int
) -> tuple[np.ndarray, float, list[float]]:
    """Best of seeded restarts; ties keep the lowest trial index."""
    out_csr = _csr_lists(walk.src, walk.dst, walk.flow, walk.n)
    in_csr = _csr_lists(walk.dst, walk.src, walk.flow, walk.n)
    best = None
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(entropy + (trial,)))
        labels, value, history = _optimize_once(walk, out_csr, in_csr, rng)
        if best is None or value < best[1]:
            best = (labels, value, history)
    labels, _, history = best
    return labels, _value_for(walk, labels), history


@dataclass(frozen=True)
class Community:
    """One node group in the hierarchy (level is 1-based)."""

    level: int
    members: tuple[int, ...]
    irreducible: bool
    children: tuple["Community", ...] = ()

    @property
    def size(self) -> int:
        return len(self.members)

    def walk_tree(self) -> Iterator["Community"]:
        yield self
        for child in self.children:
            yield from child.walk_tree()


@dataclass(frozen=True)
class CommunityTree:
    """Detected hierarchy over one network.

    children holds the level-1 communities; value is the two-level map
    equation of that top partition, and history the winning restart's
    per-move objective trace (non-increasing).  Leaves are irreducible:
    either no finer partition lowered the value, or the depth cap
    stopped the recursion there.
    """

    node_ids: tuple[str, ...]
    value: float
    children: tuple[Community, ...]
    history: tuple[float, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def communities(self) -> Iterator[Community]:
        for child in self.children:
            yield from child.walk_tree()

    def leaves(self) -> list[Community]:
        return [c for c in self.communities() if c.irreducible]

    def top_labels(self) -> np.ndarray:
        labels = np.empty(self.n_nodes, dtype=np.int64)
        for m, comm in enumerate(self.children):
            labels[list(comm.members)] = m
        return labels

    def as_dict(self) -> dict:
        def encode(c: Community) -> dict:
            d = {"level": c.level, "size": c.size, "irreducible": c.irreducible}
            if c.irreducible:
                d["members"] = [self.node_ids[i] for i in c.members]
            else:
                d["children"] = [encode(ch) for ch in c.children]
            return d

        return {
            "node_count": self.n_nodes,
            "map_equation_bits": self.value,
            "communities": [encode(c) for c in self.children],
        }


def detect_communities(
    net: FlowNetwork,
    seed: int = 0,
    trials: int = 10,
    kind: str = "frequency",
    tau: float = TAU,
    max_depth: int = 5,
) -> CommunityTree:
    """Hierarchical partition of the network, deterministic per seed.

    Level 1 is the best-of-restarts top partition; each community is then
    re-optimized on its induced subnetwork and split while a strictly
    lower value exists, down to max_depth.  A network with no links (or a
    single node) is a single irreducible community.
    """
    if net.n_nodes == 0:
        raise ValueError("cannot detect communities in an empty network")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    all_nodes = tuple(range(net.n_nodes))
    if net.n_links == 0:
        root = Community(level=1, members=all_nodes, irreducible=True)
        return CommunityTree(
            node_ids=net.node_ids, value=0.0, children=(root,), history=(0.0,)
        )
    walk = build_walk(net, kind=kind, tau=tau)
    labels, value, history = _best_partition(walk, (seed,), trials)

    def build(
        parent_net: FlowNetwork,
        to_root: np.ndarray,
        labels_p: np.ndarray,
        level: int,
        path: tuple[int, ...],
    ) -> tuple[Community, ...]:
        out = []
        for m in range(int(labels_p.max()) + 1):
            idx = np.flatnonzero(labels_p == m)
            members = tuple(int(to_root[i]) for i in idx)
            children: tuple[Community, ...] = ()
            irreducible = True
            if len(idx) > 1 and level < max_depth:
                sub, sub_nodes = parent_net.subnetwork(idx)
                if sub.n_links > 0:
                    sub_walk = build_walk(sub, kind=kind, tau=tau)
                    sub_labels, sub_value, _ = _best_partition(
                        sub_walk, (seed, *path, m), trials
                    )
                    if int(sub_labels.max()) > 0:
                        single = _value_for(sub_walk, np.zeros(sub.n_nodes, np.int64))
                        if sub_value < single - _MIN_GAIN:
                            children = build(
                                sub,
                                to_root[sub_nodes],
                                sub_labels,
                                level + 1,
                                (*path, m),
                            )
                            irreducible = False
            out.append(
                Community(
                    level=level,
                    members=members,
                    irreducible=irreducible,
                    children=children,
                )
            )
        return tuple(out)

    children = build(net, np.arange(net.n_nodes), labels, 1, ())
    return CommunityTree(
        node_ids=net.node_ids,
        value=value,
        children=children,
        history=tuple(history),
    )


@dataclass(frozen=True)
class LevelRow:
    level: int
    communities: int
    irreducible: int
    accounts: int
    ratio: float


@dataclass(frozen=True)
class CommunityReport:
    """Per-level counts plus the size-rank sequence of irreducible leaves."""

    rows: tuple[LevelRow, ...]
    size_rank: tuple[tuple[int, int], ...]

    def as_dict(self) -> dict:
        return {
            "levels": [
                {
                    "level": r.level,
                    "communities": r.communities,
                    "irreducible": r.irreducible,
                    "accounts": r.accounts,
                    "ratio": r.ratio,
                }
                for r in self.rows
            ],
            "size_rank": [
                {"rank": rank, "size": size} for rank, size in self.size_rank
            ],
        }


def community_report(tree: CommunityTree) -> CommunityReport:
    """Aggregate the tree into level rows and a descending size ranking."""
    n = tree.n_nodes
    by_level: dict[int, list[Community]] = {}
    for comm in tree.communities():
        by_level.setdefault(comm.level, []).append(comm)
    rows = tuple(
        LevelRow(
            level=level,
            communities=len(comms),
            irreducible=sum(c.irreducible for c in comms),
            accounts=sum(c.size for c in comms),
            ratio=sum(c.size for c in comms) / n,
        )
        for level, comms in sorted(by_level.items())
    )
    sizes = sorted((c.size for c in tree.leaves()), reverse=True)
    size_rank = tuple((rank, size) for rank, size in enumerate(sizes, start=1))
    return CommunityReport(rows=rows, size_rank=size_rank)


def flat_table(tree: CommunityTree) -> list[list[str]]:
    """Rows (node_id, level-1 id, ..., irreducible id), header included.

    Per-level ids and leaf ids are 1-based in depth-first order; columns
    past a node's leaf level are left empty.
    """
    max_level = max((c.level for c in tree.communities()), default=1)
    level_counter = dict.fromkeys(range(1, max_level + 1), 0)
    leaf_counter = 0
    paths: dict[int, tuple[list[str], str]] = {}

    def assign(comm: Community, prefix: list[str]) -> None:
        nonlocal leaf_counter
        level_counter[comm.level] += 1
        here = prefix + [str(level_counter[comm.level])]
        if comm.irreducible:
            leaf_counter += 1
            for node in comm.members:
                paths[node] = (here, str(leaf_counter))
        else:
            for child in comm.children:
                assign(child, here)

    for comm in tree.children:
        assign(comm, [])
    header = ["node_id"] + [f"level_{k}" for k in range(1, max_level + 1)]
    header.append("irreducible")
    rows = [header]
    for node in range(tree.n_nodes):
        levels, leaf = paths[node]
        padded = levels + [""] * (max_level - len(levels))
        rows.append([tree.node_ids[node], *padded, leaf])
    return rows
