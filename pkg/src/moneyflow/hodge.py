"""Helmholtz decomposition of net flows into gradient and circular parts.

For a chosen link weight B (flow f or frequency g) the antisymmetric net
flow is F_ij = B_ij - B_ji and the symmetric pair weight is
w_ij = A_ij + A_ji, so w is 2 on mutual links and 1 on one-way links.
The decomposition F = F_circ + F_grad writes the gradient part as
F_grad_ij = w_ij (phi_i - phi_j) with per-node potentials phi solving the
graph-Laplacian system L phi = div F under the zero-mean gauge
sum_i phi_i = 0; the circular remainder is divergence-free at every node.

The solver is conjugate gradients on the positive-semidefinite L with
Jacobi preconditioning and the constant zero mode projected out of every
iterate.  It requires a weakly connected graph; :func:`hodge_decompose`
dispatches per component, giving each component its own gauge.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .bowtie import GSCC, IN, OUT, TE, BowtiePartition
from .network import FlowNetwork, degree_stats, net_flow_per_node

__all__ = [
    "WEIGHT_KINDS",
    "HodgeProblem",
    "HodgeDecomposition",
    "ConvergenceError",
    "DisconnectedGraphError",
    "assemble_problem",
    "solve_potentials",
    "decompose",
    "hodge_decompose",
    "potential_histograms",
    "potential_vs_net",
]

WEIGHT_KINDS = ("flow", "frequency")


class ConvergenceError(RuntimeError):
    """Iterative solve failed to reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DisconnectedGraphError(ValueError):
    """The weighted graph has several components; solve them separately."""


@dataclass(frozen=True)
class HodgeProblem:
    """Assembled sparse system for one network and weight choice.

    F is antisymmetric (F = B - B^T), w symmetric with entries in {1, 2}
    on linked pairs, and every row of L = diag(w 1) - w sums to zero.
    """

    n: int
    weight_kind: str
    F: sp.csr_matrix
    w: sp.csr_matrix
    laplacian: sp.csr_matrix
    divergence: np.ndarray

    @cached_property
    def components(self) -> tuple[np.ndarray, int]:
        """Weak-connectivity labels of the w graph (isolated nodes allowed)."""
        from .bowtie import _adjacency_lists, _tarjan_scc

        coo = self.w.tocoo()
        indptr, nbrs = _adjacency_lists(
            coo.row.astype(np.int64), coo.col.astype(np.int64), self.n
        )
        return _tarjan_scc(indptr, nbrs, self.n)


def assemble_problem(net: FlowNetwork, kind: str = "frequency") -> HodgeProblem:
    """Build F, w, L and the divergence vector for the chosen weight."""
    if net.n_nodes == 0:
        raise ValueError("cannot assemble a Hodge problem for an empty network")
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"unknown weight kind {kind!r}")
    n = net.n_nodes
    b_data = net.weights(kind).astype(np.float64)
    B = sp.csr_matrix((b_data, (net.src, net.dst)), shape=(n, n))
    A = sp.csr_matrix((np.ones(net.n_links), (net.src, net.dst)), shape=(n, n))
    F = (B - B.T).tocsr()
    w = (A + A.T).tocsr()
    deg = np.asarray(w.sum(axis=1)).ravel()
    laplacian = (sp.diags(deg) - w).tocsr()
    divergence = np.asarray(F.sum(axis=1)).ravel()
    return HodgeProblem(
        n=n, weight_kind=kind, F=F, w=w, laplacian=laplacian, divergence=divergence
    )


def _cg_zero_mean(
    L: sp.csr_matrix,
    b: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int]:
    """Preconditioned CG for L x = b restricted to the mean-zero subspace.

    Returns (x, relative residual, iterations).  Assumes b is mean-zero
    (it is, exactly, for a divergence of an antisymmetric F) and L has the
    constant vector as its only kernel direction.
    """
    n = b.shape[0]
    b = b - b.mean()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), 0.0, 0
    diag = L.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    z -= z.mean()
    p = z.copy()
    rz = float(r @ z)
    res = b_norm
    for it in range(1, max_iter + 1):
        Ap = L @ p
        Ap -= Ap.mean()
        denom = float(p @ Ap)
        if denom <= 0.0:
            break
        alpha = rz / denom
        x += alpha * p
        r -= alpha * Ap
        r -= r.mean()
        res = float(np.linalg.norm(r))
        if res <= tol * b_norm:
            x -= x.mean()
            return x, res / b_norm, it
        z = inv_diag * r
        z -= z.mean()
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x - x.mean(), res / b_norm, max_iter


def solve_potentials(
    problem: HodgeProblem,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> np.ndarray:
    """Solve L phi = div F on a connected graph, zero-mean gauge.

    Raises :class:`DisconnectedGraphError` when the weighted graph has
    more than one component (use :func:`hodge_decompose` for per-component
    dispatch) and :class:`ConvergenceError` when the iteration cap
    (default 20 N) is hit above the requested relative residual.
    """
    labels, ncomp = problem.components
    if ncomp > 1:
        raise DisconnectedGraphError(
            f"graph has {ncomp} weakly connected components; "
            "solve each component separately"
        )
    cap = max_iter if max_iter is not None else max(20 * problem.n, 100)
    phi, rel_res, _ = _cg_zero_mean(problem.laplacian, problem.divergence, tol, cap)
    if rel_res > tol:
        raise ConvergenceError(
            f"CG stalled at relative residual {rel_res:.3e} (target {tol:.1e})",
            residual=rel_res,
        )
    return phi


@dataclass(frozen=True)
class HodgeDecomposition:
    """Potentials and the gradient/circular flow split.

    gradient and circular are sparse antisymmetric matrices on the same
    pattern as F; F = circular + gradient holds exactly because the
    circular part is defined as the remainder.
    """

    problem: HodgeProblem
    phi: np.ndarray
    gradient: sp.csr_matrix
    circular: sp.csr_matrix

    def circular_divergence(self) -> np.ndarray:
        """Per-node divergence of the circular flow (near zero after a solve)."""
        return np.asarray(self.circular.sum(axis=1)).ravel()

    def link_table(self, net: FlowNetwork) -> list[tuple[str, str, float, float, float]]:
        """(source, destination, F, F_gradient, F_circular) per directed link."""
        b = net.weights(self.problem.weight_kind).astype(np.float64)
        fwd = {(int(s), int(d)): k for k, (s, d) in enumerate(zip(net.src, net.dst))}
        rows = []
        for k in range(net.n_links):
            i = int(net.src[k])
            j = int(net.dst[k])
            rev = fwd.get((j, i))
            f_net = b[k] - (b[rev] if rev is not None else 0.0)
            w_ij = 2.0 if rev is not None else 1.0
            grad = w_ij * (self.phi[i] - self.phi[j])
            rows.append((net.node_ids[i], net.node_ids[j], f_net, grad, f_net - grad))
        return rows


def decompose(problem: HodgeProblem, phi: np.ndarray) -> HodgeDecomposition:
    """Split F into the gradient flow of phi and the circular remainder."""
    coo = problem.w.tocoo()
    grad_data = coo.data * (phi[coo.row] - phi[coo.col])
    gradient = sp.csr_matrix((grad_data, (coo.row, coo.col)), shape=(problem.n, problem.n))
    circular = (problem.F - gradient).tocsr()
    return HodgeDecomposition(
        problem=problem, phi=phi, gradient=gradient, circular=circular
    )


def hodge_decompose(
    net: FlowNetwork,
    kind: str = "frequency",
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> HodgeDecomposition:
    """Assemble and solve, dispatching per weakly connected component.

    Each component gets its own zero-mean gauge, so the global phi sums to
    zero component by component.
    """
    problem = assemble_problem(net, kind)
    labels, ncomp = problem.components
    if ncomp <= 1:
        phi = solve_potentials(problem, tol=tol, max_iter=max_iter)
        return decompose(problem, phi)
    phi = np.zeros(problem.n)
    for comp in range(ncomp):
        nodes = np.flatnonzero(labels == comp)
        if nodes.size == 1:
            continue
        sub_L = problem.laplacian[nodes][:, nodes].tocsr()
        sub_b = problem.divergence[nodes]
        cap = max_iter if max_iter is not None else max(20 * nodes.size, 100)
        sub_phi, rel_res, _ = _cg_zero_mean(sub_L, sub_b, tol, cap)
        if rel_res > tol:
            raise ConvergenceError(
                f"CG stalled on component {comp} at relative residual {rel_res:.3e}",
                residual=rel_res,
            )
        phi[nodes] = sub_phi
    return decompose(problem, phi)


def potential_histograms(
    phi: np.ndarray,
    partition: BowtiePartition,
    bins: int = 100,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Per-component histograms of phi over a shared equal-width binning.

    Returns (bin edges, {component name: counts}) for the four walnut
    classes; the binning spans [min phi, max phi] over the GWCC.
    """
    from .bowtie import COMPONENT_NAMES

    gwcc_mask = partition.labels != 4  # OUTSIDE
    values = phi[gwcc_mask]
    if values.size == 0:
        raise ValueError("partition has an empty GWCC")
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    edges = np.linspace(lo, hi, bins + 1)
    out: dict[str, np.ndarray] = {}
    for code in (GSCC, IN, OUT, TE):
        counts, _ = np.histogram(phi[partition.members(code)], bins=edges)
        out[COMPONENT_NAMES[code]] = counts
    return edges, out


@dataclass(frozen=True)
class PotentialCorrelations:
    """phi paired with net degree and net flow, plus Pearson correlations."""

    phi: np.ndarray
    net_degree: np.ndarray
    net_flow: np.ndarray
    r_net_degree: float
    r_net_flow: float


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        return float("nan")
    sx = x - x.mean()
    sy = y - y.mean()
    denom = np.sqrt(float(sx @ sx) * float(sy @ sy))
    if denom == 0.0:
        return float("nan")
    return float(sx @ sy) / denom


def potential_vs_net(phi: np.ndarray, net: FlowNetwork) -> PotentialCorrelations:
    """Pair each node's potential with its net degree and net money flow."""
    _, _, net_deg = degree_stats(net)
    net_flow = net_flow_per_node(net)
    return PotentialCorrelations(
        phi=phi,
        net_degree=net_deg,
        net_flow=net_flow,
        r_net_degree=_pearson(phi, net_deg.astype(np.float64)),
        r_net_flow=_pearson(phi, net_flow.astype(np.float64)),
    )
