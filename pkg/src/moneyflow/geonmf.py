"""Geographic origin-destination factorization on a square grid.

Transfers are binned by endpoint coordinates onto a K x K lattice over a
bounding box.  Cell (p, q) counts longitude step p and latitude step q,
both 1-based, and flattens to m = p + (q - 1) K.  The cell-pair count
alpha feeds a log-clamped matrix V_mn = ln(max{1, alpha}) whose rows are
origin cells and columns destination cells.  Non-negative factorization
V ~ W H (multiplicative Frobenius updates) yields paired patterns: column
w_k of W lives on origin cells, row h_k of H on destination cells.

Localization scores a pattern by the largest share of its mass inside a
fixed-radius circle centered on any cell center (great-circle distance);
cosine similarity between w_k and h_k tells whether a factor moves money
within one place or between places.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .ingest import AggregatedLink, TransferRecord

__all__ = [
    "EARTH_RADIUS_KM",
    "DEFAULT_BOUNDS",
    "GeoGrid",
    "GeoFlowMatrix",
    "NmfFactorization",
    "LocalizationResult",
    "LocalizationSummary",
    "SweepRow",
    "haversine_km",
    "bin_transfers",
    "heatmap_of",
    "nmf",
    "localization",
    "similarity_matrix",
    "d_sweep",
    "write_matrix",
    "read_matrix",
    "write_sparse_matrix",
    "read_sparse_matrix",
]

EARTH_RADIUS_KM = 6371.0088

# (lat_min, lat_max, lon_min, lon_max): roughly a 110 km x 90 km box,
# large against the default 10 km localization radius.
DEFAULT_BOUNDS = (34.0, 35.0, 135.0, 136.0)

GAMMA_THRESHOLD = 0.23
SIMILARITY_THRESHOLD = 0.9


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; accepts scalars or broadcast arrays."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@dataclass(frozen=True)
class GeoGrid:
    """K x K cells over a lat/lon bounding box.

    p in 1..K indexes longitude (west to east), q in 1..K latitude (south
    to north); the flat 0-based index is (p - 1) + (q - 1) K.  Points on
    the top/right boundary fall into the last cell.
    """

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    k: int

    def __post_init__(self):
        if self.lat_max <= self.lat_min or self.lon_max <= self.lon_min:
            raise ValueError("bounding box must have positive extent")
        if self.k < 1:
            raise ValueError("grid needs at least one cell per side")

    @property
    def n_cells(self) -> int:
        return self.k * self.k

    def cell_of(self, lat: float, lon: float) -> tuple[int, int] | None:
        """(p, q) of the containing cell, or None when out of bounds."""
        if not (self.lat_min <= lat <= self.lat_max):
            return None
        if not (self.lon_min <= lon <= self.lon_max):
            return None
        p = min(int((lon - self.lon_min) / (self.lon_max - self.lon_min) * self.k), self.k - 1)
        q = min(int((lat - self.lat_min) / (self.lat_max - self.lat_min) * self.k), self.k - 1)
        return p + 1, q + 1

    def flat_index(self, p: int, q: int) -> int:
        if not (1 <= p <= self.k and 1 <= q <= self.k):
            raise ValueError(f"cell ({p}, {q}) outside 1..{self.k}")
        return (p - 1) + (q - 1) * self.k

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(latitudes by q, longitudes by p), each length K."""
        step_lat = (self.lat_max - self.lat_min) / self.k
        step_lon = (self.lon_max - self.lon_min) / self.k
        lats = self.lat_min + (np.arange(self.k) + 0.5) * step_lat
        lons = self.lon_min + (np.arange(self.k) + 0.5) * step_lon
        return lats, lons

    def center_of(self, p: int, q: int) -> tuple[float, float]:
        lats, lons = self.centers()
        self.flat_index(p, q)
        return float(lats[q - 1]), float(lons[p - 1])


@dataclass(frozen=True)
class GeoFlowMatrix:
    """Binned cell-pair counts alpha and V = ln(max{1, alpha}).

    Both matrices are K^2 x K^2 sparse, rows = origin cell, columns =
    destination cell.  included/excluded count transfer events (link
    frequencies), the excluded ones having an endpoint out of bounds or
    without coordinates.
    """

    grid: GeoGrid
    alpha: sp.csr_matrix
    V: sp.csr_matrix
    included: int
    excluded: int


def _iter_events(data, coords: Mapping[str, tuple[float, float]] | None):
    """Yield (src latlon, dst latlon, weight) per link or record."""
    for item in data:
        if isinstance(item, TransferRecord):
            yield item.source_coord, item.destination_coord, 1
        elif isinstance(item, AggregatedLink):
            if coords is None:
                raise ValueError("aggregated links need a node coordinate table")
            yield coords.get(item.source), coords.get(item.destination), item.frequency
        else:
            raise TypeError(f"cannot bin {type(item).__name__} objects")


def bin_transfers(
    data: Iterable[TransferRecord] | Iterable[AggregatedLink],
    grid: GeoGrid,
    coords: Mapping[str, tuple[float, float]] | None = None,
) -> GeoFlowMatrix:
    """Accumulate transfer frequency between grid cells.

    Records carry their own endpoint coordinates and count one event
    each; aggregated links draw endpoint coordinates from ``coords`` and
    count their full frequency.  Events with an endpoint out of bounds
    (or missing from ``coords``) are excluded and tallied.
    """
    n = grid.n_cells
    counts: dict[tuple[int, int], int] = {}
    included = 0
    excluded = 0
    for src_ll, dst_ll, weight in _iter_events(data, coords):
        cell_s = grid.cell_of(*src_ll) if src_ll is not None else None
        cell_d = grid.cell_of(*dst_ll) if dst_ll is not None else None
        if cell_s is None or cell_d is None:
            excluded += weight
            continue
        key = (grid.flat_index(*cell_s), grid.flat_index(*cell_d))
        counts[key] = counts.get(key, 0) + weight
        included += weight
    if counts:
        keys = np.array(sorted(counts), dtype=np.int64)
        vals = np.array([counts[tuple(k)] for k in keys], dtype=np.int64)
        rows, cols = keys[:, 0], keys[:, 1]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.int64)
    alpha = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    logvals = np.log(np.maximum(1.0, vals.astype(np.float64)))
    V = sp.csr_matrix((logvals, (rows, cols)), shape=(n, n))
    V.eliminate_zeros()
    return GeoFlowMatrix(grid=grid, alpha=alpha, V=V, included=included, excluded=excluded)


def heatmap_of(vec: np.ndarray, grid: GeoGrid) -> np.ndarray:
    """Reshape a K^2 cell vector to a K x K array indexed [q-1, p-1]."""
    return np.asarray(vec, dtype=np.float64).reshape(grid.k, grid.k)


@dataclass(frozen=True)
class NmfFactorization:
    """Result of V ~ W H with factors ordered by descending W column mass."""

    d: int
    W: np.ndarray
    H: np.ndarray
    objective: float
    history: tuple[float, ...]


def _as_matrix(V) -> sp.csr_matrix | np.ndarray:
    if isinstance(V, GeoFlowMatrix):
        return V.V
    if sp.issparse(V):
        return V.tocsr().astype(np.float64)
    arr = np.asarray(V, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("V must be a 2-d matrix")
    if (arr < 0).any():
        raise ValueError("V must be non-negative")
    return arr


def nmf(
    V,
    d: int,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-12,
) -> NmfFactorization:
    """Multiplicative-update NMF minimizing ||V - WH||_F^2.

    The objective history includes the value before the first update and
    after each full (H then W) iteration; it is non-increasing.  Stops
    when the relative objective change drops below tol.  V may be a
    GeoFlowMatrix, a scipy sparse matrix, or a dense array.
    """
    A = _as_matrix(V)
    n_rows, n_cols = A.shape
    if not 1 <= d <= min(n_rows, n_cols):
        raise ValueError(f"d={d} outside 1..{min(n_rows, n_cols)}")
    rng = np.random.default_rng(seed)
    W = np.maximum(rng.uniform(size=(n_rows, d)), 1e-12)
    H = np.maximum(rng.uniform(size=(d, n_cols)), 1e-12)
    if sp.issparse(A):
        norm_v2 = float(A.multiply(A).sum())
    else:
        norm_v2 = float((A * A).sum())

    def objective() -> float:
        VHt = A @ H.T
        cross = float(np.sum(W * VHt))
        fit = float(np.sum((W.T @ W) * (H @ H.T)))
        return norm_v2 - 2.0 * cross + fit

    eps = 1e-12
    history = [objective()]
    for _ in range(max_iters):
        WtV = (A.T @ W).T
        H *= WtV / ((W.T @ W) @ H + eps)
        VHt = A @ H.T
        W *= VHt / (W @ (H @ H.T) + eps)
        obj = objective()
        history.append(obj)
        if abs(history[-2] - obj) <= tol * max(1.0, abs(history[-2])):
            break
    order = np.argsort(-W.sum(axis=0), kind="stable")
    return NmfFactorization(
        d=d,
        W=np.ascontiguousarray(W[:, order]),
        H=np.ascontiguousarray(H[order, :]),
        objective=history[-1],
        history=tuple(history),
    )


@lru_cache(maxsize=8)
def _radius_matrix(grid: GeoGrid, radius_km: float) -> sp.csr_matrix:
    """Cell -> cells-within-radius indicator, built from grid symmetry.

    Great-circle distance between centers depends only on the two
    latitude rows and the longitude offset, so one K x K x K table covers
    all K^4 pairs.
    """
    k = grid.k
    lats, lons = grid.centers()
    dlon = lons[1] - lons[0] if k > 1 else 0.0
    dp = np.arange(k) * dlon
    dist = haversine_km(
        lats[:, None, None],
        0.0,
        lats[None, :, None],
        dp[None, None, :],
    )
    ok = dist <= radius_km
    p = np.arange(k, dtype=np.int64)
    rows_acc: list[np.ndarray] = []
    cols_acc: list[np.ndarray] = []
    for q1 in range(k):
        base1 = q1 * k
        for q2 in range(k):
            base2 = q2 * k
            for off in np.flatnonzero(ok[q1, q2]).tolist():
                if off == 0:
                    rows_acc.append(p + base1)
                    cols_acc.append(p + base2)
                else:
                    left = p[: k - off]
                    rows_acc.append(left + base1)
                    cols_acc.append(left + off + base2)
                    rows_acc.append(left + off + base1)
                    cols_acc.append(left + base2)
    rows = np.concatenate(rows_acc) if rows_acc else np.zeros(0, np.int64)
    cols = np.concatenate(cols_acc) if cols_acc else np.zeros(0, np.int64)
    data = np.ones(rows.size)
    n = grid.n_cells
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class LocalizationResult:
    """Best 10 km-style circle for one basis vector.

    gamma and center are None when the vector has no mass; center is the
    1-based (p, q) of the winning cell, ties resolved to the smallest
    (p, q) lexicographically.
    """

    index: int
    gamma: float | None
    center: tuple[int, int] | None
    heatmap: np.ndarray


@dataclass(frozen=True)
class LocalizationSummary:
    origin: tuple[LocalizationResult, ...]
    destination: tuple[LocalizationResult, ...]
    radius_km: float


def _localize_vector(
    index: int, vec: np.ndarray, grid: GeoGrid, within: sp.csr_matrix
) -> LocalizationResult:
    total = float(vec.sum())
    heat = heatmap_of(vec, grid)
    if total <= 0.0:
        return LocalizationResult(index=index, gamma=None, center=None, heatmap=heat)
    masses = within @ vec
    best = float(masses.max())
    ties = np.flatnonzero(masses == best)
    # flat index iterates p fastest; lexicographic (p, q) needs explicit keys
    cells = [(int(m % grid.k) + 1, int(m // grid.k) + 1) for m in ties]
    center = min(cells)
    return LocalizationResult(
        index=index, gamma=best / total, center=center, heatmap=heat
    )


def localization(
    fact: NmfFactorization, grid: GeoGrid, radius_km: float = 10.0
) -> LocalizationSummary:
    """Score every origin column of W and destination row of H."""
    within = _radius_matrix(grid, float(radius_km))
    origin = tuple(
        _localize_vector(k, fact.W[:, k], grid, within) for k in range(fact.d)
    )
    destination = tuple(
        _localize_vector(k, fact.H[k, :], grid, within) for k in range(fact.d)
    )
    return LocalizationSummary(origin=origin, destination=destination, radius_km=radius_km)


def similarity_matrix(fact: NmfFactorization) -> np.ndarray:
    """S[n, m] = cosine(w_m, h_n); NaN rows/columns mark zero-norm vectors."""
    w_norm = np.linalg.norm(fact.W, axis=0)
    h_norm = np.linalg.norm(fact.H, axis=1)
    S = fact.H @ fact.W
    with np.errstate(invalid="ignore", divide="ignore"):
        S = S / (h_norm[:, None] * w_norm[None, :])
    S[:, w_norm == 0] = np.nan
    S[h_norm == 0, :] = np.nan
    return S


@dataclass(frozen=True)
class SweepRow:
    """Localization and pairing summary for one factor count d."""

    d: int
    objective: float
    gamma_origin: tuple[float | None, ...]
    gamma_destination: tuple[float | None, ...]
    localized_origin: int
    localized_destination: int
    matched_pairs: int
    diagonal_similarity: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "objective": self.objective,
            "gamma_origin": list(self.gamma_origin),
            "gamma_destination": list(self.gamma_destination),
            "localized_origin": self.localized_origin,
            "localized_destination": self.localized_destination,
            "matched_pairs": self.matched_pairs,
            "diagonal_similarity": list(self.diagonal_similarity),
        }


def d_sweep(
    gfm: GeoFlowMatrix,
    d_range: tuple[int, int],
    seed: int = 0,
    radius_km: float = 10.0,
    max_iters: int = 500,
    tol: float = 1e-12,
    gamma_threshold: float = GAMMA_THRESHOLD,
    similarity_threshold: float = SIMILARITY_THRESHOLD,
) -> tuple[SweepRow, ...]:
    """Run nmf + localization + similarity for each d in [d_min, d_max].

    Each d gets its own derived seed, so single-d runs reproduce sweep
    rows exactly.
    """
    d_min, d_max = d_range
    if d_min < 1 or d_max < d_min:
        raise ValueError(f"invalid d range [{d_min}, {d_max}]")
    rows = []
    for d in range(d_min, d_max + 1):
        sub_seed = int(
            np.random.SeedSequence((seed, d)).generate_state(1, np.uint64)[0]
        )
        fact = nmf(gfm, d, seed=sub_seed, max_iters=max_iters, tol=tol)
        loc = localization(fact, gfm.grid, radius_km=radius_km)
        sims = similarity_matrix(fact)
        diag = tuple(float(sims[i, i]) for i in range(d))
        g_o = tuple(r.gamma for r in loc.origin)
        g_d = tuple(r.gamma for r in loc.destination)
        rows.append(
            SweepRow(
                d=d,
                objective=fact.objective,
                gamma_origin=g_o,
                gamma_destination=g_d,
                localized_origin=sum(
                    1 for g in g_o if g is not None and g > gamma_threshold
                ),
                localized_destination=sum(
                    1 for g in g_d if g is not None and g > gamma_threshold
                ),
                matched_pairs=sum(
                    1 for s in diag if np.isfinite(s) and s >= similarity_threshold
                ),
                diagonal_similarity=diag,
            )
        )
    return tuple(rows)


def write_matrix(path, M: np.ndarray) -> None:
    """Dense text export: one 'rows cols' header line, then rows of values."""
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        rows, cols = int(header[0]), int(header[1])
        M = np.loadtxt(fh, ndmin=2)
    if M.shape != (rows, cols):
        raise ValueError(f"matrix shape {M.shape} does not match header {(rows, cols)}")
    return M


def write_sparse_matrix(path, M: sp.spmatrix) -> None:
    """Triplet text export: 'rows cols nnz' header, then 'i j value' lines."""
    coo = M.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{int(i)} {int(j)} {repr(float(v))}\n")


def read_sparse_matrix(path) -> sp.csr_matrix:
    with open(path, "r", encoding="utf-8") as fh:
        rows, cols, nnz = (int(x) for x in fh.readline().split())
        i = np.empty(nnz, dtype=np.int64)
        j = np.empty(nnz, dtype=np.int64)
        v = np.empty(nnz, dtype=np.float64)
        for k in range(nnz):
            parts = fh.readline().split()
            i[k], j[k], v[k] = int(parts[0]), int(parts[1]), float(parts[2])
    return sp.csr_matrix((v, (i, j)), shape=(rows, cols))
