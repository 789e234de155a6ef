"""Synthetic transfer logs with planted, recoverable structure.

Two wiring modes share the record/coordinate machinery.  The walnut mode
builds a strongly connected core (one seeded cycle plus heavy-tailed
extra edges), wires IN skins into the core and OUT skins from it at
distance 1 or 2, hangs tendrils off the skins, and leaves a remainder in
tiny components outside the GWCC, so every planted class is exact by
construction.  The block mode plants flat or two-level community blocks
instead.  Either way nodes get coordinates (clustered cities over a
bounding box plus uniform background), links get periodic or one-off
schedules over a fixed 29-month window, and amounts are lognormal yen.

Everything is drawn from one seeded generator: an identical spec yields
a byte-identical log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable

import numpy as np

from .geonmf import DEFAULT_BOUNDS
from .ingest import COLUMNS, TransferRecord

__all__ = [
    "MONTHS_IN_WINDOW",
    "MONTHLY_EVENTS",
    "BIWEEKLY_EVENTS",
    "CitySpec",
    "ScenarioSpec",
    "GroundTruth",
    "generate",
    "write_records",
    "walnut_scenario",
    "cities_scenario",
    "blocks_scenario",
]

MONTHS_IN_WINDOW = 29  # March 2017 through July 2019
MONTHLY_EVENTS = MONTHS_IN_WINDOW
BIWEEKLY_EVENTS = 2 * MONTHS_IN_WINDOW

_WINDOW_START = (2017, 3)


def _month_of(idx: int) -> tuple[int, int]:
    total = _WINDOW_START[1] - 1 + idx
    return _WINDOW_START[0] + total // 12, total % 12 + 1


@dataclass(frozen=True)
class CitySpec:
    """A gaussian population cluster: center, spread in km, node share."""

    lat: float
    lon: float
    spread_km: float
    share: float


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything the generator needs; block mode overrides walnut wiring.

    gscc/in/out/te fractions must sum to at most 1, the remainder living
    in 2-3 node components outside the GWCC.  degree_exponent is the
    density exponent of the planted core degree tail (CCDF slope is
    1 - exponent).  community_blocks, when nonempty, switches to block
    wiring: a flat tuple of sizes, or tuples of sub-block sizes for one
    extra hierarchy level; sizes must sum to the node count.
    """

    n_nodes: int = 2000
    gscc_frac: float = 0.382
    in_frac: float = 0.149
    out_frac: float = 0.373
    te_frac: float = 0.096
    degree_exponent: float = 2.5
    links_per_core_node: float = 3.0
    skin_direct_fraction: float = 0.96
    periodic_share: float = 0.25
    biweekly_fraction: float = 0.5
    cities: tuple[CitySpec, ...] = ()
    intra_city_bias: float = 0.85
    hub_outflow: bool = False
    hub_links: int = 300
    community_blocks: tuple = ()
    amount_log_mean: float = 11.5
    amount_log_sigma: float = 2.0
    bounds: tuple[float, float, float, float] = DEFAULT_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("need at least two accounts")
        fracs = (self.gscc_frac, self.in_frac, self.out_frac, self.te_frac)
        if any(not 0.0 <= f <= 1.0 for f in fracs):
            raise ValueError("walnut fractions must lie in [0, 1]")
        if sum(fracs) > 1.0 + 1e-9:
            raise ValueError("walnut fractions must sum to at most 1")
        for share in (
            self.skin_direct_fraction,
            self.periodic_share,
            self.biweekly_fraction,
            self.intra_city_bias,
        ):
            if not 0.0 <= share <= 1.0:
                raise ValueError("shares must lie in [0, 1]")
        if self.degree_exponent <= 1.0:
            raise ValueError("degree exponent must exceed 1")
        if sum(c.share for c in self.cities) > 1.0 + 1e-9:
            raise ValueError("city shares must sum to at most 1")
        if self.community_blocks:
            total = sum(
                sum(b) if isinstance(b, (tuple, list)) else b
                for b in self.community_blocks
            )
            if total != self.n_nodes:
                raise ValueError("block sizes must sum to the node count")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    """Planted structure, keyed by account id.

    bowtie maps nodes to GSCC/IN/OUT/TE/outside_GWCC (walnut mode only);
    communities maps nodes to their block path, one int per level (block
    mode only); city is the city index, -1 for background nodes.
    """

    mode: str
    n_nodes: int
    bowtie: dict[str, str] | None
    skin_distance: dict[str, int] | None
    communities: dict[str, tuple[int, ...]] | None
    city: dict[str, int]
    hub: str | None
    hub_targets: int
    monthly_links: int
    biweekly_links: int
    component_counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_nodes": self.n_nodes,
            "bowtie": self.bowtie,
            "skin_distance": self.skin_distance,
            "communities": {k: list(v) for k, v in self.communities.items()}
            if self.communities is not None
            else None,
            "city": self.city,
            "hub": self.hub,
            "hub_targets": self.hub_targets,
            "monthly_links": self.monthly_links,
            "biweekly_links": self.biweekly_links,
            "component_counts": self.component_counts,
        }


def _node_name(i: int) -> str:
    return f"F{i:06d}"


def _pareto_weights(rng: np.random.Generator, n: int, exponent: float) -> np.ndarray:
    # attractiveness with tail index exponent - 1 gives degrees with
    # density exponent ~ exponent
    u = rng.random(n)
    return (1.0 - u) ** (-1.0 / (exponent - 1.0))


def _weighted_pick(rng, idx: np.ndarray, prob: np.ndarray, size: int) -> np.ndarray:
    return rng.choice(idx, size=size, p=prob, replace=True)


def _walnut_edges(spec: ScenarioSpec, rng, city_of: np.ndarray):
    n = spec.n_nodes
    sizes = [
        int(round(spec.gscc_frac * n)),
        int(round(spec.in_frac * n)),
        int(round(spec.out_frac * n)),
        int(round(spec.te_frac * n)),
    ]
    while sum(sizes) > n:
        sizes[sizes.index(max(sizes))] -= 1
    n_core, n_in, n_out, n_te = sizes
    n_outside = n - sum(sizes)
    if spec.gscc_frac > 0 and n_core < 2:
        raise ValueError("GSCC fraction leaves fewer than 2 nodes; no cycle fits")
    if n_core < 2:
        raise ValueError("walnut wiring needs a core of at least 2 nodes")
    if n_te > 0 and n_in == 0 and n_out == 0:
        raise ValueError("tendrils need a nonempty IN or OUT side to hang from")
    if n_outside == 1:
        raise ValueError(
            "exactly one node outside the GWCC cannot form a component; "
            "adjust fractions"
        )

    core = np.arange(n_core)
    in_lo, in_hi = n_core, n_core + n_in
    out_lo, out_hi = in_hi, in_hi + n_out
    te_lo, te_hi = out_hi, out_hi + n_te
    outside_lo = te_hi

    biased = bool(spec.cities) and spec.intra_city_bias > 0

    # One Hamiltonian cycle through the core guarantees the SCC.  With
    # cities the visiting order groups nodes by city, so only the few
    # boundary hops cross city lines and flows stay geographically local.
    edges: set[tuple[int, int]] = set()
    if biased:
        order = []
        for c in sorted(int(c) for c in np.unique(city_of[:n_core])):
            members = np.flatnonzero(city_of[:n_core] == c)
            order.append(rng.permutation(members))
        perm = np.concatenate(order)
    else:
        perm = rng.permutation(n_core)
    for k in range(n_core):
        edges.add((int(perm[k]), int(perm[(k + 1) % n_core])))

    attract = _pareto_weights(rng, n_core, spec.degree_exponent)
    prob = attract / attract.sum()
    # inverse-cdf sampling instead of rng.choice(p=...): choice rebuilds
    # the cumsum on every call, which is quadratic over the whole wiring
    # pass; searchsorted on a shared cdf draws the identical sequence
    cdf_core = prob.cumsum()
    cdf_core /= cdf_core[-1]

    by_city: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    if biased:
        for c in np.unique(city_of[:n_core]):
            members = np.flatnonzero(city_of[:n_core] == c)
            w = attract[members]
            cdf = (w / w.sum()).cumsum()
            cdf /= cdf[-1]
            by_city[int(c)] = (members, cdf)

    def core_target(city: int) -> int:
        """Attractiveness-weighted core pick, preferring the given city."""
        if biased and city in by_city:
            members, cdf = by_city[city]
            if members.size > 1 and rng.random() < spec.intra_city_bias:
                k = cdf.searchsorted(rng.random(), side="right")
                return int(members[min(int(k), members.size - 1)])
        k = cdf_core.searchsorted(rng.random(), side="right")
        return int(core[min(int(k), n_core - 1)])

    n_extra = int(round(spec.links_per_core_node * n_core))
    srcs = _weighted_pick(rng, core, prob, n_extra)
    for s in srcs.tolist():
        t = core_target(int(city_of[s]))
        if t != s:
            edges.add((s, t))

    skin_distance: dict[int, int] = {}
    n_direct_in = min(n_in, max(1, int(round(spec.skin_direct_fraction * n_in)))) if n_in else 0
    for i in range(in_lo, in_hi):
        if i - in_lo < n_direct_in:
            edges.add((i, core_target(int(city_of[i]))))
            skin_distance[i] = 1
        else:
            parent = int(rng.integers(in_lo, in_lo + n_direct_in))
            edges.add((i, parent))
            skin_distance[i] = 2
    n_direct_out = min(n_out, max(1, int(round(spec.skin_direct_fraction * n_out)))) if n_out else 0
    for i in range(out_lo, out_hi):
        if i - out_lo < n_direct_out:
            edges.add((core_target(int(city_of[i])), i))
            skin_distance[i] = 1
        else:
            parent = int(rng.integers(out_lo, out_lo + n_direct_out))
            edges.add((parent, i))
            skin_distance[i] = 2

    def side_parent(lo: int, hi: int, city: int) -> int:
        """Uniform pick from [lo, hi), preferring same-city members."""
        if biased:
            members = np.flatnonzero(city_of[lo:hi] == city)
            if members.size and rng.random() < spec.intra_city_bias:
                return lo + int(rng.choice(members))
        return int(rng.integers(lo, hi))

    te_in = n_te // 2 if n_in > 0 else 0
    if n_out == 0:
        te_in = n_te
    for i in range(te_lo, te_lo + te_in):
        edges.add((side_parent(in_lo, in_hi, int(city_of[i])), i))
    for i in range(te_lo + te_in, te_hi):
        edges.add((i, side_parent(out_lo, out_hi, int(city_of[i]))))

    i = outside_lo
    remaining = n - outside_lo
    while remaining > 0:
        if remaining == 3:
            edges.add((i, i + 1))
            edges.add((i + 1, i + 2))
            i += 3
            remaining -= 3
        else:
            edges.add((i, i + 1))
            i += 2
            remaining -= 2

    labels = {}
    for v in range(n):
        if v < n_core:
            name = "GSCC"
        elif v < in_hi:
            name = "IN"
        elif v < out_hi:
            name = "OUT"
        elif v < te_hi:
            name = "TE"
        else:
            name = "outside_GWCC"
        labels[v] = name
    counts = {
        "GSCC": n_core,
        "IN": n_in,
        "OUT": n_out,
        "TE": n_te,
        "outside_GWCC": n_outside,
    }
    return edges, labels, skin_distance, counts, n_core


def _block_edges(spec: ScenarioSpec, rng):
    blocks = spec.community_blocks
    nested = isinstance(blocks[0], (tuple, list))
    edges: set[tuple[int, int]] = set()
    paths: dict[int, tuple[int, ...]] = {}
    start = 0
    groups: list[list[np.ndarray]] = []
    for gi, entry in enumerate(blocks):
        sizes = list(entry) if nested else [entry]
        subs = []
        for si, size in enumerate(sizes):
            members = np.arange(start, start + size)
            for v in members:
                paths[int(v)] = (gi, si) if nested else (gi,)
            subs.append(members)
            start += size
        groups.append(subs)

    all_nodes = np.arange(spec.n_nodes)
    for gi, subs in enumerate(groups):
        group_nodes = np.concatenate(subs)
        for members in subs:
            for v in members.tolist():
                others = members[members != v]
                # dense blocks, sparse bridges: the split of a two-sub-block
                # group only pays inside the group's own codebook when the
                # crossing share stays well under ~0.2
                k = min(12, others.size)
                if k:
                    for t in rng.choice(others, size=k, replace=False).tolist():
                        edges.add((v, int(t)))
                if nested and group_nodes.size > members.size:
                    pool = group_nodes[~np.isin(group_nodes, members)]
                    for t in rng.choice(pool, size=min(2, pool.size), replace=False).tolist():
                        edges.add((v, int(t)))
                if rng.random() < 0.3:
                    t = int(rng.choice(all_nodes))
                    if t != v:
                        edges.add((v, t))
    return edges, paths


def _assign_coords(spec: ScenarioSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """(n, 2) lat/lon array plus per-node city index (-1 = background)."""
    n = spec.n_nodes
    lat_min, lat_max, lon_min, lon_max = spec.bounds
    coords = np.empty((n, 2))
    coords[:, 0] = rng.uniform(lat_min, lat_max, size=n)
    coords[:, 1] = rng.uniform(lon_min, lon_max, size=n)
    city_of = np.full(n, -1, dtype=np.int64)
    if spec.cities:
        perm = rng.permutation(n)
        pos = 0
        for ci, city in enumerate(spec.cities):
            take = int(round(city.share * n))
            members = perm[pos : pos + take]
            pos += take
            sigma_lat = city.spread_km / 111.32
            sigma_lon = city.spread_km / (111.32 * math.cos(math.radians(city.lat)))
            coords[members, 0] = city.lat + rng.normal(0.0, sigma_lat, members.size)
            coords[members, 1] = city.lon + rng.normal(0.0, sigma_lon, members.size)
            city_of[members] = ci
        np.clip(coords[:, 0], lat_min, lat_max, out=coords[:, 0])
        np.clip(coords[:, 1], lon_min, lon_max, out=coords[:, 1])
    return coords, city_of


def generate(spec: ScenarioSpec) -> tuple[list[TransferRecord], GroundTruth]:
    """Deterministically expand a spec into transfer records + ground truth."""
    rng = np.random.default_rng(spec.seed)
    coords, city_of = _assign_coords(spec, rng)

    if spec.community_blocks:
        mode = "blocks"
        edges, paths = _block_edges(spec, rng)
        bowtie = None
        skin_distance = None
        counts: dict[str, int] = {}
        hub_pool_hi = spec.n_nodes
    else:
        mode = "walnut"
        edges, labels, dist, counts, n_core = _walnut_edges(spec, rng, city_of)
        bowtie = {_node_name(v): name for v, name in labels.items()}
        skin_distance = {_node_name(v): d for v, d in dist.items()}
        paths = None
        hub_pool_hi = n_core

    hub_node = None
    hub_edges: set[tuple[int, int]] = set()
    if spec.hub_outflow:
        hub_node = 0
        lat_min, lat_max, lon_min, lon_max = spec.bounds
        coords[0] = ((lat_min + lat_max) / 2.0, (lon_min + lon_max) / 2.0)
        pool = np.arange(1, hub_pool_hi)
        take = min(spec.hub_links, pool.size)
        for t in rng.choice(pool, size=take, replace=False).tolist():
            hub_edges.add((0, int(t)))
        edges |= hub_edges

    edge_list = sorted(edges)
    m = len(edge_list)
    periodic = rng.random(m) < spec.periodic_share
    biweekly = periodic & (rng.random(m) < spec.biweekly_fraction)
    if hub_edges:
        for k, e in enumerate(edge_list):
            if e in hub_edges:
                periodic[k] = True
                biweekly[k] = False

    rec_src: list[int] = []
    rec_dst: list[int] = []
    months: list[np.ndarray] = []
    days: list[np.ndarray] = []
    hours: list[np.ndarray] = []
    minutes: list[np.ndarray] = []
    month_range = np.arange(MONTHS_IN_WINDOW)
    for k, (s, t) in enumerate(edge_list):
        if periodic[k]:
            day = int(rng.integers(1, 15 if biweekly[k] else 29))
            hour = int(rng.integers(0, 24))
            minute = int(rng.integers(0, 60))
            if biweekly[k]:
                n_ev = BIWEEKLY_EVENTS
                months.append(np.repeat(month_range, 2))
                days.append(np.tile([day, day + 14], MONTHS_IN_WINDOW))
            else:
                n_ev = MONTHLY_EVENTS
                months.append(month_range)
                days.append(np.full(n_ev, day))
            hours.append(np.full(n_ev, hour))
            minutes.append(np.full(n_ev, minute))
        else:
            n_ev = int(rng.geometric(0.75))
            months.append(rng.integers(0, MONTHS_IN_WINDOW, size=n_ev))
            days.append(rng.integers(1, 29, size=n_ev))
            hours.append(rng.integers(0, 24, size=n_ev))
            minutes.append(rng.integers(0, 60, size=n_ev))
        rec_src.extend([s] * n_ev)
        rec_dst.extend([t] * n_ev)

    month_arr = np.concatenate(months)
    day_arr = np.concatenate(days)
    hour_arr = np.concatenate(hours)
    minute_arr = np.concatenate(minutes)
    src_arr = np.asarray(rec_src)
    dst_arr = np.asarray(rec_dst)
    n_events = src_arr.size
    amounts = np.maximum(
        1, rng.lognormal(spec.amount_log_mean, spec.amount_log_sigma, n_events)
    ).astype(np.int64)

    order = np.lexsort((amounts, dst_arr, src_arr, minute_arr, hour_arr, day_arr, month_arr))
    records: list[TransferRecord] = []
    names = [_node_name(i) for i in range(spec.n_nodes)]
    coord_tuples = [(float(a), float(b)) for a, b in coords]
    for e in order.tolist():
        year, month = _month_of(int(month_arr[e]))
        s = int(src_arr[e])
        t = int(dst_arr[e])
        records.append(
            TransferRecord(
                timestamp=datetime(
                    year, month, int(day_arr[e]), int(hour_arr[e]), int(minute_arr[e])
                ),
                source=names[s],
                destination=names[t],
                amount=int(amounts[e]),
                source_kind="firm",
                destination_kind="firm",
                source_coord=coord_tuples[s],
                destination_coord=coord_tuples[t],
            )
        )

    truth = GroundTruth(
        mode=mode,
        n_nodes=spec.n_nodes,
        bowtie=bowtie,
        skin_distance=skin_distance,
        communities={_node_name(v): p for v, p in paths.items()} if paths else None,
        city={names[v]: int(city_of[v]) for v in range(spec.n_nodes)},
        hub=names[hub_node] if hub_node is not None else None,
        hub_targets=len(hub_edges),
        monthly_links=int((periodic & ~biweekly).sum()),
        biweekly_links=int(biweekly.sum()),
        component_counts=counts,
    )
    return records, truth


def _fmt_coord(coord: tuple[float, float] | None) -> str:
    if coord is None:
        return ","
    return f"{coord[0]!r},{coord[1]!r}"


def write_records(records: Iterable[TransferRecord], stream: IO[str]) -> None:
    """Emit records in the ingest log format, byte-stable for fixed input."""
    stream.write(",".join(COLUMNS) + "\n")
    for r in records:
        stream.write(
            f"{r.timestamp.isoformat()},{r.source},{r.destination},{r.amount},"
            f"{r.source_kind},{r.destination_kind},"
            f"{_fmt_coord(r.source_coord)},{_fmt_coord(r.destination_coord)}\n"
        )


def walnut_scenario(n_nodes: int = 2000, seed: int = 0, **overrides) -> ScenarioSpec:
    """Core-and-skins wiring at the reference class proportions."""
    return ScenarioSpec(n_nodes=n_nodes, seed=seed, **overrides)


def cities_scenario(
    n_nodes: int = 3000,
    seed: int = 0,
    n_cities: int = 6,
    hub: bool = True,
    **overrides,
) -> ScenarioSpec:
    """Walnut wiring plus clustered cities and an optional central hub.

    City centers sit far enough apart that a 10 km circle captures one
    city only; the hub sends monthly transfers to core nodes everywhere.
    """
    centers = [
        (34.12, 135.12),
        (34.12, 135.55),
        (34.16, 135.88),
        (34.50, 135.10),
        (34.52, 135.90),
        (34.85, 135.30),
        (34.85, 135.70),
        (34.48, 135.48),
    ]
    if not 1 <= n_cities <= len(centers):
        raise ValueError(f"supported city counts are 1..{len(centers)}")
    # nearly all accounts live in a city: a large diffuse background would
    # show up as its own delocalized factor next to the hub's
    share = 0.94 / n_cities
    cities = tuple(
        CitySpec(lat=lat, lon=lon, spread_km=2.5, share=share)
        for lat, lon in centers[:n_cities]
    )
    defaults = dict(
        cities=cities,
        hub_outflow=hub,
        periodic_share=0.4,
        intra_city_bias=0.9,
    )
    defaults.update(overrides)
    return ScenarioSpec(n_nodes=n_nodes, seed=seed, **defaults)


def blocks_scenario(
    n_nodes: int = 240,
    seed: int = 0,
    n_blocks: int = 4,
    nested: bool = False,
    **overrides,
) -> ScenarioSpec:
    """Equal community blocks; nested=True groups them pairwise."""
    if n_nodes % n_blocks:
        raise ValueError("node count must divide evenly into blocks")
    size = n_nodes // n_blocks
    if nested:
        if n_blocks % 2:
            raise ValueError("nested layout pairs blocks; use an even count")
        blocks = tuple((size, size) for _ in range(n_blocks // 2))
    else:
        blocks = tuple(size for _ in range(n_blocks))
    # no periodic links here: a 29x-weight payroll link inside an otherwise
    # uniform block reads as a module of its own and shreds the planting
    defaults = dict(periodic_share=0.0)
    defaults.update(overrides)
    return ScenarioSpec(
        n_nodes=n_nodes, seed=seed, community_blocks=blocks, **defaults
    )
