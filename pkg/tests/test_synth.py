"""Generator contracts: determinism, planted truth, schedules, guard rails."""

import io
from collections import Counter
from datetime import datetime

import numpy as np
import pytest

from moneyflow import (
    CitySpec,
    ScenarioSpec,
    aggregate,
    blocks_scenario,
    build_network,
    cities_scenario,
    classify_bowtie,
    distance_profile,
    generate,
    walnut_scenario,
    write_records,
)
from moneyflow.bowtie import COMPONENT_NAMES
from moneyflow.synth import BIWEEKLY_EVENTS, MONTHLY_EVENTS, MONTHS_IN_WINDOW


def render(records):
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


@pytest.fixture(scope="module")
def walnut():
    spec = walnut_scenario(n_nodes=2000, seed=0)
    records, truth = generate(spec)
    return spec, records, truth


class TestDeterminism:
    def test_byte_identical_reruns(self):
        spec = walnut_scenario(n_nodes=300, seed=3)
        a, truth_a = generate(spec)
        b, truth_b = generate(spec)
        assert render(a) == render(b)
        assert truth_a == truth_b

    def test_seed_changes_the_log(self):
        a, _ = generate(walnut_scenario(n_nodes=300, seed=3))
        b, _ = generate(walnut_scenario(n_nodes=300, seed=4))
        assert render(a) != render(b)


class TestRecordShape:
    def test_constants(self):
        assert MONTHS_IN_WINDOW == 29
        assert MONTHLY_EVENTS == 29
        assert BIWEEKLY_EVENTS == 58

    def test_window_and_fields(self, walnut):
        spec, records, _ = walnut
        lo = datetime(2017, 3, 1)
        hi = datetime(2019, 8, 1)
        months = set()
        for r in records:
            assert lo <= r.timestamp < hi
            months.add((r.timestamp.year, r.timestamp.month))
            assert r.source != r.destination
            assert r.amount >= 1
            assert r.source_kind == "firm" and r.destination_kind == "firm"
            for coord in (r.source_coord, r.destination_coord):
                lat, lon = coord
                assert spec.bounds[0] <= lat <= spec.bounds[1]
                assert spec.bounds[2] <= lon <= spec.bounds[3]
        assert len(months) == MONTHS_IN_WINDOW  # every month sees traffic

    def test_account_id_format(self, walnut):
        _, records, _ = walnut
        names = {r.source for r in records} | {r.destination for r in records}
        assert all(
            len(n) == 7 and n[0] == "F" and n[1:].isdigit() for n in names
        )

    def test_periodic_schedules(self, walnut):
        _, records, truth = walnut
        links = aggregate(records)
        by_freq = Counter(l.frequency for l in links)
        assert by_freq[MONTHLY_EVENTS] == truth.monthly_links
        assert by_freq[BIWEEKLY_EVENTS] == truth.biweekly_links
        assert truth.monthly_links > 0 and truth.biweekly_links > 0

        # a monthly link fires once a month, same day and time
        monthly = next(l for l in links if l.frequency == MONTHLY_EVENTS)
        stamps = sorted(
            r.timestamp
            for r in records
            if r.source == monthly.source and r.destination == monthly.destination
        )
        assert len(stamps) == MONTHLY_EVENTS
        assert len({(t.day, t.hour, t.minute) for t in stamps}) == 1
        assert [(t.year, t.month) for t in stamps] == sorted(
            {(t.year, t.month) for t in stamps}
        )

    def test_conservation(self, walnut):
        _, records, _ = walnut
        links = aggregate(records)
        assert sum(l.flow for l in links) == sum(r.amount for r in records)
        assert sum(l.frequency for l in links) == len(records)


class TestWalnutTruth:
    def test_classification_matches_planting(self, walnut):
        _, records, truth = walnut
        net = build_network(aggregate(records))
        part = classify_bowtie(net)
        for i, name in enumerate(net.node_ids):
            assert COMPONENT_NAMES[part.labels[i]] == truth.bowtie[name]

    def test_default_proportions(self, walnut):
        spec, _, truth = walnut
        assert (spec.gscc_frac, spec.in_frac, spec.out_frac, spec.te_frac) == (
            0.382,
            0.149,
            0.373,
            0.096,
        )
        assert truth.component_counts == {
            "GSCC": 764,
            "IN": 298,
            "OUT": 746,
            "TE": 192,
            "outside_GWCC": 0,
        }

    def test_skin_distances(self, walnut):
        _, records, truth = walnut
        net = build_network(aggregate(records))
        part = classify_bowtie(net)
        profile = distance_profile(net, part)

        planted_in = Counter(
            truth.skin_distance[name]
            for name in truth.skin_distance
            if truth.bowtie[name] == "IN"
        )
        planted_out = Counter(
            truth.skin_distance[name]
            for name in truth.skin_distance
            if truth.bowtie[name] == "OUT"
        )
        assert profile.in_to_gscc == dict(planted_in)
        assert profile.gscc_to_out == dict(planted_out)
        assert set(profile.in_to_gscc) <= {1, 2}
        assert profile.in_ratios()[1] >= 0.95
        assert profile.out_ratios()[1] >= 0.95

    def test_outside_components(self):
        spec = walnut_scenario(
            n_nodes=405,
            seed=1,
            gscc_frac=0.4,
            in_frac=0.15,
            out_frac=0.25,
            te_frac=0.1,
        )
        records, truth = generate(spec)
        outside = [n for n, c in truth.bowtie.items() if c == "outside_GWCC"]
        assert len(outside) == truth.component_counts["outside_GWCC"] > 0

        net = build_network(aggregate(records))
        part = classify_bowtie(net)
        from moneyflow.bowtie import OUTSIDE, weakly_connected_components

        wcc, _ = weakly_connected_components(net)
        sizes = Counter(
            wcc[i] for i in range(net.n_nodes) if part.labels[i] == OUTSIDE
        )
        assert sizes and all(2 <= s <= 3 for s in sizes.values())

    def test_heavier_tail_for_lower_exponent(self):
        def top_degrees(exponent):
            records, truth = generate(
                walnut_scenario(n_nodes=5000, seed=0, degree_exponent=exponent)
            )
            net = build_network(aggregate(records))
            deg = np.bincount(net.src, minlength=net.n_nodes) + np.bincount(
                net.dst, minlength=net.n_nodes
            )
            core = [
                i
                for i, name in enumerate(net.node_ids)
                if truth.bowtie[name] == "GSCC"
            ]
            return np.sort(deg[core])[::-1].astype(float)

        def hill(tail):
            return 1.0 / float(np.mean(np.log(tail[:-1] / tail[-1])))

        heavy = top_degrees(2.5)
        light = top_degrees(3.5)
        assert heavy[0] > light[0]
        # CCDF exponent tracks degree_exponent - 1, loosely at this size
        assert 1.2 < hill(heavy[:150]) < 2.3
        assert hill(light[:150]) > 2.6


@pytest.fixture(scope="module")
def cities():
    spec = cities_scenario(n_nodes=600, seed=2, hub=True)
    records, truth = generate(spec)
    return spec, records, truth


class TestCitiesAndHub:
    def test_city_assignment(self, cities):
        spec, records, truth = cities
        members = Counter(truth.city.values())
        assert set(members) <= {-1, 0, 1, 2, 3, 4, 5}
        for ci, city in enumerate(spec.cities):
            assert members[ci] == round(city.share * 600)

        coords = {}
        for r in records:
            coords[r.source] = r.source_coord
            coords[r.destination] = r.destination_coord
        for name, ci in truth.city.items():
            if ci < 0 or name not in coords:
                continue
            lat, lon = coords[name]
            city = spec.cities[ci]
            # gaussian spread of 2.5 km: everything lands within ~5 sigma
            assert abs(lat - city.lat) < 0.15
            assert abs(lon - city.lon) < 0.15

    def test_hub(self, cities):
        spec, records, truth = cities
        assert truth.hub == "F000000"
        net = build_network(aggregate(records))
        hub = net.index_of[truth.hub]

        hub_coord = next(
            r.source_coord for r in records if r.source == truth.hub
        )
        assert hub_coord == (34.5, 135.5)

        out_links = np.flatnonzero(net.src == hub)
        assert out_links.size == truth.hub_targets
        n_core = truth.component_counts["GSCC"]
        assert truth.hub_targets == min(spec.hub_links, n_core - 1)
        # forced monthly schedule on every hub link
        dsts = set(net.dst[out_links].tolist())
        assert all(net.freq[l] >= MONTHLY_EVENTS for l in out_links)
        assert all(truth.bowtie[net.node_ids[d]] == "GSCC" for d in dsts)

    def test_hubless_variant(self):
        _, truth = generate(cities_scenario(n_nodes=200, seed=0, hub=False))
        assert truth.hub is None
        assert truth.hub_targets == 0


class TestBlocksTruth:
    def test_flat_paths(self):
        _, truth = generate(blocks_scenario(n_nodes=60, seed=0, n_blocks=3))
        assert truth.mode == "blocks"
        assert truth.bowtie is None and truth.skin_distance is None
        paths = Counter(truth.communities.values())
        assert paths == {(0,): 20, (1,): 20, (2,): 20}

    def test_nested_paths(self):
        _, truth = generate(
            blocks_scenario(n_nodes=80, seed=0, n_blocks=4, nested=True)
        )
        paths = Counter(truth.communities.values())
        assert paths == {(0, 0): 20, (0, 1): 20, (1, 0): 20, (1, 1): 20}

    def test_walnut_mode_fields(self, walnut):
        _, _, truth = walnut
        assert truth.mode == "walnut"
        assert truth.communities is None
        assert set(truth.bowtie) == set(truth.city)


class TestValidation:
    def test_fraction_rails(self):
        with pytest.raises(ValueError, match="sum to at most 1"):
            ScenarioSpec(gscc_frac=0.6, in_frac=0.3, out_frac=0.2)
        with pytest.raises(ValueError, match="lie in"):
            ScenarioSpec(gscc_frac=-0.1)
        with pytest.raises(ValueError, match="exceed 1"):
            ScenarioSpec(degree_exponent=1.0)
        with pytest.raises(ValueError, match="at least two"):
            ScenarioSpec(n_nodes=1)
        with pytest.raises(ValueError, match="non-negative"):
            ScenarioSpec(seed=-1)
        with pytest.raises(ValueError, match="shares"):
            ScenarioSpec(periodic_share=1.5)

    def test_city_share_rail(self):
        with pytest.raises(ValueError, match="city shares"):
            ScenarioSpec(
                cities=(
                    CitySpec(34.5, 135.5, 2.0, 0.7),
                    CitySpec(34.2, 135.2, 2.0, 0.5),
                )
            )
        with pytest.raises(ValueError, match="city counts"):
            cities_scenario(n_cities=9)

    def test_block_rails(self):
        with pytest.raises(ValueError, match="divide evenly"):
            blocks_scenario(n_nodes=100, n_blocks=3)
        with pytest.raises(ValueError, match="pairs blocks"):
            blocks_scenario(n_nodes=90, n_blocks=3, nested=True)
        with pytest.raises(ValueError, match="sum to the node count"):
            ScenarioSpec(n_nodes=50, community_blocks=(20, 20))

    def test_walnut_wiring_rails(self):
        # a single node outside the GWCC cannot form a 2-3 node component
        spec = walnut_scenario(
            n_nodes=11,
            gscc_frac=10 / 11,
            in_frac=0.0,
            out_frac=0.0,
            te_frac=0.0,
        )
        with pytest.raises(ValueError, match="outside the GWCC"):
            generate(spec)
        with pytest.raises(ValueError, match="fewer than 2"):
            generate(walnut_scenario(n_nodes=20, gscc_frac=0.05, in_frac=0.4,
                                     out_frac=0.4, te_frac=0.0))
        with pytest.raises(ValueError, match="tendrils"):
            generate(walnut_scenario(n_nodes=20, gscc_frac=0.5, in_frac=0.0,
                                     out_frac=0.0, te_frac=0.5))
