import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from eg_gripper.errors import ConfigurationError, UnsupportedObjectError
from eg_gripper.geometry import (
    GripperGeometry,
    ObjectSpec,
    Regime,
    adjacency_map,
    build_layout,
    contact_extent,
    rotation_permutation,
    seal_threshold_diameter,
    solve_contact,
)

from oracles import hand_engaged_count


def test_default_layout_has_nineteen_dses(layout):
    assert len(layout) == 19
    assert [sum(1 for d in layout if d.ring_index == r) for r in range(4)] == [1, 6, 6, 6]


def test_central_neighbours_are_ring_one(layout):
    assert layout[0].neighbors == frozenset(range(1, 7))


def test_adjacency_symmetric_and_irreflexive(adjacency):
    for i, nbrs in adjacency.items():
        assert i not in nbrs
        for j in nbrs:
            assert i in adjacency[j]


def test_azimuths_uniform_within_ring(layout):
    for ring in (1, 2, 3):
        az = sorted(d.axis_azimuth for d in layout if d.ring_index == ring)
        gaps = [b - a for a, b in zip(az, az[1:])] + [az[0] + 2 * math.pi - az[-1]]
        assert gaps == pytest.approx([math.pi / 3] * 6)


def test_degenerate_rings_give_single_dse():
    g = GripperGeometry(ring_polar_angles=(0.0, math.pi / 6, math.pi / 3), ring_counts=(1, 0, 0))
    layout = build_layout(g)
    assert len(layout) == 1 and layout[0].neighbors == frozenset()


@pytest.mark.parametrize("steps", range(1, 6))
def test_rotation_is_a_graph_automorphism(layout, adjacency, steps):
    perm = rotation_permutation(layout, steps)
    assert sorted(perm) == list(range(19))
    for i, nbrs in adjacency.items():
        assert {perm[j] for j in nbrs} == set(adjacency[perm[i]])
        assert layout[perm[i]].ring_index == layout[i].ring_index


@pytest.mark.parametrize("r_cup,theta,expected", [(2.5, 9.2, 0.79941), (2.5, 0.0, 0.0), (2.5, 30.0, 2.5)])
def test_seal_threshold_examples(r_cup, theta, expected):
    g = GripperGeometry(cup_radius=r_cup, cup_effective_diameter=2 * r_cup, theta_seal_deg=theta)
    assert seal_threshold_diameter(g) == pytest.approx(expected, abs=1e-5)


@given(st.floats(0.5, 5.0), st.floats(0.5, 5.0), st.floats(1.0, 60.0))
def test_seal_threshold_increasing(r1, r2, theta):
    lo, hi = sorted((r1, r2))
    if hi - lo < 1e-6:
        return
    a = seal_threshold_diameter(GripperGeometry(cup_radius=lo, theta_seal_deg=theta))
    b = seal_threshold_diameter(GripperGeometry(cup_radius=hi, theta_seal_deg=theta))
    c = seal_threshold_diameter(GripperGeometry(cup_radius=lo, theta_seal_deg=theta + 1.0))
    assert b > a and c > a


@pytest.mark.parametrize("d", [5, 10, 12.5, 15, 20, 25, 30, 35, 40, 60, 90, 200])
def test_engaged_count_matches_hand_oracle(d, geometry):
    assert solve_contact(ObjectSpec.sphere(d), geometry).n_engaged == hand_engaged_count(d, geometry)


def test_ten_millimetre_tie_is_not_engaged(geometry):
    # ring-1 arc equals the 10 mm sphere's quarter meridian: ties are excluded
    assert solve_contact(ObjectSpec.sphere(10), geometry).engaged_ids == [0]


@given(st.floats(0.31, 300.0), st.floats(0.31, 300.0))
def test_engagement_monotone_in_diameter(d1, d2):
    g = GripperGeometry()
    lo, hi = sorted((d1, d2))
    assert solve_contact(ObjectSpec.sphere(lo), g).n_engaged <= solve_contact(ObjectSpec.sphere(hi), g).n_engaged


@given(st.floats(5.0, 500.0))
def test_contact_invariants(d):
    sol = solve_contact(ObjectSpec.sphere(d), GripperGeometry())
    assert sol.n_engaged == len(sol.engaged)
    assert sol.engaged_ids[0] == 0
    for e in sol.engaged:
        assert 0 <= e.beta < math.pi / 2
        assert 0 < e.theta_c <= math.pi / 2


@given(st.floats(45.0, 500.0))
def test_ring_two_beta_doubles_ring_one(d):
    sol = solve_contact(ObjectSpec.sphere(d), GripperGeometry())
    betas = {e.dse_id: e.beta for e in sol.engaged}
    if 7 in betas:
        assert betas[7] == pytest.approx(2 * betas[1], rel=1e-12)


def test_large_sphere_limit_engages_everything(geometry):
    sol = solve_contact(ObjectSpec.sphere(1e4), geometry)
    assert sol.n_engaged == 19
    assert max(e.beta for e in sol.engaged) < 0.01


def test_small_spheres_use_central_dse_only(geometry):
    cap = solve_contact(ObjectSpec.sphere(0.5), geometry)
    assert cap.regime is Regime.CAPILLARY_ONLY and cap.engaged_ids == [0]
    partial = solve_contact(ObjectSpec.sphere(3.0), geometry)
    assert partial.regime is Regime.PARTIAL_CUP and partial.engaged_ids == [0]
    boundary = seal_threshold_diameter(geometry)
    assert solve_contact(ObjectSpec.sphere(boundary * 0.999), geometry).regime is Regime.CAPILLARY_ONLY
    assert solve_contact(ObjectSpec.sphere(boundary * 1.001), geometry).regime is Regime.PARTIAL_CUP


def test_flat_engages_all_with_zero_beta(geometry):
    sol = solve_contact(ObjectSpec.flat(), geometry)
    assert sol.regime is Regime.FLAT and sol.n_engaged == 19
    assert all(e.beta == 0.0 and e.theta_c == math.pi / 2 for e in sol.engaged)


def test_liquid_has_no_contact(geometry):
    with pytest.raises(UnsupportedObjectError):
        solve_contact(ObjectSpec.liquid(1000.0), geometry)


def test_contact_extent_is_bounded_by_quarter_meridian(geometry):
    for r in (2.5, 5.0, 6.5):  # shallower than the wrap depth
        assert contact_extent(r, geometry) == pytest.approx(r * math.pi / 2)
    assert contact_extent(50.0, geometry) < 50.0 * math.pi / 2


@pytest.mark.parametrize("kwargs", [
    {"membrane_diameter": -1.0},
    {"cup_radius": 0.0},
    {"capillary_inner_diameter": 6.0},
    {"ring_counts": (1, 6)},
    {"ring_polar_angles": (0.0, 0.5, 0.4, 1.0)},
    {"ring_polar_angles": (0.0, 0.5, 1.0, 2.0)},
    {"theta_seal_deg": 95.0},
])
def test_invalid_geometry_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        GripperGeometry(**kwargs)


def test_geometry_from_dict():
    assert GripperGeometry.from_dict({"wrap_depth": 5.0}).wrap_depth == 5.0
    with pytest.raises(ConfigurationError):
        GripperGeometry.from_dict({"not_a_field": 1})


def test_object_spec_validation():
    with pytest.raises(ConfigurationError):
        ObjectSpec.sphere(0.0)
    with pytest.raises(ConfigurationError):
        ObjectSpec.sphere(1.0, mass=-1.0)
    with pytest.raises(ConfigurationError):
        ObjectSpec.liquid(0.0)
    with pytest.raises(AttributeError):
        ObjectSpec.flat().diameter


def test_adjacency_map_roundtrip(layout):
    assert adjacency_map(layout)[0] == layout[0].neighbors
