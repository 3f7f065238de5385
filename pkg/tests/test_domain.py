import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plumeid.domain import (
    GridSpec,
    ScalarField,
    SourceParams,
    TRUTH_SOURCE,
    TransportParams,
    WellNetwork,
    default_well_network,
    node_at,
    plume_mass,
    read_field,
    read_field_csv,
    render_initial_condition,
    write_field,
    write_field_csv,
)

GRID = GridSpec()


def test_default_grid_spacing():
    assert GRID.spacing1 == 25.0
    assert GRID.spacing2 == 25.0
    assert GRID.shape == (41, 81)
    assert GRID.n_nodes == 81 * 41


@pytest.mark.parametrize("kwargs", [
    dict(n1=1), dict(n2=0), dict(length1=0.0), dict(length2=-5.0),
])
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        GridSpec(**kwargs)


def test_scalar_field_validation():
    with pytest.raises(ValueError):
        ScalarField(GRID, np.zeros((81, 41)))  # transposed shape
    bad = np.zeros(GRID.shape)
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        ScalarField(GRID, bad)
    field = ScalarField(GRID, np.zeros(GRID.shape))
    with pytest.raises(ValueError):
        field.values[0, 0] = 1.0  # frozen after construction


def test_transport_params_validation():
    TransportParams()
    with pytest.raises(ValueError):
        TransportParams(porosity=0.0)
    with pytest.raises(ValueError):
        TransportParams(molecular_diffusion=-1.0)
    with pytest.raises(ValueError):
        TransportParams(dispersivity_l=0.0)
    with pytest.raises(ValueError):
        TransportParams(dispersivity_ratio=0.5)


def test_source_params_vector_round_trip():
    vec = TRUTH_SOURCE.to_vector()
    assert vec.tolist() == [325.0, 325.0, 562.5, 625.0, 30.0, 15.0, 50.0, 17.0]
    assert SourceParams.from_vector(vec) == TRUTH_SOURCE
    with pytest.raises(ValueError):
        SourceParams.from_vector(np.arange(7.0))


# --- render_initial_condition -------------------------------------------------

def test_render_truth_value_at_first_center():
    # Contribution of the second plume at (325, 325) is below 1e-100, so the
    # nodal value is the first plume's strength to machine precision.
    field = render_initial_condition(TRUTH_SOURCE, GRID)
    i, j = node_at(GRID, (325.0, 325.0))
    cross = 50.0 * math.exp(-(((325 - 562.5) ** 2 + (325 - 625) ** 2) / (2 * 17.0 ** 2)))
    assert cross < 1e-100
    assert field.values[j, i] == pytest.approx(30.0, abs=1e-12)


def test_render_zero_strengths_gives_zero_field():
    m = SourceParams(((325.0, 325.0), (562.5, 625.0)), (0.0, 0.0), (15.0, 17.0))
    field = render_initial_condition(m, GRID)
    assert np.all(field.values == 0.0)


def test_render_single_plume_profile():
    m = SourceParams(((500.0, 500.0),), (1.0,), (25.0,))
    field = render_initial_condition(m, GRID)
    i, j = node_at(GRID, (500.0, 500.0))
    assert field.values[j, i] == pytest.approx(1.0, abs=1e-15)
    assert field.values[j, i + 1] == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_render_rejects_non_positive_width():
    m = SourceParams(((100.0, 100.0),), (1.0,), (0.0,))
    with pytest.raises(ValueError):
        render_initial_condition(m, GRID)


@settings(max_examples=25, deadline=None)
@given(
    x1=st.floats(0, 700), y1=st.floats(50, 900),
    x2=st.floats(0, 700), y2=st.floats(50, 900),
    s1=st.floats(0, 100), s2=st.floats(0, 100),
    w1=st.floats(13, 20), w2=st.floats(13, 20),
)
def test_render_is_permutation_symmetric(x1, y1, x2, y2, s1, s2, w1, w2):
    a = SourceParams(((x1, y1), (x2, y2)), (s1, s2), (w1, w2))
    b = SourceParams(((x2, y2), (x1, y1)), (s2, s1), (w2, w1))
    fa = render_initial_condition(a, GRID)
    fb = render_initial_condition(b, GRID)
    np.testing.assert_allclose(fa.values, fb.values, rtol=0, atol=1e-12)


def test_render_bounded_by_total_strength():
    field = render_initial_condition(TRUTH_SOURCE, GRID)
    assert field.values.min() >= 0.0
    assert field.values.max() <= sum(TRUTH_SOURCE.strengths)


# --- plume_mass ---------------------------------------------------------------

def test_plume_mass_reproduces_reference_masses():
    field = render_initial_condition(TRUTH_SOURCE, GRID)
    m1 = plume_mass(field, (325.0, 325.0), porosity=0.3)
    m2 = plume_mass(field, (562.5, 625.0), porosity=0.3)
    # Published reference values for the production configuration.
    assert m1 == pytest.approx(20.4244, rel=0.01)
    assert m2 == pytest.approx(43.5802, rel=0.01)
    # High-precision direct-sum values (frozen from an mpmath evaluation).
    assert m1 == pytest.approx(20.42435391, rel=1e-8)
    assert m2 == pytest.approx(43.58017122, rel=1e-8)


def test_plume_mass_zero_field():
    field = ScalarField(GRID, np.zeros(GRID.shape))
    assert plume_mass(field, (500.0, 500.0), porosity=0.3) == 0.0


def test_plume_mass_window_outside_domain():
    field = ScalarField(GRID, np.zeros(GRID.shape))
    with pytest.raises(ValueError):
        plume_mass(field, (2500.0, 500.0), porosity=0.3)


def test_plume_mass_additive_and_linear():
    m = SourceParams(((400.0, 300.0), (1500.0, 700.0)), (30.0, 50.0), (15.0, 17.0))
    field = render_initial_condition(m, GRID)
    # Cross-terms between the well-separated plumes are negligible.
    single1 = render_initial_condition(SourceParams(((400.0, 300.0),), (30.0,), (15.0,)), GRID)
    cross = plume_mass(field, (400.0, 300.0), 0.3) - plume_mass(single1, (400.0, 300.0), 0.3)
    assert abs(cross) < 1e-12
    # Masses over disjoint windows add up to the union sum.
    lone = plume_mass(field, (400.0, 300.0), 0.3) + plume_mass(field, (1500.0, 700.0), 0.3)
    total = 0.3 * field.values.sum()  # tails outside the windows are ~1e-11 relative
    assert lone == pytest.approx(total, rel=1e-9)
    # Linear in porosity and in each strength.
    assert plume_mass(field, (400.0, 300.0), 0.6) == pytest.approx(
        2 * plume_mass(field, (400.0, 300.0), 0.3), rel=1e-14)
    m2 = SourceParams(((400.0, 300.0), (1500.0, 700.0)), (60.0, 50.0), (15.0, 17.0))
    f2 = render_initial_condition(m2, GRID)
    assert plume_mass(f2, (400.0, 300.0), 0.3) == pytest.approx(
        2 * plume_mass(field, (400.0, 300.0), 0.3), rel=1e-12)


def _quadrature_mass(center, strength, width, porosity, half_width=100.0, refine=50):
    """Independent oracle: continuous window integral by fine midpoint quadrature."""
    step = 25.0 / refine
    x = np.arange(center[0] - half_width, center[0] + half_width, step) + step / 2
    y = np.arange(center[1] - half_width, center[1] + half_width, step) + step / 2
    xx, yy = np.meshgrid(x, y)
    c = strength * np.exp(-((xx - center[0]) ** 2 + (yy - center[1]) ** 2) / (2 * width ** 2))
    return porosity * c.sum() * step * step


def test_plume_mass_matches_continuous_integral():
    m = SourceParams(((1000.0, 500.0),), (10.0,), (20.0,))
    field = render_initial_condition(m, GRID)
    discrete = plume_mass(field, (1000.0, 500.0), 0.3)
    analytic = 0.3 * 10.0 * 2 * math.pi * 20.0 ** 2 / 625.0
    quad = _quadrature_mass((1000.0, 500.0), 10.0, 20.0, 0.3) / 625.0
    assert quad == pytest.approx(analytic, rel=1e-5)  # window truncation ~4e-7
    assert discrete == pytest.approx(quad, rel=0.02)
    assert discrete == pytest.approx(analytic, rel=0.02)


# --- node_at ------------------------------------------------------------------

def test_node_at_examples():
    assert node_at(GRID, (0.0, 0.0)) == (0, 0)
    assert node_at(GRID, (2000.0, 1000.0)) == (80, 40)
    assert node_at(GRID, (26.0, 0.0)) == (1, 0)
    assert node_at(GRID, (12.5, 12.5)) == (1, 1)  # midpoints round up
    with pytest.raises(ValueError):
        node_at(GRID, (-1.0, 0.0))
    with pytest.raises(ValueError):
        node_at(GRID, (0.0, 1000.1))


# --- wells --------------------------------------------------------------------

def test_default_well_network():
    wells = default_well_network(GRID)
    assert wells.n_wells == 20
    coords = wells.coordinates()
    assert set(coords[:, 0]) == {800.0, 1050.0, 1300.0, 1550.0, 1800.0}
    assert set(coords[:, 1]) == {150.0, 400.0, 650.0, 900.0}


def test_well_network_validation():
    with pytest.raises(ValueError):
        WellNetwork(GRID, ((0, 5),))  # on the boundary
    with pytest.raises(ValueError):
        WellNetwork(GRID, ((3, 5), (3, 5)))  # duplicate


# --- field file formats -------------------------------------------------------

def test_binary_field_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    field = ScalarField(GRID, rng.standard_normal(GRID.shape))
    path = tmp_path / "field.plf"
    write_field(field, path)
    raw = path.read_bytes()
    assert raw[:4] == b"PLF1"
    assert len(raw) == 12 + 8 * 81 * 41
    back = read_field(path)
    assert back.grid == GRID
    np.testing.assert_array_equal(back.values, field.values)


def test_binary_field_layout_is_x1_fastest(tmp_path):
    values = np.arange(GRID.n_nodes, dtype=float).reshape(GRID.shape)
    path = tmp_path / "field.plf"
    write_field(ScalarField(GRID, values), path)
    payload = np.frombuffer(path.read_bytes()[12:], dtype="<f8")
    # Walking the flat payload, the x1 index increments fastest.
    assert payload[0] == values[0, 0]
    assert payload[1] == values[0, 1]
    assert payload[GRID.n1] == values[1, 0]


def test_binary_field_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.plf"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(ValueError):
        read_field(path)


def test_csv_field_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    field = ScalarField(GridSpec(5, 4, 100.0, 60.0), rng.standard_normal((4, 5)))
    path = tmp_path / "field.csv"
    write_field_csv(field, path)
    back = read_field_csv(path, lengths=(100.0, 60.0))
    np.testing.assert_array_equal(back.values, field.values)
