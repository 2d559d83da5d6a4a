import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloaksim.analysis.resonance import high_mode_source
from cloaksim.heatmap import (REGION_COLORS, decode_pnm, emit_heatmap, encode_pnm, raster_points,
                              region_map, sample_raster, scale_magnitude)
from cloaksim.media import RadialObject, Region, build_cloak
from cloaksim.spectral import solve_field


def test_constant_field_gives_uniform_image(tmp_path):
    px = emit_heatmap(np.full((7, 5), 3.0 + 4.0j), tmp_path / "c.pgm")
    assert px.shape == (7, 5)
    assert np.unique(px).size == 1


def test_pgm_header_and_payload_are_exact():
    px = np.arange(6, dtype=np.uint8).reshape(2, 3)
    data = encode_pnm(px)
    assert data == b"P5\n3 2\n255\n" + bytes(range(6))
    np.testing.assert_array_equal(decode_pnm(data), px)


def test_ppm_header_and_payload_are_exact():
    px = np.arange(2 * 2 * 3, dtype=np.uint8).reshape(2, 2, 3)
    data = encode_pnm(px)
    assert data.startswith(b"P6\n2 2\n255\n")
    assert len(data) == len(b"P6\n2 2\n255\n") + 12
    np.testing.assert_array_equal(decode_pnm(data), px)


def test_written_file_matches_encoder(tmp_path):
    vals = np.linspace(0, 1, 12).reshape(3, 4)
    px = emit_heatmap(vals, tmp_path / "ramp.ppm", palette="color")
    assert (tmp_path / "ramp.ppm").read_bytes() == encode_pnm(px)
    assert px.shape == (3, 4, 3)


@pytest.mark.parametrize("bad", [np.zeros((0, 4)), np.zeros((3, 0))])
def test_empty_raster_is_rejected(tmp_path, bad):
    with pytest.raises(ValueError):
        emit_heatmap(bad, tmp_path / "x.pgm")
    with pytest.raises(ValueError):
        encode_pnm(bad.astype(np.uint8))


def test_all_nan_raster_is_rejected():
    with pytest.raises(ValueError):
        scale_magnitude(np.full((2, 2), np.nan))


@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=50))
def test_scaling_stays_in_unit_interval(values):
    u = scale_magnitude(np.array(values), "linear")
    assert np.all((u >= 0) & (u <= 1))
    ul = scale_magnitude(np.array(values), "log")
    assert np.all((ul >= 0) & (ul <= 1))


def test_raster_orientation_top_row_is_largest_y():
    pts = raster_points((-1, 1, -1, 1), 4, 4)
    assert pts[0, 0, 1] > pts[-1, 0, 1]
    assert pts[0, 0, 0] < pts[0, -1, 0]


def test_pixels_outside_domain_are_blank():
    vals = sample_raster(lambda p: np.ones(p.shape[:-1]), (-2, 2, -2, 2), 9, 9, radius=1.0)
    assert np.isnan(vals[0, 0]) and vals[4, 4] == 1.0


def test_region_map_shows_each_region_in_radial_order():
    _, med = build_cloak(2, 1.0, 4.0, 6.0, RadialObject((1.0, 2.0), (2.0,)), 0.1)
    px = region_map(med, 121, 121, extent=6.0)
    colors = {tuple(c) for c in px.reshape(-1, 3)}
    assert {tuple(REGION_COLORS[k]) for k in range(5)} == colors
    # walk along the middle row from the centre to the edge
    row = px[60, 60:]
    x = raster_points((-6, 6, -6, 6), 121, 121)[60, 60:, 0]
    expect = np.select([x < 0.25, x < 1.0, x < 4.0, x < 6.0], [Region.CORE, Region.SHELL, Region.CLOAKED,
                                                              Region.EXTERIOR], 4)
    np.testing.assert_array_equal(row, REGION_COLORS[expect])


def test_region_map_rejects_three_dimensions():
    _, med = build_cloak(3, 1.0, 4.0, 6.0, None, 0.1)
    with pytest.raises(ValueError):
        region_map(med, 8, 8)


def test_resonant_log_map_peaks_at_the_outer_interface(tmp_path):
    _, med = build_cloak(2, 1.0, 8.0, 12.0, RadialObject((1.0, 2.0), (2.0,)), 1e-6)
    field = solve_field(med.radial_layers(), high_mode_source(2, 8.4, 16, 32))
    bounds = (-12, 12, -12, 12)
    vals = sample_raster(field.evaluate, bounds, 97, 97, radius=12.0)
    px = emit_heatmap(vals, tmp_path / "res.pgm", scale="log")
    inside = np.isfinite(vals)
    assert px[inside].max() == 255
    radius = np.linalg.norm(raster_points(bounds, 97, 97), axis=-1)
    brightest = radius[inside][np.argmax(np.abs(vals[inside]))]
    pixel = 24 / 97
    assert 8.0 - 2 * pixel <= brightest <= 8.4 + 2 * pixel
