from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from oamspdc.hologram import (
    Blaze,
    SlmPanel,
    encode_hologram,
    panel_coordinates,
    quantize,
    read_image,
    sinc_amplitude,
    sinc_amplitude_inverse,
    superposition_field_on_panel,
    write_image,
    write_sidecar,
)
from oamspdc.lgmodes import adjusted_waist

GOLDEN = Path(__file__).parent / "golden"
SMALL = SlmPanel(64, 48, 8e-6)
SQUARE = SlmPanel(257, 257, 8e-6)
W0 = 1e-4

GOLDEN_CASES = {
    "pure_l2": ([(2, 1.0)], Blaze(8.0, 0.0)),
    "mes_pump": ([(-2, math.sqrt(2.5)), (0, 1.0), (2, math.sqrt(2.5))], Blaze(8.0, 0.3)),
    "blaze_only": ([(0, 1.0)], Blaze(6.0, math.pi / 2)),
}


def render(name: str) -> bytes:
    terms, blaze = GOLDEN_CASES[name]
    if name == "blaze_only":
        field = np.ones((SMALL.height, SMALL.width), complex)
    else:
        field = superposition_field_on_panel(terms, 2e-4, SMALL)
    holo = encode_hologram(field, SMALL, blaze)
    return b"P5\n%d %d\n255\n" % (SMALL.width, SMALL.height) + holo.levels.tobytes()


def bisect_inverse(a: float) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        val = 1.0 if mid == 1 else math.sin(math.pi * (mid - 1)) / (math.pi * (mid - 1))
        if val < a:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_sinc_inverse_against_bisection():
    grid = np.linspace(0, 1, 2001)
    got = sinc_amplitude_inverse(grid)
    ref = np.array([bisect_inverse(a) for a in grid])
    assert np.max(np.abs(got - ref)) < 1e-6
    assert np.max(np.abs(sinc_amplitude(got) - grid)) < 1e-5


def test_sinc_inverse_boundaries():
    assert sinc_amplitude_inverse(0.0) == 0.0
    assert sinc_amplitude_inverse(1.0) == 1.0
    assert np.all(np.diff(sinc_amplitude_inverse(np.linspace(0, 1, 501))) > 0)
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(ValueError):
            sinc_amplitude_inverse(bad)


def test_gaussian_hologram_radially_symmetric():
    field = superposition_field_on_panel([(0, np.exp(1j))], W0, SQUARE)
    holo = encode_hologram(field, SQUARE, Blaze(None))
    ph = holo.phase
    assert np.allclose(ph, np.rot90(ph, 2), atol=1e-12)
    assert np.allclose(ph, ph.T, atol=1e-12)
    assert abs(ph[128, 128] - 1.0) < 1e-6  # peak amplitude carries the full phase


def test_charge_two_winds_4pi():
    field = superposition_field_on_panel([(2, 1.0)], W0, SQUARE)
    holo = encode_hologram(field, SQUARE, Blaze(None))
    r = adjusted_waist(2, W0) / SQUARE.pitch
    phis = np.linspace(0, 2 * np.pi, 721)
    cols = np.rint(128 + r * np.cos(phis)).astype(int)
    rows = np.rint(128 - r * np.sin(phis)).astype(int)
    total = np.unwrap(holo.phase[rows, cols])
    assert abs((total[-1] - total[0]) - 4 * np.pi) < 0.2


def test_ring_radius_within_one_pixel():
    for L in (1, 2, 3):
        field = superposition_field_on_panel([(L, 1.0)], W0, SQUARE)
        profile = np.abs(field[128, 128:])
        r_peak = adjusted_waist(L, W0) / math.sqrt(2) * math.sqrt(L) / SQUARE.pitch
        assert abs(np.argmax(profile) - r_peak) <= 1.0


def test_opposite_charges_make_petals():
    field = superposition_field_on_panel([(1, 1.0), (-1, 1.0)], W0, SQUARE, adjust_waists=False)
    r = W0 / math.sqrt(2) / SQUARE.pitch
    phis = np.linspace(0, 2 * np.pi, 73)[:-1]
    cols = np.rint(128 + r * np.cos(phis)).astype(int)
    rows = np.rint(128 - r * np.sin(phis)).astype(int)
    XP, YP, _, _ = panel_coordinates(SQUARE)
    ang = np.arctan2(YP[rows, cols], XP[rows, cols])
    I = np.abs(field[rows, cols]) ** 2
    assert np.allclose(I / I.max(), np.cos(ang) ** 2 / (np.cos(ang) ** 2).max(), atol=0.05)


def test_blaze_is_linear_ramp():
    panel = SlmPanel(32, 8, 8e-6)
    holo = encode_hologram(np.ones((8, 32), complex), panel, Blaze(8.0, 0.0))
    row = holo.levels[3].astype(int)
    steps = np.mod(np.diff(row), 256)
    assert set(steps) == {32}
    vert = encode_hologram(np.ones((8, 32), complex), panel, Blaze(4.0, math.pi / 2)).levels
    assert np.all(vert == vert[:, :1])


def test_phase_range_and_quantization():
    field = superposition_field_on_panel(GOLDEN_CASES["mes_pump"][0], 2e-4, SMALL)
    holo = encode_hologram(field, SMALL, Blaze(8.0, 0.3))
    assert holo.phase.min() >= 0 and holo.phase.max() < 2 * np.pi
    assert holo.levels.dtype == np.uint8
    assert quantize(np.array([2 * np.pi - 1e-9]), 256)[0] == 0
    assert quantize(np.array([np.pi]), 256)[0] == 128
    assert quantize(np.array([np.pi]), 16)[0] == 8


def test_offset_center_moves_pattern():
    panel = SlmPanel(65, 65, 8e-6, center_offset=(5.0, -3.0))
    field = superposition_field_on_panel([(0, 1.0)], 5e-5, panel)
    r, c = np.unravel_index(np.argmax(np.abs(field)), field.shape)
    assert (r, c) == (32 + 3, 32 + 5)


def test_image_round_trip_and_header(tmp_path):
    holo = encode_hologram(superposition_field_on_panel([(2, 1.0)], 2e-4, SMALL), SMALL)
    path = tmp_path / "h.pgm"
    write_image(holo, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n64 48\n255\n")
    assert len(raw) == len(b"P5\n64 48\n255\n") + 64 * 48
    assert np.array_equal(read_image(path), holo.levels)
    commented = tmp_path / "c.pgm"
    commented.write_bytes(b"P5\n# note\n64 48\n255\n" + holo.levels.tobytes())
    assert np.array_equal(read_image(commented), holo.levels)
    (tmp_path / "t.pgm").write_bytes(raw[:-5])
    with pytest.raises(ValueError):
        read_image(tmp_path / "t.pgm")


def test_constant_field_golden_bytes(tmp_path):
    panel = SlmPanel(4, 4, 8e-6)
    holo = encode_hologram(np.ones((4, 4), complex), panel, Blaze(None))
    path = tmp_path / "z.pgm"
    write_image(holo, path)
    assert path.read_bytes() == b"P5\n4 4\n255\n" + bytes(16)


def test_encode_validation():
    with pytest.raises(ValueError):
        encode_hologram(np.zeros((48, 64), complex), SMALL)
    with pytest.raises(ValueError):
        encode_hologram(np.ones((10, 10), complex), SMALL)
    with pytest.raises(ValueError):
        SlmPanel(0, 10)
    with pytest.raises(ValueError):
        superposition_field_on_panel([], W0, SMALL)


def test_deterministic_output():
    assert render("mes_pump") == render("mes_pump")


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden_images(name):
    assert render(name) == (GOLDEN / f"{name}.pgm").read_bytes()


def test_sidecar(tmp_path):
    import json

    path = tmp_path / "h.json"
    write_sidecar(path, SMALL, [(2, 1.0), (-2, 1j)], W0, Blaze())
    meta = json.loads(path.read_text())
    assert meta["terms"][1] == {"L": -2, "re": 0.0, "im": 1.0}
    assert abs(meta["adjusted_waists_m"]["2"] - W0 * 15 / 8) < 1e-18
