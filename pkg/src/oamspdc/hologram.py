"""Amplitude-encoded phase-only SLM holograms for LG superpositions.

Each pixel carries ``M(A) * mod(Arg E + blaze, 2 pi)`` where ``A = |E| / max|E|``
and ``M`` inverts ``sinc(pi (M - 1)) = A`` (normalized ``sin x / x``). Lowering
``M`` pushes light out of the first diffraction order, so the order carries
the target amplitude as well as the phase.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .lgmodes import BeamGeometry, LGIndex, adjusted_waist, lg_field

__all__ = [
    "SlmPanel",
    "Blaze",
    "HologramImage",
    "sinc_amplitude_inverse",
    "sinc_amplitude",
    "panel_coordinates",
    "superposition_field_on_panel",
    "encode_hologram",
    "write_image",
    "read_image",
    "write_sidecar",
]

TWO_PI = 2.0 * math.pi
LOOKUP_KNOTS = 1024


@dataclass(frozen=True)
class SlmPanel:
    width: int = 1920
    height: int = 1080
    pitch: float = 8e-6
    depth: int = 256
    center_offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("panel dimensions must be positive")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if self.depth < 2 or self.depth > 256:
            raise ValueError("depth must lie in 2..256 for 8-bit output")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center_offset"] = list(self.center_offset)
        return d


@dataclass(frozen=True)
class Blaze:
    """Linear grating ``2 pi (x cos a + y sin a) / period`` in pixel units; ``period=None`` disables it."""

    period: float | None = 8.0
    angle: float = 0.0

    def phase(self, xp: np.ndarray, yp: np.ndarray) -> np.ndarray:
        if self.period is None:
            return np.zeros(np.broadcast(xp, yp).shape)
        return TWO_PI * (xp * math.cos(self.angle) + yp * math.sin(self.angle)) / self.period


@dataclass
class HologramImage:
    levels: np.ndarray
    phase: np.ndarray
    depth: int
    pitch: float

    @property
    def shape(self) -> tuple:
        return self.levels.shape


def sinc_amplitude(M):
    """Diffraction-order amplitude ``sinc(pi (M - 1))`` for modulation depth ``M``."""
    return np.sinc(np.asarray(M, float) - 1.0)


def _sinc_root(a: float) -> float:
    if a <= 0.0:
        return 0.0
    if a >= 1.0:
        return 1.0
    return brentq(lambda m: float(sinc_amplitude(m)) - a, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


@lru_cache(maxsize=1)
def _lookup():
    # near A = 1 the inverse behaves like 1 - c sqrt(1 - A), so work in u = sqrt(1 - A);
    # knot density follows |M''(u)|^(1/2), the optimal spacing for linear interpolation
    fine = np.linspace(0.0, 1.0, 8 * LOOKUP_KNOTS)
    mf = np.array([_sinc_root(1.0 - x * x) for x in fine])
    curv = np.abs(np.gradient(np.gradient(mf, fine), fine))
    dens = np.sqrt(curv) + 0.05 * np.sqrt(curv).mean()
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
    u = np.interp(np.linspace(0.0, cdf[-1], LOOKUP_KNOTS), cdf, fine)
    u[0], u[-1] = 0.0, 1.0
    m = np.array([_sinc_root(1.0 - x * x) for x in u])
    return u, m


def sinc_amplitude_inverse(A):
    """Modulation depth ``M`` in [0, 1] with ``sinc(pi (M - 1)) = A``; lookup with linear interpolation."""
    a = np.asarray(A, float)
    if np.any((a < 0) | (a > 1)) or np.any(~np.isfinite(a)):
        raise ValueError("amplitude must lie in [0, 1]")
    u, m = _lookup()
    out = np.interp(np.sqrt(1.0 - a), u, m)
    return float(out) if out.ndim == 0 else out


def panel_coordinates(panel: SlmPanel):
    """Pixel-unit and metric coordinates, origin at the (offset) panel center, y up."""
    dx, dy = panel.center_offset
    xp = np.arange(panel.width) - (panel.width - 1) / 2.0 - dx
    yp = (panel.height - 1) / 2.0 - np.arange(panel.height) - dy
    XP, YP = np.meshgrid(xp, yp)
    return XP, YP, XP * panel.pitch, YP * panel.pitch


def superposition_field_on_panel(
    terms: Sequence,
    w0: float,
    panel: SlmPanel,
    wavelength: float = 780e-9,
    adjust_waists: bool = True,
) -> np.ndarray:
    """``sum_L C_L LG_{L,0}`` at z = 0, each term with its adjusted waist."""
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    _, _, X, Y = panel_coordinates(panel)
    r = np.hypot(X, Y)
    phi = np.arctan2(Y, X)
    E = np.zeros(r.shape, dtype=complex)
    for L, C in terms:
        w = adjusted_waist(int(L), w0) if adjust_waists else w0
        E += complex(C) * lg_field(LGIndex(int(L), 0), BeamGeometry(w, wavelength), r, phi)
    return E


def encode_hologram(field: np.ndarray, panel: SlmPanel, blaze: Blaze | None = None) -> HologramImage:
    """Phase-only hologram of a complex field sampled on ``panel``."""
    field = np.asarray(field, complex)
    if field.shape != (panel.height, panel.width):
        raise ValueError(f"field shape {field.shape} does not match panel {(panel.height, panel.width)}")
    blaze = blaze if blaze is not None else Blaze()
    mag = np.abs(field)
    peak = mag.max()
    if peak == 0:
        raise ValueError("field vanishes on the whole panel")
    A = np.clip(mag / peak, 0.0, 1.0)
    M = sinc_amplitude_inverse(A)
    XP, YP, _, _ = panel_coordinates(panel)
    wrapped = np.mod(np.angle(field) + blaze.phase(XP, YP), TWO_PI)
    phase = np.mod(M * wrapped, TWO_PI)
    return HologramImage(quantize(phase, panel.depth), phase, panel.depth, panel.pitch)


def quantize(phase: np.ndarray, depth: int) -> np.ndarray:
    lv = np.rint(np.asarray(phase) / TWO_PI * depth).astype(np.int64) % depth
    return lv.astype(np.uint8)


def _header(width: int, height: int) -> bytes:
    return f"P5\n{width} {height}\n255\n".encode("ascii")


def write_image(holo: HologramImage, path) -> None:
    """Binary 8-bit graymap; level ``k`` is stored as byte ``k``."""
    h, w = holo.levels.shape
    data = _header(w, h) + np.ascontiguousarray(holo.levels, dtype=np.uint8).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(f"cannot write image {os.fspath(path)!r}: {exc}") from exc


def read_image(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read image {os.fspath(path)!r}: {exc}") from exc
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{os.fspath(path)!r} is not a binary graymap")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval > 255:
        raise ValueError("only 8-bit graymaps are supported")
    body = raw[pos + 1 : pos + 1 + w * h]
    if len(body) != w * h:
        raise ValueError(f"{os.fspath(path)!r} is truncated")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def write_sidecar(path, panel: SlmPanel, terms, w0: float, blaze: Blaze, wavelength: float = 780e-9) -> None:
    meta = {
        "panel": panel.to_dict(),
        "terms": [{"L": int(L), "re": complex(C).real, "im": complex(C).imag} for L, C in terms],
        "w0_m": w0,
        "wavelength_m": wavelength,
        "adjusted_waists_m": {str(int(L)): adjusted_waist(int(L), w0) for L, _ in terms},
        "blaze": {"period_px": blaze.period, "angle_rad": blaze.angle},
        "encoding": "M(A) * mod(arg E + blaze, 2 pi), sinc(pi (M - 1)) = A",
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
