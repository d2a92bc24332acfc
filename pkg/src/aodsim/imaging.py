"""Synthetic camera images of beam spots and the detection-path geometry.

Images extend the 1-D chain-axis profile separably with a transverse Gaussian,
mirroring a re-imaged focal plane on a high-dynamic-range camera. The pipeline
ops (background subtraction, per-tone stitching, cross sections) mirror how
such images are reduced to an intensity-crosstalk readout. Channel mapping
models a segmented multi-channel photomultiplier behind a magnifying imaging
path.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.special import erf

from .beams import BeamProfile
from .crosstalk import IonChain
from .errors import DetectorRangeError, GeometryError, NormalizationError

__all__ = [
    "CameraImage",
    "McpmtGeometry",
    "ChannelAssignment",
    "render_image",
    "subtract_background",
    "stitch_images",
    "cross_section",
    "intensity_crosstalk_at",
    "map_ions_to_channels",
    "write_pgm",
    "read_pgm",
    "write_section_csv",
]


@dataclass(frozen=True)
class CameraImage:
    """2-D intensity grid; pixel (row i, col j) sits at origin + pitch*(j, i).

    Pitch and origin are ion-plane micrometers (re-imaging magnification
    already divided out).
    """

    pixels: np.ndarray
    pixel_pitch_um: float
    origin_um: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if np.any(px < 0):
            raise ValueError("pixel values must be >= 0")
        if self.pixel_pitch_um <= 0:
            raise ValueError("pixel pitch must be > 0")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "origin_um", (float(self.origin_um[0]), float(self.origin_um[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def x_coords(self) -> np.ndarray:
        return self.origin_um[0] + self.pixel_pitch_um * np.arange(self.shape[1])

    def y_coords(self) -> np.ndarray:
        return self.origin_um[1] + self.pixel_pitch_um * np.arange(self.shape[0])

    def same_grid(self, other: "CameraImage") -> bool:
        return (
            self.shape == other.shape
            and self.pixel_pitch_um == other.pixel_pitch_um
            and self.origin_um == other.origin_um
        )


@dataclass(frozen=True)
class McpmtGeometry:
    """Segmented-detector geometry: channel width, gap, count, imaging path."""

    channel_width_um: float = 800.0
    channel_gap_um: float = 200.0
    n_channels: int = 32
    magnification: float = 200.0
    psf_sigma_um: float = 50.0  # at the image plane

    def __post_init__(self):
        if self.channel_width_um <= 0 or self.channel_gap_um <= 0:
            raise ValueError("channel width and gap must be > 0")
        if self.n_channels < 1:
            raise ValueError("need at least one channel")
        if self.magnification <= 0:
            raise ValueError("magnification must be > 0")
        if self.psf_sigma_um <= 0:
            raise ValueError("psf sigma must be > 0")

    @property
    def pitch_um(self) -> float:
        return self.channel_width_um + self.channel_gap_um

    @property
    def extent_um(self) -> float:
        return (self.n_channels - 1) * self.pitch_um + self.channel_width_um


@dataclass(frozen=True)
class ChannelAssignment:
    """Which detector channel collects one ion's fluorescence, and how much."""

    ion_index: int
    label: str
    channel: int
    in_gap: bool
    collected_fraction: float
    neighbor_leakage: float
    off_detector_fraction: float


def render_image(
    profile: BeamProfile,
    transverse_waist_um: float,
    shape: tuple[int, int],
    pixel_pitch_um: float,
    origin_um: tuple[float, float],
    background: float = 0.0,
    noise_sigma: float = 0.0,
    seed: int | None = None,
) -> CameraImage:
    """Render the separable 2-D image of a beam profile.

    Pixel value = background (plus the profile's pedestal) + sum over spots of
    A*exp(-2((x-xc)/w)^2)*exp(-2(y/wt)^2) + seeded Gaussian noise, clamped
    at zero. The chain axis lies on y = 0.
    """
    if transverse_waist_um <= 0:
        raise ValueError("transverse waist must be > 0")
    ny, nx = shape
    x = origin_um[0] + pixel_pitch_um * np.arange(nx)
    y = origin_um[1] + pixel_pitch_um * np.arange(ny)
    gy = np.exp(-2.0 * (y / transverse_waist_um) ** 2)
    row = np.zeros(nx)
    for spot in profile.all_spots():
        row += spot.intensity(x)
    img = background + profile.floor + gy[:, None] * row[None, :]
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return CameraImage(np.clip(img, 0.0, None), pixel_pitch_um, origin_um)


def subtract_background(image: CameraImage, border_px: int = 2) -> CameraImage:
    """Subtract the median of a border ring, clamping at zero.

    The border must lie outside all spot regions (caller's geometry). Raises
    GeometryError when the image is too small to have both a border and an
    interior.
    """
    ny, nx = image.shape
    if border_px < 1 or ny <= 2 * border_px or nx <= 2 * border_px:
        raise GeometryError(
            f"no {border_px}-pixel border with nonempty interior in a {ny}x{nx} image"
        )
    mask = np.zeros((ny, nx), dtype=bool)
    mask[:border_px, :] = True
    mask[-border_px:, :] = True
    mask[:, :border_px] = True
    mask[:, -border_px:] = True
    level = float(np.median(image.pixels[mask]))
    return CameraImage(
        np.clip(image.pixels - level, 0.0, None), image.pixel_pitch_um, image.origin_um
    )


def stitch_images(images: list[CameraImage]) -> CameraImage:
    """Pixelwise maximum of background-subtracted single-spot exposures.

    The maximum (rather than the sum) avoids stacking residual background N
    times; for disjoint spot supports it equals the sum.
    """
    if not images:
        raise ValueError("nothing to stitch")
    first = images[0]
    for im in images[1:]:
        if not first.same_grid(im):
            raise GeometryError("stitched images must share shape, pitch and origin")
    return CameraImage(
        np.maximum.reduce([im.pixels for im in images]),
        first.pixel_pitch_um,
        first.origin_um,
    )


def cross_section(
    image: CameraImage, axis_angle_rad: float = 0.0, offset_um: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear section through the image at pitch-spaced samples.

    The section line runs at axis_angle_rad to the x axis through the image
    center displaced by offset_um along the line normal. Returned positions
    are the projection of each sample onto the line direction (for an
    x-aligned line: the absolute x coordinate). Raises GeometryError when the
    line misses the grid.
    """
    ny, nx = image.shape
    pitch = image.pixel_pitch_um
    x0, y0 = image.origin_um
    x1 = x0 + pitch * (nx - 1)
    y1 = y0 + pitch * (ny - 1)
    dx, dy = math.cos(axis_angle_rad), math.sin(axis_angle_rad)
    cx = 0.5 * (x0 + x1) - offset_um * dy
    cy = 0.5 * (y0 + y1) + offset_um * dx

    # Liang-Barsky clip of the parametric line against the grid box
    t_lo, t_hi = -np.inf, np.inf
    for p, q_lo, q_hi in ((dx, x0 - cx, x1 - cx), (dy, y0 - cy, y1 - cy)):
        if abs(p) < 1e-300:
            if q_lo > 0 or q_hi < 0:
                raise GeometryError("section line does not intersect the image grid")
            continue
        ta, tb = q_lo / p, q_hi / p
        t_lo = max(t_lo, min(ta, tb))
        t_hi = min(t_hi, max(ta, tb))
    if not t_lo <= t_hi:
        raise GeometryError("section line does not intersect the image grid")

    n = int(math.floor((t_hi - t_lo) / pitch)) + 1
    t = t_lo + pitch * np.arange(n)
    xs = cx + t * dx
    ys = cy + t * dy
    cols = (xs - x0) / pitch
    rows = (ys - y0) / pitch
    values = map_coordinates(image.pixels, [rows, cols], order=1, mode="nearest")
    positions = xs * dx + ys * dy
    return positions, values


def intensity_crosstalk_at(
    section: tuple[np.ndarray, np.ndarray],
    x_addressed_um: float,
    x_neighbor_um: float,
) -> float:
    """Interpolated intensity ratio I(neighbor)/I(addressed) along a section."""
    positions, values = np.asarray(section[0]), np.asarray(section[1])
    order = np.argsort(positions)
    positions, values = positions[order], values[order]
    for x in (x_addressed_um, x_neighbor_um):
        if not positions[0] <= x <= positions[-1]:
            raise ValueError(f"position {x} um lies outside the section span")
    ref = float(np.interp(x_addressed_um, positions, values))
    if ref <= 0.0:
        raise NormalizationError(
            f"zero intensity at the addressed site x = {x_addressed_um} um"
        )
    return float(np.interp(x_neighbor_um, positions, values)) / ref


def _channel_mass(y: float, sigma: float, a: float, b: float) -> float:
    rt2 = math.sqrt(2.0)
    return 0.5 * (erf((b - y) / (sigma * rt2)) - erf((a - y) / (sigma * rt2)))


def map_ions_to_channels(
    chain: IonChain, geom: McpmtGeometry, alignment_offset_um: float = 0.0
) -> list[ChannelAssignment]:
    """Assign each ion's magnified image to a detector channel.

    Collected fraction integrates the imaging PSF over the assigned channel;
    leakage integrates over all other channels; the remainder (gaps plus
    beyond the ends) is the off-detector fraction. An image landing in a gap
    is flagged and assigned to the nearest channel; beyond the detector it is
    a range error.
    """
    out = []
    for i, x in enumerate(chain.positions_um):
        y = geom.magnification * x + alignment_offset_um
        if y < 0.0 or y > geom.extent_um:
            raise DetectorRangeError(
                f"ion {chain.labels[i]} images at {y:.1f} um, outside the "
                f"detector extent [0, {geom.extent_um:.1f}] um"
            )
        k = min(int(y // geom.pitch_um), geom.n_channels - 1)
        in_gap = y > k * geom.pitch_um + geom.channel_width_um
        if in_gap:
            right_edge = k * geom.pitch_um + geom.channel_width_um
            next_left = (k + 1) * geom.pitch_um
            if k + 1 < geom.n_channels and (next_left - y) < (y - right_edge):
                k = k + 1
        masses = np.array([
            _channel_mass(y, geom.psf_sigma_um, c * geom.pitch_um,
                          c * geom.pitch_um + geom.channel_width_um)
            for c in range(geom.n_channels)
        ])
        collected = float(masses[k])
        leakage = float(masses.sum() - masses[k])
        out.append(ChannelAssignment(
            ion_index=i,
            label=chain.labels[i],
            channel=k,
            in_gap=in_gap,
            collected_fraction=collected,
            neighbor_leakage=leakage,
            off_detector_fraction=1.0 - collected - leakage,
        ))
    return out


def write_section_csv(path, positions: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["position_um", "intensity"])
        for x, v in zip(positions, values):
            writer.writerow([f"{x:.9g}", f"{v:.12g}"])


def write_pgm(
    image: CameraImage,
    path,
    maxval: int = 65535,
    binary: bool = True,
    magnification: float | None = None,
) -> None:
    """Write a portable graymap (P5 binary / P2 ASCII) plus a JSON sidecar.

    Float intensities are scaled onto [0, maxval]; the scale factor lands in
    the sidecar (<path>.json) together with pitch and origin so reading
    restores physical units.
    """
    if not 0 < maxval < 65536:
        raise ValueError("maxval must be in [1, 65535]")
    path = Path(path)
    peak = float(image.pixels.max())
    scale = peak / maxval if peak > 0 else 1.0
    quantized = np.rint(image.pixels / scale).astype(np.uint32)
    quantized = np.clip(quantized, 0, maxval)
    ny, nx = image.shape
    header = f"{'P5' if binary else 'P2'}\n{nx} {ny}\n{maxval}\n"
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(quantized.astype(dtype).tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(header)
            for row in quantized:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
    sidecar = {
        "pixel_pitch_um": image.pixel_pitch_um,
        "origin_um": list(image.origin_um),
        "intensity_scale": scale,
        "maxval": maxval,
    }
    if magnification is not None:
        sidecar["magnification"] = magnification
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens: list[int] = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise ValueError("truncated graymap header")
        ch = data[pos: pos + 1]
        if ch == b"#":
            pos = data.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end: end + 1].isspace():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
    return tokens, pos + 1  # skip the single whitespace after the header


def read_pgm(path) -> CameraImage:
    """Read a P2/P5 graymap with its JSON sidecar back into physical units."""
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if not sidecar_path.exists():
        raise FileNotFoundError(
            f"missing sidecar {sidecar_path} (pitch/origin/scale metadata)"
        )
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    raw = path.read_bytes()
    magic = raw[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path} is not a P2/P5 graymap")
    (nx, ny, maxval), offset = _read_pgm_tokens(raw[2:], 3)
    if magic == b"P5":
        dtype = ">u2" if maxval > 255 else "u1"
        count = nx * ny
        pixels = np.frombuffer(raw[2 + offset:], dtype=dtype, count=count)
    else:
        pixels = np.array(raw[2 + offset:].split(), dtype=float)[: nx * ny]
    pixels = pixels.reshape(ny, nx).astype(float) * float(meta["intensity_scale"])
    return CameraImage(pixels, float(meta["pixel_pitch_um"]), tuple(meta["origin_um"]))
