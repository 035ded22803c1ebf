"""Deterministic CPU rasterizer for stroke programs.

Lines are plotted with integer Bresenham stepping (no anti-aliasing) so the
same program yields bit-identical pixels on every run.  Thickness is
realised by re-plotting a line shifted along its repeat angle; curves are
flattened with De Casteljau evaluation into fixed chord counts.  A random
projective warp (used before scoring) maps the canvas through a corner-jitter
homography with bilinear sampling.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from PIL import Image

from evobrush.generator import (
    BEZIER_CHORDS,
    EL_ALPHA,
    EL_ANGLE,
    EL_B,
    EL_C1X,
    EL_C1Y,
    EL_C2X,
    EL_C2Y,
    EL_CURV,
    EL_G,
    EL_KIND,
    EL_R,
    EL_THICK,
    EL_TRANSP,
    EL_WIDTH,
    EL_X0,
    EL_X1,
    EL_Y0,
    EL_Y1,
    BezierSegment,
    DrawCommandList,
    Line,
    bezier_to_row,
    line_to_row,
)

WHITE = (1.0, 1.0, 1.0)


@dataclass
class Canvas:
    """RGB float raster; channels live in [0, 1]."""

    pixels: np.ndarray  # (height, width, 3) float32

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @staticmethod
    def filled(width: int, height: int, color=WHITE) -> "Canvas":
        if width < 1 or height < 1:
            raise ValueError(f"canvas dimensions must be >= 1, got {width}x{height}")
        pix = np.empty((height, width, 3), dtype=np.float32)
        pix[:] = np.asarray(color, dtype=np.float32)
        return Canvas(pix)

    def copy(self) -> "Canvas":
        return Canvas(self.pixels.copy())

    def to_png_bytes(self) -> bytes:
        arr = np.rint(self.pixels.astype(np.float64) * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_png_bytes())

    @staticmethod
    def from_png(path) -> "Canvas":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
        return Canvas(arr)

    def resized(self, width: int, height: int) -> "Canvas":
        if width < 1 or height < 1:
            raise ValueError("resize dimensions must be >= 1")
        if (width, height) == (self.width, self.height):
            return self.copy()
        arr = np.rint(self.pixels.astype(np.float64) * 255.0).astype(np.uint8)
        im = Image.fromarray(arr, mode="RGB").resize((width, height), Image.BILINEAR)
        return Canvas(np.asarray(im, dtype=np.float32) / 255.0)


@njit(cache=True, nogil=True)
def _plot_line(pix, x0, y0, x1, y1, r, g, b, transparent, alpha):
    h = pix.shape[0]
    w = pix.shape[1]
    dx = abs(x1 - x0)
    sx = 1 if x0 < x1 else -1
    dy = -abs(y1 - y0)
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x = x0
    y = y0
    while True:
        if 0 <= x < w and 0 <= y < h:
            if transparent:
                v = alpha * r + (1.0 - alpha) * pix[y, x, 0]
                pix[y, x, 0] = min(max(v, 0.0), 1.0)
                v = alpha * g + (1.0 - alpha) * pix[y, x, 1]
                pix[y, x, 1] = min(max(v, 0.0), 1.0)
                v = alpha * b + (1.0 - alpha) * pix[y, x, 2]
                pix[y, x, 2] = min(max(v, 0.0), 1.0)
            else:
                pix[y, x, 0] = r
                pix[y, x, 1] = g
                pix[y, x, 2] = b
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


@njit(cache=True, nogil=True)
def _to_px(v, n):
    i = int(v * n)
    if i < 0:
        i = 0
    if i > n - 1:
        i = n - 1
    return i


@njit(cache=True, nogil=True)
def _repeated_line(pix, x0f, y0f, x1f, y1f, r, g, b, thickness, angle, transparent, alpha):
    h = pix.shape[0]
    w = pix.shape[1]
    ix0 = _to_px(x0f, w)
    iy0 = _to_px(y0f, h)
    ix1 = _to_px(x1f, w)
    iy1 = _to_px(y1f, h)
    ca = math.cos(angle)
    sa = math.sin(angle)
    for k in range(thickness + 1):
        ox = int(math.floor(k * ca + 0.5))
        oy = int(math.floor(k * sa + 0.5))
        _plot_line(pix, ix0 + ox, iy0 + oy, ix1 + ox, iy1 + oy, r, g, b, transparent, alpha)


@njit(cache=True, nogil=True)
def _cubic_point(p0x, p0y, c1x, c1y, c2x, c2y, p1x, p1y, t):
    # De Casteljau: three rounds of linear interpolation.
    ax = p0x + (c1x - p0x) * t
    ay = p0y + (c1y - p0y) * t
    bx = c1x + (c2x - c1x) * t
    by = c1y + (c2y - c1y) * t
    cx = c2x + (p1x - c2x) * t
    cy = c2y + (p1y - c2y) * t
    dx = ax + (bx - ax) * t
    dy = ay + (by - ay) * t
    ex = bx + (cx - bx) * t
    ey = by + (cy - by) * t
    return dx + (ex - dx) * t, dy + (ey - dy) * t


@njit(cache=True, nogil=True)
def _clamp01(v):
    return min(max(v, 0.0), 1.0)


@njit(cache=True, nogil=True)
def _draw_row(pix, row, chords):
    x0 = row[EL_X0]
    y0 = row[EL_Y0]
    x1 = row[EL_X1]
    y1 = row[EL_Y1]
    r = row[EL_R]
    g = row[EL_G]
    b = row[EL_B]
    thickness = int(row[EL_THICK])
    angle = row[EL_ANGLE]
    transparent = row[EL_TRANSP] > 0.5
    alpha = row[EL_ALPHA]
    is_curve = row[EL_KIND] > 0.5
    if is_curve:
        curv = row[EL_CURV]
        c1x = _clamp01(x0 + curv * (row[EL_C1X] - x0))
        c1y = _clamp01(y0 + curv * (row[EL_C1Y] - y0))
        c2x = _clamp01(x1 + curv * (row[EL_C2X] - x1))
        c2y = _clamp01(y1 + curv * (row[EL_C2Y] - y1))
        if c1x == x0 and c1y == y0 and c2x == x1 and c2y == y1:
            is_curve = False  # collapsed onto the chord: draw the plain line
        else:
            px = x0
            py = y0
            for i in range(1, chords + 1):
                t = i / chords
                qx, qy = _cubic_point(x0, y0, c1x, c1y, c2x, c2y, x1, y1, t)
                _repeated_line(pix, px, py, qx, qy, r, g, b, thickness, angle,
                               transparent, alpha)
                px = qx
                py = qy
    if not is_curve:
        _repeated_line(pix, x0, y0, x1, y1, r, g, b, thickness, angle, transparent, alpha)


@njit(cache=True, nogil=True)
def _raster(pix, elements, chords):
    for n in range(elements.shape[0]):
        _draw_row(pix, elements[n], chords)


def rasterize(cmds: DrawCommandList, width: int, height: int) -> Canvas:
    """Draw all strokes in order onto a fresh background canvas."""
    background = WHITE if cmds.background is None else tuple(float(c) for c in cmds.background)
    canvas = Canvas.filled(width, height, background)
    elements = np.ascontiguousarray(cmds.elements, dtype=np.float64)
    if elements.shape[0]:
        _raster(canvas.pixels, elements, BEZIER_CHORDS)
    return canvas


def draw_line(canvas: Canvas, line: Line) -> Canvas:
    """Plot a line (plus its thickness repeats) in place."""
    _raster(canvas.pixels, line_to_row(line).reshape(1, EL_WIDTH), BEZIER_CHORDS)
    return canvas


def draw_bezier(canvas: Canvas, seg: BezierSegment) -> Canvas:
    """Flatten a cubic segment into chords and plot them in place."""
    _raster(canvas.pixels, bezier_to_row(seg).reshape(1, EL_WIDTH), BEZIER_CHORDS)
    return canvas


def flattened_bezier_points(seg: BezierSegment, chords: int = BEZIER_CHORDS) -> np.ndarray:
    """Vertices of the chord polyline in normalized coordinates, shape (chords+1, 2)."""
    x0, y0 = seg.start
    x1, y1 = seg.end
    c1x = min(max(x0 + seg.curvature * (seg.control1[0] - x0), 0.0), 1.0)
    c1y = min(max(y0 + seg.curvature * (seg.control1[1] - y0), 0.0), 1.0)
    c2x = min(max(x1 + seg.curvature * (seg.control2[0] - x1), 0.0), 1.0)
    c2y = min(max(y1 + seg.curvature * (seg.control2[1] - y1), 0.0), 1.0)
    pts = np.empty((chords + 1, 2))
    for i in range(chords + 1):
        t = i / chords
        pts[i] = _cubic_point(x0, y0, c1x, c1y, c2x, c2y, x1, y1, t)
    return pts


def element_pixel_geometry(cmds: DrawCommandList, width: int, height: int) -> np.ndarray:
    """Continuous pixel-space endpoints of every element, shape (N, 4).

    This is the geometry the rasterizer snaps to integer pixels; it scales
    exactly linearly with resolution.
    """
    scale = np.array([width, height, width, height], dtype=np.float64)
    return cmds.elements[:, EL_X0:EL_Y1 + 1] * scale


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray  # (3, 3) float64, bottom-right element 1

    def __post_init__(self):
        m = self.matrix
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if abs(np.linalg.det(m)) <= 1e-9:
            raise ValueError("homography is not invertible")


def homography_from_corners(src: np.ndarray, dst: np.ndarray) -> Homography:
    """Plane projective map sending four source corners to four targets."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i in range(4):
        x, y = src[i]
        X, Y = dst[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -x * X, -y * X]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -x * Y, -y * Y]
        rhs[2 * i] = X
        rhs[2 * i + 1] = Y
    p = np.linalg.solve(a, rhs)
    m = np.append(p, 1.0).reshape(3, 3)
    return Homography(m)


@njit(cache=True, nogil=True)
def _warp(src, dst, hinv, bg_r, bg_g, bg_b):
    h = src.shape[0]
    w = src.shape[1]
    for y in range(h):
        for x in range(w):
            d = hinv[2, 0] * x + hinv[2, 1] * y + hinv[2, 2]
            if abs(d) < 1e-12:
                dst[y, x, 0] = bg_r
                dst[y, x, 1] = bg_g
                dst[y, x, 2] = bg_b
                continue
            u = (hinv[0, 0] * x + hinv[0, 1] * y + hinv[0, 2]) / d
            v = (hinv[1, 0] * x + hinv[1, 1] * y + hinv[1, 2]) / d
            if u < 0.0 or u > w - 1 or v < 0.0 or v > h - 1:
                dst[y, x, 0] = bg_r
                dst[y, x, 1] = bg_g
                dst[y, x, 2] = bg_b
                continue
            x0 = int(math.floor(u))
            y0 = int(math.floor(v))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = u - x0
            fy = v - y0
            for ch in range(3):
                top = src[y0, x0, ch] * (1.0 - fx) + src[y0, x1, ch] * fx
                bot = src[y1, x0, ch] * (1.0 - fx) + src[y1, x1, ch] * fx
                val = top * (1.0 - fy) + bot * fy
                dst[y, x, ch] = min(max(val, 0.0), 1.0)


def apply_homography(canvas: Canvas, hom: Homography, background=WHITE) -> Canvas:
    """Inverse-map the canvas through ``hom`` with bilinear sampling."""
    hinv = np.ascontiguousarray(np.linalg.inv(hom.matrix))
    out = np.empty_like(canvas.pixels)
    bg = np.asarray(background, dtype=np.float64)
    _warp(canvas.pixels, out, hinv, bg[0], bg[1], bg[2])
    return Canvas(out)


def random_projective_transform(
    canvas: Canvas,
    strength: float,
    rng: np.random.Generator,
    background=WHITE,
    max_attempts: int = 16,
) -> Canvas:
    """Warp through a homography whose corners are jittered by up to
    ``strength * 10%`` of each dimension; strength 0 is the exact identity."""
    if not (0.0 <= strength <= 1.0):
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    w, h = canvas.width, canvas.height
    src = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    amp = 0.1 * strength
    for _ in range(max_attempts):
        jitter = rng.uniform(-amp, amp, (4, 2)) * np.array([w, h])
        if not jitter.any():
            return canvas.copy()
        try:
            hom = homography_from_corners(src, src + jitter)
        except (np.linalg.LinAlgError, ValueError):
            continue
        return apply_homography(canvas, hom, background)
    raise RuntimeError(f"no invertible corner jitter found in {max_attempts} attempts")
