"""Decoding genotypes into stroke draw commands.

Decoding is entirely ballistic: it is a pure function of the genotype and
never inspects pixels.  The flat decoder turns each input vector into one
stroke; the hierarchical decoder expands each top-level vector ("object")
into an intermediate string which in turn expands into strokes, with the
object's position applied as a pure translation so identity ("what") and
placement ("where") stay independent.

Input-vector semantics (flat, and top level where noted):
  0,1  stroke or object origin      2  step count (stroke length / string length)
  3    LSTM bank index              4  opaque/transparent flag (flat only)
Projected-output semantics:
  0-3  start/end displacement from the origin;  4-6 RGB;  7 repeat count;
  8,9  sine/cosine inputs for the repeat angle;  10 colour-mix extent;
  11   curve-vs-line selector (hierarchical);   12-16 control offsets and
       curvature scale (hierarchical).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evobrush.genome import Genotype
from evobrush.lstm import run_banks

# Fraction of the canvas a single displacement component can span.
DISPLACEMENT_SCALE = 0.25
THICKNESS_MAX = 35
BEZIER_CHORDS = 32

# Element-matrix columns (one row per drawable element).
EL_KIND = 0  # 0 = line, 1 = bezier
EL_X0, EL_Y0, EL_X1, EL_Y1 = 1, 2, 3, 4
EL_C1X, EL_C1Y, EL_C2X, EL_C2Y = 5, 6, 7, 8
EL_CURV = 9
EL_R, EL_G, EL_B = 10, 11, 12
EL_THICK = 13
EL_ANGLE = 14
EL_TRANSP = 15
EL_ALPHA = 16
EL_WIDTH = 17


@dataclass(frozen=True)
class Line:
    start: tuple[float, float]
    end: tuple[float, float]
    rgb: tuple[float, float, float]
    thickness_repeats: int
    repeat_angle: float
    transparent: bool
    mix_alpha: float


@dataclass(frozen=True)
class BezierSegment:
    start: tuple[float, float]
    end: tuple[float, float]
    control1: tuple[float, float]
    control2: tuple[float, float]
    curvature: float
    rgb: tuple[float, float, float]
    thickness_repeats: int
    repeat_angle: float
    transparent: bool
    mix_alpha: float


@dataclass
class Stroke:
    elements: list
    object_index: int = 0


@dataclass
class DrawCommandList:
    """Decoded phenotype program.

    Internally a flat numeric element matrix plus per-stroke extents; the
    ``strokes`` property materialises the typed view.
    """

    elements: np.ndarray  # (N, EL_WIDTH) float64
    stroke_bounds: np.ndarray  # (S + 1,) int64 prefix offsets into elements
    stroke_objects: np.ndarray  # (S,) int64 source top-level vector per stroke
    background: np.ndarray | None = None

    @property
    def stroke_count(self) -> int:
        return len(self.stroke_bounds) - 1

    @property
    def element_count(self) -> int:
        return self.elements.shape[0]

    @property
    def strokes(self) -> list[Stroke]:
        out = []
        for s in range(self.stroke_count):
            lo, hi = self.stroke_bounds[s], self.stroke_bounds[s + 1]
            elems = [element_from_row(self.elements[i]) for i in range(lo, hi)]
            out.append(Stroke(elems, int(self.stroke_objects[s])))
        return out

    def restricted_to_strokes(self, keep: np.ndarray) -> "DrawCommandList":
        """Sub-program containing only the given stroke indices, in order."""
        keep = np.asarray(keep, dtype=np.int64)
        rows = []
        counts = []
        for s in keep:
            lo, hi = self.stroke_bounds[s], self.stroke_bounds[s + 1]
            rows.append(self.elements[lo:hi])
            counts.append(hi - lo)
        elements = np.concatenate(rows) if rows else np.zeros((0, EL_WIDTH))
        bounds = np.zeros(len(keep) + 1, dtype=np.int64)
        np.cumsum(counts, out=bounds[1:])
        return DrawCommandList(elements, bounds, self.stroke_objects[keep],
                               None if self.background is None else self.background.copy())


def element_from_row(row: np.ndarray):
    start = (float(row[EL_X0]), float(row[EL_Y0]))
    end = (float(row[EL_X1]), float(row[EL_Y1]))
    rgb = (float(row[EL_R]), float(row[EL_G]), float(row[EL_B]))
    common = dict(
        start=start,
        end=end,
        rgb=rgb,
        thickness_repeats=int(row[EL_THICK]),
        repeat_angle=float(row[EL_ANGLE]),
        transparent=bool(row[EL_TRANSP] > 0.5),
        mix_alpha=float(row[EL_ALPHA]),
    )
    if row[EL_KIND] > 0.5:
        return BezierSegment(
            control1=(float(row[EL_C1X]), float(row[EL_C1Y])),
            control2=(float(row[EL_C2X]), float(row[EL_C2Y])),
            curvature=float(row[EL_CURV]),
            **common,
        )
    return Line(**common)


def line_to_row(line: Line) -> np.ndarray:
    row = np.zeros(EL_WIDTH)
    row[EL_X0], row[EL_Y0] = line.start
    row[EL_X1], row[EL_Y1] = line.end
    row[EL_C1X], row[EL_C1Y] = line.start
    row[EL_C2X], row[EL_C2Y] = line.end
    row[EL_R], row[EL_G], row[EL_B] = line.rgb
    row[EL_THICK] = line.thickness_repeats
    row[EL_ANGLE] = line.repeat_angle
    row[EL_TRANSP] = 1.0 if line.transparent else 0.0
    row[EL_ALPHA] = line.mix_alpha
    return row


def bezier_to_row(seg: BezierSegment) -> np.ndarray:
    row = np.zeros(EL_WIDTH)
    row[EL_KIND] = 1.0
    row[EL_X0], row[EL_Y0] = seg.start
    row[EL_X1], row[EL_Y1] = seg.end
    row[EL_C1X], row[EL_C1Y] = seg.control1
    row[EL_C2X], row[EL_C2Y] = seg.control2
    row[EL_CURV] = seg.curvature
    row[EL_R], row[EL_G], row[EL_B] = seg.rgb
    row[EL_THICK] = seg.thickness_repeats
    row[EL_ANGLE] = seg.repeat_angle
    row[EL_TRANSP] = 1.0 if seg.transparent else 0.0
    row[EL_ALPHA] = seg.mix_alpha
    return row


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class InputInterp:
    origin: tuple[float, float]
    steps: int
    lstm_index: int
    transparent: bool


@dataclass(frozen=True)
class IntermediateInterp:
    origin: tuple[float, float]
    transparent: bool
    use_top_origin: bool
    line_count: int
    lstm_index: int


def interpret_input_vector(v: np.ndarray, num_lstms: int, s_max: int = 64) -> InputInterp:
    """Read the fixed positions of a top-level input vector."""
    v = np.asarray(v, dtype=np.float64)
    sig = _sigmoid(v[:4])
    steps = 1 + int(np.floor(sig[2] * (s_max - 1)))
    idx = min(int(np.floor(sig[3] * num_lstms)), num_lstms - 1)
    return InputInterp(
        origin=(float(sig[0]), float(sig[1])),
        steps=steps,
        lstm_index=idx,
        transparent=bool(v[4] > 0),
    )


def interpret_output_vector(
    o: np.ndarray, stroke_origin: tuple[float, float], transparent: bool
) -> Line:
    """Map one projected output (components in (-1, 1)) to a line."""
    o = np.asarray(o, dtype=np.float64)
    ox, oy = stroke_origin
    sx = min(max(ox + DISPLACEMENT_SCALE * float(o[0]), 0.0), 1.0)
    sy = min(max(oy + DISPLACEMENT_SCALE * float(o[1]), 0.0), 1.0)
    ex = min(max(ox + DISPLACEMENT_SCALE * float(o[2]), 0.0), 1.0)
    ey = min(max(oy + DISPLACEMENT_SCALE * float(o[3]), 0.0), 1.0)
    rgb = tuple(float((o[i] + 1.0) / 2.0) for i in (4, 5, 6))
    thickness = int(np.floor(((float(o[7]) + 1.0) / 2.0) * THICKNESS_MAX + 0.5))
    angle = float(np.arctan2(o[8], o[9]))
    return Line(
        start=(sx, sy),
        end=(ex, ey),
        rgb=rgb,
        thickness_repeats=thickness,
        repeat_angle=angle,
        transparent=transparent,
        mix_alpha=float((o[10] + 1.0) / 2.0),
    )


def interpret_hier_output_vector(
    o: np.ndarray, stroke_origin: tuple[float, float], transparent: bool
):
    """Map one 24-component projected output to a Line or a BezierSegment."""
    o = np.asarray(o, dtype=np.float64)
    line = interpret_output_vector(o, stroke_origin, transparent)
    if not (o[11] > 0):
        return line
    sx, sy = line.start
    ex, ey = line.end
    c1 = (
        min(max(sx + DISPLACEMENT_SCALE * float(o[12]), 0.0), 1.0),
        min(max(sy + DISPLACEMENT_SCALE * float(o[13]), 0.0), 1.0),
    )
    c2 = (
        min(max(ex + DISPLACEMENT_SCALE * float(o[14]), 0.0), 1.0),
        min(max(ey + DISPLACEMENT_SCALE * float(o[15]), 0.0), 1.0),
    )
    return BezierSegment(
        start=line.start,
        end=line.end,
        control1=c1,
        control2=c2,
        curvature=float(o[16]),
        rgb=line.rgb,
        thickness_repeats=line.thickness_repeats,
        repeat_angle=line.repeat_angle,
        transparent=transparent,
        mix_alpha=line.mix_alpha,
    )


def interpret_intermediate_vector(
    u: np.ndarray, num_low_lstms: int, s_max: int = 64
) -> IntermediateInterp:
    """Read the fixed positions of an intermediate vector (components in (-1, 1))."""
    u = np.asarray(u, dtype=np.float64)
    u01 = (u + 1.0) / 2.0
    line_count = 1 + int(np.floor(u01[4] * (s_max - 1)))
    idx = min(int(np.floor(u01[5] * num_low_lstms)), num_low_lstms - 1)
    return IntermediateInterp(
        origin=(float(u01[0]), float(u01[1])),
        transparent=bool(u[2] > 0),
        use_top_origin=bool(u[3] > 0),
        line_count=line_count,
        lstm_index=idx,
    )


def _expand_rows(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row bookkeeping for flattening variable-length groups."""
    bounds = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=bounds[1:])
    parent = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    step = np.arange(bounds[-1], dtype=np.int64) - bounds[:-1][parent]
    return bounds, parent, step


def _line_fields(elements, o, origin):
    """Fill the shared line-description columns from projected outputs."""
    elements[:, EL_X0:EL_Y0 + 1] = np.clip(origin + DISPLACEMENT_SCALE * o[:, 0:2], 0.0, 1.0)
    elements[:, EL_X1:EL_Y1 + 1] = np.clip(origin + DISPLACEMENT_SCALE * o[:, 2:4], 0.0, 1.0)
    elements[:, EL_R:EL_B + 1] = (o[:, 4:7] + 1.0) / 2.0
    elements[:, EL_THICK] = np.floor(((o[:, 7] + 1.0) / 2.0) * THICKNESS_MAX + 0.5)
    elements[:, EL_ANGLE] = np.arctan2(o[:, 8], o[:, 9])
    elements[:, EL_ALPHA] = (o[:, 10] + 1.0) / 2.0


def decode_flat(g: Genotype) -> DrawCommandList:
    """One stroke per input vector; the vector itself is the constant LSTM input."""
    if g.mode != "flat":
        raise ValueError(f"decode_flat needs a flat genotype, got mode {g.mode!r}")
    v = g.input_string
    M = g.num_stroke_lstms
    sig = _sigmoid(v[:, :4])
    origins = sig[:, 0:2]
    steps = 1 + np.floor(sig[:, 2] * (g.s_max - 1)).astype(np.int64)
    idx = np.minimum(np.floor(sig[:, 3] * M).astype(np.int64), M - 1)
    transparent = v[:, 4] > 0

    outs = run_banks(g.stroke_lstms, v, idx, steps)
    bounds, parent, step = _expand_rows(steps)
    o = outs[parent, step]

    elements = np.zeros((int(bounds[-1]), EL_WIDTH))
    origin = origins[parent]
    _line_fields(elements, o, origin)
    # Lines carry their endpoints as degenerate control points.
    elements[:, EL_C1X:EL_C1Y + 1] = elements[:, EL_X0:EL_Y0 + 1]
    elements[:, EL_C2X:EL_C2Y + 1] = elements[:, EL_X1:EL_Y1 + 1]
    elements[:, EL_TRANSP] = transparent[parent].astype(np.float64)

    return DrawCommandList(
        elements=elements,
        stroke_bounds=bounds,
        stroke_objects=np.arange(g.length, dtype=np.int64),
        background=None if g.background is None else g.background.copy(),
    )


def decode_hierarchical(g: Genotype) -> DrawCommandList:
    """Expand each top-level vector into an intermediate string, then strokes.

    The top-level origin positions are withheld from the top LSTM's input so
    an object's shape cannot depend on where it is placed; moving an object
    is then an exact translation of its strokes.
    """
    if g.mode != "hierarchical":
        raise ValueError(f"decode_hierarchical needs a hierarchical genotype, got {g.mode!r}")
    v = g.input_string
    M_top = g.num_top_lstms
    M_low = g.num_stroke_lstms

    sig = _sigmoid(v[:, :4])
    obj_origin = sig[:, 0:2]
    s1 = 1 + np.floor(sig[:, 2] * (g.s1_max - 1)).astype(np.int64)
    top_idx = np.minimum(np.floor(sig[:, 3] * M_top).astype(np.int64), M_top - 1)

    top_in = v.copy()
    top_in[:, 0:2] = 0.0
    inter = run_banks(g.top_lstms, top_in, top_idx, s1)

    s_bounds, s_parent, s_step = _expand_rows(s1)
    u = inter[s_parent, s_step]  # (S, GENOME_DIM) intermediate vectors
    u01 = (u + 1.0) / 2.0
    stroke_transparent = u[:, 2] > 0
    use_top = u[:, 3] > 0
    s2 = 1 + np.floor(u01[:, 4] * (g.s_max - 1)).astype(np.int64)
    low_idx = np.minimum(np.floor(u01[:, 5] * M_low).astype(np.int64), M_low - 1)
    stroke_origin = np.where(use_top[:, None], obj_origin[s_parent], u01[:, 0:2])

    outs = run_banks(g.stroke_lstms, u, low_idx, s2)
    bounds, parent, step = _expand_rows(s2)
    o = outs[parent, step]

    elements = np.zeros((int(bounds[-1]), EL_WIDTH))
    origin = stroke_origin[parent]
    _line_fields(elements, o, origin)
    elements[:, EL_KIND] = (o[:, 11] > 0).astype(np.float64)
    elements[:, EL_C1X:EL_C1Y + 1] = np.clip(
        elements[:, EL_X0:EL_Y0 + 1] + DISPLACEMENT_SCALE * o[:, 12:14], 0.0, 1.0
    )
    elements[:, EL_C2X:EL_C2Y + 1] = np.clip(
        elements[:, EL_X1:EL_Y1 + 1] + DISPLACEMENT_SCALE * o[:, 14:16], 0.0, 1.0
    )
    elements[:, EL_CURV] = o[:, 16]
    elements[:, EL_TRANSP] = stroke_transparent[parent].astype(np.float64)

    return DrawCommandList(
        elements=elements,
        stroke_bounds=bounds,
        stroke_objects=s_parent,
        background=None if g.background is None else g.background.copy(),
    )


def decode(g: Genotype) -> DrawCommandList:
    if g.mode == "flat":
        return decode_flat(g)
    return decode_hierarchical(g)
