from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import (
    bias_only_lstm,
    flat_genotype,
    logit,
    make_rng,
    small_flat_config,
    small_hier_config,
)
from reference_impls import reference_decode_flat, reference_decode_hierarchical

from evobrush.generator import (
    BezierSegment,
    Line,
    decode,
    decode_flat,
    decode_hierarchical,
    interpret_input_vector,
    interpret_intermediate_vector,
    interpret_output_vector,
)
from evobrush.genome import GENOME_DIM, init_random


def test_genome_vector_length_is_ten():
    assert GENOME_DIM == 10


def test_interpret_input_vector_center():
    v = np.zeros(GENOME_DIM)
    interp = interpret_input_vector(v, 5, 64)
    assert interp.origin == (0.5, 0.5)
    assert interp.transparent is False


def test_interpret_input_vector_index_saturation():
    v = np.zeros(GENOME_DIM)
    v[3] = 20.0  # sigmoid saturates toward 1; the index clamps to M-1
    assert interpret_input_vector(v, 5).lstm_index == 4
    v[3] = -20.0
    assert interpret_input_vector(v, 5).lstm_index == 0


def test_interpret_input_vector_step_bounds():
    v = np.zeros(GENOME_DIM)
    v[2] = -20.0
    assert interpret_input_vector(v, 3, 64).steps == 1
    v[2] = 40.0  # sigmoid saturates to exactly 1.0 in float64
    assert interpret_input_vector(v, 3, 64).steps == 64


def test_interpret_input_vector_transparency_sign():
    v = np.zeros(GENOME_DIM)
    v[4] = 0.01
    assert interpret_input_vector(v, 1).transparent is True
    v[4] = -0.01
    assert interpret_input_vector(v, 1).transparent is False


def test_interpret_output_vector_zeros():
    line = interpret_output_vector(np.zeros(16), (0.5, 0.5), False)
    assert line.start == (0.5, 0.5)
    assert line.end == (0.5, 0.5)
    assert line.rgb == (0.5, 0.5, 0.5)
    assert line.thickness_repeats == 18  # round(0.5 * 35)
    assert line.mix_alpha == 0.5
    assert line.transparent is False


def test_interpret_output_vector_thickness_saturates():
    o = np.zeros(16)
    o[7] = 0.999999
    assert interpret_output_vector(o, (0.5, 0.5), False).thickness_repeats == 35
    o[7] = -0.999999
    assert interpret_output_vector(o, (0.5, 0.5), False).thickness_repeats == 0


def test_interpret_output_vector_clamps_displacements():
    o = np.zeros(16)
    o[0:4] = np.array([-1.0, -1.0, 1.0, 1.0]) * 0.999
    line = interpret_output_vector(o, (0.0, 0.0), True)
    assert line.start == (0.0, 0.0)
    assert line.end == pytest.approx((0.24975, 0.24975), abs=1e-12)
    assert line.transparent is True


def test_interpret_intermediate_vector_zeros():
    ii = interpret_intermediate_vector(np.zeros(GENOME_DIM), 3, s_max=64)
    assert ii.origin == (0.5, 0.5)
    assert ii.transparent is False
    assert ii.use_top_origin is False
    assert ii.line_count == 1 + math.floor(0.5 * 63)
    assert ii.lstm_index == 1  # floor(0.5 * 3)


def test_interpret_intermediate_vector_flags_and_bounds():
    u = np.zeros(GENOME_DIM)
    u[3] = 0.9
    assert interpret_intermediate_vector(u, 3).use_top_origin is True
    u = np.zeros(GENOME_DIM)
    u[5] = -0.999999
    assert interpret_intermediate_vector(u, 3).lstm_index == 0
    u[5] = 0.999999
    assert interpret_intermediate_vector(u, 3).lstm_index == 2


def test_decode_flat_counts_simple():
    # one vector decoding to a 2-line stroke
    v = np.zeros(GENOME_DIM)
    v[2] = logit(1.5 / 63)  # 1 + floor(sigmoid * 63) == 2
    g = flat_genotype([v], [bias_only_lstm(np.zeros(16))])
    cmds = decode_flat(g)
    assert cmds.stroke_count == 1
    assert cmds.element_count == 2
    strokes = cmds.strokes
    assert len(strokes[0].elements) == 2


def test_decode_flat_zero_weights_degenerate_lines():
    rng = make_rng(3)
    vs = rng.standard_normal((3, GENOME_DIM))
    g = flat_genotype(vs, [bias_only_lstm(np.zeros(16))])
    cmds = decode_flat(g)
    for stroke, v in zip(cmds.strokes, vs):
        interp = interpret_input_vector(v, 1, g.s_max)
        assert len(stroke.elements) == interp.steps
        for el in stroke.elements:
            assert isinstance(el, Line)
            assert el.start == interp.origin
            assert el.end == interp.origin
            assert el.rgb == (0.5, 0.5, 0.5)


def test_decode_flat_total_elements_sum():
    rng = make_rng(5)
    g = init_random(small_flat_config(), rng)
    cmds = decode_flat(g)
    expected = [
        interpret_input_vector(v, g.num_stroke_lstms, g.s_max).steps
        for v in g.input_string
    ]
    assert cmds.stroke_count == g.length
    assert cmds.element_count == sum(expected)
    counts = np.diff(cmds.stroke_bounds)
    assert list(counts) == expected


def test_decode_mode_mismatch_raises():
    rng = make_rng(7)
    flat = init_random(small_flat_config(), rng)
    hier = init_random(small_hier_config(), rng)
    with pytest.raises(ValueError):
        decode_hierarchical(flat)
    with pytest.raises(ValueError):
        decode_flat(hier)


def test_decode_flat_matches_scalar_reference():
    for seed in (11, 12, 13):
        g = init_random(small_flat_config(), make_rng(seed))
        cmds = decode_flat(g)
        ref = reference_decode_flat(g)
        strokes = cmds.strokes
        assert len(strokes) == len(ref)
        for stroke, (obj, lines) in zip(strokes, ref):
            assert stroke.object_index == obj
            assert stroke.elements == lines


def test_decode_hierarchical_matches_scalar_reference():
    for seed in (21, 22, 23):
        g = init_random(small_hier_config(), make_rng(seed))
        cmds = decode_hierarchical(g)
        ref = reference_decode_hierarchical(g)
        strokes = cmds.strokes
        assert len(strokes) == len(ref)
        for stroke, (obj, _, elems) in zip(strokes, ref):
            assert stroke.object_index == obj
            assert stroke.elements == elems


def test_decode_hierarchical_counting_construct():
    # one object: s1 fixed to 2 intermediates, zero-weight top LSTM makes each
    # intermediate the zero vector, so every stroke has the same line count
    v = np.zeros(GENOME_DIM)
    s1_max, s_max = 3, 5
    top = bias_only_lstm(np.zeros(10))
    low = bias_only_lstm(np.zeros(24))
    from evobrush.genome import Genotype

    g = Genotype(mode="hierarchical", input_string=v[None, :],
                 stroke_lstms=[low], top_lstms=[top], s_max=s_max, s1_max=s1_max)
    g.validate()
    cmds = decode_hierarchical(g)
    # sigmoid(0)=0.5: s1 = 1+floor(.5*2) = 2; zero intermediates: s2 = 1+floor(.5*4) = 3
    assert cmds.stroke_count == 2
    assert cmds.element_count == 6


def test_selector_nonpositive_gives_lines_only():
    g = init_random(small_hier_config(), make_rng(31))
    for p in g.stroke_lstms:  # clamp the selector projection row to emit <= 0
        p.out_weights[11, :] = 0.0
        p.out_bias[11] = -1.0
    cmds = decode_hierarchical(g)
    assert all(isinstance(el, Line) for s in cmds.strokes for el in s.elements)


def test_selector_positive_gives_beziers():
    g = init_random(small_hier_config(), make_rng(32))
    for p in g.stroke_lstms:
        p.out_weights[11, :] = 0.0
        p.out_bias[11] = 1.0
    cmds = decode_hierarchical(g)
    assert all(isinstance(el, BezierSegment) for s in cmds.strokes for el in s.elements)


def test_what_where_translation_equivariance():
    # moving only the top-level origin genes translates use-top strokes and
    # changes nothing else
    found = 0
    for seed in range(40, 52):
        g = init_random(small_hier_config(), make_rng(seed))
        g2 = g.copy()
        g2.input_string[:, 0] += 0.8
        g2.input_string[:, 1] -= 0.5
        ref_a = reference_decode_hierarchical(g)
        dec_a = decode_hierarchical(g).strokes
        dec_b = decode_hierarchical(g2).strokes
        assert len(dec_a) == len(dec_b)
        for i, (obj, use_top, _) in enumerate(ref_a):
            va = g.input_string[obj]
            vb = g2.input_string[obj]
            shift = (
                1 / (1 + math.exp(-vb[0])) - 1 / (1 + math.exp(-va[0])),
                1 / (1 + math.exp(-vb[1])) - 1 / (1 + math.exp(-va[1])),
            )
            ea, eb = dec_a[i].elements, dec_b[i].elements
            assert len(ea) == len(eb)
            for la, lb in zip(ea, eb):
                assert type(la) is type(lb)
                assert la.rgb == lb.rgb
                assert la.thickness_repeats == lb.thickness_repeats
                assert la.repeat_angle == lb.repeat_angle
                assert la.transparent == lb.transparent
                assert la.mix_alpha == lb.mix_alpha
                if use_top:
                    found += 1
                    interior = all(
                        0.02 < c < 0.98
                        for pt in (la.start, la.end, lb.start, lb.end)
                        for c in pt
                    )
                    if interior:
                        assert lb.start[0] - la.start[0] == pytest.approx(shift[0], abs=1e-12)
                        assert lb.start[1] - la.start[1] == pytest.approx(shift[1], abs=1e-12)
                        assert lb.end[0] - la.end[0] == pytest.approx(shift[0], abs=1e-12)
                        assert lb.end[1] - la.end[1] == pytest.approx(shift[1], abs=1e-12)
                else:
                    # strokes anchored at the intermediate level must not move
                    assert la.start == lb.start and la.end == lb.end
    assert found > 0


def test_restricted_to_strokes_subsets():
    g = init_random(small_hier_config(), make_rng(60))
    cmds = decode_hierarchical(g)
    keep = np.array([0, cmds.stroke_count - 1])
    sub = cmds.restricted_to_strokes(keep)
    assert sub.stroke_count == 2
    full = cmds.strokes
    subs = sub.strokes
    assert subs[0].elements == full[0].elements
    assert subs[1].elements == full[-1].elements


def test_coordinates_and_thickness_within_bounds():
    for seed in (71, 72):
        g = init_random(small_hier_config(), make_rng(seed))
        cmds = decode(g)
        for stroke in cmds.strokes:
            for el in stroke.elements:
                for pt in (el.start, el.end):
                    assert 0.0 <= pt[0] <= 1.0 and 0.0 <= pt[1] <= 1.0
                assert 0 <= el.thickness_repeats <= 35
                assert 0.0 <= el.mix_alpha <= 1.0
