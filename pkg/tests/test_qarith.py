"""Exhaustive checks of the fixed-point kernels against plain-integer
oracles computed with unbounded arithmetic followed by one clamp."""

import numpy as np
import pytest

from polarscl.qarith import (
    QLLR, FloatDomain, PathMetric, QuantDomain, QuantProfile, f_min_sum,
    g_combine, hard_decision, llr_max, normalize_pms, pm_update,
    quantize_channel_llr, saturate_llr,
)


def sign(x):
    return (x > 0) - (x < 0)


def full_grid(width):
    m = llr_max(width)
    vals = np.arange(-m, m + 1, dtype=np.int32)
    a, b = np.meshgrid(vals, vals, indexing="ij")
    return a.ravel(), b.ravel()


@pytest.mark.parametrize("width", [6, 7])
def test_f_min_sum_exhaustive(width):
    a, b = full_grid(width)
    got = f_min_sum(a, b, width)
    m = llr_max(width)
    for i in range(len(a)):
        x, y = int(a[i]), int(b[i])
        want = sign(x) * sign(y) * min(abs(x), abs(y))
        want = max(-m, min(m, want))
        assert got[i] == want, (x, y)


@pytest.mark.parametrize("width", [6, 7])
def test_g_combine_exhaustive(width):
    a, b = full_grid(width)
    m = llr_max(width)
    for s in (0, 1):
        got = g_combine(a, b, s, width)
        for i in range(len(a)):
            x, y = int(a[i]), int(b[i])
            want = x + (y if s == 0 else -y)
            want = max(-m, min(m, want))
            assert got[i] == want, (x, y, s)


@pytest.mark.parametrize("q_llr,q_sort", [(6, 6), (6, 7), (7, 7)])
def test_pm_update_exhaustive(q_llr, q_sort):
    m = llr_max(q_llr)
    cap = (1 << q_sort) - 1
    llr = np.arange(-m, m + 1, dtype=np.int32)
    pm = np.arange(0, cap + 1, dtype=np.int32)
    L, P = np.meshgrid(llr, pm, indexing="ij")
    for dec in (0, 1):
        got = pm_update(P, L, dec, q_sort=q_sort)
        flat_l, flat_p, flat_g = L.ravel(), P.ravel(), got.ravel()
        for i in range(len(flat_l)):
            x, p = int(flat_l[i]), int(flat_p[i])
            hd = 1 if x < 0 else 0
            want = p + (abs(x) if dec != hd else 0)
            assert flat_g[i] == min(want, cap), (x, p, dec)


def test_pm_update_no_penalty_on_agreement():
    assert pm_update(5, -3, 1) == 5
    assert pm_update(5, -3, 0) == 8
    assert pm_update(5, 3, 0) == 5
    assert pm_update(5, 0, 0) == 5  # zero LLR decides 0
    assert pm_update(5, 0, 1) == 5  # ...and penalizes by |0|


@pytest.mark.parametrize("q_pm", [6, 7])
def test_normalize_pms_exhaustive_pairs(q_pm):
    cap = (1 << q_pm) - 1
    vals = range(0, (1 << q_pm) + 40, 7)  # into the saturating range
    for x in vals:
        for y in vals:
            got = normalize_pms(np.array([x, y]), q_pm)
            lo = min(x, y)
            assert got[0] == min(x - lo, cap)
            assert got[1] == min(y - lo, cap)


def test_normalize_keeps_argmin_and_zero():
    rng = np.random.default_rng(0)
    for _ in range(200):
        pms = rng.integers(0, 300, 8)
        out = normalize_pms(pms, 6)
        assert out.min() == 0
        assert np.argmin(out) == np.argmin(pms)
        # order among unsaturated values is preserved
        keep = out < 63
        assert np.array_equal(np.argsort(out[keep], kind="stable"),
                              np.argsort(pms[keep], kind="stable"))


def test_saturate_llr_range_and_idempotence():
    m6 = llr_max(6)
    assert m6 == 31
    assert llr_max(7) == 63
    x = np.array([-100, -32, -31, 0, 31, 32, 100])
    s = saturate_llr(x, 6)
    assert np.array_equal(s, [-31, -31, -31, 0, 31, 31, 31])
    assert np.array_equal(saturate_llr(s, 6), s)
    # widening never changes a value
    assert np.array_equal(saturate_llr(s, 7), s)


def test_hard_decision_convention():
    assert np.array_equal(hard_decision(np.array([-2, -1, 0, 1, 2])),
                          [1, 1, 0, 0, 0])


def test_quantize_channel_llr_rounding():
    # round to nearest, ties away from zero, then saturate
    got = quantize_channel_llr(np.array([0.49, 0.5, -0.5, -0.49, 2.4, -2.6]),
                               q_c=6, scale=1.0)
    assert np.array_equal(got, [0, 1, -1, 0, 2, -3])
    got = quantize_channel_llr(np.array([0.74, 0.76, 100.0, -100.0]),
                               q_c=6, scale=0.5)
    assert np.array_equal(got, [1, 2, 31, -31])
    # scale divides: one step equals `scale` in LLR units
    x = np.linspace(-20, 20, 401)
    for scale in (0.5, 0.75, 1.0):
        want = np.sign(x) * np.floor(np.abs(x) / scale + 0.5)
        want = np.clip(want, -31, 31)
        assert np.array_equal(quantize_channel_llr(x, 6, scale), want)


def test_qllr_container_invariants():
    with pytest.raises(ValueError):
        QLLR(1, 32, 6)
    with pytest.raises(ValueError):
        QLLR(1, 1, 8)
    z = QLLR(-1, 0, 6)  # negative zero normalizes
    assert z.sign == 1 and z.value == 0
    assert QLLR.from_value(-17, 6).value == -17
    with pytest.raises(ValueError):
        PathMetric(128, 7)
    assert PathMetric(127, 7).value == 127


def test_quant_profile_stage_widths():
    q = QuantProfile(q_c=6, q_i=6, q_i_overrides=((0, 7),))
    n = 11
    assert q.width_for_stage(11, n) == 6  # channel stage
    assert q.width_for_stage(0, n) == 7   # override
    assert q.width_for_stage(5, n) == 6
    with pytest.raises(ValueError):
        QuantProfile(q_c=3)


def test_domains_share_kernel_semantics():
    """The quantized domain at huge widths degenerates to float results."""
    rng = np.random.default_rng(1)
    fd = FloatDomain(10)
    qd = QuantDomain(QuantProfile(q_c=6, q_i=6), 10)
    a = rng.integers(-20, 21, 50)
    b = rng.integers(-20, 21, 50)
    assert np.array_equal(qd.f(a, b, 4), fd.f(a.astype(float), b.astype(float), 4))
    g_int = qd.g(a, b, np.zeros(50, dtype=np.uint8), 4)
    g_flt = fd.g(a.astype(float), b.astype(float), np.zeros(50), 4)
    assert np.array_equal(g_int, np.clip(g_flt, -31, 31))
