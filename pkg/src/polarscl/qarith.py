"""Saturating sign-magnitude LLR arithmetic and path-metric kernels.

Values are carried as plain signed integers (or numpy integer arrays): a
sign-magnitude word of width Q holds magnitudes 0..2^(Q-1)-1, negative zero
is normalized to +0, and saturation clips symmetrically at +/-(2^(Q-1)-1).
All kernels also accept floats, in which case no clipping is applied; this
is the reference floating-point domain.
"""

from dataclasses import dataclass

import numpy as np


def llr_max(width):
    """Largest representable magnitude of a sign-magnitude word."""
    return (1 << (width - 1)) - 1


@dataclass(frozen=True)
class QLLR:
    """A validated sign-magnitude LLR word (width 6 or 7).

    The kernels below operate on the embedded integer ``value``; this
    container exists to state and check the representation invariants.
    """
    sign: int
    magnitude: int
    width: int

    def __post_init__(self):
        if self.width not in (6, 7):
            raise ValueError("LLR width must be 6 or 7")
        if not (0 <= self.magnitude <= llr_max(self.width)):
            raise ValueError("magnitude out of range for width %d" % self.width)
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.magnitude == 0 and self.sign == -1:
            object.__setattr__(self, "sign", 1)  # normalize negative zero

    @property
    def value(self):
        return self.sign * self.magnitude

    @classmethod
    def from_value(cls, value, width):
        return cls(1 if value >= 0 else -1, abs(int(value)), width)


@dataclass(frozen=True)
class PathMetric:
    """A non-negative path metric word (sort width Q_sort, storage Q_PM)."""
    value: int
    width: int

    def __post_init__(self):
        if not (0 <= self.value < (1 << self.width)):
            raise ValueError("path metric out of range for width %d" % self.width)


@dataclass(frozen=True)
class QuantProfile:
    """Word widths of one decoder configuration.

    q_c: channel LLRs; q_i: internal LLRs (q_i_overrides lists per-stage
    exceptions as (stage, width) pairs); q_sort / q_pm: path metric width
    during sorting / in storage after normalization. channel_scale is the
    LLR value of one channel quantization step.
    """
    q_c: int = 6
    q_i: int = 6
    q_i_overrides: tuple = ()
    q_sort: int = 7
    q_pm: int = 6
    channel_scale: float = 1.0

    def __post_init__(self):
        widths = [self.q_c, self.q_i, self.q_sort, self.q_pm]
        widths += [w for _s, w in self.q_i_overrides]
        for w in widths:
            if not (4 <= int(w) <= 16):
                raise ValueError("quantizer width out of range: %r" % (w,))
        if not (self.channel_scale > 0):
            raise ValueError("channel_scale must be positive")

    def width_for_stage(self, stage, n):
        if stage >= n:
            return self.q_c
        for s, w in self.q_i_overrides:
            if s == stage:
                return w
        return self.q_i


def _is_float(*arrays):
    return any(np.issubdtype(np.asarray(a).dtype, np.floating) for a in arrays)


def saturate_llr(x, width):
    """Clip to the representable range of a sign-magnitude word.

    Widening (e.g. 6 -> 7 bit) is a value-preserving zero extension, so
    only narrowing ever changes a value.
    """
    m = llr_max(width)
    return np.clip(x, -m, m)


def f_min_sum(a, b, width=None):
    """Check-node kernel: sign(a)*sign(b)*min(|a|,|b|).

    Integer inputs model the sign-magnitude datapath (a zero either side
    forces +0); float inputs give the reference unclipped kernel. width,
    when given, saturates the result to that word size.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    if width is not None:
        out = saturate_llr(out, width)
    return out if out.ndim else out[()]


def g_combine(a, b, s, width=None):
    """Variable-node kernel: a + (-1)^s * b, computed exactly then saturated."""
    a = np.asarray(a)
    b = np.asarray(b)
    s = np.asarray(s)
    out = a + np.where(s.astype(bool), -b, b)
    if width is not None:
        out = saturate_llr(out, width)
    return out if out.ndim else out[()]


def hard_decision(llr):
    """0 for llr >= 0, 1 otherwise (an LLR of zero decides 0)."""
    out = (np.asarray(llr) < 0).astype(np.uint8)
    return out if out.ndim else out[()]


def pm_update(pm, llr, decision, q_sort=None):
    """Penalize a decision against the hard decision of its LLR.

    The metric is unchanged when decision == hard_decision(llr) and grows
    by |llr| otherwise, saturating at 2^q_sort - 1 when q_sort is given.
    """
    pm = np.asarray(pm)
    pen = np.abs(np.asarray(llr)) * (np.asarray(decision) != hard_decision(llr))
    out = pm + pen
    if q_sort is not None:
        out = np.minimum(out, (1 << q_sort) - 1)
    return out if out.ndim else out[()]


def normalize_pms(pms, q_pm=None):
    """Subtract the minimum metric; saturate at 2^q_pm - 1 when given.

    Keeps the argmin set intact and leaves at least one metric at zero.
    """
    pms = np.asarray(pms)
    out = pms - pms.min()
    if q_pm is not None:
        out = np.minimum(out, (1 << q_pm) - 1)
    return out


def quantize_channel_llr(x, q_c=6, scale=1.0):
    """Quantize float LLRs: round to nearest (ties away from zero), saturate.

    scale is the LLR value of one step; the result is an integer array in
    [-(2^(q_c-1)-1), 2^(q_c-1)-1].
    """
    x = np.asarray(x, dtype=float)
    q = np.sign(x) * np.floor(np.abs(x) / scale + 0.5)
    out = saturate_llr(q, q_c).astype(np.int32)
    return out if out.ndim else out[()]


class QuantDomain:
    """Fixed-point arithmetic for one code size n under a QuantProfile."""

    is_float = False
    llr_dtype = np.int32
    pm_dtype = np.int64

    def __init__(self, quant, n):
        self.quant = quant
        self.n = n
        self.widths = tuple(quant.width_for_stage(t, n) for t in range(n + 1))
        self.pm_cap_sort = (1 << quant.q_sort) - 1
        self.pm_cap_store = (1 << quant.q_pm) - 1

    def channel(self, llrs):
        return quantize_channel_llr(llrs, self.quant.q_c, self.quant.channel_scale)

    def check_channel(self, llrs):
        llrs = np.asarray(llrs)
        if not np.issubdtype(llrs.dtype, np.integer):
            raise ValueError("quantized decoding expects integer channel LLRs")
        if np.abs(llrs).max(initial=0) > llr_max(self.quant.q_c):
            raise ValueError("channel LLRs exceed the channel word width")
        return llrs.astype(self.llr_dtype)

    def f(self, a, b, stage):
        m = llr_max(self.widths[stage])
        out = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
        return np.maximum(np.minimum(out, m), -m)

    def g(self, a, b, s, stage):
        m = llr_max(self.widths[stage])
        out = a + np.where(np.asarray(s) != 0, -b, b)
        return np.maximum(np.minimum(out, m), -m)

    @staticmethod
    def hd(llr):
        return (llr < 0).astype(np.uint8)

    @staticmethod
    def pen(llr):
        return np.abs(llr)

    def pm_add(self, pm, pen):
        return np.minimum(pm + pen, self.pm_cap_sort)

    def pm_fold(self, pm, pens):
        """Fold a trailing axis of penalties onto metrics.

        ``pm`` broadcasts against ``pens`` minus its last axis.  Clamping once
        after the sum equals the per-bit saturating chain because the
        penalties are non-negative and the clamp is monotone.
        """
        return np.minimum(pm + pens.sum(axis=-1, dtype=np.int64),
                          self.pm_cap_sort)

    def pm_normalize(self, pms):
        # Last-axis normalization so a (frames, L) batch of independent
        # lists normalizes each list against its own minimum.
        return np.minimum(pms - pms.min(axis=-1, keepdims=True),
                          self.pm_cap_store)


class FloatDomain:
    """Reference floating-point arithmetic (no quantization, no saturation)."""

    is_float = True
    llr_dtype = np.float64
    pm_dtype = np.float64

    def __init__(self, n=None):
        self.n = n

    @staticmethod
    def channel(llrs):
        return np.asarray(llrs, dtype=np.float64)

    check_channel = staticmethod(lambda llrs: np.asarray(llrs, dtype=np.float64))

    @staticmethod
    def f(a, b, stage):
        return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))

    @staticmethod
    def g(a, b, s, stage):
        return a + np.where(np.asarray(s) != 0, -b, b)

    @staticmethod
    def hd(llr):
        return (llr < 0).astype(np.uint8)

    @staticmethod
    def pen(llr):
        return np.abs(llr)

    @staticmethod
    def pm_add(pm, pen):
        return pm + pen

    @staticmethod
    def pm_fold(pm, pens):
        # Left-fold in bit order so the float rounding sequence matches a
        # bit-serial decoder exactly (addition is not associative here).
        lead = np.broadcast_to(pm, pens.shape[:-1])[..., None]
        acc = np.cumsum(np.concatenate([lead, pens], axis=-1), axis=-1)
        return acc[..., -1]

    @staticmethod
    def pm_normalize(pms):
        # Normalization only bounds register growth in fixed point; in float
        # it is an identity so that metric values do not depend on where the
        # schedule happens to place its pruning sorts (subtracting the
        # running minimum is not associative in IEEE arithmetic).
        return pms
