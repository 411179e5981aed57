"""Polar code definitions: construction, encoding, CRC and parity attachments.

Natural-order indexing is used throughout: the generator is the n-fold
Kronecker power of [[1,0],[1,1]] with no bit-reversal permutation, bit 0 is
decoded first, and reliability vectors are indexed the same way.
"""

import math

import numpy as np

MAX_BLOCK_LOG = 15  # largest supported code is 2**15

# Built-in generator polynomials, MSB-first with the leading x^width term
# implicit (3GPP CRC8 / CRC11 / CRC24A, CCITT CRC16).
CRC_POLYNOMIALS = {
    8: 0x9B,
    11: 0x621,
    16: 0x1021,
    24: 0x864CFB,
}


class CrcSpec:
    """CRC attachment: ``width`` check bits appended to the payload.

    polynomial is an integer whose bits are the polynomial coefficients
    MSB-first, without the implicit leading term; it must have degree
    exactly ``width`` (bit width-1 set ... well, value < 2**width, and the
    implicit x^width term supplies the degree).
    """

    def __init__(self, width, polynomial=None, init=0):
        if polynomial is None:
            if width not in CRC_POLYNOMIALS:
                raise ValueError(
                    "no built-in polynomial for CRC width %r; supply one explicitly"
                    % (width,))
            polynomial = CRC_POLYNOMIALS[width]
        if not (1 <= width <= 32):
            raise ValueError("CRC width out of range: %r" % (width,))
        if not (0 < polynomial < (1 << width)):
            raise ValueError("CRC polynomial does not match width %d: 0x%X"
                             % (width, polynomial))
        if not (0 <= init < (1 << width)):
            raise ValueError("CRC init out of range")
        self.width = int(width)
        self.polynomial = int(polynomial)
        self.init = int(init)
        self._table = None

    def __eq__(self, other):
        return (isinstance(other, CrcSpec)
                and (self.width, self.polynomial, self.init)
                == (other.width, other.polynomial, other.init))

    def __repr__(self):
        return "CrcSpec(width=%d, polynomial=0x%X, init=0x%X)" % (
            self.width, self.polynomial, self.init)


class ParityCheckSpec:
    """Parity-check attachment: each constraint forces one decoded bit.

    constraints is a sequence of (parity_position, source_positions); during
    encoding and decoding the bit at parity_position is the XOR of the bits
    at the source positions, all of which must come earlier in decoding
    order.
    """

    def __init__(self, constraints):
        cleaned = []
        seen = set()
        for parity, sources in constraints:
            parity = int(parity)
            sources = tuple(int(s) for s in sources)
            if parity in seen:
                raise ValueError("duplicate parity position %d" % parity)
            seen.add(parity)
            if len(set(sources)) != len(sources):
                raise ValueError("repeated source for parity position %d" % parity)
            if any(s >= parity for s in sources):
                raise ValueError(
                    "parity sources must precede position %d in decoding order" % parity)
            if any(s < 0 for s in sources):
                raise ValueError("negative source position")
            cleaned.append((parity, sources))
        cleaned.sort()
        self.constraints = tuple(cleaned)

    @property
    def positions(self):
        return tuple(p for p, _ in self.constraints)

    def __eq__(self, other):
        return (isinstance(other, ParityCheckSpec)
                and self.constraints == other.constraints)

    def __repr__(self):
        return "ParityCheckSpec(%r)" % (self.constraints,)


class CodeSpec:
    """A constructed polar code plus its attachments.

    Fields: N (block length), n = log2(N), k (number of non-frozen
    positions, CRC and parity included), frozen_mask / good_mask (bool,
    length N), reliability (float, length N, higher = more reliable),
    crc (CrcSpec or None), pc (ParityCheckSpec or None), method and
    design_param record how the code was constructed.
    """

    def __init__(self, N, frozen_mask, reliability=None, good_mask=None,
                 crc=None, pc=None, method="manual", design_param=None,
                 sequence=None):
        n = _block_log(N)
        frozen_mask = np.asarray(frozen_mask, dtype=bool)
        if frozen_mask.shape != (N,):
            raise ValueError("frozen_mask must have length N")
        self.N = int(N)
        self.n = n
        self.frozen_mask = frozen_mask
        self.k = int(N - np.count_nonzero(frozen_mask))
        if self.k < 1:
            raise ValueError("code must have at least one information position")
        if reliability is None:
            reliability = np.where(frozen_mask, 0.0, 1.0)
        self.reliability = np.asarray(reliability, dtype=float)
        if self.reliability.shape != (N,):
            raise ValueError("reliability must have length N")
        if good_mask is None:
            good_mask = np.zeros(N, dtype=bool)
        self.good_mask = np.asarray(good_mask, dtype=bool)
        if np.any(self.good_mask & frozen_mask):
            raise ValueError("good bits must be non-frozen")
        self.crc = crc
        self.pc = pc
        self.method = method
        self.design_param = design_param
        self.sequence = None if sequence is None else np.asarray(sequence, dtype=int)
        self._validate_layout()
        self._plan_cache = {}

    # -- derived position sets ------------------------------------------------

    def _validate_layout(self):
        nonfrozen = np.flatnonzero(~self.frozen_mask)
        self.nonfrozen_positions = nonfrozen
        width = self.crc.width if self.crc is not None else 0
        if width > self.k:
            raise ValueError("CRC wider than the number of non-frozen positions")
        self.crc_positions = nonfrozen[self.k - width:] if width else nonfrozen[:0]
        if self.pc is not None:
            ppos = np.asarray(self.pc.positions, dtype=int)
            if np.any(self.frozen_mask[ppos]):
                raise ValueError("parity positions must be non-frozen")
            if np.intersect1d(ppos, self.crc_positions).size:
                raise ValueError("parity positions collide with CRC positions")
            self.parity_positions = ppos
        else:
            self.parity_positions = nonfrozen[:0]
        drop = set(self.crc_positions.tolist()) | set(self.parity_positions.tolist())
        self.payload_positions = np.array(
            [p for p in nonfrozen if p not in drop], dtype=int)
        self.payload_len = len(self.payload_positions)
        if self.good_mask[self.crc_positions].any() or \
           self.good_mask[self.parity_positions].any():
            raise ValueError("good bits must be payload positions")

    @property
    def crc_width(self):
        return self.crc.width if self.crc is not None else 0

    def rate(self):
        """Channel rate k/N (CRC and parity bits count as transmitted info)."""
        return self.k / self.N

    def payload_rate(self):
        return self.payload_len / self.N

    def __repr__(self):
        return "CodeSpec(N=%d, k=%d, method=%r, crc=%r, pc=%s, good=%d)" % (
            self.N, self.k, self.method, self.crc,
            self.pc is not None, int(self.good_mask.sum()))


def _block_log(N):
    n = int(N).bit_length() - 1
    if N < 2 or (1 << n) != N:
        raise ValueError("block length must be a power of two >= 2, got %r" % (N,))
    if n > MAX_BLOCK_LOG:
        raise ValueError("block length %d exceeds 2**%d" % (N, MAX_BLOCK_LOG))
    return n


# -- reliability profiles ----------------------------------------------------

def bhattacharyya_profile(N, erasure_prob=0.5):
    """Bhattacharyya parameters of the N synthetic channels (lower = better).

    Starts from a BEC erasure probability and applies the standard doubling
    recursion in natural order: child 2i gets 2z - z^2 (degraded), child
    2i+1 gets z^2 (upgraded).
    """
    _block_log(N)
    if not (0.0 < erasure_prob < 1.0):
        raise ValueError("design erasure probability must be in (0,1)")
    z = np.array([erasure_prob], dtype=float)
    while len(z) < N:
        out = np.empty(2 * len(z), dtype=float)
        out[0::2] = 2.0 * z - z * z
        out[1::2] = z * z
        z = out
    return z


def _phi(x):
    # Mean-LLR reliability functional for the Gaussian approximation.
    if x < 1e-12:
        return 1.0
    if x < 10.0:
        return math.exp(-0.4527 * x ** 0.86 + 0.0218)
    return math.sqrt(math.pi / x) * math.exp(-x / 4.0) * (1.0 - 10.0 / (7.0 * x))


def _phi_inv(y):
    # Bisection inverse of _phi on (0, 1]; _phi is strictly decreasing.
    if y >= 1.0:
        return 0.0
    lo, hi = 1e-12, 1.0
    while _phi(hi) > y:
        hi *= 2.0
        if hi > 1e9:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _phi(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gaussian_approx_profile(N, design_snr_db):
    """Mean decision LLRs under the Gaussian approximation (higher = better).

    design_snr_db is the per-channel-bit Es/N0 in dB for unit-amplitude
    BPSK dimensions; the root mean LLR is 4 * 10^(snr/10).
    """
    _block_log(N)
    m = np.array([4.0 * 10.0 ** (design_snr_db / 10.0)], dtype=float)
    while len(m) < N:
        out = np.empty(2 * len(m), dtype=float)
        for i, v in enumerate(m):
            out[2 * i] = _phi_inv(1.0 - (1.0 - _phi(v)) ** 2)
            out[2 * i + 1] = 2.0 * v
        m = out
    return m


def load_reliability_sequence(path, N):
    """Read an externally supplied reliability order.

    The file holds whitespace/newline-separated indices, least reliable
    first, covering exactly 0..N-1.
    """
    with open(path) as fh:
        seq = [int(tok) for tok in fh.read().split()]
    return _sequence_to_array(seq, N)


def _sequence_to_array(seq, N):
    seq = np.asarray(seq, dtype=int)
    if sorted(seq.tolist()) != list(range(N)):
        raise ValueError("reliability sequence must be a permutation of 0..N-1")
    return seq


def construct_code(N, k, method="bhattacharyya", design_param=None,
                   crc=None, pc=None, good_threshold=0.0, sequence=None):
    """Construct a polar code: pick the N-k least reliable positions as frozen.

    method is one of 'bhattacharyya' (design_param = erasure probability,
    default 0.5), 'gaussian_approx' (design_param = design Es/N0 in dB,
    default 2.0) or 'external_sequence' (sequence = index permutation or a
    path to one, least reliable first). Reliability ties freeze the lower
    index. Deterministic for fixed inputs.
    """
    _block_log(N)
    if not (1 <= k <= N):
        raise ValueError("k must satisfy 1 <= k <= N, got %r" % (k,))
    seq_arr = None
    if method == "bhattacharyya":
        design_param = 0.5 if design_param is None else float(design_param)
        reliability = -bhattacharyya_profile(N, design_param)
    elif method == "gaussian_approx":
        design_param = 2.0 if design_param is None else float(design_param)
        reliability = gaussian_approx_profile(N, design_param)
    elif method == "external_sequence":
        if sequence is None:
            raise ValueError("external_sequence construction needs a sequence")
        if isinstance(sequence, (str, bytes)):
            seq_arr = load_reliability_sequence(sequence, N)
        else:
            seq_arr = _sequence_to_array(sequence, N)
        reliability = np.empty(N, dtype=float)
        reliability[seq_arr] = np.arange(N, dtype=float)
        design_param = None
    else:
        raise ValueError("unknown construction method %r" % (method,))

    # Ascending reliability, ties by ascending index: first N-k are frozen.
    order = np.lexsort((np.arange(N), reliability))
    frozen_mask = np.zeros(N, dtype=bool)
    frozen_mask[order[:N - k]] = True
    spec = CodeSpec(N, frozen_mask, reliability=reliability, crc=crc, pc=pc,
                    method=method, design_param=design_param, sequence=seq_arr)
    if good_threshold:
        spec.good_mask = good_bit_set(spec, good_threshold)
        spec._validate_layout()
    return spec


def good_bit_set(spec, threshold):
    """Mark the most reliable payload positions as good bits.

    threshold in [0,1] is the fraction of payload positions marked, with
    half-up rounding of threshold * k'; reliability ties prefer the lower
    index. Good bits are decoded by forced hard decision (no path split).
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("good-bit threshold must be in [0,1]")
    cand = spec.payload_positions
    count = int(math.floor(threshold * len(cand) + 0.5))
    mask = np.zeros(spec.N, dtype=bool)
    if count:
        order = np.lexsort((cand, -spec.reliability[cand]))
        mask[cand[order[:count]]] = True
    return mask


# -- transform / encoding ----------------------------------------------------

def polar_transform(bits):
    """Multiply a bit vector by the Kronecker-power generator (an involution)."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    N = len(x)
    if N > 1:
        _block_log(N)
    h = 1
    while h < N:
        x = x.reshape(-1, 2 * h)
        x[:, :h] ^= x[:, h:]
        x = x.reshape(-1)
        h *= 2
    return x


def crc_attach(bits, crc):
    """Append crc.width check bits (remainder, MSB first) to a bit vector."""
    bits = np.asarray(bits, dtype=np.uint8)
    rem = _crc_remainder(bits, crc)
    out = np.empty(len(bits) + crc.width, dtype=np.uint8)
    out[:len(bits)] = bits
    out[len(bits):] = rem
    return out


def crc_check(bits_with_crc, crc):
    """True iff the trailing crc.width bits match the payload's CRC."""
    bits = np.asarray(bits_with_crc, dtype=np.uint8)
    if len(bits) < crc.width:
        raise ValueError("input shorter than the CRC itself")
    rem = _crc_remainder(bits[:len(bits) - crc.width], crc)
    return bool(np.array_equal(rem, bits[len(bits) - crc.width:]))


_CRC_AFFINE_CACHE = {}


def _crc_affine(length, crc):
    """Matrix/offset pair with remainder(x) = x @ A xor r0 over GF(2).

    The remainder of a fixed-length message is affine in its bits (the
    init seed supplies the constant part), so checking many candidate
    sequences reduces to one bit-matrix product.
    """
    key = (length, crc.width, crc.polynomial, crc.init)
    hit = _CRC_AFFINE_CACHE.get(key)
    if hit is None:
        r0 = _crc_remainder(np.zeros(length, dtype=np.uint8), crc)
        A = np.empty((length, crc.width), dtype=np.float64)
        e = np.zeros(length, dtype=np.uint8)
        for i in range(length):
            e[i] = 1
            A[i] = _crc_remainder(e, crc) ^ r0
            e[i] = 0
        hit = (A, r0)
        _CRC_AFFINE_CACHE[key] = hit
    return hit


def crc_check_rows(rows, crc):
    """Vectorized crc_check over the rows of a (count, length) bit array."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.uint8))
    body = rows.shape[1] - crc.width
    if body < 0:
        raise ValueError("input shorter than the CRC itself")
    A, r0 = _crc_affine(body, crc)
    rem = (rows[:, :body].astype(np.float64) @ A).astype(np.int64) & 1
    rem ^= r0
    return np.all(rem == rows[:, body:], axis=1)


def _crc_table(crc):
    if crc._table is None:
        w, poly = crc.width, crc.polynomial
        mask = (1 << w) - 1
        top = 1 << (w - 1)
        table = np.empty(256, dtype=np.uint64)
        for byte in range(256):
            reg = byte << (w - 8)
            for _ in range(8):
                reg = ((reg << 1) ^ poly) if reg & top else (reg << 1)
            table[byte] = reg & mask
        crc._table = table
    return crc._table


def _crc_remainder(bits, crc):
    """Remainder of bits * x^width mod the generator, register seeded by init."""
    w = crc.width
    msg = np.array(bits, dtype=np.uint8, copy=True)
    if crc.init:
        init_bits = (crc.init >> np.arange(w - 1, -1, -1)) & 1
        lead = min(w, len(msg))
        msg[:lead] ^= init_bits[:lead].astype(np.uint8)
    if w >= 8:
        # Byte-table long division; leading zero pad is harmless once the
        # init seed has been folded into the message bits.
        pad = (-len(msg)) % 8
        data = np.packbits(np.concatenate([np.zeros(pad, np.uint8), msg]))
        table = _crc_table(crc)
        mask = (1 << w) - 1
        reg = 0
        for byte in data.tolist():
            reg = ((reg << 8) & mask) ^ int(table[((reg >> (w - 8)) ^ byte) & 0xFF])
        rem = reg
    else:
        reg = 0
        top = 1 << (w - 1)
        mask = (1 << w) - 1
        for b in msg.tolist():
            reg ^= b << (w - 1)
            reg = ((reg << 1) ^ crc.polynomial) if reg & top else (reg << 1)
            reg &= mask
        rem = reg
    return ((rem >> np.arange(w - 1, -1, -1)) & 1).astype(np.uint8)


def build_message(payload, spec):
    """Assemble the length-N message vector u from a payload bit vector.

    Payload bits fill the payload positions in index order; CRC bits (if
    any) occupy the last crc.width non-frozen positions; parity positions
    are forced by their constraints; frozen positions are zero.
    """
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.shape != (spec.payload_len,):
        raise ValueError("payload must have length %d, got %r"
                         % (spec.payload_len, payload.shape))
    u = np.zeros(spec.N, dtype=np.uint8)
    u[spec.payload_positions] = payload
    if spec.crc is not None:
        u[spec.crc_positions] = crc_attach(payload, spec.crc)[len(payload):]
    if spec.pc is not None:
        for parity, sources in spec.pc.constraints:
            acc = 0
            for s in sources:
                acc ^= int(u[s])
            u[parity] = acc
    return u


def encode(payload, spec):
    """Encode a payload bit vector into a codeword."""
    return polar_transform(build_message(payload, spec))


def extract_nonfrozen(u, spec):
    """All k non-frozen bits of a message vector, in index order."""
    u = np.asarray(u, dtype=np.uint8)
    return u[spec.nonfrozen_positions]


def extract_info(u, spec):
    """Payload bits of a message vector (CRC and parity positions excluded)."""
    u = np.asarray(u, dtype=np.uint8)
    return u[spec.payload_positions]


def crc_sequence(u, spec):
    """The payload+CRC bit sequence a CRC check runs over, in index order."""
    u = np.asarray(u, dtype=np.uint8)
    keep = np.ones(spec.N, dtype=bool)
    keep[spec.parity_positions] = False
    keep &= ~spec.frozen_mask
    return u[keep]


# -- code spec files ----------------------------------------------------------

def save_code_spec(spec, path):
    """Write a code spec file (key = value lines, arrays space-separated)."""
    lines = [
        "# polar code spec",
        "N = %d" % spec.N,
        "k = %d" % spec.k,
        "method = %s" % spec.method,
    ]
    if spec.design_param is not None:
        lines.append("design_param = %r" % (spec.design_param,))
    if spec.sequence is not None:
        lines.append("sequence = %s" % " ".join(map(str, spec.sequence.tolist())))
    lines.append("frozen = %s" % " ".join(map(str, np.flatnonzero(spec.frozen_mask))))
    good = np.flatnonzero(spec.good_mask)
    if len(good):
        lines.append("good = %s" % " ".join(map(str, good)))
    if spec.crc is not None:
        lines.append("crc_width = %d" % spec.crc.width)
        lines.append("crc_poly = 0x%X" % spec.crc.polynomial)
        if spec.crc.init:
            lines.append("crc_init = 0x%X" % spec.crc.init)
    if spec.pc is not None:
        groups = ["%d:%s" % (p, ",".join(map(str, srcs)))
                  for p, srcs in spec.pc.constraints]
        lines.append("pc = %s" % ";".join(groups))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_code_spec(path):
    """Read a code spec file written by save_code_spec."""
    fields = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected 'key = value'" % (path, lineno))
            key, val = (part.strip() for part in line.split("=", 1))
            if key in fields:
                raise ValueError("%s:%d: duplicate key %r" % (path, lineno, key))
            fields[key] = val
    try:
        N = int(fields.pop("N"))
        k = int(fields.pop("k"))
        method = fields.pop("method")
        frozen_idx = [int(t) for t in fields.pop("frozen").split()]
    except KeyError as exc:
        raise ValueError("%s: missing required key %s" % (path, exc)) from None

    frozen_mask = np.zeros(N, dtype=bool)
    frozen_mask[frozen_idx] = True
    if N - len(frozen_idx) != k:
        raise ValueError("%s: frozen list inconsistent with k" % path)

    crc = None
    if "crc_width" in fields:
        crc = CrcSpec(int(fields.pop("crc_width")),
                      int(fields.pop("crc_poly"), 16),
                      int(fields.pop("crc_init", "0x0"), 16))
    pc = None
    if "pc" in fields:
        constraints = []
        for group in fields.pop("pc").split(";"):
            head, _, tail = group.partition(":")
            sources = [int(t) for t in tail.split(",") if t]
            constraints.append((int(head), sources))
        pc = ParityCheckSpec(constraints)

    design_param = fields.pop("design_param", None)
    sequence = fields.pop("sequence", None)
    good = fields.pop("good", "")
    if fields:
        raise ValueError("%s: unknown keys %s" % (path, sorted(fields)))

    if method == "bhattacharyya":
        reliability = -bhattacharyya_profile(N, float(design_param))
    elif method == "gaussian_approx":
        reliability = gaussian_approx_profile(N, float(design_param))
    elif method == "external_sequence":
        seq = _sequence_to_array([int(t) for t in sequence.split()], N)
        reliability = np.empty(N, dtype=float)
        reliability[seq] = np.arange(N, dtype=float)
        sequence = seq
    else:
        reliability = None
        sequence = None

    spec = CodeSpec(N, frozen_mask, reliability=reliability, crc=crc, pc=pc,
                    method=method,
                    design_param=None if design_param is None else float(design_param),
                    sequence=sequence)
    if good:
        mask = np.zeros(N, dtype=bool)
        mask[[int(t) for t in good.split()]] = True
        spec.good_mask = mask
        spec._validate_layout()
    return spec
