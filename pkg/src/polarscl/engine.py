"""Successive-cancellation list decoding with the modeled datapath tricks.

The decoder walks the code tree in natural order, keeping up to L candidate
paths. Four architectural mechanisms are modeled bit-accurately:

  * strided LLR storage: only every ``storage_stride``-th stage keeps a
    bank per path; intermediate stages are recomputed on demand from the
    nearest stored ancestor (the channel bank is shared by all paths);
  * address-map path cloning: per-path banks live in reference-counted
    arenas, so surviving a pruning sort exchanges row indices instead of
    copying LLR words (``store_mode='copy'`` keeps the naive per-path
    copies as a reference for the bookkeeping);
  * multi-bit leaf decisions: ``leaf_width`` leaves are decided per step by
    expanding every free-bit pattern of every path and pruning once, which
    this module keeps exactly equivalent to bit-serial processing by
    re-indexing survivors in (parent, pattern) order after each sort;
  * decision recovery from partial sums: decoded bits are never stored per
    path during the walk; the final partial-sum banks are transformed back
    into u at the end (``record_decisions=True`` keeps a shadow copy for
    cross-checking).

Frozen-prefix skipping and rate-0 / rate-1 subtree shortcuts evaluate the
same f/g recursion with forced decisions, so they change the schedule (and
the cycle count) but never the arithmetic.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .codes import crc_check_rows
from .cycles import DecodeTrace
from .qarith import FloatDomain, QuantDomain, QuantProfile

FREE, FROZEN, GOOD, PARITY = 0, 1, 2, 3


# -- decoder profiles ----------------------------------------------------------

@dataclass(frozen=True)
class DecoderProfile:
    """Static configuration of one decoder variant."""
    kind: str
    l_max: int
    n_max_log: int
    quant: QuantProfile
    storage_stride: int = 1
    leaf_width: int = 1
    max_special_node: int = 0
    skip_frozen_prefix: bool = True
    double_package: bool = False
    selection: str = "best_pm"
    store_mode: str = "cow"
    semi_parallel_stages: tuple = ()
    semi_parallel_group: int = 4
    stage5_replicas: int = 0


_PROFILES = {
    # Single-path decoder for very long blocks.
    "sc": dict(
        kind="sc", l_max=1, n_max_log=15,
        quant=QuantProfile(q_c=6, q_i=7, q_sort=7, q_pm=6,
                           channel_scale=0.75),
        storage_stride=3, leaf_width=1, max_special_node=32,
    ),
    # Rate/length-flexible list decoder, CRC-aided, two-frame capable.
    "flexible": dict(
        kind="flexible", l_max=8, n_max_log=14,
        quant=QuantProfile(q_c=6, q_i=6, q_sort=7, q_pm=6,
                           channel_scale=0.75),
        storage_stride=3, leaf_width=4, max_special_node=32,
        double_package=True, selection="crc_aided",
    ),
    # Large-list decoder for short ultra-reliable blocks.
    "ultra": dict(
        kind="ultra", l_max=32, n_max_log=11,
        quant=QuantProfile(q_c=6, q_i=6, q_i_overrides=((0, 7),),
                           q_sort=7, q_pm=6, channel_scale=0.75),
        storage_stride=4, leaf_width=2, max_special_node=4,
        selection="parity_check", semi_parallel_stages=(4, 3),
        semi_parallel_group=4, stage5_replicas=4,
    ),
}


def profile_for(kind, **overrides):
    """A built-in decoder profile ('sc', 'flexible', 'ultra'), optionally
    with individual fields overridden."""
    try:
        base = _PROFILES[kind]
    except KeyError:
        raise ValueError("unknown decoder profile %r (have: %s)"
                         % (kind, ", ".join(sorted(_PROFILES)))) from None
    return replace(DecoderProfile(**base), **overrides)


def llr_memory_summary(n, profile, L=None):
    """Per-list LLR storage of the strided layout vs. keeping every stage.

    Counts LLR words only (the shared channel bank is identical in both
    layouts and excluded). Recompute replica banks for stage 5 count once,
    not per path.
    """
    L = L or profile.l_max
    stride = profile.storage_stride
    stored = tuple(t for t in range(n) if t % stride == 0)
    per_path = sum(1 << t for t in stored)
    replica = 0
    if profile.stage5_replicas and n > 5 and 5 % stride != 0:
        replica = profile.stage5_replicas * 32
    full = (1 << n) - 1
    return {
        "stored_stages": stored,
        "per_path_entries": per_path,
        "replica_entries": replica,
        "list_entries": L * per_path + replica,
        "full_entries": L * full,
        "ratio": (L * per_path + replica) / (L * full),
    }


# -- small bit helpers ---------------------------------------------------------

def _bits_of(values, width):
    """Integer pattern values -> bit rows, most significant bit first."""
    shifts = np.arange(width - 1, -1, -1)
    return ((np.asarray(values, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def _transform_rows(bits):
    """Row-wise Kronecker-power transform (involution) on a (rows, W) array."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    rows, W = x.shape
    h = 1
    while h < W:
        x = x.reshape(rows, -1, 2 * h)
        x[:, :, :h] ^= x[:, :, h:]
        x = x.reshape(rows, W)
        h *= 2
    return x


# -- per-path bank store -------------------------------------------------------

class PathStore:
    """Reference-counted LLR / partial-sum banks with per-path address maps.

    Every row of every arena is only ever written whole, so a clone never
    copies bank contents in 'cow' mode: it bumps refcounts and duplicates
    the address map. 'copy' mode materializes per-path rows and physically
    duplicates banks on cloning; the element counters expose the difference.
    """

    def __init__(self, n, stored_stages, L, llr_dtype, mode="cow", replicas=0):
        if mode not in ("cow", "copy"):
            raise ValueError("store mode must be 'cow' or 'copy'")
        self.n = n
        self.mode = mode
        self.stored = tuple(stored_stages)
        self.cap = 2 * L + 8
        self.base = {}
        self.data = {}
        off = 0
        for t in self.stored:
            self.base[("llr", t)] = off
            self.data[("llr", t)] = np.zeros((self.cap, 1 << t), dtype=llr_dtype)
            off += self.cap
        for t in range(n):
            self.base[("ps", t)] = off
            self.data[("ps", t)] = np.zeros((self.cap, 1 << t), dtype=np.uint8)
            off += self.cap
        self.refs = np.zeros(off, dtype=np.int64)
        self.total_rows = off
        self.llr_map = np.full((L, n), -1, dtype=np.int64)
        self.ps_map = np.full((L, n), -1, dtype=np.int64)
        self.replicas = np.zeros((replicas, 32), dtype=llr_dtype) if replicas else None
        self.clone_events = 0
        self.llr_element_copies = 0
        self.ps_element_copies = 0

    def _alloc(self, kind, t, count):
        b = self.base[(kind, t)]
        free = np.flatnonzero(self.refs[b:b + self.cap] == 0)
        if len(free) < count:
            raise RuntimeError("bank arena exhausted at stage %d" % t)
        return b + free[:count]

    def _bump(self, rows, delta):
        # bincount instead of ufunc.at: rows repeat heavily (shared banks).
        if len(rows):
            cnt = np.bincount(rows, minlength=self.total_rows)
            if delta > 0:
                self.refs += cnt
            else:
                self.refs -= cnt

    def _release(self, rows):
        self._bump(rows[rows >= 0], -1)

    def read(self, kind, t, L_act):
        """Deduplicated bank contents: (unique rows, path -> row index)."""
        m = self.llr_map if kind == "llr" else self.ps_map
        rows = m[:L_act, t]
        uniq, gid = np.unique(rows, return_inverse=True)
        b = self.base[(kind, t)]
        return self.data[(kind, t)][uniq - b], gid

    def write(self, kind, t, vals_u, key, L_act):
        """Overwrite the stage-t bank of every active path.

        vals_u holds one row per distinct content, key maps each path to
        its row; equal keys mean provably identical contents, so 'cow'
        mode shares a physical row between those paths from the start.
        """
        m = self.llr_map if kind == "llr" else self.ps_map
        b = self.base[(kind, t)]
        if self.mode == "cow":
            rows = self._alloc(kind, t, len(vals_u))
            self.data[(kind, t)][rows - b] = vals_u
            new = rows[key]
        else:
            rows = self._alloc(kind, t, L_act)
            self.data[(kind, t)][rows - b] = vals_u[key]
            new = rows
        self._bump(new, 1)
        self._release(m[:L_act, t].copy())
        m[:L_act, t] = new

    def reassign(self, parents, L_old):
        """Survivor i inherits the banks of path parents[i] (clone step)."""
        parents = np.asarray(parents)
        L_new = len(parents)
        self.clone_events += int(L_new - len(np.unique(parents)))
        if self.mode == "cow":
            for m in (self.llr_map, self.ps_map):
                old = m[:L_old].copy()
                new = old[parents]
                live = new[new >= 0]
                self._bump(live, 1)
                self._release(old.ravel())
                m[:L_new] = new
                if L_new < L_old:
                    m[L_new:L_old] = -1
            return
        # naive mode: first use of a parent keeps its rows, clones copy them
        first_idx = np.unique(parents, return_index=True)[1]
        is_first = np.zeros(L_new, dtype=bool)
        is_first[first_idx] = True
        for kind_maps, counter in (("llr", "llr_element_copies"),
                                   ("ps", "ps_element_copies")):
            m = self.llr_map if kind_maps == "llr" else self.ps_map
            stages = self.stored if kind_maps == "llr" else range(self.n)
            old = m[:L_old].copy()
            new = np.full((L_new, self.n), -1, dtype=np.int64)
            for t in stages:
                src = old[parents, t]
                col = np.where(is_first, src, -1)
                dup = ~is_first & (src >= 0)
                kd = int(dup.sum())
                if kd:
                    b = self.base[(kind_maps, t)]
                    rows = self._alloc(kind_maps, t, kd)
                    self.data[(kind_maps, t)][rows - b] = \
                        self.data[(kind_maps, t)][src[dup] - b]
                    col[dup] = rows
                    setattr(self, counter,
                            getattr(self, counter) + kd * (1 << t))
                new[:, t] = col
            live = new[new >= 0]
            self._bump(live, 1)
            self._release(old.ravel())
            m[:L_new] = new
            if L_new < L_old:
                m[L_new:L_old] = -1

    def stats(self):
        return {
            "clone_events": self.clone_events,
            "llr_element_copies": self.llr_element_copies,
            "ps_element_copies": self.ps_element_copies,
        }


# -- static schedule -----------------------------------------------------------

@dataclass
class BlockStep:
    """One leaf block: decide `width` consecutive leaves in a single step."""
    v: int
    start: int
    width: int
    kinds: np.ndarray
    parity_leaves: dict      # leaf offset -> (constraint idx, earlier source offsets)
    acc_updates: list        # (constraint idx, source offsets inside this span)
    has_tail: bool


@dataclass
class SpecialStep:
    """A whole subtree decided by forced decisions (rate-0 / rate-1)."""
    kind: str
    t: int
    v: int
    start: int
    width: int
    is_prefix: bool
    acc_updates: list
    has_tail: bool


def first_nonfrozen_skip(frozen_mask, leaf_width=1):
    """Largest aligned all-frozen subtree at the head of the schedule.

    Returns (stage, leaf count), or (None, 0) when the first leaf is not
    frozen or the skippable subtree is narrower than one leaf block.
    """
    frozen = np.asarray(getattr(frozen_mask, "frozen_mask", frozen_mask), dtype=bool)
    if not frozen[0]:
        return None, 0
    run = len(frozen) if frozen.all() else int(np.argmax(~frozen))
    n = int(len(frozen)).bit_length() - 1
    t = min(run.bit_length() - 1, n - 1)
    w = int(leaf_width).bit_length() - 1
    if t < w:
        return None, 0
    return t, 1 << t


def _build_plan(spec, profile):
    n, N = spec.n, spec.N
    lw = int(profile.leaf_width)
    if lw < 1 or lw & (lw - 1):
        raise ValueError("leaf width must be a power of two")
    w = min(lw.bit_length() - 1, n)
    kinds = np.full(N, FREE, dtype=np.uint8)
    kinds[spec.frozen_mask] = FROZEN
    kinds[spec.good_mask] = GOOD
    cons = list(spec.pc.constraints) if spec.pc is not None else []
    for p, _src in cons:
        kinds[p] = PARITY
    prefix = None
    if profile.skip_frozen_prefix and spec.frozen_mask[0]:
        t, _leaves = first_nonfrozen_skip(spec.frozen_mask, lw)
        if t is not None:
            prefix = (t, 0)

    def span_updates(start, width, with_parity_leaves):
        ups, leaves = [], {}
        for ci, (p, srcs) in enumerate(cons):
            offs = np.array([s - start for s in srcs if start <= s < start + width],
                            dtype=np.intp)
            if len(offs):
                ups.append((ci, offs))
            if with_parity_leaves and start <= p < start + width:
                pre = np.array([s - start for s in srcs if start <= s < p],
                               dtype=np.intp)
                leaves[p - start] = (ci, pre)
        return ups, leaves

    steps = []

    def walk(t, v):
        start, width = v << t, 1 << t
        seg = kinds[start:start + width]
        if prefix == (t, v):
            steps.append(SpecialStep("rate0", t, v, start, width, True, [],
                                     start + width == N))
            return
        if width <= profile.max_special_node and t >= w:
            if (seg == FROZEN).all():
                steps.append(SpecialStep("rate0", t, v, start, width, False, [],
                                         start + width == N))
                return
            if (seg == GOOD).all():
                ups, _ = span_updates(start, width, False)
                steps.append(SpecialStep("rate1", t, v, start, width, False, ups,
                                         start + width == N))
                return
        if t == w:
            ups, leaves = span_updates(start, width, True)
            steps.append(BlockStep(v, start, width, seg.copy(), leaves, ups,
                                   start + width == N))
            return
        walk(t - 1, 2 * v)
        walk(t - 1, 2 * v + 1)

    walk(n, 0)
    return steps, w


def _plan_for(spec, profile):
    key = (profile.leaf_width, profile.max_special_node,
           profile.skip_frozen_prefix)
    plan = spec._plan_cache.get(key)
    if plan is None:
        plan = _build_plan(spec, profile)
        spec._plan_cache[key] = plan
    return plan


# -- forced-decision subtree evaluation ----------------------------------------

def _forced_eval(vals, kind, t, domain):
    """Evaluate a subtree whose every decision is forced.

    kind 'rate0' forces zeros (all-frozen subtree), 'rate1' forces the hard
    decision of each leaf LLR (all-good subtree). Bit-exact against a
    bit-serial walk of the same subtree.

    Returns (decisions, partial sums, per-leaf penalties), each (rows, 2^t).
    """
    rows, size = vals.shape
    if kind == "rate1":
        # Following the hard decision at every leaf keeps each g output on
        # the same side of zero as its first argument (the magnitudes add),
        # so the leaf decisions re-encode to the elementwise hard decisions
        # of the node vector -- penalty-free by construction. A zero LLR
        # breaks the sign argument, so those rare nodes take the recursion.
        if vals.all():
            beta = domain.hd(vals)
            return _transform_rows(beta), beta, np.zeros_like(vals)
        return _forced_eval_serial(vals, kind, t, domain)
    # rate-0: every partial sum stays zero, so the g step degenerates to a
    # plain saturating sum and each level evaluates in one vector pass.
    cur = vals[:, None, :]
    for stage in range(t - 1, -1, -1):
        h = cur.shape[2] // 2
        lo, hi = cur[:, :, :h], cur[:, :, h:]
        cur = np.stack([domain.f(lo, hi, stage),
                        domain.g(hi, lo, 0, stage)], axis=2).reshape(rows, -1, h)
    leaves = cur[:, :, 0]
    bits = np.zeros((rows, size), dtype=np.uint8)
    pens = np.where(leaves < 0, domain.pen(leaves), 0)
    return bits, bits, pens


def _forced_eval_serial(vals, kind, t, domain):
    """Leaf-by-leaf forced recursion (general but slow; see _forced_eval)."""
    if vals.shape[1] == 1:
        llr = vals[:, 0]
        hd = domain.hd(llr)
        bit = np.zeros_like(hd) if kind == "rate0" else hd
        pen = np.where(bit != hd, domain.pen(llr), 0)
        return bit[:, None], bit[:, None], pen[:, None]
    h = vals.shape[1] // 2
    lv = domain.f(vals[:, :h], vals[:, h:], t - 1)
    ul, bl, pl = _forced_eval_serial(lv, kind, t - 1, domain)
    rv = domain.g(vals[:, h:], vals[:, :h], bl, t - 1)
    ur, br, pr = _forced_eval_serial(rv, kind, t - 1, domain)
    return (np.concatenate([ul, ur], axis=1),
            np.concatenate([bl ^ br, br], axis=1),
            np.concatenate([pl, pr], axis=1))


# -- leaf-block expansion ------------------------------------------------------

_PATTERN_CACHE = {}


def _pattern_tables(W):
    """(bits uint8, bits bool, values) for all 2^W patterns, MSB-first."""
    tbl = _PATTERN_CACHE.get(W)
    if tbl is None:
        vals = np.arange(1 << W, dtype=np.int64)
        pb = _bits_of(vals, W)
        tbl = (pb, pb.astype(bool), vals)
        _PATTERN_CACHE[W] = tbl
    return tbl


_S01 = np.array([0, 1], dtype=np.uint8)
_B2 = _transform_rows(_bits_of(np.arange(4), 2))
_I1_2 = np.arange(4) >> 1
_I1_4 = np.arange(16) >> 3
_I2_4 = np.arange(16) >> 2
_I3_4 = np.arange(16) >> 1
_PRE3P = np.arange(8) >> 1
_PRE3S = (np.arange(8) & 1).astype(np.uint8)


def _llr_tensor(vals, w, domain):
    """Leaf LLRs of one width-2^w block under every decision pattern.

    Returns (rows, 2^W, W); entry [r, p, j] is the LLR of leaf j when the
    leaves before j were decided as the prefix of pattern p (MSB-first).
    Runs the same in-block f/g datapath as a bit-serial schedule, one
    vectorized pass per distinct prefix instead of one per candidate.
    Covers the hardware leaf widths (1, 2, 4); wider blocks take the
    serial path.
    """
    U = len(vals)
    if w == 0:
        full = np.empty((U, 2, 1), dtype=vals.dtype)
        full[:, :, 0] = vals
        return full
    if w == 1:
        l0 = domain.f(vals[:, :1], vals[:, 1:], 0)
        l1 = domain.g(vals[:, 1:], vals[:, :1], _S01[None, :], 0)
        full = np.empty((U, 4, 2), dtype=l0.dtype)
        full[:, :, 0] = l0
        full[:, :, 1] = l1[:, _I1_2]
        return full
    if w == 2:
        t1 = domain.f(vals[:, :2], vals[:, 2:], 1)
        l0 = domain.f(t1[:, :1], t1[:, 1:], 0)
        l1 = domain.g(t1[:, 1:], t1[:, :1], _S01[None, :], 0)
        rv = domain.g(vals[:, None, 2:], vals[:, None, :2], _B2[None, :, :], 1)
        l2 = domain.f(rv[:, :, 0], rv[:, :, 1], 0)
        l3 = domain.g(rv[:, _PRE3P, 1], rv[:, _PRE3P, 0], _PRE3S, 0)
        full = np.empty((U, 16, 4), dtype=l0.dtype)
        full[:, :, 0] = l0
        full[:, :, 1] = l1[:, _I1_4]
        full[:, :, 2] = l2[:, _I2_4]
        full[:, :, 3] = l3[:, _I3_4]
        return full
    raise ValueError("pattern-joint expansion supports leaf widths up to 4")


def _prune_order(parent, value, pm, L, frame, pm_cap=None):
    """Keep each frame's L best candidates, in (parent, pattern) order.

    Pruning order is (metric, parent index, pattern value); re-indexing the
    survivors afterwards is what keeps every selection event numbering its
    paths exactly like a bit-serial decoder. Frames are independent lists
    decoded in lockstep: their candidate runs are contiguous and equally
    long, so one frame-major sort prunes all of them at once. Candidates
    enter (and leave) in frame-major (parent, pattern) order, so the
    re-index never needs the frame as a key.

    Integer metrics bounded by pm_cap (the sorter register ceiling) pack
    all four keys into one word for a single stable argsort; float metrics
    take the generic lexsort.
    """
    F = int(frame[-1]) + 1
    if pm_cap is not None:
        pspan = int(parent[-1]) + 1
        vspan = int(value.max()) + 1
        if F * (pm_cap + 1) * pspan * vspan <= (1 << 62):
            key = ((frame * (pm_cap + 1) + pm) * pspan + parent) * vspan + value
            perm = np.argsort(key, kind="stable")
        else:
            perm = np.lexsort((value, parent, pm, frame))
    else:
        perm = np.lexsort((value, parent, pm, frame))
    sel = perm.reshape(F, -1)[:, :L].ravel()
    return sel[np.lexsort((value[sel], parent[sel]))]


def _block_candidates(pm, vals, gid, kinds, parity_leaves, pc_acc, domain,
                      w, L, F=1):
    """Split and prune one leaf block, leaf by leaf, on precomputed tables.

    Runs the exact schedule of a bit-serial decoder -- double the candidate
    set at each free leaf, keep the best L, renormalize after each pruning
    sort -- but reads every leaf LLR out of the pattern tensor of the
    deduplicated block vectors instead of recomputing the in-block tree per
    candidate. The candidate array stays sorted by (entry path, decided
    bits) throughout, so positional order doubles as the serial path index
    for tie-breaking. With F > 1 the entry paths belong to F equally sized
    independent frames (lockstep batch) and pruning keeps L per frame.

    Returns (parents, pattern values, metrics, peak candidate count,
    number of pruning sorts); parents refer to the paths at block entry.
    """
    W = 1 << w
    full = _llr_tensor(vals, w, domain)           # (rows, 2^W, W)
    hdv = full < 0
    pen = domain.pen(full)
    c0 = len(pm) // F
    cap = None if domain.is_float else domain.pm_cap_sort
    parent = np.arange(len(pm))
    value = np.zeros(len(pm), dtype=np.int64)
    cur = np.asarray(pm, dtype=domain.pm_dtype)
    peak = len(pm)
    n_sorts = 0
    for j in range(W):
        rows = gid[parent]
        pidx = value << (W - j)                   # undecided suffix = 0
        hd = hdv[rows, pidx, j]
        pj = pen[rows, pidx, j]
        kind = int(kinds[j])
        if kind == FREE:
            parent = np.repeat(parent, 2)
            value = np.repeat(value, 2)
            cur = np.repeat(cur, 2)
            hd = np.repeat(hd, 2)
            pj = np.repeat(pj, 2)
            bit = np.tile(_S01, len(parent) // 2)
            cur = domain.pm_add(cur, np.where((bit != 0) != hd, pj, 0))
            value = (value << 1) | bit
            peak = max(peak, len(parent))
            if len(parent) > L * F:
                sel = _prune_order(parent, value, cur, L, parent // c0, cap)
                parent, value, cur = parent[sel], value[sel], cur[sel]
                n_sorts += 1
                if L >= 2:
                    cur = domain.pm_normalize(cur.reshape(F, L)).reshape(-1)
        else:
            if kind == FROZEN:
                cur = domain.pm_add(cur, np.where(hd, pj, 0))
                value = value << 1
            elif kind == GOOD:
                value = (value << 1) | hd
            else:
                ci, offs = parity_leaves[j]
                req = pc_acc[parent, ci].astype(bool)
                for o in offs:
                    req = req ^ (((value >> (j - 1 - o)) & 1) != 0)
                cur = domain.pm_add(cur, np.where(req != hd, pj, 0))
                value = (value << 1) | req
    return parent, value, cur, peak, n_sorts


def _leaf_llr(vals, vgid, prefix, j, m, domain):
    """LLR of leaf j inside a width-2^m block, given decided earlier bits.

    vals: (rows, 2^m) deduplicated block vectors at stage m; vgid maps each
    candidate to its row; prefix: (candidates, decided bits) inside this
    block. The recursion mirrors the in-block f/g datapath, including the
    per-stage saturation widths.
    """
    if m == 0:
        return vals[vgid, 0]
    h = 1 << (m - 1)
    if j < h:
        sub = domain.f(vals[:, :h], vals[:, h:], m - 1)
        return _leaf_llr(sub, vgid, prefix, j, m - 1, domain)
    beta = _transform_rows(prefix[:, :h])
    sub = domain.g(vals[vgid, h:], vals[vgid, :h], beta, m - 1)
    return _leaf_llr(sub, np.arange(len(sub)), prefix[:, h:], j - h, m - 1, domain)


def _expand_block(pm, vals, gid, kinds, parity_resolve, domain, w, L, F=1):
    """Serial fallback of _block_candidates for blocks wider than 4 leaves.

    Identical schedule, penalties, prunes and tie-breaks; each leaf LLR is
    recomputed through the in-block tree instead of read from the pattern
    tensor (whose size is exponential in the block width).
    """
    c0 = len(pm) // F
    cap = None if domain.is_float else domain.pm_cap_sort
    parent = np.arange(len(pm))
    value = np.zeros(len(pm), dtype=np.int64)
    cur = np.asarray(pm, dtype=domain.pm_dtype)
    peak = len(pm)
    n_sorts = 0
    for j in range(len(kinds)):
        prefix = _bits_of(value, j) if j else \
            np.zeros((len(parent), 0), dtype=np.uint8)
        llr = _leaf_llr(vals, gid[parent], prefix, j, w, domain)
        hd = domain.hd(llr)
        pen = domain.pen(llr)
        kind = int(kinds[j])
        if kind == FREE:
            parent = np.repeat(parent, 2)
            value = np.repeat(value, 2)
            cur = np.repeat(cur, 2)
            hd = np.repeat(hd, 2)
            pen = np.repeat(pen, 2)
            bit = np.tile(_S01, len(parent) // 2)
            cur = domain.pm_add(cur, np.where(bit != hd, pen, 0))
            value = (value << 1) | bit
            peak = max(peak, len(parent))
            if len(parent) > L * F:
                sel = _prune_order(parent, value, cur, L, parent // c0, cap)
                parent, value, cur = parent[sel], value[sel], cur[sel]
                n_sorts += 1
                if L >= 2:
                    cur = domain.pm_normalize(cur.reshape(F, L)).reshape(-1)
        else:
            if kind == FROZEN:
                bit = np.zeros(len(parent), dtype=np.uint8)
            elif kind == GOOD:
                bit = hd
            else:
                bit = parity_resolve(j, parent, value)
            cur = domain.pm_add(cur, np.where(bit != hd, pen, 0))
            value = (value << 1) | bit
    return parent, value, cur, peak, n_sorts


def split_and_select(pms, block_vectors, kinds, L_target, domain=None):
    """One leaf-block expansion plus pruning, as a standalone step.

    pms: (P,) path metrics; block_vectors: (P, W) leaf-block LLR vectors;
    kinds: length-W leaf kinds (FREE / FROZEN / GOOD -- parity leaves need
    the running accumulators of a full decode). Splitting and selection are
    interleaved leaf by leaf, exactly like running W sequential one-bit
    splits. Returns a dict with the surviving parents, decided bits,
    pattern values and metrics, plus the peak candidate count and the
    number of pruning sorts.
    """
    domain = domain or FloatDomain()
    vals = np.atleast_2d(np.asarray(block_vectors, dtype=domain.llr_dtype))
    kinds = np.asarray(kinds, dtype=np.uint8)
    W = len(kinds)
    if vals.shape[1] != W or W & (W - 1):
        raise ValueError("block vectors must be (paths, W) with W a power of two")
    if (kinds == PARITY).any():
        raise ValueError("parity leaves are only supported inside a full decode")
    pms = np.asarray(pms, dtype=domain.pm_dtype)
    if len(pms) != len(vals):
        raise ValueError("one metric per path required")
    w = W.bit_length() - 1
    gid = np.arange(len(vals))
    if W <= 4:
        parent, value, pm, peak, n_sorts = _block_candidates(
            pms, vals, gid, kinds, {}, None, domain, w, L_target)
    else:
        parent, value, pm, peak, n_sorts = _expand_block(
            pms, vals, gid, kinds, None, domain, w, L_target)
    return {
        "parent": parent,
        "bits": _pattern_tables(W)[0][value],
        "pattern": value,
        "pm": pm,
        "sorted": n_sorts,
        "candidates": peak,
    }


# -- decision recovery ---------------------------------------------------------

def recover_from_partial_sums(partial_sums, tail_bits):
    """Rebuild the decided vector u from final partial-sum banks.

    partial_sums: bank contents for stages w, w+1, ..., n-1 in ascending
    order (the stage-t bank holds 2^t bits), where w is fixed by the tail
    length; tail_bits: the trailing 2^w decisions -- the final leaf block
    or final forced subtree -- whose writes only cascade upward and never
    land in a kept bank. When the decode finished, the stage-t bank holds
    the transform of u[N-2^(t+1) : N-2^t]; the transform is an involution,
    so applying it once more recovers u.
    """
    tail = np.asarray(tail_bits, dtype=np.uint8).ravel()
    tw = len(tail)
    if tw & (tw - 1):
        raise ValueError("tail length must be a power of two")
    w = tw.bit_length() - 1
    n = w + len(partial_sums)
    N = 1 << n
    u = np.zeros(N, dtype=np.uint8)
    u[N - tw:] = tail
    t = w
    for S in partial_sums:
        S = np.asarray(S, dtype=np.uint8).ravel()
        if len(S) != 1 << t:
            raise ValueError("stage %d bank must hold %d bits" % (t, 1 << t))
        u[N - (1 << (t + 1)):N - (1 << t)] = _transform_rows(S[None, :])[0]
        t += 1
    return u


# -- the decoder ---------------------------------------------------------------

@dataclass
class DecodeResult:
    u_hat: np.ndarray
    info_hat: np.ndarray
    selected_path: int
    pm: float
    crc_pass: bool
    survivors_u: np.ndarray
    survivors_pm: np.ndarray
    survivors_crc: np.ndarray
    trace: DecodeTrace
    stats: dict


@dataclass
class BatchResult:
    """Per-frame outputs of a lockstep batch decode (leading axis = frame)."""
    u_hat: np.ndarray
    info_hat: np.ndarray
    selected_path: np.ndarray
    pm: np.ndarray
    crc_pass: np.ndarray
    survivors_u: np.ndarray
    survivors_pm: np.ndarray
    survivors_crc: np.ndarray
    stats: dict


class _ListDecoder:
    def __init__(self, spec, profile, L, domain, collect_trace, record_decisions,
                 frames=1):
        self.spec = spec
        self.profile = profile
        self.L = L
        self.F = frames
        self.domain = domain
        self.n, self.N = spec.n, spec.N
        self.steps, self.w = _plan_for(spec, profile)
        stored = [t for t in range(self.n) if t % profile.storage_stride == 0]
        self.stored_set = set(stored)
        replicas = 0
        if profile.stage5_replicas and self.n > 5 and 5 not in self.stored_set:
            replicas = profile.stage5_replicas
        R = L * frames
        self.store = PathStore(self.n, stored, R, domain.llr_dtype,
                               profile.store_mode, replicas)
        ncon = len(spec.pc.constraints) if spec.pc is not None else 0
        self.pc_acc = np.zeros((R, max(ncon, 1)), dtype=np.uint8)
        # The final step's decisions only cascade upward, never into the
        # per-stage banks below it, so the tail register spans that whole
        # step (one leaf block, or a wider forced subtree).
        self.tail_bits = np.zeros((R, int(self.steps[-1].width)), dtype=np.uint8)
        self.shadow = np.zeros((R, self.N), dtype=np.uint8) if record_decisions else None
        self.pm = np.zeros(frames, dtype=domain.pm_dtype)
        self.L_act = 1              # active paths per frame (lockstep)
        self.rows = frames          # total active path rows = F * L_act
        self._frame_ids = np.arange(frames)
        self.trace = None
        if collect_trace:
            self.trace = DecodeTrace(
                N=self.N, k=spec.k, L=L, kind=profile.kind,
                semi_parallel_stages=profile.semi_parallel_stages,
                semi_parallel_group=profile.semi_parallel_group)
        self.bank_node = {t: -1 for t in stored}
        self.last_v = np.full(self.n + 1, -1, dtype=np.int64)

    # ---- LLR vector access (with on-demand recompute) ----

    def _vecs(self, t, v):
        if t == self.n:
            return self.chan, np.repeat(self._frame_ids, self.L_act)
        if t in self.stored_set and self.bank_node[t] == v:
            return self.store.read("llr", t, self.rows)
        pv, pgid = self._vecs(t + 1, v >> 1)
        h = 1 << t
        if v & 1 == 0:
            vals = self.domain.f(pv[:, :h], pv[:, h:], t)
            gid = pgid
        else:
            srows = self.store.ps_map[:self.rows, t]
            pair = pgid.astype(np.int64) * (self.store.total_rows + 1) + srows
            _uniq, first, gid = np.unique(pair, return_index=True,
                                          return_inverse=True)
            pu = pv[pgid[first]]
            b = self.store.base[("ps", t)]
            s = self.store.data[("ps", t)][srows[first] - b]
            vals = self.domain.g(pu[:, h:], pu[:, :h], s, t)
        if t in self.stored_set:
            self.store.write("llr", t, vals, gid, self.rows)
            self.bank_node[t] = v
        elif self.store.replicas is not None and t == 5:
            reps = self.store.replicas
            idx = np.arange(self.rows) % len(reps)
            reps[idx] = vals[gid]
        if self.trace is not None:
            self.trace.stage(t, "g" if v & 1 else "f", self.L_act,
                             bool(self.last_v[t] != v))
        self.last_v[t] = v
        return vals, gid

    # ---- partial-sum write-back cascade ----

    def _write_beta(self, t, v, beta_u, key):
        L_act = self.rows
        while True:
            if t >= self.n:
                return
            if v & 1 == 0:
                self.store.write("ps", t, beta_u, key, L_act)
                return
            srows = self.store.ps_map[:L_act, t]
            pair = key.astype(np.int64) * (self.store.total_rows + 1) + srows
            _uniq, first, new_key = np.unique(pair, return_index=True,
                                              return_inverse=True)
            rep = beta_u[key[first]]
            b = self.store.base[("ps", t)]
            s = self.store.data[("ps", t)][srows[first] - b]
            beta_u = np.concatenate([s ^ rep, rep], axis=1)
            key = new_key
            t += 1
            v >>= 1

    # ---- survivor bookkeeping ----

    def _apply_parents(self, parents):
        if len(parents) == self.rows and \
           np.array_equal(parents, np.arange(self.rows)):
            return
        self.store.reassign(parents, self.rows)
        k = len(parents)
        self.pc_acc[:k] = self.pc_acc[parents]
        self.tail_bits[:k] = self.tail_bits[parents]
        if self.shadow is not None:
            self.shadow[:k] = self.shadow[parents]

    # ---- step processors ----

    def _block(self, step):
        vals, gid = self._vecs(self.w, step.v)
        if step.width <= 4:
            parents, kept_value, pm, peak, n_sorts = _block_candidates(
                self.pm, vals, gid, step.kinds, step.parity_leaves,
                self.pc_acc, self.domain, self.w, self.L, self.F)
        else:
            def resolve(j, parent_idx, value):
                ci, offs = step.parity_leaves[j]
                bit = self.pc_acc[parent_idx, ci]
                for o in offs:
                    bit = bit ^ ((value >> (j - 1 - o)) & 1).astype(np.uint8)
                return bit

            parents, kept_value, pm, peak, n_sorts = _expand_block(
                self.pm, vals, gid, step.kinds, resolve, self.domain,
                self.w, self.L, self.F)
        kept_bits = _pattern_tables(step.width)[0][kept_value]
        self._apply_parents(parents)
        keep = len(parents)
        self.L_act = keep // self.F
        self.rows = keep
        self.pm = pm
        for ci, offs in step.acc_updates:
            self.pc_acc[:keep, ci] ^= np.bitwise_xor.reduce(kept_bits[:, offs],
                                                            axis=1)
        if step.has_tail:
            self.tail_bits[:keep] = kept_bits
        if self.shadow is not None:
            self.shadow[:keep, step.start:step.start + step.width] = kept_bits
        if self.trace is not None:
            self.trace.leaf(self.w, peak, keep, n_sorts)
        uniq_val, key = np.unique(kept_value, return_inverse=True)
        beta_u = _transform_rows(_bits_of(uniq_val, step.width))
        self._write_beta(self.w, step.v, beta_u, key)

    def _special(self, step):
        vals, gid = self._vecs(step.t, step.v)
        u_u, beta_u, pens_u = _forced_eval(vals, step.kind, step.t, self.domain)
        self.pm = self.domain.pm_fold(self.pm, pens_u[gid])
        if step.acc_updates:
            bits = u_u[gid]
            for ci, offs in step.acc_updates:
                self.pc_acc[:self.rows, ci] ^= np.bitwise_xor.reduce(
                    bits[:, offs], axis=1)
        if step.has_tail:
            self.tail_bits[:self.rows] = u_u[gid]
        if self.shadow is not None:
            self.shadow[:self.rows, step.start:step.start + step.width] = u_u[gid]
        if self.trace is not None:
            self.trace.special(step.kind, step.t, self.L_act, step.is_prefix)
        self._write_beta(step.t, step.v, beta_u, gid.astype(np.int64))

    # ---- top level ----

    def run(self, chan):
        self.chan = chan
        for step in self.steps:
            if isinstance(step, BlockStep):
                self._block(step)
            else:
                self._special(step)
        return self._finalize()

    def _finalize(self):
        rows, F, c = self.rows, self.F, self.L_act
        if self.shadow is not None:
            U = self.shadow[:rows].copy()
        else:
            U = np.zeros((rows, self.N), dtype=np.uint8)
            tw = self.tail_bits.shape[1]
            U[:, self.N - tw:] = self.tail_bits[:rows]
            for t in range(tw.bit_length() - 1, self.n):
                prow = self.store.ps_map[:rows, t]
                b = self.store.base[("ps", t)]
                S = self.store.data[("ps", t)][prow - b]
                U[:, self.N - (1 << (t + 1)):self.N - (1 << t)] = \
                    _transform_rows(S)
        crc_ok = None
        if self.spec.crc is not None:
            keep = ~self.spec.frozen_mask.copy()
            keep[self.spec.parity_positions] = False
            crc_ok = crc_check_rows(U[:, keep], self.spec.crc)
        # Per-frame winner: lowest metric, ties to the lowest path index;
        # CRC-aided selection restricts to passing paths when any exist.
        pmF = self.pm.reshape(F, c)
        idx = np.argmin(pmF, axis=1)
        if self.profile.selection == "crc_aided" and crc_ok is not None:
            okF = crc_ok.reshape(F, c)
            masked = np.where(okF, pmF.astype(np.float64), np.inf)
            idx = np.where(okF.any(axis=1), np.argmin(masked, axis=1), idx)
        sel = self._frame_ids * c + idx
        u_hat = U[sel]
        stats = dict(self.store.stats(), list_size=c)
        if F == 1:
            i0 = int(idx[0])
            return DecodeResult(
                u_hat=u_hat[0],
                info_hat=u_hat[0, self.spec.payload_positions],
                selected_path=i0,
                pm=self.pm[i0],
                crc_pass=bool(crc_ok[i0]) if crc_ok is not None else None,
                survivors_u=U,
                survivors_pm=self.pm.copy(),
                survivors_crc=crc_ok,
                trace=self.trace,
                stats=stats,
            )
        return BatchResult(
            u_hat=u_hat,
            info_hat=u_hat[:, self.spec.payload_positions],
            selected_path=idx,
            pm=self.pm[sel],
            crc_pass=crc_ok[sel] if crc_ok is not None else None,
            survivors_u=U.reshape(F, c, self.N),
            survivors_pm=self.pm.reshape(F, c).copy(),
            survivors_crc=crc_ok.reshape(F, c) if crc_ok is not None else None,
            stats=stats,
        )


def decode(chan_llrs, spec, profile, L=None, arithmetic="quantized",
           collect_trace=False, record_decisions=False):
    """List-decode one frame of channel LLRs.

    profile may be a DecoderProfile or a built-in name. arithmetic is
    'quantized' (the modeled fixed-point datapath; float inputs are
    quantized with the profile's channel settings, integer inputs are
    range-checked and taken as-is) or 'float' (same algorithm, no
    quantization anywhere). L defaults to the profile's maximum.
    """
    if not isinstance(profile, DecoderProfile):
        profile = profile_for(profile)
    if spec.n > profile.n_max_log:
        raise ValueError("block length 2^%d exceeds the profile limit 2^%d"
                         % (spec.n, profile.n_max_log))
    L = L or profile.l_max
    if L < 1 or L & (L - 1) or L > profile.l_max:
        raise ValueError("list size must be a power of two <= %d" % profile.l_max)
    if arithmetic == "quantized":
        domain = QuantDomain(profile.quant, spec.n)
    elif arithmetic == "float":
        domain = FloatDomain(spec.n)
    else:
        raise ValueError("arithmetic must be 'quantized' or 'float'")
    x = np.asarray(chan_llrs)
    if x.shape != (spec.N,):
        raise ValueError("expected %d channel LLRs, got shape %r"
                         % (spec.N, x.shape))
    if not domain.is_float and np.issubdtype(x.dtype, np.integer):
        chan = domain.check_channel(x)
    else:
        chan = domain.channel(x)
    dec = _ListDecoder(spec, profile, L, domain, collect_trace, record_decisions)
    return dec.run(chan[None, :])


def decode_batch(chan_llrs, spec, profile, L=None, arithmetic="quantized",
                 record_decisions=False):
    """List-decode a batch of frames in lockstep; chan_llrs is (frames, N).

    Identical, frame for frame, to calling ``decode`` on each row: the walk
    schedule and every split/prune event of an SC list decode are data
    independent, so the frames march through the same steps with the same
    per-frame path counts while their arithmetic never mixes. Batching
    only amortizes the per-step dispatch cost over the frame axis, which
    is what makes Monte Carlo campaigns affordable. Traces are not
    collected in batch mode; returns a BatchResult.
    """
    if not isinstance(profile, DecoderProfile):
        profile = profile_for(profile)
    if spec.n > profile.n_max_log:
        raise ValueError("block length 2^%d exceeds the profile limit 2^%d"
                         % (spec.n, profile.n_max_log))
    L = L or profile.l_max
    if L < 1 or L & (L - 1) or L > profile.l_max:
        raise ValueError("list size must be a power of two <= %d" % profile.l_max)
    if arithmetic == "quantized":
        domain = QuantDomain(profile.quant, spec.n)
    elif arithmetic == "float":
        domain = FloatDomain(spec.n)
    else:
        raise ValueError("arithmetic must be 'quantized' or 'float'")
    x = np.asarray(chan_llrs)
    if x.ndim != 2 or x.shape[1] != spec.N or not len(x):
        raise ValueError("expected (frames, %d) channel LLRs, got shape %r"
                         % (spec.N, x.shape))
    if not domain.is_float and np.issubdtype(x.dtype, np.integer):
        chan = domain.check_channel(x)
    else:
        chan = domain.channel(x)
    dec = _ListDecoder(spec, profile, L, domain, False, record_decisions,
                       frames=len(x))
    return dec.run(chan)
