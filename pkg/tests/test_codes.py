import numpy as np
import pytest

from polarscl.codes import (
    CRC_POLYNOMIALS, CrcSpec, ParityCheckSpec, bhattacharyya_profile,
    build_message, construct_code, crc_attach, crc_check, crc_check_rows,
    encode, extract_info, gaussian_approx_profile, good_bit_set,
    load_code_spec, polar_transform, save_code_spec,
)


def kron_generator(n):
    """n-fold Kronecker power of [[1,0],[1,1]], the explicit generator."""
    g = np.array([[1]], dtype=np.uint8)
    f = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    for _ in range(n):
        g = np.kron(g, f)
    return g


def crc_remainder_slow(bits, crc):
    # Long division of bits * x^width by the generator, bit by bit; the
    # init word is folded into the leading message bits first.
    msg = list(int(b) for b in bits)
    for i in range(min(crc.width, len(msg))):
        msg[i] ^= (crc.init >> (crc.width - 1 - i)) & 1
    reg = msg + [0] * crc.width
    g = [1] + [(crc.polynomial >> (crc.width - 1 - i)) & 1
               for i in range(crc.width)]
    for i in range(len(msg)):
        if reg[i]:
            for j, gj in enumerate(g):
                reg[i + j] ^= gj
    return np.array(reg[len(msg):], dtype=np.uint8)


def test_polar_transform_matches_generator_matrix():
    rng = np.random.default_rng(0)
    for n in (2, 4, 6):
        G = kron_generator(n)
        u = rng.integers(0, 2, (5, 1 << n)).astype(np.uint8)
        for row in u:
            assert np.array_equal(polar_transform(row), row @ G % 2)


def test_polar_transform_hand_case():
    # u = [0,1,0,1] -> rows 1 and 3 of F^{x2}: [1,1,0,0] ^ [1,1,1,1]
    assert np.array_equal(polar_transform([0, 1, 0, 1]), [0, 0, 1, 1])


def test_polar_transform_is_involution():
    rng = np.random.default_rng(1)
    u = rng.integers(0, 2, 256).astype(np.uint8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_bhattacharyya_channel_ordering():
    """The erasure upper bound degrades toward bit 0 and improves toward
    bit N-1; the all-ones/all-zeros extremes are exact."""
    z = bhattacharyya_profile(64, erasure_prob=0.5)
    assert z[0] == max(z)
    assert z[-1] == min(z)
    # z_0 after n levels of z' = 2z - z^2 starting at 0.5
    zz = 0.5
    for _ in range(6):
        zz = 2 * zz - zz * zz
    assert z[0] == pytest.approx(zz)


def test_construct_frozen_count_and_known_n8():
    spec = construct_code(8, 4, method="bhattacharyya", design_param=0.5)
    assert int(spec.frozen_mask.sum()) == 4
    # the classic N=8,k=4 information set
    assert np.array_equal(np.flatnonzero(~spec.frozen_mask), [3, 5, 6, 7])
    spec_ga = construct_code(8, 4, method="gaussian_approx", design_param=2.0)
    assert np.array_equal(spec_ga.frozen_mask, spec.frozen_mask)


def test_construct_validation():
    with pytest.raises(ValueError):
        construct_code(100, 50)  # not a power of two
    with pytest.raises(ValueError):
        construct_code(64, 65)
    with pytest.raises(ValueError):
        construct_code(64, 0)


def test_gaussian_approx_monotone_in_design_snr():
    # a stronger channel can only shrink the frozen set's reliability gap;
    # the selected info set stays sorted by the same metric
    m = gaussian_approx_profile(128, design_snr_db=1.0)
    assert np.all(np.asarray(m) >= 0)
    spec = construct_code(128, 64, method="gaussian_approx", design_param=1.0)
    assert int((~spec.frozen_mask).sum()) == 64


def test_external_sequence_construction(tmp_path):
    # reliability sequence listing indices from least to most reliable
    rng = np.random.default_rng(3)
    order = rng.permutation(32)
    spec = construct_code(32, 12, method="external_sequence",
                          sequence=order.tolist())
    # the k most reliable = last 12 entries of the sequence
    assert set(np.flatnonzero(~spec.frozen_mask)) == set(order[-12:])


def test_crc_attach_check_roundtrip():
    rng = np.random.default_rng(4)
    for width in (8, 11, 16, 24):
        crc = CrcSpec(width)
        bits = rng.integers(0, 2, 40).astype(np.uint8)
        coded = crc_attach(bits, crc)
        assert crc_check(coded, crc)
        flip = coded.copy()
        flip[rng.integers(0, len(flip))] ^= 1
        assert not crc_check(flip, crc)


def test_crc_remainder_against_long_division():
    rng = np.random.default_rng(5)
    for width in (8, 11, 16, 24):
        for init in (0, 0x5A):
            crc = CrcSpec(width, init=init)
            for length in (1, 7, 24, 53):
                bits = rng.integers(0, 2, length).astype(np.uint8)
                want = crc_remainder_slow(bits, crc)
                got = crc_attach(bits, crc)[length:]
                assert np.array_equal(got, want), (width, init, length)


def test_crc24_known_answer():
    # CRC-24/LTE-A (0x864CFB, init 0): "123456789" -> 0xCDE703
    msg = np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8))
    rem = crc_attach(msg, CrcSpec(24))[-24:]
    value = int("".join(map(str, rem)), 2)
    assert value == 0xCDE703


def test_crc_check_rows_matches_serial():
    rng = np.random.default_rng(6)
    crc = CrcSpec(24)
    rows = rng.integers(0, 2, (200, 64)).astype(np.uint8)
    # make some rows valid
    for i in range(0, 200, 3):
        rows[i] = crc_attach(rows[i, :40], crc)
    want = np.array([crc_check(r, crc) for r in rows])
    assert np.array_equal(crc_check_rows(rows, crc), want)
    assert want.any() and not want.all()


def test_build_message_layout():
    rng = np.random.default_rng(7)
    crc = CrcSpec(8)
    spec = construct_code(64, 24, method="bhattacharyya", design_param=0.5,
                          crc=crc)
    assert spec.payload_len == 16
    payload = rng.integers(0, 2, 16).astype(np.uint8)
    u = build_message(payload, spec)
    assert np.all(u[spec.frozen_mask] == 0)
    assert np.array_equal(u[spec.payload_positions], payload)
    # nonfrozen content is payload followed by its CRC, in position order
    seq = u[~spec.frozen_mask]
    assert crc_check(seq, crc)
    assert np.array_equal(extract_info(u, spec), payload)


def test_parity_check_attachment():
    base = construct_code(32, 16, method="bhattacharyya", design_param=0.5)
    nf = np.flatnonzero(~base.frozen_mask)
    # two parity targets fed by earlier non-frozen bits
    p1, p2 = int(nf[5]), int(nf[12])
    pc = ParityCheckSpec([(p1, (int(nf[1]), int(nf[3]))),
                          (p2, (int(nf[0]), int(nf[7]), int(nf[9])))])
    spec = construct_code(32, 16, method="bhattacharyya", design_param=0.5,
                          pc=pc)
    rng = np.random.default_rng(8)
    payload = rng.integers(0, 2, spec.payload_len).astype(np.uint8)
    u = build_message(payload, spec)
    assert u[p1] == u[nf[1]] ^ u[nf[3]]
    assert u[p2] == u[nf[0]] ^ u[nf[7]] ^ u[nf[9]]


def test_encode_is_transform_of_message():
    rng = np.random.default_rng(9)
    spec = construct_code(128, 64, method="bhattacharyya", design_param=0.5)
    payload = rng.integers(0, 2, spec.payload_len).astype(np.uint8)
    assert np.array_equal(encode(payload, spec),
                          polar_transform(build_message(payload, spec)))


def test_good_bit_set_threshold():
    spec = construct_code(256, 128, method="bhattacharyya", design_param=0.5,
                          good_threshold=1e-6)
    good = good_bit_set(spec, 1e-6)
    assert np.array_equal(good, spec.good_mask)
    assert not spec.good_mask[spec.frozen_mask].any()
    # tighter threshold can only shrink the set
    tighter = good_bit_set(spec, 1e-9)
    assert set(np.flatnonzero(tighter)) <= set(np.flatnonzero(good))


def test_spec_file_roundtrip(tmp_path):
    path = str(tmp_path / "code.spec")
    spec = construct_code(64, 32, method="bhattacharyya", design_param=0.4,
                          crc=CrcSpec(11), good_threshold=1e-5,
                          pc=ParityCheckSpec([(30, (7, 9))]))
    save_code_spec(spec, path)
    back = load_code_spec(path)
    assert back.N == spec.N and back.k == spec.k
    assert np.array_equal(back.frozen_mask, spec.frozen_mask)
    assert np.array_equal(back.good_mask, spec.good_mask)
    assert back.crc == spec.crc
    assert back.pc.constraints == spec.pc.constraints
    assert back.rate() == spec.rate()
