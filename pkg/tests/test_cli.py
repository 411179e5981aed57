import subprocess
import sys

import numpy as np
import pytest

from polarscl.cli import main
from polarscl.codes import load_code_spec
from polarscl.config import load_config


def test_construct_writes_spec_file(tmp_path, capsys):
    spec_path = tmp_path / "code.spec"
    rc = main(["construct", "--N", "1024", "--k", "512",
               "--method", "bhattacharyya", "--eps", "0.5",
               "-o", str(spec_path), "-q"])
    assert rc == 0
    spec = load_code_spec(str(spec_path))
    assert (spec.N, spec.k) == (1024, 512)
    err = capsys.readouterr().err
    assert "N=1024 k=512" in err


def test_construct_stdout_and_config_echo(capsys):
    rc = main(["construct", "--N", "64", "--k", "32",
               "--method", "bhattacharyya", "--crc-width", "0"])
    assert rc == 0
    cap = capsys.readouterr()
    assert cap.out.splitlines()[0].startswith("# polar code spec")
    # effective config echoed to stderr for provenance
    assert "# config_hash = " in cap.err
    assert "# [code]" in cap.err


def test_encode_decode_roundtrip(tmp_path):
    spec_path = tmp_path / "code.spec"
    assert main(["construct", "--N", "64", "--k", "32",
                 "--method", "bhattacharyya", "--crc-width", "8",
                 "-o", str(spec_path), "-q"]) == 0
    spec = load_code_spec(str(spec_path))

    rng = np.random.default_rng(5)
    payloads = rng.integers(0, 2, (3, spec.payload_len))
    pay_path = tmp_path / "payloads.txt"
    pay_path.write_text("\n".join("".join(map(str, row)) for row in payloads))

    cw_path = tmp_path / "codewords.txt"
    assert main(["encode", "--spec", str(spec_path), "-i", str(pay_path),
                 "-o", str(cw_path), "-q"]) == 0
    cw = [line.strip() for line in cw_path.read_text().splitlines()]
    assert all(len(line) == 64 and set(line) <= {"0", "1"} for line in cw)

    # noiseless BPSK LLRs: bit 0 -> +5, bit 1 -> -5
    llr_path = tmp_path / "llrs.txt"
    llr_path.write_text("\n".join(
        " ".join("-5.0" if c == "1" else "5.0" for c in line) for line in cw))
    out_path = tmp_path / "decisions.txt"
    assert main(["decode", "--spec", str(spec_path), "--profile", "flexible",
                 "-L", "8", "-i", str(llr_path), "-o", str(out_path),
                 "-q"]) == 0

    lines = out_path.read_text().splitlines()
    assert len(lines) == 3
    for row, line in zip(payloads, lines):
        fields = dict(tok.split("=", 1) for tok in line.split())
        assert fields["info"] == "".join(map(str, row))
        assert fields["crc"] == "1"
        assert int(fields["path"]) >= 0
        float(fields["pm"])


def test_decode_rejects_wrong_llr_count(tmp_path, capsys):
    spec_path = tmp_path / "code.spec"
    assert main(["construct", "--N", "64", "--k", "32",
                 "--method", "bhattacharyya", "-o", str(spec_path),
                 "-q"]) == 0
    llr_path = tmp_path / "short.txt"
    llr_path.write_text("1.0 -2.0 3.0\n")
    rc = main(["decode", "--spec", str(spec_path), "-i", str(llr_path), "-q"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "error:" in err and "expected 64 LLRs" in err


def test_invalid_override_exits_2(capsys):
    rc = main(["fer", "--set", "campaign.nope=1", "-q"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "config error:" in err
    assert "nope" in err and "[campaign]" in err


_FER_ARGS = [
    "--set", "code.n=64", "--set", "code.k=32", "--set", "code.crc_width=8",
    "--set", "campaign.snr_db=2.0", "--set", "campaign.max_frames=300",
    "--set", "campaign.max_errors=30", "--set", "campaign.batch=64",
    "--set", "decoder.l=2",
]


def test_fer_csv_is_reproducible(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["fer", *_FER_ARGS, "-o", str(out1), "-q"]) == 0
    assert main(["fer", *_FER_ARGS, "-o", str(out2), "-q"]) == 0
    text = out1.read_text()
    # same config + seed -> byte-identical results, path excluded from hash
    assert text == out2.read_text()

    lines = text.splitlines()
    cfg = load_config(overrides=[a for a in _FER_ARGS if a != "--set"])
    assert lines[0] == "# config = %s" % cfg.config_hash()
    assert lines[1].startswith("# code N=64 k=32")
    assert lines[2] == "es_n0_db,eb_n0_db,frames,frame_errors,fer,ber,fer_ci95"
    rows = lines[3:]
    assert len(rows) == 1
    vals = rows[0].split(",")
    assert float(vals[0]) == 2.0
    frames, errors = int(vals[2]), int(vals[3])
    assert 0 < frames <= 300
    assert float(vals[4]) == pytest.approx(errors / frames)


def test_latency_report_fields(tmp_path, capsys):
    rc = main(["latency", "--set", "code.n=256", "--set", "code.k=128",
               "--profile", "flexible", "-L", "8", "--double-package", "-q"])
    assert rc == 0
    out = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
    assert out["N"] == "256" and out["L"] == "8"
    total = int(out["total_cycles"])
    parts = [int(out[k + "_cycles"])
             for k in ("serial", "semi_parallel", "parallel", "sort")]
    assert sum(parts) == total
    assert float(out["throughput_bps"]) == pytest.approx(
        128 * 1e9 / total * 5)
    ratio = float(out["double_ratio_vs_single"])
    assert 1.0 <= ratio <= 2.0
    assert float(out["double_throughput_gain"]) == pytest.approx(2.0 / ratio)


def test_selftest_passes(capsys):
    assert main(["selftest", "-q"]) == 0
    out = capsys.readouterr().out
    assert out.count(" ok") == 8
    assert "FAIL" not in out


def test_module_entry_point(tmp_path):
    spec_path = tmp_path / "code.spec"
    proc = subprocess.run(
        [sys.executable, "-m", "polarscl", "construct", "--N", "64",
         "--k", "32", "--method", "bhattacharyya", "-o", str(spec_path),
         "-q"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert spec_path.exists()
