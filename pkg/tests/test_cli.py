import csv
import io
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from causalrd.cli import main, match_distortion
from causalrd.units import LN2

GOLDEN_TRACE = [1.6565, 1.6026, 1.6023, 1.6023]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_design_golden(capsys):
    code, out, _ = run(capsys, "design", "--ar", "0.9", "--rate-bits", "0.2601", "--taps", "8", "--iters", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["distortion_trace"] == pytest.approx(GOLDEN_TRACE, abs=0.02)


def test_srdf_units(tmp_path, capsys):
    path = tmp_path / "sched.json"
    path.write_text(json.dumps({"sigma0_sq": 1.0, "a": [0.9, 0.9], "xi_var": [0.19, 0.19], "D": [0.3, 0.3, 0.3]}))
    code, out, _ = run(capsys, "srdf", "--schedule", str(path))
    doc = json.loads(out)
    assert code == 0
    assert doc["rate_nats"] / doc["rate_bits"] == pytest.approx(LN2, rel=1e-12)
    assert doc["mutual_information_nats"] == pytest.approx(3 * doc["rate_nats"], abs=1e-10)
    assert max(doc["residuals"].values()) < 1e-9


def test_simulate_is_byte_identical(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        p = tmp_path / name
        argv = ["simulate", "--ar", "0.9", "--rate-bits", "0.2601", "--seed", "7", "--samples", "16384", "--out", str(p)]
        assert main(argv) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["variant"] == "sdusq"


def test_realize_json(capsys):
    code, out, _ = run(capsys, "realize", "--ar", "0.9", "--rate-nats", "0.18")
    doc = json.loads(out)
    assert code == 0 and len(doc["a_taps"]) == 64
    assert doc["f_taps"][0] == pytest.approx(1.0, abs=1e-6)


def test_white_sweep_b2_zero(capsys):
    code, out, _ = run(capsys, "sweep", "--ar", "", "--curves", "shannon,b2", "--points", "6", "--workers", "1")
    table = rows(out)
    assert code == 0 and list(table[0]) == ["D", "shannon", "b2"]
    assert all(abs(float(r["b2"])) < 1e-10 for r in table)


def test_ar2_sweep_ordering(capsys):
    code, out, err = run(
        capsys, "sweep", "--poles", "0.9,0.1", "--points", "8", "--d-max", "6.3",
        "--curves", "shannon,procedure2,b1,b2,b3", "--units", "nats",
    )
    assert code == 0 and err == ""
    for r in rows(out):
        R, P = float(r["shannon"]), float(r["procedure2"])
        b1, b2, b3 = float(r["b1"]), float(r["b2"]), float(r["b3"])
        assert R <= P + 1e-9
        assert P <= R + b1 + 0.01  # rate matched to D within 1%
        assert R + b1 <= R + b2 + 1e-9 < R + b3


def test_ar1_sweep_runtime_and_failures(capsys):
    t0 = time.perf_counter()
    code, out, err = run(capsys, "sweep", "--ar", "0.9", "--points", "25")
    elapsed = time.perf_counter() - t0
    table = rows(out)
    assert code == 0 and elapsed < 60
    assert list(table[0]) == ["D", "shannon", "r_perp", "awgn", "rcit_ar1", "b1", "b2", "b3", "procedure2"]
    assert [float(r["D"]) for r in table] == sorted(float(r["D"]) for r in table)
    # r_perp is undefined at D = variance: empty cell plus a diagnostic
    assert table[-1]["r_perp"] == "" and "r_perp" in err
    assert float(table[-1]["procedure2"]) == 0.0


def test_sweep_is_deterministic_across_workers(capsys):
    argv = ["sweep", "--ar", "0.5", "--points", "4", "--curves", "shannon,procedure2"]
    _, serial, _ = run(capsys, *argv, "--workers", "1")
    _, pooled, _ = run(capsys, *argv, "--workers", "2")
    assert serial == pooled


def test_bounds_table(capsys):
    code, out, err = run(capsys, "bounds", "--ar", "0.9", "--d", "0.5,1,2")
    table = rows(out)
    assert code == 0 and len(table) == 3
    assert list(table[0]) == ["D", "shannon", "b1", "b2", "b3", "epsilon"]
    assert all(float(r["b3"]) <= 0.5 + 1e-12 for r in table)  # bits


def test_match_distortion(ar1):
    out = match_distortion(ar1, 2.0, order=8, iters=4)
    assert abs(out.distortion / 2.0 - 1) <= 0.01


@pytest.mark.parametrize(
    "argv",
    [
        ["design", "--ar", "1.2", "--rate-bits", "0.3"],
        ["sweep", "--ar", "0.9", "--d", "100"],
        ["sweep", "--ar", "0.9", "--curves", "nope"],
        ["srdf", "--schedule", "/nonexistent.json"],
    ],
)
def test_errors_exit_nonzero(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code != 0 and err.startswith("causalrd")


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "causalrd.cli", "design", "--ar", "0.9", "--rate-bits", "0.0441"],
        capture_output=True, text=True, check=True,
    )
    trace = json.loads(proc.stdout)["distortion_trace"]
    assert trace == pytest.approx([4.0152, 3.9783, 3.9783, 3.9782], abs=0.05)
    assert math.isfinite(trace[-1]) and np.all(np.diff(trace) <= 0)
