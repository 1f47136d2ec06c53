import json
import math
import os
import subprocess

import numpy as np
import pytest

import flagdyn as fd

LOG2 = math.log(2.0)


def diag(*entries):
    return np.diag(np.asarray(entries, dtype=float))


def bernoulli_diag():
    base = fd.BaseSystem.full_shift([0.5, 0.5], seed=9)
    gen = fd.Generator.table([diag(4.0, 0.25), diag(2.0, 0.5)])
    return fd.make_cocycle(base, gen)


def test_polar_and_iwasawa():
    h = fd.polar_aplus(diag(2.0, 0.5))
    assert h[0] == pytest.approx(LOG2, abs=1e-12)
    assert h[1] == pytest.approx(-LOG2, abs=1e-12)
    g = np.array([[1.0, 2.0], [3.0, 4.0]])
    k, a, n = fd.iwasawa(g)
    assert np.allclose(k @ np.diag(a) @ n, g, atol=1e-12)
    assert np.allclose(k.T @ k, np.eye(2), atol=1e-12)


def test_periodic_spectrum_exact():
    c = bernoulli_diag()
    est = fd.periodic_spectrum(c, [0])
    assert est["method"] == "exact-periodic"
    assert est["H"][0] == pytest.approx(2.0 * LOG2, abs=1e-12)
    assert est["H"][1] == pytest.approx(-2.0 * LOG2, abs=1e-12)
    assert est["theta"]["blocks"] == [1, 1]


def test_estimate_polar_exponent():
    c = bernoulli_diag()
    est = fd.estimate_polar_exponent(c, fd.MeasureDescriptor.product(), n=2048, k=8)
    # mean of the two letters' exponents: (2 log 2 + log 2) / 2
    assert est["H"][0] == pytest.approx(1.5 * LOG2, abs=0.05)
    assert est["converged"]


def test_condition_checks_verdict():
    c = bernoulli_diag()
    rep = fd.run_condition_checks(c, fd.MeasureDescriptor.product(), n=1024, k=8,
                                  max_period=2, threads=2)
    assert rep["verdict"]["equal"] == "yes"
    assert rep["bounded_section"]["pass"]
    assert rep["verdict"]["theta_mo"]["blocks"] == [1, 1]


def test_capacity_error_is_typed():
    base = fd.BaseSystem.full_shift([0.5, 0.5], seed=1)
    with pytest.raises(fd.CapacityError):
        fd.enumerate_periodic_orbits(base, 40)


def test_cli_binary_roundtrip(tmp_path):
    cli = os.environ.get("FLAGDYN_CLI")
    if not cli:
        pytest.skip("FLAGDYN_CLI not set")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "name": "smoke",
        "seed": 1,
        "base": {"kind": "periodic_orbit", "period": 1},
        "generator": {"kind": "table", "matrices": [[[2.0, 0.0], [0.0, 0.5]]]},
        "spectrum": {"n": 512, "k": 4},
    }))
    out = tmp_path / "out"
    proc = subprocess.run([cli, "spectrum", "--config", str(cfg), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["exact"]["H"][0] == pytest.approx(LOG2, abs=1e-12)


def test_run_scenario_api(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "name": "smoke-api",
        "seed": 2,
        "base": {"kind": "rotation", "angle": 0.3819660112501051},
        "generator": {"kind": "constant", "matrix": [[2.0, 0.0], [0.0, 0.5]]},
        "unique_ergodic": {"n": 1024, "k": 4, "flag_resolution": 24},
    }))
    rc = fd.run_scenario("unique-ergodic", str(cfg), str(tmp_path / "out"))
    assert rc == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["results"]["singleton"] is True
