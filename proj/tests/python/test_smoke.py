import json
import os
import pathlib
import subprocess

import jsonschema
import numpy as np
import pytest

import gnnlab

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCHEMA = json.loads((ROOT / "schemas" / "summary.schema.json").read_text())


def validate(summary):
    jsonschema.Draft202012Validator(SCHEMA).validate(summary)


def numpy_operator(edges, n):
    a = np.eye(n)
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    d = a.sum(axis=1) ** -0.5
    return d[:, None] * a * d[None, :]


def test_version():
    assert gnnlab.__version__ == "0.1.0"


def test_operator_matches_numpy():
    edges, n, _ = gnnlab.synthetic_edges("ring:7")
    assert np.allclose(gnnlab.normalized_operator(edges, n), numpy_operator(edges, n), atol=1e-14)
    edges, n, _ = gnnlab.synthetic_edges("complete:3")
    assert np.allclose(gnnlab.normalized_operator(edges, n), np.full((3, 3), 1 / 3))


def test_spectral_gap_matches_numpy():
    edges, n, _ = gnnlab.synthetic_edges("sbm:10,12:0.5:0.1", seed=3)
    lam = np.sort(np.linalg.eigvalsh(np.eye(n) - numpy_operator(edges, n)))
    assert gnnlab.spectral_gap(edges, n) == pytest.approx(lam[1], abs=1e-10)


def test_energy_one_step_decay():
    rng = np.random.default_rng(0)
    edges, n, _ = gnnlab.synthetic_edges("ring:9")
    x = rng.normal(size=(n, 3))
    e = gnnlab.energy_trajectory(edges, n, x, 1)
    gap = gnnlab.spectral_gap(edges, n)
    assert e[0] == pytest.approx(gnnlab.dirichlet_energy(edges, n, x))
    assert e[1] <= (1 - gap) ** 2 * e[0] + 1e-12


def test_mixing_triangle():
    edges, n, _ = gnnlab.synthetic_edges("complete:3")
    r = gnnlab.mixing_time(edges, n, 0.25)
    assert r["t_mix"] == 2
    assert r["lower_bound"] == pytest.approx(np.log(2), abs=1e-3)
    assert r["upper_bound"] == pytest.approx(4.970, abs=1e-3)


def test_nodewise_gradient_against_differences():
    edges, n, _ = gnnlab.synthetic_edges("path:5")
    rng = np.random.default_rng(1)
    x0 = rng.normal(size=(n, 1))
    y = rng.normal(size=(n, 1))
    weights = [rng.normal(size=n) for _ in range(3)]
    _, loss, grads = gnnlab.nodewise_forward("gcn", weights, edges, n, x0, y)
    h = 1e-6
    for layer in range(3):
        for i in range(n):
            up = [w.copy() for w in weights]
            dn = [w.copy() for w in weights]
            up[layer][i] += h
            dn[layer][i] -= h
            lu = gnnlab.nodewise_forward("gcn", up, edges, n, x0, y)[1]
            ld = gnnlab.nodewise_forward("gcn", dn, edges, n, x0, y)[1]
            assert np.ravel(grads[layer])[i] == pytest.approx((lu - ld) / (2 * h), rel=1e-5, abs=1e-9)


def test_finite_difference_check():
    err, checked, _ = gnnlab.finite_difference_check("gcnii", 4, 3, "ring:7", 1)
    assert checked > 0
    assert err < 1e-5


def test_bound_row():
    inputs = dict(gamma=1.0, num_nodes=3, delta=1 / 3, weight_norms=[1.0, 1.0], feature_norms=[1.0, 1.0])
    assert gnnlab.bound("gcn", inputs, 1)["value"] == pytest.approx(1 / 3 * (1 / 3) ** 2)


def test_contract_errors_raise_value_error():
    with pytest.raises(ValueError):
        gnnlab.synthetic_edges("ring:2")
    with pytest.raises(gnnlab.ContractError):
        gnnlab.run({"command": "analyze", "no_such_key": 1})


def test_run_summary_matches_schema():
    s = gnnlab.run({"command": "analyze", "synthetic": "complete:5"})
    validate(s)
    assert s["spectral"]["spectral_gap"] == pytest.approx(1.0)
    s = gnnlab.run({"command": "bounds", "model": "gcn_bn", "sweep": 3, "ordering_samples": 2})
    validate(s)
    assert s["sweeps"][0]["violations"] == 0


@pytest.mark.skipif("GNNLAB_BIN" not in os.environ, reason="CLI path not given")
@pytest.mark.parametrize(
    "args",
    [
        ["analyze", "--synthetic", "ring:11"],
        ["decouple", "--epochs", "3", "--l", "0,1"],
        ["gradflow", "--epochs", "2", "--depths", "2"],
        ["bounds", "--sweep", "2", "--ordering-samples", "2"],
    ],
)
def test_cli_summary_matches_schema(tmp_path, args):
    out = tmp_path / "out"
    proc = subprocess.run([os.environ["GNNLAB_BIN"], *args, "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode in (0, 3), proc.stderr
    summary = json.loads((out / "summary.json").read_text())
    validate(summary)
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["config"]["command"] == args[0]
    assert (out / "metrics.csv").exists()


@pytest.mark.skipif("GNNLAB_BIN" not in os.environ, reason="CLI path not given")
def test_cli_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synthetic": "ring:9", "epsilons": [0.1]}))
    out = tmp_path / "o"
    subprocess.run(
        [os.environ["GNNLAB_BIN"], "analyze", "--config", str(cfg), "--synthetic", "complete:4", "--out", str(out)],
        check=True,
        capture_output=True,
    )
    s = json.loads((out / "summary.json").read_text())
    assert s["graph"]["nodes"] == 4
    assert [m["epsilon"] for m in s["mixing"]] == [0.1]
