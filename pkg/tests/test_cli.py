import json
import math
import subprocess
import sys

import numpy as np
import pytest

from stellar.cli import main
from stellar.fock import basis_state, fidelity
from stellar.gaussian import CanonicalState, CoreState, apply_gaussian, fock_amplitudes, GaussianUnitary, photon_add
from stellar.io import dump_state, load_state, save_state

RANK1 = math.sqrt(1 - 3 * math.sqrt(3) / (4 * math.e))


@pytest.fixture
def write(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(path)

    return _write


def fock_doc(amps):
    return {"format_tag": "stellar-state/1", "fock": [[complex(z).real, complex(z).imag] for z in amps]}


def core_doc(core, r=0.0, theta=0.0, beta=(0.0, 0.0)):
    return {"format_tag": "stellar-state/1", "core": [[complex(z).real, complex(z).imag] for z in core],
            "gaussian": {"r": r, "theta": theta, "beta": list(beta)}}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# rank


def test_rank_examples(capsys, write):
    assert run(capsys, "rank", write("n3.json", fock_doc([0, 0, 0, 1])))[:2] == (0, "3\n")
    assert run(capsys, "rank", write("vac.json", fock_doc([1])))[:2] == (0, "0\n")
    assert run(capsys, "rank", write("c.json", core_doc([0, 1], r=0.5)))[:2] == (0, "1\n")


def test_rank_json_and_truncation_warning(capsys, write):
    coherent = [0.8**n / math.sqrt(math.factorial(n)) for n in range(30)]
    code, out, err = run(capsys, "rank", "--json", write("coh.json", fock_doc(coherent)))
    data = json.loads(out)
    assert code == 0 and 0 < data["rank"] < 30 and data["likely_truncated"]
    assert "truncation" in err
    code, out, err = run(capsys, "rank", write("n2.json", fock_doc([0, 0, 1])))
    assert out == "2\n" and err == ""


# rank parse errors


@pytest.mark.parametrize("doc", [
    "not json",
    json.dumps([1, 2]),
    json.dumps({"fock": [[1, 0]]}),
    json.dumps({"format_tag": "stellar-state/2", "fock": [[1, 0]]}),
    json.dumps({"format_tag": "stellar-state/1"}),
    json.dumps({**fock_doc([1]), **core_doc([1])}),
    json.dumps(fock_doc([0, 0])),
    json.dumps({"format_tag": "stellar-state/1", "fock": [[1]]}),
    json.dumps({"format_tag": "stellar-state/1", "fock": [["a", 0]]}),
    json.dumps({"format_tag": "stellar-state/1", "fock": []}),
    json.dumps(core_doc([1], r=-0.1)),
    json.dumps(core_doc([0, 0])),
])
def test_invalid_state_files_exit_1(capsys, write, doc):
    code, out, err = run(capsys, "rank", write("bad.json", doc))
    assert code == 1 and out == "" and "invalid input" in err


def test_missing_file_and_bad_flags(capsys, tmp_path):
    assert run(capsys, "rank", tmp_path / "missing.json")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys)[0] == 1


# analysis commands


def test_roots_command(capsys, write):
    code, out, _ = run(capsys, "roots", "--json", write("n2.json", fock_doc([0, 0, 1])))
    data = json.loads(out)
    assert code == 0 and data["rank"] == 2 and data["roots"] == [[[0.0, 0.0], 2]]
    code, out, _ = run(capsys, "roots", write("cat.json", fock_doc([1, 0, 1])))
    assert code == 0 and len(out.splitlines()) == 2
    code, out, _ = run(capsys, "roots", write("vac.json", fock_doc([1])))
    assert code == 0 and "Gaussian" in out


def test_decompose_command(capsys, write):
    path = write("s.json", core_doc([0, 1], r=0.4, theta=0.3, beta=(0.5, -0.2)))
    code, out, _ = run(capsys, "decompose", "--json", path)
    data = json.loads(out)
    assert code == 0 and data["rank"] == 1
    assert data["gaussian"]["r"] == pytest.approx(0.4) and data["gaussian"]["theta"] == pytest.approx(0.3)
    assert set(data) == {"rank", "roots", "gaussian", "normalization"}
    code, out, _ = run(capsys, "decompose", path)
    assert out.startswith("rank 1")


def test_core_command(capsys, write, tmp_path):
    path = write("s.json", core_doc([0.3, 1], r=0.6))
    out_path = tmp_path / "core.json"
    code, out, _ = run(capsys, "core", "--json", path, "-o", out_path)
    data = json.loads(out)
    assert code == 0 and data["rank"] == 1 and data["gaussian"]["r"] == pytest.approx(0.6)
    core = load_state(out_path)
    assert fidelity(fock_amplitudes(core), CoreState([0.3, 1]).as_fock()) > 1 - 1e-12
    assert run(capsys, "core", path)[1].startswith("rank 1")


def test_convertible_command(capsys, write, tmp_path):
    subtracted = tmp_path / "sub.json"
    assert run(capsys, "apply", write("sq.json", core_doc([1], r=0.5)), "--subtract-photon", 1, "-o", subtracted)[0] == 0
    one = write("one.json", fock_doc([0, 1]))
    code, out, _ = run(capsys, "convertible", "--json", subtracted, one)
    data = json.loads(out)
    assert code == 0 and data["convertible"]
    assert data["witness"]["r"] == pytest.approx(0.5, abs=1e-9)
    code, out, _ = run(capsys, "convertible", subtracted, one)
    assert code == 0 and out.startswith("convertible") and "r=0.5" in out
    code, out, _ = run(capsys, "convertible", one, write("two.json", fock_doc([0, 0, 1])))
    assert code == 3 and out == "not convertible\n"
    code, out, _ = run(capsys, "convertible", "--json", one, write("cat.json", fock_doc([1, 0, 1])))
    assert code == 3 and json.loads(out) == {"convertible": False}


def test_robustness_command(capsys, write):
    path = write("one.json", fock_doc([0, 1]))
    code, out, _ = run(capsys, "robustness", "--json", path)
    data = json.loads(out)
    assert code == 0 and set(data) == {"robustness"}
    rob = data["robustness"]
    assert {"value", "fidelity", "witness"} <= set(rob)
    assert rob["value"] == pytest.approx(0.7226, abs=1e-4)
    assert rob["value"] ** 2 + rob["fidelity"] == pytest.approx(1, abs=1e-15)
    code, out, _ = run(capsys, "robustness", path, "--restarts", 4)
    assert code == 0 and out.startswith("robustness 0.72257")
    code, _, err = run(capsys, "robustness", write("vac.json", fock_doc([1])))
    assert code == 1 and "Gaussian" in err


def test_ngf_command(capsys, write):
    path = write("one.json", fock_doc([0, 1]))
    code, out, _ = run(capsys, "ngf", "--json", path, "--epsilon", 0.5, "--restarts", 4)
    data = json.loads(out)["ngf"]
    assert code == 0 and data["rank"] == 1 and data["distances"][0] == pytest.approx(RANK1, abs=1e-8)
    code, out, _ = run(capsys, "ngf", path, "--epsilon", 0.9, "--restarts", 4)
    assert code == 0 and out.startswith("ngf 0")
    assert run(capsys, "ngf", path, "--epsilon", 2)[0] == 1
    assert run(capsys, "ngf", path)[0] == 1


def test_fidelity_command(capsys, write):
    a = write("a.json", fock_doc([1, 1]))
    b = write("b.json", fock_doc([1]))
    code, out, _ = run(capsys, "fidelity", "--json", a, b)
    data = json.loads(out)
    assert code == 0 and data["fidelity"] == pytest.approx(0.5) and data["trace_distance"] == pytest.approx(math.sqrt(0.5))
    assert float(run(capsys, "fidelity", a, a)[1]) == pytest.approx(1.0)


def test_numerical_failure_exits_2(capsys, write):
    # far outside the 512-level cutoff cap
    huge = write("huge.json", core_doc([1], r=4.0, beta=(6.0, 0.0)))
    code, out, err = run(capsys, "fidelity", huge, huge)
    assert code == 2 and out == "" and "numerical failure" in err


# apply


def test_apply_add_photon_to_vacuum(capsys, write, tmp_path):
    out_path = tmp_path / "one.json"
    code, out, _ = run(capsys, "apply", write("vac.json", fock_doc([1])), "--add-photon", 1, "-o", out_path)
    assert code == 0 and out == ""
    assert fidelity(fock_amplitudes(load_state(out_path)), basis_state(1)) > 1 - 1e-15


def test_apply_order_and_roundtrip(capsys, write, tmp_path):
    src = write("c.json", core_doc([1, 0.5j], r=0.2, beta=(0.1, 0.3)))
    out_path = tmp_path / "out.json"
    argv = ["apply", src, "--displace", "0.4,-0.2", "--squeeze", "0.3,1.0", "--rotate", "0.7",
            "--add-photon", "2", "--subtract-photon", "1", "-o", out_path, "--json"]
    code, out, _ = run(capsys, *argv)
    assert code == 0 and json.loads(out)["format_tag"] == "stellar-state/1"
    expected = load_state(src)
    for g in (GaussianUnitary.displacement(0.4 - 0.2j), GaussianUnitary.squeeze(0.3 * np.exp(1j)),
              GaussianUnitary.rotation(0.7)):
        expected = apply_gaussian(g, expected)
    expected = photon_add(photon_add(expected))
    from stellar.gaussian import photon_subtract

    expected = photon_subtract(expected)
    assert fidelity(fock_amplitudes(load_state(out_path)), fock_amplitudes(expected)) > 1 - 1e-12
    # order matters: squeezing then displacing gives a different state
    swapped = tmp_path / "swapped.json"
    run(capsys, "apply", src, "--squeeze", "0.3,1.0", "--displace", "0.4,-0.2", "-o", swapped)
    straight = tmp_path / "straight.json"
    run(capsys, "apply", src, "--displace", "0.4,-0.2", "--squeeze", "0.3,1.0", "-o", straight)
    assert fidelity(fock_amplitudes(load_state(swapped)), fock_amplitudes(load_state(straight))) < 0.999


@pytest.mark.parametrize("flag,value", [("--displace", "1"), ("--squeeze", "-1,0"), ("--add-photon", "-1"),
                                        ("--rotate", "x")])
def test_apply_bad_flags(capsys, write, flag, value):
    assert run(capsys, "apply", write("vac.json", fock_doc([1])), flag, value)[0] == 1


# husimi


def read_csv(text):
    lines = text.strip().splitlines()
    assert lines[0] == "x,y,q"
    return np.array([[float(v) for v in line.split(",")] for line in lines[1:]])


def test_husimi_vacuum_grid(capsys, write):
    path = write("vac.json", fock_doc([1]))
    code, out, _ = run(capsys, "husimi", path, "--xmin", -2, "--xmax", 2, "--ymin", -2, "--ymax", 2,
                       "--nx", 5, "--ny", 5)
    grid = read_csv(out)
    assert code == 0 and grid.shape == (25, 3)
    # row-major over y then x
    assert np.all(grid[:5, 1] == -2) and np.allclose(grid[:5, 0], [-2, -1, 0, 1, 2])
    assert grid[12, 2] == pytest.approx(1 / math.pi, rel=1e-15)
    assert np.all(grid[:, 2] >= 0)


def test_husimi_one_photon_zero_and_integral(capsys, write, tmp_path):
    path = write("one.json", fock_doc([0, 1]))
    csv = tmp_path / "q.csv"
    code, out, _ = run(capsys, "husimi", path, "--xmin", -5, "--xmax", 5, "--ymin", -5, "--ymax", 5,
                       "--nx", 201, "--ny", 201, "-o", csv)
    assert code == 0 and out == ""
    grid = read_csv(csv.read_text())
    centre = grid[(grid[:, 0] == 0) & (grid[:, 1] == 0)]
    assert centre.shape == (1, 3) and centre[0, 2] < 1e-15
    assert grid[:, 2].sum() * 0.05**2 == pytest.approx(1, rel=0.02)


@pytest.mark.parametrize("extra", [["--nx", "1"], ["--xmin", "1", "--xmax", "0"], ["--ymax", "inf"]])
def test_husimi_bad_window(capsys, write, extra):
    code, out, err = run(capsys, "husimi", write("vac.json", fock_doc([1])), *extra)
    assert code == 1 and out == "" and err


# seeds and process-level behaviour


def test_stellar_seed_env(write, tmp_path):
    path = write("t.json", fock_doc([0.2, 0.5, 1]))
    env_runs = []
    for seed in ("0", "0", "5"):
        proc = subprocess.run([sys.executable, "-m", "stellar", "robustness", "--json", "--restarts", "4", path],
                              capture_output=True, text=True, env={"STELLAR_SEED": seed, "PATH": ""})
        assert proc.returncode == 0 and proc.stderr == ""
        env_runs.append(json.loads(proc.stdout)["robustness"])
    assert env_runs[0] == env_runs[1]
    assert env_runs[0]["witness"] != env_runs[2]["witness"]


def test_module_entry_point_exit_codes(write):
    one = write("one.json", fock_doc([0, 1]))
    two = write("two.json", fock_doc([0, 0, 1]))
    proc = subprocess.run([sys.executable, "-m", "stellar", "convertible", one, two], capture_output=True, text=True)
    assert proc.returncode == 3
    proc = subprocess.run([sys.executable, "-m", "stellar", "rank", one], capture_output=True, text=True)
    assert (proc.returncode, proc.stdout, proc.stderr) == (0, "1\n", "")


# state files


def test_state_file_roundtrip(tmp_path):
    st = CanonicalState.from_params(CoreState([1, 0.3j, -0.2]), 0.4 * np.exp(0.5j), 0.2 - 0.7j)
    st = apply_gaussian(GaussianUnitary.rotation(0.9), st)
    path = tmp_path / "s.json"
    save_state(st, path)
    assert fidelity(fock_amplitudes(load_state(path)), fock_amplitudes(st)) > 1 - 1e-12
    doc = json.loads(path.read_text())
    assert set(doc) == {"format_tag", "core", "gaussian"} and set(doc["gaussian"]) == {"r", "theta", "beta"}
    save_state(basis_state(2), path)
    assert json.loads(path.read_text()) == fock_doc([0, 0, 1])


def test_dump_clears_negative_zeros():
    doc = dump_state(CoreState([1, -0.0]).as_fock())
    assert "-0.0" not in json.dumps(doc)


def test_gaussian_defaults_to_identity(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"format_tag": "stellar-state/1", "core": [[0, 0], [1, 0]]}))
    assert fidelity(fock_amplitudes(load_state(path)), basis_state(1)) == pytest.approx(1)
