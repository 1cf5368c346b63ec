import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from fqm.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NONCONVERGED, EXIT_OK, fmt, main, write_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(command, config, out, *extra):
    return main([command, "--config", str(config), "--out", str(out), *extra])


def test_fmt_round_trips():
    for value in (0.1, 1 / 3, -2.5e-300, 1e22):
        assert float(fmt(value)) == value
    assert fmt(True) == "true"
    assert fmt(7) == "7"


def test_csv_is_rfc4180(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [[1.0, "x,y"], [0.1, 'q"t']])
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 3
    assert b'"x,y"' in raw
    assert b'"q""t"' in raw
    assert raw.startswith(b"a,b\r\n")


def test_spectrum_tables(tmp_path):
    assert run("spectrum", CONFIGS / "spectrum.json", tmp_path) == EXIT_OK
    bohr = read_rows(tmp_path / "bohr_levels.csv")
    assert [float(r["energy"]) for r in bohr[:3]] == pytest.approx([-0.5, -0.125, -1 / 18], rel=1e-14)
    osc = read_rows(tmp_path / "oscillator_levels.csv")
    assert [float(r["energy"]) for r in osc[:3]] == pytest.approx([0.5, 1.5, 2.5], rel=1e-14)
    assert all(float(r["relative_deviation"]) < 1e-8 for r in osc)


def test_manifest_echoes_units(tmp_path):
    doc = {"units": {"system": "cgs", "length": "cm"}, "physics": {"alpha": 2.0},
           "spectrum": {"bohr": {"coupling": 1.0, "n_max": 2}}}
    assert run("spectrum", write(tmp_path, doc), tmp_path / "out") == EXIT_OK
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["units"] == {"system": "cgs", "length": "cm"}
    assert manifest["command"] == "spectrum"


def test_spectrum_oracle_failure_exits_one(tmp_path):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 1.5},
           "spectrum": {"oscillator": {"q2": 1.0, "beta": 1.5, "n_max": 3, "quadrature": True,
                                       "quad_tol": 1e-4, "agreement_tol": 1e-15}}}
    assert run("spectrum", write(tmp_path, doc), tmp_path / "out") == EXIT_INVARIANT


def test_evolve_diagnostics(tmp_path):
    assert run("evolve", CONFIGS / "evolve_free_gaussian.json", tmp_path) == EXIT_OK
    rows = read_rows(tmp_path / "diagnostics.csv")
    assert len(rows) == 5
    assert all(float(r["pointwise_continuity_residual"]) < 1e-5 for r in rows)
    assert all(abs(float(r["norm"]) - 1.0) < 1e-12 for r in rows)
    assert all(float(r["global_continuity_residual"]) < 1e-10 for r in rows)
    snaps = sorted(os.listdir(tmp_path / "snapshots"))
    assert snaps[0] == "snapshot_00000000.csv"
    header = (tmp_path / "snapshots" / snaps[-1]).read_text().splitlines()[0]
    assert header == "x,re_psi,im_psi,rho,j_x"


def test_fractional_trap_energy_is_steady(tmp_path):
    assert run("evolve", CONFIGS / "evolve_fractional_trap.json", tmp_path) == EXIT_OK
    energies = [float(r["energy"]) for r in read_rows(tmp_path / "diagnostics.csv")]
    assert max(energies) - min(energies) < 1e-3 * abs(energies[0])


def test_missing_dt_exits_two(tmp_path, capsys):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 1.5},
           "grid": {"points": 32, "extent": 5.0}, "evolve": {"steps": 3}}
    assert run("evolve", write(tmp_path, doc), tmp_path / "out") == EXIT_CONFIG
    assert "dt" in capsys.readouterr().err


def test_alpha_above_two_exits_two(tmp_path):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 2.5}}
    assert run("verify", write(tmp_path, doc), tmp_path / "out") == EXIT_CONFIG


def test_unknown_key_exits_two(tmp_path):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 1.5}, "verify": {"pionts": 8}}
    assert run("verify", write(tmp_path, doc), tmp_path / "out") == EXIT_CONFIG


def test_missing_config_file_exits_two(tmp_path):
    assert run("verify", tmp_path / "nope.json", tmp_path / "out") == EXIT_CONFIG


def test_bad_seed_and_usage_exit_two(tmp_path):
    cfg = CONFIGS / "verify.json"
    assert run("verify", cfg, tmp_path, "--seed", "-3") == EXIT_CONFIG
    assert run("verify", cfg, tmp_path, "--seed", str(2**64)) == EXIT_CONFIG
    assert main(["transmogrify", "--config", str(cfg)]) == EXIT_CONFIG


def test_malformed_kernel_lattice_exits_two(tmp_path):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 1.5},
           "kernel": {"separations": [], "durations": [1.0]}}
    assert run("kernel", write(tmp_path, doc), tmp_path / "out") == EXIT_CONFIG
    doc["kernel"] = {"separations": [0.0], "durations": [-1.0]}
    assert run("kernel", write(tmp_path, doc), tmp_path / "out") == EXIT_CONFIG


def test_kernel_alpha_two_matches_gaussian(tmp_path):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 2.0, "d_alpha": 0.5},
           "kernel": {"separations": [0.0, 1.0, 3.0], "durations": [0.5, 2.0]}}
    assert run("kernel", write(tmp_path, doc), tmp_path / "out") == EXIT_OK
    rows = read_rows(tmp_path / "out" / "kernel_table.csv")
    assert len(rows) == 6
    assert all(r["status"] == "ok" for r in rows)
    assert all(float(r["error_estimate"]) < 1e-10 for r in rows)
    assert all(float(r["relative_deviation"]) < 1e-6 for r in rows)


def test_kernel_quadrature_failure_exits_three(tmp_path):
    doc = {"units": {"system": "natural"}, "physics": {"alpha": 1.05, "d_alpha": 1.0},
           "kernel": {"separations": [50.0], "durations": [0.1]}}
    assert run("kernel", write(tmp_path, doc), tmp_path / "out") == EXIT_NONCONVERGED
    rows = read_rows(tmp_path / "out" / "kernel_table.csv")
    assert rows[0]["status"] != "ok"


def test_groundstate_harmonic(tmp_path):
    assert run("groundstate", CONFIGS / "groundstate_harmonic.json", tmp_path) == EXIT_OK
    (row,) = read_rows(tmp_path / "summary.csv")
    assert abs(float(row["energy"]) - 0.5) < 1e-6
    assert row["converged"] == "true"


def test_groundstate_non_convergence_exits_three(tmp_path):
    doc = json.loads((CONFIGS / "groundstate_harmonic.json").read_text())
    doc["groundstate"]["max_iters"] = 1
    assert run("groundstate", write(tmp_path, doc), tmp_path / "out") == EXIT_NONCONVERGED
    (row,) = read_rows(tmp_path / "out" / "summary.csv")
    assert row["converged"] == "false"
    assert (tmp_path / "out" / "state.csv").exists()


SMALL_KERNEL = {
    "units": {"system": "natural"},
    "physics": {"alpha": 1.5, "d_alpha": 1.0},
    "kernel": {
        "separations": [0.0, 1.5],
        "durations": [1.0],
        "composition": {"slices": [3], "separations": [0.5], "damping": 0.3, "points": 256, "extent": 24.0,
                        "agreement_tol": 1e-2},
        "residual": {"separations": [1.0], "dt_probes": [0.01]},
    },
}


def _verify_doc(**overrides):
    opts = {"points": 64, "extent": 10.0, "random_states": 10, "parity_steps": 50}
    opts.update(overrides)
    return {"units": {"system": "natural"}, "physics": {"alpha": 1.5}, "verify": opts}


def test_verify_rows_and_pass_column(tmp_path):
    assert run("verify", write(tmp_path, _verify_doc()), tmp_path / "out") == EXIT_OK
    rows = read_rows(tmp_path / "out" / "verify.csv")
    names = [r["invariant"] for r in rows]
    assert names[0] == "hermiticity"
    assert set(names) == {"hermiticity", "eigenfunction", "parity", "current_equivalence", "unit_flux"}
    assert all(r["pass"] == "true" for r in rows)


def test_verify_verdicts_are_seed_robust(tmp_path):
    cfg = write(tmp_path, _verify_doc())
    verdicts = []
    for seed in (0, 1, 2**63 + 5):
        out = tmp_path / f"s{seed}"
        assert run("verify", cfg, out, "--seed", str(seed)) == EXIT_OK
        rows = read_rows(out / "verify.csv")
        verdicts.append([r["pass"] for r in rows])
        # every defect sits at least ten times below its budget
        assert all(float(r["defect"]) * 10 <= float(r["budget"]) for r in rows)
    assert verdicts[0] == verdicts[1] == verdicts[2]


@pytest.mark.parametrize("command,config", [
    ("verify", None),
    ("evolve", "evolve_fractional_trap.json"),
    ("kernel", None),
])
def test_outputs_are_bit_identical_across_runs(tmp_path, command, config):
    if config is not None:
        cfg = CONFIGS / config
    elif command == "kernel":
        cfg = write(tmp_path, SMALL_KERNEL)
    else:
        cfg = write(tmp_path, _verify_doc())
    for name in ("a", "b"):
        assert run(command, cfg, tmp_path / name, "--seed", "42") == EXIT_OK
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_console_entry_point(tmp_path):
    env = dict(os.environ, FQM_DISABLE_NUMBA="1")
    proc = subprocess.run(
        [sys.executable, "-m", "fqm", "spectrum", "--config", str(CONFIGS / "spectrum.json"), "--out", str(tmp_path)],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert "backend numpy" in proc.stderr
