#!/usr/bin/env python3
"""
Test script for the command-line runner.
Run this to verify artifacts, manifests, exit codes and thread-count determinism.
"""

import json
import sys
import tempfile
from pathlib import Path

# Add hj-sdk to path
repo_root = Path(__file__).resolve().parent.parent
sdk_dir = repo_root / "hj-sdk"
if str(sdk_dir) not in sys.path:
    sys.path.insert(0, str(sdk_dir))

from contact_hj.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main, run

SMALL_EVOLVE = {
    "model": {"kind": "quadratic_family", "u_coupling": -1.0, "potential": "0.2*cos(2*pi*x)"},
    "grid": {"n": 40},
    "time": {"dt": 0.01, "T": 0.2},
    "initial_data": {"phi": "0.5*cos(2*pi*x)"},
    "output": {"slice_stride": 5},
}


def _write(directory: Path, name: str, data: dict) -> Path:
    path = directory / name
    path.write_text(json.dumps(data))
    return path


def _manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text())


def test_evolve_artifacts():
    """Test an evolve run end to end."""
    print("=" * 60)
    print("Testing: Evolve Run")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = _write(tmp, "evolve.json", SMALL_EVOLVE)
        code = run("evolve", config, out=tmp / "out")
        manifest = _manifest(tmp / "out")
        print(f"exit {code}, artifacts {manifest['artifacts']}")
        assert code == EXIT_OK and manifest["exit_code"] == EXIT_OK
        assert manifest["status"] == "ok"
        assert {"evolve.csv", "evolve.manifest.json", "evolve.json"} <= set(manifest["artifacts"])
        assert set(manifest["versions"]) >= {"contact_hj", "numpy", "scipy"}

        lines = (tmp / "out" / "evolve.csv").read_text().splitlines()
        assert lines[0] == "t,x,value"
        assert len(lines) == 1 + 5 * 40, "Slices 0, 5, 10, 15 and 20"
        sidecar = json.loads((tmp / "out" / "evolve.manifest.json").read_text())
        assert sidecar["scheme"]["dt"] == 0.01 and sidecar["grid"]["n"] == 40
    print()


def test_thread_count_determinism():
    """Test byte-identical artifacts for one and four threads."""
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = _write(tmp, "evolve.json", SMALL_EVOLVE)
        assert run("evolve", config, threads=1, out=tmp / "one") == EXIT_OK
        assert run("evolve", config, threads=4, out=tmp / "four") == EXIT_OK
        for name in ("evolve.csv", "evolve.json", "evolve.manifest.json"):
            assert (tmp / "one" / name).read_bytes() == (tmp / "four" / name).read_bytes(), name
        one, four = _manifest(tmp / "one"), _manifest(tmp / "four")
        for manifest in (one, four):
            del manifest["runtime"]
        assert one == four, "Manifests may differ only in the runtime block"


def test_invalid_config_exit_code():
    """Test that unknown keys exit with status 2 and list the keys."""
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = _write(tmp, "bad.json", {**SMALL_EVOLVE, "grid": {"n": 40, "spacing": 0.1}})
        code = run("evolve", config, out=tmp / "out")
        manifest = _manifest(tmp / "out")
        assert code == EXIT_INVALID
        assert manifest["status"] == "invalid_config"
        assert "grid.spacing" in manifest["offending_keys"]

        unstable = _write(tmp, "unstable.json", {**SMALL_EVOLVE, "time": {"dt": 0.8, "T": 1.6}})
        assert run("evolve", unstable, out=tmp / "out2") == EXIT_INVALID
        assert run("no-such-command", config, out=tmp / "out3") == EXIT_INVALID


def test_numerical_failure_exit_code():
    """Test that Picard non-convergence exits with status 3."""
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = _write(tmp, "picard.json", {
            "model": {"u_coupling": -1.0},
            "grid": {"n": 32},
            "time": {"dt": 0.01, "T": 0.5},
            "scheme": {"window_radius": 4, "picard": {"tol": 1e-12, "max_iter": 2}},
        })
        assert run("picard", config, out=tmp / "out") == EXIT_NUMERICAL
        manifest = _manifest(tmp / "out")
        assert manifest["status"] == "numerical_failure"
        assert any(e["event_type"] == "picard_nonconvergence" for e in manifest["events"])


def test_critical_value_no_bracket():
    """Test that a divergent model without bracket still exits 0."""
    print("=" * 60)
    print("Testing: Critical Value Run")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = _write(tmp, "critical.json", {
            "model": {"u_coupling": -1.0},
            "grid": {"n": 20},
            "time": {"dt": 0.01},
            "initial_data": {"phi": "3"},
            "critical": {"c_lo": -2.0, "c_hi": 2.0, "c_values": [-2.0, 0.0, 2.0], "horizon": 20.0},
            "output": {"formats": ["json"]},
        })
        code = run("critical-value", config, out=tmp / "out")
        report = json.loads((tmp / "out" / "critical.json").read_text())
        print(f"search outcome: {report['search']['outcome']}")
        assert code == EXIT_OK
        assert report["search"]["outcome"].startswith("no-bracket")
        assert report["search"]["c_star"] is None
        assert all(r["classification"] == "diverges_up" for r in report["scan"]["results"])
        assert report["mane_value_frozen"] is not None
        assert "no_bracket" in [e["event_type"] for e in _manifest(tmp / "out")["events"]]
    print()


def test_stationary_and_oracle_runs():
    """Test the stationary and oracle-check subcommands."""
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = _write(tmp, "stationary.json", {
            "model": {"u_coupling": 1.0, "shift": 3.0},
            "grid": {"n": 20},
            "time": {"dt": 0.01},
        })
        assert run("stationary", config, out=tmp / "stationary") == EXIT_OK
        report = json.loads((tmp / "stationary" / "stationary.json").read_text())
        assert report["converged"] and report["residuals"]["fixed_point"] <= 1e-8
        assert max(abs(u - 3.0) for u in report["u_star"]) <= 1e-3

        oracle = _write(tmp, "oracle.json", {"grid": {"n": 100}, "output": {"formats": ["json"]}})
        assert main(["oracle-check", "--config", str(oracle), "--out", str(tmp / "oracle")]) == EXIT_OK
        rows = json.loads((tmp / "oracle" / "oracle.json").read_text())
        assert all(row["passed"] for row in rows)


if __name__ == "__main__":
    print("\n🧪 Testing Command Line\n")

    test_evolve_artifacts()
    test_thread_count_determinism()
    test_invalid_config_exit_code()
    test_numerical_failure_exit_code()
    test_critical_value_no_bracket()
    test_stationary_and_oracle_runs()

    print("=" * 60)
    print("✅ Tests complete!")
    print("=" * 60)
