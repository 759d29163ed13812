import json

import pytest

from stapulse.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from stapulse.io import read_manifest, read_pulses


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path)])


def test_synth_writes_pulse_and_manifest(tmp_path, capsys):
    out = tmp_path / "c1.pulse"
    assert run(tmp_path, "synth", "--case", "table1-case1", "-o", str(out)) == EXIT_OK
    p, a = read_pulses(out)
    assert p.endpoint_zero() and a.theta == pytest.approx(1.5707963267948966)
    doc = read_manifest(tmp_path / "synth.manifest.json")
    assert str(out) in doc["outputs"]
    assert "endpoint_zero = True" in capsys.readouterr().out


def test_synth_rejects_bad_coefficients(tmp_path):
    args = ["synth", "--coeffs", "0.5", "0", "0", "0", "0", "0", "0", "0", "--no-project"]
    assert run(tmp_path, *args) == EXIT_CONFIG


def test_simulate_defaults_to_file_target(tmp_path):
    out = tmp_path / "c1.pulse"
    run(tmp_path, "synth", "-o", str(out))
    assert run(tmp_path, "simulate", "--pulses", str(out), "--members", "3") == EXIT_OK
    rows = dict(line.split("\t") for line in (tmp_path / "simulate.tsv").read_text().splitlines()[1:])
    assert float(rows["fidelity"]) > 0.97


def test_protocol_check_pass_and_fail(tmp_path):
    assert run(tmp_path, "protocol", "--nmax", "6", "--members", "9", "--check") == EXIT_OK
    assert run(tmp_path, "protocol", "--nmax", "6", "--members", "9", "--t2", "5e-6", "--check") == EXIT_CHECK
    doc = read_manifest(tmp_path / "protocol.manifest.json")
    assert doc["settings"]["t2"] == 5e-6


def test_superposition_known_mode(tmp_path):
    args = ["protocol", "--mode", "superposition", "--qst", "known", "--nmax", "4", "--members", "5"]
    assert run(tmp_path, *args) == EXIT_OK
    assert "# averaged" in (tmp_path / "protocol_superposition.tsv").read_text()


def test_optimize_tiny_budget(tmp_path):
    args = ["optimize", "--sa-iterations", "2", "--simplex-evals", "0", "--band-samples", "1", "--members", "1"]
    assert run(tmp_path, *args) == EXIT_OK
    lines = (tmp_path / "optimize_trace.tsv").read_text().splitlines()
    assert len(lines) == 4


def test_qst_study_ideal(tmp_path):
    assert run(tmp_path, "qst-study", "--n", "20", "--pulse-kind", "ideal", "--members", "3") == EXIT_OK
    summary = json.loads((tmp_path / "qst_summary.json").read_text())
    assert summary["unaveraged_min"] == pytest.approx(1.0, abs=1e-9)


def test_spectra_synthetic_and_file_input(tmp_path):
    assert run(tmp_path, "spectra", "--traces", "10", "--save-traces", "--check") == EXIT_OK
    trace = tmp_path / "spectrum_000.tsv"
    assert run(tmp_path, "spectra", "--input", *[str(trace)] * 5) == EXIT_OK


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("bogus")
    assert run(tmp_path, "protocol", "--levels", str(bad)) == EXIT_CONFIG
    assert run(tmp_path, "simulate", "--pulses", str(tmp_path / "missing.pulse")) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "synth", "--case", "table1-case9")
    assert exc.value.code == 2


def test_numerical_failure(tmp_path):
    out = tmp_path / "nan.pulse"
    run(tmp_path, "synth", "-o", str(out), "--samples", "65")
    text = out.read_text().splitlines()
    text[-5] = "\t".join(text[-5].split("\t")[:1] + ["nan", "nan"])
    out.write_text("\n".join(text) + "\n")
    assert run(tmp_path, "simulate", "--pulses", str(out), "--members", "1") == EXIT_NUMERIC


def test_thread_count_gives_identical_output(tmp_path):
    args = ["protocol", "--mode", "superposition", "--qst", "known", "--nmax", "3", "--members", "3"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, *args, "--threads", "1") == EXIT_OK
    assert run(b, *args, "--threads", "2") == EXIT_OK
    name = "protocol_superposition.tsv"
    assert (a / name).read_text() == (b / name).read_text()


def test_saved_traces_refit_to_same_populations(tmp_path):
    assert run(tmp_path, "spectra", "--traces", "10", "--noise", "0.01", "--save-traces") == EXIT_OK
    first = (tmp_path / "spectra_fit.tsv").read_text()
    files = sorted(str(p) for p in tmp_path.glob("spectrum_*.tsv"))
    assert len(files) == 10
    again = tmp_path / "again"
    assert run(again, "spectra", "--input", *files) == EXIT_OK
    assert (again / "spectra_fit.tsv").read_text() == first
