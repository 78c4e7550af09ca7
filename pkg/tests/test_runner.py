import json

import numpy as np
import pytest

from pitaevskii.cli import main
from pitaevskii.config import parse_config
from pitaevskii.persistence import read_checkpoint, read_diagnostics
from pitaevskii.runner import OUTPUT_ENV, Outcome, checkpoint_name, oracle_compare, run_simulation

BASE = """
[grid]
resolution = 16, 16
[model]
coupling = {coupling}
[initial]
kind = random_smooth
psi_amplitudes = 0.5
velocity_amplitude = 0.3
density = sine_perturbed
seed = 5
[time]
dt = 0.01
t_end = {t_end}
[output]
checkpoint_interval = {ckpt}
history = {history}
"""

HALTING = """
[grid]
resolution = 16, 16
[model]
coupling = 20.0
interaction = 0.1
density_min = 1.0
density_max = 1.0
density_floor = 0.9
[initial]
kind = composite
psi_amplitudes = 1.5, 0.675, 0.675
psi_wavevectors = 0, 0; 1, 0; -1, 0
[time]
dt = 0.001
t_end = 1.0
"""


def config(coupling=1.0, t_end=0.2, ckpt=0, history="false"):
    return parse_config(BASE.format(coupling=coupling, t_end=t_end, ckpt=ckpt, history=history))


@pytest.fixture(autouse=True)
def no_env_output(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)


class TestRunSimulation:
    def test_zero_duration(self):
        rep = run_simulation(config(t_end=0.0))
        assert rep.outcome is Outcome.COMPLETED and rep.exit_code == 0
        assert rep.steps == 0 and len(rep.records) == 1

    def test_plane_wave_phase(self):
        cfg = parse_config("[grid]\nresolution = 16, 16\n[model]\ncoupling = 0\n[time]\ndt = 0.001\nt_end = 1\n"
                           "[output]\noutput_interval = 1000\n")
        rep = run_simulation(cfg)
        x = cfg.grid.coordinates[0]
        assert rep.t == 1.0
        assert np.abs(rep.state.psi.physical() - np.exp(1j * (x - 1.5))).max() < 1e-8

    def test_output_files(self, tmp_path):
        rep = run_simulation(config(ckpt=10), tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert {"config.ini", "diagnostics.csv", "run.json", checkpoint_name(10), checkpoint_name(20)} <= names
        status = json.loads((tmp_path / "run.json").read_text())
        assert status["outcome"] == "completed" and status["steps"] == 20
        assert len(read_diagnostics(tmp_path / "diagnostics.csv")) == 21
        assert rep.checkpoint == checkpoint_name(20)

    def test_environment_default_directory(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        rep = run_simulation(config(t_end=0.02))
        assert rep.output_dir == str(tmp_path / "env")
        assert (tmp_path / "env" / "diagnostics.csv").exists()

    def test_halts_at_density_floor(self, tmp_path):
        rep = run_simulation(parse_config(HALTING), tmp_path)
        assert rep.outcome is Outcome.HALTED and rep.exit_code == 2
        assert 0 < rep.t < 1.0
        assert rep.records[-1].min_rho < 0.9
        assert json.loads((tmp_path / "run.json").read_text())["outcome"] == "halted_density_floor"

    def test_stepper_failure(self):
        cfg = config(t_end=0.05).with_(stepper="picard", picard_tol=1e-15, picard_max_iter=1, max_halvings=1)
        rep = run_simulation(cfg)
        assert rep.outcome is Outcome.FAILED and rep.exit_code == 1
        assert rep.steps == 0

    def test_deterministic(self, tmp_path):
        a = run_simulation(config(), tmp_path / "a")
        b = run_simulation(config(), tmp_path / "b")
        assert (tmp_path / "a/diagnostics.csv").read_bytes() == (tmp_path / "b/diagnostics.csv").read_bytes()
        assert (tmp_path / "a" / a.checkpoint).read_bytes() == (tmp_path / "b" / b.checkpoint).read_bytes()

    def test_resume_equivalence(self, tmp_path):
        full = run_simulation(config(ckpt=10), tmp_path / "full")
        part = tmp_path / "part"
        run_simulation(config(t_end=0.1), part)
        resumed = run_simulation(config(ckpt=10), part, resume=part / checkpoint_name(10))
        assert resumed.steps == full.steps
        assert (part / "diagnostics.csv").read_bytes() == (tmp_path / "full/diagnostics.csv").read_bytes()
        assert read_checkpoint(part / resumed.checkpoint).state.psi.coeffs.tobytes() == \
            full.state.psi.coeffs.tobytes()

    def test_resume_rejects_other_config(self, tmp_path):
        run_simulation(config(t_end=0.02), tmp_path)
        with pytest.raises(Exception, match="incompatible"):
            run_simulation(config(coupling=2.0), tmp_path, resume=tmp_path / checkpoint_name(2))

    def test_oracle_compare(self, tmp_path):
        run_simulation(config(t_end=0.05, history="true"), tmp_path)
        cmp = oracle_compare(tmp_path)
        assert cmp.t == pytest.approx(0.05)
        assert cmp.max_error < 1e-6
        assert cmp.renormalized_residual < 1e-8


class TestCli:
    def write(self, tmp_path, text, name="run.ini"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    def test_validate(self, tmp_path, capsys):
        path = self.write(tmp_path, BASE.format(coupling=1.0, t_end=0.1, ckpt=0, history="false"))
        assert main(["validate", "--config", path]) == 0
        assert "ok" in capsys.readouterr().out

    def test_validate_reports_error(self, tmp_path, capsys):
        path = self.write(tmp_path, "[grid]\nresolution = 8, 8\nbogus = 1\n")
        assert main(["validate", "--config", path]) == 1
        assert "line 3" in capsys.readouterr().err

    def test_run_oracle_report(self, tmp_path, capsys):
        path = self.write(tmp_path, BASE.format(coupling=1.0, t_end=0.05, ckpt=0, history="true"))
        out = tmp_path / "out"
        assert main(["run", "--config", path, "--output", str(out)]) == 0
        assert main(["oracle", "--config", path, "--against", str(out)]) == 0
        assert main(["report", str(out)]) == 0
        text = capsys.readouterr().out
        assert "gronwall_x_bound_holds" in text
        for name in ("energy.png", "masses.png", "monitors.png", "summary.csv"):
            assert (out / name).stat().st_size > 0

    def test_run_halt_exit_code(self, tmp_path):
        path = self.write(tmp_path, HALTING)
        assert main(["run", "--config", path, "--output", str(tmp_path / "h")]) == 2

    def test_run_resume(self, tmp_path):
        path = self.write(tmp_path, BASE.format(coupling=1.0, t_end=0.04, ckpt=2, history="false"))
        out = tmp_path / "r"
        assert main(["run", "--config", path, "--output", str(out)]) == 0
        ck = str(out / checkpoint_name(2))
        assert main(["run", "--config", path, "--output", str(out), "--resume", ck]) == 0

    def test_oracle_without_history(self, tmp_path, capsys):
        path = self.write(tmp_path, BASE.format(coupling=1.0, t_end=0.02, ckpt=0, history="false"))
        out = tmp_path / "o"
        main(["run", "--config", path, "--output", str(out)])
        assert main(["oracle", "--config", path, "--against", str(out)]) == 1
        assert "history" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.ini")]) == 1
