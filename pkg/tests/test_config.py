import math

import pytest
from hypothesis import given, settings, strategies as st

from pitaevskii.config import RunConfig, Stepper, load_config, parse_config, serialize_config
from pitaevskii.coupling import ModelParams
from pitaevskii.errors import ConfigParseError, ValidationError
from pitaevskii.initial_data import DensityProfile, InitialDataSpec, Kind

MINIMAL = """
[grid]
resolution = 32, 32

[time]
dt = 0.001
t_end = 0.5
"""


class TestParse:
    def test_minimal_applies_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.shape == (32, 32)
        assert cfg.lengths == (2 * math.pi, 2 * math.pi)
        assert cfg.params == ModelParams()
        assert cfg.stepper is Stepper.RK4
        assert cfg.truncation.cutoff == 5
        assert cfg.initial.kind is Kind.PLANE_WAVE
        assert cfg.initial.psi_wavevectors == ((1, 0),)
        assert cfg.nsteps == 500
        assert cfg.output_dir is None and not cfg.store_history

    def test_dim_broadcasts_resolution(self):
        cfg = parse_config(MINIMAL.replace("resolution = 32, 32", "resolution = 16\ndim = 3"))
        assert cfg.shape == (16, 16, 16)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(MINIMAL)
        assert load_config(path) == parse_config(MINIMAL)

    def test_full_config(self):
        text = MINIMAL + """
[model]
coupling = 2.5
density_floor = 0.1
[initial]
kind = composite
psi_amplitudes = 1.0, 0.5
psi_wavevectors = 0, 0; 1, -1
velocity_amplitude = 0.2
density = mollified
mollifier_width = 0.125
[truncation]
cutoff = 4
[output]
checkpoint_interval = 100
history = yes
"""
        cfg = parse_config(text)
        assert cfg.params.coupling == 2.5
        assert cfg.initial.psi_wavevectors == ((0, 0), (1, -1))
        assert cfg.initial.density is DensityProfile.MOLLIFIED
        assert cfg.truncation.cutoff == 4
        assert cfg.store_history and cfg.checkpoint_interval == 100


class TestErrors:
    def test_unknown_key_has_line_number(self):
        with pytest.raises(ConfigParseError, match="line 8: unknown key 'steps'"):
            parse_config(MINIMAL.replace("t_end = 0.5", "t_end = 0.5\nsteps = 3"))

    def test_unknown_key_line(self):
        text = "[grid]\nresolution = 8, 8\ncolour = red\n[time]\ndt = 0.1\nt_end = 1\n"
        with pytest.raises(ConfigParseError) as exc:
            parse_config(text)
        assert exc.value.lineno == 3
        assert str(exc.value).startswith("line 3:")

    def test_unknown_section(self):
        with pytest.raises(ConfigParseError, match="line 2"):
            parse_config("\n[solver]\nx = 1\n")

    def test_bad_value_line(self):
        text = "[grid]\nresolution = 8, 8\n[time]\ndt = fast\nt_end = 1\n"
        with pytest.raises(ConfigParseError) as exc:
            parse_config(text)
        assert exc.value.lineno == 4

    def test_malformed_line(self):
        with pytest.raises(ConfigParseError, match="line 3"):
            parse_config("[grid]\nresolution = 8, 8\nnot a key value pair\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigParseError, match="line 3"):
            parse_config("[grid]\nresolution = 8, 8\nresolution = 8, 8\n")

    def test_missing_required(self):
        with pytest.raises(ValidationError, match="dt"):
            parse_config("[grid]\nresolution = 8, 8\n[time]\nt_end = 1\n")

    def test_density_floor_named(self):
        with pytest.raises(ValidationError, match="density floor"):
            parse_config(MINIMAL + "[model]\ndensity_floor = 0.6\n")

    def test_nonpositive_dt(self):
        with pytest.raises(ValidationError, match="dt"):
            parse_config(MINIMAL.replace("dt = 0.001", "dt = 0"))

    def test_cutoff_beyond_dealias(self):
        with pytest.raises(ValidationError, match="two-thirds"):
            parse_config(MINIMAL + "[truncation]\ncutoff = 11\n")

    def test_odd_resolution(self):
        with pytest.raises(ValidationError):
            parse_config(MINIMAL.replace("32, 32", "31, 32"))


class TestRoundTrip:
    def test_defaults(self):
        cfg = parse_config(MINIMAL)
        assert parse_config(serialize_config(cfg)) == cfg

    @settings(max_examples=40, deadline=None)
    @given(
        dt=st.floats(1e-6, 1.0),
        coupling=st.floats(0.0, 100.0),
        floor=st.floats(0.01, 0.49),
        amps=st.lists(st.floats(-5, 5), min_size=1, max_size=3),
        seed=st.integers(0, 2**31),
        stepper=st.sampled_from(list(Stepper)),
        density=st.sampled_from(list(DensityProfile)),
        width=st.one_of(st.none(), st.floats(0.01, 0.5)),
        history=st.booleans(),
    )
    def test_arbitrary(self, dt, coupling, floor, amps, seed, stepper, density, width, history):
        vecs = tuple((i, -i) for i in range(len(amps)))
        cfg = RunConfig(
            shape=(16, 16),
            dt=dt,
            t_end=1.0,
            params=ModelParams(coupling=coupling, density_floor=floor),
            initial=InitialDataSpec(kind=Kind.COMPOSITE, psi_amplitudes=tuple(amps), psi_wavevectors=vecs,
                                    density=density, mollifier_width=width, seed=seed),
            stepper=stepper,
            store_history=history,
            output_dir="out dir",
        )
        assert parse_config(serialize_config(cfg)) == cfg
