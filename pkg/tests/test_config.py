from __future__ import annotations

import math

import pytest

from uddstore.config import ExperimentConfig, config_from_dict, load_config, parse_quantity
from uddstore.errors import DomainError, SequenceSyntaxError

TOML = """
seed = 17
state = "S0"
threshold = 0.9

[molecule]
delta_nu = "270.4Hz"
j_coupling = "4.1Hz"

[noise]
ensemble_size = 16
static_offset = { kind = "gaussian", sigma = "10Hz" }
rf_scale = { kind = "gaussian", mean = 1.0, sigma = 0.03, truncate = 3.0 }

[noise.relaxation]
t1 = "6.3s"
t2 = "2.3s"

[noise.dephasing]
sigma = "1.5rad/s"
tau_c = "20ms"
mode = "independent"

[sequences]
include_control = true
lines = '''
udd order=7 tau_cpmg=2ms tau_pi=27.2us repeats=1
cpmg order=4 tau_cpmg=2ms tau_pi=27.2us repeats=1 phase=90
'''

[grid]
start = "0s"
stop = "40s"
points = 25

[outputs]
dir = "results"
format = "plotdata"

[filter]
schemes = ["cpmg", "udd"]
orders = [7]
durations = ["1s"]

[[filter.bath]]
name = "sharp"
kind = "ohmic_sharp_cutoff"
coupling = 0.01
omega_c = "20rad/s"

[[filter.bath]]
kind = "lorentzian"
sigma = "2rad/s"
tau_c = "500ms"

[spinlock]
singlet_lifetime = "16s"
triplet_mixing_rate = "5 1/s"
grid = { start = "0s", stop = "60s", points = 31 }
"""


def test_parse_quantity():
    assert parse_quantity("27.2us", "time") == pytest.approx(27.2e-6, abs=1e-20)
    assert parse_quantity("2ms", "time") == 2e-3
    assert parse_quantity("0.27kHz", "frequency") == 270.0
    assert parse_quantity("inf s", "time") == math.inf
    for bad, dim in [("2", "time"), (2.0, "time"), ("2Hz", "time"), ("2 parsecs", "time"), ("1,5ms", "time")]:
        with pytest.raises(DomainError):
            parse_quantity(bad, dim)


def test_load_full_config(tmp_path):
    path = tmp_path / "scan.toml"
    path.write_text(TOML)
    cfg = load_config(path)
    assert cfg.master_seed == 17
    assert cfg.molecule.delta_nu == 270.4 and cfg.molecule.j_coupling == 4.1
    assert cfg.noise.ensemble_size == 16
    assert cfg.noise.relaxation.t2 == 2.3
    assert cfg.noise.dephasing.mode == "independent" and cfg.noise.dephasing.tau_c == 0.02
    assert cfg.noise.rf_scale.truncate == 3.0
    assert [s.label for s in cfg.sequences] == ["UDD-7", "CPMG-4"]
    assert cfg.sequences[1].phase_deg == 90.0
    assert len(cfg.grid) == 25 and cfg.grid[-1] == 40.0
    assert cfg.out_dir == "results" and cfg.out_format == "plotdata"
    assert [n for n, _ in cfg.filter.baths] == ["sharp", "lorentzian"]
    assert cfg.spinlock.triplet_mixing_rate == 5.0
    assert len(cfg.spinlock_grid) == 31


def test_defaults():
    cfg = ExperimentConfig()
    assert [s.label for s in cfg.sequences] == [f"UDD-{n}" for n in range(1, 10)]
    assert cfg.include_control
    assert cfg.grid[0] == 0.0 and cfg.grid[-1] == 40.0 and len(cfg.grid) <= 25
    assert cfg.noise.relaxation.t1 == 6.3


def test_relaxation_can_be_disabled():
    cfg = config_from_dict({"noise": {"relaxation": {"enabled": False}}})
    assert cfg.noise.relaxation is None


@pytest.mark.parametrize("raw", [
    {"grid": {"times": ["1s", "0.5s"]}},
    {"grid": {"times": []}},
    {"state": "S7"},
    {"state": "bell:psi_minus"},
    {"threshold": 1.5},
    {"outputs": {"format": "xlsx"}},
    {"molecule": {"delta_nu": "270.4"}},
])
def test_invalid_configs(raw):
    with pytest.raises(DomainError):
        config_from_dict(raw)


def test_sequence_errors_carry_line():
    with pytest.raises(SequenceSyntaxError) as exc:
        config_from_dict({"sequences": {"lines": "udd order=3 tau_cpmg=2ms tau_pi=1us repeats=1\nudd order=3"}})
    assert exc.value.line == 2


def test_bad_toml(tmp_path):
    p = tmp_path / "x.toml"
    p.write_text("seed = = 3")
    with pytest.raises(DomainError):
        load_config(p)
    p.write_text('[filter]\n[[filter.bath]]\nkind = "lorentzian"\n')
    with pytest.raises(DomainError):
        load_config(p)
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.toml")
