"""Config validation, domain-type invariants and serialization."""

import dataclasses
import json

import pytest

from phaselab import ansatz
from phaselab.model import (
    ConfigError,
    EnergyBreakdown,
    ParticleSpec,
    UniverseConfig,
    ValidatedUniverse,
    load_solution,
    validate,
    violations,
)


def make_config(**kw):
    base = dict(c_abs=0.125, particles=(ParticleSpec(mass=1.0),), hbar=1.0)
    base.update(kw)
    return UniverseConfig(**base)


def test_valid_config_accepted():
    uni = validate(make_config())
    assert isinstance(uni, ValidatedUniverse)
    assert uni.hbar == 1.0
    assert uni.c_abs == 0.125
    assert uni.n == 1


def test_zero_coupling_rejected():
    with pytest.raises(ConfigError, match="c_abs must be > 0"):
        validate(make_config(c_abs=0.0))


def test_negative_mass_rejected():
    with pytest.raises(ConfigError, match="mass must be > 0"):
        validate(make_config(particles=(ParticleSpec(mass=-1.0),)))


def test_empty_roster_rejected():
    with pytest.raises(ConfigError, match="non-empty"):
        validate(make_config(particles=()))


def test_all_violations_reported_together():
    bad = make_config(c_abs=0.0, hbar=0.0,
                      particles=(ParticleSpec(mass=-1.0, omega=-2.0),))
    out = violations(bad)
    assert len(out) == 4  # hbar, c_abs, mass, omega


def test_validate_idempotent():
    cfg = make_config()
    assert validate(cfg) == validate(cfg)
    assert violations(cfg) == []
    assert violations(cfg) == []


def test_config_types_immutable():
    cfg = make_config()
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.hbar = 2.0
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.particles[0].mass = 3.0


def test_config_roundtrip_exact(tmp_path):
    # thirds and sevenths are not exactly representable; the round trip
    # must still be bit-exact for whatever float actually got stored
    cfg = UniverseConfig(
        c_abs=1.0 / 3.0, hbar=2.0 / 7.0,
        particles=(ParticleSpec(mass=0.1, velocity=-1.0 / 3.0, omega=0.7),
                   ParticleSpec(mass=5.0)),
        variant="weakly-separable")
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert UniverseConfig.load(path) == cfg


def test_config_json_field_names(tmp_path):
    path = tmp_path / "cfg.json"
    make_config().save(path)
    data = json.loads(path.read_text())
    assert set(data) == {"hbar", "c_abs", "particles", "variant"}
    assert set(data["particles"][0]) == {"mass", "velocity", "omega"}


def test_solution_roundtrip(tmp_path):
    uni = validate(make_config())
    sol = ansatz.build_free_soliton(1.0, 0.7, uni)
    path = tmp_path / "sol.json"
    sol.save(path)
    assert load_solution(path) == sol


def test_pair_roundtrip(tmp_path):
    uni = validate(make_config())
    pair = ansatz.build_entangled_pair(1.0, 1.0, "upper", uni)
    path = tmp_path / "pair.json"
    pair.save(path)
    assert load_solution(path) == pair


def test_soliton_normalization_constant():
    uni = validate(make_config())
    sol = ansatz.build_free_soliton(1.0, 0.0, uni)
    # s = 1: N = (2/pi)^(1/4)
    assert sol.normalization() == pytest.approx((2.0 / 3.141592653589793) ** 0.25,
                                                rel=1e-14)


def test_energy_breakdown_consistency():
    eb = EnergyBreakdown(kinetic=1.0, internal=0.5, oscillator=0.25,
                         total=1.75)
    assert eb.total == eb.kinetic + eb.internal + eb.oscillator
    assert "parts" not in eb.to_dict()
