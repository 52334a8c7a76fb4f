from pathlib import Path

import pytest

from heatcoef.scenario import (
    ConfigError,
    parse_config,
    parse_config_text,
    scenario_hash,
    serialize_scenario,
    with_overrides,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = "name = t\ncoefficient = constant\n"

FULL = """\
name = full
nx = 16
ny = 16
a_plus = 2.5
coefficient = gaussian-bump
coefficient.amplitude = 0.4
u0 = sine-product
u0.m = 2
u0.n = 3
T = 0.3
T_grid = 0.15,0.3,0.6
modes = 12
noise = 1e-6
seed = 7
perturbation = two-bump
eta = gaussian-bump
eta.amplitude = 0.02
scales = 0.001,0.01
"""


@pytest.mark.parametrize("cfg", sorted(SCENARIO_DIR.glob("*.cfg")), ids=lambda p: p.stem)
def test_bundled_scenarios_round_trip(cfg):
    s = parse_config(cfg)
    assert parse_config_text(serialize_scenario(s)) == s
    assert scenario_hash(s) == scenario_hash(parse_config_text(serialize_scenario(s)))


def test_full_variant_round_trips():
    s = parse_config_text(FULL)
    assert s.u0.kind == "sine-product" and (s.u0.m, s.u0.n) == (2, 3)
    assert s.T_grid == (0.15, 0.3, 0.6)
    assert s.perturbation.kind == "two-bump"
    assert dict(s.eta.params)["amplitude"] == 0.02
    assert parse_config_text(serialize_scenario(s)) == s


def test_defaults_are_filled_in():
    s = parse_config_text(MINIMAL)
    assert (s.nx, s.ny) == (32, 32)
    assert s.a_plus == 2.0
    assert s.u0.kind == "d_Omega"
    assert s.modes == 40
    assert s.alpha == 1e-8
    assert s.tol_fp == 1e-8
    assert s.max_iter == 50
    assert s.eta_hat == 0.05
    assert s.scales == (1e-3, 1e-2, 1e-1)
    assert dict(s.coefficient.params)["value"] == 1.0  # catalog default


def test_comments_and_blank_lines_ignored():
    text = "# header\n\nname = c  # trailing\ncoefficient = constant\n\n"
    assert parse_config_text(text).name == "c"


class TestRejections:
    def test_duplicate_key_reports_both_lines(self):
        with pytest.raises(ConfigError, match=r"line 3: duplicate key 'name' \(first set on line 1\)"):
            parse_config_text("name = a\ncoefficient = constant\nname = b\n")

    def test_unknown_key_with_line(self):
        with pytest.raises(ConfigError, match="line 3: unknown key 'bogus'"):
            parse_config_text(MINIMAL + "bogus = 3\n")

    def test_missing_required_keys(self):
        with pytest.raises(ConfigError, match="missing required key 'name'"):
            parse_config_text("coefficient = constant\n")
        with pytest.raises(ConfigError, match="missing required key 'coefficient'"):
            parse_config_text("name = x\n")

    def test_unparsable_scalar(self):
        with pytest.raises(ConfigError, match="line 3: cannot parse T = 'abc' as float"):
            parse_config_text(MINIMAL + "T = abc\n")

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config_text("name a\n")

    def test_empty_value(self):
        with pytest.raises(ConfigError, match="empty key or value"):
            parse_config_text("name =\n")

    def test_unknown_coefficient_kind(self):
        with pytest.raises(ConfigError, match="line 2: unknown coefficient kind 'wiggle'"):
            parse_config_text("name = x\ncoefficient = wiggle\n")

    def test_unknown_direction_kind(self):
        with pytest.raises(ConfigError, match="unknown direction kind"):
            parse_config_text(MINIMAL + "eta = vortex\n")

    def test_invalid_group_parameter(self):
        with pytest.raises(ConfigError, match=r"parameter 'coefficient.banana' not valid"):
            parse_config_text(MINIMAL + "coefficient.banana = 2\n")

    def test_unknown_u0_kind(self):
        with pytest.raises(ConfigError, match="unknown initial-state kind"):
            parse_config_text(MINIMAL + "u0 = blob\n")

    def test_t_grid_must_increase(self):
        with pytest.raises(ConfigError, match="strictly increasing"):
            parse_config_text(MINIMAL + "T_grid = 0.3,0.15\n")
        with pytest.raises(ConfigError, match="positive"):
            parse_config_text(MINIMAL + "T_grid = -1,2\n")
        with pytest.raises(ConfigError, match="T_grid is empty"):
            parse_config_text(MINIMAL + "T_grid = ,\n")

    def test_scalar_range_checks(self):
        for bad, message in (
            ("a_plus = 1.0", "a_plus must exceed 1"),
            ("T = 0", "T must be positive"),
            ("modes = 0", "modes must be >= 1"),
            ("gamma = -1", "gamma must be >= 0"),
            ("delta = 0", "delta must be positive"),
            ("noise = -1e-6", "noise must be >= 0"),
            ("seed = -1", "seed must be >= 0"),
            ("max_iter = 0", "max_iter must be >= 1"),
            ("nx = 1", "at least 2 cells"),
        ):
            with pytest.raises(ConfigError, match=message):
                parse_config_text(MINIMAL + bad + "\n")

    def test_inadmissible_coefficient_rejected(self):
        text = "name = x\ncoefficient = constant\ncoefficient.value = 3.0\n"
        with pytest.raises(ConfigError, match="coefficient is not admissible"):
            parse_config_text(text)

    def test_inadmissible_perturbation_rejected(self):
        text = MINIMAL + "perturbation = constant\nperturbation.value = 0.5\n"
        with pytest.raises(ConfigError, match="perturbation is not admissible"):
            parse_config_text(text)

    def test_custom_u0_requires_existing_path(self, tmp_path):
        with pytest.raises(ConfigError, match="requires u0.path"):
            parse_config_text(MINIMAL + "u0 = custom\n")
        with pytest.raises(ConfigError, match="does not exist"):
            parse_config_text(MINIMAL + "u0 = custom\nu0.path = /nonexistent.grid\n")
        p = tmp_path / "u0.grid"
        p.write_text("2 2\n0 0 0\n0 0 0\n0 0 0\n")
        s = parse_config_text(MINIMAL + f"u0 = custom\nu0.path = {p}\n")
        assert s.u0.path == str(p)


class TestHashAndOverrides:
    def test_hash_is_stable_and_sensitive(self):
        s = parse_config_text(MINIMAL)
        h = scenario_hash(s)
        assert len(h) == 64 and set(h) <= set("0123456789abcdef")
        assert h == scenario_hash(parse_config_text(MINIMAL))
        assert h != scenario_hash(parse_config_text(MINIMAL + "seed = 5\n"))

    def test_overrides_replace_only_requested_fields(self):
        s = parse_config_text(MINIMAL)
        s2 = with_overrides(s, seed=9, modes=13)
        assert (s2.seed, s2.modes) == (9, 13)
        assert s2.coefficient == s.coefficient and s2.name == s.name
        assert with_overrides(s) == s
