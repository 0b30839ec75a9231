import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetclaw.config import RunConfig, config_from_dict, load_config, parse_config_text, parse_value
from hetclaw.errors import ConfigError


def test_parse_values():
    assert parse_value("3") == 3 and parse_value("0.5") == 0.5
    assert parse_value("true") is True and parse_value("none") is None
    assert parse_value("-3, 10") == [-3, 10]
    assert parse_value("convex_combination") == "convex_combination"


def test_parse_text_with_comments():
    flat = parse_config_text("# run\nflux.family = gaussian_lwr  # inline\n\nhorizon=2\n")
    assert flat == {"flux.family": "gaussian_lwr", "horizon": 2}


@pytest.mark.parametrize("text", ["horizon 2", "horizon = 1\nhorizon = 2"])
def test_malformed_text(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_sections_are_routed():
    cfg = config_from_dict({"experiment": "emergence", "flux.family": "convex_combination",
                            "flux.epsilon": 0.2, "data.kind": "piecewise4",
                            "grid.domain": [-3, 10], "grid.n_cells": 400,
                            "tolerances.jump_floor": 1e-3, "emergence.tolerance": 0.1})
    assert cfg.flux_params == {"epsilon": 0.2} and cfg.domain == (-3, 10)
    assert cfg.jump_floor == 1e-3 and cfg.options["emergence"]["tolerance"] == 0.1


@pytest.mark.parametrize("flat,key", [
    ({"horizon": -1}, "horizon"),
    ({"experiment": "dance"}, "experiment"),
    ({"tolerances.num_tol": 0}, "tolerances.num_tol"),
    ({"grid.domain": [1, 0]}, "grid.domain"),
    ({"cfl": 2.0}, "cfl"),
    ({"flux.family": "nope"}, "flux.family"),
    ({"bogus": 1}, "bogus"),
    ({"tolerances.other": 1}, "tolerances.other"),
    ({"weird.key": 1}, "weird.key"),
])
def test_field_level_diagnostics(flat, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(flat)
    assert key in info.value.problems


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_hash_ignores_output_dir():
    a = config_from_dict({"output_dir": "a"})
    b = config_from_dict({"output_dir": "b"})
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != config_from_dict({"horizon": 2.0}).content_hash()


@given(h=st.floats(0.01, 100), n=st.integers(8, 10 ** 5))
def test_overrides_roundtrip(h, n):
    cfg = RunConfig().with_overrides(horizon=h, n_cells=n).validate()
    assert cfg.horizon == h and cfg.n_cells == n
