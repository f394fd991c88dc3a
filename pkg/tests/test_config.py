import pytest

from gf_config import DEFAULTS, PRESETS, parse_config
from gf_errors import ParseError, ValidationError
from gf_grid import DIRICHLET_ZERO


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_defaults():
    config = parse_config()

    assert config["kernel"]["p"] == 4.0
    assert config["grid"] == {"dim": 1, "n": 128, "h": 0.0625, "boundary": DIRICHLET_ZERO}
    assert config["time"] == {"t_min": 1e-4, "ratio": 1.25, "t_max": 10.0}
    assert config["ensemble"]["seed"] == 0
    assert config.grid().shape == (128,)
    assert len(config.timegrid()) > 50


def test_defaults_are_not_shared():
    config = parse_config(flags={("grid", "n"): 16})

    assert config["grid"]["n"] == 16
    assert DEFAULTS["grid"]["n"] == 128


def test_flags_override_file_override_preset(tmp_path):
    path = write(tmp_path, "[kernel]\np = 4\n\n[grid]\nn = 48\nh = 0.125\n")

    config = parse_config(path, {("kernel", "p"): 3.0, ("grid", "n"): 64, ("time", "t_max"): None}, preset="theorem1-smoke")

    assert config["kernel"]["p"] == 3.0
    assert config["grid"]["n"] == 64
    assert config["grid"]["h"] == 0.125
    assert config["time"]["t_max"] == 1.0
    assert config["ensemble"]["count"] == 5


def test_small_p_is_rejected_for_flows(tmp_path):
    path = write(tmp_path, "[kernel]\np = 1.5\n")

    with pytest.raises(ValidationError, match="p must exceed 2 for PPower flows"):
        parse_config(path)

    with pytest.raises(ValidationError, match="p must exceed 2"):
        parse_config(flags={("ensemble", "p_values"): "3,2"})


def test_small_p_is_irrelevant_for_semigroups():
    config = parse_config(flags={("kernel", "p"): 2.0, ("ensemble", "source"): "heat"})

    assert config["kernel"]["p"] == 2.0


def test_unknown_key(tmp_path):
    path = write(tmp_path, "[grid]\nwidth = 3\n")

    with pytest.raises(ParseError) as error:
        parse_config(path)

    assert str(path) in str(error.value)
    assert "width" in str(error.value)


def test_unknown_section(tmp_path):
    with pytest.raises(ParseError, match="unknown section"):
        parse_config(write(tmp_path, "[plot]\ncolor = 'red'\n"))


def test_malformed_file(tmp_path):
    with pytest.raises(ParseError, match="line"):
        parse_config(write(tmp_path, "[grid\nn = 3\n"))


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot open"):
        parse_config(tmp_path / "absent.toml")


def test_unknown_preset():
    with pytest.raises(ParseError, match="preset"):
        parse_config(preset="everything")


def test_bad_values():
    with pytest.raises(ParseError):
        parse_config(flags={("grid", "n"): 12.5})

    with pytest.raises(ParseError):
        parse_config(flags={("grid", "h"): "wide"})

    with pytest.raises(ValidationError):
        parse_config(flags={("grid", "boundary"): "neumann"})

    with pytest.raises(ValidationError):
        parse_config(flags={("time", "ratio"): 1.0})

    with pytest.raises(ValidationError):
        parse_config(flags={("ensemble", "checks"): "contraction,telepathy"})


def test_list_flags_accept_comma_separated_text():
    config = parse_config(flags={("ensemble", "checks"): "contraction, order", ("ensemble", "p_values"): "3,4.5"})

    assert config["ensemble"]["checks"] == ["contraction", "order"]
    assert config["ensemble"]["p_values"] == [3.0, 4.5]
    assert config.ensemble().p_values == (3.0, 4.5)


def test_round_trip(tmp_path):
    config = parse_config(preset="theorem2-smoke", flags={("ensemble", "seed"): 9})

    again = parse_config(write(tmp_path, config.to_toml()))

    assert again == config


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_presets_are_valid(preset):
    config = parse_config(preset=preset)

    assert config.ensemble().count == config["ensemble"]["count"]


def test_coefficient_file_takes_precedence(tmp_path):
    config = parse_config(flags={("kernel", "coefficients"): "checkerboard", ("kernel", "coefficient_file"): str(tmp_path / "a.txt")}, command="kernel-check")

    assert config.coefficient_kind() == "file"
    assert config.ensemble().coefficients == "file"


def test_unknown_command():
    with pytest.raises(ParseError):
        parse_config(command="plot")
