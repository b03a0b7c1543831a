import numpy as np
import pytest

from isomwalk.catalog import by_name, rotation_rich, skew_turn
from isomwalk.config import (
    ExperimentConfig,
    build_group,
    build_measure,
    format_config,
    format_measure,
    parse_config_text,
    parse_measure_text,
    read_config,
    read_measure_file,
    write_measure_file,
)
from isomwalk.errors import ConfigError

MEASURE_TEXT = """\
# two atoms
dim = 2
atom: weight=0.5 rotation=1,0,0,1 translation=1,0
atom: weight=0.5 rotation=0,-1,
      1,0          # continues on the next line
      translation = 0 0
"""


def test_measure_grammar_with_continuation():
    mu = parse_measure_text(MEASURE_TEXT)
    assert mu.size == 2 and mu.dim == 2
    rot90 = [r for r in mu.rotations if not np.allclose(r, np.eye(2))][0]
    np.testing.assert_array_equal(rot90, [[0, -1], [1, 0]])


@pytest.mark.parametrize("text,msg", [
    ("atom: weight=1 rotation=1,0,0,1 translation=0,0\n", "dim"),
    ("dim = 2\n", "no atoms"),
    ("dim = 2\natom: weight=1 rotation=1,0,0,1 translation=0,0x\n", "float"),
    ("dim = 2\natom: weight=1 rotation=1,0,0,1 translation=nan,0\n", "float"),
    ("dim = 2\natom: weight=1 rotation=1,0,0 translation=0,0\n", "4 floats"),
    ("dim = 2\natom: weight=1 translation=0,0\n", "missing"),
    ("dim = 2\nweight=1\n", "atom:"),
    ("dim = 2\natom: weight=0.5 rotation=1,0,0,1 translation=0,0\n", "sum"),
])
def test_measure_grammar_errors(text, msg):
    with pytest.raises((ConfigError, ValueError), match=msg):
        parse_measure_text(text)


def test_measure_file_roundtrip(tmp_path):
    for name in ("rotation_rich", "skew_turn", "half_turns"):
        mu = by_name(name)
        path = tmp_path / f"{name}.measure"
        write_measure_file(path, mu, comment=name)
        back = read_measure_file(path)
        np.testing.assert_array_equal(back.rotations, mu.rotations)
        np.testing.assert_array_equal(back.translations, mu.translations)
        np.testing.assert_array_equal(back.weights, mu.weights)


def test_missing_measure_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nowhere.measure"):
        read_measure_file(tmp_path / "nowhere.measure")


CONFIG_TEXT = """\
# comment line
[experiment]
name = verify-clt
l = 100, 400
samples = 1000
seed = 7
x0 = 0.5, -1e-3

[measure]
file = sq.measure

[output]
plots = false
"""


def test_config_parse_and_format_roundtrip():
    cfg = parse_config_text(CONFIG_TEXT)
    assert cfg.experiment == "verify-clt"
    assert cfg.get("l") == [100, 400] and cfg.get("seed") == 7
    assert cfg.get("x0") == [0.5, -1e-3]
    assert cfg.output == {"plots": False}
    again = parse_config_text(format_config(cfg))
    assert again == cfg


@pytest.mark.parametrize("patch,msg", [
    (("samples = 1000", "samples = 1000\nsampels = 3"), "unknown key"),
    (("[output]", "[outptu]"), "unknown section"),
    (("name = verify-clt", "name = verify-everything"), "unknown experiment"),
    (("samples = 1000", "samples = 0"), "positive"),
    (("seed = 7", "seed = -1"), "unsigned"),
    (("seed = 7", "seed = 18446744073709551616"), "unsigned"),
    (("l = 100, 400", "l = 100, four"), "integer"),
    (("file = sq.measure", "file = sq.measure\nexample = rotation_rich"), "exactly one"),
    (("plots = false", "plots = maybe"), "true or false"),
])
def test_config_errors(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config_text(CONFIG_TEXT.replace(*patch))


def test_inline_atoms_and_group_section():
    text = """\
[experiment]
name = params
[measure]
dim = 2
atom1 = weight=0.5 rotation=0,-1,1,0 translation=1,0
atom2 = weight=0.5 rotation=0,1,-1,0 translation=-1,0
[group]
model = finite
generators = 0, -1, 1, 0
"""
    cfg = parse_config_text(text)
    mu = build_measure(cfg)
    assert mu.size == 2
    g = build_group(cfg, mu)
    assert g.kind == "finite" and g.order == 4
    assert parse_config_text(format_config(cfg)) == cfg


def test_inline_atoms_need_dim():
    with pytest.raises(ConfigError, match="dim"):
        parse_config_text("[measure]\natom1 = weight=1 rotation=1,0,0,1 translation=0,0\n")


def test_ergodic_group_section():
    th = 2 * np.pi * (np.sqrt(5) - 1) / 2
    c, s = float(np.cos(th)), float(np.sin(th))
    cfg = parse_config_text(f"[measure]\nexample = rotation_rich\n[group]\nmodel = ergodic\n"
                            f"generators = {c!r}, {-s!r}, {s!r}, {c!r}\nsamples = 256\n")
    g = build_group(cfg, rotation_rich())
    assert g.kind == "ergodic" and g.continuous == "SO2"


def test_measure_file_relative_to_config(tmp_path):
    sub = tmp_path / "cfgs"
    sub.mkdir()
    write_measure_file(sub / "sk.measure", skew_turn())
    (sub / "run.cfg").write_text("[experiment]\nname = params\n[measure]\nfile = sk.measure\n")
    cfg = read_config(sub / "run.cfg")
    assert build_measure(cfg).same_as(skew_turn())


def test_missing_config_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="absent.cfg"):
        read_config(tmp_path / "absent.cfg")


def test_unknown_catalog_example():
    cfg = parse_config_text("[measure]\nexample = no_such_measure\n")
    with pytest.raises(ConfigError):
        build_measure(cfg)


def test_format_measure_is_canonical():
    text = format_measure(rotation_rich())
    assert text.startswith("dim = 2\natom: weight=")
    assert parse_measure_text(text).same_as(rotation_rich(), tol=0)


def test_empty_config_object_defaults():
    cfg = ExperimentConfig()
    assert cfg.get("samples", 5) == 5
