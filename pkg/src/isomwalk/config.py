"""Experiment configs and measure files.

Config files use the INI subset shared with TOML tables: ``[section]``
headers, ``key = value`` lines, ``#`` comments. Lists are comma separated;
lists of vectors or matrices separate their members with ``;``.

Measure files are UTF-8 text::

    # comment
    dim = 2
    atom: weight=0.25 rotation=1,0,0,1 translation=1,0
    atom: weight=0.75 rotation=0,-1,
          1,0 translation=0,0

The first non-comment line fixes the dimension. Each ``atom:`` block runs
until the next one and carries ``weight``, ``rotation`` (row-major, ``d^2``
floats) and ``translation`` (``d`` floats). Floats are decimal or scientific;
separators inside a list are commas and/or whitespace.
"""

import configparser
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from isomwalk.catalog import by_name
from isomwalk.errors import ConfigError
from isomwalk.isomcore import close_finite_group, ergodic_haar, group_model_for
from isomwalk.measure import AtomicIsometryMeasure

EXPERIMENTS = ("params", "simulate", "spectrum", "verify-clt", "verify-llt", "verify-multiscale",
               "verify-fourier", "conditions")

FLOAT_RE = re.compile(r"^[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?$")
ATOM_KEY_RE = re.compile(r"^atom(\d+)$")
FIELD_RE = re.compile(r"\b(weight|rotation|translation)\s*=")

# value kinds: int, float, bool, str, ints, floats, vectors (';' separated float lists), atom
SCHEMA = {
    "experiment": {
        "name": "str", "l": "ints", "samples": "int", "seed": "int", "x0": "floats",
        "frequencies": "vectors", "abs_orders": "floats", "store_endpoints": "bool",
        "r": "floats", "resolution": "int", "power_iters": "int", "tol": "float",
        "dump_field": "bool", "field_steps": "int",
        "bump_center": "floats", "bump_radius": "float",
        "scale_exponent": "float", "offset": "float", "direction": "floats",
        "n_low": "int", "n_high": "int", "c_bound": "float", "decay": "float",
        "rel_tol": "float", "stab_tol": "float", "pred_tol": "float", "sigma_mult": "float",
        "ratio_tol": "float", "k_max": "int", "probe_count": "int",
    },
    "measure": {"file": "str", "example": "str", "dim": "int"},
    "group": {"model": "str", "generators": "vectors", "word_length": "int", "samples": "int",
              "seed": "int", "max_order": "int"},
    "output": {"dir": "str", "plots": "bool"},
}
GROUP_MODELS = ("auto", "finite", "ergodic")


def parse_float(tok, where):
    tok = tok.strip()
    if not FLOAT_RE.match(tok):
        raise ConfigError(f"{where}: not a decimal or scientific float: {tok!r}")
    return float(tok)


def parse_floats(text, where):
    toks = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not toks:
        raise ConfigError(f"{where}: empty list")
    return [parse_float(t, where) for t in toks]


def _format_float(x):
    return repr(float(x))


def _parse_value(kind, text, where):
    text = text.strip()
    if kind == "str":
        if not text:
            raise ConfigError(f"{where}: empty value")
        return text
    if kind == "int":
        if not re.match(r"^[+-]?\d+$", text):
            raise ConfigError(f"{where}: not an integer: {text!r}")
        return int(text)
    if kind == "float":
        return parse_float(text, where)
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"{where}: expected true or false, got {text!r}")
        return low == "true"
    if kind == "ints":
        out = []
        for t in (t for t in re.split(r"[,\s]+", text) if t):
            if not re.match(r"^[+-]?\d+$", t):
                raise ConfigError(f"{where}: not an integer: {t!r}")
            out.append(int(t))
        if not out:
            raise ConfigError(f"{where}: empty list")
        return out
    if kind == "floats":
        return parse_floats(text, where)
    if kind == "vectors":
        return [parse_floats(part, where) for part in text.split(";")]
    raise AssertionError(kind)


def _format_value(kind, value):
    if kind in ("str",):
        return value
    if kind == "int":
        return str(value)
    if kind == "float":
        return _format_float(value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "ints":
        return ", ".join(str(v) for v in value)
    if kind == "floats":
        return ", ".join(_format_float(v) for v in value)
    if kind == "vectors":
        return " ; ".join(", ".join(_format_float(v) for v in vec) for vec in value)
    raise AssertionError(kind)


# ----------------------------------------------------------------------
# atoms and measure files

def parse_atom_fields(text, d, where):
    """``weight=.. rotation=.. translation=..`` into ``(w, rotation, translation)``."""
    pieces = FIELD_RE.split(text)
    if pieces[0].strip():
        raise ConfigError(f"{where}: unexpected text {pieces[0].strip()!r}")
    found = {}
    for key, val in zip(pieces[1::2], pieces[2::2]):
        if key in found:
            raise ConfigError(f"{where}: duplicate field {key!r}")
        found[key] = parse_floats(val, f"{where} {key}")
    missing = {"weight", "rotation", "translation"} - set(found)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")
    if len(found["weight"]) != 1:
        raise ConfigError(f"{where}: weight takes one float")
    if len(found["rotation"]) != d * d:
        raise ConfigError(f"{where}: rotation needs {d * d} floats, got {len(found['rotation'])}")
    if len(found["translation"]) != d:
        raise ConfigError(f"{where}: translation needs {d} floats, got {len(found['translation'])}")
    return found["weight"][0], np.array(found["rotation"]).reshape(d, d), np.array(found["translation"])


def format_atom_fields(weight, rotation, translation):
    rot = ",".join(_format_float(x) for x in np.ravel(rotation))
    tr = ",".join(_format_float(x) for x in np.ravel(translation))
    return f"weight={_format_float(weight)} rotation={rot} translation={tr}"


def _measure_from_atoms(atoms, where):
    w = [a[0] for a in atoms]
    try:
        return AtomicIsometryMeasure(np.array([a[1] for a in atoms]), np.array([a[2] for a in atoms]), w)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(f"{where}: {type(exc).__name__}: {exc}") from exc


def parse_measure_text(text, where="<measure>"):
    d = None
    blocks = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if d is None:
            m = re.match(r"^dim\s*=\s*(\d+)$", line)
            if not m:
                raise ConfigError(f"{where}:{lineno}: first line must be 'dim = <d>'")
            d = int(m.group(1))
            if d < 1:
                raise ConfigError(f"{where}:{lineno}: dimension must be positive")
            continue
        if line.startswith("atom:"):
            blocks.append([lineno, line[len("atom:"):]])
        elif blocks:
            blocks[-1][1] += " " + line
        else:
            raise ConfigError(f"{where}:{lineno}: expected 'atom:' block")
    if d is None:
        raise ConfigError(f"{where}: missing 'dim = <d>' line")
    if not blocks:
        raise ConfigError(f"{where}: no atoms")
    atoms = [parse_atom_fields(body, d, f"{where}:{lineno}") for lineno, body in blocks]
    return _measure_from_atoms(atoms, where)


def read_measure_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"measure file not found: {path}") from None
    return parse_measure_text(text, where=str(path))


def format_measure(mu, comment=None):
    lines = [f"# {comment}"] if comment else []
    lines.append(f"dim = {mu.dim}")
    for w, rot, tr in zip(mu.weights, mu.rotations, mu.translations):
        lines.append("atom: " + format_atom_fields(w, rot, tr))
    return "\n".join(lines) + "\n"


def write_measure_file(path, mu, comment=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_measure(mu, comment))


# ----------------------------------------------------------------------
# experiment configs

@dataclass
class ExperimentConfig:
    """Validated contents of one config file.

    ``params`` holds ``[experiment]`` keys except ``name``; ``atoms`` the
    inline ``atomN`` entries of ``[measure]`` keyed by ``N``. Only keys that
    were present are stored, so writing back reproduces the file's content.
    """

    experiment: Optional[str] = None
    params: dict = field(default_factory=dict)
    measure: dict = field(default_factory=dict)
    atoms: dict = field(default_factory=dict)
    group: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    base_dir: str = field(default=".", compare=False)

    def get(self, key, default=None):
        return self.params.get(key, default)


def parse_config_text(text, where="<config>", base_dir="."):
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=None,
                                   empty_lines_in_values=False, default_section="__none__")
    try:
        cp.read_string(text, source=where)
    except configparser.Error as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    cfg = ExperimentConfig(base_dir=base_dir)
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{where}: unknown section [{section}]")
        for key, raw in cp.items(section):
            loc = f"{where} [{section}] {key}"
            if section == "measure" and ATOM_KEY_RE.match(key):
                cfg.atoms[int(ATOM_KEY_RE.match(key).group(1))] = raw.strip()
                continue
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            value = _parse_value(kind, raw, loc)
            if section == "experiment" and key == "name":
                cfg.experiment = value
            elif section == "experiment":
                cfg.params[key] = value
            else:
                getattr(cfg, section)[key] = value
    _validate(cfg, where)
    return cfg


def _validate(cfg, where):
    if cfg.experiment is not None and cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"{where}: unknown experiment {cfg.experiment!r}; known: {list(EXPERIMENTS)}")
    sources = [k for k in ("file", "example") if k in cfg.measure] + (["inline atoms"] if cfg.atoms else [])
    if len(sources) != 1:
        raise ConfigError(f"{where}: [measure] needs exactly one of file, example, inline atoms; got {sources}")
    if cfg.atoms and "dim" not in cfg.measure:
        raise ConfigError(f"{where}: inline atoms need 'dim' in [measure]")
    model = cfg.group.get("model", "auto")
    if model not in GROUP_MODELS:
        raise ConfigError(f"{where}: group model must be one of {list(GROUP_MODELS)}")
    if model in ("finite", "ergodic") and "generators" not in cfg.group:
        raise ConfigError(f"{where}: group model {model!r} needs generators")
    for key in ("samples", "resolution", "power_iters", "k_max", "probe_count"):
        if key in cfg.params and cfg.params[key] < 1:
            raise ConfigError(f"{where}: {key} must be positive")
    if any(l < 0 for l in cfg.params.get("l", [])):
        raise ConfigError(f"{where}: step counts must be non-negative")
    seed = cfg.params.get("seed")
    if seed is not None and not 0 <= seed < 2 ** 64:
        raise ConfigError(f"{where}: seed must be an unsigned 64-bit integer")


def read_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    return parse_config_text(text, where=str(path), base_dir=os.path.dirname(os.path.abspath(path)))


def format_config(cfg: ExperimentConfig):
    out = []

    def section(name, items):
        if not items:
            return
        out.append(f"[{name}]")
        out.extend(f"{k} = {v}" for k, v in items)
        out.append("")

    exp = [("name", cfg.experiment)] if cfg.experiment is not None else []
    exp += [(k, _format_value(kind, cfg.params[k])) for k, kind in SCHEMA["experiment"].items()
            if k in cfg.params]
    section("experiment", exp)
    meas = [(k, _format_value(kind, cfg.measure[k])) for k, kind in SCHEMA["measure"].items() if k in cfg.measure]
    meas += [(f"atom{i}", cfg.atoms[i]) for i in sorted(cfg.atoms)]
    section("measure", meas)
    for name in ("group", "output"):
        part = getattr(cfg, name)
        section(name, [(k, _format_value(kind, part[k])) for k, kind in SCHEMA[name].items() if k in part])
    return "\n".join(out)


def write_config(path, cfg):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))


# ----------------------------------------------------------------------
# building library objects

def build_measure(cfg: ExperimentConfig):
    if "file" in cfg.measure:
        path = cfg.measure["file"]
        if not os.path.isabs(path):
            path = os.path.join(cfg.base_dir, path)
        return read_measure_file(path)
    if "example" in cfg.measure:
        try:
            return by_name(cfg.measure["example"])
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    d = cfg.measure["dim"]
    atoms = [parse_atom_fields(cfg.atoms[i], d, f"[measure] atom{i}") for i in sorted(cfg.atoms)]
    return _measure_from_atoms(atoms, "[measure]")


def build_group(cfg: ExperimentConfig, mu):
    g = cfg.group
    model = g.get("model", "auto")
    word_length = g.get("word_length", 64)
    samples = g.get("samples", 4096)
    seed = g.get("seed", 0)
    max_order = g.get("max_order", 1024)
    if model == "auto":
        return group_model_for(mu.rotations, max_order=max_order, word_length=word_length,
                               samples=samples, seed=seed)
    d = mu.dim
    gens = []
    for vec in g["generators"]:
        if len(vec) != d * d:
            raise ConfigError(f"[group] generators: need {d * d} floats per matrix, got {len(vec)}")
        gens.append(np.array(vec).reshape(d, d))
    if model == "finite":
        return close_finite_group(gens, max_order=max_order)
    return ergodic_haar(gens, word_length=word_length, samples=samples, seed=seed)


__all__ = ["ExperimentConfig", "EXPERIMENTS", "SCHEMA", "parse_config_text", "read_config", "format_config",
           "write_config", "parse_measure_text", "read_measure_file", "format_measure", "write_measure_file",
           "parse_atom_fields", "format_atom_fields", "build_measure", "build_group", "parse_floats"]
