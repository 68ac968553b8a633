"""Run configuration: a sectioned ``key = value`` file, overridable from the command line.

Sections are named after the library modules whose settings they hold. A
``manifest.json`` written by an earlier run is accepted as well, since it
echoes the fully resolved configuration.
"""

from __future__ import annotations

import configparser
import json
from pathlib import Path

from .errors import ConfigError


def _int(s):
    return int(s)


def _float(s):
    return float(s)


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).replace(";", ",").split(",") if v.strip()]


def _strs(s):
    if isinstance(s, (list, tuple)):
        return [str(v) for v in s]
    return [v.strip() for v in str(s).split(",") if v.strip()]


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s):
    return str(s).strip()


# section -> key -> (parser, default); None means "the command picks its own default"
SCHEMA = {
    "rand_core": {
        "seed": (_int, 20240917),
    },
    "synthetic": {
        "n": (_int, 1500),
        "nu": (_floats, [2.0, 3.0, 2.5]),
        "theta": (_float, 1.3),
    },
    "margins": {
        "kind": (_str, None),
        "nu": (_floats, None),
        "location": (_floats, None),
        "scale": (_floats, None),
        "threshold_level": (_float, None),
        "floor": (_float, 1e-6),
    },
    "spectral_boot": {
        "m": (_int, 10000),
        "replicates": (_int, 1),
        "keep_intermediate": (_bool, False),
    },
    "trm": {
        "alphas": (_floats, [0.0025, 0.001, 0.0003]),
        "var_method": (_str, "theoretical"),
        "metrics": (_strs, ["ES", "MMES", "DCTE"]),
    },
    "experiment": {
        "thetas": (_floats, [1.3, 2.6, 7.3]),
        "n_outer": (_int, 50),
        "n_inner": (_int, 50),
        "oracle_size": (_int, 10_000_000),
        "target": (_int, 0),
        "workers": (_int, 1),
        "qq_boot": (_int, 1000),
        "chi_pairs": (_str, None),
    },
}


def defaults() -> dict:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def _coerce(section, key, raw, line=None):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]", key=section, line=line)
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]", key=f"{section}.{key}", line=line)
    if raw is None:
        return None
    parser = SCHEMA[section][key][0]
    try:
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}", key=f"{section}.{key}", line=line) from None


def _key_lines(text):
    """Line number of each ``key`` per section, for error messages."""
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and "=" in s and not s.startswith(("#", ";")):
            lines[(section, s.split("=", 1)[0].strip().lower())] = i
    return lines


def load(path) -> dict:
    """Read a config file (INI or a previous run's manifest) over the defaults."""
    cfg = defaults()
    if path is None:
        return cfg
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc

    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from None
        sections = data.get("config", data)
        if not isinstance(sections, dict):
            raise ConfigError(f"{path}: expected an object of sections")
        for sec, keys in sections.items():
            if not isinstance(keys, dict):
                raise ConfigError(f"section {sec!r} must be an object", key=sec)
            for k, v in keys.items():
                cfg.setdefault(sec, {})[k] = _coerce(sec, k, v)
        return cfg

    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        parser.read_string(text, source=str(path))
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"{path}: cannot parse line {lineno}", line=lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: key before any [section]", line=exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}", line=getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    for sec in parser.sections():
        for k, v in parser.items(sec):
            cfg.setdefault(sec, {})[k] = _coerce(sec, k, v, lines.get((sec, k)))
    return cfg


def override(cfg: dict, section: str, key: str, value) -> None:
    """Apply a command-line value; ``None`` means the flag was not given."""
    if value is not None:
        cfg[section][key] = _coerce(section, key, value)
