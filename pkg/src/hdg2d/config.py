"""Line-oriented study configuration.

INI-style sections with ``key = value`` pairs and ``#`` comments; no nesting.
Unknown sections or keys are rejected so that a config file documents
exactly what a run did.  Every output row carries a short hash of the
canonicalized config for provenance.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from .cases import CATALOG, get_case
from .errors import ConfigError
from .layout import EQUATIONS

_SCHEMA = {
    "study": {"equation", "case", "degree", "base_n", "levels"},
    "stabilization": {"tau", "tau_n", "tau_t"},
    "checks": {
        "condensation",
        "infsup",
        "error_bounds",
        "identities",
        "min_rate",
        "rate_band_low",
        "rate_band_high",
        "rate_norm",
    },
    "output": {"prefix"},
}

_BOOL = {"on": True, "true": True, "1": True, "off": False, "false": False, "0": False}


@dataclass
class StudyConfig:
    equation: str
    case: str
    degree: int = 1
    base_n: int = 4
    levels: int = 4
    tau: float = 1.0
    tau_n: float | None = None
    tau_t: float | None = None
    condensation: bool = True
    infsup: bool = False
    error_bounds: bool = False
    identities: bool = False
    min_rate: float | None = None
    rate_band_low: float | None = None
    rate_band_high: float | None = None
    rate_norm: str | None = None
    prefix: str = "study"
    config_hash: str = ""


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except (ValueError, KeyError):
        raise ConfigError(f"[{section}] {key}: cannot parse value {raw!r}") from None


def _bool(raw: str) -> bool:
    return _BOOL[raw.lower()]


def parse_config(text: str) -> StudyConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), comment_prefixes=("#",), strict=True
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    if not parser.has_section("study"):
        raise ConfigError("missing required section [study]")

    case_name = _get(parser, "study", "case", str, None)
    if case_name is None:
        raise ConfigError("[study] case is required")
    if case_name not in CATALOG:
        raise ConfigError(
            f"unknown case {case_name!r}; available: {', '.join(sorted(CATALOG))}"
        )
    case = get_case(case_name)
    equation = _get(parser, "study", "equation", str, case.equation)
    if equation not in EQUATIONS:
        raise ConfigError(f"unknown equation {equation!r}")
    if equation != case.equation:
        raise ConfigError(
            f"case {case_name!r} solves {case.equation!r}, not {equation!r}"
        )

    cfg = StudyConfig(
        equation=equation,
        case=case_name,
        degree=_get(parser, "study", "degree", int, 1),
        base_n=_get(parser, "study", "base_n", int, 4),
        levels=_get(parser, "study", "levels", int, 4),
        tau=_get(parser, "stabilization", "tau", float, 1.0),
        tau_n=_get(parser, "stabilization", "tau_n", float, None),
        tau_t=_get(parser, "stabilization", "tau_t", float, None),
        condensation=_get(parser, "checks", "condensation", _bool, True),
        infsup=_get(parser, "checks", "infsup", _bool, False),
        error_bounds=_get(parser, "checks", "error_bounds", _bool, False),
        identities=_get(parser, "checks", "identities", _bool, False),
        min_rate=_get(parser, "checks", "min_rate", float, None),
        rate_band_low=_get(parser, "checks", "rate_band_low", float, None),
        rate_band_high=_get(parser, "checks", "rate_band_high", float, None),
        rate_norm=_get(parser, "checks", "rate_norm", str, None),
        prefix=_get(parser, "output", "prefix", str, "study"),
    )
    if cfg.degree < 0 or cfg.degree > 4:
        raise ConfigError("degree must be between 0 and 4")
    if cfg.levels < 1:
        raise ConfigError("levels must be at least 1")
    if cfg.base_n < 1:
        raise ConfigError("base_n must be at least 1")

    canon = []
    for section in sorted(parser.sections()):
        for key in sorted(parser.options(section)):
            canon.append(f"{section}.{key}={parser.get(section, key).strip()}")
    cfg.config_hash = hashlib.sha256("\n".join(canon).encode()).hexdigest()[:12]
    return cfg


def load_config(path: str) -> StudyConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
