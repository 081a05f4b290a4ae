"""Line-oriented ``key = value`` experiment configs with ``#`` comments."""
from __future__ import annotations

from ..errors import ConfigError, InvalidSpec
from .experiments import DEFAULT_PARAMS, ExperimentSpec, parse_eps

_LISTS = {"seeds", "probes"}


def parse_config(text):
    """Parse config text into a flat ``{key: str}`` dict."""
    out = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", no)
        key, value = (t.strip() for t in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", no)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", no)
        out[key] = value
    return out


def _float_or_none(v):
    return None if v.lower() in ("none", "off", "") else float(v)


def spec_from_mapping(cfg, **overrides):
    """Build an :class:`ExperimentSpec` from string values; ``overrides`` win."""
    cfg = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}
    kw = {}
    params = {}
    try:
        for key, value in cfg.items():
            if key in ("kind", "domain", "gen", "g"):
                kw[key] = value
            elif key == "eps":
                kw["eps"] = parse_eps(value) if isinstance(value, str) else tuple(value)
            elif key == "seeds":
                kw["seeds"] = tuple(int(s) for s in str(value).split(",") if s.strip())
            elif key == "seed":
                kw["seeds"] = (int(value),)
            elif key == "trials":
                kw["trials"] = int(float(value))
            elif key in ("tol", "oracle_tol"):
                kw[key] = float(value)
            elif key in ("out", "outdir"):
                kw["outdir"] = value
            elif key == "probes":
                kw["probes"] = tuple(p.strip() for p in str(value).split(",") if p.strip())
            elif key in DEFAULT_PARAMS:
                params[key] = _float_or_none(value) if isinstance(value, str) else value
            else:
                raise ConfigError(f"unknown key {key!r}")
    except ValueError as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise ConfigError(f"bad value for {key!r}: {exc}") from None
    if params:
        kw["params"] = params
    return ExperimentSpec(**kw)


def load_config(path, **overrides):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return spec_from_mapping(parse_config(text), **overrides)
