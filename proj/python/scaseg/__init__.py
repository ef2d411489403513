"""Python bindings for the scaseg decoder toolkit."""

import json as _json

from ._scaseg import (
    ConfigError,
    FormatError,
    ShapeError,
    closed_form_flops,
    count_flops,
    generate_pyramid,
    oracle_gap,
    read_scat,
    run_cli,
    selftest,
    splitmix64_next,
    write_scat,
)
from ._scaseg import forward as _forward
from ._scaseg import resolve_config as _resolve_config


def forward(config=None):
    """Decode the synthetic pyramid described by `config` (dict or JSON string)."""
    if config is None:
        config = {}
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _forward(config)


def resolve_config(config=None):
    """The config with every default filled in, as a dict."""
    if config is None:
        config = {}
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(_resolve_config(config))


__all__ = [
    "ConfigError",
    "FormatError",
    "ShapeError",
    "closed_form_flops",
    "count_flops",
    "forward",
    "generate_pyramid",
    "oracle_gap",
    "read_scat",
    "resolve_config",
    "run_cli",
    "selftest",
    "splitmix64_next",
    "write_scat",
]
