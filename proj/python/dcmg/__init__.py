"""DC microgrid boost-converter simulator.

Configs are plain dicts following the JSON schema of the command-line tool,
or names of built-in presets.
"""

import json

from . import _dcmg
from ._dcmg import ConfigError, duty_reference, preset_names

__all__ = [
    "ConfigError",
    "config",
    "csv",
    "duty_reference",
    "equilibrium",
    "preset_names",
    "run",
    "verify",
]


def _text(cfg):
    if isinstance(cfg, str):
        return _dcmg.load_json(cfg)
    return json.dumps(cfg)


def config(name_or_path):
    """Config dict for a preset name or a JSON file path."""
    return json.loads(_dcmg.load_json(name_or_path))


def equilibrium(cfg):
    return _dcmg.equilibrium(_text(cfg))


def run(cfg, dt=None, duration=None):
    """Simulate; returns a dict with 'columns', 'data' (samples x columns),
    'completed', 'message' and 'events'."""
    return _dcmg.run(_text(cfg), dt, duration)


def csv(cfg, dt=None, duration=None):
    return _dcmg.csv(_text(cfg), dt, duration)


def verify(cfg, dt=None, duration=None):
    """List of {'name', 'passed', 'detail'} invariant checks."""
    return _dcmg.verify(_text(cfg), dt, duration)
