"""Shared test plumbing: scenario loading, deep merge, engine driving."""

from __future__ import annotations

import copy
from pathlib import Path

import flexbench
from flexbench.orchestrator import Engine
from flexbench.scenario import load_scenario, validate_scenario

SCENARIO_DIR = Path(flexbench.__file__).parent / "scenarios"


def deep_merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def cfg_from(doc: dict | None = None, patch: dict | None = None,
             default_id: str = "test") -> dict:
    merged = deep_merge(doc or {}, patch or {})
    return validate_scenario(merged, base_dir=str(SCENARIO_DIR),
                             default_id=default_id)


def run_doc(doc: dict | None = None, patch: dict | None = None,
            default_id: str = "test"):
    """Build, run and return (RunLog, Engine) for an inline scenario tree."""
    engine = Engine(cfg_from(doc, patch, default_id), base_dir=str(SCENARIO_DIR))
    log = engine.run()
    return log, engine


def scenario_doc(name: str) -> dict:
    return load_scenario(str(SCENARIO_DIR / f"{name}.json"))


def run_scenario(name: str, patch: dict | None = None):
    """Run one of the packaged scenarios, optionally patched."""
    doc = scenario_doc(name)
    if patch:
        doc = deep_merge(doc, patch)
    cfg = validate_scenario(doc, base_dir=str(SCENARIO_DIR), default_id=name)
    engine = Engine(cfg, base_dir=str(SCENARIO_DIR))
    return engine.run(), engine
