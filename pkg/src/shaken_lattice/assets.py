"""Bundled optimized stage protocols.

The package ships one GA-optimized protocol per interferometer stage
(generated with the CLI; seeds and achieved fitness are recorded in each
file's meta). They make sequence-level functionality usable out of the box
and give the test suite fixed, verifiable inputs. Regeneration commands are
in the README.
"""
from __future__ import annotations

from importlib import resources

from .protocols import ShakingProtocol, load_protocol

STAGES = ("split", "propagate", "reflect", "recombine", "recombine_reciprocal")


def asset_path(stage: str):
    if stage not in STAGES:
        raise KeyError(f"unknown stage asset {stage!r}; available: {STAGES}")
    return resources.files(__package__) / "assets" / "protocols" / f"{stage}.json"


def load_stage_protocol(stage: str) -> ShakingProtocol:
    """Load a bundled optimized protocol by stage name."""
    path = asset_path(stage)
    if not path.is_file():
        raise FileNotFoundError(
            f"bundled protocol {stage!r} missing; regenerate with the CLI (see README)")
    return load_protocol(path)


def michelson_protocols() -> dict:
    """The four stage protocols of the default Michelson build."""
    return {stage: load_stage_protocol(stage)
            for stage in ("split", "propagate", "reflect", "recombine")}


def reciprocal_protocols() -> dict:
    """Stage protocols for the reciprocal build (its own recombination)."""
    out = {stage: load_stage_protocol(stage) for stage in ("split", "propagate", "reflect")}
    out["recombine"] = load_stage_protocol("recombine_reciprocal")
    return out
