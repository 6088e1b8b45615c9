"""Graph-based vulnerability risk scoring, aggregation and patch ranking."""

from pathlib import Path

from graphrisk.model import RiskParams, SystemModel, load_system_model
from graphrisk.rank import PatchRanking, rank_patches, what_if
from graphrisk.risk import RiskContext, RiskReport, system_risk

SCENARIO_DIR = Path(__file__).parent / "scenarios"

__all__ = [
    "PatchRanking",
    "RiskContext",
    "RiskParams",
    "RiskReport",
    "SCENARIO_DIR",
    "SystemModel",
    "load_system_model",
    "rank_patches",
    "system_risk",
    "what_if",
]
