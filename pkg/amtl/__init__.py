"""
AMTL - Adversarial multi-task text correction.

A shared encoder feeds a masked language model (generator) and a scoring
language model (discriminator); a mask-fill-rescore search and a span policy
network correct variable-length errors. Models are reached through Pluggy
hooks and every domain type is a Pydantic v2 model.
"""

from amtl.config import (
    CorrectorConfig,
    EvalConfig,
    ModelConfig,
    PolicyConfig,
    RunConfig,
    TrainConfig,
    load_config,
)
from amtl.correction import Corrector
from amtl.models import (
    CandidateDistribution,
    CandidateEdit,
    ErrorRecord,
    EvalReport,
    PhaseSchedule,
    PolicyOutput,
    ScoreVector,
    SearchTrace,
    SpanBounds,
    TokenSeq,
)
from amtl.network import AMTLModel, build_model
from amtl.plugin_manager import PluginManager
from amtl.vocab import Vocab

__version__ = "0.1.0"
__all__ = [
    "TokenSeq",
    "ErrorRecord",
    "CandidateDistribution",
    "ScoreVector",
    "PolicyOutput",
    "SpanBounds",
    "CandidateEdit",
    "SearchTrace",
    "EvalReport",
    "PhaseSchedule",
    "ModelConfig",
    "TrainConfig",
    "CorrectorConfig",
    "PolicyConfig",
    "EvalConfig",
    "RunConfig",
    "load_config",
    "Vocab",
    "AMTLModel",
    "build_model",
    "Corrector",
    "PluginManager",
]
