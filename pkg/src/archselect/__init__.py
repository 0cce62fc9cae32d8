"""Turn natural-language requirements into architectural choices.

Pipeline: classify requirements and extract quality attributes (QAs) and
conditions with an LLM, group requirements by equivalent and concurrent
conditions, then pick one choice per decision group maximising the
QA-weighted satisfaction score.
"""

from importlib.resources import files

from .domain import (
    DEFAULT_CATALOG,
    DEFAULT_CONDITION,
    AirSet,
    AsrRecord,
    Choice,
    ConcurrentConditionGroup,
    ConditionGroup,
    DecisionGroup,
    DecisionMatrix,
    DecisionSet,
    QaWeights,
    QualityAttribute,
    Requirement,
    ScoreReport,
    qa_from_label,
    validate_matrix,
)
from .estimator import ArchitectureSelector
from .optimizer import OptimizationProblem, choice_value, score, solve, trace

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a bundled data file (UMS fixtures, matrices)."""
    return files(__name__) / "data" / name


__all__ = [
    "DEFAULT_CATALOG",
    "DEFAULT_CONDITION",
    "AirSet",
    "ArchitectureSelector",
    "AsrRecord",
    "Choice",
    "ConcurrentConditionGroup",
    "ConditionGroup",
    "DecisionGroup",
    "DecisionMatrix",
    "DecisionSet",
    "OptimizationProblem",
    "QaWeights",
    "QualityAttribute",
    "Requirement",
    "ScoreReport",
    "choice_value",
    "data_path",
    "qa_from_label",
    "score",
    "solve",
    "trace",
    "validate_matrix",
]
