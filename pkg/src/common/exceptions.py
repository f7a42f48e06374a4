from pydantic import ValidationError

from src.common.logger import setup_logger
from src.common.custom_exceptions import (
    MergeSimError,
    PathConstructionError,
    DomainError,
    ContractViolationError,
    InvalidInputError,
    EvaluationError,
    PlannerFailureError,
    ScenarioFileError,
    OutputPathError,
)

logger = setup_logger(__name__)

def handle_error(error: Exception) -> str:
    """ Global Exception Translator """
    # Log structured error
    logger.error(
        f"Run failed: {error}",
        extra={"error_type": type(error).__name__},
        exc_info=not isinstance(error, (MergeSimError, ValidationError)),
    )

    if isinstance(error, ValidationError):
        return f"Input Validation Error: {error}"

    if isinstance(error, ScenarioFileError):
        return f"Error: Scenario file - {error}"

    if isinstance(error, OutputPathError):
        return f"Error: Cannot write output - {error}"

    if isinstance(error, PlannerFailureError):
        return f"Error: Planner failure, episode aborted - {error}"

    if isinstance(error, PathConstructionError):
        return f"Error: Invalid path geometry - {error}"

    if isinstance(error, (DomainError, ContractViolationError, InvalidInputError)):
        return f"Error: Invalid Input - {error}"

    if isinstance(error, EvaluationError):
        return f"Error: Numerical evaluation failed - {error}"

    if isinstance(error, MergeSimError):
        return f"Error: {error}"

    if isinstance(error, OSError):
        return f"Error: I/O failure - {error}"

    return "Error: An unexpected error occurred. See the log file for details."
