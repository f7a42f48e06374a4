class MergeSimError(Exception):
    """Base class for all simulator and planner errors."""
    pass

class PathConstructionError(MergeSimError):
    """Polyline input cannot form a path (too few or duplicate points)."""
    pass

class DomainError(MergeSimError):
    """A quantity lies outside the domain an operation is defined on."""
    pass

class ContractViolationError(MergeSimError):
    """Inputs break a precondition shared between operations."""
    pass

class InvalidInputError(MergeSimError):
    """The caller provided an unusable input."""
    pass

class EvaluationError(MergeSimError):
    """A numerical evaluation could not be carried out."""
    pass

class PlannerFailureError(MergeSimError):
    """A planner produced a non-finite command; the episode is aborted."""
    pass

class ScenarioFileError(MergeSimError):
    """The scenario file is missing or malformed."""
    pass

class OutputPathError(MergeSimError):
    """Sweep output cannot be written."""
    pass
