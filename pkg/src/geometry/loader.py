from pathlib import Path as FilePath
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator

from src.common.custom_exceptions import ScenarioFileError
from src.common.logger import setup_logger
from src.geometry.schemas import Path
from src.geometry.service import build_path

logger = setup_logger(__name__)


class PathSet(BaseModel):
    """
    Named paths as (x, y) pairs in metres.

    File format (JSON)::

        {"paths": {"ego": [[-10.0, -50.0], [-10.0, -40.0], ...],
                   "main": [[-150.0, 0.0], ...]}}

    Floats are written in shortest round-trip form, so dump -> load returns
    bit-identical coordinates.
    """
    paths: Dict[str, List[Tuple[float, float]]] = Field(..., description="Path name -> polyline")

    @field_validator("paths")
    def validate_paths(cls, v: Dict[str, List[Tuple[float, float]]]):
        if not v:
            raise ValueError("Error: at least one path is required.")
        for name, points in v.items():
            if len(points) < 3:
                raise ValueError(f"Error: path '{name}' needs at least 3 points.")
        return v

    def build(self) -> Dict[str, Path]:
        return {name: build_path(points, name=name) for name, points in self.paths.items()}


def load_path_set(file_path: str | FilePath) -> PathSet:
    return load_model(PathSet, file_path)


def dump_path_set(path_set: BaseModel, file_path: str | FilePath) -> None:
    FilePath(file_path).write_text(path_set.model_dump_json(indent=2), encoding="utf-8")


def load_model(model: type, file_path: str | FilePath):
    file_path = FilePath(file_path)
    if not file_path.exists():
        raise ScenarioFileError(f"file not found: {file_path}")
    try:
        return model.model_validate_json(file_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        logger.error(f"Scenario file rejected: {file_path}", extra={"error_type": "ValidationError"})
        raise ScenarioFileError(f"{file_path}: {e}") from e
