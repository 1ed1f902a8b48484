"""Type-dispatched (de)serialisation and scoring for fitted models."""

from __future__ import annotations

import json
from pathlib import Path

from numpy.typing import NDArray

from .dependence import ObservationMatrix
from .errors import ForestFormatError
from .gaussian import GaussianModel, gaussian_from_document, gaussian_log_likelihood, gaussian_to_document
from .student import StudentTModel, student_from_document, student_log_likelihood, student_to_document

__all__ = ["Model", "model_to_document", "model_from_document", "load_model", "save_model", "model_log_likelihood"]

Model = GaussianModel | StudentTModel


def model_to_document(model: Model) -> dict:
    if isinstance(model, GaussianModel):
        return gaussian_to_document(model)
    return student_to_document(model)


def model_from_document(doc: dict) -> Model:
    kind = doc.get("type") if isinstance(doc, dict) else None
    if kind == "gaussian":
        return gaussian_from_document(doc)
    if kind == "student_t":
        return student_from_document(doc)
    raise ForestFormatError("$.type", f"unknown model type {kind!r}")


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_document(model)) + "\n")


def load_model(path: str | Path) -> Model:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ForestFormatError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    return model_from_document(doc)


def model_log_likelihood(data: ObservationMatrix | NDArray, model: Model) -> float:
    if isinstance(model, GaussianModel):
        return gaussian_log_likelihood(data, model)
    return student_log_likelihood(data, model)
