"""Sparse Gaussian and Student-t models on MFCF clique forests."""

from __future__ import annotations

from .data import ResamplePlan, compute_log_returns, read_prices_csv, resample
from .dependence import (
    DependenceMatrix,
    ObservationMatrix,
    kendall_correlation,
    pearson_correlation,
    pearson_covariance,
)
from .forest import CliqueForest, Separator, validate
from .gaussian import GaussianModel, assemble_precision, fit_gaussian, gaussian_log_likelihood
from .mfcf import BuildConfig, build_mfcf
from .models import load_model, model_log_likelihood, model_to_document
from .student import EmConfig, StudentTModel, estimate_nu_tail, fit_student_em, student_log_likelihood
from .synthetic import GeneratorSpec, sample

__all__ = [
    "BuildConfig",
    "CliqueForest",
    "DependenceMatrix",
    "EmConfig",
    "GaussianModel",
    "GeneratorSpec",
    "ObservationMatrix",
    "ResamplePlan",
    "Separator",
    "StudentTModel",
    "assemble_precision",
    "build_mfcf",
    "compute_log_returns",
    "estimate_nu_tail",
    "fit_gaussian",
    "fit_student_em",
    "gaussian_log_likelihood",
    "kendall_correlation",
    "load_model",
    "model_log_likelihood",
    "model_to_document",
    "pearson_correlation",
    "pearson_covariance",
    "read_prices_csv",
    "resample",
    "sample",
    "student_log_likelihood",
    "validate",
]
