# Copyright (c) 2025 sepdl developers

"""sepdl package shim."""

__version__ = "0.3.0"

from .certificate import CertConfig, CertificateReport, Verdict, apply_escape, check
from .descent import DescentConfig, descend
from .objective import Model, objective
from .oracle import explicit_factorization, global_optimum
from .solver import SolverConfig, solve
from .synth import SyntheticSpec, generate

__all__ = [
    "CertConfig",
    "CertificateReport",
    "DescentConfig",
    "Model",
    "SolverConfig",
    "SyntheticSpec",
    "Verdict",
    "apply_escape",
    "check",
    "descend",
    "explicit_factorization",
    "generate",
    "global_optimum",
    "objective",
    "solve",
]
