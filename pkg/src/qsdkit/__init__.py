"""Quasi-stationary structure of absorbed Markov chains on reducible spaces."""

__version__ = "0.1.0"

from .chain import AbsorbedChain, ValidationReport, iterate, step_function, step_measure, validate
from .classes import ClassGraph, find_classes, polynomial_parameter, stratify
from .dsl import (build_truncation, format_rules, lyapunov_check, parse_expression,
                  parse_rules, qsd_stability)
from .errors import (ChainError, ConvergenceError, EvaluationError, HypothesisError,
                     OperatorFitError, QsdError, RuleSyntaxError)
from .fileio import format_chain, parse_chain, read_chain, write_chain
from .operators import compose_case1, compose_case2, compose_case3, fit_H
from .oracle import (check_limit, check_invariants, conditional_law, estimate_j,
                     estimate_theta, monte_carlo_conditional, trace)
from .spectral import ClassSpectrum, perron, spectral_radius
from .synthesis import (QsdCertificate, TwoBlockDecomposition, compose_case_A1,
                        compose_case_A2, compose_case_A3, qsd_simplex, synthesize)

__all__ = [name for name in dir() if not name.startswith("_")]
