"""Exceptions shared across the decomposition, the oracle and the CLI."""

from __future__ import annotations


class BaseInfeasibleError(RuntimeError):
    """Even the nominal realisation (all scales zero) needs slack."""

    def __init__(self, eta: float):
        super().__init__(f"nominal operation infeasible (eta = {eta:.6g})")
        self.eta = eta


class IterationLimitError(RuntimeError):
    def __init__(self, iterations: int, report=None):
        super().__init__(f"decomposition did not converge in {iterations} iterations")
        self.iterations = iterations
        self.report = report
