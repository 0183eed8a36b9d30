"""Exception hierarchy.

Validation problems (bad arguments, malformed files) derive from
``ValidationError``; numerical breakdowns derive from ``NumericalFailure``.
The CLI maps the two families to exit codes 2 and 3.
"""


class QlspbError(Exception):
    pass


class ValidationError(QlspbError, ValueError):
    pass


class DomainError(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class NumericalFailure(QlspbError, ArithmeticError):
    pass


class SingularMatrixError(NumericalFailure):
    def __init__(self, sigma_min, msg=None):
        self.sigma_min = sigma_min
        super().__init__(msg or f"matrix is numerically singular (sigma_min={sigma_min:.3e})")


class EvaluationError(NumericalFailure):
    def __init__(self, node, value):
        self.node = node
        self.value = value
        super().__init__(f"integrand not finite at node {node!r}: {value!r}")


class GapViolationError(NumericalFailure):
    pass


class DegenerateSuccessError(NumericalFailure):
    def __init__(self, p_succ):
        self.p_succ = p_succ
        super().__init__(f"success probability {p_succ:.3e} is below 1e-14")


class FilterDivergenceError(NumericalFailure):
    pass


class InfeasibleTargetError(NumericalFailure):
    pass


class BandInfeasibleError(NumericalFailure):
    def __init__(self, band, kappas):
        self.band = band
        self.kappas = list(kappas)
        super().__init__(f"no instance landed in kappa band {band} after {len(self.kappas)} attempts; "
                         f"histogram: {_histogram(self.kappas)}")


class DivergentCostError(NumericalFailure):
    pass


class NoOpFilterError(ValidationError):
    pass


class EmptyComparisonError(ValidationError):
    pass


def _histogram(values, edges=(1, 10, 20, 30, 40, 50, 100, 1000, float("inf"))):
    counts = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        counts[f"[{lo},{hi})"] = sum(lo <= v < hi for v in values)
    return counts
