"""
Exception hierarchy for the energy lab

Every failure a library operation can report is a subclass of KatoLabError,
so the CLI can map the whole family to exit code 2 while verify reports
capture individual failures by type.
"""

from typing import Optional


class KatoLabError(Exception):
    """Base class for all lab errors"""


class DomainError(KatoLabError, ValueError):
    """A radius or parameter lies outside the domain of an operation"""


class DerivativeUnavailable(KatoLabError):
    """A profile was asked for a derivative it does not carry"""


class ConjugatePoint(KatoLabError):
    """The warping function reached zero"""

    def __init__(self, r: float):
        self.r = r
        super().__init__(f"warping function vanishes at r = {r:.12g}")


class ExtractionUnstable(KatoLabError):
    """Tail limits from two dyadic windows disagree"""

    def __init__(self, quantity: str, first: float, second: float):
        self.quantity = quantity
        self.first = first
        self.second = second
        super().__init__(
            f"{quantity} is not converged on the tail: windows give {first:.6g} and {second:.6g}"
        )


class HypothesisViolated(KatoLabError):
    """A hypothesis of a comparison argument fails at a radius"""

    def __init__(self, hypothesis: str, r: Optional[float] = None):
        self.hypothesis = hypothesis
        self.r = r
        where = f" at r = {r:.12g}" if r is not None else ""
        super().__init__(f"hypothesis '{hypothesis}' violated{where}")


class ZeroCrossing(KatoLabError):
    """A manufactured solution vanishes inside its domain"""

    def __init__(self, r: float):
        self.r = r
        super().__init__(f"manufactured solution vanishes near r = {r:.12g}")


class UnknownFamily(KatoLabError):
    """A named metric or potential family does not exist or got bad parameters"""


class StiffnessFailure(KatoLabError):
    """The integrator's step control collapsed"""


class GridMismatch(KatoLabError):
    """Mode solutions were sampled on different grids"""


class VersionParameterMissing(KatoLabError):
    """An energy version needs a parameter that was not supplied"""


class GridTooCoarse(KatoLabError):
    """Too few grid points for the finite-difference stencil"""


class ConstraintViolated(KatoLabError):
    """A parameter constraint of a threshold theorem fails"""

    def __init__(self, constraint: str, margin: float):
        self.constraint = constraint
        self.margin = margin
        super().__init__(f"constraint {constraint} violated (margin {margin:.6g})")


class SphereNormVanishes(KatoLabError):
    """All modes vanish on the sphere used for the positivity witness"""


class WitnessNotFound(KatoLabError):
    """No m0 up to the cap makes the initial energy positive"""


class TailTooShort(KatoLabError):
    """The tail available for a fit is shorter than one decade"""


class ParseError(KatoLabError):
    """A scenario configuration file is malformed"""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")
