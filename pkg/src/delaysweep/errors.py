"""Exception hierarchy shared by all delaysweep modules."""


class SweepError(Exception):
    """Base class for all delaysweep errors."""


class InfeasiblePolyhedron(SweepError):
    """The half-space intersection is empty."""


class NumericalFailure(SweepError):
    """An exact routine exhausted its search without a certificate."""


class PointNotInSet(SweepError):
    """A normal-cone query was made at a point outside the set."""


class TimeOutOfRange(SweepError):
    """Evaluation time lies outside the function's domain."""


class DomainMismatch(SweepError):
    """Two signals do not share a common time domain."""


class UnknownCatalogEntry(SweepError):
    """Perturbation or cost catalog tag is not registered."""


class DimensionMismatch(SweepError):
    """Array shapes are inconsistent with the problem dimensions."""


class InfeasibleStart(SweepError):
    """Initial state violates the set constraint beyond tolerance."""


class LevelTooLarge(SweepError):
    """Requested mesh level exceeds the memory guard."""


class EnumerationTooLarge(SweepError):
    """Brute-force control grid exceeds the enumeration guard."""


class NoFeasibleStart(SweepError):
    """Even the sampled reference pair violates the discrete constraints."""


class MissingForcingRecord(SweepError):
    """Velocity-estimate check requires the solver's per-substep record."""


class ScenarioError(SweepError):
    """Scenario file failed to parse or validate against the schema."""


class ValidationFailure(SweepError):
    """Standing-assumption validation found a violation."""
