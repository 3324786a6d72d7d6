"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class SpojLabError(Exception):
    """Base class for all errors raised by spojlab."""


# stats
class StatsError(SpojLabError, ValueError):
    pass


class TooFewPoints(StatsError):
    pass


class DegenerateX(StatsError):
    pass


class ConstantInput(StatsError):
    pass


class LengthMismatch(StatsError):
    pass


class SampleTooSmall(StatsError):
    pass


class ZeroVariance(StatsError):
    pass


class ZeroBaseline(StatsError):
    pass


class EmptyInput(StatsError):
    pass


# ingest
class ProfileError(SpojLabError, ValueError):
    pass


class MissingField(ProfileError):
    def __init__(self, field: str):
        super().__init__(f"profile does not map mandatory field {field!r}")
        self.field = field


class BadVerdictMap(ProfileError):
    def __init__(self, raw: str):
        super().__init__(f"raw verdict value {raw!r} is mapped more than once")
        self.raw = raw


class ValidationFailed(SpojLabError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"dataset failed validation with {len(report.violations)} violation(s)")


# models
class UnknownUser(SpojLabError, KeyError):
    pass


class TooFewPositive(StatsError):
    pass


# simulate
class ConfigInvalid(SpojLabError, ValueError):
    pass


# app
class EmptySeries(SpojLabError, ValueError):
    pass


class OutputUnwritable(SpojLabError, OSError):
    pass
