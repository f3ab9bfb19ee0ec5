"""Shared exception types.

ParameterError: a value is outside its documented domain (bad intensity,
probability, or malformed argument). Maps to CLI exit code 2 when raised
while parsing inputs.

PreconditionError: inputs are well formed but violate a mathematical
precondition of a bound (ordering condition between the two sources,
nonpositive denominator, missing vacuum source). Maps to CLI exit code 3.

RecordError: an experiment record file is missing fields or fails
validation. Maps to CLI exit code 2.
"""
from __future__ import annotations


class ParameterError(ValueError):
    pass


class PreconditionError(RuntimeError):
    pass


class RecordError(ValueError):
    pass
