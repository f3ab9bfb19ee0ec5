"""Verified lower bounds on single-photon contributions.

Two pipelines, one error-free and one error-tolerant, both driven by the
same observed data: the counting rates of a vacuum source, a weak decoy
source, and a stronger signal source.

Error-free pipeline (exact coefficients): solves the two-source linear
system for the single-photon counting rate, using the vacuum source's rate
for the zero-photon term, and keeps only the multiphoton-pessimistic
solution, which is a safe lower bound whenever the ratio ordering condition
between the sources holds.

Error-tolerant pipeline (interval coefficients): the same elimination
carried out with each coefficient pushed to its worst-case end. The central
object is D1, a weighted count of detected single-photon pulses in which
pulse i carries weight 1/(p*a_1i + p'*a'_1i); every single-photon count and
fraction bound is a projection of D1. The vacuum contribution is substituted
at its worst case (decoy vacuum counts at their upper interval end, signal
vacuum counts at their lower end); that direction is hard-coded because any
other choice would break the guarantee.

All arithmetic is plain IEEE double precision. Inputs are O(1) magnitudes
and every denominator is guarded at 1e-12 relative to its natural scale, so
no interval arithmetic package is needed. Negative results are clamped to
zero and flagged vacuous rather than raised: heavily attacked data
legitimately yields "no provable single-photon contribution".
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import ParameterError, PreconditionError
from .source_model import (
    BoundedDistribution,
    PhotonDistribution,
    check_condition_14,
    check_condition_53,
)

_PROB_SUM_TOL = 1e-9
_DENOM_GUARD = 1e-12


@dataclass(frozen=True)
class ObservedRates:
    """Directly measured quantities of one experiment.

    S, S_prime, S0: counts per emitted pulse for the decoy, signal, and
    vacuum source classes. p0, p, p_prime: the probabilities with which the
    transmitter selects each source. M: total pulses sent. QBERs are carried
    along for key-rate evaluation and play no role in the count bounds.
    """

    S: float
    S_prime: float
    S0: float
    p0: float
    p: float
    p_prime: float
    M: float
    qber_signal: float = 0.0
    qber_decoy: float = 0.0

    def __post_init__(self):
        for name in ("S", "S_prime", "S0", "qber_signal", "qber_decoy"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1], got {v!r}")
        for name in ("p0", "p", "p_prime"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1], got {v!r}")
        total = self.p0 + self.p + self.p_prime
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ParameterError(
                f"source probabilities must sum to 1 within {_PROB_SUM_TOL}, got {total!r}")
        if not (self.M > 0):
            raise ParameterError(f"M must be positive, got {self.M!r}")

    @property
    def N0(self) -> float:
        return self.S0 * self.p0 * self.M

    @property
    def N_d(self) -> float:
        return self.S * self.p * self.M

    @property
    def N_s(self) -> float:
        return self.S_prime * self.p_prime * self.M

    @classmethod
    def from_counts(cls, n0: float, n_d: float, n_s: float,
                    p0: float, p: float, p_prime: float, M: float,
                    qber_signal: float = 0.0, qber_decoy: float = 0.0) -> "ObservedRates":
        """Build from raw class counts; rates are counts over expected class size."""
        if M <= 0:
            raise ParameterError(f"M must be positive, got {M!r}")
        s0 = n0 / (p0 * M) if p0 > 0 else 0.0
        if p <= 0 or p_prime <= 0:
            raise ParameterError("decoy and signal probabilities must be positive")
        return cls(S=n_d / (p * M), S_prime=n_s / (p_prime * M), S0=s0,
                   p0=p0, p=p, p_prime=p_prime, M=M,
                   qber_signal=qber_signal, qber_decoy=qber_decoy)


@dataclass(frozen=True)
class ErrorFreeResult:
    """Error-free single-photon counting rate bound."""

    s1: float        # clamped at 0
    s1_raw: float
    vacuous: bool


def errorfree_s1_lower(
    rates: ObservedRates,
    decoy: PhotonDistribution,
    signal: PhotonDistribution,
) -> ErrorFreeResult:
    """Lower bound on the single-photon counting rate with exact coefficients.

    Requires the exact ratio ordering condition; the vacuum source's rate
    stands in for the zero-photon counting rate of both sources.
    """
    report = check_condition_14(decoy, signal)
    if not report.holds:
        raise PreconditionError(
            f"source ratio ordering violated at k={report.first_violating_k}")
    a = decoy.coeffs
    ap = signal.coeffs
    denom = ap[2] * a[1] - ap[1] * a[2]
    if denom <= _DENOM_GUARD * ap[2] * a[1]:
        raise PreconditionError(
            "elimination denominator vanishes: sources too similar")
    raw = (ap[2] * (rates.S - a[0] * rates.S0)
           - a[2] * (rates.S_prime - ap[0] * rates.S0)) / denom
    return ErrorFreeResult(s1=max(raw, 0.0), s1_raw=raw, vacuous=raw < 0.0)


def vacuum_count_bounds(
    rates: ObservedRates,
    a0_bounds: tuple[float, float],
    a0p_bounds: tuple[float, float],
    s0_interval: tuple[float, float] | None = None,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Intervals for the vacuum-emission counts of the decoy and signal sources.

    A source emitting vacuum clicks at the vacuum source's counting rate, so
    with p*M decoy pulses the decoy's vacuum-emission counts lie in
    [a_0^L * p * S0 * M, a_0^U * p * S0 * M], and analogously for the signal
    source. Needs an operating vacuum source (p0 > 0); without one, pass an
    externally justified s0_interval (for example [0, dark-count ceiling]).
    """
    a0l, a0u = a0_bounds
    ap0l, ap0u = a0p_bounds
    if not (0.0 <= a0l <= a0u <= 1.0 and 0.0 <= ap0l <= ap0u <= 1.0):
        raise ParameterError("vacuum coefficient bounds must be ordered in [0, 1]")
    if s0_interval is None:
        if rates.p0 <= 0.0:
            raise PreconditionError(
                "no vacuum source (p0 = 0) and no external s0_interval supplied")
        s0_lo = s0_hi = rates.S0
    else:
        s0_lo, s0_hi = s0_interval
        if not (0.0 <= s0_lo <= s0_hi <= 1.0):
            raise ParameterError(f"s0_interval must be ordered in [0, 1], got {s0_interval!r}")
    n0d = (a0l * rates.p * s0_lo * rates.M, a0u * rates.p * s0_hi * rates.M)
    n0s = (ap0l * rates.p_prime * s0_lo * rates.M,
           ap0u * rates.p_prime * s0_hi * rates.M)
    return n0d, n0s


def _worst_case_pieces(rates, decoy, signal, s0_interval):
    """Shared setup: condition check, denominator, worst-case vacuum counts."""
    report = check_condition_53(decoy, signal)
    if not report.holds:
        raise PreconditionError(
            f"interval ratio ordering violated at k={report.first_violating_k}")
    a1u = decoy.upper[1]
    a2u = decoy.upper[2]
    ap1l = signal.lower[1]
    ap2l = signal.lower[2]
    denom = a1u * ap2l - ap1l * a2u
    if denom <= _DENOM_GUARD * a1u * ap2l:
        raise PreconditionError(
            "worst-case elimination denominator vanishes: windows too wide or "
            "sources too similar")
    n0d, n0s = vacuum_count_bounds(
        rates, (decoy.lower[0], decoy.upper[0]),
        (signal.lower[0], signal.upper[0]), s0_interval=s0_interval)
    return a1u, a2u, ap1l, ap2l, denom, n0d, n0s


@dataclass(frozen=True)
class D1Result:
    d1: float        # clamped at 0
    d1_raw: float
    vacuous: bool
    n0d_interval: tuple[float, float]
    n0s_interval: tuple[float, float]


def d1_lower(
    rates: ObservedRates,
    decoy: BoundedDistribution,
    signal: BoundedDistribution,
    s0_interval: tuple[float, float] | None = None,
) -> D1Result:
    """Worst-case lower bound on the weighted single-photon count sum D1.

    D1 sums 1/(p*a_1i + p'*a'_1i) over detected single-photon pulses; every
    single-photon count bound is a fixed multiple of it. The decoy vacuum
    count enters at its upper interval end and the signal vacuum count at its
    lower end, the only direction that preserves the guarantee.
    """
    a1u, a2u, ap1l, ap2l, denom, n0d, n0s = _worst_case_pieces(
        rates, decoy, signal, s0_interval)
    n0d_hi = n0d[1]
    n0s_lo = n0s[0]
    raw = (ap2l * rates.N_d / rates.p
           - a2u * rates.N_s / rates.p_prime
           - ap2l * n0d_hi / rates.p
           + a2u * n0s_lo / rates.p_prime) / denom
    return D1Result(d1=max(raw, 0.0), d1_raw=raw, vacuous=raw < 0.0,
                    n0d_interval=n0d, n0s_interval=n0s)


@dataclass(frozen=True)
class SingletBound:
    """Verified single-photon bounds plus the vacuum-count intervals.

    All *_lower values are clamped at 0 and delta fractions additionally at
    1; raw fields keep the unclamped arithmetic for reduction identities and
    audits. sigma_* fields estimate the one-standard-deviation statistical
    uncertainty each bound inherits from count noise in the observed data
    (variance of a count n taken as n + 1), for use by safety checking.
    """

    D1_lower: float
    n1s_lower: float
    n1d_lower: float
    delta1_signal: float
    delta1_decoy: float
    D1_raw: float
    delta1_signal_raw: float
    delta1_decoy_raw: float
    vacuous: bool
    clamped_above: bool
    n0d_interval: tuple[float, float]
    n0s_interval: tuple[float, float]
    sigma_D1: float
    sigma_delta1_signal: float
    sigma_delta1_decoy: float


def delta1_bounds(
    rates: ObservedRates,
    decoy: BoundedDistribution,
    signal: BoundedDistribution,
    s0_interval: tuple[float, float] | None = None,
) -> SingletBound:
    """Worst-case single-photon fractions and counts for both sources.

    One D1 computation, two projections: the signal fraction uses
    a'_1^L * D1 normalized by the signal counts, the decoy fraction uses
    a_1^L * D1 normalized by the decoy counts. Counts are p' * a'_1^L * D1
    and p * a_1^L * D1.
    """
    a1u, a2u, ap1l, ap2l, denom, n0d, n0s = _worst_case_pieces(
        rates, decoy, signal, s0_interval)
    raw_d1 = (ap2l * rates.N_d / rates.p
              - a2u * rates.N_s / rates.p_prime
              - ap2l * n0d[1] / rates.p
              + a2u * n0s[0] / rates.p_prime) / denom
    d1res = D1Result(d1=max(raw_d1, 0.0), d1_raw=raw_d1, vacuous=raw_d1 < 0.0,
                     n0d_interval=n0d, n0s_interval=n0s)
    a1l = decoy.lower[1]

    n1s = rates.p_prime * ap1l * d1res.d1
    n1d = rates.p * a1l * d1res.d1
    ds_raw = rates.p_prime * ap1l * d1res.d1_raw / rates.N_s if rates.N_s > 0 else 0.0
    dd_raw = rates.p * a1l * d1res.d1_raw / rates.N_d if rates.N_d > 0 else 0.0

    clamped_above = ds_raw > 1.0 or dd_raw > 1.0
    ds = min(max(ds_raw, 0.0), 1.0)
    dd = min(max(dd_raw, 0.0), 1.0)

    # statistical uncertainty of the bound itself, linear propagation with
    # var(count) ~ count + 1
    dD_dNd = ap2l / (rates.p * denom)
    dD_dNs = a2u / (rates.p_prime * denom)
    if rates.p0 > 0 and s0_interval is None:
        # vacuum terms ride on N0 through S0*M = N0/p0
        dD_dN0 = (-ap2l * decoy.upper[0] + a2u * signal.lower[0]) / (rates.p0 * denom)
    else:
        dD_dN0 = 0.0
    var_d1 = (dD_dNd**2 * (rates.N_d + 1.0)
              + dD_dNs**2 * (rates.N_s + 1.0)
              + dD_dN0**2 * (rates.N0 + 1.0))
    sigma_d1 = math.sqrt(var_d1)
    if rates.N_s > 0:
        sigma_ds = (rates.p_prime * ap1l / rates.N_s) * sigma_d1 \
            + ds * math.sqrt(rates.N_s) / rates.N_s
    else:
        sigma_ds = 0.0
    if rates.N_d > 0:
        sigma_dd = (rates.p * a1l / rates.N_d) * sigma_d1 \
            + dd * math.sqrt(rates.N_d) / rates.N_d
    else:
        sigma_dd = 0.0

    return SingletBound(
        D1_lower=d1res.d1,
        n1s_lower=n1s,
        n1d_lower=n1d,
        delta1_signal=ds,
        delta1_decoy=dd,
        D1_raw=d1res.d1_raw,
        delta1_signal_raw=ds_raw,
        delta1_decoy_raw=dd_raw,
        vacuous=d1res.vacuous or ds_raw < 0.0 or dd_raw < 0.0,
        clamped_above=clamped_above,
        n0d_interval=d1res.n0d_interval,
        n0s_interval=d1res.n0s_interval,
        sigma_D1=sigma_d1,
        sigma_delta1_signal=sigma_ds,
        sigma_delta1_decoy=sigma_dd,
    )
