"""Photon-number source models.

A diagonal source is described by its photon-number coefficients a_k, the
probability of emitting exactly k photons. This module provides exact
distributions (PhotonDistribution), interval-bounded distributions whose
coefficients are only known to lie in [a_k^L, a_k^U] (BoundedDistribution),
intensity windows for coherent sources (CoherentWindow), and per-pulse error
patterns that assign the true intensities an adversary may know
(ErrorPattern).

Two ordering conditions between a weaker "decoy" source and a stronger
"signal" source are checked here. The exact-source condition requires the
coefficient ratios a'_k/a_k to be nondecreasing from k=1 through k=2 and to
stay at or above the k=2 ratio afterwards. The interval version requires the
same chain for the worst-case ratios a'_k^L/a_k^U. Both are evaluated by
cross-multiplication so zero coefficients never divide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import ParameterError, PreconditionError

_SUM_TOL = 1e-12


def default_cutoff(mu_high: float) -> int:
    """Truncation order for Poisson photon-number sums.

    Mass beyond the cutoff lands on the multiphoton side of every bound,
    which only loosens lower bounds and never breaks them.
    """
    return max(25, math.ceil(10.0 * mu_high))


@dataclass(frozen=True)
class PhotonDistribution:
    """Exact diagonal source: coeffs[k] = probability of a k-photon pulse."""

    coeffs: tuple[float, ...]
    tail_mass: float = 0.0

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ParameterError("need at least the vacuum coefficient")
        if any(c < 0.0 for c in self.coeffs):
            raise ParameterError("photon-number coefficients must be nonnegative")
        if self.tail_mass < 0.0:
            raise ParameterError("tail mass must be nonnegative")
        total = sum(self.coeffs) + self.tail_mass
        if not (1.0 - _SUM_TOL <= total <= 1.0 + _SUM_TOL):
            raise ParameterError(
                f"coefficients plus tail mass must sum to 1, got {total!r}")

    @property
    def cutoff(self) -> int:
        return len(self.coeffs) - 1


def poisson_distribution(mu: float, cutoff: int | None = None) -> PhotonDistribution:
    """Poisson photon-number statistics of a phase-randomized coherent pulse.

    coeffs[k] = e^{-mu} mu^k / k! for k = 0..cutoff; the remaining Poisson
    mass is reported as tail_mass.
    """
    if not (mu > 0.0):
        raise ParameterError(f"intensity must be positive, got {mu!r}")
    if cutoff is None:
        cutoff = default_cutoff(mu)
    if cutoff < 2:
        raise ParameterError(f"cutoff must be at least 2, got {cutoff!r}")
    coeffs = [math.exp(-mu)]
    for k in range(1, cutoff + 1):
        coeffs.append(coeffs[-1] * mu / k)
    tail = max(0.0, 1.0 - math.fsum(coeffs))
    return PhotonDistribution(coeffs=tuple(coeffs), tail_mass=tail)


@dataclass(frozen=True)
class BoundedDistribution:
    """Interval-bounded diagonal source: a_k known only within [lower[k], upper[k]]."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ParameterError("lower and upper must have the same length")
        if len(self.lower) < 3:
            raise ParameterError("need coefficients through k=2")
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ParameterError(
                    f"coefficient interval for k={k} invalid: [{lo!r}, {hi!r}]")

    @property
    def cutoff(self) -> int:
        return len(self.lower) - 1

    @classmethod
    def from_exact(cls, dist: PhotonDistribution) -> "BoundedDistribution":
        """Zero-width intervals pinned at an exact distribution."""
        return cls(lower=dist.coeffs, upper=dist.coeffs)


@dataclass(frozen=True)
class CoherentWindow:
    """Intensity interval [mu_low, mu_high] for a coherent source."""

    mu_low: float
    mu_high: float

    def __post_init__(self):
        if not (self.mu_low > 0.0):
            raise ParameterError(f"mu_low must be positive, got {self.mu_low!r}")
        if self.mu_high < self.mu_low:
            raise ParameterError("mu_high must be at least mu_low")

    @classmethod
    def from_nominal(cls, mu: float, delta_m: float) -> "CoherentWindow":
        """Window mu*(1 - delta_m) .. mu*(1 + delta_m)."""
        if not (0.0 <= delta_m < 1.0):
            raise ParameterError(f"delta_m must be in [0, 1), got {delta_m!r}")
        return cls(mu * (1.0 - delta_m), mu * (1.0 + delta_m))

    @property
    def width(self) -> float:
        return self.mu_high - self.mu_low


def _poisson_pmf(mu: float, k: int) -> float:
    return math.exp(-mu) * mu**k / math.factorial(k)


def _coeff_window(window: CoherentWindow, k: int) -> tuple[float, float]:
    # x^k e^{-x} rises until x = k then falls, so the extremes over an
    # intensity interval sit at the endpoints or at the interior peak.
    lo_val = _poisson_pmf(window.mu_low, k)
    hi_val = _poisson_pmf(window.mu_high, k)
    low = min(lo_val, hi_val)
    if window.mu_low <= k <= window.mu_high:
        high = _poisson_pmf(float(k), k)
    else:
        high = max(lo_val, hi_val)
    return low, high


def coherent_bounds(
    decoy: CoherentWindow,
    signal: CoherentWindow,
    cutoff: int | None = None,
) -> tuple[BoundedDistribution, BoundedDistribution]:
    """Coefficient intervals implied by intensity windows, one per source.

    Uses explicit minimization/maximization over each window, so it is exact
    for every k and every window, including windows that cross the peak of
    x^k e^{-x} (where plugging in endpoints alone would be wrong).
    """
    if cutoff is None:
        cutoff = default_cutoff(signal.mu_high)
    if cutoff < 2:
        raise ParameterError(f"cutoff must be at least 2, got {cutoff!r}")
    out = []
    for window in (decoy, signal):
        lows, highs = [], []
        for k in range(cutoff + 1):
            lo, hi = _coeff_window(window, k)
            lows.append(lo)
            highs.append(hi)
        out.append(BoundedDistribution(lower=tuple(lows), upper=tuple(highs)))
    return out[0], out[1]


class ConditionReport(NamedTuple):
    holds: bool
    first_violating_k: int | None


def check_condition_53(
    decoy: BoundedDistribution,
    signal: BoundedDistribution,
    k_max: int | None = None,
) -> ConditionReport:
    """Worst-case ratio ordering between the bounded sources.

    Requires a'_2^L/a_2^U >= a'_1^L/a_1^U (reported as k=2 on failure) and
    a'_k^L/a_k^U >= a'_2^L/a_2^U for every k up to k_max (reported as the
    failing k). Evaluated by cross-multiplication: a zero a_k^U with a
    positive a'_k^L counts as an infinite ratio, and a k where both sides
    are zero constrains nothing.
    """
    if k_max is None:
        k_max = min(decoy.cutoff, signal.cutoff)
    if k_max < 2 or k_max > min(decoy.cutoff, signal.cutoff):
        raise ParameterError(f"k_max must be in [2, cutoff], got {k_max!r}")
    a_u, ap_l = decoy.upper, signal.lower
    if ap_l[2] * a_u[1] < ap_l[1] * a_u[2]:
        return ConditionReport(False, 2)
    for k in range(3, k_max + 1):
        if ap_l[k] * a_u[2] < ap_l[2] * a_u[k]:
            return ConditionReport(False, k)
    return ConditionReport(True, None)


def check_condition_14(
    decoy: PhotonDistribution,
    signal: PhotonDistribution,
    k_max: int | None = None,
) -> ConditionReport:
    """Exact-source analogue of check_condition_53."""
    if k_max is None:
        k_max = min(decoy.cutoff, signal.cutoff)
    if k_max < 2 or k_max > min(decoy.cutoff, signal.cutoff):
        raise ParameterError(f"k_max must be in [2, cutoff], got {k_max!r}")
    a, ap = decoy.coeffs, signal.coeffs
    if ap[2] * a[1] < ap[1] * a[2]:
        return ConditionReport(False, 2)
    for k in range(3, k_max + 1):
        if ap[k] * a[2] < ap[2] * a[k]:
            return ConditionReport(False, k)
    return ConditionReport(True, None)


# ---------------------------------------------------------------------------
# Per-pulse error patterns

PatternCallback = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ErrorPattern:
    """True per-pulse intensities for the (decoy, signal) source pair.

    kind "exact": every pulse uses the nominal intensities.
    kind "two_block": pulses come in fixed-length blocks; even-numbered
        blocks run at (1 + strength_fraction) times nominal, odd blocks at
        (1 - strength_fraction), the same sign applied to both sources.
    kind "per_pulse": an explicit list of (decoy, signal) intensity pairs.
    kind "custom": a vectorized callback mapping an int64 index array to a
        pair of float arrays (decoy intensities, signal intensities).

    Construct through exact_pattern / two_block_pattern / per_pulse_pattern /
    custom_pattern rather than directly.
    """

    kind: str
    mu: float = 0.0
    mu_prime: float = 0.0
    strength_fraction: float = 0.0
    block_length: int = 0
    pairs: tuple[tuple[float, float], ...] = ()
    callback: PatternCallback | None = None

    def intensity_arrays(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized per-pulse intensities for slots start..stop-1."""
        if start < 0 or stop < start:
            raise ParameterError("invalid slot range")
        n = stop - start
        if self.kind == "exact":
            return (np.full(n, self.mu), np.full(n, self.mu_prime))
        if self.kind == "two_block":
            i = np.arange(start, stop, dtype=np.int64)
            even = ((i // self.block_length) % 2) == 0
            scale = np.where(even, 1.0 + self.strength_fraction,
                             1.0 - self.strength_fraction)
            return self.mu * scale, self.mu_prime * scale
        if self.kind == "per_pulse":
            if stop > len(self.pairs):
                raise ParameterError(
                    f"slot {stop - 1} beyond pattern length {len(self.pairs)}")
            arr = np.asarray(self.pairs[start:stop], dtype=float)
            return arr[:, 0].copy(), arr[:, 1].copy()
        if self.kind == "custom":
            i = np.arange(start, stop, dtype=np.int64)
            mu_arr, mup_arr = self.callback(i)
            mu_arr = np.asarray(mu_arr, dtype=float)
            mup_arr = np.asarray(mup_arr, dtype=float)
            if mu_arr.shape != (n,) or mup_arr.shape != (n,):
                raise ParameterError("custom pattern callback returned wrong shape")
            if (mu_arr <= 0).any() or (mup_arr <= 0).any():
                raise ParameterError("custom pattern produced nonpositive intensity")
            return mu_arr, mup_arr
        raise ParameterError(f"unknown pattern kind {self.kind!r}")

    @property
    def length(self) -> int | None:
        """Intrinsic length, or None for unbounded kinds."""
        return len(self.pairs) if self.kind == "per_pulse" else None


def exact_pattern(mu: float, mu_prime: float) -> ErrorPattern:
    if mu <= 0.0 or mu_prime <= 0.0:
        raise ParameterError("intensities must be positive")
    return ErrorPattern(kind="exact", mu=mu, mu_prime=mu_prime)


def two_block_pattern(
    mu: float, mu_prime: float, strength_fraction: float, block_length: int
) -> ErrorPattern:
    if mu <= 0.0 or mu_prime <= 0.0:
        raise ParameterError("intensities must be positive")
    if not (0.0 < strength_fraction < 1.0):
        raise ParameterError(
            f"strength_fraction must be in (0, 1), got {strength_fraction!r}")
    if block_length < 1:
        raise ParameterError(f"block_length must be >= 1, got {block_length!r}")
    return ErrorPattern(kind="two_block", mu=mu, mu_prime=mu_prime,
                        strength_fraction=strength_fraction,
                        block_length=block_length)


def per_pulse_pattern(pairs: Sequence[tuple[float, float]]) -> ErrorPattern:
    pairs = tuple((float(a), float(b)) for a, b in pairs)
    if not pairs:
        raise ParameterError("per-pulse pattern needs at least one pair")
    if any(a <= 0.0 or b <= 0.0 for a, b in pairs):
        raise ParameterError("intensities must be positive")
    return ErrorPattern(kind="per_pulse", pairs=pairs)


def custom_pattern(callback: PatternCallback) -> ErrorPattern:
    return ErrorPattern(kind="custom", callback=callback)


def pattern_intensity(pattern: ErrorPattern, i: int) -> tuple[float, float]:
    """True (decoy, signal) intensity pair at pulse slot i."""
    if i < 0:
        raise ParameterError(f"pulse index must be nonnegative, got {i!r}")
    if pattern.length is not None and i >= pattern.length:
        raise ParameterError(f"pulse index {i} beyond pattern length {pattern.length}")
    mu_arr, mup_arr = pattern.intensity_arrays(i, i + 1)
    return float(mu_arr[0]), float(mup_arr[0])


def pattern_extremes(pattern: ErrorPattern, m: int) -> tuple[float, float, float, float]:
    """(decoy min, decoy max, signal min, signal max) over slots 0..m-1."""
    if pattern.kind == "exact":
        return pattern.mu, pattern.mu, pattern.mu_prime, pattern.mu_prime
    if pattern.kind == "two_block":
        f = pattern.strength_fraction
        lo, hi = 1.0 - f, 1.0 + f
        if m <= pattern.block_length:
            lo = hi  # only the first (strengthened) block is ever visited
        return pattern.mu * lo, pattern.mu * hi, pattern.mu_prime * lo, pattern.mu_prime * hi
    # explicit kinds: evaluate everything
    mu_arr, mup_arr = pattern.intensity_arrays(0, m)
    return (float(mu_arr.min()), float(mu_arr.max()),
            float(mup_arr.min()), float(mup_arr.max()))


def require_pattern_in_windows(
    pattern: ErrorPattern,
    decoy: CoherentWindow,
    signal: CoherentWindow,
    m: int,
) -> None:
    """Hard check that claimed windows truthfully contain the pattern."""
    d_lo, d_hi, s_lo, s_hi = pattern_extremes(pattern, m)
    if d_lo < decoy.mu_low - 1e-15 or d_hi > decoy.mu_high + 1e-15:
        raise PreconditionError(
            f"pattern decoy intensities [{d_lo}, {d_hi}] leave window "
            f"[{decoy.mu_low}, {decoy.mu_high}]")
    if s_lo < signal.mu_low - 1e-15 or s_hi > signal.mu_high + 1e-15:
        raise PreconditionError(
            f"pattern signal intensities [{s_lo}, {s_hi}] leave window "
            f"[{signal.mu_low}, {signal.mu_high}]")


# ---------------------------------------------------------------------------
# JSON round trip for source descriptions

def windows_to_json(decoy: CoherentWindow, signal: CoherentWindow,
                    cutoff: int | None = None) -> dict:
    doc = {
        "decoy": {"mu_low": decoy.mu_low, "mu_high": decoy.mu_high},
        "signal": {"mu_low": signal.mu_low, "mu_high": signal.mu_high},
    }
    if cutoff is not None:
        doc["cutoff"] = cutoff
    return doc


def bounded_pair_from_json(doc: dict) -> tuple[BoundedDistribution, BoundedDistribution]:
    """Parse a source-pair document.

    Either intensity windows
        {"decoy": {"mu_low": .., "mu_high": ..}, "signal": {..}, "cutoff": J}
    or explicit coefficient interval arrays
        {"decoy": {"lower": [..], "upper": [..]}, "signal": {..}}.
    """
    try:
        d, s = doc["decoy"], doc["signal"]
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"source document missing decoy/signal: {exc}") from exc
    if "mu_low" in d:
        decoy_w = CoherentWindow(float(d["mu_low"]), float(d["mu_high"]))
        signal_w = CoherentWindow(float(s["mu_low"]), float(s["mu_high"]))
        cutoff = int(doc["cutoff"]) if "cutoff" in doc else None
        return coherent_bounds(decoy_w, signal_w, cutoff=cutoff)
    try:
        return (
            BoundedDistribution(tuple(float(x) for x in d["lower"]),
                                tuple(float(x) for x in d["upper"])),
            BoundedDistribution(tuple(float(x) for x in s["lower"]),
                                tuple(float(x) for x in s["upper"])),
        )
    except KeyError as exc:
        raise ParameterError(f"source document missing field: {exc}") from exc
