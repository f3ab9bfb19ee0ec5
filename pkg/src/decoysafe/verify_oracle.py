"""Ground-truth extraction and safety checking for the analytic bounds.

The simulator knows which source actually fired at every slot, so it can
tally the true single-photon contributions that the analytic pipeline only
bounds. This module turns those tallies into GroundTruth records, compares
every lower bound against its true value with an explicit statistical
allowance, and drives randomized scenario suites.

Statistical allowances: the bounds consume observed counts and the truth is
itself a finite sample, so each comparison uses a pooled one-sigma estimate
(bound-side noise propagated linearly with var(count) ~ count + 1, truth-side
binomial with the same +1 floor, combined in quadrature) scaled by the
caller's sigma_allowance. The +1 floors keep the estimate conservative at
tiny counts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError, PreconditionError
from .attack_sim import (
    ChannelModel,
    SimTally,
    linear_channel,
    per_block_random_channel,
    simulate,
    two_block_attack_channel,
)
from .bound_engine import (
    ObservedRates,
    SingletBound,
    delta1_bounds,
    errorfree_s1_lower,
)
from .source_model import (
    CoherentWindow,
    ErrorPattern,
    check_condition_53,
    coherent_bounds,
    exact_pattern,
    poisson_distribution,
    require_pattern_in_windows,
    two_block_pattern,
)


@dataclass(frozen=True)
class GroundTruth:
    """True per-run quantities the bounds must stay below.

    realized_* counts come from the known source labels; posterior_* are the
    label-free attributions (posterior shares summed over detected slots),
    which agree with the realized counts in expectation.
    """

    true_D1: float
    sigma_D1: float
    realized_n1s: int
    realized_n1d: int
    posterior_n1s: float
    posterior_n1d: float
    true_delta1_signal: float
    true_delta1_decoy: float
    sigma_delta1_signal: float
    sigma_delta1_decoy: float
    realized_n0d: int
    realized_n0s: int
    posterior_n0d: float
    posterior_n0s: float
    n_decoy: int
    n_signal: int
    c1_size: int


def extract_ground_truth(
    tally: SimTally,
    pattern: ErrorPattern,
    probs: tuple[float, float, float] | None = None,
) -> GroundTruth:
    """Assemble the true single-photon quantities from a simulation tally.

    probs, when given, must match the probabilities the tally was produced
    with; pattern is used for consistency checks (a constant-intensity
    pattern forces the weighted sums into exact multiples).
    """
    if probs is not None:
        if (abs(probs[0] - tally.p0) > 1e-12
                or abs(probs[1] - tally.p) > 1e-12
                or abs(probs[2] - tally.p_prime) > 1e-12):
            raise ParameterError("probs do not match the tally's probabilities")
    c1_size = int(tally.class_sizes()[1])
    if pattern.kind == "exact":
        a1 = pattern.mu * math.exp(-pattern.mu)
        a1p = pattern.mu_prime * math.exp(-pattern.mu_prime)
        const = 1.0 / (tally.p * a1 + tally.p_prime * a1p)
        expect = c1_size * const
        if not math.isclose(tally.c1_d_sum, expect, rel_tol=1e-9, abs_tol=1e-6):
            raise ParameterError(
                "tally weighted sums inconsistent with the exact pattern; "
                "was this tally produced with a different pattern?")

    n_decoy = tally.n_decoy
    n_signal = tally.n_signal
    realized_n1s = int(tally.counts[2, 1])
    realized_n1d = int(tally.counts[1, 1])
    true_ds = realized_n1s / n_signal if n_signal > 0 else 0.0
    true_dd = realized_n1d / n_decoy if n_decoy > 0 else 0.0

    mean_d = tally.c1_d_sum / c1_size if c1_size > 0 else 0.0
    sigma_d1 = math.sqrt(tally.c1_d_sq_sum) + mean_d
    sigma_ds = ((math.sqrt(realized_n1s + 1.0) + true_ds * math.sqrt(n_signal))
                / n_signal) if n_signal > 0 else 0.0
    sigma_dd = ((math.sqrt(realized_n1d + 1.0) + true_dd * math.sqrt(n_decoy))
                / n_decoy) if n_decoy > 0 else 0.0

    return GroundTruth(
        true_D1=tally.c1_d_sum,
        sigma_D1=sigma_d1,
        realized_n1s=realized_n1s,
        realized_n1d=realized_n1d,
        posterior_n1s=tally.c1_signal_sum,
        posterior_n1d=tally.c1_decoy_sum,
        true_delta1_signal=true_ds,
        true_delta1_decoy=true_dd,
        sigma_delta1_signal=sigma_ds,
        sigma_delta1_decoy=sigma_dd,
        realized_n0d=int(tally.counts[1, 0]),
        realized_n0s=int(tally.counts[2, 0]),
        posterior_n0d=tally.c0_decoy_sum,
        posterior_n0s=tally.c0_signal_sum,
        n_decoy=n_decoy,
        n_signal=n_signal,
        c1_size=c1_size,
    )


@dataclass(frozen=True)
class SafetyCheck:
    name: str
    bound: float
    truth: float
    sigma: float
    slack: float
    passed: bool


@dataclass(frozen=True)
class SafetyReport:
    checks: tuple[SafetyCheck, ...]
    vacuum_n0d_contained: bool
    vacuum_n0s_contained: bool
    sigma_allowance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def min_slack(self) -> float:
        return min(c.slack for c in self.checks)

    def to_json_line(self, scenario_id: int | str) -> str:
        return json.dumps({
            "scenario_id": scenario_id,
            "pass": self.passed,
            "slack": self.min_slack,
            "checks": {c.name: {"bound": c.bound, "truth": c.truth,
                                "sigma": c.sigma, "slack": c.slack,
                                "pass": c.passed} for c in self.checks},
            "vacuum_contained": (self.vacuum_n0d_contained
                                 and self.vacuum_n0s_contained),
        })


def check_safety(
    bounds: SingletBound,
    truth: GroundTruth,
    sigma_allowance: float = 4.0,
    n0_sigmas: tuple[float, float] = (0.0, 0.0),
) -> SafetyReport:
    """PASS iff every lower bound sits at or below its true value plus
    sigma_allowance pooled standard deviations.

    The caller must pair bounds and truth from the same run; nothing in the
    values themselves can detect a mixup. n0_sigmas carries the endpoint
    noise of the two vacuum intervals (decoy, signal) for the containment
    side-checks, which are reported but never gate the PASS verdict.
    """
    if sigma_allowance < 0.0:
        raise ParameterError("sigma_allowance must be nonnegative")

    if bounds.D1_lower > 0:
        scale_s = bounds.n1s_lower / bounds.D1_lower
        scale_d = bounds.n1d_lower / bounds.D1_lower
    else:
        scale_s = scale_d = 0.0

    def one(name, bound, true_val, sigma_bound, sigma_truth):
        sigma = math.hypot(sigma_bound, sigma_truth)
        slack = true_val + sigma_allowance * sigma - bound
        return SafetyCheck(name=name, bound=bound, truth=true_val, sigma=sigma,
                           slack=slack, passed=bound <= true_val + sigma_allowance * sigma)

    checks = (
        one("D1", bounds.D1_lower, truth.true_D1,
            bounds.sigma_D1, truth.sigma_D1),
        one("n1s", bounds.n1s_lower, truth.realized_n1s,
            bounds.sigma_D1 * scale_s, math.sqrt(truth.realized_n1s + 1.0)),
        one("n1d", bounds.n1d_lower, truth.realized_n1d,
            bounds.sigma_D1 * scale_d, math.sqrt(truth.realized_n1d + 1.0)),
        one("delta1_signal", bounds.delta1_signal, truth.true_delta1_signal,
            bounds.sigma_delta1_signal, truth.sigma_delta1_signal),
        one("delta1_decoy", bounds.delta1_decoy, truth.true_delta1_decoy,
            bounds.sigma_delta1_decoy, truth.sigma_delta1_decoy),
    )

    def contained(realized, interval, endpoint_sigma):
        s = sigma_allowance * (math.sqrt(realized + 1.0) + endpoint_sigma)
        return interval[0] - s <= realized <= interval[1] + s

    return SafetyReport(
        checks=checks,
        vacuum_n0d_contained=contained(truth.realized_n0d, bounds.n0d_interval,
                                       n0_sigmas[0]),
        vacuum_n0s_contained=contained(truth.realized_n0s, bounds.n0s_interval,
                                       n0_sigmas[1]),
        sigma_allowance=sigma_allowance,
    )


# ---------------------------------------------------------------------------
# Randomized scenario suite

_CHANNEL_KINDS = ("linear", "block_attack", "per_block_random")


@dataclass(frozen=True)
class Scenario:
    scenario_id: int
    mu: float
    mu_prime: float
    delta_decoy: float
    delta_signal: float
    p0: float
    p: float
    p_prime: float
    pattern_kind: str          # "exact" | "two_block"
    strength_fraction: float
    block_length: int
    channel_kind: str          # one of _CHANNEL_KINDS
    eta: float
    eta_e: float
    eta_high: float            # per-block-random ceiling
    dark: float
    sim_seed: int
    channel_seed: int

    def build_pattern(self) -> ErrorPattern:
        if self.pattern_kind == "exact":
            return exact_pattern(self.mu, self.mu_prime)
        return two_block_pattern(self.mu, self.mu_prime,
                                 self.strength_fraction, self.block_length)

    def build_channel(self, m_pulses: int) -> ChannelModel:
        if self.channel_kind == "linear":
            return linear_channel(self.eta, dark_count_prob=self.dark)
        if self.channel_kind == "block_attack":
            return two_block_attack_channel(self.mu, self.mu_prime,
                                            self.strength_fraction, self.eta_e,
                                            dark_count_prob=self.dark)
        n_blocks = max(1, -(-m_pulses // self.block_length))
        return per_block_random_channel(self.block_length, n_blocks,
                                        self.channel_seed, eta_low=0.01,
                                        eta_high=self.eta_high,
                                        dark_count_prob=self.dark)

    def windows(self) -> tuple[CoherentWindow, CoherentWindow]:
        return (CoherentWindow.from_nominal(self.mu, self.delta_decoy),
                CoherentWindow.from_nominal(self.mu_prime, self.delta_signal))


def _windows_admissible(mu, mu_prime, dd, ds) -> bool:
    dw = CoherentWindow.from_nominal(mu, dd)
    sw = CoherentWindow.from_nominal(mu_prime, ds)
    bd, bs = coherent_bounds(dw, sw)
    if not check_condition_53(bd, bs).holds:
        return False
    denom = bd.upper[1] * bs.lower[2] - bs.lower[1] * bd.upper[2]
    return denom > 1e-9 * bd.upper[1] * bs.lower[2]


def random_scenario(rng: np.random.Generator, scenario_id: int,
                    max_tries: int = 1000) -> tuple[Scenario, int]:
    """Draw one admissible scenario; returns it plus the rejection count.

    Draws violating the interval ratio ordering (or with a vanishing
    worst-case denominator) are rejected and redrawn, never silently
    repaired, so the reported rejection rate stays meaningful.
    """
    rejected = 0
    for _ in range(max_tries):
        mu = float(rng.uniform(0.1, 0.4))
        mu_prime = float(rng.uniform(0.4, 0.9))
        channel_kind = _CHANNEL_KINDS[int(rng.integers(0, len(_CHANNEL_KINDS)))]
        if channel_kind == "block_attack":
            dd = float(rng.uniform(0.01, 0.10))
            ds = float(rng.uniform(0.01, 0.10))
        else:
            dd = float(rng.uniform(0.0, 0.10))
            ds = float(rng.uniform(0.0, 0.10))
        width_cap = min(dd, ds)
        if channel_kind == "block_attack":
            pattern_kind = "two_block"
            f = float(rng.uniform(0.2, 1.0)) * width_cap
            f = max(f, 1e-3 * width_cap) if width_cap > 0 else 0.0
        elif width_cap > 0 and rng.random() < 0.6:
            pattern_kind = "two_block"
            f = float(rng.uniform(0.2, 1.0)) * width_cap
        else:
            pattern_kind = "exact"
            f = 0.0
        if pattern_kind == "two_block" and f <= 0.0:
            pattern_kind = "exact"
        p0 = float(rng.uniform(0.05, 0.2))
        w = float(rng.uniform(0.35, 0.65))
        p = (1.0 - p0) * w
        p_prime = 1.0 - p0 - p
        dark = 0.0 if rng.random() < 0.2 else float(10.0 ** rng.uniform(-7, -4))
        block_length = int(rng.choice([128, 1024, 4096]))
        scen = Scenario(
            scenario_id=scenario_id,
            mu=mu, mu_prime=mu_prime,
            delta_decoy=dd, delta_signal=ds,
            p0=p0, p=p, p_prime=p_prime,
            pattern_kind=pattern_kind, strength_fraction=f,
            block_length=block_length,
            channel_kind=channel_kind,
            eta=float(10.0 ** rng.uniform(-2.3, -0.3)),
            eta_e=float(rng.uniform(0.02, 0.5)),
            eta_high=float(rng.uniform(0.05, 0.6)),
            dark=dark,
            sim_seed=int(rng.integers(0, 2**63)),
            channel_seed=int(rng.integers(0, 2**63)),
        )
        if _windows_admissible(mu, mu_prime, dd, ds):
            return scen, rejected
        rejected += 1
    raise PreconditionError(f"no admissible scenario found in {max_tries} draws")


def run_scenario(scen: Scenario, m_pulses: int,
                 sigma_allowance: float = 4.0) -> SafetyReport:
    """Simulate one scenario and check every error-tolerant bound against truth."""
    pattern = scen.build_pattern()
    channel = scen.build_channel(m_pulses)
    dw, sw = scen.windows()
    require_pattern_in_windows(pattern, dw, sw, m_pulses)

    tally = simulate(m_pulses, scen.p0, scen.p, scen.p_prime, pattern, channel,
                     seed=scen.sim_seed)
    rates = ObservedRates.from_counts(
        tally.n_vacuum, tally.n_decoy, tally.n_signal,
        scen.p0, scen.p, scen.p_prime, m_pulses)
    bd, bs = coherent_bounds(dw, sw)
    bounds = delta1_bounds(rates, bd, bs)
    truth = extract_ground_truth(tally, pattern)

    # endpoint noise of the vacuum intervals rides on the vacuum-source count
    n0_sig = math.sqrt(rates.N0 + 1.0)
    n0_sigmas = (bd.upper[0] * scen.p / scen.p0 * n0_sig,
                 bs.upper[0] * scen.p_prime / scen.p0 * n0_sig)
    return check_safety(bounds, truth, sigma_allowance=sigma_allowance,
                        n0_sigmas=n0_sigmas)


@dataclass(frozen=True)
class SuiteResult:
    reports: tuple[SafetyReport, ...]
    scenarios: tuple[Scenario, ...]
    n_rejected: int

    @property
    def n_passed(self) -> int:
        return sum(1 for r in self.reports if r.passed)

    @property
    def all_passed(self) -> bool:
        return self.n_passed == len(self.reports)

    @property
    def worst_slack(self) -> float:
        return min(r.min_slack for r in self.reports)

    @property
    def vacuum_containment_rate(self) -> float:
        hits = sum(1 for r in self.reports
                   if r.vacuum_n0d_contained and r.vacuum_n0s_contained)
        return hits / len(self.reports)

    def json_lines(self) -> str:
        return "\n".join(r.to_json_line(s.scenario_id)
                         for r, s in zip(self.reports, self.scenarios)) + "\n"


def run_scenarios(n_scenarios: int, master_seed: int, m_pulses: int,
                  sigma_allowance: float = 4.0,
                  progress=None) -> SuiteResult:
    """Randomized suite: n_scenarios independent scenarios from one master seed.

    progress, when given, is called as progress(scenario, report) after each
    scenario finishes.
    """
    if n_scenarios < 1:
        raise ParameterError("need at least one scenario")
    rng = np.random.Generator(np.random.Philox(key=[master_seed, 0xD1503]))
    reports, scens = [], []
    rejected = 0
    for sid in range(n_scenarios):
        scen, rej = random_scenario(rng, sid)
        rejected += rej
        scens.append(scen)
        report = run_scenario(scen, m_pulses, sigma_allowance)
        reports.append(report)
        if progress is not None:
            progress(scen, report)
    return SuiteResult(reports=tuple(reports), scenarios=tuple(scens),
                       n_rejected=rejected)


# ---------------------------------------------------------------------------
# Unsafe-baseline demonstration

@dataclass(frozen=True)
class UnsafeBaselineResult:
    """Outcome of the search for a run where the zero-width (error-pretending)
    pipeline overclaims the single-photon fraction while the error-tolerant
    pipeline stays safe."""

    found: bool
    f: float
    eta_e: float
    m_pulses: int
    truth: float
    sigma_pooled: float
    errorfree_claim: float
    errorfree_excess_sigmas: float
    tolerant_bound: float
    tolerant_slack_sigmas: float


def find_unsafe_baseline(
    seed: int,
    m_pulses: int = 10**7,
    mu: float = 0.2,
    mu_prime: float = 0.6,
    sigma_allowance: float = 4.0,
) -> UnsafeBaselineResult:
    """Grid search over block-attack strength and transmittance.

    Looks for a two-block run where pretending the windows have zero width
    (claiming the nominal intensities exactly) yields a single-photon
    fraction *above* the truth by more than sigma_allowance pooled sigmas,
    while the honest windows (width equal to the block strength) stay at or
    below truth plus the same allowance. Returns the first hit, or the last
    candidate examined with found=False.
    """
    p0, p, p_prime = 0.1, 0.45, 0.45
    decoy_exact = poisson_distribution(mu)
    signal_exact = poisson_distribution(mu_prime)
    last = None
    for f in (0.10, 0.08, 0.06):
        for eta_e in (0.5, 0.4, 0.3, 0.2):
            pattern = two_block_pattern(mu, mu_prime, f, 1000)
            channel = two_block_attack_channel(mu, mu_prime, f, eta_e)
            tally = simulate(m_pulses, p0, p, p_prime, pattern, channel,
                             seed=seed)
            rates = ObservedRates.from_counts(
                tally.n_vacuum, tally.n_decoy, tally.n_signal,
                p0, p, p_prime, m_pulses)
            truth = extract_ground_truth(tally, pattern)

            ef = errorfree_s1_lower(rates, decoy_exact, signal_exact)
            ap1 = signal_exact.coeffs[1]
            claim = ap1 * ef.s1_raw / rates.S_prime if rates.S_prime > 0 else 0.0
            sigma_claim = _errorfree_delta_sigma(rates, decoy_exact,
                                                 signal_exact, claim)
            pooled = math.hypot(sigma_claim, truth.sigma_delta1_signal)
            excess_sigmas = ((claim - truth.true_delta1_signal) / pooled
                             if pooled > 0 else 0.0)

            dw = CoherentWindow.from_nominal(mu, f)
            sw = CoherentWindow.from_nominal(mu_prime, f)
            bd, bs = coherent_bounds(dw, sw)
            tol = delta1_bounds(rates, bd, bs)
            pooled_tol = math.hypot(tol.sigma_delta1_signal,
                                    truth.sigma_delta1_signal)
            tol_slack_sigmas = ((truth.true_delta1_signal - tol.delta1_signal)
                                / pooled_tol if pooled_tol > 0 else math.inf)

            result = UnsafeBaselineResult(
                found=(excess_sigmas > sigma_allowance
                       and tol_slack_sigmas > -sigma_allowance),
                f=f, eta_e=eta_e, m_pulses=m_pulses,
                truth=truth.true_delta1_signal,
                sigma_pooled=pooled,
                errorfree_claim=claim,
                errorfree_excess_sigmas=excess_sigmas,
                tolerant_bound=tol.delta1_signal,
                tolerant_slack_sigmas=tol_slack_sigmas,
            )
            if result.found:
                return result
            last = result
    return last


def _errorfree_delta_sigma(rates: ObservedRates, decoy, signal,
                           claim: float) -> float:
    """Count-noise sigma of the zero-width single-photon fraction claim."""
    a = decoy.coeffs
    ap = signal.coeffs
    denom = ap[2] * a[1] - ap[1] * a[2]
    ds_dNd = ap[2] / (rates.p * rates.M * denom)
    ds_dNs = a[2] / (rates.p_prime * rates.M * denom)
    ds_dN0 = ((a[2] * ap[0] - ap[2] * a[0]) / (rates.p0 * rates.M * denom)
              if rates.p0 > 0 else 0.0)
    var_s1 = (ds_dNd**2 * (rates.N_d + 1.0)
              + ds_dNs**2 * (rates.N_s + 1.0)
              + ds_dN0**2 * (rates.N0 + 1.0))
    sigma_s1 = math.sqrt(var_s1)
    if rates.S_prime <= 0 or rates.N_s <= 0:
        return 0.0
    return (signal.coeffs[1] * sigma_s1 / rates.S_prime
            + abs(claim) / math.sqrt(rates.N_s))
