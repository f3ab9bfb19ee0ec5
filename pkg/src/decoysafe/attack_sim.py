"""Pulse-level Monte Carlo of the three-source protocol under adversarial channels.

Each pulse slot i selects a source (vacuum / decoy / signal), draws a photon
number from that source's true per-pulse distribution (Poisson at the
intensity the error pattern assigns to slot i; the vacuum source always
emits zero photons), and the channel decides whether the receiver clicks.
Selecting the source first and emitting once is equivalent to preparing all
three pulses and keeping one, since nothing downstream sees the discarded
alternatives.

Detection model: each photon survives independently with the channel's
transmittance eta, and the detector clicks when at least one photon arrives
or a dark count fires, so P(click | k) = 1 - (1 - eta)^k (1 - dark). The
block attack gives strengthened (even) blocks a doubled transmittance
2*eta_e and blocks weakened (odd) blocks entirely; dark counts still fire in
blocked slots.

Determinism: pulses are processed in fixed chunks of 2**20 slots, each chunk
driven by its own counter-based stream keyed (seed, chunk index). Chunks are
independent work units, so any partition of chunks over workers merges to
the identical tally, and a run is fully reproducible from (seed, parameters).

The tally carries, besides counts by (source, photon number), the
ground-truth weighted sums over detected single-photon and vacuum-emission
slots that the verification oracle needs. The weight of a detected k-photon
slot is 1/(sum over sources of selection probability times that source's
k-photon coefficient at slot i); multiplying by one source's share gives the
posterior probability the pulse came from that source.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ParameterError, PreconditionError
from .source_model import ErrorPattern

CHUNK = 1 << 20
KMAX = 32
_TRACE_LIMIT = 4_000_000

SOURCE_NAMES = ("vacuum", "decoy", "signal")

ChannelCallback = Callable[[np.ndarray, np.ndarray, ErrorPattern], np.ndarray]


@dataclass(frozen=True)
class ChannelModel:
    """Detection channel. kind is one of:

    "linear": per-photon transmittance eta, identical for every slot.
    "block_attack": transmittance 2*eta_e on even (strengthened) blocks of
        the two-block pattern, 0 on odd (weakened) blocks. Only meaningful
        when simulated against a two-block pattern.
    "custom": vectorized callback (slot indices, photon numbers, pattern) ->
        click probabilities in [0, 1]. The callback's output is the complete
        click probability; fold dark counts in yourself (the field here is
        then informational only).

    dark_count_prob applies per observation window for the built-in kinds.
    """

    kind: str
    eta: float = 0.0
    eta_e: float = 0.0
    dark_count_prob: float = 0.0
    callback: ChannelCallback | None = None
    predicted_s1_ratio: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "block_attack", "custom"):
            raise ParameterError(f"unknown channel kind {self.kind!r}")
        if not (0.0 <= self.dark_count_prob <= 1.0):
            raise ParameterError("dark_count_prob must be in [0, 1]")
        if self.kind == "linear" and not (0.0 <= self.eta <= 1.0):
            raise ParameterError(f"eta must be in [0, 1], got {self.eta!r}")
        if self.kind == "block_attack" and not (0.0 <= 2.0 * self.eta_e <= 1.0):
            raise ParameterError(
                f"eta_e must satisfy 0 <= 2*eta_e <= 1, got {self.eta_e!r}")
        if self.kind == "custom" and self.callback is None:
            raise ParameterError("custom channel needs a callback")


def linear_channel(eta: float, dark_count_prob: float = 0.0) -> ChannelModel:
    return ChannelModel(kind="linear", eta=eta, dark_count_prob=dark_count_prob)


def two_block_s1_ratio(mu: float, mu_prime: float, f: float) -> float:
    """Predicted decoy/signal single-photon counting-rate ratio under the attack.

    Within each source, single photons emitted in strengthened blocks are the
    only detected ones, so the single-photon counting rate is proportional to
    the strengthened share of single-photon emissions. The transmittance
    scale cancels in the ratio, which exceeds 1 because the weaker source
    concentrates more of its single-photon emissions in strengthened blocks.
    """
    if mu <= 0.0 or mu_prime <= 0.0:
        raise ParameterError("intensities must be positive")
    if not (0.0 < f < 1.0):
        raise ParameterError(f"strength fraction must be in (0, 1), got {f!r}")

    def strengthened_share(m: float) -> float:
        up = (1.0 + f) * m * math.exp(-(1.0 + f) * m)
        down = (1.0 - f) * m * math.exp(-(1.0 - f) * m)
        return up / (up + down)

    return strengthened_share(mu) / strengthened_share(mu_prime)


def two_block_attack_channel(
    mu: float, mu_prime: float, f: float, eta_e: float,
    dark_count_prob: float = 0.0,
) -> ChannelModel:
    """Eavesdropper channel paired with a two-block pattern of strength f.

    Carries the analytic single-photon ratio prediction for the given
    intensities so simulation summaries can print measured vs predicted.
    """
    if not (0.0 <= 2.0 * eta_e <= 1.0):
        raise ParameterError(f"eta_e must satisfy 0 <= 2*eta_e <= 1, got {eta_e!r}")
    return ChannelModel(kind="block_attack", eta_e=eta_e,
                        dark_count_prob=dark_count_prob,
                        predicted_s1_ratio=two_block_s1_ratio(mu, mu_prime, f))


def per_block_random_channel(
    block_length: int,
    n_blocks: int,
    seed: int,
    eta_low: float = 0.01,
    eta_high: float = 0.5,
    dark_count_prob: float = 0.0,
) -> ChannelModel:
    """Channel whose transmittance is redrawn per block (cycled past n_blocks)."""
    if block_length < 1 or n_blocks < 1:
        raise ParameterError("block_length and n_blocks must be >= 1")
    if not (0.0 <= eta_low <= eta_high <= 1.0):
        raise ParameterError("need 0 <= eta_low <= eta_high <= 1")
    rng = np.random.Generator(np.random.Philox(key=[seed, 0x9E3779B9]))
    etas = rng.uniform(eta_low, eta_high, size=n_blocks)

    def callback(i: np.ndarray, k: np.ndarray, pattern: ErrorPattern) -> np.ndarray:
        eta = etas[(i // block_length) % n_blocks]
        return 1.0 - (1.0 - eta) ** k * (1.0 - dark_count_prob)

    return ChannelModel(kind="custom", callback=callback,
                        dark_count_prob=dark_count_prob)


@dataclass(frozen=True)
class SimTally:
    """Ground-truth counts of one simulated run.

    counts[s][k] and emitted[s][k] index source s (0 vacuum, 1 decoy,
    2 signal) and emitted photon number k (clipped at KMAX). The c1_* sums
    run over detected single-photon slots: the slot weight, its square, and
    the decoy/signal posterior shares. The c0_* sums run over detected
    vacuum-emission slots.
    """

    M: int
    seed: int
    p0: float
    p: float
    p_prime: float
    counts: np.ndarray
    emitted: np.ndarray
    c1_d_sum: float
    c1_d_sq_sum: float
    c1_decoy_sum: float
    c1_signal_sum: float
    c0_d_sum: float
    c0_vacuum_sum: float
    c0_decoy_sum: float
    c0_signal_sum: float

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        emitted = np.asarray(self.emitted, dtype=np.int64)
        counts.setflags(write=False)
        emitted.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "emitted", emitted)
        if counts.shape != emitted.shape or counts.shape[0] != 3:
            raise ParameterError("tally arrays must be shaped (3, kmax+1)")
        if (counts > emitted).any():
            raise ParameterError("counts cannot exceed emissions")
        if emitted[0, 1:].any():
            raise ParameterError("vacuum source cannot emit photons")
        if int(emitted.sum()) != self.M:
            raise ParameterError("emissions must account for every pulse")

    @property
    def n_vacuum(self) -> int:
        return int(self.counts[0].sum())

    @property
    def n_decoy(self) -> int:
        return int(self.counts[1].sum())

    @property
    def n_signal(self) -> int:
        return int(self.counts[2].sum())

    @property
    def detected_total(self) -> int:
        return int(self.counts.sum())

    def class_sizes(self) -> np.ndarray:
        """|c_k| for each photon number k: detected pulses that carried k photons."""
        return self.counts.sum(axis=0)

    def to_json(self) -> str:
        doc = {
            "M": self.M,
            "seed": self.seed,
            "p0": self.p0,
            "p": self.p,
            "p_prime": self.p_prime,
            "counts": {name: self.counts[i].tolist()
                       for i, name in enumerate(SOURCE_NAMES)},
            "emitted": {name: self.emitted[i].tolist()
                        for i, name in enumerate(SOURCE_NAMES)},
            "c1_sums": {"d": self.c1_d_sum, "d_sq": self.c1_d_sq_sum,
                        "decoy": self.c1_decoy_sum, "signal": self.c1_signal_sum},
            "c0_sums": {"d": self.c0_d_sum, "vacuum": self.c0_vacuum_sum,
                        "decoy": self.c0_decoy_sum, "signal": self.c0_signal_sum},
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SimTally":
        doc = json.loads(text)
        try:
            counts = np.array([doc["counts"][n] for n in SOURCE_NAMES], dtype=np.int64)
            emitted = np.array([doc["emitted"][n] for n in SOURCE_NAMES], dtype=np.int64)
            c1, c0 = doc["c1_sums"], doc["c0_sums"]
            return cls(M=int(doc["M"]), seed=int(doc["seed"]),
                       p0=float(doc["p0"]), p=float(doc["p"]),
                       p_prime=float(doc["p_prime"]),
                       counts=counts, emitted=emitted,
                       c1_d_sum=float(c1["d"]), c1_d_sq_sum=float(c1["d_sq"]),
                       c1_decoy_sum=float(c1["decoy"]),
                       c1_signal_sum=float(c1["signal"]),
                       c0_d_sum=float(c0["d"]), c0_vacuum_sum=float(c0["vacuum"]),
                       c0_decoy_sum=float(c0["decoy"]),
                       c0_signal_sum=float(c0["signal"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed tally document: {exc}") from exc


@dataclass
class SimTrace:
    """Per-pulse arrays for small runs (independent re-derivation in tests)."""

    source: np.ndarray
    photons: np.ndarray
    clicked: np.ndarray


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, chunk_index]))


def _click_probability(channel: ChannelModel, i: np.ndarray, k: np.ndarray,
                       pattern: ErrorPattern) -> np.ndarray:
    dark = channel.dark_count_prob
    if channel.kind == "linear":
        return 1.0 - (1.0 - channel.eta) ** k * (1.0 - dark)
    if channel.kind == "block_attack":
        if pattern.kind != "two_block":
            raise PreconditionError(
                "block-attack channel requires a two-block pattern")
        even = ((i // pattern.block_length) % 2) == 0
        eta = np.where(even, 2.0 * channel.eta_e, 0.0)
        return 1.0 - (1.0 - eta) ** k * (1.0 - dark)
    probs = np.asarray(channel.callback(i, k, pattern), dtype=float)
    if probs.shape != k.shape:
        raise ParameterError("custom channel callback returned wrong shape")
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ParameterError("custom channel produced probability outside [0, 1]")
    return probs


def _simulate_chunk(chunk_index: int, start: int, n: int, p0: float, p: float,
                    p_prime: float, pattern: ErrorPattern, channel: ChannelModel,
                    seed: int, kmax: int):
    """One independent work unit; merging is plain summation."""
    rng = _chunk_rng(seed, chunk_index)
    i = np.arange(start, start + n, dtype=np.int64)
    mu_i, mup_i = pattern.intensity_arrays(start, start + n)

    src = np.searchsorted(np.array([p0, p0 + p]), rng.random(n), side="right")
    k = np.zeros(n, dtype=np.int64)
    decoy_sel = src == 1
    signal_sel = src == 2
    k[decoy_sel] = rng.poisson(mu_i[decoy_sel])
    k[signal_sel] = rng.poisson(mup_i[signal_sel])
    np.clip(k, 0, kmax, out=k)

    click = rng.random(n) < _click_probability(channel, i, k, pattern)

    counts = np.zeros((3, kmax + 1), dtype=np.int64)
    emitted = np.zeros((3, kmax + 1), dtype=np.int64)
    for s in range(3):
        sel = src == s
        emitted[s] = np.bincount(k[sel], minlength=kmax + 1)
        counts[s] = np.bincount(k[sel & click], minlength=kmax + 1)

    sums = np.zeros(8)
    c1 = click & (k == 1)
    if c1.any():
        m1, mp1 = mu_i[c1], mup_i[c1]
        a1 = m1 * np.exp(-m1)
        a1p = mp1 * np.exp(-mp1)
        d = 1.0 / (p * a1 + p_prime * a1p)
        sums[0] = d.sum()
        sums[1] = (d * d).sum()
        sums[2] = (p * a1 * d).sum()
        sums[3] = (p_prime * a1p * d).sum()
    c0 = click & (k == 0)
    if c0.any():
        a0 = np.exp(-mu_i[c0])
        a0p = np.exp(-mup_i[c0])
        d = 1.0 / (p0 + p * a0 + p_prime * a0p)
        sums[4] = d.sum()
        sums[5] = (p0 * d).sum()
        sums[6] = (p * a0 * d).sum()
        sums[7] = (p_prime * a0p * d).sum()
    return counts, emitted, sums, src, k, click


def simulate(
    M: int,
    p0: float,
    p: float,
    p_prime: float,
    pattern: ErrorPattern,
    channel: ChannelModel,
    seed: int,
    kmax: int = KMAX,
    return_trace: bool = False,
) -> SimTally | tuple[SimTally, SimTrace]:
    """Run M pulses; deterministic for a given (seed, parameters).

    return_trace additionally yields the per-pulse arrays for small M, so
    tests can re-derive every tally field independently.
    """
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M!r}")
    for name, v in (("p0", p0), ("p", p), ("p_prime", p_prime)):
        if not (0.0 <= v <= 1.0):
            raise ParameterError(f"{name} must be in [0, 1], got {v!r}")
    if abs(p0 + p + p_prime - 1.0) > 1e-9:
        raise ParameterError("source probabilities must sum to 1")
    if pattern.length is not None and pattern.length < M:
        raise ParameterError(
            f"pattern provides {pattern.length} slots, need {M}")
    if kmax < 2:
        raise ParameterError("kmax must be at least 2")
    if return_trace and M > _TRACE_LIMIT:
        raise ParameterError(f"traces limited to M <= {_TRACE_LIMIT}")

    counts = np.zeros((3, kmax + 1), dtype=np.int64)
    emitted = np.zeros((3, kmax + 1), dtype=np.int64)
    sums = np.zeros(8)
    trace_parts = []
    n_chunks = (M + CHUNK - 1) // CHUNK
    for c in range(n_chunks):
        start = c * CHUNK
        n = min(CHUNK, M - start)
        ck, ek, sk, src, k, click = _simulate_chunk(
            c, start, n, p0, p, p_prime, pattern, channel, seed, kmax)
        counts += ck
        emitted += ek
        sums += sk
        if return_trace:
            trace_parts.append((src, k, click))

    tally = SimTally(
        M=M, seed=seed, p0=p0, p=p, p_prime=p_prime,
        counts=counts, emitted=emitted,
        c1_d_sum=float(sums[0]), c1_d_sq_sum=float(sums[1]),
        c1_decoy_sum=float(sums[2]), c1_signal_sum=float(sums[3]),
        c0_d_sum=float(sums[4]), c0_vacuum_sum=float(sums[5]),
        c0_decoy_sum=float(sums[6]), c0_signal_sum=float(sums[7]),
    )
    if not return_trace:
        return tally
    trace = SimTrace(
        source=np.concatenate([t[0] for t in trace_parts]),
        photons=np.concatenate([t[1] for t in trace_parts]),
        clicked=np.concatenate([t[2] for t in trace_parts]),
    )
    return tally, trace


def empirical_subclass_rates(tally: SimTally) -> tuple[np.ndarray, np.ndarray]:
    """Per-photon-number counting rates (decoy, signal); NaN where nothing was emitted."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(tally.emitted[1] > 0,
                     tally.counts[1] / tally.emitted[1], np.nan)
        sp = np.where(tally.emitted[2] > 0,
                      tally.counts[2] / tally.emitted[2], np.nan)
    return s, sp


def s1_ratio_estimate(tally: SimTally) -> tuple[float, float]:
    """Measured decoy/signal single-photon rate ratio and its binomial sigma."""
    n1d, e1d = int(tally.counts[1, 1]), int(tally.emitted[1, 1])
    n1s, e1s = int(tally.counts[2, 1]), int(tally.emitted[2, 1])
    if n1d == 0 or n1s == 0:
        return math.nan, math.nan
    s = n1d / e1d
    sp = n1s / e1s
    ratio = s / sp
    rel_var = (1.0 - s) / n1d + (1.0 - sp) / n1s
    return ratio, ratio * math.sqrt(rel_var)


def source_posterior(
    k: int,
    mu_i: float,
    mup_i: float,
    p0: float,
    p: float,
    p_prime: float,
) -> tuple[float, float, float]:
    """P(vacuum / decoy / signal selected | k photons emitted at a slot with
    the given true intensities). Only the vacuum source can emit k = 0 along
    with both coherent sources; for k >= 1 the vacuum share is zero.
    """
    if k < 0:
        raise ParameterError(f"photon number must be nonnegative, got {k!r}")
    if mu_i <= 0.0 or mup_i <= 0.0:
        raise ParameterError("intensities must be positive")
    a = math.exp(-mu_i) * mu_i**k / math.factorial(k)
    ap = math.exp(-mup_i) * mup_i**k / math.factorial(k)
    w_vac = p0 if k == 0 else 0.0
    w_dec = p * a
    w_sig = p_prime * ap
    total = w_vac + w_dec + w_sig
    if total <= 0.0:
        raise ParameterError("no source can emit this photon number")
    return w_vac / total, w_dec / total, w_sig / total


def detected_index_sets(photon_numbers: np.ndarray,
                        clicked: np.ndarray) -> dict[int, np.ndarray]:
    """c_k sets: 0-based indices of detected pulses that carried k photons."""
    photon_numbers = np.asarray(photon_numbers)
    clicked = np.asarray(clicked, dtype=bool)
    if photon_numbers.shape != clicked.shape:
        raise ParameterError("photon_numbers and clicked must align")
    out: dict[int, np.ndarray] = {}
    detected = np.nonzero(clicked)[0]
    for k in np.unique(photon_numbers[detected]):
        out[int(k)] = detected[photon_numbers[detected] == k]
    return out
