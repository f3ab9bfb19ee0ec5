"""Experiment records: published-run parameters as JSON files.

A record captures everything needed to rerun the analysis for one reported
experiment: observed rates, source fractions, nominal intensities, and the
intensity-uncertainty sweep. One record (peng2007_50km) ships with the
package as the reference dataset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .exceptions import RecordError
from .bound_engine import ObservedRates

_REQUIRED = ("name", "duration_s", "repetition_hz", "S", "S_prime", "S0",
             "qber_signal", "qber_decoy", "fractions", "mu", "mu_prime",
             "delta_m")
_FRACTION_KEYS = ("signal", "decoy", "vacuum")

# Source fractions in published tables are rounded; accept small closure
# error and renormalize when converting to probabilities.
_FRACTION_SUM_TOL = 1e-4


@dataclass(frozen=True)
class ExperimentRecord:
    """Parameters of one reported decoy-state run."""

    name: str
    duration_s: float
    repetition_hz: float
    S: float
    S_prime: float
    S0: float
    qber_signal: float
    qber_decoy: float
    fraction_signal: float
    fraction_decoy: float
    fraction_vacuum: float
    mu: float
    mu_prime: float
    delta_m: tuple[float, ...]

    def __post_init__(self):
        if self.duration_s <= 0 or self.repetition_hz <= 0:
            raise RecordError("duration_s and repetition_hz must be positive")
        for field in ("S", "S_prime", "S0"):
            v = getattr(self, field)
            if not 0.0 <= v <= 1.0:
                raise RecordError(f"{field} must be a rate in [0, 1], got {v}")
        for field in ("qber_signal", "qber_decoy"):
            v = getattr(self, field)
            if not 0.0 <= v <= 0.5:
                raise RecordError(f"{field} must lie in [0, 0.5], got {v}")
        fsum = self.fraction_signal + self.fraction_decoy + self.fraction_vacuum
        if min(self.fraction_signal, self.fraction_decoy,
               self.fraction_vacuum) < 0.0:
            raise RecordError("source fractions must be nonnegative")
        if abs(fsum - 1.0) > _FRACTION_SUM_TOL:
            raise RecordError(
                f"source fractions sum to {fsum:.6f}, expected 1 within "
                f"{_FRACTION_SUM_TOL}")
        if not 0.0 < self.mu < self.mu_prime:
            raise RecordError("need 0 < mu < mu_prime")
        if any(d < 0.0 for d in self.delta_m):
            raise RecordError("delta_m entries must be nonnegative")
        if any(d >= 1.0 for d in self.delta_m):
            raise RecordError("delta_m entries must stay below 1")

    @property
    def M(self) -> int:
        """Total pulses sent: duration times repetition rate."""
        return round(self.duration_s * self.repetition_hz)

    def to_observed_rates(self) -> ObservedRates:
        fsum = (self.fraction_signal + self.fraction_decoy
                + self.fraction_vacuum)
        return ObservedRates(
            S=self.S, S_prime=self.S_prime, S0=self.S0,
            p0=self.fraction_vacuum / fsum,
            p=self.fraction_decoy / fsum,
            p_prime=self.fraction_signal / fsum,
            M=self.M,
            qber_signal=self.qber_signal,
            qber_decoy=self.qber_decoy,
        )

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "duration_s": self.duration_s,
            "repetition_hz": self.repetition_hz,
            "S": self.S,
            "S_prime": self.S_prime,
            "S0": self.S0,
            "qber_signal": self.qber_signal,
            "qber_decoy": self.qber_decoy,
            "fractions": {"signal": self.fraction_signal,
                          "decoy": self.fraction_decoy,
                          "vacuum": self.fraction_vacuum},
            "mu": self.mu,
            "mu_prime": self.mu_prime,
            "delta_m": list(self.delta_m),
        }, indent=2)


def record_from_dict(data: dict) -> ExperimentRecord:
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise RecordError(f"record is missing fields: {', '.join(missing)}")
    fr = data["fractions"]
    if not isinstance(fr, dict):
        raise RecordError("'fractions' must be an object with "
                          "signal/decoy/vacuum keys")
    fr_missing = [k for k in _FRACTION_KEYS if k not in fr]
    if fr_missing:
        raise RecordError(f"fractions missing keys: {', '.join(fr_missing)}")
    try:
        return ExperimentRecord(
            name=str(data["name"]),
            duration_s=float(data["duration_s"]),
            repetition_hz=float(data["repetition_hz"]),
            S=float(data["S"]),
            S_prime=float(data["S_prime"]),
            S0=float(data["S0"]),
            qber_signal=float(data["qber_signal"]),
            qber_decoy=float(data["qber_decoy"]),
            fraction_signal=float(fr["signal"]),
            fraction_decoy=float(fr["decoy"]),
            fraction_vacuum=float(fr["vacuum"]),
            mu=float(data["mu"]),
            mu_prime=float(data["mu_prime"]),
            delta_m=tuple(float(d) for d in data["delta_m"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, RecordError):
            raise
        raise RecordError(f"malformed record field: {exc}") from exc


def load_record(path: str | Path) -> ExperimentRecord:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RecordError(f"cannot read record file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"record file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise RecordError(f"record file {path} must contain a JSON object")
    return record_from_dict(data)


def bundled_record_path(name: str = "peng2007_50km") -> Path:
    """Filesystem path of a JSON file shipped inside the package.

    Besides experiment records this also serves the bundled simulator
    parameter sets (for example "twoblock_demo")."""
    candidate = resources.files("decoysafe").joinpath("data", f"{name}.json")
    with resources.as_file(candidate) as p:
        if not p.exists():
            raise RecordError(f"no bundled record named {name!r}")
        return Path(p)
