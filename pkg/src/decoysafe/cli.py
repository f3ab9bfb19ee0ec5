"""Command-line interface.

Subcommands:
  analyze   bound single-photon fractions and key rate for a recorded run
  simulate  run the pulse-level channel simulator from a params file
  verify    randomized safety suite: bounds vs simulator ground truth
  baseline  search for a run where the zero-width bound overclaims

Exit codes: 0 success, 2 malformed input, 3 violated precondition,
4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .exceptions import ParameterError, PreconditionError, RecordError
from .attack_sim import (
    linear_channel,
    per_block_random_channel,
    s1_ratio_estimate,
    simulate,
    source_posterior,
    two_block_attack_channel,
)
from .key_rate import CAPTION, CONVENTIONS, DARK_CORRECTED, format_csv, sweep_delta_m
from .plotting import render_sweep_figure
from .records import bundled_record_path, load_record
from .source_model import (
    exact_pattern,
    pattern_extremes,
    per_pulse_pattern,
    two_block_pattern,
)
from .verify_oracle import find_unsafe_baseline, run_scenarios


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.6g}"


# ---------------------------------------------------------------------------
# analyze

def _cmd_analyze(args) -> int:
    record = load_record(args.record) if args.record != "bundled" \
        else load_record(bundled_record_path())
    conventions = list(CONVENTIONS) if args.convention == "both" \
        else [args.convention]
    rates = record.to_observed_rates()
    tables = sweep_delta_m(record.mu, record.mu_prime, rates, record.delta_m,
                           conventions=conventions,
                           repetition_rate=record.repetition_hz)

    print(f"record: {record.name}  (M = {record.M} pulses, "
          f"mu = {record.mu}, mu' = {record.mu_prime})")
    violated = False
    for name, rows in tables.items():
        print(f"\nconvention: {name}")
        print(f"{'delta_M':>8} {'delta1_sig':>12} {'delta1_dec':>12} "
              f"{'t1':>10} {'R/count':>12} {'R [Hz]':>12}")
        for r in rows:
            if r.condition_violation is not None:
                print(f"{r.delta_m:8.3g}  no bound: {r.condition_violation}")
                violated = True
                continue
            marker = "  (insecure)" if r.insecure else ""
            print(f"{r.delta_m:8.3g} {r.delta1_signal:12.6g} "
                  f"{r.delta1_decoy:12.6g} {_fmt(r.t1):>10} "
                  f"{max(r.r_per_count, 0.0):12.6g} "
                  f"{max(r.r_hz, 0.0):12.6g}{marker}")

    csv_paths = []
    if args.csv:
        base = Path(args.csv)
        for name, rows in tables.items():
            path = base if len(tables) == 1 else \
                base.with_name(f"{base.stem}_{name}{base.suffix}")
            path.write_text(format_csv(rows))
            csv_paths.append(path)
            print(f"\nwrote {path}")

    want_figure = (args.figure or csv_paths) and not args.no_figure
    if want_figure:
        fig_path = Path(args.figure) if args.figure else \
            Path(args.csv).with_suffix(".png")
        render_sweep_figure(tables, fig_path, title=record.name)
        print(f"wrote {fig_path}")

    return 3 if violated else 0


# ---------------------------------------------------------------------------
# simulate

def _build_pattern(spec: dict, mu: float, mu_prime: float):
    kind = spec.get("kind", "exact")
    if kind == "exact":
        return exact_pattern(mu, mu_prime)
    if kind == "two_block":
        return two_block_pattern(mu, mu_prime,
                                 float(spec["strength_fraction"]),
                                 int(spec["block_length"]))
    if kind == "per_pulse":
        pairs = [(float(a), float(b)) for a, b in spec["pairs"]]
        return per_pulse_pattern(pairs)
    raise ParameterError(f"unknown pattern kind {kind!r}")


def _build_channel(spec: dict, mu: float, mu_prime: float, pattern,
                   m_pulses: int):
    kind = spec.get("kind", "linear")
    dark = float(spec.get("dark_count_prob", 0.0))
    if kind == "linear":
        return linear_channel(float(spec["eta"]), dark_count_prob=dark)
    if kind == "block_attack":
        if pattern.kind != "two_block":
            raise ParameterError("block_attack channel needs a two_block pattern")
        return two_block_attack_channel(mu, mu_prime,
                                        pattern.strength_fraction,
                                        float(spec["eta_e"]),
                                        dark_count_prob=dark)
    if kind == "per_block_random":
        block = int(spec["block_length"])
        n_blocks = max(1, -(-m_pulses // block))
        return per_block_random_channel(
            block, n_blocks, int(spec.get("seed", 0)),
            eta_low=float(spec.get("eta_low", 0.01)),
            eta_high=float(spec.get("eta_high", 0.5)),
            dark_count_prob=dark)
    raise ParameterError(f"unknown channel kind {kind!r}")


def _cmd_simulate(args) -> int:
    try:
        params = json.loads(Path(args.params).read_text())
    except OSError as exc:
        raise RecordError(f"cannot read params file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RecordError(f"params file is not valid JSON: {exc}") from exc
    try:
        m_pulses = int(params["M"])
        p0, p, pp = (float(params[k]) for k in ("p0", "p", "p_prime"))
        mu, mu_prime = float(params["mu"]), float(params["mu_prime"])
        pattern = _build_pattern(params.get("pattern", {}), mu, mu_prime)
        channel = _build_channel(params.get("channel", {}), mu, mu_prime,
                                 pattern, m_pulses)
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"malformed params: {exc}") from exc
    seed = args.seed if args.seed is not None else int(params.get("seed", 0))

    tally = simulate(m_pulses, p0, p, pp, pattern, channel, seed=seed)
    n0, nd, ns = (int(x) for x in tally.emitted.sum(axis=1))
    print(f"simulated M = {m_pulses} pulses (seed {seed})")
    print(f"emitted   vacuum {n0}  decoy {nd}  signal {ns}")
    print(f"counting rates  S0 = {_fmt(tally.n_vacuum / (p0 * m_pulses) if p0 > 0 else 0.0)}"
          f"  S = {_fmt(tally.n_decoy / (p * m_pulses))}"
          f"  S' = {_fmt(tally.n_signal / (pp * m_pulses))}")
    ratio, sigma = s1_ratio_estimate(tally)
    if math.isnan(ratio):
        print("single-photon share ratio unavailable (empty class)")
    else:
        print(f"single-photon share ratio s1/s1' = {_fmt(ratio)} "
              f"+- {_fmt(sigma)}")
        if channel.predicted_s1_ratio is not None:
            pred = channel.predicted_s1_ratio
            pull = (ratio - pred) / sigma if sigma > 0 else math.inf
            print(f"predicted ratio {_fmt(pred)}  (measured is "
                  f"{_fmt(pull)} sigma away)")

    if pattern.kind == "two_block":
        f = pattern.strength_fraction
        strong = source_posterior(1, mu * (1 + f), mu_prime * (1 + f), p0, p, pp)
        weak = source_posterior(1, mu * (1 - f), mu_prime * (1 - f), p0, p, pp)
        ordered = strong[1] > weak[1]
        print(f"single-photon decoy posterior: strengthened {_fmt(strong[1])}"
              f"  weakened {_fmt(weak[1])}  (strengthened larger: {ordered})")

    dlo, dhi, slo, shi = pattern_extremes(pattern, m_pulses)
    print(f"intensity over the run: decoy [{_fmt(dlo)}, {_fmt(dhi)}]  "
          f"signal [{_fmt(slo)}, {_fmt(shi)}]")

    if args.out:
        Path(args.out).write_text(tally.to_json())
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# verify

def _cmd_verify(args) -> int:
    lines = []

    def report_line(scen, report):
        status = "PASS" if report.passed else "FAIL"
        print(f"scenario {scen.scenario_id:3d}  {status}  "
              f"slack {report.min_slack:+.4g}  "
              f"({scen.pattern_kind}/{scen.channel_kind})")
        lines.append(report.to_json_line(scen.scenario_id))

    result = run_scenarios(args.scenarios, args.seed, args.m_pulses,
                           sigma_allowance=args.sigma_allowance,
                           progress=report_line)
    total = len(result.reports)
    print(f"\n{result.n_passed}/{total} scenarios passed "
          f"(sigma allowance {args.sigma_allowance})")
    print(f"worst slack {result.worst_slack:+.6g}")
    print(f"rejected {result.n_rejected} inadmissible draws")
    print(f"vacuum interval containment rate {result.vacuum_containment_rate:.3f}")
    if args.jsonl:
        Path(args.jsonl).write_text("\n".join(lines) + "\n")
        print(f"wrote {args.jsonl}")
    if not result.all_passed:
        print("VERIFICATION FAILED: a lower bound exceeded the simulator's "
              "ground truth beyond the allowance", file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------
# baseline

def _cmd_baseline(args) -> int:
    res = find_unsafe_baseline(args.seed, m_pulses=args.m_pulses)
    print(f"searched block-attack grid at M = {res.m_pulses}")
    print(f"strength f = {res.f}, transmittance eta_e = {res.eta_e}")
    print(f"true signal single-photon fraction  {_fmt(res.truth)}")
    print(f"zero-width claim                    {_fmt(res.errorfree_claim)}  "
          f"({res.errorfree_excess_sigmas:+.2f} sigma vs truth)")
    print(f"error-tolerant bound                {_fmt(res.tolerant_bound)}  "
          f"({res.tolerant_slack_sigmas:+.2f} sigma below truth)")
    if res.found:
        print("zero-width analysis overclaims here; the error-tolerant "
              "bound stays safe")
        return 0
    print("no overclaiming configuration found on the grid", file=sys.stderr)
    return 4


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decoysafe",
        description="Safe single-photon bounds for decoy-state runs with "
                    "source intensity errors.")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="bound a recorded run and sweep "
                                        "intensity uncertainty")
    pa.add_argument("record", help="record JSON path, or 'bundled' for the "
                                   "packaged reference run")
    pa.add_argument("--convention", choices=[CAPTION, DARK_CORRECTED, "both"],
                    default=DARK_CORRECTED,
                    help="single-photon error-rate convention "
                         "(default: darkcorrected)")
    pa.add_argument("--csv", metavar="PATH",
                    help="write the sweep as CSV (with --convention both, "
                         "writes one file per convention)")
    pa.add_argument("--figure", metavar="PATH",
                    help="figure output path (default: CSV path with .png)")
    pa.add_argument("--no-figure", action="store_true",
                    help="suppress the figure")
    pa.set_defaults(func=_cmd_analyze)

    ps = sub.add_parser("simulate", help="run the pulse-level simulator")
    ps.add_argument("--params", required=True, metavar="PATH",
                    help="JSON file with M, probabilities, pattern, channel")
    ps.add_argument("--seed", type=int, default=None,
                    help="override the seed in the params file")
    ps.add_argument("--out", metavar="PATH", help="write the tally as JSON")
    ps.set_defaults(func=_cmd_simulate)

    pv = sub.add_parser("verify", help="randomized bounds-vs-truth suite")
    pv.add_argument("--scenarios", type=int, default=100)
    pv.add_argument("--seed", type=int, default=2026)
    pv.add_argument("--m-pulses", type=int, default=10**7)
    pv.add_argument("--sigma-allowance", type=float, default=4.0)
    pv.add_argument("--jsonl", metavar="PATH",
                    help="write one JSON verdict line per scenario")
    pv.set_defaults(func=_cmd_verify)

    pb = sub.add_parser("baseline", help="show a run where the zero-width "
                                         "bound overclaims")
    pb.add_argument("--seed", type=int, default=11)
    pb.add_argument("--m-pulses", type=int, default=10**7)
    pb.set_defaults(func=_cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RecordError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
