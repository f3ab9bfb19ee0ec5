"""Property-based checks of algebraic invariants."""
import math

import pytest
from hypothesis import assume, given, settings, strategies as st

import decoysafe as ds

finite = dict(allow_nan=False, allow_infinity=False)


@given(st.floats(0.0, 1.0, **finite))
def test_entropy_symmetry(x):
    assert ds.binary_entropy(x) == pytest.approx(ds.binary_entropy(1.0 - x),
                                                 abs=1e-12)


@given(st.floats(0.0, 0.5, **finite))
def test_entropy_monotone_below_half(x):
    assume(x + 1e-6 <= 0.5)
    assert ds.binary_entropy(x) <= ds.binary_entropy(x + 1e-6) + 1e-15


@given(st.integers(0, 12), st.floats(0.01, 2.0, **finite),
       st.floats(0.01, 2.0, **finite), st.floats(0.01, 0.4, **finite),
       st.floats(0.05, 0.9, **finite))
def test_posterior_is_distribution(k, mu_i, mup_i, p0, w):
    p = (1.0 - p0) * w
    p_prime = 1.0 - p0 - p
    post = ds.source_posterior(k, mu_i, mup_i, p0, p, p_prime)
    assert all(0.0 <= q <= 1.0 for q in post)
    assert sum(post) == pytest.approx(1.0, abs=1e-12)
    if k > 0:
        assert post[0] == 0.0


@given(st.floats(0.05, 0.45, **finite), st.floats(0.5, 0.95, **finite))
def test_exact_poisson_pairs_always_ordered(mu, mup):
    # a'_k / a_k = (mu'/mu)^k e^{mu - mu'} is increasing in k whenever
    # mu < mu', so the ordering condition can never fail for exact pairs
    rep = ds.check_condition_14(ds.poisson_distribution(mu),
                                ds.poisson_distribution(mup))
    assert rep.holds


@given(st.floats(0.05, 0.45, **finite), st.floats(0.5, 0.95, **finite),
       st.floats(0.0, 0.04, **finite), st.floats(0.001, 0.04, **finite))
def test_window_widening_never_raises_the_bound(mu, mup, dm, extra):
    r = ds.ObservedRates(S=1.548e-4, S_prime=3.817e-4, S0=2.609e-5,
                         p0=0.09, p=0.41, p_prime=0.50, M=10**9)
    narrow = ds.coherent_bounds(ds.CoherentWindow.from_nominal(mu, dm),
                                ds.CoherentWindow.from_nominal(mup, dm))
    wide = ds.coherent_bounds(ds.CoherentWindow.from_nominal(mu, dm + extra),
                              ds.CoherentWindow.from_nominal(mup, dm + extra))
    assume(ds.check_condition_53(*narrow).holds)
    assume(ds.check_condition_53(*wide).holds)
    b_narrow = ds.delta1_bounds(r, *narrow)
    b_wide = ds.delta1_bounds(r, *wide)
    assert b_wide.delta1_signal <= b_narrow.delta1_signal + 1e-12
    assert b_wide.delta1_decoy <= b_narrow.delta1_decoy + 1e-12


@settings(max_examples=200)
@given(st.floats(0.05, 0.45, **finite), st.floats(0.5, 0.95, **finite),
       st.floats(1e-6, 0.3, **finite), st.floats(1e-6, 0.5, **finite),
       st.floats(0.0, 1.0, **finite), st.floats(0.02, 0.3, **finite),
       st.floats(0.2, 0.8, **finite))
def test_zero_width_reduction_identity(mu, mup, s_decoy, s_signal, s0_scale, p0, w):
    """Pinning the intervals at an exact pair must reproduce the error-free
    pipeline, raw value for raw value."""
    s0 = s0_scale * 0.5 * min(s_decoy, s_signal)
    p = (1.0 - p0) * w
    rates = ds.ObservedRates(S=s_decoy, S_prime=s_signal, S0=s0,
                             p0=p0, p=p, p_prime=1.0 - p0 - p, M=10**8)
    dec = ds.poisson_distribution(mu)
    sig = ds.poisson_distribution(mup)
    ef = ds.errorfree_s1_lower(rates, dec, sig)
    b = ds.delta1_bounds(rates, ds.BoundedDistribution.from_exact(dec),
                         ds.BoundedDistribution.from_exact(sig))
    want_ds = sig.coeffs[1] * ef.s1_raw / rates.S_prime
    want_dd = dec.coeffs[1] * ef.s1_raw / rates.S
    # abs floor covers catastrophic cancellation when the raw value crosses 0
    assert b.delta1_signal_raw == pytest.approx(want_ds, rel=1e-12, abs=1e-10)
    assert b.delta1_decoy_raw == pytest.approx(want_dd, rel=1e-12, abs=1e-10)


@given(st.floats(0.01, 1.0, **finite), st.floats(0.0, 0.5, **finite),
       st.floats(0.0, 0.5, **finite), st.floats(0.0, 0.2, **finite))
def test_key_rate_monotone_directions(delta1, t1, t, bump):
    base = ds.key_rate_per_count(delta1, t1, t)
    # more single-photon credit never hurts
    if delta1 + bump <= 1.0:
        assert ds.key_rate_per_count(delta1 + bump, t1, t) >= base - 1e-12
    # a worse single-photon error rate never helps
    if t1 + bump <= 0.5:
        assert ds.key_rate_per_count(delta1, t1 + bump, t) <= base + 1e-12
    # a worse total error rate never helps
    if t + bump <= 0.5:
        assert ds.key_rate_per_count(delta1, t1, t + bump) <= base + 1e-12


@given(st.floats(0.05, 0.4, **finite), st.floats(0.45, 0.9, **finite),
       st.floats(0.01, 0.3, **finite), st.integers(1, 5000),
       st.integers(1, 200000))
def test_two_block_pattern_containment(mu, mup, f, block, m):
    pattern = ds.two_block_pattern(mu, mup, f, block)
    dw = ds.CoherentWindow.from_nominal(mu, f)
    sw = ds.CoherentWindow.from_nominal(mup, f)
    ds.require_pattern_in_windows(pattern, dw, sw, m)
    if f > 0.02:
        narrow = ds.CoherentWindow.from_nominal(mu, f / 2)
        with pytest.raises(ds.PreconditionError):
            ds.require_pattern_in_windows(pattern, narrow, sw,
                                          max(m, 2 * block))


@given(st.lists(st.tuples(st.floats(0.0, 0.1, **finite),
                          st.floats(0.0, 1.0, **finite),
                          st.floats(0.0, 1.0, **finite),
                          st.floats(0.0, 0.5, **finite),
                          st.floats(-0.5, 0.5, **finite),
                          st.floats(0.0, 1e3, **finite)),
                min_size=1, max_size=8))
def test_csv_roundtrip_six_digits(rows):
    sweep = [ds.SweepRow(delta_m=a, delta1_signal=b, delta1_decoy=c, t1=d,
                         r_per_count=e, r_hz=g) for a, b, c, d, e, g in rows]
    parsed = ds.parse_csv(ds.format_csv(sweep))
    for got, want in zip(parsed, sweep):
        assert got.r_hz == pytest.approx(want.r_hz, rel=1e-5, abs=1e-9)
        assert got.delta1_signal == pytest.approx(want.delta1_signal,
                                                  rel=1e-5, abs=1e-9)
