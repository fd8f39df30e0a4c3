"""Acceptance suite.

Each test implements one release criterion at its stated tolerance and
prints a [PASS]/[FAIL] line (run with ``pytest -s`` to see them inline).
Heavy Monte Carlo runs are shared through session fixtures; every run is
seeded and deterministic.

Criterion 1 is expected to fail: it asserts that the key-vanishing QBER
at error-correction efficiency 1.1 equals 0.0946, but the defining
equation 1 = (1 + f) * H2(Q) has its root at 0.102283 for f = 1.1
(2.1 * H2(0.0946) = 0.948, not 1).  The criterion is kept as stated
rather than weakened; see the implementation notes outside the package.
"""

import json

import numpy as np
import pytest

from wmqkd.calibration import DEFAULT_DETECTOR, FROZEN_CALIBRATION
from wmqkd.coincidence import CoincidenceWindow, find_coincidences
from wmqkd.detection import TagStream, merge_detectors
from wmqkd.keyrate import (AnalyticLinkModel, analytic_rates, binary_entropy,
                           optimize_pair_rate, qber_threshold, scaling_curve,
                           secure_key)
from wmqkd.runner import RunConfig, run_custom, run_fig3b, run_fig3d
from wmqkd.simulate import resolve_channels, simulate_point
from wmqkd.channels import ChannelPlan, WavelengthChannel
from wmqkd.source import SourceConfig

TICK = 1.0 / 12.15e9
ACCEPT_SEED = 20240810


def report(num, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    return ok


# --- shared heavy runs -------------------------------------------------------

@pytest.fixture(scope="session")
def fig3b_reference(tmp_path_factory):
    """Calibrated 30 dB reference run (criteria 5 and 6)."""
    out = tmp_path_factory.mktemp("fig3b_ref")
    cfg = RunConfig(scenario="fig3b", seed=ACCEPT_SEED, mode="both",
                    duration=9.0, loss_grid_db=(30.0,))
    rep = run_fig3b(cfg, str(out))
    return {r["configuration"]: r for r in rep["rows"]}


@pytest.fixture(scope="session")
def fig3b_high_loss(tmp_path_factory):
    """89 dB run near the maximum tolerable source rate (criterion 7)."""
    out = tmp_path_factory.mktemp("fig3b_high")
    cfg = RunConfig(scenario="fig3b", seed=ACCEPT_SEED, mode="both",
                    duration=8000.0, loss_grid_db=(89.0,),
                    brightness="near_saturation")
    rep = run_fig3b(cfg, str(out))
    return {"rows": {r["configuration"]: r for r in rep["rows"]},
            "warnings": rep["warnings"]}


# --- criterion 1 -------------------------------------------------------------

def test_criterion_1_qber_threshold():
    got = qber_threshold(1.1)
    ok = abs(got - 0.0946) <= 0.0005
    report(1, ok, f"qber_threshold(1.1) = {got:.6f}, asserted 0.0946 +/- 0.0005 "
                  "(root of 1 = 2.1*H2(Q) is 0.102283; 2.1*H2(0.0946) = 0.948)")
    assert ok, (
        "criterion asserts 0.0946 +/- 0.0005 but the stated equation "
        "1 = (1+f)*H2(Q) with f=1.1 has its root at "
        f"{got:.6f}; the asserted value is not a root of the stated "
        "equation and the criterion cannot hold as written"
    )


# --- criterion 2 -------------------------------------------------------------

def test_criterion_2_entropy_identities():
    tol = 1e-12
    checks = [abs(binary_entropy(0.5) - 1.0) <= tol,
              abs(binary_entropy(0.0)) <= tol,
              abs(binary_entropy(1.0)) <= tol]
    xs = np.linspace(0.0, 1.0, 101)
    h = binary_entropy(xs)
    checks.append(bool(np.max(np.abs(h - h[::-1])) <= tol))
    mid = binary_entropy((xs[:-1] + xs[1:]) / 2)
    checks.append(bool(np.all(mid + tol >= (h[:-1] + h[1:]) / 2)))
    ok = all(checks)
    report(2, ok, "H2 endpoint values, symmetry and concavity on a "
                  f"101-point grid, each to {tol:g}")
    assert ok


# --- criterion 3 -------------------------------------------------------------

def _poisson_tags(rate, duration, seed, det=0):
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate * duration)
    ticks = np.sort(rng.integers(0, int(duration / TICK), n))
    z = np.zeros(n, np.int8)
    return TagStream(ticks, z, np.full(n, det, np.int32),
                     np.zeros(n, np.int32), np.zeros(n, bool), TICK, duration)


def test_criterion_3_accidental_law():
    s_rate, duration, t_c = 1e5, 10.0, 1e-9
    a = _poisson_tags(s_rate, duration, seed=101)
    b = _poisson_tags(s_rate, duration, seed=202, det=1)
    count = len(find_coincidences(a, b, CoincidenceWindow(t_c)))
    expected = s_rate * s_rate * t_c * duration
    sigma = np.sqrt(expected)
    ok = abs(count - expected) < 5 * sigma
    report(3, ok, f"uncorrelated coincidences = {count}, "
                  f"expected {expected:.0f} +/- {5 * sigma:.0f} (5 sigma)")
    assert ok


# --- criterion 4 -------------------------------------------------------------

def _oracle_greedy_match(ta, tb, half):
    """Quadratic reference: the globally earliest unprocessed tag is
    paired with its nearest unused opposite tag inside the window
    (full numpy scan per step), or discarded when none exists."""
    ta = ta.astype(np.int64)
    tb = tb.astype(np.int64)
    avail_a = np.ones(ta.size, bool)
    avail_b = np.ones(tb.size, bool)
    ia = ib = 0
    pairs = []
    while True:
        while ia < ta.size and not avail_a[ia]:
            ia += 1
        while ib < tb.size and not avail_b[ib]:
            ib += 1
        if ia >= ta.size or ib >= tb.size:
            break
        if ta[ia] <= tb[ib]:
            d = np.abs(tb - ta[ia])
            d[~avail_b] = np.iinfo(np.int64).max
            j = int(np.argmin(d))
            if d[j] <= half:
                pairs.append((ia, j))
                avail_b[j] = False
                avail_a[ia] = False
            else:
                ia += 1      # no partner now or ever: discard
        else:
            d = np.abs(ta - tb[ib])
            d[~avail_a] = np.iinfo(np.int64).max
            i = int(np.argmin(d))
            if d[i] <= half:
                pairs.append((i, ib))
                avail_a[i] = False
                avail_b[ib] = False
            else:
                ib += 1
    return sorted(pairs)


def _oracle_merge(ticks, dead):
    """Quadratic reference dead-time filter: keep an event iff strictly
    later than every previously kept event plus the dead time."""
    kept = []
    for t in ticks:
        t = int(t)
        if all(t > k + dead for k in kept):
            kept.append(t)
    return kept


def test_criterion_4_brute_force_oracles():
    rng = np.random.default_rng(404)
    n_instances = 100
    failures = []
    for trial in range(n_instances):
        if trial < 94:
            na, nb = rng.integers(5, 1000, 2)
        else:
            na, nb = rng.integers(3000, 8001, 2)
        span = int(rng.integers(20 * (na + nb), 200 * (na + nb)))
        half = int(rng.integers(0, 80))
        ta = np.sort(rng.integers(0, span, na))
        tb = np.sort(rng.integers(0, span, nb))
        zmk = lambda t, d: TagStream(t, np.zeros(t.size, np.int8),
                                     np.full(t.size, d, np.int32),
                                     np.zeros(t.size, np.int32),
                                     np.zeros(t.size, bool), TICK, 1.0)
        m = find_coincidences(zmk(ta, 0), zmk(tb, 1),
                              CoincidenceWindow((2 * half + 1) * TICK))
        got = sorted(zip(m.idx_a.tolist(), m.idx_b.tolist()))
        if got != _oracle_greedy_match(ta, tb, half):
            failures.append(("match", trial))

        dead = int(rng.integers(0, 150))
        merged = merge_detectors(zmk(ta, 0), zmk(tb, 1), dead * TICK,
                                 merged_detector_id=0)
        if merged.ticks.tolist() != _oracle_merge(
                np.sort(np.concatenate([ta, tb])), dead):
            failures.append(("merge", trial))
    ok = not failures
    report(4, ok, f"find_coincidences and merge_detectors vs quadratic "
                  f"references on {n_instances} random instances "
                  f"(failures: {failures if failures else 'none'})")
    assert ok


# --- criteria 5 and 6 --------------------------------------------------------

def test_criterion_5_wm_vs_no_wm_qber(fig3b_reference):
    rows = fig3b_reference
    q_merged = rows["no_wm"]["qber_mc"]
    counts_ok = all(rows[label]["cc_mc"] >= 1e4 for label in ("ch1", "ch2", "no_wm"))
    ok = abs(q_merged - 0.076) <= 0.010 and counts_ok
    report(5, ok, f"merged-pipeline QBER = {q_merged:.4f} "
                  f"(window 0.076 +/- 0.010), ch1 QBER = "
                  f"{rows['ch1']['qber_mc']:.4f} (calibration target 0.038), "
                  f"coincidences per arm >= 1e4: {counts_ok}")
    assert ok


def test_criterion_6_key_rate_ratios(fig3b_reference):
    rows = fig3b_reference
    wm = rows["wm_sum"]["key_rate_bps_mc"]
    ch1 = rows["ch1"]["key_rate_bps_mc"]
    merged = rows["no_wm"]["key_rate_bps_mc"]
    r_wm = wm / merged
    r_ch1 = ch1 / merged
    ok = 2.0 <= r_wm <= 3.2 and 1.5 <= r_ch1 <= 2.3
    report(6, ok, f"key-rate ratios at 30 dB: wm_sum/no_wm = {r_wm:.3f} "
                  f"(window [2.0, 3.2]), ch1/no_wm = {r_ch1:.3f} "
                  f"(window [1.5, 2.3])")
    assert ok


# --- criterion 7 -------------------------------------------------------------

def test_criterion_7_high_loss_separation(fig3b_high_loss):
    rows = fig3b_high_loss["rows"]
    an_wm = rows["wm_sum"]["key_rate_bps_an"]
    an_merged = rows["no_wm"]["key_rate_bps_an"]
    mc_wm = rows["wm_sum"]["key_rate_bps_mc"]
    mc_merged = rows["no_wm"]["key_rate_bps_mc"]
    has_warning = any("variance" in w for w in fig3b_high_loss["warnings"])
    ok = an_wm > 0 and an_merged == 0 and mc_wm > 0 and mc_merged == 0 \
        and has_warning
    report(7, ok, f"89 dB separation: analytic wm={an_wm:.3e}, "
                  f"no_wm={an_merged:.3e}; Monte Carlo wm={mc_wm:.3e}, "
                  f"no_wm={mc_merged:.3e}; variance warning attached: "
                  f"{has_warning}")
    assert ok


# --- criterion 8 -------------------------------------------------------------

def test_criterion_8_scaling_linearity():
    model = AnalyticLinkModel(
        pair_rate_in_band=FROZEN_CALIBRATION.fig3d_pair_rate_per_channel,
        transmittance_alice=1.0, transmittance_bob=1.0,
        dark_rate_alice=200.0, dark_rate_bob=200.0, t_c=1e-9,
        q_sys=FROZEN_CALIBRATION.q_sys_channel1,
    )
    rows = scaling_curve(model, [1, 2, 80, 1000, 15000], [50.0, 70.0, 90.0])
    table = {}
    for r in rows:
        table.setdefault(r["loss_db"], {})[r["n"]] = r["key_rate_bps"]
    exact = all(
        table[loss][n] == n * table[loss][1]
        for loss in table for n in (2, 80, 1000, 15000)
    )
    report(8, exact, "aggregate key rate exactly n times the single-channel "
                     "rate for n in {2, 80, 1000, 15000}")
    assert exact


# --- criterion 9 -------------------------------------------------------------

def test_criterion_9_projection_headline():
    from wmqkd.calibration import fig3d_model
    base = fig3d_model(FROZEN_CALIBRATION, loss_db=70.0, n_channels=15000)
    opt = optimize_pair_rate(base)
    ok = 1.5e4 <= opt.key_rate_total <= 6.0e4
    report(9, ok, f"15000 channels at 70 dB, optimized pair rate: aggregate "
                  f"{opt.key_rate_total:.3e} bps (target 3e4 within factor 2)")
    assert ok


# --- criterion 10 ------------------------------------------------------------

def test_criterion_10_bandwidth_degradation():
    from dataclasses import replace
    from wmqkd.calibration import fig3d_model
    base = fig3d_model(FROZEN_CALIBRATION, loss_db=70.0)
    opt = optimize_pair_rate(base)
    r_625 = analytic_rates(replace(base, pair_rate_in_band=opt.pair_rate)) \
        .key_rate_per_channel
    rates = {}
    for bw in (19.0, 21.0, 22.0):
        m = fig3d_model(FROZEN_CALIBRATION, loss_db=70.0, bandwidth_ghz=bw)
        rates[bw] = analytic_rates(m).key_rate_per_channel
    ok = r_625 > rates[19.0] > rates[21.0] > 0.0 and rates[22.0] == 0.0
    report(10, ok, f"per-channel key vs bandwidth at 70 dB: "
                   f"6.25 GHz (optimized) = {r_625:.3f} > 19 GHz = "
                   f"{rates[19.0]:.3f} > 21 GHz = {rates[21.0]:.3f} > "
                   f"22 GHz = {rates[22.0]:.3f} (= 0)")
    assert ok


# --- criterion 11 ------------------------------------------------------------

def _consistency_config(rng):
    """Random mid-loss configuration in the regime where the bare
    analytic model is exact: no dead time, negligible jitter, the window
    an odd multiple of the tick, and a per-side transmittance small
    enough that one-to-one matching's tag competition (true pairs
    consuming would-be accidental partners, a ~transmittance-sized
    fraction of the accidental rate) stays well under a sigma."""
    loss = float(rng.uniform(31.0, 36.0))
    q_sys = float(rng.uniform(0.005, 0.03))
    t_c = int(rng.choice([9, 13, 17])) * TICK
    dark = float(rng.uniform(50.0, 300.0))
    eff = float(rng.uniform(0.5, 0.7))
    accidental_ratio = float(rng.uniform(0.008, 0.018))
    b_inband = accidental_ratio / t_c
    return loss, b_inband, q_sys, t_c, dark, eff


def test_criterion_11_monte_carlo_analytic_consistency():
    from dataclasses import replace as dc_replace
    from wmqkd.detection import DetectorConfig
    rng = np.random.default_rng(1111)
    sig = WavelengthChannel("signal", 1, 799.0, 0.3, 1.0)
    idl = WavelengthChannel("idler", 1, 821.0, 0.3, 1.0)
    plan = ChannelPlan(pairs=((sig, idl),), spdc_center=810.0)
    worst = []
    ok = True
    for trial in range(5):
        loss, b_inband, q_sys, t_c, dark, eff = _consistency_config(rng)
        src = SourceConfig(pair_rate=1e9, systematic_visibility_hv=1 - 2 * q_sys,
                           systematic_visibility_da=1 - 2 * q_sys)
        b = resolve_channels(src, plan, loss)[0].pair_rate_in_band
        src = src.with_pair_rate(1e9 * b_inband / b)
        detector = DetectorConfig(efficiency=eff, dark_rate=dark,
                                  jitter_sigma=10e-12, dead_time=0.0)
        eta = 10 ** (-(loss / 2) / 10) * eff
        model = AnalyticLinkModel(
            pair_rate_in_band=b_inband, transmittance_alice=eta,
            transmittance_bob=eta, dark_rate_alice=2 * dark,
            dark_rate_bob=2 * dark, t_c=t_c, q_sys=q_sys,
        )
        pred = analytic_rates(model)
        duration = 1.15e5 / pred.cc_true
        res = simulate_point(src, plan, loss, detector, CoincidenceWindow(t_c),
                             duration, seed=ACCEPT_SEED + trial)
        r = res.channels[1]
        n_true_expected = pred.cc_true * duration
        n = r.counts_hv.total + r.counts_da.total
        n_pred = (pred.cc_true + pred.cc_accidental) * duration
        q_mc = (r.counts_hv.erroneous + r.counts_da.erroneous) / n
        sigma_q = np.sqrt(pred.qber * (1 - pred.qber) / n_pred)
        z_q = (q_mc - pred.qber) / sigma_q

        bits = secure_key(r.counts_hv, r.counts_da)
        rate_mc = bits / duration
        n_b = n_pred / 2
        kernel = 1 - 2.1 * binary_entropy(pred.qber)
        dk = -2.1 * np.log2((1 - pred.qber) / pred.qber)
        var_b = (0.5 * kernel) ** 2 * n_b + (0.5 * dk) ** 2 * n_b \
            * pred.qber * (1 - pred.qber)
        sigma_rate = np.sqrt(2 * var_b) / duration
        z_r = (rate_mc - pred.key_rate_per_channel) / sigma_rate

        this_ok = abs(z_q) <= 4.0 and abs(z_r) <= 4.0 \
            and n_true_expected >= 1e5
        ok = ok and this_ok
        worst.append((trial, round(float(z_q), 2), round(float(z_r), 2)))
    report(11, ok, f"5 random mid-loss configs, >=1e5 true coincidences: "
                   f"(trial, z_qber, z_key) = {worst}")
    assert ok


# --- criterion 12 ------------------------------------------------------------

def test_criterion_12_determinism(tmp_path):
    def read(p):
        with open(p, "rb") as fh:
            return fh.read()

    scenarios = {
        "fig3b": RunConfig(scenario="fig3b", seed=ACCEPT_SEED, mode="both",
                           duration=0.05, loss_grid_db=(30.0,)),
        "fig3d": RunConfig(scenario="fig3d", mode="analytic"),
        "custom": RunConfig(scenario="custom", seed=ACCEPT_SEED, mode="both",
                            duration=0.05, loss_grid_db=(25.0, 35.0)),
    }
    runners = {"fig3b": run_fig3b, "fig3d": run_fig3d, "custom": run_custom}
    ok = True
    details = []
    for name, cfg in scenarios.items():
        d1 = tmp_path / f"{name}_1"
        d2 = tmp_path / f"{name}_2"
        runners[name](cfg, str(d1))
        runners[name](cfg, str(d2))
        files = sorted(p.name for p in d1.iterdir())
        same = all(read(d1 / f) == read(d2 / f) for f in files)
        ok = ok and same
        details.append(f"{name}: {len(files)} files {'identical' if same else 'DIFFER'}")
    report(12, ok, "; ".join(details))
    assert ok
