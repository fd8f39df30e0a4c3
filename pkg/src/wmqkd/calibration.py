"""Frozen scenario calibration.

The experiment's absolute settings are pinned once here and reused by
every scenario run, so no comparison can tune parameters per claim:

* the full-spectrum pair rate is inverted from the measured in-band
  brightness (7.8e5 cps/mW x 50 mW in a 0.1 nm band at band center);
* channel 1's systematic visibility is fitted so its simulated QBER at
  the 30 dB reference point is 3.8%;
* channel 2's systematic visibility is fitted so the single-channel to
  merged-baseline key-rate ratio at 30 dB is 1.9;
* the n-channel projection's per-channel pair rate at 6.25 GHz is
  anchored so the no-key bandwidth boundary falls at 21.5 GHz (between
  the last working and first failing reported bandwidths).

``derive_calibration`` recomputes everything from those anchors with
the semi-analytic chain below; the frozen numbers are checked against
it in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.optimize import brentq
from scipy.special import erf

from .channels import build_table1_plan, table1_source_config
from .coincidence import CoincidenceWindow
from .detection import DetectorConfig
from .keyrate import AnalyticLinkModel, analytic_rates, binary_entropy, qber_threshold
from .source import SourceConfig, band_fraction

CALIBRATION_VERSION = "1"

# Anchors (quoted hardware behavior).
FILTERED_BRIGHTNESS_CPS_PER_MW = 7.8e5
PUMP_POWER_MW = 50.0
BRIGHTNESS_FILTER_FWHM_NM = 0.1
REFERENCE_LOSS_DB = 30.0
TARGET_QBER_CH1 = 0.038
TARGET_RATIO_CH1_OVER_MERGED = 1.9
FIG3D_TOTAL_LOSS_DB = 70.0
FIG3D_DARK_PER_SIDE = 200.0
FIG3D_BANDWIDTH_THRESHOLD_GHZ = 21.5
FIG3D_REFERENCE_BANDWIDTH_GHZ = 6.25

DEFAULT_DETECTOR = DetectorConfig(
    efficiency=0.60,
    dark_rate=100.0,
    jitter_sigma=250e-12,
    dead_time=50e-9,
)


@dataclass(frozen=True)
class ChannelPrediction:
    """Semi-analytic per-pipeline rates (all per second)."""

    singles_alice: float
    singles_bob: float
    cc_true: float
    cc_accidental: float
    qber: float
    key_rate: float


def window_efficiency(jitter_sigma: float, width: float) -> float:
    """Probability that a true pair's detection-time difference falls
    inside a window of total ``width`` given per-detector normal jitter."""
    if jitter_sigma <= 0:
        return 1.0
    return float(erf(width / (4.0 * jitter_sigma)))


def _port_rate_after_dead_time(rate: float, dead_time: float) -> float:
    """Non-paralyzable throughput of one detector at incident rate."""
    return rate / (1.0 + rate * dead_time)


def predict_channel(
    pair_rate_in_band: float,
    arrival_eff_alice: float,
    arrival_eff_bob: float,
    detector: DetectorConfig,
    window: CoincidenceWindow,
    q_sys: float,
    f_ec: float = 1.1,
) -> ChannelPrediction:
    """Predict one wavelength channel's measured rates.

    Chains detector efficiency, per-port dead time, jitter window
    efficiency and the tick-quantized effective window width onto the
    basic singles/true/accidental decomposition.
    """
    w_eff = window.effective_width(detector.tick)
    eta_w = window_efficiency(detector.jitter_sigma, w_eff)
    preds = []
    rhos = []
    for eta in (arrival_eff_alice, arrival_eff_bob):
        photon = pair_rate_in_band * eta * detector.efficiency
        port_in = photon / 2.0 + detector.dark_rate
        rho = _port_rate_after_dead_time(port_in, detector.dead_time) / port_in \
            if port_in > 0 else 1.0
        preds.append(2.0 * port_in * rho)
        rhos.append(rho)
    s_a, s_b = preds
    cc_true = (pair_rate_in_band * arrival_eff_alice * arrival_eff_bob
               * detector.efficiency**2 * rhos[0] * rhos[1] * eta_w)
    cc_acc = s_a * s_b * w_eff
    total = cc_true + cc_acc
    q = (q_sys * cc_true + 0.5 * cc_acc) / total if total > 0 else float("nan")
    key = max(0.0, total * 0.5 * (1.0 - (1.0 + f_ec) * binary_entropy(q))) \
        if total > 0 else 0.0
    return ChannelPrediction(s_a, s_b, cc_true, cc_acc, q, key)


def predict_merged(
    per_channel: list[tuple[float, float, float, float]],
    detector: DetectorConfig,
    window: CoincidenceWindow,
    q_sys_by_channel: list[float],
    global_dead_time: float | None = None,
    f_ec: float = 1.1,
) -> ChannelPrediction:
    """Predict the merged (non-multiplexed) baseline.

    ``per_channel`` rows are ``(pair_rate, eta_alice, eta_bob, _)`` per
    channel.  Corresponding detector ports are merged per side; a tag of
    one channel additionally dies when a kept tag of the other channel
    precedes it within the global dead time.
    """
    if global_dead_time is None:
        global_dead_time = detector.dead_time
    w_eff = window.effective_width(detector.tick)
    eta_w = window_efficiency(detector.jitter_sigma, w_eff)

    port_out = []   # per channel, per side: post-dead-time port rate
    rho_det = []
    for b, ea, eb, _ in per_channel:
        row_out, row_rho = [], []
        for eta in (ea, eb):
            photon = b * eta * detector.efficiency
            port_in = photon / 2.0 + detector.dark_rate
            rho = _port_rate_after_dead_time(port_in, detector.dead_time) / port_in \
                if port_in > 0 else 1.0
            row_out.append(port_in * rho)
            row_rho.append(rho)
        port_out.append(row_out)
        rho_det.append(row_rho)

    # Cross-channel blocking in the merged stream (per side, per port).
    singles = []
    rho_merge = []
    for side in (0, 1):
        rates = [row[side] for row in port_out]
        tot = sum(rates)
        merged_port = sum(
            r / (1.0 + (tot - r) * global_dead_time) for r in rates
        )
        singles.append(2.0 * merged_port)
        rho_merge.append([
            1.0 / (1.0 + (tot - r) * global_dead_time) for r in rates
        ])
    s_a, s_b = singles

    cc_true = 0.0
    q_weighted = 0.0
    for k, (b, ea, eb, _) in enumerate(per_channel):
        t_k = (b * ea * eb * detector.efficiency**2
               * rho_det[k][0] * rho_det[k][1]
               * rho_merge[0][k] * rho_merge[1][k] * eta_w)
        cc_true += t_k
        q_weighted += q_sys_by_channel[k] * t_k
    cc_acc = s_a * s_b * w_eff
    total = cc_true + cc_acc
    q = (q_weighted + 0.5 * cc_acc) / total if total > 0 else float("nan")
    key = max(0.0, total * 0.5 * (1.0 - (1.0 + f_ec) * binary_entropy(q))) \
        if total > 0 else 0.0
    return ChannelPrediction(s_a, s_b, cc_true, cc_acc, q, key)


@dataclass(frozen=True)
class Calibration:
    """Frozen fitted parameters; see module docstring for the anchors."""

    version: str
    full_spectrum_pair_rate: float
    v_sys_channel1: float
    v_sys_channel2: float
    fig3d_pair_rate_per_channel: float

    @property
    def q_sys_channel1(self) -> float:
        return (1.0 - self.v_sys_channel1) / 2.0

    @property
    def q_sys_channel2(self) -> float:
        return (1.0 - self.v_sys_channel2) / 2.0

    def source(self, **overrides) -> SourceConfig:
        """Table-1-consistent source with the calibrated pair rate and
        channel-1 systematic visibility as the source default."""
        defaults = dict(
            pair_rate=self.full_spectrum_pair_rate,
            systematic_visibility_hv=self.v_sys_channel1,
            systematic_visibility_da=self.v_sys_channel1,
        )
        defaults.update(overrides)
        return table1_source_config(**defaults)

    def channel_visibilities(self) -> dict[int, tuple[float, float]]:
        return {
            1: (self.v_sys_channel1, self.v_sys_channel1),
            2: (self.v_sys_channel2, self.v_sys_channel2),
        }

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "full_spectrum_pair_rate": self.full_spectrum_pair_rate,
            "v_sys_channel1": self.v_sys_channel1,
            "v_sys_channel2": self.v_sys_channel2,
            "fig3d_pair_rate_per_channel": self.fig3d_pair_rate_per_channel,
        }


def _reference_geometry(detector: DetectorConfig, window: CoincidenceWindow,
                        full_rate: float):
    """Per-channel (pair_rate, eta_alice, eta_bob, index) at the 30 dB
    reference point of the measured two-channel plan."""
    src = table1_source_config(pair_rate=full_rate)
    plan = build_table1_plan()
    eta_link = 10.0 ** (-(REFERENCE_LOSS_DB / 2.0) / 10.0)
    rows = []
    for sig, idl in plan.pairs:
        det_nm = sig.center - src.center_wavelength_signal
        b = full_rate * band_fraction(src, det_nm, sig.fwhm)
        rows.append((b, eta_link * sig.diffraction_efficiency,
                     eta_link * idl.diffraction_efficiency, sig.index))
    return rows


def derive_calibration(detector: DetectorConfig = DEFAULT_DETECTOR,
                       window: CoincidenceWindow = CoincidenceWindow(1e-9)) -> Calibration:
    """Re-derive every frozen parameter from its anchor."""
    src0 = table1_source_config(pair_rate=1.0)
    in_band = FILTERED_BRIGHTNESS_CPS_PER_MW * PUMP_POWER_MW
    full_rate = in_band / band_fraction(src0, 0.0, BRIGHTNESS_FILTER_FWHM_NM)

    rows = _reference_geometry(detector, window, full_rate)
    b1, ea1, eb1, _ = rows[0]

    def qber_of_q1(q1):
        return predict_channel(b1, ea1, eb1, detector, window, q1).qber

    q1 = brentq(lambda q: qber_of_q1(q) - TARGET_QBER_CH1, 0.0, 0.2, xtol=1e-10)

    ch1 = predict_channel(b1, ea1, eb1, detector, window, q1)

    def ratio_gap(q2):
        # Zero where ch1.key / merged.key equals the target ratio; stays
        # finite when the merged key is clamped to zero.
        merged = predict_merged(rows, detector, window, [q1, q2])
        return ch1.key_rate - TARGET_RATIO_CH1_OVER_MERGED * merged.key_rate

    q2 = brentq(ratio_gap, q1, 0.4, xtol=1e-10)

    fig3d_b = _fig3d_reference_pair_rate(q1)

    return Calibration(
        version=CALIBRATION_VERSION,
        full_spectrum_pair_rate=full_rate,
        v_sys_channel1=1.0 - 2.0 * q1,
        v_sys_channel2=1.0 - 2.0 * q2,
        fig3d_pair_rate_per_channel=fig3d_b,
    )


def _fig3d_reference_pair_rate(q_sys: float) -> float:
    """Per-channel pair rate of the fixed-source projection, anchored so
    the key vanishes exactly at the threshold bandwidth."""
    eta = 10.0 ** (-(FIG3D_TOTAL_LOSS_DB / 2.0) / 10.0)
    thr = qber_threshold(1.1, tol=1e-9)
    scale = FIG3D_BANDWIDTH_THRESHOLD_GHZ / FIG3D_REFERENCE_BANDWIDTH_GHZ

    def qber_at_threshold_bw(b_ref):
        m = AnalyticLinkModel(
            pair_rate_in_band=b_ref * scale,
            transmittance_alice=eta, transmittance_bob=eta,
            dark_rate_alice=FIG3D_DARK_PER_SIDE, dark_rate_bob=FIG3D_DARK_PER_SIDE,
            t_c=1e-9, q_sys=q_sys,
        )
        return analytic_rates(m).qber

    return float(brentq(lambda b: qber_at_threshold_bw(b) - thr, 1e4, 1e12,
                        xtol=1e-2))


def fig3d_model(calibration: Calibration, loss_db: float = FIG3D_TOTAL_LOSS_DB,
                bandwidth_ghz: float = FIG3D_REFERENCE_BANDWIDTH_GHZ,
                n_channels: int = 1) -> AnalyticLinkModel:
    """Analytic model of one projection channel at the frozen settings.

    The per-channel pair rate scales linearly with bandwidth at fixed
    source spectral density.
    """
    eta = 10.0 ** (-(loss_db / 2.0) / 10.0)
    scale = bandwidth_ghz / FIG3D_REFERENCE_BANDWIDTH_GHZ
    return AnalyticLinkModel(
        pair_rate_in_band=calibration.fig3d_pair_rate_per_channel * scale,
        transmittance_alice=eta,
        transmittance_bob=eta,
        dark_rate_alice=FIG3D_DARK_PER_SIDE,
        dark_rate_bob=FIG3D_DARK_PER_SIDE,
        t_c=1e-9,
        q_sys=calibration.q_sys_channel1,
        n_channels=n_channels,
    )


# Frozen output of derive_calibration() with the default detector and a
# 1 ns window; regression-checked in the tests.
FROZEN_CALIBRATION = Calibration(
    version=CALIBRATION_VERSION,
    full_spectrum_pair_rate=1.9638250997323847e9,
    v_sys_channel1=0.9767812636603043,
    v_sys_channel2=0.8808742708887531,
    fig3d_pair_rate_per_channel=6.5906417686778694e7,
)
