"""Key-rate analysis: visibility, QBER, binary entropy, secure-key
formula, the analytic link model, pair-rate optimization, and n-channel
scaling projections.

The secure-key estimate per basis block is
``CC * 1/2 * (1 - (1 + f) * H2(Q))`` with negative per-basis terms
clamped to zero; ``f`` is the bidirectional error-correction efficiency
(default 1.1).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .coincidence import CountsMatrix

DEFAULT_F_EC = 1.1


def binary_entropy(x) -> np.ndarray | float:
    """Binary Shannon entropy ``-x log2 x - (1-x) log2 (1-x)`` in bits.

    Defined by continuity at the endpoints: H2(0) = H2(1) = 0.  Raises
    for arguments outside [0, 1].
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"binary_entropy argument must be in [0, 1], got {x}")
    inner = (arr > 0.0) & (arr < 1.0)
    out = np.zeros_like(arr)
    a = arr[inner]
    out[inner] = -a * np.log2(a) - (1.0 - a) * np.log2(1.0 - a)
    return out if out.ndim else float(out)


def visibility(counts: CountsMatrix) -> float:
    """Polarization-correlation visibility of one count table.

    For the anti-symmetric entangled state the anti-correlated
    combinations are the maximum counts:
    ``V = (CC_01 + CC_10 - CC_00 - CC_11) / total``.
    Returns NaN (flagged undefined, distinct from 0) for empty tables.
    """
    total = counts.total
    if total == 0:
        return float("nan")
    cc = counts.cc
    return float((cc[0, 1] + cc[1, 0] - cc[0, 0] - cc[1, 1]) / total)


def qber(counts: CountsMatrix) -> float:
    """Quantum bit error rate ``Q = erroneous/total = (1 - V)/2``."""
    total = counts.total
    if total == 0:
        return float("nan")
    return counts.erroneous / total


def secure_key(counts_hv: CountsMatrix, counts_da: CountsMatrix,
               f_ec: float = DEFAULT_F_EC) -> float:
    """Secure key (bits) extractable from one pair of basis blocks.

    Each basis contributes ``CC * 1/2 * (1 - (1+f) H2(Q))``; negative
    contributions mean "no key" for that basis and are clamped to zero.
    """
    if f_ec < 1.0:
        raise ValueError(f"f_ec must be >= 1, got {f_ec}")
    bits = 0.0
    for counts in (counts_hv, counts_da):
        total = counts.total
        if total == 0:
            continue
        q = qber(counts)
        bits += max(0.0, total * 0.5 * (1.0 - (1.0 + f_ec) * binary_entropy(q)))
    return bits


def secure_key_from_rates(cc_rate: float, q: float, f_ec: float = DEFAULT_F_EC) -> float:
    """Per-second secure key for a coincidence rate split evenly over the
    two bases, both at QBER ``q``."""
    if cc_rate <= 0.0:
        return 0.0
    return max(0.0, cc_rate * 0.5 * (1.0 - (1.0 + f_ec) * binary_entropy(q)))


def qber_threshold(f_ec: float = DEFAULT_F_EC, tol: float = 1e-6) -> float:
    """QBER at which the secure key vanishes: root of 1 = (1+f) H2(Q).

    Solved by bisection on (0, 0.5) to ``tol`` absolute.  The threshold
    decreases as error correction becomes less efficient (larger f).
    """
    if f_ec < 1.0:
        raise ValueError(f"f_ec must be >= 1, got {f_ec}")
    lo, hi = 1e-15, 0.5

    def g(q):
        return 1.0 - (1.0 + f_ec) * binary_entropy(q)

    # g(lo) > 0 > g(hi) since H2 is increasing on (0, 1/2).
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class AnalyticLinkModel:
    """Closed-form per-channel link model.

    Parameters
    ----------
    pair_rate_in_band : float
        Pairs/s generated into one wavelength channel.
    transmittance_alice, transmittance_bob : float
        End-to-end photon survival per side (link x filter x detector).
    dark_rate_alice, dark_rate_bob : float
        Total dark counts/s per side (all detectors of the receiver).
    t_c : float
        Coincidence window width (s).
    q_sys : float
        Systematic error fraction of true coincidences, (1 - v_sys)/2.
    n_channels : int
        Identical channels operated in parallel.
    f_ec : float
        Error-correction efficiency for the key formula.
    window_efficiency : float
        Fraction of true coincidences falling inside the window (1 for
        negligible jitter; lower it to model jitter-broadened pairs).
    """

    pair_rate_in_band: float
    transmittance_alice: float
    transmittance_bob: float
    dark_rate_alice: float = 0.0
    dark_rate_bob: float = 0.0
    t_c: float = 1e-9
    q_sys: float = 0.0
    n_channels: int = 1
    f_ec: float = DEFAULT_F_EC
    window_efficiency: float = 1.0

    def __post_init__(self):
        for name in ("transmittance_alice", "transmittance_bob"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if not 0.0 <= self.q_sys <= 0.5:
            raise ValueError(f"q_sys must be in [0, 0.5], got {self.q_sys}")
        if self.n_channels < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")
        if self.pair_rate_in_band < 0:
            raise ValueError("pair_rate_in_band must be >= 0")
        if not 0.0 < self.window_efficiency <= 1.0:
            raise ValueError("window_efficiency must be in (0, 1]")


@dataclass(frozen=True)
class AnalyticRates:
    """Per-channel rates predicted by the analytic model (all per second)
    plus the aggregate key rate over all channels."""

    cc_true: float
    cc_accidental: float
    singles_alice: float
    singles_bob: float
    qber: float
    key_rate_per_channel: float
    key_rate_total: float


def analytic_rates(model: AnalyticLinkModel) -> AnalyticRates:
    """Evaluate the analytic link model for one channel and scale by n.

    Singles per side are ``B eta + d``; true coincidences
    ``B eta_A eta_B`` (times the window efficiency); accidentals
    ``S_A S_B t_c``.  The QBER mixes the systematic error on true pairs
    with the 50% error rate of accidentals; the key applies the secure
    key formula with counts split evenly across the two bases.
    """
    b = model.pair_rate_in_band
    s_a = b * model.transmittance_alice + model.dark_rate_alice
    s_b = b * model.transmittance_bob + model.dark_rate_bob
    cc_true = b * model.transmittance_alice * model.transmittance_bob \
        * model.window_efficiency
    cc_acc = s_a * s_b * model.t_c
    total = cc_true + cc_acc
    q = (model.q_sys * cc_true + 0.5 * cc_acc) / total if total > 0 else float("nan")
    per_channel = secure_key_from_rates(total, q, model.f_ec) if total > 0 else 0.0
    return AnalyticRates(
        cc_true=cc_true,
        cc_accidental=cc_acc,
        singles_alice=s_a,
        singles_bob=s_b,
        qber=q,
        key_rate_per_channel=per_channel,
        key_rate_total=model.n_channels * per_channel,
    )


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PairRateOptimum:
    """Result of a brightness optimization."""

    pair_rate: float
    key_rate_total: float
    interior: bool
    warning: str | None = None


def optimize_pair_rate(
    model: AnalyticLinkModel,
    bracket: tuple[float, float] = (1e2, 1e12),
    n_grid: int = 121,
    tol: float = 1e-3,
) -> PairRateOptimum:
    """Maximize the aggregate key rate over the in-band pair rate.

    Scans a log-spaced grid over ``bracket`` to locate the best sample,
    then refines with golden-section search in log space.  When the best
    grid sample sits on the bracket edge (no interior optimum, e.g. no
    accidental penalty), the edge sample is returned with a warning.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    def rate_at(log_b: float) -> float:
        return analytic_rates(replace(model, pair_rate_in_band=10.0 ** log_b)).key_rate_total

    grid = np.linspace(math.log10(lo), math.log10(hi), n_grid)
    vals = np.array([rate_at(g) for g in grid])
    k = int(np.argmax(vals))
    if k == 0 or k == n_grid - 1:
        return PairRateOptimum(
            pair_rate=float(10.0 ** grid[k]),
            key_rate_total=float(vals[k]),
            interior=False,
            warning="no interior optimum on the bracket; returning best sample",
        )

    a, b = grid[k - 1], grid[k + 1]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = rate_at(c), rate_at(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = rate_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = rate_at(d)
    log_opt = 0.5 * (a + b)
    return PairRateOptimum(
        pair_rate=float(10.0 ** log_opt),
        key_rate_total=float(rate_at(log_opt)),
        interior=True,
    )


def scaling_curve(model: AnalyticLinkModel, n_values, loss_grid_db,
                  base_transmittance_alice: float = 1.0,
                  base_transmittance_bob: float = 1.0,
                  optimize_b: bool = False) -> list[dict]:
    """Aggregate key rate versus channel count and total link loss.

    For each loss the per-side transmittance is the base value times
    ``10**(-(loss/2)/10)``; the aggregate rate is exactly linear in the
    channel count under the identical-channel assumption.  With
    ``optimize_b`` the per-channel pair rate is re-optimized per loss.
    """
    rows = []
    for loss in loss_grid_db:
        eta = 10.0 ** (-(loss / 2.0) / 10.0)
        m = replace(
            model,
            transmittance_alice=base_transmittance_alice * eta,
            transmittance_bob=base_transmittance_bob * eta,
            n_channels=1,
        )
        if optimize_b:
            opt = optimize_pair_rate(m)
            m = replace(m, pair_rate_in_band=opt.pair_rate)
        res = analytic_rates(m)
        for n in n_values:
            rows.append({
                "n": int(n),
                "loss_db": float(loss),
                "qber": res.qber,
                "key_rate_bps": n * res.key_rate_per_channel,
            })
    return rows


CURVE_CSV_COLUMNS = ("n", "loss_db", "qber", "key_rate_bps")


def curve_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_CSV_COLUMNS)
    for r in rows:
        w.writerow([r["n"], f"{r['loss_db']:.6g}", _fmt(r["qber"]),
                    _fmt(r["key_rate_bps"])])
    return buf.getvalue()


def _fmt(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.10g}"


@dataclass
class ChannelResult:
    """Measured quantities for one channel pair (or a merged pipeline)."""

    channel_pair: int
    visibility_hv: float
    visibility_da: float
    qber_hv: float
    qber_da: float
    secure_key_bits: float
    secure_key_rate: float
    cc_hv: int
    cc_da: int
    singles_alice: float
    singles_bob: float
    accidental_estimate: float
    duration: float


@dataclass
class KeyRateReport:
    """Per-channel results plus aggregate totals for one scenario point."""

    channels: list[ChannelResult] = field(default_factory=list)
    f_ec: float = DEFAULT_F_EC
    warnings: list[str] = field(default_factory=list)

    @property
    def total_secure_key_bits(self) -> float:
        return sum(c.secure_key_bits for c in self.channels)

    @property
    def total_secure_key_rate(self) -> float:
        return sum(c.secure_key_rate for c in self.channels)

    def to_dict(self) -> dict:
        return {
            "f_ec": self.f_ec,
            "warnings": list(self.warnings),
            "channels": [vars(c).copy() for c in self.channels],
            "total_secure_key_bits": self.total_secure_key_bits,
            "total_secure_key_rate": self.total_secure_key_rate,
        }


REPORT_CSV_COLUMNS = (
    "channel_pair", "visibility_hv", "visibility_da", "qber_hv", "qber_da",
    "secure_key_bits", "secure_key_rate_bps", "cc_hv", "cc_da",
    "singles_alice", "singles_bob", "accidental_estimate", "duration_s",
)


def report_to_csv(report: KeyRateReport) -> str:
    """Serialize a report as CSV, one row per channel result."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_CSV_COLUMNS)
    for c in report.channels:
        w.writerow([
            c.channel_pair, _fmt(c.visibility_hv), _fmt(c.visibility_da),
            _fmt(c.qber_hv), _fmt(c.qber_da), _fmt(c.secure_key_bits),
            _fmt(c.secure_key_rate), c.cc_hv, c.cc_da,
            _fmt(c.singles_alice), _fmt(c.singles_bob),
            _fmt(c.accidental_estimate), _fmt(c.duration),
        ])
    return buf.getvalue()


def channel_result(counts_hv: CountsMatrix, counts_da: CountsMatrix,
                   singles_alice: float, singles_bob: float,
                   accidental: float, f_ec: float = DEFAULT_F_EC) -> ChannelResult:
    """Assemble the per-channel report entry from two basis blocks."""
    duration = counts_hv.duration + counts_da.duration
    bits = secure_key(counts_hv, counts_da, f_ec)
    return ChannelResult(
        channel_pair=counts_hv.channel_pair,
        visibility_hv=visibility(counts_hv),
        visibility_da=visibility(counts_da),
        qber_hv=qber(counts_hv),
        qber_da=qber(counts_da),
        secure_key_bits=bits,
        secure_key_rate=bits / duration if duration > 0 else 0.0,
        cc_hv=counts_hv.total,
        cc_da=counts_da.total,
        singles_alice=singles_alice,
        singles_bob=singles_bob,
        accidental_estimate=accidental,
        duration=duration,
    )
