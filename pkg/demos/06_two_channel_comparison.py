"""End-to-end comparison of the multiplexed pipelines against the merged
(non-multiplexed) baseline at the calibrated 30 dB reference point: the
merged detectors see twice the singles rate, quadrupling accidentals,
doubling the QBER and cutting the extractable key."""

from wmqkd import CoincidenceWindow
from wmqkd.calibration import DEFAULT_DETECTOR, FROZEN_CALIBRATION
from wmqkd.channels import build_table1_plan
from wmqkd.simulate import simulate_point

cal = FROZEN_CALIBRATION
print("Frozen calibration:")
print(f"  full-spectrum pair rate  {cal.full_spectrum_pair_rate:.4g} pairs/s")
print(f"  channel systematic visibilities "
      f"{cal.v_sys_channel1:.4f} / {cal.v_sys_channel2:.4f}")

print("\nSimulating 2 s at 30 dB total loss (seeded)...")
res = simulate_point(
    cal.source(), build_table1_plan(), loss_db=30.0,
    detector=DEFAULT_DETECTOR, window=CoincidenceWindow(1e-9),
    duration=2.0, seed=2024,
    channel_visibilities=cal.channel_visibilities(),
)

rows = {f"ch{idx}": p.to_channel_result(1.1) for idx, p in res.channels.items()}
rows["merged"] = res.merged.to_channel_result(1.1)

print(f"\n{'pipeline':<10} {'coinc':>8} {'QBER_HV':>8} {'QBER_DA':>8} "
      f"{'singles_A/s':>12} {'key bps':>9}")
for name, r in rows.items():
    print(f"{name:<10} {r.cc_hv + r.cc_da:>8} {r.qber_hv:>8.4f} "
          f"{r.qber_da:>8.4f} {r.singles_alice:>12.0f} "
          f"{r.secure_key_rate:>9.1f}")

wm = rows["ch1"].secure_key_rate + rows["ch2"].secure_key_rate
merged = rows["merged"].secure_key_rate
print(f"\nmultiplexed total {wm:.1f} bps vs merged {merged:.1f} bps "
      f"-> {wm / merged:.2f}x higher with wavelength multiplexing")
print(f"channel 1 alone gives {rows['ch1'].secure_key_rate / merged:.2f}x "
      "the merged rate despite seeing half the photons")
