"""Walk through the photon-pair source model: the normalized spectrum,
spectral band fractions, and seeded sampling of pair emission."""

import numpy as np

from wmqkd import SourceConfig, band_fraction, sample_pair_stream, spectral_density

cfg = SourceConfig.from_filtered_brightness(
    brightness_cps_per_mw=7.8e5, pump_power_mw=50.0, filter_fwhm_nm=0.1,
)
print("Source configuration")
print(f"  signal / idler centers : {cfg.center_wavelength_signal} / "
      f"{cfg.center_wavelength_idler} nm about {cfg.spdc_center} nm")
print(f"  spectral FWHM          : {cfg.spectral_fwhm} nm")
print(f"  full-spectrum pair rate: {cfg.pair_rate:.4g} pairs/s")
print(f"  (inverted from 3.9e7 pairs/s measured in a 0.1 nm band)")

print("\nNormalized spectrum (Gaussian, peak 1):")
for d in (0.0, 1.0, 4.73 / 2, 4.0):
    print(f"  detuning {d:+.3f} nm -> {spectral_density(cfg, d):.4f}")

print("\nBand fractions (share of all pairs in a passband):")
for center, width in ((0.0, 0.1), (-0.26, 0.12), (+0.26, 0.12), (0.0, 20.0)):
    f = band_fraction(cfg, center, width)
    print(f"  {width:5.2f} nm band at {center:+.2f} nm -> {f:.5f}")

print("\nSampling 1 ms of emission (seeded):")
stream = sample_pair_stream(cfg.with_pair_rate(2e6), duration=1e-3, seed=42)
print(f"  {len(stream)} pairs (expected {2e6 * 1e-3:.0f})")
ev = stream[0]
print(f"  first event: t = {ev.emission_time * 1e6:.2f} us, "
      f"detuning = {ev.detuning:+.3f} nm")
off = (stream.signal_wavelengths - cfg.center_wavelength_signal
       + stream.idler_wavelengths - cfg.center_wavelength_idler)
print(f"  wavelength anticorrelation residual: max |offset| = {np.max(np.abs(off))}")
