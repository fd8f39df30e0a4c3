"""Channel planning: the measured two-pair plan with its pairing check,
synthetic frequency grids over the atmospheric window, and the
coherence-time limit of narrow filtering."""

from wmqkd import build_grid_plan, build_table1_plan, coherence_time
from wmqkd.channels import energy_mismatches, plan_to_csv, table1_labeling_report

plan = build_table1_plan()
print("Measured two-pair plan (energy-matched pairing):")
for s, i in plan.pairs:
    print(f"  pair {s.index}: signal {s.center} nm ({s.fwhm} nm, "
          f"eff {s.diffraction_efficiency}) <-> idler {i.center} nm "
          f"({i.fwhm} nm, eff {i.diffraction_efficiency})")
print(f"  plan center {plan.spdc_center} nm; wavelength-sum mismatches "
      f"{energy_mismatches(plan)} nm")

rep = table1_labeling_report()
print("\nPairing check (|nu_s + nu_i - 2 nu_0| in GHz about 810 nm):")
print(f"  as labeled      : {[round(x, 1) for x in rep['as_labeled_offsets_ghz']]}")
print(f"  energy matched  : {[round(x, 1) for x in rep['energy_matched_offsets_ghz']]}")
print(f"  -> {rep['note']}")

print("\nGrid plan over the 761-970 nm atmospheric window at 6.25 GHz:")
grid, counts = build_grid_plan(761.0, 970.0, 6.25e9, 6.25e9)
print(f"  total bands {counts['total_bands']}, paired channels "
      f"{counts['paired_channels']}, unpaired {counts['unpaired_bands']}")
print(f"  grid spans {grid.pairs[-1][0].center:.2f} .. "
      f"{grid.pairs[-1][1].center:.2f} nm about {grid.spdc_center:.2f} nm")

print("\nCoherence time vs channel bandwidth (tau = 0.3125 / bandwidth):")
for bw in (6.25e9, 19e9, 46e9, 110e9):
    print(f"  {bw/1e9:7.2f} GHz -> {coherence_time(bw)*1e12:7.2f} ps")
print("  (all far below the 1 ns coincidence window)")

print("\nCSV export (first three rows):")
print("\n".join(plan_to_csv(plan).splitlines()[:3]))
