"""Coincidence counting: greedy one-to-one matching in a 1 ns window,
count tabulation, and the accidental-coincidence law S_A * S_B * t_c."""

import numpy as np

from wmqkd import CoincidenceWindow, accidental_estimate, find_coincidences, tabulate
from wmqkd.detection import Basis, TagStream

TICK = 1.0 / 12.15e9


def poisson_tags(rate, duration, seed, outcome_bias=None, det=0):
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate * duration)
    ticks = np.sort(rng.integers(0, int(duration / TICK), n))
    outcomes = rng.integers(0, 2, n).astype(np.int8)
    return TagStream(ticks, outcomes, np.full(n, det, np.int32),
                     np.zeros(n, np.int32), np.zeros(n, bool), TICK, duration)


window = CoincidenceWindow(1e-9)
print(f"Window: t_c = {window.t_c*1e9:.1f} ns; on the "
      f"{TICK*1e12:.2f} ps tick grid a pair matches within "
      f"{window.half_width_ticks(TICK)} ticks "
      f"(effective width {window.effective_width(TICK)*1e9:.3f} ns)")

duration, rate = 10.0, 1e5
alice = poisson_tags(rate, duration, seed=1)
bob = poisson_tags(rate, duration, seed=2, det=1)
m = find_coincidences(alice, bob, window)
expected = rate * rate * window.effective_width(TICK) * duration
print(f"\nUncorrelated streams at {rate:.0f}/s for {duration:.0f} s:")
print(f"  matches = {len(m)}, accidental law predicts {expected:.1f}")

est = accidental_estimate(alice, bob, window, delay=2e-7)
print(f"  delayed-window estimate (200 ns shift): {est}")

counts = tabulate(m, Basis.HV)
print(f"\nJoint-outcome table of the accidental matches (HV basis):")
print(f"  cc = {counts.cc.tolist()}  (uniform: uncorrelated outcomes)")
print(f"  erroneous fraction {counts.erroneous / counts.total:.3f} (expect 0.5)")

# Correlated streams: insert shared detection times.
rng = np.random.default_rng(3)
shared = np.sort(rng.integers(0, int(duration / TICK), 5000))
ticks_a = np.sort(np.concatenate([alice.ticks, shared]))
ticks_b = np.sort(np.concatenate([bob.ticks, shared]))
a2 = TagStream(ticks_a, np.zeros(ticks_a.size, np.int8),
               np.zeros(ticks_a.size, np.int32), np.zeros(ticks_a.size, np.int32),
               np.zeros(ticks_a.size, bool), TICK, duration)
b2 = TagStream(ticks_b, np.ones(ticks_b.size, np.int8),
               np.full(ticks_b.size, 1, np.int32), np.zeros(ticks_b.size, np.int32),
               np.zeros(ticks_b.size, bool), TICK, duration)
m2 = find_coincidences(a2, b2, window)
print(f"\nWith 5000 true (simultaneous) pairs injected: {len(m2)} matches")
print("  ~= true pairs + accidental floor; the delayed estimate still "
      f"reports only the floor: {accidental_estimate(a2, b2, window, 2e-7)}")
