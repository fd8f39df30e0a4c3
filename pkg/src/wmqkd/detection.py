"""Detection chain: link loss, polarization measurement, and realistic
detector time tagging (efficiency, dark counts, jitter, dead time, tick
quantization), plus post-hoc merging of detector streams.

A detection module is one polarization analyzer with two output
detectors (one per outcome).  Tags carry integer timestamps in units of
the time-tagger tick (1/12.15 GHz by default).
"""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .source import PairStream, _rng

DEFAULT_TICK_S = 1.0 / 12.15e9


class Basis(enum.Enum):
    HV = "HV"
    DA = "DA"


class Outcome(enum.IntEnum):
    """Polarization outcome labels; the low bit selects the detector
    output port within a module (H/D -> port 0, V/A -> port 1)."""

    H = 0
    V = 1
    D = 2
    A = 3


BASIS_OUTCOMES = {Basis.HV: (Outcome.H, Outcome.V), Basis.DA: (Outcome.D, Outcome.A)}


@dataclass(frozen=True)
class DetectorConfig:
    """Detector and time-tagger parameters.

    ``efficiency`` is the photon detection probability, ``dark_rate`` the
    per-detector dark count rate (counts/s), ``jitter_sigma`` the normal
    timing jitter per detector (s), ``dead_time`` the non-paralyzable
    recovery time per detector (s), ``tick`` the timestamp resolution (s).
    """

    efficiency: float = 0.60
    dark_rate: float = 100.0
    jitter_sigma: float = 250e-12
    dead_time: float = 50e-9
    tick: float = DEFAULT_TICK_S

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if self.dark_rate < 0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.dead_time < 0:
            raise ValueError(f"dead_time must be >= 0, got {self.dead_time}")
        if self.tick <= 0:
            raise ValueError(f"tick must be > 0, got {self.tick}")


@dataclass(frozen=True)
class TimeTag:
    """One detection event (scalar view into a :class:`TagStream`)."""

    detector_id: int
    tick_time: int
    outcome: Outcome
    channel_index: int
    is_dark: bool = False


class TagStream:
    """Time-ordered detection events of one or more detectors.

    Stored as parallel arrays; canonically sorted by (tick, detector_id).
    ``dark`` marks tags that originated as dark counts (they still carry
    the outcome label of the port that fired).
    """

    def __init__(self, ticks, outcomes, detector_ids, channel_indices, dark,
                 tick_seconds: float, duration: float):
        self.ticks = np.asarray(ticks, dtype=np.int64)
        self.outcomes = np.asarray(outcomes, dtype=np.int8)
        self.detector_ids = np.asarray(detector_ids, dtype=np.int32)
        self.channel_indices = np.asarray(channel_indices, dtype=np.int32)
        self.dark = np.asarray(dark, dtype=bool)
        self.tick_seconds = float(tick_seconds)
        self.duration = float(duration)
        n = self.ticks.size
        for arr in (self.outcomes, self.detector_ids, self.channel_indices, self.dark):
            if arr.size != n:
                raise ValueError("all tag arrays must have the same length")

    @classmethod
    def empty(cls, tick_seconds: float, duration: float) -> "TagStream":
        z = np.empty(0)
        return cls(z, z, z, z, z, tick_seconds, duration)

    def __len__(self) -> int:
        return self.ticks.size

    def __getitem__(self, i: int) -> TimeTag:
        return TimeTag(
            int(self.detector_ids[i]), int(self.ticks[i]),
            Outcome(int(self.outcomes[i])), int(self.channel_indices[i]),
            bool(self.dark[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def times(self) -> np.ndarray:
        """Tag times in seconds."""
        return self.ticks * self.tick_seconds

    def is_sorted(self) -> bool:
        if len(self) < 2:
            return True
        d = np.diff(self.ticks)
        ok = d > 0
        ties = d == 0
        ok_ties = self.detector_ids[1:][ties] >= self.detector_ids[:-1][ties]
        return bool(np.all(ok | ties) and np.all(ok_ties))

    def sorted(self) -> "TagStream":
        order = np.lexsort((self.detector_ids, self.ticks))
        return self.take(order)

    def take(self, idx) -> "TagStream":
        return TagStream(
            self.ticks[idx], self.outcomes[idx], self.detector_ids[idx],
            self.channel_indices[idx], self.dark[idx],
            self.tick_seconds, self.duration,
        )

    def singles_rate(self) -> float:
        return len(self) / self.duration if self.duration > 0 else 0.0


class Survival(NamedTuple):
    """Per-photon survival flags after transmission losses."""

    signal: np.ndarray
    idler: np.ndarray

    @property
    def both(self) -> np.ndarray:
        return self.signal & self.idler

    @property
    def signal_only(self) -> np.ndarray:
        return self.signal & ~self.idler

    @property
    def idler_only(self) -> np.ndarray:
        return ~self.signal & self.idler


def transmit(
    stream: PairStream,
    total_loss_db: float,
    extra_signal_loss: float = 0.0,
    extra_idler_loss: float = 0.0,
    seed=0,
) -> Survival:
    """Apply symmetric channel loss plus per-side extra loss.

    The total two-sided loss is split evenly, so each photon survives
    independently with probability ``10**(-(total_loss_db/2)/10)`` times
    ``1 - extra loss`` for its side.  All four survival combinations are
    preserved so singles can be accounted for downstream.
    """
    if total_loss_db < 0:
        raise ValueError(f"total_loss_db must be >= 0, got {total_loss_db}")
    for name, x in (("extra_signal_loss", extra_signal_loss),
                    ("extra_idler_loss", extra_idler_loss)):
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {x}")
    p_side = 10.0 ** (-(total_loss_db / 2.0) / 10.0)
    p_signal = p_side * (1.0 - extra_signal_loss)
    p_idler = p_side * (1.0 - extra_idler_loss)
    rng = _rng(seed)
    n = len(stream)
    return Survival(
        signal=rng.random(n) < p_signal,
        idler=rng.random(n) < p_idler,
    )


def joint_outcome_probabilities(v_sys: float) -> np.ndarray:
    """Joint outcome distribution of the anti-symmetric entangled state
    in one shared basis, ordered (00, 01, 10, 11) with bit 1 = V or A.

    Anti-correlated combinations each occur with probability
    (1 + v)/4, correlated ones with (1 - v)/4; marginals are uniform.
    """
    if not 0.0 <= v_sys <= 1.0:
        raise ValueError(f"v_sys must be in [0, 1], got {v_sys}")
    anti = (1.0 + v_sys) / 4.0
    corr = (1.0 - v_sys) / 4.0
    return np.array([corr, anti, anti, corr])


def measure_polarization(pair, basis: Basis, v_sys: float, seed=0):
    """Joint polarization outcome of one surviving pair.

    Returns ``(outcome_signal, outcome_idler)`` drawn from the
    anti-correlated joint distribution in the chosen basis.
    """
    s_bits, i_bits = measure_pair_outcomes(1, v_sys, _rng(seed))
    o0, o1 = BASIS_OUTCOMES[basis]
    pick = (o0, o1)
    return pick[int(s_bits[0])], pick[int(i_bits[0])]


def measure_pair_outcomes(n: int, v_sys: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized joint outcomes for n pairs; returns signal and idler
    outcome bits (0 or 1 within the measurement basis)."""
    p = joint_outcome_probabilities(v_sys)
    cells = rng.choice(4, size=n, p=p)
    return (cells >> 1).astype(np.int8), (cells & 1).astype(np.int8)


def measure_single_outcomes(n: int, rng) -> np.ndarray:
    """Outcome bits for photons whose partner was lost (uniform marginal)."""
    return rng.integers(0, 2, size=n, dtype=np.int8)


def _dead_time_filter(times: np.ndarray, dead: float) -> np.ndarray:
    """Boolean keep-mask for a non-paralyzable dead-time filter.

    An event is kept iff it is strictly later than the last kept event
    plus ``dead``.  Vectorized fixed-point iteration: per pass, among
    events violating the spacing to their current predecessor, exactly
    the first of each violating run is provably dead and dropped.
    """
    n = times.size
    keep = np.ones(n, dtype=bool)
    if n < 2 or dead < 0:
        return keep
    idx = np.arange(n)
    while True:
        alive = idx[keep]
        if alive.size < 2:
            return keep
        t = times[alive]
        bad = ~(t[1:] > t[:-1] + dead)
        if not bad.any():
            return keep
        first_of_run = bad & np.concatenate(([True], ~bad[:-1]))
        keep[alive[1:][first_of_run]] = False


def detect(
    arrival_times: np.ndarray,
    outcome_bits: np.ndarray,
    config: DetectorConfig,
    duration: float,
    seed,
    channel_index: int = 0,
    basis: Basis = Basis.HV,
    detector_ids: tuple[int, int] = (0, 1),
) -> TagStream:
    """Convert photon arrivals at one analyzer module into time tags.

    Pipeline order: (1) thin arrivals by detector efficiency; (2) add
    dark counts as an independent Poisson process with uniformly random
    port assignment; (3) add zero-mean normal jitter to every event;
    (4) re-sort; (5) apply non-paralyzable dead time per physical
    detector; (6) quantize to ticks.

    ``outcome_bits`` selects the output port (0 or 1) for each arrival;
    ``detector_ids`` names the two physical detectors.
    """
    arrival_times = np.asarray(arrival_times, dtype=np.float64)
    outcome_bits = np.asarray(outcome_bits, dtype=np.int8)
    if arrival_times.size > 1 and np.any(np.diff(arrival_times) < 0):
        raise ValueError("arrival_times must be sorted")
    if arrival_times.shape != outcome_bits.shape:
        raise ValueError("arrival_times and outcome_bits must match in length")
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    rng = _rng(seed)

    kept = rng.random(arrival_times.size) < config.efficiency
    t = arrival_times[kept]
    bits = outcome_bits[kept]
    dark = np.zeros(t.size, dtype=bool)

    n_dark = rng.poisson(2.0 * config.dark_rate * duration)
    if n_dark:
        t = np.concatenate([t, rng.uniform(0.0, duration, n_dark)])
        bits = np.concatenate([bits, rng.integers(0, 2, n_dark, dtype=np.int8)])
        dark = np.concatenate([dark, np.ones(n_dark, dtype=bool)])

    if config.jitter_sigma > 0 and t.size:
        t = t + rng.normal(0.0, config.jitter_sigma, t.size)

    order = np.argsort(t, kind="stable")
    t, bits, dark = t[order], bits[order], dark[order]

    keep = np.ones(t.size, dtype=bool)
    for b in (0, 1):
        sel = bits == b
        keep[sel] = _dead_time_filter(t[sel], config.dead_time)
    t, bits, dark = t[keep], bits[keep], dark[keep]

    ticks = np.rint(t / config.tick).astype(np.int64)
    o0, o1 = BASIS_OUTCOMES[basis]
    outcomes = np.where(bits == 0, np.int8(o0.value), np.int8(o1.value))
    det = np.where(bits == 0, detector_ids[0], detector_ids[1]).astype(np.int32)
    stream = TagStream(
        ticks, outcomes, det,
        np.full(t.size, channel_index, dtype=np.int32), dark,
        config.tick, duration,
    )
    return stream.sorted()


def merge_detectors(
    tags_a: TagStream,
    tags_b: TagStream,
    global_dead_time: float,
    merged_detector_id: int | None = None,
) -> TagStream:
    """Merge two detector streams into one effective detector.

    The streams are merge-sorted; walking the result, an event is kept
    only if it is strictly later than the last kept event plus the
    global dead time.  Simultaneous events keep the first in
    (tick, detector_id) order and drop the rest.  The output carries a
    single detector id and behaves as one detector's stream.
    """
    for s in (tags_a, tags_b):
        if not s.is_sorted():
            raise ValueError("input tag streams must be sorted")
    if tags_a.tick_seconds != tags_b.tick_seconds:
        raise ValueError("tick resolution mismatch between streams")
    tick_s = tags_a.tick_seconds
    merged = TagStream(
        np.concatenate([tags_a.ticks, tags_b.ticks]),
        np.concatenate([tags_a.outcomes, tags_b.outcomes]),
        np.concatenate([tags_a.detector_ids, tags_b.detector_ids]),
        np.concatenate([tags_a.channel_indices, tags_b.channel_indices]),
        np.concatenate([tags_a.dark, tags_b.dark]),
        tick_s,
        max(tags_a.duration, tags_b.duration),
    ).sorted()
    dead_ticks = global_dead_time / tick_s
    keep = _dead_time_filter(merged.ticks.astype(np.float64), dead_ticks)
    out = merged.take(keep)
    if merged_detector_id is None and len(out):
        merged_detector_id = int(out.detector_ids.min())
    if merged_detector_id is not None:
        out.detector_ids = np.full(len(out), merged_detector_id, dtype=np.int32)
    return out


def concatenate_streams(streams: list[TagStream]) -> TagStream:
    """Union of several tag streams, re-sorted canonically."""
    if not streams:
        raise ValueError("no streams to concatenate")
    tick_s = streams[0].tick_seconds
    dur = max(s.duration for s in streams)
    return TagStream(
        np.concatenate([s.ticks for s in streams]),
        np.concatenate([s.outcomes for s in streams]),
        np.concatenate([s.detector_ids for s in streams]),
        np.concatenate([s.channel_indices for s in streams]),
        np.concatenate([s.dark for s in streams]),
        tick_s, dur,
    ).sorted()


TAG_CSV_COLUMNS = ("detector_id", "tick_time", "outcome", "channel_index")


def export_tags_csv(stream: TagStream, directory: str) -> list[str]:
    """Write one CSV file per detector id; returns the file paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for det in np.unique(stream.detector_ids):
        sub = stream.take(stream.detector_ids == det)
        path = os.path.join(directory, f"detector_{int(det)}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TAG_CSV_COLUMNS)
            for i in range(len(sub)):
                w.writerow([
                    int(sub.detector_ids[i]), int(sub.ticks[i]),
                    Outcome(int(sub.outcomes[i])).name, int(sub.channel_indices[i]),
                ])
        paths.append(path)
    return paths
