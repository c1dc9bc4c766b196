"""One-third-octave band arithmetic: band edges, band RMS pressures, energy-averaged
levels and transmission loss."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

P_REF = 2e-5

# nominal labels of the base-10 mid frequencies, one decade
_NOMINAL_DECADE = (10, 12.5, 16, 20, 25, 31.5, 40, 50, 63, 80)


@dataclass(frozen=True)
class ThirdOctaveBand:
    index: int
    f_l: float
    f_m: float
    f_u: float

    @property
    def nominal(self) -> float:
        decade, k = divmod(self.index, 10)
        return _NOMINAL_DECADE[k] * 10.0 ** (decade + 2)


def band(index: int) -> ThirdOctaveBand:
    """Band number ``index`` of the base-10 system (index 0 is 1 kHz)."""
    # shared edges come from the same expression so neighbouring bands meet exactly
    edge = lambda k: 1000.0 * 10.0 ** ((2 * k - 1) / 20.0)
    return ThirdOctaveBand(index, edge(index), 1000.0 * 10.0 ** (index / 10.0), edge(index + 1))


def third_octave_bands(f_min: float, f_max: float) -> list[ThirdOctaveBand]:
    """All bands whose exact mid frequency lies in [f_min, f_max].

    Limits are compared against nominal labels as well, so [8, 630] picks the
    8 Hz band (exact mid 7.94 Hz) and the 630 Hz band (exact mid 630.96 Hz).
    """
    if f_min <= 0 or f_max <= f_min:
        return []
    lo = math.floor(10.0 * math.log10(f_min / 1000.0)) - 1
    hi = math.ceil(10.0 * math.log10(f_max / 1000.0)) + 1
    out = []
    for n in range(lo, hi + 1):
        b = band(n)
        if (f_min <= b.f_m <= f_max) or (f_min <= b.nominal <= f_max):
            out.append(b)
    return out


@dataclass
class NarrowbandSpectrum:
    frequencies: np.ndarray
    values: np.ndarray  # shape (n_mics, n_frequencies), complex Pa

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.values.shape[1] != self.frequencies.size:
            raise ValueError("one value per frequency and microphone expected")


def band_mask(frequencies: np.ndarray, b: ThirdOctaveBand) -> np.ndarray:
    f = np.asarray(frequencies)
    return (f >= b.f_l) & (f < b.f_u)


def band_rms(spec: NarrowbandSpectrum, b: ThirdOctaveBand, mic: int | None = None):
    """RMS pressure of the lines in [f_l, f_u).

    Returns NaN for a band without lines. ``mic=None`` evaluates all microphones.
    """
    mask = band_mask(spec.frequencies, b)
    rows = spec.values if mic is None else spec.values[mic : mic + 1]
    if not mask.any():
        out = np.full(rows.shape[0], np.nan)
    else:
        out = np.sqrt(np.sum(np.abs(rows[:, mask]) ** 2, axis=1)) / math.sqrt(2.0)
    return out if mic is None else float(out[0])


def energy_avg_level(p_rms: Sequence[float]) -> float:
    p = np.asarray(p_rms, dtype=float)
    if p.size == 0 or np.any(p < 0):
        raise ValueError("need at least one non-negative pressure")
    e = np.sum(p**2)
    if e == 0:
        return -math.inf
    return 10.0 * math.log10(e / (p.size * P_REF**2))


def stl(L1: float, L2: float, S: float | None = None, A: float | None = None, apply_correction: bool = False) -> float:
    R = L1 - L2
    if apply_correction:
        if S is None or A is None or S <= 0 or A <= 0:
            raise ValueError("correction term needs positive S and A")
        R += 10.0 * math.log10(S / A)
    return R


def reverberation_bound(T: float, V: float) -> bool:
    if V <= 0:
        raise ValueError("room volume must be positive")
    return 1.0 <= T <= 2.0 * (V / 50.0) ** (2.0 / 3.0)


def required_sources(V_SR: float) -> int:
    if V_SR <= 0:
        raise ValueError("room volume must be positive")
    d = 152.0 / V_SR ** (2.0 / 3.0)
    # guard ceil against round-off at exact integers
    return max(1, math.ceil(d - 1e-12))


@dataclass
class BandSpectrum:
    bands: list[ThirdOctaveBand]
    levels: np.ndarray
    label: str = "level_dB"
    missing: list[int] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["f_nominal", "f_l", "f_m", "f_u", self.label])
            for b, L in zip(self.bands, self.levels):
                w.writerow([f"{b.nominal:g}", f"{b.f_l:.6f}", f"{b.f_m:.6f}", f"{b.f_u:.6f}", f"{L:.6f}"])


def room_band_levels(spec: NarrowbandSpectrum, bands: Sequence[ThirdOctaveBand]) -> np.ndarray:
    """Energy-averaged level per band over all microphones of one room (NaN if empty)."""
    levels = np.full(len(bands), np.nan)
    for k, b in enumerate(bands):
        p = band_rms(spec, b)
        if not np.isnan(p).any():
            levels[k] = energy_avg_level(p)
    return levels


def stl_spectrum(
    source: NarrowbandSpectrum,
    receiving: NarrowbandSpectrum,
    bands: Sequence[ThirdOctaveBand],
    S: float | None = None,
    A: float | None = None,
    apply_correction: bool = False,
) -> BandSpectrum:
    """Band-wise R = L1 - L2; bands without narrowband lines are dropped and listed."""
    L1 = room_band_levels(source, bands)
    L2 = room_band_levels(receiving, bands)
    keep, levels, missing = [], [], []
    for b, l1, l2 in zip(bands, L1, L2):
        if np.isnan(l1) or np.isnan(l2):
            missing.append(b.index)
            continue
        keep.append(b)
        levels.append(stl(l1, l2, S, A, apply_correction))
    return BandSpectrum(keep, np.array(levels), missing=missing)
