"""Analytic reference models and comparison metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .bands import ThirdOctaveBand
from .materials import FluidMedium, PorousMedium, SolidMedium, jca_bulk_modulus

# evaluation frequency for the bulk modulus of a porous gap spring
POROUS_SPRING_FREQUENCY = 1000.0


class AlignmentError(ValueError):
    """Two sweeps do not share the same frequency grid."""


@dataclass(frozen=True)
class WallSpec:
    solid: SolidMedium
    leaves: tuple[float, ...]  # thickness per leaf
    l_g: float = 0.0
    gap_medium: FluidMedium | PorousMedium | None = None

    def __post_init__(self):
        if len(self.leaves) not in (1, 2) or min(self.leaves) <= 0:
            raise ValueError("one or two leaves with positive thickness")
        if (len(self.leaves) == 2) != (self.l_g > 0):
            raise ValueError("a gap width is required exactly for two leaves")

    @property
    def masses(self) -> list[float]:
        return [self.solid.rho * h for h in self.leaves]

    @property
    def total_mass(self) -> float:
        return sum(self.masses)


def berger_mass_law(f, m_pp: float, rho0: float, c: float):
    """Oblique-incidence mass law, 20 lg(pi f m'' / (rho0 c)) - 3 dB."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0) or m_pp <= 0 or rho0 <= 0 or c <= 0:
        raise ValueError("all inputs must be positive")
    out = 20.0 * np.log10(math.pi * f * m_pp / (rho0 * c)) - 3.0
    return float(out) if out.ndim == 0 else out


def coincidence_frequency(c: float, m_pp: float, B: float) -> float:
    if c <= 0 or m_pp <= 0 or B <= 0:
        raise ValueError("all inputs must be positive")
    return c**2 / (2.0 * math.pi) * math.sqrt(m_pp / B)


def double_wall_resonance(m1: float, m2: float, K: float, l_g: float) -> float:
    """Mass-spring-mass resonance with the gap stiffness s' = K / l_g."""
    if min(m1, m2, K, l_g) <= 0:
        raise ValueError("all inputs must be positive")
    s = K / l_g
    return math.sqrt(s / m1 + s / m2) / (2.0 * math.pi)


def gap_bulk_modulus(
    medium: FluidMedium | PorousMedium, f_eval: float | None = None
) -> float:
    """Real bulk modulus of the gap filling.

    Air uses rho0 c^2. A porous filling uses Re(K_e) at ``f_eval``, by default
    ``POROUS_SPRING_FREQUENCY``.
    """
    if isinstance(medium, PorousMedium):
        f = POROUS_SPRING_FREQUENCY if f_eval is None else f_eval
        return jca_bulk_modulus(medium, 2.0 * math.pi * f).real
    return medium.rho0 * medium.c**2


def double_wall_resonance_iterated(m1: float, m2: float, medium: PorousMedium, l_g: float, f_start: float = 100.0, steps: int = 1) -> float:
    """Fixed-point variant: evaluate Re(K_e) at the current estimate and repeat."""
    f = f_start
    for _ in range(steps + 1):
        f = double_wall_resonance(m1, m2, gap_bulk_modulus(medium, f), l_g)
    return f


def wall_resonance(wall: WallSpec, f_eval: float | None = None) -> float | None:
    if len(wall.leaves) == 1:
        return None
    m1, m2 = wall.masses
    return double_wall_resonance(m1, m2, gap_bulk_modulus(wall.gap_medium or FluidMedium(), f_eval), wall.l_g)


# ---------------------------------------------------------------------------
# clamped rectangular plate, Rayleigh-Ritz with clamped-beam functions


def _clamped_beam_roots(n: int) -> np.ndarray:
    roots = []
    for m in range(1, n + 1):
        guess = (m + 0.5) * math.pi
        roots.append(brentq(lambda b: math.cos(b) - 1.0 / math.cosh(b), guess - 0.5, guess + 0.5, xtol=1e-14))
    return np.array(roots)


def _beam_functions(n: int, xi: np.ndarray):
    """Clamped-clamped beam modes on [0, 1] and their first two derivatives.

    Written with decaying exponentials so high modes keep full precision.
    """
    beta = _clamped_beam_roots(n)
    X = np.empty((n, xi.size))
    dX = np.empty_like(X)
    ddX = np.empty_like(X)
    for k, b in enumerate(beta):
        em = math.exp(-b)
        sh_m_s = math.sinh(b) - math.sin(b)
        sigma = (math.cosh(b) - math.cos(b)) / sh_m_s
        one_minus_sigma = (-em - math.sin(b) + math.cos(b)) / sh_m_s
        # cosh(bx) - sigma sinh(bx) = 0.5 [(1 - sigma) e^{b x} + (1 + sigma) e^{-b x}]
        emx = np.exp(-b * xi)
        # for large b, (1 - sigma) ~ e^{-b} and the product stays bounded
        hyp = 0.5 * one_minus_sigma * np.exp(b * xi) + 0.5 * (1.0 + sigma) * emx
        dhyp = b * (0.5 * one_minus_sigma * np.exp(b * xi) - 0.5 * (1.0 + sigma) * emx)
        ddhyp = b * b * hyp
        X[k] = hyp - np.cos(b * xi) + sigma * np.sin(b * xi)
        dX[k] = dhyp + b * np.sin(b * xi) + sigma * b * np.cos(b * xi)
        ddX[k] = ddhyp + b * b * np.cos(b * xi) - sigma * b * b * np.sin(b * xi)
    return X, dX, ddX


def _beam_integrals(n: int, L: float, order: int = 160):
    x, w = np.polynomial.legendre.leggauss(order)
    xi = 0.5 * (x + 1.0)
    w = 0.5 * w
    X, dX, ddX = _beam_functions(n, xi)
    dX, ddX = dX / L, ddX / L**2
    I00 = L * (X * w) @ X.T
    I11 = L * (dX * w) @ dX.T
    I22 = L * (ddX * w) @ ddX.T
    I02 = L * (X * w) @ ddX.T
    return I00, I11, I22, I02


def clamped_plate_eigenfrequencies(
    E: float, nu: float, rho: float, h: float, a: float, b: float, count: int = 9, basis: int = 10
) -> np.ndarray:
    """Lowest ``count`` natural frequencies (Hz) of a fully clamped thin plate."""
    if count < 1 or count > basis * basis:
        raise ValueError("count must be in 1..basis^2")
    D = E * h**3 / (12.0 * (1.0 - nu**2))
    A0, A1, A2, A02 = _beam_integrals(basis, a)
    B0, B1, B2, B02 = _beam_integrals(basis, b)
    K = D * (
        np.kron(A2, B0)
        + np.kron(A0, B2)
        + nu * (np.kron(A02, B02.T) + np.kron(A02.T, B02))
        + 2.0 * (1.0 - nu) * np.kron(A1, B1)
    )
    M = rho * h * np.kron(A0, B0)
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    lam = sla.eigh(K, M, eigvals_only=True, subset_by_index=[0, count - 1])
    return np.sqrt(np.maximum(lam, 0.0)) / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# comparison metrics


def frac(H1, H2) -> float:
    """Frequency response assurance criterion with conjugate transposes."""
    H1 = np.asarray(H1, dtype=complex).ravel()
    H2 = np.asarray(H2, dtype=complex).ravel()
    if H1.size != H2.size or H1.size == 0:
        raise ValueError("responses must have equal, non-zero length")
    n1 = np.vdot(H1, H1).real
    n2 = np.vdot(H2, H2).real
    if n1 == 0 or n2 == 0:
        raise ValueError("FRAC is undefined for a zero response")
    return float(min(1.0, abs(np.vdot(H1, H2)) ** 2 / (n1 * n2)))


@dataclass
class FracInterval:
    f_lo: float
    f_hi: float
    value: float


def frac_report(
    freqs_a: Sequence[float],
    resp_a: Sequence[complex],
    freqs_b: Sequence[float],
    resp_b: Sequence[complex],
    interval: float = 25.0,
    f_start: float | None = None,
    f_end: float | None = None,
) -> list[FracInterval]:
    """FRAC per ``interval``-wide window; windows are [lo, lo + interval), the last closed."""
    fa = np.asarray(freqs_a, dtype=float)
    fb = np.asarray(freqs_b, dtype=float)
    if fa.shape != fb.shape or not np.allclose(fa, fb, rtol=0, atol=1e-9):
        raise AlignmentError("both responses need the same frequency grid")
    ha = np.asarray(resp_a, dtype=complex)
    hb = np.asarray(resp_b, dtype=complex)
    lo = fa.min() if f_start is None else f_start
    hi = fa.max() if f_end is None else f_end
    n = max(1, int(math.ceil((hi - lo) / interval - 1e-9)))
    out = []
    for k in range(n):
        a, b = lo + k * interval, lo + (k + 1) * interval
        last = k == n - 1
        m = (fa >= a) & ((fa <= hi + 1e-9) if last else (fa < b))
        out.append(FracInterval(a, min(b, hi), frac(ha[m], hb[m]) if m.any() else math.nan))
    return out


def relative_error(pA, pB) -> np.ndarray:
    """(|pA| - |pB|) / |pA| per frequency; NaN where the reference vanishes."""
    a = np.abs(np.asarray(pA))
    b = np.abs(np.asarray(pB))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a == 0, np.nan, (a - b) / np.where(a == 0, 1.0, a))


def averaged_relative_error(eps) -> tuple[float, int]:
    """Arithmetic mean over the finite entries and the number of excluded ones."""
    e = np.asarray(eps, dtype=float)
    ok = np.isfinite(e)
    return (float(e[ok].mean()) if ok.any() else math.nan), int((~ok).sum())


def reference_curves(
    bands: Sequence[ThirdOctaveBand], wall: WallSpec, air: FluidMedium = FluidMedium(), f_eval: float | None = None
) -> dict:
    """Mass-law, 12 dB/octave and resonance lines on the band grid.

    The 12 dB/octave line starts at the mass-law value of the total wall mass at
    the double-wall resonance and is undefined below it (NaN).
    """
    f = np.array([b.f_m for b in bands])
    mass = berger_mass_law(f, wall.total_mass, air.rho0, air.c)
    f0 = wall_resonance(wall, f_eval)
    slope = np.full(f.size, np.nan)
    if f0 is not None:
        base = berger_mass_law(f0, wall.total_mass, air.rho0, air.c)
        above = f >= f0
        slope[above] = base + 40.0 * np.log10(f[above] / f0)
    return {"f": f, "mass_law": mass, "slope12": slope, "f0": f0}


def write_reference_csv(bands: Sequence[ThirdOctaveBand], curves: dict, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        f0 = curves["f0"]
        w.writerow(["f_nominal", "f_m", "mass_law_dB", "slope12_dB", "f0_Hz"])
        for b, m, s in zip(bands, curves["mass_law"], curves["slope12"]):
            w.writerow([f"{b.nominal:g}", f"{b.f_m:.6f}", f"{m:.6f}", "" if np.isnan(s) else f"{s:.6f}", "" if f0 is None else f"{f0:.6f}"])
