"""Frequency-dependent material models.

Damped air (reverberation or atmospheric loss factor), the Johnson-Champoux-Allard
equivalent fluid with an optional limp-frame correction, and lossy elastic solids.

Time convention is exp(+i omega t): dissipation shows up as a positive imaginary
part of moduli and speeds of sound and a negative imaginary part of densities.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Union


class MaterialError(ValueError):
    """Raised for inputs outside a material model's domain."""


class SingularityError(ArithmeticError):
    """Raised when a model hits a vanishing denominator."""


@dataclass(frozen=True)
class FluidMedium:
    c: float = 343.0
    rho0: float = 1.2041
    gamma: float = 1.4
    mu: float = 18.1e-6
    Pr: float = 0.7039
    P0: float = 101325.0
    T_K: float = 293.15
    h_r: float = 40.0

    def __post_init__(self):
        checks = {
            "c": self.c > 0,
            "rho0": self.rho0 > 0,
            "gamma": self.gamma > 1,
            "mu": self.mu > 0,
            "Pr": self.Pr > 0,
            "P0": self.P0 > 0,
            "h_r": 0 <= self.h_r <= 100,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise MaterialError(f"invalid fluid parameters: {', '.join(bad)}")


@dataclass(frozen=True)
class PorousMedium:
    alpha_inf: float
    Lambda: float
    Lambda_p: float
    sigma: float
    phi: float
    rho1: float
    saturating: FluidMedium = FluidMedium()

    def __post_init__(self):
        bad = []
        if self.alpha_inf < 1:
            bad.append("alpha_inf")
        if not 0 < self.phi < 1:
            bad.append("phi")
        for name in ("Lambda", "Lambda_p", "sigma", "rho1"):
            if getattr(self, name) <= 0:
                bad.append(name)
        if self.Lambda > self.Lambda_p:
            bad.append("Lambda > Lambda_p")
        if bad:
            raise MaterialError(f"invalid porous parameters: {', '.join(bad)}")

    @property
    def apparent_mass(self) -> float:
        return self.rho1 + self.phi * self.saturating.rho0


@dataclass(frozen=True)
class SolidMedium:
    E: float
    nu: float
    rho: float
    eta_s: float = 0.0

    def __post_init__(self):
        if self.E <= 0 or not 0 <= self.nu < 0.5 or self.rho <= 0 or not 0 <= self.eta_s < 1:
            raise MaterialError(f"invalid solid parameters: {self}")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def E_complex(self) -> complex:
        return self.E * (1.0 + 1j * self.eta_s)

    def bending_stiffness(self, h: float) -> float:
        return self.E * h**3 / (12.0 * (1.0 - self.nu**2))


@dataclass(frozen=True)
class DampingModel:
    kind: Literal["reverberation", "atmospheric", "none"] = "none"
    T: float | None = None

    def __post_init__(self):
        if self.kind not in ("reverberation", "atmospheric", "none"):
            raise MaterialError(f"unknown damping kind {self.kind!r}")
        if self.kind == "reverberation" and (self.T is None or self.T <= 0):
            raise MaterialError("reverberation damping needs T > 0")

    def loss_factor(self, f: float, fluid: FluidMedium) -> float:
        if self.kind == "reverberation":
            return loss_factor_reverb(f, self.T)
        if self.kind == "atmospheric":
            m = atmospheric_absorption(f, fluid.T_K, fluid.h_r, fluid.P0)
            return loss_factor_atmos(f, m, fluid.c)
        return 0.0


# the materials used for the test facility
AIR = FluidMedium()
GLASS_WOOL = PorousMedium(
    alpha_inf=1.06, Lambda=56e-6, Lambda_p=110e-6, sigma=40000.0, phi=0.94, rho1=130.0
)
PLASTERBOARD = SolidMedium(E=3e9, nu=0.15, rho=800.0, eta_s=0.03)


def loss_factor_reverb(f: float, T: float) -> float:
    if f <= 0 or T <= 0:
        raise MaterialError("frequency and reverberation time must be positive")
    return 2.2 / (f * T)


def atmospheric_absorption(f: float, T_K: float, h_r: float, P0: float = 101325.0) -> float:
    """Pure-tone atmospheric absorption per ISO 9613-1, as an energy decay rate in 1/m.

    The attenuation coefficient in dB/m is converted with m = alpha / (10 lg e).
    """
    if f <= 0:
        raise MaterialError("frequency must be positive")
    if not 253.0 <= T_K <= 323.0:
        raise MaterialError(f"temperature {T_K} K outside 253..323 K")
    if not 0 < h_r <= 100:
        raise MaterialError(f"relative humidity {h_r} % outside (0, 100]")
    pr = 101.325
    pa = P0 / 1000.0
    T0 = 293.15
    T01 = 273.16
    psat_rel = 10.0 ** (-6.8346 * (T01 / T_K) ** 1.261 + 4.6151)
    h = h_r * psat_rel / (pa / pr)
    tr = T_K / T0
    frO = (pa / pr) * (24.0 + 4.04e4 * h * (0.02 + h) / (0.391 + h))
    frN = (pa / pr) * tr**-0.5 * (9.0 + 280.0 * h * math.exp(-4.170 * (tr ** (-1.0 / 3.0) - 1.0)))
    alpha_db = 8.686 * f**2 * (
        1.84e-11 * (pr / pa) * tr**0.5
        + tr**-2.5
        * (
            0.01275 * math.exp(-2239.1 / T_K) / (frO + f**2 / frO)
            + 0.1068 * math.exp(-3352.0 / T_K) / (frN + f**2 / frN)
        )
    )
    return alpha_db / (10.0 * math.log10(math.e))


def loss_factor_atmos(f: float, m: float, c: float) -> float:
    if f <= 0:
        raise MaterialError("frequency must be positive")
    if m < 0:
        raise MaterialError("propagation loss must be non-negative")
    return 2.2 * c / (6.0 * math.log(10.0)) * m / f


def complex_speed(c: float, eta: float) -> complex:
    if c <= 0:
        raise MaterialError("speed of sound must be positive")
    return c * (1.0 + 1j * eta)


def _check_omega(omega: float) -> None:
    if omega <= 0:
        raise MaterialError("angular frequency must be positive")


def jca_bulk_modulus(p: PorousMedium, omega: float) -> complex:
    _check_omega(omega)
    air = p.saturating
    x = 1j * p.Lambda_p**2 * air.Pr * air.rho0 * omega
    inner = 1.0 + 8.0 * air.mu / x * cmath.sqrt(1.0 + x / (16.0 * air.mu))
    return air.gamma * air.P0 / (air.gamma - (air.gamma - 1.0) / inner)


def jca_density(p: PorousMedium, omega: float) -> complex:
    _check_omega(omega)
    air = p.saturating
    a, r0 = p.alpha_inf, air.rho0
    root = cmath.sqrt(1.0 + 4j * a**2 * air.mu * r0 * omega / (p.sigma**2 * p.phi**2 * p.Lambda**2))
    return a * r0 * (1.0 + p.sigma * p.phi / (1j * a * r0 * omega) * root)


def limp_density(rho_e: complex, p: PorousMedium) -> complex:
    r0 = p.saturating.rho0
    M = p.apparent_mass
    den = M + rho_e - 2.0 * r0
    if abs(den) <= 1e-12 * max(abs(M), abs(rho_e)):
        raise SingularityError("limp density denominator vanishes")
    return (rho_e * M - r0**2) / den


def equivalent_speed(K_e: complex, rho: complex) -> complex:
    """Principal square root of K/rho, i.e. the branch with non-negative real part."""
    if rho == 0:
        raise SingularityError("density must be non-zero")
    c = cmath.sqrt(complex(K_e) / complex(rho))
    return c if c.real >= 0 else -c


Medium = Union[FluidMedium, PorousMedium, SolidMedium]


@dataclass(frozen=True)
class AcousticProperties:
    """Density and speed of sound entering the fluid block scalings at one frequency."""

    rho: complex
    c: complex
    eta: float = 0.0


@lru_cache(maxsize=65536)
def fluid_properties(medium: FluidMedium | PorousMedium, damping: DampingModel, f: float) -> AcousticProperties:
    """Per-frequency (rho, c) for an acoustic domain. Memoized; media are immutable."""
    if f <= 0:
        raise MaterialError("frequency must be positive")
    if isinstance(medium, PorousMedium):
        omega = 2.0 * math.pi * f
        K_e = jca_bulk_modulus(medium, omega)
        rho_e = jca_density(medium, omega)
        # c_e is taken with the rigid-frame density; only the density is swapped for the limp one
        return AcousticProperties(rho=limp_density(rho_e, medium), c=equivalent_speed(K_e, rho_e))
    eta = damping.loss_factor(f, medium)
    return AcousticProperties(rho=complex(medium.rho0), c=complex_speed(medium.c, eta), eta=eta)


def bending_wavenumber(f: float, solid: SolidMedium, h: float) -> float:
    omega = 2.0 * math.pi * f
    return (omega**2 * solid.rho * h / solid.bending_stiffness(h)) ** 0.25


def wavelength(f: float, medium: Medium, h: float | None = None) -> float:
    """Wavelength used for mesh sizing.

    Fluids use Re(c)/f of the undamped speed, porous media Re(c_e)/f with the
    rigid-frame equivalent speed, and plates the thin-plate bending wavelength.
    """
    if f <= 0:
        raise MaterialError("frequency must be positive")
    if isinstance(medium, FluidMedium):
        return medium.c / f
    if isinstance(medium, PorousMedium):
        omega = 2.0 * math.pi * f
        c_e = equivalent_speed(jca_bulk_modulus(medium, omega), jca_density(medium, omega))
        return c_e.real / f
    if isinstance(medium, SolidMedium):
        if h is None or h <= 0:
            raise MaterialError("plate wavelength needs a positive thickness")
        return 2.0 * math.pi / bending_wavenumber(f, medium, h)
    raise TypeError(f"unsupported medium {type(medium).__name__}")
