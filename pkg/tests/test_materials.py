import cmath
import math

import mpmath as mp
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stlsim.materials import (
    AIR,
    GLASS_WOOL,
    PLASTERBOARD,
    DampingModel,
    FluidMedium,
    MaterialError,
    PorousMedium,
    SingularityError,
    SolidMedium,
    atmospheric_absorption,
    complex_speed,
    equivalent_speed,
    fluid_properties,
    jca_bulk_modulus,
    jca_density,
    limp_density,
    loss_factor_atmos,
    loss_factor_reverb,
    wavelength,
)

mp.mp.dps = 40


def _jca_oracle(p: PorousMedium, omega: float):
    """Arbitrary-precision evaluation of bulk modulus, density and limp density."""
    a = p.saturating
    g, P0, mu, Pr, r0 = (mp.mpf(v) for v in (a.gamma, a.P0, a.mu, a.Pr, a.rho0))
    w = mp.mpf(omega)
    Lp, L, s, phi, ainf, r1 = (mp.mpf(v) for v in (p.Lambda_p, p.Lambda, p.sigma, p.phi, p.alpha_inf, p.rho1))
    j = mp.mpc(0, 1)
    G = 1 + 8 * mu / (j * Lp**2 * Pr * r0 * w) * mp.sqrt(1 + j * Lp**2 * Pr * r0 * w / (16 * mu))
    K = g * P0 / (g - (g - 1) / G)
    rho = ainf * r0 + s * phi / (j * w) * mp.sqrt(1 + 4 * j * ainf**2 * mu * r0 * w / (s**2 * phi**2 * L**2))
    M = r1 + phi * r0
    limp = (rho * M - r0**2) / (M + rho - 2 * r0)
    return complex(K), complex(rho), complex(limp)


def _rel(a, b):
    return abs(a - b) / abs(b)


class TestLossFactors:
    def test_reverb_example(self):
        assert loss_factor_reverb(100.0, 1.5) == pytest.approx(0.0146667, rel=1e-5)

    def test_reverb_decreases_with_frequency(self):
        assert loss_factor_reverb(100.0, 1.5) > loss_factor_reverb(1000.0, 1.5)

    def test_reverb_undamped_limit(self):
        assert loss_factor_reverb(100.0, 1e15) < 1e-15

    @given(st.floats(1e-3, 1e5), st.floats(1e-3, 1e3))
    def test_reverb_product(self, f, T):
        assert loss_factor_reverb(f, T) * f * T == pytest.approx(2.2, rel=1e-14)

    @pytest.mark.parametrize("f,T", [(0.0, 1.0), (-1.0, 1.0), (100.0, 0.0)])
    def test_reverb_domain(self, f, T):
        with pytest.raises(MaterialError):
            loss_factor_reverb(f, T)

    def test_atmos_zero_loss(self):
        assert loss_factor_atmos(500.0, 0.0, 343.0) == 0.0

    def test_atmos_unit_scaling(self):
        c, f = 343.0, 250.0
        m = f * 6.0 * math.log(10.0) / (2.2 * c)
        assert loss_factor_atmos(f, m, c) == pytest.approx(1.0, rel=1e-14)

    @given(st.floats(1.0, 1e4), st.floats(0.0, 1.0))
    def test_atmos_linear_in_m(self, f, m):
        c = 343.0
        assert loss_factor_atmos(f, m, c) * f == pytest.approx(m * 2.2 * c / (6 * math.log(10)), rel=1e-12, abs=1e-300)

    def test_atmos_domain(self):
        with pytest.raises(MaterialError):
            loss_factor_atmos(0.0, 0.1, 343.0)


class TestAtmosphericAbsorption:
    # octave-band attenuation in dB/km at exact midband frequencies, as tabulated for 101.325 kPa
    TABLE = {
        (293.15, 70.0): [0.1, 0.3, 1.1, 2.8, 5.0, 9.0, 22.9, 76.6],
        (288.15, 80.0): [0.1, 0.3, 1.1, 2.4, 4.1, 8.3, 23.7, 82.8],
        (283.15, 70.0): [0.1, 0.4, 1.0, 1.9, 3.7, 9.7, 32.8, 117.0],
    }

    @pytest.mark.parametrize("state", list(TABLE))
    def test_iso_table(self, state):
        T_K, h_r = state
        for k, ref in enumerate(self.TABLE[state]):
            f = 10.0 ** (1.8 + 0.3 * k)  # 63 Hz ... 8 kHz exact midbands
            db_km = atmospheric_absorption(f, T_K, h_r) * 10.0 * math.log10(math.e) * 1000.0
            assert abs(db_km - ref) <= max(0.06, 0.006 * ref), (f, db_km, ref)

    @staticmethod
    def _oracle_db_per_m(f, T, hr, pa):
        # written out independently in arbitrary precision
        f, T, hr, pa = (mp.mpf(v) for v in (f, T, hr, pa))
        pr, T0, T01 = mp.mpf(101325), mp.mpf("293.15"), mp.mpf("273.16")
        C = -mp.mpf("6.8346") * (T01 / T) ** mp.mpf("1.261") + mp.mpf("4.6151")
        h = hr * mp.power(10, C) * pr / pa
        frO = pa / pr * (24 + 40400 * h * (mp.mpf("0.02") + h) / (mp.mpf("0.391") + h))
        frN = pa / pr * mp.sqrt(T0 / T) * (9 + 280 * h * mp.exp(-mp.mpf("4.170") * (mp.cbrt(T0 / T) - 1)))
        cls = mp.mpf("1.84e-11") * pr / pa * mp.sqrt(T / T0)
        vib = (T / T0) ** mp.mpf("-2.5") * (
            mp.mpf("0.01275") * mp.exp(-mp.mpf("2239.1") / T) / (frO + f**2 / frO)
            + mp.mpf("0.1068") * mp.exp(-3352 / T) / (frN + f**2 / frN)
        )
        return float(mp.mpf("8.686") * f**2 * (cls + vib))

    @pytest.mark.parametrize("f", [100.0, 1000.0, 3150.0])
    def test_pinned_value(self, f):
        m = atmospheric_absorption(f, 293.15, 40.0, 101325.0)
        ref = self._oracle_db_per_m(f, 293.15, 40.0, 101325.0) / (10 * math.log10(math.e))
        assert m == pytest.approx(ref, rel=1e-12)

    def test_pinned_literal(self):
        # 1 kHz, 20 C, 40 % RH: 4.65 dB/km
        assert atmospheric_absorption(1000.0, 293.15, 40.0) == pytest.approx(1.07155e-3, rel=1e-4)

    def test_monotone_over_range(self):
        fs = [100 * 1.12**k for k in range(31)]
        ms = [atmospheric_absorption(f, 293.15, 40.0) for f in fs if f <= 3150]
        assert all(b > a for a, b in zip(ms, ms[1:]))

    def test_grows_with_frequency(self):
        assert atmospheric_absorption(2000.0, 293.15, 40.0) > atmospheric_absorption(500.0, 293.15, 40.0)

    @pytest.mark.parametrize("T_K,h_r", [(250.0, 40.0), (330.0, 40.0), (293.15, 0.0), (293.15, 101.0)])
    def test_domain(self, T_K, h_r):
        with pytest.raises(MaterialError):
            atmospheric_absorption(1000.0, T_K, h_r)

    def test_loss_factor_curve_rises_over_range(self):
        # the nitrogen relaxation leaves a shallow plateau mid-range; the overall trend rises
        eta = lambda f: DampingModel("atmospheric").loss_factor(f, AIR)
        assert eta(100.0) < eta(400.0) < eta(3150.0)
        assert eta(2000.0) > eta(500.0)


class TestComplexSpeed:
    def test_undamped(self):
        assert complex_speed(343.0, 0.0) == 343 + 0j

    def test_example(self):
        c = complex_speed(343.0, 0.0146667)
        assert c.real == 343.0
        assert c.imag == pytest.approx(5.0307, abs=1e-4)

    @given(st.floats(1.0, 1e4), st.floats(0.0, 1.0))
    def test_parts(self, c, eta):
        z = complex_speed(c, eta)
        assert z.real == c and z.imag == pytest.approx(c * eta)

    def test_domain(self):
        with pytest.raises(MaterialError):
            complex_speed(0.0, 0.1)


class TestJCA:
    omega300 = 2 * math.pi * 300.0

    def test_bulk_modulus_oracle(self):
        K, _, _ = _jca_oracle(GLASS_WOOL, self.omega300)
        assert _rel(jca_bulk_modulus(GLASS_WOOL, self.omega300), K) < 1e-12

    def test_density_oracle(self):
        _, rho, _ = _jca_oracle(GLASS_WOOL, self.omega300)
        assert _rel(jca_density(GLASS_WOOL, self.omega300), rho) < 1e-12

    def test_limp_oracle(self):
        _, rho, limp = _jca_oracle(GLASS_WOOL, self.omega300)
        assert _rel(limp_density(complex(rho), GLASS_WOOL), limp) < 1e-12

    @pytest.mark.parametrize("f", [1.0, 10.0, 100.0, 1000.0, 3150.0])
    def test_oracle_over_frequency(self, f):
        K, rho, limp = _jca_oracle(GLASS_WOOL, 2 * math.pi * f)
        w = 2 * math.pi * f
        assert _rel(jca_bulk_modulus(GLASS_WOOL, w), K) < 1e-11
        assert _rel(jca_density(GLASS_WOOL, w), rho) < 1e-11

    def test_isothermal_limit(self):
        K = jca_bulk_modulus(GLASS_WOOL, 2 * math.pi * 1e-6)
        assert abs(K - AIR.P0) / AIR.P0 <= 1e-6

    def test_high_frequency_oracle(self):
        w = 2 * math.pi * 1e12
        K, rho, _ = _jca_oracle(GLASS_WOOL, w)
        assert _rel(jca_bulk_modulus(GLASS_WOOL, w), K) < 1e-12
        assert _rel(jca_density(GLASS_WOOL, w), rho) < 1e-12

    @pytest.mark.parametrize(
        "fn,limit",
        [(jca_bulk_modulus, AIR.gamma * AIR.P0), (jca_density, GLASS_WOOL.alpha_inf * AIR.rho0)],
    )
    def test_high_frequency_limits_converge(self, fn, limit):
        # the approach is ~ omega^(-1/2): a factor 100 in omega shrinks the gap tenfold
        d = [abs(fn(GLASS_WOOL, 2 * math.pi * f) - limit) / limit for f in (1e8, 1e10, 1e12)]
        assert d[0] > d[1] > d[2]
        assert d[0] / d[1] == pytest.approx(10.0, rel=0.05)
        assert d[1] / d[2] == pytest.approx(10.0, rel=0.05)

    def test_bulk_modulus_real_part_bounds(self):
        for f in (1.0, 30.0, 300.0, 3000.0):
            K = jca_bulk_modulus(GLASS_WOOL, 2 * math.pi * f)
            assert AIR.P0 * (1 - 1e-9) <= K.real <= AIR.gamma * AIR.P0 * (1 + 1e-9)

    def test_density_imag_sign_constant(self):
        signs = {math.copysign(1.0, jca_density(GLASS_WOOL, 2 * math.pi * f).imag) for f in range(1, 3151, 7)}
        assert len(signs) == 1

    @pytest.mark.parametrize("fn", [jca_bulk_modulus, jca_density])
    def test_omega_domain(self, fn):
        with pytest.raises(MaterialError):
            fn(GLASS_WOOL, 0.0)

    @pytest.mark.parametrize("f", [10.0, 100.0, 1000.0, 3150.0])
    def test_limp_converges_to_rigid(self, f):
        w = 2 * math.pi * f
        gaps = []
        for scale in (1, 10, 100, 1000):
            p = PorousMedium(**{**GLASS_WOOL.__dict__, "rho1": GLASS_WOOL.rho1 * scale})
            rho_e = jca_density(p, w)
            gaps.append(abs(limp_density(rho_e, p) - rho_e) / abs(rho_e))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        if f >= 100.0:
            assert gaps[-1] <= 1e-3

    def test_limp_gap_closed_form(self):
        # rho_limp - rho_e = -(rho_e - rho0)^2 / (M + rho_e - 2 rho0)
        p = GLASS_WOOL
        rho_e = jca_density(p, 2 * math.pi * 50.0)
        r0 = AIR.rho0
        expected = -((rho_e - r0) ** 2) / (p.apparent_mass + rho_e - 2 * r0)
        assert limp_density(rho_e, p) - rho_e == pytest.approx(expected, rel=1e-9)

    def test_limp_identity(self):
        # rho_e real and equal to M gives (rho_e + rho0) / 2
        p = GLASS_WOOL
        M = p.apparent_mass
        assert limp_density(M, p) == pytest.approx((M + AIR.rho0) / 2, rel=1e-14)

    def test_limp_singular(self):
        p = GLASS_WOOL
        with pytest.raises(SingularityError):
            limp_density(complex(2 * AIR.rho0 - p.apparent_mass), p)


class TestEquivalentSpeed:
    def test_plain_fluid(self):
        assert equivalent_speed(AIR.rho0 * 343.0**2, AIR.rho0) == pytest.approx(343.0, rel=1e-14)

    def test_zero_density(self):
        with pytest.raises(SingularityError):
            equivalent_speed(1.0, 0.0)

    def test_positive_real_part_over_range(self):
        for f in range(1, 3151, 11):
            w = 2 * math.pi * f
            assert equivalent_speed(jca_bulk_modulus(GLASS_WOOL, w), jca_density(GLASS_WOOL, w)).real > 0

    @given(
        st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e9, allow_nan=False, allow_infinity=False),
        st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e4, allow_nan=False, allow_infinity=False),
    )
    def test_square_and_branch(self, K, rho):
        c = equivalent_speed(K, rho)
        assert c.real >= 0
        assert abs(c * c - K / rho) <= 1e-12 * abs(K / rho)

    def test_glass_wool_wavelength_matches_sizing(self):
        lam = wavelength(300.0, GLASS_WOOL)
        # 13 nodes per wavelength on quadratic elements: 2 lambda / 12 rounds to 0.03 m
        assert 0.15 < lam < 0.21
        assert round(2 * lam / 12, 2) == 0.03


class TestWavelength:
    def test_air(self):
        assert wavelength(300.0, AIR) == pytest.approx(1.143, abs=1e-3)

    def test_plasterboard(self):
        assert wavelength(300.0, PLASTERBOARD, 0.025) == pytest.approx(0.544, abs=2e-3)

    @given(st.floats(1.0, 1e4))
    def test_doubling_halves(self, f):
        assert wavelength(2 * f, AIR) == pytest.approx(wavelength(f, AIR) / 2, rel=1e-14)

    def test_plate_scales_with_sqrt_frequency(self):
        r = wavelength(100.0, PLASTERBOARD, 0.05) / wavelength(400.0, PLASTERBOARD, 0.05)
        assert r == pytest.approx(2.0, rel=1e-12)

    def test_domain(self):
        with pytest.raises(MaterialError):
            wavelength(0.0, AIR)
        with pytest.raises(MaterialError):
            wavelength(100.0, PLASTERBOARD)


class TestValidation:
    @pytest.mark.parametrize("kw", [{"c": 0.0}, {"gamma": 1.0}, {"h_r": 120.0}, {"rho0": -1.0}])
    def test_fluid(self, kw):
        with pytest.raises(MaterialError):
            FluidMedium(**kw)

    @pytest.mark.parametrize("kw", [{"alpha_inf": 0.9}, {"phi": 1.0}, {"Lambda": 200e-6}, {"sigma": 0.0}])
    def test_porous(self, kw):
        with pytest.raises(MaterialError):
            PorousMedium(**{**GLASS_WOOL.__dict__, **kw})

    @pytest.mark.parametrize("kw", [{"nu": 0.5}, {"E": 0.0}, {"eta_s": 1.0}])
    def test_solid(self, kw):
        with pytest.raises(MaterialError):
            SolidMedium(**{**PLASTERBOARD.__dict__, **kw})

    def test_damping(self):
        with pytest.raises(MaterialError):
            DampingModel("reverberation")
        with pytest.raises(MaterialError):
            DampingModel("foo")

    def test_derived(self):
        assert PLASTERBOARD.G == pytest.approx(3e9 / 2.3)
        assert PLASTERBOARD.bending_stiffness(0.05) == pytest.approx(3e9 * 0.05**3 / (12 * (1 - 0.15**2)))


class TestFluidProperties:
    def test_air_reverb(self):
        p = fluid_properties(AIR, DampingModel("reverberation", 1.5), 100.0)
        assert p.rho == AIR.rho0
        assert p.c == pytest.approx(complex_speed(343.0, 2.2 / 150.0))

    def test_air_undamped(self):
        p = fluid_properties(AIR, DampingModel(), 100.0)
        assert p.c == 343.0 and p.eta == 0.0

    def test_porous_uses_limp_density_and_rigid_speed(self):
        w = 2 * math.pi * 300.0
        p = fluid_properties(GLASS_WOOL, DampingModel(), 300.0)
        rho_e = jca_density(GLASS_WOOL, w)
        assert p.rho == pytest.approx(limp_density(rho_e, GLASS_WOOL))
        assert p.c == pytest.approx(cmath.sqrt(jca_bulk_modulus(GLASS_WOOL, w) / rho_e))

    def test_damping_sign(self):
        # exp(+i w t): dissipative media have Im(c) >= 0
        assert fluid_properties(GLASS_WOOL, DampingModel(), 300.0).c.imag > 0
        assert fluid_properties(AIR, DampingModel("atmospheric"), 300.0).c.imag > 0
