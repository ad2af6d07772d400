"""Constructors against their consistency conditions and closed forms.

Expected numbers here were derived by hand substitution into the
consistency conditions and cross-checked by the residual and quadrature
oracles of the field laboratory (see test_fieldlab), which verify that
every constructed solution solves the equations of motion to machine
precision. The oscillator energy values are the ones consistent with the
equations of motion; see test_acceptance for the discrepancy against the
reference closed form.
"""

import math

import pytest

from phaselab import ansatz, feasibility
from phaselab.model import (
    FrequencyBoundViolation,
    MassRuleViolation,
    ParticleSpec,
    ShapeConstraintViolation,
    UniverseConfig,
    WeightInadmissible,
    validate,
)


def uni_for(particles, c_abs=0.125, hbar=1.0, variant="cross-coupled"):
    return validate(UniverseConfig(c_abs=c_abs, hbar=hbar,
                                   particles=tuple(particles),
                                   variant=variant))


FREE1 = uni_for([ParticleSpec(mass=1.0)])


class TestFreeSoliton:
    def test_canonical_parameters(self):
        sol = ansatz.build_free_soliton(1.0, 0.0, FREE1)
        p = sol.particles[0]
        assert (p.s, p.a, p.b) == (1.0, 1.0, 1.0)
        assert sol.cdot == -0.5

    def test_stationary_energy(self):
        sol = ansatz.build_free_soliton(1.0, 0.0, FREE1)
        eb = ansatz.closed_form_energy(sol)
        assert eb.total == pytest.approx(0.5, rel=1e-14)
        assert eb.kinetic == 0.0
        assert eb.internal == pytest.approx(0.5, rel=1e-14)

    def test_galilean_energy_offset(self):
        sol = ansatz.build_free_soliton(1.0, 2.0, FREE1)
        eb = ansatz.closed_form_energy(sol)
        assert eb.kinetic == pytest.approx(2.0, rel=1e-14)
        assert eb.total == pytest.approx(2.5, rel=1e-14)

    def test_energy_equals_minus_hbar_cdot_for_static(self):
        for v in (0.0, 1.0, -0.7):
            sol = ansatz.build_free_soliton(1.0, v, FREE1)
            eb = ansatz.closed_form_energy(sol)
            assert eb.total == pytest.approx(-sol.hbar * sol.cdot, rel=1e-13)

    def test_negative_branch(self):
        sol = ansatz.build_free_soliton(1.0, 0.0, FREE1, sign=-1)
        assert sol.particles[0].a == -1.0
        assert ansatz.closed_form_energy(sol).total == pytest.approx(0.5)


class TestFreeNSoliton:
    def test_four_identical_particles(self):
        uni = uni_for([ParticleSpec(mass=1.0)] * 4)
        sol = ansatz.build_free_n_soliton(uni)
        for p in sol.particles:
            assert p.s**2 == pytest.approx(4.0, rel=1e-14)
            assert p.a == pytest.approx(0.25, rel=1e-14)
        assert sum(1.0 / p.s**2 for p in sol.particles) == pytest.approx(1.0)

    def test_internal_energy_independent_of_n(self):
        for n in range(1, 33):
            uni = uni_for([ParticleSpec(mass=1.0)] * n)
            eb = ansatz.closed_form_energy(ansatz.build_free_n_soliton(uni))
            assert abs(eb.internal - 0.5) <= 1e-12 * 0.5

    @pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32, 64])
    def test_machian_width_scaling(self, n):
        uni = uni_for([ParticleSpec(mass=1.0)] * n)
        sol = ansatz.build_free_n_soliton(uni)
        assert sol.particles[0].s ** 2 == float(n)  # exact at these inputs
        s2, lph = ansatz.machian_width(n, 1.0, uni)
        assert s2 == float(n)
        assert lph == pytest.approx(4.0 * math.sqrt(n * 0.125), rel=1e-14)

    def test_mass_rule_enforced(self):
        uni = uni_for([ParticleSpec(mass=1.0), ParticleSpec(mass=2.0)])
        with pytest.raises(MassRuleViolation):
            ansatz.build_free_n_soliton(uni)

    def test_n1_reduces_to_single_soliton(self):
        sol_n = ansatz.build_free_n_soliton(FREE1)
        sol_1 = ansatz.build_free_soliton(1.0, 0.0, FREE1)
        assert sol_n.particles == sol_1.particles
        assert sol_n.cdot == sol_1.cdot

    def test_curvature_sum_rule(self):
        for n in (2, 3, 5, 8):
            uni = uni_for([ParticleSpec(mass=0.5)] * n, c_abs=0.2)
            sol = ansatz.build_free_n_soliton(uni)
            target = 1.0 / (8.0 * 0.5 * 0.2)
            a_sum = sum(p.a for p in sol.particles)
            assert abs(a_sum / target - 1.0) <= 1e-12
            inv = sum(1.0 / p.s**2 for p in sol.particles)
            assert abs(inv / target - 1.0) <= 1e-12

    def test_nonuniform_weights_admissible(self):
        # the coupling condition pins s_i^2 a_i = 1 for every particle, so
        # any strictly positive weight vector passes the joint checks;
        # test_fieldlab confirms zero residuals for this construction
        uni = uni_for([ParticleSpec(mass=1.0)] * 2)
        sol = ansatz.build_free_n_soliton(uni, a_weights=[0.7, 0.3])
        for p in sol.particles:
            assert p.s**4 * p.a**2 == pytest.approx(1.0, rel=1e-14)
        assert sol.particles[0].a == pytest.approx(0.7, rel=1e-14)
        assert sol.particles[1].a == pytest.approx(0.3, rel=1e-14)

    def test_nonpositive_weights_rejected(self):
        uni = uni_for([ParticleSpec(mass=1.0)] * 2)
        with pytest.raises(WeightInadmissible):
            ansatz.build_free_n_soliton(uni, a_weights=[1.0, 0.0])
        with pytest.raises(WeightInadmissible):
            ansatz.build_free_n_soliton(uni, a_weights=[1.0, -1.0])

    def test_all_curvatures_share_one_sign(self):
        uni = uni_for([ParticleSpec(mass=1.0)] * 3)
        for sign in (+1, -1):
            sol = ansatz.build_free_n_soliton(uni, sign=sign)
            assert all(sign * p.a > 0 for p in sol.particles)


class TestEntangledPair:
    def test_canonical_parameters(self):
        pair = ansatz.build_entangled_pair(1.0, 0.0, "upper", FREE1)
        assert pair.s**2 == pytest.approx(4.0, rel=1e-14)
        assert abs(pair.a) == pytest.approx(0.25, rel=1e-14)
        assert pair.b_minus == 0.5
        assert pair.b_plus == -0.5

    def test_lower_branch_signs(self):
        pair = ansatz.build_entangled_pair(1.0, 0.0, "lower", FREE1)
        assert pair.b_plus == +0.5
        assert pair.w_sign == -1.0  # second packet factor on (x+y-vt)

    def test_kinetic_energy_single_particle_worth(self):
        pair = ansatz.build_entangled_pair(1.0, 1.0, "upper", FREE1)
        eb = ansatz.closed_form_energy(pair)
        assert eb.kinetic == pytest.approx(0.5, rel=1e-14)
        assert eb.total == pytest.approx(1.0, rel=1e-14)

    def test_energy_equals_minus_hbar_cdot(self):
        pair = ansatz.build_entangled_pair(1.0, 0.3, "lower", FREE1)
        eb = ansatz.closed_form_energy(pair)
        assert eb.total == pytest.approx(-pair.hbar * pair.cdot, rel=1e-13)


class TestOscillators:
    def test_single_oscillator(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.5)])
        sol = ansatz.build_oscillator_solution(uni)
        p = sol.particles[0]
        assert p.s**2 == pytest.approx(1.0, rel=1e-12)
        assert p.a**2 == pytest.approx(0.9375, rel=1e-12)

    def test_two_uniform_oscillators(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.5)] * 2)
        sol = ansatz.build_oscillator_solution(uni)
        for p in sol.particles:
            assert p.s**2 == pytest.approx(2.0, rel=1e-12)
            assert p.a**2 == pytest.approx(3.0 / 16.0, rel=1e-12)
            assert p.s**4 == pytest.approx(
                2.0 / (2.0 * p.a**2 + p.m**2 * p.omega**2 / 2.0), rel=1e-12)

    def test_curvature_ratio_rule(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.2),
                       ParticleSpec(mass=1.0, omega=0.5),
                       ParticleSpec(mass=1.0, omega=0.9)])
        sol = ansatz.build_oscillator_solution(uni)
        a = [p.a for p in sol.particles]
        assert a[1] / a[0] == pytest.approx(0.5 / 0.2, rel=1e-10)
        assert a[2] / a[0] == pytest.approx(0.9 / 0.2, rel=1e-10)

    def test_equal_mass_closed_form_curvature(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.3),
                       ParticleSpec(mass=1.0, omega=0.4)])
        sol = ansatz.build_oscillator_solution(uni)
        w_sum = 0.7
        ref = 0.3**2 * (1.0 / (64.0 * 0.125**2 * w_sum**2) - 0.25)
        assert sol.particles[0].a ** 2 == pytest.approx(ref, rel=1e-10)

    def test_uniform_constructor_matches_closed_form(self):
        uni = uni_for([ParticleSpec(mass=1.0)])
        sol = ansatz.build_uniform_oscillators(2, 1.0, 0.5, uni)
        assert sol.particles[0].a ** 2 == pytest.approx(3.0 / 16.0, rel=1e-12)
        eb = ansatz.closed_form_energy(sol)
        # oscillator part is the potential expectation |C| m^2 (sum w)^2
        assert eb.oscillator == pytest.approx(0.125, rel=1e-10)
        assert eb.internal == pytest.approx(0.5, rel=1e-10)
        assert eb.total == pytest.approx(0.625, rel=1e-10)
        assert eb.total == pytest.approx(-sol.hbar * sol.cdot, rel=1e-10)

    def test_oscillator_part_scales_with_frequency_sum(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.3),
                       ParticleSpec(mass=1.0, omega=0.4)])
        eb = ansatz.closed_form_energy(ansatz.build_oscillator_solution(uni))
        assert eb.oscillator == pytest.approx(0.125 * 0.7**2, rel=1e-10)

    def test_energy_below_strict_bound(self):
        # E - E_kin < 5 hbar^4 / (16 m^2 |C|) whenever construction succeeds
        bound = 5.0 / (16.0 * 0.125)
        for w in (0.05, 0.3, 0.6, 0.95):
            uni = uni_for([ParticleSpec(mass=1.0, omega=w)])
            eb = ansatz.closed_form_energy(ansatz.build_oscillator_solution(uni))
            assert eb.total - eb.kinetic < bound

    def test_frequency_bound_violation(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.6)] * 2, c_abs=0.25)
        with pytest.raises(FrequencyBoundViolation):
            ansatz.build_oscillator_solution(uni)

    def test_uniform_frequency_bound_both_sides(self):
        uni = uni_for([ParticleSpec(mass=1.0)])
        bound = feasibility.frequency_bound(2, 1.0, uni)
        ansatz.build_uniform_oscillators(2, 1.0, bound * (1 - 1e-6), uni)
        with pytest.raises(FrequencyBoundViolation):
            ansatz.build_uniform_oscillators(2, 1.0, bound * (1 + 1e-6), uni)
        with pytest.raises(FrequencyBoundViolation):
            ansatz.build_uniform_oscillators(2, 1.0, bound, uni)

    def test_uniform_unequal_masses_rejected(self):
        uni = uni_for([ParticleSpec(mass=1.0)])
        with pytest.raises(MassRuleViolation):
            ansatz.build_uniform_oscillators(2, [1.0, 2.0], 0.1, uni)

    def test_free_limit_of_uniform_curvature(self):
        # w -> 0 recovers the free-soliton curvature 1/s^4
        uni = uni_for([ParticleSpec(mass=1.0)])
        sol = ansatz.build_uniform_oscillators(1, 1.0, 1e-8, uni)
        assert sol.particles[0].a ** 2 == pytest.approx(1.0, rel=1e-6)


class TestDDimensional:
    def test_spherical_three_dimensional(self):
        sol = ansatz.build_d_dim_soliton(3, 1.0, 0.0, FREE1)
        for p in sol.particles:
            assert p.s**2 == pytest.approx(3.0, rel=1e-14)
        eb = ansatz.closed_form_energy(sol)
        assert eb.total == pytest.approx(0.5, rel=1e-13)

    def test_d1_identical_to_free_soliton(self):
        sol_d = ansatz.build_d_dim_soliton(1, 1.0, 0.0, FREE1)
        sol_1 = ansatz.build_free_soliton(1.0, 0.0, FREE1)
        assert sol_d.particles == sol_1.particles
        assert sol_d.cdot == sol_1.cdot

    def test_anisotropic_shapes_share_energy(self):
        sheet = ansatz.build_d_dim_soliton(
            3, 1.0, 0.0, FREE1, width_weights=[0.45, 0.45, 0.1])
        string = ansatz.build_d_dim_soliton(
            3, 1.0, 0.0, FREE1, width_weights=[0.1, 0.1, 0.8])
        sphere = ansatz.build_d_dim_soliton(3, 1.0, 0.0, FREE1)
        energies = [ansatz.closed_form_energy(s).total
                    for s in (sheet, string, sphere)]
        for e in energies:
            assert e == pytest.approx(0.5, rel=1e-12)

    def test_shape_constraint_enforced(self):
        with pytest.raises(ShapeConstraintViolation):
            ansatz.build_d_dim_soliton(3, 1.0, 0.0, FREE1,
                                       width_weights=[0.5, 0.5, 0.5])
        with pytest.raises(ShapeConstraintViolation):
            ansatz.build_d_dim_soliton(3, 1.0, 0.0, FREE1,
                                       width_weights=[0.9, 0.2, -0.1])


class TestWeakProduct:
    def test_per_particle_couplings(self):
        uni = uni_for([ParticleSpec(mass=1.0, velocity=0.3),
                       ParticleSpec(mass=2.0, velocity=-0.2)],
                      variant="weakly-separable")
        sol = ansatz.build_weak_product(uni, couplings=[0.125, 0.25])
        assert sol.particles[0].s ** 2 == pytest.approx(1.0)
        assert sol.particles[1].s ** 2 == pytest.approx(4.0)
        eb = ansatz.closed_form_energy(sol)
        # per-particle stationary energies + kinetic
        expected = (0.5 * (1 * 0.3**2 + 2 * 0.2**2)
                    + 1.0 / (16 * 0.125) + 1.0 / (16 * 4 * 0.25))
        assert eb.total == pytest.approx(expected, rel=1e-13)

    def test_no_mass_rule_in_weak_variant(self):
        uni = uni_for([ParticleSpec(mass=1.0), ParticleSpec(mass=3.0)],
                      variant="weakly-separable")
        sol = ansatz.build_weak_product(uni)  # must not raise
        assert sol.n == 2

    def test_no_width_scaling_with_count(self):
        for n in (1, 2, 5):
            uni = uni_for([ParticleSpec(mass=1.0)] * n,
                          variant="weakly-separable")
            sol = ansatz.build_weak_product(uni)
            assert sol.particles[0].s ** 2 == pytest.approx(1.0)
