"""The k-reduction solver, exclusion certificates and the mixing verdict."""

import itertools
import math

import numpy as np
import pytest

from phaselab import ansatz, feasibility, fieldlab
from phaselab.model import ParticleSpec, UniverseConfig, validate


def uni_for(particles, c_abs=0.125, hbar=1.0):
    return validate(UniverseConfig(c_abs=c_abs, hbar=hbar,
                                   particles=tuple(particles)))


class TestSolveK:
    def test_equal_mass_oscillators_closed_form_root(self):
        # sqrt(1 - k^2) = 4|C| m^2 (sum w) / hbar^3 = 0.5  =>  k = sqrt(3)/2
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.5)] * 2)
        res = feasibility.solve_k(uni.particles, uni)
        assert res.feasible
        assert res.k == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-12)
        assert res.back_substitution <= 1e-10
        assert res.bracket == (0.0, 1.0)
        assert len(res.trace) > 20  # bisection iterations recorded

    def test_all_free_equal_masses(self):
        uni = uni_for([ParticleSpec(mass=1.0)] * 3)
        res = feasibility.solve_k(uni.particles, uni)
        assert res.feasible and res.k == 1.0
        assert res.back_substitution <= 1e-10

    def test_all_free_unequal_masses(self):
        uni = uni_for([ParticleSpec(mass=1.0), ParticleSpec(mass=2.0)])
        res = feasibility.solve_k(uni.particles, uni)
        assert not res.feasible
        assert res.certificate.rule == feasibility.MASS_RULE

    def test_frequency_bound_certificate(self):
        # (4|C|/hbar^3) sum m^2 w >= 1 leaves no root
        uni = uni_for([ParticleSpec(mass=1.0, omega=1.1)] * 2, c_abs=0.5)
        res = feasibility.solve_k(uni.particles, uni)
        assert not res.feasible
        assert res.certificate.rule == feasibility.FREQUENCY_BOUND

    def test_unequal_mass_oscillators_feasible(self):
        # the potential removes the mass degeneracy
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.4),
                       ParticleSpec(mass=2.0, omega=0.1)])
        res = feasibility.solve_k(uni.particles, uni)
        assert res.feasible
        assert 0.0 < res.k < 0.5  # strictly inside (0, 1/max m)
        assert res.back_substitution <= 1e-10

    def test_g_strictly_increasing(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.3),
                       ParticleSpec(mass=1.5, omega=0.2)])
        g = feasibility._g_factory(list(uni.particles), uni)
        ks = np.linspace(0.0, (1.0 / 1.5) * (1 - 1e-9), 100)
        vals = np.array([g(k) for k in ks])
        assert np.all(np.diff(vals) > 0)

    def test_equal_mass_result_matches_curvature_closed_form(self):
        uni = uni_for([ParticleSpec(mass=1.0, omega=0.2),
                       ParticleSpec(mass=1.0, omega=0.7)])
        res = feasibility.solve_k(uni.particles, uni)
        w_sum = 0.9
        a1_ref = 0.2**2 * (1.0 / (64 * 0.125**2 * w_sum**2) - 0.25)
        assert res.params[0][1] ** 2 == pytest.approx(a1_ref, rel=1e-10)


class TestMassRule:
    def test_equal_masses_feasible(self):
        res = feasibility.check_mass_rule([1.0, 1.0, 1.0, 1.0])
        assert res.feasible and res.k == 1.0

    def test_tiny_difference_is_infeasible(self):
        # the rule is an algebraic identity, tested exactly, not within a
        # tolerance
        res = feasibility.check_mass_rule([1.0, 1.0 + 1e-9])
        assert not res.feasible
        assert res.certificate.rule == feasibility.MASS_RULE
        assert res.certificate.indices == (0, 1)

    def test_k_is_inverse_mass(self):
        res = feasibility.check_mass_rule([2.0, 2.0])
        assert res.feasible and res.k == 0.5

    def test_permutation_invariant(self):
        masses = [1.0, 2.0, 1.0]
        for perm in itertools.permutations(masses):
            assert not feasibility.check_mass_rule(list(perm)).feasible
        for perm in itertools.permutations([3.0, 3.0, 3.0]):
            assert feasibility.check_mass_rule(list(perm)).feasible

    def test_randomized_rosters(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n = int(rng.integers(2, 9))
            m = float(rng.uniform(0.1, 5.0))
            masses = [m] * n
            if trial % 2 == 0:
                masses[int(rng.integers(0, n))] = m * (1.0 + rng.uniform(1e-9, 1.0))
                assert not feasibility.check_mass_rule(masses).feasible
            else:
                assert feasibility.check_mass_rule(masses).feasible


class TestSignConsistency:
    def test_zero_and_nonzero_curvature_exclusive(self):
        res = feasibility.check_sign_consistency([0.0, 0.3])
        assert not res.feasible
        assert res.certificate.rule == feasibility.SIGN_CONSISTENCY

    def test_all_zero_is_linear_limit(self):
        assert feasibility.check_sign_consistency([0.0, 0.0]).feasible

    def test_mixed_signs_rejected(self):
        res = feasibility.check_sign_consistency([0.5, -0.5])
        assert not res.feasible

    def test_common_sign_accepted(self):
        assert feasibility.check_sign_consistency([0.5, 0.25]).feasible
        assert feasibility.check_sign_consistency([-0.5, -0.25]).feasible


class TestFrequencyBound:
    def test_single_particle(self):
        uni = uni_for([ParticleSpec(mass=1.0)])
        assert feasibility.frequency_bound(1, 1.0, uni) == pytest.approx(2.0)

    def test_two_particles(self):
        uni = uni_for([ParticleSpec(mass=1.0)])
        assert feasibility.frequency_bound(2, 1.0, uni) == pytest.approx(1.0)

    def test_heavier_particles(self):
        # hbar^3/(4 |C| n m^2) with n=4, m=2, |C|=1/8: 1/(0.5*4*4) = 1/8
        uni = uni_for([ParticleSpec(mass=2.0)])
        assert feasibility.frequency_bound(4, 2.0, uni) == pytest.approx(1.0 / 8.0)


class TestMixingAdjudication:
    def test_refuses_unmixed_roster(self):
        uni = uni_for([ParticleSpec(mass=1.0)] * 2)
        with pytest.raises(ValueError, match="mixed roster"):
            feasibility.adjudicate_mixing(uni)

    def test_equal_masses_excluded(self):
        # eta = 1 forces w = 0; both procedures exclude this roster
        uni = uni_for([ParticleSpec(mass=1.0),
                       ParticleSpec(mass=1.0, omega=0.5)])
        verdict = feasibility.adjudicate_mixing(uni)
        assert verdict.verdict == feasibility.EXCLUSION_CONFIRMED
        assert not verdict.k_result.feasible
        assert verdict.k_result.certificate.rule == feasibility.MIXING_RULE

    def test_heavy_free_particle_contradicts_exclusion(self):
        # k = 1/2 candidate exists and solves the equations of motion
        uni = uni_for([ParticleSpec(mass=2.0),
                       ParticleSpec(mass=1.0, omega=0.5)])
        verdict = feasibility.adjudicate_mixing(uni)
        assert verdict.verdict == feasibility.EXCLUSION_CONTRADICTED
        assert verdict.k_result.k == 0.5
        assert verdict.residual_linf <= 1e-10

    def test_light_free_particle_excluded(self):
        uni = uni_for([ParticleSpec(mass=0.5),
                       ParticleSpec(mass=1.0, omega=0.3)])
        verdict = feasibility.adjudicate_mixing(uni)
        assert verdict.verdict == feasibility.EXCLUSION_CONFIRMED

    def test_sign_discrepancy_always_flagged(self):
        uni = uni_for([ParticleSpec(mass=2.0),
                       ParticleSpec(mass=1.0, omega=0.5)])
        verdict = feasibility.adjudicate_mixing(uni)
        for chain in verdict.eta_chains:
            assert "sign discrepancy" in chain.sign_note

    def test_corrected_chain_widths_coincide(self):
        # under the corrected sign the two width predictions are identical
        uni = uni_for([ParticleSpec(mass=2.0),
                       ParticleSpec(mass=1.0, omega=0.5)])
        verdict = feasibility.adjudicate_mixing(uni)
        chain = verdict.eta_chains[0]
        assert chain.eta == 2.0
        assert chain.corrected["agree"] is True
        assert chain.corrected["s4_width"] == pytest.approx(
            chain.corrected["s4_ratio"], rel=1e-12)

    def test_stated_chain_conflicts_when_applicable(self):
        # eta < 1 makes the stated chain evaluable; its two width
        # predictions conflict (they agree only at eta = 1)
        chain = feasibility.eta_chain(0.5, 1.0, 0.3,
                                      uni_for([ParticleSpec(mass=1.0)]))
        assert chain.stated["applicable"]
        assert chain.stated["conflict"] is True

    def test_candidate_solution_verified_independently(self):
        # back-substitute the mixed-roster candidate into the fieldlab
        # finite-difference residual route as a second, independent check
        uni = uni_for([ParticleSpec(mass=2.0),
                       ParticleSpec(mass=1.0, omega=0.5)])
        res = feasibility.solve_k(uni.particles, uni)
        sol = ansatz.solution_from_feasibility(uni.particles, uni, res)
        grid = fieldlab.default_grid(sol, span_sigmas=6.0, points=192)
        fd = fieldlab.pde_residuals_fd(sol, grid, times=(0.4,))
        assert max(fd.continuity_linf, fd.energy_linf) <= 1e-3


def test_feasibility_result_serializes_with_trace():
    uni = uni_for([ParticleSpec(mass=1.0, omega=0.5)] * 2)
    res = feasibility.solve_k(uni.particles, uni)
    data = res.to_dict()
    assert data["status"] == "Feasible"
    assert "trace" in data and len(data["trace"]) == len(res.trace)
    assert "bracket" in data and "params" in data
