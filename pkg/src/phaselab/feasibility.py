"""Decide whether a particle roster admits an uncorrelated product-soliton
solution; produce the global constant k or an infeasibility certificate.

The consistency conditions of the product-Gaussian ansatz collapse to a
single scalar unknown, the common ratio k = s_i^2 a_i / m_i:

  * every free particle pins k exactly: k * m_i = 1 (positive branch),
    so free particles of different masses are mutually exclusive;
  * every oscillator needs k^2 m_i^2 < 1 and contributes
    a_i(k) = k m_i^2 w_i / (2 hbar sqrt(1 - k^2 m_i^2));
  * the coupling closes the system through sum_j a_j = k hbar^2/(8 |C|).

For pure-oscillator rosters the closing condition becomes

    g(k) = (4|C|/hbar^3) * sum_j m_j^2 w_j / sqrt(1 - k^2 m_j^2) - 1 = 0

on the open bracket (0, 1/max_j m_j), where g is strictly increasing, so
bisection either finds the unique root or g(0) >= 0 certifies that the
frequency bound is violated. Mass equality of free particles is tested
exactly (bitwise), not within a tolerance: the rule is an algebraic
identity, and a tolerance would manufacture physics that is not there.

Everything here is pure and deterministic; parallel sweeps over rosters
need no coordination. The mirror branch with all curvatures negative
(k -> -k) exists by symmetry and is not enumerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from phaselab.model import ParticleSpec, ValidatedUniverse

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"

MASS_RULE = "MassRule"
MIXING_RULE = "MixingRule"
FREQUENCY_BOUND = "FrequencyBound"
SIGN_CONSISTENCY = "SignConsistency"

# Verdicts of the free/oscillator mixing adjudication. "exclusion" refers
# to the claimed rule that free and oscillator-coupled solitons can never
# share one factorizable state.
EXCLUSION_CONFIRMED = "exclusion-confirmed"
EXCLUSION_CONTRADICTED = "exclusion-contradicted"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Certificate:
    """Names the violated consistency condition and the particles involved."""

    rule: str
    indices: tuple[int, ...] = ()
    detail: str = ""

    def to_dict(self) -> dict:
        return {"rule": self.rule, "indices": list(self.indices), "detail": self.detail}


@dataclass(frozen=True)
class FeasibilityResult:
    """Outcome of the k-reduction.

    When feasible, k is the common ratio s_i^2 a_i/m_i, params holds the
    derived (s^2, a) per particle, and back_substitution the worst
    normalized residual of the three consistency conditions. The bracket
    and the bisection trace are kept for auditability.
    """

    status: str
    k: float | None = None
    certificate: Certificate | None = None
    bracket: tuple[float, float] | None = None
    params: tuple[tuple[float, float], ...] | None = None  # (s^2, a) per particle
    back_substitution: float | None = None
    trace: tuple[tuple[float, float, float], ...] = field(default=(), compare=False)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_dict(self) -> dict:
        out: dict = {"status": self.status}
        if self.k is not None:
            out["k"] = self.k
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        if self.bracket is not None:
            out["bracket"] = list(self.bracket)
        if self.params is not None:
            out["params"] = [{"s2": s2, "a": a} for s2, a in self.params]
        if self.back_substitution is not None:
            out["back_substitution"] = self.back_substitution
        if self.trace:
            out["trace"] = [list(step) for step in self.trace]
        return out


def bisect_increasing(g, lo: float, hi: float, rtol: float = 1e-14,
                      max_iter: int = 200):
    """Bisection for a strictly increasing g with g(lo) < 0 < g(hi-).

    Returns (root, trace) where trace records (lo, hi, g(mid)) per step.
    The bracket endpoints are known a priori and g has an integrable
    singularity at the upper end, which is why bisection is used instead
    of Newton.
    """
    trace: list[tuple[float, float, float]] = []
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        trace.append((lo, hi, gm))
        if gm < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * max(abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi), tuple(trace)


def frequency_bound(n: int, m: float, cfg: ValidatedUniverse) -> float:
    """Strict upper bound on oscillator frequency for n identical particles.

    The sum of frequencies of equal-mass oscillators must stay below
    hbar^3/(4 |C| m^2); in the uniform case each frequency must therefore
    stay below hbar^3/(4 |C| n m^2).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not m > 0:
        raise ValueError("m must be > 0")
    return cfg.hbar**3 / (4.0 * cfg.c_abs * n * m * m)


def check_mass_rule(masses: Sequence[float]) -> FeasibilityResult:
    """Feasibility of an all-free roster: all masses must be exactly equal.

    The certificate cites the first unequal pair. Permutation-invariant:
    the first pair is (0, j) for the smallest offending j.
    """
    if len(masses) == 0:
        raise ValueError("empty roster")
    m0 = masses[0]
    for j, m in enumerate(masses):
        if m != m0:
            return FeasibilityResult(
                status=INFEASIBLE,
                certificate=Certificate(
                    MASS_RULE, (0, j),
                    f"free particles with masses {m0!r} and {m!r} pin "
                    f"incompatible k values {1.0 / m0!r} and {1.0 / m!r}",
                ),
            )
    return FeasibilityResult(status=FEASIBLE, k=1.0 / m0)


def check_sign_consistency(a_values: Sequence[float]) -> FeasibilityResult:
    """All phase curvatures must vanish together or none may vanish, and
    the non-zero ones must share one sign (the width relation makes
    s_i^2 proportional to (sum_j a_j)/a_i).
    """
    zero = [i for i, a in enumerate(a_values) if a == 0.0]
    nonzero = [i for i, a in enumerate(a_values) if a != 0.0]
    if zero and nonzero:
        return FeasibilityResult(
            status=INFEASIBLE,
            certificate=Certificate(
                SIGN_CONSISTENCY, (zero[0], nonzero[0]),
                "a vanishing phase curvature cannot coexist with a "
                "non-vanishing one: the ratio condition s_i^2 a_i m_j = "
                "s_j^2 a_j m_i fails when exactly one side is zero",
            ),
        )
    pos = [i for i in nonzero if a_values[i] > 0]
    neg = [i for i in nonzero if a_values[i] < 0]
    if pos and neg:
        return FeasibilityResult(
            status=INFEASIBLE,
            certificate=Certificate(
                SIGN_CONSISTENCY, (pos[0], neg[0]),
                "phase curvatures of mixed sign would force a negative "
                "squared width",
            ),
        )
    return FeasibilityResult(status=FEASIBLE)


def oscillator_a(k: float, m: float, omega: float, hbar: float) -> float:
    """Curvature of one oscillator at global ratio k (positive branch)."""
    return k * m * m * omega / (2.0 * hbar * math.sqrt(1.0 - k * k * m * m))


def _g_factory(osc: list[ParticleSpec], cfg: ValidatedUniverse):
    c4 = 4.0 * cfg.c_abs / cfg.hbar**3

    def g(k: float) -> float:
        out = 0.0
        for p in osc:
            gap = 1.0 - k * k * p.mass**2
            if gap <= 0.0:
                return math.inf  # past the integrable singularity
            out += p.mass**2 * p.omega / math.sqrt(gap)
        return c4 * out - 1.0

    return g


def solve_k(roster: Sequence[ParticleSpec], cfg: ValidatedUniverse,
            rtol: float = 1e-14) -> FeasibilityResult:
    """Solve the k-reduction for an arbitrary validated roster.

    Free particles pin k = 1/m exactly; pure-oscillator rosters are solved
    by bisection of the strictly increasing g(k) on (0, 1/max m). The
    output is verified by back-substitution into the width, coupling and
    ratio conditions with normalized residuals required <= 1e-10.
    """
    roster = list(roster)
    if not roster:
        raise ValueError("empty roster")
    hbar, c_abs = cfg.hbar, cfg.c_abs
    free_idx = [i for i, p in enumerate(roster) if p.omega == 0.0]
    osc_idx = [i for i, p in enumerate(roster) if p.omega > 0.0]

    if free_idx:
        m0 = roster[free_idx[0]].mass
        for j in free_idx[1:]:
            if roster[j].mass != m0:
                return FeasibilityResult(
                    status=INFEASIBLE,
                    certificate=Certificate(
                        MASS_RULE, (free_idx[0], j),
                        f"free particles pin k=1/m; masses {m0!r} and "
                        f"{roster[j].mass!r} differ",
                    ),
                )
        k = 1.0 / m0
        # oscillators sharing the state need k^2 m^2 < 1, i.e. m < m_free
        for j in osc_idx:
            if k * roster[j].mass >= 1.0:
                return FeasibilityResult(
                    status=INFEASIBLE, k=k,
                    certificate=Certificate(
                        MIXING_RULE, (free_idx[0], j),
                        f"oscillator mass {roster[j].mass!r} >= free mass "
                        f"{m0!r}: curvature would need 1 - k^2 m^2 <= 0",
                    ),
                )
        a_sum_target = k * hbar**2 / (8.0 * c_abs)
        a_osc = {j: oscillator_a(k, roster[j].mass, roster[j].omega, hbar)
                 for j in osc_idx}
        a_free_total = a_sum_target - sum(a_osc.values())
        if a_free_total <= 0.0:
            return FeasibilityResult(
                status=INFEASIBLE, k=k,
                certificate=Certificate(
                    SIGN_CONSISTENCY, (free_idx[0], osc_idx[0] if osc_idx else free_idx[0]),
                    "closing the curvature sum would force the free "
                    f"particles' curvature to {a_free_total!r} <= 0, "
                    "against the common sign of the oscillator curvatures",
                ),
            )
        a = [0.0] * len(roster)
        for j in osc_idx:
            a[j] = a_osc[j]
        share = a_free_total / len(free_idx)
        for i in free_idx:
            a[i] = share
        params = tuple((k * roster[i].mass / a[i], a[i]) for i in range(len(roster)))
        resid = back_substitution_residual(roster, cfg, k, params)
        return FeasibilityResult(status=FEASIBLE, k=k, params=params,
                                 back_substitution=resid)

    # pure oscillators: unique root of g on (0, 1/max m) when g(0) < 0
    m_max = max(p.mass for p in roster)
    g = _g_factory(roster, cfg)
    g0 = g(0.0)
    bracket = (0.0, 1.0 / m_max)
    if g0 >= 0.0:
        bound = hbar**3 / (4.0 * c_abs)
        total = sum(p.mass**2 * p.omega for p in roster)
        return FeasibilityResult(
            status=INFEASIBLE, bracket=bracket,
            certificate=Certificate(
                FREQUENCY_BOUND, (),
                f"sum_j m_j^2 w_j = {total!r} >= hbar^3/(4|C|) = {bound!r}: "
                "g(0) >= 0 leaves no root in the bracket",
            ),
        )
    # g -> +inf at the upper end; pull hi in just enough to be evaluable
    hi = bracket[1]
    hi_eval = hi * (1.0 - 1e-16)
    while g(hi_eval) <= 0.0:  # pragma: no cover - g diverges, loop is safety
        hi_eval = 0.5 * (hi_eval + hi)
    k, trace = bisect_increasing(g, 0.0, hi_eval, rtol=rtol)
    a = [oscillator_a(k, p.mass, p.omega, hbar) for p in roster]
    params = tuple((k * p.mass / ai, ai) for p, ai in zip(roster, a))
    resid = back_substitution_residual(roster, cfg, k, params)
    return FeasibilityResult(status=FEASIBLE, k=k, bracket=bracket,
                             params=params, back_substitution=resid,
                             trace=trace)


def back_substitution_residual(roster: Sequence[ParticleSpec],
                               cfg: ValidatedUniverse, k: float,
                               params: Sequence[tuple[float, float]]) -> float:
    """Worst normalized residual of the three consistency conditions.

    Checks, per particle, the width condition
    s^4 (a^2 + m^2 w^2 / (4 hbar^2)) = 1, the coupling condition
    a s^2 hbar^2 = 8 m |C| (sum a_j), and the common-ratio condition
    s^2 a / (m k) = 1. All three are evaluated in dimensionless form.
    """
    hbar, c_abs = cfg.hbar, cfg.c_abs
    a_sum = sum(a for _, a in params)
    worst = 0.0
    for p, (s2, a) in zip(roster, params):
        r_width = s2 * s2 * (a * a + p.mass**2 * p.omega**2 / (4.0 * hbar**2)) - 1.0
        r_coupling = a * s2 * hbar**2 / (8.0 * p.mass * c_abs * a_sum) - 1.0
        r_ratio = s2 * a / (p.mass * k) - 1.0
        worst = max(worst, abs(r_width), abs(r_coupling), abs(r_ratio))
    return worst


@dataclass(frozen=True)
class EtaChain:
    """The eta-elimination argument for one free/oscillator pair.

    eta = m_free/m_osc. `stated` evaluates the argument with the
    sqrt(1-eta^2) sign convention it is usually written with (requiring
    eta < 1), which predicts two different fourth-power widths for the
    oscillator, s4_width (via the width condition) and s4_ratio (via the
    curvature-sum and ratio conditions), conflicting unless eta = 1.
    `corrected` re-derives the elimination from the width-ratio relation,
    which actually gives sqrt(eta^2-1) with eta > 1 and makes the two
    width predictions coincide identically, so the sum condition alone
    decides existence.
    """

    eta: float
    stated: dict
    corrected: dict
    sign_note: str

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "stated": dict(self.stated),
            "corrected": dict(self.corrected),
            "sign_note": self.sign_note,
        }


SIGN_NOTE = (
    "sign discrepancy: the stated elimination writes sqrt(1 - eta^2) and "
    "needs eta < 1, but eliminating the curvature from the width-ratio "
    "relation gives 2 hbar^2 a^2 (eta^2 - 1) = m^2 w^2 / 2, i.e. "
    "sqrt(eta^2 - 1) with eta > 1; under the corrected sign the two width "
    "predictions become identical and no longer exclude mixing by "
    "themselves"
)


def eta_chain(m_free: float, m_osc: float, omega: float,
              cfg: ValidatedUniverse) -> EtaChain:
    """Evaluate the pairwise eta-elimination argument, both sign readings."""
    hbar = cfg.hbar
    eta = m_free / m_osc
    stated: dict = {"applicable": eta < 1.0}
    if eta < 1.0:
        root = math.sqrt(1.0 - eta * eta)
        a_j = m_osc * omega / (2.0 * hbar * root)
        s4_width = 4.0 * hbar**2 * (1.0 - eta**2) / (
            m_osc**2 * omega**2 * (2.0 - eta**2))
        s4_ratio = 4.0 * hbar**2 * (1.0 - eta**2) / (m_free**2 * omega**2)
        stated.update(
            a=a_j, s4_width=s4_width, s4_ratio=s4_ratio,
            conflict=not math.isclose(s4_width, s4_ratio, rel_tol=1e-12),
        )
    else:
        stated.update(conflict=None,
                      note="eta >= 1: the stated sqrt(1-eta^2) is not real; "
                           "eta == 1 forces w = 0")
    corrected: dict = {"applicable": eta > 1.0}
    if eta > 1.0:
        root = math.sqrt(eta * eta - 1.0)
        a_j = m_osc * omega / (2.0 * hbar * root)
        s4_width = 4.0 * hbar**2 * (eta**2 - 1.0) / (
            m_osc**2 * omega**2 * eta**2)
        s4_ratio = 4.0 * hbar**2 * (eta**2 - 1.0) / (m_free**2 * omega**2)
        corrected.update(
            a=a_j, s4_width=s4_width, s4_ratio=s4_ratio,
            agree=math.isclose(s4_width, s4_ratio, rel_tol=1e-12),
        )
    else:
        corrected.update(agree=None,
                         note="eta <= 1: corrected elimination needs the "
                              "free particle heavier than the oscillator")
    return EtaChain(eta=eta, stated=stated, corrected=corrected,
                    sign_note=SIGN_NOTE)


@dataclass(frozen=True)
class MixingVerdict:
    """Adjudication of the free/oscillator exclusion claim for one roster.

    Two independent procedures are run and both reported: the pairwise
    eta-elimination argument (in its stated and corrected sign readings)
    and the k-reduction, whose candidate parameters, when they exist, are
    constructed into a full solution and residual-tested against the
    equations of motion as ground truth.
    """

    verdict: str
    eta_chains: tuple[EtaChain, ...]
    k_result: FeasibilityResult
    residual_linf: float | None = None
    residual_l2: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "eta_chains": [c.to_dict() for c in self.eta_chains],
            "k_reduction": self.k_result.to_dict(),
            "detail": self.detail,
        }
        if self.residual_linf is not None:
            out["residual_linf"] = self.residual_linf
            out["residual_l2"] = self.residual_l2
        return out


def adjudicate_mixing(cfg: ValidatedUniverse,
                      residual_zero_tol: float = 1e-8,
                      residual_nonzero_tol: float = 1e-4) -> MixingVerdict:
    """Adjudicate whether the roster's free and oscillator-coupled solitons
    can share one factorizable state.

    Requires a mixed roster (at least one free and one oscillator
    particle). A verdict is always produced: candidate parameters from the
    k-reduction, when they exist, are residual-tested; measured residuals
    below residual_zero_tol certify an explicit mixed solution and
    contradict the exclusion claim for this roster, residuals above
    residual_nonzero_tol confirm it, anything between is inconclusive.
    """
    roster = list(cfg.particles)
    free_idx = [i for i, p in enumerate(roster) if p.omega == 0.0]
    osc_idx = [i for i, p in enumerate(roster) if p.omega > 0.0]
    if not free_idx or not osc_idx:
        raise ValueError("adjudicate_mixing needs a mixed roster "
                         "(at least one free and one oscillator particle)")

    chains = tuple(
        eta_chain(roster[free_idx[0]].mass, roster[j].mass, roster[j].omega, cfg)
        for j in osc_idx
    )
    k_result = solve_k(roster, cfg)
    if not k_result.feasible:
        return MixingVerdict(
            verdict=EXCLUSION_CONFIRMED,
            eta_chains=chains,
            k_result=k_result,
            detail="the k-reduction admits no candidate parameters for this "
                   f"roster ({k_result.certificate.rule}); exclusion holds "
                   "here",
        )

    # ground truth: construct the candidate and measure residuals
    from phaselab import ansatz, fieldlab  # local import to avoid a cycle

    sol = ansatz.solution_from_feasibility(roster, cfg, k_result)
    if sol.n <= 3:
        grid = fieldlab.default_grid(sol, span_sigmas=6.0, points=192)
        report = fieldlab.pde_residuals(sol, grid, times=(0.0, 0.5))
    else:
        report = fieldlab.pde_residuals_cloud(sol, times=(0.0, 0.5),
                                              n_points=100_000, seed=7)
    linf = max(report.continuity_linf, report.energy_linf)
    if linf <= residual_zero_tol:
        verdict = EXCLUSION_CONTRADICTED
        detail = ("the k-reduction candidate solves the equations of motion "
                  f"to linf residual {linf:.3e}: an explicit mixed "
                  "free/oscillator solution exists for this roster")
    elif linf >= residual_nonzero_tol:
        verdict = EXCLUSION_CONFIRMED
        detail = (f"the k-reduction candidate fails residually ({linf:.3e}); "
                  "no mixed solution of this form exists for this roster")
    else:
        verdict = INCONCLUSIVE
        detail = f"candidate residual {linf:.3e} is in the gray zone"
    return MixingVerdict(
        verdict=verdict, eta_chains=chains, k_result=k_result,
        residual_linf=linf, residual_l2=max(report.continuity_l2,
                                            report.energy_l2),
        detail=detail,
    )
