"""Sample wave-function fields on grids, evaluate the residuals of the
equations of motion (both Lagrangian variants), and compute norm and
energy by quadrature.

The equations of motion in amplitude/phase variables (phase as an angle,
coupling C = -|C|) are, for n particles of mass m_i,

  continuity:  hbar d(R^2)/dt + sum_i (hbar^2/m_i) d_i(R^2 d_i S)
               - 2 C sum_i D_i(R^2 * L) = 0
  energy:      sum_i (hbar^2/m_i) D_i R - 2 R hbar dS/dt - 2 R V
               - sum_i (hbar^2/m_i) R (d_i S)^2 - 2 C R L^2 = 0

with L = sum_j D_j S for the cross-coupled variant; the weakly separable
variant replaces the coupled structure by per-particle terms,
sum_i 2 C_i D_i(R^2 D_i S) in the continuity equation and
2 R sum_i C_i (D_i S)^2 in the energy equation (allowing a per-particle
coupling C_i). Here d_i and D_i denote the first and second derivative in
the i-th particle coordinate.

Every supported closed-form solution has a Gaussian amplitude and a phase
quadratic in the coordinates, so the phase curvature D_i S is spatially
uniform and third-order phase terms vanish exactly; the residual evaluator
relies on that (snapshots carry the curvature as one constant per axis).

Residual norms are evaluated only where the density exceeds
mask_rel * max(R^2) because the energy equation is singular where the
density vanishes; the masked-out fraction is reported so silent masking
cannot hide errors. Quadrature uses the trapezoidal rule on uniform
truncated grids (one grid serves residuals, finite-difference
cross-checks, and energies alike). Reductions are plain numpy sums, so
norms are deterministic and reproducible.

Note on function spaces: the quadratic phase grows without bound at
spatial infinity; the energy integrals converge only because the density
decays faster than any polynomial, and the residual mask keeps the norms
away from the degenerate tails.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from phaselab.model import (
    CROSS_COUPLED,
    WEAKLY_SEPARABLE,
    EnergyBreakdown,
    EntangledPairSolution,
    GridTooSmall,
    SolitonSolution,
    VariantMismatch,
)

CONTINUITY = "continuity"
ENERGY = "energy"


@dataclass(frozen=True)
class Axis:
    """One uniformly spaced grid dimension."""

    lo: float
    hi: float
    points: int

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("a grid axis needs at least 8 points")
        if not self.hi > self.lo:
            raise ValueError("axis upper bound must exceed lower bound")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.points - 1)

    def vector(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid with a density floor for residual masking."""

    axes: tuple[Axis, ...]
    mask_rel: float = 1e-12
    trunc_tol: float = 1e-9

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def mesh(self) -> list[np.ndarray]:
        vecs = [ax.vector() for ax in self.axes]
        if len(vecs) == 1:
            return vecs
        return list(np.meshgrid(*vecs, indexing="ij"))

    def spacings(self) -> list[float]:
        return [ax.h for ax in self.axes]


def _axis_widths(sol: SolitonSolution | EntangledPairSolution) -> list[float]:
    """Equivalent per-axis Gaussian half-widths (amplitude ~ e^{-x^2/s_ax^2})."""
    if isinstance(sol, EntangledPairSolution):
        s_ax = sol.s / math.sqrt(2.0)
        return [s_ax, s_ax]
    return [p.s for p in sol.particles]


def _axis_centers(sol: SolitonSolution | EntangledPairSolution,
                  t: float) -> list[float]:
    if isinstance(sol, EntangledPairSolution):
        if sol.branch == "upper":
            return [0.0, -sol.v * t]
        return [sol.v * t, 0.0]
    return [p.v * t for p in sol.particles]


def default_grid(sol, span_sigmas: float = 6.0, points: int = 1024,
                 times: Sequence[float] = (0.0,), mask_rel: float = 1e-12) -> Grid:
    """Grid covering every packet center +- span_sigmas half-widths at all
    the given times."""
    widths = _axis_widths(sol)
    axes = []
    for i, s in enumerate(widths):
        centers = [_axis_centers(sol, t)[i] for t in times]
        lo = min(centers) - span_sigmas * s
        hi = max(centers) + span_sigmas * s
        axes.append(Axis(lo=lo, hi=hi, points=points))
    return Grid(axes=tuple(axes), mask_rel=mask_rel)


@dataclass(frozen=True)
class FieldSnapshot:
    """Closed-form fields and derivatives on a set of points.

    coords holds one array per particle coordinate (meshgrid arrays for
    tensor grids, flat arrays for point clouds). dS2 is the spatially
    uniform phase curvature per axis. couplings is the per-axis coupling
    magnitude in effect (equal to c_abs except for weak-variant solutions
    with per-particle couplings).
    """

    t: float
    coords: tuple[np.ndarray, ...]
    amplitude: np.ndarray           # R
    density: np.ndarray             # R^2
    phase: np.ndarray               # S
    dR: tuple[np.ndarray, ...]
    d2R: tuple[np.ndarray, ...]
    dS: tuple[np.ndarray, ...]
    dS2: tuple[float, ...]
    density_dt: np.ndarray
    phase_dt: np.ndarray
    potential: np.ndarray
    masses: tuple[float, ...]
    hbar: float
    c_abs: float
    couplings: tuple[float, ...]
    variant: str
    grid: Grid | None = field(default=None, compare=False)

    @property
    def ndim(self) -> int:
        return len(self.coords)

    def export_csv(self, path: str | Path) -> None:
        """Flat tabular export (coordinates, density, phase)."""
        cols = [c.ravel() for c in self.coords]
        dens = self.density.ravel()
        ph = self.phase.ravel()
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([f"x{i + 1}" for i in range(self.ndim)]
                            + ["density", "phase"])
            for row in zip(*cols, dens, ph):
                writer.writerow([repr(v) for v in row])


def _check_coverage(sol, grid: Grid, t: float) -> None:
    widths = _axis_widths(sol)
    centers = _axis_centers(sol, t)
    if grid.ndim != len(widths):
        raise GridTooSmall(
            f"grid has {grid.ndim} axes, solution needs {len(widths)}")
    for ax, s, c in zip(grid.axes, widths, centers):
        if ax.lo > c - 4.0 * s or ax.hi < c + 4.0 * s:
            raise GridTooSmall(
                f"axis [{ax.lo}, {ax.hi}] does not cover +-4 half-widths "
                f"around the packet center {c} (s = {s})")


def _sample_soliton(sol: SolitonSolution, coords: Sequence[np.ndarray],
                    t: float, grid: Grid | None) -> FieldSnapshot:
    hbar = sol.hbar
    N = sol.normalization()
    expo = np.zeros_like(coords[0])
    us = []
    for p, x in zip(sol.particles, coords):
        u = x - p.v * t
        us.append(u)
        expo -= u * u / p.s2
    R = N * np.exp(expo)
    density = R * R
    dR, d2R, dS = [], [], []
    phase = np.full_like(coords[0], sol.c0 + sol.cdot * t)
    density_dt = np.zeros_like(coords[0])
    phase_dt = np.full_like(coords[0], sol.cdot)
    potential = np.zeros_like(coords[0])
    for p, x, u in zip(sol.particles, coords, us):
        s2 = p.s2
        dR.append(-(2.0 * u / s2) * R)
        d2R.append((4.0 * u * u / s2**2 - 2.0 / s2) * R)
        dS.append(2.0 * p.a * u + p.b * p.v)
        phase += p.a * u * u + p.b * p.v * x
        density_dt += density * (4.0 * u * p.v / s2)
        phase_dt += -2.0 * p.a * p.v * u
        if p.omega != 0.0:
            potential += 0.5 * p.m * p.omega**2 * u * u
    return FieldSnapshot(
        t=t, coords=tuple(coords), amplitude=R, density=density, phase=phase,
        dR=tuple(dR), d2R=tuple(d2R), dS=tuple(dS),
        dS2=tuple(2.0 * p.a for p in sol.particles),
        density_dt=density_dt, phase_dt=phase_dt, potential=potential,
        masses=tuple(p.m for p in sol.particles), hbar=hbar,
        c_abs=sol.c_abs,
        couplings=tuple(sol.coupling(i) for i in range(sol.n)),
        variant=sol.variant, grid=grid,
    )


def _sample_pair(sol: EntangledPairSolution, coords: Sequence[np.ndarray],
                 t: float, grid: Grid | None) -> FieldSnapshot:
    X, Y = coords
    s2 = sol.s**2
    u = X - Y - sol.v * t
    w = X + Y + sol.w_sign * sol.v * t
    R = sol.normalization() * np.exp(-(u * u + w * w) / s2)
    density = R * R
    a, v = sol.a, sol.v
    dRx = -(2.0 / s2) * (u + w) * R
    dRy = -(2.0 / s2) * (w - u) * R
    d2Rx = (-(4.0 / s2) + (4.0 / s2**2) * (u + w) ** 2) * R
    d2Ry = (-(4.0 / s2) + (4.0 / s2**2) * (w - u) ** 2) * R
    dSx = 2.0 * a * (u + w) + v * (sol.b_minus + sol.b_plus)
    dSy = 2.0 * a * (w - u) + v * (sol.b_plus - sol.b_minus)
    phase = (a * (u * u + w * w)
             + v * (sol.b_minus * (X - Y) + sol.b_plus * (X + Y))
             + sol.c0 + sol.cdot * t)
    density_dt = density * (-2.0 / s2) * (
        2.0 * u * (-v) + 2.0 * w * (sol.w_sign * v))
    phase_dt = a * (2.0 * u * (-v) + 2.0 * w * (sol.w_sign * v)) + sol.cdot
    return FieldSnapshot(
        t=t, coords=(X, Y), amplitude=R, density=density, phase=phase,
        dR=(dRx, dRy), d2R=(d2Rx, d2Ry), dS=(dSx, dSy),
        dS2=(4.0 * a, 4.0 * a),
        density_dt=density_dt, phase_dt=phase_dt,
        potential=np.zeros_like(X),
        masses=(sol.m, sol.m), hbar=sol.hbar, c_abs=sol.c_abs,
        couplings=(sol.c_abs, sol.c_abs), variant=sol.variant, grid=grid,
    )


def sample(sol: SolitonSolution | EntangledPairSolution, grid: Grid,
           t: float) -> FieldSnapshot:
    """Evaluate fields and all derivatives from the closed forms on a grid.

    The grid must cover +-4 half-widths around each packet center at the
    requested time.
    """
    _check_coverage(sol, grid, t)
    coords = grid.mesh()
    if isinstance(sol, EntangledPairSolution):
        return _sample_pair(sol, coords, t, grid)
    return _sample_soliton(sol, coords, t, grid)


def _coupling_sign(c_abs: float) -> float:
    return -c_abs  # the theory fixes C = -|C|


def residual_fields(snap: FieldSnapshot, variant: str) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise residuals of (continuity, energy) for the given variant."""
    hbar = snap.hbar
    R = snap.amplitude
    density = snap.density
    ddensity = [2.0 * R * dRi for dRi in snap.dR]
    lap_density = [2.0 * dRi * dRi + 2.0 * R * d2Ri
                   for dRi, d2Ri in zip(snap.dR, snap.d2R)]

    eq1 = hbar * snap.density_dt
    for m, ddens_i, dS_i, dS2_i in zip(snap.masses, ddensity, snap.dS, snap.dS2):
        eq1 = eq1 + (hbar**2 / m) * (ddens_i * dS_i + density * dS2_i)
    eq2 = -2.0 * R * hbar * snap.phase_dt - 2.0 * R * snap.potential
    for m, d2R_i, dS_i in zip(snap.masses, snap.d2R, snap.dS):
        eq2 = eq2 + (hbar**2 / m) * d2R_i - (hbar**2 / m) * R * dS_i**2

    if variant == CROSS_COUPLED:
        C = _coupling_sign(snap.c_abs)
        L = math.fsum(snap.dS2)
        lap_density_total = sum(lap_density)
        eq1 = eq1 - 2.0 * C * L * lap_density_total
        eq2 = eq2 - 2.0 * C * R * L**2
    elif variant == WEAKLY_SEPARABLE:
        for ci, dS2_i, lap_i in zip(snap.couplings, snap.dS2, lap_density):
            Ci = _coupling_sign(ci)
            eq1 = eq1 - 2.0 * Ci * dS2_i * lap_i
            eq2 = eq2 - 2.0 * Ci * R * dS2_i**2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return eq1, eq2


@dataclass(frozen=True)
class ResidualReport:
    """Masked residual norms of the two equations of motion over times.

    l2 is the masked root-mean-square, linf the masked maximum of the
    absolute pointwise residual; aggregate values are maxima over the
    evaluated times. masked_out_fraction is the largest fraction of points
    excluded by the density floor.
    """

    variant: str
    times: tuple[float, ...]
    mode: str                      # "grid" or "cloud"
    mask_rel: float
    continuity_l2: float
    continuity_linf: float
    energy_l2: float
    energy_linf: float
    masked_out_fraction: float
    per_time: tuple[dict, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "equations": {
                CONTINUITY: {"l2": self.continuity_l2,
                             "linf": self.continuity_linf},
                ENERGY: {"l2": self.energy_l2, "linf": self.energy_linf},
            },
            "variant": self.variant,
            "times": list(self.times),
            "mode": self.mode,
            "mask_rel": self.mask_rel,
            "masked_out_fraction": self.masked_out_fraction,
            "per_time": [dict(d) for d in self.per_time],
        }


def _resolve_variant(sol, variant: str | None, override: bool) -> str:
    if variant is None:
        return sol.variant
    n = 2 if isinstance(sol, EntangledPairSolution) else sol.n
    if variant != sol.variant and n > 1 and not override:
        raise VariantMismatch(
            f"solution was constructed for the {sol.variant} variant; "
            f"residual-testing it against {variant} needs override=True "
            "(for a single particle both variants coincide)")
    return variant


def _norms(eq1: np.ndarray, eq2: np.ndarray, density: np.ndarray,
           mask_rel: float) -> tuple[float, float, float, float, float]:
    mask = density > mask_rel * density.max()
    frac_out = 1.0 - float(mask.mean())
    r1 = eq1[mask]
    r2 = eq2[mask]
    return (
        float(np.sqrt(np.mean(r1 * r1))),
        float(np.abs(r1).max()),
        float(np.sqrt(np.mean(r2 * r2))),
        float(np.abs(r2).max()),
        frac_out,
    )


def _assemble_report(snaps: Sequence[FieldSnapshot], variant: str,
                     times: Sequence[float], mode: str,
                     mask_rel: float) -> ResidualReport:
    per_time = []
    for snap in snaps:
        eq1, eq2 = residual_fields(snap, variant)
        c_l2, c_linf, e_l2, e_linf, frac = _norms(eq1, eq2, snap.density,
                                                  mask_rel)
        per_time.append({
            "t": snap.t, "continuity_l2": c_l2, "continuity_linf": c_linf,
            "energy_l2": e_l2, "energy_linf": e_linf,
            "masked_out_fraction": frac,
        })
    return ResidualReport(
        variant=variant, times=tuple(times), mode=mode, mask_rel=mask_rel,
        continuity_l2=max(d["continuity_l2"] for d in per_time),
        continuity_linf=max(d["continuity_linf"] for d in per_time),
        energy_l2=max(d["energy_l2"] for d in per_time),
        energy_linf=max(d["energy_linf"] for d in per_time),
        masked_out_fraction=max(d["masked_out_fraction"] for d in per_time),
        per_time=tuple(per_time),
    )


def pde_residuals(sol, grid: Grid, times: Sequence[float],
                  variant: str | None = None,
                  override: bool = False) -> ResidualReport:
    """Masked residual norms on a tensor grid (up to 3 axes).

    For larger particle counts the tensor product is intractable; use
    pde_residuals_cloud, which evaluates the same pointwise residuals on a
    randomized point cloud.
    """
    variant = _resolve_variant(sol, variant, override)
    if grid.ndim > 3:
        raise ValueError("tensor grids support at most 3 axes; use "
                         "pde_residuals_cloud for larger systems")
    snaps = [sample(sol, grid, t) for t in times]
    return _assemble_report(snaps, variant, times, "grid", grid.mask_rel)


def pde_residuals_cloud(sol: SolitonSolution, times: Sequence[float],
                        n_points: int = 100_000, seed: int = 0,
                        variant: str | None = None, override: bool = False,
                        mask_rel: float = 1e-12) -> ResidualReport:
    """Masked residual norms on points drawn from the packet density.

    Sampling from the density keeps the cloud inside the physically
    relevant region for any particle count; the residual is pointwise, so
    random evaluation is sound. Deterministic for a fixed seed.
    """
    if isinstance(sol, EntangledPairSolution):
        raise ValueError("point clouds are for product solutions; the "
                         "pair is two-dimensional, use a grid")
    variant = _resolve_variant(sol, variant, override)
    rng = np.random.default_rng(seed)
    snaps = []
    for t in times:
        coords = [
            rng.normal(p.v * t, p.s / 2.0, size=n_points)
            for p in sol.particles
        ]
        snaps.append(_sample_soliton(sol, coords, t, None))
    return _assemble_report(snaps, variant, times, "cloud", mask_rel)


def _d1(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.gradient(f, h, axis=axis, edge_order=2)
    return out


def _d2(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    fp = np.roll(f, -1, axis=axis)
    fm = np.roll(f, +1, axis=axis)
    out = (fp - 2.0 * f + fm) / (h * h)
    # one-sided copies at the edges keep the shape; callers trim the border
    sl_lo = [slice(None)] * f.ndim
    sl_lo[axis] = 0
    sl_next = [slice(None)] * f.ndim
    sl_next[axis] = 1
    out[tuple(sl_lo)] = out[tuple(sl_next)]
    sl_hi = [slice(None)] * f.ndim
    sl_hi[axis] = -1
    sl_prev = [slice(None)] * f.ndim
    sl_prev[axis] = -2
    out[tuple(sl_hi)] = out[tuple(sl_prev)]
    return out


def pde_residuals_fd(sol, grid: Grid, times: Sequence[float],
                     variant: str | None = None, override: bool = False,
                     dt: float = 1e-4) -> ResidualReport:
    """Independent residual route: only density and phase are taken from
    the closed forms; every derivative (space and time) is formed by
    central differences. Serves as the cross-check oracle for the analytic
    residual path; accuracy is O(h^2) + O(dt^2), so this route resolves
    residual magnitudes down to roughly that floor, not to machine zero.
    """
    variant = _resolve_variant(sol, variant, override)
    hs = grid.spacings()
    per_snaps = []
    for t in times:
        snap = sample(sol, grid, t)
        before = sample(sol, grid, t - dt)
        after = sample(sol, grid, t + dt)
        R = np.sqrt(snap.density)
        density_dt = (after.density - before.density) / (2.0 * dt)
        phase_dt = (after.phase - before.phase) / (2.0 * dt)
        dR = [_d1(R, h, ax) for ax, h in enumerate(hs)]
        d2R = [_d2(R, h, ax) for ax, h in enumerate(hs)]
        dS = [_d1(snap.phase, h, ax) for ax, h in enumerate(hs)]
        d2S = [_d2(snap.phase, h, ax) for ax, h in enumerate(hs)]
        hbar = snap.hbar
        density = snap.density
        eq1 = hbar * density_dt
        eq2 = -2.0 * R * hbar * phase_dt - 2.0 * R * snap.potential
        ddensity = [_d1(density, h, ax) for ax, h in enumerate(hs)]
        lap_density = [_d2(density, h, ax) for ax, h in enumerate(hs)]
        for m, ddens_i, dS_i, d2S_i, d2R_i in zip(snap.masses, ddensity, dS,
                                                  d2S, d2R):
            eq1 = eq1 + (hbar**2 / m) * (ddens_i * dS_i + density * d2S_i)
            eq2 = eq2 - (hbar**2 / m) * R * dS_i**2
        for m, d2R_i in zip(snap.masses, d2R):
            eq2 = eq2 + (hbar**2 / m) * d2R_i
        if variant == CROSS_COUPLED:
            C = _coupling_sign(snap.c_abs)
            L = sum(d2S)
            cross1 = sum(_d2(density * L, h, ax) for ax, h in enumerate(hs))
            eq1 = eq1 - 2.0 * C * cross1
            eq2 = eq2 - 2.0 * C * R * L**2
        else:
            for ax, (ci, d2S_i) in enumerate(zip(snap.couplings, d2S)):
                Ci = _coupling_sign(ci)
                eq1 = eq1 - 2.0 * Ci * _d2(density * d2S_i, hs[ax], ax)
                eq2 = eq2 - 2.0 * Ci * R * d2S_i**2
        # trim the border cells where the one-sided stencils live
        trim = tuple(slice(2, -2) for _ in range(grid.ndim))
        per_snaps.append((snap.t, eq1[trim], eq2[trim], density[trim]))
    per_time = []
    for t, eq1, eq2, density in per_snaps:
        c_l2, c_linf, e_l2, e_linf, frac = _norms(eq1, eq2, density,
                                                  grid.mask_rel)
        per_time.append({
            "t": t, "continuity_l2": c_l2, "continuity_linf": c_linf,
            "energy_l2": e_l2, "energy_linf": e_linf,
            "masked_out_fraction": frac,
        })
    return ResidualReport(
        variant=variant, times=tuple(times), mode="grid-fd",
        mask_rel=grid.mask_rel,
        continuity_l2=max(d["continuity_l2"] for d in per_time),
        continuity_linf=max(d["continuity_linf"] for d in per_time),
        energy_l2=max(d["energy_l2"] for d in per_time),
        energy_linf=max(d["energy_linf"] for d in per_time),
        masked_out_fraction=max(d["masked_out_fraction"] for d in per_time),
        per_time=tuple(per_time),
    )


def _integrate(values: np.ndarray, hs: Sequence[float]) -> float:
    out = values
    for h in reversed(hs):
        out = np.trapezoid(out, dx=h, axis=-1)
    return float(out)


def norm_quadrature(sol, grid: Grid, t: float = 0.0) -> float:
    """Trapezoidal quadrature of the density over the grid."""
    snap = sample(sol, grid, t)
    return _integrate(snap.density, grid.spacings())


def energy_quadrature(sol, grid: Grid, t: float = 0.0) -> EnergyBreakdown:
    """Trapezoidal quadrature of the energy functional over the grid.

    The raw split (amplitude-gradient, phase-gradient, coupling,
    potential) is attached as `parts`. The reported kinetic part is the
    uniform drift contribution fixed by the solution's linear-phase
    constants, oscillator the potential expectation, internal the rest, so
    the triple is directly comparable with closed_form_energy.
    """
    snap = sample(sol, grid, t)
    hs = grid.spacings()
    hbar = snap.hbar
    density = snap.density
    amplitude_gradient = sum(
        (hbar**2 / (2.0 * m)) * dR_i**2
        for m, dR_i in zip(snap.masses, snap.dR))
    phase_gradient = sum(
        (hbar**2 / (2.0 * m)) * density * dS_i**2
        for m, dS_i in zip(snap.masses, snap.dS))
    if snap.variant == WEAKLY_SEPARABLE:
        coupling = sum(_coupling_sign(ci) * density * dS2_i**2
                       for ci, dS2_i in zip(snap.couplings, snap.dS2))
    else:
        L = math.fsum(snap.dS2)
        coupling = _coupling_sign(snap.c_abs) * density * L**2
    potential = snap.potential * density

    parts = {
        "amplitude_gradient": _integrate(amplitude_gradient, hs),
        "phase_gradient": _integrate(phase_gradient, hs),
        "coupling": _integrate(coupling, hs),
        "potential": _integrate(potential, hs),
        "norm": _integrate(density, hs),
    }
    total = (parts["amplitude_gradient"] + parts["phase_gradient"]
             + parts["coupling"] + parts["potential"])
    if isinstance(sol, EntangledPairSolution):
        kinetic = 0.5 * sol.m * sol.v**2 * parts["norm"]
    else:
        kinetic = math.fsum(
            (hbar**2 / (2.0 * p.m)) * (p.b * p.v) ** 2
            for p in sol.particles) * parts["norm"]
    oscillator = parts["potential"]
    internal = total - kinetic - oscillator
    return EnergyBreakdown(kinetic=kinetic, internal=internal,
                           oscillator=oscillator, total=total, parts=parts)


def _bump(coords: Sequence[np.ndarray], centers: Sequence[float],
          widths: Sequence[float], amp: float):
    """Gaussian bump with analytic first and second axis derivatives."""
    expo = np.zeros_like(coords[0])
    for x, c, w in zip(coords, centers, widths):
        expo -= (x - c) ** 2 / w**2
    f = amp * np.exp(expo)
    df, d2f = [], []
    for x, c, w in zip(coords, centers, widths):
        u = x - c
        df.append(-(2.0 * u / w**2) * f)
        d2f.append((4.0 * u * u / w**4 - 2.0 / w**2) * f)
    return f, df, d2f


def _spatial_functional(R, dR, dS, d2S, density, potential, masses, hbar,
                        c_abs, couplings, variant, hs) -> float:
    """The spatial part of the action density, integrated.

    Its functional derivatives with respect to R and S are exactly the
    time-independent parts of the two equations of motion (up to sign),
    which is what the directional-derivative oracle certifies.
    """
    integrand = sum((hbar**2 / (2.0 * m)) * (dR_i**2 + density * dS_i**2)
                    for m, dR_i, dS_i in zip(masses, dR, dS))
    if variant == WEAKLY_SEPARABLE:
        integrand = integrand + sum(
            _coupling_sign(ci) * density * d2S_i**2
            for ci, d2S_i in zip(couplings, d2S))
    else:
        L = sum(d2S)
        integrand = integrand + _coupling_sign(c_abs) * density * L**2
    integrand = integrand + potential * density
    return _integrate(integrand, hs)


def variational_check(sol, grid: Grid, variant: str | None = None,
                      epsilons: Sequence[float] = (2e-2, 1e-2, 5e-3, 2.5e-3),
                      seed: int = 0, t: float = 0.0,
                      override: bool = False) -> dict:
    """Directional-derivative test of the variational structure.

    For random smooth localized perturbations (dR, dS), the centered
    numeric derivative of the spatial action functional is compared with
    the inner product of the implemented Euler-Lagrange expressions with
    (dR, dS). Agreement to O(eps^2) as eps shrinks (fitted slope ~2)
    certifies the implemented equations without trusting hand algebra.
    Returns the fitted slope, the epsilon ladder and the errors.
    """
    variant = _resolve_variant(sol, variant, override)
    snap = sample(sol, grid, t)
    hs = grid.spacings()
    rng = np.random.default_rng(seed)
    widths0 = _axis_widths(sol)
    centers0 = _axis_centers(sol, t)

    def random_bump():
        centers = [c + rng.uniform(-0.8, 0.8) * s
                   for c, s in zip(centers0, widths0)]
        widths = [s * rng.uniform(0.35, 0.7) for s in widths0]
        amp = rng.uniform(0.5, 1.0)
        return _bump(snap.coords, centers, widths, amp)

    bump_R, dbump_R, d2bump_R = random_bump()
    bump_S, dbump_S, d2bump_S = random_bump()

    hbar = snap.hbar
    R = snap.amplitude
    density = snap.density
    # Euler-Lagrange expressions at the base point (phase curvature uniform)
    el_R = 2.0 * R * snap.potential
    for m, d2R_i, dS_i in zip(snap.masses, snap.d2R, snap.dS):
        el_R = el_R + (hbar**2 / m) * (-d2R_i + R * dS_i**2)
    ddensity = [2.0 * R * dR_i for dR_i in snap.dR]
    lap_density = [2.0 * dR_i**2 + 2.0 * R * d2R_i
                   for dR_i, d2R_i in zip(snap.dR, snap.d2R)]
    el_S = np.zeros_like(R)
    for m, ddens_i, dS_i, dS2_i in zip(snap.masses, ddensity, snap.dS,
                                       snap.dS2):
        el_S = el_S - (hbar**2 / m) * (ddens_i * dS_i + density * dS2_i)
    if variant == WEAKLY_SEPARABLE:
        for ci, dS2_i, lap_i in zip(snap.couplings, snap.dS2, lap_density):
            Ci = _coupling_sign(ci)
            el_R = el_R + 2.0 * Ci * R * dS2_i**2
            el_S = el_S + 2.0 * Ci * dS2_i * lap_i
    else:
        C = _coupling_sign(snap.c_abs)
        L = math.fsum(snap.dS2)
        el_R = el_R + 2.0 * C * R * L**2
        el_S = el_S + 2.0 * C * L * sum(lap_density)

    exact = (_integrate(el_R * bump_R, hs) + _integrate(el_S * bump_S, hs))

    base_d2S = [np.full_like(R, v) for v in snap.dS2]

    def functional(eps: float) -> float:
        Rp = R + eps * bump_R
        dRp = [dR_i + eps * db for dR_i, db in zip(snap.dR, dbump_R)]
        dSp = [dS_i + eps * db for dS_i, db in zip(snap.dS, dbump_S)]
        d2Sp = [b + eps * d2b for b, d2b in zip(base_d2S, d2bump_S)]
        return _spatial_functional(Rp, dRp, dSp, d2Sp, Rp * Rp,
                                   snap.potential, snap.masses, hbar,
                                   snap.c_abs, snap.couplings, variant, hs)

    errors = []
    for eps in epsilons:
        numeric = (functional(eps) - functional(-eps)) / (2.0 * eps)
        errors.append(abs(numeric - exact))
    logs_e = np.log(np.asarray(errors))
    logs_eps = np.log(np.asarray(list(epsilons)))
    slope = float(np.polyfit(logs_eps, logs_e, 1)[0])
    return {
        "variant": variant,
        "epsilons": list(epsilons),
        "errors": errors,
        "exact_directional_derivative": exact,
        "slope": slope,
    }
