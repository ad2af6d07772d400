"""Shared domain types, units convention, and configuration validation.

Natural units: hbar defaults to 1 and every quantity is dimensionless in
those units. The nonlinear coupling is stored as a magnitude c_abs > 0;
the coupling constant appearing in the equations of motion is C = -c_abs,
never stored signed. The constant part of the phase offset c(t=0) defaults
to 0 because a global phase is unobservable in the density and in all
residuals.

All types are immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

CROSS_COUPLED = "cross-coupled"
WEAKLY_SEPARABLE = "weakly-separable"
VARIANTS = (CROSS_COUPLED, WEAKLY_SEPARABLE)


class PhaselabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PhaselabError):
    """Configuration failed validation; carries the full violation list."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class MassRuleViolation(PhaselabError):
    """Free particles of unequal mass cannot share one factorizable state."""


class WeightInadmissible(PhaselabError):
    """A phase-curvature weight vector violates the joint admissibility checks."""


class FrequencyBoundViolation(PhaselabError):
    """Oscillator frequencies exceed the strict bound for real curvature."""


class ShapeConstraintViolation(PhaselabError):
    """Anisotropic width weights break the inverse-square-width sum rule."""


class GridTooSmall(PhaselabError):
    """Grid does not cover +-4 half-widths around every packet center."""


class VariantMismatch(PhaselabError):
    """Solution built for one Lagrangian variant tested against the other."""


class BlowupDetected(PhaselabError):
    """Time evolution produced a non-finite field value."""

    def __init__(self, message: str, last_state=None, t: float | None = None,
                 trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.t = t
        self.trajectory = trajectory


@dataclass(frozen=True)
class ParticleSpec:
    """One particle of the roster: mass > 0, velocity, frequency >= 0.

    omega == 0 means a free particle; omega > 0 couples the particle to a
    harmonic potential whose minimum moves with the packet center.
    """

    mass: float
    velocity: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class UniverseConfig:
    """Global constants and the particle roster.

    c_abs is the magnitude |C| of the nonlinear coupling; the theory fixes
    the sign, C = -c_abs.
    """

    c_abs: float
    particles: tuple[ParticleSpec, ...]
    hbar: float = 1.0
    variant: str = CROSS_COUPLED

    def to_dict(self) -> dict:
        return {
            "hbar": self.hbar,
            "c_abs": self.c_abs,
            "particles": [
                {"mass": p.mass, "velocity": p.velocity, "omega": p.omega}
                for p in self.particles
            ],
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UniverseConfig":
        particles = tuple(
            ParticleSpec(
                mass=p["mass"],
                velocity=p.get("velocity", 0.0),
                omega=p.get("omega", 0.0),
            )
            for p in data.get("particles", [])
        )
        return cls(
            c_abs=data.get("c_abs", 0.0),
            particles=particles,
            hbar=data.get("hbar", 1.0),
            variant=data.get("variant", CROSS_COUPLED),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "UniverseConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def violations(config: UniverseConfig) -> list[str]:
    """Collect all constraint violations of a config; empty means valid."""
    out: list[str] = []
    if not config.hbar > 0:
        out.append("hbar must be > 0")
    if not config.c_abs > 0:
        out.append("c_abs must be > 0")
    if len(config.particles) == 0:
        out.append("particle roster must be non-empty")
    for i, p in enumerate(config.particles):
        if not p.mass > 0:
            out.append(f"particles[{i}]: mass must be > 0")
        if p.omega < 0:
            out.append(f"particles[{i}]: omega must be >= 0")
    if config.variant not in VARIANTS:
        out.append(f"variant must be one of {VARIANTS}")
    return out


@dataclass(frozen=True)
class ValidatedUniverse:
    """Validated handle around a UniverseConfig.

    Downstream constructors accept only this type, so a config is checked
    exactly once. Validation is idempotent and side-effect free.
    """

    config: UniverseConfig

    @property
    def hbar(self) -> float:
        return self.config.hbar

    @property
    def c_abs(self) -> float:
        return self.config.c_abs

    @property
    def particles(self) -> tuple[ParticleSpec, ...]:
        return self.config.particles

    @property
    def variant(self) -> str:
        return self.config.variant

    @property
    def n(self) -> int:
        return len(self.config.particles)

    def masses(self) -> list[float]:
        return [p.mass for p in self.config.particles]

    def velocities(self) -> list[float]:
        return [p.velocity for p in self.config.particles]

    def omegas(self) -> list[float]:
        return [p.omega for p in self.config.particles]


def validate(config: UniverseConfig) -> ValidatedUniverse:
    """Return a validated handle, or raise ConfigError listing every violation.

    There is no partial acceptance: a config with any violation is rejected
    whole. A config that validates once validates always (inputs are
    immutable).
    """
    bad = violations(config)
    if bad:
        raise ConfigError(bad)
    return ValidatedUniverse(config)


@dataclass(frozen=True)
class SolitonParticle:
    """Derived per-particle parameters of a product-Gaussian solution.

    The squared Gaussian half-width s2 is the stored quantity (amplitude
    ~ exp[-(x-vt)^2/s2]) because the consistency conditions determine it
    exactly, without a square root; s is derived. a is the
    phase-curvature coefficient, b the linear-phase coefficient (phase
    term b*v*x). c_abs overrides the universe coupling for this particle
    only in the weakly separable variant, where a per-particle coupling
    is allowed.
    """

    s2: float
    a: float
    b: float
    v: float
    m: float
    omega: float = 0.0
    c_abs: float | None = None

    @property
    def s(self) -> float:
        return self.s2 ** 0.5


N_PARTICLE = "n-particle"
D_DIMENSIONAL = "d-dimensional"


@dataclass(frozen=True)
class SolitonSolution:
    """Full parameter set of a factorizable multi-Gaussian solution.

    kind distinguishes n one-dimensional particles from one particle in
    d dimensions (same mathematics, different physical reading: for
    d-dimensional solutions all records carry the same mass and the
    records are the spatial axes of a single particle).

    Invariants: every s > 0; all phase curvatures a share one sign (or all
    vanish in the linear limit). The amplitude normalization is determined:
    N = prod_i (2/(pi s_i^2))^(1/4).
    """

    particles: tuple[SolitonParticle, ...]
    cdot: float
    hbar: float
    c_abs: float
    c0: float = 0.0
    variant: str = CROSS_COUPLED
    kind: str = N_PARTICLE

    @property
    def n(self) -> int:
        return len(self.particles)

    def normalization(self) -> float:
        out = 1.0
        for p in self.particles:
            out *= (2.0 / (3.141592653589793 * p.s2)) ** 0.25
        return out

    def coupling(self, i: int) -> float:
        """Coupling magnitude in effect for particle i (weak variant may override)."""
        c = self.particles[i].c_abs
        return self.c_abs if c is None else c

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "variant": self.variant,
            "hbar": self.hbar,
            "c_abs": self.c_abs,
            "cdot": self.cdot,
            "c0": self.c0,
            "particles": [
                {
                    "s": p.s,
                    "s2": p.s2,
                    "a": p.a,
                    "b": p.b,
                    "v": p.v,
                    "m": p.m,
                    "omega": p.omega,
                    "c_abs": p.c_abs,
                }
                for p in self.particles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolitonSolution":
        particles = tuple(
            SolitonParticle(
                s2=p.get("s2", p["s"] ** 2), a=p["a"], b=p["b"], v=p["v"],
                m=p["m"], omega=p.get("omega", 0.0), c_abs=p.get("c_abs"),
            )
            for p in data["particles"]
        )
        return cls(
            particles=particles,
            cdot=data["cdot"],
            hbar=data["hbar"],
            c_abs=data["c_abs"],
            c0=data.get("c0", 0.0),
            variant=data.get("variant", CROSS_COUPLED),
            kind=data.get("kind", N_PARTICLE),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SolitonSolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


UPPER = "upper"
LOWER = "lower"


@dataclass(frozen=True)
class EntangledPairSolution:
    """Non-factorizable two-particle solution (equal masses, free).

    Amplitude ~ exp[-(x-y-vt)^2/s^2] * exp[-(x+y+w_sign*vt)^2/s^2] and
    phase a*[(x-y-vt)^2 + (x+y+w_sign*vt)^2] + v*[b_minus*(x-y)
    + b_plus*(x+y)] + c(t).

    Branch bookkeeping: s^2 = 32*c_abs*m/hbar^2, a^2 = 1/s^4 and
    b_minus = m/(2 hbar) on both branches; the upper branch has
    b_plus = -b_minus and its second packet factor centered on
    (x+y+vt), the lower branch b_plus = +b_minus centered on (x+y-vt).
    (The sign of b_plus must be anti-correlated with the sign in the
    moving center for the equations of motion to hold; tests verify this
    by residual evaluation at v != 0.)
    """

    s: float
    a: float
    b_minus: float
    b_plus: float
    v: float
    m: float
    branch: str
    cdot: float
    hbar: float
    c_abs: float
    c0: float = 0.0
    variant: str = CROSS_COUPLED

    @property
    def w_sign(self) -> float:
        """Sign of the vt term in the second packet coordinate x+y+w_sign*vt."""
        return 1.0 if self.branch == UPPER else -1.0

    def normalization(self) -> float:
        return 2.0 / (3.141592653589793 * self.s**2) ** 0.5

    def to_dict(self) -> dict:
        return {
            "kind": "entangled-pair",
            "variant": self.variant,
            "branch": self.branch,
            "hbar": self.hbar,
            "c_abs": self.c_abs,
            "s": self.s,
            "a": self.a,
            "b_minus": self.b_minus,
            "b_plus": self.b_plus,
            "v": self.v,
            "m": self.m,
            "cdot": self.cdot,
            "c0": self.c0,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EntangledPairSolution":
        return cls(
            s=data["s"], a=data["a"], b_minus=data["b_minus"],
            b_plus=data["b_plus"], v=data["v"], m=data["m"],
            branch=data["branch"], cdot=data["cdot"], hbar=data["hbar"],
            c_abs=data["c_abs"], c0=data.get("c0", 0.0),
            variant=data.get("variant", CROSS_COUPLED),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EntangledPairSolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EnergyBreakdown:
    """Kinetic, internal (stationary) and oscillator contributions.

    total == kinetic + internal + oscillator. `parts`, when present,
    carries the raw quadrature split (amplitude-gradient, phase-gradient,
    coupling, potential) from which a quadrature total was assembled.
    """

    kinetic: float
    internal: float
    oscillator: float
    total: float
    parts: dict | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {
            "kinetic": self.kinetic,
            "internal": self.internal,
            "oscillator": self.oscillator,
            "total": self.total,
        }
        if self.parts is not None:
            out["parts"] = dict(self.parts)
        return out


def load_solution(path: str | Path):
    """Load either solution type from JSON, dispatching on the kind tag."""
    data = json.loads(Path(path).read_text())
    if data.get("kind") == "entangled-pair":
        return EntangledPairSolution.from_dict(data)
    return SolitonSolution.from_dict(data)
