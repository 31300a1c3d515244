"""Domain types for powder dissolution work.

All records carry external units (um, mg/mL, m^2/s, g/mL, hr); simulation
converts to SI internally. Types validate their invariants on construction
and are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, DuplicateTimeError, ValidationError

# Default reporting grid for release curves, in hours.
DEFAULT_OUTPUT_GRID_HR = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)


@dataclass(frozen=True)
class DrugSubstance:
    """Intrinsic drug constants.

    Parameters
    ----------
    name : str
        Label for reports.
    c_sat_mg_ml : float
        Equilibrium solubility in the medium [mg/mL].
    diffusivity_m2_s : float
        Molecular diffusion coefficient [m^2/s].
    true_density_g_ml : float
        True (crystal) density [g/mL].
    """

    name: str
    c_sat_mg_ml: float
    diffusivity_m2_s: float
    true_density_g_ml: float

    def __post_init__(self):
        if self.c_sat_mg_ml <= 0:
            raise DomainError("c_sat_mg_ml must be > 0")
        if self.diffusivity_m2_s <= 0:
            raise DomainError("diffusivity_m2_s must be > 0")
        if self.true_density_g_ml <= 0:
            raise DomainError("true_density_g_ml must be > 0")


#: Diuretic powder used throughout the bundled example data.
HYDROCHLOROTHIAZIDE = DrugSubstance(
    name="hydrochlorothiazide",
    c_sat_mg_ml=0.45,
    diffusivity_m2_s=7.5e-10,
    true_density_g_ml=1.512,
)


def _prolate_area_factor(aspect_ratio: float) -> float:
    # Surface of a prolate spheroid relative to the equal-volume sphere.
    if aspect_ratio <= 1.0:
        return 1.0
    e = math.sqrt(1.0 - aspect_ratio ** -2)
    area_ratio = (1.0 + (aspect_ratio / e) * math.asin(e)) / (2.0 * aspect_ratio ** (2.0 / 3.0))
    return area_ratio


@dataclass(frozen=True)
class ParticleMorphology:
    """Particle shape descriptors.

    ``psi_a`` and ``psi_v`` are the area and volume shape factors
    (surface = psi_a * x^2, volume = psi_v * x^3 for characteristic size x).
    Sphere defaults: psi_a = pi, psi_v = pi/6 with x the diameter. An aspect
    ratio above 1 scales the effective surface factor by the prolate-spheroid
    area excess; roundness is carried but inert.
    """

    aspect_ratio: float = 1.0
    roundness: float = 1.0
    psi_a: float = math.pi
    psi_v: float = math.pi / 6.0

    def __post_init__(self):
        if self.aspect_ratio < 1.0:
            raise DomainError("aspect_ratio must be >= 1")
        if not (0.0 < self.roundness <= 1.0):
            raise DomainError("roundness must be in (0, 1]")
        if self.psi_a <= 0 or self.psi_v <= 0:
            raise DomainError("shape factors must be > 0")
        # Isoperimetric bound: no convex-like shape packs more volume per
        # surface than the sphere (psi_v/psi_a = 1/6).
        if self.psi_v / self.psi_a > (1.0 / 6.0) * (1.0 + 1e-9):
            raise DomainError("psi_v/psi_a exceeds the spherical bound 1/6")

    @property
    def psi_a_effective(self) -> float:
        """Area shape factor including the aspect-ratio correction."""
        return self.psi_a * _prolate_area_factor(self.aspect_ratio)

    @property
    def surface_to_volume_ratio(self) -> float:
        """psi_a_effective / psi_v; 6.0 for the default sphere."""
        return self.psi_a_effective / self.psi_v


SPHERE = ParticleMorphology()


@dataclass(frozen=True)
class SizeDistribution:
    """Binned particle size distribution by mass.

    Parameters
    ----------
    sizes_um : array-like
        Bin sizes [um], strictly increasing, all > 0.
    fractions : array-like
        Mass fraction per bin, >= 0, summing to 1 within 1e-9.
    """

    sizes_um: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.sizes_um, dtype=float)
        fracs = np.asarray(self.fractions, dtype=float)
        object.__setattr__(self, "sizes_um", sizes)
        object.__setattr__(self, "fractions", fracs)
        if sizes.ndim != 1 or fracs.shape != sizes.shape or sizes.size == 0:
            raise ValidationError("sizes and fractions must be matching non-empty 1-D arrays")
        if np.any(sizes <= 0):
            raise DomainError("bin sizes must be > 0")
        if np.any(np.diff(sizes) <= 0):
            raise DomainError("bin sizes must be strictly increasing")
        if np.any(fracs < 0):
            raise DomainError("mass fractions must be >= 0")
        if abs(fracs.sum() - 1.0) > 1e-9:
            raise DomainError(f"mass fractions must sum to 1 (got {fracs.sum()!r})")

    @property
    def n_bins(self) -> int:
        return int(self.sizes_um.size)

    @property
    def d50_um(self) -> float:
        """Mass-median size, interpolated on the cumulative mass curve.

        Uses the midpoint convention (half of a bin's mass lies below its
        center), which is unbiased for symmetric binnings.
        """
        cum = np.cumsum(self.fractions) - 0.5 * self.fractions
        if self.n_bins == 1 or cum[0] >= 0.5:
            return float(self.sizes_um[0])
        if cum[-1] <= 0.5:
            return float(self.sizes_um[-1])
        idx = int(np.searchsorted(cum, 0.5))
        lo, hi = cum[idx - 1], cum[idx]
        x_lo, x_hi = self.sizes_um[idx - 1], self.sizes_um[idx]
        if hi == lo:
            return float(x_hi)
        return float(x_lo + (0.5 - lo) * (x_hi - x_lo) / (hi - lo))


@dataclass(frozen=True)
class DissolutionConditions:
    """Test-vessel conditions for a dissolution run.

    Defaults follow a standard paddle setup: 900 mL of pH 7.2 medium at
    37 degC, 50 rpm, water-like fluid properties at 37 degC. The slip
    velocity seen by particles is ``velocity_factor`` times the paddle tip
    speed (impeller radius 0.037 m).
    """

    medium_volume_ml: float = 900.0
    temperature_c: float = 37.0
    ph: float = 7.2
    paddle_rpm: float = 50.0
    dose_mg: float = 10.0
    fluid_density_kg_m3: float = 993.0
    fluid_viscosity_pa_s: float = 7.0e-4
    velocity_factor: float = 0.1
    sink_override: bool = False
    impeller_radius_m: float = 0.037

    def __post_init__(self):
        if self.medium_volume_ml <= 0:
            raise DomainError("medium_volume_ml must be > 0")
        if self.dose_mg <= 0:
            raise DomainError("dose_mg must be > 0")
        if not (0.0 < self.velocity_factor <= 1.0):
            raise DomainError("velocity_factor must be in (0, 1]")
        if self.paddle_rpm < 0:
            raise DomainError("paddle_rpm must be >= 0")
        if self.fluid_density_kg_m3 <= 0 or self.fluid_viscosity_pa_s <= 0:
            raise DomainError("fluid properties must be > 0")

    @property
    def slip_velocity_m_s(self) -> float:
        """Characteristic particle-fluid slip velocity [m/s]."""
        tip_speed = 2.0 * math.pi * self.paddle_rpm / 60.0 * self.impeller_radius_m
        return self.velocity_factor * tip_speed


@dataclass(frozen=True)
class DissolutionProfile:
    """Percent drug released over time.

    Points are sorted by time on construction; duplicate times raise.
    Values must lie in [0, 100]. The (0, 0) start is an output guarantee of
    the simulator, not a type constraint: parsed LLM responses may violate it
    and ``validate_profile`` reports that as a finding.
    """

    times_hr: np.ndarray
    released_pct: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times_hr, dtype=float)
        r = np.asarray(self.released_pct, dtype=float)
        if t.ndim != 1 or r.shape != t.shape or t.size == 0:
            raise ValidationError("times and released values must be matching non-empty 1-D arrays")
        order = np.argsort(t, kind="stable")
        t = t[order]
        r = r[order]
        object.__setattr__(self, "times_hr", t)
        object.__setattr__(self, "released_pct", r)
        if np.any(np.diff(t) == 0):
            raise DuplicateTimeError("profile contains duplicate times")
        if np.any(t < 0):
            raise DomainError("times must be >= 0")
        if np.any((r < 0) | (r > 100)):
            raise DomainError("released % must be within [0, 100]")

    @property
    def n_points(self) -> int:
        return int(self.times_hr.size)

    @property
    def starts_at_zero(self) -> bool:
        return bool(self.times_hr[0] == 0.0 and self.released_pct[0] == 0.0)

    def points(self) -> list[tuple[float, float]]:
        return [(float(t), float(r)) for t, r in zip(self.times_hr, self.released_pct)]

    def released_at(self, time_hr: float) -> float:
        """Linear interpolation within the profile's time range."""
        return float(np.interp(time_hr, self.times_hr, self.released_pct))

    @classmethod
    def from_points(cls, points) -> "DissolutionProfile":
        pts = list(points)
        if not pts:
            raise ValidationError("profile needs at least one point")
        times = [p[0] for p in pts]
        released = [p[1] for p in pts]
        return cls(np.asarray(times, dtype=float), np.asarray(released, dtype=float))


# Canonical feature order used by storage and retrieval.
FEATURE_NAMES = (
    "d50_um",
    "aspect_ratio",
    "roundness",
    "solubility_mg_ml",
    "diffusivity_m2_s",
    "true_density_g_ml",
    "ssa_m2_g",
    "vol_eq_um",
)


@dataclass(frozen=True)
class FormulationInput:
    """The numeric feature set describing one formulation.

    ``ssa_m2_g`` and ``vol_eq_um`` are carried as given in source records and
    are not forced to be consistent with ``d50_um`` (measured datasets report
    them independently).
    """

    d50_um: float
    aspect_ratio: float = 1.0
    roundness: float = 1.0
    solubility_mg_ml: float = HYDROCHLOROTHIAZIDE.c_sat_mg_ml
    diffusivity_m2_s: float = HYDROCHLOROTHIAZIDE.diffusivity_m2_s
    true_density_g_ml: float = HYDROCHLOROTHIAZIDE.true_density_g_ml
    ssa_m2_g: float = field(default=1.0)
    vol_eq_um: float = field(default=1.0)

    def __post_init__(self):
        for name in ("d50_um", "solubility_mg_ml", "diffusivity_m2_s",
                     "true_density_g_ml", "ssa_m2_g", "vol_eq_um"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if self.aspect_ratio < 1.0:
            raise DomainError("aspect_ratio must be >= 1")
        if not (0.0 < self.roundness <= 1.0):
            raise DomainError("roundness must be in (0, 1]")

    def feature_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)

    def drug(self, name: str = "unnamed") -> DrugSubstance:
        return DrugSubstance(
            name=name,
            c_sat_mg_ml=self.solubility_mg_ml,
            diffusivity_m2_s=self.diffusivity_m2_s,
            true_density_g_ml=self.true_density_g_ml,
        )

    def morphology(self) -> ParticleMorphology:
        return ParticleMorphology(aspect_ratio=self.aspect_ratio, roundness=self.roundness)
