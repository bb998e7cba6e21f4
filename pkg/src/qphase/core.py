"""Units, grids, complex fields and the probability-axiom building blocks.

Everything downstream (the time stepper, the three phase-space
distributions, the comparison harness) exchanges quantities in one fixed
unit system: nanometres, femtoseconds, electron-volts and free-electron
masses.  Conversions from other units happen once, at configuration
parse time, never inside numerical kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "HBAR",
    "ELECTRON_MASS",
    "SPEED_OF_LIGHT",
    "UnitSystem",
    "UNITS",
    "SpatialGrid",
    "MomentumGrid",
    "WaveFunction",
    "PolarDecomposition",
    "PhaseSpaceField",
    "spectral_derivative",
    "polar_decompose",
    "marginal_position",
    "marginal_momentum_flux",
]

#: Reduced Planck constant in eV fs.
HBAR = 0.6582119569

#: Speed of light in nm/fs, used only to express the electron mass below.
SPEED_OF_LIGHT = 299.792458

#: Free-electron rest mass in eV fs^2 / nm^2  (m0 c^2 = 510998.95 eV).
ELECTRON_MASS = 510998.95 / SPEED_OF_LIGHT**2


@dataclass(frozen=True)
class UnitSystem:
    """Internal unit system shared by every module API.

    ``hbar`` is a fixed constant, never recomputed.  Masses are measured
    in units of the free-electron mass, so a kernel that needs an
    absolute mass multiplies by ``mass_unit``.
    """

    hbar: float = HBAR                 # eV fs
    mass_unit: float = ELECTRON_MASS   # eV fs^2 / nm^2 per electron mass
    length_unit: str = "nm"
    time_unit: str = "fs"
    energy_unit: str = "eV"


UNITS = UnitSystem()


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid of n cells on [x_min, x_max), points at the left cell edges.

    n must be a power of two (the Wigner and momentum transforms are
    FFT-based).  Rectangle-rule sums f(x_i) dx are the discrete integrals
    used throughout; they make the discrete Parseval identities exact.
    """

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not _is_power_of_two(self.n) or self.n < 16:
            raise ValueError(f"grid size must be a power of two >= 16, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def points(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    def decimate(self, factor: int) -> "SpatialGrid":
        """Coarsen by an integer factor (cells are merged, domain unchanged)."""
        if self.n % factor:
            raise ValueError("decimation factor must divide n")
        return SpatialGrid(self.x_min, self.x_max, self.n // factor)


@dataclass(frozen=True)
class MomentumGrid:
    """FFT-conjugate momentum axis: p_j = j dp for j in [-n/2, n/2).

    ``dp`` satisfies dp * dx_eff = 2 pi hbar / n where dx_eff is the step
    of the transform variable.  The Wigner transform samples the
    two-point correlation at even offsets y = 2 m dx, so its dx_eff is
    2 dx and its momentum step is half the plain-FFT step.
    """

    n: int
    dp: float

    def __post_init__(self):
        if not _is_power_of_two(self.n) or self.n < 16:
            raise ValueError(f"momentum grid size must be a power of two >= 16, got {self.n}")
        if self.dp <= 0:
            raise ValueError("dp must be positive")

    @classmethod
    def conjugate_to(cls, n: int, dx_eff: float) -> "MomentumGrid":
        return cls(n=n, dp=2.0 * np.pi * HBAR / (n * dx_eff))

    @property
    def points(self) -> np.ndarray:
        p = self.dp * (np.arange(self.n) - self.n // 2)
        p.flags.writeable = False
        return p

    @property
    def p_max(self) -> float:
        """Half-width of the covered band (positive edge is p_max - dp)."""
        return self.dp * (self.n // 2)

    def decimate(self, factor: int) -> "MomentumGrid":
        if self.n % factor:
            raise ValueError("decimation factor must divide n")
        return MomentumGrid(self.n // factor, self.dp * factor)


class WaveFunction:
    """Complex field over a SpatialGrid, unit L2 norm, immutable."""

    __slots__ = ("grid", "values")

    #: construction-time tolerance on | ||psi|| - 1 |
    NORM_TOL = 1e-10

    def __init__(self, grid: SpatialGrid, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} samples, got {values.shape}")
        nrm2 = float(np.sum(np.abs(values) ** 2) * grid.dx)
        if abs(nrm2 - 1.0) > self.NORM_TOL:
            raise ValueError(f"wave function not normalized: ||psi||^2 = {nrm2!r}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, *a):
        raise AttributeError("WaveFunction is immutable")

    @classmethod
    def from_samples(cls, grid: SpatialGrid, values: np.ndarray) -> "WaveFunction":
        """Normalize arbitrary samples on the grid, then construct."""
        values = np.asarray(values, dtype=complex)
        nrm = np.sqrt(np.sum(np.abs(values) ** 2) * grid.dx)
        if nrm == 0:
            raise ValueError("cannot normalize the zero field")
        return cls(grid, values / nrm)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dx))

    def momentum_density(self) -> np.ndarray:
        """|FFT of psi|^2 on the conjugate grid MomentumGrid.conjugate_to(n, dx).

        Normalized so that sum * dp = 1 exactly in exact arithmetic
        (discrete Parseval with the rectangle rule).
        """
        n, dx = self.grid.n, self.grid.dx
        phi = np.fft.fftshift(np.fft.fft(self.values)) * dx / np.sqrt(2 * np.pi * HBAR)
        return np.abs(phi) ** 2

    def edge_amplitude(self) -> float:
        """Largest |psi| on the outermost cells, relative to max |psi|."""
        a = np.abs(self.values)
        return float(max(a[0], a[-1]) / a.max())

    def tail_contamination(self, fraction: float = 0.05) -> float:
        """Largest relative |psi| within the outer ``fraction`` of the domain."""
        a = np.abs(self.values)
        k = max(1, int(fraction * self.grid.n))
        return float(max(a[:k].max(), a[-k:].max()) / a.max())


@dataclass(frozen=True)
class PolarDecomposition:
    """Amplitude and phase gradient of psi = R exp(i theta).

    ``phase_gradient`` holds d(theta)/dx in 1/nm, i.e. the gradient of the
    dimensionless phase; the mechanical phase-space momentum is
    hbar * phase_gradient.  Points where |psi|^2 falls below
    node_threshold * max|psi|^2 are flagged invalid and carry NaN: the
    quotient Im(psi* psi') / |psi|^2 amplifies roundoff there.  No phase
    unwrapping is ever performed; only the gradient is defined.
    """

    amplitude: np.ndarray        # R >= 0, nm^{-1/2}
    phase_gradient: np.ndarray   # d theta / dx, 1/nm; NaN where invalid
    valid: np.ndarray            # bool mask
    node_threshold: float

    def __post_init__(self):
        for arr in (self.amplitude, self.phase_gradient, self.valid):
            arr.flags.writeable = False


class PhaseSpaceKind:
    WIGNER = "wigner"
    HUSIMI = "husimi"
    BOHMIAN = "bohmian"


class PhaseSpaceField:
    """Real matrix F(x_i, p_j) over a spatial and a momentum grid.

    Invariants enforced at construction:

    * total mass sum F dx dp = 1 within NORM_TOL;
    * Husimi and Bohmian kinds are nonnegative down to -POSITIVITY_TOL
      (counting histograms and squared overlaps cannot go below zero by
      more than roundoff);
    * a Wigner field must have been assembled from an FFT whose discarded
      imaginary residue is recorded by the producer.
    """

    __slots__ = ("xgrid", "pgrid", "values", "kind", "imag_residue", "n_samples")

    NORM_TOL = 1e-6
    POSITIVITY_TOL = 1e-12

    def __init__(
        self,
        xgrid: SpatialGrid,
        pgrid: MomentumGrid,
        values: np.ndarray,
        kind: str,
        imag_residue: float = 0.0,
        n_samples: Optional[int] = None,
    ):
        values = np.asarray(values, dtype=float)
        if values.shape != (xgrid.n, pgrid.n):
            raise ValueError(f"field shape {values.shape} does not match grids")
        if kind not in (PhaseSpaceKind.WIGNER, PhaseSpaceKind.HUSIMI, PhaseSpaceKind.BOHMIAN):
            raise ValueError(f"unknown kind {kind!r}")
        total = float(values.sum() * xgrid.dx * pgrid.dp)
        if abs(total - 1.0) > self.NORM_TOL:
            raise ValueError(f"phase-space field not normalized: total = {total!r}")
        if kind in (PhaseSpaceKind.HUSIMI, PhaseSpaceKind.BOHMIAN):
            mn = float(values.min())
            if mn < -self.POSITIVITY_TOL:
                raise ValueError(f"{kind} field must be nonnegative, min = {mn!r}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "xgrid", xgrid)
        object.__setattr__(self, "pgrid", pgrid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "imag_residue", float(imag_residue))
        object.__setattr__(self, "n_samples", n_samples)

    def __setattr__(self, *a):
        raise AttributeError("PhaseSpaceField is immutable")

    def total_mass(self) -> float:
        return float(self.values.sum() * self.xgrid.dx * self.pgrid.dp)


def spectral_derivative(values: np.ndarray, dx: float) -> np.ndarray:
    """FFT derivative of a grid function that decays at the domain edges.

    Spectral accuracy is required: the current-density identities are
    checked at 1e-6 relative, far beyond what second-order differences
    deliver at the wave vectors of interest.
    """
    k = 2.0 * np.pi * np.fft.fftfreq(values.size, dx)
    return np.fft.ifft(1j * k * np.fft.fft(values))


def polar_decompose(psi: WaveFunction, node_threshold: float = 1e-6) -> PolarDecomposition:
    """Split psi into amplitude and phase gradient.

    The gradient is computed as Im(psi* dpsi/dx) / |psi|^2 wherever
    |psi|^2 exceeds node_threshold * max|psi|^2 and flagged invalid
    elsewhere.  node_threshold defaults to 1e-6, below which the quotient
    amplifies double-precision noise.
    """
    if not 0.0 < node_threshold <= 1e-3:
        raise ValueError("node_threshold must lie in (0, 1e-3]")
    rho = psi.density()
    peak = rho.max()
    if peak == 0.0:
        raise ValueError("wave function vanishes everywhere")
    valid = rho > node_threshold * peak
    if not valid.any():
        raise ValueError("no point above the node threshold; corrupt input")
    dpsi = spectral_derivative(psi.values, psi.grid.dx)
    grad = np.full(psi.grid.n, np.nan)
    grad[valid] = np.imag(np.conj(psi.values[valid]) * dpsi[valid]) / rho[valid]
    return PolarDecomposition(
        amplitude=np.abs(psi.values),
        phase_gradient=grad,
        valid=valid,
        node_threshold=node_threshold,
    )


def marginal_position(F: PhaseSpaceField) -> np.ndarray:
    """Charge density Q(x_i) = sum_j F_ij dp (rectangle rule)."""
    return F.values.sum(axis=1) * F.pgrid.dp


def marginal_momentum_flux(F: PhaseSpaceField, mass: float) -> np.ndarray:
    """Current density J(x_i) = (1/m) sum_j p_j F_ij dp.

    ``mass`` is in free-electron masses.  Dividing by the mass makes J the
    probability current rho * v, so the Wigner and trajectory-ensemble
    marginals agree with the Schroedinger current (hbar/m) R^2 d(theta)/dx.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    m_abs = mass * ELECTRON_MASS
    return (F.values @ F.pgrid.points) * (F.pgrid.dp / m_abs)
