"""Local density of states from the survival amplitude of the initial state.

The survival amplitude a(t) = <Psi(0)|exp(-i H t)|Psi(0)> is sampled on a
uniform time grid and Fourier transformed with a Gaussian window, so each
whole-system eigenstate overlapping the initial state shows up as a
Gaussian peak of width ``window_width`` carrying its overlap weight:

    LDOS(E) ~ sum_k |<Psi(0)|phi_k>|^2 N(E - E_k; window_width)

Backward times use the conjugate symmetry a(-t) = a(t)* of Hermitian
evolution instead of extra propagation. Total weight integrates to one up
to window leakage; the first moment reproduces <H> and the second moment
<H^2> plus the window variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, NumericalError
from .hilbert import CompiledHamiltonian
from .propagate import ChebyshevPropagator, PropagatorPlan, SpectralBounds


@dataclass(frozen=True)
class LdosSpectrum:
    energies: np.ndarray
    weights: np.ndarray
    window_width: float
    tau: float
    t_max: float

    @property
    def grid_step(self) -> float:
        return float(self.energies[1] - self.energies[0])

    def total_weight(self) -> float:
        return float(np.sum(self.weights) * self.grid_step)

    def mean(self) -> float:
        return float(np.sum(self.weights * self.energies) * self.grid_step / self.total_weight())

    def variance(self) -> float:
        mu = self.mean()
        return float(
            np.sum(self.weights * (self.energies - mu) ** 2) * self.grid_step / self.total_weight()
        )

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("energy,weight\n")
            for e, w in zip(self.energies, self.weights):
                fh.write(f"{e:.17g},{w:.17g}\n")


@dataclass(frozen=True)
class LdosPlan:
    """Discretization derived from spectral bounds.

    Broadening defaults to 1% of the spectral range; t_max = 6/width damps
    the window below 2e-8; the sampling step respects the Nyquist limit for
    the largest |E| in the bounds.
    """

    window_width: float
    tau: float
    n_steps: int
    grid: np.ndarray

    @classmethod
    def from_bounds(
        cls, bounds: SpectralBounds, resolution: float = 0.01, grid_points: int = 2048
    ) -> "LdosPlan":
        span = bounds.e_max - bounds.e_min
        width = resolution * span
        t_max = 6.0 / width
        e_abs = 1.05 * max(abs(bounds.e_min), abs(bounds.e_max))
        tau = np.pi / e_abs
        n_steps = int(np.ceil(t_max / tau))
        grid = np.linspace(bounds.e_min - 4 * width, bounds.e_max + 4 * width, grid_points)
        return cls(window_width=width, tau=float(tau), n_steps=n_steps, grid=grid)


def survival_amplitudes(h, psi0: np.ndarray, tau: float, n_steps: int, plan: PropagatorPlan | None = None, n_total: int | None = None) -> np.ndarray:
    """a(m tau) = <Psi(0)|Psi(m tau)> for m = 0..n_steps."""
    op = h if isinstance(h, CompiledHamiltonian) else CompiledHamiltonian(h, n_total)
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-10:
        raise NumericalError(f"initial state norm {nrm!r} deviates from 1")
    if plan is None:
        plan = PropagatorPlan.build(op, tau, tighten=True)
    prop = ChebyshevPropagator(op, plan)
    amps = np.empty(n_steps + 1, dtype=complex)
    amps[0] = 1.0
    psi = psi0.astype(np.complex128, copy=True)
    for m in range(1, n_steps + 1):
        psi = prop.step(psi)
        a = np.vdot(psi0, psi)
        if abs(a) > 1.0 + 1e-10:
            raise NumericalError(f"survival amplitude |a|={abs(a)!r} exceeds 1")
        amps[m] = a
    return amps


def ldos_spectrum(
    amplitudes: np.ndarray,
    tau: float,
    window_width: float,
    grid: np.ndarray,
    bounds: SpectralBounds | None = None,
) -> LdosSpectrum:
    """Windowed Fourier transform of the survival series onto an energy grid.

    ``amplitudes`` must be uniformly sampled starting at t = 0; negative
    times are supplied by conjugate symmetry. When ``bounds`` are given the
    grid must cover them (plus three window widths); weight piling up at
    the grid edges also raises CoverageError.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise CoverageError("grid must be a 1d array with at least two points")
    if window_width <= 0 or tau <= 0:
        raise NumericalError("window_width and tau must be positive")
    if bounds is not None:
        lo, hi = bounds.e_min - 3 * window_width, bounds.e_max + 3 * window_width
        if grid[0] > lo or grid[-1] < hi:
            raise CoverageError(
                f"grid [{grid[0]:g}, {grid[-1]:g}] does not cover bounds [{lo:g}, {hi:g}]"
            )
    m = np.arange(len(amplitudes))
    t = m * tau
    windowed = amplitudes * np.exp(-0.5 * (window_width * t) ** 2)
    # a(0)/2 + sum_{m>0}: the conjugate half doubles the real part
    windowed[0] *= 0.5
    phases = np.exp(1j * np.outer(grid, t))
    weights = (tau / np.pi) * np.real(phases @ windowed)

    t_max = t[-1]
    if np.exp(-0.5 * (window_width * t_max) ** 2) > 1e-6:
        raise CoverageError(
            f"series too short: window at t_max={t_max:g} is "
            f"{np.exp(-0.5 * (window_width * t_max) ** 2):g}, ringing would leak"
        )
    spec = LdosSpectrum(
        energies=grid, weights=weights, window_width=window_width, tau=tau, t_max=float(t_max)
    )
    edge = 3 * window_width
    de = spec.grid_step
    lo_mass = float(np.sum(np.abs(weights[grid < grid[0] + edge])) * de)
    hi_mass = float(np.sum(np.abs(weights[grid > grid[-1] - edge])) * de)
    if lo_mass > 1e-3 or hi_mass > 1e-3:
        raise CoverageError(
            f"spectral weight at grid edges ({lo_mass:g}, {hi_mass:g}); grid too narrow"
        )
    return spec


def compute_ldos(h, psi0: np.ndarray, bounds: SpectralBounds, resolution: float = 0.01, n_total: int | None = None) -> LdosSpectrum:
    """End-to-end LDOS: plan the discretization, propagate, transform."""
    op = h if isinstance(h, CompiledHamiltonian) else CompiledHamiltonian(h, n_total)
    lp = LdosPlan.from_bounds(bounds, resolution)
    plan = PropagatorPlan.build(op, lp.tau, bounds=bounds)
    amps = survival_amplitudes(op, psi0, lp.tau, lp.n_steps, plan=plan)
    return ldos_spectrum(amps, lp.tau, lp.window_width, lp.grid, bounds=bounds)
