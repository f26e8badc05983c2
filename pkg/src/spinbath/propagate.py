"""Time evolution exp(-i H t) by Chebyshev expansion, plus a dense oracle.

The operator is rescaled to H~ = (H - b)/a with a = (e_max - e_min)/2 and
b = (e_max + e_min)/2, where the bounds must enclose the whole spectrum.
Then

    exp(-i tau H) = exp(-i b tau) * sum_k (2 - d_k0) (-i)^k J_k(a tau) T_k(H~)

with Bessel functions J_k of the first kind and the three-term Chebyshev
recurrence evaluated on vectors. The series is truncated at the first k
beyond a*tau with two consecutive |J_k| below the truncation tolerance,
which for the default 1e-14 keeps each step exact to near machine
precision. A growing state norm means the bounds failed to enclose the
spectrum; the step aborts rather than return garbage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .errors import BudgetError, NumericalError, SpectralBoundsError
from .hilbert import CompiledHamiltonian, dense_hamiltonian
from .model import HamiltonianSpec

#: guard half-width used when a Hamiltonian has no terms at all
EMPTY_GUARD = 1e-9

DENSE_PROP_BUDGET = 12


@dataclass(frozen=True)
class SpectralBounds:
    e_min: float
    e_max: float
    margin: float = 1.05

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise NumericalError(f"degenerate bounds [{self.e_min}, {self.e_max}]")

    @property
    def half_width(self) -> float:
        return 0.5 * (self.e_max - self.e_min)

    @property
    def center(self) -> float:
        return 0.5 * (self.e_max + self.e_min)

    def encloses(self, energies) -> bool:
        return bool(np.min(energies) >= self.e_min and np.max(energies) <= self.e_max)


def _as_operator(h, n_total=None) -> CompiledHamiltonian:
    return h if isinstance(h, CompiledHamiltonian) else CompiledHamiltonian(h, n_total)


def spectral_bounds(h, margin: float = 1.05, n_total: int | None = None) -> SpectralBounds:
    """Safe symmetric bounds from the row-sum estimate sum_terms |c|/4."""
    op = _as_operator(h, n_total)
    s = op.gershgorin_sum
    if s == 0.0:
        s = EMPTY_GUARD
    return SpectralBounds(-margin * s, margin * s, margin)


def _quantize_outward(lo: float, hi: float) -> tuple[float, float]:
    # snap to a 1e-6*span lattice so thread-dependent BLAS noise in the
    # Lanczos estimates cannot change the plan between runs
    span = hi - lo
    q = 10.0 ** (math.floor(math.log10(span)) - 6)
    return math.floor(lo / q) * q, math.ceil(hi / q) * q


def tighten_bounds(h, margin: float = 1.05, n_total: int | None = None) -> SpectralBounds:
    """Extremal-eigenvalue bounds: dense for small dims, else Lanczos (ARPACK).

    The estimates are padded outward by 1% of the range and clipped to the
    safe row-sum interval. The Chebyshev norm check still guards the result
    at run time.
    """
    op = _as_operator(h, n_total)
    safe = spectral_bounds(op, margin)
    if op.gershgorin_sum == 0.0:
        return safe
    if op.dim <= 512:
        ev = np.linalg.eigvalsh(dense_hamiltonian(op.terms, op.n_total))
        lo, hi = float(ev[0]), float(ev[-1])
    else:
        from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

        lin = LinearOperator(
            (op.dim, op.dim), matvec=lambda v: op.apply(np.asarray(v).ravel()), dtype=complex
        )
        v0 = np.random.Generator(np.random.Philox(np.random.SeedSequence(0xB0115))).standard_normal(
            op.dim
        )
        try:
            lo = float(eigsh(lin, k=1, which="SA", v0=v0, return_eigenvectors=False)[0])
            hi = float(eigsh(lin, k=1, which="LA", v0=v0, return_eigenvectors=False)[0])
        except ArpackNoConvergence:
            return safe
    pad = 0.01 * max(hi - lo, 1e-9) + 1e-12
    lo, hi = _quantize_outward(lo - pad, hi + pad)
    lo = max(lo, safe.e_min)
    hi = min(hi, safe.e_max)
    return SpectralBounds(lo, hi, margin)


def _chebyshev_coefficients(z: float, tol: float) -> np.ndarray:
    """Coefficients (2 - d_k0) (-i)^k J_k(z) truncated per the two-in-a-row rule."""
    az = abs(z)
    if az == 0.0:
        return np.ones(1, dtype=complex)
    k_min = int(math.ceil(az))
    hi = k_min + 64
    while True:
        ks = np.arange(hi + 2)
        bes = jv(ks, az)
        order = None
        for k in range(max(1, k_min + 1), hi + 1):
            if abs(bes[k]) < tol and abs(bes[k + 1]) < tol:
                order = k
                break
        if order is not None:
            break
        hi += 128
        if hi > az + 4096:
            raise NumericalError(f"Chebyshev series for z={z:g} did not truncate")
    k = np.arange(order + 1)
    phase = (-1j) ** k if z >= 0 else (1j) ** k
    coeff = phase * bes[: order + 1]
    coeff[1:] *= 2.0
    return coeff.astype(complex)


@dataclass(frozen=True)
class PropagatorPlan:
    tau: float
    bounds: SpectralBounds
    truncation_tol: float
    order: int
    coefficients: np.ndarray
    phase: complex

    @classmethod
    def build(
        cls,
        h,
        tau: float,
        bounds: SpectralBounds | None = None,
        truncation_tol: float = 1e-14,
        tighten: bool = False,
        n_total: int | None = None,
    ) -> "PropagatorPlan":
        if truncation_tol <= 0:
            raise NumericalError("truncation_tol must be positive")
        op = _as_operator(h, n_total)
        if bounds is None:
            bounds = tighten_bounds(op) if tighten else spectral_bounds(op)
        z = bounds.half_width * tau
        coeff = _chebyshev_coefficients(z, truncation_tol)
        return cls(
            tau=tau,
            bounds=bounds,
            truncation_tol=truncation_tol,
            order=len(coeff) - 1,
            coefficients=coeff,
            phase=complex(np.exp(-1j * bounds.center * tau)),
        )


class ChebyshevPropagator:
    """Repeated application of exp(-i tau H) to one trajectory.

    Owns scratch buffers; one instance per trajectory (not thread-safe).
    """

    def __init__(self, op: CompiledHamiltonian, plan: PropagatorPlan):
        self.op = op
        self.plan = plan
        dim = op.dim
        self._t_prev = np.empty(dim, dtype=np.complex128)
        self._t_cur = np.empty(dim, dtype=np.complex128)
        self._hv = np.empty(dim, dtype=np.complex128)
        self._scratch = np.empty(dim, dtype=np.complex128)

    def step(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Return exp(-i tau H) psi; aborts if the norm grows beyond 1 + 1e-8."""
        plan, op = self.plan, self.op
        a = plan.bounds.half_width
        b = plan.bounds.center
        coeff = plan.coefficients
        if out is None:
            out = np.empty(op.dim, dtype=np.complex128)
        norm_in = np.linalg.norm(psi)

        t_prev, t_cur, hv, scratch = self._t_prev, self._t_cur, self._hv, self._scratch
        np.copyto(t_prev, psi)
        np.multiply(t_prev, coeff[0], out=out)
        if len(coeff) > 1:
            # T_1 = H~ psi
            op.apply(t_prev, out=hv)
            np.subtract(hv, b * t_prev, out=t_cur)
            t_cur /= a
            out += coeff[1] * t_cur
        for k in range(2, len(coeff)):
            # T_k = (2/a)(H - b) T_{k-1} - T_{k-2}, written into t_prev
            op.apply(t_cur, out=hv)
            np.multiply(t_cur, b, out=scratch)
            np.subtract(hv, scratch, out=scratch)
            scratch *= 2.0 / a
            np.subtract(scratch, t_prev, out=t_prev)
            t_prev, t_cur = t_cur, t_prev
            out += coeff[k] * t_cur
        out *= plan.phase

        norm_out = np.linalg.norm(out)
        if not np.isfinite(norm_out) or (norm_in > 0 and norm_out / norm_in > 1.0 + 1e-8):
            raise SpectralBoundsError(
                f"norm grew from {norm_in:.12g} to {norm_out:.12g}; "
                f"spectral bounds [{plan.bounds.e_min:g}, {plan.bounds.e_max:g}] "
                "do not enclose the spectrum"
            )
        return out


def chebyshev_step(h, plan: PropagatorPlan, psi: np.ndarray, n_total: int | None = None) -> np.ndarray:
    """One-shot exp(-i tau H) psi; build a ChebyshevPropagator for trajectories."""
    return ChebyshevPropagator(_as_operator(h, n_total), plan).step(psi)


def propagate_exact(h, psi: np.ndarray, t: float, n_total: int | None = None) -> np.ndarray:
    """Oracle propagator V exp(-i E t) V^dag psi from dense diagonalization.

    Budgeted to 12 spins (4096^2 dense eigenproblem).
    """
    op = _as_operator(h, n_total)
    if op.n_total > DENSE_PROP_BUDGET:
        raise BudgetError(f"exact propagation limited to {DENSE_PROP_BUDGET} spins, got {op.n_total}")
    if psi.shape != (op.dim,):
        raise NumericalError(f"state shape {psi.shape} does not match dim {op.dim}")
    energies, vectors = np.linalg.eigh(dense_hamiltonian(op.terms, op.n_total))
    return vectors @ (np.exp(-1j * energies * t) * (vectors.conj().T @ psi))
