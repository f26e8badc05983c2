"""Exact closed-system dynamics of spin-1/2 clusters coupled to spin baths."""

from .errors import (
    BudgetError,
    ConfigError,
    CoverageError,
    DimensionMismatch,
    FitError,
    GroundStateError,
    NumericalError,
    ShapeError,
    SpectralBoundsError,
    SpinbathError,
)
from .model import (
    Coupling,
    CouplingFamily,
    Family,
    HamiltonianSpec,
    RngStreams,
    Topology,
    TopologyKind,
    assemble,
    build_topology,
    sample_couplings,
)
from .hilbert import (
    CompiledHamiltonian,
    apply_hamiltonian,
    dense_hamiltonian,
    expectation,
    partial_trace_env,
)
from .propagate import (
    ChebyshevPropagator,
    PropagatorPlan,
    SpectralBounds,
    chebyshev_step,
    propagate_exact,
    spectral_bounds,
    tighten_bounds,
)
from .states import StateLabel, make_state, product_state
from .observables import (
    EigenBasis,
    MetricSample,
    concurrence,
    compute_metrics,
    delta,
    effective_beta,
    eigendecompose_system,
    gamma,
    loschmidt_echo,
    pair_correlators,
    quadratic_entropy,
    sigma,
    to_energy_basis,
)
from .ldos import LdosPlan, LdosSpectrum, compute_ldos, ldos_spectrum, survival_amplitudes
from .fitting import ExpFit, RateFit, fit_exponential, fit_gaussian, fit_offdiag_exponential, melik_curve
from .runner import RunConfig, RunResult, load_config, run, spectrum_table, validate

__version__ = "0.1.0"
