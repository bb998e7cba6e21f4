"""Phase-space views of a 1D scattering wave packet.

Three constructions of F(x, p) from the same evolving state: the
Wigner transform (exact marginals, sign-indefinite), the Husimi
coherent-state overlap (nonnegative, smoothed marginals) and the
histogram of an ensemble of velocity-guided trajectories (nonnegative
and exact-marginal up to sampling noise).  The harness runs a Gaussian
packet against a double barrier, checks every field against the
probability axioms and writes a comparison report.
"""

from .core import (
    ELECTRON_MASS,
    HBAR,
    MomentumGrid,
    PhaseSpaceField,
    PhaseSpaceKind,
    PolarDecomposition,
    SpatialGrid,
    UnitSystem,
    UNITS,
    WaveFunction,
    marginal_momentum_flux,
    marginal_position,
    polar_decompose,
    spectral_derivative,
)
from .solver import (
    EvolutionError,
    EvolutionPlan,
    PacketParams,
    PotentialField,
    evolve,
    make_double_barrier,
    make_gaussian_packet,
    transmission_coefficient,
    wave_vector_from_energy,
)
from .wigner import (
    WignerTransformPlan,
    correlation_form_check,
    correlation_form_constant,
    negativity_volume,
    wigner_marginal_oracle,
    wigner_transform,
)
from .husimi import (
    CoherentProbe,
    husimi_direct,
    husimi_from_wigner,
    husimi_marginal_oracle,
    smooth_with_probe,
)
from .bohmian import (
    TrajectoryEnsemble,
    TrajectoryError,
    VelocityFieldSnapshot,
    bohmian_distribution,
    bohmian_marginal_oracle,
    integrate_trajectories,
    sample_equilibrium,
    velocity_field,
)
from .harness import (
    AxiomTolerances,
    AxiomVerdict,
    ComparisonReport,
    ExperimentConfig,
    emit_plot_data,
    parse_config,
    run_experiment,
    serialize_config,
    validate_axioms,
)

__version__ = "0.1.0"
