"""Simulator for W-state formation in charge qubits coupled to vibrational modes."""

__version__ = "0.1.0"

from .linops import (  # noqa: F401
    DensityMatrix,
    Operator,
    PureState,
    SpaceLayout,
    boson_ladder,
    displacement,
    hermitian_eig,
    kron,
    kron_sum,
    partial_trace,
)
from .model import (  # noqa: F401
    ModelParams,
    build_effective_h,
    build_full_hamiltonian,
    build_polaron_hamiltonian,
    effective_coupling,
    unperturbed_energies,
)
from .dynamics import (  # noqa: F401
    PulseSchedule,
    StateSeries,
    TimeGrid,
    analytic_w_dynamics,
    dephasing_collapse_ops,
    evolve_lindblad,
    evolve_pure,
    lindblad_rhs,
    mcwf_evolve,
    w_times,
)
from .metrics import (  # noqa: F401
    MetricSeries,
    concurrence,
    entanglement_metrics,
    fidelity,
    metric_series,
    spectral_function,
    target_w,
)
from .secondq import (  # noqa: F401
    SqModelParams,
    build_sq_model,
    injection_evolve,
    injection_fidelity_series,
    jw_operators,
    sq_target,
)
