"""First-detection statistics of stroboscopically monitored quantum walks."""

from .analytic import (
    DegeneracySet,
    c_parameter,
    degenerate_potentials,
    fdr_pmf,
    fdt_pmf,
    fdt_total,
    mean_fdr,
    mean_fdt,
    return_amplitude,
    truncated_moments,
)
from .evolution import (
    DetectionMoments,
    DetectionProtocol,
    FirstDetectionDistribution,
    Mode,
    amplitude_distribution,
    detection_moments,
    sample_trajectories,
    survival_probability,
)
from .gates import (
    Circuit,
    Gate,
    GateKind,
    Layout,
    Mitigation,
    TrotterPlan,
    apply_gate,
    build_protocol_circuit,
    gate_matrix,
    trotterized_unitary,
)
from .linalg import (
    ModelParams,
    SpectralData,
    build_chain_hamiltonian,
    build_two_site_hamiltonian,
    exact_unitary,
    spectral_data,
)
from .noise import NoiseModel, apply_readout_noise, majority_vote, sector_postselect

__version__ = "0.1.0"
