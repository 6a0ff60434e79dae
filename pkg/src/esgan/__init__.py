"""Ground states, charge-resolved entanglement spectra, and anomaly-based
transition detection for 1D lattice models."""

from .models import (
    BhParams,
    Bh2sParams,
    HamiltonianSpec,
    Term,
    XxzParams,
    build_bh,
    build_bh2s,
    build_model,
    build_xxz,
)
from .solver import (
    DmrgConfig,
    MPSState,
    StateVector,
    dmrg_ground_state,
    ed_ground_state,
    schmidt_decompose,
)
from .spectra import (
    FeatureVector,
    LabeledSpectrum,
    SectorSequence,
    SpectrumEntry,
    align_to_reference,
    build_reference_sequence,
    conformal_rescale,
    delta_xi0,
    fit_central_charge,
    kl_divergence,
    make_labeled_spectrum,
    schmidt_gap,
    von_neumann_entropy,
    xi_values,
)
from .gan import (
    GanModel,
    TrainConfig,
    TrainedDetector,
    anomaly_score,
    build_gan,
    default_train_config,
    leftmost_crossing,
    load_detector,
    save_detector,
    scan,
    train,
)
from .pipeline import (
    ScoreCurve,
    SpectrumDataset,
    SweepConfig,
    default_sweep,
    generate,
    kl_cmd,
    read_curve,
    read_dataset,
    scan_cmd,
    stability_cmd,
    towers_cmd,
    train_cmd,
    write_dataset,
)

__all__ = [
    "BhParams",
    "Bh2sParams",
    "DmrgConfig",
    "FeatureVector",
    "GanModel",
    "HamiltonianSpec",
    "LabeledSpectrum",
    "MPSState",
    "ScoreCurve",
    "SectorSequence",
    "SpectrumDataset",
    "SpectrumEntry",
    "StateVector",
    "SweepConfig",
    "Term",
    "TrainConfig",
    "TrainedDetector",
    "XxzParams",
    "align_to_reference",
    "anomaly_score",
    "build_bh",
    "build_bh2s",
    "build_gan",
    "build_model",
    "build_reference_sequence",
    "build_xxz",
    "conformal_rescale",
    "default_sweep",
    "default_train_config",
    "delta_xi0",
    "dmrg_ground_state",
    "ed_ground_state",
    "fit_central_charge",
    "generate",
    "kl_cmd",
    "kl_divergence",
    "leftmost_crossing",
    "load_detector",
    "make_labeled_spectrum",
    "read_curve",
    "read_dataset",
    "save_detector",
    "scan",
    "scan_cmd",
    "schmidt_decompose",
    "schmidt_gap",
    "stability_cmd",
    "towers_cmd",
    "train",
    "train_cmd",
    "von_neumann_entropy",
    "write_dataset",
    "xi_values",
]

__version__ = "0.1.0"
