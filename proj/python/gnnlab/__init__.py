"""Deep GCN smoothing and trainability diagnostics."""

from ._core import (
    ContractError,
    Error,
    ShapeError,
    __version__,
    bound,
    bound_sweep,
    dirichlet_energy,
    energy_trajectory,
    finite_difference_check,
    mixing_time,
    nodewise_forward,
    normalized_operator,
    run,
    run_to_dir,
    spectral_gap,
    synthetic_edges,
)

__all__ = [
    "ContractError",
    "Error",
    "ShapeError",
    "__version__",
    "bound",
    "bound_sweep",
    "dirichlet_energy",
    "energy_trajectory",
    "finite_difference_check",
    "mixing_time",
    "nodewise_forward",
    "normalized_operator",
    "run",
    "run_to_dir",
    "spectral_gap",
    "synthetic_edges",
]
