"""Potential theory of tree and ultrametric matrices."""

from ._treepot import (
    NUM_CRITERIA,
    TreepotError,
    classify,
    exit_measure,
    finite_potential,
    fixtures_dir,
    is_ultrametric,
    kernel_p,
    martin_kernel,
    minimal_tree_extension,
    ray_regularity,
    run_criterion,
    simulate_boundary,
    ultrametric_generator,
    verify_inverse,
)

__all__ = [
    "NUM_CRITERIA",
    "TreepotError",
    "classify",
    "exit_measure",
    "finite_potential",
    "fixtures_dir",
    "is_ultrametric",
    "kernel_p",
    "martin_kernel",
    "minimal_tree_extension",
    "ray_regularity",
    "run_criterion",
    "simulate_boundary",
    "ultrametric_generator",
    "verify_inverse",
]
