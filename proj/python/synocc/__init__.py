"""Python bindings for the synocc library."""

from ._synocc import (
    GeometryError,
    GridSpec,
    back_project,
    ensemble_average,
    flip_pose,
    grid_axes,
    mpjpe,
    project,
    run_cli,
    run_gradcheck,
    soft_argmax1,
    soft_argmax3,
)

__all__ = [
    "GeometryError",
    "GridSpec",
    "back_project",
    "ensemble_average",
    "flip_pose",
    "grid_axes",
    "mpjpe",
    "project",
    "run_cli",
    "run_gradcheck",
    "soft_argmax1",
    "soft_argmax3",
]
