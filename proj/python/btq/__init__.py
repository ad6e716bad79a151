"""Python interface to the semiclassical quantization laboratory.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public surface.
"""

from ._core import (
    Lab,
    Model,
    __version__,
    acceptance,
    default_ladder,
    deformed_sphere,
    models,
    observables,
    round_sphere,
    run_experiment,
    torus,
)

__all__ = [
    "Lab",
    "Model",
    "__version__",
    "acceptance",
    "default_ladder",
    "deformed_sphere",
    "models",
    "observables",
    "round_sphere",
    "run_experiment",
    "torus",
]
