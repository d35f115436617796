"""Entity alignment toolkit: reliable relation paths and a graph transformer encoder."""

from ._kgalign import (
    DataError,
    NumericalError,
    ShapeError,
    UsageError,
    evaluate,
    load_kg,
    main,
    make_twin_dataset,
    mine_paths,
    segment_softmax,
)

__all__ = [
    "DataError",
    "NumericalError",
    "ShapeError",
    "UsageError",
    "evaluate",
    "load_kg",
    "main",
    "make_twin_dataset",
    "mine_paths",
    "segment_softmax",
]
