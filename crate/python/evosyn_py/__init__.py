from ._native import (
    DEFAULT_CONFLICT_LIMIT,
    Aig,
    check_equiv,
    default_corpus,
    map_luts,
    mock_evolution,
    optimize,
    parity,
    random_aig,
    ripple_adder,
)

__all__ = [
    "DEFAULT_CONFLICT_LIMIT",
    "Aig",
    "check_equiv",
    "default_corpus",
    "map_luts",
    "mock_evolution",
    "optimize",
    "parity",
    "random_aig",
    "ripple_adder",
]
