"""Parallel in-place algorithms with metered auxiliary-space budgets.

The library half lives in :mod:`pipal.strong` (zero auxiliary heap),
:mod:`pipal.relaxed` and :mod:`pipal.contraction` (sublinear budgets over
the deterministic-reservations engine in :mod:`pipal.detres`), and
:mod:`pipal.graph`; :mod:`pipal.baselines` holds the sequential oracles and
the non-in-place comparators, and :mod:`pipal.cli` the benchmark harness.
"""

from .runtime import (
    EpsilonConfig,
    MeterReport,
    Rng,
    SpaceMeter,
    meter_scope,
    num_threads,
    set_num_threads,
)

__all__ = [
    "EpsilonConfig", "MeterReport", "Rng", "SpaceMeter",
    "meter_scope", "num_threads", "set_num_threads",
]
