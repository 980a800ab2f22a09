"""mcsim: deterministic trace-driven multicore memory-hierarchy simulator.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from ._mcsim import (
    amdahl,
    default_config,
    dynamic_power,
    generate_trace,
    gustafson,
    litmus_outcomes,
    normalize_trace,
    run,
    validate_config,
    version,
)

__version__ = version()

__all__ = [
    "amdahl",
    "default_config",
    "dynamic_power",
    "generate_trace",
    "gustafson",
    "litmus_outcomes",
    "normalize_trace",
    "run",
    "validate_config",
    "version",
]
