"""Router host/guest isolation test bench.

Thin wrapper over the native module: simulates a two-segment router and
drives the cross-segment leak channels against it.
"""

from ._crosstalk import (  # noqa: F401
    __version__,
    ber_sweep,
    builtin_profiles,
    channels,
    matrix,
    parse,
    profile_json,
    quality,
    serialize,
    t_test,
    timing_histogram,
    transfer,
)

__all__ = [
    "__version__",
    "ber_sweep",
    "builtin_profiles",
    "channels",
    "matrix",
    "parse",
    "profile_json",
    "quality",
    "serialize",
    "t_test",
    "timing_histogram",
    "transfer",
]
