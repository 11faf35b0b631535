"""Small-target motion detection toolkit.

Detectors: the classical delay-and-correlate family (hr, bl, hrbl, estmd,
dstmd) and the dual-dynamics pipeline (stmdnet, stmdnet-f), plus a
deterministic synthetic-sequence generator and an evaluation harness
(recall-FPPI AUC, AP, F1, angular error, timing, op counters).

Submodules import numpy lazily through ``__getattr__`` so the CLI can set
threading environment variables before numeric libraries load.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "grid",
    "frontend",
    "classical",
    "dualdyn",
    "synth",
    "metrics",
    "harness",
    "configio",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
