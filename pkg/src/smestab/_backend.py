"""Kernel backend selection.

The hot integration loops exist twice: a numba-compiled version and a pure
numpy fallback with identical call signatures.  The default is chosen from
the ``SMESTAB_BACKEND`` environment variable: ``numba``, ``numpy``, or
``auto`` (numba when importable).  Every simulation entry point also accepts
an explicit ``backend=`` override.
"""

import importlib
import os

_ENV_VAR = "SMESTAB_BACKEND"
_modules = {}
_numba_available = None


def numba_available():
    global _numba_available
    if _numba_available is None:
        try:
            importlib.import_module("numba")
            _numba_available = True
        except ImportError:
            _numba_available = False
    return _numba_available


def default_backend():
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if numba_available() else "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be 'numba', 'numpy' or 'auto', got {choice!r}")
    return choice


def kernels(backend=None):
    """Return the kernel module for ``backend`` (default: active backend)."""
    name = backend or default_backend()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    if name not in _modules:
        _modules[name] = importlib.import_module(f".{'_kernels_' + name}", __package__)
    return _modules[name]
