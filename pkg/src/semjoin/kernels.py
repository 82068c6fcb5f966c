"""Hot loops of the simulated backend, compiled when possible.

``IMPLEMENTATION`` is ``"cython"`` when the extension imported and
``"numpy"`` otherwise. Set ``SEMJOIN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("SEMJOIN_PURE_PYTHON"):
    _impl = _kernels_py
    IMPLEMENTATION = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        IMPLEMENTATION = "cython"
    except ImportError:
        _impl = _kernels_py
        IMPLEMENTATION = "numpy"

lattice_pairs = _impl.lattice_pairs
hash_pairs = _impl.hash_pairs
emitted_prefix = _impl.emitted_prefix
PHI = _kernels_py.PHI


def compiled():
    """The compiled module, or ``None`` when it is not built."""
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels


__all__ = ["IMPLEMENTATION", "compiled", "emitted_prefix", "hash_pairs", "lattice_pairs"]
