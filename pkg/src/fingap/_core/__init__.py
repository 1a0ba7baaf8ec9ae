"""Kernel backend selection.

The compiled extension ``_fast`` is preferred when present; set the
environment variable ``FINGAP_PURE=1`` to force the pure-Python kernels.
Both expose the same entry points (``wp_family``, ``lattice_params``,
``propagate_transfer``, constants ``POT_*``).
"""

import os

from . import reference

if os.environ.get("FINGAP_PURE", "0") == "1":
    kernels = reference
else:
    try:
        from . import _fast as kernels  # type: ignore[attr-defined]
    except ImportError:
        kernels = reference

BACKEND = kernels.BACKEND_NAME

__all__ = ["kernels", "reference", "BACKEND"]
