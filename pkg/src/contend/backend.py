"""Kernel backend selection.

The orthant-probability inner loop exists twice: a Cython extension
(``contend._native.qmc_cy``) and a pure-NumPy fallback (``contend._qmc_py``).
The compiled one is picked at import when available; set ``CONTEND_PURE_PYTHON=1``
to force the fallback (used by the backend benchmark and by CI environments
without a compiler).
"""

from __future__ import annotations

import os

if os.environ.get("CONTEND_PURE_PYTHON"):
    from ._qmc_py import orthant_accumulate

    BACKEND = "python"
else:
    try:
        from ._native.qmc_cy import orthant_accumulate

        BACKEND = "native"
    except ImportError:
        from ._qmc_py import orthant_accumulate

        BACKEND = "python"

__all__ = ["orthant_accumulate", "BACKEND"]
