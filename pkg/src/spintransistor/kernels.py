"""Backend selection for the ordered-sector sums.

The compiled extension is used when importable; set
``SPINTRANSISTOR_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

_BACKENDS = {"python": _kernels_py}
if _kernels_c is not None:
    _BACKENDS["cython"] = _kernels_c

if os.environ.get("SPINTRANSISTOR_PURE_PYTHON") or _kernels_c is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def get_backend(name: str | None = None):
    """Module implementing ``contact_sum`` and ``ordered_sums``."""
    name = name or BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    return _BACKENDS[name]


def contact_sum(phi, dphi, bond, backend=None):
    return get_backend(backend).contact_sum(phi, dphi, bond)


def ordered_sums(phi, field=None, backend=None):
    return get_backend(backend).ordered_sums(phi, field)
