"""Kernel selection: compiled extension when available, numpy otherwise.

Set KAMTORUS_NO_EXTENSION=1 to force the numpy implementations (used by the
parity tests and the benchmark).
"""

import os

from . import orbit_np

if os.environ.get("KAMTORUS_NO_EXTENSION"):
    _impl = orbit_np
else:
    try:
        from . import _orbit_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = orbit_np

IMPL = _impl.IMPL
twisted_sums = _impl.twisted_sums
birkhoff_orbits = _impl.birkhoff_orbits

__all__ = ["IMPL", "twisted_sums", "birkhoff_orbits", "orbit_np"]
