"""Gradients of geodesic-length functions on closed hyperbolic surfaces.

Submodules are imported explicitly (``wpsystole.surface``, ``wpsystole.series``
and so on) so that the CLI can configure numba threads before compiling.
"""

import os

# the TBB layer is not always available; workqueue is deterministic enough
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
