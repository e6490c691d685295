"""Hot loops with a compiled backend and a NumPy fallback.

The compiled extension ``_core`` is used when it imports; setting
``FLIPFLOW_PURE_PYTHON=1`` forces the fallback. Both expose:

``pdmp_run(omega, beta, qm, pm, taus, t_elapsed, t_end, forms)``
    Run the flip process in modal coordinates through a block of gaps,
    stopping at ``t_end``; accumulate exact segment integrals of the
    quadratic forms ``forms`` (K x 2N x 2N, modal (q~, p~) ordering).
``chain_run(omega, beta, qm, pm, taus, skip, thin)``
    Embedded chain states after each flip, thinned.
``scan_modal_distance(...)`` / ``scan_flip_delta(...)``
    Grid minimisation over flow time of a weighted modal distance, and of
    the post-flip torus spread Delta.
``segment_gram(omega, qm, pm, tau)``
    Integral over one free-flow segment of the outer product x(s) x(s)^T.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("FLIPFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

pdmp_run = _impl.pdmp_run
chain_run = _impl.chain_run
scan_modal_distance = _impl.scan_modal_distance
scan_flip_delta = _impl.scan_flip_delta
segment_gram = _impl.segment_gram

__all__ = [
    "BACKEND",
    "pdmp_run",
    "chain_run",
    "scan_modal_distance",
    "scan_flip_delta",
    "segment_gram",
]
