"""Kernel backend selection.

The compiled extension is used when importable; set ``FLOODTREND_PURE=1``
to force the numpy implementations.
"""
import logging
import os

from . import _kernels_py

LOG = logging.getLogger(__name__)

_FORCE_PURE = os.environ.get("FLOODTREND_PURE", "").strip() not in ("", "0")

if _FORCE_PURE:
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        LOG.debug("compiled kernels unavailable, using numpy fallback")
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

poisson_fit_batch = _impl.poisson_fit_batch
scatter_annual = _impl.scatter_annual
empirical_copula = _impl.empirical_copula
decluster_peaks = _impl.decluster_peaks

STATUS_OK = _kernels_py.STATUS_OK
STATUS_DEGENERATE = _kernels_py.STATUS_DEGENERATE
STATUS_NOT_CONVERGED = _kernels_py.STATUS_NOT_CONVERGED
