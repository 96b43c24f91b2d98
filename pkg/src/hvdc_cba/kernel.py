"""Backend selection for the frequency integrator.

The compiled extension is used when it imports; ``HVDC_CBA_KERNEL=python``
forces the pure-Python fallback.
"""
import os

from . import _kernel_py

BACKEND = "python"
integrate = _kernel_py.integrate

if os.environ.get("HVDC_CBA_KERNEL", "").lower() != "python":
    try:
        from . import _kernel
    except ImportError:
        pass
    else:
        integrate = _kernel.integrate
        BACKEND = "cython"

OK = _kernel_py.OK
NON_FINITE = _kernel_py.NON_FINITE
