"""Backend selection for the netlist solver kernels.

The compiled extension is preferred. Set ``EDRAMCAP_PURE_PYTHON=1`` to force
the pure-Python fallback (useful for benchmarking and for checking that both
backends agree).
"""

import os

from edramcap import _pykernels

python_backend = _pykernels

if os.environ.get("EDRAMCAP_PURE_PYTHON", "") not in ("", "0"):
    compiled_backend = None
else:
    try:
        from edramcap import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

component_labels = _impl.component_labels
component_charge = _impl.component_charge
assemble = _impl.assemble
