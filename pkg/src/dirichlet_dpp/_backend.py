"""Select the compiled core when importable, else the numpy fallback.

Set ``DIRICHLET_DPP_BACKEND=python`` to force the fallback, or
``DIRICHLET_DPP_BACKEND=compiled`` to fail loudly if the extension is missing.
"""

import os

from . import _pycore

_choice = os.environ.get("DIRICHLET_DPP_BACKEND", "auto").lower()

if _choice == "python":
    core = _pycore
    NAME = "python"
else:
    try:
        from . import _core as core
        NAME = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        core = _pycore
        NAME = "python"

CHUNK = _pycore.CHUNK

__all__ = ["core", "NAME", "CHUNK"]
