"""Kernel backend selection: compiled extension if present, else pure Python.

Set WOLBACTRL_PURE_PYTHON=1 to force the fallback (used by the backend
agreement tests and the benchmark).
"""

import os

if os.environ.get("WOLBACTRL_PURE_PYTHON") == "1":
    from . import _pyfallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pyfallback as _impl

        BACKEND = "python"

integrate_full = _impl.integrate_full
integrate_slowfast = _impl.integrate_slowfast
integrate_reduced = _impl.integrate_reduced
adjoint_reduced = _impl.adjoint_reduced
adjoint_full = _impl.adjoint_full
adjoint_slowfast = _impl.adjoint_slowfast
reduced_fg_prime = _impl.reduced_fg_prime


def get_backend(name: str):
    """Return the raw backend module ("compiled" or "python")."""
    if name == "python":
        from . import _pyfallback

        return _pyfallback
    if name == "compiled":
        from . import _fast  # raises ImportError if not built

        return _fast
    raise ValueError(f"unknown backend {name!r}")
