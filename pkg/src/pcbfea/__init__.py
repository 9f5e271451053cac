"""Hex8 finite-element structural and thermal analysis of populated circuit boards.

Typical use::

    from pcbfea import Analysis, aed_reference_model, REFERENCE_PARAMS

    a = Analysis.prepare(aed_reference_model(4), REFERENCE_PARAMS)
    static = a.static("pressure")
    modes = a.modal(6)
"""
from importlib import import_module

# resolved lazily so that ``pcbfea.cli`` can set thread limits before numpy loads
_EXPORTS = {
    "Analysis": "analysis",
    "MeshParams": "mesher",
    "REFERENCE_PARAMS": "mesher",
    "generate_mesh": "mesher",
    "BoardModel": "model",
    "aed_reference_model": "model",
    "material_db": "model",
    "validate_model": "model",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
