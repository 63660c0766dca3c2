from __future__ import annotations

__version__ = "0.1.0"

# public names, resolved from their modules on first access
_LAZY_EXPORTS = {
    "SubsystemDecomposition": "code_space",
    "DensityMatrix": "code_space",
    "KrausChannel": "channels",
    "EnvironmentState": "channels",
    "build_recovery": "channels",
    "LindbladModel": "markovian",
    "track_recovery_unitary": "markovian",
    "HamiltonianModel": "hamiltonian",
    "thm8_check": "hamiltonian",
    "entanglement_fidelity": "evaluate",
    "load_scenario": "ingest",
    "run_scenario": "check",
    "random_correctable_instance": "instances",
}

def __getattr__(name: str):
    if name in _LAZY_EXPORTS:
        from importlib import import_module
        return getattr(import_module(f".{_LAZY_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module 'oqecdyn' has no attribute '{name}'")

__all__ = ["__version__", *_LAZY_EXPORTS]
