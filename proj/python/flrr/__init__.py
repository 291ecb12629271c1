"""Robust scalar-on-function regression with thin-plate splines."""

try:
    from . import _flrr as _core
except ImportError:  # in-tree build: the extension sits next to the package
    import _flrr as _core

Model = _core.Model
ValidationError = _core.ValidationError
NumericalError = _core.NumericalError

fit = _core.fit
grid_volumes = _core.grid_volumes
load_model = _core.load_model
model_from_json = _core.model_from_json
m_scale = _core.m_scale
tau_scale = _core.tau_scale
default_lambda_grid = _core.default_lambda_grid
logspace_grid = _core.logspace_grid
simulate = _core.simulate

__all__ = [
    "Model",
    "ValidationError",
    "NumericalError",
    "fit",
    "grid_volumes",
    "load_model",
    "model_from_json",
    "m_scale",
    "tau_scale",
    "default_lambda_grid",
    "logspace_grid",
    "simulate",
]
