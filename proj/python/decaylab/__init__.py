"""Heat-semigroup decay rates on Lorentz spaces: rate table, Lorentz norms, fitter and experiment commands."""

import json

from ._core import (
    InvalidArgument,
    NumericalFailure,
    alpha_beta,
    ball_norm,
    branch_exponent,
    canonical_config,
    config_hash,
    dual,
    duality_identity,
    fit_rate,
    harmonic_exponent,
    is_admissible,
    lorentz_norm,
    table2_preset,
    theoretical_rate,
    theoretical_rate_exact,
    validate_config,
)
from . import _core


def run(command, config_text, out):
    """Run harmonic/evolve/rates/invariants; returns (exit_code, directory, report dict)."""
    fn = getattr(_core, "cmd_" + command, None)
    if fn is None:
        raise ValueError("unknown command " + repr(command))
    code, directory, report = fn(config_text, out)
    return code, directory, json.loads(report)


__all__ = [
    "InvalidArgument", "NumericalFailure", "alpha_beta", "ball_norm", "branch_exponent", "canonical_config",
    "config_hash", "dual", "duality_identity", "fit_rate", "harmonic_exponent", "is_admissible", "lorentz_norm",
    "run", "table2_preset", "theoretical_rate", "theoretical_rate_exact", "validate_config",
]
