"""Ion-shuttling waveform toolkit."""

from ._shuttlekit import (
    ShuttleError,
    analog_chain,
    default_config,
    emulate,
    encode,
    error_sweep,
    fit_lorentzian,
    lorentzian,
    optimize,
    quantize,
    solve_box_qp,
    synth_resonance,
    trap_info,
    verify,
)

__all__ = [
    "ShuttleError",
    "analog_chain",
    "default_config",
    "emulate",
    "encode",
    "error_sweep",
    "fit_lorentzian",
    "lorentzian",
    "optimize",
    "quantize",
    "solve_box_qp",
    "synth_resonance",
    "trap_info",
    "verify",
]
