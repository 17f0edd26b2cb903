"""Pilot-mixture coded random access simulator (C++ core)."""

from ._core import (
    ConfigError,
    bch_decode,
    bch_encode,
    collision_bound,
    crc16,
    default_config,
    derive_choices,
    enumerate_slot_loss,
    information_bits,
    modulate,
    peel_grid,
    plr_framed_nosic,
    plr_slotted_nosic,
    run_sweep,
    run_trial,
    sweep_csv,
    validate,
    validate_config,
    verify,
)

__all__ = [
    "ConfigError",
    "bch_decode",
    "bch_encode",
    "collision_bound",
    "crc16",
    "default_config",
    "derive_choices",
    "enumerate_slot_loss",
    "information_bits",
    "modulate",
    "peel_grid",
    "plr_framed_nosic",
    "plr_slotted_nosic",
    "run_sweep",
    "run_trial",
    "sweep_csv",
    "validate",
    "validate_config",
    "verify",
]
