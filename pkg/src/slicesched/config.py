"""Scenario configuration: defaults, key=value file parsing, validation.

Config files are flat text: one ``key = value`` per line, ``#`` starts a
comment, blank lines ignored.  Dotted keys (``traffic.lambda_slow``) are
accepted and mapped to the flat field name after the last dot, so files can
be organized into visual sections without a nested format.

Every field is overridable from the CLI via ``--set key=value``.  Values are
parsed by the declared field type; tuples are comma-separated.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

DEXTERITY_PROFILES = ("constant", "two_step", "per_user")
DUAL_CADENCES = ("slot", "episode")
ACTIVATIONS = ("tanh", "relu")


class ConfigError(ValueError):
    """Raised on config parse failures (carries the offending line number)."""


class ValidationError(ValueError):
    """Raised when a config violates a documented invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    # --- radio system ---
    total_bandwidth_hz: float = 10e6
    num_prbs: int = 25
    num_embb: int = 4
    num_hrllc: int = 3
    slot_duration_s: float = 1e-3
    packet_size_bits: int = 1000
    mean_snr_linear: float = 10.0

    # --- delay / reliability targets ---
    d_max_s: float = 20e-3
    d_proc_s: float = 5e-3
    chi_h: float = 0.98

    # --- traffic ---
    mmpp_alpha: float = 0.2          # state 1 -> 2 transition rate, 1/s
    mmpp_beta: float = 0.2           # state 2 -> 1 transition rate, 1/s
    lambda_slow: float = 2.0         # packets/slot in state 1
    lambda_burst: float = 8.0        # packets/slot in state 2
    beta_dex: float = 0.2            # packets/slot intensity drop per unit DXI
    lambda_embb: float = 3.0         # packets/slot per eMBB user

    # --- dexterity schedule ---
    dexterity_profile: str = "constant"
    dxi_level: float = 2.5           # constant profile level (all users)
    dxi_low: float = 0.0             # two-step: level outside the middle third
    dxi_high: float = 5.0            # two-step: level during the middle third
    dxi_step_user: int = 0           # two-step applies to this HRLLC user
    dxi_values: tuple[float, ...] = (0.0, 2.5, 5.0, 7.5, 10.0)  # per_user

    # --- control objective ---
    eps_cost: float = 1e-6
    lyapunov_v: float = 1.0
    dual_step: float = 0.01
    dual_cadence: str = "slot"       # "slot" or "episode"
    surrogate_exp_cap: float = 50.0

    # --- learning ---
    gamma: float = 0.99
    lr_actor: float = 1e-4
    lr_critic: float = 1e-4
    episodes: int = 300
    slots_per_episode: int = 200
    entropy_coef: float = 0.01
    grad_clip: float = 5.0
    reward_scale: float = 0.01
    trunk_hidden: tuple[int, ...] = (64, 64)
    trunk_activation: str = "tanh"
    shared_trunk: bool = True

    # --- observation normalization ---
    q_ref: float = 100.0
    r_ref_mbps: float = 20.0
    l_ref: float = 500.0
    y_clip: float = 5.0
    obs_clip: float = 10.0

    # --- DQN baseline ---
    dqn_replay_capacity: int = 10000
    dqn_batch_size: int = 64
    dqn_target_sync: int = 500
    dqn_eps_start: float = 1.0
    dqn_eps_end: float = 0.05
    dqn_eps_decay_slots: int = 30000

    # --- baselines / metrics ---
    pf_ewma: float = 0.1
    smooth_window: int = 10
    eval_episodes: int = 20

    # --- misc ---
    carry_fractional_service: bool = False
    alpha1: float = 0.1              # reserved constant, not used anywhere
    master_seed: int = 12345

    def __post_init__(self) -> None:
        validate(self)

    @property
    def num_users(self) -> int:
        return self.num_embb + self.num_hrllc

    def replace(self, **kwargs: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)


def derive_prb_bandwidth(cfg: ScenarioConfig) -> float:
    """PRB width in Hz: total bandwidth split evenly over the PRB grid."""
    return cfg.total_bandwidth_hz / cfg.num_prbs


def _positive(cfg: ScenarioConfig, *names: str) -> None:
    for n in names:
        if not getattr(cfg, n) > 0:
            raise ValidationError(f"{n} must be strictly positive, got {getattr(cfg, n)}")


def _nonneg(cfg: ScenarioConfig, *names: str) -> None:
    for n in names:
        if getattr(cfg, n) < 0:
            raise ValidationError(f"{n} must be >= 0, got {getattr(cfg, n)}")


def validate(cfg: ScenarioConfig) -> None:
    """Check every documented invariant; raise ValidationError naming the first violation."""
    _positive(
        cfg, "total_bandwidth_hz", "num_prbs", "num_embb", "num_hrllc",
        "slot_duration_s", "packet_size_bits", "mean_snr_linear", "d_max_s",
        "d_proc_s", "eps_cost", "lyapunov_v", "dual_step", "lr_actor",
        "lr_critic", "episodes", "slots_per_episode", "q_ref", "r_ref_mbps",
        "l_ref", "obs_clip", "surrogate_exp_cap", "smooth_window",
        "eval_episodes", "dqn_replay_capacity", "dqn_batch_size",
        "dqn_target_sync", "dqn_eps_decay_slots",
    )
    _nonneg(cfg, "mmpp_alpha", "mmpp_beta", "lambda_slow", "lambda_burst",
            "beta_dex", "lambda_embb", "entropy_coef", "master_seed",
            "dxi_level", "dxi_low", "dxi_high", "y_clip")
    if cfg.num_prbs < cfg.num_users:
        raise ValidationError(
            f"num_prbs ({cfg.num_prbs}) must be >= num_embb + num_hrllc "
            f"({cfg.num_users}) so every user can hold one PRB")
    if not cfg.lambda_burst > cfg.lambda_slow:
        raise ValidationError(
            f"lambda_burst ({cfg.lambda_burst}) must exceed lambda_slow ({cfg.lambda_slow})")
    if not 0.0 < cfg.chi_h < 1.0:
        raise ValidationError(f"chi_h must be in (0,1), got {cfg.chi_h}")
    if not 0.0 < cfg.gamma < 1.0:
        raise ValidationError(f"gamma must be in (0,1), got {cfg.gamma}")
    if not cfg.d_proc_s < cfg.d_max_s:
        raise ValidationError(
            f"d_proc_s ({cfg.d_proc_s}) must be below d_max_s ({cfg.d_max_s})")
    if cfg.dexterity_profile not in DEXTERITY_PROFILES:
        raise ValidationError(
            f"dexterity_profile must be one of {DEXTERITY_PROFILES}, got {cfg.dexterity_profile!r}")
    if cfg.dexterity_profile == "per_user" and len(cfg.dxi_values) != cfg.num_hrllc:
        raise ValidationError(
            f"dxi_values must list one level per HRLLC user "
            f"({cfg.num_hrllc}), got {len(cfg.dxi_values)}")
    if cfg.dexterity_profile == "two_step" and not (0 <= cfg.dxi_step_user < cfg.num_hrllc):
        raise ValidationError(f"dxi_step_user out of range: {cfg.dxi_step_user}")
    if cfg.dual_cadence not in DUAL_CADENCES:
        raise ValidationError(
            f"dual_cadence must be one of {DUAL_CADENCES}, got {cfg.dual_cadence!r}")
    if cfg.trunk_activation not in ACTIVATIONS:
        raise ValidationError(
            f"trunk_activation must be one of {ACTIVATIONS}, got {cfg.trunk_activation!r}")
    if not 0.0 < cfg.pf_ewma <= 1.0:
        raise ValidationError(f"pf_ewma must be in (0,1], got {cfg.pf_ewma}")
    if any(v < 0 for v in cfg.dxi_values):
        raise ValidationError("dxi_values must be non-negative")
    if any(h <= 0 for h in cfg.trunk_hidden):
        raise ValidationError("trunk_hidden sizes must be positive")
    if not 0.0 <= cfg.dqn_eps_end <= cfg.dqn_eps_start <= 1.0:
        raise ValidationError("need 0 <= dqn_eps_end <= dqn_eps_start <= 1")


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _parse_value(name: str, raw: str) -> Any:
    ftype = _FIELD_TYPES[name]
    raw = raw.strip()
    try:
        if ftype == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype.startswith("tuple[float"):
            return tuple(float(p) for p in raw.split(",") if p.strip())
        if ftype.startswith("tuple[int"):
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return raw  # str fields
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {exc}") from exc


def parse_config_text(text: str) -> ScenarioConfig:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip().split(".")[-1]  # dotted section prefix is cosmetic
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return ScenarioConfig(**values)


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a key=value config file, fill defaults, validate all invariants."""
    return parse_config_text(Path(path).read_text())


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_to_text(cfg: ScenarioConfig) -> str:
    """Serialize so that parse_config_text(config_to_text(cfg)) == cfg."""
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}"
             for f in fields(ScenarioConfig)]
    return "\n".join(lines) + "\n"


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(config_to_text(cfg))


def apply_overrides(cfg: ScenarioConfig, overrides: dict[str, str]) -> ScenarioConfig:
    """Apply CLI --set key=value overrides on top of a loaded config."""
    values: dict[str, Any] = {}
    for key, raw in overrides.items():
        name = key.strip().split(".")[-1]
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[name] = _parse_value(name, raw)
    return cfg.replace(**values)
