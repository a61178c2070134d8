"""Market primitives and validated parameter containers.

A market consists of a risky asset whose fundamental value moves by i.i.d.
Gaussian increments with volatility ``sigma_S``, exogenous Gaussian noise
flow with volatility ``sigma_K``, and ``k`` strategic traders who observe
each value innovation one period before the dealers and pay a running
quadratic inventory penalty at rate ``gamma_i``.

``dt == 0`` is accepted as the continuous-trading limit; solvers answer it
with closed forms and the discount constraint ``rho_i * dt in (0, 1)`` is
waived for that case only.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

__all__ = [
    "TraderParams",
    "MarketParams",
    "ValidatedParams",
    "Violation",
    "InvalidParamsError",
    "ConfigError",
    "check_params",
    "validate",
    "load_config",
    "params_to_config",
]

_CONFIG_KEYS = ("sigma_S", "sigma_K", "dt", "tax", "traders")
_TRADER_KEYS = ("gamma", "rho", "initial_inventory")


@dataclass(frozen=True)
class TraderParams:
    """One strategic trader: penalty rate, discount rate, starting inventory."""

    gamma: float
    rho: float
    initial_inventory: float = 0.0


@dataclass(frozen=True)
class MarketParams:
    """Raw, possibly invalid, market description."""

    sigma_S: float
    sigma_K: float
    dt: float
    traders: tuple[TraderParams, ...]
    tax: float = 0.0


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


class InvalidParamsError(ValueError):
    """Raised with the complete list of parameter violations."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__(
            "invalid market parameters: "
            + "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        )

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class ConfigError(ValueError):
    """Malformed configuration input (unknown keys, wrong types, missing fields)."""


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def check_params(params: MarketParams) -> list[Violation]:
    """Collect every violated constraint; an empty list means valid."""
    out: list[Violation] = []
    for name in ("sigma_S", "sigma_K"):
        v = getattr(params, name)
        if not (_is_number(v) and math.isfinite(v) and v > 0):
            out.append(Violation("NonPositiveVolatility", f"{name} must be a positive real, got {v!r}"))
    dt_ok = _is_number(params.dt) and math.isfinite(params.dt) and params.dt >= 0
    if not dt_ok:
        out.append(Violation("DiscountOutOfRange", f"dt must be a finite real >= 0, got {params.dt!r}"))
    if not (_is_number(params.tax) and math.isfinite(params.tax) and params.tax >= 0):
        out.append(Violation("NegativeTax", f"tax must be a finite real >= 0, got {params.tax!r}"))
    if len(params.traders) == 0:
        out.append(Violation("EmptyTraderList", "at least one trader is required"))
    for i, t in enumerate(params.traders):
        if not (_is_number(t.gamma) and math.isfinite(t.gamma) and t.gamma > 0):
            out.append(Violation("NonPositiveGamma", f"trader {i}: gamma must be a positive real, got {t.gamma!r}"))
        rho_ok = _is_number(t.rho) and math.isfinite(t.rho) and t.rho > 0
        if not rho_ok:
            out.append(Violation("DiscountOutOfRange", f"trader {i}: rho must be a positive real, got {t.rho!r}"))
        elif dt_ok and params.dt > 0 and not (t.rho * params.dt < 1):
            out.append(
                Violation(
                    "DiscountOutOfRange",
                    f"trader {i}: rho*dt = {t.rho * params.dt!r} must lie in (0, 1)",
                )
            )
    return out


@dataclass(frozen=True)
class ValidatedParams:
    """A market description that passed :func:`check_params`.

    Direct construction re-runs the checks, so an instance can never carry a
    violating field. ``vol_ratio_sq`` is ``(sigma_K / sigma_S)**2``, computed
    once here and shared by every module.
    """

    sigma_S: float
    sigma_K: float
    dt: float
    traders: tuple[TraderParams, ...]
    tax: float = 0.0
    vol_ratio_sq: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        violations = check_params(
            MarketParams(self.sigma_S, self.sigma_K, self.dt, tuple(self.traders), self.tax)
        )
        if violations:
            raise InvalidParamsError(violations)
        object.__setattr__(self, "traders", tuple(self.traders))
        object.__setattr__(self, "vol_ratio_sq", (self.sigma_K / self.sigma_S) ** 2)

    @property
    def k(self) -> int:
        return len(self.traders)

    @property
    def gammas(self) -> tuple[float, ...]:
        return tuple(t.gamma for t in self.traders)

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple(t.rho for t in self.traders)

    @property
    def initial_inventories(self) -> tuple[float, ...]:
        return tuple(t.initial_inventory for t in self.traders)

    def with_dt(self, dt: float) -> "ValidatedParams":
        return ValidatedParams(self.sigma_S, self.sigma_K, dt, self.traders, self.tax)

    def with_tax(self, tax: float) -> "ValidatedParams":
        return ValidatedParams(self.sigma_S, self.sigma_K, self.dt, self.traders, tax)


def validate(params: MarketParams) -> ValidatedParams:
    """Return the validated form of ``params`` or raise with all violations."""
    violations = check_params(params)
    if violations:
        raise InvalidParamsError(violations)
    return ValidatedParams(params.sigma_S, params.sigma_K, params.dt, tuple(params.traders), params.tax)


def _require_number(mapping: dict, key: str, where: str) -> float:
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    v = mapping[key]
    if not _is_number(v):
        raise ConfigError(f"{where}: key {key!r} must be a number, got {type(v).__name__}")
    return float(v)


def load_config(source) -> ValidatedParams:
    """Read a market configuration from a JSON file path, file object, or dict.

    Recognized keys: sigma_S, sigma_K, dt, tax (default 0), and traders, a
    nonempty list of {gamma, rho, initial_inventory (default 0)}. Unknown
    keys are rejected.
    """
    if isinstance(source, dict):
        raw = source
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    elif hasattr(source, "read"):
        raw = json.load(source)
    else:
        raise ConfigError(f"unsupported config source {type(source).__name__}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    sigma_S = _require_number(raw, "sigma_S", "config")
    sigma_K = _require_number(raw, "sigma_K", "config")
    dt = _require_number(raw, "dt", "config")
    tax = _require_number(raw, "tax", "config") if "tax" in raw else 0.0
    if "traders" not in raw:
        raise ConfigError("config: missing required key 'traders'")
    if not isinstance(raw["traders"], list):
        raise ConfigError("config: 'traders' must be a list")
    traders = []
    for i, entry in enumerate(raw["traders"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"config: traders[{i}] must be an object")
        unknown = sorted(set(entry) - set(_TRADER_KEYS))
        if unknown:
            raise ConfigError(f"config: traders[{i}] unknown keys: {', '.join(unknown)}")
        gamma = _require_number(entry, "gamma", f"traders[{i}]")
        rho = _require_number(entry, "rho", f"traders[{i}]")
        inv = _require_number(entry, "initial_inventory", f"traders[{i}]") if "initial_inventory" in entry else 0.0
        traders.append(TraderParams(gamma, rho, inv))
    return validate(MarketParams(sigma_S, sigma_K, dt, tuple(traders), tax))


def params_to_config(params: ValidatedParams) -> dict:
    """Inverse of :func:`load_config`: a dict that parses back to ``params``."""
    return {
        "sigma_S": params.sigma_S,
        "sigma_K": params.sigma_K,
        "dt": params.dt,
        "tax": params.tax,
        "traders": [
            {"gamma": t.gamma, "rho": t.rho, "initial_inventory": t.initial_inventory}
            for t in params.traders
        ],
    }
