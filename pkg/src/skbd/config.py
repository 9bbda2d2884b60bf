"""Strict JSON configuration for designs, kernels, insertion, and
time-to-event conduct.

One document describes a trial design (or several named kernel variants of
it), with defaults matching the published design throughout. Unknown keys
are rejected everywhere: a typo in a trial-planning config must fail loudly,
not silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import DesignConfig, InvalidDesign
from .engine import TiteConfig
from .insertion import InsertionConfig
from .kernels import ASYMMETRIC, KRONECKER, SYMMETRIC, DoseGrid, KernelSpec, calibrate_kernel
from .numerics import BetaParams

__all__ = [
    "ConfigError",
    "KernelSettings",
    "DesignSettings",
    "RunConfig",
    "parse_config",
    "load_config",
]


class ConfigError(ValueError):
    """Malformed configuration document (syntax, structure, unknown keys)."""


def _require_keys(payload: dict, allowed: set[str], where: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _beta_pair(value, where: str) -> BetaParams:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise ConfigError(f"{where} must be a two-element [alpha, beta] array")
    try:
        return BetaParams(float(value[0]), float(value[1]))
    except ValueError as err:
        raise InvalidDesign(where, str(err)) from None


@dataclass(frozen=True)
class KernelSettings:
    """Kernel family plus nearest-neighbour calibration values.

    Decay rates depend on the dose grid, so settings hold only the
    grid-independent part and calibrate per scenario.
    """

    kind: str = ASYMMETRIC
    k_lower: float = 0.2
    k_upper: float = 0.8

    def calibrate(self, grid: DoseGrid) -> KernelSpec:
        if self.kind == KRONECKER:
            return KernelSpec.kronecker()
        if self.kind == SYMMETRIC:
            return calibrate_kernel(grid, self.k_lower, self.k_lower)
        return calibrate_kernel(grid, self.k_lower, self.k_upper)

    @classmethod
    def from_dict(cls, payload: dict, where: str = "kernel") -> "KernelSettings":
        _require_keys(payload, {"kind", "k_lower", "k_upper", "k_value"}, where)
        kind = payload.get("kind", ASYMMETRIC)
        aliases = {
            "asymmetric": ASYMMETRIC,
            ASYMMETRIC: ASYMMETRIC,
            "symmetric": SYMMETRIC,
            SYMMETRIC: SYMMETRIC,
            "kronecker": KRONECKER,
        }
        if kind not in aliases:
            raise InvalidDesign(f"{where}.kind", f"unknown kernel kind {kind!r}")
        kind = aliases[kind]
        if kind == SYMMETRIC and "k_value" in payload:
            k_lower = k_upper = float(payload["k_value"])
        else:
            if "k_value" in payload:
                raise ConfigError(f"{where}.k_value applies only to symmetric kernels")
            k_lower = float(payload.get("k_lower", 0.2))
            k_upper = float(payload.get("k_upper", 0.8))
            if kind == SYMMETRIC:
                k_upper = k_lower
        if kind != KRONECKER and not (0.0 < k_lower < 1.0 and 0.0 < k_upper < 1.0):
            raise InvalidDesign(
                f"{where}.k_lower", "nearest-neighbour values must lie in (0, 1)"
            )
        return cls(kind=kind, k_lower=k_lower, k_upper=k_upper)


@dataclass(frozen=True)
class DesignSettings:
    """Grid-independent design parameters."""

    phi: float = 0.3
    eps1: float = 0.05
    eps2: float = 0.05
    prior: BetaParams = BetaParams(1.0, 1.0)
    elimination_cutoff: float = 0.95
    elimination_min_n: int = 3
    cohort_size: int = 3
    max_n: int = 30
    selection_prior: BetaParams = BetaParams(0.01, 0.01)
    selection_kernel_value: float = 0.2

    def bind(self, grid: DoseGrid, kernel: KernelSettings) -> DesignConfig:
        return DesignConfig(
            phi=self.phi,
            kernel=kernel.calibrate(grid),
            eps1=self.eps1,
            eps2=self.eps2,
            prior=self.prior,
            elimination_cutoff=self.elimination_cutoff,
            elimination_min_n=self.elimination_min_n,
            cohort_size=self.cohort_size,
            max_n=self.max_n,
            selection_prior=self.selection_prior,
            selection_kernel_value=self.selection_kernel_value,
        )

    @classmethod
    def from_dict(cls, payload: dict) -> "DesignSettings":
        allowed = {
            "phi",
            "eps1",
            "eps2",
            "prior",
            "elimination_cutoff",
            "elimination_min_n",
            "cohort_size",
            "max_n",
            "selection_prior",
            "selection_kernel_value",
        }
        _require_keys(payload, allowed, "design")
        kwargs: dict = {}
        for key in allowed - {"prior", "selection_prior"}:
            if key in payload:
                value = payload[key]
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise InvalidDesign(key, f"must be a number, got {value!r}")
                kwargs[key] = value
        for key in ("elimination_min_n", "cohort_size", "max_n"):
            if key in kwargs:
                if kwargs[key] != int(kwargs[key]):
                    raise InvalidDesign(key, f"must be an integer, got {kwargs[key]}")
                kwargs[key] = int(kwargs[key])
        if "prior" in payload:
            kwargs["prior"] = _beta_pair(payload["prior"], "prior")
        if "selection_prior" in payload:
            kwargs["selection_prior"] = _beta_pair(
                payload["selection_prior"], "selection_prior"
            )
        settings = cls(**kwargs)
        # Surface invalid combinations now, on a representative grid.
        from .kernels import standardize_doses

        settings.bind(standardize_doses([1.0, 2.0]), KernelSettings(kind=KRONECKER))
        return settings


@dataclass(frozen=True)
class RunConfig:
    """A parsed configuration document."""

    design: DesignSettings = field(default_factory=DesignSettings)
    designs: tuple[tuple[str, KernelSettings], ...] = (
        ("skbd", KernelSettings()),
    )
    insertion: Optional[InsertionConfig] = None
    tite: Optional[TiteConfig] = None
    scale: str = "linear"
    rod_threshold: float = 0.6
    rod_inclusive: bool = False


def _parse_insertion(payload: dict) -> Optional[InsertionConfig]:
    allowed = {
        "enabled",
        "c1",
        "c2",
        "prior",
        "candidate_points",
        "symmetric_kernel_value",
        "max_insertions",
    }
    _require_keys(payload, allowed, "insertion")
    if not payload.get("enabled", True):
        return None
    kwargs: dict = {}
    for key in ("c1", "c2", "symmetric_kernel_value"):
        if key in payload:
            kwargs[key] = float(payload[key])
    if "candidate_points" in payload:
        kwargs["candidate_points"] = int(payload["candidate_points"])
    if "max_insertions" in payload:
        cap = payload["max_insertions"]
        kwargs["max_insertions"] = None if cap is None else int(cap)
    if "prior" in payload:
        kwargs["prior"] = _beta_pair(payload["prior"], "insertion.prior")
    try:
        return InsertionConfig(**kwargs)
    except ValueError as err:
        raise InvalidDesign("insertion", str(err)) from None


def _parse_tite(payload: dict) -> Optional[TiteConfig]:
    _require_keys(payload, {"enabled", "tau", "accrual_rate"}, "tite")
    if not payload.get("enabled", True):
        return None
    kwargs = {}
    for key in ("tau", "accrual_rate"):
        if key in payload:
            kwargs[key] = float(payload[key])
    try:
        return TiteConfig(**kwargs)
    except ValueError as err:
        raise InvalidDesign("tite", str(err)) from None


def parse_config(payload: dict) -> RunConfig:
    """Build a RunConfig from a parsed JSON document, rejecting unknowns."""
    if not isinstance(payload, dict):
        raise ConfigError("configuration document must be a JSON object")
    allowed = {
        "design",
        "kernel",
        "designs",
        "insertion",
        "tite",
        "scale",
        "rod_threshold",
        "rod_inclusive",
    }
    _require_keys(payload, allowed, "configuration")
    if "kernel" in payload and "designs" in payload:
        raise ConfigError("give either 'kernel' or 'designs', not both")

    design = DesignSettings.from_dict(payload.get("design", {}))
    if "designs" in payload:
        entries = payload["designs"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("'designs' must be a non-empty array")
        named: list[tuple[str, KernelSettings]] = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise ConfigError(f"designs[{i}] must be an object")
            _require_keys(entry, {"name", "kernel"}, f"designs[{i}]")
            name = str(entry.get("name", f"design-{i + 1}"))
            kernel = KernelSettings.from_dict(
                entry.get("kernel", {}), f"designs[{i}].kernel"
            )
            named.append((name, kernel))
        if len({name for name, _ in named}) != len(named):
            raise ConfigError("design names must be unique")
        designs = tuple(named)
    else:
        kernel = KernelSettings.from_dict(payload.get("kernel", {}))
        default_name = "keyboard" if kernel.kind == KRONECKER else "skbd"
        designs = ((default_name, kernel),)

    insertion = _parse_insertion(payload["insertion"]) if "insertion" in payload else None
    tite = _parse_tite(payload["tite"]) if "tite" in payload else None
    if insertion is not None and tite is not None:
        raise ConfigError("insertion and tite conduct cannot be combined")

    scale = payload.get("scale", "linear")
    if scale not in ("linear", "log"):
        raise InvalidDesign("scale", f"must be 'linear' or 'log', got {scale!r}")
    rod_threshold = float(payload.get("rod_threshold", 0.6))
    if not 0.0 < rod_threshold < 1.0:
        raise InvalidDesign("rod_threshold", "must lie in (0, 1)")
    rod_inclusive = payload.get("rod_inclusive", False)
    if not isinstance(rod_inclusive, bool):
        raise InvalidDesign("rod_inclusive", "must be a boolean")

    return RunConfig(
        design=design,
        designs=designs,
        insertion=insertion,
        tite=tite,
        scale=scale,
        rod_threshold=rod_threshold,
        rod_inclusive=rod_inclusive,
    )


def load_config(path: str | Path) -> RunConfig:
    """Parse a configuration file, raising ConfigError on malformed JSON."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    return parse_config(payload)
