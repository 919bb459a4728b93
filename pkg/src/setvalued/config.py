"""Declarative experiment configuration (JSON or TOML file plus flag overrides)."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ExperimentConfig", "EXPERIMENTS", "FAMILIES", "TOLERANCE_KEYS", "load_config"]

EXPERIMENTS = (
    "geodesic",
    "ito-flow",
    "hjb-check",
    "set-heat",
    "hat-equation",
    "scalar-hjb",
    "mean-variance",
    "hausdorff",
    "verification",
)

FAMILIES = {
    "geodesic": ("translating-ball", "static-ball", "mean-variance"),
    "ito-flow": ("heat-ball", "static-ball"),
    "hjb-check": ("heat-ball", "mean-variance", "heat-ball-nonsolution"),
    "set-heat": ("exp-heat-ball", "heat-ball"),
    "hat-equation": ("symmetric-heat-interval", "slab", "symmetric-nonsolution"),
    "scalar-hjb": ("scalar-interval",),
    "mean-variance": ("mean-variance",),
    "hausdorff": ("convex-polygons",),
    "verification": ("heat-ball", "mean-variance"),
}

TOLERANCE_KEYS = {
    "geodesic": ("residual", "exact", "length"),
    "ito-flow": ("residual", "order"),
    "hjb-check": ("residual", "forms", "negative_control"),
    "set-heat": ("residual",),
    "hat-equation": ("residual", "ratio", "negative_control"),
    "scalar-hjb": ("sup_error", "ratio"),
    "mean-variance": ("static", "z_score", "angle", "support"),
    "hausdorff": ("identity", "pacman_set", "pacman_boundary"),
    "verification": ("residual", "forms", "gap"),
}

# families whose sets collapse at the horizon
_COLLAPSING = {"heat-ball", "mean-variance", "heat-ball-nonsolution"}


class ExperimentConfig(BaseModel):
    """Every knob of an experiment run; unset numeric knobs take per-experiment defaults."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    family: str | None = None
    T: float = 1.0
    seed: int = 0
    paths: int | None = None
    dt: float | None = None
    horizon: float | None = None
    delta_min: float | None = None
    points: int = 100
    workers: int = 1
    regime: Literal["tangential", "inward", "outward"] = "tangential"
    order_study: bool = False
    dx: float | None = None
    x0: float = 0.0
    lam: float = 1.0
    amplitude: tuple[float, float] = (0.05, 0.05)
    eps: float = 1e-3
    pairs: int = 200
    form: Literal["X*2", "X*"] = "X*2"
    tolerances: dict[str, float] = {}
    output_dir: str | None = None
    plot: bool = False

    @model_validator(mode="after")
    def _consistent(self):
        if self.family is not None and self.family not in FAMILIES[self.experiment]:
            raise ValueError(f"family {self.family!r} is not available for {self.experiment}; "
                             f"choose from {', '.join(FAMILIES[self.experiment])}")
        unknown = set(self.tolerances) - set(TOLERANCE_KEYS[self.experiment])
        if unknown:
            raise ValueError(f"unknown tolerance key(s) for {self.experiment}: {', '.join(sorted(unknown))}")
        for name in ("T", "dt", "horizon", "delta_min", "dx", "lam", "eps"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.workers < 1 or self.points < 1 or self.pairs < 1 or (self.paths is not None and self.paths < 1):
            raise ValueError("workers, points, pairs and paths must be at least 1")
        family = self.family or FAMILIES[self.experiment][0]
        if family in _COLLAPSING and self.experiment in ("ito-flow", "verification") and self.horizon is not None:
            dmin = self.delta_min if self.delta_min is not None else 1e-3 * self.T
            if self.horizon > self.T - dmin:
                raise ValueError(f"horizon {self.horizon} passes T - delta_min = {self.T - dmin}")
        return self

    def reportable(self) -> dict:
        """Config echo for summaries; excludes knobs that must not affect results."""
        return self.model_dump(mode="json", exclude={"workers", "output_dir", "plot"})


def _read_file(path: Path) -> dict:
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text)
    if path.suffix.lower() == ".json":
        return json.loads(text)
    raise ConfigError(f"unsupported config format {path.suffix!r}; use .json or .toml")


def load_config(experiment: str, file: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults < file < overrides and validate.

    Unknown keys raise :class:`ConfigError` naming the key.
    """
    data: dict = {}
    if file is not None:
        data.update(_read_file(Path(file)))
    file_experiment = data.pop("experiment", experiment)
    if file_experiment != experiment:
        raise ConfigError(f"config file is for {file_experiment!r}, not {experiment!r}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    data["experiment"] = experiment
    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        parts = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "config"
            if err["type"] == "extra_forbidden":
                parts.append(f"unknown key {loc!r}")
            else:
                parts.append(f"{loc}: {err['msg']}")
        raise ConfigError("; ".join(parts)) from None
