"""Run configuration: a flat TOML file mirroring RunConfig.

Grammar: top-level scalar keys (seed, test_fraction, recency_days,
smote_k, tie_epsilon, families), a [cv] table (k, repeats, scoring), a
[contamination] table keyed by stage slug, and one [grids.<family>] table
per family with array values. `max_leaf_nodes = 0` and `max_depth = 0`
mean "unbounded" (TOML has no null).
"""

from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .features import LifecycleStage
from .pipeline import DEFAULT_GRIDS, FAMILY_COST_ORDER, RunConfig
from .selection import CvSpec

_NULLABLE_GRID_KEYS = {"max_leaf_nodes", "max_depth"}


def _decode_grid(family: str, grid: dict) -> dict:
    out = {}
    for key, values in grid.items():
        if not isinstance(values, list):
            raise ConfigError(f"grids.{family}.{key} must be an array")
        if key in _NULLABLE_GRID_KEYS:
            values = [None if v == 0 else v for v in values]
        out[key] = values
    return out


def _encode_grid(grid: dict) -> dict:
    return {
        key: [0 if v is None else v for v in values]
        for key, values in grid.items()
    }


def load_config(path, overrides: dict = None) -> RunConfig:
    """Parse a run configuration file; overrides (e.g. CLI flags) win."""
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, overrides or {})


def config_from_dict(raw: dict, overrides: dict = None) -> RunConfig:
    raw = dict(raw)
    raw.update(overrides or {})
    config = RunConfig()
    try:
        config.seed = int(raw.get("seed", config.seed))
        config.test_fraction = float(raw.get("test_fraction", config.test_fraction))
        config.recency_days = int(raw.get("recency_days", config.recency_days))
        config.smote_k = int(raw.get("smote_k", config.smote_k))
        config.tie_epsilon = float(raw.get("tie_epsilon", config.tie_epsilon))
        config.n_trees_outliers = int(raw.get("n_trees_outliers", config.n_trees_outliers))
        config.jobs = int(raw.get("jobs", config.jobs))
        config.families = list(raw.get("families", FAMILY_COST_ORDER))
        for family in config.families:
            if family not in DEFAULT_GRIDS:
                raise ConfigError(f"unknown family {family!r}")
        cv_raw = raw.get("cv", {})
        config.cv = CvSpec(
            k=int(cv_raw.get("k", 10)),
            repeats=int(cv_raw.get("repeats", 10)),
            scoring=str(cv_raw.get("scoring", "accuracy")),
        )
        config.cv.validate()
        cont_raw = raw.get("contamination", {})
        for slug, value in cont_raw.items():
            stage = LifecycleStage.from_name(slug)
            config.contamination[stage] = float(value)
        grids_raw = raw.get("grids", {})
        for family, grid in grids_raw.items():
            if family not in DEFAULT_GRIDS:
                raise ConfigError(f"unknown family {family!r} in grids")
            config.grids[family] = _decode_grid(family, grid)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dump_config(config: RunConfig) -> str:
    """Emit a TOML document that load_config parses back identically."""
    lines = [
        f"seed = {config.seed}",
        f"test_fraction = {_toml_value(config.test_fraction)}",
        f"recency_days = {config.recency_days}",
        f"smote_k = {config.smote_k}",
        f"tie_epsilon = {_toml_value(config.tie_epsilon)}",
        f"n_trees_outliers = {config.n_trees_outliers}",
        f"jobs = {config.jobs}",
        f"families = {_toml_value(config.families)}",
        "",
        "[cv]",
        f"k = {config.cv.k}",
        f"repeats = {config.cv.repeats}",
        f'scoring = "{config.cv.scoring}"',
        "",
        "[contamination]",
    ]
    for stage, value in sorted(config.contamination.items()):
        lines.append(f"{LifecycleStage(stage).slug()} = {_toml_value(float(value))}")
    for family in config.families:
        lines.append("")
        lines.append(f"[grids.{family}]")
        for key, values in _encode_grid(config.grids[family]).items():
            lines.append(f"{key} = {_toml_value(values)}")
    return "\n".join(lines) + "\n"
