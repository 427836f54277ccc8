"""Colour-weak compensation and simulation in CIELUV."""

from ._core import (
    ConfigError,
    Error,
    IsometryMap,
    Metric,
    MetricField,
    NormalChart,
    ParseError,
    UncoveredPoint,
    chroma_area_expansion,
    compensate,
    grid_point_ratio,
    luv_to_srgb,
    mean_luv,
    pearson,
    read_png,
    run_cli,
    srgb_to_luv,
    write_png,
)

__all__ = [
    "ConfigError",
    "Error",
    "IsometryMap",
    "Metric",
    "MetricField",
    "NormalChart",
    "ParseError",
    "UncoveredPoint",
    "chroma_area_expansion",
    "compensate",
    "grid_point_ratio",
    "luv_to_srgb",
    "mean_luv",
    "pearson",
    "read_png",
    "run_cli",
    "srgb_to_luv",
    "write_png",
]
