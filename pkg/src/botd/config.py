"""Run configuration shared by the command-line tools."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

# short side the test images are resized to
CURVED_IMAGE_SCALE = 640
QUAD_IMAGE_SCALE = 736


@dataclass
class RunConfig:
    cm_scale: float = 0.5
    bin_threshold: float = 0.5
    min_area: int = 16
    image_scale: int = CURVED_IMAGE_SCALE
    seed: int = 0
    jobs: int = 1

    def validate(self) -> "RunConfig":
        if not 0.0 < self.cm_scale < 1.0:
            raise ValueError(f"cm_scale must lie in (0, 1), got {self.cm_scale}")
        if not 0.0 <= self.bin_threshold < 1.0:
            raise ValueError(f"bin_threshold must lie in [0, 1), got {self.bin_threshold}")
        if self.min_area < 0:
            raise ValueError("min_area must be non-negative")
        if self.image_scale <= 0:
            raise ValueError("image_scale must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        return self

    @classmethod
    def from_namespace(cls, ns) -> "RunConfig":
        kw = {f.name: getattr(ns, f.name) for f in fields(cls) if getattr(ns, f.name, None) is not None}
        return cls(**kw).validate()


def default_image_scale(fmt: str) -> int:
    return QUAD_IMAGE_SCALE if fmt == "icdar2015" else CURVED_IMAGE_SCALE


def load_config_file(path) -> dict:
    """Flag defaults from a JSON object; keys may use dashes or underscores."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}
