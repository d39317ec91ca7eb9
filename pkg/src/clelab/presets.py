"""Named analytic fields used by run configurations.

A descriptor is either a short string ``"name[:amplitude[:mode]]"`` (e.g.
``"cosy:0.5"``, ``"random8"``) or ``"file:<path>"`` pointing at a CSV or
CLF2 field file.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .spectral import Grid2D, ScalarField2D, read_field_clf2, read_field_csv

__all__ = ["PresetError", "parse_descriptor", "build_field", "PRESETS"]


class PresetError(ValueError):
    pass


def _shape(fn):
    return lambda grid, amp, mode, rng: ScalarField2D.from_function(grid, lambda x, y: amp * fn(x, y, mode))


PRESETS = {
    "zero": lambda grid, amp, mode, rng: ScalarField2D.zeros(grid),
    "cosx": _shape(lambda x, y, m: np.cos(m * x)),
    "cosy": _shape(lambda x, y, m: np.cos(m * y)),
    "sinx": _shape(lambda x, y, m: np.sin(m * x)),
    "siny": _shape(lambda x, y, m: np.sin(m * y)),
    "cosxsiny": _shape(lambda x, y, m: np.cos(m * x) * np.sin(m * y)),
    "sinxsiny": _shape(lambda x, y, m: np.sin(m * x) * np.sin(m * y)),
    # 0.3 cos x + 0.4 cos 2y at unit amplitude
    "mixed": _shape(lambda x, y, m: 0.3 * np.cos(m * x) + 0.4 * np.cos(2 * m * y)),
}

_RANDOM = re.compile(r"random(\d+)$")


def parse_descriptor(desc: str) -> dict:
    if not isinstance(desc, str) or not desc.strip():
        raise PresetError(f"field descriptor must be a non-empty string, got {desc!r}")
    if desc.startswith("file:"):
        return {"file": desc[5:]}
    parts = desc.split(":")
    if len(parts) > 3:
        raise PresetError(f"descriptor {desc!r} has too many ':' fields")
    name = parts[0].strip()
    if name not in PRESETS and not _RANDOM.match(name):
        raise PresetError(f"unknown field preset {name!r}")
    out = {"preset": name}
    try:
        if len(parts) > 1:
            out["amplitude"] = float(parts[1])
        if len(parts) > 2:
            out["mode"] = int(parts[2])
    except ValueError:
        raise PresetError(f"descriptor {desc!r}: amplitude must be a number and mode an integer") from None
    return out


def build_field(grid: Grid2D, desc: dict, rng: np.random.Generator | None = None,
                base_dir: Path | None = None) -> ScalarField2D:
    """Realize a parsed descriptor.  For ``random<K>`` the amplitude is the
    target ``int f^2 dA`` (default 1)."""
    if "file" in desc:
        path = Path(desc["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        field = read_field_clf2(path) if path.suffix.lower() == ".clf2" else read_field_csv(path)
        if field.grid != grid:
            raise PresetError(f"{path}: field grid {field.grid.shape} differs from run grid {grid.shape}")
        return field
    name = desc["preset"]
    amp = float(desc.get("amplitude", 1.0))
    mode = int(desc.get("mode", 1))
    if not np.isfinite(amp):
        raise PresetError("amplitude must be finite")
    if mode < 1 or mode > min(grid.nx, grid.ny) // 4:
        raise PresetError(f"mode {mode} out of range for {grid}")
    m = _RANDOM.match(name)
    if m:
        from .spectral import random_bandlimited

        if rng is None:
            rng = np.random.default_rng(0)
        if amp <= 0:
            raise PresetError("random preset needs a positive amplitude (target int f^2 dA)")
        return random_bandlimited(grid, rng, int(m.group(1)), norm=amp)
    return PRESETS[name](grid, amp, mode, rng)
