"""JSON model files.

Schema::

    {
      "n": 2,
      "phi": [[0.8, 0], [0.5, 0.8]]          # or {"triplets": [[i, j, v], ...]}
      "sigma": [0.2, 0.2],
      "safe_lo": [-1, -1], "safe_hi": [1, 1],
      "horizon": 10,
      "epsilon": 0.2                          # or "bins_per_dim": [50, 50]
    }

Validation errors name the line of the offending field.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

from .errors import ValidationError
from .model import ProcessModel, SafeSet, build_linear_gaussian

REQUIRED = ("n", "phi", "sigma", "safe_lo", "safe_hi", "horizon")
CHOICE = ("epsilon", "bins_per_dim")


@dataclass(frozen=True, eq=False)
class ModelFile:
    model: ProcessModel
    safe_set: SafeSet
    horizon: int
    epsilon: float | None
    bins_per_dim: tuple[int, ...] | None
    raw: dict


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(text: str, key: str | None, message: str):
    line = _line_of(text, key) if key else None
    where = f"line {line}: " if line else ""
    raise ValidationError(f"{where}{message}")


def _number_list(text, raw, key, length):
    value = raw[key]
    if not isinstance(value, list) or len(value) != length:
        _fail(text, key, f"'{key}' must be an array of {length} numbers")
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            _fail(text, key, f"'{key}' must contain finite numbers, got {v!r}")
    return [float(v) for v in value]


def parse_model_text(text: str) -> ModelFile:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ValidationError("line 1: model file must hold a JSON object")
    unknown = sorted(set(raw) - set(REQUIRED) - set(CHOICE))
    if unknown:
        _fail(text, unknown[0], f"unknown field '{unknown[0]}'")
    for key in REQUIRED:
        if key not in raw:
            raise ValidationError(f"missing required field '{key}'")
    present = [k for k in CHOICE if k in raw]
    if len(present) != 1:
        raise ValidationError("exactly one of 'epsilon' or 'bins_per_dim' is required")

    n = raw["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        _fail(text, "n", "'n' must be a positive integer")
    sigma = _number_list(text, raw, "sigma", n)
    if any(v <= 0 for v in sigma):
        _fail(text, "sigma", "'sigma' entries must be positive")
    lo = _number_list(text, raw, "safe_lo", n)
    hi = _number_list(text, raw, "safe_hi", n)
    horizon = raw["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 0:
        _fail(text, "horizon", "'horizon' must be a nonnegative integer")

    phi = raw["phi"]
    if isinstance(phi, list):
        if len(phi) != n or any(not isinstance(r, list) or len(r) != n for r in phi):
            _fail(text, "phi", f"dense 'phi' must be {n} rows of {n} numbers")
    elif not isinstance(phi, dict):
        _fail(text, "phi", "'phi' must be a dense array or {\"triplets\": [...]}")
    try:
        model = build_linear_gaussian(phi, sigma)
    except (ValidationError, TypeError, ValueError) as exc:
        _fail(text, "phi", str(exc))
    try:
        A = SafeSet(lo, hi)
    except ValidationError as exc:
        _fail(text, "safe_lo", str(exc))

    eps = bins = None
    if "epsilon" in raw:
        eps = raw["epsilon"]
        if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not eps > 0:
            _fail(text, "epsilon", "'epsilon' must be a positive number")
        eps = float(eps)
    else:
        bins = raw["bins_per_dim"]
        if (
            not isinstance(bins, list)
            or len(bins) != n
            or any(isinstance(b, bool) or not isinstance(b, int) or b < 1 for b in bins)
        ):
            _fail(text, "bins_per_dim", f"'bins_per_dim' must be {n} positive integers")
        bins = tuple(bins)
    return ModelFile(model, A, horizon, eps, bins, raw)


def load_model_file(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return parse_model_text(fh.read())
