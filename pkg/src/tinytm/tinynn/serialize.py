"""Line-oriented text format for network weights.

::

    TGTM-WEIGHTS v1
    layer conv1.weight 4 2 8
    <64 values, row-major>
    layer conv1.bias 4
    ...

Values are float32 written as the shortest decimal that reads back to the
same float32.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import MAX_PARAMS, REFERENCE, Architecture, BudgetError, ModelWeights, ShapeError

HEADER = "TGTM-WEIGHTS v1"


class WeightsFormatError(ValueError):
    pass


def dumps(w: ModelWeights) -> str:
    lines = [HEADER]
    for name, arr in w.tensors.items():
        arr32 = np.asarray(arr, dtype=np.float32)
        lines.append(f"layer {name} " + " ".join(str(d) for d in arr32.shape))
        lines.append(" ".join(str(v) for v in arr32.ravel()))
    return "\n".join(lines) + "\n"


def save_weights(w: ModelWeights, path) -> None:
    Path(path).write_text(dumps(w))


def loads(text: str, arch: Architecture = REFERENCE) -> ModelWeights:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("TGTM-WEIGHTS"):
        raise WeightsFormatError("missing TGTM-WEIGHTS header")
    if lines[0].strip() != HEADER:
        raise WeightsFormatError(f"unsupported version {lines[0].strip()!r}, expected {HEADER!r}")

    layers: list[tuple[str, tuple, list]] = []
    for line_no, line in enumerate(lines[1:], start=2):
        toks = line.split()
        if not toks:
            continue
        if toks[0] == "layer":
            if len(toks) < 3:
                raise WeightsFormatError(f"line {line_no}: layer line needs a name and shape")
            try:
                shape = tuple(int(t) for t in toks[2:])
            except ValueError:
                raise WeightsFormatError(f"line {line_no}: bad shape for layer {toks[1]}") from None
            if any(d < 0 for d in shape):
                raise WeightsFormatError(f"line {line_no}: negative dimension in layer {toks[1]}")
            layers.append((toks[1], shape, []))
            continue
        if not layers:
            raise WeightsFormatError(f"line {line_no}: values before the first layer line")
        name = layers[-1][0]
        try:
            layers[-1][2].extend(np.float32(t) for t in toks)
        except ValueError:
            raise WeightsFormatError(f"line {line_no}: non-numeric value in layer {name}") from None

    total = 0
    tensors = {}
    for name, shape, vals in layers:
        size = int(np.prod(shape))
        if len(vals) != size:
            raise WeightsFormatError(
                f"layer {name}: expected {size} values for shape {shape}, found {len(vals)}"
            )
        if name in tensors:
            raise WeightsFormatError(f"layer {name} appears twice")
        total += size
        tensors[name] = np.array(vals, dtype=np.float32).reshape(shape)
    if total > MAX_PARAMS:
        raise BudgetError(f"{total} parameters exceed the budget of {MAX_PARAMS}")
    try:
        return ModelWeights(tensors, arch)
    except ShapeError as exc:
        raise ShapeError(f"weights do not fit the architecture: {exc}") from None


def load_weights(path, arch: Architecture = REFERENCE) -> ModelWeights:
    return loads(Path(path).read_text(), arch)
