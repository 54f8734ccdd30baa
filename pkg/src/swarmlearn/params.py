"""Flattened model parameters and the arithmetic used to merge them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyInput, NonFinite, ShapeMismatch


@dataclass(frozen=True)
class ShapeSpec:
    """Tensor shapes packed, in order, into one flat parameter vector."""

    layer_dims: tuple[tuple[int, ...], ...]
    total_len: int = field(init=False)

    def __post_init__(self):
        dims = tuple(tuple(int(x) for x in d) for d in self.layer_dims)
        if not dims or any(len(d) == 0 or min(d) < 1 for d in dims):
            raise ShapeMismatch(f"invalid tensor shapes {self.layer_dims!r}")
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "total_len", sum(math.prod(d) for d in dims))

    @classmethod
    def flat(cls, n: int) -> "ShapeSpec":
        return cls(((n,),))

    def unpack(self, values: np.ndarray) -> list[np.ndarray]:
        """Split a flat array into views with the declared shapes."""
        out, offset = [], 0
        for d in self.layer_dims:
            size = math.prod(d)
            out.append(values[offset:offset + size].reshape(d))
            offset += size
        return out

    def to_json(self):
        return [list(d) for d in self.layer_dims]

    @classmethod
    def from_json(cls, obj) -> "ShapeSpec":
        return cls(tuple(tuple(d) for d in obj))


class WeightVector:
    """Immutable float64 parameter vector tagged with its shape.

    Construction copies the input, rejects NaN/Inf and freezes the array.
    """

    __slots__ = ("values", "shape")

    def __init__(self, values, shape: ShapeSpec | None = None):
        arr = np.array(values, dtype=np.float64).reshape(-1)
        if shape is None:
            shape = ShapeSpec.flat(arr.size)
        if arr.size != shape.total_len:
            raise ShapeMismatch(f"{arr.size} values for shape with {shape.total_len} entries")
        if not np.isfinite(arr).all():
            raise NonFinite("weight vector contains NaN or Inf")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "shape", shape)

    def __setattr__(self, name, value):
        raise AttributeError("WeightVector is immutable")

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.shape, self.values.tobytes()))

    def __repr__(self):
        return f"WeightVector(len={self.values.size}, dims={self.shape.layer_dims})"

    def tensors(self) -> list[np.ndarray]:
        return self.shape.unpack(self.values)

    def tolist(self) -> list[float]:
        return self.values.tolist()


def _check_same_shape(vectors: Sequence[WeightVector]) -> ShapeSpec:
    if not vectors:
        raise EmptyInput("no vectors given")
    shape = vectors[0].shape
    for k, v in enumerate(vectors[1:], start=1):
        if v.shape != shape:
            raise ShapeMismatch(f"vector {k} has dims {v.shape.layer_dims}, expected {shape.layer_dims}")
    return shape


def _pairwise_sum(terms: list[np.ndarray]) -> np.ndarray:
    while len(terms) > 1:
        paired = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            paired.append(terms[-1])
        terms = paired
    return terms[0]


def linear_combine(vectors: Sequence[WeightVector], coeffs: Sequence[float]) -> WeightVector:
    """Return ``sum(c_k * v_k) / sum(c_k)`` over nonnegative coefficients.

    Inputs are put in a canonical order (by coefficient, then by raw bytes)
    before a pairwise summation, so jointly permuting ``vectors`` and
    ``coeffs`` gives a bit-identical result.
    """
    shape = _check_same_shape(vectors)
    if len(coeffs) != len(vectors):
        raise ShapeMismatch(f"{len(coeffs)} coefficients for {len(vectors)} vectors")
    c = [float(x) for x in coeffs]
    if not all(math.isfinite(x) for x in c):
        raise NonFinite("coefficient is not finite")
    if any(x < 0 for x in c):
        raise ValueError("coefficients must be nonnegative")
    if len(vectors) == 1:
        if c[0] <= 0:
            raise ValueError("sum of coefficients must be positive")
        return vectors[0]

    order = sorted(range(len(c)), key=lambda k: (c[k], vectors[k].values.tobytes()))
    total = math.fsum(c)
    if total <= 0:
        raise ValueError("sum of coefficients must be positive")
    terms = [(c[k] / total) * vectors[k].values for k in order]
    return WeightVector(_pairwise_sum(terms), shape)


def l2_distance(a: WeightVector, b: WeightVector) -> float:
    if a.shape != b.shape:
        raise ShapeMismatch(f"dims {a.shape.layer_dims} vs {b.shape.layer_dims}")
    return float(np.linalg.norm(a.values - b.values))
