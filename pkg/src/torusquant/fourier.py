"""Truncated Fourier-lattice functions on the torus T^m.

A basis function psi_n = exp(i n.phi) is labelled by an integer tuple ``n``.
Tuples compare lexicographically, which fixes the enumeration order of a
:class:`TruncationWindow` and the order of serialized terms.
"""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import jsonfmt
from .errors import (
    AxisOutOfRange,
    DimensionMismatch,
    ParseError,
    RepresentationMismatch,
)

MultiIndex = tuple  # tuple[int, ...]


def as_index(n, dim=None) -> MultiIndex:
    idx = tuple(int(v) for v in n)
    if any(int(v) != v for v in n):
        raise ValueError(f"non-integer multi-index {n!r}")
    if not idx:
        raise DimensionMismatch("multi-index must have at least one entry")
    if dim is not None and len(idx) != dim:
        raise DimensionMismatch(f"multi-index {idx} has length {len(idx)}, expected {dim}")
    return idx


def check_axis(k, dim):
    if not 0 <= k < dim:
        raise AxisOutOfRange(f"axis {k} out of range for dimension {dim}")


@dataclass(frozen=True)
class TruncationWindow:
    """All multi-indices with ``|n_k| <= n_max`` on every axis."""

    m: int
    n_max: int

    def __post_init__(self):
        if self.m < 1:
            raise DimensionMismatch("window dimension must be >= 1")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")

    @property
    def side(self) -> int:
        return 2 * self.n_max + 1

    @property
    def size(self) -> int:
        return self.side**self.m

    def indices(self) -> np.ndarray:
        """Integer array of shape (size, m), rows in lexicographic order (read-only)."""
        return _window_indices(self.m, self.n_max)

    def contains(self, n) -> bool:
        return len(n) == self.m and all(abs(v) <= self.n_max for v in n)

    def position(self, n) -> int:
        if not self.contains(n):
            raise KeyError(n)
        pos = 0
        for v in n:
            pos = pos * self.side + (v + self.n_max)
        return pos

    def positions(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`position`; returns (positions, inside-mask)."""
        arr = np.asarray(arr, dtype=np.int64)
        inside = np.all(np.abs(arr) <= self.n_max, axis=-1)
        shifted = arr + self.n_max
        pos = np.zeros(arr.shape[:-1], dtype=np.int64)
        for k in range(self.m):
            pos = pos * self.side + shifted[..., k]
        return np.where(inside, pos, -1), inside

    def interior_mask(self, margin: int) -> np.ndarray:
        """Basis states at distance >= margin from the window edge."""
        return np.all(np.abs(self.indices()) <= self.n_max - margin, axis=1)


@functools.lru_cache(maxsize=64)
def _window_indices(m, n_max):
    rng = range(-n_max, n_max + 1)
    arr = np.array(list(itertools.product(rng, repeat=m)), dtype=np.int64).reshape(-1, m)
    arr.setflags(write=False)
    return arr


class FourierPolynomial:
    """Finite sum  sum_n c_n exp(i n.phi)  with no stored zero coefficient.

    Instances are immutable; arithmetic returns new objects.
    """

    __slots__ = ("_dim", "_coeffs")

    def __init__(self, dim: int, coeffs: Mapping | Iterable = ()):
        if dim < 1:
            raise DimensionMismatch("dimension must be >= 1")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        store = {}
        for n, c in items:
            n = as_index(n, dim)
            c = complex(c)
            if c != 0:
                store[n] = store.get(n, 0) + c
                if store[n] == 0:
                    del store[n]
        object.__setattr__(self, "_dim", dim)
        object.__setattr__(self, "_coeffs", store)

    def __setattr__(self, name, value):
        raise AttributeError("FourierPolynomial is immutable")

    @classmethod
    def _raw(cls, dim, store):
        obj = cls.__new__(cls)
        object.__setattr__(obj, "_dim", dim)
        object.__setattr__(obj, "_coeffs", store)
        return obj

    # construction helpers
    @classmethod
    def zero(cls, dim):
        return cls(dim)

    @classmethod
    def constant(cls, dim, c=1.0):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def basis(cls, n, c=1.0):
        n = as_index(n)
        return cls(len(n), {n: c})

    @classmethod
    def cos(cls, n, amplitude=1.0):
        """amplitude * cos(n.phi)"""
        n = as_index(n)
        neg = tuple(-v for v in n)
        return cls(len(n), [(n, amplitude / 2), (neg, amplitude / 2)])

    @classmethod
    def sin(cls, n, amplitude=1.0):
        n = as_index(n)
        neg = tuple(-v for v in n)
        return cls(len(n), [(n, amplitude / 2j), (neg, -amplitude / 2j)])

    # container protocol
    @property
    def dim(self) -> int:
        return self._dim

    @property
    def coeffs(self) -> dict:
        return dict(self._coeffs)

    def __getitem__(self, n):
        return self._coeffs.get(tuple(n), 0j)

    def __len__(self):
        return len(self._coeffs)

    def __iter__(self):
        return iter(sorted(self._coeffs))

    def items(self):
        return [(n, self._coeffs[n]) for n in sorted(self._coeffs)]

    def is_zero(self) -> bool:
        return not self._coeffs

    def bandwidth(self) -> int:
        return max((max(abs(v) for v in n) for n in self._coeffs), default=0)

    def support_axes(self) -> set[int]:
        return {k for n in self._coeffs for k, v in enumerate(n) if v != 0}

    def is_real(self, tol=0.0) -> bool:
        for n, c in self._coeffs.items():
            partner = self[tuple(-v for v in n)]
            if abs(partner - c.conjugate()) > tol:
                return False
        return True

    # arithmetic
    def _check(self, other):
        if not isinstance(other, FourierPolynomial):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions {self.dim} and {other.dim} differ")
        return other

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = FourierPolynomial.constant(self.dim, other)
        if self._check(other) is NotImplemented:
            return NotImplemented
        store = dict(self._coeffs)
        for n, c in other._coeffs.items():
            v = store.get(n, 0) + c
            if v == 0:
                store.pop(n, None)
            else:
                store[n] = v
        return FourierPolynomial._raw(self.dim, store)

    __radd__ = __add__

    def __neg__(self):
        return FourierPolynomial._raw(self.dim, {n: -c for n, c in self._coeffs.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            return self + (-other)
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s):
        s = complex(s)
        if s == 0:
            return FourierPolynomial(self.dim)
        store = {}
        for n, c in self._coeffs.items():
            v = c * s
            if v != 0:
                store[n] = v
        return FourierPolynomial._raw(self.dim, store)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        if self._check(other) is NotImplemented:
            return NotImplemented
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __truediv__(self, s):
        return self.scale(1 / complex(s))

    def __pow__(self, k: int):
        if k < 0 or int(k) != k:
            raise ValueError("only nonnegative integer powers are supported")
        out = FourierPolynomial.constant(self.dim, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, FourierPolynomial):
            return NotImplemented
        return self.dim == other.dim and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.dim, frozenset(self._coeffs.items())))

    def conj(self):
        """Pointwise complex conjugate of the function."""
        return FourierPolynomial._raw(
            self.dim, {tuple(-v for v in n): c.conjugate() for n, c in self._coeffs.items()}
        )

    def derivative(self, k):
        return partial_phi(self, k)

    def max_abs_diff(self, other) -> float:
        keys = set(self._coeffs) | set(other._coeffs)
        return max((abs(self[n] - other[n]) for n in keys), default=0.0)

    # evaluation
    def evaluate(self, phi, shift=None):
        """Value at angles ``phi`` (shape (..., m)).

        ``shift`` adds a per-axis exponent offset (0 or 1/2) for half-form bases.
        """
        phi = np.asarray(phi, dtype=float)
        if phi.shape[-1] != self.dim:
            raise DimensionMismatch(f"angles have {phi.shape[-1]} components, expected {self.dim}")
        if not self._coeffs:
            return np.zeros(phi.shape[:-1], dtype=complex)
        keys = np.array(list(self._coeffs), dtype=float)
        if shift is not None:
            keys = keys + np.asarray(shift, dtype=float)
        vals = np.array(list(self._coeffs.values()))
        return np.exp(1j * phi @ keys.T) @ vals

    def __call__(self, phi):
        return self.evaluate(phi)

    def to_vector(self, window: TruncationWindow) -> tuple[np.ndarray, float]:
        """Coefficients over the window basis plus the dropped amplitude."""
        if window.m != self.dim:
            raise DimensionMismatch("window and polynomial dimensions differ")
        vec = np.zeros(window.size, dtype=complex)
        leak = 0.0
        for n, c in self._coeffs.items():
            if window.contains(n):
                vec[window.position(n)] = c
            else:
                leak += abs(c)
        return vec, leak

    @classmethod
    def from_vector(cls, window: TruncationWindow, vec) -> FourierPolynomial:
        idx = window.indices()
        vec = np.asarray(vec, dtype=complex)
        return cls(window.m, [(tuple(idx[i]), vec[i]) for i in np.flatnonzero(vec)])

    # serialization
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "terms": [
                {"n": list(n), "re": float(c.real), "im": float(c.imag)} for n, c in self.items()
            ],
        }

    @classmethod
    def from_dict(cls, data) -> FourierPolynomial:
        try:
            dim = int(data["dim"])
            terms = [(t["n"], complex(float(t["re"]), float(t["im"]))) for t in data["terms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed Fourier polynomial: {exc}") from exc
        return cls(dim, terms)

    def to_json(self) -> str:
        return jsonfmt.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> FourierPolynomial:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc)) from exc
        return cls.from_dict(data)

    def __repr__(self):
        body = " + ".join(f"({c:.6g})psi{list(n)}" for n, c in self.items()) or "0"
        return f"FourierPolynomial(dim={self.dim}: {body})"


@dataclass(frozen=True)
class WaveFunction:
    """A state on T^m; ``half_shift[j]`` offsets the basis exponent on axis j by 1/2."""

    poly: FourierPolynomial
    half_shift: tuple = None

    def __post_init__(self):
        hs = self.half_shift
        hs = (False,) * self.poly.dim if hs is None else tuple(bool(v) for v in hs)
        if len(hs) != self.poly.dim:
            raise DimensionMismatch("half_shift length must equal the dimension")
        object.__setattr__(self, "half_shift", hs)

    @property
    def dim(self):
        return self.poly.dim

    @property
    def shift(self) -> np.ndarray:
        return np.array([0.5 if h else 0.0 for h in self.half_shift])

    def evaluate(self, phi):
        return self.poly.evaluate(phi, shift=self.shift)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(c) ** 2 for _, c in self.poly.items())))

    def __add__(self, other):
        _compatible(self, other)
        return WaveFunction(self.poly + other.poly, self.half_shift)

    def __sub__(self, other):
        _compatible(self, other)
        return WaveFunction(self.poly - other.poly, self.half_shift)

    def __mul__(self, other):
        if isinstance(other, FourierPolynomial):
            return WaveFunction(multiply(other, self.poly), self.half_shift)
        return WaveFunction(self.poly.scale(other), self.half_shift)

    __rmul__ = __mul__

    def to_dict(self):
        d = self.poly.to_dict()
        d["half_shift"] = list(self.half_shift)
        return d

    @classmethod
    def from_dict(cls, data):
        poly = FourierPolynomial.from_dict(data)
        return cls(poly, data.get("half_shift"))


def _compatible(a: WaveFunction, b: WaveFunction):
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")
    if a.half_shift != b.half_shift:
        raise RepresentationMismatch("wavefunctions live in different half-form bases")


def inner_product(a, b) -> complex:
    """<a|b> = sum_n a_n conj(b_n); conjugate-linear in the second slot."""
    if isinstance(a, FourierPolynomial):
        a = WaveFunction(a)
    if isinstance(b, FourierPolynomial):
        b = WaveFunction(b)
    _compatible(a, b)
    small, big = (a.poly, b.poly) if len(a.poly) <= len(b.poly) else (b.poly, a.poly)
    total = 0j
    for n, _ in small.items():
        total += a.poly[n] * b.poly[n].conjugate()
    return total


def multiply(f: FourierPolynomial, g: FourierPolynomial) -> FourierPolynomial:
    """Pointwise product, i.e. convolution of coefficient maps."""
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimensions {f.dim} and {g.dim} differ")
    store: dict = {}
    for n, c in f.items():
        for n2, c2 in g.items():
            key = tuple(a + b for a, b in zip(n, n2))
            store[key] = store.get(key, 0) + c * c2
    return FourierPolynomial._raw(f.dim, {n: c for n, c in store.items() if c != 0})


def partial_phi(f, k: int):
    """Angle derivative along axis ``k`` (0-based).

    On a :class:`WaveFunction` the half-form offset enters as ``n_k + 1/2``.
    """
    if isinstance(f, WaveFunction):
        check_axis(k, f.dim)
        off = 0.5 if f.half_shift[k] else 0.0
        store = {n: 1j * (n[k] + off) * c for n, c in f.poly.items()}
        return WaveFunction(FourierPolynomial._raw(f.dim, {n: c for n, c in store.items() if c != 0}), f.half_shift)
    check_axis(k, f.dim)
    store = {}
    for n, c in f.items():
        if n[k] != 0:
            store[n] = 1j * n[k] * c
    return FourierPolynomial._raw(f.dim, store)
