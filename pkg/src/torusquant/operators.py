"""Quantized operators for observables affine in the action variables.

Conventions: axes are 0-based in Python; the expression grammar names them
``I1..Im`` and ``phi1..phim``.  With a representation (lambda, half_shift)
the action operator acts on psi_n as  n_k + shift_k - lambda_k, shift_k in {0, 1/2}.
The polarized operator of  f = a^k I_k + b  is

    f^ = -i a^k d_k - (i/2) (d_k a^k) - lambda_k a^k + b .
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import expr as ex
from . import jsonfmt
from .errors import (
    DimensionMismatch,
    NotAffine,
    RepresentationMismatch,
    UnsupportedExpression,
    WindowMismatch,
)
from .fourier import (
    FourierPolynomial,
    TruncationWindow,
    WaveFunction,
    as_index,
    check_axis,
    multiply,
    partial_phi,
)


@dataclass(frozen=True)
class Representation:
    """Flat-connection offsets ``lam`` and per-axis half-form flags."""

    lam: tuple
    half_shift: tuple = None

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        if not lam:
            raise DimensionMismatch("representation needs at least one axis")
        hs = self.half_shift
        hs = (False,) * len(lam) if hs is None else tuple(bool(v) for v in hs)
        if len(hs) != len(lam):
            raise DimensionMismatch(
                f"half_shift has length {len(hs)} but lambda has length {len(lam)}"
            )
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "half_shift", hs)

    @classmethod
    def trivial(cls, m):
        return cls((0.0,) * m)

    @property
    def dim(self) -> int:
        return len(self.lam)

    @property
    def shift(self) -> np.ndarray:
        return np.array([0.5 if h else 0.0 for h in self.half_shift])

    def action_values(self, indices: np.ndarray) -> np.ndarray:
        """Eigenvalues of every action operator on the given basis rows."""
        indices = np.asarray(indices, dtype=float)
        return (indices + self.shift) - np.asarray(self.lam)

    def gauge_equivalent(self, other: Representation, tol=1e-12) -> bool:
        """Same half-form flags and lambda differing by an integer vector."""
        if self.dim != other.dim or self.half_shift != other.half_shift:
            return False
        diff = np.asarray(self.lam) - np.asarray(other.lam)
        return bool(np.all(np.abs(diff - np.round(diff)) <= tol))

    def without_half_shift(self) -> Representation:
        """The equivalent representation on single-valued functions."""
        lam = tuple(l - 0.5 if h else l for l, h in zip(self.lam, self.half_shift))
        return Representation(lam)

    def reduced(self) -> Representation:
        """Representative with every lambda in [0, 1)."""
        return Representation(tuple(l - math.floor(l) for l in self.lam), self.half_shift)


# ----------------------------------------------------------------------------
# functions on the annulus V x T^m: polynomials in I with Fourier coefficients


class AnnulusFunction:
    """Finite map  I-multidegree -> FourierPolynomial  (zero entries dropped)."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping | None = None):
        self.dim = dim
        store = {}
        for deg, poly in (terms or {}).items():
            deg = tuple(int(d) for d in deg)
            if len(deg) != dim or any(d < 0 for d in deg):
                raise DimensionMismatch(f"bad action multidegree {deg} for dimension {dim}")
            if not isinstance(poly, FourierPolynomial):
                poly = FourierPolynomial.constant(dim, poly)
            if poly.dim != dim:
                raise DimensionMismatch("coefficient dimension differs from annulus dimension")
            if not poly.is_zero():
                store[deg] = poly
        self.terms = store

    @classmethod
    def constant(cls, dim, c):
        return cls(dim, {(0,) * dim: FourierPolynomial.constant(dim, c)})

    @classmethod
    def angle_function(cls, poly: FourierPolynomial):
        return cls(poly.dim, {(0,) * poly.dim: poly})

    @classmethod
    def action(cls, k, dim):
        check_axis(k, dim)
        deg = tuple(1 if j == k else 0 for j in range(dim))
        return cls(dim, {deg: FourierPolynomial.constant(dim, 1.0)})

    def degree(self) -> int:
        return max((sum(d) for d in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    def depends_on_actions(self) -> bool:
        return any(sum(d) > 0 for d in self.terms)

    def _check(self, other):
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions {self.dim} and {other.dim} differ")

    def __add__(self, other):
        if not isinstance(other, AnnulusFunction):
            other = AnnulusFunction.constant(self.dim, other)
        self._check(other)
        store = dict(self.terms)
        for d, p in other.terms.items():
            store[d] = store[d] + p if d in store else p
        return AnnulusFunction(self.dim, store)

    __radd__ = __add__

    def __neg__(self):
        return AnnulusFunction(self.dim, {d: -p for d, p in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return AnnulusFunction(self.dim, {d: p.scale(other) for d, p in self.terms.items()})
        if isinstance(other, FourierPolynomial):
            other = AnnulusFunction.angle_function(other)
        if not isinstance(other, AnnulusFunction):
            return NotImplemented
        self._check(other)
        store: dict = {}
        for d1, p1 in self.terms.items():
            for d2, p2 in other.terms.items():
                d = tuple(a + b for a, b in zip(d1, d2))
                prod = multiply(p1, p2)
                store[d] = store[d] + prod if d in store else prod
        return AnnulusFunction(self.dim, store)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __eq__(self, other):
        if not isinstance(other, AnnulusFunction):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def d_angle(self, k) -> AnnulusFunction:
        check_axis(k, self.dim)
        return AnnulusFunction(self.dim, {d: partial_phi(p, k) for d, p in self.terms.items()})

    def d_action(self, k) -> AnnulusFunction:
        check_axis(k, self.dim)
        store = {}
        for d, p in self.terms.items():
            if d[k]:
                nd = tuple(v - 1 if j == k else v for j, v in enumerate(d))
                store[nd] = p.scale(d[k])
        return AnnulusFunction(self.dim, store)

    def max_abs_diff(self, other) -> float:
        zero = FourierPolynomial(self.dim)
        keys = set(self.terms) | set(other.terms)
        return max(
            (self.terms.get(d, zero).max_abs_diff(other.terms.get(d, zero)) for d in keys),
            default=0.0,
        )

    def evaluate(self, phi, actions):
        phi = np.asarray(phi, dtype=float)
        actions = np.asarray(actions, dtype=float)
        total = 0
        for d, p in self.terms.items():
            mono = np.prod(actions ** np.asarray(d), axis=-1)
            total = total + mono * p.evaluate(phi)
        return total

    @classmethod
    def from_expr(cls, e, dim, env: Mapping | None = None) -> AnnulusFunction:
        """Convert an expression in ``I1..Im`` and ``phi1..phim``.

        Angles may only appear inside cos/sin of integer combinations of the
        ``phi`` symbols; any other symbol must be bound to a number in ``env``.
        """
        if isinstance(e, str):
            e = ex.parse(e)
        return _to_annulus(e, dim, dict(env or {}))

    def __repr__(self):
        return f"AnnulusFunction(dim={self.dim}, terms={self.terms!r})"


def _symbol_axis(name, prefix, dim):
    if name.startswith(prefix) and name[len(prefix) :].isdigit():
        k = int(name[len(prefix) :]) - 1
        if not 0 <= k < dim:
            raise UnsupportedExpression(f"symbol {name} exceeds dimension {dim}")
        return k
    return None


def _angle_form(e, dim, env):
    """Write e as  n.phi + c  with real n; None if not linear in the angles."""
    if isinstance(e, ex.Const):
        return np.zeros(dim), e.value
    if isinstance(e, ex.Var):
        k = _symbol_axis(e.name, "phi", dim)
        if k is not None:
            n = np.zeros(dim)
            n[k] = 1.0
            return n, 0.0
        if e.name in env:
            return np.zeros(dim), float(env[e.name])
        return None
    if isinstance(e, ex.Add):
        n, c = np.zeros(dim), 0.0
        for t in e.terms:
            part = _angle_form(t, dim, env)
            if part is None:
                return None
            n, c = n + part[0], c + part[1]
        return n, c
    if isinstance(e, ex.Mul):
        n, c = np.zeros(dim), 1.0
        linear = False
        for f in e.factors:
            part = _angle_form(f, dim, env)
            if part is None:
                return None
            if np.any(part[0]):
                if linear:
                    return None
                linear = True
                n = part[0] * c
                c = part[1] * c
            else:
                n, c = n * part[1], c * part[1]
        return n, c
    try:
        return np.zeros(dim), float(_numeric(e, env))
    except UnsupportedExpression:
        return None


def _numeric(e, env):
    if e.symbols() - set(env):
        raise UnsupportedExpression(f"{e} is not a number")
    return e.evaluate(env)


def _to_annulus(e, dim, env) -> AnnulusFunction:
    own = {f"I{k + 1}" for k in range(dim)} | {f"phi{k + 1}" for k in range(dim)}
    if not e.symbols() & own:
        return AnnulusFunction.constant(dim, complex(_numeric(e, env)))
    if isinstance(e, ex.Var):
        k = _symbol_axis(e.name, "I", dim)
        if k is not None:
            return AnnulusFunction.action(k, dim)
        raise UnsupportedExpression(f"bare angle {e.name} is not a function on the torus")
    if isinstance(e, ex.Add):
        out = AnnulusFunction(dim)
        for t in e.terms:
            out = out + _to_annulus(t, dim, env)
        return out
    if isinstance(e, ex.Mul):
        out = AnnulusFunction.constant(dim, 1.0)
        for f in e.factors:
            out = out * _to_annulus(f, dim, env)
        return out
    if isinstance(e, ex.Pow):
        k = _numeric(e.exponent, env)
        if float(k).is_integer() and k >= 0:
            base = _to_annulus(e.base, dim, env)
            out = AnnulusFunction.constant(dim, 1.0)
            for _ in range(int(k)):
                out = out * base
            return out
        raise UnsupportedExpression(f"{e}: only nonnegative integer powers of I/phi terms")
    if isinstance(e, ex.Func) and e.name in ("cos", "sin"):
        form = _angle_form(e.arg, dim, env)
        if form is None:
            raise UnsupportedExpression(f"{e}: argument must be linear in the angles")
        n, c = form
        if not np.allclose(n, np.round(n), rtol=0, atol=0):
            raise UnsupportedExpression(f"{e}: angle coefficients must be integers")
        n = as_index(np.round(n).astype(int))
        minus = tuple(-v for v in n)
        phase = complex(math.cos(c), math.sin(c))
        if e.name == "cos":
            poly = FourierPolynomial(dim, [(n, phase / 2), (minus, phase.conjugate() / 2)])
        else:
            poly = FourierPolynomial(dim, [(n, phase / 2j), (minus, -phase.conjugate() / 2j)])
        return AnnulusFunction.angle_function(poly)
    raise UnsupportedExpression(f"{e} cannot be written as a polynomial in I with trigonometric coefficients")


def annulus_bracket(f: AnnulusFunction, g: AnnulusFunction) -> AnnulusFunction:
    """{f, g} = d^i f d_i g - d_i f d^i g   (d^i: action, d_i: angle)."""
    f._check(g)
    out = AnnulusFunction(f.dim)
    for i in range(f.dim):
        out = out + f.d_action(i) * g.d_angle(i) - f.d_angle(i) * g.d_action(i)
    return out


# ----------------------------------------------------------------------------
# affine observables


@dataclass(frozen=True)
class AffineObservable:
    """f = a^k(phi) I_k + b(phi)."""

    a: tuple
    b: FourierPolynomial

    def __post_init__(self):
        a = tuple(self.a)
        if not a:
            raise DimensionMismatch("need one action coefficient per axis")
        if any(p.dim != len(a) for p in a) or self.b.dim != len(a):
            raise DimensionMismatch("all components must share the dimension m = len(a)")
        object.__setattr__(self, "a", a)

    @classmethod
    def action(cls, k, m, coeff=1.0):
        check_axis(k, m)
        zero = FourierPolynomial(m)
        a = tuple(FourierPolynomial.constant(m, coeff) if j == k else zero for j in range(m))
        return cls(a, zero)

    @classmethod
    def angle_function(cls, b: FourierPolynomial):
        return cls((FourierPolynomial(b.dim),) * b.dim, b)

    @classmethod
    def from_annulus(cls, f: AnnulusFunction) -> AffineObservable:
        if f.degree() > 1:
            raise NotAffine(f"observable has action degree {f.degree()}")
        m = f.dim
        zero = FourierPolynomial(m)
        a = []
        for k in range(m):
            deg = tuple(1 if j == k else 0 for j in range(m))
            a.append(f.terms.get(deg, zero))
        return cls(tuple(a), f.terms.get((0,) * m, zero))

    @classmethod
    def from_expr(cls, e, m, env=None) -> AffineObservable:
        return cls.from_annulus(AnnulusFunction.from_expr(e, m, env))

    @property
    def dim(self):
        return self.b.dim

    def as_annulus(self) -> AnnulusFunction:
        out = AnnulusFunction.angle_function(self.b)
        for k, ak in enumerate(self.a):
            out = out + AnnulusFunction.action(k, self.dim) * ak
        return out

    def bandwidth(self) -> int:
        return max([p.bandwidth() for p in self.a] + [self.b.bandwidth()])

    def is_real(self, tol=0.0) -> bool:
        return all(p.is_real(tol) for p in self.a) and self.b.is_real(tol)

    def divergence(self) -> FourierPolynomial:
        """sum_k d_k a^k"""
        out = FourierPolynomial(self.dim)
        for k, ak in enumerate(self.a):
            out = out + partial_phi(ak, k)
        return out

    def _check(self, other):
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions {self.dim} and {other.dim} differ")

    def __add__(self, other):
        self._check(other)
        return AffineObservable(tuple(x + y for x, y in zip(self.a, other.a)), self.b + other.b)

    def __sub__(self, other):
        self._check(other)
        return AffineObservable(tuple(x - y for x, y in zip(self.a, other.a)), self.b - other.b)

    def __mul__(self, s):
        return AffineObservable(tuple(p.scale(s) for p in self.a), self.b.scale(s))

    __rmul__ = __mul__

    def evaluate(self, phi, actions):
        return self.as_annulus().evaluate(phi, actions)


def poisson_bracket(f: AffineObservable, g: AffineObservable) -> AffineObservable:
    """Exact bracket; affine observables are closed under it."""
    f._check(g)
    return AffineObservable.from_annulus(annulus_bracket(f.as_annulus(), g.as_annulus()))


# ----------------------------------------------------------------------------
# matrices over a truncation window


@dataclass
class LinearOperator:
    window: TruncationWindow
    matrix: np.ndarray
    leakage: float = 0.0
    hermitian: bool = False
    rep: Representation | None = None
    _basis: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.window.size
        if self.matrix.shape != (n, n):
            raise DimensionMismatch(f"matrix shape {self.matrix.shape} does not fit window of size {n}")
        self.matrix.setflags(write=False)
        if self.hermitian and self.hermitian_error() > 1e-12:
            raise ValueError("operator flagged Hermitian but max|A - A^dagger| > 1e-12")

    @property
    def dim(self):
        return self.window.m

    @property
    def basis(self) -> np.ndarray:
        if self._basis is None:
            self._basis = self.window.indices()
        return self._basis

    def hermitian_error(self, mask=None) -> float:
        a = self.matrix if mask is None else self.matrix[np.ix_(mask, mask)]
        return float(np.max(np.abs(a - a.conj().T), initial=0.0))

    def _same(self, other):
        if not isinstance(other, LinearOperator):
            raise TypeError("expected a LinearOperator")
        if other.window != self.window:
            raise WindowMismatch(f"windows {self.window} and {other.window} differ")

    def __matmul__(self, other):
        if isinstance(other, WaveFunction):
            return self.apply(other)[0]
        self._same(other)
        return LinearOperator(self.window, self.matrix @ other.matrix, self.leakage + other.leakage,
                              rep=self.rep)

    def __add__(self, other):
        self._same(other)
        return LinearOperator(self.window, self.matrix + other.matrix, self.leakage + other.leakage,
                              rep=self.rep)

    def __sub__(self, other):
        self._same(other)
        return LinearOperator(self.window, self.matrix - other.matrix, self.leakage + other.leakage,
                              rep=self.rep)

    def __mul__(self, s):
        return LinearOperator(self.window, self.matrix * s, self.leakage * abs(s), rep=self.rep)

    __rmul__ = __mul__

    def dagger(self):
        return LinearOperator(self.window, self.matrix.conj().T, self.leakage, self.hermitian, self.rep)

    def interior(self, margin: int) -> np.ndarray:
        """Sub-matrix on basis states at distance >= margin from the window edge."""
        mask = self.window.interior_mask(margin)
        return self.matrix[np.ix_(mask, mask)]

    def max_norm(self, margin: int = 0) -> float:
        a = self.interior(margin) if margin else self.matrix
        return float(np.max(np.abs(a), initial=0.0))

    def is_diagonal(self) -> bool:
        return not np.any(self.matrix - np.diag(np.diag(self.matrix)))

    def apply(self, psi: WaveFunction) -> tuple[WaveFunction, float]:
        """Act on a state; returns the image and the amplitude outside the window."""
        if isinstance(psi, FourierPolynomial):
            psi = WaveFunction(psi)
        if self.rep is not None and psi.half_shift != self.rep.half_shift:
            raise RepresentationMismatch("state and operator use different half-form bases")
        vec, leak = psi.poly.to_vector(self.window)
        out = FourierPolynomial.from_vector(self.window, self.matrix @ vec)
        return WaveFunction(out, psi.half_shift), leak

    # export
    def to_dict(self) -> dict:
        return {
            "m": self.window.m,
            "n_max": self.window.n_max,
            "basis": self.basis.tolist(),
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
            "leakage": float(self.leakage),
            "hermitian": bool(self.hermitian),
        }

    def to_json(self) -> str:
        return jsonfmt.dumps(self.to_dict())

    def write_matrix_market(self, path):
        from scipy import io, sparse

        io.mmwrite(str(path), sparse.coo_matrix(self.matrix), precision=17,
                   comment=f"torus window m={self.window.m} n_max={self.window.n_max}")


def _check_rep(rep, w):
    if rep.dim != w.m:
        raise DimensionMismatch(f"representation has {rep.dim} axes, window has {w.m}")


def action_operator(rep: Representation, k: int, w: TruncationWindow) -> LinearOperator:
    _check_rep(rep, w)
    check_axis(k, w.m)
    vals = rep.action_values(w.indices())[:, k]
    return LinearOperator(w, np.diag(vals.astype(complex)), hermitian=True, rep=rep)


def _shift_matrix(f: FourierPolynomial, w: TruncationWindow, weights=None):
    """Matrix of psi_q -> sum_m f_m w_q psi_{q+m}; returns (matrix, leakage)."""
    mat = np.zeros((w.size, w.size), dtype=complex)
    if f.is_zero():
        return mat, 0.0
    idx = w.indices()
    shifts = np.array([n for n, _ in f.items()], dtype=np.int64)
    coeffs = np.array([c for _, c in f.items()])
    wts = np.ones(w.size) if weights is None else np.asarray(weights)
    # keys are distinct, so every (target, source) pair is hit at most once
    tgt, inside = w.positions(idx[None, :, :] + shifts[:, None, :])
    vals = coeffs[:, None] * wts[None, :]
    src = np.broadcast_to(np.arange(w.size), tgt.shape)
    mat[tgt[inside], src[inside]] = vals[inside]
    return mat, float(np.sum(np.abs(vals[~inside])))


def multiplication_operator(f: FourierPolynomial, w: TruncationWindow, rep=None) -> LinearOperator:
    if f.dim != w.m:
        raise DimensionMismatch(f"function dimension {f.dim} differs from window dimension {w.m}")
    mat, leak = _shift_matrix(f, w)
    return LinearOperator(w, mat, leak, hermitian=f.is_real(), rep=rep)


def _scalar_part(f: AffineObservable, rep: Representation) -> FourierPolynomial:
    """-(i/2) d_k a^k - lambda_k a^k + b"""
    out = f.divergence().scale(-0.5j)
    for lam, ak in zip(rep.lam, f.a):
        out = out - ak.scale(lam)
    return out + f.b


def quantize_affine(f: AffineObservable, rep: Representation, w: TruncationWindow) -> LinearOperator:
    if f.dim != w.m:
        raise DimensionMismatch(f"observable dimension {f.dim} differs from window dimension {w.m}")
    _check_rep(rep, w)
    idx = w.indices().astype(float) + rep.shift
    mat, leak = _shift_matrix(_scalar_part(f, rep), w)
    for k, ak in enumerate(f.a):
        if ak.is_zero():
            continue
        # -i d_k acts on psi_q as (q_k + shift_k)
        part, part_leak = _shift_matrix(ak, w, weights=idx[:, k])
        mat += part
        leak += part_leak
    op = LinearOperator(w, mat, leak, rep=rep)
    if f.is_real() and op.hermitian_error() <= 1e-12:
        op.hermitian = True
    return op


def apply_affine(f: AffineObservable, rep: Representation, psi):
    """Polarized operator acting symbolically on a state (no truncation)."""
    if isinstance(psi, FourierPolynomial):
        psi = WaveFunction(psi)
    if psi.half_shift != rep.half_shift:
        raise RepresentationMismatch("state and representation use different half-form bases")
    out = multiply(_scalar_part(f, rep), psi.poly)
    for k, ak in enumerate(f.a):
        if not ak.is_zero():
            out = out + multiply(ak, partial_phi(psi, k).poly.scale(-1j))
    return WaveFunction(out, psi.half_shift)


def commutator(A: LinearOperator, B: LinearOperator) -> LinearOperator:
    A._same(B)
    return A @ B - B @ A


def interior_commutator(A: LinearOperator, B: LinearOperator, margin: int) -> np.ndarray:
    """[A, B] restricted to the interior sub-window, without forming the full products."""
    A._same(B)
    mask = A.window.interior_mask(margin)
    a, b = A.matrix, B.matrix
    return a[mask] @ b[:, mask] - b[mask] @ a[:, mask]


def dirac_defect(f: AffineObservable, g: AffineObservable, rep: Representation,
                 w: TruncationWindow, margin: int, cache: dict | None = None) -> float:
    """max-norm of [f^, g^] + i {f,g}^ on the interior sub-window.

    ``cache`` (keyed by id) lets callers reuse quantized operators across pairs.
    """
    def q(obs):
        if cache is None:
            return quantize_affine(obs, rep, w)
        key = id(obs)
        if key not in cache:
            cache[key] = quantize_affine(obs, rep, w)
        return cache[key]

    lhs = interior_commutator(q(f), q(g), margin)
    rhs = quantize_affine(poisson_bracket(f, g), rep, w).interior(margin)
    return float(np.max(np.abs(lhs + 1j * rhs), initial=0.0))


# ----------------------------------------------------------------------------
# prequantization on the polynomial-Fourier ring


class PrequantumOperator:
    """f^ = -i theta_f + (f - (I_k + lambda_k) d^k f)  acting on AnnulusFunction.

    theta_f = d^k f d_k - d_k f d^k is the Hamiltonian vector field of f.
    """

    def __init__(self, f: AffineObservable, rep: Representation):
        if f.dim != rep.dim:
            raise DimensionMismatch("observable and representation dimensions differ")
        self.f = f
        self.rep = rep
        F = f.as_annulus()
        m = f.dim
        self._grad_action = [F.d_action(k) for k in range(m)]
        self._grad_angle = [F.d_angle(k) for k in range(m)]
        mult = F
        for k in range(m):
            shifted = AnnulusFunction.action(k, m) + AnnulusFunction.constant(m, rep.lam[k])
            mult = mult - shifted * self._grad_action[k]
        self.multiplier = mult

    def vector_field(self, rho: AnnulusFunction) -> AnnulusFunction:
        out = AnnulusFunction(rho.dim)
        for k in range(rho.dim):
            out = out + self._grad_action[k] * rho.d_angle(k) - self._grad_angle[k] * rho.d_action(k)
        return out

    def __call__(self, rho) -> AnnulusFunction:
        if isinstance(rho, FourierPolynomial):
            rho = AnnulusFunction.angle_function(rho)
        if rho.dim != self.f.dim:
            raise DimensionMismatch("section and observable dimensions differ")
        return self.vector_field(rho) * (-1j) + self.multiplier * rho


def prequantum_operator(f, rep: Representation) -> PrequantumOperator:
    if isinstance(f, AnnulusFunction):
        f = AffineObservable.from_annulus(f)
    return PrequantumOperator(f, rep)


def half_form_term(f: AffineObservable) -> FourierPolynomial:
    """-(i/2) d_k a^k, the metalinear correction added by polarization."""
    return f.divergence().scale(-0.5j)


def random_affine(rng: np.random.Generator, m: int, bandwidth: int, n_terms: int = 4,
                  integer: bool = False, scale: float = 1.0) -> AffineObservable:
    """Random real affine observable with Fourier support in |n_k| <= bandwidth."""

    def real_poly():
        store = {}
        for _ in range(n_terms):
            n = tuple(int(v) for v in rng.integers(-bandwidth, bandwidth + 1, size=m))
            if integer:
                c = complex(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
            else:
                c = complex(rng.normal(), rng.normal()) * scale
            neg = tuple(-v for v in n)
            if n == neg:
                c = complex(c.real, 0.0)
            store[n] = store.get(n, 0) + c
            store[neg] = store.get(neg, 0) + (c.conjugate() if n != neg else 0)
        return FourierPolynomial(m, store)

    return AffineObservable(tuple(real_poly() for _ in range(m)), real_poly())


def generator_set(m: int) -> list[AffineObservable]:
    """I_k, psi_(+-e_j) and cos/sin of every axis."""
    gens = [AffineObservable.action(k, m) for k in range(m)]
    for j in range(m):
        e = tuple(1 if i == j else 0 for i in range(m))
        ne = tuple(-v for v in e)
        gens.append(AffineObservable.angle_function(FourierPolynomial.basis(e)))
        gens.append(AffineObservable.angle_function(FourierPolynomial.basis(ne)))
        gens.append(AffineObservable.angle_function(FourierPolynomial.cos(e)))
        gens.append(AffineObservable.angle_function(FourierPolynomial.sin(e)))
        gens.append(AffineObservable.from_annulus(
            AnnulusFunction.action(j, m) * FourierPolynomial.cos(e)))
    return gens
