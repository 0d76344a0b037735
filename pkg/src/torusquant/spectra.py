"""Hamiltonians H(I), their exact spectra E_n = H(n - lambda) and state evolution."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import jsonfmt
from .errors import AnalyticDomainViolation, DimensionMismatch, RepresentationMismatch, UnsupportedExpression
from .fourier import FourierPolynomial, TruncationWindow, WaveFunction
from .operators import AnnulusFunction, LinearOperator, Representation

KINDS = ("polynomial", "exp", "sqrt", "reciprocal")


@dataclass(frozen=True)
class HamiltonianSpec:
    """H(I) = poly(I), or exp/sqrt/1 over a polynomial ``poly``.

    ``poly`` maps action multidegrees to real coefficients.
    """

    m: int
    poly: dict = field(default_factory=dict)
    kind: str = "polynomial"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        clean = {}
        for deg, c in dict(self.poly).items():
            deg = tuple(int(d) for d in deg)
            if len(deg) != self.m or any(d < 0 for d in deg):
                raise DimensionMismatch(f"multidegree {deg} does not fit dimension {self.m}")
            c = complex(c)
            if c.imag != 0:
                raise ValueError("Hamiltonian coefficients must be real")
            if c.real != 0:
                clean[deg] = clean.get(deg, 0.0) + c.real
        object.__setattr__(self, "poly", clean)

    @classmethod
    def polynomial(cls, m, terms):
        return cls(m, dict(terms))

    @classmethod
    def linear(cls, coeffs):
        m = len(coeffs)
        return cls(m, {tuple(int(j == k) for j in range(m)): c for k, c in enumerate(coeffs)})

    @classmethod
    def from_expr(cls, e, m) -> HamiltonianSpec:
        """Polynomial in I1..Im, or exp(P), sqrt(P), 1/P with P such a polynomial."""
        if isinstance(e, str):
            e = ex.parse(e)
        kind, inner = "polynomial", e
        if isinstance(e, ex.Func) and e.name in ("exp", "sqrt"):
            kind, inner = e.name, e.arg
        elif isinstance(e, ex.Pow) and e.exponent == ex.Const(-1.0):
            kind, inner = "reciprocal", e.base
        allowed = {f"I{k + 1}" for k in range(m)}
        extra = inner.symbols() - allowed
        if extra:
            raise UnsupportedExpression(f"Hamiltonian may only use {sorted(allowed)}, found {sorted(extra)}")
        try:
            ann = AnnulusFunction.from_expr(inner, m)
        except UnsupportedExpression as exc:
            raise UnsupportedExpression(
                f"{e}: expected a polynomial in the actions or exp/sqrt/reciprocal of one ({exc})"
            ) from exc
        poly = {}
        origin = (0,) * m
        for deg, coef in ann.terms.items():
            if set(coef.coeffs) != {origin}:
                raise UnsupportedExpression("Hamiltonian must not depend on the angles")
            poly[deg] = coef[origin]
        return cls(m, poly, kind)

    def degree(self, axis=None) -> int:
        if axis is None:
            return max((sum(d) for d in self.poly), default=0)
        return max((d[axis] for d in self.poly), default=0)

    def depends_on(self, axis) -> bool:
        return self.degree(axis) > 0

    def _poly_values(self, actions):
        actions = np.asarray(actions, dtype=float)
        if actions.shape[-1] != self.m:
            raise DimensionMismatch(f"actions have {actions.shape[-1]} components, expected {self.m}")
        out = np.zeros(actions.shape[:-1])
        for deg, c in sorted(self.poly.items()):
            term = np.full(actions.shape[:-1], c)
            for k, d in enumerate(deg):
                if d:
                    term = term * actions[..., k] ** d
            out = out + term
        return out

    def __call__(self, actions) -> np.ndarray:
        """Energies at the given action values (shape (..., m))."""
        p = self._poly_values(actions)
        if self.kind == "polynomial":
            return p
        if self.kind == "exp":
            with np.errstate(over="ignore"):
                out = np.exp(p)
            if not np.all(np.isfinite(out)):
                raise AnalyticDomainViolation("exp overflows on the lattice")
            return out
        if self.kind == "sqrt":
            if np.any(p < 0):
                raise AnalyticDomainViolation(
                    f"sqrt of negative value {float(np.min(p)):.6g} on the shifted lattice"
                )
            return np.sqrt(p)
        if np.any(np.abs(p) <= 1e-12):
            raise AnalyticDomainViolation("reciprocal of a polynomial that vanishes on the shifted lattice")
        return 1.0 / p

    def to_expr(self) -> ex.Expr:
        terms = []
        for deg, c in sorted(self.poly.items()):
            factors = [ex.Const(c)] + [ex.power(ex.Var(f"I{k + 1}"), ex.Const(float(d)))
                                        for k, d in enumerate(deg) if d]
            terms.append(ex.mul(*factors))
        inner = ex.add(*terms)
        if self.kind == "exp":
            return ex.Func("exp", inner)
        if self.kind == "sqrt":
            return ex.Func("sqrt", inner)
        if self.kind == "reciprocal":
            return ex.power(inner, ex.Const(-1.0))
        return inner

    def __str__(self):
        return str(self.to_expr())


@dataclass(frozen=True)
class SpectrumEntry:
    n: tuple
    energy: float


def _energies(H: HamiltonianSpec, rep: Representation, indices) -> np.ndarray:
    if H.m != rep.dim:
        raise DimensionMismatch(f"Hamiltonian has {H.m} actions, representation has {rep.dim}")
    return H(rep.action_values(indices))


def quantize_hamiltonian(H: HamiltonianSpec, rep: Representation, w: TruncationWindow) -> LinearOperator:
    """Diagonal operator with entries E_n over the window."""
    if w.m != rep.dim:
        raise DimensionMismatch("window and representation dimensions differ")
    E = _energies(H, rep, w.indices())
    return LinearOperator(w, np.diag(E.astype(complex)), hermitian=True, rep=rep)


def spectrum(H: HamiltonianSpec, rep: Representation, w: TruncationWindow) -> list[SpectrumEntry]:
    """Every window state with its energy, sorted by energy then index."""
    idx = w.indices()
    E = _energies(H, rep, idx)
    entries = [SpectrumEntry(tuple(int(v) for v in n), float(e)) for n, e in zip(idx, E)]
    return sorted(entries, key=lambda s: (s.energy, s.n))


def degeneracy_classes(entries, tol: float = 1e-9) -> list[list[tuple]]:
    """Group indices whose energy lies within ``tol`` of the class's lowest energy."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    ordered = sorted(entries, key=lambda s: (s.energy, s.n))
    classes: list[list[tuple]] = []
    rep_energy = None
    for s in ordered:
        if rep_energy is None or s.energy - rep_energy > tol:
            classes.append([])
            rep_energy = s.energy
        classes[-1].append(s.n)
    return classes


def evolve(psi0: WaveFunction, H: HamiltonianSpec, rep: Representation, t: float) -> WaveFunction:
    """c_n -> exp(-i E_n t) c_n."""
    if isinstance(psi0, FourierPolynomial):
        psi0 = WaveFunction(psi0, rep.half_shift)
    if psi0.half_shift != rep.half_shift:
        raise RepresentationMismatch("state and representation use different half-form bases")
    items = psi0.poly.items()
    if not items:
        return psi0
    idx = np.array([n for n, _ in items])
    E = _energies(H, rep, idx)
    coeffs = [c * complex(math.cos(e * t), -math.sin(e * t)) for (_, c), e in zip(items, E)]
    return WaveFunction(FourierPolynomial(psi0.dim, [(n, c) for (n, _), c in zip(items, coeffs)]),
                        psi0.half_shift)


def apply_hamiltonian(psi: WaveFunction, H: HamiltonianSpec, rep: Representation) -> WaveFunction:
    items = psi.poly.items()
    if not items:
        return psi
    E = _energies(H, rep, np.array([n for n, _ in items]))
    return WaveFunction(FourierPolynomial(psi.dim, [(n, c * e) for (n, c), e in zip(items, E)]),
                        psi.half_shift)


def spectrum_csv(entries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    m = len(entries[0].n) if entries else 0
    writer.writerow([f"n_{k + 1}" for k in range(m)] + ["E"])
    for s in entries:
        writer.writerow(list(s.n) + [jsonfmt.format_float(s.energy)])
    return buf.getvalue()


def spectrum_json(entries) -> str:
    return jsonfmt.dumps([{"n": list(s.n), "energy": s.energy} for s in entries])
