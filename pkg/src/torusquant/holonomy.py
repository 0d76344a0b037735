"""Parameter-driven perturbations  Delta = Lambda^a_b(s, phi) (ds^b/dt) I_a  and their holonomy.

The holonomy operator is the ordered exponential of the line integral

    U = T exp( -i int Delta^ dt ) = T exp( int {-Lambda d_a - (1/2) d_a Lambda + i lambda_a Lambda} dsigma ),

approximated by a midpoint product over a grid that is uniform in the arc
length of the parameter polyline, so it depends only on the path's image and
orientation.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from . import expr as ex
from . import jsonfmt
from .errors import AxisConsistencyError, NonCommutingPerturbation, ParseError, PathDomainError
from .fourier import FourierPolynomial, TruncationWindow, WaveFunction, check_axis
from .operators import AffineObservable, AnnulusFunction, LinearOperator, Representation, quantize_affine
from .spectra import HamiltonianSpec, evolve, quantize_hamiltonian

NONCOMMUTING_TOL = 1e-8


@dataclass(frozen=True)
class ParameterPath:
    """Piecewise-linear curve s(t) through ``points`` at strictly increasing ``times``."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        s = np.asarray(self.points, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if len(t) < 2:
            raise PathDomainError("a path needs at least two samples")
        if s.shape[0] != len(t):
            raise PathDomainError("times and points have different lengths")
        if np.any(np.diff(t) <= 0):
            raise PathDomainError("path times must be strictly increasing")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(t)):
            raise PathDomainError("path samples must be finite")
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", s)

    @property
    def num_params(self) -> int:
        return self.points.shape[1]

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.end - self.start

    def is_loop(self) -> bool:
        return bool(np.array_equal(self.points[0], self.points[-1]))

    def segment(self, t: float) -> int:
        """Segment containing t; breakpoints belong to the segment on their right."""
        if not self.start <= t <= self.end:
            raise PathDomainError(f"t={t} outside path domain [{self.start}, {self.end}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(i, len(self.times) - 2)

    def position(self, t: float) -> np.ndarray:
        i = self.segment(t)
        t0, t1 = self.times[i], self.times[i + 1]
        u = (t - t0) / (t1 - t0)
        return (1 - u) * self.points[i] + u * self.points[i + 1]

    def rate(self, t: float) -> np.ndarray:
        """ds/dt, right-hand derivative at breakpoints."""
        i = self.segment(t)
        return (self.points[i + 1] - self.points[i]) / (self.times[i + 1] - self.times[i])

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def then(self, other: ParameterPath) -> ParameterPath:
        """Concatenation: traverse self, then other (which must start where self ends)."""
        if not np.array_equal(self.points[-1], other.points[0]):
            raise PathDomainError("paths do not join")
        t_other = other.times[1:] - other.times[0] + self.end
        return ParameterPath(np.concatenate([self.times, t_other]),
                             np.concatenate([self.points, other.points[1:]]))

    def reparametrized(self, times) -> ParameterPath:
        return ParameterPath(times, self.points)

    def reversed(self) -> ParameterPath:
        return ParameterPath(self.end + self.start - self.times[::-1], self.points[::-1])

    # I/O
    @classmethod
    def from_dict(cls, data) -> ParameterPath:
        try:
            return cls(data["t"], data["s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed path: {exc}") from exc

    def to_dict(self):
        return {"t": self.times.tolist(), "s": self.points.tolist()}

    @classmethod
    def from_csv(cls, text: str) -> ParameterPath:
        """Rows ``t, s_1, ..., s_p``; a header row is optional."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        try:
            float(rows[0][0])
        except (ValueError, IndexError):
            rows = rows[1:]
        try:
            data = np.array([[float(c) for c in r] for r in rows])
        except ValueError as exc:
            raise ParseError(f"malformed path CSV: {exc}") from exc
        if data.ndim != 2 or data.shape[1] < 2:
            raise ParseError("path CSV needs columns t, s_1, ..., s_p")
        return cls(data[:, 0], data[:, 1:])

    @classmethod
    def from_json(cls, text: str) -> ParameterPath:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed path JSON: {exc}") from exc
        return cls.from_dict(data)


class PerturbationSpec:
    """Coefficients Lambda^a_beta(s, phi) of the control perturbation.

    ``entries`` maps (a, beta) -> a FourierPolynomial (constant in s), an
    expression in ``phi*`` and ``s*`` symbols, or a callable s -> FourierPolynomial.
    Axes and parameter numbers are 0-based.
    """

    def __init__(self, m: int, controlled_axes, num_params: int, entries: Mapping):
        self.m = int(m)
        self.controlled_axes = tuple(sorted(set(int(a) for a in controlled_axes)))
        self.num_params = int(num_params)
        for a in self.controlled_axes:
            check_axis(a, self.m)
        self.entries = {}
        for (a, beta), val in dict(entries).items():
            if a not in self.controlled_axes:
                raise AxisConsistencyError(f"Lambda entry for axis {a} which is not controlled")
            if not 0 <= beta < self.num_params:
                raise AxisConsistencyError(f"parameter index {beta} out of range")
            if isinstance(val, str):
                val = ex.parse(val)
            if isinstance(val, FourierPolynomial):
                self._check_support(val)
            self.entries[(int(a), int(beta))] = val
        self._split = {k: _split_terms(v, self.m) for k, v in self.entries.items()
                       if isinstance(v, ex.Expr)}

    @classmethod
    def from_expressions(cls, m, controlled_axes, num_params, exprs: Mapping[tuple, str]):
        return cls(m, controlled_axes, num_params, {k: ex.parse(v) for k, v in exprs.items()})

    def _check_support(self, poly: FourierPolynomial):
        if poly.dim != self.m:
            raise AxisConsistencyError("Lambda polynomial has the wrong dimension")
        stray = poly.support_axes() - set(self.controlled_axes)
        if stray:
            raise AxisConsistencyError(
                f"Lambda depends on uncontrolled angle axes {sorted(stray)}"
            )

    def coefficient(self, a: int, beta: int, s) -> FourierPolynomial:
        val = self.entries.get((a, beta))
        if val is None:
            return FourierPolynomial(self.m)
        if isinstance(val, FourierPolynomial):
            return val
        if isinstance(val, ex.Expr):
            env = {f"s{j + 1}": float(v) for j, v in enumerate(np.atleast_1d(s))}
            poly = FourierPolynomial(self.m)
            for weight, angular in self._split[(a, beta)]:
                if isinstance(angular, FourierPolynomial):
                    poly = poly + angular.scale(_weight(weight, env))
                else:
                    poly = poly + _angular_part(angular, self.m, env)
        else:
            poly = val(np.asarray(s, dtype=float))
        self._check_support(poly)
        return poly

    def observable(self, s, ds) -> AffineObservable:
        """The affine function Delta with a^a = Lambda^a_beta(s) ds^beta, b = 0."""
        ds = np.atleast_1d(np.asarray(ds, dtype=float))
        zero = FourierPolynomial(self.m)
        a = [zero] * self.m
        for (ax, beta), _ in sorted(self.entries.items()):
            if ds[beta] != 0:
                a[ax] = a[ax] + self.coefficient(ax, beta, s).scale(ds[beta])
        return AffineObservable(tuple(a), zero)

    def compatible_with(self, H: HamiltonianSpec) -> bool:
        return not any(H.depends_on(a) for a in self.controlled_axes)

    def bandwidth(self, samples) -> int:
        bw = 0
        for s in samples:
            for a, beta in self.entries:
                bw = max(bw, self.coefficient(a, beta, s).bandwidth())
        return bw


def _weight(e: ex.Expr, env) -> complex:
    try:
        c = complex(e.evaluate(env))
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise PathDomainError(f"Lambda undefined at s = {list(env.values())}: {exc}") from exc
    if not cmath.isfinite(c):
        raise PathDomainError(f"Lambda is not finite at s = {list(env.values())}")
    return c


def _angular_part(e, m, env) -> FourierPolynomial:
    ann = AnnulusFunction.from_expr(e, m, env)
    if ann.depends_on_actions():
        raise AxisConsistencyError("Lambda must not depend on the actions")
    return ann.terms.get((0,) * m, FourierPolynomial(m))


def _split_terms(e: ex.Expr, m: int) -> list:
    """Write e as a sum of (s-only weight) x (angle part), converting angle parts once.

    Terms whose angle part still involves s are kept as expressions and
    converted at every evaluation.
    """
    params = {v for v in e.symbols() if v.startswith("s")}
    out = []
    for term in e.terms if isinstance(e, ex.Add) else (e,):
        factors = term.factors if isinstance(term, ex.Mul) else (term,)
        weight = [f for f in factors if f.symbols() <= params]
        angular = [f for f in factors if not f.symbols() <= params]
        rest = ex.mul(*angular) if angular else ex.Const(1.0)
        if rest.symbols() & params:
            out.append((ex.Const(1.0), term))
        else:
            out.append((ex.mul(*weight) if weight else ex.Const(1.0), _angular_part(rest, m, {})))
    return out


def quantize_perturbation(p: PerturbationSpec, rep: Representation, w: TruncationWindow,
                          t: float, path: ParameterPath) -> LinearOperator:
    """Instantaneous Delta^(t) = -(i Lambda d_a + (i/2) d_a Lambda + lambda_a Lambda) ds/dt."""
    _check_path(p, path)
    return quantize_affine(p.observable(path.position(t), path.rate(t)), rep, w)


def _check_path(p, path):
    if path.num_params != p.num_params:
        raise AxisConsistencyError(
            f"path has {path.num_params} parameters, perturbation expects {p.num_params}"
        )


def _sample_points(p: PerturbationSpec, path: ParameterPath | None, samples):
    if samples is not None:
        return [np.atleast_1d(np.asarray(s, dtype=float)) for s in samples]
    if path is None:
        return [np.zeros(p.num_params)]
    mids = 0.5 * (path.points[:-1] + path.points[1:])
    return list(path.points) + list(mids)


def commutes_with_hamiltonian(p: PerturbationSpec, H: HamiltonianSpec, rep: Representation,
                              w: TruncationWindow, path: ParameterPath | None = None,
                              samples=None) -> float:
    """max ||[Delta^, H^]|| over parameter samples and unit rates, interior sub-window."""
    Hop = quantize_hamiltonian(H, rep, w)
    points = _sample_points(p, path, samples)
    margin = min(p.bandwidth(points), w.n_max)
    worst = 0.0
    for s in points:
        for beta in range(p.num_params):
            ds = np.zeros(p.num_params)
            ds[beta] = 1.0
            D = quantize_affine(p.observable(s, ds), rep, w)
            C = D @ Hop - Hop @ D
            worst = max(worst, C.max_norm(margin))
    return worst


def _unitary_factor(op: LinearOperator) -> np.ndarray:
    """exp(-i A) for the matrix of ``op``."""
    if op.is_diagonal():
        return np.diag(np.exp(-1j * np.diag(op.matrix)))
    if op.hermitian:
        vals, vecs = np.linalg.eigh(op.matrix)
        return (vecs * np.exp(-1j * vals)) @ vecs.conj().T
    return scipy.linalg.expm(-1j * op.matrix)


def _arc_grid(path: ParameterPath, steps: int):
    """Pieces (segment, u0, u1) of a uniform arc-length grid, split at the nodes."""
    lengths = path.segment_lengths()
    total = float(lengths.sum())
    if total == 0.0:
        return []
    nodes = np.concatenate([[0.0], np.cumsum(lengths)])
    grid = np.union1d(np.linspace(0.0, total, steps + 1), nodes)
    pieces = []
    for u0, u1 in zip(grid[:-1], grid[1:]):
        if u1 <= u0:
            continue
        i = int(np.searchsorted(nodes, 0.5 * (u0 + u1), side="right")) - 1
        i = min(max(i, 0), len(lengths) - 1)
        if lengths[i] == 0:
            continue
        pieces.append((i, (u0 - nodes[i]) / lengths[i], (u1 - nodes[i]) / lengths[i]))
    return pieces


def _generator(p: PerturbationSpec, rep: Representation, w: TruncationWindow):
    """Return g(s, ds) -> quantized Delta as a LinearOperator.

    Quantization is linear, so when every Lambda entry splits into s-dependent
    weights times fixed angle polynomials the term matrices are built once and
    recombined per step.  Leakage is then reported as the bound sum |weight| * leak.
    """
    terms = []
    for (ax, beta), val in sorted(p.entries.items(), key=lambda kv: kv[0]):
        if isinstance(val, FourierPolynomial):
            pieces = [(None, val)]
        elif isinstance(val, ex.Expr) and all(isinstance(a, FourierPolynomial) for _, a in p._split[(ax, beta)]):
            pieces = p._split[(ax, beta)]
        else:
            return lambda s, ds: quantize_affine(p.observable(s, ds), rep, w)
        for weight, poly in pieces:
            zero = FourierPolynomial(p.m)
            obs = AffineObservable(tuple(poly if k == ax else zero for k in range(p.m)), zero)
            terms.append((beta, weight, quantize_affine(obs, rep, w)))
    herm = all(op.hermitian for *_, op in terms)

    def build(s, ds):
        env = {f"s{j + 1}": float(v) for j, v in enumerate(np.atleast_1d(s))}
        mat = np.zeros((w.size, w.size), dtype=complex)
        leak = 0.0
        real = True
        for beta, weight, op in terms:
            if ds[beta] == 0:
                continue
            c = 1.0 if weight is None else _weight(weight, env)
            real &= c.imag == 0
            c = c * ds[beta]
            mat += c * op.matrix
            leak += abs(c) * op.leakage
        return LinearOperator(w, mat, leak, hermitian=herm and real, rep=rep)

    return build


def holonomy_operator(p: PerturbationSpec, rep: Representation, w: TruncationWindow,
                      path: ParameterPath, steps: int) -> LinearOperator:
    """Midpoint product  F_N ... F_1,  F_j = exp(-i Delta^(sigma_j) dsigma_j)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    _check_path(p, path)
    gen_at = _generator(p, rep, w)
    U = np.eye(w.size, dtype=complex)
    leak = 0.0
    for i, f0, f1 in _arc_grid(path, steps):
        a, b = path.points[i], path.points[i + 1]
        mid = a + 0.5 * (f0 + f1) * (b - a)
        dsigma = (f1 - f0) * (b - a)
        gen = gen_at(mid, dsigma)
        leak += gen.leakage
        U = _unitary_factor(gen) @ U
    return LinearOperator(w, U, leak, rep=rep)


def direct_propagator(H: HamiltonianSpec, p: PerturbationSpec, rep: Representation,
                      w: TruncationWindow, path: ParameterPath, steps: int) -> LinearOperator:
    """Midpoint product integration of the full H^ + Delta^(t) on a uniform time grid."""
    _check_path(p, path)
    Hop = quantize_hamiltonian(H, rep, w)
    grid = np.union1d(np.linspace(path.start, path.end, steps + 1), path.times)
    gen_at = _generator(p, rep, w)
    U = np.eye(w.size, dtype=complex)
    leak = 0.0
    for t0, t1 in zip(grid[:-1], grid[1:]):
        tm = 0.5 * (t0 + t1)
        D = gen_at(path.position(tm), path.rate(tm))
        gen = (Hop + D) * (t1 - t0)
        gen.hermitian = D.hermitian
        leak += D.leakage * (t1 - t0)
        U = _unitary_factor(gen) @ U
    return LinearOperator(w, U, leak, rep=rep)


def factorized_evolution(psi0: WaveFunction, H: HamiltonianSpec, p: PerturbationSpec,
                         rep: Representation, w: TruncationWindow, path: ParameterPath,
                         steps: int) -> WaveFunction:
    """Dynamic phase evolution over the path duration followed by the holonomy factor."""
    defect = commutes_with_hamiltonian(p, H, rep, w, path)
    if defect > NONCOMMUTING_TOL:
        raise NonCommutingPerturbation(
            f"||[Delta, H]|| = {defect:.3g} exceeds {NONCOMMUTING_TOL:g}; the evolution does not factor"
        )
    psi = evolve(psi0, H, rep, path.duration)
    U = holonomy_operator(p, rep, w, path, steps)
    return U.apply(psi)[0]


def holonomy_report(U: LinearOperator) -> dict:
    """JSON-ready matrix plus per-basis-state phases when the operator is diagonal."""
    out = U.to_dict()
    unitarity = np.max(np.abs(U.matrix.conj().T @ U.matrix - np.eye(U.window.size)), initial=0.0)
    out["unitarity_error"] = float(unitarity)
    if U.is_diagonal() or np.max(np.abs(U.matrix - np.diag(np.diag(U.matrix))), initial=0.0) <= 1e-12:
        d = np.diag(U.matrix)
        out["phases"] = [{"n": list(map(int, n)), "phase": float(np.angle(v)), "modulus": float(abs(v))}
                         for n, v in zip(U.basis, d)]
    return out


def holonomy_json(U: LinearOperator) -> str:
    return jsonfmt.dumps(holonomy_report(U))
