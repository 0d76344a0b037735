"""Classical companion: Hamilton flows, the extended autonomous lift, 1-DOF
action-angle charts by quadrature, and canonical action shifts.

Systems are written in the expression grammar over ``t``, ``q1..qm``, ``p1..pm``.
Vector fields use exact symbolic partials of the Hamiltonian.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import expr as ex
from . import jsonfmt
from .errors import FitFailure, NonFiniteDerivative, OpenOrbit, QuadratureFailure, UnsupportedExpression
from .fourier import TruncationWindow
from .operators import Representation
from .spectra import HamiltonianSpec, quantize_hamiltonian


@dataclass(frozen=True)
class ClassicalState:
    t: float
    q: tuple
    p: tuple


@dataclass(frozen=True)
class ExtendedState(ClassicalState):
    p0: float = 0.0


class SystemDef:
    """Time-dependent Hamiltonian H(t, q, p) plus optional first integrals."""

    def __init__(self, hamiltonian, m: int = 1, first_integrals=()):
        self.m = int(m)
        self.hamiltonian = ex.parse(hamiltonian) if isinstance(hamiltonian, str) else hamiltonian
        self.first_integrals = [ex.parse(f) if isinstance(f, str) else f for f in first_integrals]
        self.variables = ["t"] + [f"q{k + 1}" for k in range(self.m)] + [f"p{k + 1}" for k in range(self.m)]
        extra = set().union(self.hamiltonian.symbols(), *(f.symbols() for f in self.first_integrals))
        extra -= set(self.variables)
        if extra:
            raise UnsupportedExpression(f"unknown symbols {sorted(extra)}; expected t, q1..q{self.m}, p1..p{self.m}")
        H = self.hamiltonian
        qs, ps = self.variables[1 : self.m + 1], self.variables[self.m + 1 :]
        # field components: dq/dt = dH/dp, dp/dt = -dH/dq, and dH/dt for the lift
        self.field_exprs = [H.diff(p) for p in ps] + [-H.diff(q) for q in qs] + [H.diff("t")]
        self._field = ex.compile_many(self.field_exprs, self.variables)
        self._H = H.compile(self.variables)
        self._integrals = [f.compile(self.variables) for f in self.first_integrals]

    def energy(self, t, q, p) -> float:
        return self._H(t, *q, *p)

    def field(self, t, y) -> np.ndarray:
        """(dq/dt, dp/dt, dH/dt) at time t and phase point y = (q, p)."""
        try:
            with np.errstate(all="ignore"):
                out = np.array(self._field(t, *y[: 2 * self.m]), dtype=float)
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise NonFiniteDerivative(f"vector field undefined at t={t}: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise NonFiniteDerivative(f"non-finite vector field at t={t}, y={list(y)}")
        return out

    def integral_values(self, t, q, p) -> list[float]:
        return [f(t, *q, *p) for f in self._integrals]


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    p0: np.ndarray | None = field(default=None)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        q, p = tuple(self.q[i]), tuple(self.p[i])
        if self.p0 is None:
            return ClassicalState(float(self.t[i]), q, p)
        return ExtendedState(float(self.t[i]), q, p, float(self.p0[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = self.q.shape[1]
        header = ["t"] + [f"q{k + 1}" for k in range(m)] + [f"p{k + 1}" for k in range(m)]
        if self.p0 is not None:
            header.append("p0")
        w.writerow(header)
        f = jsonfmt.format_float
        for i in range(len(self)):
            row = [f(self.t[i])] + [f(v) for v in self.q[i]] + [f(v) for v in self.p[i]]
            if self.p0 is not None:
                row.append(f(self.p0[i]))
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        out = {"t": self.t.tolist(), "q": self.q.tolist(), "p": self.p.tolist()}
        if self.p0 is not None:
            out["p0"] = self.p0.tolist()
        return out


def _rk4(sys: SystemDef, t0: float, y0: np.ndarray, t_end: float, dt: float, lift: bool):
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = t_end - t0
    n = max(1, math.ceil(span / dt - 1e-9)) if span > 0 else 0
    h = span / n if n else 0.0
    m2 = 2 * sys.m
    width = m2 + 1 if lift else m2
    ys = np.empty((n + 1, width))
    ts = t0 + h * np.arange(n + 1)
    ys[0] = y0
    y = np.array(y0, dtype=float)

    def rhs(t, y):
        f = sys.field(t, y)
        return f if lift else f[:m2]

    # the lift only appends p0' = -dH/dt, so the (q, p) arithmetic is identical
    sign = np.ones(width)
    if lift:
        sign[-1] = -1.0
    for i in range(n):
        t = ts[i]
        k1 = sign * rhs(t, y)
        k2 = sign * rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = sign * rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = sign * rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[i + 1] = y
    return ts, ys


def hamilton_flow(sys: SystemDef, x0: ClassicalState, t_end: float, dt: float) -> Trajectory:
    """Fixed-step RK4 for dq/dt = dH/dp, dp/dt = -dH/dq (last step shrunk to land on t_end)."""
    y0 = np.concatenate([np.asarray(x0.q, float), np.asarray(x0.p, float)])
    ts, ys = _rk4(sys, float(x0.t), y0, t_end, dt, lift=False)
    m = sys.m
    return Trajectory(ts, ys[:, :m], ys[:, m : 2 * m])


def extended_flow(sys: SystemDef, x0: ExtendedState, t_end: float, dt: float) -> Trajectory:
    """Flow of H* = p0 + H on the homogeneous phase space; p0 obeys dp0/dt = -dH/dt."""
    y0 = np.concatenate([np.asarray(x0.q, float), np.asarray(x0.p, float), [float(x0.p0)]])
    ts, ys = _rk4(sys, float(x0.t), y0, t_end, dt, lift=True)
    m = sys.m
    return Trajectory(ts, ys[:, :m], ys[:, m : 2 * m], ys[:, -1])


def first_integral_drift(sys: SystemDef, traj: Trajectory, integrals=None) -> list[float]:
    """max_t |F_k(x(t)) - F_k(x(0))| for each first integral."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    fns = sys._integrals if integrals is None else [
        (ex.parse(f) if isinstance(f, str) else f).compile(sys.variables) for f in integrals
    ]
    out = []
    for f in fns:
        vals = np.array([f(traj.t[i], *traj.q[i], *traj.p[i]) for i in range(len(traj))], dtype=float)
        out.append(float(np.max(np.abs(vals - vals[0]))))
    return out


def extended_energy_drift(sys: SystemDef, traj: Trajectory) -> float:
    """max_t |H*(x(t)) - H*(x(0))| with H* = p0 + H."""
    if traj.p0 is None:
        raise ValueError("trajectory carries no p0 column")
    vals = np.array([traj.p0[i] + sys.energy(traj.t[i], traj.q[i], traj.p[i]) for i in range(len(traj))])
    return float(np.max(np.abs(vals - vals[0])))


# ----------------------------------------------------------------------------
# one degree of freedom: actions and angles by quadrature


class ActionAngleChart:
    """Numerical action-angle chart for a 1-DOF system frozen at time ``t0``.

    Assumes closed level sets symmetric under p -> -p with dq/dt having the
    sign of p (natural systems H = T(|p|) + V(q) and alike).  The angle is 0 at
    the right turning point and grows along the flow.
    """

    def __init__(self, sys: SystemDef, t0: float = 0.0, q_center: float = 0.0, q_limit: float = 1e6):
        if sys.m != 1:
            raise ValueError("action quadrature is implemented for one degree of freedom")
        self.sys = sys
        self.t0 = float(t0)
        self.q_center = float(q_center)
        self.q_limit = q_limit
        self.H_in_actions: HamiltonianSpec | None = None
        self._dHdp = sys.hamiltonian.diff("p1").compile(sys.variables)

    def H(self, q, p):
        return self.sys.energy(self.t0, (q,), (p,))

    def _momentum(self, q, E):
        """Largest p >= 0 with H(q, p) = E (0 at or beyond a turning point)."""
        g0 = E - self.H(q, 0.0)
        if g0 <= 0:
            return 0.0
        hi = max(1.0, math.sqrt(g0))
        while self.H(q, hi) < E:
            hi *= 2.0
            if hi > 1e12:
                raise OpenOrbit(f"momentum unbounded at q={q}")
        return optimize.brentq(lambda p: self.H(q, p) - E, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def turning_points(self, E) -> tuple[float, float]:
        """Roots of E - H(q, 0) around q_center by expansion and bisection (tol 1e-12)."""
        c = self.q_center
        if E - self.H(c, 0.0) < 0:
            raise OpenOrbit(f"energy {E} lies below H(q_center, 0); no orbit through this well")
        out = []
        for direction in (-1.0, 1.0):
            inner, step = c, 1e-3
            while True:
                outer = c + direction * step
                if E - self.H(outer, 0.0) < 0:
                    break
                inner = outer
                step *= 2.0
                if step > self.q_limit:
                    raise OpenOrbit(f"no turning point found for E={E} (orbit escapes)")
            lo, hi = inner, outer
            for _ in range(200):
                if abs(hi - lo) <= 1e-12:
                    break
                mid = 0.5 * (lo + hi)
                if E - self.H(mid, 0.0) >= 0:
                    lo = mid
                else:
                    hi = mid
            out.append(lo)
        return out[0], out[1]

    def _quad(self, fn, a, b):
        """Integrate over [a, b] in the variable q = c + r sin(theta)."""
        if b <= a:
            return 0.0
        c, r = 0.5 * (a + b), 0.5 * (b - a)
        th_a = math.asin(max(-1.0, min(1.0, (a - c) / r)))
        th_b = math.asin(max(-1.0, min(1.0, (b - c) / r)))

        def integrand(th):
            return fn(c + r * math.sin(th)) * r * math.cos(th)

        with warnings.catch_warnings():
            # roundoff warnings near turning points are judged by the error estimate below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(integrand, th_a, th_b, epsabs=1e-14, epsrel=1e-12, limit=200)
        if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise QuadratureFailure(f"quadrature did not converge (estimate {val}, error {err})")
        return val

    def action(self, E) -> float:
        """I = (1/2 pi) closed-loop integral of p dq."""
        if E - self.H(self.q_center, 0.0) == 0:
            return 0.0
        qm, qp = self.turning_points(E)
        if qp - qm <= 1e-12:
            return 0.0
        return self._quad(lambda q: self._momentum(q, E), qm, qp) / math.pi

    def _time(self, E, a, b):
        """Time to travel between a and b on one branch of the level set."""

        def inv_speed(q):
            p = self._momentum(q, E)
            v = abs(self._dHdp(self.t0, q, p))
            return 1.0 / v if v > 0 else 0.0

        return self._quad(inv_speed, a, b)

    def period(self, E) -> float:
        qm, qp = self.turning_points(E)
        return 2.0 * self._time(E, qm, qp)

    def forward(self, q, p) -> tuple[float, float]:
        """(q, p) -> (phi, I) with phi in [0, 2 pi)."""
        E = self.H(q, p)
        qm, qp = self.turning_points(E)
        half = self._time(E, qm, qp)
        q = min(max(q, qm), qp)
        if p <= 0:
            tau = self._time(E, q, qp)
        else:
            tau = half + self._time(E, qm, q)
        phi = math.pi * tau / half
        return phi % (2 * math.pi), self.action(E)

    def energy_of_action(self, I) -> float:
        E_lo = self.H(self.q_center, 0.0)
        if I <= 0:
            return E_lo
        E_hi = E_lo + max(1.0, I)
        while self.action(E_hi) < I:
            E_hi = E_lo + 2.0 * (E_hi - E_lo)
        return optimize.brentq(lambda E: self.action(E) - I, E_lo, E_hi, xtol=1e-14, rtol=1e-14)

    def inverse(self, phi, I) -> tuple[float, float]:
        """(phi, I) -> (q, p)."""
        E = self.energy_of_action(I)
        qm, qp = self.turning_points(E)
        half = self._time(E, qm, qp)
        tau = (phi % (2 * math.pi)) / math.pi * half
        if tau <= half:
            q = optimize.brentq(lambda x: self._time(E, x, qp) - tau, qm, qp, xtol=1e-14)
            return q, -self._momentum(q, E)
        q = optimize.brentq(lambda x: self._time(E, qm, x) - (tau - half), qm, qp, xtol=1e-14)
        return q, self._momentum(q, E)

    def fit(self, energies, max_degree=4, tol=1e-9) -> HamiltonianSpec:
        """Least-squares polynomial H(I) from quadrature samples; stored on the chart."""
        I = np.array([self.action(E) for E in energies])
        spec, _ = fit_hamiltonian(I, np.asarray(energies, float), max_degree, tol)
        self.H_in_actions = spec
        return spec


def action_by_quadrature(sys: SystemDef, energy: float, t0: float = 0.0, q_center: float = 0.0) -> float:
    return ActionAngleChart(sys, t0, q_center).action(energy)


def monte_carlo_action(sys: SystemDef, energy: float, samples: int = 1 << 20, seed: int = 0,
                       t0: float = 0.0, q_center: float = 0.0) -> float:
    """Phase-space area of {H < E} over 2 pi, by scrambled-Sobol sampling of a bounding box.

    Independent of the quadrature route: it only needs H itself, the turning
    points to size the box, and a momentum bound.
    """
    from scipy.stats import qmc

    chart = ActionAngleChart(sys, t0, q_center)
    qm, qp = chart.turning_points(energy)
    qs = np.linspace(qm, qp, 401)
    pmax = 1.05 * max(chart._momentum(q, energy) for q in qs) + 1e-12
    pts = qmc.Sobol(2, scramble=True, seed=seed).random(samples)
    q = qm + (qp - qm) * pts[:, 0]
    p = pmax * pts[:, 1]
    vals = sys.hamiltonian.evaluate({"t": t0, "q1": q, "p1": p})
    inside = int(np.count_nonzero(vals < energy))
    # H is even in p, so the upper half-box sees half of the orbit's area
    area = 2.0 * (qp - qm) * pmax * inside / samples
    return area / (2 * math.pi)


def fit_hamiltonian(I, E, max_degree=4, tol=1e-9) -> tuple[HamiltonianSpec, dict]:
    """Smallest-degree least-squares fit E = sum_d c_d I^d whose residual is below tol."""
    I = np.asarray(I, dtype=float)
    E = np.asarray(E, dtype=float)
    if I.size == 0:
        raise FitFailure("no samples to fit")
    best = None
    scale = max(1.0, float(np.max(np.abs(E))))
    for deg in range(1, max_degree + 1):
        if I.size < deg + 1:
            break
        V = np.vander(I, deg + 1, increasing=True)
        cond = np.linalg.cond(V)
        if cond > 1e12:
            raise FitFailure(f"ill-conditioned fit (condition number {cond:.3g}) at degree {deg}")
        coef, *_ = np.linalg.lstsq(V, E, rcond=None)
        resid = float(np.max(np.abs(V @ coef - E)))
        best = (deg, coef, resid, cond)
        if resid <= tol * scale:
            break
    if best is None:
        raise FitFailure(f"need at least 2 samples, got {I.size}")
    deg, coef, resid, cond = best
    spec = HamiltonianSpec(1, {(d,): float(c) for d, c in enumerate(coef)})
    return spec, {"degree": deg, "coefficients": [float(c) for c in coef], "max_residual": resid,
                  "condition": float(cond)}


def frequency_correspondence(sys: SystemDef, rep: Representation, w: TruncationWindow, energies,
                             max_degree=4, t0=0.0, q_center=0.0) -> dict:
    """Compare classical dH/dI at I = n - lambda + 1/2 with level spacings E_{n+1} - E_n.

    Only levels whose midpoint action lies inside the sampled action range are compared.
    """
    energies = list(energies)
    if not energies:
        raise FitFailure("empty energy range")
    chart = ActionAngleChart(sys, t0, q_center)
    I = np.array([chart.action(E) for E in energies])
    spec, fit_info = fit_hamiltonian(I, np.array(energies, float), max_degree)
    Hop = quantize_hamiltonian(spec, rep, w)
    levels = np.diag(Hop.matrix).real
    idx = w.indices()[:, 0]
    act = rep.action_values(w.indices())[:, 0]
    coef = fit_info["coefficients"]
    rows = []
    for j in range(len(idx) - 1):
        mid = 0.5 * (act[j] + act[j + 1])
        if not I.min() - 1e-12 <= mid <= I.max() + 1e-12:
            continue
        freq = sum(d * c * mid ** (d - 1) for d, c in enumerate(coef) if d)
        spacing = levels[j + 1] - levels[j]
        rows.append({"n": int(idx[j]), "action": float(mid), "classical_frequency": float(freq),
                     "quantum_spacing": float(spacing), "discrepancy": float(abs(freq - spacing))})
    return {
        "fit": fit_info,
        "comparisons": rows,
        "max_discrepancy": max((r["discrepancy"] for r in rows), default=0.0),
    }


# ----------------------------------------------------------------------------
# canonical shifts of generalized action-angle coordinates


class CanonicalShift:
    """x' = x,  phi'^i = phi^i + x^a dF_a/dI_i,  I'_a = I_a - F_a(I),  I'_i = I_i.

    Coordinates are ordered z = (x^a, phi^i, I_a, I_i); F_a are expressions in I1..Im.
    """

    def __init__(self, F, m: int):
        self.m = int(m)
        self.F = [ex.parse(f) if isinstance(f, str) else f for f in F]
        self.A = len(self.F)
        acts = [f"I{k + 1}" for k in range(self.m)]
        self._acts = acts
        self._F = ex.compile_many(self.F, acts) if self.F else None
        grads = [f.diff(a) for f in self.F for a in acts]
        self._grad = ex.compile_many(grads, acts) if grads else None
        hess = [f.diff(a).diff(b) for f in self.F for a in acts for b in acts]
        self._hess = ex.compile_many(hess, acts) if hess else None

    @property
    def size(self):
        return 2 * (self.A + self.m)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        A, m = self.A, self.m
        return z[:A], z[A : A + m], z[A + m : 2 * A + m], z[2 * A + m :]

    def __call__(self, x, phi, I_a, I_k):
        x, phi, I_a, I_k = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, phi, I_a, I_k))
        if not self.A:
            return x.copy(), phi.copy(), I_a.copy(), I_k.copy()
        F = np.array(self._F(*I_k), dtype=float)
        G = np.array(self._grad(*I_k), dtype=float).reshape(self.A, self.m)
        return x.copy(), phi + x @ G, I_a - F, I_k.copy()

    def apply(self, z) -> np.ndarray:
        return np.concatenate(self(*self.split(z)))

    def jacobian(self, z, h=None) -> np.ndarray:
        """Exact Jacobian from symbolic derivatives, or central differences with step h."""
        z = np.asarray(z, dtype=float)
        n = self.size
        if h is not None:
            J = np.empty((n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                J[:, j] = (self.apply(z + e) - self.apply(z - e)) / (2 * h)
            return J
        A, m = self.A, self.m
        x, _, _, I_k = self.split(z)
        J = np.eye(n)
        if not A:
            return J
        G = np.array(self._grad(*I_k), dtype=float).reshape(A, m)
        Hs = np.array(self._hess(*I_k), dtype=float).reshape(A, m, m)
        rx, rphi, ra, rk = slice(0, A), slice(A, A + m), slice(A + m, 2 * A + m), slice(2 * A + m, n)
        J[rphi, rx] = G.T
        J[rphi, rk] = np.einsum("a,aij->ij", x, Hs)
        J[ra, rk] = -G
        return J

    def symplectic_matrix(self) -> np.ndarray:
        half = self.A + self.m
        return np.block([[np.zeros((half, half)), np.eye(half)], [-np.eye(half), np.zeros((half, half))]])

    def symplectic_error(self, z, h=None) -> float:
        """max |J^T Omega J - Omega| at the point z."""
        J = self.jacobian(z, h)
        W = self.symplectic_matrix()
        return float(np.max(np.abs(J.T @ W @ J - W)))


def canonical_shift(x, phi, I_a, I_k, F, m=None):
    """Apply the shift generated by functions F_a(I) to one coordinate tuple."""
    m = len(np.atleast_1d(phi)) if m is None else m
    return CanonicalShift(F, m)(x, phi, I_a, I_k)
