"""Executable invariant suites.

Each suite returns a list of :class:`Check` records with the measured value and
the tolerance it is judged against.  ``run_suites`` is what ``tq check`` runs;
the same functions back the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import classical as cl
from .errors import NonCommutingPerturbation, ValidationError
from .fourier import FourierPolynomial, TruncationWindow, WaveFunction
from .holonomy import (
    ParameterPath,
    PerturbationSpec,
    commutes_with_hamiltonian,
    direct_propagator,
    factorized_evolution,
    holonomy_operator,
)
from .operators import (
    AffineObservable,
    AnnulusFunction,
    Representation,
    action_operator,
    apply_affine,
    dirac_defect,
    generator_set,
    half_form_term,
    prequantum_operator,
    quantize_affine,
    random_affine,
)
from .spectra import HamiltonianSpec, apply_hamiltonian, evolve, quantize_hamiltonian


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    kind: str = "le"  # "le": value <= tolerance; "range": lo <= value <= hi; "flag"

    def as_dict(self) -> dict:
        tol = list(self.tolerance) if isinstance(self.tolerance, tuple) else self.tolerance
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "tolerance": tol}


def le(name, value, tol) -> Check:
    value = float(value)
    return Check(name, value, tol, bool(value <= tol))


def within(name, value, lo, hi) -> Check:
    value = float(value)
    return Check(name, value, (lo, hi), bool(lo <= value <= hi), "range")


def flag(name, ok) -> Check:
    return Check(name, 1.0 if ok else 0.0, 1.0, bool(ok), "flag")


def random_state(rng, m, radius, n_terms=6, half_shift=None) -> WaveFunction:
    store = {}
    for _ in range(n_terms):
        n = tuple(int(v) for v in rng.integers(-radius, radius + 1, size=m))
        store[n] = complex(rng.normal(), rng.normal())
    return WaveFunction(FourierPolynomial(m, store), half_shift)


# 1 ---------------------------------------------------------------------------
def action_spectrum(seed=0) -> list[Check]:
    start = time.perf_counter()
    w = TruncationWindow(2, 8)
    rep = Representation((0.3, 0.7))
    H = HamiltonianSpec.from_expr("I1^2 + 2*I2", 2)
    op = quantize_hamiltonian(H, rep, w)
    expected = np.array([(n1 - 0.3) ** 2 + 2 * (n2 - 0.7) for n1, n2 in w.indices().tolist()])
    diag_err = np.max(np.abs(np.diag(op.matrix).real - expected))
    eig = np.linalg.eigvalsh(op.matrix)
    eig_err = np.max(np.abs(np.sort(eig) - np.sort(expected)))
    elapsed = time.perf_counter() - start
    return [
        le("spectrum.diagonal_vs_formula", diag_err, 1e-12),
        le("spectrum.eigenvalues_vs_formula", eig_err, 1e-12),
        le("spectrum.offdiagonal_max", np.max(np.abs(op.matrix - np.diag(np.diag(op.matrix)))), 0.0),
        le("spectrum.runtime_s", elapsed, 1.0),
    ]


# 2 ---------------------------------------------------------------------------
def dirac_condition(seed=0, n_random=20, m=2, n_max=10, margin=6, bandwidth=3) -> list[Check]:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    w = TruncationWindow(m, n_max)
    rep = Representation(tuple(rng.uniform(-1, 1, size=m)))
    obs = [random_affine(rng, m, bandwidth) for _ in range(n_random)]
    cache: dict = {}
    worst = 0.0
    for i in range(n_random):
        for j in range(i + 1, n_random):
            worst = max(worst, dirac_defect(obs[i], obs[j], rep, w, margin, cache))
    elapsed = time.perf_counter() - start
    herm = max(cache[id(o)].hermitian_error(w.interior_mask(margin)) for o in obs)
    return [
        le("dirac.random_pairs_max_defect", worst, 1e-10),
        le("dirac.hermiticity_max", herm, 1e-12),
        le("dirac.runtime_s", elapsed, 10.0),
    ]


def dirac_generators(seed=0, m=2, n_max=8, margin=4) -> list[Check]:
    rng = np.random.default_rng(seed)
    w = TruncationWindow(m, n_max)
    rep = Representation(tuple(rng.uniform(-1, 1, size=m)))
    gens = generator_set(m)
    cache: dict = {}
    worst = 0.0
    for i, f in enumerate(gens):
        for g in gens[i:]:
            worst = max(worst, dirac_defect(f, g, rep, w, margin, cache))
    return [le("dirac.generator_pairs_max_defect", worst, 1e-10)]


# 3 ---------------------------------------------------------------------------
def representation_equivalences(seed=0) -> list[Check]:
    rng = np.random.default_rng(seed)
    m = 2
    w = TruncationWindow(m, 6)
    idx = w.indices()
    # dyadic offsets keep integer shifts exact in binary floating point
    lam = (0.25, -0.625)
    z = (2, -1)
    rep, rep_z = Representation(lam), Representation(tuple(l + k for l, k in zip(lam, z)))
    gauge_flag = rep.gauge_equivalent(rep_z) and not rep.gauge_equivalent(Representation((0.5, -0.625)))
    mismatches = 0
    multiset_ok = True
    for k in range(m):
        d = np.diag(action_operator(rep, k, w).matrix).real
        dz = np.diag(action_operator(rep_z, k, w).matrix).real
        shifted, inside = w.positions(idx + np.asarray(z))
        mismatches += int(np.count_nonzero(d[inside] != dz[shifted[inside]]))
        multiset_ok &= sorted(d[inside].tolist()) == sorted(dz[shifted[inside]].tolist())
    # same check at a non-dyadic lambda, judged with float slack
    lam_f = tuple(rng.uniform(-1, 1, size=m))
    rf, rfz = Representation(lam_f), Representation(tuple(l + k for l, k in zip(lam_f, z)))
    float_err = 0.0
    for k in range(m):
        d = np.diag(action_operator(rf, k, w).matrix).real
        dz = np.diag(action_operator(rfz, k, w).matrix).real
        shifted, inside = w.positions(idx + np.asarray(z))
        float_err = max(float_err, float(np.max(np.abs(d[inside] - dz[shifted[inside]]))))

    # metalinear: half_shift on axis j  ==  lambda_j - 1/2 without it
    meta_err = 0.0
    lam_h = tuple(rng.uniform(-1, 1, size=m))
    for j in range(m):
        hs = tuple(i == j for i in range(m))
        rh = Representation(lam_h, hs)
        rp = rh.without_half_shift()
        ops_h = [action_operator(rh, k, w) for k in range(m)]
        ops_p = [action_operator(rp, k, w) for k in range(m)]
        for _ in range(5):
            f = random_affine(rng, m, 2)
            ops_h.append(quantize_affine(f, rh, w))
            ops_p.append(quantize_affine(f, rp, w))
        H = HamiltonianSpec.from_expr("I1^2 + 0.5*I1*I2 - I2^3", 2)
        ops_h.append(quantize_hamiltonian(H, rh, w))
        ops_p.append(quantize_hamiltonian(H, rp, w))
        for a, b in zip(ops_h, ops_p):
            meta_err = max(meta_err, float(np.max(np.abs(a.matrix - b.matrix))))
    return [
        le("equivalence.gauge_shift_mismatches", mismatches, 0),
        flag("equivalence.gauge_shift_multiset", multiset_ok),
        flag("equivalence.gauge_predicate", gauge_flag),
        le("equivalence.gauge_shift_float_lambda", float_err, 1e-12),
        le("equivalence.metalinear_entrywise", meta_err, 1e-12),
    ]


# 4 ---------------------------------------------------------------------------
def prequantum_consistency(seed=0, n_random=20) -> list[Check]:
    """Prequantum operator on angle-only sections plus the half-form term equals the polarized one.

    Integer Fourier coefficients and dyadic lambda keep every float operation
    exact, so the comparison is plain equality of coefficient maps.
    """
    rng = np.random.default_rng(seed)
    m = 2
    rep = Representation((0.25, -0.75))
    mismatches = 0
    for _ in range(n_random):
        f = random_affine(rng, m, 3, integer=True)
        pre = prequantum_operator(f, rep)
        hf = half_form_term(f)
        for _ in range(3):
            rho = FourierPolynomial(m, {
                tuple(int(v) for v in rng.integers(-3, 4, size=m)): complex(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
                for _ in range(4)
            })
            lhs = pre(rho) + AnnulusFunction.angle_function(hf * rho)
            rhs = AnnulusFunction.angle_function(apply_affine(f, rep, rho).poly)
            mismatches += int(lhs != rhs)
    return [le("prequantum.coefficient_map_mismatches", mismatches, 0)]


# 5 ---------------------------------------------------------------------------
def evolution(seed=0) -> list[Check]:
    rng = np.random.default_rng(seed)
    m = 2
    rep = Representation(tuple(rng.uniform(-1, 1, size=m)))
    H = HamiltonianSpec.from_expr("0.5*I1^2 + I2 - 0.2*I1*I2", 2)
    unit = group = 0.0
    for _ in range(50):
        psi = random_state(rng, m, 3)
        t1, t2 = rng.uniform(-3, 3, size=2)
        unit = max(unit, abs(evolve(psi, H, rep, t1).norm() - psi.norm()))
        a = evolve(evolve(psi, H, rep, t1), H, rep, t2)
        b = evolve(psi, H, rep, t1 + t2)
        group = max(group, a.poly.max_abs_diff(b.poly))
    # centred difference of i dpsi/dt against H psi
    h = 1e-5
    resid = 0.0
    for _ in range(10):
        psi = random_state(rng, m, 2)
        t = float(rng.uniform(-2, 2))
        plus, minus = evolve(psi, H, rep, t + h), evolve(psi, H, rep, t - h)
        lhs = (plus.poly - minus.poly).scale(1j / (2 * h))
        rhs = apply_hamiltonian(evolve(psi, H, rep, t), H, rep).poly
        resid = max(resid, lhs.max_abs_diff(rhs))
    # revival: H = I1, lambda = 0, t = 2 pi
    H1 = HamiltonianSpec.from_expr("I1", 1)
    psi0 = WaveFunction(FourierPolynomial(1, {(0,): 2 ** -0.5, (1,): 2 ** -0.5}))
    revived = evolve(psi0, H1, Representation((0.0,)), 2 * math.pi)
    return [
        le("evolution.unitarity", unit, 1e-12),
        le("evolution.group_law", group, 1e-12),
        le("evolution.schrodinger_residual", resid, 1e-7),
        le("evolution.revival", revived.poly.max_abs_diff(psi0.poly), 1e-10),
    ]


# 6, 7 ------------------------------------------------------------------------
def constant_lambda_spec(m=2, axis=0, values=(0.7, -0.4)) -> PerturbationSpec:
    entries = {(axis, b): FourierPolynomial.constant(m, v) for b, v in enumerate(values)}
    return PerturbationSpec(m, [axis], len(values), entries)


def square_loop(side=1.0, center=(0.0, 0.0), times=None) -> ParameterPath:
    c = np.asarray(center, dtype=float)
    pts = c + side * np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    t = np.arange(5, dtype=float) if times is None else times
    return ParameterPath(t, pts)


def random_valid_spec(rng, m=2, axis=0, n_params=2) -> PerturbationSpec:
    """Lambda depending on s and on the controlled angle only."""
    entries = {}
    k = axis + 1
    for b in range(n_params):
        c0, c1, c2, c3 = rng.uniform(-1, 1, size=4)
        entries[(axis, b)] = (f"{c0:.6f} + ({c1:.6f} + 0.5*s{(b + 1) % n_params + 1})*cos(phi{k})"
                              f" + {c2:.6f}*s{b + 1}*sin(2*phi{k}) + {c3:.6f}*sin(phi{k})")
    return PerturbationSpec(m, [axis], n_params, entries)


def holonomy_suite(seed=0, steps=4096) -> list[Check]:
    rng = np.random.default_rng(seed)
    m = 2
    w = TruncationWindow(m, 3)
    rep = Representation((0.3, -0.2))
    idx = w.indices()
    spec = constant_lambda_spec(m)

    # (i) loop with constant Lambda
    U = holonomy_operator(spec, rep, w, square_loop(0.8, (0.1, -0.3)), steps)
    loop_err = np.max(np.abs(U.matrix - np.eye(w.size)))

    # (ii) open path: phase exp(-i (n_a - lambda_a) Lambda^a_b D^b)
    path = ParameterPath([0.0, 0.5, 2.0], [[0.0, 0.0], [0.4, 0.9], [1.3, -0.2]])
    D = path.points[-1] - path.points[0]
    U = holonomy_operator(spec, rep, w, path, steps)
    lam_dot_D = 0.7 * D[0] - 0.4 * D[1]
    expected = np.exp(-1j * (idx[:, 0] - rep.lam[0]) * lam_dot_D)
    open_err = np.max(np.abs(U.matrix - np.diag(expected)))

    # (iii) midpoint product is second order
    w1 = TruncationWindow(1, 4)
    rep1 = Representation((0.15,))
    spec1 = random_valid_spec(rng, m=1, axis=0)
    loop = square_loop(1.0, (-0.5, 0.2))
    Us = {k: holonomy_operator(spec1, rep1, w1, loop, k).matrix for k in (16, 32, 64)}
    e1 = np.linalg.norm(Us[32] - Us[16], 2)
    e2 = np.linalg.norm(Us[64] - Us[32], 2)
    ratio = e1 / e2

    # (iv) factorization against the full propagator
    spec2 = random_valid_spec(rng, m=2, axis=0)
    H = HamiltonianSpec.from_expr("0.7*I2^2 + 0.3*I2", 2)
    path2 = ParameterPath([0.0, 0.7, 1.5, 2.5], [[0.0, 0.0], [0.6, 0.2], [0.3, 0.8], [-0.2, 0.4]])
    psi0 = random_state(rng, m, 1)
    psi0 = WaveFunction(psi0.poly.scale(1 / psi0.norm()))
    fact = factorized_evolution(psi0, H, spec2, rep, w, path2, steps)
    direct = direct_propagator(H, spec2, rep, w, path2, steps).apply(psi0)[0]
    fact_err = fact.poly.max_abs_diff(direct.poly)
    Uh = Us[64]
    unitarity = np.max(np.abs(Uh.conj().T @ Uh - np.eye(w1.size)))
    return [
        le("holonomy.constant_loop_identity", loop_err, 1e-8),
        le("holonomy.constant_open_path_phases", open_err, 1e-8),
        within("holonomy.midpoint_convergence_ratio", ratio, 3.5, 4.5),
        le("holonomy.factorized_vs_direct", fact_err, 1e-6),
        le("holonomy.unitarity", unitarity, 1e-8),
    ]


def commutation_suite(seed=0) -> list[Check]:
    rng = np.random.default_rng(seed)
    m = 2
    w = TruncationWindow(m, 4)
    rep = Representation((0.1, 0.45))
    path = ParameterPath([0.0, 1.0, 2.0], [[0.0, 0.0], [1.0, 0.5], [0.2, 1.0]])
    worst = 0.0
    for _ in range(3):
        spec = random_valid_spec(rng, m=2, axis=0)
        H = HamiltonianSpec.from_expr("I2^2 - 0.3*I2", 2)
        worst = max(worst, commutes_with_hamiltonian(spec, H, rep, w, path))
    bad = PerturbationSpec(m, [0], 2, {(0, 0): FourierPolynomial.cos((1, 0), 2.0)})
    H_bad = HamiltonianSpec.from_expr("I1", 2)
    bad_norm = commutes_with_hamiltonian(bad, H_bad, rep, w, path)
    psi0 = WaveFunction(FourierPolynomial.basis((0, 0)))
    try:
        factorized_evolution(psi0, H_bad, bad, rep, w, path, 64)
        rejected = False
    except NonCommutingPerturbation:
        rejected = True
    return [
        le("commutation.valid_specs", worst, 1e-10),
        flag("commutation.invalid_spec_rejected", rejected and bad_norm > 0),
    ]


# 8 ---------------------------------------------------------------------------
def classical_suite(seed=0) -> list[Check]:
    start = time.perf_counter()
    osc = cl.SystemDef("(p1^2 + q1^2)/2", 1, first_integrals=["(p1^2 + q1^2)/2"])
    T = 2 * math.pi
    traj = cl.hamilton_flow(osc, cl.ClassicalState(0.0, (1.0,), (0.0,)), T, 1e-3)
    closure = math.hypot(traj.q[-1, 0] - 1.0, traj.p[-1, 0])
    drift = cl.first_integral_drift(osc, traj)[0] / T

    # a nonlinear system whose energy is a first integral
    quartic = cl.SystemDef("p1^2/2 + q1^4/4", 1, first_integrals=["p1^2/2 + q1^4/4"])
    traj_q = cl.hamilton_flow(quartic, cl.ClassicalState(0.0, (1.2,), (0.3,)), 5.0, 1e-3)
    drift_q = cl.first_integral_drift(quartic, traj_q)[0] / 5.0

    driven = cl.SystemDef("p1^2/2 + (1 + 0.1*sin(t))*q1^2/2 + 0.1*t", 1)
    ext = cl.extended_flow(driven, cl.ExtendedState(0.0, (1.0,), (0.0,), 0.0), 5.0, 1e-3)
    hstar = cl.extended_energy_drift(driven, ext) / 5.0
    plain = cl.hamilton_flow(driven, cl.ClassicalState(0.0, (1.0,), (0.0,)), 5.0, 1e-3)
    projection = max(np.max(np.abs(ext.q - plain.q)), np.max(np.abs(ext.p - plain.p)))

    action_err = abs(cl.action_by_quadrature(osc, 0.5) - 0.5)
    I_quad = cl.action_by_quadrature(quartic, 1.0)
    I_mc = cl.monte_carlo_action(quartic, 1.0, seed=seed)
    elapsed = time.perf_counter() - start
    return [
        le("classical.orbit_closure", closure, 1e-6),
        le("classical.first_integral_drift_per_time", max(drift, drift_q), 1e-8),
        le("classical.extended_hstar_drift_per_time", hstar, 1e-8),
        le("classical.projection_identity", projection, 1e-12),
        le("classical.oscillator_action", action_err, 1e-8),
        le("classical.quartic_action_vs_monte_carlo", abs(I_quad - I_mc), 1e-3),
        le("classical.runtime_s", elapsed, 30.0),
    ]


# 9 ---------------------------------------------------------------------------
def correspondence_suite(seed=0) -> list[Check]:
    # level sets are circles with I = (q^2 + p^2)/2, so H(I) = I^2
    sys = cl.SystemDef("((p1^2 + q1^2)/2)^2", 1)
    energies = np.linspace(0.04, 64.0, 12)
    rep = Representation((0.0,))
    report = cl.frequency_correspondence(sys, rep, TruncationWindow(1, 8), energies)
    coef = report["fit"]["coefficients"]
    fit_err = max(abs(c - e) for c, e in zip(coef + [0.0] * (3 - len(coef)), [0.0, 0.0, 1.0]))
    return [
        le("correspondence.frequency_vs_spacing", report["max_discrepancy"], 1e-9),
        le("correspondence.fit_recovers_I_squared", fit_err, 1e-7),
        flag("correspondence.levels_compared", len(report["comparisons"]) >= 5),
    ]


# 10 --------------------------------------------------------------------------
def canonical_shift_suite(seed=0, n_points=20) -> list[Check]:
    rng = np.random.default_rng(seed)
    m, A = 2, 2
    F = []
    for _ in range(A):
        c = rng.uniform(-1, 1, size=6)
        F.append(f"{c[0]:.8f}*I1 + {c[1]:.8f}*I2^2 + {c[2]:.8f}*I1*I2 + {c[3]:.8f}*I1^3"
                 f" + {c[4]:.8f}*I2 + {c[5]:.8f}*I1^2*I2")
    shift = cl.CanonicalShift(F, m)
    fd = exact = 0.0
    for _ in range(n_points):
        z = rng.uniform(-1, 1, size=shift.size)
        fd = max(fd, shift.symplectic_error(z, h=1e-6))
        exact = max(exact, shift.symplectic_error(z))
    return [
        le("canonical_shift.symplectic_numerical_jacobian", fd, 1e-9),
        le("canonical_shift.symplectic_exact_jacobian", exact, 1e-12),
    ]


SUITES = {
    "spectrum": action_spectrum,
    "dirac": dirac_condition,
    "dirac_generators": dirac_generators,
    "equivalence": representation_equivalences,
    "prequantum": prequantum_consistency,
    "evolution": evolution,
    "holonomy": holonomy_suite,
    "commutation": commutation_suite,
    "classical": classical_suite,
    "correspondence": correspondence_suite,
    "canonical_shift": canonical_shift_suite,
}

# wall-clock checks are reported in timing mode only, so reports stay reproducible
TIMING_CHECKS = {"spectrum.runtime_s", "dirac.runtime_s", "classical.runtime_s"}


def run_suites(seed=42, names=None, timing=False) -> list[dict]:
    out = []
    for name in names or SUITES:
        if name not in SUITES:
            raise ValidationError([f"suites: unknown suite {name!r}; choose from {sorted(SUITES)}"])
        checks = [c for c in SUITES[name](seed) if timing or c.name not in TIMING_CHECKS]
        out.append({"suite": name, "passed": all(c.passed for c in checks),
                    "checks": [c.as_dict() for c in checks]})
    return out
