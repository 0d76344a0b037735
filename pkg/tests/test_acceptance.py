"""Acceptance criteria 1-11.  Each test prints one ``criterion N: PASS|FAIL`` line.

Tolerances are written out here rather than read back from the suites, so a
suite that loosened its own threshold would still fail.
"""

import os
import subprocess
import sys
import time

import pytest

from torusquant import checks

SEED = 42


@pytest.fixture
def verdict(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, title, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)
        assert ok, line

    return emit


def values(results):
    return {c.name: c.value for c in results}


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


def test_criterion_01_action_spectrum(verdict):
    res, dt = timed(checks.action_spectrum, SEED)
    v = values(res)
    err = max(v["spectrum.diagonal_vs_formula"], v["spectrum.eigenvalues_vs_formula"])
    ok = err <= 1e-12 and v["spectrum.offdiagonal_max"] == 0.0 and dt < 1.0
    verdict(1, "action spectrum", ok, f"max err {err:.2e}, {dt:.2f} s")


def test_criterion_02_dirac_condition(verdict):
    res, dt = timed(checks.dirac_condition, SEED, n_random=20, m=2, n_max=10, margin=6, bandwidth=3)
    d = values(res)["dirac.random_pairs_max_defect"]
    verdict(2, "Dirac condition", d <= 1e-10 and dt < 10.0, f"defect {d:.2e}, {dt:.2f} s")


def test_criterion_03_representation_equivalences(verdict):
    v = values(checks.representation_equivalences(SEED))
    ok = (v["equivalence.gauge_shift_mismatches"] == 0
          and v["equivalence.gauge_shift_multiset"] == 1.0
          and v["equivalence.gauge_shift_float_lambda"] <= 1e-12
          and v["equivalence.metalinear_entrywise"] <= 1e-12)
    verdict(3, "representation equivalences", ok,
            f"gauge mismatches {v['equivalence.gauge_shift_mismatches']:.0f}, "
            f"half-form {v['equivalence.metalinear_entrywise']:.2e}")


def test_criterion_04_prequantum_consistency(verdict):
    v = values(checks.prequantum_consistency(SEED, n_random=20))
    n = v["prequantum.coefficient_map_mismatches"]
    verdict(4, "prequantum vs polarized", n == 0, f"{n:.0f} mismatched coefficient maps")


def test_criterion_05_evolution(verdict):
    v = values(checks.evolution(SEED))
    ok = (v["evolution.unitarity"] <= 1e-12 and v["evolution.group_law"] <= 1e-12
          and v["evolution.schrodinger_residual"] <= 1e-7 and v["evolution.revival"] <= 1e-10)
    verdict(5, "evolution", ok, ", ".join(f"{k.split('.')[1]} {x:.1e}" for k, x in v.items()))


def test_criterion_06_holonomy(verdict):
    v = values(checks.holonomy_suite(SEED, steps=4096))
    ratio = v["holonomy.midpoint_convergence_ratio"]
    ok = (v["holonomy.constant_loop_identity"] <= 1e-8
          and v["holonomy.constant_open_path_phases"] <= 1e-8
          and 3.5 <= ratio <= 4.5
          and v["holonomy.factorized_vs_direct"] <= 1e-6)
    verdict(6, "holonomy", ok,
            f"loop {v['holonomy.constant_loop_identity']:.1e}, phases "
            f"{v['holonomy.constant_open_path_phases']:.1e}, ratio {ratio:.3f}, "
            f"factorized {v['holonomy.factorized_vs_direct']:.1e}")


def test_criterion_07_commutation(verdict):
    v = values(checks.commutation_suite(SEED))
    ok = v["commutation.valid_specs"] <= 1e-10 and v["commutation.invalid_spec_rejected"] == 1.0
    verdict(7, "commutation precondition", ok, f"valid {v['commutation.valid_specs']:.1e}, invalid rejected")


def test_criterion_08_classical(verdict):
    res, dt = timed(checks.classical_suite, SEED)
    v = values(res)
    ok = (v["classical.orbit_closure"] <= 1e-6
          and v["classical.first_integral_drift_per_time"] <= 1e-8
          and v["classical.extended_hstar_drift_per_time"] <= 1e-8
          and v["classical.oscillator_action"] <= 1e-8
          and v["classical.quartic_action_vs_monte_carlo"] <= 1e-3
          and dt < 30.0)
    verdict(8, "classical oracle", ok,
            f"closure {v['classical.orbit_closure']:.1e}, MC {v['classical.quartic_action_vs_monte_carlo']:.1e}, "
            f"{dt:.2f} s")


def test_criterion_09_correspondence(verdict):
    v = values(checks.correspondence_suite(SEED))
    d = v["correspondence.frequency_vs_spacing"]
    verdict(9, "quantum-classical correspondence", d <= 1e-9 and v["correspondence.levels_compared"] == 1.0,
            f"max discrepancy {d:.1e}")


def test_criterion_10_canonical_shift(verdict):
    v = values(checks.canonical_shift_suite(SEED, n_points=20))
    e = v["canonical_shift.symplectic_numerical_jacobian"]
    ok = e <= 1e-9 and v["canonical_shift.symplectic_exact_jacobian"] <= 1e-9
    verdict(10, "canonical shift symplecticity", ok, f"FD Jacobian {e:.1e}")


def test_criterion_11_determinism(verdict):
    env = dict(os.environ, PYTHONHASHSEED="random")
    cmd = [sys.executable, "-m", "torusquant.cli", "check", "--seed", str(SEED)]
    runs = [subprocess.run(cmd, capture_output=True, env=env, timeout=600) for _ in range(2)]
    codes = [r.returncode for r in runs]
    same = runs[0].stdout == runs[1].stdout and len(runs[0].stdout) > 0
    verdict(11, "tq check determinism", same and codes == [0, 0],
            f"exit codes {codes}, {len(runs[0].stdout)} bytes, identical={same}")
