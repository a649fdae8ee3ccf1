"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (visible under ``pytest -v`` or
``-s``) and then asserts.  Run only these with

    pytest tests/test_acceptance.py -v
"""
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from tauflat.cli import make_config
from tauflat.experiments import run
from tauflat.gauge import apply_action, random_gauge
from tauflat.groups import SO, SU, Sp, group_exp, group_log, haar_sample, principal_square_root
from tauflat.involution import tau_gauge, tau_point
from tauflat.oracle import builtin_group, exact_fiber_degree
from tauflat.variety import Klein, RP2, diagonal_embed, sample_point

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def report_line(capsys):
    def emit(number, ok, detail, seconds):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} [{seconds:.1f}s]"
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def degree_run(group, trials=50, seed=11):
    t0 = time.perf_counter()
    rep = run(make_config("fiber-count", group, ["rp2", "1"], trials=trials, seed=seed))
    return rep, time.perf_counter() - t0


def degree_verdict(rep, expected):
    s = rep.summary
    counted = s["countable_trials"]
    rate = s["degree_histogram"].get(str(expected), 0) / counted if counted else 0.0
    residual_ok = all(r["residual"] < 1e-8 for r in rep.records if r["status"] == "ok")
    return rate >= 0.95 and residual_ok and counted > 0, rate, counted


def test_criterion_1_su2_degree(report_line):
    rep, secs = degree_run(["su", "2"])
    ok, rate, counted = degree_verdict(rep, 2)
    ok = ok and secs <= 120
    report_line(1, ok, f"SU(2) degree 2 in {rate:.0%} of {counted} countable trials", secs)
    assert ok


@pytest.mark.parametrize("group", [["so", "3"], ["su", "3"]], ids=["SO3", "SU3"])
def test_criterion_2_degree_one(report_line, group):
    rep, secs = degree_run(group)
    ok, rate, counted = degree_verdict(rep, 1)
    ok = ok and secs <= 120
    name = f"{group[0].upper()}({group[1]})"
    report_line(2, ok, f"{name} degree 1 in {rate:.0%} of {counted} countable trials", secs)
    assert ok


def test_criterion_3_sp1_degree(report_line):
    rep, secs = degree_run(["sp", "1"])
    ok, rate, counted = degree_verdict(rep, 2)
    ok = ok and secs <= 120
    report_line(3, ok, f"Sp(1) degree 2 in {rate:.0%} of {counted} countable trials", secs)
    assert ok


def test_criterion_4_twisted_classes(report_line):
    t0 = time.perf_counter()
    details, ok = [], True
    for surface in (["rp2", "1"], ["klein", "1"]):
        rep = run(make_config("surjectivity-probe", ["su", "2"], surface, twist=1, trials=20, seed=4,
                              perturbations=10))
        recs = rep.records
        good = [r for r in recs if r["status"] == "ok" and r["twist_class"] == "[-e]"
                and r["worst_witness_residual"] < 1e-6 and r["stable"]]
        ok = ok and len(good) == 20
        details.append(f"{surface[0]}: {len(good)}/20 stable [-e]")
    secs = time.perf_counter() - t0
    ok = ok and secs <= 300
    report_line(4, ok, "SU(2) N_{-I} witnesses, " + ", ".join(details), secs)
    assert ok


def test_criterion_5_oracle(report_line):
    t0 = time.perf_counter()
    bad = []
    for name in ("Q8", "Z4", "Z2xZ2", "S3"):
        for surface in (RP2(1), Klein(1)):
            rep = exact_fiber_degree(builtin_group(name), surface)
            counted = sum(sum(c["fiber_histogram"].values()) for c in rep.per_class.values())
            if not (rep.degree_matches and rep.generic_disjoint and rep.same_class_equal and counted):
                bad.append(f"{name} {surface}")
    secs = time.perf_counter() - t0
    ok = not bad and secs <= 60
    report_line(5, ok, "exact degree |Z/2Z| and disjoint twist classes for Q8, Z4, Z2xZ2, S3"
                + (f"; failures {bad}" if bad else ""), secs)
    assert ok


def test_criterion_6_phi(report_line):
    t0 = time.perf_counter()
    records = []
    for ell in (1, 2):
        for twist in (0, 1):
            rep = run(make_config("phi-check", ["su", "2"], ["rp2", str(ell)], twist=twist, trials=25,
                                  seed=6 + ell))
            records += rep.records
    image_ok = all(r.get("image_residual", np.inf) < 1e-8 for r in records)
    aligned = sum(r.get("aligned", False) and r["align_residual"] < 1e-8 for r in records)
    secs = time.perf_counter() - t0
    ok = len(records) == 100 and image_ok and aligned >= 98 and secs <= 180
    report_line(6, ok, f"Phi image residuals < 1e-8: {image_ok}; equivariance {aligned}/100", secs)
    assert ok


def test_criterion_7_lifting(report_line):
    t0 = time.perf_counter()
    classes, ok = set(), True
    for twist, expected in ((0, "[e]"), (1, "[-e]")):
        rep = run(make_config("lift-degree", ["su", "2"], ["rp2", "1"], twist=twist, trials=50, seed=7))
        for r in rep.records:
            ok = ok and r["status"] == "ok" and r["identity_holds"] and r["lift_residual"] < 1e-8
            ok = ok and r["obstruction_class"] == expected
            classes.add(r.get("obstruction_class"))
    secs = time.perf_counter() - t0
    ok = ok and classes == {"[e]", "[-e]"} and secs <= 180
    report_line(7, ok, f"lift identity holds in 100/100 trials; obstruction classes {sorted(classes)}", secs)
    assert ok


def _roundtrip_worst(group, n=1000):
    rng = np.random.default_rng(2024)
    worst, cuts = 0.0, 0
    for _ in range(n):
        x = haar_sample(group, rng)
        try:
            back = group_exp(group_log(x)).matrix
            c = principal_square_root(x).matrix
        except Exception:
            cuts += 1
            continue
        worst = max(worst, np.linalg.norm(back - x.matrix), np.linalg.norm(c @ c - x.matrix))
    return worst, cuts


def test_criterion_8_substrate(report_line):
    t0 = time.perf_counter()
    groups = [SU(2), SU(3), SO(3), Sp(1)]
    worst_rt = 0.0
    cuts = 0
    for g in groups:
        w, c = _roundtrip_worst(g)
        worst_rt, cuts = max(worst_rt, w), cuts + c
    rng = np.random.default_rng(8)
    worst_comp = worst_tau = 0.0
    for t in range(100):
        g = groups[t % 4]
        x = apply_action(random_gauge(g, rng), diagonal_embed(sample_point(RP2(1), g, 0, seed=t)))
        k1, k2 = random_gauge(g, rng), random_gauge(g, rng)
        a, b = apply_action(k2, apply_action(k1, x)), apply_action(k2 @ k1, x)
        worst_comp = max(worst_comp, max(np.linalg.norm(u.matrix - v.matrix)
                                         for u, v in zip(a.plus + a.minus, b.plus + b.minus)))
        lhs, rhs = tau_point(apply_action(k1, x)), apply_action(tau_gauge(k1), tau_point(x))
        worst_tau = max(worst_tau, max(np.linalg.norm(u.matrix - v.matrix)
                                       for u, v in zip(lhs.plus + lhs.minus, rhs.plus + rhs.minus)))
    suites = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                             str(ROOT / "tests"), "--ignore", str(ROOT / "tests" / "test_acceptance.py")],
                            cwd=ROOT, capture_output=True, text=True)
    secs = time.perf_counter() - t0
    last = suites.stdout.strip().splitlines()[-1] if suites.stdout.strip() else suites.stderr[-200:]
    ok = (worst_rt < 1e-10 and cuts == 0 and worst_comp < 1e-12 and worst_tau < 1e-12
          and suites.returncode == 0 and secs <= 180)
    report_line(8, ok, f"round-trip {worst_rt:.1e}, composition {worst_comp:.1e}, tau {worst_tau:.1e}, "
                f"invariant suites: {last}", secs)
    assert ok, suites.stdout[-3000:]
