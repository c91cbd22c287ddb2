"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s``; the lines are also
repeated in the terminal summary. Sweeps are computed once per module and
shared between the criteria that reuse them.
"""

import csv
import io
import json
import math
import time

import numpy as np
import pytest

from seqcert.analytic import critical_rates, delta_threshold
from seqcert.certify import (
    guessing_bound,
    guessing_program,
    max_confidence_sdp,
    shannon_program,
    shannon_tradeoff,
)
from seqcert.cli import main, make_grid
from seqcert.gaussradau import radau_quadrature
from seqcert.quantum import (
    ScenarioParams,
    build_mcm_chain,
    build_preparations,
    honest_stats,
    post_measurement_ensemble,
    shannon_entropy_bits,
    simulate_joint,
)

STEP = 0.005
ZERO_BITS = 1e-6
POSITIVE_BITS = 1e-4
POINTS = {"(0.5, 1)": ScenarioParams(0.5, 1.0), "(0.25, 1)": ScenarioParams(0.25, 1.0)}
SHANNON_POINT = (ScenarioParams(0.5, 1.0), 0.55)
SHANNON_M = (2, 4, 8, 12)

# every certified instance from criteria 2-4 and 7, for criterion 8
INSTANCES: list = []


def _grid(params):
    return make_grid(params.x, 1.0, STEP)


def _guess(target, params, q):
    stats = honest_stats(params, q)
    ens = post_measurement_ensemble(params, q) if target == "charlie-trusted" else build_preparations(params)
    b = guessing_bound(target, ens, stats)
    INSTANCES.append((b, lambda: guessing_program(target, ens, stats, 0, False, True)))
    return b


@pytest.fixture(scope="module")
def sweeps():
    t0 = time.perf_counter()
    out = {}
    for name, params in POINTS.items():
        grid = _grid(params)
        out[name] = {
            "grid": grid,
            "bob": [_guess("bob", params, q).value_bits for q in grid],
            "charlie": [_guess("charlie", params, q).value_bits for q in grid],
        }
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def shannon_values():
    params, q = SHANNON_POINT
    ens = build_preparations(params)
    stats = honest_stats(params, q)
    t0 = time.perf_counter()
    values = []
    for m in SHANNON_M:
        b = shannon_tradeoff("bob", ens, stats, m)
        INSTANCES.append((b, lambda m=m: shannon_program("bob", ens, stats, m, 0, False, True)))
        values.append(b.value_bits)
    return values, time.perf_counter() - t0


def test_criterion_01_confidence_grid(report):
    t0 = time.perf_counter()
    worst = 0.0
    for delta in np.linspace(0.0, 0.9, 9):
        for r in np.linspace(0.0, 0.9, 9):
            params = ScenarioParams(float(delta), float(r))
            closed = 0.5 * (1 + r * math.sqrt(1 - delta**2) / math.sqrt(1 - r**2 * delta**2))
            worst = max(worst, abs(max_confidence_sdp(build_preparations(params)) - closed))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    assert report("criterion 1 (confidence SDP vs closed form)", ok, f"max deviation {worst:.2e} (tol 1e-6), {elapsed:.1f} s (limit 30 s)")


def test_criterion_02_bob_critical_rate(report, sweeps):
    ok_all = True
    for name, params in POINTS.items():
        s = sweeps[name]
        expected = critical_rates(params).q_crit_bob
        zero = [q for q, h in zip(s["grid"], s["bob"]) if h < ZERO_BITS]
        found = zero[0] if zero else math.nan
        ok = abs(found - expected) <= STEP + 1e-12 and sweeps["seconds"] < 900
        ok_all &= report(
            f"criterion 2 (Bob critical rate at {name})", ok,
            f"first zero-bit grid Q {found:.3f}, expected {expected:.5f} within {STEP}",
        )
    assert ok_all


def test_criterion_03_charlie_critical_rate(report, sweeps):
    ok_all = True
    for name, params in POINTS.items():
        s = sweeps[name]
        expected = critical_rates(params).q_crit_charlie
        pairs = list(zip(s["grid"], s["charlie"]))
        below = max(h for q, h in pairs if q < expected - STEP)
        first_pos = next((q for q, h in pairs if h > POSITIVE_BITS), math.nan)
        above = next(h for q, h in pairs if q > expected)
        ok = below < ZERO_BITS and abs(first_pos - expected) <= STEP + 1e-12 and above > POSITIVE_BITS
        ok_all &= report(
            f"criterion 3 (Charlie critical rate at {name})", ok,
            f"max bits below {expected:.6f}: {below:.1e}; first certifying grid Q {first_pos:.3f}; "
            f"bits one step above: {above:.4f}",
        )
    assert ok_all


def test_criterion_04_window(report, sweeps):
    def both(name):
        s = sweeps[name]
        return [q for q, hb, hc in zip(s["grid"], s["bob"], s["charlie"]) if hb > POSITIVE_BITS and hc > POSITIVE_BITS]

    w025, w05 = both("(0.25, 1)"), both("(0.5, 1)")
    ok = bool(w025) and not w05
    span = f"[{w025[0]:.3f}, {w025[-1]:.3f}]" if w025 else "none"
    assert report("criterion 4 (simultaneous window)", ok, f"(0.25, 1) window {span}; (0.5, 1) has {len(w05)} points")


def test_criterion_05_delta_curve(report):
    t0 = time.perf_counter()
    values = [delta_threshold(n) for n in range(2, 7)]
    elapsed = time.perf_counter() - t0
    ok = (
        abs(values[0] - 0.2956) <= 5e-4
        and abs(values[1] - 0.1316) <= 5e-4
        and abs(values[2] - 0.0635) <= 5e-4
        and all(a > b for a, b in zip(values, values[1:]))
        and elapsed < 1
    )
    shown = ", ".join(f"{v:.6f}" for v in values)
    assert report("criterion 5 (threshold curve n=2..6)", ok, f"{shown}; {elapsed * 1e3:.0f} ms")


def test_criterion_06_radau(report):
    q2 = radau_quadrature(2)
    err2 = max(np.max(np.abs(q2.nodes - [1 / 3, 1])), np.max(np.abs(q2.weights - [0.75, 0.25])))
    worst = 0.0
    for m in range(2, 17):
        q = radau_quadrature(m)
        for k in range(2 * m - 1):
            worst = max(worst, abs(float(np.dot(q.weights, q.nodes**k)) - 1 / (k + 1)))
    ok = err2 <= 1e-12 and worst <= 1e-12
    assert report("criterion 6 (Gauss-Radau)", ok, f"m=2 error {err2:.1e}; exactness error {worst:.1e} (tol 1e-12)")


def test_criterion_07_shannon_sandwich(report, shannon_values):
    values, elapsed = shannon_values
    params, q = SHANNON_POINT
    h_emp = shannon_entropy_bits(simulate_joint(build_mcm_chain(params, q), build_preparations(params)).bob(0))
    monotone = all(b >= a for a, b in zip(values, values[1:]))
    ok = monotone and values[-1] <= h_emp + 1e-6 and elapsed < 300
    shown = ", ".join(f"m={m}: {v:.6f}" for m, v in zip(SHANNON_M, values))
    assert report("criterion 7 (Shannon sandwich)", ok, f"{shown}; empirical entropy {h_emp:.6f}; {elapsed:.1f} s")


def _reverify(problem, cert):
    """Independent check: eigenvalues of every block at the rounded multipliers."""
    y = problem.pack(cert.multipliers)
    lam = min(float(np.linalg.eigvalsh(blk.value(y))[0]) for blk in problem.blocks)
    eq = float(np.max(np.abs(problem.f - problem.E @ y), initial=0.0)) if problem.E.shape[0] else 0.0
    value = problem.objective(y)
    return lam, eq, value


def test_criterion_08_soundness(report, sweeps, shannon_values):
    assert INSTANCES, "criteria 2-4 and 7 produced no instances"
    bad_order = bad_gap = bad_cert = 0
    worst_gap = worst_lam = 0.0
    for b, rebuild in INSTANCES:
        cert = b.certificate
        if cert is None:
            bad_cert += 1
            continue
        maximize = b.guessing_prob is not None
        if (b.primal_value > cert.certified_value) if maximize else (b.primal_value < cert.certified_value):
            bad_order += 1
        worst_gap = max(worst_gap, b.gap)
        bad_gap += b.gap > 1e-6
        lam, eq, value = _reverify(rebuild(), cert)
        worst_lam = min(worst_lam, lam)
        if lam < 0 or eq > 1e-12 or value != cert.certified_value or cert.details.get("post_rounding_violation", 1) > 0:
            bad_cert += 1
    ok = not (bad_order or bad_gap or bad_cert)
    assert report(
        "criterion 8 (primal/dual soundness)", ok,
        f"{len(INSTANCES)} instances; order violations {bad_order}; gaps > 1e-6: {bad_gap} (max {worst_gap:.1e}); "
        f"certificates failing re-verification {bad_cert} (min eigenvalue {worst_lam:.1e})",
    )


def test_criterion_09_trusted_peak(report):
    params = POINTS["(0.5, 1)"]
    grid = _grid(params)
    bits = [guessing_bound("charlie-trusted", post_measurement_ensemble(params, q), honest_stats(params, q)).value_bits for q in grid]
    best = max(bits)
    peaks = [q for q, h in zip(grid, bits) if h >= best - 1e-9]
    p_inc = [params.x / q for q in peaks]
    ok = all(abs(q - 2 * params.x) <= STEP + 1e-12 for q in peaks)
    assert report(
        "criterion 9 (trusted-Charlie peak)", ok,
        f"max {best:.6f} bits at Q {', '.join(f'{q:.3f}' for q in peaks)}; Charlie inconclusive rate there "
        f"{', '.join(f'{p:.4f}' for p in p_inc)} (target 0.5)",
    )


def test_criterion_10_determinism(report, tmp_path):
    cfg = {"delta": 0.25, "r": 1.0, "q_start": 0.25, "q_stop": 1.0, "q_step": 0.05, "m": 4}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    blobs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        assert main(["sweep", "--config", str(tmp_path / "cfg.json"), "--output", str(path)], out=io.StringIO()) == 0
        blobs.append(path.read_bytes())
    rows = list(csv.DictReader(io.StringIO(blobs[0].decode())))
    ok = blobs[0] == blobs[1] and len(rows) == 16
    assert report("criterion 10 (deterministic sweep)", ok, f"{len(rows)} rows, {len(blobs[0])} bytes, identical: {blobs[0] == blobs[1]}")
