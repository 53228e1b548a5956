"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Every simulation uses the benchmark setup (q=2, b=-10, c0=c1=5, dx=0.02,
dt=1e-4, w(x,0)=2x-1, observer fields 0, zeta(0)=0) unless stated.
Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.

Known red: criterion 2's reciprocal-offset clause (see the final assert in
test_criterion_2_reciprocal_estimate_offset).  The faithful closed loop,
cross-checked against an independent adaptive integrator at reference
resolution (dx=0.01, dt=2.5e-5), settles at zeta(5) = -0.1021 +- 1e-4:
the estimate genuinely does not equal 1/b = -0.1 (the settled gap 2.1e-3
is four orders above the settle noise 1e-7), but it is not more than
0.02 away as the criterion demands.
"""

import math

import numpy as np
import pytest

from heatadapt import (
    Grid,
    GridFunction,
    Params,
    ReferenceSignal,
    SimConfig,
    benchmark_initial_state,
    galerkin_error_system,
    l2_norm,
    pe_check,
    pi_inverse,
    pi_transform,
    run_error_system,
    run_open_loop,
    run_stabilization,
    run_tracking,
    servo_boundary,
    servo_eval,
)
from heatadapt.cli import main as cli_main, read_trace_csv

P8 = Params(q=2.0, b=-10.0, c0=5.0, c1=5.0)
G51 = Grid(51)
W0 = GridFunction(G51, 2.0 * G51.nodes - 1.0)
ZEROS = GridFunction.zeros(G51)


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} - {detail}")


def cfg(t_final, grid=G51, dt=1e-4, stride=100, tau=1.0):
    return SimConfig(dt=dt, t_final=t_final, grid=grid,
                     sample_stride=stride, pe_window_tau=tau)


@pytest.fixture(scope="module")
def stab_trace():
    # shared by criteria 2 and 3; horizon 6 s so the PE windows of
    # criterion 3 cover the settled regime while every criterion-2
    # quantity is read at t = 5 exactly
    return run_stabilization(P8, cfg(6.0), W0, ZEROS, 0.0)


@pytest.fixture(scope="module")
def track_trace():
    return run_tracking(P8, cfg(10.0), W0, ZEROS, 0.0, ReferenceSignal.constant(3.0))


def test_criterion_1_open_loop_instability():
    tr = run_open_loop(P8, cfg(2.0), W0)
    ratio = tr["wnorm"][-1] / tr["wnorm"][0]
    late = tr["wnorm"][tr.times >= 0.5]
    monotone = bool((np.diff(late) > 0).all())

    p_mild = Params(q=0.5, b=-10.0, c0=5.0, c1=5.0)
    tr_mild = run_open_loop(p_mild, cfg(2.0), W0)
    ratio_mild = tr_mild["wnorm"][-1] / tr_mild["wnorm"][0]

    ok = ratio >= 5.0 and monotone and ratio_mild <= 1.0
    report("1", ok, f"q=2 growth x{ratio:.0f} (monotone={monotone}); q=0.5 ratio {ratio_mild:.3f}")
    assert ratio >= 5.0
    assert monotone
    assert ratio_mild <= 1.0


def test_criterion_2_stabilization_performance(stab_trace):
    tr = stab_trace
    i5 = int(np.argmin(np.abs(tr.times - 5.0)))
    assert tr.times[i5] == 5.0
    wnorm5 = tr["wnorm"][i5]
    obs5 = tr["obs_err_norm"][i5]
    settle = (tr.times >= 4.0) & (tr.times <= 5.0)
    zgap = np.abs(tr["zeta"][settle] - tr["zeta"][i5]).max()

    ok = wnorm5 <= 1e-2 and obs5 <= 1e-3 and zgap <= 1e-4
    report("2", ok, f"|w|(5)={wnorm5:.2e}, |w-what|(5)={obs5:.2e}, zeta gap[4,5]={zgap:.2e}")
    assert wnorm5 <= 1e-2
    assert obs5 <= 1e-3
    assert zgap <= 1e-4


def test_criterion_2_reciprocal_estimate_offset(stab_trace):
    # stated margin: the settled estimate must sit more than 0.02 from 1/b.
    # The faithful dynamics settle at -0.1021 (offset 2.1e-3), so this
    # clause fails; see the module docstring and the decisions record.
    zeta5 = stab_trace["zeta"][int(np.argmin(np.abs(stab_trace.times - 5.0)))]
    offset = abs(zeta5 - (-0.1))
    ok = offset > 0.02
    report("2d", ok, f"zeta(5)={zeta5:+.6f}, |zeta(5)+0.1|={offset:.2e} (required > 0.02)")
    assert offset > 0.02


def test_criterion_3_stabilizer_not_persistently_exciting(stab_trace):
    verdict = pe_check(stab_trace.times, stab_trace["u0"], tau=1.0, threshold=1e-3)
    ok = not verdict.is_pe
    smallest = min(abs(v) for v in verdict.window_integrals)
    report("3", ok, f"is_pe={verdict.is_pe}, min |window integral|={smallest:.2e}")
    assert not verdict.is_pe


def test_criterion_4_tracking_and_identification(track_trace):
    tr = track_trace
    terr = abs(tr["w0"][-1] - 3.0)
    zerr = abs(tr["zeta"][-1] + 0.1)

    early = tr.times <= 1.0
    bounded = all(
        tr[name].max() <= 10.0 * tr[name][early].max()
        for name in ("wnorm", "obs_err_norm")
    )
    verdict = pe_check(tr.times, tr["vx1"], tau=1.0, threshold=1e-3)

    ok = terr <= 0.03 and zerr <= 0.005 and bounded and verdict.is_pe
    report("4", ok,
           f"|w(0,10)-3|={terr:.2e}, |zeta(10)+0.1|={zerr:.2e}, "
           f"bounded={bounded}, vx1 is_pe={verdict.is_pe}")
    assert terr <= 0.03
    assert zerr <= 0.005
    assert bounded
    assert verdict.is_pe


def test_criterion_5_lyapunov_monotonicity_suite():
    rng = np.random.default_rng(42)
    signals = [lambda t: 0.0, lambda t: 1.0, lambda t: math.exp(-t), lambda t: math.sin(t)]
    worst_dF = -np.inf
    worst_margin = np.inf
    for i in range(20):
        raw = rng.uniform(-1.0, 1.0, G51.n)
        target = rng.uniform(0.05, 1.0)
        f = GridFunction(G51, raw)
        w0 = GridFunction(G51, raw * (target / l2_norm(f)))
        zt0 = rng.uniform(-1.0, 1.0)
        c = SimConfig(dt=1e-4, t_final=0.5, grid=G51, sample_stride=1, pe_window_tau=0.5)
        tr = run_error_system(P8, c, w0, zt0, signals[i % 4])
        worst_dF = max(worst_dF, float(np.diff(tr["F"]).max()))
        bound = math.sqrt(2.0 * tr["F"][0] / abs(P8.b))
        worst_margin = min(worst_margin, bound - float(np.abs(tr["zeta"]).max()))
    ok = worst_dF <= 1e-8 and worst_margin >= 0.0
    report("5", ok, f"20 runs: max per-step dF={worst_dF:.2e}, min bound margin={worst_margin:.2e}")
    assert worst_dF <= 1e-8
    assert worst_margin >= 0.0


def test_criterion_6_energy_identity_convergence():
    residuals = []
    for n, dt in ((51, 1e-4), (101, 2.5e-5), (201, 6.25e-6)):
        g = Grid(n)
        c = SimConfig(dt=dt, t_final=1.0, grid=g, sample_stride=1000, pe_window_tau=1.0)
        tr = run_error_system(P8, c, benchmark_initial_state(g, 2.0), -0.1,
                              lambda t: math.exp(-t))
        residuals.append(abs(tr["diss_cum"][-1] - (tr["F"][0] - tr["F"][-1])))
    r01 = residuals[0] / residuals[1]
    r12 = residuals[1] / residuals[2]
    ok = r01 >= 1.8 and r12 >= 1.8
    report("6", ok, f"residuals={[f'{r:.2e}' for r in residuals]}, ratios={r01:.2f}, {r12:.2f}")
    assert r01 >= 1.8
    assert r12 >= 1.8


def test_criterion_7_galerkin_fd_cross_validation():
    u0 = lambda t: math.exp(-t)
    fd = run_error_system(P8, cfg(1.0), W0, -0.1, u0)
    g201 = Grid(201)
    w0 = benchmark_initial_state(g201, 2.0)
    gaps = {}
    for N in (8, 16, 32):
        tr = galerkin_error_system(N, P8, u0, w0, -0.1, 1.0, 1e-4, sample_stride=100)
        d = tr["wnorm"] - fd["wnorm"]
        gaps[N] = math.sqrt(float(np.trapezoid(d * d, fd.times)))
    shrink = gaps[16] <= 1.1 * gaps[8] and gaps[32] <= 1.1 * gaps[16]
    ok = gaps[32] <= 1e-2 and shrink
    report("7", ok, f"gaps N=8/16/32: {gaps[8]:.2e}/{gaps[16]:.2e}/{gaps[32]:.2e}")
    assert gaps[32] <= 1e-2
    assert shrink


def test_criterion_8_transform_correctness():
    profiles = {
        "1": lambda x: np.ones_like(x),
        "x": lambda x: x,
        "sin": lambda x: np.sin(np.pi * x),
    }
    worst_coarse = 0.0
    worst_factor = np.inf
    for fn in profiles.values():
        errs = {}
        for n in (51, 101):
            g = Grid(n)
            f = GridFunction.from_callable(g, fn)
            back = pi_inverse(pi_transform(f, 2.0), 2.0)
            errs[n] = float(np.abs(back.values - f.values).max())
        worst_coarse = max(worst_coarse, errs[51])
        worst_factor = min(worst_factor, errs[51] / errs[101])
    one = GridFunction(G51, np.ones(51))
    fwd_err = float(np.abs(pi_transform(one, 2.0).values - np.exp(2.0 * G51.nodes)).max())
    ok = worst_coarse <= 1e-3 and worst_factor >= 3.5 and fwd_err <= 1e-3
    report("8", ok,
           f"roundtrip max={worst_coarse:.2e} (refine x{worst_factor:.1f}), forward err={fwd_err:.2e}")
    assert worst_coarse <= 1e-3
    assert worst_factor >= 3.5
    assert fwd_err <= 1e-3


def test_criterion_9_servo_consistency():
    sin_ref = ReferenceSignal.sinusoid(1.0, 1.0)
    left_exact = all(
        servo_eval(sin_ref, 2.0, 0.0, t, 8) == sin_ref.derivative(0, t)
        for t in (0.0, 0.7, 3.1)
    )
    const = servo_boundary(ReferenceSignal.constant(3.0), 2.0, 1.23, 0)
    const_exact = const.v1 == 3.0 * (1.0 - 2.0) and const.vx1 == -2.0 * 3.0
    gap = abs(
        servo_eval(sin_ref, 2.0, 1.0, 1.0, 12) - servo_eval(sin_ref, 2.0, 1.0, 1.0, 20)
    )
    ok = left_exact and const_exact and gap <= 1e-8
    report("9", ok, f"v(0,t)=r(t): {left_exact}, constant case exact: {const_exact}, J12/J20 gap={gap:.1e}")
    assert left_exact
    assert const_exact
    assert gap <= 1e-8


def test_criterion_10_determinism_and_io(tmp_path):
    argv = ["simulate", "--scenario", "stabilize", "--t-final", "0.5", "--pe-tau", "0.25"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli_main(argv + ["--out", str(out1)]) == 0
    assert cli_main(argv + ["--out", str(out2)]) == 0
    identical = (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()

    times, cols = read_trace_csv(out1 / "trace.csv")
    text = (out1 / "trace.csv").read_text().splitlines()
    probe_exact = True
    for i in (0, len(times) // 2, len(times) - 1):
        fields = text[1 + i].split(",")
        probe_exact &= float(fields[0]) == times[i]
        for j, name in enumerate(cols):
            probe_exact &= float(fields[1 + j]) == cols[name][i]
    ok = identical and probe_exact
    report("10", ok, f"byte-identical={identical}, roundtrip bit-exact={probe_exact}")
    assert identical
    assert probe_exact
