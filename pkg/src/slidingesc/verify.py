"""Built-in verification suites: oracle checks, scenario convergence
checks, and the residual-scaling sweep.

These back the ``verify`` CLI command and the acceptance test module.
Sampling in the oracle suite uses a fixed seed so results are
reproducible; the simulation loop itself contains no randomness.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import convergence_metrics, fd_gradient_oracle, residual_bound_check
from .controller import (ControllerParams, ControllerState, control_law,
                         controller_step, cyclic_direction, reference_step,
                         sliding_variable_step)
from .scenario import Scenario, load_builtin
from .sim import SimConfig, run

ORACLE_SEED = 20240811
SWEEP_ETAS = (0.01, 0.04, 0.09)
CONSTANT_SPREAD_LIMIT = 3.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0


def _timed(name: str, passed: bool, detail: str, started: float) -> CheckResult:
    return CheckResult(name, bool(passed), detail, time.perf_counter() - started)


def oracle_suite(scenario: Optional[Scenario] = None,
                 draws: int = 1000) -> list[CheckResult]:
    """Gradient/steady-state oracles plus controller invariants.

    The two numeric oracles run at 100 random points each; the
    controller invariants are property-checked over ``draws`` random
    parameter draws.
    """
    if scenario is None:
        scenario = load_builtin("coupled_bowl")
    plant = scenario.build_plant()
    rng = np.random.default_rng(ORACLE_SEED)
    results: list[CheckResult] = []

    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        v = rng.uniform(-5.0, 5.0, plant.lti.m)
        analytic = plant.high_freq_gain(plant.lti.steady_state_output(v))
        brute = fd_gradient_oracle(plant, v)
        scale = max(1.0, float(np.linalg.norm(analytic)))
        worst = max(worst, float(np.linalg.norm(analytic - brute)) / scale)
    results.append(_timed(
        "gain_matches_fd_oracle", worst <= 1e-6,
        f"max relative deviation {worst:.3e} (tol 1e-6, 100 points)", t0))

    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        v = rng.uniform(-5.0, 5.0, plant.lti.m)
        x_ss = plant.lti.quasi_steady_state(v)
        residual = np.linalg.norm(plant.lti.A @ x_ss + plant.lti.B @ v)
        worst = max(worst, float(residual / (1.0 + np.linalg.norm(v))))
    results.append(_timed(
        "steady_state_residual", worst <= 1e-10,
        f"max scaled residual {worst:.3e} (tol 1e-10, 100 points)", t0))

    t0 = time.perf_counter()
    ok, detail = _controller_invariants(rng, draws)
    results.append(_timed(f"controller_invariants_{draws}_draws", ok, detail, t0))
    return results


def _controller_invariants(rng: np.random.Generator,
                           draws: int) -> tuple[bool, str]:
    for i in range(draws):
        p0 = float(rng.uniform(-2.0, 2.0))
        params = ControllerParams(
            p=float(rng.uniform(0.05, 5.0)),
            p0=p0,
            y_sat=max(p0, p0 + float(rng.uniform(-1.0, 3.0))),
            lam=float(rng.uniform(0.1, 10.0)),
            epsilon_sw=float(rng.uniform(1e-3, 0.5)),
            gamma=float(rng.uniform(1e-3, 1.0)),
            L_h=float(rng.uniform(1e-2, 2.0)),
            eta=float(rng.uniform(1e-4, 1.0)),
            T_s=float(rng.uniform(0.5, 20.0)),
            n_dirs=int(rng.integers(1, 6)),
            scaling_mode="scaled",
        )
        p_eff, lambda_eff, rho = params.effective_gains()

        # modulation dominates the scaled disturbance bound
        floor = params.eta * ((params.p + params.lam) / params.L_h + params.gamma)
        if rho < floor - 1e-12:
            return False, f"draw {i}: rho {rho} below bound {floor}"

        # scheduler: periodicity and equal share over one period
        period = params.search_period
        t = float(rng.uniform(0.0, 3.0 * period))
        idx, sigma = cyclic_direction(t, period, params.n_dirs)
        idx2, sigma2 = cyclic_direction(t + period, period, params.n_dirs)
        if idx != idx2 or not np.array_equal(sigma, sigma2):
            return False, f"draw {i}: scheduler not periodic at t={t}"
        counts = np.zeros(params.n_dirs)
        probes = 64 * params.n_dirs
        for j in range(probes):
            k, _ = cyclic_direction((j + 0.5) * period / probes, period,
                                    params.n_dirs)
            counts[k - 1] += 1
        if not np.all(counts == probes / params.n_dirs):
            return False, f"draw {i}: direction shares {counts} not equal"

        # control law: exactly one nonzero entry of magnitude rho
        s = float(rng.uniform(-50.0, 50.0))
        u = control_law(rho, sigma, s, params.epsilon_sw)
        nonzero = np.nonzero(u)[0]
        if nonzero.size != 1 or not math.isclose(abs(u[nonzero[0]]), rho,
                                                 rel_tol=1e-15):
            return False, f"draw {i}: u={u} not a single +-rho component"

        # reference: monotone nondecreasing and never above saturation
        state = ControllerState.initial(params)
        prev = state.y_m
        for _ in range(20):
            ym = reference_step(state, p_eff, params.y_sat, float(rng.uniform(1e-4, 1.0)))
            if ym < prev - 1e-15 or ym > params.y_sat + 1e-15:
                return False, f"draw {i}: reference not monotone/saturated"
            prev = ym

        # sliding variable: |s - e| bounded by the accumulated gain*time
        state = ControllerState.initial(params)
        acc = 0.0
        for _ in range(20):
            dt = float(rng.uniform(1e-4, 0.5))
            e = float(rng.uniform(-5.0, 5.0))
            s_val = sliding_variable_step(state, e, lambda_eff, dt)
            acc += dt
            if abs(s_val - e) > lambda_eff * acc + 1e-12:
                return False, f"draw {i}: |s-e| exceeds lambda_eff*t"
    return True, f"all invariants held over {draws} draws"


def composition_check(draws: int = 200) -> CheckResult:
    """controller_step equals the four sub-operations called in order."""
    rng = np.random.default_rng(ORACLE_SEED + 1)
    t0 = time.perf_counter()
    for i in range(draws):
        params = ControllerParams(
            p=float(rng.uniform(0.05, 5.0)), p0=0.0,
            y_sat=float(rng.uniform(0.5, 5.0)),
            lam=float(rng.uniform(0.1, 10.0)),
            epsilon_sw=float(rng.uniform(1e-3, 0.5)),
            gamma=0.1, L_h=0.1, eta=float(rng.uniform(1e-3, 1.0)),
            T_s=float(rng.uniform(0.5, 20.0)),
            n_dirs=int(rng.integers(1, 5)))
        state_a = ControllerState(y_m=float(rng.uniform(-1.0, 1.0)),
                                  s_int=float(rng.uniform(-1.0, 1.0)),
                                  t=float(rng.uniform(0.0, 50.0)))
        state_b = ControllerState(state_a.y_m, state_a.s_int, state_a.t)
        y = float(rng.uniform(-30.0, 30.0))
        dt = float(rng.uniform(1e-4, 0.5))

        u, tel = controller_step(params, state_a, y, dt)

        p_eff, lambda_eff, rho = params.effective_gains()
        e = y - state_b.y_m
        s = sliding_variable_step(state_b, e, lambda_eff, dt)
        idx, sigma = cyclic_direction(state_b.t, params.search_period,
                                      params.n_dirs)
        u_manual = control_law(rho, sigma, s, params.epsilon_sw)
        reference_step(state_b, p_eff, params.y_sat, dt)
        state_b.t += dt

        same = (np.array_equal(u, u_manual) and tel.e == e and tel.s == s
                and tel.dir_index == idx and state_a.y_m == state_b.y_m
                and state_a.t == state_b.t and state_a.s_int == state_b.s_int)
        if not same:
            return _timed("controller_step_composition", False,
                          f"draw {i}: composition mismatch", t0)
    return _timed("controller_step_composition", True,
                  f"exact over {draws} draws", t0)


def _run_scenario(scenario: Scenario, *, dt: Optional[float] = None):
    sim = scenario.sim
    if dt is not None:
        stride = max(1, int(round(sim.log_stride * sim.dt / dt)))
        sim = SimConfig(dt=dt, horizon=sim.horizon, x0=sim.x0, v0=sim.v0,
                        log_stride=stride, plant_eta=sim.plant_eta,
                        quasi_steady=sim.quasi_steady)
    plant = scenario.build_plant()
    traj = run(plant, scenario.controller, sim)
    metrics = convergence_metrics(
        traj, plant.map.z_star, plant.map.y_star,
        epsilon_sw=scenario.controller.epsilon_sw,
        delta=scenario.analysis.delta,
        trailing_fraction=scenario.analysis.trailing_fraction,
        min_duration=50.0 * sim.dt)
    return traj, metrics, plant


def scenario_suite(names: tuple[str, ...] = ("coupled_bowl",
                                             "coupled_bowl_ic2"),
                   mean_tol: float = 0.3,
                   final_z_tol: float = 0.5) -> list[CheckResult]:
    """Convergence, sliding evidence, boundedness and step-halving
    agreement for the shipped scenarios."""
    results: list[CheckResult] = []
    for name in names:
        scenario = load_builtin(name)
        t0 = time.perf_counter()
        traj, metrics, plant = _run_scenario(scenario)
        y_star = plant.map.y_star
        final_z = float(np.linalg.norm(traj.z[-1] - plant.map.z_star))
        tail = max(1, int(round(scenario.analysis.trailing_fraction * len(traj))))
        mean_dev = float(np.abs(traj.y[-tail:] - y_star).mean())
        results.append(_timed(
            f"{name}_converges",
            mean_dev <= mean_tol and final_z <= final_z_tol,
            f"trailing mean |y-y*|={mean_dev:.4f} (tol {mean_tol}), "
            f"final |z-z*|={final_z:.4f} (tol {final_z_tol})", t0))

        t0 = time.perf_counter()
        before = [seg for seg in metrics.sliding_segments
                  if metrics.t_reach_delta is not None
                  and seg.t_end <= metrics.t_reach_delta
                  and seg.duration >= 50.0 * scenario.sim.dt]
        results.append(_timed(
            f"{name}_sliding_evidence",
            metrics.t_reach_delta is not None and len(before) > 0,
            f"t_reach_delta={metrics.t_reach_delta}, "
            f"{len(before)} segments of >=50*dt before it", t0))

        t0 = time.perf_counter()
        bound = residual_bound_check(metrics, scenario.controller.eta,
                                     scenario.controller.epsilon_sw,
                                     scenario.analysis.c_bound)
        results.append(_timed(
            f"{name}_residual_bound", bound.passed,
            f"residual_amp={bound.residual_amp:.4f} <= {bound.bound:.4f}, "
            f"implied constant {bound.implied_constant:.3f}", t0))

        t0 = time.perf_counter()
        traj_half, metrics_half, _ = _run_scenario(scenario,
                                                   dt=scenario.sim.dt / 2.0)
        y_diff = abs(traj_half.y[-1] - traj.y[-1])
        y_allow = max(metrics.residual_amp, metrics_half.residual_amp)
        z_diff = float(np.linalg.norm(traj_half.z[-1] - traj.z[-1]))
        z_allow = max(
            float(np.linalg.norm(t.z[-tail:] - plant.map.z_star,
                                 axis=1).max())
            for t in (traj, traj_half))
        results.append(_timed(
            f"{name}_dt_halving",
            traj.all_finite and traj_half.all_finite
            and y_diff <= y_allow and z_diff <= z_allow,
            f"final (y, z) differences ({y_diff:.4f}, {z_diff:.4f}) within "
            f"residual amplitudes ({y_allow:.4f}, {z_allow:.4f}); "
            "all signals finite", t0))
    return results


def sweep_suite(etas: tuple[float, ...] = SWEEP_ETAS,
                base_name: str = "residual_sweep") -> list[CheckResult]:
    """Residual-scaling law over the parasitic time scale of the LTI
    block: each run must satisfy the residual bound and the implied
    constants must agree within a fixed spread."""
    base = load_builtin(base_name)
    results: list[CheckResult] = []
    constants = []
    for eta in etas:
        t0 = time.perf_counter()
        sim = SimConfig(dt=base.sim.dt, horizon=base.sim.horizon,
                        x0=base.sim.x0, v0=base.sim.v0,
                        log_stride=base.sim.log_stride, plant_eta=eta,
                        quasi_steady=base.sim.quasi_steady)
        scenario = Scenario(base.name, base.description, base.A, base.B,
                            base.C, base.map_spec, base.controller, sim,
                            base.analysis)
        _, metrics, _ = _run_scenario(scenario)
        bound = residual_bound_check(metrics, eta,
                                     scenario.controller.epsilon_sw,
                                     scenario.analysis.c_bound)
        constants.append(bound.implied_constant)
        results.append(_timed(
            f"residual_bound_eta_{eta:g}", bound.passed,
            f"residual_amp={bound.residual_amp:.4f} <= {bound.bound:.4f}, "
            f"implied constant {bound.implied_constant:.3f}", t0))
    t0 = time.perf_counter()
    spread = max(constants) / min(constants) if min(constants) > 0 else math.inf
    results.append(_timed(
        "implied_constant_spread", spread < CONSTANT_SPREAD_LIMIT,
        f"constants {['%.3f' % c for c in constants]}, spread "
        f"{spread:.2f} < {CONSTANT_SPREAD_LIMIT}", t0))
    return results
