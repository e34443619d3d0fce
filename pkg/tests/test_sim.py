"""Closed-loop integration semantics, determinism, guards, backends."""

import math

import numpy as np
import pytest

from slidingesc import (CascadePlant, ConfigurationError, ControllerParams,
                        ControllerState, CustomMap, LtiSubsystem, SimConfig,
                        SimulationAbort, dt_guard_limit, run, step)
from slidingesc.controller import controller_step

from test_controller import make_params


def short_config(**overrides) -> SimConfig:
    base = dict(dt=1e-3, horizon=2.0, x0=np.zeros(2), v0=np.zeros(2),
                log_stride=1)
    base.update(overrides)
    return SimConfig(**base)


class TestStep:
    def test_single_step_hand_values(self, benchmark_plant, benchmark_params):
        # rigged so the relay emits +rho e1: e = 0 -> s = 0 -> sign +1, dir 1
        benchmark_plant.x = [-2.0, 4.0]
        benchmark_plant.v = [0.0, 0.0]
        state = ControllerState(y_m=benchmark_plant.y)  # e = 0 at contact
        u, _ = step(benchmark_plant, benchmark_params, state, 1e-3)
        rho = benchmark_params.effective_gains().rho
        assert np.allclose(u, [rho, 0.0])
        # v += dt*u ; x += dt*(A x + B v) with the pre-update v
        assert np.allclose(benchmark_plant.v, [1e-3 * rho, 0.0])
        assert np.allclose(benchmark_plant.x, [-1.996, 4.0])

    def test_equilibrium_stays_put(self, benchmark_plant):
        params = make_params(p0=2.0, y_sat=2.0)  # reference parked at y*
        state = ControllerState.initial(params)
        for _ in range(50):
            step(benchmark_plant, params, state, 1e-3)
        # relay dithers v but x cannot outrun it; state remains tiny
        assert np.linalg.norm(benchmark_plant.x) < 0.1

    def test_hurwitz_decay_under_zero_gain(self, benchmark_lti):
        # a flat objective gives zero gain everywhere; x decays freely
        plant = CascadePlant(benchmark_lti, CustomMap(lambda z: 0.0, dim=2))
        plant.x = [-2.0, 4.0]
        params = make_params(p0=0.0, y_sat=0.0)
        state = ControllerState.initial(params)
        norms = [np.linalg.norm(plant.x)]
        for _ in range(6000):
            u, _ = controller_step(params, state, plant.y, 1e-3)
            dv, dx = plant.derivative(np.zeros(2))  # open loop: u forced to 0
            plant.x = plant.x + 1e-3 * dx
            norms.append(np.linalg.norm(plant.x))
        assert norms[-1] < 1e-2 * norms[0]


class TestRunBookkeeping:
    def test_sample_count(self, benchmark_plant, benchmark_params):
        traj = run(benchmark_plant, benchmark_params,
                   short_config(horizon=0.01, dt=0.001))
        assert len(traj) == 11
        assert traj.t[0] == 0.0
        assert traj.t[-1] == pytest.approx(0.01)

    def test_time_strictly_increasing_uniform(self, benchmark_plant, benchmark_params):
        traj = run(benchmark_plant, benchmark_params, short_config(log_stride=5))
        diffs = np.diff(traj.t)
        assert np.all(diffs > 0)
        assert np.allclose(diffs, 5e-3)

    def test_stride_must_divide(self, benchmark_plant, benchmark_params):
        with pytest.raises(ConfigurationError, match="log_stride"):
            run(benchmark_plant, benchmark_params, short_config(log_stride=3))

    def test_horizon_must_be_integer_steps(self, benchmark_plant, benchmark_params):
        with pytest.raises(ConfigurationError, match="integer number"):
            run(benchmark_plant, benchmark_params, short_config(horizon=0.0105))

    def test_n_dirs_must_match_inputs(self, benchmark_plant):
        params = make_params(n_dirs=3)
        with pytest.raises(ConfigurationError, match="n_dirs"):
            run(benchmark_plant, params, short_config())


class TestDeterminismAndBackends:
    def test_bit_identical_repeat(self, benchmark_params, benchmark_lti, benchmark_map):
        runs = []
        for _ in range(2):
            plant = CascadePlant(benchmark_lti, benchmark_map)
            runs.append(run(plant, benchmark_params,
                            short_config(x0=[-2.0, 4.0], v0=[0.5, 1.0])))
        for name in ("t", "v", "x", "z", "y", "y_m", "e", "s", "u"):
            assert np.array_equal(getattr(runs[0], name),
                                  getattr(runs[1], name))

    def test_python_matches_numba(self, benchmark_params, benchmark_lti, benchmark_map):
        config = short_config(x0=[-2.0, 4.0], v0=[0.5, 1.0], horizon=3.0)
        results = {}
        for backend in ("python", "numba"):
            plant = CascadePlant(benchmark_lti, benchmark_map)
            results[backend] = run(plant, benchmark_params, config,
                                   backend=backend)
        for name in ("t", "v", "x", "z", "y", "y_m", "e", "s", "u",
                     "dir_index"):
            assert np.array_equal(getattr(results["python"], name),
                                  getattr(results["numba"], name)), name

    def test_numba_backend_rejects_custom_map(self, benchmark_lti):
        plant = CascadePlant(benchmark_lti, CustomMap(lambda z: float(z[0]), dim=2))
        with pytest.raises(ConfigurationError, match="numba backend"):
            run(plant, make_params(), short_config(), backend="numba")


class TestGuards:
    def test_dt_guard_aborts(self, benchmark_plant, benchmark_params):
        limit = dt_guard_limit(benchmark_plant, benchmark_params, 0.01)
        bad = short_config(dt=4 * limit, horizon=8 * limit, log_stride=1)
        with pytest.raises(SimulationAbort, match="resolution guard"):
            run(benchmark_plant, benchmark_params, bad)

    def test_dt_guard_override_runs(self, benchmark_plant, benchmark_params, caplog):
        limit = dt_guard_limit(benchmark_plant, benchmark_params, 0.01)
        bad = SimConfig(dt=2.0 * limit, horizon=20 * limit, x0=np.zeros(2),
                        v0=np.zeros(2), log_stride=1)
        with caplog.at_level("WARNING"):
            run(benchmark_plant, benchmark_params, bad, dt_guard=False)
        assert any("GUARD OVERRIDDEN" in r.message for r in caplog.records)

    def test_failed_hypotheses_abort(self, benchmark_map, benchmark_params):
        lti = LtiSubsystem(np.eye(2), np.eye(2), allow_unstable=True)
        plant = CascadePlant(lti, benchmark_map)
        with pytest.raises(SimulationAbort, match="hypothesis"):
            run(plant, benchmark_params, short_config())

    def test_hypothesis_override_is_loud(self, benchmark_map, benchmark_params, caplog):
        lti = LtiSubsystem(np.eye(2), np.eye(2), allow_unstable=True)
        plant = CascadePlant(lti, benchmark_map)
        config = short_config(horizon=0.05)
        with caplog.at_level("WARNING"):
            run(plant, benchmark_params, config, skip_hypothesis_check=True)
        assert any("OVERRIDDEN" in r.message for r in caplog.records)

    def test_finite_escape_detected(self, benchmark_map):
        # violently unstable block escapes within the horizon
        lti = LtiSubsystem(200.0 * np.eye(2), np.eye(2), allow_unstable=True)
        plant = CascadePlant(lti, benchmark_map)
        config = SimConfig(dt=1e-2, horizon=10.0, x0=[1.0, 1.0],
                           v0=[0.0, 0.0], log_stride=1)
        with pytest.raises(SimulationAbort, match="non-finite|finite-escape"):
            run(plant, make_params(), config, dt_guard=False,
                skip_hypothesis_check=True)


class TestQuasiSteadyStart:
    def test_v0_solves_balance(self, benchmark_plant, benchmark_params):
        config = short_config(x0=[-2.0, 4.0], v0=None, quasi_steady=True,
                              horizon=0.01)
        traj = run(benchmark_plant, benchmark_params, config)
        # B v0 = -A x0 keeps the state put initially: z(0) stays (-2,4)
        assert np.allclose(traj.v[0], [-4.0, 0.0])
        assert np.allclose(traj.z[0], [-2.0, 4.0])
        assert np.allclose(traj.z[1], traj.z[0], atol=1e-2)


class TestTrackingSanity:
    def test_linear_objective_tracks_ramp(self, benchmark_lti):
        # no maximum, unbounded reference: the output must lock onto the
        # ramp, with the error settling inside the switching band scale
        slope = np.array([1.0, 0.5])
        plant = CascadePlant(benchmark_lti,
                             CustomMap(lambda z: float(slope @ z), dim=2,
                                       grad=lambda z: slope))
        params = make_params(y_sat=math.inf)
        config = SimConfig(dt=1e-3, horizon=25.0, x0=[-1.0, -1.0],
                           v0=[0.0, 0.0], log_stride=10)
        traj = run(plant, params, config)
        gains = params.effective_gains()
        late = traj.e[traj.t >= 20.0]
        assert np.abs(late).max() <= 2 * params.epsilon_sw + \
            gains.lambda_eff * config.dt
        # before settling the error magnitude came down monotonically-ish
        early = np.abs(traj.e[traj.t <= 2.0])
        assert early[-1] <= early[0] + 1e-9
