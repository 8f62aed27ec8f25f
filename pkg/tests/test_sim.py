"""Initial conditions, the fixed-step driver, and convergence drivers."""

from __future__ import annotations

import math

import numpy as np
import pytest

from vmpfc.errors import ConfigError, ContractViolation
from vmpfc.model import ModelParams, SchemeParams
from vmpfc.records import write_field_snapshot
from vmpfc.schemes import manufactured_exact
from vmpfc.sim import (
    AdaptCompareResult,
    Crystallites,
    CrystallitePatch,
    FromFile,
    Manufactured,
    RandomPerturbation,
    adapt_compare,
    build_initial,
    convergence_study,
    fit_rate,
    plan_fixed_steps,
    run_fixed,
    uniform_noise,
)
from vmpfc.adaptive import AdaptiveParams
from vmpfc.spectral import field_mean, make_grid

# frozen from a pure-integer implementation of the splitmix64 recurrence
NOISE_SEED0 = (
    0.7666216164272852,
    -0.13694400590298006,
    -0.9471324568148045,
    0.941763956307657,
    -0.7873066168655751,
)
NOISE_SEED12345 = (
    -0.7338406626771454,
    -0.5903667332766818,
    -0.7609148339817691,
    -0.6477643855100776,
    0.013760431014911978,
)


class TestUniformNoise:
    def test_pinned_values_seed0(self):
        assert uniform_noise(0, 5) == pytest.approx(NOISE_SEED0, abs=0.0)

    def test_pinned_values_seed12345(self):
        assert uniform_noise(12345, 5) == pytest.approx(NOISE_SEED12345, abs=0.0)

    def test_negative_seed_wraps_to_uint64(self):
        assert uniform_noise(-1, 1)[0] == 0.7878858405663689

    def test_pinned_tail_and_mean(self):
        u = uniform_noise(0, 4096)
        assert u[4095] == 0.42487910452913
        assert float(np.mean(u)) == pytest.approx(-0.014128695707614908, abs=1e-15)

    def test_prefix_property(self):
        assert np.array_equal(uniform_noise(7, 12)[:5], uniform_noise(7, 5))

    def test_range_and_count(self):
        u = uniform_noise(99, 10000)
        assert u.shape == (10000,)
        assert np.all(u >= -1.0) and np.all(u < 1.0)
        assert uniform_noise(0, 0).shape == (0,)
        with pytest.raises(ContractViolation):
            uniform_noise(0, -1)


class TestBuildInitial:
    def test_random_perturbation(self):
        grid = make_grid(8, 16.0, dim=2)
        ic = RandomPerturbation(mean=0.06, amplitude=0.02, seed=42)
        phi, psi = build_initial(ic, grid)
        assert phi.shape == grid.shape and psi.shape == grid.shape
        assert np.all(psi == 0.0)
        noise = uniform_noise(42, grid.num_points).reshape(grid.shape)
        assert np.array_equal(phi, 0.06 + 0.02 * noise)

    def test_random_perturbation_3d(self):
        grid = make_grid(8, 16.0, dim=3)
        phi, _ = build_initial(RandomPerturbation(seed=1), grid)
        assert phi.shape == (8, 8, 8)

    def test_crystallites_background_and_patch(self):
        grid = make_grid(32, 64.0, dim=2)
        patch = CrystallitePatch(center=(16.0, 16.0), half_width=6.0, angle=0.25)
        ic = Crystallites(mean=0.285, amplitude=0.446, wavenumber=0.66,
                          patches=(patch,))
        phi, _ = build_initial(ic, grid)
        # far corner is untouched background
        assert phi[31, 31] == 0.285
        # a point inside the patch matches the rotated one-mode formula
        x, y = 16.0, 14.0
        i, j = int(x / 2.0), int(y / 2.0)
        xl = x * math.sin(0.25) + y * math.cos(0.25)
        yl = -x * math.cos(0.25) + y * math.sin(0.25)
        want = 0.285 + 0.446 * (
            math.cos(0.66 * yl / math.sqrt(3.0)) * math.cos(0.66 * xl)
            - 0.5 * math.cos(2 * 0.66 * yl / math.sqrt(3.0))
        )
        assert phi[i, j] == pytest.approx(want, rel=1e-14)

    def test_crystallites_patch_is_square(self):
        grid = make_grid(32, 64.0, dim=2)
        patch = CrystallitePatch(center=(16.0, 16.0), half_width=6.0, angle=0.0)
        phi, _ = build_initial(Crystallites(patches=(patch,)), grid)
        touched = phi != Crystallites().mean
        x, y = grid.coords()
        inside = (np.abs(x - 16.0) <= 6.0) & (np.abs(y - 16.0) <= 6.0)
        assert not np.any(touched & ~inside)

    def test_crystallites_need_2d(self):
        with pytest.raises(ContractViolation):
            build_initial(Crystallites(), make_grid(8, 16.0, dim=3))

    def test_manufactured(self):
        grid = make_grid(32, 128.0, dim=2)
        phi, psi = build_initial(Manufactured(), grid)
        assert np.array_equal(phi, manufactured_exact(grid, 0.0)[0])
        assert np.all(psi == 0.0)

    def test_from_file_round_trip(self, tmp_path):
        grid = make_grid(8, 16.0, dim=2)
        phi0, _ = build_initial(RandomPerturbation(seed=5), grid)
        base = tmp_path / "phi_t0"
        write_field_snapshot(base, grid, phi0, t=0.0, scheme="ssav")
        phi, psi = build_initial(FromFile(str(base)), grid)
        assert np.array_equal(phi, phi0)
        assert np.all(psi == 0.0)

    def test_from_file_grid_mismatch(self, tmp_path):
        grid = make_grid(8, 16.0, dim=2)
        phi0, _ = build_initial(RandomPerturbation(seed=5), grid)
        base = tmp_path / "phi_t0"
        write_field_snapshot(base, grid, phi0, t=0.0, scheme="ssav")
        with pytest.raises(ConfigError, match="initial.path"):
            build_initial(FromFile(str(base)), make_grid(16, 16.0, dim=2))


class TestPlanAndRunFixed:
    def test_plan_fixed_steps(self):
        assert plan_fixed_steps(1.0, 0.025) == 40
        assert plan_fixed_steps(1.0, 0.1) == 10
        assert plan_fixed_steps(200.0, 0.015) == 13334
        assert plan_fixed_steps(1.0, 0.3) == 4
        with pytest.raises(ContractViolation):
            plan_fixed_steps(0.0, 0.1)

    def run(self, horizon, dt, record_every=1, snapshot_times=()):
        grid = make_grid(8, 16.0, dim=2)
        phi0, psi0 = build_initial(RandomPerturbation(mean=0.1, amplitude=0.05, seed=2), grid)
        p = ModelParams(epsilon=0.25)
        sp = SchemeParams(dt=dt)
        return run_fixed("ssav", grid, phi0, psi0, p, sp, horizon,
                         record_every=record_every, snapshot_times=snapshot_times)

    def test_exact_landing_and_counts(self):
        res = self.run(1.0, 0.1)
        assert res.step_count == 10 == plan_fixed_steps(1.0, 0.1)
        assert res.state.t == pytest.approx(1.0, abs=1e-14)
        assert len(res.records) == 11
        assert res.records[0].dt == 0.0
        assert all(r.dt == pytest.approx(0.1, rel=1e-12) for r in res.records[1:])

    def test_record_cadence_includes_final(self):
        res = self.run(1.0, 0.1, record_every=3)
        ts = [r.t for r in res.records]
        assert ts == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0], abs=1e-12)

    def test_truncated_final_step(self):
        res = self.run(0.95, 0.3)
        assert res.step_count == 4
        assert res.state.t == pytest.approx(0.95, abs=1e-14)
        assert res.records[-1].dt == pytest.approx(0.05, rel=1e-10)

    def test_snapshots(self):
        res = self.run(1.0, 0.1, snapshot_times=(0.0, 0.35, 1.0))
        assert set(res.snapshots) == {0.0, 0.35, 1.0}
        t_act, phi = res.snapshots[0.35]
        assert t_act == pytest.approx(0.4, abs=1e-12)
        assert phi.shape == (8, 8)
        assert res.snapshots[0.0][0] == 0.0
        assert res.snapshots[1.0][0] == pytest.approx(1.0, abs=1e-12)
        # snapshot is a copy, not a view of the live state
        assert not np.shares_memory(res.snapshots[1.0][1], res.state.phi)

    def test_record_every_validation(self):
        with pytest.raises(ContractViolation):
            self.run(1.0, 0.1, record_every=0)


class TestFitRate:
    def test_clean_second_order(self):
        dts = [0.1, 0.05, 0.025]
        errs = [4e-3, 1e-3, 2.5e-4]
        assert fit_rate(dts, errs) == pytest.approx(2.0, abs=1e-12)

    def test_drops_out_of_range_rows(self):
        dts = [0.4, 0.2, 0.1, 0.05]
        errs = [50.0, 4e-2, 1e-2, 2.5e-3]
        assert fit_rate(dts, errs) == pytest.approx(2.0, abs=1e-12)

    def test_too_few_rows_is_nan(self):
        assert math.isnan(fit_rate([0.1, 0.05], [30.0, 2.0]))


class TestConvergenceStudy:
    def test_cn_rate(self):
        grid = make_grid(32, 128.0, dim=2)
        p = ModelParams(epsilon=0.025, h_vac=0.0)
        sp = SchemeParams(sav_b=1e4)
        res = convergence_study("ssav", grid, p, sp, (0.2, 0.1, 0.05), horizon=0.4)
        assert [r.dt for r in res.rows] == [0.2, 0.1, 0.05]
        assert math.isnan(res.rows[0].rate)
        assert 1.6 < res.fitted_rate < 2.4
        errs = [r.error for r in res.rows]
        assert all(e > 0 for e in errs) and errs == sorted(errs, reverse=True)

    def test_bootstrap_only_rate(self):
        grid = make_grid(32, 128.0, dim=2)
        p = ModelParams(epsilon=0.025, h_vac=0.0)
        sp = SchemeParams(sav_b=1e4)
        res = convergence_study("ssav", grid, p, sp, (0.1, 0.05, 0.025),
                                horizon=0.2, bootstrap_only=True)
        assert 0.7 < res.fitted_rate < 1.3

    def test_needs_two_dts(self):
        grid = make_grid(32, 128.0, dim=2)
        with pytest.raises(ContractViolation):
            convergence_study("ssav", grid, ModelParams(), SchemeParams(), (0.1,), 0.2)


def test_adapt_compare_smoke():
    grid = make_grid(16, 32.0, dim=2)
    phi0, psi0 = build_initial(RandomPerturbation(mean=0.1, amplitude=0.05, seed=3), grid)
    p = ModelParams(epsilon=0.25)
    sp = SchemeParams(dt=1e-2)
    ap = AdaptiveParams(dt_min=1e-3, dt_max=0.25, dt_cr=0.01, s_cr=2.0, alpha1=1e2)
    res = adapt_compare("ssav", grid, phi0, psi0, p, sp, ap, ap, horizon=0.5,
                        dt_fixed=0.05)
    assert isinstance(res, AdaptCompareResult)
    assert res.evma.controller == "evma" and res.legacy.controller == "legacy"
    for out in (res.evma, res.legacy, res.fixed):
        assert out.state.t == pytest.approx(0.5, abs=1e-10)
    assert res.fixed.step_count == 10
