"""Moving-boundary integrator, planar comparison ODE, dominance reports."""

from __future__ import annotations

import math

import numpy as np
import numpy.testing as npt
import pytest

from virusfront.errors import (
    ConsistencyError,
    ModelConsistencyError,
    StepSizeError,
)
from virusfront.fbsim import (
    InitialData,
    SimState,
    Trajectory,
    a_priori_caps,
    comparison_for,
    dominance_check,
    initial_state,
    ode_comparison,
    run,
    step,
    write_snapshot_csv,
    write_trajectory_csv,
)
from virusfront.model import ModelParams, homogeneous_fixed_point, ubar1_closed_form

class TestInitialData:
    def test_default_bump_vanishes_at_ends(self):
        y = np.linspace(0.0, 1.0, 102)
        U = InitialData().sample(y, h0=1.0)
        assert U.shape == (3, 102)
        assert np.all(U[:, [0, -1]] == 0.0)
        assert np.all(U[:, 1:-1] > 0.0)
        npt.assert_allclose(U[0], 0.5 * np.sin(math.pi * y), atol=1e-15)

    def test_custom_callables(self):
        y = np.linspace(0.0, 1.0, 52)
        f = lambda x: x * (2.0 - x)  # noqa: E731  vanishes at 0 and h0=2
        U = InitialData(funcs=(f, f, f)).sample(y, h0=2.0)
        npt.assert_allclose(U[1], (2.0 * y) * (2.0 - 2.0 * y), atol=1e-12)

    def test_presampled_arrays_and_mixing(self):
        y = np.linspace(0.0, 1.0, 52)
        arr = np.sin(math.pi * y)
        arr[0] = arr[-1] = 0.0
        U = InitialData(funcs=(arr, lambda x: x * (1.0 - x), arr)).sample(y, 1.0)
        npt.assert_array_equal(U[0], arr)
        npt.assert_array_equal(U[2], arr)

    def test_array_of_wrong_length_rejected(self):
        y = np.linspace(0.0, 1.0, 52)
        with pytest.raises(ValueError, match="nodes"):
            InitialData(funcs=(np.zeros(10), np.zeros(10), np.zeros(10))).sample(y, 1.0)

    def test_need_three_funcs(self):
        y = np.linspace(0.0, 1.0, 12)
        with pytest.raises(ValueError):
            InitialData(funcs=(lambda x: x, lambda x: x)).sample(y, 1.0)

    def test_data_must_vanish_at_ends(self):
        y = np.linspace(0.0, 1.0, 12)
        with pytest.raises(ValueError, match="vanish"):
            InitialData(funcs=(lambda x: x, lambda x: x * (1 - x), lambda x: 0 * x)).sample(y, 1.0)

    def test_negative_interior_rejected(self):
        y = np.linspace(0.0, 1.0, 12)
        neg = lambda x: -np.sin(math.pi * x)  # noqa: E731
        with pytest.raises(ValueError, match="nonnegative"):
            InitialData(funcs=(neg, neg, neg)).sample(y, 1.0)

    def test_negative_amplitude_rejected(self):
        y = np.linspace(0.0, 1.0, 12)
        with pytest.raises(ValueError):
            InitialData(amplitudes=(0.5, -0.1, 0.2)).sample(y, 1.0)


class TestAPrioriCaps:
    def test_known_values(self, persistence_params, extinction_params):
        assert a_priori_caps(persistence_params, (0.5, 0.2, 0.2)) == (1.0, 2.0, 2.0)
        assert a_priori_caps(extinction_params, (0.5, 0.2, 0.2)) == (1.0, 0.5, 0.5)

    def test_large_initial_data_keeps_its_own_cap(self, persistence_params):
        c1, c2, c3 = a_priori_caps(persistence_params, (3.0, 0.0, 0.0))
        assert c1 == 3.0
        assert c2 == 6.0  # b*c1/c
        assert c3 == 6.0  # k*c2/q


class TestStepAndGuards:
    def test_cells_only_data_still_expands(self, persistence_params):
        """With u2 = u3 = 0 the boundary law reduces to the cell flux alone,
        which is outward for a bump."""
        st = initial_state(InitialData(amplitudes=(0.1, 0.0, 0.0)), persistence_params)
        assert st.h_prime > 0.0

    def test_zero_front_weights_freeze_the_boundary(self):
        p = ModelParams(theta=1.0, a=1.0, b=2.0, c=1.0, k=1.0, q=1.0,
                        mu1=0.0, mu2=0.0, mu3=0.0)
        traj = run(InitialData(), p, T=1.0, n=100)
        assert np.all(traj.h == p.h0)
        assert np.all(traj.h_prime == 0.0)

    def test_oversized_explicit_dt_trips_the_guard(self, persistence_params):
        st = initial_state(InitialData(), persistence_params, n=400)
        with pytest.raises(StepSizeError):
            step(st, persistence_params, dt=0.02)

    def test_contracting_boundary_is_a_model_error(self, persistence_params):
        """A profile increasing toward the front would pull the boundary
        inward; the expansion law treats that as a broken state."""
        y = np.linspace(0.0, 1.0, 52)
        st = SimState(t=0.0, h=1.0, U=np.tile(y**2, (3, 1)))
        with pytest.raises(ModelConsistencyError):
            step(st, persistence_params, dt=1e-3)

    def test_dt_must_be_positive(self, persistence_params):
        st = initial_state(InitialData(), persistence_params, n=50)
        with pytest.raises(ValueError):
            step(st, persistence_params, dt=0.0)

    def test_needs_enough_nodes(self, persistence_params):
        with pytest.raises(ValueError):
            initial_state(InitialData(), persistence_params, n=4)


class TestRun:
    def test_observer_records(self, persistence_run, persistence_params):
        tr = persistence_run
        assert tr.t.size == 201
        assert tr.t[0] == 0.0
        assert tr.t[-1] == pytest.approx(300.0)
        assert tr.h[0] == persistence_params.h0
        npt.assert_allclose(tr.sup[:, 0], (0.5, 0.2, 0.2), rtol=1e-3)

    def test_boundary_strictly_expands(self, persistence_run, extinction_run):
        for tr in (persistence_run, extinction_run):
            assert np.all(np.diff(tr.h) > 0.0)
            assert np.all(tr.h_prime[1:] > 0.0)

    def test_habitat_escapes_every_bound(self, persistence_run, persistence_params):
        assert persistence_run.h[-1] > 5.0 * persistence_params.h0

    def test_sups_respect_a_priori_caps(self, persistence_run, extinction_run):
        for tr in (persistence_run, extinction_run):
            caps = np.asarray(tr.caps)
            assert np.all(tr.sup <= caps[:, None] + 1e-12)

    def test_infection_dies_out_below_threshold(self, extinction_run):
        assert extinction_run.sup[1, -1] <= 1e-4
        assert extinction_run.sup[2, -1] <= 1e-4

    def test_clipping_stays_within_budget(self, persistence_run, extinction_run):
        assert persistence_run.clipped_mass <= 1e-8
        assert extinction_run.clipped_mass <= 1e-8

    def test_snapshots_at_requested_times(self, persistence_params):
        tr = run(
            InitialData(), persistence_params, T=1.0, n=50,
            snapshot_times=(0.0, 0.5),
        )
        times = [s.t for s in tr.snapshots]
        assert len(times) == 3  # 0, 0.5, and always T
        npt.assert_allclose(times, (0.0, 0.5, 1.0), atol=1e-6)
        assert tr.final_snapshot.t == times[-1]

    def test_snapshot_coordinates_are_physical(self, persistence_params):
        tr = run(InitialData(), persistence_params, T=0.5, n=50)
        snap = tr.final_snapshot
        assert snap.x[0] == 0.0
        assert snap.x[-1] == snap.h
        assert np.all(snap.U[:, [0, -1]] == 0.0)

    def test_input_validation(self, persistence_params):
        with pytest.raises(ValueError):
            run(InitialData(), persistence_params, T=0.0, n=50)
        with pytest.raises(ValueError):
            run(InitialData(), persistence_params, T=1.0, n=50, num_observers=1)
        with pytest.raises(ValueError):
            run(InitialData(), persistence_params, T=1.0, n=50, snapshot_times=(2.0,))


class TestConvergence:
    def test_temporal_order_of_front_position(self, persistence_params):
        """Halving dt must shrink the change in h(T) by roughly the Euler
        factor of two (>= 1.8 guards against preasymptotic wobble)."""
        hs = []
        for dt in (1e-3, 5e-4, 2.5e-4):
            tr = run(InitialData(), persistence_params, T=2.0, dt=dt, n=100)
            hs.append(tr.h[-1])
        ratio = abs(hs[0] - hs[1]) / abs(hs[1] - hs[2])
        assert ratio >= 1.8

    def test_spatial_order_of_sup_norms(self, persistence_params):
        """Halving dy at fixed dt must shrink sup-norm changes by >= 3.5
        (second-order interior scheme; the shared O(dt) part cancels in the
        differences)."""
        sups = []
        for n in (100, 200, 400):
            tr = run(
                InitialData(amplitudes=(0.2, 0.05, 0.05)),
                persistence_params, T=5.0, dt=1e-3, n=n,
            )
            sups.append(tr.sup[:, -1])
        coarse = np.abs(sups[0] - sups[1])
        fine = np.abs(sups[1] - sups[2])
        assert np.all(coarse / fine >= 3.5)

    def test_virus_free_run_settles_on_the_scalar_profile(self, persistence_params):
        """With no infection present the cells relax, on any fixed window the
        habitat has long cleared, to the closed-form half-line profile."""
        tr = run(InitialData(amplitudes=(0.5, 0.0, 0.0)), persistence_params, T=40.0, n=400)
        assert np.all(tr.sup[1:] == 0.0)
        snap = tr.final_snapshot
        sel = snap.x <= 5.0
        expect = ubar1_closed_form(persistence_params, persistence_params.d1, snap.x[sel])
        npt.assert_allclose(snap.U[0, sel], expect, atol=5e-4)


class TestOdeComparison:
    def test_subthreshold_pair_decays(self, extinction_params):
        # b*k*(theta/a + eps)/(c*q) = 0.525 < 1: the envelope must vanish
        o = ode_comparison(extinction_params, 0.05, (2.0, 2.0), T=80.0, dt=5e-3)
        assert abs(o.z2[-1]) <= 1e-8
        assert abs(o.z3[-1]) <= 1e-8

    def test_superthreshold_pair_finds_the_rest_point(self, persistence_params):
        p = persistence_params
        fp = homogeneous_fixed_point(p, p.theta / p.a + 0.05)
        o = ode_comparison(p, 0.05, (0.5, 0.5), T=100.0, dt=5e-3)
        npt.assert_allclose((o.z2[-1], o.z3[-1]), fp, atol=1e-8)

    def test_rest_point_is_stationary(self, persistence_params):
        p = persistence_params
        fp = homogeneous_fixed_point(p, p.theta / p.a + 0.05)
        o = ode_comparison(p, 0.05, fp, T=50.0, dt=5e-3)
        assert np.max(np.abs(o.z2 - fp[0])) <= 1e-10
        assert np.max(np.abs(o.z3 - fp[1])) <= 1e-10

    def test_input_validation(self, persistence_params):
        with pytest.raises(ValueError):
            ode_comparison(persistence_params, 0.0, (1.0, 1.0), T=1.0)
        with pytest.raises(ValueError):
            ode_comparison(persistence_params, 0.1, (-1.0, 1.0), T=1.0)
        with pytest.raises(ValueError):
            ode_comparison(
                persistence_params, 0.1, (1.0, 1.0), T=1.0,
                observer_times=np.linspace(0.5, 1.0, 5),
            )


class TestDominance:
    def test_extinction_run_is_dominated(self, extinction_run):
        env = comparison_for(extinction_run, eps=0.05)
        rep = dominance_check(extinction_run, env)
        assert rep.conclusive
        assert rep.t_align == 0.0
        assert rep.ordered_at_start
        assert rep.excess_u2 <= 1e-6
        assert rep.excess_u3 <= 1e-6

    def test_frozen_boundary_with_tiny_infection(self):
        p = ModelParams(theta=1.0, a=1.0, b=2.0, c=1.0, k=1.0, q=1.0,
                        mu1=0.0, mu2=0.0, mu3=0.0)
        tr = run(InitialData(amplitudes=(0.5, 1e-6, 1e-6)), p, T=5.0, n=100)
        rep = dominance_check(tr, comparison_for(tr, eps=0.05))
        assert rep.excess_u2 == 0.0
        assert rep.excess_u3 == 0.0

    def test_envelope_started_below_the_sups_is_flagged(self, extinction_run, extinction_params):
        env = ode_comparison(
            extinction_params, 0.05, (1e-12, 1e-12), T=200.0, dt=1e-2,
            observer_times=extinction_run.t,
        )
        rep = dominance_check(extinction_run, env)
        assert rep.conclusive
        assert not rep.ordered_at_start
        assert rep.excess_u2 > 0.0

    def test_unshared_observer_times_rejected(self, extinction_run, extinction_params):
        env = ode_comparison(
            extinction_params, 0.05, (1.0, 1.0), T=1.0, dt=1e-2,
            observer_times=np.linspace(0.0, 1.0, 5),
        )
        with pytest.raises(ConsistencyError):
            dominance_check(extinction_run, env)

    def test_alignment_never_reached(self, extinction_params):
        """sup u1 stays above theta/a + eps on a very short run: building an
        envelope is impossible and the check reports itself inconclusive."""
        tr = run(
            InitialData(amplitudes=(2.0, 0.1, 0.1)), extinction_params,
            T=0.02, n=100, num_observers=11,
        )
        with pytest.raises(ValueError, match="alignment"):
            comparison_for(tr, eps=0.05)
        env = ode_comparison(
            extinction_params, 0.05, (1.0, 1.0), T=0.02, observer_times=tr.t,
        )
        rep = dominance_check(tr, env)
        assert not rep.conclusive
        assert rep.t_align is None


class TestCsvRoundTrips:
    def test_trajectory(self, tmp_path, persistence_params):
        tr = run(InitialData(), persistence_params, T=1.0, n=50, num_observers=11)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(tr, path)
        back = np.genfromtxt(path, delimiter=",", names=True)
        assert back.dtype.names == ("t", "h", "hprime", "sup_u1", "sup_u2", "sup_u3")
        npt.assert_array_equal(back["t"], tr.t)
        npt.assert_array_equal(back["h"], tr.h)
        npt.assert_array_equal(back["hprime"], tr.h_prime)
        for i, name in enumerate(("sup_u1", "sup_u2", "sup_u3")):
            npt.assert_array_equal(back[name], tr.sup[i])

    def test_snapshot(self, tmp_path, persistence_params):
        tr = run(InitialData(), persistence_params, T=0.5, n=50, num_observers=6)
        snap = tr.final_snapshot
        path = tmp_path / "snap.csv"
        write_snapshot_csv(snap, path)
        back = np.genfromtxt(path, delimiter=",", names=True)
        assert back.dtype.names == ("x", "u1", "u2", "u3")
        npt.assert_array_equal(back["x"], snap.x)
        for i, name in enumerate(("u1", "u2", "u3")):
            npt.assert_array_equal(back[name], snap.U[i])
