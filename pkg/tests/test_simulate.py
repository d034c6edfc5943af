"""Structured noise, single-step propagation, closed-loop runs."""

import numpy as np
import pytest

from qfpd import (ControllerConfig, DensityMatrix, NoiseSpec, PhysicalSystem,
                  ValidationError, build_generators, devectorize, discretize,
                  measure, run_closed_loop, sample_process_noise, step, vectorize)
from qfpd.oracles import random_density_matrix, rk4_density_trajectory
from qfpd.simulate import Trajectory
from qfpd.spins import level_projector, spin_half_system
from qfpd.states import conjugate_pairs, trace_row


class TestProcessNoise:
    def test_zero_std_gives_zero(self, rng):
        spec = NoiseSpec(process_std=0.0, process_enabled=True)
        assert np.abs(sample_process_noise(spec, 3, rng)).max() == 0.0

    def test_disabled_gives_zero(self, rng):
        spec = NoiseSpec(process_std=0.5, process_enabled=False)
        assert np.abs(sample_process_noise(spec, 3, rng)).max() == 0.0

    def test_structure_exact_per_sample(self, rng):
        spec = NoiseSpec(process_std=0.3, process_enabled=True)
        pairs = list(conjugate_pairs(3))
        for _ in range(50):
            z = sample_process_noise(spec, 3, rng)
            assert np.array_equal(z, z[pairs].conj())          # Hermitian
            assert np.abs(z[:3].imag).max() == 0.0             # real diagonal
            assert z[:3].sum() == 0.0                          # exactly traceless

    def test_state_plus_noise_stays_valid_structurally(self, rng):
        spec = NoiseSpec(process_std=0.01, process_enabled=True)
        x = vectorize(random_density_matrix(3, rng)).values
        z = sample_process_noise(spec, 3, rng)
        rho = devectorize(x + z)   # raises if pairing broken
        # the draw itself is exactly traceless; elementwise addition leaves
        # only summation rounding in the recomputed trace
        before = x[:3].real.sum()
        after = np.trace(rho.matrix).real
        assert abs(after - before) <= 1e-15

    def test_sample_mean_within_clt_bound(self):
        spec = NoiseSpec(process_std=0.2, process_enabled=True)
        rng = np.random.default_rng(77)
        n = 100_000
        acc = np.zeros(4, dtype=complex)
        for _ in range(n):
            acc += sample_process_noise(spec, 2, rng)
        mean = acc / n
        assert np.abs(mean).max() <= 3 * 0.2 / np.sqrt(n)

    def test_per_slot_stds_validated(self):
        spec = NoiseSpec(process_std=np.array([0.1, 0.1, 0.2, 0.3]),
                         process_enabled=True)
        with pytest.raises(ValidationError, match="share one std"):
            sample_process_noise(spec, 2, np.random.default_rng(0))

    def test_negative_std_rejected(self):
        spec = NoiseSpec(process_std=-0.1, process_enabled=True)
        with pytest.raises(ValidationError, match="nonnegative"):
            sample_process_noise(spec, 2, np.random.default_rng(0))

    def test_spec_seed_reproducible(self):
        spec = NoiseSpec(process_std=0.2, process_enabled=True, seed=11)
        a = sample_process_noise(spec, 2, spec.make_rng())
        b = sample_process_noise(spec, 2, spec.make_rng())
        assert np.array_equal(a, b)


class TestStep:
    def test_free_step_matches_master_equation(self, spin_half_bundle, rng):
        bundle = spin_half_bundle
        rho = random_density_matrix(2, rng)
        x = vectorize(rho).values - bundle.generators.x_equilibrium
        nxt = step(x, 0.0, bundle.model, bundle.generators)
        reference = rk4_density_trajectory(bundle.system, rho.matrix,
                                           np.zeros(1), bundle.model.dt,
                                           substeps=1000)[0]
        got = devectorize(nxt + bundle.generators.x_equilibrium).matrix
        assert np.abs(got - reference).max() < 1e-8

    def test_negated_equilibrium_is_fixed_point(self, spin_half_bundle):
        bundle = spin_half_bundle
        x = -bundle.generators.x_equilibrium
        nxt = step(x, 0.7, bundle.model, bundle.generators)
        # the zero unshifted vector stays zero under any control
        assert np.abs(nxt + bundle.generators.x_equilibrium).max() < 1e-15

    def test_trace_preserved_under_constant_drive(self, spin_half_bundle):
        bundle = spin_half_bundle
        x = np.zeros(4, dtype=complex)
        tr = trace_row(2)
        for _ in range(100):
            x = step(x, 0.1, bundle.model, bundle.generators)
            defect = abs(tr @ (x + bundle.generators.x_equilibrium) - 1.0)
            assert defect <= 1e-6


class TestMeasure:
    def test_orthogonal_projector_reads_zero(self, spin_half_bundle):
        bundle = spin_half_bundle
        x = np.zeros(4, dtype=complex)  # unshifted state = ground projector
        assert measure(x, bundle.model, bundle.generators) == 0.0

    def test_target_state_reads_one(self, spin_half_bundle):
        bundle = spin_half_bundle
        xt = vectorize(DensityMatrix.pure(2, 1)).values
        x = xt - bundle.generators.x_equilibrium
        assert measure(x, bundle.model, bundle.generators) == 1.0

    def test_measurement_noise_std(self, spin_half_bundle):
        bundle = spin_half_bundle
        spec = NoiseSpec(measure_std=0.01, measure_enabled=True)
        rng = np.random.default_rng(5)
        x = np.zeros(4, dtype=complex)
        vals = np.array([measure(x, bundle.model, bundle.generators, spec, rng)
                         for _ in range(10_000)])
        assert abs(vals.std() - 0.01) / 0.01 < 0.05


def _spin_half_setup(horizon=200):
    system = spin_half_system()
    x0 = vectorize(DensityMatrix.pure(2, 0)).values
    gen = build_generators(system, x_equilibrium=x0)
    model = discretize(gen, 0.0505, observable=level_projector(2, 1))
    cfg = ControllerConfig(gr=1e-5, omega=1.0, od=1.0, horizon=horizon)
    return gen, model, cfg, x0


class TestClosedLoop:
    def test_same_seed_bit_identical(self):
        gen, model, cfg, x0 = _spin_half_setup(50)
        a = run_closed_loop(gen, model, cfg, x0, seed=3)
        b = run_closed_loop(gen, model, cfg, x0, seed=3)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.outputs, b.outputs)
        assert np.array_equal(a.controls, b.controls)

    def test_different_seed_differs(self):
        gen, model, cfg, x0 = _spin_half_setup(50)
        a = run_closed_loop(gen, model, cfg, x0, seed=3)
        b = run_closed_loop(gen, model, cfg, x0, seed=4)
        assert not np.array_equal(a.controls, b.controls)

    def test_zero_authority_output_constant(self):
        """With mu = 0 there is no control column: the output never moves."""
        system = PhysicalSystem(energies=np.array([0.5, -0.5]),
                                dipole=np.zeros((2, 2)))
        x0 = vectorize(DensityMatrix.pure(2, 0)).values
        gen = build_generators(system, x_equilibrium=x0)
        model = discretize(gen, 0.0505, observable=level_projector(2, 1))
        cfg = ControllerConfig(gr=1e-5, omega=1.0, od=1.0, horizon=100)
        traj = run_closed_loop(gen, model, cfg, x0, seed=0)
        assert np.abs(traj.outputs - traj.initial_output).max() == 0.0
        assert traj.initial_output == 0.0

    def test_population_transfer_succeeds(self):
        gen, model, cfg, x0 = _spin_half_setup()
        traj = run_closed_loop(gen, model, cfg, x0, seed=1)
        inside = np.abs(traj.outputs - 1.0) <= 0.02
        first = int(np.argmax(inside))
        assert inside.any() and inside[first:].all()

    def test_better_than_uncontrolled(self):
        gen, model, cfg, x0 = _spin_half_setup()
        traj = run_closed_loop(gen, model, cfg, x0, seed=1)
        controlled = abs(traj.outputs[-1] - cfg.od)
        xt = x0.copy()
        for _ in range(cfg.horizon):
            xt = model.a @ xt
        free = abs((model.measurement_row @ xt).real - cfg.od)
        assert controlled <= free

    def test_steady_mode_aborts_at_diagonal_start(self):
        gen, model, cfg, x0 = _spin_half_setup(10)
        from qfpd.errors import ConvergenceError
        with pytest.raises(ConvergenceError, match="step 1"):
            run_closed_loop(gen, model, cfg, x0, seed=1, riccati_mode="steady")

    def test_conservation_with_noise_structural(self):
        gen, model, cfg, x0 = _spin_half_setup(100)
        noise = NoiseSpec(process_std=1e-3, measure_std=1e-3,
                          process_enabled=True, measure_enabled=True)
        traj = run_closed_loop(gen, model, cfg, x0, noise=noise, seed=2)
        assert traj.trace_defects.max() <= 1e-12
        assert traj.hermiticity_defects.max() <= 1e-12

    def test_trace_renormalization_flag(self):
        gen, model, cfg, x0 = _spin_half_setup(50)
        traj = run_closed_loop(gen, model, cfg, x0, seed=1,
                               renormalize_trace=True)
        assert traj.trace_defects.max() <= 1e-12

    def test_sampling_mode_mean_tracks_law(self):
        """Across seeds, sampled controls stay near the mean-mode law.

        The CLT premise (independent draws around the same mean) holds
        exactly at the first step, where every seed shares the state; after
        the transient the seeds' states re-converge to the target and the
        premise holds again approximately.  The high-gain transient couples
        state and draw, so coverage there is measured, not exact.
        """
        gen, model, cfg, x0 = _spin_half_setup(120)
        mean_traj = run_closed_loop(gen, model, cfg, x0, seed=1)
        n_seeds = 100
        samples = np.empty((n_seeds, cfg.horizon))
        for k in range(n_seeds):
            t = run_closed_loop(gen, model, cfg, x0, seed=1000 + k,
                                sample_controls=True)
            samples[k] = t.controls
        mean_u = samples.mean(axis=0)
        bound = 3.0 * np.sqrt(mean_traj.control_variances) / np.sqrt(n_seeds)
        deviation = np.abs(mean_u - mean_traj.controls)
        # exact at the shared first step
        assert deviation[0] <= bound[0]
        # and across the settled tail of the run
        settled = slice(60, None)
        frac = np.mean(deviation[settled] <= 3 * bound[settled])
        assert frac >= 0.9

    def test_trajectory_length_consistency(self):
        gen, model, cfg, x0 = _spin_half_setup(25)
        traj = run_closed_loop(gen, model, cfg, x0, seed=0)
        assert traj.horizon == 25
        assert traj.states.shape == (25, 4)
        with pytest.raises(ValidationError, match="inconsistent"):
            Trajectory(dt=0.1, initial_state=x0, initial_output=0.0,
                       times=np.arange(3), states=np.zeros((2, 4)),
                       outputs=np.zeros(3), controls=np.zeros(3),
                       control_variances=np.zeros(3), trace_defects=np.zeros(3),
                       hermiticity_defects=np.zeros(3),
                       min_eigenvalues=np.zeros(3),
                       validity_flags=np.zeros(3, dtype=bool))

    def test_bad_mode_rejected(self):
        gen, model, cfg, x0 = _spin_half_setup(5)
        with pytest.raises(ValidationError, match="riccati mode"):
            run_closed_loop(gen, model, cfg, x0, riccati_mode="sideways")
