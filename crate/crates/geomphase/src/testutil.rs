//! Shared fixtures for unit tests.

use crate::evolve::{
    evolve_lindblad, evolve_unitary, DensityTrajectory, HamiltonianFamily, JumpOp, LindbladModel,
    TimeGrid,
};
use crate::linalg::{c, matrix_exp, CMat, DensityMatrix};
use crate::spectral::{track_spectrum, SpectralTrajectory, TrackOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;



pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

pub fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = CMat::from_fn(dim, dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let psd = &g * g.adjoint() + CMat::identity(dim, dim).scale(0.05);
    let tr = psd.trace().re;
    DensityMatrix::new(psd.unscale(tr)).expect("constructed PSD with unit trace")
}

pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let h = (&g + g.adjoint()).scale(0.5);
    matrix_exp(&h.map(|z| z * c(0.0, -1.0))).expect("skew-Hermitian exponential")
}

/// Bloch vector tilted by `theta`, precessing one period about z.
pub fn precession_trajectory(r: f64, theta: f64, steps: usize) -> DensityTrajectory {
    let omega = 1.0;
    let model =
        LindbladModel::closed(2, HamiltonianFamily::Constant(sigma_z().scale(omega / 2.0)))
            .unwrap();
    let rho0 = DensityMatrix::qubit_bloch(r, theta, 0.0).unwrap();
    let grid = TimeGrid::new(2.0 * PI / omega, steps).unwrap();
    evolve_unitary(&model, &rho0, &grid).unwrap()
}

/// Equatorial Bloch vector under `H = (ω/2)σz` plus σz dephasing.
pub fn dephasing_trajectory(r: f64, gamma: f64, steps: usize) -> DensityTrajectory {
    let model = LindbladModel::new(
        2,
        HamiltonianFamily::Constant(sigma_z().scale(0.5)),
        vec![JumpOp {
            operator: sigma_z(),
            rate: gamma,
        }],
    )
    .unwrap();
    let rho0 = DensityMatrix::qubit_bloch(r, PI / 2.0, 0.0).unwrap();
    let grid = TimeGrid::new(2.0, steps).unwrap();
    evolve_lindblad(&model, &rho0, &grid).unwrap()
}

pub fn spectrum(traj: &DensityTrajectory) -> SpectralTrajectory {
    track_spectrum(traj, &TrackOptions::default()).unwrap()
}

/// Smooth per-branch phase fields vanishing at t = 0, for gauge probes.
pub fn smooth_phase_fields(
    spec: &SpectralTrajectory,
    amplitude: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_final = spec.grid().t_final();
    (0..spec.rank())
        .map(|_| {
            let coeffs: Vec<f64> = (1..=3)
                .map(|_| amplitude * (rng.random::<f64>() - 0.5) * 2.0)
                .collect();
            (0..spec.num_samples())
                .map(|i| {
                    let u = spec.grid().time(i) / t_final;
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, a)| a * (PI * (j + 1) as f64 * u).sin())
                        .sum()
                })
                .collect()
        })
        .collect()
}
