//! Time evolution of density matrices on a uniform grid.
//!
//! Two integrators, both classical fourth-order Runge-Kutta with a fixed
//! step: `evolve_unitary` integrates the propagator of `dU/dt = -i H(t) U`
//! and conjugates the initial state, `evolve_lindblad` steps the GKSL
//! generator
//!
//! ```text
//! dρ/dt = -i[H, ρ] + Σ_j γ_j (L_j ρ L_j† - ½{L_j†L_j, ρ})
//! ```
//!
//! directly. Fixed steps keep the grid aligned with the finite differences
//! used downstream.

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_deviation, identity, CMat, DensityMatrix, HERMITICITY_TOL};

/// A uniform time grid over `[0, t_final]` with `steps` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidValue {
                field: "t_final".into(),
                message: format!("must be a positive finite time, got {t_final}"),
            });
        }
        if steps < 2 {
            return Err(Error::InvalidValue {
                field: "steps".into(),
                message: format!("need at least 2 steps, got {steps}"),
            });
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Number of samples including both endpoints.
    pub fn samples(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.dt() * i as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples()).map(|i| self.time(i))
    }
}

/// Named Hamiltonian families a scenario can request.
#[derive(Debug, Clone)]
pub enum HamiltonianFamily {
    Constant(CMat),
    /// `H(t) = (ω/2)(sinθ cos ωt σx + sinθ sin ωt σy + cosθ σz)`, qubits only.
    Precession { omega: f64, theta: f64 },
    /// Piecewise-linear interpolation through tabulated samples.
    Tabulated { times: Vec<f64>, matrices: Vec<CMat> },
}

impl HamiltonianFamily {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(m) => m.nrows(),
            Self::Precession { .. } => 2,
            Self::Tabulated { matrices, .. } => matrices.first().map_or(0, |m| m.nrows()),
        }
    }

    /// Validate shape constraints against a dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Constant(m) => {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "hamiltonian".into(),
                        expected: dim,
                        actual: m.nrows().max(m.ncols()),
                    });
                }
            }
            Self::Precession { .. } => {
                if dim != 2 {
                    return Err(Error::InvalidValue {
                        field: "hamiltonian".into(),
                        message: "the precession family is only defined for dimension 2".into(),
                    });
                }
            }
            Self::Tabulated { times, matrices } => {
                if times.len() != matrices.len() || times.len() < 2 {
                    return Err(Error::InvalidValue {
                        field: "hamiltonian.times".into(),
                        message: "tabulated family needs matching times/matrices with at least 2 samples".into(),
                    });
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidValue {
                        field: "hamiltonian.times".into(),
                        message: "tabulated times must be strictly increasing".into(),
                    });
                }
                for m in matrices {
                    if m.nrows() != dim || m.ncols() != dim {
                        return Err(Error::DimensionMismatch {
                            context: "hamiltonian.matrices".into(),
                            expected: dim,
                            actual: m.nrows().max(m.ncols()),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Tabulated families must cover the integration span.
    pub fn validate_span(&self, t_final: f64) -> Result<()> {
        if let Self::Tabulated { times, .. } = self {
            if times[0] > 1e-12 || *times.last().unwrap() < t_final - 1e-12 {
                return Err(Error::InvalidValue {
                    field: "hamiltonian.times".into(),
                    message: format!(
                        "tabulated times must cover [0, {t_final}], got [{}, {}]",
                        times[0],
                        times.last().unwrap()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> CMat {
        match self {
            Self::Constant(m) => m.clone(),
            Self::Precession { omega, theta } => {
                let (st, ct) = (theta.sin(), theta.cos());
                let (sw, cw) = ((omega * t).sin(), (omega * t).cos());
                let half = omega / 2.0;
                // (ω/2)(sinθ cosωt σx + sinθ sinωt σy + cosθ σz)
                CMat::from_row_slice(
                    2,
                    2,
                    &[
                        c(half * ct, 0.0),
                        c(half * st * cw, -half * st * sw),
                        c(half * st * cw, half * st * sw),
                        c(-half * ct, 0.0),
                    ],
                )
            }
            Self::Tabulated { times, matrices } => {
                let t = t.clamp(times[0], *times.last().unwrap());
                let idx = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
                    Ok(i) => return matrices[i].clone(),
                    Err(i) => i.clamp(1, times.len() - 1),
                };
                let (t0, t1) = (times[idx - 1], times[idx]);
                let frac = (t - t0) / (t1 - t0);
                matrices[idx - 1].scale(1.0 - frac) + matrices[idx].scale(frac)
            }
        }
    }
}

/// A jump operator with its rate.
#[derive(Debug, Clone)]
pub struct JumpOp {
    pub operator: CMat,
    pub rate: f64,
}

/// Hamiltonian plus jump operators; with no jump operators this is a closed
/// system.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: HamiltonianFamily,
    jump_ops: Vec<JumpOp>,
}

impl LindbladModel {
    pub fn new(dim: usize, hamiltonian: HamiltonianFamily, jump_ops: Vec<JumpOp>) -> Result<Self> {
        hamiltonian.validate(dim)?;
        for (i, j) in jump_ops.iter().enumerate() {
            if j.operator.nrows() != dim || j.operator.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("jump_ops[{i}]"),
                    expected: dim,
                    actual: j.operator.nrows().max(j.operator.ncols()),
                });
            }
            if !(j.rate.is_finite() && j.rate >= 0.0) {
                return Err(Error::InvalidValue {
                    field: format!("jump_ops[{i}].rate"),
                    message: format!("rates must be nonnegative, got {}", j.rate),
                });
            }
        }
        Ok(Self {
            dim,
            hamiltonian,
            jump_ops,
        })
    }

    pub fn closed(dim: usize, hamiltonian: HamiltonianFamily) -> Result<Self> {
        Self::new(dim, hamiltonian, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &HamiltonianFamily {
        &self.hamiltonian
    }

    pub fn jump_ops(&self) -> &[JumpOp] {
        &self.jump_ops
    }

    pub fn is_closed(&self) -> bool {
        self.jump_ops.iter().all(|j| j.rate == 0.0)
    }
}

/// Integrator diagnostics recorded alongside a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryDiagnostics {
    /// max over samples of |tr ρ - 1|
    pub trace_drift: f64,
    /// max over samples of the Hermiticity deviation
    pub hermiticity_drift: f64,
}

/// A time-sampled density-matrix history, one sample per grid point.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    grid: TimeGrid,
    samples: Vec<CMat>,
}

impl DensityTrajectory {
    pub fn from_samples(grid: TimeGrid, samples: Vec<CMat>) -> Result<Self> {
        if samples.len() != grid.samples() {
            return Err(Error::DimensionMismatch {
                context: "trajectory samples".into(),
                expected: grid.samples(),
                actual: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.samples[0].nrows()
    }

    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &CMat {
        &self.samples[i]
    }

    pub fn diagnostics(&self) -> TrajectoryDiagnostics {
        let mut trace_drift: f64 = 0.0;
        let mut herm: f64 = 0.0;
        for s in &self.samples {
            let tr = s.trace();
            trace_drift = trace_drift.max(((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt());
            herm = herm.max(hermiticity_deviation(s));
        }
        TrajectoryDiagnostics {
            trace_drift,
            hermiticity_drift: herm,
        }
    }
}

fn hermitian_sample(h: &HamiltonianFamily, t: f64) -> Result<CMat> {
    let m = h.eval(t);
    let dev = hermiticity_deviation(&m);
    if dev > HERMITICITY_TOL {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: HERMITICITY_TOL,
        });
    }
    Ok(m)
}

/// Unitary evolution: integrate the propagator and conjugate the state.
///
/// The model must carry no dissipation. Every sample of a unitary trajectory
/// shares the spectrum of the initial state (up to integrator error).
pub fn evolve_unitary(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<DensityTrajectory> {
    if !model.is_closed() {
        return Err(Error::InvalidValue {
            field: "jump_ops".into(),
            message: "evolve_unitary requires all rates to vanish".into(),
        });
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "rho0".into(),
            expected: model.dim(),
            actual: rho0.dim(),
        });
    }
    model.hamiltonian().validate_span(grid.t_final())?;
    let dim = model.dim();
    let dt = grid.dt();
    let minus_i = c(0.0, -1.0);
    let mut u = identity(dim);
    let mut samples = Vec::with_capacity(grid.samples());
    samples.push(rho0.matrix().clone());
    for i in 0..grid.steps() {
        let t = grid.time(i);
        let h0 = hermitian_sample(model.hamiltonian(), t)?;
        let h1 = hermitian_sample(model.hamiltonian(), t + 0.5 * dt)?;
        let h2 = hermitian_sample(model.hamiltonian(), t + dt)?;
        let f = |h: &CMat, u: &CMat| -> CMat { (h * u).map(|z| z * minus_i) };
        let k1 = f(&h0, &u);
        let k2 = f(&h1, &(&u + k1.scale(0.5 * dt)));
        let k3 = f(&h1, &(&u + k2.scale(0.5 * dt)));
        let k4 = f(&h2, &(&u + k3.scale(dt)));
        u += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        samples.push(&u * rho0.matrix() * u.adjoint());
    }
    DensityTrajectory::from_samples(grid.clone(), samples)
}

/// GKSL evolution by direct RK4 stepping of the density matrix.
pub fn evolve_lindblad(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<DensityTrajectory> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "rho0".into(),
            expected: model.dim(),
            actual: rho0.dim(),
        });
    }
    model.hamiltonian().validate_span(grid.t_final())?;
    let dt = grid.dt();
    let minus_i = c(0.0, -1.0);
    // (L, L†L, γ) per active channel
    let channels: Vec<(CMat, CMat, f64)> = model
        .jump_ops()
        .iter()
        .filter(|j| j.rate > 0.0)
        .map(|j| (j.operator.clone(), j.operator.adjoint() * &j.operator, j.rate))
        .collect();
    let gen = |h: &CMat, rho: &CMat| -> CMat {
        let mut out = (h * rho - rho * h).map(|z| z * minus_i);
        for (l, ll, rate) in &channels {
            out += (l * rho * l.adjoint() - (ll * rho + rho * ll).scale(0.5)).scale(*rate);
        }
        out
    };
    let mut rho = rho0.matrix().clone();
    let mut samples = Vec::with_capacity(grid.samples());
    samples.push(rho.clone());
    for i in 0..grid.steps() {
        let t = grid.time(i);
        let h0 = hermitian_sample(model.hamiltonian(), t)?;
        let h1 = hermitian_sample(model.hamiltonian(), t + 0.5 * dt)?;
        let h2 = hermitian_sample(model.hamiltonian(), t + dt)?;
        let k1 = gen(&h0, &rho);
        let k2 = gen(&h1, &(&rho + k1.scale(0.5 * dt)));
        let k3 = gen(&h1, &(&rho + k2.scale(0.5 * dt)));
        let k4 = gen(&h2, &(&rho + k3.scale(dt)));
        rho += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        let tr = rho.trace();
        let drift = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
        if drift > 1e-6 {
            return Err(Error::TraceDrift {
                drift,
                tolerance: 1e-6,
            });
        }
        samples.push(rho.clone());
    }
    DensityTrajectory::from_samples(grid.clone(), samples)
}
