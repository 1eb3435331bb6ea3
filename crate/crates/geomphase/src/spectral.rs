//! Spectral histories: continuous eigenvalue branches and gauge-fixed
//! eigenvector branches of a density-matrix trajectory.
//!
//! Branches between consecutive samples are matched by eigenvector overlap,
//! not by eigenvalue order, so branch identities survive level crossings.
//! The continuity gauge rotates each matched eigenvector by a phase so that
//! consecutive overlaps are real positive; the raw gauge keeps whatever the
//! eigensolver produced. The derived operators
//!
//! ```text
//! U(t) = Σ_k |w_k(t)><w_k(0)|      C(t) = Σ_k sqrt(p_k(t)) |w_k(0)><w_k(0)|
//! ```
//!
//! are exposed both on the full Hilbert space and as matrices on the retained
//! branch index space (the `{|w_k(0)>}` basis), which is where all the phase
//! functionals are evaluated.

use crate::error::{Error, Result};
use crate::evolve::{DensityTrajectory, TimeGrid};
use crate::linalg::{c, eig_hermitian, matrix_exp, CMat, CVec, C64};

/// How eigenvector phases are fixed along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugePolicy {
    /// Rotate each branch so consecutive overlaps are real positive.
    Continuity,
    /// Keep the eigensolver's phases.
    Raw,
}

#[derive(Debug, Clone)]
pub struct TrackOptions {
    /// Branches whose eigenvalue stays above this bound are retained; a
    /// retained branch dipping below it (or a discarded one rising above)
    /// is a rank change and rejected.
    pub min_eigenvalue: f64,
    pub gauge: GaugePolicy,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            min_eigenvalue: 1e-10,
            gauge: GaugePolicy::Continuity,
        }
    }
}

/// Branch-matched, gauge-fixed eigendecomposition history.
#[derive(Debug, Clone)]
pub struct SpectralTrajectory {
    grid: TimeGrid,
    dim: usize,
    rank: usize,
    /// `p[i][k]`: eigenvalue of branch k at sample i.
    p: Vec<Vec<f64>>,
    /// `w[i]`: dim x rank matrix whose k-th column is branch k at sample i.
    w: Vec<CMat>,
    /// `cum[i][k]`: product of unit consecutive overlaps
    /// `Π_{j<i} conj(<w_k(t_j)|w_k(t_{j+1})>)/|..|`, the discrete
    /// `e^{-∫ <w|w'> dt}` factor.
    cum: Vec<Vec<C64>>,
    gauge: GaugePolicy,
}

impl SpectralTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of retained branches (the constant rank N).
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gauge(&self) -> GaugePolicy {
        self.gauge
    }

    pub fn num_samples(&self) -> usize {
        self.w.len()
    }

    pub fn eigenvalues(&self, i: usize) -> &[f64] {
        &self.p[i]
    }

    /// dim x rank matrix of branch vectors at sample i.
    pub fn basis(&self, i: usize) -> &CMat {
        &self.w[i]
    }

    pub fn branch(&self, k: usize, i: usize) -> CVec {
        self.w[i].column(k).into_owned()
    }

    /// `U(t_i) = Σ_k |w_k(t_i)><w_k(0)|` on the full space (a partial
    /// isometry when the rank is deficient).
    pub fn u_op(&self, i: usize) -> CMat {
        &self.w[i] * self.w[0].adjoint()
    }

    /// `C(t_i)` on the full space.
    pub fn c_op(&self, i: usize) -> CMat {
        &self.w[0] * self.c_index(i) * self.w[0].adjoint()
    }

    /// `C(t_i)` as a rank x rank diagonal matrix on the branch index space.
    pub fn c_index(&self, i: usize) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.rank,
            self.p[i].iter().map(|&p| c(p.max(0.0).sqrt(), 0.0)),
        ))
    }

    /// Overlap (Gram) matrix `M(t_i)` with entries `<w_l(0)|w_m(t_i)>`.
    pub fn gram(&self, i: usize) -> CMat {
        self.w[0].adjoint() * &self.w[i]
    }

    /// Unit consecutive overlap `<w_k(t_i)|w_k(t_{i+1})>` (not normalized).
    pub fn step_overlap(&self, k: usize, i: usize) -> C64 {
        self.w[i].column(k).dotc(&self.w[i + 1].column(k))
    }

    /// `Π_{j<i} conj(z_j)/|z_j|`, the accumulated `e^{-il_k(t_i)}` factor of
    /// branch k. Gauge-covariant by construction.
    pub fn geometric_factor(&self, k: usize, i: usize) -> C64 {
        self.cum[i][k]
    }

    /// Accumulated connection integral `l_k(t_i) = -i ∫ <w_k|dw_k/dt> dt`.
    pub fn connection_integral(&self, k: usize, i: usize) -> f64 {
        -self.cum[i][k].arg()
    }

    /// Raw branch connection `<w_k | dw_k/dt>` by central differences
    /// (one-sided at the endpoints).
    pub fn connection_raw(&self, k: usize, i: usize) -> C64 {
        let dt = self.grid.dt();
        let n = self.num_samples();
        let col = |j: usize| self.w[j].column(k).into_owned();
        let (at, diff) = if i == 0 {
            (col(0), (col(1) - col(0)).scale(1.0 / dt))
        } else if i == n - 1 {
            (col(n - 1), (col(n - 1) - col(n - 2)).scale(1.0 / dt))
        } else {
            (col(i), (col(i + 1) - col(i - 1)).scale(1.0 / (2.0 * dt)))
        };
        at.dotc(&diff)
    }

    /// Imaginary part of the branch connection (the connection proper; the
    /// real part vanishes for unit-norm branches).
    pub fn connection(&self, k: usize, i: usize) -> f64 {
        self.connection_raw(k, i).im
    }

    /// Full branch-derivative overlap matrix `D(t_i)` with entries
    /// `<w_l(t_i) | dw_m/dt (t_i)>`, central differences.
    pub fn d_matrix(&self, i: usize) -> CMat {
        let dt = self.grid.dt();
        let n = self.num_samples();
        let diff = if i == 0 {
            (&self.w[1] - &self.w[0]).scale(1.0 / dt)
        } else if i == n - 1 {
            (&self.w[n - 1] - &self.w[n - 2]).scale(1.0 / dt)
        } else {
            (&self.w[i + 1] - &self.w[i - 1]).scale(1.0 / (2.0 * dt))
        };
        self.w[i].adjoint() * diff
    }

    /// `Σ_k p_k(t_i) |w_k(t_i)><w_k(t_i)|`.
    pub fn reconstruct(&self, i: usize) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for k in 0..self.rank {
            let col = self.w[i].column(k);
            out += (&col * col.adjoint()).scale(self.p[i][k]);
        }
        out
    }

    /// Re-phase every branch by smooth per-branch fields
    /// (`fields[k][i]` = phase of branch k at sample i); the result is
    /// tagged as raw gauge. Used to probe gauge invariance.
    pub fn apply_branch_phases(&self, fields: &[Vec<f64>]) -> Result<SpectralTrajectory> {
        if fields.len() != self.rank || fields.iter().any(|f| f.len() != self.num_samples()) {
            return Err(Error::DimensionMismatch {
                context: "phase fields".into(),
                expected: self.rank * self.num_samples(),
                actual: fields.iter().map(|f| f.len()).sum(),
            });
        }
        let mut w = self.w.clone();
        for (i, wi) in w.iter_mut().enumerate() {
            for k in 0..self.rank {
                let phase = C64::from_polar(1.0, fields[k][i]);
                for r in 0..self.dim {
                    wi[(r, k)] *= phase;
                }
            }
        }
        let cum = cumulative_factors(&w, self.rank);
        Ok(SpectralTrajectory {
            grid: self.grid.clone(),
            dim: self.dim,
            rank: self.rank,
            p: self.p.clone(),
            w,
            cum,
            gauge: GaugePolicy::Raw,
        })
    }
}

fn cumulative_factors(w: &[CMat], rank: usize) -> Vec<Vec<C64>> {
    let n = w.len();
    let mut cum = vec![vec![c(1.0, 0.0); rank]; n];
    for i in 1..n {
        for k in 0..rank {
            let z = w[i - 1].column(k).dotc(&w[i].column(k));
            let factor = if z.norm() > 0.0 {
                (z / z.norm()).conj()
            } else {
                c(1.0, 0.0)
            };
            cum[i][k] = cum[i - 1][k] * factor;
        }
    }
    cum
}

/// Exact assignment of rows to columns maximizing the summed squared
/// overlap, by bitmask dynamic programming. Columns may outnumber rows.
fn optimal_assignment(score: &[Vec<f64>]) -> Vec<usize> {
    let rows = score.len();
    let cols = score[0].len();
    let full = 1usize << cols;
    // best[mask] = max total score after assigning the first popcount-rows
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    let mut masks_by_count: Vec<Vec<usize>> = vec![Vec::new(); cols + 1];
    for mask in 0..full {
        masks_by_count[mask.count_ones() as usize].push(mask);
    }
    for row in 0..rows {
        for &mask in &masks_by_count[row] {
            if best[mask] == f64::NEG_INFINITY {
                continue;
            }
            for col in 0..cols {
                if mask & (1 << col) != 0 {
                    continue;
                }
                let next = mask | (1 << col);
                let val = best[mask] + score[row][col] * score[row][col];
                if val > best[next] {
                    best[next] = val;
                    choice[next] = col;
                }
            }
        }
    }
    let final_mask = masks_by_count[rows]
        .iter()
        .copied()
        .filter(|&m| best[m] > f64::NEG_INFINITY)
        .max_by(|&a, &b| best[a].partial_cmp(&best[b]).unwrap())
        .expect("assignment exists");
    // reconstruct
    let mut mask = final_mask;
    let mut assign = vec![usize::MAX; rows];
    for row in (0..rows).rev() {
        let col = choice[mask];
        assign[row] = col;
        mask &= !(1 << col);
    }
    assign
}

/// Greedy assignment on overlap magnitudes; returns `None` if any pick is
/// ambiguous (margin to the runner-up below 0.1).
fn greedy_assignment(score: &[Vec<f64>]) -> Option<Vec<usize>> {
    let rows = score.len();
    let cols = score[0].len();
    let mut assign = vec![usize::MAX; rows];
    let mut row_done = vec![false; rows];
    let mut col_done = vec![false; cols];
    for _ in 0..rows {
        let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
        let mut runner_up = f64::NEG_INFINITY;
        for r in 0..rows {
            if row_done[r] {
                continue;
            }
            for col in 0..cols {
                if col_done[col] {
                    continue;
                }
                let s = score[r][col];
                if s > best.0 {
                    runner_up = best.0;
                    best = (s, r, col);
                } else if s > runner_up {
                    runner_up = s;
                }
            }
        }
        if best.0 - runner_up < 0.1 && runner_up > f64::NEG_INFINITY {
            return None;
        }
        assign[best.1] = best.2;
        row_done[best.1] = true;
        col_done[best.2] = true;
    }
    Some(assign)
}

/// Convert a density trajectory into branch-matched spectral data.
pub fn track_spectrum(traj: &DensityTrajectory, opts: &TrackOptions) -> Result<SpectralTrajectory> {
    let dim = traj.dim();
    let n = traj.samples().len();
    let grid = traj.grid().clone();

    let (vals0, vecs0) = eig_hermitian(traj.sample(0))?;
    let rank = vals0.iter().filter(|&&v| v > opts.min_eigenvalue).count();
    if rank == 0 {
        return Err(Error::InvalidValue {
            field: "min_eigenvalue".into(),
            message: "no eigenvalue exceeds min_eigenvalue at t = 0".into(),
        });
    }
    let mut p = Vec::with_capacity(n);
    let mut w: Vec<CMat> = Vec::with_capacity(n);
    p.push(vals0[..rank].to_vec());
    w.push(CMat::from_fn(dim, rank, |r, k| vecs0[(r, k)]));

    for i in 1..n {
        let (vals, vecs) = eig_hermitian(traj.sample(i))?;
        let prev = &w[i - 1];
        // |<w_k(prev) | v_l(new)>| for retained rows against all new columns
        let overlap = prev.adjoint() * &vecs;
        let score: Vec<Vec<f64>> = (0..rank)
            .map(|k| (0..dim).map(|l| overlap[(k, l)].norm()).collect())
            .collect();
        let assign = match greedy_assignment(&score) {
            Some(a) => a,
            None => optimal_assignment(&score),
        };
        // rank-consistency: matched branches stay above the floor, the rest
        // stay below it
        let mut matched = vec![false; dim];
        for (k, &l) in assign.iter().enumerate() {
            matched[l] = true;
            if vals[l] <= opts.min_eigenvalue {
                return Err(Error::RankChange {
                    branch: k,
                    value: vals[l],
                    time: grid.time(i),
                    threshold: opts.min_eigenvalue,
                });
            }
            if score[k][l] < 0.5 {
                return Err(Error::AmbiguousOverlap { best: score[k][l] });
            }
        }
        for l in 0..dim {
            if !matched[l] && vals[l] > opts.min_eigenvalue {
                return Err(Error::RankChange {
                    branch: l,
                    value: vals[l],
                    time: grid.time(i),
                    threshold: opts.min_eigenvalue,
                });
            }
        }
        let mut wi = CMat::zeros(dim, rank);
        let mut pi = Vec::with_capacity(rank);
        for (k, &l) in assign.iter().enumerate() {
            let mut col = vecs.column(l).into_owned();
            if opts.gauge == GaugePolicy::Continuity {
                let z = overlap[(k, l)];
                if z.norm() > 0.0 {
                    let phase = (z / z.norm()).conj();
                    col.iter_mut().for_each(|x| *x *= phase);
                }
            }
            wi.set_column(k, &col);
            pi.push(vals[l]);
        }
        p.push(pi);
        w.push(wi);
    }

    let cum = cumulative_factors(&w, rank);
    Ok(SpectralTrajectory {
        grid,
        dim,
        rank,
        p,
        w,
        cum,
        gauge: opts.gauge,
    })
}

/// A time-stable partition of branches into degenerate clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegeneracyStructure {
    clusters: Vec<Vec<usize>>,
}

impl DegeneracyStructure {
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.len()).collect()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.clusters.iter().all(|c| c.len() == 1)
    }
}

fn partition_at(p: &[f64], eps: f64) -> Vec<Vec<usize>> {
    let n = p.len();
    // union-find over the transitive closure of |p_k - p_k'| < eps
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for a in 0..n {
        for b in a + 1..n {
            if (p[a] - p[b]).abs() < eps {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let r = find(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Group branches whose eigenvalues stay within `eps_deg` of each other at
/// every sample. Partitions that change along the trajectory are rejected.
pub fn cluster_degeneracies(spec: &SpectralTrajectory, eps_deg: f64) -> Result<DegeneracyStructure> {
    let reference = partition_at(spec.eigenvalues(0), eps_deg);
    for i in 1..spec.num_samples() {
        if partition_at(spec.eigenvalues(i), eps_deg) != reference {
            return Err(Error::DegeneracyDrift);
        }
    }
    Ok(DegeneracyStructure {
        clusters: reference,
    })
}

/// Path-ordered exponential `P exp(-∫_0^T A dt)` with the latest time on the
/// left, from samples of `A` on the grid. Uses midpoint interpolation of
/// consecutive samples, one exponential per interval; second-order accurate.
pub fn path_ordered_exp(samples: &[CMat], grid: &TimeGrid) -> Result<CMat> {
    if samples.len() != grid.samples() {
        return Err(Error::DimensionMismatch {
            context: "path_ordered_exp samples".into(),
            expected: grid.samples(),
            actual: samples.len(),
        });
    }
    let n = samples[0].nrows();
    for (i, s) in samples.iter().enumerate() {
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!("path_ordered_exp sample {i}"),
                expected: n,
                actual: s.nrows().max(s.ncols()),
            });
        }
    }
    let dt = grid.dt();
    let mut acc = CMat::identity(n, n);
    for i in 0..grid.steps() {
        let midpoint = (&samples[i] + &samples[i + 1]).scale(0.5);
        let step = matrix_exp(&midpoint.scale(-dt))?;
        acc = step * acc;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{
        evolve_lindblad, evolve_unitary, HamiltonianFamily, JumpOp, LindbladModel,
    };
    use crate::linalg::{identity, max_abs, DensityMatrix};
    use std::f64::consts::PI;

    fn sigma_z() -> CMat {
        CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    fn precession_trajectory(r: f64, theta: f64, steps: usize) -> DensityTrajectory {
        let omega = 1.0;
        let model =
            LindbladModel::closed(2, HamiltonianFamily::Constant(sigma_z().scale(omega / 2.0)))
                .unwrap();
        let rho0 = DensityMatrix::qubit_bloch(r, theta, 0.0).unwrap();
        let grid = TimeGrid::new(2.0 * PI / omega, steps).unwrap();
        evolve_unitary(&model, &rho0, &grid).unwrap()
    }

    pub(crate) fn dephasing_trajectory(r: f64, gamma: f64, steps: usize) -> DensityTrajectory {
        let model = LindbladModel::new(
            2,
            HamiltonianFamily::Constant(CMat::zeros(2, 2)),
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

    #[test]
    fn constant_state_gives_identity_u() {
        let rho0 = DensityMatrix::qubit_bloch(0.6, 0.8, 0.2).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let samples = vec![rho0.matrix().clone(); grid.samples()];
        let traj = DensityTrajectory::from_samples(grid, samples).unwrap();
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        assert_eq!(spec.rank(), 2);
        for i in 0..spec.num_samples() {
            assert!(max_abs(&(spec.u_op(i) - identity(2))) < 1e-9);
            assert!(max_abs(&(spec.c_op(i) - spec.c_op(0))) < 1e-12);
        }
    }

    #[test]
    fn unitary_precession_has_constant_branches() {
        let traj = precession_trajectory(0.5, 1.1, 400);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        for i in 0..spec.num_samples() {
            for k in 0..spec.rank() {
                assert!((spec.eigenvalues(i)[k] - spec.eigenvalues(0)[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dephasing_spectrum_matches_closed_form() {
        let (r, gamma) = (0.8, 0.35);
        let traj = dephasing_trajectory(r, gamma, 800);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        for i in 0..spec.num_samples() {
            let t = spec.grid().time(i);
            let rt = r * (-2.0 * gamma * t).exp();
            let eigs = spec.eigenvalues(i);
            let (hi, lo) = (eigs[0].max(eigs[1]), eigs[0].min(eigs[1]));
            assert!((hi - (1.0 + rt) / 2.0).abs() < 1e-6);
            assert!((lo - (1.0 - rt) / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstruction_invariant() {
        let traj = dephasing_trajectory(0.7, 0.3, 300);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        for i in (0..spec.num_samples()).step_by(37) {
            assert!(max_abs(&(spec.reconstruct(i) - traj.sample(i))) < 1e-8);
            // U C (U C)† = ρ as well
            let uc = spec.u_op(i) * spec.c_op(i);
            assert!(max_abs(&(&uc * uc.adjoint() - traj.sample(i))) < 1e-8);
        }
    }

    #[test]
    fn branch_matching_survives_level_crossing() {
        // amplitude damping from diag(0.25, 0.75): populations cross at
        // e^{-γt} = 2/3 while the eigenvectors stay |0>, |1>
        let gamma = 0.5;
        let model = LindbladModel::new(
            2,
            HamiltonianFamily::Constant(CMat::zeros(2, 2)),
            vec![JumpOp {
                operator: CMat::from_row_slice(
                    2,
                    2,
                    &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
                ),
                rate: gamma,
            }],
        )
        .unwrap();
        let rho0 = DensityMatrix::new(CMat::from_diagonal(&CVec::from_vec(vec![
            c(0.25, 0.0),
            c(0.75, 0.0),
        ])))
        .unwrap();
        let grid = TimeGrid::new(2.0, 700).unwrap();
        let traj = evolve_lindblad(&model, &rho0, &grid).unwrap();
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        // branch 0 started at 0.25 on |0> and must keep following |0>
        assert!((spec.eigenvalues(0)[1] - 0.25).abs() < 1e-12);
        let last = spec.num_samples() - 1;
        let expected_excited = 0.75 * (-gamma * 2.0).exp();
        let p_excited = spec.eigenvalues(last)[0];
        // the branch that started as the excited majority decayed below 0.5
        assert!((p_excited - expected_excited).abs() < 1e-6);
        // its eigenvector is still |1> up to phase
        let v = spec.branch(0, last);
        assert!(v[1].norm() > 0.999);
    }

    #[test]
    fn rank_change_is_rejected() {
        // amplitude damping from a pure excited state immediately generates a
        // second eigenvalue branch
        let model = LindbladModel::new(
            2,
            HamiltonianFamily::Constant(CMat::zeros(2, 2)),
            vec![JumpOp {
                operator: CMat::from_row_slice(
                    2,
                    2,
                    &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
                ),
                rate: 0.4,
            }],
        )
        .unwrap();
        let rho0 = DensityMatrix::new(CMat::from_diagonal(&CVec::from_vec(vec![
            c(0.0, 0.0),
            c(1.0, 0.0),
        ])))
        .unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let traj = evolve_lindblad(&model, &rho0, &grid).unwrap();
        match track_spectrum(&traj, &TrackOptions::default()) {
            Err(Error::RankChange { .. }) => {}
            other => panic!("expected RankChange, got {other:?}"),
        }
    }

    #[test]
    fn pure_state_keeps_single_branch() {
        let traj = precession_trajectory(1.0, PI / 3.0, 500);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        assert_eq!(spec.rank(), 1);
        assert!((spec.eigenvalues(250)[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn continuity_gauge_zeroes_the_connection() {
        let traj = precession_trajectory(0.5, 1.0, 1000);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        for k in 0..spec.rank() {
            for i in (1..spec.num_samples() - 1).step_by(97) {
                assert!(spec.connection(k, i).abs() < 1e-6);
                assert!(spec.connection_raw(k, i).re.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gauge_shift_moves_the_connection_by_phi_dot() {
        let traj = precession_trajectory(0.5, 1.0, 2000);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        let t_final = spec.grid().t_final();
        let fields: Vec<Vec<f64>> = (0..spec.rank())
            .map(|k| {
                (0..spec.num_samples())
                    .map(|i| {
                        let t = spec.grid().time(i);
                        (0.3 + 0.2 * k as f64) * (2.0 * PI * t / t_final).sin()
                    })
                    .collect()
            })
            .collect();
        let rephased = spec.apply_branch_phases(&fields).unwrap();
        let i = 700;
        let t = spec.grid().time(i);
        for k in 0..spec.rank() {
            let phi_dot =
                (0.3 + 0.2 * k as f64) * (2.0 * PI / t_final) * (2.0 * PI * t / t_final).cos();
            let shift = rephased.connection(k, i) - spec.connection(k, i);
            assert!(
                (shift - phi_dot).abs() < 1e-4,
                "branch {k}: shift {shift} vs phi_dot {phi_dot}"
            );
        }
    }

    #[test]
    fn matching_composes_to_direct_matching() {
        let traj = precession_trajectory(0.5, 1.0, 400);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        // after a full loop the branch order must agree with matching t0
        // directly against t_final (identity permutation for this loop)
        let last = spec.num_samples() - 1;
        let overlap = spec.basis(0).adjoint() * spec.basis(last);
        for k in 0..spec.rank() {
            assert!(overlap[(k, k)].norm() > 0.99);
        }
    }

    #[test]
    fn degeneracy_clustering_cases() {
        let traj = precession_trajectory(0.5, 1.0, 60);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        let deg = cluster_degeneracies(&spec, 1e-8).unwrap();
        assert!(deg.is_nondegenerate());
        assert_eq!(deg.clusters().len(), 2);

        let rho0 = DensityMatrix::new(CMat::from_diagonal(&CVec::from_vec(vec![
            c(0.5, 0.0),
            c(0.25, 0.0),
            c(0.25, 0.0),
        ])))
        .unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let samples = vec![rho0.matrix().clone(); grid.samples()];
        let traj = DensityTrajectory::from_samples(grid, samples).unwrap();
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        let deg = cluster_degeneracies(&spec, 1e-8).unwrap();
        assert_eq!(deg.clusters(), &[vec![0], vec![1, 2]]);
        assert_eq!(deg.multiplicities(), vec![1, 2]);

        // eps_deg = 0 puts everything into singletons
        let deg0 = cluster_degeneracies(&spec, 0.0).unwrap();
        assert!(deg0.is_nondegenerate());
    }

    #[test]
    fn degeneracy_drift_is_rejected() {
        let traj = dephasing_trajectory(0.8, 0.35, 300);
        let spec = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        // eigenvalues (1±r(t))/2 start 0.16 apart and close in; a huge eps at
        // late times only
        match cluster_degeneracies(&spec, 0.4) {
            Err(Error::DegeneracyDrift) => {}
            other => panic!("expected DegeneracyDrift, got {other:?}"),
        }
    }

    #[test]
    fn path_ordered_exp_trivial_cases() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let zeros = vec![CMat::zeros(2, 2); grid.samples()];
        let p = path_ordered_exp(&zeros, &grid).unwrap();
        assert!(max_abs(&(p - identity(2))) < 1e-14);

        let a = sigma_x().map(|z| z * c(0.0, 0.4));
        let consts = vec![a.clone(); grid.samples()];
        let p = path_ordered_exp(&consts, &grid).unwrap();
        let direct = matrix_exp(&a.scale(-1.0)).unwrap();
        assert!(max_abs(&(p - direct)) < 1e-8);
    }

    #[test]
    fn path_ordered_exp_self_convergence() {
        // non-commuting generator A(t) = i(cos t σx + sin t σz)
        let build = |steps: usize| {
            let grid = TimeGrid::new(2.0, steps).unwrap();
            let samples: Vec<CMat> = grid
                .times()
                .map(|t| {
                    (sigma_x().scale(t.cos()) + sigma_z().scale(t.sin())).map(|z| z * c(0.0, 1.0))
                })
                .collect();
            path_ordered_exp(&samples, &grid).unwrap()
        };
        let coarse = build(100);
        let mid = build(200);
        let fine = build(400);
        let e1 = max_abs(&(coarse - &mid));
        let e2 = max_abs(&(mid - fine));
        let ratio = e1 / e2;
        assert!(
            (3.0..5.5).contains(&ratio),
            "expected ~4x shrink, got {ratio:.2}"
        );
    }
}
