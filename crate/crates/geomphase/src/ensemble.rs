//! Ensemble decompositions of density matrices: unitary mixing of an
//! ensemble, the uniform decomposition through the Fourier matrix, and the
//! nonorthogonal purification components.
//!
//! Any two ensembles of the same state are related by a unitary acting on
//! the weighted vectors, `sqrt(q_l) |x_l> = Σ_k sqrt(p_k) T_{lk} |w_k>`.
//! Mixing the spectral ensemble with the Fourier matrix yields equal weights
//! `1/N` for every state, which is what the uniform purification is built
//! on.

use crate::error::{Error, Result};
use crate::linalg::{
    c, dft_matrix, eig_hermitian, unitarity_deviation, CMat, CVec, DensityMatrix,
};
use crate::phase::AncillaEvolution;
use crate::spectral::SpectralTrajectory;

/// A weighted set of unit vectors resolving a density matrix.
///
/// Vectors whose construction produced a vanishing norm carry weight zero
/// and no direction (`None`).
#[derive(Debug, Clone)]
pub struct Ensemble {
    weights: Vec<f64>,
    vectors: Vec<Option<CVec>>,
}

impl Ensemble {
    pub fn new(weights: Vec<f64>, vectors: Vec<Option<CVec>>) -> Result<Self> {
        if weights.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                context: "ensemble".into(),
                expected: weights.len(),
                actual: vectors.len(),
            });
        }
        Ok(Self { weights, vectors })
    }

    /// The spectral ensemble of a density matrix (weights above `min_weight`
    /// only).
    pub fn spectral(rho: &DensityMatrix, min_weight: f64) -> Result<Self> {
        let (vals, vecs) = eig_hermitian(rho.matrix())?;
        let kept = vals.iter().filter(|&&v| v > min_weight).count();
        Ok(Self {
            weights: vals[..kept].to_vec(),
            vectors: (0..kept).map(|k| Some(vecs.column(k).into_owned())).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vector(&self, l: usize) -> Option<&CVec> {
        self.vectors[l].as_ref()
    }

    /// `Σ_l q_l |x_l><x_l|`.
    pub fn reconstruct(&self, dim: usize) -> CMat {
        let mut out = CMat::zeros(dim, dim);
        for (q, v) in self.weights.iter().zip(&self.vectors) {
            if let Some(v) = v {
                out += (v * v.adjoint()).scale(*q);
            }
        }
        out
    }
}

/// Mix an ensemble by a unitary: `sqrt(q_l) |x_l> = Σ_k sqrt(p_k) T_{lk}
/// |w_k>`. The output resolves the same density matrix.
pub fn ensemble_from_unitary(source: &Ensemble, mix: &CMat) -> Result<Ensemble> {
    let n = source.len();
    if mix.nrows() != n || mix.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "mixing unitary".into(),
            expected: n,
            actual: mix.nrows().max(mix.ncols()),
        });
    }
    let dev = unitarity_deviation(mix);
    if dev > 1e-10 {
        return Err(Error::NotUnitary {
            deviation: dev,
            tolerance: 1e-10,
        });
    }
    for (k, q) in source.weights().iter().enumerate() {
        if *q <= 0.0 || source.vector(k).is_none() {
            return Err(Error::InvalidValue {
                field: "source ensemble".into(),
                message: format!("component {k} has no weight or direction"),
            });
        }
    }
    let dim = source.vector(0).expect("checked above").len();
    let mut weights = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for l in 0..n {
        let mut acc = CVec::zeros(dim);
        for k in 0..n {
            let coeff = c(source.weights()[k].sqrt(), 0.0) * mix[(l, k)];
            acc += source.vector(k).expect("checked above").scale(1.0) * coeff;
        }
        let norm = acc.norm();
        if norm < 1e-12 {
            weights.push(0.0);
            vectors.push(None);
        } else {
            weights.push(norm * norm);
            vectors.push(Some(acc.unscale(norm)));
        }
    }
    Ensemble::new(weights, vectors)
}

/// The uniform ensemble `{1/N, |x_k(t_i)>}` of a spectral trajectory sample,
/// with `|x_k(t)> = sqrt(N) U(t) C(t) F |w_k(0)>`.
pub fn uniform_ensemble(spec: &SpectralTrajectory, t_i: usize) -> Result<Ensemble> {
    let n = spec.rank();
    let f = dft_matrix(n)?;
    let coeffs = spec.c_index(t_i) * &f;
    let scale = (n as f64).sqrt();
    let mut weights = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let x = (spec.basis(t_i) * coeffs.column(k)).scale(scale);
        let norm = x.norm();
        if norm < 1e-12 {
            weights.push(0.0);
            vectors.push(None);
        } else {
            weights.push(1.0 / n as f64);
            vectors.push(Some(x.unscale(norm)));
        }
    }
    Ensemble::new(weights, vectors)
}

/// Uniform decomposition of a single density matrix (no trajectory needed).
pub fn uniform_decomposition(rho: &DensityMatrix) -> Result<Ensemble> {
    let spectral = Ensemble::spectral(rho, 1e-12)?;
    let f = dft_matrix(spectral.len())?;
    ensemble_from_unitary(&spectral, &f)
}

/// The nonorthogonal purification component
/// `|x~_k(t)> = U(t) C(t) F V(t) |w_k(0)>` (generally not unit norm).
pub fn x_tilde(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
    k: usize,
    t_i: usize,
) -> Result<CVec> {
    if v.rank() != spec.rank() || v.num_samples() != spec.num_samples() {
        return Err(Error::DimensionMismatch {
            context: "ancilla evolution".into(),
            expected: spec.rank() * spec.num_samples(),
            actual: v.rank() * v.num_samples(),
        });
    }
    let dev = unitarity_deviation(&v.v(t_i));
    if dev > 1e-9 {
        return Err(Error::NotUnitary {
            deviation: dev,
            tolerance: 1e-9,
        });
    }
    Ok(crate::phase::x_tilde_vector(spec, v, k, t_i))
}
