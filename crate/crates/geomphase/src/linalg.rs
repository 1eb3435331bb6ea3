//! Dense complex linear algebra sized for small dimensions (N up to ~16).
//!
//! Everything downstream works with `DMatrix<Complex<f64>>`. The helpers here
//! cover the handful of decompositions the phase machinery needs: Hermitian
//! eigendecomposition with a descending sort, the matrix exponential, the
//! unitary factor of a polar decomposition, the PSD square root, Fourier
//! matrices, and majorization of probability vectors.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Tolerance for Hermiticity checks on inputs.
pub const HERMITICITY_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Max-entry deviation from Hermiticity, `max_ij |m_ij - conj(m_ji)|`.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Max-entry deviation from unitarity, `max |m† m - I|`.
pub fn unitarity_deviation(m: &CMat) -> f64 {
    let n = m.ncols();
    let g = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            dev = dev.max((g[(i, j)] - target).norm());
        }
    }
    dev
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn ensure_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn ensure_finite(m: &CMat) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFiniteEntry);
    }
    Ok(())
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` where the k-th column of the second
/// matrix is the unit eigenvector of the k-th eigenvalue. The input is
/// symmetrized before decomposition; inputs farther than [`HERMITICITY_TOL`]
/// from Hermitian are rejected with the offending deviation.
pub fn eig_hermitian(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    let dev = hermiticity_deviation(m);
    if dev > HERMITICITY_TOL {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: HERMITICITY_TOL,
        });
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let se = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .expect("eigenvalues of a Hermitian matrix are finite reals")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok((eigenvalues, vectors))
}

/// Matrix exponential `e^a`.
///
/// (Skew-)Hermitian inputs go through an eigendecomposition, so skew-Hermitian
/// generators produce unitaries to machine precision. Everything else uses
/// scaling-and-squaring with a degree-13 Padé approximant.
pub fn matrix_exp(a: &CMat) -> Result<CMat> {
    let n = ensure_square(a)?;
    ensure_finite(a)?;
    let scale = 1.0 + max_abs(a);
    if hermiticity_deviation(a) <= 1e-13 * scale {
        let (vals, vecs) = eig_hermitian(&((a + a.adjoint()).scale(0.5)))?;
        let exp_diag = CMat::from_diagonal(&CVec::from_iterator(
            n,
            vals.iter().map(|&l| c(l.exp(), 0.0)),
        ));
        return Ok(&vecs * exp_diag * vecs.adjoint());
    }
    // skew-Hermitian a: i a is Hermitian with real eigenvalues λ, e^a = V e^{-iλ} V†
    let skew_dev = {
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                dev = dev.max((a[(i, j)] + a[(j, i)].conj()).norm());
            }
        }
        dev
    };
    if skew_dev <= 1e-13 * scale {
        let ia = a.map(|z| z * c(0.0, 1.0));
        let herm = (&ia + ia.adjoint()).scale(0.5);
        let (vals, vecs) = eig_hermitian(&herm)?;
        let exp_diag = CMat::from_diagonal(&CVec::from_iterator(
            n,
            vals.iter().map(|&l| C64::from_polar(1.0, -l)),
        ));
        return Ok(&vecs * exp_diag * vecs.adjoint());
    }
    Ok(expm_pade(a))
}

/// Scaling-and-squaring with the degree-13 Padé approximant (Higham 2005).
fn expm_pade(a: &CMat) -> CMat {
    const THETA_13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let s = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a.map(|z| z / c(2f64.powi(s as i32), 0.0));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (a6.scale(B[13]) + a4.scale(B[11]) + a2.scale(B[9]))
        + a6.scale(B[7])
        + a4.scale(B[5])
        + a2.scale(B[3])
        + id.scale(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (a6.scale(B[12]) + a4.scale(B[10]) + a2.scale(B[8]))
        + a6.scale(B[6])
        + a4.scale(B[4])
        + a2.scale(B[2])
        + id.scale(B[0]);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular within the scaling bound");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Unitary factor `W` of the polar decomposition `m = P W` with `P` PSD.
///
/// Full rank is required; the smallest singular value is reported otherwise.
pub fn polar_unitary_part(m: &CMat) -> Result<CMat> {
    let _ = ensure_square(m)?;
    ensure_finite(m)?;
    let svd = m.clone().svd(true, true);
    let sigma_min = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    if sigma_min <= 1e-12 {
        return Err(Error::RankDeficient { sigma_min });
    }
    let u = svd.u.as_ref().expect("requested U factor");
    let vt = svd.v_t.as_ref().expect("requested V^T factor");
    Ok(u * vt)
}

/// Polar unitary factor that tolerates rank deficiency.
///
/// With vanishing singular values the unitary factor is not unique; the SVD
/// completion is used. Needed by the discrete amplitude transport, where
/// constant-rank but rank-deficient states are legitimate.
pub(crate) fn polar_unitary_lenient(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U factor");
    let vt = svd.v_t.as_ref().expect("requested V^T factor");
    u * vt
}

/// PSD square root via eigendecomposition.
///
/// Eigenvalues in `(-1e-6, 0)` are treated as integrator noise and clamped to
/// zero; anything below that is a genuinely non-PSD input and is rejected.
pub fn sqrt_psd(m: &CMat) -> Result<CMat> {
    let n = ensure_square(m)?;
    let (vals, vecs) = eig_hermitian(m)?;
    if let Some(&worst) = vals.iter().filter(|&&l| l < -1e-6).next() {
        return Err(Error::NotPsd { eigenvalue: worst });
    }
    let diag = CMat::from_diagonal(&CVec::from_iterator(
        n,
        vals.iter().map(|&l| c(l.max(0.0).sqrt(), 0.0)),
    ));
    Ok(&vecs * diag * vecs.adjoint())
}

/// The N x N discrete Fourier matrix, entry (k, l) = e^{-2πi kl/n} / sqrt(n)
/// with 0-based indices.
pub fn dft_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidValue {
            field: "n".into(),
            message: "Fourier matrix size must be at least 1".into(),
        });
    }
    let norm = 1.0 / (n as f64).sqrt();
    Ok(CMat::from_fn(n, n, |k, l| {
        let angle = -2.0 * std::f64::consts::PI * (k as f64) * (l as f64) / (n as f64);
        C64::from_polar(norm, angle)
    }))
}

/// A validated probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(Error::InvalidValue {
                field: "weights".into(),
                message: "probabilities must be finite and nonnegative".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidValue {
                field: "weights".into(),
                message: format!("probabilities sum to {total}, expected 1 within 1e-12"),
            });
        }
        Ok(Self(weights.iter().map(|w| w.max(0.0)).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// True iff `q` is majorized by `p`: every partial sum of the descending sort
/// of `p` dominates the corresponding partial sum for `q`. The shorter vector
/// is zero-padded.
pub fn majorizes(p: &ProbabilityVector, q: &ProbabilityVector) -> bool {
    let n = p.len().max(q.len());
    let mut ps = p.weights().to_vec();
    let mut qs = q.weights().to_vec();
    ps.resize(n, 0.0);
    qs.resize(n, 0.0);
    ps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    qs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut sum_p = 0.0;
    let mut sum_q = 0.0;
    for i in 0..n {
        sum_p += ps[i];
        sum_q += qs[i];
        if sum_p < sum_q - 1e-12 {
            return false;
        }
    }
    true
}

/// A validated density matrix: Hermitian, unit trace, PSD within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    matrix: CMat,
}

impl DensityMatrix {
    pub fn new(matrix: CMat) -> Result<Self> {
        let dim = ensure_square(&matrix)?;
        ensure_finite(&matrix)?;
        let dev = hermiticity_deviation(&matrix);
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: HERMITICITY_TOL,
            });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::InvalidValue {
                field: "trace".into(),
                message: format!("trace is {trace}, expected 1 within 1e-10"),
            });
        }
        let (vals, _) = eig_hermitian(&matrix)?;
        if let Some(&worst) = vals.iter().filter(|&&l| l < -1e-10).next() {
            return Err(Error::NotPsd { eigenvalue: worst });
        }
        Ok(Self { dim, matrix })
    }

    /// Qubit state with Bloch vector of length `r` at polar angle `theta`,
    /// azimuth `phi`.
    pub fn qubit_bloch(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidValue {
                field: "r".into(),
                message: format!("Bloch radius {r} outside [0, 1]"),
            });
        }
        let (x, y, z) = (
            r * theta.sin() * phi.cos(),
            r * theta.sin() * phi.sin(),
            r * theta.cos(),
        );
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                c(0.5 * (1.0 + z), 0.0),
                c(0.5 * x, -0.5 * y),
                c(0.5 * x, 0.5 * y),
                c(0.5 * (1.0 - z), 0.0),
            ],
        );
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            dim,
            matrix: identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }
}
