//! Phase functionals and parallel-transport diagnostics.
//!
//! Everything here works on the retained-branch index space (the basis of
//! initial eigenvectors), where the amplitude of the purification factorizes
//! as `w(t) = U(t) C(t) F V(t)` with `F` the Fourier matrix of the uniform
//! decomposition and `V(t)` the ancilla evolution. The combination entering
//! every formula is `Y(t) = F V(t)`, which is what [`AncillaEvolution`]
//! stores; per-component overlaps are
//!
//! ```text
//! <x~_k(0)|x~_k(t)> = [Y(0)† C(0) M(t) C(t) Y(t)]_kk ,   M(t) = W(0)† W(t)
//! ```
//!
//! Four transport policies are provided. `identity` leaves the ancilla
//! alone. `diagonal` removes each branch's accumulated connection phase and
//! reproduces the kinematic functional. `uhlmann` integrates the generator
//! of Uhlmann's parallel-transport condition and exponentiates it as a
//! single exponential (no path ordering); a matrix residual quantifies how
//! far that is from exact transport when the generators at different times
//! fail to commute. `explicit` takes caller-supplied unitaries.
//!
//! An independent oracle, [`uhlmann_phase_discrete`], transports the
//! amplitude step by step through polar decompositions of
//! `sqrt(ρ_i) sqrt(ρ_{i+1})` and never touches the spectral machinery.

use crate::error::{Error, Result};
use crate::evolve::DensityTrajectory;
use crate::linalg::{
    c, dft_matrix, eig_hermitian, matrix_exp, max_abs, polar_unitary_lenient, sqrt_psd,
    unitarity_deviation, CMat, CVec, C64,
};
use crate::spectral::{DegeneracyStructure, SpectralTrajectory};

/// Wrap an angle to `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Distance between two angles modulo 2π, nearest branch.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaPolicy {
    Identity,
    Uhlmann,
    Diagonal,
    Explicit,
}

impl std::fmt::Display for AncillaPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Identity => "identity",
            Self::Uhlmann => "uhlmann",
            Self::Diagonal => "diagonal",
            Self::Explicit => "explicit",
        };
        write!(f, "{s}")
    }
}

/// The ancilla evolution, stored as the combination `Y(t) = F V(t)` on the
/// branch index space.
///
/// For the diagonal policy `Y(0) = I` (the policy fixes `F V` as a whole, so
/// `V(0) = F†`); for every other policy `V(0) = I` and `Y(0) = F`.
#[derive(Debug, Clone)]
pub struct AncillaEvolution {
    policy: AncillaPolicy,
    dft: CMat,
    y: Vec<CMat>,
    generator: Option<Vec<CMat>>,
    anti_hermitian_residue: f64,
}

impl AncillaEvolution {
    pub fn policy(&self) -> AncillaPolicy {
        self.policy
    }

    pub fn rank(&self) -> usize {
        self.dft.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.y.len()
    }

    /// `Y(t_i) = F V(t_i)`.
    pub fn y(&self, i: usize) -> &CMat {
        &self.y[i]
    }

    /// The ancilla unitary `V(t_i)` itself.
    pub fn v(&self, i: usize) -> CMat {
        self.dft.adjoint() * &self.y[i]
    }

    /// The Uhlmann generator history, when the policy produced one.
    pub fn generator(&self, i: usize) -> Option<&CMat> {
        self.generator.as_ref().map(|g| &g[i])
    }

    /// Hermitian defect of the accumulated generator (diagnostic).
    pub fn anti_hermitian_residue(&self) -> f64 {
        self.anti_hermitian_residue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMethod {
    Kinematic,
    Generalized,
    UhlmannDiscrete,
    Degenerate,
}

impl std::fmt::Display for PhaseMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Kinematic => "kinematic",
            Self::Generalized => "generalized",
            Self::UhlmannDiscrete => "uhlmann_discrete",
            Self::Degenerate => "degenerate",
        };
        write!(f, "{s}")
    }
}

/// Per-branch visibility and phase of one interference component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseComponent {
    pub visibility: f64,
    pub phase: f64,
}

/// Total phase plus per-component data; `gamma` is `None` when the overlap
/// sum vanishes (a physical nodal point, not an error).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub method: PhaseMethod,
    pub gamma: Option<f64>,
    pub components: Vec<PhaseComponent>,
    pub pt_generalized: Option<Vec<f64>>,
    pub pt_uhlmann: Option<f64>,
}

const UNDEFINED_SUM: f64 = 1e-12;

fn report_from_amplitudes(method: PhaseMethod, amplitudes: &[C64]) -> PhaseReport {
    let total: C64 = amplitudes.iter().sum();
    let gamma = if total.norm() < UNDEFINED_SUM {
        None
    } else {
        Some(total.arg())
    };
    PhaseReport {
        method,
        gamma,
        components: amplitudes
            .iter()
            .map(|a| PhaseComponent {
                visibility: a.norm(),
                phase: a.arg(),
            })
            .collect(),
        pt_generalized: None,
        pt_uhlmann: None,
    }
}

/// Component amplitudes `sqrt(p_k(0) p_k(t)) <w_k(0)|w_k(t)> e^{-il_k(t)}`
/// of the spectral purification.
pub fn kinematic_amplitudes(spec: &SpectralTrajectory, t_i: usize) -> Vec<C64> {
    let gram = spec.gram(t_i);
    (0..spec.rank())
        .map(|k| {
            let weight = (spec.eigenvalues(0)[k] * spec.eigenvalues(t_i)[k]).sqrt();
            gram[(k, k)] * spec.geometric_factor(k, t_i) * c(weight, 0.0)
        })
        .collect()
}

/// Mixed-state phase of the spectral purification with per-branch parallel
/// transport, a la Pancharatnam.
pub fn kinematic_phase(spec: &SpectralTrajectory, t_i: usize) -> PhaseReport {
    report_from_amplitudes(PhaseMethod::Kinematic, &kinematic_amplitudes(spec, t_i))
}

/// Result of accumulating the Uhlmann transport generator up to one sample.
#[derive(Debug, Clone)]
pub struct UhlmannGenerator {
    /// Hermitian generator `H~(t_i)`; the ancilla unitary is `exp(-i H~)`.
    pub matrix: CMat,
    /// Max-entry Hermitian defect removed by the symmetrization.
    pub anti_hermitian_residue: f64,
}

/// Accumulated generator histories `X(t_i) = F (-i H~(t_i)) F†` in the
/// initial eigenbasis, anti-Hermitized, plus the worst defect.
fn uhlmann_generator_history(spec: &SpectralTrajectory) -> Result<(Vec<CMat>, f64)> {
    let rank = spec.rank();
    let n = spec.num_samples();
    let dt = spec.grid().dt();
    let integrand = |i: usize| -> Result<CMat> {
        let d = spec.d_matrix(i);
        let p = spec.eigenvalues(i);
        let mut g = CMat::zeros(rank, rank);
        for kp in 0..rank {
            for k in 0..rank {
                let denom = p[kp] + p[k];
                if denom < 1e-14 {
                    return Err(Error::VanishingDenominator { value: denom });
                }
                g[(kp, k)] = d[(kp, k)] * c(-2.0 * (p[kp] * p[k]).sqrt() / denom, 0.0);
            }
        }
        Ok(g)
    };
    let mut history = Vec::with_capacity(n);
    let mut acc = CMat::zeros(rank, rank);
    let mut prev = integrand(0)?;
    let mut residue: f64 = 0.0;
    history.push(acc.clone());
    for i in 1..n {
        let cur = integrand(i)?;
        acc += (&prev + &cur).scale(0.5 * dt);
        prev = cur;
        residue = residue.max(max_abs(&((&acc + acc.adjoint()).scale(0.5))));
        history.push((&acc - acc.adjoint()).scale(0.5));
    }
    Ok((history, residue))
}

/// The Hermitian generator `H~(t_i)` of Uhlmann transport, integrated with
/// the trapezoid rule from branch-derivative overlaps.
pub fn uhlmann_generator(spec: &SpectralTrajectory, t_i: usize) -> Result<UhlmannGenerator> {
    let (history, residue) = uhlmann_generator_history(spec)?;
    let f = dft_matrix(spec.rank())?;
    // X = F(-iH~)F†, so H~ = i F† X F
    let h = (f.adjoint() * &history[t_i] * &f).map(|z| z * c(0.0, 1.0));
    Ok(UhlmannGenerator {
        matrix: h,
        anti_hermitian_residue: residue,
    })
}

/// Build the ancilla evolution for a transport policy.
pub fn ancilla_from_policy(
    spec: &SpectralTrajectory,
    policy: AncillaPolicy,
    explicit_v: Option<&[CMat]>,
) -> Result<AncillaEvolution> {
    let rank = spec.rank();
    let n = spec.num_samples();
    let f = dft_matrix(rank)?;
    match policy {
        AncillaPolicy::Identity => Ok(AncillaEvolution {
            policy,
            y: vec![f.clone(); n],
            dft: f,
            generator: None,
            anti_hermitian_residue: 0.0,
        }),
        AncillaPolicy::Diagonal => {
            // F V(t) = Σ_k e^{-il_k(t)} |w_k(0)><w_k(0)|
            let y = (0..n)
                .map(|i| {
                    CMat::from_diagonal(&CVec::from_iterator(
                        rank,
                        (0..rank).map(|k| spec.geometric_factor(k, i)),
                    ))
                })
                .collect();
            Ok(AncillaEvolution {
                policy,
                y,
                dft: f,
                generator: None,
                anti_hermitian_residue: 0.0,
            })
        }
        AncillaPolicy::Uhlmann => {
            let (history, residue) = uhlmann_generator_history(spec)?;
            let mut y = Vec::with_capacity(n);
            let mut generator = Vec::with_capacity(n);
            for x in &history {
                // Y = F V = F exp(-iH~) = exp(X) F with X = F(-iH~)F†
                y.push(matrix_exp(x)? * &f);
                generator.push((f.adjoint() * x * &f).map(|z| z * c(0.0, 1.0)));
            }
            Ok(AncillaEvolution {
                policy,
                y,
                dft: f,
                generator: Some(generator),
                anti_hermitian_residue: residue,
            })
        }
        AncillaPolicy::Explicit => {
            let vs = explicit_v.ok_or_else(|| Error::InvalidValue {
                field: "explicit_v".into(),
                message: "the explicit policy needs caller-supplied ancilla unitaries".into(),
            })?;
            if vs.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "explicit_v".into(),
                    expected: n,
                    actual: vs.len(),
                });
            }
            let first_dev = max_abs(&(&vs[0] - CMat::identity(rank, rank)));
            if first_dev > 1e-12 {
                return Err(Error::InvalidValue {
                    field: "explicit_v".into(),
                    message: format!("V(0) must be the identity, deviation {first_dev:.3e}"),
                });
            }
            let mut y = Vec::with_capacity(n);
            for (i, v) in vs.iter().enumerate() {
                if v.nrows() != rank || v.ncols() != rank {
                    return Err(Error::DimensionMismatch {
                        context: format!("explicit_v[{i}]"),
                        expected: rank,
                        actual: v.nrows().max(v.ncols()),
                    });
                }
                let dev = unitarity_deviation(v);
                if dev > 1e-9 {
                    return Err(Error::NotUnitary {
                        deviation: dev,
                        tolerance: 1e-9,
                    });
                }
                y.push(&f * v);
            }
            Ok(AncillaEvolution {
                policy,
                y,
                dft: f,
                generator: None,
                anti_hermitian_residue: 0.0,
            })
        }
    }
}

/// Component amplitudes `<x~_k(0)|x~_k(t_i)>` for a given ancilla evolution.
pub fn generalized_amplitudes(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
    t_i: usize,
) -> Result<Vec<C64>> {
    let rank = spec.rank();
    if v.rank() != rank || v.num_samples() != spec.num_samples() {
        return Err(Error::DimensionMismatch {
            context: "ancilla evolution".into(),
            expected: rank * spec.num_samples(),
            actual: v.rank() * v.num_samples(),
        });
    }
    let gram = spec.gram(t_i);
    let overlap_matrix =
        v.y(0).adjoint() * spec.c_index(0) * &gram * spec.c_index(t_i) * v.y(t_i);
    let amplitudes: Vec<C64> = (0..rank).map(|k| overlap_matrix[(k, k)]).collect();

    // Cross-check against the explicit double sum
    // Σ_{k k'} sqrt(p_k'(0) p_k(t)) <w_k'(0)|w_k(t)> [Y(t) Y(0)†]_{k k'}
    let yy = v.y(t_i) * v.y(0).adjoint();
    let mut double_sum = c(0.0, 0.0);
    for k in 0..rank {
        for kp in 0..rank {
            double_sum += c(
                (spec.eigenvalues(0)[kp] * spec.eigenvalues(t_i)[k]).sqrt(),
                0.0,
            ) * gram[(kp, k)]
                * yy[(k, kp)];
        }
    }
    let component_sum: C64 = amplitudes.iter().sum();
    assert!(
        (component_sum - double_sum).norm() <= 1e-9 * (1.0 + component_sum.norm()),
        "component and double-sum forms disagree: {component_sum} vs {double_sum}"
    );
    Ok(amplitudes)
}

/// Phase of the uniform-decomposition purification under an ancilla
/// evolution.
pub fn generalized_phase(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
    t_i: usize,
) -> Result<PhaseReport> {
    let amplitudes = generalized_amplitudes(spec, v, t_i)?;
    Ok(report_from_amplitudes(PhaseMethod::Generalized, &amplitudes))
}

/// The purification component `x~_k(t_i)` as a full Hilbert-space vector.
pub fn x_tilde_vector(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
    k: usize,
    t_i: usize,
) -> CVec {
    let coeffs = spec.c_index(t_i) * v.y(t_i);
    spec.basis(t_i) * coeffs.column(k)
}

/// Per-sample residuals of the generalized parallel-transport condition
/// `<x^~_k | d/dt | x^~_k> = 0` on the normalized component k.
pub fn pt_residual_generalized_samples(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
    k: usize,
) -> Result<Vec<f64>> {
    let n = spec.num_samples();
    let dt = spec.grid().dt();
    let mut hats: Vec<CVec> = Vec::with_capacity(n);
    for i in 0..n {
        let x = x_tilde_vector(spec, v, k, i);
        let norm = x.norm();
        if norm <= 1e-10 {
            return Err(Error::VanishingComponent { branch: k, sample: i });
        }
        hats.push(x.unscale(norm));
    }
    // central differences exist only at interior samples; one-sided stencils
    // at the endpoints carry an O(dt) norm-curvature bias that would mask
    // the O(dt²) signal, so the endpoint entries replicate their neighbors
    let mut res = vec![0.0; n];
    for i in 1..n - 1 {
        let deriv = (&hats[i + 1] - &hats[i - 1]).unscale(2.0 * dt);
        res[i] = hats[i].dotc(&deriv).norm();
    }
    res[0] = res[1];
    res[n - 1] = res[n - 2];
    Ok(res)
}

/// Max over time of the per-branch generalized PT residual.
pub fn pt_residual_generalized(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
    k: usize,
) -> Result<f64> {
    Ok(pt_residual_generalized_samples(spec, v, k)?
        .into_iter()
        .fold(0.0, f64::max))
}

fn central_diff(series: &[CMat], i: usize, dt: f64) -> CMat {
    let n = series.len();
    if i == 0 {
        (&series[1] - &series[0]).unscale(dt)
    } else if i == n - 1 {
        (&series[n - 1] - &series[n - 2]).unscale(dt)
    } else {
        (&series[i + 1] - &series[i - 1]).unscale(2.0 * dt)
    }
}

/// Per-sample Frobenius mismatch of the two sides of Uhlmann's
/// parallel-transport condition, assembled from `V, V', C, C', U, U'`.
pub fn pt_residual_uhlmann_samples(
    spec: &SpectralTrajectory,
    v: &AncillaEvolution,
) -> Result<Vec<f64>> {
    let n = spec.num_samples();
    let dt = spec.grid().dt();
    let cs: Vec<CMat> = (0..n).map(|i| spec.c_index(i)).collect();
    let ys: Vec<CMat> = (0..n).map(|i| v.y(i).clone()).collect();
    // interior central differences only; see pt_residual_generalized_samples
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let gamma = spec.d_matrix(i); // <w_l | dw_m/dt>
        let cdot = central_diff(&cs, i, dt);
        let ydot = central_diff(&ys, i, dt);
        let (y, cm) = (&ys[i], &cs[i]);
        let lhs = y.adjoint() * (cm * &gamma * cm + cm * &cdot) * y + y.adjoint() * cm * cm * &ydot;
        let rhs = y.adjoint() * (cm * gamma.adjoint() * cm + &cdot * cm) * y
            + ydot.adjoint() * cm * cm * y;
        // by construction rhs is the adjoint of lhs: the condition is
        // w† w' = (w† w')† for w = U C F V
        debug_assert!(max_abs(&(&rhs - lhs.adjoint())) <= 1e-9 * (1.0 + max_abs(&lhs)));
        out[i] = (&lhs - &rhs).norm();
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    Ok(out)
}

/// Max over time of the Uhlmann PT matrix residual.
pub fn pt_residual_uhlmann(spec: &SpectralTrajectory, v: &AncillaEvolution) -> Result<f64> {
    Ok(pt_residual_uhlmann_samples(spec, v)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Residuals of the two per-branch PT conditions compared in the footnote:
/// the constraint on the transported evolution operator alone, and the
/// C-weighted contraction of this framework.
#[derive(Debug, Clone, PartialEq)]
pub struct FootnotePtResiduals {
    /// max over t of |<w_k(0)| U†U' |w_k(0)>|
    pub evolution_operator: Vec<f64>,
    /// max over t of |<w_k(0)| F† C U†U' C F |w_k(0)>|
    pub weighted: Vec<f64>,
}

/// Compare the two PT conditions on a unitary (constant-spectrum) scenario.
pub fn footnote_pt_residuals(spec: &SpectralTrajectory) -> Result<FootnotePtResiduals> {
    let rank = spec.rank();
    let n = spec.num_samples();
    let drift = (0..n)
        .flat_map(|i| (0..rank).map(move |k| (i, k)))
        .map(|(i, k)| (spec.eigenvalues(i)[k] - spec.eigenvalues(0)[k]).abs())
        .fold(0.0_f64, f64::max);
    if drift > 1e-6 {
        return Err(Error::NotUnitaryEvolution { drift });
    }
    let f = dft_matrix(rank)?;
    let mut evolution_operator = vec![0.0_f64; rank];
    let mut weighted = vec![0.0_f64; rank];
    for i in 0..n {
        let gamma = spec.d_matrix(i);
        let cm = spec.c_index(i);
        let contracted = f.adjoint() * &cm * &gamma * &cm * &f;
        for k in 0..rank {
            evolution_operator[k] = evolution_operator[k].max(gamma[(k, k)].norm());
            weighted[k] = weighted[k].max(contracted[(k, k)].norm());
        }
    }
    Ok(FootnotePtResiduals {
        evolution_operator,
        weighted,
    })
}

/// Per-cluster holonomy matrices `α_k(t)`.
#[derive(Debug, Clone)]
pub struct DegenerateHolonomy {
    pub clusters: Vec<Vec<usize>>,
    pub alpha: Vec<CMat>,
}

/// History of cluster transfer products: `alpha[i][cluster]` solves
/// `dα/dt = -A_k α` with `A_k` the cluster block of `<w^μ | dw^ν/dt>`,
/// discretized by unitarized frame-overlap factors (exactly covariant under
/// per-sample phase and basis changes inside the cluster).
fn holonomy_history(
    spec: &SpectralTrajectory,
    deg: &DegeneracyStructure,
) -> Result<Vec<Vec<CMat>>> {
    let n = spec.num_samples();
    let clusters = deg.clusters();
    let mut history = Vec::with_capacity(n);
    history.push(
        clusters
            .iter()
            .map(|cl| CMat::identity(cl.len(), cl.len()))
            .collect::<Vec<_>>(),
    );
    for i in 1..n {
        let prev: &Vec<CMat> = &history[i - 1];
        let mut cur = Vec::with_capacity(clusters.len());
        for (ci, cl) in clusters.iter().enumerate() {
            let m = cl.len();
            // G[μ][ν] = <w^μ(t_i) | w^ν(t_{i-1})>, restricted to the cluster
            let mut g = CMat::zeros(m, m);
            for (a, &ka) in cl.iter().enumerate() {
                for (b, &kb) in cl.iter().enumerate() {
                    g[(a, b)] = spec.basis(i).column(ka).dotc(&spec.basis(i - 1).column(kb));
                }
            }
            let sigma_max = g.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
            if sigma_max < 1e-12 {
                return Err(Error::AmbiguousOverlap { best: sigma_max });
            }
            let transfer = polar_unitary_lenient(&g);
            cur.push(&transfer * &prev[ci]);
        }
        history.push(cur);
    }
    Ok(history)
}

fn check_unitary_scenario(spec: &SpectralTrajectory) -> Result<()> {
    let mut drift: f64 = 0.0;
    for i in 0..spec.num_samples() {
        for k in 0..spec.rank() {
            drift = drift.max((spec.eigenvalues(i)[k] - spec.eigenvalues(0)[k]).abs());
        }
    }
    if drift > 1e-6 {
        return Err(Error::NotUnitaryEvolution { drift });
    }
    Ok(())
}

/// Path-ordered holonomy of each degenerate cluster up to sample `t_i`.
pub fn degenerate_holonomy(
    spec: &SpectralTrajectory,
    deg: &DegeneracyStructure,
    t_i: usize,
) -> Result<DegenerateHolonomy> {
    check_unitary_scenario(spec)?;
    let history = holonomy_history(spec, deg)?;
    Ok(DegenerateHolonomy {
        clusters: deg.clusters().to_vec(),
        alpha: history[t_i].clone(),
    })
}

/// Frame-covariant closed-loop holonomy `S_k(t) α_k(t)` per cluster, with
/// `S_k` the cluster block of `<w^μ(0)|w^ν(t)>`. For a cyclic trajectory
/// this expresses the transported frame in the initial basis.
pub fn loop_holonomy(
    spec: &SpectralTrajectory,
    deg: &DegeneracyStructure,
    t_i: usize,
) -> Result<Vec<CMat>> {
    let hol = degenerate_holonomy(spec, deg, t_i)?;
    let gram = spec.gram(t_i);
    Ok(hol
        .clusters
        .iter()
        .zip(&hol.alpha)
        .map(|(cl, alpha)| {
            let m = cl.len();
            let s = CMat::from_fn(m, m, |a, b| gram[(cl[a], cl[b])]);
            s * alpha
        })
        .collect())
}

/// Phase of the degenerate purification: `arg Σ_k sqrt(p_k(0) p_k(t))
/// tr(S_k(t) α_k(t))`, the non-Abelian extension of the kinematic
/// functional. Component entries are reported per branch.
pub fn degenerate_phase(
    spec: &SpectralTrajectory,
    deg: &DegeneracyStructure,
    t_i: usize,
) -> Result<PhaseReport> {
    check_unitary_scenario(spec)?;
    let history = holonomy_history(spec, deg)?;
    let gram = spec.gram(t_i);
    let mut amplitudes = vec![c(0.0, 0.0); spec.rank()];
    for (ci, cl) in deg.clusters().iter().enumerate() {
        let alpha = &history[t_i][ci];
        let m = cl.len();
        let p0: f64 = cl.iter().map(|&k| spec.eigenvalues(0)[k]).sum::<f64>() / m as f64;
        let pt: f64 = cl.iter().map(|&k| spec.eigenvalues(t_i)[k]).sum::<f64>() / m as f64;
        let weight = c((p0 * pt).sqrt(), 0.0);
        let s = CMat::from_fn(m, m, |a, b| gram[(cl[a], cl[b])]);
        let sa = s * alpha;
        for (a, &k) in cl.iter().enumerate() {
            amplitudes[k] = weight * sa[(a, a)];
        }
    }
    Ok(report_from_amplitudes(PhaseMethod::Degenerate, &amplitudes))
}

/// Per-cluster max residual of the degenerate PT condition
/// `<x^~_k^μ | d/dt | x^~_k^μ'> = 0` over all pairs and samples.
pub fn degenerate_pt_residuals(
    spec: &SpectralTrajectory,
    deg: &DegeneracyStructure,
) -> Result<Vec<f64>> {
    check_unitary_scenario(spec)?;
    let history = holonomy_history(spec, deg)?;
    let n = spec.num_samples();
    let dt = spec.grid().dt();
    let mut out = Vec::with_capacity(deg.clusters().len());
    for (ci, cl) in deg.clusters().iter().enumerate() {
        let m = cl.len();
        // frames[i]: dim x m matrix of transported unit vectors
        // x^^μ(t_i) = Σ_ν α^{νμ} w^ν(t_i)
        let frames: Vec<CMat> = (0..n)
            .map(|i| {
                let mut w_cl = CMat::zeros(spec.dim(), m);
                for (a, &k) in cl.iter().enumerate() {
                    w_cl.set_column(a, &spec.basis(i).column(k));
                }
                w_cl * &history[i][ci]
            })
            .collect();
        // interior central differences only, for the same reason as in
        // pt_residual_generalized_samples
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            let deriv = central_diff(&frames, i, dt);
            let res = frames[i].adjoint() * deriv;
            worst = worst.max(max_abs(&res));
        }
        out.push(worst);
    }
    Ok(out)
}

/// Independent discrete Uhlmann transport on the raw density samples.
///
/// Per step the amplitude update is the unitary polar factor of
/// `sqrt(ρ_i) sqrt(ρ_{i+1})`, which makes each discrete link satisfy the
/// transport condition exactly (`w_i† w_{i+1}` is PSD by construction).
/// Returns the phase `arg tr(sqrt(ρ_0) sqrt(ρ_i) V_i)` at every sample;
/// `None` marks a vanishing overlap trace.
pub fn uhlmann_discrete_phases(traj: &DensityTrajectory) -> Result<Vec<Option<f64>>> {
    let n = traj.samples().len();
    let dim = traj.dim();
    let mut roots = Vec::with_capacity(n);
    let mut rank0 = None;
    for (i, s) in traj.samples().iter().enumerate() {
        let (vals, _) = eig_hermitian(s)?;
        let rank = vals.iter().filter(|&&v| v > 1e-10).count();
        match rank0 {
            None => rank0 = Some(rank),
            Some(r0) if r0 != rank => {
                return Err(Error::RankChange {
                    branch: rank.min(r0),
                    value: vals[rank.min(r0).min(dim - 1)],
                    time: traj.grid().time(i),
                    threshold: 1e-10,
                });
            }
            _ => {}
        }
        roots.push(sqrt_psd(s)?);
    }
    let mut v = CMat::identity(dim, dim);
    let mut phases = Vec::with_capacity(n);
    let trace_phase = |i: usize, v: &CMat| -> Option<f64> {
        let t = (&roots[0] * &roots[i] * v).trace();
        if t.norm() < UNDEFINED_SUM {
            None
        } else {
            Some(t.arg())
        }
    };
    phases.push(trace_phase(0, &v));
    for i in 0..n - 1 {
        let link = &roots[i] * &roots[i + 1];
        if max_abs(&link) < 1e-12 {
            return Err(Error::AmbiguousOverlap { best: max_abs(&link) });
        }
        let w = polar_unitary_lenient(&link);
        v = w.adjoint() * v;
        phases.push(trace_phase(i + 1, &v));
    }
    Ok(phases)
}

/// Final-time discrete Uhlmann phase.
pub fn uhlmann_phase_discrete(traj: &DensityTrajectory) -> Result<Option<f64>> {
    Ok(*uhlmann_discrete_phases(traj)?
        .last()
        .expect("grid has at least one sample"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{DensityTrajectory, TimeGrid};
    use crate::linalg::{identity, DensityMatrix};
    use crate::spectral::{cluster_degeneracies, track_spectrum, TrackOptions};
    use crate::testutil::*;
    use std::f64::consts::PI;

    fn constant_trajectory(rho: &DensityMatrix, steps: usize) -> DensityTrajectory {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let samples = vec![rho.matrix().clone(); grid.samples()];
        DensityTrajectory::from_samples(grid, samples).unwrap()
    }

    #[test]
    fn wrap_phase_lands_in_half_open_interval() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.3) - 0.3).abs() < 1e-15);
        assert!(phase_distance(PI - 0.01, -PI + 0.01) < 0.021);
    }

    #[test]
    fn kinematic_phase_of_constant_state_vanishes() {
        let rho = DensityMatrix::qubit_bloch(0.6, 1.0, 0.5).unwrap();
        let spec = spectrum(&constant_trajectory(&rho, 50));
        let rep = kinematic_phase(&spec, 50);
        assert!(rep.gamma.unwrap().abs() < 1e-10);
    }

    #[test]
    fn berry_phase_from_pure_precession() {
        let theta = PI / 3.0;
        let spec = spectrum(&precession_trajectory(1.0, theta, 4000));
        let last = spec.num_samples() - 1;
        let rep = kinematic_phase(&spec, last);
        let expected = -PI * (1.0 - theta.cos()); // -Ω/2
        assert!(
            phase_distance(rep.gamma.unwrap(), expected) < 1e-3,
            "got {}, expected {}",
            rep.gamma.unwrap(),
            expected
        );
    }

    #[test]
    fn mixed_precession_matches_interferometric_formula() {
        for (r, theta) in [(0.5, PI / 4.0), (0.3, 1.2), (0.8, PI / 3.0)] {
            let spec = spectrum(&precession_trajectory(r, theta, 4000));
            let last = spec.num_samples() - 1;
            let rep = kinematic_phase(&spec, last);
            // arg(cos(Ω/2) - i r sin(Ω/2)) with Ω = 2π(1-cosθ)
            let half = PI * (1.0 - theta.cos());
            let expected = c(half.cos(), -r * half.sin()).arg();
            assert!(
                phase_distance(rep.gamma.unwrap(), expected) < 1e-3,
                "r={r} theta={theta}: got {}, expected {expected}",
                rep.gamma.unwrap()
            );
        }
    }

    #[test]
    fn uhlmann_generator_vanishes_for_constant_state() {
        let rho = DensityMatrix::qubit_bloch(0.5, 0.7, 0.0).unwrap();
        let spec = spectrum(&constant_trajectory(&rho, 40));
        let gen = uhlmann_generator(&spec, 40).unwrap();
        assert!(max_abs(&gen.matrix) < 1e-10);
        assert!(gen.anti_hermitian_residue < 1e-10);
    }

    #[test]
    fn uhlmann_generator_pure_state_reduction() {
        // for a single branch the generator reduces to -i H~ = -∫<w|w'>dt,
        // i.e. H~ equals the accumulated connection integral
        let spec = spectrum(&precession_trajectory(1.0, 1.0, 2000));
        let rephased = spec
            .apply_branch_phases(&smooth_phase_fields(&spec, 0.8, 3))
            .unwrap();
        let i = 1500;
        let gen = uhlmann_generator(&rephased, i).unwrap();
        assert_eq!(gen.matrix.nrows(), 1);
        // trapezoid of the central-difference connection
        let dt = rephased.grid().dt();
        let mut integral = 0.0;
        for j in 0..=i {
            let weight = if j == 0 || j == i { 0.5 } else { 1.0 };
            integral += weight * rephased.connection(0, j) * dt;
        }
        assert!(
            (gen.matrix[(0, 0)].re - integral).abs() < 1e-4,
            "H~ = {}, connection integral = {integral}",
            gen.matrix[(0, 0)].re
        );
    }

    #[test]
    fn policies_on_constant_state_give_zero_phase() {
        let rho = DensityMatrix::qubit_bloch(0.5, 0.9, 0.2).unwrap();
        let spec = spectrum(&constant_trajectory(&rho, 30));
        for policy in [
            AncillaPolicy::Identity,
            AncillaPolicy::Diagonal,
            AncillaPolicy::Uhlmann,
        ] {
            let v = ancilla_from_policy(&spec, policy, None).unwrap();
            let rep = generalized_phase(&spec, &v, 30).unwrap();
            assert!(
                rep.gamma.unwrap().abs() < 1e-9,
                "{policy}: {:?}",
                rep.gamma
            );
            // F V stays the identity combination for the diagonal policy
            if policy == AncillaPolicy::Diagonal {
                assert!(max_abs(&(v.y(30) - identity(2))) < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_policy_reproduces_kinematic_phase() {
        let spec = spectrum(&precession_trajectory(0.5, PI / 3.0, 800));
        let v = ancilla_from_policy(&spec, AncillaPolicy::Diagonal, None).unwrap();
        for i in [100, 400, 800] {
            let a = kinematic_phase(&spec, i).gamma.unwrap();
            let b = generalized_phase(&spec, &v, i).unwrap().gamma.unwrap();
            assert!(phase_distance(a, b) < 1e-9);
        }
    }

    #[test]
    fn diagonal_policy_satisfies_generalized_but_not_uhlmann_pt() {
        let spec = spectrum(&precession_trajectory(0.5, PI / 3.0, 4000));
        let v = ancilla_from_policy(&spec, AncillaPolicy::Diagonal, None).unwrap();
        for k in 0..spec.rank() {
            let res = pt_residual_generalized(&spec, &v, k).unwrap();
            assert!(res < 1e-5, "branch {k} residual {res}");
        }
        let matrix_res = pt_residual_uhlmann(&spec, &v).unwrap();
        assert!(matrix_res > 1e-2, "uhlmann residual {matrix_res}");
    }

    #[test]
    fn uhlmann_policy_satisfies_both_pt_conditions_on_dephasing() {
        let spec = spectrum(&dephasing_trajectory(0.8, 0.25, 4000));
        let v = ancilla_from_policy(&spec, AncillaPolicy::Uhlmann, None).unwrap();
        for k in 0..spec.rank() {
            let res = pt_residual_generalized(&spec, &v, k).unwrap();
            assert!(res < 1e-4, "branch {k} residual {res}");
        }
        let matrix_res = pt_residual_uhlmann(&spec, &v).unwrap();
        assert!(matrix_res < 1e-3, "uhlmann residual {matrix_res}");
    }

    #[test]
    fn identity_policy_violates_pt_on_dephasing() {
        let spec = spectrum(&dephasing_trajectory(0.8, 0.25, 1000));
        let v = ancilla_from_policy(&spec, AncillaPolicy::Identity, None).unwrap();
        let worst = (0..spec.rank())
            .map(|k| pt_residual_generalized(&spec, &v, k).unwrap())
            .fold(0.0_f64, f64::max);
        assert!(worst > 1e-2, "identity policy residual {worst}");
    }

    #[test]
    fn pure_state_phases_collapse() {
        let theta = PI / 3.0;
        let traj = precession_trajectory(1.0, theta, 4000);
        let spec = spectrum(&traj);
        let last = spec.num_samples() - 1;
        let kin = kinematic_phase(&spec, last).gamma.unwrap();
        for policy in [
            AncillaPolicy::Identity,
            AncillaPolicy::Diagonal,
            AncillaPolicy::Uhlmann,
        ] {
            let v = ancilla_from_policy(&spec, policy, None).unwrap();
            let gen = generalized_phase(&spec, &v, last).unwrap().gamma.unwrap();
            assert!(
                phase_distance(gen, kin) < 1e-4,
                "{policy}: {gen} vs {kin}"
            );
        }
        let discrete = uhlmann_phase_discrete(&traj).unwrap().unwrap();
        assert!(phase_distance(discrete, kin) < 1e-3);
    }

    #[test]
    fn explicit_policy_validates_inputs() {
        let spec = spectrum(&precession_trajectory(0.5, 1.0, 20));
        assert!(matches!(
            ancilla_from_policy(&spec, AncillaPolicy::Explicit, None),
            Err(Error::InvalidValue { .. })
        ));
        let bad_first = vec![identity(2).scale(2.0); spec.num_samples()];
        assert!(ancilla_from_policy(&spec, AncillaPolicy::Explicit, Some(&bad_first)).is_err());
        let good = vec![identity(2); spec.num_samples()];
        let v = ancilla_from_policy(&spec, AncillaPolicy::Explicit, Some(&good)).unwrap();
        // V = I reproduces the identity policy
        let v_id = ancilla_from_policy(&spec, AncillaPolicy::Identity, None).unwrap();
        assert!(max_abs(&(v.y(10) - v_id.y(10))) < 1e-12);
    }

    #[test]
    fn footnote_residuals_behave() {
        // constant state: both families vanish
        let rho = DensityMatrix::qubit_bloch(0.5, 0.8, 0.0).unwrap();
        let spec = spectrum(&constant_trajectory(&rho, 30));
        let f = footnote_pt_residuals(&spec).unwrap();
        assert!(f.evolution_operator.iter().all(|&r| r < 1e-9));
        assert!(f.weighted.iter().all(|&r| r < 1e-9));

        // maximally mixed: the state is frozen, both families coincide
        let rho = DensityMatrix::maximally_mixed(2);
        let spec = spectrum(&constant_trajectory(&rho, 30));
        let f = footnote_pt_residuals(&spec).unwrap();
        for (a, b) in f.evolution_operator.iter().zip(&f.weighted) {
            assert!((a - b).abs() < 1e-9);
        }

        // generic mixed unitary scenario: they differ
        let spec = spectrum(&precession_trajectory(0.5, PI / 3.0, 1000));
        let f = footnote_pt_residuals(&spec).unwrap();
        let gap = f
            .evolution_operator
            .iter()
            .zip(&f.weighted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(gap > 1e-3, "families should differ, gap {gap}");

        // nonunitary input is rejected
        let spec = spectrum(&dephasing_trajectory(0.8, 0.3, 200));
        assert!(matches!(
            footnote_pt_residuals(&spec),
            Err(Error::NotUnitaryEvolution { .. })
        ));
    }

    #[test]
    fn degenerate_holonomy_reduces_to_connection_factor_for_singletons() {
        let spec = spectrum(&precession_trajectory(0.5, 1.0, 600));
        let deg = cluster_degeneracies(&spec, 1e-8).unwrap();
        assert!(deg.is_nondegenerate());
        let i = 450;
        let hol = degenerate_holonomy(&spec, &deg, i).unwrap();
        for (cl, alpha) in hol.clusters.iter().zip(&hol.alpha) {
            assert_eq!(alpha.nrows(), 1);
            let expected = spec.geometric_factor(cl[0], i);
            assert!((alpha[(0, 0)] - expected).norm() < 1e-6);
            assert!((alpha[(0, 0)].norm() - 1.0).abs() < 1e-9);
        }
        // t = 0 gives the identity
        let hol0 = degenerate_holonomy(&spec, &deg, 0).unwrap();
        for alpha in &hol0.alpha {
            assert!(max_abs(&(alpha.clone() - identity(1))) < 1e-12);
        }
    }

    #[test]
    fn degenerate_phase_matches_kinematic_on_nondegenerate_input() {
        let spec = spectrum(&precession_trajectory(0.5, PI / 3.0, 800));
        let deg = cluster_degeneracies(&spec, 1e-8).unwrap();
        for i in [200, 800] {
            let a = degenerate_phase(&spec, &deg, i).unwrap().gamma.unwrap();
            let b = kinematic_phase(&spec, i).gamma.unwrap();
            assert!(phase_distance(a, b) < 1e-6, "sample {i}: {a} vs {b}");
        }
        let res = degenerate_pt_residuals(&spec, &deg).unwrap();
        assert!(res.iter().all(|&r| r < 1e-4));
    }

    #[test]
    fn discrete_uhlmann_trivial_cases() {
        let rho = DensityMatrix::qubit_bloch(0.6, 1.0, 0.3).unwrap();
        let traj = constant_trajectory(&rho, 40);
        assert!(uhlmann_phase_discrete(&traj).unwrap().unwrap().abs() < 1e-10);

        // maximally mixed: sqrt(ρ) ∝ I, transport trivializes
        let traj = constant_trajectory(&DensityMatrix::maximally_mixed(2), 40);
        assert!(uhlmann_phase_discrete(&traj).unwrap().unwrap().abs() < 1e-6);
    }

    #[test]
    fn discrete_uhlmann_berry_reduction() {
        let theta = PI / 3.0;
        let traj = precession_trajectory(1.0, theta, 4000);
        let phase = uhlmann_phase_discrete(&traj).unwrap().unwrap();
        let expected = -PI * (1.0 - theta.cos());
        assert!(
            phase_distance(phase, expected) < 1e-3,
            "got {phase}, expected {expected}"
        );
    }

    #[test]
    fn discrete_uhlmann_links_are_psd() {
        // w_i† w_{i+1} = V_i† P_i V_i must be PSD at every step
        let traj = dephasing_trajectory(0.7, 0.3, 50);
        let roots: Vec<CMat> = traj.samples().iter().map(|s| sqrt_psd(s).unwrap()).collect();
        let mut v = identity(2);
        for i in 0..roots.len() - 1 {
            let link = &roots[i] * &roots[i + 1];
            let w = polar_unitary_lenient(&link);
            let v_next = w.adjoint() * &v;
            let amp_overlap = (&roots[i] * &v).adjoint() * (&roots[i + 1] * &v_next);
            let (vals, _) = eig_hermitian(&((&amp_overlap + amp_overlap.adjoint()).scale(0.5)))
                .unwrap();
            assert!(vals.iter().all(|&l| l > -1e-10));
            assert!(max_abs(&(&amp_overlap - amp_overlap.adjoint())) < 1e-10);
            v = v_next;
        }
    }

    #[test]
    fn gauge_invariance_of_phase_outputs() {
        let traj = dephasing_trajectory(0.8, 0.25, 2000);
        let spec = spectrum(&traj);
        let last = spec.num_samples() - 1;
        let rephased = spec
            .apply_branch_phases(&smooth_phase_fields(&spec, 1.0, 17))
            .unwrap();

        let kin_a = kinematic_phase(&spec, last).gamma.unwrap();
        let kin_b = kinematic_phase(&rephased, last).gamma.unwrap();
        assert!(phase_distance(kin_a, kin_b) < 1e-10, "{kin_a} vs {kin_b}");

        let va = ancilla_from_policy(&spec, AncillaPolicy::Diagonal, None).unwrap();
        let vb = ancilla_from_policy(&rephased, AncillaPolicy::Diagonal, None).unwrap();
        let gen_a = generalized_phase(&spec, &va, last).unwrap().gamma.unwrap();
        let gen_b = generalized_phase(&rephased, &vb, last).unwrap().gamma.unwrap();
        assert!(phase_distance(gen_a, gen_b) < 1e-10);
    }

    #[test]
    fn raw_gauge_matches_continuity_gauge() {
        let traj = dephasing_trajectory(0.8, 0.25, 1500);
        let cont = track_spectrum(&traj, &TrackOptions::default()).unwrap();
        let raw = track_spectrum(
            &traj,
            &TrackOptions {
                min_eigenvalue: 1e-10,
                gauge: crate::spectral::GaugePolicy::Raw,
            },
        )
        .unwrap();
        let last = cont.num_samples() - 1;
        let a = kinematic_phase(&cont, last).gamma.unwrap();
        let b = kinematic_phase(&raw, last).gamma.unwrap();
        assert!(phase_distance(a, b) < 1e-6);
    }

    #[test]
    fn vanishing_overlap_sum_reports_undefined() {
        let amps = [c(4e-13, 0.0), c(-3.5e-13, 0.0)];
        let rep = report_from_amplitudes(PhaseMethod::Kinematic, &amps);
        assert!(rep.gamma.is_none());
        assert_eq!(rep.components.len(), 2);
        let ok = report_from_amplitudes(PhaseMethod::Kinematic, &[c(0.3, 0.4)]);
        assert!((ok.gamma.unwrap() - c(0.3, 0.4).arg()).abs() < 1e-15);
    }

    #[test]
    fn visibility_bound_holds() {
        let spec = spectrum(&dephasing_trajectory(0.7, 0.3, 400));
        let v = ancilla_from_policy(&spec, AncillaPolicy::Uhlmann, None).unwrap();
        let i = spec.num_samples() - 1;
        let amps = generalized_amplitudes(&spec, &v, i).unwrap();
        for (k, a) in amps.iter().enumerate() {
            let n0 = x_tilde_vector(&spec, &v, k, 0).norm();
            let nt = x_tilde_vector(&spec, &v, k, i).norm();
            assert!(a.norm() <= n0 * nt + 1e-9, "branch {k}");
        }
        for (k, a) in kinematic_amplitudes(&spec, i).iter().enumerate() {
            let p0 = spec.eigenvalues(0)[k];
            let pt = spec.eigenvalues(i)[k];
            assert!(a.norm() <= (p0 * pt).sqrt() + 1e-9);
        }
    }
}
