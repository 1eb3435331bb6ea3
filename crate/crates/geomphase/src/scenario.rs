//! Scenario documents: the TOML schema describing a run, validation into
//! runtime types, and the builtin scenario library.
//!
//! Complex matrix entries are written as `[re, im]` pairs, row by row:
//!
//! ```toml
//! name = "my_qubit"
//! dimension = 2
//!
//! [initial_density]
//! family = "bloch"
//! r = 0.5
//! theta = 1.0471975511965976
//! phi = 0.0
//!
//! [evolution]
//! kind = "lindblad"
//!
//! [evolution.hamiltonian]
//! family = "constant"
//! matrix = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]]
//!
//! [[evolution.jump_ops]]
//! rate = 0.25
//! operator = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]
//!
//! [time]
//! t_final = 2.0
//! steps = 4000
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{HamiltonianFamily, JumpOp, TimeGrid};
use crate::linalg::{c, identity, CMat, CVec, DensityMatrix};
use crate::phase::AncillaPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// One complex entry as a `[re, im]` pair.
pub type ComplexDoc = [f64; 2];
/// A dense matrix as rows of `[re, im]` pairs.
pub type MatrixDoc = Vec<Vec<ComplexDoc>>;

fn matrix_from_doc(doc: &MatrixDoc, field: &str) -> Result<CMat> {
    let rows = doc.len();
    if rows == 0 {
        return Err(Error::InvalidValue {
            field: field.into(),
            message: "matrix has no rows".into(),
        });
    }
    let cols = doc[0].len();
    if doc.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidValue {
            field: field.into(),
            message: "matrix rows have unequal lengths".into(),
        });
    }
    let m = CMat::from_fn(rows, cols, |i, j| c(doc[i][j][0], doc[i][j][1]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFiniteEntry);
    }
    Ok(m)
}

pub fn matrix_to_doc(m: &CMat) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDoc {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianDoc {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<MatrixDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpOpDoc {
    pub operator: MatrixDoc,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionDoc {
    pub kind: String,
    pub hamiltonian: HamiltonianDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jump_ops: Vec<JumpOpDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDoc {
    pub t_final: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_deg: Option<f64>,
}

/// The on-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub dimension: usize,
    pub initial_density: DensityDoc,
    pub evolution: EvolutionDoc,
    pub time: TimeDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ancilla_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explicit_ancilla: Option<Vec<MatrixDoc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Kinematic,
    Generalized,
    UhlmannDiscrete,
    Degenerate,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Kinematic => "kinematic",
            Self::Generalized => "generalized",
            Self::UhlmannDiscrete => "uhlmann_discrete",
            Self::Degenerate => "degenerate",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "kinematic" => Ok(Self::Kinematic),
            "generalized" => Ok(Self::Generalized),
            "uhlmann_discrete" => Ok(Self::UhlmannDiscrete),
            "degenerate" => Ok(Self::Degenerate),
            other => Err(Error::InvalidValue {
                field: "methods".into(),
                message: format!(
                    "unknown method `{other}` (expected kinematic, generalized, uhlmann_discrete, degenerate)"
                ),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub min_eigenvalue: f64,
    pub eps_deg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            min_eigenvalue: 1e-10,
            eps_deg: 1e-8,
        }
    }
}

/// A validated, runnable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub rho0: DensityMatrix,
    pub hamiltonian: HamiltonianFamily,
    pub jump_ops: Vec<JumpOp>,
    /// true: propagator integration; false: GKSL stepping
    pub unitary: bool,
    pub grid: TimeGrid,
    pub policy: AncillaPolicy,
    pub methods: Vec<Method>,
    pub tolerances: Tolerances,
    pub explicit_ancilla: Option<Vec<CMat>>,
}

fn parse_policy(s: &str) -> Result<AncillaPolicy> {
    match s {
        "identity" => Ok(AncillaPolicy::Identity),
        "uhlmann" => Ok(AncillaPolicy::Uhlmann),
        "diagonal" => Ok(AncillaPolicy::Diagonal),
        "explicit" => Ok(AncillaPolicy::Explicit),
        other => Err(Error::InvalidValue {
            field: "ancilla_policy".into(),
            message: format!(
                "unknown policy `{other}` (expected identity, uhlmann, diagonal, explicit)"
            ),
        }),
    }
}

fn density_from_doc(doc: &DensityDoc, dim: usize) -> Result<DensityMatrix> {
    let need_qubit = |family: &str| -> Result<()> {
        if dim != 2 {
            return Err(Error::InvalidValue {
                field: "initial_density".into(),
                message: format!("family `{family}` is only defined for dimension 2"),
            });
        }
        Ok(())
    };
    match doc.family.as_str() {
        "pure_bloch" => {
            need_qubit("pure_bloch")?;
            DensityMatrix::qubit_bloch(
                1.0,
                doc.theta.unwrap_or(0.0),
                doc.phi.unwrap_or(0.0),
            )
        }
        "bloch" => {
            need_qubit("bloch")?;
            DensityMatrix::qubit_bloch(
                doc.r.unwrap_or(1.0),
                doc.theta.unwrap_or(0.0),
                doc.phi.unwrap_or(0.0),
            )
        }
        "thermal" => {
            need_qubit("thermal")?;
            let r = doc.r.ok_or_else(|| Error::InvalidValue {
                field: "initial_density.r".into(),
                message: "the thermal family needs a purity r".into(),
            })?;
            DensityMatrix::qubit_bloch(r, 0.0, 0.0)
        }
        "maximally_mixed" => Ok(DensityMatrix::maximally_mixed(dim)),
        "explicit" => {
            let m = doc.matrix.as_ref().ok_or_else(|| Error::InvalidValue {
                field: "initial_density.matrix".into(),
                message: "the explicit family needs a matrix".into(),
            })?;
            let m = matrix_from_doc(m, "initial_density.matrix")?;
            if m.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    context: "initial_density.matrix".into(),
                    expected: dim,
                    actual: m.nrows(),
                });
            }
            DensityMatrix::new(m)
        }
        other => Err(Error::InvalidValue {
            field: "initial_density.family".into(),
            message: format!(
                "unknown family `{other}` (expected pure_bloch, bloch, thermal, maximally_mixed, explicit)"
            ),
        }),
    }
}

fn hamiltonian_from_doc(doc: &HamiltonianDoc, dim: usize) -> Result<HamiltonianFamily> {
    let family = match doc.family.as_str() {
        "constant" => {
            let m = doc.matrix.as_ref().ok_or_else(|| Error::InvalidValue {
                field: "hamiltonian.matrix".into(),
                message: "the constant family needs a matrix".into(),
            })?;
            HamiltonianFamily::Constant(matrix_from_doc(m, "hamiltonian.matrix")?)
        }
        "precession" => HamiltonianFamily::Precession {
            omega: doc.omega.ok_or_else(|| Error::InvalidValue {
                field: "hamiltonian.omega".into(),
                message: "the precession family needs omega".into(),
            })?,
            theta: doc.theta.ok_or_else(|| Error::InvalidValue {
                field: "hamiltonian.theta".into(),
                message: "the precession family needs theta".into(),
            })?,
        },
        "tabulated" => {
            let times = doc.times.clone().ok_or_else(|| Error::InvalidValue {
                field: "hamiltonian.times".into(),
                message: "the tabulated family needs times".into(),
            })?;
            let mats = doc.matrices.as_ref().ok_or_else(|| Error::InvalidValue {
                field: "hamiltonian.matrices".into(),
                message: "the tabulated family needs matrices".into(),
            })?;
            let matrices = mats
                .iter()
                .map(|m| matrix_from_doc(m, "hamiltonian.matrices"))
                .collect::<Result<Vec<_>>>()?;
            HamiltonianFamily::Tabulated { times, matrices }
        }
        other => {
            return Err(Error::InvalidValue {
                field: "hamiltonian.family".into(),
                message: format!(
                    "unknown family `{other}` (expected constant, precession, tabulated)"
                ),
            })
        }
    };
    family.validate(dim)?;
    Ok(family)
}

impl ScenarioDoc {
    pub fn validate(&self) -> Result<Scenario> {
        if self.dimension == 0 {
            return Err(Error::InvalidValue {
                field: "dimension".into(),
                message: "dimension must be at least 1".into(),
            });
        }
        let rho0 = density_from_doc(&self.initial_density, self.dimension)?;
        let hamiltonian = hamiltonian_from_doc(&self.evolution.hamiltonian, self.dimension)?;
        let unitary = match self.evolution.kind.as_str() {
            "unitary" => {
                if !self.evolution.jump_ops.is_empty() {
                    return Err(Error::InvalidValue {
                        field: "evolution.jump_ops".into(),
                        message: "a unitary evolution carries no jump operators".into(),
                    });
                }
                true
            }
            "lindblad" => false,
            other => {
                return Err(Error::InvalidValue {
                    field: "evolution.kind".into(),
                    message: format!("unknown kind `{other}` (expected unitary, lindblad)"),
                })
            }
        };
        let mut jump_ops = Vec::with_capacity(self.evolution.jump_ops.len());
        for (i, j) in self.evolution.jump_ops.iter().enumerate() {
            if !(j.rate.is_finite() && j.rate >= 0.0) {
                return Err(Error::InvalidValue {
                    field: format!("evolution.jump_ops[{i}].rate"),
                    message: format!("rates must be nonnegative, got {}", j.rate),
                });
            }
            let operator = matrix_from_doc(&j.operator, "evolution.jump_ops.operator")?;
            if operator.nrows() != self.dimension || operator.ncols() != self.dimension {
                return Err(Error::DimensionMismatch {
                    context: format!("evolution.jump_ops[{i}].operator"),
                    expected: self.dimension,
                    actual: operator.nrows().max(operator.ncols()),
                });
            }
            jump_ops.push(JumpOp {
                operator,
                rate: j.rate,
            });
        }
        let grid = TimeGrid::new(self.time.t_final, self.time.steps)?;
        hamiltonian.validate_span(grid.t_final())?;
        let policy = match &self.ancilla_policy {
            Some(s) => parse_policy(s)?,
            None => AncillaPolicy::Identity,
        };
        let methods = match &self.methods {
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidValue {
                        field: "methods".into(),
                        message: "at least one method must be requested".into(),
                    });
                }
                list.iter().map(|s| Method::parse(s)).collect::<Result<Vec<_>>>()?
            }
            None => vec![Method::Kinematic],
        };
        let tolerances = match &self.tolerances {
            Some(t) => Tolerances {
                min_eigenvalue: t.min_eigenvalue.unwrap_or(1e-10),
                eps_deg: t.eps_deg.unwrap_or(1e-8),
            },
            None => Tolerances::default(),
        };
        let explicit_ancilla = match &self.explicit_ancilla {
            Some(mats) => {
                if policy != AncillaPolicy::Explicit {
                    return Err(Error::InvalidValue {
                        field: "explicit_ancilla".into(),
                        message: "explicit ancilla samples require ancilla_policy = \"explicit\"".into(),
                    });
                }
                Some(
                    mats.iter()
                        .map(|m| matrix_from_doc(m, "explicit_ancilla"))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => {
                if policy == AncillaPolicy::Explicit {
                    return Err(Error::InvalidValue {
                        field: "explicit_ancilla".into(),
                        message: "ancilla_policy = \"explicit\" needs explicit_ancilla samples".into(),
                    });
                }
                None
            }
        };
        Ok(Scenario {
            name: self.name.clone(),
            dimension: self.dimension,
            rho0,
            hamiltonian,
            jump_ops,
            unitary,
            grid,
            policy,
            methods,
            tolerances,
            explicit_ancilla,
        })
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.validate()
}

// ---------------------------------------------------------------------------
// builtin library
// ---------------------------------------------------------------------------

pub const BUILTIN_NAMES: &[&str] = &[
    "qubit_precession",
    "qubit_dephasing",
    "qubit_amplitude_damping",
    "qutrit_degenerate",
    "random_unitary",
    "random_lindblad",
];

pub fn builtin_descriptions() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "qubit_precession",
            "mixed qubit tilted by theta, one full precession about z (unitary)",
        ),
        (
            "qubit_dephasing",
            "equatorial qubit under sigma_z dephasing plus precession",
        ),
        (
            "qubit_amplitude_damping",
            "tilted mixed qubit decaying toward the ground state",
        ),
        (
            "qutrit_degenerate",
            "qutrit with a 2-fold degenerate block around a subspace-mixing loop",
        ),
        (
            "random_unitary",
            "random constant Hamiltonian on a random full-rank qutrit (seeded)",
        ),
        (
            "random_lindblad",
            "random real-structured qubit Lindblad model (seeded)",
        ),
    ]
}

fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

fn sigma_minus() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
}

const STANDARD_METHODS: &[Method] = &[
    Method::Kinematic,
    Method::Generalized,
    Method::UhlmannDiscrete,
];

/// Tunable knobs of the builtin scenarios.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinOptions {
    pub steps: Option<usize>,
    pub seed: u64,
    /// Bloch radius for the qubit families.
    pub r: Option<f64>,
    /// Tilt angle for the precession family.
    pub theta: Option<f64>,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        Self {
            steps: None,
            seed: 1,
            r: None,
            theta: None,
        }
    }
}

/// The precession scenario: constant `H = (ω/2)σz`, Bloch vector tilted by
/// `theta`, one full period.
pub fn builtin_precession(r: f64, theta: f64, steps: usize) -> Scenario {
    let omega = 1.0;
    Scenario {
        name: "qubit_precession".into(),
        dimension: 2,
        rho0: DensityMatrix::qubit_bloch(r, theta, 0.0).expect("valid Bloch state"),
        hamiltonian: HamiltonianFamily::Constant(sigma_z().scale(omega / 2.0)),
        jump_ops: Vec::new(),
        unitary: true,
        grid: TimeGrid::new(2.0 * PI / omega, steps).expect("valid grid"),
        policy: AncillaPolicy::Diagonal,
        methods: STANDARD_METHODS.to_vec(),
        tolerances: Tolerances::default(),
        explicit_ancilla: None,
    }
}

fn builtin_dephasing(r: f64, steps: usize) -> Scenario {
    Scenario {
        name: "qubit_dephasing".into(),
        dimension: 2,
        rho0: DensityMatrix::qubit_bloch(r, PI / 2.0, 0.0).expect("valid Bloch state"),
        hamiltonian: HamiltonianFamily::Constant(sigma_z().scale(0.5)),
        jump_ops: vec![JumpOp {
            operator: sigma_z(),
            rate: 0.25,
        }],
        unitary: false,
        grid: TimeGrid::new(2.0, steps).expect("valid grid"),
        policy: AncillaPolicy::Diagonal,
        methods: STANDARD_METHODS.to_vec(),
        tolerances: Tolerances::default(),
        explicit_ancilla: None,
    }
}

fn builtin_amplitude_damping(r: f64, steps: usize) -> Scenario {
    Scenario {
        name: "qubit_amplitude_damping".into(),
        dimension: 2,
        rho0: DensityMatrix::qubit_bloch(r, PI / 3.0, 0.0).expect("valid Bloch state"),
        hamiltonian: HamiltonianFamily::Constant(sigma_z().scale(0.5)),
        jump_ops: vec![JumpOp {
            operator: sigma_minus(),
            rate: 0.4,
        }],
        unitary: false,
        grid: TimeGrid::new(2.0, steps).expect("valid grid"),
        policy: AncillaPolicy::Diagonal,
        methods: STANDARD_METHODS.to_vec(),
        tolerances: Tolerances::default(),
        explicit_ancilla: None,
    }
}

/// Closed loop on a qutrit whose 2-fold degenerate subspace is steered
/// through two overlapping rotation windows, `U(t) = e^{-iA f(t)} e^{-iB
/// g(t)}` with `A = |0><1| + h.c.`, `B = |0><2| + h.c.`, `f, g` smoothstep
/// ramps to π and 2π. `H(t) = A f' + g' e^{-iAf} B e^{iAf}` in closed form,
/// tabulated on the half-step grid so the integrator reads exact nodes.
pub fn builtin_qutrit_degenerate(steps: usize) -> Scenario {
    let t_final = 4.0;
    let (amp1, amp2) = (PI, 2.0 * PI);
    let a = CMat::from_fn(3, 3, |i, j| {
        if (i, j) == (0, 1) || (i, j) == (1, 0) {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let b = CMat::from_fn(3, 3, |i, j| {
        if (i, j) == (0, 2) || (i, j) == (2, 0) {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let p01 = CMat::from_fn(3, 3, |i, j| {
        if i == j && i < 2 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let smooth = |u: f64| u * u * (3.0 - 2.0 * u);
    let smooth_dot = |u: f64| 6.0 * u * (1.0 - u);
    let tab_steps = 2 * steps;
    let times: Vec<f64> = (0..=tab_steps)
        .map(|i| t_final * i as f64 / tab_steps as f64)
        .collect();
    let matrices: Vec<CMat> = times
        .iter()
        .map(|&t| {
            let u = t / t_final;
            let ft = amp1 * smooth(u);
            let f_dot = amp1 * smooth_dot(u) / t_final;
            let g_dot = amp2 * 2.0 * smooth(u) * smooth_dot(u) / t_final;
            // e^{-iAf} = I + (cos f - 1) P01 - i sin f A
            let exp_af = identity(3) + p01.scale(ft.cos() - 1.0) + a.map(|z| z * c(0.0, -ft.sin()));
            let conj_b = &exp_af * &b * exp_af.adjoint();
            a.scale(f_dot) + conj_b.scale(g_dot)
        })
        .collect();
    Scenario {
        name: "qutrit_degenerate".into(),
        dimension: 3,
        rho0: DensityMatrix::new(CMat::from_diagonal(&CVec::from_vec(vec![
            c(0.5, 0.0),
            c(0.25, 0.0),
            c(0.25, 0.0),
        ])))
        .expect("valid density"),
        hamiltonian: HamiltonianFamily::Tabulated { times, matrices },
        jump_ops: Vec::new(),
        unitary: true,
        grid: TimeGrid::new(t_final, steps).expect("valid grid"),
        policy: AncillaPolicy::Diagonal,
        methods: vec![
            Method::Kinematic,
            Method::Generalized,
            Method::UhlmannDiscrete,
            Method::Degenerate,
        ],
        tolerances: Tolerances::default(),
        explicit_ancilla: None,
    }
}

fn random_hermitian(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    (&g + g.adjoint()).scale(0.5 * scale)
}

fn builtin_random_unitary(seed: u64, steps: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let h = random_hermitian(3, 1.2, &mut rng);
    // fixed spectrum conjugated by a random unitary
    let skew = random_hermitian(3, 2.0, &mut rng).map(|z| z * c(0.0, -1.0));
    let q = crate::linalg::matrix_exp(&skew).expect("unitary from skew generator");
    let diag = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.0), c(0.3, 0.0), c(0.2, 0.0)]));
    let rho0 = DensityMatrix::new(&q * diag * q.adjoint()).expect("valid density");
    Scenario {
        name: "random_unitary".into(),
        dimension: 3,
        rho0,
        hamiltonian: HamiltonianFamily::Constant(h),
        jump_ops: Vec::new(),
        unitary: true,
        grid: TimeGrid::new(2.0, steps).expect("valid grid"),
        policy: AncillaPolicy::Diagonal,
        methods: STANDARD_METHODS.to_vec(),
        tolerances: Tolerances::default(),
        explicit_ancilla: None,
    }
}

/// Real-structured random Lindblad qubit: `H ∝ σy` and real jump operators
/// keep a real initial state real along the whole trajectory.
fn builtin_random_lindblad(seed: u64, steps: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(2));
    let h = sigma_y().scale(0.5 + rng.random::<f64>());
    let mut jump_ops = Vec::new();
    for _ in 0..2 {
        let operator = CMat::from_fn(2, 2, |_, _| c(rng.random::<f64>() - 0.5, 0.0));
        jump_ops.push(JumpOp {
            operator,
            rate: 0.05 + 0.1 * rng.random::<f64>(),
        });
    }
    let r = 0.35 + 0.25 * rng.random::<f64>();
    let angle = 2.0 * PI * rng.random::<f64>();
    Scenario {
        name: "random_lindblad".into(),
        dimension: 2,
        rho0: DensityMatrix::qubit_bloch(r, angle, 0.0).expect("valid Bloch state"),
        hamiltonian: HamiltonianFamily::Constant(h),
        jump_ops,
        unitary: false,
        grid: TimeGrid::new(1.5, steps).expect("valid grid"),
        policy: AncillaPolicy::Diagonal,
        methods: STANDARD_METHODS.to_vec(),
        tolerances: Tolerances::default(),
        explicit_ancilla: None,
    }
}

/// Build a builtin scenario by name. Names may carry a `:seed` suffix for
/// the random families, e.g. `random_lindblad:3`.
pub fn builtin_scenario(name: &str, opts: &BuiltinOptions) -> Result<Scenario> {
    let (base, seed) = match name.split_once(':') {
        Some((base, suffix)) => {
            let seed = suffix.parse::<u64>().map_err(|_| Error::InvalidValue {
                field: "builtin".into(),
                message: format!("seed suffix `{suffix}` is not an integer"),
            })?;
            (base, seed)
        }
        None => (name, opts.seed),
    };
    let steps = opts.steps;
    let scenario = match base {
        "qubit_precession" => builtin_precession(
            opts.r.unwrap_or(0.5),
            opts.theta.unwrap_or(PI / 3.0),
            steps.unwrap_or(4000),
        ),
        "qubit_dephasing" => builtin_dephasing(opts.r.unwrap_or(0.8), steps.unwrap_or(4000)),
        "qubit_amplitude_damping" => {
            builtin_amplitude_damping(opts.r.unwrap_or(0.5), steps.unwrap_or(4000))
        }
        "qutrit_degenerate" => builtin_qutrit_degenerate(steps.unwrap_or(3000)),
        "random_unitary" => builtin_random_unitary(seed, steps.unwrap_or(4000)),
        "random_lindblad" => builtin_random_lindblad(seed, steps.unwrap_or(4000)),
        other => {
            return Err(Error::InvalidValue {
                field: "builtin".into(),
                message: format!(
                    "unknown builtin `{other}`; available: {}",
                    BUILTIN_NAMES.join(", ")
                ),
            })
        }
    };
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
dimension = 2

[initial_density]
family = "bloch"
r = 0.5
theta = 1.0471975511965976

[evolution]
kind = "unitary"

[evolution.hamiltonian]
family = "constant"
matrix = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]]

[time]
t_final = 6.283185307179586
steps = 100
"#;

    #[test]
    fn minimal_document_fills_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.policy, AncillaPolicy::Identity);
        assert_eq!(s.methods, vec![Method::Kinematic]);
        assert_eq!(s.tolerances, Tolerances::default());
        assert_eq!(s.grid.steps(), 100);
    }

    #[test]
    fn unknown_fields_are_listed() {
        let doc = format!("{MINIMAL}\nnot_a_field = 3\n");
        match parse_scenario(&doc) {
            Err(Error::Parse(msg)) => assert!(msg.contains("not_a_field"), "{msg}"),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_names_the_field() {
        let doc = MINIMAL.replace(
            "matrix = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]]",
            "matrix = [[[0.5, 0.0], [0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]]",
        );
        match parse_scenario(&doc) {
            Err(Error::DimensionMismatch { context, .. }) => {
                assert!(context.contains("hamiltonian"))
            }
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }

    #[test]
    fn negative_rate_is_rejected() {
        let doc = MINIMAL.replace("kind = \"unitary\"", "kind = \"lindblad\"")
            + r#"
[[evolution.jump_ops]]
rate = -0.1
operator = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]
"#;
        match parse_scenario(&doc) {
            Err(Error::InvalidValue { field, .. }) => assert!(field.contains("rate")),
            other => panic!("expected InvalidValue, got {other:?}"),
        }
    }

    #[test]
    fn unitary_kind_rejects_jump_ops() {
        let doc = MINIMAL.to_string()
            + r#"
[[evolution.jump_ops]]
rate = 0.1
operator = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]
"#;
        assert!(parse_scenario(&doc).is_err());
    }

    #[test]
    fn missing_required_field_is_rejected() {
        let doc = MINIMAL.replace("dimension = 2\n", "");
        match parse_scenario(&doc) {
            Err(Error::Parse(msg)) => assert!(msg.contains("dimension"), "{msg}"),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn all_builtins_construct() {
        for name in BUILTIN_NAMES {
            let s = builtin_scenario(
                name,
                &BuiltinOptions {
                    steps: Some(50),
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(&s.name, name);
            assert!(!s.methods.is_empty());
        }
        assert!(builtin_scenario("no_such", &BuiltinOptions::default()).is_err());
        let seeded = builtin_scenario(
            "random_lindblad:4",
            &BuiltinOptions {
                steps: Some(50),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seeded.name, "random_lindblad");
    }
}
