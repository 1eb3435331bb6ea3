//! Scenario orchestration: evolve, track the spectrum, build the ancilla,
//! evaluate every requested phase method at every sample, and assemble the
//! report.

use crate::error::Result;
use crate::evolve::{evolve_lindblad, evolve_unitary, DensityTrajectory, LindbladModel};
use crate::linalg::eig_hermitian;
use crate::phase::{
    ancilla_from_policy, degenerate_phase, degenerate_pt_residuals, generalized_phase,
    kinematic_phase, pt_residual_generalized_samples, pt_residual_uhlmann_samples,
    uhlmann_discrete_phases, wrap_phase, AncillaEvolution, AncillaPolicy, PhaseReport,
};
use crate::report::{ComponentOut, MethodOutcome, RunDiagnostics, RunReport};
use crate::scenario::{Method, Scenario};
use crate::spectral::{
    cluster_degeneracies, track_spectrum, DegeneracyStructure, GaugePolicy, SpectralTrajectory,
    TrackOptions,
};

/// Continuously unwrap a series of angles by nearest-branch continuation.
pub fn unwrap_phases(series: &[Option<f64>]) -> Vec<Option<f64>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(series.len());
    let mut prev: Option<f64> = None;
    for s in series {
        match (s, prev) {
            (Some(x), Some(p)) => {
                let shifted = x + ((p - x) / two_pi).round() * two_pi;
                out.push(Some(shifted));
                prev = Some(shifted);
            }
            (Some(x), None) => {
                out.push(Some(*x));
                prev = Some(*x);
            }
            (None, _) => out.push(None),
        }
    }
    out
}

/// Everything computed during a run that callers may want beyond the report.
pub struct RunArtifacts {
    pub trajectory: DensityTrajectory,
    pub spectral: SpectralTrajectory,
    pub ancilla: Option<AncillaEvolution>,
    pub degeneracy: Option<DegeneracyStructure>,
    pub report: RunReport,
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    Ok(run_scenario_full(scenario, false)?.report)
}

/// Run the pipeline; with `final_only` the per-sample table carries only the
/// last row.
pub fn run_scenario_full(scenario: &Scenario, final_only: bool) -> Result<RunArtifacts> {
    run_pipeline(scenario, final_only).map_err(|e| e.in_scenario(&scenario.name))
}

fn run_pipeline(scenario: &Scenario, final_only: bool) -> Result<RunArtifacts> {
    let model = LindbladModel::new(
        scenario.dimension,
        scenario.hamiltonian.clone(),
        scenario.jump_ops.clone(),
    )?;
    let trajectory = if scenario.unitary {
        evolve_unitary(&model, &scenario.rho0, &scenario.grid)?
    } else {
        evolve_lindblad(&model, &scenario.rho0, &scenario.grid)?
    };

    let spectral = track_spectrum(
        &trajectory,
        &TrackOptions {
            min_eigenvalue: scenario.tolerances.min_eigenvalue,
            gauge: GaugePolicy::Continuity,
        },
    )?;
    let n = spectral.num_samples();
    let rank = spectral.rank();

    let wants = |m: Method| scenario.methods.contains(&m);
    let ancilla = if wants(Method::Generalized) {
        Some(ancilla_from_policy(
            &spectral,
            scenario.policy,
            scenario.explicit_ancilla.as_deref(),
        )?)
    } else {
        None
    };
    let degeneracy = if wants(Method::Degenerate) {
        Some(cluster_degeneracies(&spectral, scenario.tolerances.eps_deg)?)
    } else {
        None
    };

    // per-sample phase series
    let kin_series: Option<Vec<Option<f64>>> = wants(Method::Kinematic)
        .then(|| (0..n).map(|i| kinematic_phase(&spectral, i).gamma).collect());
    let gen_series: Option<Vec<Option<f64>>> = match &ancilla {
        Some(v) => Some(
            (0..n)
                .map(|i| generalized_phase(&spectral, v, i).map(|r| r.gamma))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let discrete_series: Option<Vec<Option<f64>>> = if wants(Method::UhlmannDiscrete) {
        Some(uhlmann_discrete_phases(&trajectory)?)
    } else {
        None
    };
    // residual series (need the ancilla)
    let (gen_res_series, uhl_res_series) = match &ancilla {
        Some(v) => {
            let per_branch: Vec<Vec<f64>> = (0..rank)
                .map(|k| pt_residual_generalized_samples(&spectral, v, k))
                .collect::<Result<Vec<_>>>()?;
            let max_per_sample: Vec<f64> = (0..n)
                .map(|i| per_branch.iter().map(|s| s[i]).fold(0.0, f64::max))
                .collect();
            (
                Some(max_per_sample),
                Some(pt_residual_uhlmann_samples(&spectral, v)?),
            )
        }
        None => (None, None),
    };

    // component columns: prefer the generalized method's components
    let component_reports: Option<Vec<PhaseReport>> = if let Some(v) = &ancilla {
        Some(
            (0..n)
                .map(|i| generalized_phase(&spectral, v, i))
                .collect::<Result<Vec<_>>>()?,
        )
    } else if wants(Method::Kinematic) {
        Some((0..n).map(|i| kinematic_phase(&spectral, i)).collect())
    } else {
        None
    };

    let kin_unwrapped = kin_series.as_deref().map(unwrap_phases);
    let gen_unwrapped = gen_series.as_deref().map(unwrap_phases);
    let discrete_unwrapped = discrete_series.as_deref().map(unwrap_phases);

    let mut columns = vec![
        "time".to_string(),
        "gamma_kinematic".to_string(),
        "gamma_generalized".to_string(),
        "gamma_uhlmann_discrete".to_string(),
        "pt_res_generalized_max".to_string(),
        "pt_res_uhlmann".to_string(),
    ];
    for k in 1..=rank {
        columns.push(format!("nu_{k}"));
    }
    for k in 1..=rank {
        columns.push(format!("gamma_comp_{k}"));
    }

    let row_indices: Vec<usize> = if final_only {
        vec![n - 1]
    } else {
        (0..n).collect()
    };
    let mut rows = Vec::with_capacity(row_indices.len());
    for &i in &row_indices {
        let mut row: Vec<Option<f64>> = vec![Some(spectral.grid().time(i))];
        row.push(kin_unwrapped.as_ref().and_then(|s| s[i]));
        row.push(gen_unwrapped.as_ref().and_then(|s| s[i]));
        row.push(discrete_unwrapped.as_ref().and_then(|s| s[i]));
        row.push(gen_res_series.as_ref().map(|s| s[i]));
        row.push(uhl_res_series.as_ref().map(|s| s[i]));
        match &component_reports {
            Some(reports) => {
                let comp = &reports[i].components;
                for k in 0..rank {
                    row.push(comp.get(k).map(|c| c.visibility));
                }
                for k in 0..rank {
                    row.push(comp.get(k).map(|c| c.phase));
                }
            }
            None => row.extend(std::iter::repeat(None).take(2 * rank)),
        }
        rows.push(row);
    }

    // final per-method outcomes
    let last = n - 1;
    let mut finals = Vec::new();
    for method in &scenario.methods {
        let outcome = match method {
            Method::Kinematic => {
                let rep = kinematic_phase(&spectral, last);
                outcome_from_report(
                    "kinematic",
                    &rep,
                    kin_unwrapped.as_ref().and_then(|s| s[last]),
                    None,
                    None,
                )
            }
            Method::Generalized => {
                let v = ancilla.as_ref().expect("ancilla built for generalized");
                let rep = generalized_phase(&spectral, v, last)?;
                let gen_max = gen_res_series
                    .as_ref()
                    .map(|s| s.iter().copied().fold(0.0, f64::max));
                let uhl_max = uhl_res_series
                    .as_ref()
                    .map(|s| s.iter().copied().fold(0.0, f64::max));
                outcome_from_report(
                    "generalized",
                    &rep,
                    gen_unwrapped.as_ref().and_then(|s| s[last]),
                    gen_max,
                    uhl_max,
                )
            }
            Method::UhlmannDiscrete => {
                let series = discrete_series.as_ref().expect("discrete series computed");
                let gamma = series[last];
                MethodOutcome {
                    method: "uhlmann_discrete".into(),
                    status: if gamma.is_some() { "ok" } else { "undefined" }.into(),
                    gamma_wrapped: gamma.map(wrap_phase),
                    gamma_unwrapped: discrete_unwrapped.as_ref().and_then(|s| s[last]),
                    components: Vec::new(),
                    pt_generalized_max: None,
                    pt_uhlmann_max: None,
                }
            }
            Method::Degenerate => {
                let deg = degeneracy.as_ref().expect("clusters built for degenerate");
                let rep = degenerate_phase(&spectral, deg, last)?;
                let res = degenerate_pt_residuals(&spectral, deg)?;
                let worst = res.iter().copied().fold(0.0, f64::max);
                outcome_from_report("degenerate", &rep, rep.gamma, Some(worst), None)
            }
        };
        finals.push(outcome);
    }

    // integrator diagnostics: trace/hermiticity from the trajectory, the
    // smallest eigenvalue over all samples from a dedicated sweep
    let traj_diag = trajectory.diagnostics();
    let mut min_eigenvalue = f64::MAX;
    for s in trajectory.samples() {
        let (vals, _) = eig_hermitian(s)?;
        min_eigenvalue = min_eigenvalue.min(*vals.last().expect("nonempty spectrum"));
    }
    let diagnostics = RunDiagnostics {
        trace_drift: traj_diag.trace_drift,
        hermiticity_drift: traj_diag.hermiticity_drift,
        min_eigenvalue,
        ancilla_generator_defect: ancilla.as_ref().and_then(|v| {
            (v.policy() == AncillaPolicy::Uhlmann).then(|| v.anti_hermitian_residue())
        }),
    };

    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default();

    let report = RunReport {
        scenario: scenario.name.clone(),
        timestamp,
        dimension: scenario.dimension,
        rank,
        steps: scenario.grid.steps(),
        t_final: scenario.grid.t_final(),
        ancilla_policy: scenario.policy.to_string(),
        methods: scenario.methods.iter().map(|m| m.name().to_string()).collect(),
        columns,
        rows,
        finals,
        diagnostics,
    };

    Ok(RunArtifacts {
        trajectory,
        spectral,
        ancilla,
        degeneracy,
        report,
    })
}

fn outcome_from_report(
    name: &str,
    rep: &PhaseReport,
    unwrapped: Option<f64>,
    pt_generalized_max: Option<f64>,
    pt_uhlmann_max: Option<f64>,
) -> MethodOutcome {
    MethodOutcome {
        method: name.into(),
        status: if rep.gamma.is_some() { "ok" } else { "undefined" }.into(),
        gamma_wrapped: rep.gamma.map(wrap_phase),
        gamma_unwrapped: unwrapped,
        components: rep
            .components
            .iter()
            .map(|c| ComponentOut {
                visibility: c.visibility,
                phase: c.phase,
            })
            .collect(),
        pt_generalized_max,
        pt_uhlmann_max,
    }
}
