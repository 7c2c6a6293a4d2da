//! Subcommand dispatch and artifact emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fraclayer::expansion::{
    build_recovery_sequence, compute_m1_small_s, compute_psi, counterexample_eps_ladder,
    counterexample_grid, fit_expansion, heteroclinic, m1_large_s, omega_grid, recovery_layers,
    run_counterexample, sweep_s_to_half, CounterexampleReport, ExpansionReport, LayerConfig,
    PsiReport, SweepReport,
};
use fraclayer::funcrep::{BinaryPhase, Datum, GridFunction, Interval};
use fraclayer::potential::DoubleWell;
use fraclayer::solvers::{
    solve_boundary_layer, solve_m_eps, LayerProfile, MEpsResult, SolveOptions, TraceRow,
};
use fraclayer::validation::{validate, ValidationReport};
use fraclayer::FracError;

use crate::config::{RunConfig, Subcommand, Value};
use crate::output::{csv, to_json, write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub max_iters: usize,
    pub tol_pg: f64,
    pub tol_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub potential: String,
    pub grid: String,
    pub nodes: usize,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MEpsSummary {
    pub eps: f64,
    pub value: f64,
    pub value_f1: f64,
    pub converged: bool,
    pub best_init: usize,
    pub start_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRun {
    pub fit: ExpansionReport,
    pub runs: Vec<MEpsSummary>,
    /// `|m_ε/ε - m₁| / |m₁|` per rung.
    pub gaps: Vec<f64>,
    pub phase: BinaryPhase,
    pub c_star: Option<f64>,
    pub psi: Vec<PsiReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub eps: f64,
    pub rho: f64,
    pub scale_ratio: f64,
    pub f1: f64,
    /// `(F^{(1)}_ε(v_ε) - target) / target`.
    pub rel_gap: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRun {
    pub phase: BinaryPhase,
    pub c_star: f64,
    pub psi_left: PsiReport,
    pub psi_right: PsiReport,
    /// `c_⋆ Per(E, Ω) + Ψ(left) + Ψ(right)`.
    pub target: f64,
    pub rows: Vec<RecoveryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunResult {
    Heteroclinic(LayerProfile),
    Layer(LayerProfile),
    Psi(PsiReport),
    MEps(MEpsResult),
    Expansion(ExpansionRun),
    Counterexample(CounterexampleReport),
    Recovery(RecoveryRun),
    SweepHalf(SweepReport),
    Validate(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub subcommand: Subcommand,
    pub config: BTreeMap<String, Value>,
    pub provenance: Provenance,
    pub converged: bool,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub subcommand: String,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

/// Exit status and the files written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub error: Option<ErrorReport>,
}

struct Output {
    report: Report,
    files: Vec<(&'static str, String)>,
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        max_iters: cfg.usize("max_iters"),
        tol_pg: cfg.f64("tol_pg"),
        tol_energy: cfg.f64("tol_energy"),
        ..SolveOptions::default()
    }
}

fn layer_config(cfg: &RunConfig) -> LayerConfig {
    LayerConfig {
        l: cfg.f64("l"),
        h_min: cfg.f64("h_min"),
        growth: cfg.f64("growth"),
        solve: solve_options(cfg),
    }
}

fn omega(cfg: &RunConfig) -> Interval {
    let o = cfg.list("omega");
    Interval::new(o[0], o[1])
}

fn datum(cfg: &RunConfig) -> Datum {
    match cfg.text("datum") {
        "constant" => Datum::constant(cfg.f64("datum_value")),
        _ => Datum::Step {
            at: cfg.f64("datum_at"),
            left: cfg.f64("datum_left"),
            right: cfg.f64("datum_right"),
        },
    }
}

fn r_ladder(cfg: &RunConfig) -> Vec<f64> {
    let r0 = cfg.f64("r_min");
    (0..cfg.usize("r_count")).map(|k| r0 * 2f64.powi(k as i32)).collect()
}

fn phase(cfg: &RunConfig) -> Result<BinaryPhase, FracError> {
    BinaryPhase::new(omega(cfg), cfg.list("jumps").to_vec(), cfg.f64("left_sign"))
}

fn profile_csv(u: &GridFunction) -> String {
    csv(
        &["x", "value"],
        u.grid().nodes().iter().zip(u.values()).map(|(x, v)| vec![*x, *v]),
    )
}

fn trace_csv(t: &[TraceRow]) -> String {
    csv(
        &["iter", "energy", "pgnorm"],
        t.iter().map(|r| vec![r.iter as f64, r.energy, r.pgnorm]),
    )
}

fn ladder_csv(rows: impl IntoIterator<Item = (f64, f64)>) -> String {
    csv(
        &["eps", "m_eps", "m_eps_over_eps"],
        rows.into_iter().map(|(e, m)| vec![e, m, m / e]),
    )
}

fn psi_csv(p: &PsiReport) -> String {
    let totals = p.totals();
    csv(
        &["r", "psi1", "psi2", "potential", "total"],
        (0..p.r_ladder.len())
            .map(|i| vec![p.r_ladder[i], p.psi1_r[i], p.psi2_r[i], p.potential_r[i], totals[i]]),
    )
}

fn layer_grid(lc: &LayerConfig, half: bool) -> String {
    format!(
        "graded [{}, {}] toward 0, h_min {}, growth {}, h_max {}",
        -lc.l,
        if half { 0.0 } else { lc.l },
        lc.h_min,
        lc.growth,
        lc.l / 100.0
    )
}

fn execute(cfg: &RunConfig, w: &DoubleWell) -> Result<Output, FracError> {
    let tolerances = Tolerances {
        max_iters: cfg.usize("max_iters"),
        tol_pg: cfg.f64("tol_pg"),
        tol_energy: cfg.f64("tol_energy"),
    };
    let mut files: Vec<(&'static str, String)> = Vec::new();
    let (result, converged, grid, nodes) = match cfg.subcommand {
        Subcommand::Heteroclinic => {
            let lc = layer_config(cfg);
            let p = heteroclinic(cfg.f64("s"), w, &lc)?;
            files.push(("profile.csv", profile_csv(&p.profile)));
            files.push(("trace.csv", trace_csv(&p.trace)));
            let n = p.profile.grid().len();
            let ok = p.converged;
            (RunResult::Heteroclinic(p), ok, layer_grid(&lc, false), n)
        }
        Subcommand::Layer => {
            let lc = layer_config(cfg);
            let p = solve_boundary_layer(
                cfg.f64("s"),
                cfg.f64("gamma"),
                cfg.f64("sign"),
                w,
                &lc.half_grid()?,
                &lc.solve,
            )?;
            files.push(("profile.csv", profile_csv(&p.profile)));
            files.push(("trace.csv", trace_csv(&p.trace)));
            let n = p.profile.grid().len();
            let ok = p.converged;
            (RunResult::Layer(p), ok, layer_grid(&lc, true), n)
        }
        Subcommand::Psi => {
            let ladder = r_ladder(cfg);
            let lc = layer_config(cfg);
            let lc = lc.clone().with_l(lc.l.max(2.0 * ladder.last().unwrap()));
            let p = compute_psi(cfg.f64("s"), cfg.f64("gamma"), cfg.f64("sign"), w, &ladder, &lc)?;
            files.push(("psi_ladder.csv", psi_csv(&p)));
            let n = lc.half_grid()?.len();
            let ok = p.converged;
            (RunResult::Psi(p), ok, layer_grid(&lc, true), n)
        }
        Subcommand::MEps => {
            let (om, g, eps) = (omega(cfg), datum(cfg), cfg.list("eps")[0]);
            let grid = omega_grid(&om, &g, eps, cfg.f64("h_rel"))?;
            let r = solve_m_eps(
                cfg.f64("s"),
                eps,
                &om,
                &g,
                cfg.f64("kappa"),
                w,
                &grid,
                &solve_options(cfg),
            )?;
            files.push(("ladder.csv", ladder_csv([(eps, r.value)])));
            files.push(("profile.csv", profile_csv(&r.argmin)));
            files.push(("trace.csv", trace_csv(&r.trace)));
            let desc = format!("graded on Ω, h_min {} eps", cfg.f64("h_rel"));
            let ok = r.converged;
            (RunResult::MEps(r), ok, desc, grid.len())
        }
        Subcommand::Expansion => {
            let run = expansion(cfg, w)?;
            let ok = run.runs.iter().all(|r| r.converged);
            files.push((
                "ladder.csv",
                ladder_csv(run.runs.iter().map(|r| (r.eps, r.value))),
            ));
            let desc = format!("graded on Ω per ε, h_min {} eps", cfg.f64("h_rel"));
            (RunResult::Expansion(run), ok, desc, 0)
        }
        Subcommand::Counterexample => {
            let s = cfg.f64("s");
            let h_min = cfg.f64("h_min");
            let grid = counterexample_grid(h_min)?;
            let mut eps = cfg.list("eps").to_vec();
            if eps.is_empty() {
                let pre = run_counterexample(s, &[], &grid, w)?;
                eps = counterexample_eps_ladder(
                    s,
                    pre.sigma_c,
                    pre.omega_c,
                    cfg.f64("delta_max"),
                    cfg.usize("eps_count"),
                );
            }
            let r = run_counterexample(s, &eps, &grid, w)?;
            files.push((
                "counterexample.csv",
                csv(
                    &[
                        "eps",
                        "delta_star_numeric",
                        "delta_star_formula",
                        "f_numeric",
                        "f_formula",
                        "defect_numeric",
                        "defect_formula",
                        "ratio",
                    ],
                    r.rows.iter().map(|c| {
                        vec![
                            c.eps,
                            c.delta_star_numeric,
                            c.delta_star_formula,
                            c.f_numeric,
                            c.f_formula,
                            c.defect_numeric,
                            c.defect_formula,
                            c.ratio,
                        ]
                    }),
                ),
            ));
            let desc = format!("graded [-1, 1] toward 0, ±1/4, ±1/2, ±1, h_min {h_min}");
            (RunResult::Counterexample(r), true, desc, grid.len())
        }
        Subcommand::Recovery => {
            let (run, last) = recovery(cfg, w)?;
            files.push((
                "recovery.csv",
                csv(
                    &["eps", "rho", "f1", "target", "rel_gap"],
                    run.rows.iter().map(|r| vec![r.eps, r.rho, r.f1, run.target, r.rel_gap]),
                ),
            ));
            files.push(("profile.csv", profile_csv(&last)));
            let ok = run.psi_left.converged && run.psi_right.converged;
            let desc = format!("graded on Ω per ε, h_min {} eps", cfg.f64("h_rel"));
            (RunResult::Recovery(run), ok, desc, last.grid().len())
        }
        Subcommand::SweepHalf => {
            let lc = layer_config(cfg);
            let win = cfg.list("window");
            let grid = lc.half_grid()?;
            let r = sweep_s_to_half(
                cfg.f64("gamma"),
                w,
                cfg.list("s_list"),
                &grid,
                &lc.solve,
                (win[0], win[1]),
            )?;
            files.push((
                "sweep.csv",
                csv(
                    &["s", "energy", "decay_exponent", "dist_prev", "dist_half"],
                    r.rows.iter().map(|x| {
                        vec![
                            x.s,
                            x.energy,
                            x.decay_exponent.unwrap_or(f64::NAN),
                            x.dist_prev.unwrap_or(f64::NAN),
                            x.dist_half,
                        ]
                    }),
                ),
            ));
            let ok = r.rows.iter().all(|x| x.converged);
            (RunResult::SweepHalf(r), ok, layer_grid(&lc, true), grid.len())
        }
        Subcommand::Validate => {
            let r = validate(w, cfg.usize("seed") as u64)?;
            if !r.all_passed() {
                let names: Vec<&str> = r.failed().iter().map(|c| c.name.as_str()).collect();
                return Err(FracError::PreconditionViolated(format!(
                    "validation checks failed: {}",
                    names.join("; ")
                )));
            }
            (RunResult::Validate(r), true, "fixed test grids".to_string(), 0)
        }
    };
    Ok(Output {
        report: Report {
            subcommand: cfg.subcommand,
            config: cfg.physical(),
            provenance: Provenance {
                potential: w.name().to_string(),
                grid,
                nodes,
                tolerances,
            },
            converged,
            result,
        },
        files,
    })
}

fn expansion(cfg: &RunConfig, w: &DoubleWell) -> Result<ExpansionRun, FracError> {
    let s = cfg.f64("s");
    let (om, g) = (omega(cfg), datum(cfg));
    let eps = cfg.list("eps").to_vec();
    let opts = solve_options(cfg);
    let mut runs = Vec::new();
    for &e in &eps {
        let grid = omega_grid(&om, &g, e, cfg.f64("h_rel"))?;
        let r = solve_m_eps(s, e, &om, &g, cfg.f64("kappa"), w, &grid, &opts)?;
        runs.push(MEpsSummary {
            eps: e,
            value: r.value,
            value_f1: r.value_f1,
            converged: r.converged,
            best_init: r.best_init,
            start_values: r.start_values,
        });
    }
    let (m1, phase, c_star, psi) = if s < 0.5 && (s - 0.5).abs() > 1e-12 {
        let (m1, e) = compute_m1_small_s(&om, &g, s, cfg.usize("max_jumps"))?;
        (m1, e, None, vec![])
    } else {
        let e = phase(cfg)?;
        let ladder = r_ladder(cfg);
        let lc = layer_config(cfg);
        let lc = lc.clone().with_l(lc.l.max(2.0 * ladder.last().unwrap()));
        let layers = recovery_layers(s, &e, &g, w, &lc)?;
        let (m1, pl, pr) = m1_large_s(&e, &layers, w, &ladder)?;
        (m1, e, Some(layers.u0.energy), vec![pl, pr])
    };
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let fit = fit_expansion(&eps, &values, s, Some(m1))?;
    let gaps = runs
        .iter()
        .map(|r| (r.value_f1 - m1).abs() / m1.abs())
        .collect();
    Ok(ExpansionRun {
        fit,
        runs,
        gaps,
        phase,
        c_star,
        psi,
    })
}

fn recovery(cfg: &RunConfig, w: &DoubleWell) -> Result<(RecoveryRun, GridFunction), FracError> {
    let s = cfg.f64("s");
    let g = datum(cfg);
    let e = phase(cfg)?;
    let ladder = r_ladder(cfg);
    let lc = layer_config(cfg);
    let lc = lc.clone().with_l(lc.l.max(2.0 * ladder.last().unwrap()));
    let layers = recovery_layers(s, &e, &g, w, &lc)?;
    let (target, pl, pr) = m1_large_s(&e, &layers, w, &ladder)?;
    let rho = cfg.list("rho").first().copied();
    let mut rows = Vec::new();
    let mut last = None;
    for &eps in cfg.list("eps") {
        let r = build_recovery_sequence(s, eps, rho, &e, &g, w, &layers, cfg.f64("h_rel"))?;
        rows.push(RecoveryRow {
            eps,
            rho: r.rho,
            scale_ratio: r.scale_ratio,
            f1: r.f1,
            rel_gap: (r.f1 - target) / target,
            warnings: r.warnings,
        });
        last = Some(r.v);
    }
    let last = last.ok_or_else(|| FracError::InvalidParameter("empty eps ladder".into()))?;
    Ok((
        RecoveryRun {
            phase: e,
            c_star: layers.u0.energy,
            psi_left: pl,
            psi_right: pr,
            target,
            rows,
        },
        last,
    ))
}

fn exit_code_for(e: &FracError) -> i32 {
    match e {
        FracError::NotConverged(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_FAILED,
    }
}

/// Write `error.json` into `dir`, creating it when needed.
pub fn write_error(dir: &Path, err: &ErrorReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write(dir, "error.json", &to_json(err).expect("error report serializes"))
}

/// Run one configuration and write its artifacts into the `out` directory.
pub fn run(cfg: &RunConfig) -> std::io::Result<RunOutcome> {
    let out_dir = PathBuf::from(cfg.text("out"));
    std::fs::create_dir_all(&out_dir)?;
    let _ = std::fs::remove_file(out_dir.join("error.json"));
    let w = DoubleWell::by_name(cfg.text("potential")).expect("potential checked at parse");
    let name = cfg.subcommand.name().to_string();
    match execute(cfg, &w) {
        Ok(out) => {
            let mut files = vec!["report.json".to_string()];
            write(&out_dir, "report.json", &to_json(&out.report).map_err(std::io::Error::other)?)?;
            for (f, text) in &out.files {
                write(&out_dir, f, text)?;
                files.push(f.to_string());
            }
            let error = (!out.report.converged).then(|| ErrorReport {
                subcommand: name,
                kind: "NotConverged".into(),
                message: "at least one solve stopped before reaching its tolerance".into(),
                exit_code: EXIT_NOT_CONVERGED,
            });
            if let Some(e) = &error {
                write_error(&out_dir, e)?;
                files.push("error.json".into());
            }
            Ok(RunOutcome {
                exit_code: if error.is_some() { EXIT_NOT_CONVERGED } else { EXIT_OK },
                out_dir,
                files,
                error,
            })
        }
        Err(e) => {
            let err = ErrorReport {
                subcommand: name,
                kind: e.kind().into(),
                message: e.to_string(),
                exit_code: exit_code_for(&e),
            };
            write_error(&out_dir, &err)?;
            Ok(RunOutcome {
                exit_code: err.exit_code,
                out_dir,
                files: vec!["error.json".into()],
                error: Some(err),
            })
        }
    }
}
