//! Scenario execution and artifact writing.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{CheckSpec, Scenario};
use super::svg::{log_log_plot, Series};
use crate::coeffs::{CoefficientProfile, QuadratureConfig};
use crate::diagnose::{
    bump, conservation_defect, euclidean_offdiagonal_check, form_additivity_defect, invariance_defect,
    largetime_floor_check, offdiagonal_gaussian_check, ondiagonal_lower_check, resolvent_volume_scaling,
    separation_probe, smalltime_decay_fit, structure_check, wave_speed_check, Ball, CheckOutcome, CheckRecord,
    DiagnosticsReport, Environment, Status, Table, Witness,
};
use crate::error::{LabError, Result};
use crate::grid::{assemble_with, DiscreteOperator, Mesh};
use crate::metric::{distance_field, distance_field_from, holder_fit_1d, log_space, DistanceOptions};

/// One executed check instance.
#[derive(Debug, Clone)]
pub struct CheckResult {
    /// Stable key: position, kind and, with several ε, the ε value.
    pub id: String,
    pub epsilon: Option<f64>,
    pub outcome: CheckOutcome,
    pub runtime: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub report: DiagnosticsReport,
    pub results: Vec<CheckResult>,
    pub started: SystemTime,
    pub elapsed: f64,
    pub threads: usize,
}

impl ScenarioRun {
    /// 0 when nothing is violated, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.any_violated() {
            2
        } else {
            0
        }
    }

    pub fn result(&self, id_prefix: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.id.starts_with(id_prefix))
    }

    /// Records of every instance of `kind`.
    pub fn records_of(&self, kind: &str) -> Vec<&CheckRecord> {
        self.report.records.iter().filter(|r| check_kind(&r.check) == kind).collect()
    }
}

fn check_kind(id: &str) -> &str {
    let rest = id.split_once('-').map(|(_, r)| r).unwrap_or(id);
    rest.split('@').next().unwrap_or(rest)
}

struct Context<'a> {
    scenario: &'a Scenario,
    profile: &'a CoefficientProfile,
    mesh: &'a Mesh,
}

/// Runs every check. `threads = None` uses the global rayon pool.
pub fn execute(scenario: &Scenario, base_dir: Option<&Path>, threads: Option<usize>) -> Result<ScenarioRun> {
    scenario.validate()?;
    let pool = match threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| LabError::Resource(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let used = threads.unwrap_or_else(rayon::current_num_threads);
    match pool {
        Some(p) => p.install(|| execute_inner(scenario, base_dir, used)),
        None => execute_inner(scenario, base_dir, used),
    }
}

fn execute_inner(scenario: &Scenario, base_dir: Option<&Path>, threads: usize) -> Result<ScenarioRun> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let profile = scenario.profile(base_dir)?;
    let mesh = scenario.mesh(&profile)?;
    let operators: Vec<DiscreteOperator> = scenario
        .epsilons
        .par_iter()
        .map(|eps| assemble_with(&profile, &mesh, *eps, &scenario.mesh.options()))
        .collect::<Result<_>>()?;
    let ctx = Context { scenario, profile: &profile, mesh: &mesh };

    let several = scenario.epsilons.len() > 1;
    let mut jobs = Vec::new();
    for (i, check) in scenario.checks.iter().enumerate() {
        let base = format!("{i:02}-{}", check.kind());
        if check.profile_level() {
            jobs.push((base, check, None));
        } else {
            for (k, eps) in scenario.epsilons.iter().enumerate() {
                let id = if several { format!("{base}@eps={eps:e}") } else { base.clone() };
                jobs.push((id, check, Some(k)));
            }
        }
    }
    let mut results: Vec<CheckResult> = jobs
        .into_par_iter()
        .map(|(id, check, k)| {
            let t0 = Instant::now();
            let a = &operators[k.unwrap_or(0)];
            let eps = scenario.epsilons[k.unwrap_or(0)];
            let outcome = run_check(&ctx, check, a, eps).map_err(|e| annotate(&id, e))?;
            let runtime = t0.elapsed().as_secs_f64();
            let mut outcome = outcome;
            for r in &mut outcome.records {
                r.check = id.clone();
            }
            Ok(CheckResult { id, epsilon: k.map(|k| scenario.epsilons[k]), outcome, runtime })
        })
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| a.id.cmp(&b.id));

    let environment = Environment {
        dimension: mesh.dimension(),
        n: scenario.mesh.n,
        bbox: mesh.bbox().to_vec(),
        epsilons: scenario.epsilons.clone(),
        t_small: scenario.t_small.clone(),
        t_large: scenario.t_large.clone(),
        seed: scenario.seed,
    };
    let records = results.iter().flat_map(|r| r.outcome.records.clone()).collect();
    let report = DiagnosticsReport::new(&scenario.name, environment, records);
    Ok(ScenarioRun {
        scenario: scenario.clone(),
        report,
        results,
        started,
        elapsed: clock.elapsed().as_secs_f64(),
        threads,
    })
}

fn annotate(id: &str, e: LabError) -> LabError {
    match e {
        LabError::Argument(m) => LabError::Argument(format!("check {id}: {m}")),
        LabError::Validation(m) => LabError::Validation(format!("check {id}: {m}")),
        LabError::Inconclusive(m) => LabError::Inconclusive(format!("check {id}: {m}")),
        other => other,
    }
}

fn run_check(ctx: &Context, check: &CheckSpec, a: &DiscreteOperator, eps: f64) -> Result<CheckOutcome> {
    let s = ctx.scenario;
    let (profile, mesh) = (ctx.profile, ctx.mesh);
    let started = Instant::now();
    match check {
        CheckSpec::Conservation { times } => conservation_defect(a, &s.times(times)),
        CheckSpec::Structure { t } => structure_check(a, *t, s.seed),
        CheckSpec::Classify { expect } => {
            let c = profile.classify(&QuadratureConfig::default())?;
            let anchor = "the 1D integrability of 1/c at a zero decides closability and separation";
            let note = format!("{:?}; cut points {:?}", c.verdict, c.cut_points);
            let rec = match expect {
                Some(v) => CheckRecord::verdict(
                    "classify",
                    anchor,
                    c.verdict == *v,
                    Witness { indices: vec![], t: None, values: c.cut_points.clone() },
                ),
                None => CheckRecord::new("classify", anchor, Status::Fitted),
            };
            let mut table = Table::new("cut_points", &["cut"]);
            for p in &c.cut_points {
                table.push(vec![*p]);
            }
            Ok(CheckOutcome::new(vec![rec.count(c.cut_points.len()).note(note)], vec![table]).stamp("classify", started))
        }
        CheckSpec::OffdiagonalGaussian { balls, times } => {
            let balls: Vec<Ball> = balls
                .par_iter()
                .map(|b| {
                    let src = mesh.nearest_index(&b.center);
                    let field = distance_field_from(profile, mesh, &[src], eps, &DistanceOptions::midpoint())?;
                    Ok(Ball { radius: b.radius, field })
                })
                .collect::<Result<_>>()?;
            offdiagonal_gaussian_check(a, &balls, &s.times(times))
        }
        CheckSpec::EuclideanOffdiagonal { sets, times } => {
            let masks: Vec<Vec<bool>> = sets.iter().map(|r| r.mask(profile, mesh)).collect::<Result<_>>()?;
            euclidean_offdiagonal_check(a, &masks, profile.norm() + eps, &s.times(times))
        }
        CheckSpec::WaveSpeed { center, radius, times, beyond_cut, cut_times, config } => {
            let phi0 = bump(mesh, center, *radius);
            let sources: Vec<usize> = (0..phi0.len()).filter(|i| phi0[*i] != 0.0).collect();
            if sources.is_empty() {
                return Err(LabError::arg("the wave source misses every grid point"));
            }
            let field = distance_field_from(profile, mesh, &sources, eps, &DistanceOptions::default())?;
            let mut out = wave_speed_check(a, &field, &phi0, times, None, config)?;
            if let Some(region) = beyond_cut {
                let mask = region.mask(profile, mesh)?;
                let cut = wave_speed_check(a, &field, &phi0, cut_times, Some(&mask), config)?;
                out.records.extend(cut.records.into_iter().filter(|r| r.name == "wave_cut"));
                out.tables.extend(cut.tables.into_iter().map(|mut t| {
                    t.name = "wave_cut".into();
                    t
                }));
            }
            Ok(out)
        }
        CheckSpec::Separation { probe } => {
            let p = separation_probe(profile, probe)?;
            Ok(p.outcome)
        }
        CheckSpec::Invariance { omega, t, tol } => invariance_defect(a, &omega.mask(profile, mesh)?, *t, s.seed, *tol),
        CheckSpec::InvarianceRefinement { omega, t, levels } => {
            let bbox = mesh.bbox().to_vec();
            let defects: Vec<(usize, f64, f64)> = levels
                .par_iter()
                .map(|&n| {
                    let m = Mesh::new(mesh.dimension(), bbox.clone(), n)?;
                    let a = assemble_with(profile, &m, eps, &s.mesh.options())?;
                    let out = invariance_defect(&a, &omega.mask(profile, &m)?, *t, s.seed, f64::INFINITY)?;
                    Ok((n, m.h(), out.records[0].value.unwrap_or(f64::NAN)))
                })
                .collect::<Result<_>>()?;
            let mut table = Table::new("invariance_refinement", &["n", "h", "defect"]);
            for (n, h, d) in &defects {
                table.push(vec![*n as f64, *h, *d]);
            }
            let d: Vec<f64> = defects.iter().map(|x| x.2).collect();
            let worst = d.windows(2).enumerate().find(|(_, w)| !(w[1] < w[0])).map(|(k, _)| k + 1);
            let last = d[d.len() - 1];
            let rec = CheckRecord::verdict(
                "invariance_refinement",
                "invariance of the sublevel set emerges as the mesh refines",
                worst.is_none(),
                Witness { indices: worst.into_iter().collect(), t: Some(*t), values: d.clone() },
            )
            .value(last)
            .margin(d[0] - last)
            .count(d.len());
            Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("invariance_refinement", started))
        }
        CheckSpec::FormAdditivity { omega, tol } => form_additivity_defect(a, &omega.mask(profile, mesh)?, s.seed, *tol),
        CheckSpec::SmalltimeDecay { gamma, sampling, times } => {
            let g = gamma
                .or(profile.predicted_gamma())
                .ok_or_else(|| LabError::arg("no predicted order for the small-time fit"))?;
            smalltime_decay_fit(a, &s.times(times), g, profile.norm() + eps, sampling)
        }
        CheckSpec::LargetimeFloor { mode, sampling, times } => largetime_floor_check(a, *mode, &s.times(times), sampling),
        CheckSpec::ResolventVolume { origin, radii, m } => {
            let field = distance_field(profile, mesh, origin, eps)?;
            resolvent_volume_scaling(a, &field, &log_space(radii.min, radii.max, radii.count), *m)
        }
        CheckSpec::OndiagonalLower { t, diameter, centers, separated } => {
            ondiagonal_lower_check(a, *t, *diameter, centers, *separated)
        }
        CheckSpec::HolderFit { origin, range, count, expect, tol } => {
            let fit = holder_fit_1d(profile, *origin, *range, *count, eps)?;
            let anchor = "d_C(x; y) compared with |x - y|^gamma near a zero";
            let rec = match expect {
                Some(g) => CheckRecord::verdict(
                    "holder_fit",
                    anchor,
                    (fit.gamma_hat - g).abs() <= *tol,
                    Witness { indices: vec![], t: None, values: vec![fit.gamma_hat, *g] },
                )
                .margin(tol - (fit.gamma_hat - g).abs()),
                None => CheckRecord::new("holder_fit", anchor, Status::Fitted),
            };
            let rec = rec.value(fit.gamma_hat).stderr(fit.stderr).count(fit.samples);
            let mut table = Table::new("holder_fit", &["gamma_hat", "a_hat", "residual", "stderr", "samples"]);
            table.push(vec![fit.gamma_hat, fit.a_hat, fit.residual, fit.stderr, fit.samples as f64]);
            Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("holder_fit", started))
        }
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    scenario: &'a str,
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
    threads: usize,
    version: &'a str,
    checks: Vec<CheckTiming<'a>>,
}

#[derive(Serialize)]
struct CheckTiming<'a> {
    id: &'a str,
    runtime_seconds: f64,
}

fn unix(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

/// Writes report.md, report.json, records.csv, one CSV per table, SVG plots
/// of time series, the resolved scenario and metadata.json. Timestamps and
/// runtimes appear only in metadata.json.
pub fn write_artifacts(run: &ScenarioRun, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, text: &str| -> Result<()> {
        let p = dir.join(name);
        write(&p, text)?;
        written.push(p);
        Ok(())
    };
    emit("report.md", &run.report.to_markdown())?;
    emit("report.json", &run.report.to_json()?)?;
    emit("scenario.json", &run.scenario.to_json()?)?;
    let records = dir.join("records.csv");
    run.report.write_records_csv(&records)?;
    let mut extra = vec![records];
    for r in &run.results {
        for t in &r.outcome.tables {
            let stem = sanitize(&format!("{}_{}", r.id, t.name));
            let csv = dir.join(format!("{stem}.csv"));
            t.write_csv(&csv)?;
            extra.push(csv);
            if let Some(svg) = plot_table(&format!("{} / {}", r.id, t.name), t) {
                let p = dir.join(format!("{stem}.svg"));
                write(&p, &svg)?;
                extra.push(p);
            }
        }
    }
    let finished = SystemTime::now();
    let meta = Metadata {
        scenario: &run.scenario.name,
        started_unix: unix(run.started),
        finished_unix: unix(finished),
        elapsed_seconds: run.elapsed,
        threads: run.threads,
        version: env!("CARGO_PKG_VERSION"),
        checks: run.results.iter().map(|r| CheckTiming { id: &r.id, runtime_seconds: r.runtime }).collect(),
    };
    let meta_path = dir.join("metadata.json");
    write(&meta_path, &serde_json::to_string_pretty(&meta)?)?;
    written.extend(extra);
    written.push(meta_path);
    Ok(written)
}

/// Tables keyed by a leading `t` column with at least two rows become plots
/// of every other column.
fn plot_table(title: &str, t: &Table) -> Option<String> {
    if t.columns.first().map(String::as_str) != Some("t") || t.rows.len() < 2 {
        return None;
    }
    let x = t.column("t")?;
    let series: Vec<Series> =
        t.columns[1..].iter().filter_map(|c| Some(Series { label: c.as_str(), y: t.column(c)? })).collect();
    log_log_plot(title, "t", &x, &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_kind_strips_position_and_epsilon() {
        assert_eq!(check_kind("03-offdiagonal_gaussian@eps=1e-3"), "offdiagonal_gaussian");
        assert_eq!(check_kind("00-conservation"), "conservation");
    }

    #[test]
    fn sanitized_names_are_portable() {
        assert_eq!(sanitize("01-wave_speed@eps=1e-3_wave"), "01-wave_speed_eps_1e-3_wave");
    }
}
