//! Subcommands: each resolves a scenario, runs one solver path and writes CSV
//! series plus a manifest into its own directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::output::{self, fmt, ArtifactWriter, RunManifest, Table};
use super::scenario::Scenario;
use crate::analysis::{self, ConvergenceStudy, Scan};
use crate::bathnoise::{self, PsdAudit};
use crate::dynamics::{self, RunOutput};
use crate::error::{Error, Result};
use crate::exec::ExecPolicy;
use crate::grape::{self, ReplayResult};
use crate::heom::complexity;
use crate::linalg::{c, CMat4};
use crate::model::DensityMatrix;
use crate::nmr::{self, FidGrid, Readout, SpinSystem};

/// Flags shared by all subcommands; they replace the scenario values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub depth: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        if let Some(seed) = self.seed {
            s.ensemble.seed = seed;
            s.grape.seed = seed;
        }
        if let Some(n) = self.realizations {
            s.ensemble.realizations = n;
        }
        if let Some(d) = self.depth {
            s.heom.depth = Some(d);
        }
        s.validate()
    }
}

/// What a command printed and where it wrote.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub out_dir: PathBuf,
    pub lines: Vec<String>,
}

fn manifest(cmd: &str, scenario: Option<&Scenario>, seeds: Vec<u64>, policy: ExecPolicy) -> RunManifest {
    let cfg = scenario.map(|s| serde_json::to_value(s).expect("scenario serialises")).unwrap_or(json!(null));
    RunManifest::new(cmd, cfg, seeds, policy.is_parallel())
}

fn dir_for(out: &Path, s: &Scenario, cmd: &str) -> PathBuf {
    out.join(&s.name).join(cmd)
}

pub fn heom(s: &Scenario, policy: ExecPolicy) -> Result<RunOutput> {
    dynamics::simulate(&s.system()?, &s.heom_backend(), policy)
}

pub fn ensemble(s: &Scenario, policy: ExecPolicy) -> Result<RunOutput> {
    dynamics::simulate(&s.system()?, &s.ensemble_backend(), policy)
}

fn write_run(w: &mut ArtifactWriter, name: &str, run: &RunOutput) -> Result<()> {
    let table = output::trajectory_table(&run.times, &run.states, run.std_error.as_deref());
    w.write_table(&format!("{name}.csv"), &table)?;
    Ok(())
}

fn run_lines(name: &str, run: &RunOutput, tau: f64) -> Result<Vec<String>> {
    let eet = analysis::eet_time(&run.times, &run.populations(), tau)?;
    let mut lines = vec![format!(
        "{name}: {} points, final populations {:.4?}, transfer time {}",
        run.times.len(),
        run.states.last().map(|s| s.populations()).unwrap_or_default(),
        eet.time.map(|t| format!("{t:.4e} s")).unwrap_or_else(|| "not reached".into())
    )];
    lines.extend(run.diagnostics.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(lines)
}

pub fn cmd_heom(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let run = heom(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "heom"))?;
    write_run(&mut w, "heom", &run)?;
    // Timing stays in the manifest so the sidecar is reproducible byte for byte.
    let mut diag = serde_json::to_value(&run.diagnostics).expect("diagnostics serialise");
    diag.as_object_mut().map(|o| o.remove("runtime_s"));
    let sidecar = serde_json::to_vec_pretty(&diag).expect("diagnostics serialise");
    w.write_bytes("heom.json", &sidecar)?;
    let mut m = manifest("heom", Some(s), vec![], policy);
    m.diagnostics = serde_json::to_value(&run.diagnostics).unwrap();
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: run_lines("heom", &run, s.scan.tau)?,
    })
}

pub fn cmd_ensemble(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let run = ensemble(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "ensemble"))?;
    write_run(&mut w, "ensemble", &run)?;
    let mut m = manifest("ensemble", Some(s), vec![s.ensemble.seed], policy);
    m.diagnostics = serde_json::to_value(&run.diagnostics).unwrap();
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: run_lines("ensemble", &run, s.scan.tau)?,
    })
}

/// HEOM reference plus nested-ensemble deviations.
pub fn converge(s: &Scenario, policy: ExecPolicy) -> Result<(RunOutput, ConvergenceStudy)> {
    let reference = heom(s, policy)?;
    let study = analysis::convergence_study(
        &s.system()?,
        &s.ensemble.sizes,
        s.ensemble.seed,
        &reference.populations(),
        policy,
    )?;
    Ok((reference, study))
}

pub fn convergence_table(study: &ConvergenceStudy) -> Table {
    let mut t = Table::new(["realizations", "max_population_deviation", "std_error", "fit_c_over_sqrt_n"]);
    for ((&n, &d), &se) in study.sizes.iter().zip(&study.deviations).zip(&study.std_errors) {
        t.push(vec![n.to_string(), fmt(d), fmt(se), fmt(study.fit_c / (n as f64).sqrt())]);
    }
    t
}

pub fn cmd_converge(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let (reference, study) = converge(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "converge"))?;
    write_run(&mut w, "heom_reference", &reference)?;
    w.write_table("convergence.csv", &convergence_table(&study))?;
    let mut m = manifest("converge", Some(s), vec![s.ensemble.seed], policy);
    m.diagnostics = json!({ "reference": reference.diagnostics, "study": study });
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: vec![format!(
            "deviation vs N: {:?} -> {:.4?}; monotone {}; c/sqrt(N) fit c = {:.4}, R^2 = {:.3}",
            study.sizes, study.deviations, study.monotone, study.fit_c, study.r_squared
        )],
    })
}

pub fn grape_replay(s: &Scenario, policy: ExecPolicy) -> Result<ReplayResult> {
    let problem = s.system()?.ensemble_problem()?;
    grape::compile_and_replay(
        &problem,
        s.ensemble.seed,
        s.grape.realizations,
        s.grape.segment_points,
        &SpinSystem::default(),
        &s.grape.options(),
        policy,
    )
}

pub fn cmd_grape(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let r = grape_replay(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "grape"))?;
    let mut t = Table::new([
        "t_s[nmr]", "replay_rho11", "replay_rho22", "replay_rho33", "replay_rho44", "exact_rho11", "exact_rho22",
        "exact_rho33", "exact_rho44",
    ]);
    for k in 0..r.times.len() {
        let mut row = vec![fmt(r.times[k])];
        row.extend(r.replayed[k].iter().chain(&r.exact[k]).map(|x| fmt(*x)));
        t.push(row);
    }
    w.write_table("replay.csv", &t)?;
    let n_seg = r.fidelities.len() / r.realizations;
    let mut f = Table::new(["realization", "segment", "fidelity"]);
    for (i, x) in r.fidelities.iter().enumerate() {
        f.push(vec![(i / n_seg).to_string(), (i % n_seg).to_string(), fmt(*x)]);
    }
    w.write_table("fidelities.csv", &f)?;
    let mut m = manifest("grape", Some(s), vec![s.ensemble.seed, s.grape.seed], policy);
    m.diagnostics = json!({
        "min_fidelity": r.min_fidelity(),
        "max_population_error": r.max_population_error(),
    });
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: vec![format!(
            "{} segments compiled, min fidelity {:.6}, max replay population error {:.3e}",
            r.fidelities.len(),
            r.min_fidelity(),
            r.max_population_error()
        )],
    })
}

/// Random density matrix `A A^dagger / Tr` with complex Gaussian `A`.
pub fn random_density(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let mut g = || {
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let a = CMat4::from_fn(|_, _| c(g(), g()));
    let m = a * a.adjoint();
    let tr = crate::linalg::trace(&m).re;
    DensityMatrix::from_unchecked(m / c(tr, 0.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomographyReport {
    pub max_errors: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Noiseless round trip on `n` random states drawn from `seed`.
pub fn tomography(n: usize, seed: u64) -> Result<TomographyReport> {
    let spin = SpinSystem::default();
    let grid = FidGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = TomographyReport {
        max_errors: Vec::new(),
        residuals: Vec::new(),
    };
    for _ in 0..n {
        let rho = random_density(&mut rng);
        let t = nmr::tomography_round_trip(&rho, &spin, &grid, &Readout::TOMOGRAPHY_SET)?;
        report
            .max_errors
            .push(crate::linalg::max_abs_diff(t.rho.matrix(), rho.matrix()));
        report.residuals.push(t.residual);
    }
    Ok(report)
}

pub fn cmd_tomo(states: usize, seed: u64, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let r = tomography(states, seed)?;
    let mut w = ArtifactWriter::create(&out.join("tomo"))?;
    let mut t = Table::new(["state", "max_abs_error", "residual"]);
    for (i, (e, res)) in r.max_errors.iter().zip(&r.residuals).enumerate() {
        t.push(vec![i.to_string(), fmt(*e), fmt(*res)]);
    }
    w.write_table("tomography.csv", &t)?;
    let mut m = manifest("tomo", None, vec![seed], policy);
    m.config = json!({ "states": states, "readouts": Readout::TOMOGRAPHY_SET.map(|r| r.to_string()) });
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    let worst = r.max_errors.iter().copied().fold(0.0, f64::max);
    Ok(Summary {
        out_dir: dir,
        lines: vec![format!("{states} states reconstructed, worst element error {worst:.3e}")],
    })
}

pub fn noise_audit(s: &Scenario, policy: ExecPolicy) -> Result<PsdAudit> {
    bathnoise::psd_audit(&s.system()?.recipe()?, s.ensemble.realizations, s.ensemble.seed, policy)
}

pub fn cmd_noise_audit(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let a = noise_audit(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "noise-audit"))?;
    let mut t = Table::new(["w_rad_s[nmr]", "psd_empirical", "psd_target"]);
    for k in 0..a.frequencies.len() {
        t.push(vec![fmt(a.frequencies[k]), fmt(a.empirical[k]), fmt(a.target[k])]);
    }
    w.write_table("psd.csv", &t)?;
    let mut m = manifest("noise-audit", Some(s), vec![s.ensemble.seed], policy);
    m.diagnostics = json!({ "relative_l2": a.relative_l2, "trajectories": a.trajectories });
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: vec![format!(
            "{} trajectories, relative L2 deviation from target PSD {:.4}",
            a.trajectories, a.relative_l2
        )],
    })
}

pub fn scan_gamma(s: &Scenario, policy: ExecPolicy) -> Result<Scan> {
    if s.scan.gamma_hz.is_empty() {
        return Err(Error::Config("scan.gamma_hz is empty".into()));
    }
    analysis::scan(
        &s.scan.gamma_hz,
        |g| s.with_gamma_hz(g)?.system(),
        &s.scan_backend(),
        s.scan.tau,
        policy,
    )
}

pub fn scan_geometry(s: &Scenario, policy: ExecPolicy) -> Result<Scan> {
    if s.scan.r_angstrom.is_empty() {
        return Err(Error::Config("scan.r_angstrom is empty".into()));
    }
    analysis::scan(&s.scan.r_angstrom, |r| s.with_r(r).system(), &s.scan_backend(), s.scan.tau, policy)
}

pub fn scan_table(scan: &Scan, column: &str) -> Table {
    let mut t = Table::new([column, "eet_time_s[nmr]", "final_imbalance", "reached"]);
    for p in &scan.points {
        t.push(vec![
            fmt(p.parameter),
            p.eet.time.map(fmt).unwrap_or_else(|| "nan".into()),
            fmt(p.eet.final_imbalance),
            p.eet.reached().to_string(),
        ]);
    }
    t
}

fn write_scan(w: &mut ArtifactWriter, scan: &Scan, column: &str, prefix: &str) -> Result<()> {
    w.write_table(&format!("{prefix}.csv"), &scan_table(scan, column))?;
    for p in &scan.points {
        w.write_table(
            &format!("{prefix}_{}.csv", p.parameter),
            &output::population_table(&p.times, &p.populations),
        )?;
    }
    Ok(())
}

fn scan_lines(scan: &Scan, unit: &str) -> Vec<String> {
    let mut lines: Vec<String> = scan
        .points
        .iter()
        .map(|p| {
            format!(
                "{} {unit}: transfer time {}",
                p.parameter,
                p.eet.time.map(|t| format!("{t:.4e} s")).unwrap_or_else(|| "not reached".into())
            )
        })
        .collect();
    lines.push(match scan.best_parameter() {
        Some(b) => format!("fastest transfer at {b} {unit}"),
        None => "no point balanced within the window".into(),
    });
    lines
}

pub fn cmd_scan_gamma(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let scan = scan_gamma(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "scan-gamma"))?;
    let col = format!("gamma_hz[{}]", s.frame.label());
    write_scan(&mut w, &scan, &col, "scan_gamma")?;
    let mut m = manifest("scan-gamma", Some(s), vec![s.ensemble.seed], policy);
    m.diagnostics = json!({ "argmin": scan.best_parameter() });
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: scan_lines(&scan, "Hz"),
    })
}

pub fn cmd_scan_geometry(s: &Scenario, out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t0 = Instant::now();
    let scan = scan_geometry(s, policy)?;
    let mut w = ArtifactWriter::create(&dir_for(out, s, "scan-geometry"))?;
    write_scan(&mut w, &scan, "r_angstrom", "scan_geometry")?;
    let mut m = manifest("scan-geometry", Some(s), vec![s.ensemble.seed], policy);
    m.diagnostics = json!({ "argmin": scan.best_parameter() });
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    Ok(Summary {
        out_dir: dir,
        lines: scan_lines(&scan, "A"),
    })
}

pub fn complexity_table(rows: &[(u64, u64, u64)]) -> Result<Table> {
    let mut t = Table::new([
        "depth",
        "k",
        "n",
        "exact",
        "ln_exact",
        "ln_stirling_lower",
        "ln_stirling_central",
        "ln_stirling_upper",
        "bracket_contains",
    ]);
    for &(d, k, n) in rows {
        let exact = complexity::adm_count(d, k, n);
        let ln = complexity::ln_big(&exact);
        let (lo, mid, hi, ok) = if d >= 1 && k * n >= 1 {
            let s = complexity::adm_count_stirling(d, k, n)?;
            (fmt(s.ln_lower), fmt(s.ln_central), fmt(s.ln_upper), s.contains_ln(ln).to_string())
        } else {
            ("nan".into(), "nan".into(), "nan".into(), "n/a".into())
        };
        t.push(vec![d.to_string(), k.to_string(), n.to_string(), exact.to_string(), fmt(ln), lo, mid, hi, ok]);
    }
    Ok(t)
}

pub fn cmd_complexity(rows: &[(u64, u64, u64)], out: &Path, policy: ExecPolicy) -> Result<Summary> {
    let t = complexity_table(rows)?;
    let mut w = ArtifactWriter::create(&out.join("complexity"))?;
    w.write_table("complexity.csv", &t)?;
    let mut m = manifest("complexity", None, vec![], policy);
    m.config = json!({ "rows": rows });
    let dir = w.dir().to_path_buf();
    w.finish(m)?;
    let lines = t
        .rows
        .iter()
        .map(|r| format!("depth {} K {} N {}: {} ADMs, Stirling ln-bracket [{}, {}] contains: {}", r[0], r[1], r[2], r[3], r[5], r[7], r[8]))
        .collect();
    Ok(Summary { out_dir: dir, lines })
}
