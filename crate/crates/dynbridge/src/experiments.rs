//! Experiment orchestration for the CLI: runs the selected checks, writes
//! plot-ready CSV files, a deterministic manifest (config hash, seeds,
//! per-check statistics) and a human-readable summary with wall time.
//!
//! Output layout: <out_dir>/<run-id>/{manifest,summary.txt,reports.csv,*.csv}
//! with run-id = config-hash prefix + seed, so identical configs land in
//! identical directories with byte-identical manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::filtering::{filter_run, simulate_conditioned_pair, FilterOptions};
use crate::kernels::{drift_h, ell, h_surv, q_killed};
use crate::noise::NoiseBundle;
use crate::paths::{export_pair_csv, simulate_x, simulate_z, uniform_grid, XOptions};
use crate::verify::{
    self, check_brownian, check_comparisons, check_filtering, check_kernels, check_r_law,
    check_zero_identity, TestReport,
};

#[derive(Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub out_dir: PathBuf,
    pub reports: Vec<TestReport>,
    pub all_passed: bool,
    pub wall_seconds: f64,
}

/// Execute the experiment selected in `config` and write all artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let run_id = config.run_id()?;
    let out_dir = Path::new(&config.run.out_dir).join(&run_id);
    fs::create_dir_all(&out_dir)?;

    let selected = config.run.experiment;
    let mut reports = Vec::new();
    let everything = selected == Experiment::All;

    if everything || selected == Experiment::ValidateTimechange {
        reports.extend(run_validate_timechange(config, &out_dir)?);
    }
    if everything || selected == Experiment::KernelsTable {
        reports.extend(run_kernels_table(config, &out_dir)?);
    }
    if everything || selected == Experiment::Simulate {
        reports.extend(run_simulate(config, &out_dir)?);
    }
    if everything || selected == Experiment::HittingDist {
        reports.extend(run_hitting_dist(config, &out_dir)?);
    }
    if everything || selected == Experiment::VerifyBm {
        reports.extend(check_brownian(
            &config.timechange,
            config.simulation.n_paths,
            config.run.seed,
            &config.simulation.controller(),
        )?);
    }
    if everything || selected == Experiment::VerifyZero {
        reports.extend(run_verify_zero(config)?);
    }
    if everything || selected == Experiment::Compare {
        reports.extend(check_comparisons(
            &config.timechange,
            config.simulation.n_paths.min(1000),
            config.run.seed,
        )?);
        reports.extend(check_r_law(
            &config.timechange,
            config.simulation.n_paths,
            config.run.seed,
            config.simulation.dt_base,
        )?);
    }
    if everything || selected == Experiment::FilterCompare {
        reports.extend(run_filter_compare(config, &out_dir)?);
    }

    reports.sort_by(|a, b| a.name.cmp(&b.name));
    let all_passed = reports.iter().all(|r| r.passed);
    let wall_seconds = start.elapsed().as_secs_f64();

    write_reports_csv(&out_dir.join("reports.csv"), &reports)?;
    write_manifest(&out_dir.join("manifest"), config, &run_id, &reports)?;
    write_summary(
        &out_dir.join("summary.txt"),
        &run_id,
        &reports,
        wall_seconds,
    )?;

    Ok(RunOutcome {
        run_id,
        out_dir,
        reports,
        all_passed,
        wall_seconds,
    })
}

fn run_validate_timechange(config: &RunConfig, out_dir: &Path) -> Result<Vec<TestReport>> {
    let spec = &config.timechange;
    let epsilon = spec.t_max.min(1.0);
    let report = spec.validate(epsilon)?;
    let mut file = fs::File::create(out_dir.join("timechange.csv"))?;
    writeln!(file, "t,sigma_sq,v,gap")?;
    for i in 1..=200 {
        let t = spec.t_max * i as f64 / 200.0;
        let v = spec.v_of(t)?;
        writeln!(file, "{t:.9},{:.12e},{v:.12e},{:.12e}", spec.sigma_sq(t), v - t)?;
    }
    let flag = |ok: bool| if ok { 0.0 } else { 1.0 };
    Ok(vec![
        TestReport::new(
            "timechange/strict_gap",
            flag(report.strict_gap_ok),
            0.0,
            1,
            config.run.seed,
            "V(t) > t on a log grid",
        ),
        TestReport::new(
            "timechange/inv_gap_sq",
            flag(report.inv_gap_sq_ok),
            0.0,
            1,
            config.run.seed,
            format!(
                "square-inverse-gap integral over (0, {epsilon}] = {:.6e}",
                report.inv_gap_sq_integral
            ),
        ),
    ])
}

fn run_kernels_table(config: &RunConfig, out_dir: &Path) -> Result<Vec<TestReport>> {
    let mut file = fs::File::create(out_dir.join("kernels.csv"))?;
    writeln!(file, "t,a,ell,h_surv,q_t_1_a,drift_h")?;
    for &t in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for i in 1..=40 {
            let a = 0.1 * i as f64;
            writeln!(
                file,
                "{t},{a:.2},{:.12e},{:.12e},{:.12e},{:.12e}",
                ell(t, a)?,
                h_surv(t, a)?,
                q_killed(t, 1.0, a)?,
                drift_h(t, a)?
            )?;
        }
    }
    check_kernels(&config.timechange, config.run.seed)
}

fn run_simulate(config: &RunConfig, out_dir: &Path) -> Result<Vec<TestReport>> {
    let spec = &config.timechange;
    let ctrl = config.simulation.controller();
    let horizon = config.run.horizon;
    let grid = uniform_grid(horizon, ctrl.dt_base);
    let n = config.simulation.n_paths;
    let seed = config.run.seed;

    use rayon::prelude::*;
    let x1: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseBundle::new(seed, k);
            let z = simulate_z(spec, &mut noise, &grid, true)?;
            let x = simulate_x(spec, &mut noise, &z, &ctrl, horizon, XOptions::default())?;
            x.value_at(horizon)
                .ok_or_else(|| Error::Numeric(format!("no terminal value on path {k}")))
        })
        .collect::<Result<_>>()?;

    for k in 0..5.min(n as u64) {
        let mut noise = NoiseBundle::new(seed, k);
        let z = simulate_z(spec, &mut noise, &grid, true)?;
        let x = simulate_x(spec, &mut noise, &z, &ctrl, horizon, XOptions::default())?;
        let mut file = fs::File::create(out_dir.join(format!("path_{k}.csv")))?;
        export_pair_csv(&mut file, &z, &x)?;
    }

    let mean = x1.iter().sum::<f64>() / n as f64;
    // X_horizon ~ N(1, horizon): the mean must sit within 4 standard errors
    let se = (horizon / n as f64).sqrt();
    Ok(vec![TestReport::new(
        "simulate/mean_x_at_horizon",
        (mean - 1.0).abs(),
        4.0 * se,
        n,
        seed,
        format!("mean X_{horizon} = {mean:.5}"),
    )])
}

fn run_hitting_dist(config: &RunConfig, out_dir: &Path) -> Result<Vec<TestReport>> {
    let spec = &config.timechange;
    let t_window = spec.t_max.min(2.0);
    let hits = verify::hitting_samples(
        spec,
        t_window,
        config.simulation.dt_base,
        config.simulation.n_paths,
        config.run.seed,
    )?;
    let mut vtaus: Vec<f64> = hits.iter().flatten().map(|&(_, v)| v).collect();
    vtaus.sort_by(|a, b| a.total_cmp(b));
    let n = hits.len() as f64;
    let v_max = spec.v_of(t_window)?;
    let mut file = fs::File::create(out_dir.join("hitting.csv"))?;
    writeln!(file, "t,empirical_survival,h_t_1")?;
    for i in 1..=200 {
        let t = v_max * i as f64 / 200.0;
        let below = vtaus.partition_point(|&v| v <= t);
        writeln!(
            file,
            "{t:.9},{:.6},{:.12e}",
            1.0 - below as f64 / n,
            h_surv(t, 1.0)?
        )?;
    }
    verify::check_hitting_law_from(spec, &hits, config.run.seed)
}

fn run_verify_zero(config: &RunConfig) -> Result<Vec<TestReport>> {
    let spec = &config.timechange;
    let ctrl = config.simulation.controller();
    let main = check_zero_identity(spec, config.simulation.n_paths, config.run.seed, &ctrl, false)?;
    let ablated = check_zero_identity(
        spec,
        config.simulation.n_paths.min(2000),
        config.run.seed,
        &ctrl,
        true,
    )?;
    // the ablation is a guard against a vacuous check: it must FAIL
    let detect = TestReport::new(
        "zero_identity/ablation_detects",
        if ablated.passed { 1.0 } else { 0.0 },
        0.0,
        ablated.n,
        config.run.seed,
        format!("ablated run: {}", ablated.summary_line()),
    );
    Ok(vec![main, detect])
}

fn run_filter_compare(config: &RunConfig, out_dir: &Path) -> Result<Vec<TestReport>> {
    let spec = &config.timechange;
    let ctrl = config.simulation.controller();
    let t = config.run.horizon;
    let dt = config.simulation.dt_base;
    let seed = config.run.seed;

    // trace CSV for the first observation path
    let grid = uniform_grid(t * (1.0 - 1e-3), dt);
    let mut noise = NoiseBundle::new(seed, 0);
    let (obs, _) = simulate_conditioned_pair(spec, t, &grid, &ctrl, &mut noise)?;
    let mut filter_noise = NoiseBundle::new(seed ^ 0x7a5c_93d1, 0);
    let opts = FilterOptions {
        closed_form_every: 50,
        ..FilterOptions::default()
    };
    let out = filter_run(
        spec,
        &obs,
        config.simulation.n_particles,
        &ctrl,
        &opts,
        &mut filter_noise,
    )?;
    let mut file = fs::File::create(out_dir.join("filter_trace.csv"))?;
    writeln!(
        file,
        "s,posterior_mean,posterior_sd,ess,pi_kappa,closed_form_mean,resampled"
    )?;
    for step in &out.trace {
        writeln!(
            file,
            "{:.6},{:.9e},{:.9e},{:.2},{:.9e},{:.9e},{}",
            step.s,
            step.posterior_mean,
            step.posterior_sd,
            step.ess,
            step.pi_kappa,
            step.closed_form_mean,
            step.resampled
        )?;
    }

    check_filtering(spec, t, dt, config.simulation.n_particles, 20, seed, &ctrl)
}

fn write_reports_csv(path: &Path, reports: &[TestReport]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "name,statistic,threshold,n,seed,passed,details")?;
    for r in reports {
        writeln!(
            file,
            "{},{:.12e},{:.6e},{},{},{},\"{}\"",
            r.name, r.statistic, r.threshold, r.n, r.seed, r.passed, r.details
        )?;
    }
    Ok(())
}

/// Deterministic manifest: identical config + seed produce byte-identical
/// content (wall time lives in summary.txt instead).
fn write_manifest(
    path: &Path,
    config: &RunConfig,
    run_id: &str,
    reports: &[TestReport],
) -> Result<()> {
    let hash = config.hash()?;
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let mut file = fs::File::create(path)?;
    writeln!(file, "run_id {run_id}")?;
    writeln!(file, "config_sha256 {hex}")?;
    writeln!(file, "master_seed {}", config.run.seed)?;
    writeln!(file, "experiment {}", config.run.experiment.as_str())?;
    for r in reports {
        writeln!(
            file,
            "check {} seed={} statistic={:.17e} threshold={:.17e} passed={}",
            r.name, r.seed, r.statistic, r.threshold, r.passed
        )?;
    }
    Ok(())
}

fn write_summary(
    path: &Path,
    run_id: &str,
    reports: &[TestReport],
    wall_seconds: f64,
) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "run {run_id} completed in {wall_seconds:.1}s")?;
    for r in reports {
        writeln!(file, "{}", r.summary_line())?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    writeln!(file, "{} checks, {failed} failed", reports.len())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn small_config(experiment: Experiment, dir: &Path) -> RunConfig {
        let mut config = RunConfig::default();
        config.simulation.n_paths = 300;
        config.simulation.n_particles = 300;
        config.run.experiment = experiment;
        config.run.out_dir = dir.to_string_lossy().into_owned();
        config
    }

    #[test]
    fn validate_timechange_experiment_writes_artifacts() {
        let dir = tempdir("validate");
        let config = small_config(Experiment::ValidateTimechange, &dir);
        let outcome = run(&config).unwrap();
        assert!(outcome.all_passed, "{:#?}", outcome.reports);
        assert!(outcome.out_dir.join("timechange.csv").exists());
        assert!(outcome.out_dir.join("manifest").exists());
        assert!(outcome.out_dir.join("reports.csv").exists());
        assert!(outcome.out_dir.join("summary.txt").exists());
    }

    #[test]
    fn manifest_is_byte_identical_across_runs() {
        let dir = tempdir("manifest");
        let config = small_config(Experiment::HittingDist, &dir);
        let a = run(&config).unwrap();
        let bytes_a = fs::read(a.out_dir.join("manifest")).unwrap();
        let b = run(&config).unwrap();
        let bytes_b = fs::read(b.out_dir.join("manifest")).unwrap();
        assert_eq!(a.run_id, b.run_id);
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn simulate_experiment_smoke() {
        let dir = tempdir("simulate");
        let config = small_config(Experiment::Simulate, &dir);
        let outcome = run(&config).unwrap();
        assert!(outcome.all_passed, "{:#?}", outcome.reports);
        assert!(outcome.out_dir.join("path_0.csv").exists());
    }

    fn tempdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "dynbridge-test-{tag}-{}",
            std::process::id()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }
}
