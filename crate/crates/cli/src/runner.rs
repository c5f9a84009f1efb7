//! Experiment execution. All computation (realizations, λ points) fans out on
//! the rayon pool first; a single write stage then emits every file, with
//! `manifest.txt` last.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use netjam_core::analysis::{write_phase_results_csv, write_slope_table_csv};
use netjam_core::netgen::write_edge_list;
use netjam_core::traffic::write_snapshot_csv;
use netjam_core::*;

use crate::config::{ExperimentConfig, Kind};

type OutFile = (String, String);

pub fn run_experiment(cfg: &ExperimentConfig, config_path: &Path) -> Result<Vec<String>> {
    let start = Instant::now();
    let files = match cfg.workers {
        0 => compute(cfg)?,
        w => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .context("building the worker pool")?
            .install(|| compute(cfg))?,
    };
    let out = Path::new(&cfg.out_dir);
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory `{}`", out.display()))?;
    let mut names = Vec::new();
    for (name, contents) in &files {
        let path = out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing `{}`", path.display()))?;
        names.push(name.clone());
    }
    let manifest = manifest_text(cfg, config_path, &names, start.elapsed().as_secs_f64());
    fs::write(out.join("manifest.txt"), manifest)
        .with_context(|| format!("writing `{}`", out.join("manifest.txt").display()))?;
    names.push("manifest.txt".to_string());
    Ok(names)
}

fn manifest_text(
    cfg: &ExperimentConfig,
    config_path: &Path,
    files: &[String],
    wall_s: f64,
) -> String {
    let mut text = String::new();
    text.push_str("# netjam run manifest\n");
    text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("config_file = {}\n", config_path.display()));
    text.push_str(&format!("wall_time_s = {wall_s:.3}\n"));
    text.push_str(
        "seed_streams = graph=1, traffic=2, point=3 (splitmix64-derived from master_seed)\n",
    );
    text.push_str(&format!("files = {}\n", files.join(", ")));
    text.push_str("\n# resolved configuration (`# default` marks parser-applied values)\n");
    for line in cfg.manifest_lines() {
        text.push_str(&line);
        text.push('\n');
    }
    text
}

fn compute(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    match cfg.kind {
        Kind::Generate => generate(cfg),
        Kind::Profile => profile(cfg),
        Kind::Timeseries => timeseries(cfg),
        Kind::Betac => betac(cfg),
        Kind::Curve => curve(cfg),
        Kind::Theory => theory(cfg),
        Kind::Figure => figure(cfg),
    }
}

fn shape_at(cfg: &ExperimentConfig, p: f64) -> GraphShape {
    GraphShape {
        n: cfg.n,
        m: cfg.m,
        p,
    }
}

fn template(cfg: &ExperimentConfig, lambda: f64) -> TrafficTemplate {
    TrafficTemplate {
        lambda,
        approach: cfg.approach,
        hubs: cfg.hubs,
    }
}

fn search_params(cfg: &ExperimentConfig) -> SearchParams {
    SearchParams {
        beta_lo: cfg.beta_lo,
        beta_hi: cfg.beta_hi,
        tol: cfg.tol,
        epsilon: cfg.epsilon,
        t_max: cfg.t_max,
        window: cfg.fit_window,
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV writers emit UTF-8"))
}

fn generate(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let ensemble = build_ensemble(&shape_at(cfg, cfg.p), cfg.realizations, cfg.master_seed)?;
    let mut files = Vec::new();
    let mut summary = String::from("r,seed,edges,k_max,h\n");
    for (r, inst) in ensemble.iter().enumerate() {
        let edges = csv_string(|buf| {
            write_edge_list(&inst.graph, &cfg.growth_config(inst.seed), buf)
        })?;
        files.push((format!("graph_r{r:03}.edges"), edges));
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            r,
            inst.seed,
            inst.graph.edge_count(),
            inst.graph.k_max(),
            mean_path_length(&inst.graph, &inst.dist)
        ));
    }
    files.push(("graphs.csv".to_string(), summary));
    Ok(files)
}

fn profile(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let spec = PlanSpec {
        lambda: cfg.lambda,
        beta: cfg.beta,
        approach: cfg.approach,
        hubs: cfg.hubs,
    };
    let samples = collect_snapshots(
        &shape_at(cfg, cfg.p),
        &spec,
        cfg.t_max,
        cfg.realizations,
        cfg.master_seed,
    )?;
    let profile = degree_profile(&samples)?;
    Ok(vec![(
        "profile.csv".to_string(),
        csv_string(|buf| profile.write_csv(buf))?,
    )])
}

fn timeseries(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let ensemble = build_ensemble(&shape_at(cfg, cfg.p), cfg.realizations, cfg.master_seed)?;
    let spec = PlanSpec {
        lambda: cfg.lambda,
        beta: cfg.beta,
        approach: cfg.approach,
        hubs: cfg.hubs,
    };
    let runs: Result<Vec<TimeSeries>, EnsembleError> = ensemble
        .par_iter()
        .enumerate()
        .map(|(r, inst)| {
            let plan = spec.resolve(&inst.graph)?;
            let opts = RunOptions {
                t_max: cfg.t_max,
                seed: derive_seed(cfg.master_seed, r as u64, STREAM_TRAFFIC),
                snapshot_times: cfg.snapshots.clone(),
            };
            Ok(run(&inst.graph, &inst.dist, &plan, &opts))
        })
        .collect();
    let runs = runs?;

    let mut files = Vec::new();
    for (r, series) in runs.iter().enumerate() {
        files.push((
            format!("series_r{r:03}.csv"),
            csv_string(|buf| series.write_csv(buf))?,
        ));
        for snap in &series.snapshots {
            files.push((
                format!("snapshot_r{r:03}_t{}.csv", snap.t),
                csv_string(|buf| write_snapshot_csv(&ensemble[r].graph, snap, buf))?,
            ));
        }
    }

    // ensemble mean, folded in realization order (worker-count invariant)
    let steps = cfg.t_max as usize;
    let mut mean = MeanSeries {
        created_cum: vec![0.0; steps],
        delivered_cum: vec![0.0; steps],
        in_flight: vec![0.0; steps],
        n1: vec![0.0; steps],
        n2: vec![0.0; steps],
        realizations: runs.len(),
    };
    let scale = 1.0 / runs.len() as f64;
    for series in &runs {
        for i in 0..steps {
            mean.created_cum[i] += series.created_cum[i] as f64 * scale;
            mean.delivered_cum[i] += series.delivered_cum[i] as f64 * scale;
            mean.in_flight[i] += series.in_flight[i] as f64 * scale;
            mean.n1[i] += series.n1[i] * scale;
            mean.n2[i] += series.n2[i] * scale;
        }
    }
    files.push((
        "mean_timeseries.csv".to_string(),
        csv_string(|buf| mean.write_csv(buf))?,
    ));
    Ok(files)
}

fn betac(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let search = search_params(cfg);
    let ensemble = build_ensemble(&shape_at(cfg, cfg.p), cfg.realizations, cfg.master_seed)?;
    let point_master = derive_seed(cfg.master_seed, 0, STREAM_POINT);
    let result = match find_beta_c(&template(cfg, cfg.lambda), &ensemble, &search, point_master) {
        Ok(r) => r,
        Err(AnalysisError::FreeAtLow { slope_lo, .. }) if search.beta_lo == 0.0 => PhaseResult {
            lambda: cfg.lambda,
            beta_c: 0.0,
            beta_lo: 0.0,
            beta_hi: 0.0,
            slope_lo,
            slope_hi: slope_lo,
            slopes: vec![(0.0, slope_lo)],
            realizations: cfg.realizations,
            tol: search.tol,
        },
        Err(e) => {
            return Err(anyhow!(e)).with_context(|| {
                format!("β_c search at λ = {} failed", cfg.lambda)
            })
        }
    };
    let results = [result];
    Ok(vec![
        (
            "phase.csv".to_string(),
            csv_string(|buf| write_phase_results_csv(&results, buf))?,
        ),
        (
            "slopes.csv".to_string(),
            csv_string(|buf| write_slope_table_csv(&results, buf))?,
        ),
    ])
}

fn curve(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let results = beta_c_curve(
        &cfg.lambdas,
        |lambda| template(cfg, lambda),
        &shape_at(cfg, cfg.p),
        cfg.realizations,
        &search_params(cfg),
        cfg.master_seed,
    )
    .context("β_c curve failed")?;
    Ok(vec![
        (
            "curve.csv".to_string(),
            csv_string(|buf| write_phase_results_csv(&results, buf))?,
        ),
        (
            "slopes.csv".to_string(),
            csv_string(|buf| write_slope_table_csv(&results, buf))?,
        ),
    ])
}

/// Calibrate α₁ on the curve point at `calibrate_lambda` and tabulate
/// predictions against every measured point.
fn theory_report(
    p: f64,
    m: usize,
    n: usize,
    results: &[PhaseResult],
    calibrate_lambda: f64,
    stats: &StructuralStats,
) -> Result<TheoryReport> {
    let anchor = results
        .iter()
        .find(|r| r.lambda == calibrate_lambda)
        .ok_or_else(|| anyhow!("calibration λ = {calibrate_lambda} not on the measured curve"))?;
    if anchor.beta_c <= 0.0 {
        bail!(
            "calibration point λ = {calibrate_lambda} is below the congestion onset \
             (measured β_c = 0); calibrate at a larger λ"
        );
    }
    let cal = calibrate_alpha1(anchor.beta_c, anchor.lambda, stats.h_mean, stats.kmax_mean)?;
    let params = TheoryParams {
        p,
        m,
        n,
        h: stats.h_mean,
        k_max: stats.kmax_mean,
        alpha1: cal.alpha1,
    };
    let rows = results
        .iter()
        .map(|r| TheoryRow::new(r.lambda, r.beta_c, params.beta_c(r.lambda)))
        .collect();
    Ok(TheoryReport { params, rows })
}

fn theory(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let shape = shape_at(cfg, cfg.p);
    let stats = structural_stats(&shape, cfg.realizations, cfg.master_seed)?;
    let results = beta_c_curve(
        &cfg.lambdas,
        |lambda| template(cfg, lambda),
        &shape,
        cfg.realizations,
        &search_params(cfg),
        cfg.master_seed,
    )
    .context("β_c curve failed")?;
    let report = theory_report(cfg.p, cfg.m, cfg.n, &results, cfg.calibrate_lambda, &stats)?;
    Ok(vec![
        (
            "theory_params.csv".to_string(),
            csv_string(|buf| report.write_params_csv(buf))?,
        ),
        (
            "theory_table.csv".to_string(),
            csv_string(|buf| report.write_table_csv(buf))?,
        ),
        (
            "curve.csv".to_string(),
            csv_string(|buf| write_phase_results_csv(&results, buf))?,
        ),
        (
            "slopes.csv".to_string(),
            csv_string(|buf| write_slope_table_csv(&results, buf))?,
        ),
    ])
}

fn figure(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    match cfg.figure {
        1 => figure1(cfg),
        2 => figure2(cfg),
        3 => figure3(cfg),
        4 => figure4(cfg),
        5 => figure5(cfg),
        _ => unreachable!("validated"),
    }
}

/// One `beta,k,mean_n,stderr,count` block per β over a shared graph ensemble.
fn profile_block(
    ensemble: &[GraphInstance],
    cfg: &ExperimentConfig,
    approach: Approach,
    betas: &[f64],
) -> Result<String> {
    let mut out = String::from("beta,k,mean_n,stderr,count\n");
    for &beta in betas {
        let spec = PlanSpec {
            lambda: cfg.lambda,
            beta,
            approach,
            hubs: cfg.hubs,
        };
        let samples = snapshot_over(ensemble, &spec, cfg.t_max, cfg.master_seed)?;
        let profile = degree_profile(&samples)?;
        for b in &profile.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                beta, b.degree, b.mean_n, b.stderr, b.count
            ));
        }
    }
    Ok(out)
}

fn figure1(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let betas = [0.0, 0.05, 0.1];
    let mut files = Vec::new();
    for (tag, p) in [("p0", 0.0), ("p1", 1.0)] {
        let ensemble = build_ensemble(&shape_at(cfg, p), cfg.realizations, cfg.master_seed)?;
        files.push((
            format!("fig1_{tag}.csv"),
            profile_block(&ensemble, cfg, Approach::Normal, &betas)?,
        ));
    }
    Ok(files)
}

fn figure2(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let betas = [0.05, 0.1];
    let ensemble = build_ensemble(&shape_at(cfg, cfg.p), cfg.realizations, cfg.master_seed)?;
    Ok(vec![
        (
            "fig2_normal.csv".to_string(),
            profile_block(&ensemble, cfg, Approach::Normal, &betas)?,
        ),
        (
            "fig2_efficient.csv".to_string(),
            profile_block(&ensemble, cfg, Approach::Efficient, &betas)?,
        ),
    ])
}

fn figure3(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let ensemble = build_ensemble(&shape_at(cfg, cfg.p), cfg.realizations, cfg.master_seed)?;
    let mut files = Vec::new();
    for beta in [0.05, 0.059, 0.07] {
        let spec = PlanSpec {
            lambda: cfg.lambda,
            beta,
            approach: Approach::Efficient,
            hubs: cfg.hubs,
        };
        let mean = mean_series(&ensemble, &spec, cfg.t_max, cfg.master_seed)?;
        files.push((
            format!("fig3_beta{beta}.csv"),
            csv_string(|buf| mean.write_csv(buf))?,
        ));
    }
    Ok(files)
}

// λ grids behind the β_c(λ) panels. The efficient curve stops at λ = 0.012:
// above that, capacity added only at the top hubs no longer compensates the
// load on the busiest unboosted nodes and β_c departs from the normal curve.
const FIG4_P0: &[f64] = &[
    0.001, 0.003, 0.004, 0.006, 0.008, 0.010, 0.012, 0.014, 0.016, 0.018, 0.020,
];
const FIG4_P0_EFFICIENT: &[f64] = &[0.001, 0.003, 0.004, 0.006, 0.008, 0.010, 0.012];
const FIG4_P1: &[f64] = &[0.005, 0.007, 0.009, 0.011, 0.012, 0.013, 0.015, 0.017, 0.019];
const FIG4_CALIBRATE_P0: f64 = 0.01;
const FIG4_CALIBRATE_P1: f64 = 0.012;

fn figure4(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let shape0 = shape_at(cfg, 0.0);
    let shape1 = shape_at(cfg, 1.0);
    let search = search_params(cfg);
    let curve_at = |lambdas: &[f64], approach: Approach, shape: &GraphShape| {
        beta_c_curve(
            lambdas,
            |lambda| TrafficTemplate {
                lambda,
                approach,
                hubs: cfg.hubs,
            },
            shape,
            cfg.realizations,
            &search,
            cfg.master_seed,
        )
    };
    let normal0 = curve_at(FIG4_P0, Approach::Normal, &shape0)
        .context("p = 0 normal curve failed")?;
    let efficient0 = curve_at(FIG4_P0_EFFICIENT, Approach::Efficient, &shape0)
        .context("p = 0 efficient curve failed")?;
    let normal1 = curve_at(FIG4_P1, Approach::Normal, &shape1)
        .context("p = 1 normal curve failed")?;

    let stats0 = structural_stats(&shape0, cfg.realizations, cfg.master_seed)?;
    let stats1 = structural_stats(&shape1, cfg.realizations, cfg.master_seed)?;
    let report0 = theory_report(0.0, cfg.m, cfg.n, &normal0, FIG4_CALIBRATE_P0, &stats0)?;
    let report1 = theory_report(1.0, cfg.m, cfg.n, &normal1, FIG4_CALIBRATE_P1, &stats1)?;

    Ok(vec![
        (
            "fig4_p0_normal.csv".to_string(),
            csv_string(|buf| write_phase_results_csv(&normal0, buf))?,
        ),
        (
            "fig4_p0_efficient.csv".to_string(),
            csv_string(|buf| write_phase_results_csv(&efficient0, buf))?,
        ),
        (
            "fig4_p1_normal.csv".to_string(),
            csv_string(|buf| write_phase_results_csv(&normal1, buf))?,
        ),
        (
            "fig4_params_p0.csv".to_string(),
            csv_string(|buf| report0.write_params_csv(buf))?,
        ),
        (
            "fig4_theory_p0.csv".to_string(),
            csv_string(|buf| report0.write_table_csv(buf))?,
        ),
        (
            "fig4_params_p1.csv".to_string(),
            csv_string(|buf| report1.write_params_csv(buf))?,
        ),
        (
            "fig4_theory_p1.csv".to_string(),
            csv_string(|buf| report1.write_table_csv(buf))?,
        ),
    ])
}

const FIG5_PS: &[f64] = &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

fn figure5(cfg: &ExperimentConfig) -> Result<Vec<OutFile>> {
    let mut out = String::from("p,h,h_err,kmax,kmax_err\n");
    for &p in FIG5_PS {
        let stats = structural_stats(&shape_at(cfg, p), cfg.realizations, cfg.master_seed)?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p, stats.h_mean, stats.h_stderr, stats.kmax_mean, stats.kmax_stderr
        ));
    }
    Ok(vec![("fig5.csv".to_string(), out)])
}
