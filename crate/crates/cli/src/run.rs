//! Command implementations behind the `ksrg` binary.
//!
//! Each subcommand is a thin orchestration layer over the core crate:
//! `phase` prints the exponent report, `sample` writes one graph, and
//! `experiment` runs a Monte Carlo plan and writes `results.csv` +
//! `fit.json` + `meta.json` into the output directory; `plot` re-reads those
//! files and renders `plot.svg`. Output bytes are a pure function of the
//! effective config: replicate work is farmed out to a thread pool, but the
//! merge order is fixed, so the thread count never changes a result file.

use crate::config::{effective_text, parse_config, RunConfig};
use crate::plot;
use ksrg_core::experiments::{run_scaling_experiment, ExperimentPlan, ExperimentResult};
use ksrg_core::graphgen::generate_cellgrid;
use ksrg_core::params::compute_exponents;
use ksrg_core::pointprocess::{sample_vertices, BoxSpec};
use ksrg_core::seed::derive_seed;
use ksrg_core::{Error, ExperimentKind, ExperimentRow, ScalingFit};
use serde_json::json;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Subcommand selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmd {
    Phase,
    Sample,
    Experiment,
    Plot,
}

/// Model errors plus I/O failures, mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    Model(Error),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl CliError {
    /// 1 = validation/parse/I-O, 2 = capacity, 3 = insufficient events.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(Error::Capacity(_)) => 2,
            CliError::Model(Error::InsufficientEvents(_)) => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Load the config file, apply overrides, and run the subcommand.
pub fn execute(cmd: Cmd, config_path: &Path, overrides: &[(String, String)]) -> CliResult<()> {
    let file_text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Io(config_path.to_path_buf(), e))?;
    let cfg = parse_config(&effective_text(&file_text, overrides))?;
    match cmd {
        Cmd::Phase => {
            println!("{}", phase_json(&cfg)?);
        }
        Cmd::Sample => {
            let out = run_sample(&cfg)?;
            println!(
                "sampled {} vertices and {} edges at volume {}",
                out.n_vertices, out.n_edges, out.volume
            );
            println!("wrote {} and {}", out.vertex_path.display(), out.edge_path.display());
        }
        Cmd::Experiment => {
            let threads = resolve_threads(&cfg, std::env::var("KSRG_THREADS").ok().as_deref())?;
            let result = run_experiment_files(&cfg, threads)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            for fit in &result.fits {
                let pred = fit
                    .predicted_slope
                    .map(|p| format!(", predicted {p:.6}"))
                    .unwrap_or_default();
                println!(
                    "fit [{}] vs [{}]: slope {:.6}{pred}, r2 {:.4}",
                    fit.y_transform, fit.x_transform, fit.slope, fit.r2
                );
            }
            println!("wrote results.csv, fit.json, meta.json to {}", cfg.out.display());
        }
        Cmd::Plot => {
            let svg_path = run_plot(&cfg)?;
            println!("wrote {}", svg_path.display());
        }
    }
    Ok(())
}

/// `KSRG_THREADS` beats the config; otherwise the config value (which
/// defaults to the machine's core count).
pub fn resolve_threads(cfg: &RunConfig, env_value: Option<&str>) -> Result<usize, Error> {
    match env_value {
        Some(s) => match s.parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(Error::RejectDomain(format!(
                "KSRG_THREADS must be a positive integer, got `{s}`"
            ))),
        },
        None => Ok(cfg.threads),
    }
}

/// The exponent report as pretty JSON.
pub fn phase_json(cfg: &RunConfig) -> Result<String, Error> {
    let report = compute_exponents(&cfg.params)?;
    Ok(serde_json::to_string_pretty(&report).expect("report serialization cannot fail"))
}

/// What [`run_sample`] produced and where.
pub struct SampleOutput {
    pub volume: f64,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub vertex_path: PathBuf,
    pub edge_path: PathBuf,
}

/// Sample one graph at the smallest grid volume and write
/// `vertices.txt` (commented header lines) and `edges.txt` (`u v` lines).
pub fn run_sample(cfg: &RunConfig) -> CliResult<SampleOutput> {
    let &volume = cfg.n_grid.first().ok_or_else(|| {
        Error::RejectDomain("sample requires n_grid (the first entry is used)".into())
    })?;
    let spec = BoxSpec::new(volume, cfg.params.d, cfg.enlargement)?;
    // Same derivation as replicate 0 of lane 0 of an experiment, so a sample
    // reproduces exactly what an experiment's first replicate sees.
    let r_seed = derive_seed(cfg.seed, 0);
    let vertices = sample_vertices(&spec, &cfg.params, derive_seed(r_seed, 0))?;
    let graph = generate_cellgrid(vertices, &cfg.params, spec, None, derive_seed(r_seed, 2))?;

    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(cfg.out.clone(), e))?;
    let vertex_path = cfg.out.join("vertices.txt");
    let edge_path = cfg.out.join("edges.txt");
    let mut vertex_buf = Vec::new();
    graph.write_vertex_list(&mut vertex_buf).expect("writing to memory cannot fail");
    fs::write(&vertex_path, &vertex_buf).map_err(|e| CliError::Io(vertex_path.clone(), e))?;
    let mut edge_buf = Vec::new();
    graph.write_edge_list(&mut edge_buf).expect("writing to memory cannot fail");
    fs::write(&edge_path, &edge_buf).map_err(|e| CliError::Io(edge_path.clone(), e))?;
    Ok(SampleOutput {
        volume,
        n_vertices: graph.n_vertices(),
        n_edges: graph.n_edges(),
        vertex_path,
        edge_path,
    })
}

/// Build the experiment plan a config describes.
pub fn plan_from_config(cfg: &RunConfig) -> Result<ExperimentPlan, Error> {
    let kind = cfg.experiment.ok_or_else(|| {
        Error::RejectDomain("config is missing required key `experiment`".into())
    })?;
    let replicates = cfg
        .replicates
        .ok_or_else(|| Error::RejectDomain("`replicates` is required for experiments".into()))?;
    if cfg.n_grid.is_empty() {
        return Err(Error::RejectDomain("`n_grid` is required for experiments".into()));
    }
    let mut plan = ExperimentPlan::new(kind, cfg.params);
    plan.n_grid = cfg.n_grid.clone();
    plan.replicates = replicates;
    plan.seed = cfg.seed;
    plan.enlargement = cfg.enlargement;
    plan.rho = cfg.rho;
    plan.ell_max = cfg.ell_max;
    if !cfg.k_grid.is_empty() {
        plan.k_grid = cfg.k_grid.clone();
    }
    plan.half = cfg.half;
    plan.beta_grid = cfg.beta_grid.clone();
    Ok(plan)
}

/// Run the experiment on a dedicated pool and write the three output files.
pub fn run_experiment_files(cfg: &RunConfig, threads: usize) -> CliResult<ExperimentResult> {
    let plan = plan_from_config(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| {
        Error::RejectDomain(format!("could not build a {threads}-thread worker pool: {e}"))
    })?;
    let result = pool.install(|| run_scaling_experiment(&plan))?;

    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(cfg.out.clone(), e))?;
    let csv_path = cfg.out.join("results.csv");
    fs::write(&csv_path, results_csv(&result.rows)).map_err(|e| CliError::Io(csv_path, e))?;
    let fit_path = cfg.out.join("fit.json");
    let fit_json = serde_json::to_string_pretty(&result.fits).expect("fit serialization");
    fs::write(&fit_path, fit_json + "\n").map_err(|e| CliError::Io(fit_path, e))?;
    let meta_path = cfg.out.join("meta.json");
    fs::write(&meta_path, meta_json(cfg, threads, &result))
        .map_err(|e| CliError::Io(meta_path, e))?;
    Ok(result)
}

/// Rows as CSV: '.' decimals, '\n' line endings, no quoting (statistic names
/// contain no commas by construction).
pub fn results_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("n,statistic,value,ci_low,ci_high,replicates\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.statistic, r.value, r.ci_low, r.ci_high, r.replicates
        ));
    }
    out
}

/// Parse a `results.csv` back into rows.
pub fn parse_results_csv(text: &str) -> Result<Vec<ExperimentRow>, Error> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "n,statistic,value,ci_low,ci_high,replicates" {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected results.csv header: `{line}`"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let ln = idx + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected 6 columns, got {}", cols.len()),
            });
        }
        let num = |i: usize| -> Result<f64, Error> {
            cols[i].parse::<f64>().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("column {}: expected a number, got `{}`", i + 1, cols[i]),
            })
        };
        rows.push(ExperimentRow {
            n: num(0)?,
            statistic: cols[1].to_string(),
            value: num(2)?,
            ci_low: num(3)?,
            ci_high: num(4)?,
            replicates: cols[5].parse::<u64>().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("column 6: expected an integer, got `{}`", cols[5]),
            })?,
        });
    }
    Ok(rows)
}

fn meta_json(cfg: &RunConfig, threads: usize, result: &ExperimentResult) -> String {
    let sigma = match cfg.params.kernel {
        ksrg_core::KernelKind::Interpolation { sigma } => json!(sigma),
        ksrg_core::KernelKind::Sum => serde_json::Value::Null,
    };
    let mut notes: Vec<String> = Vec::new();
    if cfg.enlargement > 1.0 {
        notes.push(format!(
            "vertices are sampled in a region enlarged by factor {} in volume; edges to the \
             un-sampled exterior are truncated",
            cfg.enlargement
        ));
    }
    if result.kind == ExperimentKind::ClusterDecay {
        notes.push(
            "origin-cluster statistics approximate the infinite-volume distinguished-point \
             limit by a finite (enlarged) region"
                .to_string(),
        );
    }
    let meta = json!({
        "config": {
            "d": cfg.params.d,
            "tau": cfg.params.tau,
            "alpha": cfg.params.alpha,
            "sigma": sigma,
            "kernel": match cfg.params.kernel {
                ksrg_core::KernelKind::Interpolation { .. } => "interpolation",
                ksrg_core::KernelKind::Sum => "sum",
            },
            "beta": cfg.params.beta,
            "p": cfg.params.p,
            "profile": cfg.params.profile,
            "vertices": cfg.params.vertex_process,
            "experiment": result.kind.name(),
            "n_grid": cfg.n_grid,
            "replicates": cfg.replicates,
            "rho": cfg.rho,
            "ell_max": cfg.ell_max,
            "enlargement": cfg.enlargement,
            "seed": cfg.seed,
            "threads": threads,
            "out": cfg.out.display().to_string(),
            "k_grid": cfg.k_grid,
            "beta_grid": cfg.beta_grid,
            "half": cfg.half,
        },
        "versions": {
            "ksrg": env!("CARGO_PKG_VERSION"),
        },
        "warnings": result.warnings,
        "notes": notes,
        "exponents": result.exponents,
    });
    serde_json::to_string_pretty(&meta).expect("meta serialization") + "\n"
}

/// Render `{out}/results.csv` (+ optional `{out}/fit.json`) to
/// `{out}/plot.svg`; returns the SVG path.
pub fn run_plot(cfg: &RunConfig) -> CliResult<PathBuf> {
    let csv_path = cfg.out.join("results.csv");
    let text =
        fs::read_to_string(&csv_path).map_err(|e| CliError::Io(csv_path.clone(), e))?;
    let rows = parse_results_csv(&text)?;
    let fit_path = cfg.out.join("fit.json");
    let fits: Vec<ScalingFit> = if fit_path.exists() {
        let fit_text =
            fs::read_to_string(&fit_path).map_err(|e| CliError::Io(fit_path.clone(), e))?;
        serde_json::from_str(&fit_text).map_err(|e| {
            Error::Parse { line: e.line(), msg: format!("fit.json: {e}") }
        })?
    } else {
        Vec::new()
    };
    let svg = plot::render(&rows, &fits)?;
    let svg_path = cfg.out.join("plot.svg");
    fs::write(&svg_path, svg).map_err(|e| CliError::Io(svg_path.clone(), e))?;
    Ok(svg_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ksrg_core::ExtReal;

    fn cfg(text: &str) -> RunConfig {
        parse_config(text).unwrap()
    }

    const BASE: &str = "d=1\ntau=2.5\nalpha=2\nsigma=1\nbeta=0.1\np=1\nseed=3\nenlargement=1\n";

    #[test]
    fn phase_json_exposes_exponents() {
        let text = "d=2\ntau=2.5\nalpha=2\nsigma=1\nbeta=1";
        let json = phase_json(&cfg(text)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["zeta_star"], 0.5);
        assert_eq!(v["multiplicity"], 1);
    }

    #[test]
    fn sample_writes_both_files_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{BASE}n_grid=200\nout={}", dir.path().display());
        let out = run_sample(&cfg(&text)).unwrap();
        assert!(out.n_vertices > 100, "around 200 points expected");
        let verts = fs::read_to_string(&out.vertex_path).unwrap();
        assert_eq!(verts.lines().count(), out.n_vertices);
        for line in verts.lines() {
            let parts: Vec<&str> = line.split(' ').collect();
            assert_eq!(parts[0], "#");
            assert_eq!(parts[1], "vertex");
            assert_eq!(parts.len(), 5, "id, one coordinate, one mark: {line}");
        }
        let edges = fs::read_to_string(&out.edge_path).unwrap();
        assert_eq!(edges.lines().count(), out.n_edges);
        for line in edges.lines() {
            let (u, v) = line.split_once(' ').unwrap();
            let (u, v) = (u.parse::<u32>().unwrap(), v.parse::<u32>().unwrap());
            assert!(u < v, "edges stored as (min, max): {line}");
            assert!((v as usize) < out.n_vertices);
        }
        // Rerun: byte-identical.
        let out2 = run_sample(&cfg(&text)).unwrap();
        assert_eq!(fs::read(&out.vertex_path).unwrap(), fs::read(&out2.vertex_path).unwrap());
        assert_eq!(fs::read(&out.edge_path).unwrap(), fs::read(&out2.edge_path).unwrap());
    }

    #[test]
    fn experiment_writes_three_files_with_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "{BASE}experiment=lln\nn_grid=100,200,400\nreplicates=20\nout={}",
            dir.path().display()
        );
        let config = cfg(&text);
        let result = run_experiment_files(&config, 2).unwrap();
        assert_eq!(result.rows.len(), 6);

        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,statistic,value,ci_low,ci_high,replicates");
        assert_eq!(lines.count(), 6, "three volumes x two statistics");
        let parsed = parse_results_csv(&csv).unwrap();
        assert_eq!(parsed, result.rows, "CSV round-trips the rows");

        let fits: Vec<ScalingFit> =
            serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap())
                .unwrap();
        assert_eq!(fits.len(), 1);
        assert_eq!(fits[0].statistic, "theta_hat_std");

        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap())
                .unwrap();
        assert_eq!(meta["config"]["d"], 1);
        assert_eq!(meta["config"]["experiment"], "lln");
        assert_eq!(meta["config"]["threads"], 2);
        assert!(meta["exponents"]["zeta_star"].is_number());
        assert!(meta["versions"]["ksrg"].is_string());
    }

    #[test]
    fn experiment_output_is_thread_count_invariant() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let base = format!("{BASE}experiment=lln\nn_grid=80,160,320\nreplicates=12\n");
        let c1 = cfg(&format!("{base}out={}", dir1.path().display()));
        let c2 = cfg(&format!("{base}out={}", dir2.path().display()));
        run_experiment_files(&c1, 1).unwrap();
        run_experiment_files(&c2, 4).unwrap();
        assert_eq!(
            fs::read(dir1.path().join("results.csv")).unwrap(),
            fs::read(dir2.path().join("results.csv")).unwrap(),
            "results.csv must not depend on the thread count"
        );
        assert_eq!(
            fs::read(dir1.path().join("fit.json")).unwrap(),
            fs::read(dir2.path().join("fit.json")).unwrap()
        );
    }

    #[test]
    fn threads_resolution_prefers_env() {
        let config = cfg("d=1\ntau=inf\nalpha=inf\nbeta=1\nthreads=5");
        assert_eq!(resolve_threads(&config, None).unwrap(), 5);
        assert_eq!(resolve_threads(&config, Some("2")).unwrap(), 2);
        assert!(resolve_threads(&config, Some("zero")).is_err());
        assert!(resolve_threads(&config, Some("0")).is_err());
    }

    #[test]
    fn plan_requires_experiment_fields() {
        let config = cfg("d=1\ntau=inf\nalpha=inf\nbeta=1\nn_grid=100\nreplicates=5");
        assert!(matches!(plan_from_config(&config), Err(Error::RejectDomain(_))));
        let config = cfg("d=1\ntau=inf\nalpha=inf\nbeta=1\nexperiment=lln\nn_grid=100");
        assert!(matches!(plan_from_config(&config), Err(Error::RejectDomain(_))));
    }

    #[test]
    fn exit_codes_map_error_kinds() {
        assert_eq!(CliError::from(Error::RejectDomain("x".into())).exit_code(), 1);
        assert_eq!(
            CliError::from(Error::Parse { line: 1, msg: "x".into() }).exit_code(),
            1
        );
        assert_eq!(CliError::from(Error::Capacity("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::InsufficientEvents("x".into())).exit_code(), 3);
    }

    #[test]
    fn csv_parser_rejects_malformed_input() {
        let err = parse_results_csv("bad header\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_results_csv("n,statistic,value,ci_low,ci_high,replicates\n1,2,3\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_results_csv(
            "n,statistic,value,ci_low,ci_high,replicates\n1,s,x,0,0,5\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn experiment_respects_extreal_config_round_trip() {
        // tau = inf propagates into the plan and the meta echo.
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "d=1\ntau=inf\nalpha=inf\nbeta=0.4\np=0.7\nseed=1\nenlargement=1\n\
             experiment=lln\nn_grid=100,200,400\nreplicates=15\nout={}",
            dir.path().display()
        );
        let config = cfg(&text);
        assert_eq!(config.params.tau, ExtReal::PosInf);
        run_experiment_files(&config, 1).unwrap();
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap())
                .unwrap();
        assert_eq!(meta["config"]["tau"], "inf");
        assert_eq!(meta["config"]["alpha"], "inf");
    }
}
