//! Flat `key = value` run configuration.
//!
//! One experiment per file. Lines are independent; `#` starts a comment;
//! later assignments win, which is how command-line overrides are layered on
//! top of the file (they are appended as extra lines). Values never need
//! quoting. `inf` is accepted wherever an extended-real parameter allows it.

use ksrg_core::params::{KernelKind, ModelParams, ProfileKind, VertexProcess};
use ksrg_core::{Error, ExperimentKind, ExtReal, Result};
use std::path::PathBuf;

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub experiment: Option<ExperimentKind>,
    /// Target volumes, sorted ascending.
    pub n_grid: Vec<f64>,
    pub replicates: Option<usize>,
    pub rho: Option<f64>,
    pub ell_max: usize,
    pub enlargement: f64,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub k_grid: Vec<u64>,
    pub beta_grid: Vec<f64>,
    pub half: bool,
}

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn domain(line: usize, msg: impl Into<String>) -> Error {
    Error::RejectDomain(format!("line {line}: {}", msg.into()))
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| syntax(line, format!("{key}: expected a number, got `{v}`")))
}

fn parse_ext(line: usize, key: &str, v: &str) -> Result<ExtReal> {
    if v == "inf" {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite(parse_f64(line, key, v)?))
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| syntax(line, format!("{key}: expected a non-negative integer, got `{v}`")))
}

fn parse_list<T>(
    line: usize,
    key: &str,
    v: &str,
    mut one: impl FnMut(usize, &str, &str) -> Result<T>,
) -> Result<Vec<T>> {
    v.split(',').map(|item| one(line, key, item.trim())).collect()
}

/// Parse a configuration text into a [`RunConfig`].
///
/// Syntax problems report the 1-based line number; values outside their
/// domain are rejected immediately, also with the line number, so a bad line
/// is always pointed at. Keys may repeat; the last assignment wins.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut d: Option<u32> = None;
    let mut tau: Option<ExtReal> = None;
    let mut alpha: Option<ExtReal> = None;
    let mut sigma: Option<f64> = None;
    let mut kernel: Option<&str> = None;
    let mut beta: Option<f64> = None;
    let mut p: Option<f64> = None;
    let mut profile: Option<ProfileKind> = None;
    let mut vertices: Option<VertexProcess> = None;
    let mut experiment: Option<ExperimentKind> = None;
    let mut n_grid: Vec<f64> = Vec::new();
    let mut replicates: Option<usize> = None;
    let mut rho: Option<f64> = None;
    let mut ell_max: usize = 64;
    let mut enlargement: f64 = 3.0;
    let mut seed: u64 = 0;
    let mut threads: Option<usize> = None;
    let mut out = PathBuf::from(".");
    let mut k_grid: Vec<u64> = Vec::new();
    let mut beta_grid: Vec<f64> = Vec::new();
    let mut half = false;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(ln, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let v = value.trim();
        if v.is_empty() {
            return Err(syntax(ln, format!("{key}: empty value")));
        }
        match key {
            "d" => {
                let val = parse_usize(ln, key, v)?;
                if val == 0 || val > u32::MAX as usize {
                    return Err(domain(ln, format!("d must be a positive dimension, got {v}")));
                }
                d = Some(val as u32);
            }
            "tau" => {
                let t = parse_ext(ln, key, v)?;
                if let ExtReal::Finite(x) = t {
                    if !(x.is_finite() && x > 2.0) {
                        return Err(domain(ln, format!("tau must be in (2, inf], got {v}")));
                    }
                }
                tau = Some(t);
            }
            "alpha" => {
                let a = parse_ext(ln, key, v)?;
                if let ExtReal::Finite(x) = a {
                    if !(x.is_finite() && x > 1.0) {
                        return Err(domain(ln, format!("alpha must be in (1, inf], got {v}")));
                    }
                }
                alpha = Some(a);
            }
            "sigma" => {
                let s = parse_f64(ln, key, v)?;
                if !(s.is_finite() && s >= 0.0) {
                    return Err(domain(ln, format!("sigma must be >= 0, got {v}")));
                }
                sigma = Some(s);
            }
            "kernel" => {
                kernel = Some(match v {
                    "interpolation" => "interpolation",
                    "sum" => "sum",
                    _ => {
                        return Err(syntax(
                            ln,
                            format!("kernel must be `interpolation` or `sum`, got `{v}`"),
                        ))
                    }
                });
            }
            "beta" => {
                let b = parse_f64(ln, key, v)?;
                if !(b.is_finite() && b > 0.0) {
                    return Err(domain(ln, format!("beta must be > 0, got {v}")));
                }
                beta = Some(b);
            }
            "p" => {
                let val = parse_f64(ln, key, v)?;
                if !(val > 0.0 && val <= 1.0) {
                    return Err(domain(ln, format!("p must be in (0, 1], got {v}")));
                }
                p = Some(val);
            }
            "profile" => {
                profile = Some(match v {
                    "threshold" => ProfileKind::Threshold,
                    "polynomial" => ProfileKind::Polynomial,
                    _ => {
                        return Err(syntax(
                            ln,
                            format!("profile must be `threshold` or `polynomial`, got `{v}`"),
                        ))
                    }
                });
            }
            "vertices" => {
                vertices = Some(match v {
                    "ppp" => VertexProcess::Ppp,
                    "lattice" => VertexProcess::Lattice,
                    _ => {
                        return Err(syntax(
                            ln,
                            format!("vertices must be `ppp` or `lattice`, got `{v}`"),
                        ))
                    }
                });
            }
            "experiment" => {
                experiment = Some(ExperimentKind::parse(v).ok_or_else(|| {
                    syntax(ln, format!("unknown experiment `{v}`; one of lln, lower_tail, \
                         upper_tail, second_largest, cluster_decay, boundary, edge_boundary, \
                         theta_scan"))
                })?);
            }
            "n_grid" => {
                n_grid = parse_list(ln, key, v, |l, k, item| {
                    let x = parse_f64(l, k, item)?;
                    if !(x.is_finite() && x > 0.0) {
                        return Err(domain(l, format!("n_grid entries must be > 0, got {item}")));
                    }
                    Ok(x)
                })?;
            }
            "replicates" => {
                let r = parse_usize(ln, key, v)?;
                if r == 0 {
                    return Err(domain(ln, "replicates must be >= 1"));
                }
                replicates = Some(r);
            }
            "rho" => {
                let r = parse_f64(ln, key, v)?;
                if !(r > 0.0 && r < 1.0) {
                    return Err(domain(ln, format!("rho must be in (0, 1), got {v}")));
                }
                rho = Some(r);
            }
            "ell_max" => {
                let e = parse_usize(ln, key, v)?;
                if e == 0 {
                    return Err(domain(ln, "ell_max must be >= 1"));
                }
                ell_max = e;
            }
            "enlargement" => {
                let e = parse_f64(ln, key, v)?;
                if !(e.is_finite() && e >= 1.0) {
                    return Err(domain(ln, format!("enlargement must be >= 1, got {v}")));
                }
                enlargement = e;
            }
            "seed" => {
                seed = v
                    .parse::<u64>()
                    .map_err(|_| syntax(ln, format!("seed: expected a 64-bit unsigned integer, got `{v}`")))?;
            }
            "threads" => {
                let t = parse_usize(ln, key, v)?;
                if t == 0 {
                    return Err(domain(ln, "threads must be >= 1"));
                }
                threads = Some(t);
            }
            "out" => {
                out = PathBuf::from(v);
            }
            "k_grid" => {
                k_grid = parse_list(ln, key, v, |l, k, item| {
                    let x = item.parse::<u64>().map_err(|_| {
                        syntax(l, format!("{k}: expected a positive integer, got `{item}`"))
                    })?;
                    if x == 0 {
                        return Err(domain(l, "k_grid entries must be >= 1"));
                    }
                    Ok(x)
                })?;
            }
            "beta_grid" => {
                beta_grid = parse_list(ln, key, v, |l, k, item| {
                    let x = parse_f64(l, k, item)?;
                    if !(x.is_finite() && x > 0.0) {
                        return Err(domain(l, format!("beta_grid entries must be > 0, got {item}")));
                    }
                    Ok(x)
                })?;
            }
            "half" => {
                half = match v {
                    "true" => true,
                    "false" => false,
                    _ => return Err(syntax(ln, format!("half must be `true` or `false`, got `{v}`"))),
                };
            }
            _ => return Err(syntax(ln, format!("unknown key `{key}`"))),
        }
    }

    let missing = |k: &str| Error::RejectDomain(format!("config is missing required key `{k}`"));
    let d = d.ok_or_else(|| missing("d"))?;
    let tau = tau.ok_or_else(|| missing("tau"))?;
    let alpha = alpha.ok_or_else(|| missing("alpha"))?;
    let beta = beta.ok_or_else(|| missing("beta"))?;

    let kernel = match kernel.unwrap_or("interpolation") {
        "sum" => {
            if sigma.is_some() {
                return Err(Error::RejectInconsistent(
                    "sigma has no meaning for kernel = sum; remove one of the two keys".into(),
                ));
            }
            KernelKind::Sum
        }
        _ => match sigma {
            Some(s) => KernelKind::Interpolation { sigma: s },
            // With unit marks every kernel value is 1, so sigma is
            // irrelevant; with heavy-tailed marks it shapes the whole phase
            // diagram and silently defaulting it would be a trap.
            None if !tau.is_finite() => KernelKind::Interpolation { sigma: 0.0 },
            None => {
                return Err(Error::RejectDomain(
                    "sigma is required for the interpolation kernel when tau is finite".into(),
                ))
            }
        },
    };
    let profile = profile.unwrap_or(if alpha.is_finite() {
        ProfileKind::Polynomial
    } else {
        ProfileKind::Threshold
    });
    let params = ModelParams {
        d,
        tau,
        alpha,
        kernel,
        beta,
        p: p.unwrap_or(1.0),
        profile,
        vertex_process: vertices.unwrap_or(VertexProcess::Ppp),
    };
    params.validate()?;

    n_grid.sort_unstable_by(|a, b| a.total_cmp(b));
    let threads = threads.unwrap_or_else(default_threads);
    Ok(RunConfig {
        params,
        experiment,
        n_grid,
        replicates,
        rho,
        ell_max,
        enlargement,
        seed,
        threads,
        out,
        k_grid,
        beta_grid,
        half,
    })
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Turn trailing `--key value` (or `--key=value`) arguments into override
/// pairs, to be appended after the config file's lines.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(raw) = it.next() {
        let key = raw.strip_prefix("--").ok_or_else(|| {
            Error::RejectDomain(format!("override `{raw}` must be written as `--key value`"))
        })?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        let value = it.next().ok_or_else(|| {
            Error::RejectDomain(format!("override `--{key}` is missing a value"))
        })?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

/// File text plus overrides, as one config text with overrides appended
/// (so they win under last-assignment-wins).
pub fn effective_text(file_text: &str, overrides: &[(String, String)]) -> String {
    let mut text = file_text.to_string();
    for (k, v) in overrides {
        text.push('\n');
        text.push_str(k);
        text.push_str(" = ");
        text.push_str(v);
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "d=2\ntau=2.5\nalpha=2\nsigma=1\nbeta=1\np=1\nprofile=polynomial\n\
                           vertices=ppp\nexperiment=lln\nn_grid=10000,40000,160000\nreplicates=50";

    #[test]
    fn example_config_parses_with_defaults() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.params.d, 2);
        assert_eq!(cfg.params.tau, ExtReal::Finite(2.5));
        assert_eq!(cfg.params.alpha, ExtReal::Finite(2.0));
        assert_eq!(cfg.params.kernel, KernelKind::Interpolation { sigma: 1.0 });
        assert_eq!(cfg.params.profile, ProfileKind::Polynomial);
        assert_eq!(cfg.experiment, Some(ExperimentKind::Lln));
        assert_eq!(cfg.n_grid, vec![10000.0, 40000.0, 160000.0]);
        assert_eq!(cfg.replicates, Some(50));
        // Documented defaults.
        assert_eq!(cfg.ell_max, 64);
        assert_eq!(cfg.enlargement, 3.0);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.threads, default_threads());
        assert_eq!(cfg.out, PathBuf::from("."));
        assert!(cfg.rho.is_none());
        assert!(!cfg.half);
    }

    #[test]
    fn inf_sentinels_and_inferred_profile() {
        let cfg = parse_config("d=1\ntau=inf\nalpha=inf\nbeta=0.5").unwrap();
        assert_eq!(cfg.params.tau, ExtReal::PosInf);
        assert_eq!(cfg.params.alpha, ExtReal::PosInf);
        assert_eq!(cfg.params.profile, ProfileKind::Threshold);
        // Unit marks: sigma irrelevant, defaulted.
        assert_eq!(cfg.params.kernel, KernelKind::Interpolation { sigma: 0.0 });
        assert_eq!(cfg.params.p, 1.0);
        assert_eq!(cfg.params.vertex_process, VertexProcess::Ppp);
    }

    #[test]
    fn out_of_domain_values_point_at_their_line() {
        let err = parse_config("d=1\ntau=2.5\nalpha=0.5\nsigma=1\nbeta=1").unwrap_err();
        match err {
            Error::RejectDomain(msg) => {
                assert!(msg.contains("line 3"), "{msg}");
                assert!(msg.contains("alpha"), "{msg}");
            }
            other => panic!("expected RejectDomain, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_report_line_numbers() {
        let err = parse_config("d=1\nnot a config line").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");

        let err = parse_config("d=1\n\n# comment\nwidgets=7").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");

        let err = parse_config("d=one").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn comments_blanks_and_duplicates() {
        let text = "# full-line comment\n\nd = 1\ntau = inf # inline comment\nalpha = inf\n\
                    beta = 1\nbeta = 2.5\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.params.beta, 2.5, "last assignment wins");
    }

    #[test]
    fn n_grid_is_sorted() {
        let cfg =
            parse_config("d=1\ntau=inf\nalpha=inf\nbeta=1\nn_grid=400,100,200").unwrap();
        assert_eq!(cfg.n_grid, vec![100.0, 200.0, 400.0]);
    }

    #[test]
    fn missing_required_keys_are_named() {
        let err = parse_config("tau=inf\nalpha=inf\nbeta=1").unwrap_err();
        assert!(matches!(&err, Error::RejectDomain(m) if m.contains("`d`")), "{err:?}");
        let err = parse_config("d=1\ntau=inf\nalpha=inf").unwrap_err();
        assert!(matches!(&err, Error::RejectDomain(m) if m.contains("`beta`")), "{err:?}");
    }

    #[test]
    fn kernel_sigma_consistency() {
        // sum kernel rejects a sigma.
        let err = parse_config("d=1\ntau=2.5\nalpha=2\nkernel=sum\nsigma=1\nbeta=1").unwrap_err();
        assert!(matches!(err, Error::RejectInconsistent(_)), "{err:?}");
        // interpolation with finite tau requires sigma.
        let err = parse_config("d=1\ntau=2.5\nalpha=2\nbeta=1").unwrap_err();
        assert!(matches!(&err, Error::RejectDomain(m) if m.contains("sigma")), "{err:?}");
        // sum kernel without sigma is fine.
        let cfg = parse_config("d=2\ntau=2.5\nalpha=2\nkernel=sum\nbeta=1").unwrap();
        assert_eq!(cfg.params.kernel, KernelKind::Sum);
    }

    #[test]
    fn extras_parse() {
        let cfg = parse_config(
            "d=1\ntau=2.5\nalpha=2\nsigma=1\nbeta=1\nk_grid=8,16,32\nbeta_grid=0.5,1\n\
             half=true\nrho=0.25\nthreads=4\nseed=99\nout=results/run1",
        )
        .unwrap();
        assert_eq!(cfg.k_grid, vec![8, 16, 32]);
        assert_eq!(cfg.beta_grid, vec![0.5, 1.0]);
        assert!(cfg.half);
        assert_eq!(cfg.rho, Some(0.25));
        assert_eq!(cfg.threads, 4);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.out, PathBuf::from("results/run1"));
    }

    #[test]
    fn override_args_parse_and_win() {
        let overrides = parse_override_args(&[
            "--beta".to_string(),
            "3.5".to_string(),
            "--n_grid=100,50".to_string(),
        ])
        .unwrap();
        assert_eq!(overrides.len(), 2);
        let text = effective_text("d=1\ntau=inf\nalpha=inf\nbeta=1", &overrides);
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.params.beta, 3.5);
        assert_eq!(cfg.n_grid, vec![50.0, 100.0]);

        assert!(parse_override_args(&["beta".to_string(), "1".to_string()]).is_err());
        assert!(parse_override_args(&["--beta".to_string()]).is_err());
    }
}
