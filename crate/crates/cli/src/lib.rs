//! Batch front end: resolve a [`RunConfig`], dispatch to the solver or the
//! optimizer, and write JSON/CSV results into the output directory.

pub mod config;
pub mod output;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt::Write as _;
use std::path::PathBuf;

use anisofreq::geometry::{DomainSpec, GeometryError};
use anisofreq::mesh::{Mesh, MeshError};
use anisofreq::optimizer::{self, OptimizeError, OptimizeResult, VerificationReport};
use anisofreq::quadform::{quant_lower_constant, quant_upper_bound, FormError, QuadForm};
use anisofreq::solver::{self, Axis, SolverError, SolverOptions};
use serde::Serialize;
use thiserror::Error;

pub use config::{Command, Flags, RunConfig};
use output::{num, to_json, write_atomic, Document, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Form(_) | CliError::Geometry(_) => 2,
            CliError::Output(_) => 4,
            _ => 3,
        }
    }
}

/// Files written by a run, and for `verify` whether every entry passed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub all_passed: Option<bool>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.all_passed {
            Some(false) => 1,
            _ => 0,
        }
    }
}

const Q0_SEQUENCE: [f64; 5] = [0.5, 0.25, 0.1, 0.05, 0.01];

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Eigen => "eigen",
        Command::Optimize => "optimize",
        Command::Sweep => "sweep",
        Command::Verify => "verify",
        Command::Bounds => "bounds",
    }
}

fn document<P: Serialize>(cfg: &RunConfig, status: &str, payload: &P) -> Result<String, CliError> {
    to_json(&Document {
        schema_version: SCHEMA_VERSION,
        command: command_name(cfg.command),
        status,
        config: cfg,
        payload,
        generated_unix: output::now_unix(),
    })
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let result = match cfg.command {
        Command::Eigen => eigen(cfg),
        Command::Optimize => optimize(cfg),
        Command::Sweep => sweep(cfg),
        Command::Verify => verify(cfg),
        Command::Bounds => bounds(cfg),
    };
    if let Err(e) = &result {
        // leave a flagged record of the failure next to any partial output
        if !matches!(e, CliError::Output(_)) {
            let payload = serde_json::json!({ "error": e.to_string() });
            let name = format!("{}.json", command_name(cfg.command));
            write_atomic(&cfg.output_path, &name, &document(cfg, "failed", &payload)?)?;
        }
    }
    result
}

#[derive(Serialize)]
struct EigenPayload {
    lambda: f64,
    iterations: usize,
    residual: f64,
    p: f64,
    form: QuadForm,
    mesh_level: usize,
    nodes: usize,
    triangles: usize,
    options: SolverOptions,
}

fn eigen(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mesh = Mesh::for_domain(&cfg.domain, cfg.mesh_level)?;
    let form = cfg.form.unwrap_or_else(QuadForm::identity);
    let opts = cfg.solver_options();
    let r = solver::solve_p(&mesh, &form, cfg.p, &opts)?;
    let payload = EigenPayload {
        lambda: r.lambda,
        iterations: r.iterations,
        residual: r.residual,
        p: r.p,
        form,
        mesh_level: cfg.mesh_level,
        nodes: mesh.n_nodes(),
        triangles: mesh.n_triangles(),
        options: opts,
    };
    let dir = &cfg.output_path;
    let files = vec![
        write_atomic(dir, "eigen.json", &document(cfg, "ok", &payload)?)?,
        write_atomic(dir, "eigenfunction.csv", &mesh.nodal_csv(&r.u)?)?,
        write_atomic(dir, "nodes.csv", &mesh.nodes_csv())?,
        write_atomic(dir, "triangles.csv", &mesh.triangles_csv())?,
    ];
    Ok(RunOutcome { files, all_passed: None })
}

fn profile_csv(r: &OptimizeResult) -> String {
    let mut s = String::from("theta,lambda\n");
    for t in &r.theta_profile {
        let _ = writeln!(s, "{},{}", num(t.theta), num(t.lambda));
    }
    s
}

fn optimize(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let r = optimizer::lambda_min(&cfg.domain, cfg.a, cfg.p, &cfg.search_options())?;
    let dir = &cfg.output_path;
    let files = vec![
        write_atomic(dir, "optimize.json", &document(cfg, "ok", &r)?)?,
        write_atomic(dir, "theta_profile.csv", &profile_csv(&r))?,
    ];
    Ok(RunOutcome { files, all_passed: None })
}

#[derive(Serialize)]
struct SweepRow {
    theta: f64,
    a: f64,
    p: f64,
    lambda: f64,
    residual: f64,
}

fn sweep(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let opts = cfg.search_options();
    let thetas = cfg.sweep.thetas.clone().unwrap_or_else(|| {
        let n = cfg.grid_n;
        (0..n).map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64).collect()
    });
    let a_values = cfg.sweep.a_values.clone().unwrap_or_else(|| vec![cfg.a]);
    let p_values = cfg.sweep.p_values.clone().unwrap_or_else(|| vec![cfg.p]);
    let mut rows = Vec::new();
    for &p in &p_values {
        for &a in &a_values {
            for &theta in &thetas {
                let s = optimizer::sample_theta(&cfg.domain, a, p, theta, &opts)?;
                rows.push(SweepRow {
                    theta,
                    a,
                    p,
                    lambda: s.lambda,
                    residual: s.residual,
                });
            }
        }
    }
    let mut csv = String::from("theta,a,p,lambda,residual\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", num(r.theta), num(r.a), num(r.p), num(r.lambda), num(r.residual));
    }
    let dir = &cfg.output_path;
    let files = vec![
        write_atomic(dir, "sweep.json", &document(cfg, "ok", &rows)?)?,
        write_atomic(dir, "sweep.csv", &csv)?,
    ];
    Ok(RunOutcome { files, all_passed: None })
}

/// The suite run by `verify` for the configured domain, `a`, `b`, `p` and seed.
pub fn verification_suite(cfg: &RunConfig) -> VerificationReport {
    let opts = cfg.search_options();
    let (d, a, p, seed) = (&cfg.domain, cfg.a, cfg.p, cfg.seed);
    let mut rep = VerificationReport::default();
    rep.push(optimizer::verify_algebra(1000, seed));
    if cfg.mesh_level >= 4 {
        let l = cfg.mesh_level;
        rep.extend(optimizer::verify_isotropic([l - 2, l - 1, l], &opts.solver));
    }
    rep.push(optimizer::verify_two_routes("domain", d, a, p, &[0.0, FRAC_PI_8, FRAC_PI_4], 1e-2, &opts));
    rep.push(optimizer::verify_rigidity(d, a, p, 20, 50, seed, &opts));
    rep.push(optimizer::verify_chain("domain", d, a, p, &opts));
    rep.push(optimizer::verify_nonnormalized(d, a, p, 50, seed.wrapping_add(1), &opts));
    rep.extend(optimizer::verify_quantitative(d, &[(a, cfg.b_or_default())], &[p], &opts));
    rep.push(optimizer::verify_directional_oracle(&opts));
    rep.push(optimizer::verify_q0_limit(d, p, &Q0_SEQUENCE, &opts));
    rep.push(optimizer::verify_disk(a, p, &opts));
    rep.push(optimizer::verify_rectangle(a, p, &opts));
    rep
}

fn verify(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let rep = verification_suite(cfg);
    let passed = rep.all_passed();
    let status = if passed { "passed" } else { "failed" };
    let file = write_atomic(&cfg.output_path, "verify.json", &document(cfg, status, &rep)?)?;
    Ok(RunOutcome {
        files: vec![file],
        all_passed: Some(passed),
    })
}

#[derive(Serialize)]
struct BoundsRow {
    a: f64,
    b: f64,
    p: f64,
    upper_bound: f64,
    lower_constant: f64,
    lower_bound: f64,
}

#[derive(Serialize)]
struct BoundsPayload {
    c0: f64,
    lambda_iso: f64,
    rows: Vec<BoundsRow>,
}

fn bounds(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let opts = cfg.search_options();
    let a = cfg.a;
    if a >= 1.0 {
        return Err(CliError::Config("bounds need a < 1".into()));
    }
    let prof = optimizer::directional_profile(&cfg.domain, cfg.p, Axis::X, &opts)?;
    let c0 = prof.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let (lam, _) = optimizer::lambda_max(&cfg.domain, a, cfg.p, &opts)?;
    let bs: Vec<f64> = match cfg.b {
        Some(b) => vec![b],
        None => (0..=8).map(|k| a + (1.0 - a) * k as f64 / 9.0).collect(),
    };
    let rows = bs
        .into_iter()
        .map(|b| {
            let c = quant_lower_constant(a, b, cfg.p, c0, lam)?;
            Ok(BoundsRow {
                a,
                b,
                p: cfg.p,
                upper_bound: quant_upper_bound(a, b, cfg.p)?,
                lower_constant: c,
                lower_bound: c * (b - a),
            })
        })
        .collect::<Result<Vec<_>, FormError>>()?;
    let mut csv = String::from("a,b,p,upper_bound,lower_constant,lower_bound\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            num(r.a),
            num(r.b),
            num(r.p),
            num(r.upper_bound),
            num(r.lower_constant),
            num(r.lower_bound)
        );
    }
    let payload = BoundsPayload { c0, lambda_iso: lam, rows };
    let dir = &cfg.output_path;
    let files = vec![
        write_atomic(dir, "bounds.json", &document(cfg, "ok", &payload)?)?,
        write_atomic(dir, "bounds.csv", &csv)?,
    ];
    Ok(RunOutcome { files, all_passed: None })
}

/// Parses a domain JSON document, as accepted by `--domain-file`.
pub fn parse_domain(text: &str) -> Result<DomainSpec, CliError> {
    let d: DomainSpec = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    d.validate()?;
    Ok(d)
}
