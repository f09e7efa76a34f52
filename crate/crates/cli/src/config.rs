//! Run configuration: command-line flags, optionally overridden by a JSON file.

use std::path::{Path, PathBuf};

use anisofreq::geometry::DomainSpec;
use anisofreq::optimizer::{SearchOptions, DEFAULT_DIRECTIONAL_TOL, DEFAULT_GRID_N, DEFAULT_THETA_TOL};
use anisofreq::quadform::QuadForm;
use anisofreq::solver::SolverOptions;
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eigen,
    Optimize,
    Sweep,
    Verify,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Square,
    Disk,
    Lshape,
    /// `[−1,1]×[−1/√a, 1/√a]`, built from `--a`
    RectangleRa,
}

#[derive(Debug, Parser)]
#[command(name = "anisofreq", version, about = "Fundamental frequencies of anisotropic p-Laplacians")]
pub struct Flags {
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// JSON domain description, e.g. {"type":"disk","radius":1}
    #[arg(long)]
    pub domain_file: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "domain_file")]
    pub domain: Option<Preset>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Form for `eigen` as `alpha,beta,gamma`
    #[arg(long)]
    pub form: Option<String>,
    /// JSON config file; its keys override flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Grids for the `sweep` command; missing axes fall back to the scalar settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub thetas: Option<Vec<f64>>,
    #[serde(default)]
    pub a_values: Option<Vec<f64>>,
    #[serde(default)]
    pub p_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainSpec,
    pub p: f64,
    pub a: f64,
    #[serde(default)]
    pub b: Option<f64>,
    pub mesh_level: usize,
    pub grid_n: usize,
    pub tol: f64,
    pub output_path: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub form: Option<QuadForm>,
    #[serde(default)]
    pub sweep: SweepGrid,
}

fn err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_form(s: &str) -> Result<QuadForm, CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| err(format!("--form: {e}")))?;
    match parts[..] {
        [al, be, ga] => Ok(QuadForm::new(al, be, ga)?),
        _ => Err(err("--form expects three comma-separated numbers")),
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Flags with defaults, then the config file's keys on top.
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let a = flags.a.unwrap_or(0.25);
        let domain = match (&flags.domain_file, flags.domain) {
            (Some(path), _) => serde_json::from_value::<DomainSpec>(read_json(path)?)
                .map_err(|e| err(format!("{}: {e}", path.display())))?,
            (None, Some(Preset::Disk)) => DomainSpec::disk(1.0)?,
            (None, Some(Preset::Lshape)) => DomainSpec::l_shape(),
            (None, Some(Preset::RectangleRa)) => DomainSpec::rectangle_ra(a)?,
            (None, Some(Preset::Square) | None) => DomainSpec::square(),
        };
        let form = flags.form.as_deref().map(parse_form).transpose()?;
        let base = RunConfig {
            command: flags.command.unwrap_or(Command::Eigen),
            domain,
            p: flags.p.unwrap_or(2.0),
            a,
            b: flags.b,
            mesh_level: flags.level.unwrap_or(5),
            grid_n: flags.grid_n.unwrap_or(DEFAULT_GRID_N),
            tol: flags.tol.unwrap_or(SolverOptions::default().tol),
            output_path: flags.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.unwrap_or(42),
            form,
            sweep: SweepGrid::default(),
        };
        let cfg = match &flags.config {
            Some(path) => {
                let over = match read_json(path)? {
                    Value::Object(m) => m,
                    _ => return Err(err(format!("{}: expected a JSON object", path.display()))),
                };
                base.overlay(over)?
            }
            None => base,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn overlay(self, over: Map<String, Value>) -> Result<Self, CliError> {
        let mut merged = match serde_json::to_value(&self).map_err(|e| err(e.to_string()))? {
            Value::Object(m) => m,
            _ => unreachable!("RunConfig serializes to an object"),
        };
        merged.extend(over);
        serde_json::from_value(Value::Object(merged)).map_err(|e| err(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(err(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.a > 0.0 && self.a <= 1.0) {
            return Err(err(format!("a must lie in (0, 1], got {}", self.a)));
        }
        if let Some(b) = self.b {
            if !(b >= self.a && b < 1.0) {
                return Err(err(format!("b must lie in [a, 1), got {b}")));
            }
        }
        if !(2..=9).contains(&self.mesh_level) {
            return Err(err(format!("mesh level must lie in [2, 9], got {}", self.mesh_level)));
        }
        if self.grid_n < 9 {
            return Err(err(format!("grid_n must be at least 9, got {}", self.grid_n)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(err(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        self.domain.validate()?;
        let grids = [&self.sweep.thetas, &self.sweep.a_values, &self.sweep.p_values];
        if grids.iter().any(|g| g.as_ref().is_some_and(|v| v.is_empty())) {
            return Err(err("sweep grids must be nonempty when given"));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            level: self.mesh_level,
            grid_n: self.grid_n,
            theta_tol: DEFAULT_THETA_TOL,
            directional_tol: DEFAULT_DIRECTIONAL_TOL,
            solver: self.solver_options(),
        }
    }

    /// Second class parameter for `bounds` and the quantitative suite.
    pub fn b_or_default(&self) -> f64 {
        self.b.unwrap_or(0.5 * (1.0 + self.a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> Flags {
        Flags::parse_from(std::iter::once("anisofreq").chain(args.iter().copied()))
    }

    #[test]
    fn defaults_and_presets() {
        let c = RunConfig::resolve(&flags(&[])).unwrap();
        assert_eq!(c.command, Command::Eigen);
        assert_eq!(c.domain, DomainSpec::square());
        assert_eq!(c.mesh_level, 5);
        let c = RunConfig::resolve(&flags(&["--domain", "rectangle-ra", "--a", "0.25"])).unwrap();
        assert_eq!(c.domain, DomainSpec::rectangle(1.0, 2.0).unwrap());
        let c = RunConfig::resolve(&flags(&["--form", "0.5, 0.1, 0.8"])).unwrap();
        assert_eq!(c.form.unwrap().coefficients(), [0.5, 0.1, 0.8]);
    }

    #[test]
    fn schema_errors() {
        for bad in [
            vec!["--p", "1"],
            vec!["--a", "0"],
            vec!["--a", "0.5", "--b", "0.4"],
            vec!["--level", "1"],
            vec!["--level", "10"],
            vec!["--grid-n", "5"],
            vec!["--tol", "0"],
            vec!["--form", "1,2"],
            vec!["--form", "1,-0.5,1"],
        ] {
            assert!(RunConfig::resolve(&flags(&bad)).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn config_file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"command":"optimize","p":3,"domain":{"type":"disk","radius":2},"sweep":{"thetas":[0,0.5]}}"#,
        )
        .unwrap();
        let c = RunConfig::resolve(&flags(&["--p", "1.5", "--a", "0.5", "--config", path.to_str().unwrap()])).unwrap();
        assert_eq!(c.command, Command::Optimize);
        assert_eq!(c.p, 3.0);
        assert_eq!(c.a, 0.5);
        assert_eq!(c.domain, DomainSpec::disk(2.0).unwrap());
        assert_eq!(c.sweep.thetas, Some(vec![0.0, 0.5]));
        std::fs::write(&path, r#"{"colour":"blue"}"#).unwrap();
        assert!(RunConfig::resolve(&flags(&["--config", path.to_str().unwrap()])).is_err());
    }
}
