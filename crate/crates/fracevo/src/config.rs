//! Command-line arguments, JSON config overlay and run settings.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fracevo_core::processes::SmallJumps;
use fracevo_core::McConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::specs::{BoundaryDto, FunctionDto, GeneratorDto, KernelDto};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FRACEVO_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "fracevo-out";

#[derive(Debug, Parser)]
#[command(name = "fracevo", version, about = "Solvers for generalised time-fractional evolution equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean exit time of the decreasing process, with a check at h/2.
    ExitTime(ExitTimeArgs),
    /// Monte Carlo potential kernel of the generalised fractional integral.
    Potential(PotentialArgs),
    /// Linear RL or Caputo problem by Monte Carlo and/or series.
    SolveLinear(SolveLinearArgs),
    /// Nonlinear Caputo problem by Picard iteration.
    SolveNonlinear(SolveNonlinearArgs),
    /// Mittag-Leffler function by series.
    MittagLeffler(MittagLefflerArgs),
    /// Series with Yosida approximations against Monte Carlo with the Laplacian.
    Yosida(YosidaArgs),
    /// Oracle self-tests and kernel assumption report.
    Validate(ValidateArgs),
    /// Re-run the command recorded in a manifest.
    Rerun(RerunArgs),
}

fn json_arg<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

fn point_arg(s: &str) -> std::result::Result<(f64, f64), String> {
    let (t, x) = s.split_once(',').ok_or_else(|| format!("expected `t,x`, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(t)?, p(x)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumpsArg {
    Drift,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Rl,
    Caputo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Mc,
    Series,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct KernelArgs {
    /// Classical order β; ignored when `--kernel` is given.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Kernel as JSON, e.g. '{"family":"tempered","beta":0.5,"lambda":1}'.
    #[arg(long = "kernel", value_parser = json_arg::<KernelDto>)]
    pub spec: Option<KernelDto>,
}

impl KernelArgs {
    pub fn dto(&self) -> KernelDto {
        self.spec.clone().unwrap_or(KernelDto::classical(self.beta))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct McArgs {
    /// Seed of every random stream; required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths.
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    /// Jump truncation level; defaults to 1e-3 of the time span.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 4096)]
    pub chunk_size: u64,
    #[arg(long, value_enum, default_value_t = SmallJumpsArg::Drift)]
    pub small_jumps: SmallJumpsArg,
}

impl McArgs {
    pub fn config(&self, span: f64) -> Result<McConfig> {
        let seed = self.seed.ok_or_else(|| ConfigError(anyhow!("a seed is required (--seed or `mc.seed`)")))?;
        let cfg = McConfig::new(self.h.unwrap_or(1e-3 * span), self.n, seed)
            .with_chunk_size(self.chunk_size)
            .with_small_jumps(match self.small_jumps {
                SmallJumpsArg::Drift => SmallJumps::Drift,
                SmallJumpsArg::Drop => SmallJumps::Drop,
            });
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// Output directory; defaults to $FRACEVO_OUT_DIR, then `fracevo-out`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for Monte Carlo chunks; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

impl RunArgs {
    pub fn resolve_out_dir(&mut self) {
        if self.out_dir.is_none() {
            self.out_dir = Some(std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUT_DIR.into()));
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExitTimeArgs {
    /// JSON file whose fields override the command line.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Starting point.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Lower boundary.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Skip the repeat at h/2.
    #[arg(long)]
    pub no_richardson: bool,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct PotentialArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Grid cells.
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Caputo)]
    pub mode: ModeArg,
    /// Spatial generator as JSON, e.g. '{"type":"scalar","lambda":-1}'.
    #[arg(long, value_parser = json_arg::<GeneratorDto>, default_value = r#"{"type":"scalar","lambda":-1.0}"#)]
    pub generator: GeneratorDto,
    /// Source g: zero, one, const:<c>, cos, sin, exp-cos, t or csv:<path> (t,x,value).
    #[arg(long, default_value = "zero")]
    pub g: FunctionDto,
    /// Initial datum φ_a, same names; CSV rows are x,value.
    #[arg(long, default_value = "one")]
    pub phi: FunctionDto,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SolveLinearArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    /// Time cells of the series grid and of the default evaluation points.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// Evaluation point `t,x`; repeatable. Defaults to the full grid.
    #[arg(long = "point", value_parser = point_arg)]
    pub points: Vec<(f64, f64)>,
    /// Series tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SolveNonlinearArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Symmetric spatial generator as JSON.
    #[arg(long, value_parser = json_arg::<GeneratorDto>, default_value = r#"{"type":"scalar","lambda":-1.0}"#)]
    pub generator: GeneratorDto,
    #[arg(long, default_value = "one")]
    pub phi: FunctionDto,
    /// Reaction f(u): sin[:k], tanh[:k] or linear:<λ>.
    #[arg(long, default_value = "sin")]
    pub reaction: ReactionDto,
    /// Range of u over which the reaction bounds are checked.
    #[arg(long, default_value_t = 10.0)]
    pub u_range: f64,
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct MittagLefflerArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Arguments, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub z: Vec<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct YosidaArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Caputo)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = -std::f64::consts::PI, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = std::f64::consts::PI, allow_negative_numbers = true)]
    pub hi: f64,
    /// Spatial grid points.
    #[arg(long, default_value_t = 32)]
    pub nodes: usize,
    #[arg(long, value_enum, default_value_t = BoundaryDto::Periodic)]
    pub boundary: BoundaryDto,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 100.0, 1000.0])]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value = "zero")]
    pub g: FunctionDto,
    #[arg(long, default_value = "exp-cos")]
    pub phi: FunctionDto,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// Evaluation point `t,x`; repeatable. Defaults to the full grid.
    #[arg(long = "point", value_parser = point_arg)]
    pub points: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Upper end of the time domain used for the kernel checks.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Output directory for the re-run; defaults to the recorded one.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Reaction term `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionDto {
    Sin(f64),
    Tanh(f64),
    Linear(f64),
}

impl std::str::FromStr for ReactionDto {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.parse::<f64>().with_context(|| format!("bad coefficient in `{s}`"))?)),
            None => (s, None),
        };
        Ok(match (name, arg) {
            ("sin", k) => ReactionDto::Sin(k.unwrap_or(1.0)),
            ("tanh", k) => ReactionDto::Tanh(k.unwrap_or(1.0)),
            ("linear", Some(l)) => ReactionDto::Linear(l),
            _ => bail!("unknown reaction `{s}`; expected sin[:k], tanh[:k] or linear:<λ>"),
        })
    }
}

impl std::fmt::Display for ReactionDto {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReactionDto::Sin(k) if *k == 1.0 => f.write_str("sin"),
            ReactionDto::Sin(k) => write!(f, "sin:{k}"),
            ReactionDto::Tanh(k) if *k == 1.0 => f.write_str("tanh"),
            ReactionDto::Tanh(k) => write!(f, "tanh:{k}"),
            ReactionDto::Linear(l) => write!(f, "linear:{l}"),
        }
    }
}

impl Serialize for ReactionDto {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ReactionDto {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Marks errors in the configuration as opposed to solver failures.
#[derive(Debug, thiserror::Error)]
#[error("{0:#}")]
pub struct ConfigError(#[source] pub anyhow::Error);

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Deserialises `value` with the failing field path in the message.
pub fn from_value<T: DeserializeOwned>(value: Value, origin: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(anyhow!("{origin}: field `{path}`: {}", e.into_inner())).into()
    })
}

/// Parses a JSON file, reporting line and column on syntax errors.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(anyhow!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(anyhow!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())).into())
}

/// The command-line values with the config file laid over them.
pub fn overlay<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&Path>) -> Result<T> {
    let mut value = serde_json::to_value(cli)?;
    let Some(path) = config else {
        return from_value(value, "command line");
    };
    let file = read_json(path)?;
    if !file.is_object() {
        return Err(ConfigError(anyhow!("{}: the config must be a JSON object", path.display())).into());
    }
    merge(&mut value, file);
    from_value(value, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_wins_and_reports_fields() {
        let cli = Cli::try_parse_from(["fracevo", "exit-time", "--seed", "3", "--n", "10"]).unwrap();
        let Command::ExitTime(args) = cli.command else { panic!() };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"mc": {"n": 20}, "kernel": {"spec": {"family": "classical", "beta": 0.3}}}"#).unwrap();
        let merged = overlay(&args, Some(&p)).unwrap();
        assert_eq!(merged.mc.n, 20);
        assert_eq!(merged.mc.seed, Some(3));
        assert_eq!(merged.kernel.dto(), KernelDto::classical(0.3));

        std::fs::write(&p, r#"{"mc": {"n": "many"}}"#).unwrap();
        let err = overlay(&args, Some(&p)).unwrap_err().to_string();
        assert!(err.contains("mc.n"), "{err}");
        std::fs::write(&p, "{\n  \"t\": 1,\n  oops\n}").unwrap();
        let err = overlay(&args, Some(&p)).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        std::fs::write(&p, r#"{"bogus": 1}"#).unwrap();
        assert!(overlay(&args, Some(&p)).is_err());
    }

    #[test]
    fn reactions_parse() {
        for s in ["sin", "sin:0.5", "tanh", "linear:-0.5"] {
            assert_eq!(s.parse::<ReactionDto>().unwrap().to_string(), s);
        }
        assert!("linear".parse::<ReactionDto>().is_err());
    }
}
