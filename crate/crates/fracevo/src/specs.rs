//! JSON descriptions of kernels, generators and data functions.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fracevo_core::feller::Boundary;
use fracevo_core::grid::{GridFunction, SpaceGrid, TimeGrid};
use fracevo_core::kernels::{CustomKernel, Envelope};
use fracevo_core::solver_linear::{Initial, Source, Spatial};
use fracevo_core::{BoundedGenerator, FellerSampler, KernelFamily, KernelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelDto {
    Classical { beta: f64 },
    Tempered { beta: f64, lambda: f64 },
    Variable { times: Vec<f64>, betas: Vec<f64> },
    /// Components as `[weight, beta]` pairs.
    Distributed { components: Vec<(f64, f64)> },
    /// Density tabulated on `times × radii`; `values[i][j] = ν(times[i], radii[j])`.
    Custom {
        times: Vec<f64>,
        radii: Vec<f64>,
        values: Vec<Vec<f64>>,
        #[serde(default)]
        envelope: Option<(f64, f64)>,
    },
}

impl KernelDto {
    pub fn classical(beta: f64) -> Self {
        KernelDto::Classical { beta }
    }

    pub fn build(&self, a: f64, b: f64) -> Result<KernelSpec> {
        let family = match self {
            KernelDto::Classical { beta } => KernelFamily::Classical { beta: *beta },
            KernelDto::Tempered { beta, lambda } => KernelFamily::Tempered { beta: *beta, lambda: *lambda },
            KernelDto::Variable { times, betas } => KernelFamily::VariableOrder { times: times.clone(), betas: betas.clone() },
            KernelDto::Distributed { components } => KernelFamily::DistributedOrder { components: components.clone() },
            KernelDto::Custom { times, radii, values, envelope } => {
                let table = Table::new(times.clone(), radii.clone(), values.clone())?;
                let envelope = match envelope {
                    Some((scale, beta)) => Envelope { scale: *scale, beta: *beta },
                    None => table.envelope()?,
                };
                let table = Arc::new(table);
                KernelFamily::Custom(CustomKernel {
                    density: Arc::new(move |t, r| table.eval(t, r)),
                    envelope: Some(envelope),
                    homogeneous: times.len() == 1,
                    label: "tabulated".into(),
                })
            }
        };
        Ok(KernelSpec::new(family, a, b)?)
    }
}

/// Bilinear table in `(t, ln r)` for `ln ν`, extended by power laws in `r`.
struct Table {
    times: Vec<f64>,
    ln_r: Vec<f64>,
    ln_v: Vec<Vec<f64>>,
    slope_lo: Vec<f64>,
    slope_hi: Vec<f64>,
}

impl Table {
    fn new(times: Vec<f64>, radii: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || radii.len() < 2 || values.len() != times.len() {
            bail!("custom kernel table needs ≥ 1 time, ≥ 2 radii and one row per time");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
            bail!("custom kernel times and radii must be increasing and radii positive");
        }
        let mut ln_v = Vec::new();
        for row in &values {
            if row.len() != radii.len() || row.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                bail!("custom kernel rows must hold one positive value per radius");
            }
            ln_v.push(row.iter().map(|v| v.ln()).collect::<Vec<_>>());
        }
        let ln_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let n = ln_r.len();
        let slope = |row: &Vec<f64>, i: usize| (row[i + 1] - row[i]) / (ln_r[i + 1] - ln_r[i]);
        let slope_lo: Vec<f64> = ln_v.iter().map(|r| slope(r, 0)).collect();
        let slope_hi: Vec<f64> = ln_v.iter().map(|r| slope(r, n - 2)).collect();
        if slope_hi.iter().any(|&s| s >= -1.0) {
            bail!("custom kernel must decay faster than 1/r beyond the last radius");
        }
        Ok(Table { times, ln_r, ln_v, slope_lo, slope_hi })
    }

    fn row_eval(&self, i: usize, lr: f64) -> f64 {
        let xs = &self.ln_r;
        let n = xs.len();
        let row = &self.ln_v[i];
        if lr <= xs[0] {
            return row[0] + self.slope_lo[i] * (lr - xs[0]);
        }
        if lr >= xs[n - 1] {
            return row[n - 1] + self.slope_hi[i] * (lr - xs[n - 1]);
        }
        let j = xs.partition_point(|&p| p <= lr) - 1;
        let w = (lr - xs[j]) / (xs[j + 1] - xs[j]);
        (1.0 - w) * row[j] + w * row[j + 1]
    }

    fn eval(&self, t: f64, r: f64) -> f64 {
        if !(r > 0.0) {
            return 0.0;
        }
        let lr = r.ln();
        let ts = &self.times;
        if ts.len() == 1 || t <= ts[0] {
            return self.row_eval(0, lr).exp();
        }
        if t >= ts[ts.len() - 1] {
            return self.row_eval(ts.len() - 1, lr).exp();
        }
        let i = ts.partition_point(|&p| p <= t) - 1;
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        ((1.0 - w) * self.row_eval(i, lr) + w * self.row_eval(i + 1, lr)).exp()
    }

    /// `scale · r^{−1−β}` above the table, with `β` from the steepest
    /// small-radius slope.
    fn envelope(&self) -> Result<Envelope> {
        let steep = self.slope_lo.iter().cloned().fold(f64::INFINITY, f64::min);
        let beta = -steep - 1.0;
        if !(beta > 0.0 && beta < 1.0) {
            bail!("custom kernel small-radius slope {steep} is not of order r^(-1-β) with β in (0, 1); give an explicit envelope");
        }
        if self.slope_lo.iter().zip(&self.slope_hi).any(|(lo, hi)| hi > lo) {
            bail!("custom kernel decays slower at large radii than at small ones; give an explicit envelope");
        }
        let mut scale: f64 = 0.0;
        for i in 0..self.times.len() {
            for (j, &lr) in self.ln_r.iter().enumerate() {
                scale = scale.max((self.ln_v[i][j] + (1.0 + beta) * lr).exp());
            }
            // Below the table the row decays no faster than the envelope.
            scale = scale.max((self.ln_v[i][0] + (1.0 + beta) * self.ln_r[0]).exp());
        }
        Ok(Envelope { scale: scale * (1.0 + 1e-9), beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryDto {
    Periodic,
    Reflecting,
    Absorbing,
}

impl From<BoundaryDto> for Boundary {
    fn from(b: BoundaryDto) -> Self {
        match b {
            BoundaryDto::Periodic => Boundary::Periodic,
            BoundaryDto::Reflecting => Boundary::Reflecting,
            BoundaryDto::Absorbing => Boundary::Absorbing,
        }
    }
}

/// Spatial part of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorDto {
    Scalar { lambda: f64 },
    /// `½σ² ∂²` by second differences on `n` points of `[lo, hi]`.
    Laplacian { sigma: f64, lo: f64, hi: f64, n: usize, boundary: BoundaryDto },
    TwoState { q12: f64, q21: f64 },
    /// Square matrix, one row per line, comma separated.
    Csv { path: PathBuf },
    /// Brownian motion sampled jointly with the time process.
    Brownian { sigma: f64 },
}

impl GeneratorDto {
    pub fn matrix(&self) -> Result<BoundedGenerator> {
        Ok(match self {
            GeneratorDto::Scalar { lambda } => BoundedGenerator::scalar(*lambda)?,
            GeneratorDto::Laplacian { sigma, lo, hi, n, boundary } => BoundedGenerator::laplacian_1d(*sigma, *lo, *hi, *n, (*boundary).into())?,
            GeneratorDto::TwoState { q12, q21 } => BoundedGenerator::two_state(*q12, *q21)?,
            GeneratorDto::Csv { path } => {
                let mut rdr = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .from_path(path)
                    .with_context(|| format!("reading generator matrix {}", path.display()))?;
                let mut rows = Vec::new();
                for (i, rec) in rdr.records().enumerate() {
                    let rec = rec.with_context(|| format!("{}: line {}", path.display(), i + 1))?;
                    let row = rec
                        .iter()
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
                    rows.push(row);
                }
                BoundedGenerator::from_rows(&rows)?
            }
            GeneratorDto::Brownian { .. } => bail!("Brownian motion has no matrix form; use a Laplacian"),
        })
    }

    pub fn spatial(&self) -> Result<Spatial> {
        Ok(match self {
            GeneratorDto::Brownian { sigma } => Spatial::Sampler(FellerSampler::brownian(*sigma, 1)?),
            other => Spatial::Generator(other.matrix()?),
        })
    }

    pub fn space(&self) -> Result<SpaceGrid> {
        match self {
            GeneratorDto::Brownian { .. } => Ok(SpaceGrid::Scalar),
            other => Ok(other.matrix()?.grid().clone()),
        }
    }
}

/// A named function of `(t, x)` or a tabulated CSV (`t,x,value`).
///
/// Names: `zero`, `one`, `const:<c>`, `cos`, `sin`, `exp-cos`, `t`,
/// `csv:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionDto {
    Const(f64),
    Cos,
    Sin,
    ExpCos,
    Time,
    Csv(PathBuf),
}

impl std::str::FromStr for FunctionDto {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => FunctionDto::Const(0.0),
            "one" => FunctionDto::Const(1.0),
            "cos" => FunctionDto::Cos,
            "sin" => FunctionDto::Sin,
            "exp-cos" => FunctionDto::ExpCos,
            "t" => FunctionDto::Time,
            _ => {
                if let Some(c) = s.strip_prefix("const:") {
                    FunctionDto::Const(c.parse().with_context(|| format!("bad constant in `{s}`"))?)
                } else if let Some(p) = s.strip_prefix("csv:") {
                    FunctionDto::Csv(PathBuf::from(p))
                } else {
                    bail!("unknown function `{s}`; expected zero, one, const:<c>, cos, sin, exp-cos, t or csv:<path>")
                }
            }
        })
    }
}

impl std::fmt::Display for FunctionDto {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionDto::Const(c) if *c == 0.0 => f.write_str("zero"),
            FunctionDto::Const(c) if *c == 1.0 => f.write_str("one"),
            FunctionDto::Const(c) => write!(f, "const:{c}"),
            FunctionDto::Cos => f.write_str("cos"),
            FunctionDto::Sin => f.write_str("sin"),
            FunctionDto::ExpCos => f.write_str("exp-cos"),
            FunctionDto::Time => f.write_str("t"),
            FunctionDto::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl Serialize for FunctionDto {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FunctionDto {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn read_table(path: &PathBuf) -> Result<Vec<(f64, f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        if rec.len() != 3 {
            bail!("{}: line {}: expected columns t,x,value", path.display(), i + 2);
        }
        let v: Vec<f64> = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        out.push((v[0], v[1], v[2]));
    }
    Ok(out)
}

impl FunctionDto {
    pub fn is_zero(&self) -> bool {
        matches!(self, FunctionDto::Const(c) if *c == 0.0)
    }

    fn closed(&self) -> Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
        Some(match self {
            FunctionDto::Const(c) => {
                let c = *c;
                Arc::new(move |_, _| c)
            }
            FunctionDto::Cos => Arc::new(|_, x: f64| x.cos()),
            FunctionDto::Sin => Arc::new(|_, x: f64| x.sin()),
            FunctionDto::ExpCos => Arc::new(|_, x: f64| x.cos().exp()),
            FunctionDto::Time => Arc::new(|t, _| t),
            FunctionDto::Csv(_) => return None,
        })
    }

    /// Tabulated source; the CSV must cover the full product grid in
    /// time-major order.
    pub fn source(&self) -> Result<Source> {
        if self.is_zero() {
            return Ok(Source::Zero);
        }
        if let Some(f) = self.closed() {
            return Ok(Source::Func(f));
        }
        let FunctionDto::Csv(path) = self else { unreachable!() };
        let rows = read_table(path)?;
        let mut ts: Vec<f64> = rows.iter().map(|r| r.0).collect();
        ts.dedup();
        let width = rows.len() / ts.len().max(1);
        if ts.len() * width != rows.len() || ts.len() < 2 {
            bail!("{}: rows do not form a time-major product grid", path.display());
        }
        let xs: Vec<f64> = rows[..width].iter().map(|r| r.1).collect();
        let space = if width == 1 { SpaceGrid::Scalar } else { SpaceGrid::Line(xs) };
        let time = TimeGrid::from_nodes(ts)?;
        Ok(Source::Grid(GridFunction::new(time, space, rows.iter().map(|r| r.2).collect())?))
    }

    /// Initial datum; CSV form holds `x,value` rows (the `t` column is ignored).
    pub fn initial(&self) -> Result<Initial> {
        if self.is_zero() {
            return Ok(Initial::Zero);
        }
        if let Some(f) = self.closed() {
            return Ok(Initial::Func(Arc::new(move |x| f(0.0, x))));
        }
        let FunctionDto::Csv(path) = self else { unreachable!() };
        Ok(Initial::Grid(read_table(path)?.into_iter().map(|r| r.2).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_json_round_trip() {
        let k: KernelDto = serde_json::from_str(r#"{"family":"tempered","beta":0.5,"lambda":1.0}"#).unwrap();
        assert_eq!(k, KernelDto::Tempered { beta: 0.5, lambda: 1.0 });
        assert!(serde_json::from_str::<KernelDto>(r#"{"family":"classical","beta":0.5,"x":1}"#).is_err());
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<KernelDto>(&s).unwrap(), k);
    }

    #[test]
    fn tabulated_kernel_reproduces_power_law() {
        let radii: Vec<f64> = (0..7).map(|i| 10f64.powi(i - 4)).collect();
        let beta: f64 = 0.5;
        let c = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
        let row: Vec<f64> = radii.iter().map(|r| c * r.powf(-1.0 - beta) * (-0.5 * r).exp()).collect();
        let k = KernelDto::Custom { times: vec![0.0], radii, values: vec![row], envelope: None }.build(0.0, 1.0).unwrap();
        let exact = KernelSpec::tempered(0.5, 0.5, 0.0, 1.0).unwrap();
        for &r in &[1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let (x, y) = (k.evaluate(0.5, r).unwrap(), exact.evaluate(0.5, r).unwrap());
            assert!((x / y - 1.0).abs() < 0.3, "{r}: {x} {y}");
        }
        assert!((k.tail_mass(0.5, 1e-3).unwrap() / exact.tail_mass(0.5, 1e-3).unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn function_names() {
        for s in ["zero", "one", "const:2.5", "cos", "exp-cos", "t", "csv:a.csv"] {
            let f: FunctionDto = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("nope".parse::<FunctionDto>().is_err());
    }
}
