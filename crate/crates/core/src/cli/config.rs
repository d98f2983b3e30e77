use serde::{Deserialize, Serialize};

use crate::cartan_align::AlignMode;
use crate::construct::{ConstructOptions, SeedMode, SEED_SCALE};
use crate::error::{Error, Result};
use crate::obstruction::{GeometryCase, DEFAULT_SEED};

use super::output::to_json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub spacing: f64,
    /// Domain dimension r; None means dim V.
    pub dims: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { half_width: 1.0, spacing: 1.0 / 16.0, dims: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub orthogonality: f64,
    /// Relative residual of the λ-structure fit of the connection.
    pub fit: f64,
    pub off_pattern: f64,
    /// Maurer–Cartan face residuals must stay below mc_per_h2 * h^2.
    pub mc_per_h2: f64,
    pub metric_spread: f64,
    pub sff: f64,
    pub curvature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { orthogonality: 1e-10, fit: 1e-6, off_pattern: 1e-7, mc_per_h2: 1e-3, metric_spread: 1e-6, sff: 1e-6, curvature: 1e-3 }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("orthogonality", self.orthogonality),
            ("fit", self.fit),
            ("off_pattern", self.off_pattern),
            ("mc_per_h2", self.mc_per_h2),
            ("metric_spread", self.metric_spread),
            ("sff", self.sff),
            ("curvature", self.curvature),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub format: Format,
    pub samples_csv: bool,
    pub frame_dump: bool,
    pub obj: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, format: Format::Table, samples_csv: true, frame_dump: true, obj: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub seed_mode: SeedMode,
    pub grid: GridConfig,
    pub lambdas: Vec<f64>,
    pub degree: usize,
    pub scale: f64,
    pub align_mode: AlignMode,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
    pub rng_seed: u64,
    pub force: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = ConstructOptions::default();
        RunConfig {
            case: "cpn-real:n=2".into(),
            seed_mode: SeedMode::Aligned,
            grid: GridConfig::default(),
            lambdas: vec![1.0, 2.0],
            degree: c.degree,
            scale: SEED_SCALE,
            align_mode: AlignMode::Constructive,
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
            rng_seed: DEFAULT_SEED,
            force: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self, true)
    }

    pub fn validate(&self) -> Result<()> {
        GeometryCase::parse(&self.case).map_err(|e| Error::Config(e.to_string()))?;
        self.tolerances.validate()?;
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !l.is_finite() || *l == 0.0) {
            return Err(Error::Config("lambdas must be a non-empty list of finite nonzero values".into()));
        }
        let g = &self.grid;
        if !(g.half_width.is_finite() && g.half_width > 0.0 && g.spacing.is_finite() && g.spacing > 0.0) {
            return Err(Error::Config("grid half width and spacing must be positive".into()));
        }
        if g.dims == Some(0) {
            return Err(Error::Config("grid dimension must be positive".into()));
        }
        if self.degree == 0 {
            return Err(Error::Config("truncation degree must be positive".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config("seed scale must be positive".into()));
        }
        Ok(())
    }

    pub fn construct_options(&self) -> ConstructOptions {
        ConstructOptions {
            half_width: self.grid.half_width,
            spacing: self.grid.spacing,
            scale: self.scale,
            degree: self.degree,
            rng_seed: self.rng_seed,
            mode: self.align_mode,
            force: self.force,
            seed_mode: self.seed_mode.clone(),
            dims: self.grid.dims,
        }
    }
}

/// "L,h" or "L,h,r".
pub fn parse_grid(s: &str) -> Result<GridConfig> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(Error::Config(format!("--grid expects L,h or L,h,r, got {s:?}")));
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| Error::Config(format!("--grid: bad number {p:?}")));
    let dims = match parts.get(2) {
        Some(r) => Some(r.parse::<usize>().map_err(|_| Error::Config(format!("--grid: bad dimension {r:?}")))?),
        None => None,
    };
    Ok(GridConfig { half_width: num(parts[0])?, spacing: num(parts[1])?, dims })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default() {
        let c = RunConfig::default();
        let text = c.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(c, back);
        assert_eq!(text, back.to_json().unwrap());
    }

    #[test]
    fn round_trip_explicit() {
        let mut c = RunConfig::default();
        c.seed_mode = SeedMode::Explicit(vec![vec![0.1, -1.0 / 3.0, 2e-17, 0.0]]);
        c.lambdas = vec![0.7, -1.3, std::f64::consts::PI];
        c.grid.dims = Some(2);
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let mut c = RunConfig::default();
        c.tolerances.fit = 0.0;
        assert!(matches!(RunConfig::from_json(&c.to_json().unwrap()), Err(Error::Config(_))));
        assert!(RunConfig::from_json(r#"{"case": "nope"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn grid_flag() {
        let g = parse_grid("1,0.125").unwrap();
        assert_eq!((g.half_width, g.spacing, g.dims), (1.0, 0.125, None));
        assert_eq!(parse_grid("0.5, 0.0625, 2").unwrap().dims, Some(2));
        assert!(parse_grid("1").is_err());
    }
}
