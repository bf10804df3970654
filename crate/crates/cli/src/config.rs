//! Flat JSON run configuration. Command-line flags are overlaid key by key.

use std::path::{Path, PathBuf};

use riemheat::admissible::{AdmissibilityParams, GridSpec};
use riemheat::exponents::{parse_rational, Variant, Q};
use riemheat::geometry::ModelSpec;
use riemheat::heatflow::{ForcingSpec, ProblemSpec};
use riemheat::norms::FieldKind;
use riemheat::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub dim: Option<usize>,
    pub box_lo: Option<Vec<f64>>,
    pub box_hi: Option<Vec<f64>>,
    pub periodic: Option<bool>,

    pub grid: Option<String>,
    pub grid_lo: Option<Vec<f64>>,
    pub grid_hi: Option<Vec<f64>>,

    pub m: Option<u32>,
    pub eps: Option<f64>,
    pub sample_density: Option<f64>,
    pub bisection_tol: Option<f64>,
    pub max_radius: Option<f64>,

    pub k: Option<u32>,

    pub n: Option<u32>,
    pub r: Option<String>,
    pub variant: Option<String>,

    pub kind: Option<FieldKind>,
    pub cells: Option<usize>,
    pub h: Option<f64>,
    pub solve_lo: Option<Vec<f64>>,
    pub solve_hi: Option<Vec<f64>>,
    pub forcing: Option<Value>,
    pub horizon: Option<f64>,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub estimates: Option<bool>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub s: Option<f64>,

    pub suite: Option<String>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` (if any) and overlays the non-null entries of `flags`.
    pub fn load(path: Option<&Path>, flags: &impl Serialize) -> Result<Self> {
        let mut base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                // typed pass first, for line/column diagnostics
                if let Err(e) = serde_json::from_str::<RunConfig>(&text) {
                    return Err(Error::Config(format!("{}: {e}", p.display())));
                }
                match serde_json::from_str::<Value>(&text)? {
                    Value::Object(m) => m,
                    _ => return Err(Error::Config(format!("{}: top level must be an object", p.display()))),
                }
            }
            None => Map::new(),
        };
        if let Value::Object(over) = serde_json::to_value(flags)? {
            for (k, v) in over {
                if !v.is_null() {
                    base.insert(k, v);
                }
            }
        }
        let origin = path.map(|p| p.display().to_string()).unwrap_or_else(|| "flags".into());
        serde_json::from_value(Value::Object(base)).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("riemheat-out"))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let name = self.model.as_deref().ok_or_else(|| Error::Config("missing `model`".into()))?;
        let mut spec = ModelSpec::parse(name, self.dim.unwrap_or(2))?;
        match (&self.box_lo, &self.box_hi) {
            (Some(lo), Some(hi)) => spec = spec.with_box(lo, hi),
            (None, None) => {}
            _ => return Err(Error::Config("`box_lo` and `box_hi` go together".into())),
        }
        if self.periodic == Some(true) {
            spec = spec.periodic();
        }
        Ok(spec)
    }

    pub fn params(&self) -> Result<AdmissibilityParams<f64>> {
        let m = self.m.unwrap_or(2) as usize;
        let mut p = AdmissibilityParams::new(m, self.eps.unwrap_or(0.2));
        if let Some(d) = self.sample_density {
            p = p.with_density(d);
        }
        if let Some(t) = self.bisection_tol {
            p = p.with_tol(t);
        }
        if let Some(r) = self.max_radius {
            p = p.with_max_radius(r);
        }
        Ok(p)
    }

    /// Sampling grid: `grid` counts (`16x16`) over `grid_lo..grid_hi`. The
    /// default region is the working box inset by a fifth of its width on
    /// each side, away from the radius cap at the box faces.
    pub fn grid_spec(&self, spec: &ModelSpec) -> Result<GridSpec<f64>> {
        let (blo, bhi) = spec.resolved_box()?;
        let n = blo.len();
        let inset = |i: usize| (bhi[i] - blo[i]) / 5.0;
        let lo = self.grid_lo.clone().unwrap_or_else(|| (0..n).map(|i| blo[i] + inset(i)).collect());
        let hi = self.grid_hi.clone().unwrap_or_else(|| (0..n).map(|i| bhi[i] - inset(i)).collect());
        let counts = match &self.grid {
            Some(g) => parse_counts(g, n)?,
            None => vec![8; n],
        };
        if lo.len() != n || hi.len() != n {
            return Err(Error::Config(format!("grid bounds need {n} coordinates")));
        }
        Ok(GridSpec::new(&lo, &hi, &counts))
    }

    pub fn exponent_inputs(&self) -> Result<(u32, u32, Q, Variant)> {
        let m = self.m.unwrap_or(2);
        let n = self.n.or(self.dim.map(|d| d as u32)).unwrap_or(2);
        let r = parse_rational(self.r.as_deref().unwrap_or("2"))?;
        let variant = self.variant.as_deref().unwrap_or("sections").parse()?;
        Ok((m, n, r, variant))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let model = self.model_spec()?;
        let kind = self.kind.unwrap_or(FieldKind::Scalar);
        let cells = match (self.h, self.cells) {
            (Some(h), _) => {
                if h.is_nan() || h <= 0.0 {
                    return Err(Error::Config(format!("h = {h} must be positive")));
                }
                let (lo, hi) = model.resolved_box()?;
                let lo = self.solve_lo.as_ref().unwrap_or(&lo);
                let hi = self.solve_hi.as_ref().unwrap_or(&hi);
                ((hi[0] - lo[0]) / h).round().max(1.0) as usize
            }
            (None, Some(c)) => c,
            (None, None) => 32,
        };
        let forcing = match &self.forcing {
            None => ForcingSpec::Eigen { amplitude: 1.0 },
            Some(Value::String(name)) => forcing_by_name(name)?,
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("forcing: {e}")))?,
        };
        Ok(ProblemSpec {
            model,
            kind,
            cells,
            lo: self.solve_lo.clone(),
            hi: self.solve_hi.clone(),
            forcing,
            horizon: self.horizon.unwrap_or(1.0),
            alpha: self.alpha.unwrap_or(0.25),
            dt: self.dt.unwrap_or(0.01),
        })
    }
}

/// `--forcing zero`, `--forcing eigen`, or an inline JSON object.
fn forcing_by_name(text: &str) -> Result<ForcingSpec> {
    let t = text.trim();
    if t.starts_with('{') {
        return serde_json::from_str(t).map_err(|e| Error::Config(format!("forcing: {e}")));
    }
    match t {
        "zero" => Ok(ForcingSpec::Zero),
        "eigen" => Ok(ForcingSpec::Eigen { amplitude: 1.0 }),
        other => Err(Error::Config(format!("unknown forcing `{other}` (zero, eigen, or a JSON object)"))),
    }
}

pub fn parse_counts(text: &str, n: usize) -> Result<Vec<usize>> {
    let counts: Vec<usize> = text
        .split(['x', 'X'])
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad grid `{text}`, expected e.g. 16x16"))))
        .collect::<Result<_>>()?;
    match counts.len() {
        1 => Ok(vec![counts[0]; n]),
        l if l == n => Ok(counts),
        l => Err(Error::Config(format!("grid `{text}` has {l} axes, model has {n}"))),
    }
}
