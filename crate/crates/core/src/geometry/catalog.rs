use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chart::{CoordBox, MetricChart};
use super::models::{Euclidean, FlatTorus, HyperbolicBall, HyperbolicHalfPlane, PerturbedEuclidean};
use crate::error::{Error, Result};
use crate::linalg::point;
use crate::scalar::{lit, Real};

pub type Chart<T> = Arc<dyn MetricChart<T>>;

pub const MODEL_NAMES: [&str; 5] =
    ["euclidean", "perturbed-euclidean", "hyperbolic-halfplane", "hyperbolic-ball", "flat-torus"];

/// Serializable model selection: catalog name, dimension, parameters, optional box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub periodic: bool,
}

impl ModelSpec {
    pub fn new(model: &str, dim: usize) -> Self {
        Self { model: model.into(), dim, a: None, frequency: None, length: None, lo: None, hi: None, periodic: false }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new("euclidean", dim)
    }

    pub fn perturbed(dim: usize, a: f64, frequency: f64) -> Self {
        Self { a: Some(a), frequency: Some(frequency), ..Self::new("perturbed-euclidean", dim) }
    }

    pub fn halfplane(dim: usize) -> Self {
        Self::new("hyperbolic-halfplane", dim)
    }

    pub fn poincare(dim: usize) -> Self {
        Self::new("hyperbolic-ball", dim)
    }

    pub fn torus(dim: usize, length: f64) -> Self {
        Self { length: Some(length), ..Self::new("flat-torus", dim) }
    }

    pub fn with_box(mut self, lo: &[f64], hi: &[f64]) -> Self {
        self.lo = Some(lo.to_vec());
        self.hi = Some(hi.to_vec());
        self
    }

    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    /// Parses `name` or `name(p1, p2)`; positional parameters are
    /// `(a, frequency)` for the perturbed model and `(L)` for the torus.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            Some(i) => {
                let inner = text[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in model `{text}`")))?;
                let vals = inner
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad model parameter `{}`", s.trim())))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (text[..i].trim(), vals)
            }
            None => (text, Vec::new()),
        };
        if !MODEL_NAMES.contains(&name) {
            return Err(Error::Config(format!("unknown model `{name}` (known: {})", MODEL_NAMES.join(", "))));
        }
        let mut spec = Self::new(name, dim);
        match name {
            "perturbed-euclidean" => {
                spec.a = args.first().copied();
                spec.frequency = args.get(1).copied();
            }
            "flat-torus" => spec.length = args.first().copied(),
            _ if !args.is_empty() => return Err(Error::Config(format!("model `{name}` takes no parameters"))),
            _ => {}
        }
        Ok(spec)
    }

    /// Working box this spec resolves to, before construction.
    pub fn resolved_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim;
        let defaults: (Vec<f64>, Vec<f64>) = match self.model.as_str() {
            "euclidean" => (vec![0.0; n], vec![10.0; n]),
            "perturbed-euclidean" if self.periodic => {
                let p = 2.0 * PI / self.frequency.unwrap_or(1.0).abs();
                (vec![0.0; n], vec![p; n])
            }
            "perturbed-euclidean" => (vec![-4.0; n], vec![4.0; n]),
            "hyperbolic-halfplane" => {
                let mut lo = vec![-2.0; n];
                let mut hi = vec![2.0; n];
                lo[n - 1] = 0.25;
                hi[n - 1] = 4.0;
                (lo, hi)
            }
            "hyperbolic-ball" => {
                let b = if n == 2 { 0.7 } else { 0.55 };
                (vec![-b; n], vec![b; n])
            }
            "flat-torus" => {
                let l = self.length.unwrap_or(2.0 * PI);
                (vec![0.0; n], vec![l; n])
            }
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        let lo = self.lo.clone().unwrap_or(defaults.0);
        let hi = self.hi.clone().unwrap_or(defaults.1);
        if lo.len() != n || hi.len() != n {
            return Err(Error::Config(format!("box bounds must have {n} entries")));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Config("box lower bounds must be below upper bounds".into()));
        }
        Ok((lo, hi))
    }

    pub fn build<T: Real>(&self) -> Result<Chart<T>> {
        let n = self.dim;
        if !(2..=3).contains(&n) {
            return Err(Error::Capability(format!("dimension {n} unsupported (2 or 3)")));
        }
        let (lo, hi) = self.resolved_box()?;
        let lo_t: Vec<T> = lo.iter().map(|&v| lit(v)).collect();
        let hi_t: Vec<T> = hi.iter().map(|&v| lit(v)).collect();
        let bx = if self.periodic {
            CoordBox::periodic(n, point(&lo_t), point(&hi_t))
        } else {
            CoordBox::new(n, point(&lo_t), point(&hi_t))
        };
        let chart: Chart<T> = match self.model.as_str() {
            "euclidean" => Arc::new(Euclidean::new(bx)),
            "perturbed-euclidean" => {
                let a = self.a.unwrap_or(0.1);
                if !(a.abs() < 1.0) {
                    return Err(Error::Config(format!("perturbation amplitude {a} must satisfy |a| < 1")));
                }
                let f = self.frequency.unwrap_or(1.0);
                if self.periodic {
                    let period = 2.0 * PI / f.abs();
                    let cells = (hi[0] - lo[0]) / period;
                    if (cells - cells.round()).abs() > 1e-9 || cells.round() < 1.0 {
                        return Err(Error::Config(
                            "periodic perturbed box must span whole metric periods in x1".into(),
                        ));
                    }
                }
                Arc::new(PerturbedEuclidean::new(lit(a), lit(f), bx))
            }
            "hyperbolic-halfplane" => {
                if lo[n - 1] <= 0.0 {
                    return Err(Error::Config("half-plane box needs y_min > 0".into()));
                }
                if self.periodic {
                    return Err(Error::Config("half-plane box cannot be periodic".into()));
                }
                Arc::new(HyperbolicHalfPlane::new(bx))
            }
            "hyperbolic-ball" => {
                if self.periodic {
                    return Err(Error::Config("ball model box cannot be periodic".into()));
                }
                Arc::new(HyperbolicBall::new(bx))
            }
            "flat-torus" => {
                let l = self.length.unwrap_or(2.0 * PI);
                if !(l > 0.0) {
                    return Err(Error::Config(format!("torus period {l} must be positive")));
                }
                Arc::new(FlatTorus::new(n, lit(l)))
            }
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        Ok(chart)
    }
}
