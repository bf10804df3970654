//! Exact bootstrap bookkeeping: the integrability chain, the step count
//! `k*`, the exponent recurrences and their closed forms, radius weights and
//! the weighted-embedding exponents.

use std::fmt;

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Q = Rational64;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

/// Parses `"p"`, `"p/q"` or a terminating decimal such as `"2.5"`.
pub fn parse_rational(text: &str) -> Result<Q> {
    let t = text.trim();
    let bad = || Error::Config(format!("`{t}` is not a rational number"));
    if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Q::new(a, b));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10i64.pow(frac.len() as u32);
        let num: i64 = frac.parse().map_err(|_| bad())?;
        let sign = if neg { -1 } else { 1 };
        return Ok(Q::new(whole.abs() * den + num, den) * q(sign));
    }
    Ok(q(t.parse().map_err(|_| bad())?))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `p/q (decimal)`, or just the integer.
pub fn render(x: &Q) -> String {
    if x.is_integer() {
        x.to_integer().to_string()
    } else {
        format!("{x} ({})", to_f64(x))
    }
}

fn ceil(x: Q) -> i64 {
    x.ceil().to_integer()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Sections,
    Functions,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sections" => Ok(Self::Sections),
            "functions" => Ok(Self::Functions),
            other => Err(Error::Config(format!("unknown variant `{other}` (sections | functions)"))),
        }
    }
}

/// An entry of the integrability chain, `+inf` once `1/2 - k m / n <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrability {
    Finite(Q),
    Infinite,
}

impl Integrability {
    pub fn at_least(&self, r: Q) -> bool {
        match self {
            Self::Finite(v) => *v >= r,
            Self::Infinite => true,
        }
    }
}

impl fmt::Display for Integrability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Integrability {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn check_inputs(m: u32, n: u32, r: Q) -> Result<()> {
    if m < 1 {
        return Err(Error::Domain("operator order m must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::Domain("dimension n must be at least 2".into()));
    }
    if r < q(2) {
        return Err(Error::Domain(format!("r = {r} must be at least 2")));
    }
    Ok(())
}

/// `rho_k` with `1/rho_k = 1/2 - k m / n`.
pub fn rho(m: u32, n: u32, k: u32) -> Integrability {
    let inv = Q::new(1, 2) - Q::new(k as i64 * m as i64, n as i64);
    if inv <= Q::zero() {
        Integrability::Infinite
    } else {
        Integrability::Finite(inv.recip())
    }
}

/// `ceil(n (r - 2) / (2 m r))`.
pub fn k_star(m: u32, n: u32, r: Q) -> Result<u32> {
    check_inputs(m, n, r)?;
    let v = q(n as i64) * (r - q(2)) / (q(2 * m as i64) * r);
    Ok(ceil(v) as u32)
}

/// `rho_0 = 2, ..., rho_{k*}`.
pub fn integrability_chain(m: u32, n: u32, r: Q) -> Result<Vec<Integrability>> {
    let k = k_star(m, n, r)?;
    Ok((0..=k).map(|j| rho(m, n, j)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExponentRow {
    pub k: u32,
    pub rho: Integrability,
    #[serde(serialize_with = "ser_q")]
    pub a: Q,
    #[serde(serialize_with = "ser_q")]
    pub b: Q,
    #[serde(serialize_with = "ser_q")]
    pub d: Q,
}

fn ser_q<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// The bootstrap sequence through `k*` and the terminal exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentTable {
    pub m: u32,
    pub n: u32,
    pub r: Q,
    pub variant: Variant,
    pub k_star: u32,
    pub rows: Vec<ExponentRow>,
    /// Terminal exponents from the closed-form definition.
    pub beta: Q,
    pub gamma: Q,
    pub delta: Q,
    /// The cap in the definition of `beta` differs from the one the
    /// recurrence produces and actually binds here.
    pub cap_conflict: bool,
}

impl ExponentTable {
    pub fn last(&self) -> &ExponentRow {
        self.rows.last().expect("table has at least IH(0)")
    }

    /// Aligned text rendering.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "m = {}, n = {}, r = {}, variant = {:?}, k* = {}\n",
            self.m,
            self.n,
            render(&self.r),
            self.variant,
            self.k_star
        );
        out += &format!("{:>3}  {:>10}  {:>12}  {:>8}  {:>8}\n", "k", "rho_k", "a_k", "b_k", "d_k");
        for row in &self.rows {
            out += &format!(
                "{:>3}  {:>10}  {:>12}  {:>8}  {:>8}\n",
                row.k,
                row.rho.to_string(),
                row.a.to_string(),
                row.b.to_string(),
                row.d.to_string()
            );
        }
        out += &format!(
            "beta = {}, gamma = {}, delta = {}\n",
            render(&self.beta),
            render(&self.gamma),
            render(&self.delta)
        );
        if self.cap_conflict {
            out += "note: the beta cap of the definition differs from the recurrence's and binds\n";
        }
        out
    }
}

impl Serialize for ExponentTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ExponentTable", 11)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("r", &self.r.to_string())?;
        st.serialize_field("variant", &self.variant)?;
        st.serialize_field("k_star", &self.k_star)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("beta", &self.beta.to_string())?;
        st.serialize_field("gamma", &self.gamma.to_string())?;
        st.serialize_field("delta", &self.delta.to_string())?;
        st.serialize_field("beta_decimal", &to_f64(&self.beta))?;
        st.serialize_field("cap_conflict", &self.cap_conflict)?;
        st.end()
    }
}

/// `(beta, gamma, delta)` by the closed-form definition; primed
/// (function) exponents when `variant` is `Functions`.
pub fn closed_form_terminal(m: u32, n: u32, r: Q, variant: Variant) -> Result<(Q, Q, Q)> {
    let k = k_star(m, n, r)? as i64;
    let (m, n) = (m as i64, n as i64);
    let a0 = q(m) + Q::new(n, 2) - q(n) / r;
    if k == 0 {
        return Ok((a0, q(2 * m), q(m)));
    }
    Ok(match variant {
        Variant::Sections => (a0.min(q(5 * m)), q((4 * k + 2) * m), q((4 * k + 1) * m)),
        Variant::Functions => (a0.min(q(4 * m)), q((4 * m - 1) * k + 2 * m), q((4 * m - 1) * k + m)),
    })
}

/// `(a_k, b_k, d_k)` closed forms for `k >= 1`.
pub fn closed_form_row(m: u32, n: u32, r: Q, k: u32, variant: Variant) -> (Q, Q, Q) {
    let (m, n, k) = (m as i64, n as i64, k as i64);
    let a0 = q(m) + Q::new(n, 2) - q(n) / r;
    if k == 0 {
        return (a0, q(2 * m), q(m));
    }
    match variant {
        Variant::Sections => (a0.min(q(5 * m)), q(4 * m * k + 2 * m), q(4 * m * k + m)),
        Variant::Functions => (a0.min(q(5 * m - 1)), q(k * (4 * m - 1) + 2 * m), q(m + k * (4 * m - 1))),
    }
}

/// Iterates the recurrence from `IH(0)` through `k*` and checks it against
/// the closed forms.
pub fn bootstrap_table(m: u32, n: u32, r: Q, variant: Variant) -> Result<ExponentTable> {
    let ks = k_star(m, n, r)?;
    let (mi, ni) = (m as i64, n as i64);
    let (step_d, step_b) = match variant {
        Variant::Sections => (3 * mi, 4 * mi),
        Variant::Functions => (3 * mi - 1, 4 * mi - 1),
    };
    let mut a = q(mi) + Q::new(ni, 2) - q(ni) / r;
    let mut b = q(2 * mi);
    let mut d = q(mi);
    let mut rows = vec![ExponentRow { k: 0, rho: rho(m, n, 0), a, b, d }];
    for k in 1..=ks {
        let next_d = q(step_d) + b;
        let next_b = q(step_b) + b;
        a = a.min(q(step_d) + b);
        b = next_b;
        d = next_d;
        rows.push(ExponentRow { k, rho: rho(m, n, k), a, b, d });
    }
    for row in &rows {
        let (ca, cb, cd) = closed_form_row(m, n, r, row.k, variant);
        if (row.a, row.b, row.d) != (ca, cb, cd) {
            return Err(Error::Numerical(format!(
                "recurrence row {} = ({}, {}, {}) disagrees with closed form ({ca}, {cb}, {cd})",
                row.k, row.a, row.b, row.d
            )));
        }
    }
    let (beta, gamma, delta) = closed_form_terminal(m, n, r, variant)?;
    let last = rows.last().expect("row 0 exists");
    if (gamma, delta) != (last.b, last.d) {
        return Err(Error::Numerical(format!(
            "terminal (gamma, delta) = ({gamma}, {delta}) disagrees with recurrence ({}, {})",
            last.b, last.d
        )));
    }
    let cap_conflict = beta != last.a;
    Ok(ExponentTable { m, n, r, variant, k_star: ks, rows, beta, gamma, delta, cap_conflict })
}

/// Weight exponents `w1 = r delta`, `w2 = r gamma`, `w3 = r beta`; a weight
/// evaluates as `R(x)^exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightSpec {
    pub variant: Variant,
    pub w1_exp: Q,
    pub w2_exp: Q,
    pub w3_exp: Q,
}

impl Serialize for WeightSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("WeightSpec", 4)?;
        st.serialize_field("variant", &self.variant)?;
        st.serialize_field("w1_exp", &self.w1_exp.to_string())?;
        st.serialize_field("w2_exp", &self.w2_exp.to_string())?;
        st.serialize_field("w3_exp", &self.w3_exp.to_string())?;
        st.end()
    }
}

pub fn weight_spec(table: &ExponentTable, r: Q) -> WeightSpec {
    WeightSpec { variant: table.variant, w1_exp: r * table.delta, w2_exp: r * table.gamma, w3_exp: r * table.beta }
}

impl WeightSpec {
    /// `R^exp` for a radius `R` in `(0, 1]`.
    pub fn weight<T: crate::scalar::Real>(exp: &Q, radius: T) -> T {
        radius.powf(crate::scalar::lit(to_f64(exp)))
    }

    /// `(w1, w2, w3)` at every sample of a radius field.
    pub fn evaluate<T: crate::scalar::Real>(&self, field: &crate::admissible::RadiusField<T>) -> Vec<[T; 3]> {
        field
            .samples
            .iter()
            .map(|s| {
                [
                    Self::weight(&self.w1_exp, s.r_eps),
                    Self::weight(&self.w2_exp, s.r_eps),
                    Self::weight(&self.w3_exp, s.r_eps),
                ]
            })
            .collect()
    }
}

/// `s = n r / (n - r m)` and `nu = s (2 + gamma / r)`.
pub fn embedding_exponents(m: u32, n: u32, r: Q, gamma: Q) -> Result<(Q, Q)> {
    let (m, n) = (q(m as i64), q(n as i64));
    let den = n - r * m;
    if !den.is_positive() {
        return Err(Error::Domain(format!("embedding needs n > r m (n - r m = {den})")));
    }
    let s = n * r / den;
    Ok((s, s * (q(2) + gamma / r)))
}

/// `r Vol(B_M(x, r)) / (Vol(B_M(x, r)) + Vol(B_T(0, 2 r)))`.
pub fn cgt_injectivity_lower_bound(r: f64, vol_ball: f64, vol_tangent_ball: f64) -> Result<f64> {
    if !(r > 0.0 && vol_ball > 0.0 && vol_tangent_ball > 0.0) {
        return Err(Error::Domain("radius and volumes must be positive".into()));
    }
    Ok(r * vol_ball / (vol_ball + vol_tangent_ball))
}

/// Smallest `k` with `rho_k >= r`, by scanning the chain.
pub fn k_star_by_scan(m: u32, n: u32, r: Q) -> u32 {
    (0..).find(|&k| rho(m, n, k).at_least(r)).expect("chain reaches infinity")
}
