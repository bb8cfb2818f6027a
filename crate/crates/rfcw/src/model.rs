//! Microscopic random-field Curie-Weiss model and its Metropolis dynamics.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::ReversibleChain;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub beta: f64,
}

impl SystemParams {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("N = {n} must be at least 2")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        Ok(SystemParams { n, beta })
    }
}

/// Law of the i.i.d. fields. All variants have bounded support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDistribution {
    Constant { c: f64 },
    /// `+eps` with probability `p`, `-eps` otherwise.
    TwoValued { eps: f64, p: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl FieldDistribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            FieldDistribution::Constant { c } if !c.is_finite() => bad("constant field must be finite"),
            FieldDistribution::TwoValued { eps, p } => {
                if !eps.is_finite() || !(0.0..=1.0).contains(p) {
                    bad("two_valued needs finite eps and p in [0,1]")
                } else {
                    Ok(())
                }
            }
            FieldDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    bad("uniform needs finite lo < hi")
                } else {
                    Ok(())
                }
            }
            FieldDistribution::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete needs matching non-empty values and probs");
                }
                if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(*p >= 0.0)) {
                    return bad("discrete values must be finite and probs non-negative");
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return bad("discrete probabilities must sum to 1");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Smallest C with support inside [-C, C].
    pub fn support_bound(&self) -> f64 {
        match self {
            FieldDistribution::Constant { c } => c.abs(),
            FieldDistribution::TwoValued { eps, .. } => eps.abs(),
            FieldDistribution::Uniform { lo, hi } => lo.abs().max(hi.abs()),
            FieldDistribution::Discrete { values, .. } => values.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    /// Support interval `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            FieldDistribution::Constant { c } => (*c, *c),
            FieldDistribution::TwoValued { eps, .. } => (-eps.abs(), eps.abs()),
            FieldDistribution::Uniform { lo, hi } => (*lo, *hi),
            FieldDistribution::Discrete { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            FieldDistribution::Constant { c } => *c,
            FieldDistribution::TwoValued { eps, p } => {
                if rng.random::<f64>() < *p {
                    *eps
                } else {
                    -*eps
                }
            }
            FieldDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            FieldDistribution::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }

    /// Quantile function, right-continuous at atoms.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            FieldDistribution::Constant { c } => *c,
            FieldDistribution::TwoValued { eps, p } => {
                if u < 1.0 - p {
                    -*eps
                } else {
                    *eps
                }
            }
            FieldDistribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            FieldDistribution::Discrete { values, probs } => {
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                let mut acc = 0.0;
                for &i in &order {
                    acc += probs[i];
                    if u < acc {
                        return values[i];
                    }
                }
                values[*order.last().unwrap()]
            }
        }
    }

    /// Quadrature rule `(nodes, weights)` representing the law.
    pub fn quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            FieldDistribution::Constant { c } => (vec![*c], vec![1.0]),
            FieldDistribution::TwoValued { eps, p } => (vec![*eps, -*eps], vec![*p, 1.0 - *p]),
            FieldDistribution::Uniform { lo, hi } => {
                let (x, w) = crate::util::gauss_legendre(64, *lo, *hi);
                let len = hi - lo;
                (x, w.into_iter().map(|w| w / len).collect())
            }
            FieldDistribution::Discrete { values, probs } => (values.clone(), probs.clone()),
        }
    }

    pub fn mean(&self) -> f64 {
        let (x, w) = self.quadrature();
        x.iter().zip(&w).map(|(x, w)| x * w).sum()
    }
}

impl fmt::Display for FieldDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldDistribution::Constant { c } => write!(f, "constant({c})"),
            FieldDistribution::TwoValued { eps, p } => write!(f, "two_valued({eps},{p})"),
            FieldDistribution::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            FieldDistribution::Discrete { values, probs } => {
                write!(f, "discrete(")?;
                for (i, (v, p)) in values.iter().zip(probs).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for FieldDistribution {
    type Err = Error;

    /// Parses `constant(c)`, `two_valued(eps[,p])`, `uniform(lo,hi)` or
    /// `discrete(v1:p1,v2:p2,...)`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let err = || Error::Parse(format!("bad distribution '{s}'"));
        let open = s.find('(').ok_or_else(err)?;
        if !s.ends_with(')') {
            return Err(err());
        }
        let name = &s[..open];
        let body = &s[open + 1..s.len() - 1];
        let nums = |b: &str| -> Result<Vec<f64>> {
            b.split(',').map(|t| t.parse::<f64>().map_err(|_| err())).collect()
        };
        let d = match name {
            "constant" => {
                let v = nums(body)?;
                if v.len() != 1 {
                    return Err(err());
                }
                FieldDistribution::Constant { c: v[0] }
            }
            "two_valued" => {
                let v = nums(body)?;
                match v.len() {
                    1 => FieldDistribution::TwoValued { eps: v[0], p: 0.5 },
                    2 => FieldDistribution::TwoValued { eps: v[0], p: v[1] },
                    _ => return Err(err()),
                }
            }
            "uniform" => {
                let v = nums(body)?;
                if v.len() != 2 {
                    return Err(err());
                }
                FieldDistribution::Uniform { lo: v[0], hi: v[1] }
            }
            "discrete" => {
                let mut values = Vec::new();
                let mut probs = Vec::new();
                for item in body.split(',') {
                    let (v, p) = item.split_once(':').ok_or_else(err)?;
                    values.push(v.parse().map_err(|_| err())?);
                    probs.push(p.parse().map_err(|_| err())?);
                }
                FieldDistribution::Discrete { values, probs }
            }
            _ => return Err(err()),
        };
        d.validate()?;
        Ok(d)
    }
}

/// One disorder realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomField {
    pub h: Vec<f64>,
    pub dist: FieldDistribution,
    pub seed: u64,
}

impl RandomField {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn mean(&self) -> f64 {
        crate::util::neumaier_sum(self.h.iter().copied()) / self.h.len() as f64
    }

    /// Field with explicitly given values; they must lie in the support of `dist`.
    pub fn from_values(h: Vec<f64>, dist: FieldDistribution, seed: u64) -> Result<Self> {
        dist.validate()?;
        let bound = dist.support_bound();
        if let Some(x) = h.iter().find(|x| !(x.abs() <= bound * (1.0 + 1e-15) + 1e-300)) {
            return Err(Error::InvalidParameter(format!("field value {x} outside support bound {bound}")));
        }
        Ok(RandomField { h, dist, seed })
    }

    pub fn write_to<W: Write>(&self, beta: f64, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {} {}", self.h.len(), beta, self.dist, self.seed)?;
        for x in &self.h {
            writeln!(w, "{x:.16e}")?;
        }
        Ok(())
    }

    /// Reads the text format written by [`RandomField::write_to`]; returns the field and beta.
    pub fn read_from<R: BufRead>(r: R) -> Result<(Self, f64)> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("bad header '{header}'")));
        }
        let n: usize = parts[0].parse().map_err(|_| Error::Parse("bad N".into()))?;
        let beta: f64 = parts[1].parse().map_err(|_| Error::Parse("bad beta".into()))?;
        let dist: FieldDistribution = parts[2].parse()?;
        let seed: u64 = parts[3].parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let mut h = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            h.push(t.parse::<f64>().map_err(|_| Error::Parse(format!("bad field value '{t}'")))?);
        }
        if h.len() != n {
            return Err(Error::Parse(format!("expected {n} field values, found {}", h.len())));
        }
        Ok((RandomField::from_values(h, dist, seed)?, beta))
    }
}

pub fn sample_field(dist: &FieldDistribution, n: usize, seed: u64) -> Result<RandomField> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N = {n} must be at least 2")));
    }
    dist.validate()?;
    let mut r = rng::stream(seed, rng::FIELD_STREAM);
    let h = (0..n).map(|_| dist.sample(&mut r)).collect();
    Ok(RandomField { h, dist: dist.clone(), seed })
}

/// Deterministic realization with fields at the quantiles `(i + 1/2)/N`, so that
/// empirical frequencies match the law as closely as the grid allows.
pub fn stratified_field(dist: &FieldDistribution, n: usize) -> Result<RandomField> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N = {n} must be at least 2")));
    }
    dist.validate()?;
    let h = (0..n).map(|i| dist.quantile((i as f64 + 0.5) / n as f64)).collect();
    Ok(RandomField { h, dist: dist.clone(), seed: 0 })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    pub sigma: Vec<i8>,
}

impl SpinConfig {
    pub fn new(sigma: Vec<i8>) -> Result<Self> {
        if sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("spins must be +1 or -1".into()));
        }
        Ok(SpinConfig { sigma })
    }

    pub fn all(n: usize, s: i8) -> Self {
        SpinConfig { sigma: vec![s; n] }
    }

    /// Configuration encoded by the bits of `code` (bit i set means spin i is +1).
    pub fn from_bits(n: usize, code: usize) -> Self {
        SpinConfig { sigma: (0..n).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect() }
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.sigma[i] = -s.sigma[i];
        s
    }
}

pub fn magnetization(sigma: &SpinConfig) -> f64 {
    let s: i64 = sigma.sigma.iter().map(|&x| x as i64).sum();
    s as f64 / sigma.n() as f64
}

fn check_len(sigma: &SpinConfig, field: &RandomField) -> Result<()> {
    if sigma.n() != field.n() {
        return Err(Error::InvalidParameter(format!(
            "configuration has {} spins but field has {}",
            sigma.n(),
            field.n()
        )));
    }
    Ok(())
}

pub fn hamiltonian(sigma: &SpinConfig, field: &RandomField) -> Result<f64> {
    check_len(sigma, field)?;
    let n = sigma.n() as f64;
    let m = magnetization(sigma);
    let hs = crate::util::neumaier_sum(sigma.sigma.iter().zip(&field.h).map(|(&s, h)| s as f64 * h));
    Ok(-0.5 * n * m * m - hs)
}

/// Energy change of flipping spin `i` (0-based).
pub fn flip_delta(sigma: &SpinConfig, i: usize, field: &RandomField) -> Result<f64> {
    check_len(sigma, field)?;
    if i >= sigma.n() {
        return Err(Error::InvalidParameter(format!("site {i} out of range 0..{}", sigma.n())));
    }
    let n = sigma.n() as f64;
    Ok(2.0 * sigma.sigma[i] as f64 * (magnetization(sigma) + field.h[i]) - 2.0 / n)
}

#[derive(Clone, Debug)]
pub struct MetropolisProfile {
    pub flip: Vec<f64>,
    pub hold: f64,
}

pub fn metropolis_profile(sigma: &SpinConfig, field: &RandomField, params: &SystemParams) -> Result<MetropolisProfile> {
    check_len(sigma, field)?;
    let n = sigma.n();
    let mut flip = Vec::with_capacity(n);
    for i in 0..n {
        let d = flip_delta(sigma, i, field)?;
        flip.push((-params.beta * d.max(0.0)).exp() / n as f64);
    }
    let hold = (1.0 - crate::util::neumaier_sum(flip.iter().copied())).max(0.0);
    Ok(MetropolisProfile { flip, hold })
}

/// Full microscopic chain on `{-1,1}^N`; states are indexed by bit codes.
///
/// Stationary weights are `Z mu(sigma) = 2^-N exp(-beta H(sigma))`.
pub fn microscopic_chain(field: &RandomField, params: &SystemParams) -> Result<ReversibleChain> {
    let n = field.n();
    if n > 22 {
        return Err(Error::InvalidParameter(format!("microscopic chain limited to N <= 22, got {n}")));
    }
    let size = 1usize << n;
    let nf = n as f64;
    let mut log_mu = Vec::with_capacity(size);
    for code in 0..size {
        let s = SpinConfig::from_bits(n, code);
        log_mu.push(-nf * std::f64::consts::LN_2 - params.beta * hamiltonian(&s, field)?);
    }
    let mut edges = Vec::with_capacity(size * n / 2);
    let mut log_c = Vec::with_capacity(size * n / 2);
    for code in 0..size {
        let s = SpinConfig::from_bits(n, code);
        for i in 0..n {
            if code >> i & 1 == 0 {
                let d = flip_delta(&s, i, field)?;
                edges.push((code, code | 1 << i));
                log_c.push(log_mu[code] - nf.ln() - params.beta * d.max(0.0));
            }
        }
    }
    ReversibleChain::new(log_mu, edges, log_c)
}
