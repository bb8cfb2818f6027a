//! One-dimensional free-energy landscape of the magnetization.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FieldDistribution, RandomField, SystemParams};
use crate::util::{bisect, ln_cosh, Neumaier};

/// Averages over the field are taken against weighted nodes: the empirical
/// realization (weights 1/N) or a quadrature rule for the distribution.
#[derive(Clone, Debug)]
pub struct Landscape1D {
    pub params: SystemParams,
    /// Nodes `beta * h`.
    bh: Vec<f64>,
    w: Vec<f64>,
    support: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Minimum,
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub m_star: f64,
    pub kind: PointKind,
    pub f_value: f64,
    pub curvature_a: f64,
    pub susceptibility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub start: CriticalPoint,
    pub deeper_set: Vec<CriticalPoint>,
    pub saddle: CriticalPoint,
    pub delta_f: f64,
}

pub const TIE_TOLERANCE: f64 = 1e-9;
const SCAN_POINTS: usize = 4000;

impl Landscape1D {
    pub fn new(field: &RandomField, params: SystemParams) -> Self {
        let n = field.n() as f64;
        Landscape1D {
            params,
            bh: field.h.iter().map(|h| params.beta * h).collect(),
            w: vec![1.0 / n; field.n()],
            support: field.h.iter().fold(0.0f64, |a, h| a.max(h.abs())),
        }
    }

    /// Landscape with field averages taken over the distribution itself.
    pub fn analytic(dist: &FieldDistribution, params: SystemParams) -> Self {
        let (x, w) = dist.quadrature();
        Landscape1D {
            params,
            bh: x.iter().map(|h| params.beta * h).collect(),
            w,
            support: dist.support_bound(),
        }
    }

    /// Landscape of a sub-population of sites with fields `h` (uniform weights).
    pub fn from_fields(h: &[f64], params: SystemParams) -> Self {
        let n = h.len() as f64;
        Landscape1D {
            params,
            bh: h.iter().map(|x| params.beta * x).collect(),
            w: vec![1.0 / n; h.len()],
            support: h.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        }
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Weighted average of `f(beta h_i)`.
    pub fn average<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut s = Neumaier::default();
        for (x, w) in self.bh.iter().zip(&self.w) {
            s.add(w * f(*x));
        }
        s.sum()
    }

    /// `(U(t), U'(t), U''(t))`.
    pub fn log_mgf(&self, t: f64) -> (f64, f64, f64) {
        let (mut u, mut du, mut d2) = (Neumaier::default(), Neumaier::default(), Neumaier::default());
        for (x, w) in self.bh.iter().zip(&self.w) {
            let y = t + x;
            let th = y.tanh();
            u.add(w * ln_cosh(y));
            du.add(w * th);
            d2.add(w * (1.0 - th * th));
        }
        (u.sum(), du.sum(), d2.sum())
    }

    /// `(I(m), t*, I''(m))`.
    pub fn legendre(&self, m: f64) -> Result<(f64, f64, f64)> {
        if !(m.abs() < 1.0) {
            return Err(Error::Domain(format!("|m| = {} must be below 1", m.abs())));
        }
        let c = m.atanh();
        let width = self.params.beta * self.support + 1e-12;
        let t = bisect(|t| self.log_mgf(t).1 - m, c - width, c + width, 0.0, 200);
        let (u, _, d2) = self.log_mgf(t);
        Ok((t * m - u, t, 1.0 / d2))
    }

    pub fn free_energy(&self, m: f64) -> Result<f64> {
        let (i, _, _) = self.legendre(m)?;
        Ok(-0.5 * m * m + i / self.params.beta)
    }

    /// Free energy in the form valid at critical points.
    pub fn free_energy_critical_form(&self, m: f64) -> f64 {
        let b = self.params.beta;
        0.5 * m * m - self.average(|x| ln_cosh(b * m + x)) / b
    }

    /// Second derivative of `F` at `m`.
    pub fn curvature(&self, m: f64) -> Result<f64> {
        let (_, _, i2) = self.legendre(m)?;
        Ok(-1.0 + i2 / self.params.beta)
    }

    /// `beta * E[1 - tanh^2(beta (m + h))]`.
    pub fn susceptibility(&self, m: f64) -> f64 {
        let b = self.params.beta;
        b * self.log_mgf(b * m).2
    }

    fn phi(&self, m: f64) -> f64 {
        m - self.log_mgf(self.params.beta * m).1
    }

    fn critical_point(&self, m: f64) -> Result<CriticalPoint> {
        let chi = self.susceptibility(m);
        if (chi - 1.0).abs() < 1e-8 {
            return Err(Error::SecondOrderTransition { m, chi: chi - 1.0 });
        }
        Ok(CriticalPoint {
            m_star: m,
            kind: if chi < 1.0 { PointKind::Minimum } else { PointKind::Maximum },
            f_value: self.free_energy_critical_form(m),
            curvature_a: -1.0 + 1.0 / chi,
            susceptibility: chi,
        })
    }

    pub fn critical_points(&self) -> Result<Vec<CriticalPoint>> {
        let lo = -1.0 + 1e-6;
        let step = (2.0 - 2e-6) / (SCAN_POINTS - 1) as f64;
        let mut roots = Vec::new();
        let mut prev_m = lo;
        let mut prev = self.phi(lo);
        for k in 1..SCAN_POINTS {
            let m = lo + step * k as f64;
            let v = self.phi(m);
            if prev == 0.0 {
                roots.push(prev_m);
            } else if v != 0.0 && (v < 0.0) != (prev < 0.0) {
                roots.push(bisect(|x| self.phi(x), prev_m, m, 1e-13, 200));
            }
            prev_m = m;
            prev = v;
        }
        if prev == 0.0 {
            roots.push(prev_m);
        }
        let pts = roots.into_iter().map(|m| self.critical_point(m)).collect::<Result<Vec<_>>>()?;
        Ok(pts)
    }

    /// `ln(Z Q(m*))` from the Gaussian approximation around a critical point.
    pub fn gibbs_point_asymptotic(&self, cp: &CriticalPoint) -> f64 {
        let b = self.params.beta;
        let n = self.params.n as f64;
        let u2 = self.log_mgf(b * cp.m_star).2;
        -b * n * cp.f_value - 0.5 * ((n * std::f64::consts::PI / 2.0) * u2.abs()).ln()
    }

    pub fn barrier(&self, from_min: &CriticalPoint) -> Result<BarrierSpec> {
        if from_min.kind != PointKind::Minimum {
            return Err(Error::Domain("barrier start must be a minimum".into()));
        }
        let pts = self.critical_points()?;
        self.barrier_from(&pts, from_min)
    }

    pub fn barrier_from(&self, pts: &[CriticalPoint], from_min: &CriticalPoint) -> Result<BarrierSpec> {
        let idx = pts
            .iter()
            .position(|p| (p.m_star - from_min.m_star).abs() < 1e-9)
            .ok_or_else(|| Error::Domain("start is not a critical point of this landscape".into()))?;
        let deeper: Vec<usize> = (0..pts.len())
            .filter(|&j| pts[j].kind == PointKind::Minimum && pts[j].f_value < from_min.f_value - TIE_TOLERANCE)
            .collect();
        if deeper.is_empty() {
            return Err(Error::NoDeeperMinimum(from_min.m_star));
        }
        let highest = |range: std::ops::Range<usize>| {
            range
                .filter(|&j| pts[j].kind == PointKind::Maximum)
                .max_by(|&a, &b| pts[a].f_value.total_cmp(&pts[b].f_value))
        };
        let mut candidates = Vec::new();
        if let Some(&left) = deeper.iter().filter(|&&j| j < idx).max() {
            candidates.extend(highest(left + 1..idx));
        }
        if let Some(&right) = deeper.iter().filter(|&&j| j > idx).min() {
            candidates.extend(highest(idx + 1..right));
        }
        let saddle = candidates
            .into_iter()
            .min_by(|&a, &b| pts[a].f_value.total_cmp(&pts[b].f_value))
            .map(|j| pts[j])
            .ok_or_else(|| Error::Domain("no maximum separates the start from deeper minima".into()))?;
        Ok(BarrierSpec {
            start: *from_min,
            deeper_set: deeper.iter().map(|&j| pts[j]).collect(),
            delta_f: saddle.f_value - from_min.f_value,
            saddle,
        })
    }

    /// Barrier from the shallowest local minimum that has a deeper one.
    pub fn default_barrier(&self) -> Result<BarrierSpec> {
        let pts = self.critical_points()?;
        let mut minima: Vec<&CriticalPoint> = pts.iter().filter(|p| p.kind == PointKind::Minimum).collect();
        minima.sort_by(|a, b| b.f_value.total_cmp(&a.f_value));
        let first = minima.first().ok_or_else(|| Error::Domain("landscape has no minimum".into()))?;
        self.barrier_from(&pts, first)
    }

    /// [`Landscape1D::default_barrier`], or for degenerate minima the passage from
    /// the leftmost minimum to its right neighbour.
    pub fn well_to_well(&self) -> Result<BarrierSpec> {
        match self.default_barrier() {
            Err(Error::NoDeeperMinimum(m)) => {
                let pts = self.critical_points()?;
                let minima: Vec<usize> = (0..pts.len()).filter(|&j| pts[j].kind == PointKind::Minimum).collect();
                if minima.len() < 2 {
                    return Err(Error::NoDeeperMinimum(m));
                }
                let (i, j) = (minima[0], minima[1]);
                let saddle = (i + 1..j)
                    .filter(|&k| pts[k].kind == PointKind::Maximum)
                    .max_by(|&a, &b| pts[a].f_value.total_cmp(&pts[b].f_value))
                    .map(|k| pts[k])
                    .ok_or_else(|| Error::Domain("no maximum between the minima".into()))?;
                Ok(BarrierSpec { start: pts[i], deeper_set: vec![pts[j]], delta_f: saddle.f_value - pts[i].f_value, saddle })
            }
            other => other,
        }
    }

    /// Writes `m,F,I,a` at the given magnetizations.
    pub fn write_csv<W: Write>(&self, grid: &[f64], mut w: W) -> Result<()> {
        writeln!(w, "m,F,I,a")?;
        for &m in grid {
            let (i, _, i2) = self.legendre(m)?;
            let f = -0.5 * m * m + i / self.params.beta;
            writeln!(w, "{m:.12},{f:.15e},{i:.15e},{:.15e}", -1.0 + i2 / self.params.beta)?;
        }
        Ok(())
    }
}

/// Nearest point of the grid `{-1, -1 + 2/N, ..., 1}`, as the number of up spins.
pub fn grid_index(m: f64, n: usize) -> usize {
    let k = ((m + 1.0) * n as f64 / 2.0).round();
    k.clamp(0.0, n as f64) as usize
}

pub fn grid_value(k: usize, n: usize) -> f64 {
    (2.0 * k as f64 - n as f64) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_field;

    fn zero_field(n: usize, beta: f64) -> Landscape1D {
        let f = sample_field(&FieldDistribution::Constant { c: 0.0 }, n, 0).unwrap();
        Landscape1D::new(&f, SystemParams::new(n, beta).unwrap())
    }

    fn const_field(c: f64, n: usize, beta: f64) -> Landscape1D {
        let f = sample_field(&FieldDistribution::Constant { c }, n, 0).unwrap();
        Landscape1D::new(&f, SystemParams::new(n, beta).unwrap())
    }

    #[test]
    fn zero_field_log_mgf() {
        let l = zero_field(10, 1.7);
        for &t in &[-2.0, 0.0, 0.3, 5.0] {
            let (u, du, d2) = l.log_mgf(t);
            assert!((u - f64::cosh(t).ln()).abs() < 1e-14);
            assert!((du - t.tanh()).abs() < 1e-15);
            assert!((d2 - (1.0 - t.tanh().powi(2))).abs() < 1e-15);
        }
    }

    #[test]
    fn log_mgf_finite_differences() {
        let f = sample_field(&FieldDistribution::Uniform { lo: -0.4, hi: 0.4 }, 50, 1).unwrap();
        let l = Landscape1D::new(&f, SystemParams::new(50, 1.5).unwrap());
        let d = 1e-5;
        for &t in &[-1.0, 0.0, 0.7] {
            let (_, du, d2) = l.log_mgf(t);
            let fd = (l.log_mgf(t + d).0 - l.log_mgf(t - d).0) / (2.0 * d);
            assert!((du - fd).abs() < 1e-9);
            assert!(d2 > 0.0 && d2 <= 1.0);
            let (u0, _, _) = l.log_mgf(0.0);
            let direct: f64 = f.h.iter().map(|h| (1.5 * h).cosh().ln()).sum::<f64>() / 50.0;
            assert!((u0 - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn legendre_examples() {
        let l = zero_field(10, 2.0);
        let (i, t, _) = l.legendre(0.0).unwrap();
        assert!(i.abs() < 1e-15 && t.abs() < 1e-15);
        let (i, t, _) = l.legendre(0.5).unwrap();
        let a = 0.5f64.atanh();
        assert!((t - a).abs() < 1e-12);
        assert!((i - (0.5 * a - a.cosh().ln())).abs() < 1e-13);
        assert!((i - 0.130812).abs() < 1e-6);
        assert!(l.legendre(1.0).is_err());
    }

    #[test]
    fn legendre_matches_grid_maximization() {
        let f = sample_field(&FieldDistribution::Uniform { lo: -0.3, hi: 0.3 }, 40, 8).unwrap();
        let l = Landscape1D::new(&f, SystemParams::new(40, 1.2).unwrap());
        for &m in &[-0.6, 0.05, 0.8] {
            let (i, t, _) = l.legendre(m).unwrap();
            // golden-section refinement of a dense grid maximum on [-20, 20]
            let g = |s: f64| s * m - l.log_mgf(s).0;
            let mut best = -20.0;
            for k in 0..=40_000 {
                let s = -20.0 + k as f64 * 1e-3;
                if g(s) > g(best) {
                    best = s;
                }
            }
            let (mut a, mut b) = (best - 1e-3, best + 1e-3);
            let r = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..100 {
                let c = b - r * (b - a);
                let d = a + r * (b - a);
                if g(c) > g(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            assert!((g(0.5 * (a + b)) - i).abs() < 1e-8);
            assert!((0.5 * (a + b) - t).abs() < 1e-6);
            assert!(i >= -l.log_mgf(0.0).0 - 1e-14);
        }
    }

    #[test]
    fn free_energy_examples() {
        let l = zero_field(10, 2.0);
        assert!(l.free_energy(0.0).unwrap().abs() < 1e-15);
        let expected = -0.125 + (0.5 * 0.5f64.atanh() - 0.5f64.atanh().cosh().ln()) / 2.0;
        assert!((l.free_energy(0.5).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 0.059594).abs() < 1e-6);
    }

    #[test]
    fn zero_field_critical_points() {
        let pts = zero_field(10, 0.5).critical_points().unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, PointKind::Minimum);
        assert!(pts[0].m_star.abs() < 1e-12);

        let l = zero_field(10, 2.0);
        let pts = l.critical_points().unwrap();
        assert_eq!(pts.len(), 3);
        let m = bisect(|x| x - (2.0 * x).tanh(), 0.5, 1.0, 1e-15, 200);
        assert!((pts[2].m_star - m).abs() < 1e-12);
        assert!((m - 0.9575).abs() < 1e-4);
        assert!((pts[1].curvature_a + 0.5).abs() < 1e-12);
        assert_eq!(pts[1].kind, PointKind::Maximum);
        for p in &pts {
            assert!((p.m_star - l.log_mgf(2.0 * p.m_star).1).abs() <= 1e-12);
            let fa = l.free_energy(p.m_star).unwrap();
            assert!((fa - p.f_value).abs() < 1e-10);
            let (_, t, _) = l.legendre(p.m_star).unwrap();
            assert!((-p.m_star + t / 2.0).abs() < 1e-10);
        }
        assert!(l.default_barrier().is_err());
        assert!(matches!(l.barrier(&pts[0]), Err(Error::NoDeeperMinimum(_))));
    }

    #[test]
    fn constant_field_barrier() {
        let l = const_field(0.05, 100, 2.0);
        let pts = l.critical_points().unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[2].f_value < pts[0].f_value);
        let b = l.barrier(&pts[0]).unwrap();
        assert_eq!(b.deeper_set.len(), 1);
        assert!((b.deeper_set[0].m_star - pts[2].m_star).abs() < 1e-15);
        assert!((b.saddle.m_star - pts[1].m_star).abs() < 1e-15);
        let direct = l.free_energy(pts[1].m_star).unwrap() - l.free_energy(pts[0].m_star).unwrap();
        assert!((b.delta_f - direct).abs() < 1e-12);
        assert!(b.delta_f > 0.0);
    }

    #[test]
    fn gibbs_point_zero_field() {
        let l = zero_field(12, 2.0);
        let pts = l.critical_points().unwrap();
        let lz = l.gibbs_point_asymptotic(&pts[1]);
        assert!((lz - (2.0 / (12.0 * std::f64::consts::PI)).sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn analytic_landscape_two_valued() {
        let d = FieldDistribution::TwoValued { eps: 0.2, p: 0.5 };
        let p = SystemParams::new(100, 1.5).unwrap();
        let l = Landscape1D::analytic(&d, p);
        let (u, _, _) = l.log_mgf(0.3);
        let e = 0.5 * (ln_cosh(0.3 + 0.3) + ln_cosh(0.3 - 0.3));
        assert!((u - e).abs() < 1e-15);
    }
}
