//! Closed-form sharp asymptotics for capacities and mean transition times.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{BarrierSpec, Landscape1D};
use crate::meso::{LumpedChain, SaddleData};
use crate::potential::ReversibleChain;
use crate::util::{bisect, LogSum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefactorSolution {
    pub gamma_bar1: f64,
    /// `beta E(1 - tanh^2(beta (z* + h)))`.
    pub condition: f64,
    pub residual: f64,
}

fn prefactor_lhs(land: &Landscape1D, z_star: f64, gamma: f64) -> f64 {
    let b = land.beta();
    land.average(|bh| {
        let t = (b * z_star + bh).tanh().abs();
        (1.0 - t) / (1.0 / (b * (1.0 + t)) - 2.0 * gamma)
    })
}

/// Unique negative root of `E[(1 - tanh|u|) / (1/(beta (1 + tanh|u|)) - 2 gamma)] = 1`,
/// `u = beta (z* + h)`. The summand is the rate-weighted secular term of a single
/// site; the left side increases in `gamma` on `gamma < 0`.
pub fn gamma_bar(land: &Landscape1D, z_star: f64) -> Result<PrefactorSolution> {
    let condition = land.susceptibility(z_star);
    if condition <= 1.0 {
        return Err(Error::NoNegativeSolution(condition));
    }
    // at gamma <= -1/2 the left side is at most 1/2
    let g = bisect(|g| prefactor_lhs(land, z_star, g) - 1.0, -1.0, 0.0, 1e-15, 200);
    let residual = (prefactor_lhs(land, z_star, g) - 1.0).abs();
    Ok(PrefactorSolution { gamma_bar1: g, condition, residual })
}

/// Root of the variant with the factor `exp(-2 beta [z* + h]_+)` attached to the
/// up-spin density; kept for comparison with [`gamma_bar`].
pub fn gamma_bar_variant(land: &Landscape1D, z_star: f64) -> Result<f64> {
    let condition = land.susceptibility(z_star);
    if condition <= 1.0 {
        return Err(Error::NoNegativeSolution(condition));
    }
    let b = land.beta();
    let lhs = |gamma: f64| {
        land.average(|bh| {
            let u = b * z_star + bh;
            let e = (-2.0 * u.max(0.0)).exp();
            (1.0 - u.tanh()) * e / (e / (b * (1.0 + u.tanh())) - 2.0 * gamma)
        })
    };
    let mut lo = -1.0;
    while lhs(lo) > 1.0 {
        lo *= 2.0;
    }
    Ok(bisect(|g| lhs(g) - 1.0, lo, 0.0, 1e-15, 200))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    Empirical,
    Analytic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SharpPrediction {
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub m0: f64,
    pub zstar: f64,
    #[serde(rename = "M")]
    pub deeper: Vec<f64>,
    #[serde(rename = "deltaF")]
    pub delta_f: f64,
    pub a_m0: f64,
    pub a_zstar: f64,
    pub gamma_bar1: f64,
    pub log_zq_saddle: f64,
    #[serde(rename = "log_Zcap")]
    pub log_zcap: f64,
    pub log_mean_time: f64,
    pub log_naive_mean_time: f64,
    pub mode: ExpectationMode,
}

/// All closed-form predictions for one barrier.
pub fn predict(land: &Landscape1D, barrier: &BarrierSpec, mode: ExpectationMode) -> Result<SharpPrediction> {
    let beta = land.beta();
    let n = land.n() as f64;
    let z = barrier.saddle;
    let m0 = barrier.start;
    let pref = gamma_bar(land, z.m_star)?;
    let g = pref.gamma_bar1.abs();
    let chi_z = land.susceptibility(z.m_star);
    let chi_0 = land.susceptibility(m0.m_star);
    if chi_0 >= 1.0 {
        return Err(Error::Domain("start point is not a minimum".into()));
    }
    let f_z = land.free_energy_critical_form(z.m_star);
    let delta_f = f_z - land.free_energy_critical_form(m0.m_star);
    let log_zcap = (beta * g / (2.0 * PI * n)).ln() - beta * n * f_z - 0.5 * (chi_z - 1.0).ln();
    let tail = 0.5 * ((chi_z - 1.0) / (1.0 - chi_0)).ln();
    let log_mean_time = beta * n * delta_f + (2.0 * PI * n / (beta * g)).ln() + tail;
    let a_z = -1.0 + 1.0 / chi_z;
    let log_naive_mean_time = beta * n * delta_f + (2.0 * PI * n / (beta * a_z.abs())).ln() + tail;
    Ok(SharpPrediction {
        n: land.n(),
        beta,
        m0: m0.m_star,
        zstar: z.m_star,
        deeper: barrier.deeper_set.iter().map(|p| p.m_star).collect(),
        delta_f,
        a_m0: -1.0 + 1.0 / chi_0,
        a_zstar: a_z,
        gamma_bar1: pref.gamma_bar1,
        log_zq_saddle: land.gibbs_point_asymptotic(&z),
        log_zcap,
        log_mean_time,
        log_naive_mean_time,
        mode,
    })
}

pub fn sharp_capacity(land: &Landscape1D, barrier: &BarrierSpec) -> Result<f64> {
    Ok(predict(land, barrier, ExpectationMode::Empirical)?.log_zcap)
}

pub fn sharp_mean_time(land: &Landscape1D, barrier: &BarrierSpec) -> Result<f64> {
    Ok(predict(land, barrier, ExpectationMode::Empirical)?.log_mean_time)
}

pub fn naive_mean_time(land: &Landscape1D, barrier: &BarrierSpec) -> Result<f64> {
    Ok(predict(land, barrier, ExpectationMode::Empirical)?.log_naive_mean_time)
}

/// Finite-`n` capacity bound assembled from the saddle data:
/// `ZQ(z) (beta |g_1| / 2 pi N) (pi N / 2 beta)^(n/2) prod_l sqrt(r_l / |g_l|)`,
/// with `ZQ(z) = sqrt|det A| exp(-beta N F(z*)) / sqrt((N pi / 2 beta)^n |chi - 1|)`.
pub fn finite_n_log_zcap(saddle: &SaddleData, land: &Landscape1D) -> f64 {
    let beta = land.beta();
    let n = land.n() as f64;
    let dim = saddle.dim() as f64;
    let f_z = land.free_energy_critical_form(saddle.z_star);
    let chi = land.susceptibility(saddle.z_star);
    let log_zq = 0.5 * saddle.det_a.abs().ln()
        - 0.5 * (dim * (n * PI / (2.0 * beta)).ln() + (chi - 1.0).abs().ln())
        - beta * n * f_z;
    let prod: f64 = saddle.r.iter().zip(&saddle.eigen.gamma).map(|(r, g)| 0.5 * (r / g.abs()).ln()).sum();
    log_zq + (beta * saddle.gamma1().abs() / (2.0 * PI * n)).ln() + 0.5 * dim * (PI * n / (2.0 * beta)).ln() + prod
}

/// Projection of a lumped chain onto the total magnetization with the induced
/// measure and the averaged rates; state `k` has `k` up spins.
pub fn project_naive_chain(lumped: &LumpedChain) -> Result<ReversibleChain> {
    let n = lumped.n_sites;
    let mut q = vec![LogSum::default(); n + 1];
    let mut c = vec![LogSum::default(); n];
    let ch = &lumped.chain;
    for x in 0..ch.n_states() {
        q[lumped.level(x)].add(ch.log_mu(x));
    }
    for (e, &(x, _)) in ch.edges().iter().enumerate() {
        c[lumped.level(x)].add(ch.log_conductance(e));
    }
    ReversibleChain::new(
        q.iter().map(|s| s.value()).collect(),
        (0..n).map(|k| (k, k + 1)).collect(),
        c.iter().map(|s| s.value()).collect(),
    )
}
