//! Orthogonal pilots and per-stream MMSE channel estimation.
//!
//! A "stream" is one column of the stacked channel matrix: `h_kV` and `h_kH`
//! for the dual-polarized system (stream `2k + i`), or `h_k` for the
//! uni-polarized benchmark (stream `k`). Each stream owns one pilot column.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::rng::complex_normal;
use crate::scenario::UeStatistics;

/// Pilot matrices for all streams.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub tau_p: usize,
    pub streams_per_ue: usize,
    /// `tau_p x S` with orthogonal columns of squared norm `tau_p`.
    pub v: CMat,
    /// Pilot power per stream.
    pub powers: Vec<f64>,
}

fn dft_columns(tau_p: usize, n: usize) -> CMat {
    CMat::from_fn(tau_p, n, |t, j| {
        let a = -2.0 * PI * (t * j) as f64 / tau_p as f64;
        c(a.cos(), a.sin())
    })
}

/// Dual-polarized pilots: UE `k` gets DFT columns `2k, 2k + 1`.
pub fn build_pilots(k: usize, tau_p: usize, powers: &[[f64; 2]]) -> Result<PilotBook> {
    if tau_p < 2 * k {
        return Err(Error::config(format!("tau_p: {tau_p} pilots cannot serve {k} dual-polarized UEs")));
    }
    if powers.len() != k {
        return Err(Error::config("pilot powers: one pair per UE required"));
    }
    Ok(PilotBook {
        tau_p,
        streams_per_ue: 2,
        v: dft_columns(tau_p, 2 * k),
        powers: powers.iter().flat_map(|p| [p[0], p[1]]).collect(),
    })
}

/// Uni-polarized pilots: one DFT column per UE.
pub fn build_pilots_uni(tau_p: usize, powers: &[f64]) -> Result<PilotBook> {
    if tau_p < powers.len() {
        return Err(Error::config(format!("tau_p: {tau_p} pilots cannot serve {} UEs", powers.len())));
    }
    Ok(PilotBook {
        tau_p,
        streams_per_ue: 1,
        v: dft_columns(tau_p, powers.len()),
        powers: powers.to_vec(),
    })
}

impl PilotBook {
    pub fn streams(&self) -> usize {
        self.v.ncols()
    }

    /// `V_k`, a `tau_p x streams_per_ue` block.
    pub fn v_k(&self, k: usize) -> CMat {
        self.v.columns(k * self.streams_per_ue, self.streams_per_ue).into_owned()
    }

    /// `Φ_k = L_k^{1/2} V_k^T`.
    pub fn phi_k(&self, k: usize) -> CMat {
        let s = self.streams_per_ue;
        let mut phi = self.v_k(k).transpose();
        for i in 0..s {
            let p = self.powers[k * s + i].sqrt();
            phi.row_mut(i).scale_mut(p);
        }
        phi
    }

    /// Total pilot power `tr(Φ_k Φ_k^H) / tau_p` of UE `k`.
    pub fn implied_power(&self, k: usize) -> f64 {
        let phi = self.phi_k(k);
        linalg::trace(&(&phi * phi.adjoint())).re / self.tau_p as f64
    }
}

/// Second-order quantities of one stream's MMSE estimator.
#[derive(Debug, Clone)]
pub struct StreamEstimator {
    pub r: CMat,
    pub psi: CMat,
    pub gamma: CMat,
    pub c: CMat,
    /// `√p R Ψ`, applied to the despread pilot observation.
    pub filter: CMat,
    pub pilot_power: f64,
}

impl StreamEstimator {
    pub fn trace_gamma(&self) -> f64 {
        linalg::trace(&self.gamma).re
    }
}

/// `Ψ = (p τ R + σ² I)^{-1}`, `Γ = p τ R Ψ R`, `C = R - Γ`.
pub fn estimate_covariances(r: &CMat, pilot_power: f64, tau_p: usize, sigma2: f64) -> Result<StreamEstimator> {
    let m = r.nrows();
    let pt = pilot_power * tau_p as f64;
    let a = r.scale(pt) + CMat::identity(m, m).scale(sigma2);
    let chol = linalg::cholesky(&a, "pilot observation covariance")?;
    let psi = linalg::hermitize(&chol.inverse());
    let psi_r = chol.solve(r);
    let gamma = linalg::hermitize(&(r * &psi_r).scale(pt));
    let c = linalg::hermitize(&(r - &gamma));
    let filter = psi_r.adjoint().scale(pilot_power.sqrt());
    Ok(StreamEstimator {
        r: r.clone(),
        psi,
        gamma,
        c,
        filter,
        pilot_power,
    })
}

/// `(V, H)` estimators of one dual-polarized UE.
pub fn estimate_covariances_dual(
    stats: &UeStatistics,
    pilot_power: [f64; 2],
    tau_p: usize,
    sigma2: f64,
) -> Result<(StreamEstimator, StreamEstimator)> {
    let (r_v, r_h) = stats.row_covariances();
    Ok((
        estimate_covariances(&r_v, pilot_power[0], tau_p, sigma2)?,
        estimate_covariances(&r_h, pilot_power[1], tau_p, sigma2)?,
    ))
}

/// Cached estimators of all streams for one setup.
#[derive(Debug, Clone)]
pub struct EstimatorBank {
    pub pilots: PilotBook,
    pub streams: Vec<StreamEstimator>,
}

impl EstimatorBank {
    pub fn dual(ues: &[UeStatistics], pilots: PilotBook, sigma2: f64) -> Result<Self> {
        let mut streams = Vec::with_capacity(2 * ues.len());
        for (k, ue) in ues.iter().enumerate() {
            let (v, h) = estimate_covariances_dual(
                ue,
                [pilots.powers[2 * k], pilots.powers[2 * k + 1]],
                pilots.tau_p,
                sigma2,
            )?;
            streams.push(v);
            streams.push(h);
        }
        Ok(Self { pilots, streams })
    }

    pub fn uni(correlations: &[CMat], pilots: PilotBook, sigma2: f64) -> Result<Self> {
        let streams = correlations
            .iter()
            .zip(&pilots.powers)
            .map(|(r, &p)| estimate_covariances(r, p, pilots.tau_p, sigma2))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pilots, streams })
    }

    pub fn m(&self) -> usize {
        self.streams.first().map_or(0, |s| s.r.nrows())
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    /// Sum over streams of `ρ_j C_j`.
    pub fn weighted_error(&self, powers: &[f64]) -> CMat {
        let m = self.m();
        let mut z = CMat::zeros(m, m);
        for (s, &p) in self.streams.iter().zip(powers) {
            if p != 0.0 {
                z += s.c.scale(p);
            }
        }
        z
    }
}

/// Receiver noise over the pilot phase, `M x tau_p` i.i.d. `CN(0, σ²)`.
pub fn draw_pilot_noise<R: Rng + ?Sized>(m: usize, tau_p: usize, sigma2: f64, rng: &mut R) -> CMat {
    let s = sigma2.sqrt();
    CMat::from_fn(m, tau_p, |_, _| complex_normal(rng) * s)
}

/// Received pilot signal `Y = Σ_l H_l^H Φ_l + N` for stacked channel columns.
pub fn received_pilots(h_all: &CMat, pilots: &PilotBook, noise: &CMat) -> CMat {
    let mut scaled = h_all.clone();
    for (j, &p) in pilots.powers.iter().enumerate() {
        scaled.column_mut(j).scale_mut(p.sqrt());
    }
    scaled * pilots.v.transpose() + noise
}

/// MMSE estimates of all stream channels (`M x S`, same layout as `h_all`).
pub fn mmse_estimate(h_all: &CMat, bank: &EstimatorBank, noise: &CMat) -> CMat {
    let y = received_pilots(h_all, &bank.pilots, noise);
    estimate_from_received(&y, bank)
}

/// Despreads `Y V^*` and applies each stream's filter.
pub fn estimate_from_received(y: &CMat, bank: &EstimatorBank) -> CMat {
    let yp = y * bank.pilots.v.map(|z: C64| z.conj());
    let mut out = CMat::zeros(y.nrows(), bank.len());
    for (j, s) in bank.streams.iter().enumerate() {
        out.set_column(j, &(&s.filter * yp.column(j)));
    }
    out
}

/// Normalized MSE `tr(C) / tr(R)` per stream.
pub fn nmse(bank: &EstimatorBank) -> Vec<f64> {
    bank.streams
        .iter()
        .map(|s| {
            let tr = linalg::trace(&s.r).re;
            if tr > 0.0 {
                linalg::trace(&s.c).re / tr
            } else {
                0.0
            }
        })
        .collect()
}
