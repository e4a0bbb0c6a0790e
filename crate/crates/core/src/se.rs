//! Spectral-efficiency bounds.
//!
//! Monte Carlo bounds are built from mergeable moment accumulators so that a
//! batch of trials can be split into chunks, evaluated in parallel and
//! combined in a fixed order. All SEs are in bit/s/Hz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorBank;
use crate::linalg::{self, cr, CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    UlUatf,
    UlMrClosed,
    UlSic,
    DlLinear,
    DlSic,
    DlMrClosed,
    /// Uni-polarized downlink benchmark.
    DlUni,
}

impl Bound {
    pub const ALL: [Bound; 7] = [
        Bound::UlUatf,
        Bound::UlMrClosed,
        Bound::UlSic,
        Bound::DlLinear,
        Bound::DlSic,
        Bound::DlMrClosed,
        Bound::DlUni,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Bound::UlUatf => "ul_uatf",
            Bound::UlMrClosed => "ul_mr_closed",
            Bound::UlSic => "ul_sic",
            Bound::DlLinear => "dl_linear",
            Bound::DlSic => "dl_sic",
            Bound::DlMrClosed => "dl_mr_closed",
            Bound::DlUni => "dl_uni",
        }
    }

    pub fn is_uplink(self) -> bool {
        matches!(self, Bound::UlUatf | Bound::UlMrClosed | Bound::UlSic)
    }
}

impl std::str::FromStr for Bound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Bound::ALL
            .into_iter()
            .find(|b| b.label() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("bound: unknown value '{s}'")))
    }
}

/// Per-UE and sum SE of one scheme under one bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeReport {
    pub scheme: String,
    pub bound: String,
    pub per_ue: Vec<f64>,
    /// Per-stream split (`2k + i`) where the bound defines one.
    pub per_stream: Option<Vec<f64>>,
    pub sum: f64,
    pub prelog: f64,
    pub trials: usize,
    pub setups: usize,
}

impl SeReport {
    pub fn from_streams(scheme: &str, bound: Bound, per_stream: Vec<f64>, streams_per_ue: usize, prelog: f64, trials: usize) -> Self {
        let per_ue: Vec<f64> = per_stream.chunks(streams_per_ue).map(|c| c.iter().sum()).collect();
        Self::from_ues(scheme, bound, per_ue, Some(per_stream), prelog, trials)
    }

    pub fn from_ues(scheme: &str, bound: Bound, per_ue: Vec<f64>, per_stream: Option<Vec<f64>>, prelog: f64, trials: usize) -> Self {
        let sum = per_ue.iter().sum();
        Self {
            scheme: scheme.to_string(),
            bound: bound.label().to_string(),
            per_ue,
            per_stream,
            sum,
            prelog,
            trials,
            setups: 1,
        }
    }
}

/// `prelog * log2(1 + sinr)` per stream.
pub fn se_from_sinr(sinr: &[f64], prelog: f64) -> Vec<f64> {
    sinr.iter().map(|&g| prelog * (1.0 + g.max(0.0)).log2()).collect()
}

/// `(τ_c - τ_p) / τ_c`.
pub fn prelog(tau_c: usize, tau_p: usize) -> f64 {
    if tau_c == 0 || tau_p >= tau_c {
        return 0.0;
    }
    (tau_c - tau_p) as f64 / tau_c as f64
}

/// Sample moments for the uplink use-and-then-forget bound: with
/// `G = V^H H`, sums of `G_jj`, `|G_jl|²` and `||v_j||²`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlMoments {
    pub n: u64,
    pub streams: usize,
    pub signal: Vec<C64>,
    /// Row-major `S x S`, entry `(j, l)` sums `|v_j^H h_l|²`.
    pub cross: Vec<f64>,
    pub norm2: Vec<f64>,
}

impl UlMoments {
    pub fn new(streams: usize) -> Self {
        Self {
            n: 0,
            streams,
            signal: vec![C64::default(); streams],
            cross: vec![0.0; streams * streams],
            norm2: vec![0.0; streams],
        }
    }

    pub fn add(&mut self, v: &CMat, h: &CMat) {
        let g = v.adjoint() * h;
        let s = self.streams;
        self.n += 1;
        for j in 0..s {
            self.signal[j] += g[(j, j)];
            self.norm2[j] += v.column(j).norm_squared();
            for l in 0..s {
                self.cross[j * s + l] += g[(j, l)].norm_sqr();
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        for (a, b) in self.signal.iter_mut().zip(other.signal) {
            *a += b;
        }
        for (a, b) in self.cross.iter_mut().zip(other.cross) {
            *a += b;
        }
        for (a, b) in self.norm2.iter_mut().zip(other.norm2) {
            *a += b;
        }
        self
    }

    /// Per-stream SINR with powers `rho` and noise `sigma2`.
    pub fn sinr(&self, rho: &[f64], sigma2: f64) -> Result<Vec<f64>> {
        let n = self.n.max(1) as f64;
        let s = self.streams;
        (0..s)
            .map(|j| {
                let mean = self.signal[j] / n;
                let num = rho[j] * mean.norm_sqr();
                if num == 0.0 {
                    return Ok(0.0);
                }
                let interference: f64 = (0..s).map(|l| rho[l] * self.cross[j * s + l] / n).sum();
                let den = interference - num + sigma2 * self.norm2[j] / n;
                if !(den > 0.0) {
                    return Err(Error::numerical(format!(
                        "uplink SINR denominator of stream {j} is not positive ({den:e}); increase the trial count"
                    )));
                }
                Ok(num / den)
            })
            .collect()
    }
}

/// Sample moments for the downlink bounds: with `T = H^H W`, sums of the
/// diagonal blocks `T_kk = H_k W_k` and of `Σ_l T_kl T_kl^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DlMoments {
    pub n: u64,
    pub k: usize,
    pub streams_per_ue: usize,
    pub effective: Vec<CMat>,
    pub received: Vec<CMat>,
}

impl DlMoments {
    pub fn new(k: usize, streams_per_ue: usize) -> Self {
        let s = streams_per_ue;
        Self {
            n: 0,
            k,
            streams_per_ue,
            effective: vec![CMat::zeros(s, s); k],
            received: vec![CMat::zeros(s, s); k],
        }
    }

    pub fn add(&mut self, h: &CMat, w: &CMat) {
        let t = h.adjoint() * w;
        let s = self.streams_per_ue;
        self.n += 1;
        for k in 0..self.k {
            let rows = t.rows(k * s, s);
            self.effective[k] += rows.columns(k * s, s);
            self.received[k] += rows * rows.adjoint();
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        for (a, b) in self.effective.iter_mut().zip(other.effective) {
            *a += b;
        }
        for (a, b) in self.received.iter_mut().zip(other.received) {
            *a += b;
        }
        self
    }

    /// `E{H_k W_k}` and `E{H_k Σ_l W_l W_l^H H_k^H}` of UE `k`.
    pub fn means(&self, k: usize) -> (CMat, CMat) {
        let n = cr(self.n.max(1) as f64);
        (&self.effective[k] / n, linalg::hermitize(&(&self.received[k] / n)))
    }

    /// Per-stream SINR with the UE-side linear MMSE combiner.
    pub fn linear_sinr(&self, sigma2: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.k * self.streams_per_ue);
        for k in 0..self.k {
            let (b, q) = self.means(k);
            for i in 0..self.streams_per_ue {
                out.push(dl_linear_sinr(&b.column(i).into_owned(), &q, sigma2)?);
            }
        }
        Ok(out)
    }

    /// Per-UE SE with UE-side MMSE-SIC.
    pub fn sic_se(&self, sigma2: f64, prelog: f64) -> Result<Vec<f64>> {
        (0..self.k)
            .map(|k| {
                let (b, q) = self.means(k);
                Ok(prelog * dl_sic_log2det(&b, &q, sigma2)?)
            })
            .collect()
    }
}

/// `η = |v^H b|² / (v^H (Q + σ² I - b b^H) v)` with `v = (Q + σ² I)^{-1} b`.
pub fn dl_linear_sinr(b: &CVec, q: &CMat, sigma2: f64) -> Result<f64> {
    if b.norm() == 0.0 {
        return Ok(0.0);
    }
    let v = crate::beamforming::ue_combiner_dl(b, q, sigma2)?;
    let n = q.nrows();
    let a = q + CMat::identity(n, n).scale(sigma2) - b * b.adjoint();
    let num = v.dotc(b).norm_sqr();
    let den = v.dotc(&(a * &v)).re;
    if !(den > 0.0) {
        return Err(Error::numerical("downlink SINR denominator is not positive"));
    }
    Ok(num / den)
}

/// `log2 det(I + B^H Ω B)` with `Ω = (Q + σ² I - B B^H)^{-1}`.
pub fn dl_sic_log2det(b: &CMat, q: &CMat, sigma2: f64) -> Result<f64> {
    let n = q.nrows();
    let a = linalg::hermitize(&(q + CMat::identity(n, n).scale(sigma2) - b * b.adjoint()));
    let chol = linalg::cholesky(&a, "downlink interference-plus-noise covariance")?;
    let s = b.ncols();
    let inner = CMat::identity(s, s) + b.adjoint() * chol.solve(b);
    linalg::log2det_hpd(&linalg::hermitize(&inner), "downlink SIC matrix")
}

/// Per-UE uplink SIC SE of one trial from the whitened Gram matrix
/// `B^H B`: UE `k` gets `log2det(I + G_{≥k}) - log2det(I + G_{>k})`, where
/// `G_{≥k}` is the trailing block starting at UE `k`. The second value is
/// `log2det(I + B^H B)`, the sum form.
pub fn ul_sic_from_gram(gram: &CMat, streams_per_ue: usize) -> Result<(Vec<f64>, f64)> {
    let s = gram.nrows();
    // Reverse the stream order so trailing blocks become leading blocks.
    let rev = CMat::from_fn(s, s, |i, j| gram[(s - 1 - i, s - 1 - j)]);
    let a = linalg::hermitize(&(rev + CMat::identity(s, s)));
    let chol = linalg::cholesky(&a, "uplink SIC matrix")?;
    let l = chol.l_dirty();
    let logs: Vec<f64> = (0..s).map(|i| 2.0 * l[(i, i)].re.log2()).collect();
    let k = s / streams_per_ue;
    let mut per_ue = vec![0.0; k];
    for (i, v) in logs.iter().enumerate() {
        let stream = s - 1 - i;
        per_ue[stream / streams_per_ue] += v;
    }
    Ok((per_ue, logs.iter().sum()))
}

/// Both forms of the uplink SIC bound for one trial, evaluated literally:
/// per-UE `log2det(I_2 + P_k Ĥ_k Υ_k^{-1} Ĥ_k^H)` and the sum
/// `log2det(I_M + Σ Ĥ_l^H P_l Ĥ_l Z^{-1})`. No prelog applied.
pub fn ul_sic_literal(h_hat: &CMat, bank: &EstimatorBank, powers: &[f64], sigma2: f64) -> Result<(Vec<f64>, f64)> {
    let m = h_hat.nrows();
    let spu = bank.pilots.streams_per_ue;
    let k = h_hat.ncols() / spu;
    let z = linalg::hermitize(&(bank.weighted_error(powers) + CMat::identity(m, m).scale(sigma2)));
    let mut per_ue = Vec::with_capacity(k);
    for ue in 0..k {
        let mut ups = z.clone();
        for j in (ue + 1) * spu..k * spu {
            let h = h_hat.column(j);
            ups += (h * h.adjoint()).scale(powers[j]);
        }
        let hk = h_hat.columns(ue * spu, spu);
        let inv = linalg::hpd_inverse(&ups, "SIC interference covariance")?;
        let p = CMat::from_diagonal(&CVec::from_iterator(spu, (0..spu).map(|i| cr(powers[ue * spu + i]))));
        let mat = CMat::identity(spu, spu) + p * hk.adjoint() * inv * hk;
        per_ue.push(log2det_general(&mat)?);
    }
    let mut s = CMat::zeros(m, m);
    for (j, &p) in powers.iter().enumerate() {
        let h = h_hat.column(j);
        s += (h * h.adjoint()).scale(p);
    }
    let zinv = linalg::hpd_inverse(&z, "SIC noise covariance")?;
    let sum = log2det_general(&(CMat::identity(m, m) + s * zinv))?;
    Ok((per_ue, sum))
}

/// `log2 |det A|` through an LU factorization, for non-Hermitian `A`.
fn log2det_general(a: &CMat) -> Result<f64> {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].norm();
        if d == 0.0 {
            return Err(Error::numerical("singular matrix in log-determinant"));
        }
        acc += d.log2();
    }
    Ok(acc)
}

/// Uplink SIC accumulator of per-trial per-UE SEs and sum log-dets.
#[derive(Debug, Clone, PartialEq)]
pub struct UlSicAccumulator {
    pub n: u64,
    pub per_ue: Vec<f64>,
    pub sum: f64,
}

impl UlSicAccumulator {
    pub fn new(k: usize) -> Self {
        Self {
            n: 0,
            per_ue: vec![0.0; k],
            sum: 0.0,
        }
    }

    pub fn add(&mut self, per_ue: &[f64], sum: f64) {
        self.n += 1;
        for (a, b) in self.per_ue.iter_mut().zip(per_ue) {
            *a += b;
        }
        self.sum += sum;
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        for (a, b) in self.per_ue.iter_mut().zip(other.per_ue) {
            *a += b;
        }
        self.sum += other.sum;
        self
    }

    pub fn mean_per_ue(&self, prelog: f64) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.per_ue.iter().map(|v| prelog * v / n).collect()
    }
}

fn check_traces(bank: &EstimatorBank, rho: &[f64]) -> Result<Vec<f64>> {
    let spu = bank.pilots.streams_per_ue;
    bank.streams
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let tr = s.trace_gamma();
            if !(tr > 0.0) && rho[j] > 0.0 {
                return Err(Error::DegenerateUe {
                    ue: j / spu,
                    what: format!("tr(Γ) of stream {} is zero", j % spu),
                });
            }
            Ok(tr)
        })
        .collect()
}

/// Uplink MR closed form: per stream `j`,
/// `ρ_j tr(Γ_j) / (Σ_l ρ_l tr(Γ_j R_l) / tr(Γ_j) + σ²)`.
pub fn ul_mr_closed_sinr(bank: &EstimatorBank, rho: &[f64], sigma2: f64) -> Result<Vec<f64>> {
    let tr = check_traces(bank, rho)?;
    let s = bank.len();
    Ok((0..s)
        .map(|j| {
            if rho[j] == 0.0 {
                return 0.0;
            }
            let gj = &bank.streams[j].gamma;
            let interference: f64 = (0..s)
                .filter(|&l| rho[l] != 0.0)
                .map(|l| rho[l] * linalg::trace_product(gj, &bank.streams[l].r).re / tr[j])
                .sum();
            rho[j] * tr[j] / (interference + sigma2)
        })
        .collect())
}

/// Downlink MR closed form with exact `tr(Γ)` normalization: per stream `j`,
/// `ρ_j tr(Γ_j) / (Σ_l ρ_l tr(Γ_l R_j) / tr(Γ_l) + σ²)`.
pub fn dl_mr_closed_sinr(bank: &EstimatorBank, rho: &[f64], sigma2: f64) -> Result<Vec<f64>> {
    let tr = check_traces(bank, rho)?;
    let s = bank.len();
    Ok((0..s)
        .map(|j| {
            if rho[j] == 0.0 {
                return 0.0;
            }
            let rj = &bank.streams[j].r;
            let interference: f64 = (0..s)
                .filter(|&l| rho[l] != 0.0)
                .map(|l| rho[l] * linalg::trace_product(&bank.streams[l].gamma, rj).re / tr[l])
                .sum();
            rho[j] * tr[j] / (interference + sigma2)
        })
        .collect())
}

/// `(γ_1, γ_2)` of one polarization under uncorrelated fading: the
/// co-polar and cross-polar diagonal entries of `Γ`.
pub fn gammas_uncorrelated(beta: f64, q: f64, pilot_power: f64, tau_p: usize, sigma2: f64) -> (f64, f64) {
    let pt = pilot_power * tau_p as f64;
    let g = |x: f64| {
        let num = pt * beta * beta * x * x;
        if num == 0.0 {
            0.0
        } else {
            num / (pt * beta * x + sigma2)
        }
    };
    (g(1.0 - q), g(q))
}

/// Inputs of the uncorrelated-fading closed forms.
#[derive(Debug, Clone)]
pub struct UncorrelatedInputs<'a> {
    /// Number of BS ports.
    pub m: usize,
    pub betas: &'a [f64],
    pub qs: &'a [f64],
    /// `[p_kV, p_kH]` per UE.
    pub pilot_powers: &'a [[f64; 2]],
    pub tau_p: usize,
    pub sigma2_ul: f64,
}

impl UncorrelatedInputs<'_> {
    /// `[(γ_kV,1, γ_kV,2), (γ_kH,1, γ_kH,2)]` per UE.
    fn gammas(&self) -> Vec<[(f64, f64); 2]> {
        (0..self.betas.len())
            .map(|k| {
                let g = |p| gammas_uncorrelated(self.betas[k], self.qs[k], p, self.tau_p, self.sigma2_ul);
                [g(self.pilot_powers[k][0]), g(self.pilot_powers[k][1])]
            })
            .collect()
    }
}

/// Uplink MR SINR per stream (`2k + i`) for `R_bs = β I`.
pub fn ul_mr_uncorrelated_sinr(inp: &UncorrelatedInputs, rho: &[[f64; 2]], sigma2: f64) -> Vec<f64> {
    let half = inp.m as f64 / 2.0;
    let gam = inp.gammas();
    let k = inp.betas.len();
    let mut out = Vec::with_capacity(2 * k);
    for ue in 0..k {
        for i in 0..2 {
            let (g1, g2) = gam[ue][i];
            let gs = g1 + g2;
            if rho[ue][i] == 0.0 || gs == 0.0 {
                out.push(0.0);
                continue;
            }
            let interference: f64 = (0..k)
                .map(|l| {
                    let (b, q) = (inp.betas[l], inp.qs[l]);
                    let co = (g1 * b * (1.0 - q) + g2 * b * q) / gs;
                    let cross = (g1 * b * q + g2 * b * (1.0 - q)) / gs;
                    rho[l][i] * co + rho[l][1 - i] * cross
                })
                .sum();
            out.push(half * rho[ue][i] * gs / (interference + sigma2));
        }
    }
    out
}

/// Downlink MR SINR per stream (`2k + i`) for `R_bs = β I`. The cross-polar
/// term of UE `l` weights its own opposite-polarization estimate gains.
pub fn dl_mr_uncorrelated_sinr(inp: &UncorrelatedInputs, rho: &[[f64; 2]], sigma2: f64) -> Vec<f64> {
    let half = inp.m as f64 / 2.0;
    let gam = inp.gammas();
    let k = inp.betas.len();
    let mut out = Vec::with_capacity(2 * k);
    for ue in 0..k {
        let (b, q) = (inp.betas[ue], inp.qs[ue]);
        for i in 0..2 {
            let (g1, g2) = gam[ue][i];
            if rho[ue][i] == 0.0 || g1 + g2 == 0.0 {
                out.push(0.0);
                continue;
            }
            let interference: f64 = (0..k)
                .map(|l| {
                    let term = |pol: usize, co_weight: bool| {
                        let (a1, a2) = gam[l][pol];
                        if rho[l][pol] == 0.0 || a1 + a2 == 0.0 {
                            return 0.0;
                        }
                        let w = if co_weight {
                            a1 * b * (1.0 - q) + a2 * b * q
                        } else {
                            a1 * b * q + a2 * b * (1.0 - q)
                        };
                        rho[l][pol] * w / (a1 + a2)
                    };
                    term(i, true) + term(1 - i, false)
                })
                .sum();
            out.push(half * rho[ue][i] * (g1 + g2) / (interference + sigma2));
        }
    }
    out
}

/// Closed-form second moments of MMSE estimates under Gaussian fading.
pub mod moments {
    use crate::linalg::{self, CMat};

    /// `E{|ĥ^H ĥ|²} = tr(Γ)² + tr(Γ Γ)`.
    pub fn estimate_fourth(gamma: &CMat) -> f64 {
        let t = linalg::trace(gamma).re;
        t * t + linalg::trace_product(gamma, gamma).re
    }

    /// `E{|ĥ_a^H ĥ_b|²} = tr(Γ_a Γ_b)` for independent estimates.
    pub fn estimate_cross(gamma_a: &CMat, gamma_b: &CMat) -> f64 {
        linalg::trace_product(gamma_a, gamma_b).re
    }

    /// `E{|ĥ^H e|²} = tr(Γ C)` for an estimate and its own error.
    pub fn estimate_error(gamma: &CMat, c: &CMat) -> f64 {
        linalg::trace_product(gamma, c).re
    }

    /// `E{|ĥ^H h|²} = tr(Γ)² + tr(Γ R)` for an estimate and its own channel.
    pub fn estimate_channel(gamma: &CMat, r: &CMat) -> f64 {
        let t = linalg::trace(gamma).re;
        t * t + linalg::trace_product(gamma, r).re
    }
}
