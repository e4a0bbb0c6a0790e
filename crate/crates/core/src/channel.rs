//! Dual-polarized channel sampling and UE-side eigenbeamforming.
//!
//! A realization stores `vec`-style columns: column `2k + i` of
//! [`ChannelRealization::h_all`] is `h_ki` for polarization `i` (0 = V,
//! 1 = H), so `H_k` is the adjoint of columns `2k..2k+2`.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CMat2, C64};
use crate::rng::complex_normal;
use crate::scenario::UeStatistics;

/// Cross-polar correlation matrices at the two link ends.
#[derive(Debug, Clone, PartialEq)]
pub struct XpcMatrices {
    pub c_bs: CMat2,
    pub c_ue: CMat2,
}

impl XpcMatrices {
    pub fn new(t: C64, r: C64) -> Result<Self> {
        if t.norm() > 1.0 || r.norm() > 1.0 {
            return Err(Error::domain(format!("XPC magnitudes must be <= 1 (t = {t}, r = {r})")));
        }
        Ok(Self {
            c_bs: CMat2::new(cr(1.0), t, t.conj(), cr(1.0)),
            c_ue: CMat2::new(cr(1.0), r, r.conj(), cr(1.0)),
        })
    }

    pub fn sqrt(&self) -> Result<(CMat2, CMat2)> {
        Ok((linalg::sqrt_hermitian_2x2(&self.c_ue)?, linalg::sqrt_hermitian_2x2(&self.c_bs)?))
    }
}

/// One draw of all K channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `M x 2K`, column `2k + i` is `h_ki`.
    pub h_all: CMat,
}

impl ChannelRealization {
    pub fn k(&self) -> usize {
        self.h_all.ncols() / 2
    }

    pub fn m(&self) -> usize {
        self.h_all.nrows()
    }

    /// The `2 x M` matrix `H_k` with rows `h_kV^H`, `h_kH^H`.
    pub fn h_k(&self, k: usize) -> CMat {
        self.h_all.columns(2 * k, 2).adjoint()
    }
}

/// `(R_bs^{1/2} ⊗ I_2) s` without forming the Kronecker product.
fn correlate(r_bs_sqrt: &CMat, s: &[C64]) -> Vec<C64> {
    let half = r_bs_sqrt.nrows();
    let x = CMat::from_fn(half, 2, |n, p| s[2 * n + p]);
    let y = r_bs_sqrt * x;
    (0..2 * half).map(|i| y[(i / 2, i % 2)]).collect()
}

fn draw_correlated<R: Rng + ?Sized>(stats: &UeStatistics, rng: &mut R) -> (Vec<C64>, Vec<C64>) {
    let m = 2 * stats.r_bs_sqrt.nrows();
    let s_v: Vec<C64> = (0..m).map(|_| complex_normal(rng)).collect();
    let s_h: Vec<C64> = (0..m).map(|_| complex_normal(rng)).collect();
    (correlate(&stats.r_bs_sqrt, &s_v), correlate(&stats.r_bs_sqrt, &s_h))
}

/// `Σ_k` as `[[√(1-q), √q], [√q, √(1-q)]]`.
fn sigma_mask(q: f64) -> [[f64; 2]; 2] {
    let a = (1.0 - q).sqrt();
    let b = q.sqrt();
    [[a, b], [b, a]]
}

/// Draws `H_k` for a UE without cross-polar correlation.
pub fn sample_channel_uncorr_xpc<R: Rng + ?Sized>(stats: &UeStatistics, rng: &mut R) -> CMat {
    let (g_v, g_h) = draw_correlated(stats, rng);
    let mask = sigma_mask(stats.q);
    let m = g_v.len();
    CMat::from_fn(2, m, |x, col| {
        let g = if x == 0 { g_v[col] } else { g_h[col] };
        (g * mask[x][col % 2]).conj()
    })
}

/// Draws `H_k` with the general per-block model `Σ ⊙ (C_UE^{1/2} G C_BS^{1/2})`.
/// With `t = r = 0` this consumes the same draws and returns the same matrix
/// as [`sample_channel_uncorr_xpc`].
pub fn sample_channel_general<R: Rng + ?Sized>(stats: &UeStatistics, rng: &mut R) -> Result<CMat> {
    let (ue_sqrt, bs_sqrt) = XpcMatrices::new(stats.t, stats.r)?.sqrt()?;
    Ok(sample_general_with(stats, &ue_sqrt, &bs_sqrt, rng))
}

fn sample_general_with<R: Rng + ?Sized>(stats: &UeStatistics, ue_sqrt: &CMat2, bs_sqrt: &CMat2, rng: &mut R) -> CMat {
    let (g_v, g_h) = draw_correlated(stats, rng);
    let mask = sigma_mask(stats.q);
    let half = g_v.len() / 2;
    let mut h = CMat::zeros(2, 2 * half);
    for n in 0..half {
        // Row x of G holds conj of the correlated draw for UE polarization x.
        let g = CMat2::new(
            g_v[2 * n].conj(),
            g_v[2 * n + 1].conj(),
            g_h[2 * n].conj(),
            g_h[2 * n + 1].conj(),
        );
        let mixed = ue_sqrt * g * bs_sqrt;
        for x in 0..2 {
            for y in 0..2 {
                h[(x, 2 * n + y)] = mixed[(x, y)] * mask[x][y];
            }
        }
    }
    h
}

/// Per-setup sampler for all UEs. Square roots of the XPC matrices are
/// computed once.
#[derive(Debug, Clone)]
pub struct DualChannelSampler<'a> {
    ues: &'a [UeStatistics],
    xpc: Vec<Option<(CMat2, CMat2)>>,
}

impl<'a> DualChannelSampler<'a> {
    pub fn new(ues: &'a [UeStatistics]) -> Result<Self> {
        let xpc = ues
            .iter()
            .map(|u| if u.has_xpc() { XpcMatrices::new(u.t, u.r)?.sqrt().map(Some) } else { Ok(None) })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ues, xpc })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let m = self.ues.first().map_or(0, |u| u.m());
        let mut h_all = CMat::zeros(m, 2 * self.ues.len());
        for (k, (ue, xpc)) in self.ues.iter().zip(&self.xpc).enumerate() {
            let h_k = match xpc {
                None => sample_channel_uncorr_xpc(ue, rng),
                Some((u, b)) => sample_general_with(ue, u, b, rng),
            };
            h_all.columns_mut(2 * k, 2).copy_from(&h_k.adjoint());
        }
        ChannelRealization { h_all }
    }
}

/// Sampler for the uni-polarized benchmark, `h_k ~ CN(0, R_k)`.
#[derive(Debug, Clone)]
pub struct UniChannelSampler {
    sqrt: Vec<CMat>,
}

impl UniChannelSampler {
    pub fn new(correlations: &[CMat]) -> Result<Self> {
        let sqrt = correlations.iter().map(linalg::hermitian_sqrt).collect::<Result<Vec<_>>>()?;
        Ok(Self { sqrt })
    }

    /// `M_uni x K` matrix of channel columns.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        let m = self.sqrt.first().map_or(0, |s| s.nrows());
        let mut h = CMat::zeros(m, self.sqrt.len());
        for (k, s) in self.sqrt.iter().enumerate() {
            let z = linalg::CVec::from_fn(m, |_, _| complex_normal(rng));
            h.set_column(k, &(s * z));
        }
        h
    }
}

/// Dominant eigenpair `(λ, u)` of the UE-side correlation matrix.
pub fn eigenbeamforming_scale(r_ue: &CMat) -> Result<(f64, linalg::CVec)> {
    let n = r_ue.nrows();
    if n == 0 || r_ue.ncols() != n {
        return Err(Error::domain("UE correlation must be square and nonempty"));
    }
    let scale = r_ue.norm().max(f64::MIN_POSITIVE);
    if (r_ue - r_ue.adjoint()).norm() > 1e-12 * scale {
        return Err(Error::domain("UE correlation matrix is not Hermitian"));
    }
    let (values, vectors) = linalg::hermitian_eigen(r_ue);
    let lambda = values[n - 1];
    let mut u = vectors.column(n - 1).into_owned();
    // Fix the phase so the largest entry is real and positive.
    let (imax, _) = u.iter().enumerate().fold((0, 0.0), |acc, (i, z)| {
        if z.norm() > acc.1 {
            (i, z.norm())
        } else {
            acc
        }
    });
    let phase = u[imax] / u[imax].norm();
    u /= phase;
    Ok((lambda, u))
}

/// Writes realizations as a little-endian binary dump: three `u64` header
/// words `(M, K, trials)` followed, per trial and UE, by the rows of `H_k`
/// in row-major order as `f32` (re, im) pairs.
pub fn write_channel_dump(path: &Path, realizations: &[ChannelRealization]) -> Result<()> {
    let (m, k) = realizations.first().map_or((0, 0), |r| (r.m(), r.k()));
    let mut buf = Vec::with_capacity(24 + realizations.len() * k * 2 * m * 8);
    for w in [m as u64, k as u64, realizations.len() as u64] {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    for real in realizations {
        for ue in 0..k {
            let h = real.h_k(ue);
            for row in 0..2 {
                for col in 0..m {
                    let z = h[(row, col)];
                    buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                    buf.extend_from_slice(&(z.im as f32).to_le_bytes());
                }
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))
}
