//! Uplink combiners, downlink precoders and the UE-side downlink combiner.
//!
//! Combiners are returned as `M x S` matrices whose columns line up with the
//! stream columns of the channel estimate.

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorBank;
use crate::linalg::{self, CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mmse,
    Zf,
    Mr,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Mmse, Scheme::Zf, Scheme::Mr];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Mmse => "mmse",
            Scheme::Zf => "zf",
            Scheme::Mr => "mr",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmse" => Ok(Scheme::Mmse),
            "zf" => Ok(Scheme::Zf),
            "mr" => Ok(Scheme::Mr),
            other => Err(Error::config(format!("scheme: unknown value '{other}'"))),
        }
    }
}

/// Setup-level state shared by all trials of the uplink MMSE combiner and
/// the SIC bound: the Cholesky factor of `Z = Σ_j ρ_j C_j + σ² I`.
#[derive(Debug, Clone)]
pub struct UlContext {
    pub powers: Vec<f64>,
    pub sigma2: f64,
    z_chol: Cholesky<C64, Dyn>,
}

impl UlContext {
    pub fn new(bank: &EstimatorBank, powers: &[f64], sigma2: f64) -> Result<Self> {
        if powers.len() != bank.len() {
            return Err(Error::config("uplink powers: one value per stream required"));
        }
        let m = bank.m();
        let z = bank.weighted_error(powers) + CMat::identity(m, m).scale(sigma2);
        let z_chol = linalg::cholesky(&linalg::hermitize(&z), "uplink error-plus-noise covariance")?;
        Ok(Self {
            powers: powers.to_vec(),
            sigma2,
            z_chol,
        })
    }

    pub fn log2det_z(&self) -> f64 {
        linalg::log2det_from_cholesky(&self.z_chol)
    }

    /// Whitened, power-scaled estimates `B = L^{-1} Ĥ P^{1/2}` and their Gram
    /// matrix `B^H B`.
    pub fn whiten(&self, h_hat: &CMat) -> WhitenedEstimates {
        let mut a = h_hat.clone();
        for (j, &p) in self.powers.iter().enumerate() {
            a.column_mut(j).scale_mut(p.sqrt());
        }
        let l = self.z_chol.l_dirty();
        let b = l
            .solve_lower_triangular(&a)
            .expect("Cholesky factor has a positive diagonal");
        let gram = b.adjoint() * &b;
        WhitenedEstimates { b, gram }
    }
}

#[derive(Debug, Clone)]
pub struct WhitenedEstimates {
    pub b: CMat,
    pub gram: CMat,
}

/// `v_ki = ĥ_ki`.
pub fn combiner_mr(h_hat: &CMat) -> CMat {
    h_hat.clone()
}

/// Columns of `Ĥ (Ĥ^H Ĥ)^{-1}`. The flag is set when the Gram matrix had to
/// be regularized with a `1e-12 tr` ridge.
pub fn combiner_zf(h_hat: &CMat) -> Result<(CMat, bool)> {
    let gram = linalg::hermitize(&(h_hat.adjoint() * h_hat));
    let n = gram.nrows();
    let (chol, ridged) = match Cholesky::new(gram.clone()) {
        Some(c) => (c, false),
        None => {
            let ridge = 1e-12 * linalg::trace(&gram).re.max(f64::MIN_POSITIVE);
            let c = linalg::cholesky(&(gram + CMat::identity(n, n).scale(ridge)), "zero-forcing Gram matrix")?;
            (c, true)
        }
    };
    Ok((chol.solve(&h_hat.adjoint()).adjoint(), ridged))
}

/// `v_ki = √ρ_ki Υ^{-1} ĥ_ki`, computed from the whitened estimates as
/// `L^{-H} B (I + B^H B)^{-1}`.
pub fn combiner_mmse(ctx: &UlContext, w: &WhitenedEstimates) -> Result<CMat> {
    let s = w.gram.nrows();
    let inner = linalg::cholesky(&(&w.gram + CMat::identity(s, s)), "MMSE inner matrix")?;
    let x = inner.solve(&w.b.adjoint()).adjoint();
    Ok(ctx
        .z_chol
        .l_dirty()
        .ad_solve_lower_triangular(&x)
        .expect("Cholesky factor has a positive diagonal"))
}

/// Builds the combiner of `scheme` for one trial. Returns the matrix and the
/// zero-forcing regularization flag.
pub fn combine(scheme: Scheme, h_hat: &CMat, ctx: &UlContext, whitened: Option<&WhitenedEstimates>) -> Result<(CMat, bool)> {
    match scheme {
        Scheme::Mr => Ok((combiner_mr(h_hat), false)),
        Scheme::Zf => combiner_zf(h_hat),
        Scheme::Mmse => {
            let owned;
            let w = match whitened {
                Some(w) => w,
                None => {
                    owned = ctx.whiten(h_hat);
                    &owned
                }
            };
            Ok((combiner_mmse(ctx, w)?, false))
        }
    }
}

/// Running sum of squared column norms, used to normalize precoders.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnPower {
    pub n: u64,
    pub sum: Vec<f64>,
}

impl ColumnPower {
    pub fn new(streams: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; streams],
        }
    }

    pub fn add(&mut self, v: &CMat) {
        self.n += 1;
        for (j, col) in v.column_iter().enumerate() {
            self.sum[j] += col.norm_squared();
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        self
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

/// Exact `E{||v||²}` of MR columns, `tr(Γ)`.
pub fn mr_normalizers(bank: &EstimatorBank) -> Vec<f64> {
    bank.streams.iter().map(|s| s.trace_gamma()).collect()
}

/// Downlink precoder: column `j` is `√ρ_j v_j / √E{||v_j||²}`.
pub fn precoder_dl(v: &CMat, normalizers: &[f64], rho_dl: &[f64], streams_per_ue: usize) -> Result<CMat> {
    let mut w = v.clone();
    for (j, (&norm, &rho)) in normalizers.iter().zip(rho_dl).enumerate() {
        if rho == 0.0 {
            w.column_mut(j).fill(C64::default());
            continue;
        }
        if !(norm > 0.0) {
            return Err(Error::DegenerateUe {
                ue: j / streams_per_ue,
                what: format!("precoder normalizer of stream {} is zero", j % streams_per_ue),
            });
        }
        w.column_mut(j).scale_mut((rho / norm).sqrt());
    }
    Ok(w)
}

/// UE-side linear MMSE combiner `(Q + σ² I)^{-1} b` where `Q` is the
/// received-signal covariance without noise and `b = E{H_k w_ki}`.
pub fn ue_combiner_dl(b: &CVec, q: &CMat, sigma2: f64) -> Result<CVec> {
    let n = q.nrows();
    let a = linalg::hermitize(&(q + CMat::identity(n, n).scale(sigma2)));
    Ok(linalg::cholesky(&a, "downlink received-signal covariance")?.solve(b))
}

/// `Υ = Σ_j ρ_j (ĥ_j ĥ_j^H + C_j) + σ² I`, formed explicitly.
pub fn upsilon(h_hat: &CMat, bank: &EstimatorBank, powers: &[f64], sigma2: f64) -> CMat {
    let m = h_hat.nrows();
    let mut u = bank.weighted_error(powers) + CMat::identity(m, m).scale(sigma2);
    for (j, &p) in powers.iter().enumerate() {
        let h = h_hat.column(j);
        u += (h * h.adjoint()).scale(p);
    }
    linalg::hermitize(&u)
}

/// Cosine similarity `|a^H b| / (|a| |b|)` between two vectors.
pub fn direction_similarity(a: &CVec, b: &CVec) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dotc(b).norm() / (na * nb)
}
