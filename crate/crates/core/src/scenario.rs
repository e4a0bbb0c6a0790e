//! Cell geometry, large-scale fading, spatial correlation and polarization
//! statistics of the UEs.
//!
//! BS antenna ports are ordered dual-antenna by dual-antenna: port `2m` is the
//! V port and `2m + 1` the H port of dual-polarized antenna `m`. With that
//! ordering the full-array correlation is `R_bs ⊗ I_2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, CMat, C64};

/// dBm to W.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Full experiment description. All powers are in W and gains linear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Number of BS antenna ports (twice the number of dual-polarized antennas).
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau_c: usize,
    pub tau_p: usize,
    pub noise_power_ul: f64,
    pub noise_power_dl: f64,
    /// Pilot power per polarization per UE.
    pub pilot_power: f64,
    pub ul_power: f64,
    pub dl_power: f64,
    /// Cross-polar discrimination in dB; `f64::INFINITY` means no leakage.
    pub xpd_db: f64,
    pub xpc_t: C64,
    pub xpc_r: C64,
    pub asd_deg: f64,
    pub n_clusters: usize,
    pub cell_side_m: f64,
    pub min_distance_m: f64,
    pub shadow_sigma_db: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    /// The reference setup: 10 UEs in a 0.5 km square cell, 20 pilots out of
    /// 200 samples, 100 mW per polarization, -94 dBm noise and 5 dB XPD.
    fn default() -> Self {
        Self {
            m: 100,
            k: 10,
            tau_c: 200,
            tau_p: 20,
            noise_power_ul: dbm_to_watt(-94.0),
            noise_power_dl: dbm_to_watt(-94.0),
            pilot_power: 0.1,
            ul_power: 0.1,
            dl_power: 0.1,
            xpd_db: 5.0,
            xpc_t: C64::default(),
            xpc_r: C64::default(),
            asd_deg: 5.0,
            n_clusters: 6,
            cell_side_m: 500.0,
            min_distance_m: 15.0,
            shadow_sigma_db: 7.0,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || !self.m.is_multiple_of(2) {
            return Err(Error::config(format!("M: must be even and positive, got {}", self.m)));
        }
        if self.k == 0 {
            return Err(Error::config("K: must be positive"));
        }
        if self.tau_p > self.tau_c {
            return Err(Error::config(format!(
                "tau_p: {} exceeds tau_c {}",
                self.tau_p, self.tau_c
            )));
        }
        if self.tau_c == 0 {
            return Err(Error::config("tau_c: must be positive"));
        }
        for (name, v) in [
            ("noise_power_ul", self.noise_power_ul),
            ("noise_power_dl", self.noise_power_dl),
            ("pilot_power", self.pilot_power),
            ("ul_power", self.ul_power),
            ("dl_power", self.dl_power),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name}: must be finite and >= 0, got {v}")));
            }
        }
        if !(self.xpd_db >= 0.0) {
            return Err(Error::config(format!("xpd_db: must be >= 0 or inf, got {}", self.xpd_db)));
        }
        for (name, v) in [("xpc_t", self.xpc_t), ("xpc_r", self.xpc_r)] {
            if !(v.norm() <= 1.0) {
                return Err(Error::config(format!("{name}: |{v}| exceeds 1")));
            }
        }
        if !(self.asd_deg > 0.0) {
            return Err(Error::config("asd_deg: must be positive"));
        }
        if self.n_clusters == 0 {
            return Err(Error::config("n_clusters: must be positive"));
        }
        if !(self.cell_side_m > 0.0) || !(self.min_distance_m >= 0.0) {
            return Err(Error::config("cell_side_m/min_distance_m: invalid geometry"));
        }
        if self.min_distance_m >= self.cell_side_m * std::f64::consts::FRAC_1_SQRT_2 {
            return Err(Error::config("min_distance_m: no point of the cell is far enough"));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::config("shadow_sigma_db: must be >= 0"));
        }
        Ok(())
    }

    pub fn half_m(&self) -> usize {
        self.m / 2
    }

    pub fn asd_rad(&self) -> f64 {
        self.asd_deg.to_radians()
    }

    pub fn q(&self) -> f64 {
        xpd_to_q(self.xpd_db)
    }

    /// `(tau_c - tau_p) / tau_c`.
    pub fn prelog(&self) -> f64 {
        (self.tau_c - self.tau_p) as f64 / self.tau_c as f64
    }

    /// Per-UE uplink budget over both polarizations.
    pub fn ul_power_total(&self) -> f64 {
        2.0 * self.ul_power
    }

    /// BS downlink budget over both polarizations and all UEs.
    pub fn dl_power_total(&self) -> f64 {
        2.0 * self.k as f64 * self.dl_power
    }
}

/// Position and large-scale parameters of one UE, independent of the array.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UeGeometry {
    pub position: [f64; 2],
    pub distance: f64,
    pub nominal_angle: f64,
    pub cluster_angles: Vec<f64>,
    pub shadow_db: f64,
    /// Linear large-scale fading gain.
    pub beta: f64,
}

const MAX_DROP_DRAWS: usize = 1_000_000;
const CLUSTER_SPREAD_RAD: f64 = 40.0 * PI / 180.0;

/// Drops `cfg.k` UEs uniformly in the square cell centered on the BS, at
/// least `min_distance_m` away, and draws their cluster angles and shadow
/// fading.
pub fn drop_ues<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<UeGeometry>> {
    let half = cfg.cell_side_m / 2.0;
    let mut draws = 0usize;
    let mut ues = Vec::with_capacity(cfg.k);
    while ues.len() < cfg.k {
        draws += 1;
        if draws > MAX_DROP_DRAWS {
            return Err(Error::DegenerateGeometry(format!(
                "no valid UE position after {MAX_DROP_DRAWS} draws"
            )));
        }
        let x = rng.random_range(-half..half);
        let y = rng.random_range(-half..half);
        let distance = x.hypot(y);
        if distance < cfg.min_distance_m {
            continue;
        }
        let nominal_angle = y.atan2(x);
        let cluster_angles = (0..cfg.n_clusters)
            .map(|_| nominal_angle + rng.random_range(-CLUSTER_SPREAD_RAD..CLUSTER_SPREAD_RAD))
            .collect();
        let z: f64 = rng.sample(StandardNormal);
        let shadow_db = cfg.shadow_sigma_db * z;
        let beta = db_to_linear(pathloss_db(distance, shadow_db)?);
        ues.push(UeGeometry {
            position: [x, y],
            distance,
            nominal_angle,
            cluster_angles,
            shadow_db,
            beta,
        });
    }
    Ok(ues)
}

/// Large-scale fading in dB at distance `d` (m) with shadow fading `shadow_db`.
pub fn pathloss_db(d: f64, shadow_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("pathloss distance must be positive, got {d}")));
    }
    Ok(-35.3 - 37.6 * d.log10() + shadow_db)
}

/// Gaussian local scattering correlation of a half-wavelength ULA with
/// `n` elements, averaged over the given cluster angles.
pub fn local_scattering(cluster_angles: &[f64], asd_rad: f64, n: usize, beta: f64) -> CMat {
    let clusters = cluster_angles.len().max(1) as f64;
    // Toeplitz: first column then mirror.
    let col: Vec<C64> = (0..n)
        .map(|d| {
            let d = d as f64;
            cluster_angles
                .iter()
                .map(|&phi| {
                    let phase = PI * d * phi.sin();
                    let spread = (-0.5 * asd_rad * asd_rad * (PI * d * phi.cos()).powi(2)).exp();
                    c(phase.cos(), phase.sin()) * spread
                })
                .sum::<C64>()
                * (beta / clusters)
        })
        .collect();
    let mut r = CMat::from_fn(n, n, |s, m| {
        if s >= m {
            col[s - m]
        } else {
            col[m - s].conj()
        }
    });
    let r_herm = linalg::hermitize(&r);
    r = r_herm;
    for i in 0..n {
        r[(i, i)] = cr(beta);
    }
    if n > 1 && linalg::min_eigenvalue(&r) < 0.0 {
        // Floor, then restore the unit-gain diagonal by a congruence so the
        // result stays PSD.
        let floored = linalg::psd_floor(&r);
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let d = floored[(i, i)].re;
                if d > 0.0 {
                    (beta / d).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        r = CMat::from_fn(n, n, |i, j| floored[(i, j)] * scale[i] * scale[j]);
        for i in 0..n {
            r[(i, i)] = cr(beta);
        }
    }
    r
}

/// Leakage coefficient `q` from the XPD in dB, using `XPD = (1 - q) / q`.
pub fn xpd_to_q(xpd_db: f64) -> f64 {
    if xpd_db == f64::INFINITY {
        return 0.0;
    }
    1.0 / (1.0 + db_to_linear(xpd_db))
}

fn polarized_from_sqrt(r_bs_sqrt: &CMat, q: f64) -> (CMat, CMat) {
    let r_bs = r_bs_sqrt * r_bs_sqrt;
    let d_v = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(1.0 - q), cr(q)]));
    let d_h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(q), cr(1.0 - q)]));
    // (S ⊗ I)(I ⊗ D)(S ⊗ I) = S² ⊗ D.
    (linalg::kron(&r_bs, &d_v), linalg::kron(&r_bs, &d_h))
}

/// Per-polarization channel covariances `(R_v, R_h)` from the BS spatial
/// correlation and the leakage coefficient.
pub fn build_polarized_covariances(r_bs: &CMat, q: f64) -> Result<(CMat, CMat)> {
    let sqrt = linalg::hermitian_sqrt(r_bs)?;
    Ok(polarized_from_sqrt(&sqrt, q))
}

/// Second-order statistics of one UE for a given array size.
#[derive(Debug, Clone)]
pub struct UeStatistics {
    pub position: [f64; 2],
    pub beta: f64,
    pub q: f64,
    pub t: C64,
    pub r: C64,
    /// `(M/2) x (M/2)` spatial correlation.
    pub r_bs: CMat,
    pub r_bs_sqrt: CMat,
    pub r_v: CMat,
    pub r_h: CMat,
}

impl UeStatistics {
    pub fn new(geom: &UeGeometry, half_m: usize, asd_rad: f64, q: f64, t: C64, r: C64) -> Result<Self> {
        let r_bs = local_scattering(&geom.cluster_angles, asd_rad, half_m, geom.beta);
        Self::from_correlation(geom.position, geom.beta, r_bs, q, t, r)
    }

    pub fn from_correlation(position: [f64; 2], beta: f64, r_bs: CMat, q: f64, t: C64, r: C64) -> Result<Self> {
        let r_bs_sqrt = linalg::hermitian_sqrt(&r_bs)?;
        let (r_v, r_h) = polarized_from_sqrt(&r_bs_sqrt, q);
        Ok(Self {
            position,
            beta,
            q,
            t,
            r,
            r_bs,
            r_bs_sqrt,
            r_v,
            r_h,
        })
    }

    /// Spatially uncorrelated statistics, `R_bs = beta I`.
    pub fn uncorrelated(beta: f64, half_m: usize, q: f64) -> Self {
        let r_bs = CMat::identity(half_m, half_m).scale(beta);
        let r_bs_sqrt = CMat::identity(half_m, half_m).scale(beta.sqrt());
        let (r_v, r_h) = polarized_from_sqrt(&r_bs_sqrt, q);
        Self {
            position: [0.0, 0.0],
            beta,
            q,
            t: C64::default(),
            r: C64::default(),
            r_bs,
            r_bs_sqrt,
            r_v,
            r_h,
        }
    }

    pub fn m(&self) -> usize {
        self.r_v.nrows()
    }

    /// Statistics of the effective channel after UE eigenbeamforming with
    /// gain `lambda`: every covariance is scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.beta *= lambda;
        out.r_bs = out.r_bs.scale(lambda);
        out.r_bs_sqrt = out.r_bs_sqrt.scale(lambda.sqrt());
        out.r_v = out.r_v.scale(lambda);
        out.r_h = out.r_h.scale(lambda);
        out
    }

    /// Block-diagonal covariance of `vec(H^H)`: `blkdiag(R_v, R_h)`.
    pub fn delta(&self) -> CMat {
        let m = self.m();
        let mut d = CMat::zeros(2 * m, 2 * m);
        d.view_mut((0, 0), (m, m)).copy_from(&self.r_v);
        d.view_mut((m, m), (m, m)).copy_from(&self.r_h);
        d
    }

    /// Actual covariances of the rows `h_kV`, `h_kH`. BS-side XPC `t` adds
    /// `√(q(1-q)) t` to the off-diagonal of every 2x2 block; without it
    /// these are `(r_v, r_h)`.
    pub fn row_covariances(&self) -> (CMat, CMat) {
        if self.t == C64::default() {
            return (self.r_v.clone(), self.r_h.clone());
        }
        let x = (self.q * (1.0 - self.q)).sqrt() * self.t;
        let block = |a: f64, b: f64| CMat::from_row_slice(2, 2, &[cr(a), x, x.conj(), cr(b)]);
        let q = self.q;
        (
            linalg::kron(&self.r_bs, &block(1.0 - q, q)),
            linalg::kron(&self.r_bs, &block(q, 1.0 - q)),
        )
    }

    pub fn has_xpc(&self) -> bool {
        self.t != C64::default() || self.r != C64::default()
    }
}

/// One setup: UE geometry plus statistics for a given array.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub geometry: Vec<UeGeometry>,
    pub ues: Vec<UeStatistics>,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig, geometry: Vec<UeGeometry>) -> Result<Self> {
        config.validate()?;
        let q = config.q();
        let ues = geometry
            .iter()
            .map(|g| UeStatistics::new(g, config.half_m(), config.asd_rad(), q, config.xpc_t, config.xpc_r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            geometry,
            ues,
        })
    }

    /// Draws a fresh geometry with `rng` and builds the statistics.
    pub fn generate<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let geometry = drop_ues(config, rng)?;
        Self::build(config, geometry)
    }

    /// All UEs with `R_bs = beta I` but the same gains and leakage.
    pub fn uncorrelated(config: &ScenarioConfig, betas: &[f64]) -> Self {
        let q = config.q();
        let ues = betas
            .iter()
            .map(|&b| UeStatistics::uncorrelated(b, config.half_m(), q))
            .collect();
        Self {
            config: config.clone(),
            geometry: Vec::new(),
            ues,
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.beta).collect()
    }

    pub fn qs(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.q).collect()
    }
}
