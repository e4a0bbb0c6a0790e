//! Evaluation of one setup: statistics, power control, normalization pass,
//! Monte Carlo trials and closed forms for every requested cell.

use std::f64::consts::PI;

use rand::Rng;

use super::{CellSpec, ExperimentPlan, PowerControl, UniMode, Variant};
use crate::beamforming::{self, ColumnPower, Scheme, UlContext};
use crate::channel::{eigenbeamforming_scale, DualChannelSampler, UniChannelSampler};
use crate::error::Result;
use crate::estimation::{self, build_pilots, build_pilots_uni, EstimatorBank};
use crate::linalg::CMat;
use crate::par;
use crate::power::{self, PowerAllocation, PowerProblem};
use crate::rng::{stream, Domain};
use crate::scenario::{drop_ues, local_scattering, xpd_to_q, UeGeometry, UeStatistics};
use crate::se::{self, Bound, DlMoments, UlMoments, UlSicAccumulator};

const CHUNK: usize = 64;
const UE_CLUSTER_SPREAD_RAD: f64 = 40.0 * PI / 180.0;

/// Per-UE SE of every cell for one setup, plus diagnostics.
#[derive(Debug, Clone)]
pub struct SetupOutcome {
    pub per_ue: Vec<Vec<f64>>,
    pub ul_power: Option<PowerAllocation>,
    pub dl_power: Option<PowerAllocation>,
    pub zf_ridge_events: u64,
    pub mean_nmse: f64,
}

/// UE drops for all setups. They do not depend on `M` or the variant, so
/// every sweep point sees the same geometry.
pub(crate) fn draw_geometries(plan: &ExperimentPlan) -> Result<Vec<Vec<UeGeometry>>> {
    par::try_map_indexed(plan.setups, |s| {
        drop_ues(&plan.scenario, &mut stream(plan.seed, Domain::Geometry, s as u64, 0))
    })
}

/// Eigenbeamforming gain of each UE with `n` antennas (`n / 2` per
/// polarization), from a local-scattering correlation at the UE.
fn ue_array_gains(plan: &ExperimentPlan, n: usize, setup: usize) -> Result<Vec<f64>> {
    if n <= 2 {
        return Ok(vec![1.0; plan.scenario.k]);
    }
    (0..plan.scenario.k)
        .map(|k| {
            let mut rng = stream(plan.seed, Domain::UeArray, setup as u64, k as u64);
            let nominal = rng.random_range(-PI..PI);
            let angles: Vec<f64> = (0..plan.scenario.n_clusters)
                .map(|_| nominal + rng.random_range(-UE_CLUSTER_SPREAD_RAD..UE_CLUSTER_SPREAD_RAD))
                .collect();
            let r_ue = local_scattering(&angles, plan.scenario.asd_rad(), n / 2, 1.0);
            Ok(eigenbeamforming_scale(&r_ue)?.0)
        })
        .collect()
}

fn per_stream(per_ue: &[f64]) -> Vec<f64> {
    per_ue.iter().flat_map(|&r| [r, r]).collect()
}

fn to_per_ue(per_stream: &[f64], spu: usize) -> Vec<f64> {
    per_stream.chunks(spu).map(|c| c.iter().sum()).collect()
}

#[derive(Debug, Clone)]
struct TrialAcc {
    ul: [Option<UlMoments>; 3],
    dl: [Option<DlMoments>; 3],
    sic: Option<UlSicAccumulator>,
    zf_ridge: u64,
}

impl TrialAcc {
    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.ul.iter_mut().zip(other.ul) {
            if let (Some(x), Some(y)) = (a.take(), b) {
                *a = Some(x.merge(y));
            }
        }
        for (a, b) in self.dl.iter_mut().zip(other.dl) {
            if let (Some(x), Some(y)) = (a.take(), b) {
                *a = Some(x.merge(y));
            }
        }
        if let (Some(x), Some(y)) = (self.sic.take(), other.sic) {
            self.sic = Some(x.merge(y));
        }
        self.zf_ridge += other.zf_ridge;
        self
    }
}

fn idx(s: Scheme) -> usize {
    match s {
        Scheme::Mmse => 0,
        Scheme::Zf => 1,
        Scheme::Mr => 2,
    }
}

/// Combiner of `scheme` for one trial, with the ZF ridge flag.
fn combiner(
    scheme: Scheme,
    h_hat: &CMat,
    ctx: Option<&UlContext>,
    whitened: Option<&beamforming::WhitenedEstimates>,
) -> Result<(CMat, bool)> {
    match scheme {
        Scheme::Mr => Ok((beamforming::combiner_mr(h_hat), false)),
        Scheme::Zf => beamforming::combiner_zf(h_hat),
        Scheme::Mmse => {
            let ctx = ctx.expect("MMSE context prepared");
            let w = whitened.expect("whitened estimates prepared");
            Ok((beamforming::combiner_mmse(ctx, w)?, false))
        }
    }
}

/// Runs `trials` draws in fixed chunks and merges them pairwise.
fn chunked<T: Send>(trials: usize, run: impl Fn(std::ops::Range<usize>) -> Result<T> + Sync + Send, merge: impl Fn(T, T) -> T) -> Result<Option<T>> {
    let n_chunks = trials.div_ceil(CHUNK);
    let parts = par::try_map_indexed(n_chunks, |c| run(c * CHUNK..((c + 1) * CHUNK).min(trials)))?;
    Ok(par::pairwise_reduce(parts, merge))
}

/// Evaluates every cell of one setup at array size `m`.
pub fn evaluate_setup(
    plan: &ExperimentPlan,
    cells: &[CellSpec],
    m: usize,
    variant: &Variant,
    geometry: &[UeGeometry],
    setup: usize,
) -> Result<SetupOutcome> {
    let cfg = &plan.scenario;
    let k = cfg.k;
    let seed = plan.seed;
    let key = setup as u64;
    let (s2_ul, s2_dl) = (cfg.noise_power_ul, cfg.noise_power_dl);
    let prelog = se::prelog(cfg.tau_c, cfg.tau_p);
    let q = xpd_to_q(variant.xpd_db);
    let gains = ue_array_gains(plan, variant.ue_antennas, setup)?;
    let ues = geometry
        .iter()
        .zip(&gains)
        .map(|(g, &lambda)| {
            let u = UeStatistics::new(g, m / 2, cfg.asd_rad(), q, variant.xpc, variant.xpc)?;
            Ok(if lambda == 1.0 { u } else { u.scaled(lambda) })
        })
        .collect::<Result<Vec<_>>>()?;

    let pilots = build_pilots(k, cfg.tau_p, &vec![[cfg.pilot_power; 2]; k])?;
    let bank = EstimatorBank::dual(&ues, pilots, s2_ul)?;
    let nmse = estimation::nmse(&bank);
    let mean_nmse = nmse.iter().sum::<f64>() / nmse.len().max(1) as f64;

    let (ul_alloc, dl_alloc) = match variant.power_control {
        PowerControl::Equal => (None, None),
        PowerControl::Maxsum => {
            let betas: Vec<f64> = ues.iter().map(|u| u.beta).collect();
            let qs: Vec<f64> = ues.iter().map(|u| u.q).collect();
            let pp = vec![cfg.pilot_power; k];
            let problem = PowerProblem {
                m,
                betas: &betas,
                qs: &qs,
                pilot_powers: &pp,
                tau_p: cfg.tau_p,
                sigma2_ul: s2_ul,
                prelog,
            };
            (
                Some(power::ul_max_sum_se(&problem, cfg.ul_power_total())?),
                Some(power::dl_max_sum_se(&problem, s2_dl, cfg.dl_power_total())?),
            )
        }
    };
    let rho_ul = match &ul_alloc {
        Some(a) => per_stream(&a.rho),
        None => vec![cfg.ul_power; 2 * k],
    };
    let rho_dl = match &dl_alloc {
        Some(a) => per_stream(&a.rho),
        None => vec![cfg.dl_power; 2 * k],
    };

    let dual: Vec<&CellSpec> = cells.iter().filter(|c| c.bound != Bound::DlUni).collect();
    let mut ul_mc = [false; 3];
    let mut dl_mc = [false; 3];
    let mut need_sic = false;
    for c in &dual {
        match c.bound {
            Bound::UlUatf => ul_mc[idx(c.scheme)] = true,
            Bound::DlLinear | Bound::DlSic => dl_mc[idx(c.scheme)] = true,
            Bound::UlSic => need_sic = true,
            _ => {}
        }
    }
    let used: Vec<Scheme> = Scheme::ALL
        .into_iter()
        .filter(|s| ul_mc[idx(*s)] || dl_mc[idx(*s)])
        .collect();
    let need_ctx = need_sic || used.contains(&Scheme::Mmse);
    let ctx = if need_ctx {
        Some(UlContext::new(&bank, &rho_ul, s2_ul)?)
    } else {
        None
    };
    let sampler = DualChannelSampler::new(&ues)?;

    // Precoder normalizers; MMSE and ZF use an independent batch.
    let mut normalizers: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    normalizers[idx(Scheme::Mr)] = beamforming::mr_normalizers(&bank);
    let norm_schemes: Vec<Scheme> = [Scheme::Mmse, Scheme::Zf]
        .into_iter()
        .filter(|s| dl_mc[idx(*s)])
        .collect();
    if !norm_schemes.is_empty() {
        let pow = chunked(
            plan.normalization_trials,
            |range| {
                let mut acc = vec![ColumnPower::new(2 * k); norm_schemes.len()];
                for t in range {
                    let mut rng = stream(seed, Domain::Normalization, key, t as u64);
                    let real = sampler.sample(&mut rng);
                    let noise = estimation::draw_pilot_noise(m, cfg.tau_p, s2_ul, &mut rng);
                    let h_hat = estimation::mmse_estimate(&real.h_all, &bank, &noise);
                    let whitened = ctx.as_ref().filter(|_| norm_schemes.contains(&Scheme::Mmse)).map(|c| c.whiten(&h_hat));
                    for (a, &s) in acc.iter_mut().zip(&norm_schemes) {
                        a.add(&combiner(s, &h_hat, ctx.as_ref(), whitened.as_ref())?.0);
                    }
                }
                Ok(acc)
            },
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        )?
        .expect("at least one normalization trial");
        for (p, &s) in pow.into_iter().zip(&norm_schemes) {
            normalizers[idx(s)] = p.mean();
        }
    }

    let acc = if used.is_empty() && !need_sic {
        None
    } else {
        let empty = TrialAcc {
            ul: [0, 1, 2].map(|i| ul_mc[i].then(|| UlMoments::new(2 * k))),
            dl: [0, 1, 2].map(|i| dl_mc[i].then(|| DlMoments::new(k, 2))),
            sic: need_sic.then(|| UlSicAccumulator::new(k)),
            zf_ridge: 0,
        };
        chunked(
            plan.trials,
            |range| {
                let mut acc = empty.clone();
                for t in range {
                    let real = sampler.sample(&mut stream(seed, Domain::Channel, key, t as u64));
                    let noise = estimation::draw_pilot_noise(
                        m,
                        cfg.tau_p,
                        s2_ul,
                        &mut stream(seed, Domain::PilotNoise, key, t as u64),
                    );
                    let h = &real.h_all;
                    let h_hat = estimation::mmse_estimate(h, &bank, &noise);
                    let whitened = if need_sic || used.contains(&Scheme::Mmse) {
                        ctx.as_ref().map(|c| c.whiten(&h_hat))
                    } else {
                        None
                    };
                    for &s in &used {
                        let (v, ridged) = combiner(s, &h_hat, ctx.as_ref(), whitened.as_ref())?;
                        acc.zf_ridge += ridged as u64;
                        if let Some(ul) = acc.ul[idx(s)].as_mut() {
                            ul.add(&v, h);
                        }
                        if let Some(dl) = acc.dl[idx(s)].as_mut() {
                            let w = beamforming::precoder_dl(&v, &normalizers[idx(s)], &rho_dl, 2)?;
                            dl.add(h, &w);
                        }
                    }
                    if let (Some(sic), Some(w)) = (acc.sic.as_mut(), whitened.as_ref()) {
                        let (per_ue, sum) = se::ul_sic_from_gram(&w.gram, 2)?;
                        sic.add(&per_ue, sum);
                    }
                }
                Ok(acc)
            },
            TrialAcc::merge,
        )?
    };

    let mut uni_cache: Vec<((UniMode, Scheme), Vec<f64>)> = Vec::new();
    let mut per_ue = Vec::with_capacity(cells.len());
    for c in cells {
        let s = idx(c.scheme);
        let values = match c.bound {
            Bound::UlUatf => {
                let mom = acc.as_ref().and_then(|a| a.ul[s].as_ref()).expect("uplink moments");
                to_per_ue(&se::se_from_sinr(&mom.sinr(&rho_ul, s2_ul)?, prelog), 2)
            }
            Bound::UlMrClosed => to_per_ue(&se::se_from_sinr(&se::ul_mr_closed_sinr(&bank, &rho_ul, s2_ul)?, prelog), 2),
            Bound::UlSic => acc.as_ref().and_then(|a| a.sic.as_ref()).expect("SIC accumulator").mean_per_ue(prelog),
            Bound::DlLinear => {
                let mom = acc.as_ref().and_then(|a| a.dl[s].as_ref()).expect("downlink moments");
                to_per_ue(&se::se_from_sinr(&mom.linear_sinr(s2_dl)?, prelog), 2)
            }
            Bound::DlSic => {
                let mom = acc.as_ref().and_then(|a| a.dl[s].as_ref()).expect("downlink moments");
                mom.sic_se(s2_dl, prelog)?
            }
            Bound::DlMrClosed => to_per_ue(&se::se_from_sinr(&se::dl_mr_closed_sinr(&bank, &rho_dl, s2_dl)?, prelog), 2),
            Bound::DlUni => {
                if let Some((_, v)) = uni_cache.iter().find(|(key, _)| *key == (c.uni, c.scheme)) {
                    v.clone()
                } else {
                    let v = evaluate_uni(plan, m, c.uni, c.scheme, &ues, geometry, &gains, setup)?;
                    uni_cache.push(((c.uni, c.scheme), v.clone()));
                    v
                }
            }
        };
        per_ue.push(values);
    }

    Ok(SetupOutcome {
        per_ue,
        ul_power: ul_alloc,
        dl_power: dl_alloc,
        zf_ridge_events: acc.map_or(0, |a| a.zf_ridge),
        mean_nmse,
    })
}

/// Downlink SE of the uni-polarized benchmark. MR uses the closed form; MMSE
/// and ZF use the Monte Carlo bound with scalar UE-side processing.
#[allow(clippy::too_many_arguments)]
fn evaluate_uni(
    plan: &ExperimentPlan,
    m: usize,
    mode: UniMode,
    scheme: Scheme,
    ues: &[UeStatistics],
    geometry: &[UeGeometry],
    gains: &[f64],
    setup: usize,
) -> Result<Vec<f64>> {
    let cfg = &plan.scenario;
    let k = cfg.k;
    let (m_uni, factor) = mode.array(m).expect("uni mode is on");
    let corrs: Vec<CMat> = if mode == UniMode::Half {
        ues.iter().map(|u| u.r_bs.clone()).collect()
    } else {
        geometry
            .iter()
            .zip(gains)
            .map(|(g, &lambda)| local_scattering(&g.cluster_angles, cfg.asd_rad(), m_uni, g.beta * lambda))
            .collect()
    };
    let tau = k;
    let pilots = build_pilots_uni(tau, &vec![factor * cfg.pilot_power; k])?;
    let bank = EstimatorBank::uni(&corrs, pilots, cfg.noise_power_ul)?;
    let prelog = se::prelog(cfg.tau_c, tau);
    let rho_ul = vec![factor * cfg.ul_power; k];
    let rho_dl = vec![factor * cfg.dl_power; k];
    let (s2_ul, s2_dl) = (cfg.noise_power_ul, cfg.noise_power_dl);
    if scheme == Scheme::Mr {
        return Ok(se::se_from_sinr(&se::dl_mr_closed_sinr(&bank, &rho_dl, s2_dl)?, prelog));
    }
    let ctx = if scheme == Scheme::Mmse {
        Some(UlContext::new(&bank, &rho_ul, s2_ul)?)
    } else {
        None
    };
    let sampler = UniChannelSampler::new(&corrs)?;
    let key = setup as u64;
    let seed = plan.seed;
    let estimate = |h: &CMat, noise_rng: &mut rand_chacha::ChaCha8Rng| {
        let noise = estimation::draw_pilot_noise(m_uni, tau, s2_ul, noise_rng);
        let h_hat = estimation::mmse_estimate(h, &bank, &noise);
        let whitened = ctx.as_ref().map(|c| c.whiten(&h_hat));
        combiner(scheme, &h_hat, ctx.as_ref(), whitened.as_ref()).map(|r| r.0)
    };
    let norm = chunked(
        plan.normalization_trials,
        |range| {
            let mut acc = ColumnPower::new(k);
            for t in range {
                let mut rng = stream(seed, Domain::UniNormalization, key, t as u64);
                let h = sampler.sample(&mut rng);
                acc.add(&estimate(&h, &mut rng)?);
            }
            Ok(acc)
        },
        ColumnPower::merge,
    )?
    .expect("at least one normalization trial")
    .mean();
    let mom = chunked(
        plan.trials,
        |range| {
            let mut acc = DlMoments::new(k, 1);
            for t in range {
                let h = sampler.sample(&mut stream(seed, Domain::UniChannel, key, t as u64));
                let v = estimate(&h, &mut stream(seed, Domain::UniPilotNoise, key, t as u64))?;
                acc.add(&h, &beamforming::precoder_dl(&v, &norm, &rho_dl, 1)?);
            }
            Ok(acc)
        },
        DlMoments::merge,
    )?
    .expect("at least one trial");
    Ok(se::se_from_sinr(&mom.linear_sinr(s2_dl)?, prelog))
}
