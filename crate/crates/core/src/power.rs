//! Sum-SE power control for MR processing.
//!
//! Both solvers use the uncorrelated-fading coefficients `γ_{k,1}, γ_{k,2}`
//! and give every UE the same power on both polarizations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorBank;
use crate::se::{self, gammas_uncorrelated, UncorrelatedInputs};

/// Result of a power-control solve. `rho[k]` is the power per polarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub rho: Vec<f64>,
    /// Sum SE of the solved problem, including the prelog.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Problem data shared by the uplink and downlink solvers.
#[derive(Debug, Clone)]
pub struct PowerProblem<'a> {
    /// Number of BS ports.
    pub m: usize,
    pub betas: &'a [f64],
    pub qs: &'a [f64],
    /// Pilot power per polarization of each UE.
    pub pilot_powers: &'a [f64],
    pub tau_p: usize,
    pub sigma2_ul: f64,
    pub prelog: f64,
}

impl PowerProblem<'_> {
    /// `(M/2)(γ_{k,1} + γ_{k,2})` per UE.
    pub fn array_gains(&self) -> Vec<f64> {
        (0..self.betas.len())
            .map(|k| {
                let (g1, g2) = gammas_uncorrelated(self.betas[k], self.qs[k], self.pilot_powers[k], self.tau_p, self.sigma2_ul);
                self.m as f64 / 2.0 * (g1 + g2)
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        let k = self.betas.len();
        if k == 0 || self.qs.len() != k || self.pilot_powers.len() != k {
            return Err(Error::config("power control: betas, qs and pilot powers must have equal nonzero length"));
        }
        if self.betas.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::domain("power control: every beta must be positive"));
        }
        Ok(())
    }

    /// Uplink sum SE for per-UE powers `rho` under the uncorrelated model.
    pub fn ul_objective(&self, rho: &[f64]) -> f64 {
        let a = self.array_gains();
        let den: f64 = rho.iter().zip(self.betas).map(|(r, b)| r * b).sum::<f64>() + self.sigma2_ul;
        rho.iter()
            .zip(&a)
            .map(|(r, a)| 2.0 * self.prelog * (1.0 + r * a / den).log2())
            .sum()
    }

    /// Downlink sum SE for per-UE powers `rho` under the uncorrelated model.
    pub fn dl_objective(&self, rho: &[f64], sigma2_dl: f64) -> f64 {
        let a = self.array_gains();
        let total: f64 = rho.iter().sum();
        (0..rho.len())
            .map(|k| 2.0 * self.prelog * (1.0 + rho[k] * a[k] / (self.betas[k] * total + sigma2_dl)).log2())
            .sum()
    }
}

/// Maximizes `Σ log(1 + a_k x_k)` subject to `Σ x_k = budget` and
/// `0 ≤ x_k ≤ caps_k` by bisection on the water level `w`, with
/// `x_k = clamp(w - 1/a_k, 0, caps_k)`. Returns `(x, w, iterations)`.
pub fn capped_water_filling(a: &[f64], caps: &[f64], budget: f64) -> (Vec<f64>, f64, usize) {
    let inv: Vec<f64> = a.iter().map(|&a| if a > 0.0 { 1.0 / a } else { f64::INFINITY }).collect();
    let fill = |w: f64| -> Vec<f64> {
        inv.iter()
            .zip(caps)
            .map(|(&i, &c)| if i.is_finite() { (w - i).clamp(0.0, c) } else { 0.0 })
            .collect()
    };
    let total_cap: f64 = inv.iter().zip(caps).filter(|(i, _)| i.is_finite()).map(|(_, c)| c).sum();
    if budget <= 0.0 {
        return (vec![0.0; a.len()], 0.0, 0);
    }
    if budget >= total_cap {
        let x = inv.iter().zip(caps).map(|(i, &c)| if i.is_finite() { c } else { 0.0 }).collect();
        return (x, f64::INFINITY, 0);
    }
    let mut lo = inv.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let mut hi = inv
        .iter()
        .zip(caps)
        .filter(|(i, _)| i.is_finite())
        .map(|(i, c)| i + c)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut iterations = 0;
    while hi - lo > 1e-10 * hi.abs().max(f64::MIN_POSITIVE) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut w = 0.5 * (lo + hi);
    // Solve exactly on the active set found by bisection.
    let x0 = fill(w);
    let mut capped = 0.0;
    let mut free_inv = 0.0;
    let mut n_free = 0usize;
    for (k, &x) in x0.iter().enumerate() {
        if !inv[k].is_finite() {
            continue;
        }
        if x >= caps[k] {
            capped += caps[k];
        } else if x > 0.0 {
            free_inv += inv[k];
            n_free += 1;
        }
    }
    if n_free > 0 {
        let polished = (budget - capped + free_inv) / n_free as f64;
        let x1 = fill(polished);
        if (x1.iter().sum::<f64>() - budget).abs() <= (x0.iter().sum::<f64>() - budget).abs() {
            w = polished;
        }
    }
    (fill(w), w, iterations)
}

/// Uplink max-sum-SE allocation with per-UE cap `rho_tot / 2`.
pub fn ul_max_sum_se(problem: &PowerProblem, rho_tot: f64) -> Result<PowerAllocation> {
    problem.check()?;
    let k = problem.betas.len();
    if rho_tot <= 0.0 {
        return Ok(PowerAllocation {
            rho: vec![0.0; k],
            objective: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
        });
    }
    let gains = problem.array_gains();
    let a: Vec<f64> = gains.iter().zip(problem.betas).map(|(g, b)| g / b).collect();
    let sigma2 = problem.sigma2_ul;
    let beta_sum: f64 = problem.betas.iter().sum();
    let s_min = 1.0 / (rho_tot / 2.0 * beta_sum + sigma2);
    let s_max = if sigma2 > 0.0 { 1.0 / sigma2 } else { s_min * 1e12 };

    let inner = |s: f64| {
        let caps: Vec<f64> = problem.betas.iter().map(|b| s * b * rho_tot / 2.0).collect();
        let budget = (1.0 - sigma2 * s).max(0.0);
        let (x, w, it) = capped_water_filling(&a, &caps, budget);
        let value: f64 = x.iter().zip(&a).map(|(x, a)| (1.0 + a * x).log2()).sum();
        (value, x, w, it)
    };

    // Golden-section search on log(s); log is monotone so unimodality holds.
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (s_min.ln(), s_max.ln());
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = inner(x1.exp()).0;
    let mut f2 = inner(x2.exp()).0;
    let mut iterations = 0;
    while (hi - lo) > 1e-8 && iterations < 500 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = inner(x1.exp()).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = inner(x2.exp()).0;
        }
        iterations += 1;
    }
    let mut best_s = (0.5 * (lo + hi)).exp();
    let mut best = inner(best_s);
    // Full power sits at the left end of the bracket.
    let edge = inner(s_min);
    if edge.0 > best.0 {
        best_s = s_min;
        best = edge;
    }
    let (_, x, w, inner_it) = best;
    let rho: Vec<f64> = x
        .iter()
        .zip(problem.betas)
        .map(|(x, b)| (x / (best_s * b)).clamp(0.0, rho_tot / 2.0))
        .collect();
    let caps: Vec<f64> = problem.betas.iter().map(|b| best_s * b * rho_tot / 2.0).collect();
    let kkt_residual = if w.is_finite() {
        let level = 1.0 / w;
        x.iter()
            .zip(&a)
            .zip(&caps)
            .filter(|((x, _), c)| **x > 0.0 && **x < **c)
            .map(|((x, a), _)| (a / (1.0 + a * x) - level).abs() / level)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(PowerAllocation {
        objective: problem.ul_objective(&rho),
        rho,
        iterations: iterations + inner_it,
        kkt_residual,
    })
}

/// Water-filling `ρ_k = max(μ - 1/c_k, 0)` with `Σ ρ_k = budget`.
/// Returns `(ρ, μ, iterations)`.
pub fn water_filling(c: &[f64], budget: f64) -> (Vec<f64>, f64, usize) {
    let budget = budget.max(0.0);
    if c.iter().all(|&v| !(v > 0.0)) {
        return (vec![0.0; c.len()], 0.0, 0);
    }
    let inv: Vec<f64> = c.iter().map(|&v| if v > 0.0 { 1.0 / v } else { f64::INFINITY }).collect();
    let fill = |mu: f64| -> Vec<f64> {
        inv.iter().map(|&i| if i.is_finite() { (mu - i).max(0.0) } else { 0.0 }).collect()
    };
    if budget == 0.0 {
        return (vec![0.0; c.len()], inv.iter().copied().fold(f64::INFINITY, f64::min), 0);
    }
    let min_inv = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let max_inv = inv.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut lo = min_inv;
    let mut hi = max_inv + budget;
    let mut iterations = 0;
    while hi - lo > 1e-10 * hi.abs().max(f64::MIN_POSITIVE) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    // Closed form on the active set.
    let mu0 = 0.5 * (lo + hi);
    let active: Vec<usize> = (0..c.len()).filter(|&k| inv[k].is_finite() && mu0 > inv[k]).collect();
    let mu = (budget + active.iter().map(|&k| inv[k]).sum::<f64>()) / active.len().max(1) as f64;
    (fill(mu), mu, iterations)
}

/// Downlink max-sum-SE allocation with total budget `rho_tot / 2` per
/// polarization.
pub fn dl_max_sum_se(problem: &PowerProblem, sigma2_dl: f64, rho_tot: f64) -> Result<PowerAllocation> {
    problem.check()?;
    let k = problem.betas.len();
    if rho_tot <= 0.0 {
        return Ok(PowerAllocation {
            rho: vec![0.0; k],
            objective: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
        });
    }
    let a = problem.array_gains();
    let c: Vec<f64> = (0..k)
        .map(|i| a[i] / (sigma2_dl + rho_tot * problem.betas[i] / 2.0))
        .collect();
    let (rho, mu, iterations) = water_filling(&c, rho_tot / 2.0);
    let kkt_residual = (0..k)
        .map(|i| {
            let th = 1.0 / c[i];
            if rho[i] > 0.0 {
                (mu - th - rho[i]).abs()
            } else {
                (mu - th).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    Ok(PowerAllocation {
        objective: problem.dl_objective(&rho, sigma2_dl),
        rho,
        iterations,
        kkt_residual,
    })
}

/// Closed-form MR evaluator used to score an allocation.
#[derive(Debug, Clone)]
pub enum Evaluator<'a> {
    /// General correlated closed forms.
    Correlated(&'a EstimatorBank),
    /// Uncorrelated-fading closed forms.
    Uncorrelated(UncorrelatedInputs<'a>),
}

/// Sum SE of a per-UE allocation (same power on both polarizations) under
/// the MR closed forms.
pub fn evaluate_allocation(rho: &[f64], evaluator: &Evaluator, uplink: bool, sigma2: f64, prelog: f64) -> Result<f64> {
    let pairs: Vec<[f64; 2]> = rho.iter().map(|&r| [r, r]).collect();
    let sinr = match evaluator {
        Evaluator::Correlated(bank) => {
            let flat: Vec<f64> = pairs.iter().flat_map(|p| *p).collect();
            if uplink {
                se::ul_mr_closed_sinr(bank, &flat, sigma2)?
            } else {
                se::dl_mr_closed_sinr(bank, &flat, sigma2)?
            }
        }
        Evaluator::Uncorrelated(inp) => {
            if uplink {
                se::ul_mr_uncorrelated_sinr(inp, &pairs, sigma2)
            } else {
                se::dl_mr_uncorrelated_sinr(inp, &pairs, sigma2)
            }
        }
    };
    Ok(se::se_from_sinr(&sinr, prelog).iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem<'a>(betas: &'a [f64], qs: &'a [f64], pp: &'a [f64]) -> PowerProblem<'a> {
        PowerProblem {
            m: 100,
            betas,
            qs,
            pilot_powers: pp,
            tau_p: 20,
            sigma2_ul: 3.98e-13,
            prelog: 0.9,
        }
    }

    #[test]
    fn single_ue_uses_full_power() {
        let p = problem(&[1e-11], &[0.24], &[0.1]);
        let ul = ul_max_sum_se(&p, 0.2).unwrap();
        assert!((ul.rho[0] - 0.1).abs() < 1e-9);
        let dl = dl_max_sum_se(&p, 3.98e-13, 0.2).unwrap();
        assert!((dl.rho[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn symmetric_ues_share_equally() {
        let b = [2e-11; 4];
        let q = [0.24; 4];
        let pp = [0.1; 4];
        let p = problem(&b, &q, &pp);
        let dl = dl_max_sum_se(&p, 3.98e-13, 0.8).unwrap();
        for r in &dl.rho {
            assert!((r - 0.1).abs() < 1e-12);
        }
        let ul = ul_max_sum_se(&p, 0.2).unwrap();
        for r in &ul.rho {
            assert!((r - ul.rho[0]).abs() < 1e-6 * ul.rho[0]);
        }
    }

    #[test]
    fn zero_budget_gives_zero() {
        let p = problem(&[1e-11, 2e-12], &[0.2, 0.3], &[0.1, 0.1]);
        assert_eq!(ul_max_sum_se(&p, 0.0).unwrap().rho, vec![0.0, 0.0]);
        assert_eq!(dl_max_sum_se(&p, 1e-13, 0.0).unwrap().rho, vec![0.0, 0.0]);
    }

    #[test]
    fn water_filling_sums_to_budget() {
        let (rho, mu, _) = water_filling(&[4.0, 1.0, 0.1], 1.0);
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((rho[0] - (mu - 0.25)).abs() < 1e-12);
        assert_eq!(rho[2], 0.0);
    }

    #[test]
    fn capped_filling_respects_caps() {
        let (x, _, _) = capped_water_filling(&[10.0, 1.0, 5.0], &[0.1, 1.0, 1.0], 1.0);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(x[0] <= 0.1 + 1e-15);
    }

    #[test]
    fn two_ue_grid_oracle() {
        let b = [3e-10, 2e-12];
        let q = [0.24, 0.1];
        let pp = [0.1, 0.1];
        let p = problem(&b, &q, &pp);
        let ul = ul_max_sum_se(&p, 0.2).unwrap();
        let dl = dl_max_sum_se(&p, 3.98e-13, 0.4).unwrap();
        let mut best_ul: f64 = 0.0;
        let mut best_dl: f64 = 0.0;
        for i in 0..=400 {
            let r1 = 0.1 * i as f64 / 400.0;
            best_dl = best_dl.max(p.dl_objective(&[r1, 0.2 - r1], 3.98e-13));
            for j in 0..=400 {
                best_ul = best_ul.max(p.ul_objective(&[r1, 0.1 * j as f64 / 400.0]));
            }
        }
        assert!(ul.objective >= best_ul - 1e-6, "{} vs {}", ul.objective, best_ul);
        assert!(dl.objective >= best_dl - 1e-6, "{} vs {}", dl.objective, best_dl);
    }
}
