//! TOML experiment files.
//!
//! ```toml
//! name = "xpd_sweep"
//!
//! [scenario]          # keys as in ScenarioConfig, powers in mW
//! K = 10
//! pilot_power = 100
//! xpd_db = "inf"
//! xpc_t = [0.6, 0.2]
//!
//! [sweep]
//! M = [32, 64]
//! schemes = ["mr"]
//! bounds = ["ul_uatf", "ul_mr_closed"]
//!
//! [run]
//! setups = 20
//! trials = 1000
//! ```

use std::path::Path;

use serde::Deserialize;

use super::{parse_xpd, ExperimentPlan, PowerControl, UniMode};
use crate::beamforming::Scheme;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::se::Bound;

const MW: f64 = 1e-3;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    fn xpd(&self) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) => parse_xpd(s),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl Complex {
    fn value(&self) -> C64 {
        match self {
            Complex::Real(r) => C64::new(*r, 0.0),
            Complex::Pair([re, im]) => C64::new(*re, *im),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "K")]
    k: Option<usize>,
    tau_c: Option<usize>,
    tau_p: Option<usize>,
    noise_power_ul: Option<f64>,
    noise_power_dl: Option<f64>,
    pilot_power: Option<f64>,
    ul_power: Option<f64>,
    dl_power: Option<f64>,
    xpd_db: Option<Number>,
    xpc_t: Option<Complex>,
    xpc_r: Option<Complex>,
    asd_deg: Option<f64>,
    n_clusters: Option<usize>,
    cell_side_m: Option<f64>,
    min_distance_m: Option<f64>,
    shadow_sigma_db: Option<f64>,
    rng_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(rename = "M")]
    m: Option<Vec<usize>>,
    schemes: Option<Vec<String>>,
    bounds: Option<Vec<String>>,
    xpd_db: Option<Vec<Number>>,
    xpc: Option<Vec<Complex>>,
    power_control: Option<Vec<String>>,
    uni: Option<Vec<String>>,
    ue_antennas: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    setups: Option<usize>,
    trials: Option<usize>,
    normalization_trials: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: Option<String>,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    run: RawRun,
}

fn parse_list<T: std::str::FromStr<Err = Error>>(v: &[String]) -> Result<Vec<T>> {
    v.iter().map(|s| s.parse()).collect()
}

/// Parses an experiment file. Unset keys keep the reference defaults.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::config(format!("config: {}", e.message())))?;
    let mut plan = ExperimentPlan::new(raw.name.as_deref().unwrap_or("custom"));
    let s = raw.scenario;
    let cfg = &mut plan.scenario;
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = s.$field {
                cfg.$field = v;
            }
        };
        ($field:ident, mw) => {
            if let Some(v) = s.$field {
                cfg.$field = v * MW;
            }
        };
    }
    set!(m);
    set!(k);
    set!(tau_c);
    set!(noise_power_ul, mw);
    set!(noise_power_dl, mw);
    set!(pilot_power, mw);
    set!(ul_power, mw);
    set!(dl_power, mw);
    set!(asd_deg);
    set!(n_clusters);
    set!(cell_side_m);
    set!(min_distance_m);
    set!(shadow_sigma_db);
    set!(rng_seed);
    cfg.tau_p = s.tau_p.unwrap_or(2 * cfg.k);
    if let Some(x) = &s.xpd_db {
        cfg.xpd_db = x.xpd()?;
    }
    if let Some(z) = &s.xpc_t {
        cfg.xpc_t = z.value();
    }
    if let Some(z) = &s.xpc_r {
        cfg.xpc_r = z.value();
    }
    if cfg.xpc_t != cfg.xpc_r {
        return Err(Error::config("xpc_t/xpc_r: the sweep applies t = r; set them equal or use [sweep] xpc"));
    }
    plan.m_list = vec![cfg.m];
    plan.xpd_db = vec![cfg.xpd_db];
    plan.xpc = vec![cfg.xpc_t];
    plan.seed = raw.run.seed.unwrap_or(cfg.rng_seed);

    let w = raw.sweep;
    if let Some(v) = w.m {
        plan.m_list = v;
    }
    if let Some(v) = w.schemes {
        plan.schemes = parse_list::<Scheme>(&v)?;
    }
    if let Some(v) = w.bounds {
        plan.bounds = parse_list::<Bound>(&v)?;
    }
    if let Some(v) = w.xpd_db {
        plan.xpd_db = v.iter().map(Number::xpd).collect::<Result<_>>()?;
    }
    if let Some(v) = w.xpc {
        plan.xpc = v.iter().map(Complex::value).collect();
    }
    if let Some(v) = w.power_control {
        plan.power_control = parse_list::<PowerControl>(&v)?;
    }
    if let Some(v) = w.uni {
        plan.uni = parse_list::<UniMode>(&v)?;
    }
    if let Some(v) = w.ue_antennas {
        plan.ue_antennas = v;
    }
    let r = raw.run;
    if let Some(v) = r.setups {
        plan.setups = v;
    }
    if let Some(v) = r.trials {
        plan.trials = v;
    }
    if let Some(v) = r.normalization_trials {
        plan.normalization_trials = v;
    }
    plan.validate()?;
    Ok(plan)
}

/// Reads and parses an experiment file.
pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_plan(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let plan = parse_plan(
            r#"
            name = "demo"
            [scenario]
            K = 4
            pilot_power = 200
            noise_power_ul = 3.98e-10
            xpd_db = "inf"
            [sweep]
            M = [32, 64]
            schemes = ["mr"]
            bounds = ["ul_uatf", "ul_mr_closed"]
            xpc = [0.0, [0.6, 0.2]]
            [run]
            setups = 3
            trials = 50
            seed = 9
            "#,
        )
        .unwrap();
        assert_eq!(plan.name, "demo");
        assert_eq!(plan.scenario.k, 4);
        assert_eq!(plan.scenario.tau_p, 8);
        assert!((plan.scenario.pilot_power - 0.2).abs() < 1e-15);
        assert!((plan.scenario.noise_power_ul - 3.98e-13).abs() < 1e-25);
        assert_eq!(plan.xpd_db, vec![f64::INFINITY]);
        assert_eq!(plan.xpc[1], C64::new(0.6, 0.2));
        assert_eq!(plan.m_list, vec![32, 64]);
        assert_eq!(plan.cells().len(), 2);
        assert_eq!((plan.setups, plan.trials, plan.seed), (3, 50, 9));
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_plan("[sweep]\nschemes = []\n").unwrap_err();
        assert!(e.to_string().contains("schemes"), "{e}");
        let e = parse_plan("[scenario]\nM = 7\n").unwrap_err();
        assert!(e.to_string().contains("M:"), "{e}");
        let e = parse_plan("[scenario]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_plan("[sweep]\nbounds = [\"nope\"]\n").unwrap_err();
        assert!(e.to_string().contains("bound"), "{e}");
    }
}
