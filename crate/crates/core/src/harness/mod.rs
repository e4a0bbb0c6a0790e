//! Experiment plans, figure presets and the sweep runner.

mod config;
mod engine;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize, Serializer};

use crate::beamforming::Scheme;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::par;
use crate::scenario::ScenarioConfig;
use crate::se::Bound;

pub use config::{load_plan, parse_plan};
pub use engine::{evaluate_setup, SetupOutcome};
pub use output::{CellSummary, PowerDiagnostics, RunRecord};

pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_SETUPS: usize = 100;
pub const DEFAULT_NORMALIZATION_TRIALS: usize = 2_000;
pub const DEFAULT_SEED: u64 = 1;
pub const FIGURES: [&str; 10] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerControl {
    Equal,
    Maxsum,
}

impl PowerControl {
    pub fn label(self) -> &'static str {
        match self {
            PowerControl::Equal => "equal",
            PowerControl::Maxsum => "maxsum",
        }
    }
}

impl FromStr for PowerControl {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" => Ok(PowerControl::Equal),
            "maxsum" => Ok(PowerControl::Maxsum),
            other => Err(Error::config(format!("power_control: unknown value '{other}'"))),
        }
    }
}

/// Uni-polarized benchmark array: none, `M/2` ports or `M` ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniMode {
    Off,
    Half,
    Full,
}

impl UniMode {
    pub fn label(self) -> &'static str {
        match self {
            UniMode::Off => "off",
            UniMode::Half => "half",
            UniMode::Full => "full",
        }
    }

    /// Array size and per-UE power factor relative to one polarization of
    /// the dual-polarized system.
    pub fn array(self, m: usize) -> Option<(usize, f64)> {
        match self {
            UniMode::Off => None,
            UniMode::Half => Some((m / 2, 2.0)),
            UniMode::Full => Some((m, 1.0)),
        }
    }
}

impl FromStr for UniMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" => Ok(UniMode::Off),
            "half" => Ok(UniMode::Half),
            "full" => Ok(UniMode::Full),
            other => Err(Error::config(format!("uni: unknown value '{other}'"))),
        }
    }
}

/// Parses an XPD in dB; `inf` means no leakage.
pub fn parse_xpd(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    if t == "inf" || t == "infinity" {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>()
        .map_err(|_| Error::config(format!("xpd_db: cannot parse '{s}'")))
}

/// Parses a complex XPC value such as `0.8` or `0.6+0.2i`.
pub fn parse_xpc(s: &str) -> Result<C64> {
    C64::from_str(s.trim()).map_err(|_| Error::config(format!("xpc: cannot parse '{s}'")))
}

fn fmt_xpd(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

fn fmt_xpc(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn ser_xpd_list<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| fmt_xpd(*x)))
}

fn ser_xpc_list<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

/// A full sweep. Every output value is a deterministic function of the plan.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub scenario: ScenarioConfig,
    #[serde(rename = "M")]
    pub m_list: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub bounds: Vec<Bound>,
    #[serde(serialize_with = "ser_xpd_list")]
    pub xpd_db: Vec<f64>,
    /// `t = r` values applied to every UE.
    #[serde(serialize_with = "ser_xpc_list")]
    pub xpc: Vec<C64>,
    pub power_control: Vec<PowerControl>,
    pub uni: Vec<UniMode>,
    /// Antennas per UE; more than two enables eigenbeamforming.
    pub ue_antennas: Vec<usize>,
    pub setups: usize,
    pub trials: usize,
    pub normalization_trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// One combination of the non-`M` sweep dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub xpd_db: f64,
    pub xpc: C64,
    pub power_control: PowerControl,
    pub ue_antennas: usize,
}

/// One output column group: a scheme under a bound (and uni array).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpec {
    pub scheme: Scheme,
    pub bound: Bound,
    pub uni: UniMode,
}

impl ExperimentPlan {
    /// Plan with the reference scenario and default budgets.
    pub fn new(name: &str) -> Self {
        let scenario = ScenarioConfig::default();
        Self {
            name: name.to_string(),
            m_list: vec![scenario.m],
            xpd_db: vec![scenario.xpd_db],
            xpc: vec![scenario.xpc_t],
            scenario,
            schemes: Scheme::ALL.to_vec(),
            bounds: vec![Bound::UlUatf],
            power_control: vec![PowerControl::Equal],
            uni: vec![UniMode::Off],
            ue_antennas: vec![2],
            setups: DEFAULT_SETUPS,
            trials: DEFAULT_TRIALS,
            normalization_trials: DEFAULT_NORMALIZATION_TRIALS,
            seed: DEFAULT_SEED,
            out: PathBuf::from("results"),
            threads: None,
        }
    }

    /// Preset for one of the paper figures (`fig10` is the eigenbeamforming
    /// extension).
    pub fn figure(id: &str) -> Result<Self> {
        let mut p = Self::new(id);
        p.m_list = vec![40, 60, 80, 100];
        let all = Scheme::ALL.to_vec();
        match id {
            "fig1" => {
                p.schemes = all;
                p.bounds = vec![Bound::UlSic, Bound::UlUatf, Bound::UlMrClosed];
            }
            "fig2" => {
                p.schemes = all;
                p.bounds = vec![Bound::DlSic, Bound::DlLinear, Bound::DlMrClosed];
            }
            "fig3" | "fig4" => {
                p.schemes = all;
                p.bounds = vec![Bound::DlSic, Bound::DlUni];
                p.uni = vec![if id == "fig3" { UniMode::Full } else { UniMode::Half }];
            }
            "fig5" => {
                p.schemes = all;
                p.bounds = vec![Bound::UlSic, Bound::UlUatf];
                p.xpd_db = vec![0.0, f64::INFINITY];
            }
            "fig6" => {
                p.schemes = all;
                p.bounds = vec![Bound::DlSic, Bound::DlLinear];
                p.xpd_db = vec![0.0, f64::INFINITY];
            }
            "fig7" => {
                p.schemes = all;
                p.bounds = vec![Bound::DlSic, Bound::DlLinear];
                p.xpc = vec![C64::new(0.8, 0.0)];
            }
            "fig8" | "fig9" => {
                p.m_list = vec![100];
                p.schemes = vec![Scheme::Mr];
                p.bounds = vec![if id == "fig8" { Bound::UlMrClosed } else { Bound::DlMrClosed }];
                p.power_control = vec![PowerControl::Equal, PowerControl::Maxsum];
            }
            "fig10" => {
                p.schemes = vec![Scheme::Mr];
                p.bounds = vec![Bound::UlMrClosed, Bound::DlMrClosed];
                p.ue_antennas = vec![2, 4, 8, 16];
            }
            other => {
                return Err(Error::config(format!(
                    "figure: unknown id '{other}', expected one of {}",
                    FIGURES.join(", ")
                )))
            }
        }
        Ok(p)
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for &xpd_db in &self.xpd_db {
            for &xpc in &self.xpc {
                for &power_control in &self.power_control {
                    for &ue_antennas in &self.ue_antennas {
                        out.push(Variant {
                            xpd_db,
                            xpc,
                            power_control,
                            ue_antennas,
                        });
                    }
                }
            }
        }
        out
    }

    /// Valid (scheme, bound, uni) combinations, scheme-major.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for &bound in &self.bounds {
                let cell = |uni| CellSpec { scheme, bound, uni };
                match bound {
                    Bound::UlMrClosed | Bound::DlMrClosed if scheme != Scheme::Mr => {}
                    Bound::UlSic if scheme != Scheme::Mmse => {}
                    Bound::DlUni => {
                        out.extend(self.uni.iter().filter(|u| **u != UniMode::Off).map(|&u| cell(u)));
                    }
                    _ => out.push(cell(UniMode::Off)),
                }
            }
        }
        out
    }

    /// Scheme column label; sweep dimensions with several values are
    /// appended as `|key=value`.
    pub fn scheme_label(&self, cell: &CellSpec, v: &Variant) -> String {
        let mut s = cell.scheme.label().to_string();
        if self.xpd_db.len() > 1 {
            s += &format!("|xpd={}", fmt_xpd(v.xpd_db));
        }
        if self.xpc.len() > 1 {
            s += &format!("|xpc={}", fmt_xpc(v.xpc));
        }
        if self.power_control.len() > 1 {
            s += &format!("|pc={}", v.power_control.label());
        }
        if cell.uni != UniMode::Off {
            s += &format!("|uni={}", cell.uni.label());
        }
        if self.ue_antennas.len() > 1 {
            s += &format!("|ue_ant={}", v.ue_antennas);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("M", self.m_list.is_empty()),
            ("schemes", self.schemes.is_empty()),
            ("bounds", self.bounds.is_empty()),
            ("xpd_db", self.xpd_db.is_empty()),
            ("xpc", self.xpc.is_empty()),
            ("power_control", self.power_control.is_empty()),
            ("uni", self.uni.is_empty()),
            ("ue_antennas", self.ue_antennas.is_empty()),
        ];
        for (name, empty) in lists {
            if empty {
                return Err(Error::config(format!("{name}: sweep list must not be empty")));
            }
        }
        if self.setups == 0 {
            return Err(Error::config("setups: must be positive"));
        }
        let needs_mc = self
            .bounds
            .iter()
            .any(|b| !matches!(b, Bound::UlMrClosed | Bound::DlMrClosed));
        if needs_mc && self.trials == 0 {
            return Err(Error::config("trials: must be positive for Monte Carlo bounds"));
        }
        let needs_norm = self.schemes.iter().any(|s| *s != Scheme::Mr)
            && self.bounds.iter().any(|b| matches!(b, Bound::DlLinear | Bound::DlSic | Bound::DlUni));
        if needs_norm && self.normalization_trials == 0 {
            return Err(Error::config("normalization_trials: must be positive for MMSE/ZF precoding"));
        }
        if self.bounds.contains(&Bound::DlUni) && self.uni.iter().all(|u| *u == UniMode::Off) {
            return Err(Error::config("uni: the dl_uni bound needs uni = half or full"));
        }
        for &m in &self.m_list {
            let mut cfg = self.scenario.clone();
            cfg.m = m;
            cfg.validate()?;
        }
        if self.scenario.tau_p < 2 * self.scenario.k {
            return Err(Error::config(format!(
                "tau_p: {} pilots cannot serve {} dual-polarized UEs",
                self.scenario.tau_p, self.scenario.k
            )));
        }
        for &x in &self.xpd_db {
            if !(x >= 0.0) {
                return Err(Error::config(format!("xpd_db: must be >= 0 or inf, got {x}")));
            }
        }
        for &z in &self.xpc {
            if !(z.norm() <= 1.0) {
                return Err(Error::config(format!("xpc: |{z}| exceeds 1")));
            }
        }
        for &n in &self.ue_antennas {
            if n < 2 || n % 2 != 0 {
                return Err(Error::config(format!("ue_antennas: must be even and >= 2, got {n}")));
            }
        }
        if self.cells().is_empty() {
            return Err(Error::config(
                "schemes/bounds: no valid combination (closed forms need mr, ul_sic needs mmse)",
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the plan.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("plan serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Command-line overrides applied on top of a preset or config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub setups: Option<usize>,
    pub normalization_trials: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub schemes: Option<Vec<Scheme>>,
    pub bounds: Option<Vec<Bound>>,
    pub power_control: Option<Vec<PowerControl>>,
    pub xpd_db: Option<Vec<f64>>,
    pub xpc: Option<Vec<C64>>,
    pub uni: Option<Vec<UniMode>>,
    pub m_list: Option<Vec<usize>>,
}

impl Overrides {
    pub fn apply(&self, plan: &mut ExperimentPlan) {
        if let Some(v) = self.trials {
            plan.trials = v;
        }
        if let Some(v) = self.setups {
            plan.setups = v;
        }
        if let Some(v) = self.normalization_trials {
            plan.normalization_trials = v;
        }
        if let Some(v) = self.seed {
            plan.seed = v;
        }
        if self.threads.is_some() {
            plan.threads = self.threads;
        }
        if let Some(v) = &self.out {
            plan.out = v.clone();
        }
        if let Some(v) = &self.schemes {
            plan.schemes = v.clone();
        }
        if let Some(v) = &self.bounds {
            plan.bounds = v.clone();
        }
        if let Some(v) = &self.power_control {
            plan.power_control = v.clone();
        }
        if let Some(v) = &self.xpd_db {
            plan.xpd_db = v.clone();
        }
        if let Some(v) = &self.xpc {
            plan.xpc = v.clone();
        }
        if let Some(v) = &self.uni {
            plan.uni = v.clone();
        }
        if let Some(v) = &self.m_list {
            plan.m_list = v.clone();
        }
    }
}

impl fmt::Display for ExperimentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: M={:?}, {} cells, {} variants, {} setups x {} trials",
            self.name,
            self.m_list,
            self.cells().len(),
            self.variants().len(),
            self.setups,
            self.trials
        )
    }
}

/// Runs a figure preset with overrides and writes its CSV and JSON.
pub fn run_figure(id: &str, overrides: &Overrides) -> Result<RunRecord> {
    let mut plan = ExperimentPlan::figure(id)?;
    overrides.apply(&mut plan);
    run_custom(&plan)
}

/// Runs a plan and writes `<out>/<name>.csv` and `<out>/<name>.json`. A
/// completed run with the same plan hash is not repeated; a different plan
/// in the same location is refused.
pub fn run_custom(plan: &ExperimentPlan) -> Result<RunRecord> {
    plan.validate()?;
    let hash = plan.hash();
    if let Some(record) = output::check_existing(plan, &hash)? {
        return Ok(record);
    }
    let start = Instant::now();
    let record = par::with_threads(plan.threads, || execute(plan, &hash))??;
    let record = RunRecord {
        wall_clock_s: start.elapsed().as_secs_f64(),
        ..record
    };
    output::write_run(plan, &record)?;
    Ok(record)
}

/// Runs a plan in memory without touching the file system.
pub fn execute(plan: &ExperimentPlan, hash: &str) -> Result<RunRecord> {
    plan.validate()?;
    let geometries = engine::draw_geometries(plan)?;
    let cells = plan.cells();
    let mut groups = Vec::new();
    for v in plan.variants() {
        for &m in &plan.m_list {
            let outcomes = par::try_map_indexed(plan.setups, |s| {
                engine::evaluate_setup(plan, &cells, m, &v, &geometries[s], s)
            })?;
            groups.push((m, v, outcomes));
        }
    }
    Ok(output::assemble(plan, hash, &cells, groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_presets_validate() {
        for id in FIGURES {
            let p = ExperimentPlan::figure(id).unwrap();
            p.validate().unwrap();
            assert!(!p.cells().is_empty());
        }
        assert!(matches!(ExperimentPlan::figure("fig11"), Err(Error::Config(_))));
    }

    #[test]
    fn fig1_cells() {
        let p = ExperimentPlan::figure("fig1").unwrap();
        let labels: Vec<_> = p.cells().iter().map(|c| (c.scheme.label(), c.bound.label())).collect();
        assert_eq!(
            labels,
            vec![
                ("mmse", "ul_sic"),
                ("mmse", "ul_uatf"),
                ("zf", "ul_uatf"),
                ("mr", "ul_uatf"),
                ("mr", "ul_mr_closed")
            ]
        );
    }

    #[test]
    fn empty_scheme_list_rejected() {
        let mut p = ExperimentPlan::figure("fig1").unwrap();
        p.schemes.clear();
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn labels_carry_swept_dimensions() {
        let p = ExperimentPlan::figure("fig5").unwrap();
        let v = p.variants()[1];
        let cell = p.cells()[1];
        assert_eq!(p.scheme_label(&cell, &v), "mmse|xpd=inf");
        let p = ExperimentPlan::figure("fig3").unwrap();
        let uni = p.cells().into_iter().find(|c| c.bound == Bound::DlUni).unwrap();
        assert_eq!(p.scheme_label(&uni, &p.variants()[0]), "mmse|uni=full");
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = ExperimentPlan::figure("fig2").unwrap();
        let h = a.hash();
        a.out = PathBuf::from("/elsewhere");
        a.threads = Some(3);
        assert_eq!(a.hash(), h);
        a.trials += 1;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn parse_helpers() {
        assert_eq!(parse_xpd("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_xpd("5").unwrap(), 5.0);
        assert_eq!(parse_xpc("0.8").unwrap(), C64::new(0.8, 0.0));
        assert_eq!(parse_xpc("0.6+0.2i").unwrap(), C64::new(0.6, 0.2));
        assert!(parse_xpc("x").is_err());
        assert_eq!("maxsum".parse::<PowerControl>().unwrap(), PowerControl::Maxsum);
        assert_eq!("half".parse::<UniMode>().unwrap(), UniMode::Half);
    }
}
