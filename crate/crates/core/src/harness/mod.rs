//! Experiment orchestration: configs, seeded trials run in parallel, and
//! reproducible JSON and CSV reports.
//!
//! A report never carries timestamps, so equal configs give byte-identical
//! output. Hard gates are finite-dimensional exact statements; monitor rows
//! are reported but never fail a run.

mod experiments;
pub mod generate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
pub use generate::{generate_potential, generate_potential_with_strength, BumpField, PotentialStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Constants,
    Jensen,
    Holder,
    TimeorderConsistency,
    Trotter,
    BsEquivalence,
    ClrSurvey,
    LtMoments,
    RemarkProbe,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Constants,
        Experiment::Jensen,
        Experiment::Holder,
        Experiment::TimeorderConsistency,
        Experiment::Trotter,
        Experiment::BsEquivalence,
        Experiment::ClrSurvey,
        Experiment::LtMoments,
        Experiment::RemarkProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Constants => "constants",
            Experiment::Jensen => "jensen",
            Experiment::Holder => "holder",
            Experiment::TimeorderConsistency => "timeorder-consistency",
            Experiment::Trotter => "trotter",
            Experiment::BsEquivalence => "bs-equivalence",
            Experiment::ClrSurvey => "clr-survey",
            Experiment::LtMoments => "lt-moments",
            Experiment::RemarkProbe => "remark-probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn default_trials(self) -> usize {
        match self {
            Experiment::Constants => 1,
            Experiment::Jensen | Experiment::Holder => 1000,
            Experiment::TimeorderConsistency | Experiment::RemarkProbe => 500,
            Experiment::BsEquivalence => 200,
            Experiment::Trotter => 10,
            Experiment::LtMoments => 20,
            Experiment::ClrSurvey => 6,
        }
    }
}

/// Size caps shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Caps {
    /// Number of factors `n` in time-ordered products.
    pub max_factors: usize,
    /// Fibre dimension `N`.
    pub max_fiber: usize,
    /// Grid points per axis for 1-D instances.
    pub max_points: usize,
    /// Largest monomial degree drawn for Jensen and consistency trials.
    pub max_degree: u32,
    /// Largest dimension in the constants table.
    pub dmax: u32,
    /// Points per axis of the coarsest clr-survey grid.
    pub survey_points: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_factors: 4,
            max_fiber: 3,
            max_points: 12,
            max_degree: 6,
            dmax: 20,
            survey_points: 3,
        }
    }
}

/// Hard-gate tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Tolerances {
    /// Jensen gap slack, relative to `max(1, |lhs|, |rhs|)`.
    pub jensen: f64,
    /// Hölder slack, relative to `1 + |rhs|`.
    pub holder: f64,
    /// Closed form vs enumeration, relative to `1 + max |entry|`.
    pub closed_form: f64,
    /// Commuting collapse, relative to `1 + max |entry|`.
    pub commuting: f64,
    /// Resolvent identity, relative.
    pub resolvent: f64,
    /// Time quadrature of the Trotter trace vs the resolvent, relative.
    pub time_quadrature: f64,
    /// Slack in `#(L - V) <= bs_bound`.
    pub bs_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jensen: 1e-9,
            holder: 1e-10,
            closed_form: 1e-8,
            commuting: 1e-9,
            resolvent: 1e-8,
            time_quadrature: 1e-3,
            bs_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// `None` selects the experiment's default.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Fixed potential style; `None` cycles through all styles.
    #[serde(default)]
    pub style: Option<PotentialStyle>,
    /// Potential strength in units of `1 / extent^2`.
    #[serde(default)]
    pub strength: Option<f64>,
    /// Potential file used by bs-equivalence, trotter and lt-moments instead
    /// of generated instances; each trial rescales it by a seeded factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PathBuf>,
    /// Output directory; not echoed into reports so that the destination
    /// does not change their bytes.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

/// Largest number of trials accepted in one run.
pub const MAX_TRIALS: usize = 1_000_000;

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            trials: None,
            caps: Caps::default(),
            tolerances: Tolerances::default(),
            style: None,
            strength: None,
            potential: None,
            out: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = Some(trials);
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn trial_count(&self) -> usize {
        self.trials.unwrap_or_else(|| self.experiment.default_trials())
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.caps;
        let bad = |msg: String| Err(Error::Config(msg));
        let trials = self.trial_count();
        if trials == 0 || trials > MAX_TRIALS {
            return bad(format!("trials must be in 1..={MAX_TRIALS}, got {trials}"));
        }
        if !(1..=6).contains(&c.max_factors) {
            return bad(format!("max-factors must be in 1..=6, got {}", c.max_factors));
        }
        if !(1..=generate::MAX_GENERATED_FIBER).contains(&c.max_fiber) {
            return bad(format!(
                "max-fiber must be in 1..={}, got {}",
                generate::MAX_GENERATED_FIBER,
                c.max_fiber
            ));
        }
        if (c.max_fiber as u128).pow(c.max_factors as u32) > crate::timeorder::DEFAULT_ENUMERATION_BUDGET {
            return bad("max-fiber^max-factors exceeds the enumeration budget".into());
        }
        if !(4..=256).contains(&c.max_points) {
            return bad(format!("max-points must be in 4..=256, got {}", c.max_points));
        }
        if c.max_points * c.max_fiber > crate::lattice::dense_budget() {
            return bad("max-points * max-fiber exceeds the dense budget".into());
        }
        if !(1..=crate::timeorder::MAX_MONOMIAL_DEGREE).contains(&c.max_degree) {
            return bad(format!("max-degree must be in 1..=12, got {}", c.max_degree));
        }
        if !(3..=200).contains(&c.dmax) {
            return bad(format!("dmax must be in 3..=200, got {}", c.dmax));
        }
        if !(1..=6).contains(&c.survey_points) {
            return bad(format!("survey-points must be in 1..=6, got {}", c.survey_points));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("jensen", t.jensen),
            ("holder", t.holder),
            ("closed-form", t.closed_form),
            ("commuting", t.commuting),
            ("resolvent", t.resolvent),
            ("time-quadrature", t.time_quadrature),
            ("bs-slack", t.bs_slack),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("tolerance {name} must be in [0, 1), got {v}"));
            }
        }
        if self.potential.is_some()
            && !matches!(
                self.experiment,
                Experiment::BsEquivalence | Experiment::Trotter | Experiment::LtMoments
            )
        {
            return bad(format!("{} does not accept a potential file", self.experiment.name()));
        }
        if let Some(s) = self.strength {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("strength must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Hard,
    Monitor,
}

/// One checked statement; `margin >= 0` means it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub gate: Gate,
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, gate: Gate, margin: f64) -> Self {
        Self {
            name: name.into(),
            gate,
            // normalises -0.0 so that exact integer matches print as zero
            margin: margin + 0.0,
            pass: margin >= 0.0,
        }
    }

    pub fn hard(name: impl Into<String>, margin: f64) -> Self {
        Self::new(name, Gate::Hard, margin)
    }

    pub fn monitor(name: impl Into<String>, margin: f64) -> Self {
        Self::new(name, Gate::Monitor, margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// SHA-256 of the trial's inputs.
    pub inputs_digest: String,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// A module error raised by the trial; counts as a hard failure.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn hard_pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.gate == Gate::Monitor || c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub gate: Gate,
    pub count: usize,
    pub passed: usize,
    pub min_margin: f64,
    pub max_margin: f64,
    pub mean_margin: f64,
    /// Seed of the trial with the smallest margin.
    pub min_margin_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub errors: usize,
    pub checks: Vec<CheckSummary>,
    /// No errors and every hard check passed.
    pub pass: bool,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut by_name: BTreeMap<&str, Vec<(&Check, u64)>> = BTreeMap::new();
        for r in records {
            for c in &r.checks {
                by_name.entry(&c.name).or_default().push((c, r.seed));
            }
        }
        let checks = by_name
            .into_iter()
            .map(|(name, rows)| {
                let count = rows.len();
                let (min_c, min_seed) = rows
                    .iter()
                    .min_by(|a, b| a.0.margin.total_cmp(&b.0.margin))
                    .map(|(c, s)| (c.margin, *s))
                    .expect("at least one row");
                CheckSummary {
                    name: name.to_string(),
                    gate: rows[0].0.gate,
                    count,
                    passed: rows.iter().filter(|(c, _)| c.pass).count(),
                    min_margin: min_c,
                    max_margin: rows.iter().map(|(c, _)| c.margin).fold(f64::NEG_INFINITY, f64::max),
                    mean_margin: rows.iter().map(|(c, _)| c.margin).sum::<f64>() / count as f64,
                    min_margin_seed: min_seed,
                }
            })
            .collect();
        Self {
            trials: records.len(),
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            checks,
            pass: records.iter().all(TrialRecord::hard_pass),
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-trial CSV: fixed leading columns, then every value and check in name order.
    pub fn records_csv(&self) -> String {
        let values: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.values.keys().map(String::as_str))
            .collect();
        let checks: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.checks.iter().map(|c| c.name.as_str()))
            .collect();
        let mut out = String::from("trial,seed,inputs_digest,error");
        for v in &values {
            let _ = write!(out, ",{v}");
        }
        for c in &checks {
            let _ = write!(out, ",{c}.margin,{c}.pass");
        }
        out.push('\n');
        for r in &self.records {
            let err = r.error.as_deref().map(csv_field).unwrap_or_default();
            let _ = write!(out, "{},{},{},{}", r.trial, r.seed, r.inputs_digest, err);
            for v in &values {
                match r.values.get(*v) {
                    Some(x) => {
                        let _ = write!(out, ",{x:e}");
                    }
                    None => out.push(','),
                }
            }
            for c in &checks {
                match r.checks.iter().find(|x| x.name == *c) {
                    Some(x) => {
                        let _ = write!(out, ",{:e},{}", x.margin, x.pass);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// One row per check name.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "check,gate,count,passed,min_margin,max_margin,mean_margin,min_margin_seed\n",
        );
        for c in &self.summary.checks {
            let gate = match c.gate {
                Gate::Hard => "hard",
                Gate::Monitor => "monitor",
            };
            let _ = writeln!(
                out,
                "{},{gate},{},{},{:e},{:e},{:e},{}",
                c.name, c.count, c.passed, c.min_margin, c.max_margin, c.mean_margin, c.min_margin_seed
            );
        }
        out
    }

    /// Writes `report.json`, `records.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()? + "\n")?;
        std::fs::write(dir.join("records.csv"), self.records_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `i`: the run seed XOR the trial index, hashed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    splitmix64(seed ^ trial as u64)
}

/// Incremental SHA-256 over numbers and strings.
#[derive(Default)]
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn f64(&mut self, x: f64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub fn u64(&mut self, x: u64) -> &mut Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn matrix(&mut self, m: &crate::matcore::HermitianMatrix) -> &mut Self {
        self.u64(m.dim() as u64);
        for z in m.as_matrix().iter() {
            self.f64(z.re).f64(z.im);
        }
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// SHA-256 of a string, hex encoded.
pub fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Runs every trial (in parallel) and assembles the report in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut config = config.clone();
    config.trials = Some(config.trial_count());
    let source = match &config.potential {
        Some(path) => {
            let v = crate::lattice::MatrixPotential::read_json(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if !v.is_psd(1e-12) {
                return Err(Error::Config(format!(
                    "{}: potential must be PSD at every site",
                    path.display()
                )));
            }
            if v.dim() > crate::lattice::dense_budget() {
                return Err(Error::Config(format!(
                    "{}: sites * N = {} exceeds the dense budget",
                    path.display(),
                    v.dim()
                )));
            }
            Some(v)
        }
        None => None,
    };
    let records = match config.experiment {
        Experiment::Constants => experiments::constants(&config)?,
        _ => (0..config.trial_count())
            .into_par_iter()
            .map(|i| {
                let seed = trial_seed(config.seed, i);
                experiments::run_trial(&config, source.as_ref(), i, seed)
            })
            .collect(),
    };
    let summary = Summary::from_records(&records);
    Ok(ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        records,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_validation() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"bs-equivalence","seed":7,"caps":{"max-fiber":2}}"#)
            .unwrap();
        assert_eq!(c.experiment, Experiment::BsEquivalence);
        assert_eq!(c.caps.max_fiber, 2);
        assert_eq!(c.caps.max_points, 12);
        assert_eq!(c.trial_count(), 200);
        c.validate().unwrap();
        assert!(ExperimentConfig::from_json(r#"{"experiment":"nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"jensen","bogus":1}"#).is_err());
        let bad = ExperimentConfig::new(Experiment::Jensen).with_trials(0);
        assert!(bad.validate().is_err());
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.name()), Some(e));
        }
    }

    #[test]
    fn trial_seeds_differ() {
        let s: BTreeSet<u64> = (0..1000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn summary_reflects_records() {
        let rec = |seed, margin, gate| TrialRecord {
            trial: 0,
            seed,
            inputs_digest: String::new(),
            values: BTreeMap::new(),
            checks: vec![Check::new("x", gate, margin)],
            error: None,
        };
        let s = Summary::from_records(&[rec(1, 0.5, Gate::Hard), rec(2, 0.1, Gate::Hard)]);
        assert!(s.pass);
        assert_eq!(s.check("x").unwrap().min_margin_seed, 2);
        let s = Summary::from_records(&[rec(1, -0.5, Gate::Monitor)]);
        assert!(s.pass);
        let s = Summary::from_records(&[rec(1, -0.5, Gate::Hard)]);
        assert!(!s.pass);
    }

    #[test]
    fn runs_are_reproducible() {
        for e in [Experiment::Jensen, Experiment::Holder, Experiment::BsEquivalence] {
            let c = ExperimentConfig::new(e).with_seed(3).with_trials(6);
            let a = run_experiment(&c).unwrap();
            let b = run_experiment(&c).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            assert!(a.summary.pass, "{}", e.name());
            assert_eq!(a.records.len(), 6);
        }
    }
}
