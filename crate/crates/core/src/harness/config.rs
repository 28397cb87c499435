use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::distributions::two_class_distribution;
use crate::embeddings::EmbeddingKind;
use crate::error::{invalid, Error, Result};
use crate::optim::{OptimizerKind, Schedule};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    #[default]
    Onestep,
    Multistep,
    Oracle,
    Spectra,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Onestep,
        Experiment::Multistep,
        Experiment::Oracle,
        Experiment::Spectra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Onestep => "onestep",
            Experiment::Multistep => "multistep",
            Experiment::Oracle => "oracle",
            Experiment::Spectra => "spectra",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid(format!("unknown experiment {s:?}")))
    }
}

/// Preset names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 6] = [
    "toy-one-step",
    "toy-multi-step",
    "gd-imbalance",
    "sign-instability",
    "oracle",
    "smoke",
];

/// One experiment description. Every key is optional in JSON; missing keys take
/// the defaults below, and a `"preset"` key selects a different starting point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub eps: f64,
    #[serde(deserialize_with = "embedding_list")]
    pub embeddings: Vec<EmbeddingKind>,
    #[serde(deserialize_with = "optimizer_list")]
    pub optimizers: Vec<OptimizerKind>,
    /// Step size used by every optimizer without an entry in `eta_by_optimizer`.
    pub eta: Option<f64>,
    pub eta_by_optimizer: BTreeMap<String, f64>,
    pub steps: usize,
    /// Explicit step sizes. Replaces `eta`/`steps` for multistep runs and adds
    /// sweep rows to onestep runs.
    pub schedule: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    /// Decades of the η grid below and above η* in onestep runs.
    pub decades: usize,
    /// Spectral metrics of each update (multistep needs one SVD per step).
    pub metrics: bool,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    /// Matrix or list of matrices for the spectra experiment.
    pub input: Option<PathBuf>,
    /// `.json` writes JSON rows, anything else CSV; stdout when absent.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Onestep,
            k: 99,
            l: 21,
            alpha: 0.8,
            eps: 0.1,
            embeddings: vec![EmbeddingKind::Identity],
            optimizers: vec![OptimizerKind::Gd, OptimizerKind::muon_exact()],
            eta: None,
            eta_by_optimizer: default_etas(),
            steps: 50,
            schedule: None,
            seeds: vec![0],
            decades: 6,
            metrics: true,
            workers: None,
            input: None,
            out: None,
        }
    }
}

fn default_etas() -> BTreeMap<String, f64> {
    [
        ("gd", 100.0),
        ("sign_gd", 0.05),
        ("muon_exact", 0.5),
        ("muon_ns", 0.5),
        ("muon_momentum", 0.5),
        ("adam_full", 0.05),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn embedding_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<EmbeddingKind>, D::Error> {
    let names = Vec::<String>::deserialize(d)?;
    names
        .iter()
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OptimizerSpec {
    Name(String),
    Full(OptimizerKind),
}

fn optimizer_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<OptimizerKind>, D::Error> {
    Vec::<OptimizerSpec>::deserialize(d)?
        .into_iter()
        .map(|spec| match spec {
            OptimizerSpec::Name(s) => s.parse().map_err(serde::de::Error::custom),
            OptimizerSpec::Full(kind) => Ok(kind),
        })
        .collect()
}

fn field(name: &str, msg: impl fmt::Display) -> Error {
    invalid(format!("{name}: {msg}"))
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let both = vec![EmbeddingKind::Identity, EmbeddingKind::CoupledRotation];
        let cfg = match name {
            "toy-one-step" => Self {
                k: 999,
                l: 200,
                embeddings: both,
                optimizers: vec![OptimizerKind::Gd, OptimizerKind::SignGd, OptimizerKind::muon_exact()],
                ..base
            },
            "toy-multi-step" => Self {
                experiment: Experiment::Multistep,
                k: 999,
                l: 200,
                embeddings: both,
                metrics: false,
                ..base
            },
            "gd-imbalance" => Self {
                k: 1000,
                l: 200,
                optimizers: vec![OptimizerKind::Gd],
                ..base
            },
            "sign-instability" => Self {
                k: 999,
                l: 201,
                embeddings: both,
                optimizers: vec![OptimizerKind::SignGd, OptimizerKind::muon_exact()],
                ..base
            },
            "oracle" => Self {
                experiment: Experiment::Oracle,
                steps: 20,
                eta: Some(0.5),
                ..base
            },
            "smoke" => Self {
                experiment: Experiment::Multistep,
                k: 30,
                l: 6,
                embeddings: EmbeddingKind::ALL.to_vec(),
                optimizers: vec![
                    OptimizerKind::Gd,
                    OptimizerKind::SignGd,
                    OptimizerKind::muon_exact(),
                    OptimizerKind::muon_ns(),
                    OptimizerKind::adam_full(),
                ],
                steps: 10,
                seeds: vec![0, 1],
                ..base
            },
            other => {
                return Err(field(
                    "preset",
                    format!("unknown preset {other:?} (expected one of {})", PRESETS.join(", ")),
                ))
            }
        };
        Ok(cfg)
    }

    /// Parses a JSON document, applying its `"preset"` key first when present.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::default().overlay_json(text)
    }

    /// Keys of a JSON document applied on top of `self`. A `"preset"` key
    /// replaces `self` before the remaining keys apply.
    pub fn overlay_json(&self, text: &str) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| invalid("config: expected a JSON object"))?;
        let base = match obj.remove("preset") {
            None => self.clone(),
            Some(serde_json::Value::String(name)) => Self::preset(&name)?,
            Some(_) => return Err(field("preset", "expected a string")),
        };
        let mut merged = serde_json::to_value(&base).expect("config serializes");
        let target = merged.as_object_mut().expect("config is an object");
        for (k, v) in obj.iter() {
            target.insert(k.clone(), v.clone());
        }
        serde_json::from_value(merged).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Step size for `kind`: `eta_by_optimizer`, then `eta`.
    pub fn eta_for(&self, kind: &OptimizerKind) -> Option<f64> {
        self.eta_by_optimizer.get(kind.name()).copied().or(self.eta)
    }

    /// Multistep schedule for `kind`.
    pub fn schedule_for(&self, kind: &OptimizerKind) -> Result<Schedule> {
        if let Some(etas) = &self.schedule {
            return Schedule::new(etas.clone()).map_err(|e| field("schedule", e));
        }
        let eta = self
            .eta_for(kind)
            .ok_or_else(|| field("eta", format!("no step size for {}", kind.name())))?;
        Schedule::constant(eta, self.steps).map_err(|e| field("eta", e))
    }

    /// Checks every field the selected experiment reads, naming the first bad one.
    pub fn validate(&self) -> Result<()> {
        if self.experiment == Experiment::Spectra {
            if self.input.is_none() {
                return Err(field("input", "the spectra experiment needs an input matrix file"));
            }
            return self.check_workers();
        }
        if self.k < 2 {
            return Err(field("k", format!("must be at least 2, got {}", self.k)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(field("eps", format!("must lie in (0, 1), got {}", self.eps)));
        }
        if let Err(e) = two_class_distribution(self.k, self.l, self.alpha) {
            let name = if self.alpha > 0.0 && self.alpha < 1.0 { "l" } else { "alpha" };
            return Err(field(name, e));
        }
        if self.seeds.is_empty() {
            return Err(field("seeds", "must not be empty"));
        }
        if self.experiment == Experiment::Oracle {
            if self.steps == 0 {
                return Err(field("steps", "must be at least 1"));
            }
            if let Some(eta) = self.eta {
                if !(eta.is_finite() && eta > 0.0) {
                    return Err(field("eta", format!("must be positive, got {eta}")));
                }
            }
            return self.check_workers();
        }
        if self.embeddings.is_empty() {
            return Err(field("embeddings", "must not be empty"));
        }
        if self.embeddings.contains(&EmbeddingKind::CoupledRotation) && !self.k.is_multiple_of(3) {
            return Err(field(
                "embeddings",
                format!("coupled_rotation needs k divisible by 3, got {}", self.k),
            ));
        }
        if self.optimizers.is_empty() {
            return Err(field("optimizers", "must not be empty"));
        }
        for (i, kind) in self.optimizers.iter().enumerate() {
            kind.validate().map_err(|e| field("optimizers", e))?;
            if self.optimizers[..i].iter().any(|o| o.name() == kind.name()) {
                return Err(field("optimizers", format!("{} listed twice", kind.name())));
            }
        }
        for (name, &eta) in &self.eta_by_optimizer {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(field("eta_by_optimizer", format!("{name} = {eta} is not a valid step size")));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(field("eta", format!("must be finite and nonnegative, got {eta}")));
            }
        }
        match self.experiment {
            Experiment::Onestep => {
                if self.decades == 0 {
                    return Err(field("decades", "must be at least 1"));
                }
                if let Some(etas) = &self.schedule {
                    Schedule::new(etas.clone()).map_err(|e| field("schedule", e))?;
                }
            }
            Experiment::Multistep => {
                if self.schedule.is_none() && self.steps == 0 {
                    return Err(field("steps", "must be at least 1"));
                }
                for kind in &self.optimizers {
                    self.schedule_for(kind)?;
                }
            }
            Experiment::Oracle | Experiment::Spectra => unreachable!(),
        }
        self.check_workers()
    }

    fn check_workers(&self) -> Result<()> {
        match self.workers {
            Some(0) => Err(field("workers", "must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("fig9").is_err());
    }

    #[test]
    fn json_round_trip() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn preset_key_with_overrides() {
        let cfg = ExperimentConfig::from_json(
            r#"{"preset": "smoke", "k": 12, "optimizers": ["muon", {"name": "muon_ns", "iterations": 4}],
                "embeddings": ["coupled"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Multistep);
        assert_eq!(cfg.k, 12);
        assert_eq!(cfg.steps, 10);
        assert_eq!(cfg.optimizers[1], OptimizerKind::MuonNs { iterations: 4 });
        assert_eq!(cfg.embeddings, vec![EmbeddingKind::CoupledRotation]);
        let over = ExperimentConfig::preset("oracle").unwrap().overlay_json(r#"{"k": 33}"#).unwrap();
        assert_eq!((over.experiment, over.k), (Experiment::Oracle, 33));
    }

    #[test]
    fn field_level_errors() {
        let msg = |json: &str| {
            let cfg = ExperimentConfig::from_json(json);
            match cfg.and_then(|c| c.validate()) {
                Err(e) => e.to_string(),
                Ok(()) => String::new(),
            }
        };
        assert!(msg(r#"{"experiment": "multistep", "schedule": []}"#).contains("schedule"));
        assert!(msg(r#"{"k": 1}"#).contains("k:"));
        assert!(msg(r#"{"l": 99}"#).contains("l:"));
        assert!(msg(r#"{"alpha": 1.5}"#).contains("alpha"));
        assert!(msg(r#"{"k": 10, "l": 2, "embeddings": ["coupled"]}"#).contains("embeddings"));
        assert!(msg(r#"{"optimizers": ["gd", "gd"]}"#).contains("optimizers"));
        assert!(msg(r#"{"experiment": "spectra"}"#).contains("input"));
        assert!(msg(r#"{"kk": 3}"#).contains("unknown field"));
        assert!(msg(r#"{"optimizers": ["lion"]}"#).contains("lion"));
    }

    #[test]
    fn eta_resolution() {
        let mut cfg = ExperimentConfig {
            eta: Some(2.0),
            ..Default::default()
        };
        cfg.eta_by_optimizer.remove("gd");
        assert_eq!(cfg.eta_for(&OptimizerKind::Gd), Some(2.0));
        assert_eq!(cfg.eta_for(&OptimizerKind::muon_exact()), Some(0.5));
        cfg.schedule = Some(vec![1.0, 0.5]);
        assert_eq!(cfg.schedule_for(&OptimizerKind::Gd).unwrap().etas, vec![1.0, 0.5]);
    }
}
