//! Experiment configuration and end-to-end runs.

pub mod generate;
pub mod report;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::framework::{RobustRunner, RunnerConfig};
use crate::geometry::{validate_packing, ValidityReport};
use crate::model::{Domain, Event, EventOp, ItemKey, ItemKind, ItemSpec, PlacementRecord, SolutionState};
use crate::offline::OfflineRepacker;
use crate::online::{OnlineAlgorithm, ProblemKind};
use crate::rational::Rational;
use crate::trace::Trace;

pub use generate::{generate_trace, GeneratorSpec, Pattern};
pub use report::{export, Constants, Format, RunReport, Summary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    #[default]
    Off,
    /// Rotate every item into a canonical orientation before packing.
    Normalize,
}

/// Rotates a rectangle so that `w <= h` and sorts hyperrectangle sides
/// ascending. Other items are returned unchanged.
pub fn orient_rotation(item: &ItemSpec) -> ItemSpec {
    let kind = match &item.kind {
        ItemKind::Rect2d { w, h } if w > h => ItemKind::Rect2d { w: h.clone(), h: w.clone() },
        ItemKind::Hyperrect { sides } => {
            let mut sides = sides.clone();
            sides.sort();
            ItemKind::Hyperrect { sides }
        }
        other => other.clone(),
    };
    ItemSpec {
        id: item.id.clone(),
        kind,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    File(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<Format>,
}

fn default_d() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    #[serde(default = "default_d")]
    pub d: usize,
    pub epsilon: Rational,
    #[serde(default)]
    pub online: Option<OnlineAlgorithm>,
    #[serde(default)]
    pub offline: Option<OfflineRepacker>,
    #[serde(default)]
    pub rotation: Rotation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace: Option<TraceSource>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub check: bool,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind, d: usize, epsilon: Rational) -> Self {
        ExperimentConfig {
            problem,
            d,
            epsilon,
            online: None,
            offline: None,
            rotation: Rotation::Off,
            seed: 0,
            trace: None,
            output: None,
            check: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| PackError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn online(&self) -> OnlineAlgorithm {
        self.online.unwrap_or_else(|| self.problem.default_online(self.d))
    }

    pub fn offline(&self) -> OfflineRepacker {
        self.offline.unwrap_or_default()
    }

    pub fn runner_config(&self) -> RunnerConfig {
        RunnerConfig {
            epsilon: self.epsilon.clone(),
            online: self.online(),
            offline: self.offline(),
            check: self.check,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let online = self.online();
        if !self.problem.pairs_with(&online, self.d) {
            return Err(PackError::Config(format!(
                "{} does not solve {} in {} dimensions",
                online.name(),
                self.problem.name(),
                self.problem.dim(self.d)
            )));
        }
        self.runner_config().validate()
    }

    /// The configured trace, generated with this config's seed if needed.
    pub fn load_trace(&self) -> Result<Trace> {
        match &self.trace {
            None => Err(PackError::Config("no trace source configured".into())),
            Some(TraceSource::File(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| PackError::Config(format!("{}: {e}", path.display())))?;
                Trace::from_jsonl(&text)
            }
            Some(TraceSource::Generator(spec)) => generate_trace(spec, self.seed),
        }
    }
}

/// A finished run: the report plus the final solution.
pub struct RunOutcome {
    pub report: RunReport,
    pub solution: SolutionState,
}

/// Replays `trace` through a robust runner configured by `config`.
pub fn run_trace(config: &ExperimentConfig, trace: &Trace) -> Result<RunOutcome> {
    config.validate()?;
    let mut runner = RobustRunner::new(config.runner_config())?;
    let mut rows = Vec::with_capacity(trace.len());
    for event in &trace.events {
        let event = match (&event.op, config.rotation) {
            (EventOp::Insert(item), Rotation::Normalize) => Event::insert(event.t, orient_rotation(item)),
            _ => event.clone(),
        };
        rows.push(runner.step(&event)?);
    }
    let online_cert = runner.online_certificate();
    let offline = runner.last_offline();
    let constants = Constants {
        epsilon: config.epsilon.clone(),
        online: config.online().name(),
        beta: online_cert.map(|c| c.beta.clone()),
        c_on: online_cert.map(|c| c.additive.clone()),
        offline: config.offline().name(),
        gamma: offline.and_then(|o| o.certified_gamma.clone()),
        c_off: offline.and_then(|o| o.certified_additive.clone()),
        provenance: offline.map(|o| o.provenance),
    };
    Ok(RunOutcome {
        report: RunReport::new(rows, constants),
        solution: runner.solution().clone(),
    })
}

/// Loads the configured trace and runs it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let trace = config.load_trace()?;
    Ok(run_trace(config, &trace)?.report)
}

/// On-disk form of a solution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub domain: Domain,
    pub placements: Vec<PlacementEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub key: ItemKey,
    #[serde(default)]
    pub ghost: bool,
    #[serde(flatten)]
    pub record: PlacementRecord,
}

impl SolutionFile {
    pub fn from_solution(s: &SolutionState) -> Self {
        SolutionFile {
            domain: s.domain(),
            placements: s
                .iter()
                .map(|(k, p)| PlacementEntry {
                    key: k.clone(),
                    ghost: s.is_ghost(k),
                    record: p.record.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolutionCheck {
    pub geometry: ValidityReport,
    /// Placed keys with no matching item in the trace.
    pub unknown: Vec<ItemKey>,
    /// Items live at the end of the trace that have no placement.
    pub missing: Vec<ItemKey>,
}

impl SolutionCheck {
    pub fn is_valid(&self) -> bool {
        self.geometry.is_valid() && self.unknown.is_empty() && self.missing.is_empty()
    }
}

/// Checks a stored solution against the items of `trace`. Every item ever
/// inserted may appear (departed ones as ghosts); every live one must.
pub fn validate_solution(trace: &Trace, file: &SolutionFile) -> Result<SolutionCheck> {
    let mut specs = std::collections::BTreeMap::new();
    let mut epochs = std::collections::BTreeMap::new();
    let mut live = BTreeSet::new();
    for e in &trace.events {
        match &e.op {
            EventOp::Insert(item) => {
                let epoch = epochs.get(&item.id).map_or(0, |x: &u32| x + 1);
                epochs.insert(item.id.clone(), epoch);
                let key = ItemKey {
                    id: item.id.clone(),
                    epoch,
                };
                live.insert(key.clone());
                specs.insert(key, item.clone());
            }
            EventOp::Depart(id) => {
                let key = ItemKey {
                    id: id.clone(),
                    epoch: epochs[id],
                };
                live.remove(&key);
            }
        }
    }
    let mut check = SolutionCheck::default();
    let mut solution = SolutionState::new(file.domain);
    for entry in &file.placements {
        match specs.get(&entry.key) {
            Some(item) => solution.insert(entry.key.clone(), item.clone(), entry.record.clone())?,
            None => check.unknown.push(entry.key.clone()),
        }
    }
    check.missing = live.into_iter().filter(|k| !solution.contains(k)).collect();
    check.geometry = validate_packing(&solution);
    Ok(check)
}

/// Live items of `trace` after every event with time at most `at`.
pub fn live_at(trace: &Trace, at: u64) -> Vec<ItemSpec> {
    trace.prefix(at).live_items()
}

/// Domain implied by the items, for oracle commands without a problem.
pub fn infer_domain(items: &[ItemSpec]) -> Domain {
    match items.first().map(|i| &i.kind) {
        Some(ItemKind::Vector { components }) => Domain::Vectors { d: components.len() },
        Some(kind) => Domain::Strip { d: kind.dim() },
        None => Domain::Strip { d: 2 },
    }
}

/// Volume of items, exact.
pub fn total_volume(items: &[ItemSpec]) -> Rational {
    items.iter().map(ItemSpec::size).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn rotation_examples() {
        let r = orient_rotation(&ItemSpec::rect2d("a", q("0.7"), q("0.2")));
        assert_eq!(r.kind, ItemKind::Rect2d { w: q("0.2"), h: q("0.7") });
        let sq = ItemSpec::rect2d("b", q("0.3"), q("0.3"));
        assert_eq!(orient_rotation(&sq), sq);
        let h = orient_rotation(&ItemSpec::hyperrect("c", vec![q("0.5"), q("0.1"), q("0.3")]));
        assert_eq!(h.sides().unwrap(), vec![q("0.1"), q("0.3"), q("0.5")]);
    }

    #[test]
    fn config_parsing_and_pairing() {
        let json = r#"{"problem":"bin2d","epsilon":"1/10","trace":{"generator":{"problem":"bin2d","pattern":"uniform","n":5}}}"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.online(), OnlineAlgorithm::Slots { d: 2 });
        assert_eq!(run_experiment(&cfg).unwrap().rows.len(), 5);

        let bad = r#"{"problem":"bin2d","epsilon":"1/10","online":{"name":"shelf-2d"}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(PackError::Config(_))));
        let eps = r#"{"problem":"vector","epsilon":"0.6"}"#;
        assert!(ExperimentConfig::from_json(eps).is_err());
    }

    #[test]
    fn two_vector_example() {
        let text = "{\"t\":1,\"op\":\"insert\",\"id\":\"a\",\"kind\":\"vector\",\"components\":[\"0.6\",\"0.1\"]}\n\
                    {\"t\":2,\"op\":\"insert\",\"id\":\"b\",\"kind\":\"vector\",\"components\":[\"0.6\",\"0.1\"]}\n";
        let trace = Trace::from_jsonl(text).unwrap();
        // the second insert doubles the volume, so it repacks; both runs
        // need 2 bins either way
        let cfg = ExperimentConfig::new(ProblemKind::Vector, 2, q("1/2"));
        let out = run_trace(&cfg, &trace).unwrap();
        assert_eq!(out.report.rows[1].cost, q("2"));
        assert_eq!(out.report.summary.violations, 0);
    }

    #[test]
    fn empty_trace_gives_empty_report() {
        let cfg = ExperimentConfig::new(ProblemKind::Strip2d, 2, q("1/4"));
        let out = run_trace(&cfg, &Trace::default()).unwrap();
        assert!(out.report.rows.is_empty());
        assert_eq!(out.report.summary.events, 0);
    }

    #[test]
    fn stored_solutions_validate() {
        let spec = GeneratorSpec::new(
            ProblemKind::Strip2d,
            2,
            Pattern::Churn {
                n: 60,
                depart_prob: 0.3,
                min_size: 0.05,
                max_size: 0.6,
            },
        );
        let trace = generate_trace(&spec, 11).unwrap();
        let cfg = ExperimentConfig::new(ProblemKind::Strip2d, 2, q("1/4"));
        let out = run_trace(&cfg, &trace).unwrap();
        let file = SolutionFile::from_solution(&out.solution);
        let json = serde_json::to_string(&file).unwrap();
        let back: SolutionFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        assert!(validate_solution(&trace, &back).unwrap().is_valid());
        let mut broken = back.clone();
        broken.placements.pop();
        let live_dropped = !validate_solution(&trace, &broken).unwrap().is_valid();
        let last_was_ghost = back.placements.last().unwrap().ghost;
        assert!(live_dropped || last_was_ghost);
    }
}
