//! The phase-based combination of a flexible online algorithm with an offline
//! repacker.
//!
//! Arrivals are packed by the online algorithm on top of the current
//! solution; departures leave a ghost behind. Once the volume changed since
//! the last repack exceeds `epsilon` times the volume at that repack, the
//! offline repacker rebuilds the packing of the live items and a new phase
//! begins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::geometry::{validate_packing, validate_placement};
use crate::model::{
    Domain, Event, EventOp, ItemId, ItemKey, ItemSpec, LedgerEvent, MigrationLedger, PhaseRecord, SolutionState,
};
use crate::offline::{lower_bound_with_volume, OfflineRepacker, OfflineResult};
use crate::online::{FlexibleAlgorithm, OnlineAlgorithm, RatioCertificate};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerConfig {
    pub epsilon: Rational,
    pub online: OnlineAlgorithm,
    #[serde(default)]
    pub offline: OfflineRepacker,
    /// Evaluate every monitor after each event.
    #[serde(default)]
    pub check: bool,
}

impl RunnerConfig {
    pub fn new(epsilon: Rational, online: OnlineAlgorithm, offline: OfflineRepacker) -> Self {
        RunnerConfig {
            epsilon,
            online,
            offline,
            check: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_positive() || self.epsilon > Rational::new(1, 2) {
            return Err(PackError::Config(format!("epsilon {} outside (0, 1/2]", self.epsilon)));
        }
        self.online.fresh()?;
        self.offline.check(self.online.domain(), &self.online)
    }
}

/// `(gamma + eps + 2 (gamma + eps + 1) beta eps) opt + (gamma + eps + 1) c_on + c_off`.
pub fn combined_bound(
    gamma: &Rational,
    beta: &Rational,
    epsilon: &Rational,
    c_on: &Rational,
    c_off: &Rational,
    opt: &Rational,
) -> Rational {
    let g1 = gamma + epsilon + Rational::one();
    let factor = gamma + epsilon + Rational::from_int(2) * &g1 * beta * epsilon;
    factor * opt + g1 * c_on + c_off
}

/// Volume bookkeeping of the current phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseState {
    pub start_t: Option<u64>,
    /// Volume of the live items at the last repack.
    pub v_total: Rational,
    /// Volume inserted plus departed since the last repack.
    pub v_changed: Rational,
    pub inserted: Rational,
    pub departed: Rational,
    /// Live items right after the last repack, in insertion order.
    #[serde(skip)]
    pub start_items: Vec<ItemSpec>,
}

impl PhaseState {
    fn new() -> Self {
        PhaseState {
            start_t: None,
            v_total: Rational::zero(),
            v_changed: Rational::zero(),
            inserted: Rational::zero(),
            departed: Rational::zero(),
            start_items: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: u64,
    pub op: String,
    pub id: String,
    /// Cost including ghost items.
    pub cost: Rational,
    pub live_cost: Rational,
    /// Lower bound on the optimum for the live items.
    pub lb: Rational,
    pub phase_end: bool,
    pub migrated: Rational,
    /// `None` until something has been inserted.
    pub ledger_factor: Option<Rational>,
    /// Upper bound the cost was checked against, when one applies.
    pub bound: Option<Rational>,
    pub bound_ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl StepDiagnostics {
    /// The compact JSON-lines form.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            t: u64,
            cost: &'a Rational,
            live_cost: &'a Rational,
            lb: &'a Rational,
            phase_end: bool,
            migrated: &'a Rational,
            ledger_factor: Option<&'a Rational>,
        }
        serde_json::to_string(&Line {
            t: self.t,
            cost: &self.cost,
            live_cost: &self.live_cost,
            lb: &self.lb,
            phase_end: self.phase_end,
            migrated: &self.migrated,
            ledger_factor: self.ledger_factor.as_ref(),
        })
        .expect("diagnostics serialize")
    }
}

/// Outcome of a monitor that needs an oracle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum MonitorVerdict {
    Holds { lhs: Rational, rhs: Rational },
    Violated { lhs: Rational, rhs: Rational },
    NotEvaluated { reason: String },
}

impl MonitorVerdict {
    pub fn holds(&self) -> Option<bool> {
        match self {
            MonitorVerdict::Holds { .. } => Some(true),
            MonitorVerdict::Violated { .. } => Some(false),
            MonitorVerdict::NotEvaluated { .. } => None,
        }
    }

    fn compare(lhs: Rational, rhs: Rational) -> Self {
        if lhs <= rhs {
            MonitorVerdict::Holds { lhs, rhs }
        } else {
            MonitorVerdict::Violated { lhs, rhs }
        }
    }
}

pub struct RobustRunner {
    config: RunnerConfig,
    domain: Domain,
    solution: SolutionState,
    online: Box<dyn FlexibleAlgorithm>,
    online_cert: Option<RatioCertificate>,
    phase: PhaseState,
    ledger: MigrationLedger,
    live: BTreeMap<ItemId, ItemKey>,
    epochs: BTreeMap<ItemId, u32>,
    arrival: BTreeMap<ItemKey, u64>,
    next_arrival: u64,
    last_t: Option<u64>,
    last_offline: Option<OfflineResult>,
    violations: Vec<(u64, String)>,
}

impl RobustRunner {
    pub fn new(config: RunnerConfig) -> Result<Self> {
        config.validate()?;
        let domain = config.online.domain();
        let solution = SolutionState::new(domain);
        let online = config.online.flexify(&solution)?;
        let online_cert = online.certificate();
        Ok(RobustRunner {
            config,
            domain,
            solution,
            online,
            online_cert,
            phase: PhaseState::new(),
            ledger: MigrationLedger::new(),
            live: BTreeMap::new(),
            epochs: BTreeMap::new(),
            arrival: BTreeMap::new(),
            next_arrival: 0,
            last_t: None,
            last_offline: None,
            violations: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunnerConfig {
        &self.config
    }

    pub fn epsilon(&self) -> &Rational {
        &self.config.epsilon
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn solution(&self) -> &SolutionState {
        &self.solution
    }

    pub fn ledger(&self) -> &MigrationLedger {
        &self.ledger
    }

    pub fn phase(&self) -> &PhaseState {
        &self.phase
    }

    pub fn online(&self) -> &dyn FlexibleAlgorithm {
        self.online.as_ref()
    }

    pub fn online_certificate(&self) -> Option<&RatioCertificate> {
        self.online_cert.as_ref()
    }

    /// Result of the most recent repack.
    pub fn last_offline(&self) -> Option<&OfflineResult> {
        self.last_offline.as_ref()
    }

    /// Every monitor violation seen so far, with its event time.
    pub fn violations(&self) -> &[(u64, String)] {
        &self.violations
    }

    /// Live items in insertion order.
    pub fn live_items(&self) -> Vec<(ItemKey, ItemSpec)> {
        let mut items: Vec<(u64, ItemKey, ItemSpec)> = self
            .solution
            .live()
            .map(|(k, p)| (self.arrival[k], k.clone(), p.item.clone()))
            .collect();
        items.sort_by_key(|(seq, _, _)| *seq);
        items.into_iter().map(|(_, k, i)| (k, i)).collect()
    }

    pub fn step(&mut self, event: &Event) -> Result<StepDiagnostics> {
        let t = event.t;
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(PackError::Trace {
                    t,
                    reason: format!("time does not increase (previous {prev})"),
                });
            }
        }
        if self.phase.start_t.is_none() {
            self.phase.start_t = Some(t);
        }
        let mut violations = Vec::new();
        let inserted_key = match &event.op {
            EventOp::Insert(item) => {
                self.config.online.accepts(item)?;
                if self.live.contains_key(&item.id) {
                    return Err(PackError::Trace {
                        t,
                        reason: format!("{} inserted while live", item.id),
                    });
                }
                let epoch = self.epochs.get(&item.id).map_or(0, |e| e + 1);
                let key = ItemKey {
                    id: item.id.clone(),
                    epoch,
                };
                let record = self.online.place(item)?;
                self.solution.insert(key.clone(), item.clone(), record)?;
                self.epochs.insert(item.id.clone(), epoch);
                self.live.insert(item.id.clone(), key.clone());
                self.arrival.insert(key.clone(), self.next_arrival);
                self.next_arrival += 1;
                let v = item.size();
                self.ledger.record(LedgerEvent::Inserted, &v)?;
                self.phase.inserted += &v;
                self.phase.v_changed += &v;
                Some(key)
            }
            EventOp::Depart(id) => {
                let key = self.live.remove(id).ok_or_else(|| PackError::Trace {
                    t,
                    reason: format!("{id} departs but is not live"),
                })?;
                let v = self.solution.get(&key).expect("live items are placed").size.clone();
                self.solution.depart(&key)?;
                self.ledger.record(LedgerEvent::Departed, &v)?;
                self.phase.departed += &v;
                self.phase.v_changed += &v;
                None
            }
        };
        self.last_t = Some(t);

        let threshold = &self.config.epsilon * &self.phase.v_total;
        let phase_end = self.phase.v_changed > threshold;
        let mut migrated = Rational::zero();
        let bound;
        if phase_end {
            migrated = self.end_phase_repack(t, inserted_key.as_ref(), &mut violations)?;
            let offline = self.last_offline.as_ref().expect("just repacked");
            bound = offline
                .volume_certificate
                .as_ref()
                .map(|c| c.bound(&self.phase.v_total));
        } else {
            bound = self.online_cert.as_ref().map(|c| {
                &self.online.base_cost() + c.bound(self.online.placed_volume())
            });
            if self.config.check {
                self.check_mid_phase(inserted_key.as_ref(), &mut violations);
            }
        }
        let cost = self.solution.cost().clone();
        let bound_ok = bound.as_ref().map(|b| {
            if phase_end {
                let cert = self.last_offline.as_ref().and_then(|o| o.volume_certificate.as_ref());
                cert.is_some_and(|c| c.holds(&cost, &self.phase.v_total))
            } else {
                let cert = self.online_cert.as_ref().expect("bound implies certificate");
                let growth = self.online.cost() - self.online.base_cost();
                cost <= *b && cert.holds(&growth, self.online.placed_volume())
            }
        });
        if self.config.check {
            self.check_common(&mut violations);
            if bound_ok == Some(false) {
                violations.push(format!(
                    "cost {cost} (structural {}) exceeds bound {}",
                    self.online.cost(),
                    bound.as_ref().expect("checked")
                ));
            }
        }
        let live_items: Vec<&ItemSpec> = self.solution.live().map(|(_, p)| &p.item).collect();
        let lb = lower_bound_with_volume(&live_items, self.domain, self.solution.live_volume().clone());
        for v in &violations {
            self.violations.push((t, v.clone()));
        }
        Ok(StepDiagnostics {
            t,
            op: event.op_name().into(),
            id: event.id().to_string(),
            live_cost: self.solution.live_cost(),
            cost,
            lb,
            phase_end,
            migrated,
            ledger_factor: self.ledger.factor().ok(),
            bound,
            bound_ok,
            violations,
        })
    }

    /// Drops ghosts, repacks the live items offline and starts a new phase.
    /// Returns the migrated volume: the items that existed before this event
    /// and moved.
    fn end_phase_repack(&mut self, t: u64, just_inserted: Option<&ItemKey>, violations: &mut Vec<String>) -> Result<Rational> {
        let mut previous = self.solution.clone();
        previous.drop_ghosts();
        let items = self.live_items();
        let result = self
            .config
            .offline
            .repack(&items, self.domain, &self.config.online)
            .map_err(|e| PackError::Offline(format!("at t={t}: {e}")))?;
        let mut migrated = Rational::zero();
        for (key, placed) in result.solution.iter() {
            if Some(key) == just_inserted {
                continue;
            }
            let before = previous.get(key).ok_or_else(|| PackError::Offline(format!("repack invented {key}")))?;
            if !before.record.same_position(&placed.record) {
                migrated += &placed.item.size();
            }
        }
        if result.solution.len() != items.len() {
            return Err(PackError::Offline(format!("repack at t={t} lost items")));
        }
        self.ledger.record(LedgerEvent::Migrated, &migrated)?;
        let record = PhaseRecord {
            start_t: self.phase.start_t.unwrap_or(t),
            end_t: t,
            start_volume: self.phase.v_total.clone(),
            inserted: self.phase.inserted.clone(),
            departed: self.phase.departed.clone(),
            migrated: migrated.clone(),
        };
        if self.config.check {
            let allowed = self.migration_factor_bound() * (&record.inserted + &record.departed);
            if migrated > allowed {
                violations.push(format!("phase migrated {migrated} > {allowed}"));
            }
            let report = validate_packing(&result.solution);
            if !report.is_valid() {
                violations.push(format!("offline solution invalid: {report:?}"));
            }
        }
        self.ledger.phases.push(record);
        self.solution = result.solution.clone();
        self.phase = PhaseState {
            start_t: Some(t),
            v_total: items.iter().map(|(_, i)| i.size()).sum(),
            v_changed: Rational::zero(),
            inserted: Rational::zero(),
            departed: Rational::zero(),
            start_items: items.into_iter().map(|(_, i)| i).collect(),
        };
        self.online = self.config.online.flexify(&self.solution)?;
        self.last_offline = Some(result);
        Ok(migrated)
    }

    /// `1/epsilon + 1`.
    pub fn migration_factor_bound(&self) -> Rational {
        self.config.epsilon.recip() + Rational::one()
    }

    fn check_mid_phase(&self, inserted: Option<&ItemKey>, violations: &mut Vec<String>) {
        let eps = &self.config.epsilon;
        if self.phase.v_changed > eps * &self.phase.v_total {
            violations.push("phase continued past its end".into());
        }
        let live_vol = self.solution.live_volume();
        let floor = (Rational::one() - eps) * &self.phase.v_total;
        if *live_vol < floor {
            violations.push(format!("live volume {live_vol} below {floor}"));
        }
        if let Some(key) = inserted {
            let report = validate_placement(&self.solution, key);
            if !report.is_valid() {
                violations.push(format!("placement of {key} invalid: {report:?}"));
            }
        }
        if self.online.cost() < *self.solution.cost() {
            violations.push(format!(
                "structural cost {} below solution cost {}",
                self.online.cost(),
                self.solution.cost()
            ));
        }
        for v in self.online.audit() {
            violations.push(format!("{}: {v}", self.online.name()));
        }
    }

    fn check_common(&self, violations: &mut Vec<String>) {
        let recomputed = self.solution.recompute_cost();
        if recomputed != *self.solution.cost() {
            violations.push(format!("cached cost {} != recomputed {recomputed}", self.solution.cost()));
        }
        let churn = &self.ledger.inserted_vol + &self.ledger.departed_vol;
        let allowed = self.migration_factor_bound() * churn;
        if self.ledger.migrated_vol > allowed {
            violations.push(format!("migrated {} > {allowed}", self.ledger.migrated_vol));
        }
    }

    /// Checks that the optimum at the start of the phase is at most the
    /// current optimum plus `beta * epsilon * V_total + c_on`, using `opt` as
    /// the exact oracle.
    pub fn monitor_claim_opt_tau(&self, opt: impl Fn(&[ItemSpec]) -> Result<Rational>) -> MonitorVerdict {
        let Some(cert) = &self.online_cert else {
            return MonitorVerdict::NotEvaluated {
                reason: "online algorithm has no certificate".into(),
            };
        };
        let live: Vec<ItemSpec> = self.live_items().into_iter().map(|(_, i)| i).collect();
        let (tau, now) = match (opt(&self.phase.start_items), opt(&live)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return MonitorVerdict::NotEvaluated { reason: e.to_string() },
        };
        let rhs = now + &cert.beta * &self.config.epsilon * &self.phase.v_total + &cert.additive;
        MonitorVerdict::compare(tau, rhs)
    }

    /// Full validation of the current solution, ghosts included.
    pub fn validate(&self) -> crate::geometry::ValidityReport {
        validate_packing(&self.solution)
    }
}
