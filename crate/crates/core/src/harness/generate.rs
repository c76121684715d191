//! Seeded trace generators.
//!
//! Sizes are drawn as floats and snapped to multiples of 1/1024, so every
//! generated item is exact and the same seed always yields the same trace.

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::model::{Event, ItemSpec};
use crate::online::ProblemKind;
use crate::rational::Rational;
use crate::trace::Trace;

/// Resolution of generated sizes.
pub const GRID: i64 = 1024;

fn default_d() -> usize {
    2
}

fn default_min() -> f64 {
    1.0 / GRID as f64
}

fn default_max() -> f64 {
    1.0
}

fn default_base_volume() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub problem: ProblemKind,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(flatten)]
    pub pattern: Pattern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum Pattern {
    /// `n` insertions with sizes uniform in `[min_size, max_size]`.
    Uniform {
        n: usize,
        #[serde(default = "default_min")]
        min_size: f64,
        #[serde(default = "default_max")]
        max_size: f64,
    },
    /// `n` insertions with sizes `u^exponent` for uniform `u`.
    Powerlaw { n: usize, exponent: f64 },
    /// `n` events; each departs a random live item with probability
    /// `depart_prob`, otherwise inserts a new one.
    Churn {
        n: usize,
        depart_prob: f64,
        #[serde(default = "default_min")]
        min_size: f64,
        #[serde(default = "default_max")]
        max_size: f64,
    },
    /// Builds up `base_volume`, then alternates departure and insertion
    /// bursts of items with side `burst_size`, each burst moving a little
    /// more than `epsilon * base_volume`.
    AdversarialPhaseBurst {
        n: usize,
        epsilon: f64,
        #[serde(default = "default_base_volume")]
        base_volume: f64,
        burst_size: f64,
    },
}

impl Pattern {
    pub fn len(&self) -> usize {
        match *self {
            Pattern::Uniform { n, .. }
            | Pattern::Powerlaw { n, .. }
            | Pattern::Churn { n, .. }
            | Pattern::AdversarialPhaseBurst { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl GeneratorSpec {
    pub fn new(problem: ProblemKind, d: usize, pattern: Pattern) -> Self {
        GeneratorSpec { problem, d, pattern }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PackError::Config(msg.to_string()));
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if self.problem.dim(self.d) == 0 {
            return bad("dimension must be positive");
        }
        match self.pattern {
            Pattern::Uniform { min_size, max_size, .. } | Pattern::Churn { min_size, max_size, .. } => {
                if !(in_unit(min_size) && in_unit(max_size) && min_size <= max_size) {
                    return bad("sizes must satisfy 0 < min_size <= max_size <= 1");
                }
            }
            Pattern::Powerlaw { exponent, .. } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return bad("exponent must be positive");
                }
            }
            Pattern::AdversarialPhaseBurst {
                epsilon,
                base_volume,
                burst_size,
                ..
            } => {
                if !(epsilon > 0.0 && epsilon <= 0.5 && base_volume > 0.0 && in_unit(burst_size)) {
                    return bad("burst needs 0 < epsilon <= 1/2, base_volume > 0, burst_size in (0,1]");
                }
            }
        }
        if let Pattern::Churn { depart_prob, .. } = self.pattern {
            if !(0.0..=1.0).contains(&depart_prob) {
                return bad("depart_prob must lie in [0,1]");
            }
        }
        Ok(())
    }
}

/// Snaps `x` to the grid, keeping it in `[1/GRID, 1]`.
fn snap(x: f64) -> Rational {
    let k = (x * GRID as f64).round().clamp(1.0, GRID as f64) as i64;
    Rational::new(k, GRID)
}

struct ItemFactory {
    problem: ProblemKind,
    d: usize,
    next: usize,
}

impl ItemFactory {
    fn fresh_id(&mut self) -> String {
        let id = format!("i{}", self.next);
        self.next += 1;
        id
    }

    fn make(&mut self, mut side: impl FnMut() -> Rational) -> ItemSpec {
        let id = self.fresh_id();
        match self.problem {
            ProblemKind::Strip2d | ProblemKind::Bin2d => ItemSpec::rect2d(id, side(), side()),
            ProblemKind::StripD | ProblemKind::BinD => ItemSpec::hyperrect(id, (0..self.d).map(|_| side()).collect()),
            ProblemKind::StripHypercube | ProblemKind::BinHypercube => ItemSpec::hypercube(id, side(), self.d),
            ProblemKind::Vector => ItemSpec::vector(id, (0..self.d).map(|_| side()).collect()),
        }
    }
}

/// Deterministic trace for `spec` and `seed`.
pub fn generate_trace(spec: &GeneratorSpec, seed: u64) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factory = ItemFactory {
        problem: spec.problem,
        d: spec.problem.dim(spec.d),
        next: 0,
    };
    let mut events = Vec::new();
    match spec.pattern {
        Pattern::Uniform { n, min_size, max_size } => {
            for t in 0..n {
                let item = factory.make(|| snap(rng.gen_range(min_size..=max_size)));
                events.push(Event::insert(t as u64, item));
            }
        }
        Pattern::Powerlaw { n, exponent } => {
            for t in 0..n {
                let item = factory.make(|| snap(rng.gen::<f64>().powf(exponent)));
                events.push(Event::insert(t as u64, item));
            }
        }
        Pattern::Churn {
            n,
            depart_prob,
            min_size,
            max_size,
        } => {
            let mut live: Vec<String> = Vec::new();
            for t in 0..n {
                if !live.is_empty() && rng.gen_bool(depart_prob) {
                    let idx = (0..live.len()).choose(&mut rng).expect("non-empty");
                    let id = live.swap_remove(idx);
                    events.push(Event::depart(t as u64, id));
                } else {
                    let item = factory.make(|| snap(rng.gen_range(min_size..=max_size)));
                    live.push(item.id.0.clone());
                    events.push(Event::insert(t as u64, item));
                }
            }
        }
        Pattern::AdversarialPhaseBurst {
            n,
            epsilon,
            base_volume,
            burst_size,
        } => {
            let side = snap(burst_size);
            let item_volume = factory.make(|| side.clone()).size().to_f64();
            factory.next = 0;
            let burst_len = ((epsilon * base_volume) / item_volume).floor() as usize + 1;
            let mut live: Vec<String> = Vec::new();
            let mut volume = 0.0;
            let mut t = 0u64;
            while events.len() < n && volume < base_volume {
                let item = factory.make(|| snap(rng.gen_range(0.25..=1.0)));
                volume += item.size().to_f64();
                live.push(item.id.0.clone());
                events.push(Event::insert(t, item));
                t += 1;
            }
            let mut departing = true;
            while events.len() < n {
                for _ in 0..burst_len {
                    if events.len() >= n {
                        break;
                    }
                    if departing && !live.is_empty() {
                        let idx = (0..live.len()).choose(&mut rng).expect("non-empty");
                        events.push(Event::depart(t, live.swap_remove(idx)));
                    } else {
                        let item = factory.make(|| side.clone());
                        live.push(item.id.0.clone());
                        events.push(Event::insert(t, item));
                    }
                    t += 1;
                }
                departing = !departing;
            }
        }
    }
    let trace = Trace::new(events);
    trace.validate()?;
    Ok(trace)
}

/// Start times of the bursts of an adversarial trace: the first event after
/// the build-up and every `burst_len` events after it.
pub fn burst_starts(spec: &GeneratorSpec, trace: &Trace) -> Vec<usize> {
    let Pattern::AdversarialPhaseBurst {
        epsilon,
        base_volume,
        burst_size,
        ..
    } = spec.pattern
    else {
        return Vec::new();
    };
    let mut factory = ItemFactory {
        problem: spec.problem,
        d: spec.problem.dim(spec.d),
        next: 0,
    };
    let side = snap(burst_size);
    let item_volume = factory.make(|| side.clone()).size().to_f64();
    let burst_len = ((epsilon * base_volume) / item_volume).floor() as usize + 1;
    let mut volume = 0.0;
    let mut first = 0;
    for (i, e) in trace.events.iter().enumerate() {
        if volume >= base_volume {
            first = i;
            break;
        }
        if let crate::model::EventOp::Insert(item) = &e.op {
            volume += item.size().to_f64();
        }
        first = i + 1;
    }
    (first..trace.len()).step_by(burst_len).collect()
}
