//! Flexible online algorithms: the common interface and the selector used by
//! configuration files.
//!
//! A flexible algorithm extends an existing solution without touching any of
//! its placements. Its certificate `(beta, additive)` bounds the growth of its
//! structural cost over the solution it was started on:
//! `cost - base_cost <= beta * placed_volume + additive`.

use serde::{Deserialize, Serialize};

use crate::bins::slots::SlotPacker;
use crate::bins::vector::VectorFirstFit;
use crate::error::{PackError, Result};
use crate::model::{Domain, ItemKind, ItemSpec, PlacementRecord, SolutionState};
use crate::rational::Rational;
use crate::shelf::{HypercubeStrip, ProjectedStrip, ShelfStrip};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioCertificate {
    pub beta: Rational,
    pub additive: Rational,
    /// The bound holds with `<` instead of `<=`.
    pub strict: bool,
}

impl RatioCertificate {
    pub fn new(beta: Rational, additive: Rational) -> Self {
        RatioCertificate {
            beta,
            additive,
            strict: false,
        }
    }

    pub fn bound(&self, volume: &Rational) -> Rational {
        &self.beta * volume + &self.additive
    }

    /// Whether `growth` respects the certificate for `volume`. A strict
    /// certificate is only strict once `growth` exceeds the additive term.
    pub fn holds(&self, growth: &Rational, volume: &Rational) -> bool {
        let bound = self.bound(volume);
        if self.strict && *growth > self.additive {
            *growth < bound
        } else {
            *growth <= bound
        }
    }
}

pub trait FlexibleAlgorithm: Send {
    fn name(&self) -> String;

    fn domain(&self) -> Domain;

    fn place(&mut self, item: &ItemSpec) -> Result<PlacementRecord>;

    /// Structural cost including the solution this run was started on.
    fn cost(&self) -> Rational;

    /// Cost of the solution this run was started on.
    fn base_cost(&self) -> Rational;

    /// Total size of items placed by this run.
    fn placed_volume(&self) -> &Rational;

    fn certificate(&self) -> Option<RatioCertificate>;

    /// Structural invariant violations; empty when healthy.
    fn audit(&self) -> Vec<String>;

    /// Whether the certified ratio currently holds. `None` when uncertified.
    fn ratio_holds(&self) -> Option<bool> {
        let cert = self.certificate()?;
        let growth = self.cost() - self.base_cost();
        Some(cert.holds(&growth, self.placed_volume()))
    }
}

/// Selects a flexible online algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum OnlineAlgorithm {
    /// Two-dimensional shelf strip packing.
    #[serde(rename = "shelf-2d")]
    Shelf2d,
    /// d-dimensional strip packing; each shelf holds a (d-1)-dimensional
    /// slot bin.
    ProjectedStrip { d: usize },
    /// Hypercube strip packing with a slot grid per shelf.
    HypercubeStrip { d: usize },
    /// Slot-splitting bin packing for rectangles (d = 2) and
    /// hyperrectangles.
    Slots { d: usize },
    /// Slot-splitting bin packing restricted to hypercubes.
    HypercubeSlots { d: usize },
    /// First fit for vector packing.
    VectorFirstFit { d: usize },
}

impl OnlineAlgorithm {
    pub fn name(&self) -> String {
        match self {
            OnlineAlgorithm::Shelf2d => "shelf-2d".into(),
            OnlineAlgorithm::ProjectedStrip { d } => format!("projected-strip-{d}d"),
            OnlineAlgorithm::HypercubeStrip { d } => format!("hypercube-strip-{d}d"),
            OnlineAlgorithm::Slots { d } => format!("slots-{d}d"),
            OnlineAlgorithm::HypercubeSlots { d } => format!("hypercube-slots-{d}d"),
            OnlineAlgorithm::VectorFirstFit { d } => format!("vector-first-fit-{d}d"),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            OnlineAlgorithm::Shelf2d => 2,
            OnlineAlgorithm::ProjectedStrip { d }
            | OnlineAlgorithm::HypercubeStrip { d }
            | OnlineAlgorithm::Slots { d }
            | OnlineAlgorithm::HypercubeSlots { d }
            | OnlineAlgorithm::VectorFirstFit { d } => d,
        }
    }

    pub fn domain(&self) -> Domain {
        let d = self.dim();
        match self {
            OnlineAlgorithm::Shelf2d
            | OnlineAlgorithm::ProjectedStrip { .. }
            | OnlineAlgorithm::HypercubeStrip { .. } => Domain::Strip { d },
            OnlineAlgorithm::Slots { .. } | OnlineAlgorithm::HypercubeSlots { .. } => Domain::Bins { d },
            OnlineAlgorithm::VectorFirstFit { .. } => Domain::Vectors { d },
        }
    }

    fn check_dim(&self) -> Result<()> {
        let (d, min) = match *self {
            OnlineAlgorithm::Shelf2d => return Ok(()),
            OnlineAlgorithm::ProjectedStrip { d } | OnlineAlgorithm::HypercubeStrip { d } => (d, 2),
            OnlineAlgorithm::Slots { d }
            | OnlineAlgorithm::HypercubeSlots { d }
            | OnlineAlgorithm::VectorFirstFit { d } => (d, 1),
        };
        if d < min {
            return Err(PackError::Config(format!("{} needs d >= {min}", self.name())));
        }
        Ok(())
    }

    /// Certificate of a fresh run, if one is proven for this configuration.
    pub fn certificate(&self) -> Option<RatioCertificate> {
        self.fresh().ok()?.certificate()
    }

    /// Checks that an item has a kind and dimension this algorithm packs.
    pub fn accepts(&self, item: &ItemSpec) -> Result<()> {
        let unsupported = || PackError::Unsupported {
            kind: format!("{}({}d)", item.kind.name(), item.dim()),
            algorithm: self.name(),
        };
        let kind_ok = match (self, &item.kind) {
            (OnlineAlgorithm::Shelf2d, ItemKind::Rect2d { .. }) => true,
            (OnlineAlgorithm::Shelf2d, _) => false,
            (OnlineAlgorithm::HypercubeStrip { .. }, ItemKind::Hypercube { .. }) => true,
            (OnlineAlgorithm::HypercubeStrip { .. }, _) => false,
            (OnlineAlgorithm::HypercubeSlots { .. }, ItemKind::Hypercube { .. }) => true,
            (OnlineAlgorithm::HypercubeSlots { .. }, _) => false,
            (OnlineAlgorithm::VectorFirstFit { .. }, ItemKind::Vector { .. }) => true,
            (OnlineAlgorithm::VectorFirstFit { .. }, _) => false,
            (_, ItemKind::Vector { .. }) => false,
            _ => true,
        };
        if !kind_ok || item.dim() != self.dim() {
            return Err(unsupported());
        }
        item.validate()
    }

    pub fn fresh(&self) -> Result<Box<dyn FlexibleAlgorithm>> {
        self.flexify(&SolutionState::new(self.domain()))
    }

    /// Starts a run on top of `prev`. The run never modifies `prev`'s
    /// placements: strips grow above its height, bin algorithms open bins
    /// after its highest index.
    pub fn flexify(&self, prev: &SolutionState) -> Result<Box<dyn FlexibleAlgorithm>> {
        self.check_dim()?;
        if prev.domain() != self.domain() {
            return Err(PackError::Config(format!(
                "{} cannot extend a {:?} solution",
                self.name(),
                prev.domain()
            )));
        }
        Ok(match *self {
            OnlineAlgorithm::Shelf2d => Box::new(ShelfStrip::on_top_of(prev)),
            OnlineAlgorithm::ProjectedStrip { d } => Box::new(ProjectedStrip::on_top_of(prev, d)),
            OnlineAlgorithm::HypercubeStrip { d } => Box::new(HypercubeStrip::on_top_of(prev, d)),
            OnlineAlgorithm::Slots { d } => Box::new(SlotPacker::after(prev, d, false)),
            OnlineAlgorithm::HypercubeSlots { d } => Box::new(SlotPacker::after(prev, d, true)),
            OnlineAlgorithm::VectorFirstFit { d } => Box::new(VectorFirstFit::after(prev, d)),
        })
    }
}

/// The packing problems a run can be configured for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Strip2d,
    StripD,
    StripHypercube,
    Bin2d,
    BinD,
    BinHypercube,
    Vector,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 7] = [
        ProblemKind::Strip2d,
        ProblemKind::StripD,
        ProblemKind::StripHypercube,
        ProblemKind::Bin2d,
        ProblemKind::BinD,
        ProblemKind::BinHypercube,
        ProblemKind::Vector,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Strip2d => "strip2d",
            ProblemKind::StripD => "strip-d",
            ProblemKind::StripHypercube => "strip-hypercube",
            ProblemKind::Bin2d => "bin2d",
            ProblemKind::BinD => "bin-d",
            ProblemKind::BinHypercube => "bin-hypercube",
            ProblemKind::Vector => "vector",
        }
    }

    /// Effective dimension; the 2-D problems ignore `d`.
    pub fn dim(&self, d: usize) -> usize {
        match self {
            ProblemKind::Strip2d | ProblemKind::Bin2d => 2,
            _ => d,
        }
    }

    pub fn domain(&self, d: usize) -> Domain {
        let d = self.dim(d);
        match self {
            ProblemKind::Strip2d | ProblemKind::StripD | ProblemKind::StripHypercube => Domain::Strip { d },
            ProblemKind::Bin2d | ProblemKind::BinD | ProblemKind::BinHypercube => Domain::Bins { d },
            ProblemKind::Vector => Domain::Vectors { d },
        }
    }

    pub fn default_online(&self, d: usize) -> OnlineAlgorithm {
        let d = self.dim(d);
        match self {
            ProblemKind::Strip2d => OnlineAlgorithm::Shelf2d,
            ProblemKind::StripD => OnlineAlgorithm::ProjectedStrip { d },
            ProblemKind::StripHypercube => OnlineAlgorithm::HypercubeStrip { d },
            ProblemKind::Bin2d | ProblemKind::BinD => OnlineAlgorithm::Slots { d },
            ProblemKind::BinHypercube => OnlineAlgorithm::HypercubeSlots { d },
            ProblemKind::Vector => OnlineAlgorithm::VectorFirstFit { d },
        }
    }

    /// Whether `alg` solves this problem.
    pub fn pairs_with(&self, alg: &OnlineAlgorithm, d: usize) -> bool {
        let d = self.dim(d);
        if alg.domain() != self.domain(d) {
            return false;
        }
        match self {
            ProblemKind::Strip2d => matches!(alg, OnlineAlgorithm::Shelf2d | OnlineAlgorithm::ProjectedStrip { .. }),
            ProblemKind::StripD => matches!(alg, OnlineAlgorithm::ProjectedStrip { .. }),
            ProblemKind::StripHypercube => true,
            ProblemKind::Bin2d | ProblemKind::BinD => matches!(alg, OnlineAlgorithm::Slots { .. }),
            ProblemKind::BinHypercube | ProblemKind::Vector => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificates() {
        let cert = |a: OnlineAlgorithm| a.certificate().map(|c| (c.beta.to_string(), c.additive.to_string()));
        assert_eq!(cert(OnlineAlgorithm::Shelf2d), Some(("4/1".into(), "16/1".into())));
        assert_eq!(cert(OnlineAlgorithm::Slots { d: 2 }), Some(("48/5".into(), "4/1".into())));
        assert_eq!(cert(OnlineAlgorithm::Slots { d: 3 }), None);
        assert_eq!(cert(OnlineAlgorithm::HypercubeSlots { d: 2 }), Some(("16/3".into(), "1/1".into())));
        assert_eq!(cert(OnlineAlgorithm::HypercubeSlots { d: 3 }), Some(("64/7".into(), "1/1".into())));
        assert_eq!(cert(OnlineAlgorithm::HypercubeStrip { d: 3 }), Some(("8/1".into(), "2/1".into())));
        assert_eq!(cert(OnlineAlgorithm::VectorFirstFit { d: 5 }), Some(("10/1".into(), "1/1".into())));
        assert!(OnlineAlgorithm::VectorFirstFit { d: 5 }.certificate().unwrap().strict);
        assert_eq!(cert(OnlineAlgorithm::ProjectedStrip { d: 2 }), Some(("8/1".into(), "4/1".into())));
        assert_eq!(cert(OnlineAlgorithm::ProjectedStrip { d: 3 }), Some(("96/5".into(), "8/1".into())));
        assert_eq!(cert(OnlineAlgorithm::ProjectedStrip { d: 4 }), None);
    }

    #[test]
    fn pairing_and_acceptance() {
        let rect = ItemSpec::rect2d("r", Rational::new(1, 2), Rational::new(1, 3));
        let cube = ItemSpec::hypercube("c", Rational::new(1, 2), 2);
        let vec2 = ItemSpec::vector("v", vec![Rational::new(1, 2), Rational::zero()]);
        assert!(OnlineAlgorithm::Shelf2d.accepts(&rect).is_ok());
        assert!(OnlineAlgorithm::Shelf2d.accepts(&cube).is_err());
        assert!(OnlineAlgorithm::Slots { d: 2 }.accepts(&cube).is_ok());
        assert!(OnlineAlgorithm::Slots { d: 3 }.accepts(&rect).is_err());
        assert!(OnlineAlgorithm::VectorFirstFit { d: 2 }.accepts(&vec2).is_ok());
        assert!(OnlineAlgorithm::Slots { d: 2 }.accepts(&vec2).is_err());
        assert!(ProblemKind::Bin2d.pairs_with(&OnlineAlgorithm::Slots { d: 2 }, 7));
        assert!(!ProblemKind::Bin2d.pairs_with(&OnlineAlgorithm::Shelf2d, 2));
        assert!(OnlineAlgorithm::HypercubeStrip { d: 1 }.fresh().is_err());
    }
}
