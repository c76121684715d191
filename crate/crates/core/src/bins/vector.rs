//! First fit for vector bin packing.

use crate::error::{PackError, Result};
use crate::model::{Domain, ItemKind, ItemSpec, PlacementRecord, SolutionState};
use crate::online::{FlexibleAlgorithm, RatioCertificate};
use crate::rational::Rational;

/// Puts each vector into the lowest-indexed bin of this run where every
/// coordinate stays within 1. Bins of an earlier solution are never used.
#[derive(Clone, Debug)]
pub struct VectorFirstFit {
    d: usize,
    first_bin: usize,
    base_cost: Rational,
    loads: Vec<Vec<Rational>>,
    placed_volume: Rational,
}

impl VectorFirstFit {
    pub fn new(d: usize) -> Self {
        VectorFirstFit {
            d,
            first_bin: 0,
            base_cost: Rational::zero(),
            loads: Vec::new(),
            placed_volume: Rational::zero(),
        }
    }

    pub fn after(prev: &SolutionState, d: usize) -> Self {
        let mut ff = Self::new(d);
        ff.first_bin = prev.max_bin().map_or(0, |b| b + 1);
        ff.base_cost = prev.cost().clone();
        ff
    }

    pub fn loads(&self) -> &[Vec<Rational>] {
        &self.loads
    }
}

impl FlexibleAlgorithm for VectorFirstFit {
    fn name(&self) -> String {
        format!("vector-first-fit-{}d", self.d)
    }

    fn domain(&self) -> Domain {
        Domain::Vectors { d: self.d }
    }

    fn place(&mut self, item: &ItemSpec) -> Result<PlacementRecord> {
        let components = match &item.kind {
            ItemKind::Vector { components } => components,
            other => {
                return Err(PackError::Unsupported {
                    kind: other.name().into(),
                    algorithm: self.name(),
                })
            }
        };
        if components.len() != self.d {
            return Err(PackError::Dimension {
                expected: self.d,
                got: components.len(),
            });
        }
        item.validate()?;
        let one = Rational::one();
        let fits = |load: &Vec<Rational>| load.iter().zip(components).all(|(l, c)| l + c <= one);
        let idx = match self.loads.iter().position(fits) {
            Some(idx) => idx,
            None => {
                self.loads.push(vec![Rational::zero(); self.d]);
                self.loads.len() - 1
            }
        };
        for (l, c) in self.loads[idx].iter_mut().zip(components) {
            *l += c;
        }
        self.placed_volume += &item.size();
        Ok(PlacementRecord::in_bin(self.first_bin + idx, Vec::new()))
    }

    fn cost(&self) -> Rational {
        &self.base_cost + Rational::from(self.loads.len())
    }

    fn base_cost(&self) -> Rational {
        self.base_cost.clone()
    }

    fn placed_volume(&self) -> &Rational {
        &self.placed_volume
    }

    fn certificate(&self) -> Option<RatioCertificate> {
        Some(RatioCertificate {
            beta: Rational::from(2 * self.d),
            additive: Rational::one(),
            strict: true,
        })
    }

    fn audit(&self) -> Vec<String> {
        let one = Rational::one();
        let mut out = Vec::new();
        for (i, load) in self.loads.iter().enumerate() {
            if load.iter().any(|l| *l > one) {
                out.push(format!("bin {} overloaded", self.first_bin + i));
            }
        }
        // Any two bins of the run together exceed 1 in some coordinate.
        for i in 0..self.loads.len() {
            for j in i + 1..self.loads.len() {
                let sum: Rational = self.loads[i].iter().chain(&self.loads[j]).sum();
                if sum <= one {
                    out.push(format!(
                        "bins {} and {} could have been merged",
                        self.first_bin + i,
                        self.first_bin + j
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[&str]) -> ItemSpec {
        ItemSpec::vector("v", xs.iter().map(|x| x.parse().unwrap()).collect())
    }

    #[test]
    fn first_fit_examples() {
        let mut ff = VectorFirstFit::new(2);
        assert_eq!(ff.place(&v(&["0.6", "0.1"])).unwrap().bin, Some(0));
        assert_eq!(ff.place(&v(&["0.6", "0.1"])).unwrap().bin, Some(1));
        assert_eq!(ff.cost(), Rational::from_int(2));
        assert!(ff.ratio_holds().unwrap());

        let mut ff = VectorFirstFit::new(2);
        for _ in 0..3 {
            assert_eq!(ff.place(&v(&["0.3", "0.3"])).unwrap().bin, Some(0));
        }
        assert!(ff.audit().is_empty());
    }

    #[test]
    fn earlier_bins_are_ignored() {
        let mut prev = SolutionState::new(Domain::Vectors { d: 1 });
        for b in 0..7 {
            prev.insert(
                crate::model::ItemKey::new(format!("p{b}"), 0),
                v(&["0.1"]),
                PlacementRecord::in_bin(b, Vec::new()),
            )
            .unwrap();
        }
        let mut ff = VectorFirstFit::after(&prev, 1);
        assert_eq!(ff.place(&v(&["0.1"])).unwrap().bin, Some(7));
        assert_eq!(ff.cost(), Rational::from_int(8));
    }

    #[test]
    fn zero_vectors_use_one_bin() {
        let mut ff = VectorFirstFit::new(3);
        for _ in 0..5 {
            ff.place(&v(&["0", "0", "0"])).unwrap();
        }
        assert_eq!(ff.loads().len(), 1);
        assert!(ff.ratio_holds().unwrap());
    }
}
