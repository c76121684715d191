//! Axis-aligned boxes and the packing-validity oracle.
//!
//! Interiors must be disjoint; touching faces are fine.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{PackError, Result};
use crate::model::{Domain, ItemKey, Placed, SolutionState};
use crate::rational::{sum_le, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HyperBox {
    pub origin: Vec<Rational>,
    pub sides: Vec<Rational>,
}

impl HyperBox {
    pub fn new(origin: Vec<Rational>, sides: Vec<Rational>) -> Self {
        debug_assert_eq!(origin.len(), sides.len());
        HyperBox { origin, sides }
    }

    pub fn unit(d: usize) -> Self {
        HyperBox {
            origin: vec![Rational::zero(); d],
            sides: vec![Rational::one(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn end(&self, k: usize) -> Rational {
        &self.origin[k] + &self.sides[k]
    }
}

fn same_dim(a: &HyperBox, b: &HyperBox) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(PackError::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// True iff the interiors of `a` and `b` do not intersect.
pub fn boxes_disjoint(a: &HyperBox, b: &HyperBox) -> Result<bool> {
    same_dim(a, b)?;
    Ok((0..a.dim()).any(|k| {
        sum_le(&a.origin[k], &a.sides[k], &b.origin[k]) || sum_le(&b.origin[k], &b.sides[k], &a.origin[k])
    }))
}

/// Closed containment of `inner` in `outer`.
pub fn contains(outer: &HyperBox, inner: &HyperBox) -> Result<bool> {
    same_dim(outer, inner)?;
    Ok((0..outer.dim()).all(|k| outer.origin[k] <= inner.origin[k] && inner.end(k) <= outer.end(k)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Overload {
    pub bin: usize,
    pub dim: usize,
    pub load: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub overlaps: Vec<(ItemKey, ItemKey)>,
    pub out_of_bounds: Vec<ItemKey>,
    pub overloads: Vec<Overload>,
    pub malformed: Vec<(ItemKey, String)>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.overlaps.is_empty()
            && self.out_of_bounds.is_empty()
            && self.overloads.is_empty()
            && self.malformed.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.overlaps.len() + self.out_of_bounds.len() + self.overloads.len() + self.malformed.len()
    }

    fn merge(&mut self, other: ValidityReport) {
        self.overlaps.extend(other.overlaps);
        self.out_of_bounds.extend(other.out_of_bounds);
        self.overloads.extend(other.overloads);
        self.malformed.extend(other.malformed);
    }
}

/// The box an item occupies, or why it has none.
fn placed_box(domain: Domain, placed: &Placed) -> std::result::Result<HyperBox, String> {
    let d = domain.dim();
    let sides = placed
        .item
        .sides()
        .ok_or_else(|| "vector item in a geometric domain".to_string())?;
    if sides.len() != d {
        return Err(format!("item has {} sides, domain has {d}", sides.len()));
    }
    if placed.record.offset.len() != d {
        return Err(format!("offset has {} coordinates, domain has {d}", placed.record.offset.len()));
    }
    match (domain, placed.record.bin) {
        (Domain::Strip { .. }, Some(_)) => return Err("strip placement names a bin".into()),
        (Domain::Bins { .. }, None) => return Err("bin placement without bin index".into()),
        _ => {}
    }
    Ok(HyperBox::new(placed.record.offset.clone(), sides))
}

/// Whether the box lies in a unit bin (or, for strips, in the unit
/// cross-section above height 0).
fn in_bounds(domain: Domain, b: &HyperBox) -> bool {
    let d = b.dim();
    let one = Rational::one();
    (0..d).all(|k| {
        if b.origin[k].is_negative() {
            return false;
        }
        let unbounded = domain.is_strip() && k == d - 1;
        unbounded || b.end(k) <= one
    })
}

/// Checks a whole solution: pairwise overlaps within each bin (or the
/// strip), containment, and per-dimension loads for vector bins. Ghost items
/// are checked like live ones.
pub fn validate_packing(s: &SolutionState) -> ValidityReport {
    let domain = s.domain();
    if let Domain::Vectors { d } = domain {
        return validate_vectors(s.iter(), d);
    }
    let mut report = ValidityReport::default();
    let mut groups: BTreeMap<Option<usize>, Vec<(&ItemKey, HyperBox)>> = BTreeMap::new();
    for (key, placed) in s.iter() {
        match placed_box(domain, placed) {
            Ok(b) => {
                if !in_bounds(domain, &b) {
                    report.out_of_bounds.push(key.clone());
                }
                groups.entry(placed.record.bin).or_default().push((key, b));
            }
            Err(reason) => report.malformed.push((key.clone(), reason)),
        }
    }
    // Sweep along the last axis: once a box starts at or above the end of
    // `a`, so does every later one.
    let last = domain.dim() - 1;
    for members in groups.values_mut() {
        members.sort_by(|(ka, a), (kb, b)| a.origin[last].cmp(&b.origin[last]).then(ka.cmp(kb)));
        for (i, (ka, a)) in members.iter().enumerate() {
            let top = a.end(last);
            for (kb, b) in members[i + 1..].iter().take_while(|(_, b)| b.origin[last] < top) {
                if !boxes_disjoint(a, b).expect("same dimension") {
                    let pair = if ka <= kb { (ka, kb) } else { (kb, ka) };
                    report.overlaps.push(((*pair.0).clone(), (*pair.1).clone()));
                }
            }
        }
    }
    report.overlaps.sort();
    report
}

/// Checks one item against everything else in its bin. Equivalent to
/// [`validate_packing`] when the rest of the solution was already valid.
pub fn validate_placement(s: &SolutionState, key: &ItemKey) -> ValidityReport {
    let domain = s.domain();
    let mut report = ValidityReport::default();
    let Some(placed) = s.get(key) else {
        report.malformed.push((key.clone(), "not placed".into()));
        return report;
    };
    if let Domain::Vectors { d } = domain {
        let bin = placed.record.bin;
        let same_bin = s.iter().filter(|(_, p)| p.record.bin == bin);
        report.merge(validate_vectors(same_bin, d));
        return report;
    }
    let b = match placed_box(domain, placed) {
        Ok(b) => b,
        Err(reason) => {
            report.malformed.push((key.clone(), reason));
            return report;
        }
    };
    if !in_bounds(domain, &b) {
        report.out_of_bounds.push(key.clone());
    }
    for (other_key, other) in s.iter() {
        if other_key == key || other.record.bin != placed.record.bin {
            continue;
        }
        if let Ok(ob) = placed_box(domain, other) {
            if !boxes_disjoint(&b, &ob).unwrap_or(false) {
                report.overlaps.push((key.clone(), other_key.clone()));
            }
        }
    }
    report
}

fn validate_vectors<'a>(items: impl Iterator<Item = (&'a ItemKey, &'a Placed)>, d: usize) -> ValidityReport {
    let mut report = ValidityReport::default();
    let mut loads: BTreeMap<usize, Vec<Rational>> = BTreeMap::new();
    for (key, placed) in items {
        let crate::model::ItemKind::Vector { components } = &placed.item.kind else {
            report.malformed.push((key.clone(), "geometric item in a vector domain".into()));
            continue;
        };
        if components.len() != d {
            report
                .malformed
                .push((key.clone(), format!("vector has {} components, domain has {d}", components.len())));
            continue;
        }
        let Some(bin) = placed.record.bin else {
            report.malformed.push((key.clone(), "vector placement without bin index".into()));
            continue;
        };
        let load = loads.entry(bin).or_insert_with(|| vec![Rational::zero(); d]);
        for (slot, c) in load.iter_mut().zip(components) {
            *slot += c;
        }
    }
    let one = Rational::one();
    for (bin, load) in loads {
        for (dim, l) in load.into_iter().enumerate() {
            if l > one {
                report.overloads.push(Overload { bin, dim, load: l });
            }
        }
    }
    report
}
