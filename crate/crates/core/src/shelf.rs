//! Shelf algorithms for strip packing.
//!
//! Every algorithm here stacks containers ("shelves") of a fixed height per
//! item type. Containers are only ever opened at the current top, so running
//! on top of an existing packing leaves it untouched.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bins::slots::SlotPacker;
use crate::error::{PackError, Result};
use crate::model::{Domain, ItemKind, ItemSpec, PlacementRecord, SolutionState};
use crate::online::{FlexibleAlgorithm, RatioCertificate};
use crate::rational::{size_class, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Container {
    pub kind: u32,
    pub base: Rational,
    pub height: Rational,
    /// Extent used along the stacking direction (or slots used).
    pub fill: Rational,
    pub volume: Rational,
    pub items: usize,
    pub closed: bool,
}

/// Containers stacked from `base` upward.
#[derive(Clone, Debug)]
struct Stack {
    base: Rational,
    top: Rational,
    containers: Vec<Container>,
    active: BTreeMap<u32, usize>,
}

impl Stack {
    fn new(base: Rational) -> Self {
        Stack {
            top: base.clone(),
            base,
            containers: Vec::new(),
            active: BTreeMap::new(),
        }
    }

    fn open(&mut self, kind: u32, height: Rational) -> usize {
        let idx = self.containers.len();
        self.containers.push(Container {
            kind,
            base: self.top.clone(),
            height: height.clone(),
            fill: Rational::zero(),
            volume: Rational::zero(),
            items: 0,
            closed: false,
        });
        self.top += &height;
        self.active.insert(kind, idx);
        idx
    }

    fn close(&mut self, kind: u32) {
        if let Some(idx) = self.active.remove(&kind) {
            self.containers[idx].closed = true;
        }
    }

    fn audit(&self, out: &mut Vec<String>) {
        let mut y = self.base.clone();
        for (i, c) in self.containers.iter().enumerate() {
            if c.base != y {
                out.push(format!("container {i} starts at {} instead of {y}", c.base));
            }
            y = &c.base + &c.height;
        }
        if y != self.top {
            out.push(format!("top {} does not match stacked height {y}", self.top));
        }
        let mut open: BTreeMap<u32, usize> = BTreeMap::new();
        for c in self.containers.iter().filter(|c| !c.closed) {
            *open.entry(c.kind).or_default() += 1;
        }
        for (kind, n) in open {
            if n > 1 {
                out.push(format!("{n} open containers of type {kind}"));
            }
        }
    }

    /// Per type: stored volume is at least a quarter of the stacked height
    /// minus one container.
    fn audit_quarter_fill(&self, out: &mut Vec<String>) {
        let mut per_kind: BTreeMap<u32, (Rational, Rational, Rational)> = BTreeMap::new();
        for c in &self.containers {
            let e = per_kind
                .entry(c.kind)
                .or_insert_with(|| (Rational::zero(), Rational::zero(), c.height.clone()));
            e.0 += &c.volume;
            e.1 += &c.height;
        }
        let quarter = Rational::new(1, 4);
        for (kind, (vol, height, one)) in per_kind {
            let floor = &quarter * &height - one;
            if vol < floor {
                out.push(format!("type {kind}: volume {vol} below {floor}"));
            }
        }
    }
}

fn rect_sides(item: &ItemSpec) -> Result<(Rational, Rational)> {
    match &item.kind {
        ItemKind::Rect2d { w, h } => Ok((w.clone(), h.clone())),
        other => Err(PackError::Unsupported {
            kind: other.name().into(),
            algorithm: "shelf-2d".into(),
        }),
    }
}

fn geometric_sides(item: &ItemSpec, d: usize, algorithm: &str) -> Result<Vec<Rational>> {
    let sides = item.sides().ok_or_else(|| PackError::Unsupported {
        kind: item.kind.name().into(),
        algorithm: algorithm.into(),
    })?;
    if sides.len() != d {
        return Err(PackError::Dimension {
            expected: d,
            got: sides.len(),
        });
    }
    item.validate()?;
    Ok(sides)
}

/// Item type of a rectangle: 0 for wide items (`w >= 1/2`), otherwise the
/// size class of its height.
pub fn sp_classify(w: &Rational, h: &Rational) -> Result<u32> {
    if *w >= Rational::new(1, 2) {
        return Ok(0);
    }
    size_class(h).ok_or_else(|| PackError::InvalidItem {
        id: String::new(),
        reason: format!("height {h} outside (0,1]"),
    })
}

/// Height of a type-`kind` shelf.
pub fn sp_container_height(kind: u32) -> Rational {
    if kind == 0 {
        Rational::one()
    } else {
        Rational::pow2_neg(kind - 1)
    }
}

/// Two-dimensional shelf packing. Wide items are stacked vertically in unit
/// height shelves, the others left to right in shelves of their height class.
#[derive(Clone, Debug)]
pub struct ShelfStrip {
    stack: Stack,
    placed_volume: Rational,
}

impl ShelfStrip {
    pub fn new() -> Self {
        Self::with_base(Rational::zero())
    }

    pub fn with_base(base: Rational) -> Self {
        ShelfStrip {
            stack: Stack::new(base),
            placed_volume: Rational::zero(),
        }
    }

    /// Continues above the highest point of `prev`.
    pub fn on_top_of(prev: &SolutionState) -> Self {
        Self::with_base(prev.cost().clone())
    }

    pub fn top(&self) -> &Rational {
        &self.stack.top
    }

    pub fn containers(&self) -> &[Container] {
        &self.stack.containers
    }
}

impl Default for ShelfStrip {
    fn default() -> Self {
        Self::new()
    }
}

impl FlexibleAlgorithm for ShelfStrip {
    fn name(&self) -> String {
        "shelf-2d".into()
    }

    fn domain(&self) -> Domain {
        Domain::Strip { d: 2 }
    }

    fn place(&mut self, item: &ItemSpec) -> Result<PlacementRecord> {
        item.validate()?;
        let (w, h) = rect_sides(item)?;
        let kind = sp_classify(&w, &h)?;
        let extent = if kind == 0 { h.clone() } else { w.clone() };
        let one = Rational::one();
        let idx = match self.stack.active.get(&kind).copied() {
            Some(idx) if &self.stack.containers[idx].fill + &extent <= one => idx,
            _ => {
                self.stack.close(kind);
                self.stack.open(kind, sp_container_height(kind))
            }
        };
        let c = &mut self.stack.containers[idx];
        let offset = if kind == 0 {
            vec![Rational::zero(), &c.base + &c.fill]
        } else {
            vec![c.fill.clone(), c.base.clone()]
        };
        c.fill += &extent;
        let v = item.size();
        c.volume += &v;
        c.items += 1;
        self.placed_volume += &v;
        Ok(PlacementRecord::in_strip(offset))
    }

    fn cost(&self) -> Rational {
        self.stack.top.clone()
    }

    fn base_cost(&self) -> Rational {
        self.stack.base.clone()
    }

    fn placed_volume(&self) -> &Rational {
        &self.placed_volume
    }

    fn certificate(&self) -> Option<RatioCertificate> {
        Some(RatioCertificate::new(Rational::from_int(4), Rational::from_int(16)))
    }

    fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.stack.audit(&mut out);
        self.stack.audit_quarter_fill(&mut out);
        for (i, c) in self.stack.containers.iter().enumerate() {
            if c.fill > Rational::one() {
                out.push(format!("container {i} overfilled: {}", c.fill));
            }
        }
        out
    }
}

/// Number of slots in a type-`class` hypercube shelf, saturating.
fn hypercube_capacity(class: u32, d: usize) -> u64 {
    let exp = (class as u64 - 1).saturating_mul(d as u64 - 1);
    if exp >= 63 {
        u64::MAX
    } else {
        1u64 << exp
    }
}

/// Grid coordinates of slot `index` in a shelf of class `class`, most
/// significant axis first so that indices run in lexicographic order.
fn slot_coordinates(index: u64, class: u32, d: usize) -> Vec<u64> {
    let bits = class as u64 - 1;
    (0..d - 1)
        .map(|k| {
            let shift = (d - 2 - k) as u64 * bits;
            if shift >= 64 {
                return 0;
            }
            let v = index >> shift;
            if bits >= 64 {
                v
            } else {
                v & ((1u64 << bits) - 1)
            }
        })
        .collect()
}

/// Strip packing of hypercubes: a class-`i` shelf has height `2^-(i-1)` and a
/// grid of cells of that side, filled in lexicographic order.
#[derive(Clone, Debug)]
pub struct HypercubeStrip {
    d: usize,
    stack: Stack,
    placed_volume: Rational,
}

impl HypercubeStrip {
    pub fn new(d: usize) -> Self {
        Self::with_base(d, Rational::zero())
    }

    pub fn with_base(d: usize, base: Rational) -> Self {
        HypercubeStrip {
            d,
            stack: Stack::new(base),
            placed_volume: Rational::zero(),
        }
    }

    pub fn on_top_of(prev: &SolutionState, d: usize) -> Self {
        Self::with_base(d, prev.cost().clone())
    }

    pub fn top(&self) -> &Rational {
        &self.stack.top
    }

    pub fn containers(&self) -> &[Container] {
        &self.stack.containers
    }
}

impl FlexibleAlgorithm for HypercubeStrip {
    fn name(&self) -> String {
        format!("hypercube-strip-{}d", self.d)
    }

    fn domain(&self) -> Domain {
        Domain::Strip { d: self.d }
    }

    fn place(&mut self, item: &ItemSpec) -> Result<PlacementRecord> {
        let side = match &item.kind {
            ItemKind::Hypercube { side, d } if *d == self.d => side.clone(),
            ItemKind::Hypercube { d, .. } => {
                return Err(PackError::Dimension {
                    expected: self.d,
                    got: *d,
                })
            }
            other => {
                return Err(PackError::Unsupported {
                    kind: other.name().into(),
                    algorithm: self.name(),
                })
            }
        };
        item.validate()?;
        let class = size_class(&side).expect("validated side");
        let capacity = hypercube_capacity(class, self.d);
        let idx = match self.stack.active.get(&class).copied() {
            Some(idx) if self.stack.containers[idx].items < capacity as usize => idx,
            _ => {
                self.stack.close(class);
                self.stack.open(class, Rational::pow2_neg(class - 1))
            }
        };
        let cell = Rational::pow2_neg(class - 1);
        let c = &mut self.stack.containers[idx];
        let slot = c.items as u64;
        let mut offset: Vec<Rational> = slot_coordinates(slot, class, self.d)
            .into_iter()
            .map(|k| &cell * Rational::from(k))
            .collect();
        offset.push(c.base.clone());
        let v = item.size();
        c.items += 1;
        c.fill = Rational::from(c.items);
        c.volume += &v;
        if c.items as u64 == capacity {
            c.closed = true;
            self.stack.active.remove(&class);
        }
        self.placed_volume += &v;
        Ok(PlacementRecord::in_strip(offset))
    }

    fn cost(&self) -> Rational {
        self.stack.top.clone()
    }

    fn base_cost(&self) -> Rational {
        self.stack.base.clone()
    }

    fn placed_volume(&self) -> &Rational {
        &self.placed_volume
    }

    fn certificate(&self) -> Option<RatioCertificate> {
        Some(RatioCertificate::new(Rational::pow2(self.d as u32), Rational::from_int(2)))
    }

    fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.stack.audit(&mut out);
        let share = Rational::pow2_neg(self.d as u32);
        for (i, c) in self.stack.containers.iter().enumerate() {
            if c.closed && c.volume < &share * &c.height {
                out.push(format!("closed container {i} holds only {}", c.volume));
            }
            if c.items as u64 > hypercube_capacity(c.kind, self.d) {
                out.push(format!("container {i} holds {} items", c.items));
            }
        }
        out
    }
}

/// Height class used by the projected strip algorithm: `i` with
/// `r ∈ (2^-(i+1), 2^-i]`.
pub fn dsp_class(r: &Rational) -> Option<u32> {
    size_class(r).map(|j| j - 1)
}

#[derive(Clone, Debug)]
struct ProjectedClass {
    packer: SlotPacker,
    containers: BTreeMap<usize, usize>,
}

/// d-dimensional strip packing. Items are grouped by the class of their last
/// side; the projections of one group are packed by the (d-1)-dimensional
/// slot algorithm and each of its bins becomes a shelf of height `2^-i`.
#[derive(Clone, Debug)]
pub struct ProjectedStrip {
    d: usize,
    stack: Stack,
    classes: BTreeMap<u32, ProjectedClass>,
    placed_volume: Rational,
}

impl ProjectedStrip {
    pub fn new(d: usize) -> Self {
        Self::with_base(d, Rational::zero())
    }

    pub fn with_base(d: usize, base: Rational) -> Self {
        ProjectedStrip {
            d,
            stack: Stack::new(base),
            classes: BTreeMap::new(),
            placed_volume: Rational::zero(),
        }
    }

    pub fn on_top_of(prev: &SolutionState, d: usize) -> Self {
        Self::with_base(d, prev.cost().clone())
    }

    pub fn top(&self) -> &Rational {
        &self.stack.top
    }

    pub fn containers(&self) -> &[Container] {
        &self.stack.containers
    }

    fn certified(&self) -> Option<(Rational, Rational)> {
        match self.d {
            2 => Some((Rational::from_int(8), Rational::from_int(4))),
            3 => Some((Rational::new(96, 5), Rational::from_int(8))),
            _ => None,
        }
    }
}

impl FlexibleAlgorithm for ProjectedStrip {
    fn name(&self) -> String {
        format!("projected-strip-{}d", self.d)
    }

    fn domain(&self) -> Domain {
        Domain::Strip { d: self.d }
    }

    fn place(&mut self, item: &ItemSpec) -> Result<PlacementRecord> {
        let sides = geometric_sides(item, self.d, &self.name())?;
        let (base_sides, last) = sides.split_at(self.d - 1);
        let class = dsp_class(&last[0]).expect("validated side");
        let d = self.d;
        let entry = self.classes.entry(class).or_insert_with(|| ProjectedClass {
            packer: SlotPacker::new(d - 1, false),
            containers: BTreeMap::new(),
        });
        let projected = ItemSpec::hyperrect(item.id.0.clone(), base_sides.to_vec());
        let rec = entry.packer.place(&projected)?;
        let bin = rec.bin.expect("slot packer assigns bins");
        let idx = match entry.containers.get(&bin) {
            Some(&idx) => idx,
            None => {
                let idx = self.stack.open(class, Rational::pow2_neg(class));
                entry.containers.insert(bin, idx);
                idx
            }
        };
        // Shelf open/closed state mirrors the delegate's bins.
        for (&b, &c) in &entry.containers {
            let closed = entry.packer.is_closed(b);
            let container = &mut self.stack.containers[c];
            if closed && !container.closed {
                container.closed = true;
                if self.stack.active.get(&class) == Some(&c) {
                    self.stack.active.remove(&class);
                }
            }
        }
        let v = item.size();
        let c = &mut self.stack.containers[idx];
        c.volume += &v;
        c.items += 1;
        self.placed_volume += &v;
        let mut offset = rec.offset;
        offset.push(c.base.clone());
        Ok(PlacementRecord {
            bin: None,
            offset,
            tag: rec.tag,
        })
    }

    fn cost(&self) -> Rational {
        self.stack.top.clone()
    }

    fn base_cost(&self) -> Rational {
        self.stack.base.clone()
    }

    fn placed_volume(&self) -> &Rational {
        &self.placed_volume
    }

    fn certificate(&self) -> Option<RatioCertificate> {
        self.certified().map(|(b, c)| RatioCertificate::new(b, c))
    }

    fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut y = self.stack.base.clone();
        for (i, c) in self.stack.containers.iter().enumerate() {
            if c.base != y {
                out.push(format!("container {i} starts at {} instead of {y}", c.base));
            }
            y = &c.base + &c.height;
        }
        if y != self.stack.top {
            out.push(format!("top {} does not match stacked height {y}", self.stack.top));
        }
        for (class, pc) in &self.classes {
            for v in pc.packer.audit() {
                out.push(format!("class {class}: {v}"));
            }
            let open = pc
                .containers
                .values()
                .filter(|&&c| !self.stack.containers[c].closed)
                .count();
            if open > pc.packer.open_bin_bound() {
                out.push(format!("class {class}: {open} open containers"));
            }
        }
        if let Some((beta, _)) = self.certified() {
            for (i, c) in self.stack.containers.iter().enumerate() {
                if c.closed && &c.volume * &beta < c.height {
                    out.push(format!("closed container {i} holds only {}", c.volume));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rect(id: &str, w: &str, h: &str) -> ItemSpec {
        ItemSpec::rect2d(id, q(w), q(h))
    }

    #[test]
    fn classification() {
        assert_eq!(sp_classify(&q("0.5"), &q("0.1")).unwrap(), 0);
        assert_eq!(sp_classify(&q("0.7"), &q("0.2")).unwrap(), 0);
        assert_eq!(sp_classify(&q("0.3"), &q("0.6")).unwrap(), 1);
        assert_eq!(sp_classify(&q("0.3"), &q("0.5")).unwrap(), 2);
        assert_eq!(sp_classify(&q("0.49"), &q("0.26")).unwrap(), 2);
        assert_eq!(sp_classify(&q("0.1"), &q("0.25")).unwrap(), 3);
        assert_eq!(dsp_class(&q("1")), Some(0));
        assert_eq!(dsp_class(&q("0.5")), Some(1));
        assert_eq!(dsp_class(&q("0.3")), Some(1));
    }

    #[test]
    fn four_tall_narrow_items_need_two_shelves() {
        let mut s = ShelfStrip::new();
        for i in 0..4 {
            s.place(&rect(&format!("r{i}"), "0.3", "0.6")).unwrap();
        }
        assert_eq!(*s.top(), q("2"));
        assert_eq!(s.containers().len(), 2);
        assert!(s.containers()[0].closed);
        assert_eq!(s.containers()[0].items, 3);
        assert!(s.audit().is_empty());
    }

    #[test]
    fn wide_items_stack_vertically() {
        let mut s = ShelfStrip::new();
        let rec = s.place(&rect("a", "0.7", "0.2")).unwrap();
        assert_eq!(rec.offset, vec![q("0"), q("0")]);
        assert_eq!(*s.top(), q("1"));
        let rec = s.place(&rect("b", "0.5", "0.3")).unwrap();
        assert_eq!(rec.offset, vec![q("0"), q("0.2")]);
        assert_eq!(*s.top(), q("1"));
        let rec = s.place(&rect("c", "0.6", "0.6")).unwrap();
        assert_eq!(rec.offset, vec![q("0"), q("1")]);
        assert_eq!(*s.top(), q("2"));
    }

    #[test]
    fn flexify_builds_on_previous_height() {
        let mut prev = SolutionState::new(Domain::Strip { d: 2 });
        prev.insert(
            "p".into(),
            rect("p", "1", "0.5"),
            PlacementRecord::in_strip(vec![q("0"), q("2")]),
        )
        .unwrap();
        let mut s = ShelfStrip::on_top_of(&prev);
        let rec = s.place(&rect("a", "0.7", "0.2")).unwrap();
        assert_eq!(rec.offset, vec![q("0"), q("5/2")]);
        assert_eq!(s.cost(), q("7/2"));
        assert_eq!(s.base_cost(), q("5/2"));
    }

    #[test]
    fn shelf_types_share_the_strip() {
        let mut s = ShelfStrip::new();
        s.place(&rect("a", "0.2", "0.2")).unwrap();
        s.place(&rect("b", "0.9", "0.1")).unwrap();
        let rec = s.place(&rect("c", "0.2", "0.15")).unwrap();
        assert_eq!(rec.offset, vec![q("0.2"), q("0")]);
        let kinds: Vec<u32> = s.containers().iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![3, 0]);
        assert_eq!(*s.top(), q("5/4"));
        assert!(s.ratio_holds().unwrap());
    }

    #[test]
    fn hypercube_strip_examples() {
        let mut s = HypercubeStrip::new(2);
        s.place(&ItemSpec::hypercube("a", q("0.6"), 2)).unwrap();
        assert_eq!(*s.top(), q("1"));
        s.place(&ItemSpec::hypercube("b", q("0.6"), 2)).unwrap();
        assert_eq!(*s.top(), q("2"));

        let mut s = HypercubeStrip::new(3);
        let mut offsets = Vec::new();
        for i in 0..5 {
            offsets.push(s.place(&ItemSpec::hypercube(format!("c{i}"), q("0.3"), 3)).unwrap().offset);
        }
        let half = q("1/2");
        let z = q("0");
        assert_eq!(offsets[0], vec![z.clone(), z.clone(), z.clone()]);
        assert_eq!(offsets[1], vec![z.clone(), half.clone(), z.clone()]);
        assert_eq!(offsets[2], vec![half.clone(), z.clone(), z.clone()]);
        assert_eq!(offsets[3], vec![half.clone(), half.clone(), z.clone()]);
        assert_eq!(offsets[4], vec![z.clone(), z.clone(), half.clone()]);
        assert_eq!(s.containers().len(), 2);
        assert!(s.containers()[0].closed);
        assert!(s.audit().is_empty());
    }

    #[test]
    fn slot_coordinates_are_lexicographic() {
        assert_eq!(slot_coordinates(0, 3, 3), vec![0, 0]);
        assert_eq!(slot_coordinates(1, 3, 3), vec![0, 1]);
        assert_eq!(slot_coordinates(4, 3, 3), vec![1, 0]);
        assert_eq!(slot_coordinates(15, 3, 3), vec![3, 3]);
        assert_eq!(hypercube_capacity(3, 3), 16);
        assert_eq!(hypercube_capacity(1, 5), 1);
        assert_eq!(hypercube_capacity(70, 3), u64::MAX);
    }

    #[test]
    fn projected_strip_opens_one_shelf_per_bin() {
        let mut s = ProjectedStrip::new(2);
        // both have last side of class 0; their widths do not share a bin
        s.place(&ItemSpec::hyperrect("a", vec![q("0.6"), q("0.8")])).unwrap();
        s.place(&ItemSpec::hyperrect("b", vec![q("0.7"), q("0.9")])).unwrap();
        assert_eq!(s.containers().len(), 2);
        assert!(s.containers().iter().all(|c| c.kind == 0));
        assert_eq!(*s.top(), q("2"));
        assert!(s.audit().is_empty());
    }

    #[test]
    fn projected_strip_3d_places_inside_shelves() {
        let mut s = ProjectedStrip::new(3);
        let rec = s
            .place(&ItemSpec::hyperrect("a", vec![q("0.2"), q("0.3"), q("0.4")]))
            .unwrap();
        assert_eq!(rec.offset.len(), 3);
        assert_eq!(rec.offset[2], q("0"));
        assert_eq!(*s.top(), q("1/2"));
        assert!(s.audit().is_empty());
    }
}
