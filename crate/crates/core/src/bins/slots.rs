//! Slot-splitting bin packing for hyperrectangles and hypercubes.
//!
//! Items are sorted into pools by the order of their sides and into classes
//! by their longest side. A bin for small items starts as `2^d` class-2 slots;
//! a class-`j` slot has side `2^-(j-1)` and splits into `2^d` class-`j+1`
//! slots. Square-like items fill a slot alone. The others are stacked along
//! their shortest side inside a reserved slot of their class.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{PackError, Result};
use crate::model::{Domain, ItemSpec, PlacementRecord, SolutionState};
use crate::online::{FlexibleAlgorithm, RatioCertificate};
use crate::rational::{size_class, Rational};

/// How an item is routed: its pool (sides sorted ascending, stable), its class
/// and whether it fills a slot on its own.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotClass {
    pub pool: Vec<usize>,
    pub class: u32,
    pub square_like: bool,
}

impl SlotClass {
    /// Axis along which non-square-like items are stacked.
    pub fn stack_axis(&self) -> usize {
        self.pool[0]
    }
}

pub fn slot_classify(sides: &[Rational]) -> Result<SlotClass> {
    let mut pool: Vec<usize> = (0..sides.len()).collect();
    pool.sort_by(|&a, &b| sides[a].cmp(&sides[b]).then(a.cmp(&b)));
    let major = &sides[*pool.last().ok_or(PackError::Dimension { expected: 1, got: 0 })?];
    let class = size_class(major).ok_or_else(|| PackError::InvalidItem {
        id: String::new(),
        reason: format!("side {major} outside (0,1]"),
    })?;
    let square_like = sides[pool[0]] > Rational::pow2_neg(class);
    Ok(SlotClass {
        pool,
        class,
        square_like,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

/// Two-dimensional routing: vertical items (`w <= h`) stack left to right,
/// horizontal ones bottom to top.
pub fn bp2_classify(w: &Rational, h: &Rational) -> Result<(Orientation, u32, bool)> {
    let c = slot_classify(&[w.clone(), h.clone()])?;
    let orientation = if c.pool[0] == 0 {
        Orientation::Vertical
    } else {
        Orientation::Horizontal
    };
    Ok((orientation, c.class, c.square_like))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum SlotState {
    Empty,
    Reserved { fill: Rational },
    Closed,
    Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub origin: Vec<Rational>,
    pub class: u32,
    #[serde(flatten)]
    pub state: SlotState,
    pub covered: Rational,
}

impl Slot {
    pub fn side(&self) -> Rational {
        Rational::pow2_neg(self.class - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinKind {
    /// A single class-1 slot.
    Large,
    /// Starts as `2^d` class-2 slots.
    Small,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SlotBin {
    pub pool: Vec<usize>,
    pub kind: BinKind,
    pub slots: Vec<Slot>,
    pub closed: bool,
    pub volume: Rational,
    pub items: usize,
}

#[derive(Clone, Debug, Default)]
struct OpenBins {
    large: Option<usize>,
    small: Option<usize>,
}

/// Origins of the `2^d` sub-cubes of side `half` at `origin`, in
/// lexicographic order.
fn children(origin: &[Rational], half: &Rational) -> Vec<Vec<Rational>> {
    let d = origin.len();
    (0..1u64 << d)
        .map(|bits| {
            (0..d)
                .map(|k| {
                    if bits >> (d - 1 - k) & 1 == 1 {
                        &origin[k] + half
                    } else {
                        origin[k].clone()
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SlotPacker {
    d: usize,
    cubes: bool,
    first_bin: usize,
    base_cost: Rational,
    bins: Vec<SlotBin>,
    open: BTreeMap<Vec<usize>, OpenBins>,
    placed_volume: Rational,
}

impl SlotPacker {
    /// `cubes` restricts the packer to hypercubes, which changes only the
    /// certificate.
    pub fn new(d: usize, cubes: bool) -> Self {
        SlotPacker {
            d,
            cubes,
            first_bin: 0,
            base_cost: Rational::zero(),
            bins: Vec::new(),
            open: BTreeMap::new(),
            placed_volume: Rational::zero(),
        }
    }

    /// Opens bins only after the highest bin index of `prev`.
    pub fn after(prev: &SolutionState, d: usize, cubes: bool) -> Self {
        let mut p = Self::new(d, cubes);
        p.first_bin = prev.max_bin().map_or(0, |b| b + 1);
        p.base_cost = prev.cost().clone();
        p
    }

    pub fn bins(&self) -> &[SlotBin] {
        &self.bins
    }

    /// Whether global bin index `bin` is closed (unknown bins count as open).
    pub fn is_closed(&self, bin: usize) -> bool {
        bin.checked_sub(self.first_bin)
            .and_then(|i| self.bins.get(i))
            .is_some_and(|b| b.closed)
    }

    /// Upper bound on the number of bins open at once.
    pub fn open_bin_bound(&self) -> usize {
        let pools: usize = (1..=self.d).product();
        2 * pools
    }

    fn open_bin(&mut self, pool: &[usize], kind: BinKind) -> usize {
        let d = self.d;
        let slots = match kind {
            BinKind::Large => vec![Slot {
                origin: vec![Rational::zero(); d],
                class: 1,
                state: SlotState::Empty,
                covered: Rational::zero(),
            }],
            BinKind::Small => children(&vec![Rational::zero(); d], &Rational::new(1, 2))
                .into_iter()
                .map(|origin| Slot {
                    origin,
                    class: 2,
                    state: SlotState::Empty,
                    covered: Rational::zero(),
                })
                .collect(),
        };
        self.bins.push(SlotBin {
            pool: pool.to_vec(),
            kind,
            slots,
            closed: false,
            volume: Rational::zero(),
            items: 0,
        });
        self.bins.len() - 1
    }

    fn close_bin(&mut self, local: usize) {
        let bin = &mut self.bins[local];
        bin.closed = true;
        let open = self.open.entry(bin.pool.clone()).or_default();
        if open.large == Some(local) {
            open.large = None;
        }
        if open.small == Some(local) {
            open.small = None;
        }
    }

    /// Best slot for an item of class `j`: highest class first, the reserved
    /// slot before empty ones, then the lexicographically smallest origin.
    fn candidate(bin: &SlotBin, j: u32, square_like: bool) -> Option<usize> {
        let mut best: Option<(u32, bool, &Vec<Rational>, usize)> = None;
        for (idx, slot) in bin.slots.iter().enumerate() {
            let reserved = match slot.state {
                SlotState::Empty if slot.class <= j => false,
                SlotState::Reserved { .. } if !square_like && slot.class == j => true,
                _ => continue,
            };
            let better = match &best {
                None => true,
                Some((class, res, origin, _)) => {
                    (slot.class, reserved) > (*class, *res)
                        || ((slot.class, reserved) == (*class, *res) && slot.origin < **origin)
                }
            };
            if better {
                best = Some((slot.class, reserved, &slot.origin, idx));
            }
        }
        best.map(|b| b.3)
    }

    /// Splits slot `idx` until it reaches class `j`; returns the final slot.
    fn split_down(bin: &mut SlotBin, mut idx: usize, j: u32) -> usize {
        while bin.slots[idx].class < j {
            let class = bin.slots[idx].class + 1;
            let half = Rational::pow2_neg(class - 1);
            bin.slots[idx].state = SlotState::Split;
            let first = bin.slots.len();
            for origin in children(&bin.slots[idx].origin, &half) {
                bin.slots.push(Slot {
                    origin,
                    class,
                    state: SlotState::Empty,
                    covered: Rational::zero(),
                });
            }
            idx = first;
        }
        idx
    }

    /// Puts the item into slot `idx` and returns its offset inside the bin.
    fn fill_slot(
        bin: &mut SlotBin,
        idx: usize,
        sides: &[Rational],
        class: &SlotClass,
        v: &Rational,
        close_at: &Rational,
    ) -> Vec<Rational> {
        let slot = &mut bin.slots[idx];
        let mut offset = slot.origin.clone();
        slot.covered += v;
        if class.square_like {
            slot.state = SlotState::Closed;
        } else {
            let axis = class.stack_axis();
            let mut fill = match &slot.state {
                SlotState::Reserved { fill } => fill.clone(),
                _ => Rational::zero(),
            };
            offset[axis] += &fill;
            fill += &sides[axis];
            slot.state = if fill >= *close_at {
                SlotState::Closed
            } else {
                SlotState::Reserved { fill }
            };
        }
        bin.volume += v;
        bin.items += 1;
        offset
    }

    fn tag(&self, pool: &[usize]) -> Option<String> {
        if self.cubes || self.d < 2 {
            return None;
        }
        if self.d == 2 {
            return Some(if pool[0] == 0 { "vertical" } else { "horizontal" }.into());
        }
        let order: Vec<String> = pool.iter().map(|k| (k + 1).to_string()).collect();
        Some(format!("pool={}", order.join(",")))
    }

    fn certified(&self) -> Option<(Rational, Rational)> {
        if self.cubes {
            let two_d = Rational::pow2(self.d as u32);
            let beta = &two_d * &two_d / (&two_d - Rational::one());
            return Some((beta, Rational::one()));
        }
        match self.d {
            1 => Some((Rational::from_int(4), Rational::from_int(2))),
            2 => Some((Rational::new(48, 5), Rational::from_int(4))),
            _ => None,
        }
    }
}

impl FlexibleAlgorithm for SlotPacker {
    fn name(&self) -> String {
        if self.cubes {
            format!("hypercube-slots-{}d", self.d)
        } else {
            format!("slots-{}d", self.d)
        }
    }

    fn domain(&self) -> Domain {
        Domain::Bins { d: self.d }
    }

    fn place(&mut self, item: &ItemSpec) -> Result<PlacementRecord> {
        let sides = item.sides().ok_or_else(|| PackError::Unsupported {
            kind: item.kind.name().into(),
            algorithm: self.name(),
        })?;
        if sides.len() != self.d {
            return Err(PackError::Dimension {
                expected: self.d,
                got: sides.len(),
            });
        }
        item.validate()?;
        let class = slot_classify(&sides)?;
        let v = item.size();
        let j = class.class;
        let pool = class.pool.clone();

        let (local, offset) = if j == 1 {
            let local = match (class.square_like, self.open.get(&pool).and_then(|o| o.large)) {
                (false, Some(local)) => local,
                _ => {
                    let local = self.open_bin(&pool, BinKind::Large);
                    if !class.square_like {
                        self.open.entry(pool.clone()).or_default().large = Some(local);
                    }
                    local
                }
            };
            let half = Rational::new(1, 2);
            let offset = Self::fill_slot(&mut self.bins[local], 0, &sides, &class, &v, &half);
            if self.bins[local].slots[0].state == SlotState::Closed {
                self.close_bin(local);
            }
            (local, offset)
        } else {
            let close_at = Rational::pow2_neg(j);
            let mut attempts = 0;
            loop {
                let local = match self.open.get(&pool).and_then(|o| o.small) {
                    Some(local) => local,
                    None => {
                        let local = self.open_bin(&pool, BinKind::Small);
                        self.open.entry(pool.clone()).or_default().small = Some(local);
                        local
                    }
                };
                let bin = &mut self.bins[local];
                match Self::candidate(bin, j, class.square_like) {
                    Some(idx) => {
                        let idx = Self::split_down(bin, idx, j);
                        let offset = Self::fill_slot(bin, idx, &sides, &class, &v, &close_at);
                        break (local, offset);
                    }
                    None => {
                        attempts += 1;
                        assert!(attempts < 2, "a fresh bin always has a free class-2 slot");
                        self.close_bin(local);
                    }
                }
            }
        };
        self.placed_volume += &v;
        let mut rec = PlacementRecord::in_bin(self.first_bin + local, offset);
        rec.tag = self.tag(&pool);
        Ok(rec)
    }

    fn cost(&self) -> Rational {
        &self.base_cost + Rational::from(self.bins.len())
    }

    fn base_cost(&self) -> Rational {
        self.base_cost.clone()
    }

    fn placed_volume(&self) -> &Rational {
        &self.placed_volume
    }

    fn certificate(&self) -> Option<RatioCertificate> {
        self.certified().map(|(b, c)| RatioCertificate::new(b, c))
    }

    fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        let max_empty = if self.d < 64 { (1u64 << self.d) - 1 } else { u64::MAX };
        let mut open_per_pool: BTreeMap<(&Vec<usize>, BinKind), usize> = BTreeMap::new();
        let certified = self.certified();
        let share = Rational::pow2_neg(self.d as u32);
        for (local, bin) in self.bins.iter().enumerate() {
            let global = self.first_bin + local;
            if !bin.closed {
                *open_per_pool.entry((&bin.pool, bin.kind)).or_default() += 1;
            }
            let mut empty: BTreeMap<u32, u64> = BTreeMap::new();
            let mut reserved: BTreeMap<u32, u64> = BTreeMap::new();
            for slot in &bin.slots {
                match &slot.state {
                    SlotState::Empty => *empty.entry(slot.class).or_default() += 1,
                    SlotState::Reserved { fill } => {
                        *reserved.entry(slot.class).or_default() += 1;
                        if *fill > slot.side() {
                            out.push(format!("bin {global}: reserved slot overfilled"));
                        }
                    }
                    SlotState::Closed => {
                        if certified.is_some() {
                            let floor = (0..self.d).fold(share.clone(), |acc, _| acc * slot.side());
                            if slot.covered < floor {
                                out.push(format!(
                                    "bin {global}: closed class-{} slot covers only {}",
                                    slot.class, slot.covered
                                ));
                            }
                        }
                    }
                    SlotState::Split => {}
                }
            }
            for (class, n) in empty {
                if n > max_empty {
                    out.push(format!("bin {global}: {n} empty class-{class} slots"));
                }
            }
            for (class, n) in reserved {
                if n > 1 {
                    out.push(format!("bin {global}: {n} reserved class-{class} slots"));
                }
            }
            if let Some((beta, _)) = &certified {
                if bin.closed && &bin.volume * beta < Rational::one() {
                    out.push(format!("closed bin {global} holds only {}", bin.volume));
                }
            }
        }
        for ((pool, kind), n) in open_per_pool {
            if n > 1 {
                out.push(format!("{n} open {kind:?} bins in pool {pool:?}"));
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

    #[test]
    fn two_dimensional_classification() {
        assert_eq!(
            bp2_classify(&q("0.2"), &q("0.3")).unwrap(),
            (Orientation::Vertical, 2, false)
        );
        assert_eq!(
            bp2_classify(&q("0.3"), &q("0.2")).unwrap(),
            (Orientation::Horizontal, 2, false)
        );
        assert_eq!(
            bp2_classify(&q("0.1"), &q("0.1")).unwrap(),
            (Orientation::Vertical, 4, true)
        );
        assert_eq!(
            bp2_classify(&q("0.6"), &q("0.7")).unwrap(),
            (Orientation::Vertical, 1, true)
        );
        assert_eq!(
            bp2_classify(&q("0.5"), &q("0.7")).unwrap(),
            (Orientation::Vertical, 1, false)
        );
    }

    #[test]
    fn higher_dimensional_classification() {
        let c = slot_classify(&[q("0.3"), q("0.1"), q("0.2")]).unwrap();
        assert_eq!(c.pool, vec![1, 2, 0]);
        assert_eq!(c.class, 2);
        assert!(!c.square_like);
        let c = slot_classify(&[q("0.3"), q("0.3"), q("0.3")]).unwrap();
        assert_eq!(c.pool, vec![0, 1, 2]);
        assert!(c.square_like);
    }

    #[test]
    fn small_items_share_a_bin() {
        let mut p = SlotPacker::new(2, false);
        let a = p.place(&ItemSpec::rect2d("a", q("0.2"), q("0.3"))).unwrap();
        assert_eq!(a.bin, Some(0));
        assert_eq!(a.offset, vec![q("0"), q("0")]);
        assert_eq!(a.tag.as_deref(), Some("vertical"));
        // (0.1, 0.1) is class 4 and square-like: the class-2 slot at the
        // origin is reserved, so the next empty class-2 slot is split.
        let b = p.place(&ItemSpec::rect2d("b", q("0.1"), q("0.1"))).unwrap();
        assert_eq!(b.bin, Some(0));
        assert_eq!(b.offset, vec![q("0"), q("1/2")]);
        assert_eq!(p.cost(), q("1"));
        let bin = &p.bins()[0];
        assert_eq!(bin.slots.len(), 12);
        let empty = |class: u32| {
            bin.slots
                .iter()
                .filter(|s| s.class == class && s.state == SlotState::Empty)
                .count()
        };
        assert_eq!((empty(2), empty(3), empty(4)), (2, 3, 3));
        assert_eq!(bin.slots[0].state, SlotState::Reserved { fill: q("0.2") });
        assert!(p.audit().is_empty());
    }

    #[test]
    fn non_square_items_stack_in_their_reserved_slot() {
        let mut p = SlotPacker::new(2, false);
        let a = p.place(&ItemSpec::rect2d("a", q("0.1"), q("0.4"))).unwrap();
        let b = p.place(&ItemSpec::rect2d("b", q("0.1"), q("0.3"))).unwrap();
        assert_eq!(a.offset, vec![q("0"), q("0")]);
        assert_eq!(b.offset, vec![q("0.1"), q("0")]);
        // horizontal items go to their own pool and bin
        let c = p.place(&ItemSpec::rect2d("c", q("0.4"), q("0.1"))).unwrap();
        assert_eq!(c.bin, Some(1));
        assert_eq!(c.tag.as_deref(), Some("horizontal"));
    }

    #[test]
    fn hypercube_bins_fill_all_slots() {
        let mut p = SlotPacker::new(2, true);
        let mut bins = Vec::new();
        for i in 0..16 {
            bins.push(p.place(&ItemSpec::hypercube(format!("c{i}"), q("0.26"), 2)).unwrap().bin.unwrap());
        }
        assert_eq!(&bins[..4], &[0, 0, 0, 0]);
        assert_eq!(bins[4], 1);
        assert_eq!(p.cost(), q("4"));
        assert!(p.audit().is_empty());
    }

    #[test]
    fn class_one_items() {
        let mut p = SlotPacker::new(2, false);
        let a = p.place(&ItemSpec::rect2d("a", q("0.6"), q("0.6"))).unwrap();
        let b = p.place(&ItemSpec::rect2d("b", q("0.2"), q("0.7"))).unwrap();
        let c = p.place(&ItemSpec::rect2d("c", q("0.3"), q("0.9"))).unwrap();
        let d = p.place(&ItemSpec::rect2d("d", q("0.1"), q("0.9"))).unwrap();
        assert_eq!(a.bin, Some(0));
        assert_eq!(b.bin, Some(1));
        assert_eq!(c.bin, Some(1));
        assert_eq!(c.offset, vec![q("0.2"), q("0")]);
        // 0.2 + 0.3 reached 1/2 and closed the stack
        assert_eq!(d.bin, Some(2));
        assert!(p.audit().is_empty());
    }

    #[test]
    fn flexified_packer_skips_existing_bins() {
        let mut prev = SolutionState::new(Domain::Bins { d: 2 });
        prev.insert(
            "x".into(),
            ItemSpec::rect2d("x", q("1"), q("1")),
            PlacementRecord::in_bin(4, vec![q("0"), q("0")]),
        )
        .unwrap();
        let mut p = SlotPacker::after(&prev, 2, false);
        let rec = p.place(&ItemSpec::rect2d("a", q("0.2"), q("0.2"))).unwrap();
        assert_eq!(rec.bin, Some(5));
        assert_eq!(p.cost(), q("2"));
    }

    #[test]
    fn one_dimensional_slots() {
        let mut p = SlotPacker::new(1, false);
        let a = p.place(&ItemSpec::hyperrect("a", vec![q("0.3")])).unwrap();
        let b = p.place(&ItemSpec::hyperrect("b", vec![q("0.3")])).unwrap();
        let c = p.place(&ItemSpec::hyperrect("c", vec![q("0.3")])).unwrap();
        assert_eq!(a.offset, vec![q("0")]);
        assert_eq!(b.offset, vec![q("1/2")]);
        assert_eq!(c.bin, Some(1));
        assert!(a.tag.is_none());
    }
}
