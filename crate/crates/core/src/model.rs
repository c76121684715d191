//! Problem-agnostic data model: items, events, solutions and migration
//! accounting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::rational::{sum_le, Rational};

/// User-facing item identifier as it appears in traces.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub String);

impl ItemId {
    pub fn new(s: impl Into<String>) -> Self {
        ItemId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId(s.to_owned())
    }
}

/// One insertion of an item. An id that departs and is inserted again gets a
/// new epoch, so a departed copy can linger as a ghost next to the new one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemKey {
    pub id: ItemId,
    pub epoch: u32,
}

impl ItemKey {
    pub fn new(id: impl Into<String>, epoch: u32) -> Self {
        ItemKey {
            id: ItemId(id.into()),
            epoch,
        }
    }
}

impl From<&str> for ItemKey {
    fn from(s: &str) -> Self {
        ItemKey::new(s, 0)
    }
}

impl fmt::Display for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.epoch == 0 {
            write!(f, "{}", self.id)
        } else {
            write!(f, "{}#{}", self.id, self.epoch)
        }
    }
}

impl FromStr for ItemKey {
    type Err = PackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once('#') {
            Some((id, epoch)) if !epoch.is_empty() && epoch.bytes().all(|b| b.is_ascii_digit()) => {
                let epoch = epoch
                    .parse()
                    .map_err(|_| PackError::Parse(format!("bad item key {s:?}")))?;
                Ok(ItemKey::new(id, epoch))
            }
            _ => Ok(ItemKey::new(s, 0)),
        }
    }
}

impl Serialize for ItemKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ItemKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ItemKind {
    Rect2d { w: Rational, h: Rational },
    Hyperrect { sides: Vec<Rational> },
    Hypercube { side: Rational, d: usize },
    Vector { components: Vec<Rational> },
}

impl ItemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ItemKind::Rect2d { .. } => "rect2d",
            ItemKind::Hyperrect { .. } => "hyperrect",
            ItemKind::Hypercube { .. } => "hypercube",
            ItemKind::Vector { .. } => "vector",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ItemKind::Rect2d { .. } => 2,
            ItemKind::Hyperrect { sides } => sides.len(),
            ItemKind::Hypercube { d, .. } => *d,
            ItemKind::Vector { components } => components.len(),
        }
    }

    /// Side lengths for geometric items; `None` for vectors.
    pub fn sides(&self) -> Option<Vec<Rational>> {
        match self {
            ItemKind::Rect2d { w, h } => Some(vec![w.clone(), h.clone()]),
            ItemKind::Hyperrect { sides } => Some(sides.clone()),
            ItemKind::Hypercube { side, d } => Some(vec![side.clone(); *d]),
            ItemKind::Vector { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub id: ItemId,
    #[serde(flatten)]
    pub kind: ItemKind,
}

impl ItemSpec {
    pub fn rect2d(id: impl Into<String>, w: Rational, h: Rational) -> Self {
        ItemSpec {
            id: ItemId(id.into()),
            kind: ItemKind::Rect2d { w, h },
        }
    }

    pub fn hyperrect(id: impl Into<String>, sides: Vec<Rational>) -> Self {
        ItemSpec {
            id: ItemId(id.into()),
            kind: ItemKind::Hyperrect { sides },
        }
    }

    pub fn hypercube(id: impl Into<String>, side: Rational, d: usize) -> Self {
        ItemSpec {
            id: ItemId(id.into()),
            kind: ItemKind::Hypercube { side, d },
        }
    }

    pub fn vector(id: impl Into<String>, components: Vec<Rational>) -> Self {
        ItemSpec {
            id: ItemId(id.into()),
            kind: ItemKind::Vector { components },
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn sides(&self) -> Option<Vec<Rational>> {
        self.kind.sides()
    }

    /// Checks that every side lies in `(0, 1]` (vector components in `[0, 1]`).
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| PackError::InvalidItem {
            id: self.id.to_string(),
            reason,
        };
        let one = Rational::one();
        match &self.kind {
            ItemKind::Vector { components } => {
                if components.is_empty() {
                    return Err(invalid("vector has no components".into()));
                }
                for (k, c) in components.iter().enumerate() {
                    if c.is_negative() || *c > one {
                        return Err(invalid(format!("component {k} = {c} outside [0,1]")));
                    }
                }
            }
            ItemKind::Hypercube { d: 0, .. } => return Err(invalid("hypercube with d = 0".into())),
            ItemKind::Hyperrect { sides } if sides.is_empty() => {
                return Err(invalid("hyperrectangle has no sides".into()))
            }
            kind => {
                for (k, s) in kind.sides().unwrap_or_default().iter().enumerate() {
                    if !s.is_positive() || *s > one {
                        return Err(invalid(format!("side {k} = {s} outside (0,1]")));
                    }
                }
            }
        }
        Ok(())
    }

    /// The scalar size `v_i` charged for this item. Assumes a valid item.
    pub fn size(&self) -> Rational {
        match &self.kind {
            ItemKind::Rect2d { w, h } => w * h,
            ItemKind::Hyperrect { sides } => sides.iter().fold(Rational::one(), |acc, s| acc * s),
            ItemKind::Hypercube { side, d } => (0..*d).fold(Rational::one(), |acc, _| acc * side),
            ItemKind::Vector { components } => {
                components.iter().sum::<Rational>() / Rational::from(components.len())
            }
        }
    }
}

/// Size of a single item after validating it.
pub fn item_size(item: &ItemSpec) -> Result<Rational> {
    item.validate()?;
    Ok(item.size())
}

/// Total size of a set of items.
pub fn volume<'a>(items: impl IntoIterator<Item = &'a ItemSpec>) -> Rational {
    items.into_iter().map(ItemSpec::size).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventOp {
    Insert(ItemSpec),
    Depart(ItemId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub t: u64,
    pub op: EventOp,
}

impl Event {
    pub fn insert(t: u64, item: ItemSpec) -> Self {
        Event {
            t,
            op: EventOp::Insert(item),
        }
    }

    pub fn depart(t: u64, id: impl Into<String>) -> Self {
        Event {
            t,
            op: EventOp::Depart(ItemId(id.into())),
        }
    }

    pub fn id(&self) -> &ItemId {
        match &self.op {
            EventOp::Insert(item) => &item.id,
            EventOp::Depart(id) => id,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self.op {
            EventOp::Insert(_) => "insert",
            EventOp::Depart(_) => "depart",
        }
    }
}

/// Where and how solutions are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// Unit cross-section in dimensions `1..d-1`, unbounded height in `d`.
    Strip { d: usize },
    /// Unit hypercube bins.
    Bins { d: usize },
    /// Vector bins with per-dimension capacity 1.
    Vectors { d: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match *self {
            Domain::Strip { d } | Domain::Bins { d } | Domain::Vectors { d } => d,
        }
    }

    pub fn is_strip(&self) -> bool {
        matches!(self, Domain::Strip { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub bin: Option<usize>,
    pub offset: Vec<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl PlacementRecord {
    pub fn in_bin(bin: usize, offset: Vec<Rational>) -> Self {
        PlacementRecord {
            bin: Some(bin),
            offset,
            tag: None,
        }
    }

    pub fn in_strip(offset: Vec<Rational>) -> Self {
        PlacementRecord {
            bin: None,
            offset,
            tag: None,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    /// Same bin and offset; the pool tag is bookkeeping only.
    pub fn same_position(&self, other: &PlacementRecord) -> bool {
        self.bin == other.bin && self.offset == other.offset
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placed {
    pub item: ItemSpec,
    pub record: PlacementRecord,
    /// Cached `item.size()`.
    pub size: Rational,
}

/// A packing of live items plus departed items that have not been cleaned up
/// yet ("ghosts").
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionState {
    domain: Domain,
    placed: BTreeMap<ItemKey, Placed>,
    ghosts: BTreeSet<ItemKey>,
    bin_load: BTreeMap<usize, usize>,
    cost: Rational,
    live_volume: Rational,
}

impl SolutionState {
    pub fn new(domain: Domain) -> Self {
        SolutionState {
            domain,
            placed: BTreeMap::new(),
            ghosts: BTreeSet::new(),
            bin_load: BTreeMap::new(),
            cost: Rational::zero(),
            live_volume: Rational::zero(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.placed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placed.is_empty()
    }

    /// Cost of the packing: strip height or number of bins in use.
    pub fn cost(&self) -> &Rational {
        &self.cost
    }

    /// Total size of the live items.
    pub fn live_volume(&self) -> &Rational {
        &self.live_volume
    }

    pub fn get(&self, key: &ItemKey) -> Option<&Placed> {
        self.placed.get(key)
    }

    pub fn contains(&self, key: &ItemKey) -> bool {
        self.placed.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemKey, &Placed)> {
        self.placed.iter()
    }

    pub fn live(&self) -> impl Iterator<Item = (&ItemKey, &Placed)> {
        self.placed.iter().filter(|(k, _)| !self.ghosts.contains(*k))
    }

    pub fn ghosts(&self) -> &BTreeSet<ItemKey> {
        &self.ghosts
    }

    pub fn is_ghost(&self, key: &ItemKey) -> bool {
        self.ghosts.contains(key)
    }

    pub fn live_keys(&self) -> BTreeSet<ItemKey> {
        self.live().map(|(k, _)| k.clone()).collect()
    }

    /// Highest bin index in use.
    pub fn max_bin(&self) -> Option<usize> {
        self.bin_load.keys().next_back().copied()
    }

    pub fn bin_count(&self) -> usize {
        self.bin_load.len()
    }

    pub fn insert(&mut self, key: ItemKey, item: ItemSpec, record: PlacementRecord) -> Result<()> {
        if self.placed.contains_key(&key) {
            return Err(PackError::Parse(format!("{key} is already placed")));
        }
        self.charge(&item, &record);
        let size = item.size();
        self.live_volume += &size;
        self.placed.insert(key, Placed { item, record, size });
        Ok(())
    }

    fn charge(&mut self, item: &ItemSpec, record: &PlacementRecord) {
        match self.domain {
            Domain::Strip { d } => {
                if let (Some(sides), Some(base)) = (item.sides(), record.offset.get(d - 1)) {
                    if let Some(h) = sides.get(d - 1) {
                        if !sum_le(base, h, &self.cost) {
                            self.cost = base + h;
                        }
                    }
                }
            }
            Domain::Bins { .. } | Domain::Vectors { .. } => {
                if let Some(bin) = record.bin {
                    *self.bin_load.entry(bin).or_default() += 1;
                    self.cost = Rational::from(self.bin_load.len());
                }
            }
        }
    }

    /// Marks a live item as departed. Its placement stays until
    /// [`SolutionState::drop_ghosts`].
    pub fn depart(&mut self, key: &ItemKey) -> Result<()> {
        if !self.placed.contains_key(key) || self.ghosts.contains(key) {
            return Err(PackError::NotPlaced(key.to_string()));
        }
        self.ghosts.insert(key.clone());
        self.live_volume -= &self.placed[key].size;
        Ok(())
    }

    pub fn drop_ghosts(&mut self) {
        let keep = self.live_keys();
        *self = self.restrict(&keep).expect("live keys are placed");
    }

    /// Solution induced by `keep`; every retained placement is unchanged.
    pub fn restrict(&self, keep: &BTreeSet<ItemKey>) -> Result<SolutionState> {
        let mut out = SolutionState::new(self.domain);
        for key in keep {
            let placed = self
                .placed
                .get(key)
                .ok_or_else(|| PackError::NotPlaced(key.to_string()))?;
            out.charge(&placed.item, &placed.record);
            out.placed.insert(key.clone(), placed.clone());
            if self.ghosts.contains(key) {
                out.ghosts.insert(key.clone());
            } else {
                out.live_volume += &placed.size;
            }
        }
        Ok(out)
    }

    /// Cost recomputed from scratch, for checking the cached value.
    pub fn recompute_cost(&self) -> Rational {
        let mut fresh = SolutionState::new(self.domain);
        for placed in self.placed.values() {
            fresh.charge(&placed.item, &placed.record);
        }
        fresh.cost
    }

    /// Cost of the live items only.
    pub fn live_cost(&self) -> Rational {
        if self.ghosts.is_empty() {
            return self.cost.clone();
        }
        let mut fresh = SolutionState::new(self.domain);
        for (_, placed) in self.live() {
            fresh.charge(&placed.item, &placed.record);
        }
        fresh.cost
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedgerEvent {
    Inserted,
    Departed,
    Migrated,
}

/// Volumes attributed to one phase, closed by a repack at `end_t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub start_t: u64,
    pub end_t: u64,
    pub start_volume: Rational,
    pub inserted: Rational,
    pub departed: Rational,
    pub migrated: Rational,
}

/// Cumulative inserted, departed and migrated volume.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationLedger {
    pub inserted_vol: Rational,
    pub departed_vol: Rational,
    pub migrated_vol: Rational,
    pub phases: Vec<PhaseRecord>,
}

impl MigrationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: LedgerEvent, volume: &Rational) -> Result<()> {
        if volume.is_negative() {
            return Err(PackError::Parse(format!("negative ledger volume {volume}")));
        }
        let counter = match event {
            LedgerEvent::Inserted => &mut self.inserted_vol,
            LedgerEvent::Departed => &mut self.departed_vol,
            LedgerEvent::Migrated => &mut self.migrated_vol,
        };
        *counter += volume;
        Ok(())
    }

    /// `migrated / (inserted + departed)`.
    pub fn factor(&self) -> Result<Rational> {
        let churn = &self.inserted_vol + &self.departed_vol;
        if churn.is_zero() {
            return Err(PackError::UndefinedFactor);
        }
        Ok(&self.migrated_vol / &churn)
    }
}
