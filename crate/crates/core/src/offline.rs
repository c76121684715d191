//! Offline repackers used at phase ends, plus small exact oracles and lower
//! bounds.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::model::{Domain, ItemKey, ItemKind, ItemSpec, PlacementRecord, SolutionState};
use crate::online::{OnlineAlgorithm, RatioCertificate};
use crate::rational::{common_denominator, scaled_i128, Rational};

/// Largest instance [`exact_vector_opt`] accepts.
pub const EXACT_VECTOR_LIMIT: usize = 12;
/// Largest instance [`bottom_left_search`] accepts.
pub const BOTTOM_LEFT_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepackOrder {
    #[default]
    AsGiven,
    VolumeDesc,
    MajorSideDesc,
}

/// Where a repacker's guarantee comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// The ratio of the replayed online algorithm.
    OnlineRatio,
    /// A classical bound from outside this crate.
    ExternalClassical,
    /// Optimal by exhaustive search.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OfflineResult {
    pub solution: SolutionState,
    /// Approximation ratio against the optimum, if proven.
    pub certified_gamma: Option<Rational>,
    pub certified_additive: Option<Rational>,
    /// Bound on the cost in terms of the packed volume.
    pub volume_certificate: Option<RatioCertificate>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum OfflineRepacker {
    /// Replays an online algorithm from scratch. Without an explicit
    /// algorithm the runner's online algorithm is used.
    Restart {
        #[serde(default)]
        order: RepackOrder,
        #[serde(default)]
        algorithm: Option<OnlineAlgorithm>,
    },
    /// First-fit decreasing height shelves (2-D strips only).
    Ffdh,
    /// Optimal vector packing; refuses more than 12 items.
    ExactVector,
}

impl Default for OfflineRepacker {
    fn default() -> Self {
        OfflineRepacker::Restart {
            order: RepackOrder::AsGiven,
            algorithm: None,
        }
    }
}

impl OfflineRepacker {
    pub fn name(&self) -> String {
        match self {
            OfflineRepacker::Restart { order, algorithm } => {
                let order = match order {
                    RepackOrder::AsGiven => "as-given",
                    RepackOrder::VolumeDesc => "volume-desc",
                    RepackOrder::MajorSideDesc => "major-side-desc",
                };
                match algorithm {
                    Some(a) => format!("restart({}, {order})", a.name()),
                    None => format!("restart({order})"),
                }
            }
            OfflineRepacker::Ffdh => "ffdh".into(),
            OfflineRepacker::ExactVector => "exact-vector".into(),
        }
    }

    /// Checks that this repacker can produce `domain` solutions.
    pub fn check(&self, domain: Domain, online: &OnlineAlgorithm) -> Result<()> {
        let ok = match self {
            OfflineRepacker::Restart { algorithm, .. } => algorithm.unwrap_or(*online).domain() == domain,
            OfflineRepacker::Ffdh => domain == Domain::Strip { d: 2 },
            OfflineRepacker::ExactVector => matches!(domain, Domain::Vectors { .. }),
        };
        if ok {
            Ok(())
        } else {
            Err(PackError::Config(format!("{} cannot pack {domain:?}", self.name())))
        }
    }

    pub fn repack(&self, items: &[(ItemKey, ItemSpec)], domain: Domain, online: &OnlineAlgorithm) -> Result<OfflineResult> {
        self.check(domain, online)?;
        match self {
            OfflineRepacker::Restart { order, algorithm } => restart_repack(items, &algorithm.unwrap_or(*online), *order),
            OfflineRepacker::Ffdh => ffdh(items),
            OfflineRepacker::ExactVector => exact_vector_repack(items, domain.dim()),
        }
    }
}

fn major_side(item: &ItemSpec) -> Rational {
    let values = match &item.kind {
        ItemKind::Vector { components } => components.clone(),
        kind => kind.sides().unwrap_or_default(),
    };
    values.into_iter().max().unwrap_or_default()
}

/// Runs `algorithm` from scratch on the items in the requested order.
pub fn restart_repack(items: &[(ItemKey, ItemSpec)], algorithm: &OnlineAlgorithm, order: RepackOrder) -> Result<OfflineResult> {
    let mut ordered: Vec<&(ItemKey, ItemSpec)> = items.iter().collect();
    match order {
        RepackOrder::AsGiven => {}
        RepackOrder::VolumeDesc => ordered.sort_by_key(|(_, item)| std::cmp::Reverse(item.size())),
        RepackOrder::MajorSideDesc => ordered.sort_by_key(|(_, item)| std::cmp::Reverse(major_side(item))),
    }
    let mut run = algorithm.fresh()?;
    let mut solution = SolutionState::new(algorithm.domain());
    for (key, item) in ordered {
        algorithm.accepts(item)?;
        let record = run.place(item)?;
        solution.insert(key.clone(), item.clone(), record)?;
    }
    let cert = run.certificate();
    Ok(OfflineResult {
        solution,
        certified_gamma: cert.as_ref().map(|c| c.beta.clone()),
        certified_additive: cert.as_ref().map(|c| c.additive.clone()),
        volume_certificate: cert,
        provenance: Provenance::OnlineRatio,
    })
}

/// First-fit decreasing height: items sorted by height go into the lowest
/// shelf with room, or a new shelf on top.
pub fn ffdh(items: &[(ItemKey, ItemSpec)]) -> Result<OfflineResult> {
    let mut rects = Vec::with_capacity(items.len());
    for (key, item) in items {
        match item.sides().as_deref() {
            Some([w, h]) => rects.push((key, item, w.clone(), h.clone())),
            _ => {
                return Err(PackError::Unsupported {
                    kind: item.kind.name().into(),
                    algorithm: "ffdh".into(),
                })
            }
        }
        item.validate()?;
    }
    rects.sort_by(|a, b| b.3.cmp(&a.3));
    // (base, used width)
    let mut shelves: Vec<(Rational, Rational)> = Vec::new();
    let mut top = Rational::zero();
    let one = Rational::one();
    let mut solution = SolutionState::new(Domain::Strip { d: 2 });
    for (key, item, w, h) in rects {
        let idx = match shelves.iter().position(|(_, used)| used + &w <= one) {
            Some(idx) => idx,
            None => {
                shelves.push((top.clone(), Rational::zero()));
                top += &h;
                shelves.len() - 1
            }
        };
        let (base, used) = &mut shelves[idx];
        let record = PlacementRecord::in_strip(vec![used.clone(), base.clone()]);
        *used += &w;
        solution.insert(key.clone(), item.clone(), record)?;
    }
    let hmax = items
        .iter()
        .filter_map(|(_, i)| i.sides().and_then(|s| s.get(1).cloned()))
        .max()
        .unwrap_or_default();
    Ok(OfflineResult {
        solution,
        certified_gamma: Some(Rational::new(17, 10)),
        certified_additive: Some(hmax.clone()),
        volume_certificate: Some(RatioCertificate::new(Rational::from_int(2), hmax)),
        provenance: Provenance::ExternalClassical,
    })
}

/// Vector components scaled to a common integer grid.
fn integer_vectors(vectors: &[Vec<Rational>]) -> Result<(Vec<Vec<i128>>, i128)> {
    let scale: BigInt = common_denominator(vectors.iter().flatten());
    let too_fine = || PackError::Offline("vector components exceed the integer grid".into());
    let cap = scaled_i128(&Rational::one(), &scale).ok_or_else(too_fine)?;
    let scaled = vectors
        .iter()
        .map(|v| v.iter().map(|c| scaled_i128(c, &scale).ok_or_else(too_fine)).collect())
        .collect::<Result<Vec<Vec<i128>>>>()?;
    Ok((scaled, cap))
}

struct VectorSearch<'a> {
    items: &'a [Vec<i128>],
    order: Vec<usize>,
    cap: i128,
    lower: usize,
    best: usize,
    best_assign: Vec<usize>,
    loads: Vec<Vec<i128>>,
    assign: Vec<usize>,
}

impl VectorSearch<'_> {
    fn run(&mut self, pos: usize) {
        if self.best == self.lower {
            return;
        }
        if pos == self.order.len() {
            if self.loads.len() < self.best {
                self.best = self.loads.len();
                self.best_assign = self.assign.clone();
            }
            return;
        }
        let item = &self.items[self.order[pos]];
        let mut tried: BTreeSet<Vec<i128>> = BTreeSet::new();
        for b in 0..self.loads.len() {
            let fits = self.loads[b].iter().zip(item).all(|(l, c)| l + c <= self.cap);
            // bins with equal loads are interchangeable
            if !fits || !tried.insert(self.loads[b].clone()) {
                continue;
            }
            for (l, c) in self.loads[b].iter_mut().zip(item) {
                *l += c;
            }
            self.assign[self.order[pos]] = b;
            self.run(pos + 1);
            for (l, c) in self.loads[b].iter_mut().zip(item) {
                *l -= c;
            }
        }
        if self.loads.len() + 1 < self.best {
            self.loads.push(item.clone());
            self.assign[self.order[pos]] = self.loads.len() - 1;
            self.run(pos + 1);
            self.loads.pop();
        }
    }
}

/// An optimal assignment of vectors to bins (bin index per vector).
pub fn exact_vector_pack(vectors: &[Vec<Rational>]) -> Result<Vec<usize>> {
    if vectors.len() > EXACT_VECTOR_LIMIT {
        return Err(PackError::TooLarge {
            size: vectors.len(),
            limit: EXACT_VECTOR_LIMIT,
        });
    }
    if vectors.is_empty() {
        return Ok(Vec::new());
    }
    let d = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(PackError::Dimension { expected: d, got: v.len() });
    }
    let (items, cap) = integer_vectors(vectors)?;
    if items.iter().flatten().any(|&c| c < 0 || c > cap) {
        return Err(PackError::Offline("vector component outside [0,1]".into()));
    }
    let mut lower = 1;
    for k in 0..d {
        let total: i128 = items.iter().map(|v| v[k]).sum();
        lower = lower.max(((total + cap - 1) / cap) as usize);
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(items[i].iter().sum::<i128>()));
    let n = items.len();
    let mut search = VectorSearch {
        items: &items,
        order,
        cap,
        lower,
        best: n + 1,
        best_assign: (0..n).collect(),
        loads: Vec::new(),
        assign: vec![0; n],
    };
    search.run(0);
    Ok(search.best_assign)
}

/// Minimum number of vector bins. Refuses more than 12 vectors.
pub fn exact_vector_opt(vectors: &[Vec<Rational>]) -> Result<usize> {
    let assign = exact_vector_pack(vectors)?;
    Ok(assign.iter().max().map_or(0, |m| m + 1))
}

fn vector_components(items: &[(ItemKey, ItemSpec)]) -> Result<Vec<Vec<Rational>>> {
    items
        .iter()
        .map(|(_, item)| match &item.kind {
            ItemKind::Vector { components } => Ok(components.clone()),
            other => Err(PackError::Unsupported {
                kind: other.name().into(),
                algorithm: "exact-vector".into(),
            }),
        })
        .collect()
}

fn exact_vector_repack(items: &[(ItemKey, ItemSpec)], d: usize) -> Result<OfflineResult> {
    let vectors = vector_components(items)?;
    let assign = exact_vector_pack(&vectors)?;
    let mut solution = SolutionState::new(Domain::Vectors { d });
    for ((key, item), bin) in items.iter().zip(assign) {
        solution.insert(key.clone(), item.clone(), PlacementRecord::in_bin(bin, Vec::new()))?;
    }
    Ok(OfflineResult {
        solution,
        certified_gamma: Some(Rational::one()),
        certified_additive: Some(Rational::zero()),
        // opt never exceeds what first fit needs
        volume_certificate: Some(RatioCertificate {
            beta: Rational::from(2 * d),
            additive: Rational::one(),
            strict: true,
        }),
        provenance: Provenance::Exact,
    })
}

#[derive(Clone, Copy)]
struct GridRect {
    w: i128,
    h: i128,
}

#[derive(Clone, Copy)]
struct GridBox {
    x: i128,
    y: i128,
    w: i128,
    h: i128,
}

fn grid_overlap(a: &GridBox, b: &GridBox) -> bool {
    a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h
}

/// Lowest, then leftmost, free position among the corners formed by the
/// placed boxes.
fn bottom_left(placed: &[GridBox], r: GridRect, width: i128) -> GridBox {
    let mut xs: Vec<i128> = std::iter::once(0).chain(placed.iter().map(|b| b.x + b.w)).collect();
    let mut ys: Vec<i128> = std::iter::once(0).chain(placed.iter().map(|b| b.y + b.h)).collect();
    xs.retain(|&x| x + r.w <= width);
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    for &y in &ys {
        for &x in &xs {
            let cand = GridBox { x, y, w: r.w, h: r.h };
            if placed.iter().all(|b| !grid_overlap(b, &cand)) {
                return cand;
            }
        }
    }
    let y = placed.iter().map(|b| b.y + b.h).max().unwrap_or(0);
    GridBox { x: 0, y, w: r.w, h: r.h }
}

struct BlSearch {
    rects: Vec<GridRect>,
    width: i128,
    best: i128,
    used: Vec<bool>,
    placed: Vec<GridBox>,
}

impl BlSearch {
    fn run(&mut self, height: i128) {
        if height >= self.best {
            return;
        }
        if self.placed.len() == self.rects.len() {
            self.best = height;
            return;
        }
        for i in 0..self.rects.len() {
            if self.used[i] {
                continue;
            }
            let r = self.rects[i];
            // identical unused rectangles lead to the same subtrees
            if (0..i).any(|j| !self.used[j] && self.rects[j].w == r.w && self.rects[j].h == r.h) {
                continue;
            }
            let b = bottom_left(&self.placed, r, self.width);
            self.used[i] = true;
            self.placed.push(b);
            self.run(height.max(b.y + b.h));
            self.placed.pop();
            self.used[i] = false;
        }
    }
}

/// Best bottom-left strip height over all insertion orders: an upper bound
/// on the optimal height. Refuses more than 8 rectangles.
pub fn bottom_left_search(rects: &[(Rational, Rational)]) -> Result<Rational> {
    if rects.len() > BOTTOM_LEFT_LIMIT {
        return Err(PackError::TooLarge {
            size: rects.len(),
            limit: BOTTOM_LEFT_LIMIT,
        });
    }
    let one = Rational::one();
    for (w, h) in rects {
        if !w.is_positive() || !h.is_positive() || *w > one || *h > one {
            return Err(PackError::Offline(format!("rectangle ({w}, {h}) outside (0,1]")));
        }
    }
    let scale = common_denominator(rects.iter().flat_map(|(w, h)| [w, h]));
    let too_fine = || PackError::Offline("rectangle sides exceed the integer grid".into());
    let width = scaled_i128(&one, &scale).ok_or_else(too_fine)?;
    let grid = rects
        .iter()
        .map(|(w, h)| {
            Ok(GridRect {
                w: scaled_i128(w, &scale).ok_or_else(too_fine)?,
                h: scaled_i128(h, &scale).ok_or_else(too_fine)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total: i128 = grid.iter().map(|r| r.h).sum();
    let mut search = BlSearch {
        used: vec![false; grid.len()],
        rects: grid,
        width,
        best: total + 1,
        placed: Vec::new(),
    };
    search.run(0);
    let best = if rects.is_empty() { 0 } else { search.best };
    Ok(Rational::from_big(BigInt::from(best), scale))
}

/// Largest of the simple lower bounds on the optimum that apply to `domain`:
/// the volume, the tallest item for strips, the rounded-up volume and the
/// number of items that pairwise cannot share a bin for bins, and the
/// rounded-up per-coordinate load for vectors.
pub fn volume_lower_bound<'a>(items: impl IntoIterator<Item = &'a ItemSpec>, domain: Domain) -> Rational {
    let items: Vec<&ItemSpec> = items.into_iter().collect();
    let vol: Rational = items.iter().map(|i| i.size()).sum();
    lower_bound_with_volume(&items, domain, vol)
}

/// [`volume_lower_bound`] with the total size already known.
pub(crate) fn lower_bound_with_volume(items: &[&ItemSpec], domain: Domain, vol: Rational) -> Rational {
    match domain {
        Domain::Strip { d } => {
            let tallest = items
                .iter()
                .filter_map(|i| i.sides().and_then(|s| s.get(d - 1).cloned()))
                .max()
                .unwrap_or_default();
            vol.max(tallest)
        }
        Domain::Bins { .. } => {
            let half = Rational::new(1, 2);
            let big = items
                .iter()
                .filter(|i| i.sides().is_some_and(|s| s.iter().all(|x| *x > half)))
                .count();
            let nonempty = usize::from(!items.is_empty());
            vol.ceil().max(Rational::from(big.max(nonempty)))
        }
        Domain::Vectors { d } => {
            let mut best = vol.ceil().max(Rational::from(usize::from(!items.is_empty())));
            for k in 0..d {
                let load: Rational = items
                    .iter()
                    .filter_map(|i| match &i.kind {
                        ItemKind::Vector { components } => components.get(k).cloned(),
                        _ => None,
                    })
                    .sum();
                best = best.max(load.ceil());
            }
            best
        }
    }
}
