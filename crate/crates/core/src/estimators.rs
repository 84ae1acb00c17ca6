//! Finite-scale entropy estimators over constrained pattern sets.
//!
//! Everything is evaluated at word resolution: for `ε` between the family's
//! collar bound and its floor, Bowen balls on `F` are exactly `F`-cylinders,
//! so covering, separated and packing quantities reduce to pattern counts
//! and prefix-tree optimizations.
//!
//! Constraints that only read one-site frequencies ("depth 1") are counted by
//! a composition DP over symbol-count vectors; deeper constraints fall back to
//! budgeted enumeration.

use std::collections::{BTreeMap, HashMap};
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Dim, FiniteSubset, FolnerSequence, GroupElement};
use crate::measures::{centered_window, distance_to_set, empirical_measure, from_symbol_counts, CylinderMeasure, MeasureSet, MeasureSpec};
use crate::shift::{
    conflict_graph, count_admissible, for_each_pattern, ln_biguint, max_independent_set, CountQuality, Configuration, Extension,
    SeparatingFamily, ShiftSystem,
};

/// Float comparisons against tolerances allow this much rounding.
const TIE_SLACK: f64 = 1e-12;

/// Default enumeration budget for constraints deeper than one site.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// Membership rule for patterns on `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    All,
    /// Interior empirical measure within `delta` of `set` in the depth-`depth` truncated metric.
    MeasureBall { set: MeasureSet, delta: f64, depth: usize },
    /// `|F|^{-1} Σ_{s∈F} phi[x_s]` within `delta` of `a`.
    Birkhoff { phi: Vec<f64>, a: f64, delta: f64 },
    /// Every cylinder statistic `(radius, pattern)` within `xi` of its value under `center`.
    FNeighborhood { center: CylinderMeasure, functions: Vec<(usize, Vec<u8>)>, xi: f64 },
}

impl Constraint {
    /// Radius of the deepest window the constraint reads.
    pub fn radius(&self) -> usize {
        match self {
            Constraint::All | Constraint::Birkhoff { .. } => 0,
            Constraint::MeasureBall { depth, .. } => depth.saturating_sub(1),
            Constraint::FNeighborhood { functions, .. } => functions.iter().map(|f| f.0).max().unwrap_or(0),
        }
    }
}

/// The separating family truncated to the indicators of radius below `depth`.
pub fn family_for_depth(alphabet: usize, dim: Dim, depth: usize) -> Result<SeparatingFamily> {
    let probe = SeparatingFamily::new(alphabet, dim, 62)?;
    let l = (probe.block_offset(depth) - 1).min(crate::shift::DEFAULT_TRUNCATION as u64) as u32;
    SeparatingFamily::new(alphabet, dim, l.max(1))
}

/// A system together with a pattern constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub system: ShiftSystem,
    pub constraint: Constraint,
}

/// Positions `s ∈ F` with `s + W_r ⊆ F`.
pub fn interior(f: &FiniteSubset, radius: usize) -> FiniteSubset {
    if radius == 0 {
        return f.clone();
    }
    let w = centered_window(f.dim(), radius);
    FiniteSubset::from_elements(f.dim(), f.iter().copied().filter(|&s| w.iter().all(|&c| f.contains(&(c + s))))).expect("same dimension")
}

fn pattern_configuration(f: &FiniteSubset, pattern: &[u8]) -> Result<Configuration> {
    let (lo, hi) = f.bounding_box().ok_or(Error::EmptySet)?;
    let dim = f.dim();
    let extent = [(hi[0] - lo[0] + 1) as usize, if dim == Dim::Two { (hi[1] - lo[1] + 1) as usize } else { 1 }];
    let mut symbols = vec![0u8; extent[0] * extent[1]];
    for (&p, &a) in f.iter().zip(pattern) {
        let c = p.coords();
        symbols[(c[1] - lo[1]) as usize * extent[0] + (c[0] - lo[0]) as usize] = a;
    }
    Configuration::new(dim, lo, extent, symbols, Extension::Constant { fill: 0 })
}

/// Pattern-level empirical measure: only interior positions contribute.
pub fn interior_empirical(f: &FiniteSubset, pattern: &[u8], alphabet: usize, depth: usize) -> Result<(CylinderMeasure, f64)> {
    let inner = interior(f, depth.saturating_sub(1));
    if inner.is_empty() {
        return Err(Error::InvalidArgument(format!("window too small for depth {depth}")));
    }
    let x = pattern_configuration(f, pattern)?;
    let slack = (f.len() - inner.len()) as f64 / f.len() as f64;
    Ok((empirical_measure(&x, alphabet, &inner, depth)?, slack))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    Closed,
    CompositionDp,
    Enumeration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternCount {
    pub count: BigUint,
    /// Boundary fraction discarded by the interior convention (added to δ).
    pub slack: f64,
    pub method: CountMethod,
}

impl PatternCount {
    pub fn ln(&self) -> Option<f64> {
        (self.count != BigUint::from(0u8)).then(|| ln_biguint(&self.count))
    }
}

fn multinomial(counts: &[u32]) -> BigUint {
    let mut out = BigUint::from(1u8);
    let mut n = 0u64;
    for &c in counts {
        // Multiply by C(n + c, c) incrementally.
        for i in 1..=c as u64 {
            n += 1;
            out *= n;
            out /= i;
        }
    }
    out
}

fn for_each_composition<V: FnMut(&[u32])>(n: u32, k: usize, visit: &mut V) {
    fn rec<V: FnMut(&[u32])>(i: usize, left: u32, cur: &mut Vec<u32>, visit: &mut V) {
        if i + 1 == cur.len() {
            cur[i] = left;
            visit(cur);
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            rec(i + 1, left - c, cur, visit);
        }
    }
    let mut cur = vec![0u32; k];
    rec(0, n, &mut cur, visit);
}

fn is_interval(f: &FiniteSubset) -> bool {
    f.dim() == Dim::One && f.bounding_box().map(|(lo, hi)| (hi[0] - lo[0] + 1) as usize == f.len()).unwrap_or(false)
}

/// Admissible words of length `n` grouped by symbol-count vector, with
/// optional weights on the first and last symbol.
fn sft_compositions(system: &ShiftSystem, n: usize, left: &[BigUint], right: &[BigUint]) -> BTreeMap<Vec<u32>, BigUint> {
    let k = system.alphabet();
    let mut layer: HashMap<(u8, Vec<u32>), BigUint> = HashMap::new();
    for a in 0..k {
        if left[a] != BigUint::from(0u8) {
            let mut c = vec![0u32; k];
            c[a] = 1;
            layer.insert((a as u8, c), left[a].clone());
        }
    }
    for _ in 1..n {
        let mut next: HashMap<(u8, Vec<u32>), BigUint> = HashMap::new();
        for ((a, c), w) in &layer {
            for b in 0..k as u8 {
                if system.allowed(*a, b) {
                    let mut c2 = c.clone();
                    c2[b as usize] += 1;
                    *next.entry((b, c2)).or_insert_with(|| BigUint::from(0u8)) += w;
                }
            }
        }
        layer = next;
    }
    let mut out: BTreeMap<Vec<u32>, BigUint> = BTreeMap::new();
    for ((a, c), w) in layer {
        let weighted = w * &right[a as usize];
        *out.entry(c).or_insert_with(|| BigUint::from(0u8)) += weighted;
    }
    out
}

/// Number of admissible words of length `steps` + 1 ending (`into`) or starting at each symbol.
fn extension_weights(system: &ShiftSystem, steps: usize, into: bool) -> Vec<BigUint> {
    let k = system.alphabet();
    let mut v = vec![BigUint::from(1u8); k];
    for _ in 0..steps {
        let mut next = vec![BigUint::from(0u8); k];
        for a in 0..k {
            for b in 0..k {
                let (from, to) = if into { (b, a) } else { (a, b) };
                if system.allowed(from as u8, to as u8) {
                    next[a] += &v[b];
                }
            }
        }
        v = next;
    }
    v
}

impl PatternSet {
    pub fn new(system: ShiftSystem, constraint: Constraint) -> Self {
        PatternSet { system, constraint }
    }

    pub fn all(system: ShiftSystem) -> Self {
        PatternSet { system, constraint: Constraint::All }
    }

    /// Whether membership only depends on the symbol-count vector.
    pub fn is_depth_one(&self) -> bool {
        self.constraint.radius() == 0
    }

    /// Membership decided from symbol counts (depth-one constraints only).
    pub fn accepts_counts(&self, counts: &[u32]) -> Result<bool> {
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptySet);
        }
        match &self.constraint {
            Constraint::All => Ok(true),
            Constraint::Birkhoff { phi, a, delta } => {
                let avg: f64 = counts.iter().zip(phi).map(|(&c, &p)| c as f64 * p).sum::<f64>() / total as f64;
                Ok((avg - a).abs() <= delta + TIE_SLACK)
            }
            Constraint::MeasureBall { set, delta, depth } => {
                let fam = family_for_depth(self.system.alphabet(), self.system.dim(), *depth)?;
                let c64: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
                let e = from_symbol_counts(self.system.dim(), &c64)?;
                Ok(distance_to_set(&fam, &e, set)?.value <= delta + TIE_SLACK)
            }
            Constraint::FNeighborhood { center, functions, xi } => {
                let c64: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
                let e = from_symbol_counts(self.system.dim(), &c64)?;
                for (r, p) in functions {
                    if (e.window_mass(*r, p)? - center.window_mass(*r, p)?).abs() >= *xi {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    /// Membership of a pattern on `F` (cells in set order); returns the boundary slack too.
    pub fn contains(&self, f: &FiniteSubset, pattern: &[u8]) -> Result<(bool, f64)> {
        if !self.system.pattern_admissible(f, pattern) {
            return Ok((false, 0.0));
        }
        if self.is_depth_one() {
            let mut c = vec![0u32; self.system.alphabet()];
            for &a in pattern {
                c[a as usize] += 1;
            }
            return Ok((self.accepts_counts(&c)?, 0.0));
        }
        let k = self.system.alphabet();
        match &self.constraint {
            Constraint::MeasureBall { set, delta, depth } => {
                let (e, slack) = interior_empirical(f, pattern, k, *depth)?;
                let fam = family_for_depth(k, self.system.dim(), *depth)?;
                Ok((distance_to_set(&fam, &e, set)?.value <= delta + slack + TIE_SLACK, slack))
            }
            Constraint::FNeighborhood { center, functions, xi } => {
                let (e, slack) = interior_empirical(f, pattern, k, self.constraint.radius() + 1)?;
                for (r, p) in functions {
                    if (e.window_mass(*r, p)? - center.window_mass(*r, p)?).abs() >= xi + slack {
                        return Ok((false, slack));
                    }
                }
                Ok((true, slack))
            }
            Constraint::All | Constraint::Birkhoff { .. } => unreachable!("depth-one constraints handled above"),
        }
    }

    /// Patterns on `F ⊕ W` whose restriction to `F` belongs to the set.
    pub fn count(&self, f: &FiniteSubset, window: &FiniteSubset, budget: u64) -> Result<PatternCount> {
        let k = self.system.alphabet();
        let fw = f.product(window);
        let extra = fw.len() - f.len();
        if let Constraint::All = self.constraint {
            return Ok(PatternCount { count: count_admissible(&self.system, &fw)?, slack: 0.0, method: CountMethod::Closed });
        }
        let n = f.len() as u32;
        if self.is_depth_one() && self.system.is_full() {
            let mut total = BigUint::from(0u8);
            let mut err = None;
            for_each_composition(n, k, &mut |c: &[u32]| match self.accepts_counts(c) {
                Ok(true) => total += multinomial(c),
                Ok(false) => {}
                Err(e) => err = Some(e),
            });
            if let Some(e) = err {
                return Err(e);
            }
            total *= BigUint::from(k).pow(extra as u32);
            return Ok(PatternCount { count: total, slack: 0.0, method: CountMethod::CompositionDp });
        }
        let radius = window.iter().map(|e| e.x().unsigned_abs()).max().unwrap_or(0) as usize;
        if self.is_depth_one() && is_interval(f) {
            let (left, right) = if extra == 0 {
                (vec![BigUint::from(1u8); k], vec![BigUint::from(1u8); k])
            } else {
                (extension_weights(&self.system, radius, true), extension_weights(&self.system, radius, false))
            };
            let mut total = BigUint::from(0u8);
            for (c, w) in sft_compositions(&self.system, f.len(), &left, &right) {
                if self.accepts_counts(&c)? {
                    total += w;
                }
            }
            return Ok(PatternCount { count: total, slack: 0.0, method: CountMethod::CompositionDp });
        }
        // Enumeration; extensions multiply by a per-pattern factor.
        let ext_factor: Box<dyn Fn(&[u8]) -> BigUint> = if extra == 0 {
            Box::new(|_| BigUint::from(1u8))
        } else if self.system.is_full() {
            let factor = BigUint::from(k).pow(extra as u32);
            Box::new(move |_| factor.clone())
        } else if is_interval(f) {
            let left = extension_weights(&self.system, radius, true);
            let right = extension_weights(&self.system, radius, false);
            Box::new(move |p: &[u8]| &left[p[0] as usize] * &right[p[p.len() - 1] as usize])
        } else {
            return Err(Error::InvalidArgument("SFT window extensions need an interval F".into()));
        };
        let mut total = BigUint::from(0u8);
        let mut slack = 0.0f64;
        let mut err = None;
        for_each_pattern(&self.system, f, budget, |p| match self.contains(f, p) {
            Ok((true, s)) => {
                total += ext_factor(p);
                slack = slack.max(s);
            }
            Ok((false, s)) => slack = slack.max(s),
            Err(e) => err = Some(e),
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(PatternCount { count: total, slack, method: CountMethod::Enumeration })
    }

    /// Member patterns on `F`, in lexicographic order.
    pub fn members(&self, f: &FiniteSubset, budget: u64) -> Result<Vec<Vec<u8>>> {
        let mut out = Vec::new();
        let mut err = None;
        for_each_pattern(&self.system, f, budget, |p| match self.contains(f, p) {
            Ok((true, _)) => out.push(p.to_vec()),
            Ok(_) => {}
            Err(e) => err = Some(e),
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Upper,
    Lower,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub window_radius: usize,
    pub truncation: u32,
    pub depth: usize,
    /// Largest boundary slack added to δ over the range.
    pub slack: f64,
}

/// Per-`n` counts and their normalized logs, with a top-quartile slope.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub operation: &'static str,
    pub ns: Vec<u64>,
    pub sizes: Vec<u64>,
    pub counts: Vec<BigUint>,
    /// `ln(count)/|F_n|`; `None` marks an empty set.
    pub normalized: Vec<Option<f64>>,
    /// Mean of the normalized values over the top quartile of the range.
    pub slope: Option<f64>,
    /// Min and max over the top quartile.
    pub band: Option<(f64, f64)>,
    pub bias: Bias,
    pub quality: CountQuality,
    pub meta: EstimateMeta,
}

/// Index of the first element of the top quartile of a range of `len` values.
pub fn top_quartile_start(len: usize) -> usize {
    len - len.div_ceil(4).max(1).min(len)
}

fn fit(normalized: &[Option<f64>]) -> (Option<f64>, Option<(f64, f64)>) {
    if normalized.is_empty() {
        return (None, None);
    }
    let tail = &normalized[top_quartile_start(normalized.len())..];
    let vals: Option<Vec<f64>> = tail.iter().copied().collect();
    match vals {
        Some(v) if !v.is_empty() => {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Some(mean), Some((lo, hi)))
        }
        _ => (None, None),
    }
}

impl EntropyEstimate {
    pub(crate) fn build(
        operation: &'static str,
        rows: Vec<(u64, u64, BigUint)>,
        bias: Bias,
        quality: CountQuality,
        meta: EstimateMeta,
    ) -> Self {
        let mut est = EntropyEstimate {
            operation,
            ns: Vec::new(),
            sizes: Vec::new(),
            counts: Vec::new(),
            normalized: Vec::new(),
            slope: None,
            band: None,
            bias,
            quality,
            meta,
        };
        for (n, size, count) in rows {
            let norm = (count != BigUint::from(0u8)).then(|| ln_biguint(&count) / size as f64);
            est.ns.push(n);
            est.sizes.push(size);
            est.counts.push(count);
            est.normalized.push(norm);
        }
        let (slope, band) = fit(&est.normalized);
        est.slope = slope;
        est.band = band;
        est
    }

    /// One self-describing record per `n`.
    pub fn records(&self) -> Vec<serde_json::Value> {
        (0..self.ns.len())
            .map(|i| {
                serde_json::json!({
                    "record": "estimate",
                    "operation": self.operation,
                    "n": self.ns[i],
                    "size": self.sizes[i],
                    "count": self.counts[i].to_string(),
                    "normalized": self.normalized[i],
                    "empty": self.normalized[i].is_none(),
                    "slope": self.slope,
                    "band": self.band.map(|b| [b.0, b.1]),
                    "bias": self.bias,
                    "quality": self.quality,
                    "meta": self.meta,
                })
            })
            .collect()
    }
}

/// `log s_{F_n}(Z, ε)/|F_n|` at word resolution, for `n` in `ns`.
pub fn upper_capacity_estimate(
    z: &PatternSet,
    seq: &FolnerSequence,
    family: &SeparatingFamily,
    epsilon: f64,
    ns: RangeInclusive<u64>,
    budget: u64,
) -> Result<EntropyEstimate> {
    let res = family.resolution(epsilon)?;
    let origin = FiniteSubset::singleton(GroupElement::identity(seq.dim()));
    let exact = epsilon >= family.collar_bound();
    let mut rows = Vec::new();
    let mut slack = 0.0f64;
    for n in ns {
        let f = seq.get(n)?;
        let c = z.count(&f, &origin, budget)?;
        slack = slack.max(c.slack);
        rows.push((n, f.len() as u64, c.count));
    }
    let meta = EstimateMeta {
        epsilon,
        delta: None,
        window_radius: res.radius,
        truncation: family.truncation(),
        depth: z.constraint.radius() + 1,
        slack,
    };
    let quality = if exact { CountQuality::Exact } else { CountQuality::LowerBound };
    Ok(EntropyEstimate::build("upper_capacity", rows, Bias::TwoSided, quality, meta))
}

/// `𝓡(K, δ, n)`: admissible `F_n`-patterns whose interior empirical measure is within `δ` of `K`.
pub fn r_set_patterns(system: &ShiftSystem, k: &MeasureSet, delta: f64, depth: usize) -> PatternSet {
    PatternSet::new(system.clone(), Constraint::MeasureBall { set: k.clone(), delta, depth })
}

/// Θ-estimate: minimal Bowen-ball cover counts of `𝓡(K, δ, n)` at word resolution.
#[allow(clippy::too_many_arguments)]
pub fn theta_estimate(
    system: &ShiftSystem,
    k: &MeasureSet,
    delta: f64,
    depth: usize,
    seq: &FolnerSequence,
    family: &SeparatingFamily,
    epsilon: f64,
    ns: RangeInclusive<u64>,
) -> Result<EntropyEstimate> {
    let res = family.resolution(epsilon)?;
    let set = r_set_patterns(system, k, delta, depth);
    let mut rows = Vec::new();
    let mut slack = 0.0f64;
    for n in ns {
        let f = seq.get(n)?;
        let c = set.count(&f, &res.window, DEFAULT_BUDGET)?;
        slack = slack.max(c.slack);
        rows.push((n, f.len() as u64, c.count));
    }
    let fam_d = family_for_depth(system.alphabet(), system.dim(), depth)?;
    let meta = EstimateMeta {
        epsilon,
        delta: Some(delta),
        window_radius: res.radius,
        truncation: fam_d.truncation(),
        depth,
        slack,
    };
    let quality = if epsilon >= family.collar_bound() { CountQuality::Exact } else { CountQuality::UpperBound };
    Ok(EntropyEstimate::build("theta", rows, Bias::Upper, quality, meta))
}

/// A prefix tree with shared subtrees: nodes are classes of prefixes with
/// identical continuations. Depth `m` nodes stand for Bowen balls on `[0, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixDag {
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    root: usize,
    leaf_depth: usize,
}

impl PrefixDag {
    /// The trie of an explicit set of words of equal length.
    pub fn from_words(words: &[Vec<u8>]) -> Result<Self> {
        let len = words.first().map(Vec::len).ok_or(Error::EmptySet)?;
        if words.iter().any(|w| w.len() != len) {
            return Err(Error::InvalidArgument("prefix sets need words of equal length".into()));
        }
        let mut ids: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
        let mut depth = vec![0usize];
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        ids.insert(Vec::new(), 0);
        for w in words {
            let mut parent = 0;
            for m in 1..=len {
                let prefix = w[..m].to_vec();
                let id = match ids.get(&prefix) {
                    Some(&id) => id,
                    None => {
                        let id = depth.len();
                        ids.insert(prefix, id);
                        depth.push(m);
                        children.push(Vec::new());
                        children[parent].push(id);
                        id
                    }
                };
                parent = id;
            }
        }
        Ok(PrefixDag { depth, children, root: 0, leaf_depth: len })
    }

    /// Words of length `len` in a depth-one pattern set, with prefixes merged
    /// by (depth, symbol counts, last symbol).
    pub fn from_depth_one(set: &PatternSet, len: usize) -> Result<Self> {
        if !set.is_depth_one() || set.system.dim() != Dim::One {
            return Err(Error::InvalidArgument("count-merged prefix trees need a depth-one constraint on ℤ".into()));
        }
        let k = set.system.alphabet();
        type Key = (usize, Vec<u32>, Option<u8>);
        let mut alive: HashMap<Key, bool> = HashMap::new();
        fn is_alive(set: &PatternSet, key: &(usize, Vec<u32>, Option<u8>), len: usize, k: usize, memo: &mut HashMap<(usize, Vec<u32>, Option<u8>), bool>) -> Result<bool> {
            if let Some(&v) = memo.get(key) {
                return Ok(v);
            }
            let (m, c, last) = key;
            let v = if *m == len {
                set.accepts_counts(c)?
            } else {
                let mut any = false;
                for b in 0..k as u8 {
                    if last.map(|a| set.system.allowed(a, b)).unwrap_or(true) {
                        let mut c2 = c.clone();
                        c2[b as usize] += 1;
                        if is_alive(set, &(m + 1, c2, Some(b)), len, k, memo)? {
                            any = true;
                            break;
                        }
                    }
                }
                any
            };
            memo.insert(key.clone(), v);
            Ok(v)
        }
        let root_key: Key = (0, vec![0; k], None);
        if len == 0 || !is_alive(set, &root_key, len, k, &mut alive)? {
            return Err(Error::EmptySet);
        }
        let mut ids: HashMap<Key, usize> = HashMap::new();
        let mut depth = vec![0usize];
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        ids.insert(root_key.clone(), 0);
        let mut frontier = vec![root_key];
        for m in 0..len {
            let mut next_frontier = Vec::new();
            for key in frontier {
                let id = ids[&key];
                for b in 0..k as u8 {
                    if !key.2.map(|a| set.system.allowed(a, b)).unwrap_or(true) {
                        continue;
                    }
                    let mut c2 = key.1.clone();
                    c2[b as usize] += 1;
                    let child: Key = (m + 1, c2, Some(b));
                    if !is_alive(set, &child, len, k, &mut alive)? {
                        continue;
                    }
                    let cid = match ids.get(&child) {
                        Some(&c) => c,
                        None => {
                            let c = depth.len();
                            ids.insert(child.clone(), c);
                            depth.push(m + 1);
                            children.push(Vec::new());
                            next_frontier.push(child);
                            c
                        }
                    };
                    children[id].push(cid);
                }
            }
            frontier = next_frontier;
        }
        Ok(PrefixDag { depth, children, root: 0, leaf_depth: len })
    }

    pub fn leaf_depth(&self) -> usize {
        self.leaf_depth
    }

    /// Number of distinct prefixes of each length `0..=leaf_depth`.
    pub fn prefix_counts(&self) -> Vec<f64> {
        let mut paths = vec![0.0f64; self.depth.len()];
        paths[self.root] = 1.0;
        let mut order: Vec<usize> = (0..self.depth.len()).collect();
        order.sort_by_key(|&i| self.depth[i]);
        let mut by_level = vec![0.0; self.leaf_depth + 1];
        for &i in &order {
            by_level[self.depth[i]] += paths[i];
            for &c in &self.children[i] {
                paths[c] += paths[i];
            }
        }
        by_level
    }

    fn optimize(&self, s: f64, n_min: usize, cap: usize, pick_max: bool) -> f64 {
        let mut memo: Vec<Option<f64>> = vec![None; self.depth.len()];
        let mut order: Vec<usize> = (0..self.depth.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.depth[i]));
        for &i in &order {
            let m = self.depth[i];
            if m > cap {
                continue;
            }
            let own = (m >= n_min).then(|| (-s * m as f64).exp());
            let below = (m < cap).then(|| self.children[i].iter().map(|&c| memo[c].expect("children first")).sum::<f64>());
            memo[i] = Some(match (own, below) {
                (Some(a), Some(b)) => {
                    if pick_max {
                        a.max(b)
                    } else {
                        a.min(b)
                    }
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!("n_min ≤ cap"),
            });
        }
        memo[self.root].expect("root evaluated")
    }

    fn check_window(&self, n_min: usize, cap: usize) -> Result<()> {
        if n_min > cap || cap > self.leaf_depth || n_min == 0 {
            return Err(Error::InvalidArgument(format!(
                "index window [{n_min}, {cap}] must satisfy 1 ≤ N ≤ cap ≤ {}",
                self.leaf_depth
            )));
        }
        Ok(())
    }

    /// `min Σ e^{−s|F_{m_i}|}` over Bowen-ball covers with indices in `[N, cap]`.
    pub fn bowen_outer_value(&self, s: f64, n_min: usize, cap: usize) -> Result<f64> {
        self.check_window(n_min, cap)?;
        Ok(self.optimize(s, n_min, cap, false))
    }

    /// `max Σ e^{−s|F_{m_i}|}` over disjoint closed-ball packings centered in `Z`.
    pub fn packing_value(&self, s: f64, n_min: usize, cap: usize) -> Result<f64> {
        self.check_window(n_min, cap)?;
        Ok(self.optimize(s, n_min, cap, true))
    }
}

/// The `s` at which a non-increasing value function crosses 1.
pub fn critical_exponent<V: Fn(f64) -> Result<f64>>(value: V, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid)? >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Balls at word resolution are prefix cylinders; a packing is valid iff no
/// prefix extends another.
pub fn check_packing_disjoint(prefixes: &[Vec<u8>]) -> bool {
    for (i, a) in prefixes.iter().enumerate() {
        for b in &prefixes[i + 1..] {
            let m = a.len().min(b.len());
            if a[..m] == b[..m] {
                return false;
            }
        }
    }
    true
}

/// Packing value refined over declared finite partitions of `Z`:
/// `min over partitions Σ_i P(Z_i)`, an upper bound for the countable refinement.
pub fn packing_refined(partitions: &[Vec<Vec<Vec<u8>>>], s: f64, n_min: usize, cap: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for partition in partitions {
        let mut total = 0.0;
        for piece in partition {
            total += PrefixDag::from_words(piece)?.packing_value(s, n_min, cap)?;
        }
        best = best.min(total);
    }
    Ok(best)
}

/// Bowen-style ≤ packing-style ≤ upper-capacity-style, on one prefix set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingDiagnostics {
    pub n_min: usize,
    pub cap: usize,
    pub bowen_critical: f64,
    pub packing_critical: f64,
    /// Mean of `ln P_n / n` over the window, the usual fitted slope.
    pub uc_slope: f64,
    /// Max over the window, standing in for the limsup that defines upper capacity.
    pub uc_upper: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Critical exponents over the top quartile `[N, cap]` of `ns` against the
/// upper-capacity slope of the same prefix counts.
pub fn ordering_diagnostics(dag: &PrefixDag, ns: RangeInclusive<usize>, tolerance: f64) -> Result<OrderingDiagnostics> {
    let ns: Vec<usize> = ns.collect();
    if ns.is_empty() {
        return Err(Error::EmptySet);
    }
    let start = top_quartile_start(ns.len());
    let n_min = ns[start];
    let cap = *ns.last().expect("nonempty");
    let counts = dag.prefix_counts();
    let tail: Vec<f64> = ns[start..].iter().map(|&n| counts[n].ln() / n as f64).collect();
    let uc_slope = tail.iter().sum::<f64>() / tail.len() as f64;
    let uc_upper = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = counts.iter().map(|c| c.ln()).fold(0.0, f64::max) + 1.0;
    let bowen_critical = critical_exponent(|s| dag.bowen_outer_value(s, n_min, cap), -1.0, hi)?;
    let packing_critical = critical_exponent(|s| dag.packing_value(s, n_min, cap), -1.0, hi)?;
    let holds = bowen_critical <= packing_critical + tolerance && packing_critical <= uc_upper + tolerance;
    Ok(OrderingDiagnostics { n_min, cap, bowen_critical, packing_critical, uc_slope, uc_upper, tolerance, holds })
}

/// `−ln μ(B_{F_n}(x, ε))/|F_n|` for a measure with a generating spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropy {
    pub ns: Vec<u64>,
    pub values: Vec<f64>,
    /// Max and min over the top quartile, standing in for limsup and liminf.
    pub upper: f64,
    pub lower: f64,
    /// Whether balls coincide with `F_n`-cylinders at this `ε`.
    pub exact_balls: bool,
}

/// Ball masses are cylinder masses on `F_n ⊕ W(ε)`.
pub fn local_entropy_estimate(
    mu: &CylinderMeasure,
    x: &Configuration,
    family: &SeparatingFamily,
    epsilon: f64,
    seq: &FolnerSequence,
    ns: RangeInclusive<u64>,
) -> Result<LocalEntropy> {
    let spec = mu.spec().ok_or(Error::NoGeneratingSpec)?;
    let res = family.resolution(epsilon)?;
    let mut out = LocalEntropy { ns: Vec::new(), values: Vec::new(), upper: f64::NAN, lower: f64::NAN, exact_balls: res.radius == 0 };
    for n in ns {
        let f = seq.get(n)?;
        let fw = f.product(&res.window);
        let pattern = x.pattern_on(&fw);
        let ln_mass = match spec {
            // Count-based so that constant-weight cases come out exact.
            MeasureSpec::Bernoulli { p } => {
                let mut c = vec![0u64; p.len()];
                for &a in &pattern {
                    c[a as usize] += 1;
                }
                c.iter().zip(p).filter(|(&n, _)| n > 0).map(|(&n, &q)| n as f64 * q.ln()).sum::<f64>()
            }
            other => other.ln_cylinder_mass(&fw, &pattern),
        };
        out.ns.push(n);
        out.values.push(-ln_mass / f.len() as f64);
    }
    let tail = &out.values[top_quartile_start(out.values.len())..];
    out.upper = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.lower = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodCount {
    pub count: String,
    pub ln_count: Option<f64>,
    pub quality: CountQuality,
}

/// Separated counts over `X_{F,C}` for a measure neighborhood `C`.
///
/// Plain mode counts member patterns; Hamming mode finds the largest subset
/// whose pairs differ on at least `δ|F|` cells (exact up to `cap` members).
pub fn neighborhood_separated_count(
    c: &PatternSet,
    f: &FiniteSubset,
    family: &SeparatingFamily,
    epsilon: f64,
    hamming_delta: Option<f64>,
    cap: usize,
) -> Result<NeighborhoodCount> {
    family.resolution(epsilon)?;
    let exact_res = epsilon >= family.collar_bound();
    let origin = FiniteSubset::singleton(GroupElement::identity(f.dim()));
    match hamming_delta {
        None => {
            let pc = c.count(f, &origin, DEFAULT_BUDGET)?;
            Ok(NeighborhoodCount {
                ln_count: pc.ln(),
                count: pc.count.to_string(),
                quality: if exact_res { CountQuality::Exact } else { CountQuality::LowerBound },
            })
        }
        Some(delta) => {
            let members = c.members(f, DEFAULT_BUDGET)?;
            let need = (delta * f.len() as f64).ceil() as usize;
            let far = |a: &[u8], b: &[u8]| a.iter().zip(b).filter(|(u, v)| u != v).count() >= need;
            let (size, exact) = if members.len() <= cap.min(128) {
                let adj = conflict_graph(members.len(), |i, j| !far(&members[i], &members[j]));
                max_independent_set(&adj, 5_000_000)
            } else {
                let mut code: Vec<&Vec<u8>> = Vec::new();
                for m in &members {
                    if code.iter().all(|c| far(c, m)) {
                        code.push(m);
                    }
                }
                (code.len(), false)
            };
            let quality = if exact && exact_res { CountQuality::Exact } else { CountQuality::LowerBound };
            Ok(NeighborhoodCount { count: size.to_string(), ln_count: (size > 0).then(|| (size as f64).ln()), quality })
        }
    }
}

/// Whether `points` are `(δ, F, ε)`-separated: each pair has at least `δ|F|` mistakes.
pub fn is_hamming_separated(family: &SeparatingFamily, points: &[Configuration], f: &FiniteSubset, delta: f64, epsilon: f64) -> bool {
    let need = delta * f.len() as f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (family.mistakes(&points[i], &points[j], f, epsilon) as f64) < need {
                return false;
            }
        }
    }
    true
}

/// Restriction check: a `(δ*, F, ε*)`-separated set stays `(δ*/2, F′, ε*)`-separated
/// on `F′ ⊆ F` with `|F′|/|F| > 1 − δ` and `δ < min(½, ξ/3, δ*/2)`.
/// Returns `None` when the hypotheses fail, else the conclusion.
#[allow(clippy::too_many_arguments)]
pub fn restriction_keeps_separation(
    family: &SeparatingFamily,
    points: &[Configuration],
    f: &FiniteSubset,
    f_prime: &FiniteSubset,
    delta: f64,
    xi: f64,
    delta_star: f64,
    epsilon_star: f64,
) -> Option<bool> {
    let premise = f_prime.is_subset(f)
        && (f_prime.len() as f64) > (1.0 - delta) * f.len() as f64
        && delta < 0.5f64.min(xi / 3.0).min(delta_star / 2.0)
        && is_hamming_separated(family, points, f, delta_star, epsilon_star);
    premise.then(|| is_hamming_separated(family, points, f_prime, delta_star / 2.0, epsilon_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::make_measure;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binary() -> (ShiftSystem, SeparatingFamily) {
        let s = ShiftSystem::full(2, Dim::One).unwrap();
        let f = SeparatingFamily::for_system(&s);
        (s, f)
    }

    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn bern_set(ps: &[f64], mode: crate::measures::SetMode) -> MeasureSet {
        let vs = ps.iter().map(|&p| make_measure(&MeasureSpec::bernoulli_binary(p), Dim::One, 1).unwrap()).collect();
        MeasureSet::new(vs, mode).unwrap()
    }

    #[test]
    fn full_shift_capacity_is_log_two() {
        let (s, fam) = binary();
        let est = upper_capacity_estimate(&PatternSet::all(s), &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.5, 1..=20, DEFAULT_BUDGET).unwrap();
        for (i, c) in est.counts.iter().enumerate() {
            assert_eq!(*c, BigUint::from(1u32 << (i + 1)));
        }
        assert_abs_diff_eq!(est.slope.unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(est.quality, CountQuality::Exact);
    }

    #[test]
    fn golden_mean_capacity() {
        let g = ShiftSystem::golden_mean();
        let fam = SeparatingFamily::for_system(&g);
        let est = upper_capacity_estimate(&PatternSet::all(g), &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.5, 1..=24, DEFAULT_BUDGET).unwrap();
        let log_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((est.normalized[23].unwrap() - log_phi).abs() < 0.02);
    }

    #[test]
    fn empty_constraint_sentinel() {
        let (s, fam) = binary();
        let z = PatternSet::new(s, Constraint::Birkhoff { phi: vec![0.0, 1.0], a: 0.3, delta: 0.0 });
        let est = upper_capacity_estimate(&z, &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.5, 1..=4, DEFAULT_BUDGET).unwrap();
        assert!(est.normalized.iter().all(Option::is_none));
        assert_eq!(est.slope, None);
    }

    #[test]
    fn r_set_examples() {
        let (s, _) = binary();
        let f = FiniteSubset::interval(0, 10);
        let origin = FiniteSubset::singleton(GroupElement::d1(0));
        let half = bern_set(&[0.5], crate::measures::SetMode::Polyline);
        let loose = r_set_patterns(&s, &half, 0.5, 1);
        // Depth-1 distance is 0.75·|freq − ½| ≤ 0.375 < 0.5 for every pattern.
        assert_eq!(loose.count(&f, &origin, DEFAULT_BUDGET).unwrap().count, BigUint::from(1024u32));
        let zero = bern_set(&[0.0], crate::measures::SetMode::Polyline);
        let tight = r_set_patterns(&s, &zero, 1e-9, 1);
        assert_eq!(tight.members(&f, DEFAULT_BUDGET).unwrap(), vec![vec![0u8; 10]]);
        // Segment ¼–¾ with δ = 0.05: frequencies in [0.25 − 0.0667, 0.75 + 0.0667], i.e. k ∈ [4, 16] at n = 20.
        let seg = bern_set(&[0.25, 0.75], crate::measures::SetMode::Polyline);
        let band = r_set_patterns(&s, &seg, 0.05, 1);
        let f20 = FiniteSubset::interval(0, 20);
        let oracle: f64 = (4..=16).map(|k| choose(20, k)).sum();
        assert_eq!(band.count(&f20, &origin, DEFAULT_BUDGET).unwrap().count, BigUint::from(oracle as u64));
    }

    #[test]
    fn r_set_dp_matches_enumeration() {
        let (s, _) = binary();
        let seg = bern_set(&[0.25, 0.75], crate::measures::SetMode::Polyline);
        let band = r_set_patterns(&s, &seg, 0.05, 1);
        let f = FiniteSubset::interval(0, 12);
        let origin = FiniteSubset::singleton(GroupElement::d1(0));
        let dp = band.count(&f, &origin, DEFAULT_BUDGET).unwrap().count;
        assert_eq!(dp, BigUint::from(band.members(&f, DEFAULT_BUDGET).unwrap().len()));
        let g = ShiftSystem::golden_mean();
        let gb = PatternSet::new(g, Constraint::Birkhoff { phi: vec![0.0, 1.0], a: 0.3, delta: 0.1 });
        assert_eq!(gb.count(&f, &origin, DEFAULT_BUDGET).unwrap().count, BigUint::from(gb.members(&f, DEFAULT_BUDGET).unwrap().len()));
    }

    #[test]
    fn theta_quarter() {
        let (s, fam) = binary();
        let k = bern_set(&[0.25], crate::measures::SetMode::Polyline);
        let est = theta_estimate(&s, &k, 0.05, 1, &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.5, 20..=20).unwrap();
        let oracle = choose(20, 4) + choose(20, 5) + choose(20, 6);
        assert_eq!(est.counts[0], BigUint::from(oracle as u64));
        assert!((est.slope.unwrap() - 0.5623).abs() < 0.06);
        let wide = theta_estimate(&s, &k, 0.2, 1, &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.5, 20..=20).unwrap();
        assert!(wide.counts[0] >= est.counts[0]);
    }

    #[test]
    fn theta_with_collar_window_multiplies_extensions() {
        let (s, fam) = binary();
        let k = bern_set(&[0.25], crate::measures::SetMode::Polyline);
        let at_half = theta_estimate(&s, &k, 0.05, 1, &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.5, 10..=10).unwrap();
        let at_fifth = theta_estimate(&s, &k, 0.05, 1, &FolnerSequence::StandardBoxes(Dim::One), &fam, 0.2, 10..=10).unwrap();
        assert_eq!(at_fifth.counts[0], &at_half.counts[0] * BigUint::from(4u8));
    }

    #[test]
    fn deeper_constraint_uses_interior_measure() {
        let (s, _) = binary();
        let k = MeasureSet::singleton(make_measure(&MeasureSpec::bernoulli_binary(0.5), Dim::One, 2).unwrap());
        let set = r_set_patterns(&s, &k, 0.1, 2);
        let f = FiniteSubset::interval(0, 8);
        let origin = FiniteSubset::singleton(GroupElement::d1(0));
        let pc = set.count(&f, &origin, DEFAULT_BUDGET).unwrap();
        assert_eq!(pc.method, CountMethod::Enumeration);
        assert_abs_diff_eq!(pc.slack, 2.0 / 8.0);
        // Brute force with the same interior convention.
        let fam = family_for_depth(2, Dim::One, 2).unwrap();
        let mut brute = 0u32;
        for w in 0u32..256 {
            let word: Vec<u8> = (0..8).map(|i| (w >> (7 - i) & 1) as u8).collect();
            let x = Configuration::padded_word(&word, 0, 0).unwrap();
            let e = empirical_measure(&x, 2, &FiniteSubset::interval(1, 7), 2).unwrap();
            let d = crate::measures::weakstar_distance(&fam, &e, &k.vertices[0]).unwrap().value;
            if d <= 0.1 + 0.25 + 1e-12 {
                brute += 1;
            }
        }
        assert_eq!(pc.count, BigUint::from(brute));
    }

    #[test]
    fn bowen_and_packing_singletons() {
        let dag = PrefixDag::from_words(&[vec![0, 1, 1, 0, 1]]).unwrap();
        let s = 0.7;
        assert_abs_diff_eq!(dag.bowen_outer_value(s, 2, 4).unwrap(), (-4.0 * s).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(dag.packing_value(s, 2, 4).unwrap(), (-2.0 * s).exp(), epsilon = 1e-15);
    }

    fn full_words(n: usize) -> Vec<Vec<u8>> {
        (0u32..1 << n).map(|w| (0..n).map(|i| (w >> (n - 1 - i) & 1) as u8).collect()).collect()
    }

    #[test]
    fn full_shift_bowen_and_packing() {
        let dag = PrefixDag::from_words(&full_words(10)).unwrap();
        let ln2 = std::f64::consts::LN_2;
        // Uniform covers at level m cost 2^m e^{−sm}; the optimum is the best level.
        for s in [0.5, 0.9] {
            let oracle = (4..=10).map(|m| 2f64.powi(m) * (-s * m as f64).exp()).fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(dag.bowen_outer_value(s, 4, 10).unwrap(), oracle, epsilon = 1e-12);
        }
        assert!(dag.bowen_outer_value(0.5, 4, 10).unwrap() >= 1.0);
        assert!(dag.bowen_outer_value(0.9, 8, 10).unwrap() < dag.bowen_outer_value(0.9, 4, 6).unwrap());
        let below = dag.packing_value(0.5, 4, 10).unwrap();
        assert!(below > dag.packing_value(0.5, 4, 8).unwrap());
        let above = dag.packing_value(0.9, 4, 10).unwrap();
        // Geometric oracle: the best packing is a full level, here the shallowest.
        assert_abs_diff_eq!(above, 16.0 * (-0.9f64 * 4.0).exp(), epsilon = 1e-12);
        let diag = ordering_diagnostics(&dag, 1..=10, 0.02).unwrap();
        assert!(diag.holds);
        assert_abs_diff_eq!(diag.packing_critical, ln2, epsilon = 1e-9);
        assert_abs_diff_eq!(diag.bowen_critical, ln2, epsilon = 1e-9);
    }

    /// Exhaustive oracle: every antichain cover of the leaves with depths in [N, cap].
    fn brute_cover(words: &[Vec<u8>], s: f64, n_min: usize, cap: usize) -> f64 {
        fn go(prefix: &[u8], words: &[Vec<u8>], s: f64, n_min: usize, cap: usize) -> f64 {
            let m = prefix.len();
            let under: Vec<&Vec<u8>> = words.iter().filter(|w| w.starts_with(prefix)).collect();
            if under.is_empty() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            if m >= n_min {
                best = (-s * m as f64).exp();
            }
            if m < cap {
                let split: f64 = [0u8, 1].iter().map(|&b| {
                    let mut p = prefix.to_vec();
                    p.push(b);
                    go(&p, words, s, n_min, cap)
                }).sum();
                best = best.min(split);
            }
            best
        }
        go(&[], words, s, n_min, cap)
    }

    #[test]
    fn mixed_index_cover_beats_uniform() {
        // Two scales: a dense cluster under prefix 0 and a single word under prefix 1.
        let mut words: Vec<Vec<u8>> = full_words(5).into_iter().map(|mut w| {
            w.insert(0, 0);
            w
        }).collect();
        words.push(vec![1, 1, 1, 1, 1, 1]);
        let dag = PrefixDag::from_words(&words).unwrap();
        let s = 0.4;
        let dp = dag.bowen_outer_value(s, 1, 6).unwrap();
        assert_abs_diff_eq!(dp, brute_cover(&words, s, 1, 6), epsilon = 1e-15);
        let uniform = (1..=6).map(|m| dag.prefix_counts()[m] * (-s * m as f64).exp()).fold(f64::INFINITY, f64::min);
        assert!(dp < uniform - 1e-9);
    }

    #[test]
    fn packing_disjointness_checker() {
        assert!(check_packing_disjoint(&[vec![0, 1], vec![1], vec![0, 0, 1]]));
        assert!(!check_packing_disjoint(&[vec![0, 1], vec![0, 1, 1]]));
    }

    #[test]
    fn count_dag_matches_explicit_trie() {
        let (s, _) = binary();
        let seg = bern_set(&[0.25, 0.75], crate::measures::SetMode::Polyline);
        let set = r_set_patterns(&s, &seg, 0.05, 1);
        let f = FiniteSubset::interval(0, 12);
        let members = set.members(&f, DEFAULT_BUDGET).unwrap();
        let a = PrefixDag::from_words(&members).unwrap();
        let b = PrefixDag::from_depth_one(&set, 12).unwrap();
        assert_eq!(a.prefix_counts(), b.prefix_counts());
        for s in [0.3, 0.6, 0.9] {
            assert_abs_diff_eq!(a.bowen_outer_value(s, 6, 12).unwrap(), b.bowen_outer_value(s, 6, 12).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(a.packing_value(s, 6, 12).unwrap(), b.packing_value(s, 6, 12).unwrap(), epsilon = 1e-12);
        }
        let refined = packing_refined(&[vec![members.clone()], vec![members[..3].to_vec(), members[3..].to_vec()]], 0.6, 6, 12).unwrap();
        assert!(refined <= a.packing_value(0.6, 6, 12).unwrap() + 1e-12);
    }

    #[test]
    fn local_entropies() {
        let (_, fam) = binary();
        let seq = FolnerSequence::StandardBoxes(Dim::One);
        let half = make_measure(&MeasureSpec::bernoulli_binary(0.5), Dim::One, 1).unwrap();
        let x = Configuration::periodic_word(&[0, 1, 1, 0, 1, 0, 0, 0, 1]).unwrap();
        let le = local_entropy_estimate(&half, &x, &fam, 0.5, &seq, 1..=50).unwrap();
        for v in &le.values {
            assert_abs_diff_eq!(*v, std::f64::consts::LN_2, epsilon = 1e-15);
        }
        let quarter = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 1).unwrap();
        let zero = Configuration::periodic_word(&[0]).unwrap();
        let le = local_entropy_estimate(&quarter, &zero, &fam, 0.5, &seq, 1000..=1000).unwrap();
        assert!((le.values[0] - (4.0f64 / 3.0).ln()).abs() < 1e-3);
        let empirical = crate::measures::empirical_measure_of_word(&[0, 1], 2, 1).unwrap();
        assert!(local_entropy_estimate(&empirical, &zero, &fam, 0.5, &seq, 1..=2).is_err());
    }

    #[test]
    fn typical_point_local_entropy() {
        use rand::SeedableRng;
        let (_, fam) = binary();
        let spec = MeasureSpec::bernoulli_binary(0.25);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Configuration::periodic_word(&spec.sample_word(400, &mut rng)).unwrap();
        let mu = make_measure(&spec, Dim::One, 1).unwrap();
        let le = local_entropy_estimate(&mu, &x, &fam, 0.5, &FolnerSequence::StandardBoxes(Dim::One), 400..=400).unwrap();
        assert!((le.values[0] - spec.entropy()).abs() < 0.05);
    }

    #[test]
    fn neighborhood_counts() {
        let (s, fam) = binary();
        let f = FiniteSubset::interval(0, 20);
        let whole = neighborhood_separated_count(&PatternSet::all(s.clone()), &f, &fam, 0.5, None, 64).unwrap();
        assert_eq!(whole.count, (1u64 << 20).to_string());
        // B(Bernoulli(¼), 0.05) at depth 1 is the band 0.75·|k/20 − ¼| ≤ 0.05.
        let ball = r_set_patterns(&s, &bern_set(&[0.25], crate::measures::SetMode::Polyline), 0.05, 1);
        let c = neighborhood_separated_count(&ball, &f, &fam, 0.5, None, 64).unwrap();
        let oracle = choose(20, 4) + choose(20, 5) + choose(20, 6);
        assert_eq!(c.count, (oracle as u64).to_string());
        let small = FiniteSubset::interval(0, 6);
        let plain = neighborhood_separated_count(&ball, &small, &fam, 0.5, None, 64).unwrap();
        let ham = neighborhood_separated_count(&ball, &small, &fam, 0.5, Some(0.5), 64).unwrap();
        assert!(ham.count.parse::<u64>().unwrap() <= plain.count.parse::<u64>().unwrap());
    }

    #[test]
    fn f_neighborhood_constraint() {
        let (s, _) = binary();
        let center = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 1).unwrap();
        let set = PatternSet::new(s, Constraint::FNeighborhood { center, functions: vec![(0, vec![1])], xi: 0.1 });
        let f = FiniteSubset::interval(0, 10);
        // |k/10 − ¼| < 0.1 ⇔ k ∈ {2, 3}.
        let origin = FiniteSubset::singleton(GroupElement::d1(0));
        assert_eq!(set.count(&f, &origin, DEFAULT_BUDGET).unwrap().count, BigUint::from((choose(10, 2) + choose(10, 3)) as u64));
    }

    proptest! {
        #[test]
        fn theta_counts_shrink_with_delta(d1 in 0.01f64..0.3, d2 in 0.01f64..0.3, n in 4u64..16) {
            let (s, fam) = binary();
            let k = bern_set(&[0.3], crate::measures::SetMode::Polyline);
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let seq = FolnerSequence::StandardBoxes(Dim::One);
            let a = theta_estimate(&s, &k, lo, 1, &seq, &fam, 0.5, n..=n).unwrap();
            let b = theta_estimate(&s, &k, hi, 1, &seq, &fam, 0.5, n..=n).unwrap();
            prop_assert!(a.counts[0] <= b.counts[0]);
            // Shrinking K shrinks the count.
            let big = bern_set(&[0.2, 0.4], crate::measures::SetMode::Polyline);
            let c = theta_estimate(&s, &big, lo, 1, &seq, &fam, 0.5, n..=n).unwrap();
            prop_assert!(a.counts[0] <= c.counts[0]);
        }

        #[test]
        fn bowen_packing_monotonicity(seed in 0u64..500, s in 0.1f64..1.2) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let words: Vec<Vec<u8>> = (0..rng.gen_range(1..40)).map(|_| (0..8).map(|_| rng.gen_range(0..2u8)).collect()).collect();
            let dag = PrefixDag::from_words(&words).unwrap();
            for cap in 3..8 {
                prop_assert!(dag.bowen_outer_value(s, 2, cap + 1).unwrap() <= dag.bowen_outer_value(s, 2, cap).unwrap() + 1e-15);
                prop_assert!(dag.packing_value(s, 2, cap + 1).unwrap() >= dag.packing_value(s, 2, cap).unwrap() - 1e-15);
                prop_assert!(dag.bowen_outer_value(s, 3, cap).unwrap() >= dag.bowen_outer_value(s, 2, cap).unwrap() - 1e-15);
                prop_assert!(dag.bowen_outer_value(s, 2, cap).unwrap() <= dag.packing_value(s, 2, cap).unwrap() + 1e-15);
            }
            prop_assert!(dag.bowen_outer_value(s + 0.1, 2, 6).unwrap() <= dag.bowen_outer_value(s, 2, 6).unwrap());
            prop_assert!((dag.bowen_outer_value(s, 1, 8).unwrap() - brute_cover(&words, s, 1, 8)).abs() < 1e-12);
        }

        #[test]
        fn restriction_lemma(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let (_, fam) = binary();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 24;
            let f = FiniteSubset::interval(0, n);
            let pts: Vec<Configuration> = (0..6)
                .map(|_| Configuration::periodic_word(&(0..n).map(|_| rng.gen_range(0..2u8)).collect::<Vec<_>>()).unwrap())
                .collect();
            let delta_star = 0.25;
            let delta = 0.1;
            let drop = rng.gen_range(0..=2);
            let f_prime = FiniteSubset::interval(drop, n);
            if let Some(ok) = restriction_keeps_separation(&fam, &pts, &f, &f_prime, delta, 0.5, delta_star, 0.5) {
                prop_assert!(ok);
            }
        }
    }
}
