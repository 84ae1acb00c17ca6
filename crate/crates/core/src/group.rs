//! The lattice groups ℤ and ℤ², their finite subsets and Følner sequences.
//!
//! Group elements are small integer vectors; composition is coordinate-wise
//! addition. A [`FiniteSubset`] is the common currency for Følner sets,
//! tiles and window shapes.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn rank(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn from_rank(rank: usize) -> Result<Dim> {
        match rank {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            r => Err(Error::InvalidArgument(format!("unsupported lattice rank {r}"))),
        }
    }
}

/// An element of ℤ or ℤ². In rank one the second coordinate is always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    dim: Dim,
    coords: [i64; 2],
}

impl GroupElement {
    pub fn d1(x: i64) -> Self {
        GroupElement { dim: Dim::One, coords: [x, 0] }
    }

    pub fn d2(x: i64, y: i64) -> Self {
        GroupElement { dim: Dim::Two, coords: [x, y] }
    }

    pub fn identity(dim: Dim) -> Self {
        GroupElement { dim, coords: [0, 0] }
    }

    pub fn from_coords(dim: Dim, coords: [i64; 2]) -> Self {
        match dim {
            Dim::One => Self::d1(coords[0]),
            Dim::Two => Self::d2(coords[0], coords[1]),
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn coords(&self) -> [i64; 2] {
        self.coords
    }

    pub fn x(&self) -> i64 {
        self.coords[0]
    }

    pub fn y(&self) -> i64 {
        self.coords[1]
    }

    pub fn is_identity(&self) -> bool {
        self.coords == [0, 0]
    }

    pub fn inverse(self) -> Self {
        -self
    }
}

impl Add for GroupElement {
    type Output = GroupElement;
    fn add(self, rhs: GroupElement) -> GroupElement {
        debug_assert_eq!(self.dim, rhs.dim);
        GroupElement {
            dim: self.dim,
            coords: [self.coords[0] + rhs.coords[0], self.coords[1] + rhs.coords[1]],
        }
    }
}

impl Sub for GroupElement {
    type Output = GroupElement;
    fn sub(self, rhs: GroupElement) -> GroupElement {
        self + (-rhs)
    }
}

impl Neg for GroupElement {
    type Output = GroupElement;
    fn neg(self) -> GroupElement {
        GroupElement { dim: self.dim, coords: [-self.coords[0], -self.coords[1]] }
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            Dim::One => write!(f, "({})", self.coords[0]),
            Dim::Two => write!(f, "({},{})", self.coords[0], self.coords[1]),
        }
    }
}

/// A finite set of group elements of one fixed dimension.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteSubset {
    dim: Dim,
    elements: BTreeSet<GroupElement>,
}

impl FiniteSubset {
    pub fn empty(dim: Dim) -> Self {
        FiniteSubset { dim, elements: BTreeSet::new() }
    }

    pub fn from_elements<I: IntoIterator<Item = GroupElement>>(dim: Dim, elements: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for e in elements {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.dim() });
            }
            set.insert(e);
        }
        Ok(FiniteSubset { dim, elements: set })
    }

    pub fn singleton(e: GroupElement) -> Self {
        FiniteSubset { dim: e.dim(), elements: std::iter::once(e).collect() }
    }

    /// The integer interval `[lo, hi)` in ℤ.
    pub fn interval(lo: i64, hi: i64) -> Self {
        FiniteSubset { dim: Dim::One, elements: (lo..hi).map(GroupElement::d1).collect() }
    }

    /// The integer points of `[x0, x1) × [y0, y1)` in ℤ².
    pub fn rect(x0: i64, x1: i64, y0: i64, y1: i64) -> Self {
        let mut elements = BTreeSet::new();
        for x in x0..x1 {
            for y in y0..y1 {
                elements.insert(GroupElement::d2(x, y));
            }
        }
        FiniteSubset { dim: Dim::Two, elements }
    }

    /// The standard box `[0, n)` or `[0, n)²`.
    pub fn standard_box(dim: Dim, n: i64) -> Self {
        match dim {
            Dim::One => Self::interval(0, n),
            Dim::Two => Self::rect(0, n, 0, n),
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: &GroupElement) -> bool {
        self.elements.contains(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupElement> + '_ {
        self.elements.iter()
    }

    pub fn elements(&self) -> &BTreeSet<GroupElement> {
        &self.elements
    }

    pub fn insert(&mut self, e: GroupElement) -> Result<bool> {
        self.check_elem(&e)?;
        Ok(self.elements.insert(e))
    }

    fn check_elem(&self, e: &GroupElement) -> Result<()> {
        if e.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: e.dim() });
        }
        Ok(())
    }

    pub fn check_same_dim(&self, other: &FiniteSubset) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    /// The right translate `Fc = {f + c}`.
    pub fn translate(&self, c: GroupElement) -> FiniteSubset {
        FiniteSubset { dim: self.dim, elements: self.elements.iter().map(|&f| f + c).collect() }
    }

    pub fn inverse(&self) -> FiniteSubset {
        FiniteSubset { dim: self.dim, elements: self.elements.iter().map(|&f| -f).collect() }
    }

    /// The product set `{a + b : a ∈ self, b ∈ other}`.
    pub fn product(&self, other: &FiniteSubset) -> FiniteSubset {
        let mut elements = BTreeSet::new();
        for &a in &self.elements {
            for &b in &other.elements {
                elements.insert(a + b);
            }
        }
        FiniteSubset { dim: self.dim, elements }
    }

    pub fn union(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset { dim: self.dim, elements: self.elements.union(&other.elements).copied().collect() }
    }

    pub fn intersection(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset {
            dim: self.dim,
            elements: self.elements.intersection(&other.elements).copied().collect(),
        }
    }

    pub fn difference(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset { dim: self.dim, elements: self.elements.difference(&other.elements).copied().collect() }
    }

    pub fn symmetric_difference(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset {
            dim: self.dim,
            elements: self.elements.symmetric_difference(&other.elements).copied().collect(),
        }
    }

    pub fn intersection_len(&self, other: &FiniteSubset) -> usize {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.elements.iter().filter(|e| large.elements.contains(e)).count()
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> bool {
        self.elements.is_subset(&other.elements)
    }

    pub fn is_disjoint(&self, other: &FiniteSubset) -> bool {
        self.elements.is_disjoint(&other.elements)
    }

    /// Inclusive per-axis bounds `(min, max)`, or `None` for the empty set.
    pub fn bounding_box(&self) -> Option<([i64; 2], [i64; 2])> {
        let mut it = self.elements.iter();
        let first = it.next()?.coords();
        let (mut lo, mut hi) = (first, first);
        for e in it {
            let c = e.coords();
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        Some((lo, hi))
    }

    /// Canonical text form: one coordinate tuple per line, sorted.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for e in &self.elements {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse_canonical_text(dim: Dim, text: &str) -> Result<Self> {
        let mut set = FiniteSubset::empty(dim);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let inner = line
                .strip_prefix('(')
                .and_then(|l| l.strip_suffix(')'))
                .ok_or_else(|| Error::InvalidArgument(format!("bad tuple {line:?}")))?;
            let nums: Vec<i64> = inner
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let e = match (dim, nums.as_slice()) {
                (Dim::One, [x]) => GroupElement::d1(*x),
                (Dim::Two, [x, y]) => GroupElement::d2(*x, *y),
                _ => return Err(Error::InvalidArgument(format!("tuple {line:?} does not match {dim:?}"))),
            };
            set.insert(e)?;
        }
        Ok(set)
    }
}

impl fmt::Debug for FiniteSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.elements.iter()).finish()
    }
}

/// An exact count ratio `count / size`, kept unreduced so the raw counts stay visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRatio {
    pub count: u64,
    pub size: u64,
}

impl CountRatio {
    pub fn new(count: u64, size: u64) -> Self {
        CountRatio { count, size }
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.count, self.size)
    }

    pub fn value(&self) -> f64 {
        self.count as f64 / self.size as f64
    }

    /// Strict `count/size < threshold`, decided in integer arithmetic.
    pub fn is_below(&self, threshold: Ratio<u64>) -> bool {
        (self.count as u128) * (*threshold.denom() as u128) < (*threshold.numer() as u128) * (self.size as u128)
    }
}

/// `∂_K(F) = {c : Kc ∩ F ≠ ∅ and Kc ⊄ F}`.
///
/// Every such `c` has the form `f − k`, so the candidates are exactly `F·K⁻¹`.
pub fn boundary(k: &FiniteSubset, f: &FiniteSubset) -> Result<FiniteSubset> {
    k.check_same_dim(f)?;
    if k.is_empty() {
        return Err(Error::EmptySet);
    }
    let candidates = f.product(&k.inverse());
    let mut out = FiniteSubset::empty(f.dim());
    for &c in candidates.iter() {
        let leaves = k.iter().any(|&kk| !f.contains(&(kk + c)));
        if leaves {
            out.elements.insert(c);
        }
    }
    Ok(out)
}

/// `|∂_K(F)| / |F|`; `F` is (K, δ)-invariant iff this is strictly below δ.
pub fn invariance_defect(k: &FiniteSubset, f: &FiniteSubset) -> Result<CountRatio> {
    if f.is_empty() {
        return Err(Error::EmptySet);
    }
    let b = boundary(k, f)?;
    Ok(CountRatio::new(b.len() as u64, f.len() as u64))
}

pub fn is_invariant(k: &FiniteSubset, f: &FiniteSubset, delta: Ratio<u64>) -> Result<bool> {
    Ok(invariance_defect(k, f)?.is_below(delta))
}

/// `|gF △ F| / |F|`.
pub fn folner_defect(g: GroupElement, f: &FiniteSubset) -> Result<CountRatio> {
    if f.is_empty() {
        return Err(Error::EmptySet);
    }
    if g.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: g.dim() });
    }
    let moved = f.translate(g);
    let sd = moved.symmetric_difference(f).len();
    Ok(CountRatio::new(sd as u64, f.len() as u64))
}

/// A Følner sequence `F_1, F_2, …` (indices start at 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FolnerSequence {
    /// `[0, n)` in ℤ or `[0, n)²` in ℤ².
    StandardBoxes(Dim),
    /// An explicit finite list; index `n` maps to `sets[n - 1]`.
    Custom(Vec<FiniteSubset>),
}

impl FolnerSequence {
    pub fn dim(&self) -> Dim {
        match self {
            FolnerSequence::StandardBoxes(d) => *d,
            FolnerSequence::Custom(sets) => sets.first().map(|s| s.dim()).unwrap_or(Dim::One),
        }
    }

    pub fn len_hint(&self) -> Option<usize> {
        match self {
            FolnerSequence::StandardBoxes(_) => None,
            FolnerSequence::Custom(sets) => Some(sets.len()),
        }
    }

    pub fn get(&self, n: u64) -> Result<FiniteSubset> {
        if n == 0 {
            return Err(Error::InvalidArgument("Følner indices start at 1".into()));
        }
        match self {
            FolnerSequence::StandardBoxes(d) => Ok(FiniteSubset::standard_box(*d, n as i64)),
            FolnerSequence::Custom(sets) => sets
                .get(n as usize - 1)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("custom sequence has no F_{n}"))),
        }
    }

    /// `|F_n|` without materializing standard boxes.
    pub fn cardinality(&self, n: u64) -> Result<u64> {
        match self {
            FolnerSequence::StandardBoxes(Dim::One) => Ok(n),
            FolnerSequence::StandardBoxes(Dim::Two) => Ok(n * n),
            FolnerSequence::Custom(_) => Ok(self.get(n)?.len() as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub n: u64,
    pub size: u64,
    /// `|⋃_{k<n} F_k⁻¹ F_n| / |F_n|`.
    pub temperedness: CountRatio,
    /// `|F_n| / log n`; infinite at `n = 1`.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDiagnostics {
    pub rows: Vec<SequenceRow>,
    /// Growth ratio strictly increasing over `2..=up_to`.
    pub growth_monotone: bool,
    /// Growth ratio strictly increasing over the second half of the range.
    pub growth_monotone_tail: bool,
    pub max_temperedness: f64,
}

pub fn sequence_diagnostics(seq: &FolnerSequence, up_to: u64) -> Result<SequenceDiagnostics> {
    if up_to < 2 {
        return Err(Error::InvalidArgument("up_to must be at least 2".into()));
    }
    let sets: Vec<FiniteSubset> = (1..=up_to).map(|n| seq.get(n)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(sets.len());
    for (i, fnn) in sets.iter().enumerate() {
        let n = i as u64 + 1;
        if fnn.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut union = FiniteSubset::empty(fnn.dim());
        for fk in &sets[..i] {
            union = union.union(&fk.inverse().product(fnn));
        }
        let growth = if n == 1 { f64::INFINITY } else { fnn.len() as f64 / (n as f64).ln() };
        rows.push(SequenceRow {
            n,
            size: fnn.len() as u64,
            temperedness: CountRatio::new(union.len() as u64, fnn.len() as u64),
            growth,
        });
    }
    let increasing = |rs: &[SequenceRow]| rs.windows(2).all(|w| w[1].growth > w[0].growth);
    let from_two = &rows[1..];
    let tail = &from_two[from_two.len() / 2..];
    let max_temperedness = rows.iter().map(|r| r.temperedness.value()).fold(0.0, f64::max);
    Ok(SequenceDiagnostics {
        growth_monotone: increasing(from_two),
        growth_monotone_tail: tail.len() >= 2 && increasing(tail),
        max_temperedness,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_boundary(k: &FiniteSubset, f: &FiniteSubset) -> FiniteSubset {
        // Widened scan: bounding box of F inflated by twice the K diameter.
        let (flo, fhi) = f.bounding_box().unwrap();
        let (klo, khi) = k.bounding_box().unwrap();
        let pad = [(khi[0] - klo[0]) + klo[0].abs().max(khi[0].abs()) + 1, (khi[1] - klo[1]) + klo[1].abs().max(khi[1].abs()) + 1];
        let mut out = FiniteSubset::empty(f.dim());
        let ys: Vec<i64> = match f.dim() {
            Dim::One => vec![0],
            Dim::Two => (flo[1] - 2 * pad[1]..=fhi[1] + 2 * pad[1]).collect(),
        };
        for x in flo[0] - 2 * pad[0]..=fhi[0] + 2 * pad[0] {
            for &y in &ys {
                let c = GroupElement::from_coords(f.dim(), [x, y]);
                let t = k.translate(c);
                let hits = t.iter().any(|e| f.contains(e));
                let leaves = t.iter().any(|e| !f.contains(e));
                if hits && leaves {
                    out.insert(c).unwrap();
                }
            }
        }
        out
    }

    fn k3() -> FiniteSubset {
        FiniteSubset::interval(-1, 2)
    }

    #[test]
    fn singleton_k_has_empty_boundary() {
        let k = FiniteSubset::singleton(GroupElement::d1(0));
        assert!(boundary(&k, &FiniteSubset::interval(0, 10)).unwrap().is_empty());
    }

    #[test]
    fn three_point_boundary_of_interval() {
        let b = boundary(&k3(), &FiniteSubset::interval(0, 10)).unwrap();
        let expected: Vec<i64> = vec![-1, 0, 9, 10];
        assert_eq!(b.iter().map(|e| e.x()).collect::<Vec<_>>(), expected);
        assert_eq!(b, brute_boundary(&k3(), &FiniteSubset::interval(0, 10)));
    }

    #[test]
    fn corner_shape_boundary_in_plane_matches_brute_force() {
        let k = FiniteSubset::from_elements(
            Dim::Two,
            [GroupElement::d2(0, 0), GroupElement::d2(1, 0), GroupElement::d2(0, 1)],
        )
        .unwrap();
        let f = FiniteSubset::rect(0, 5, 0, 5);
        let b = boundary(&k, &f).unwrap();
        assert_eq!(b, brute_boundary(&k, &f));
        // Frozen from the brute-force scan: the row and column at -1 (5 + 5)
        // plus the row and column at 4 (5 + 5 − 1 shared corner).
        assert_eq!(b.len(), 19);
    }

    #[test]
    fn defects_match_closed_forms() {
        let d = invariance_defect(&k3(), &FiniteSubset::interval(0, 10)).unwrap();
        assert_eq!((d.count, d.size), (4, 10));
        for n in 3..=50 {
            let f = FiniteSubset::interval(0, n);
            let d = invariance_defect(&k3(), &f).unwrap();
            assert_eq!(d.count, 4);
            assert_eq!(d.count, brute_boundary(&k3(), &f).len() as u64);
        }
        let k0 = FiniteSubset::singleton(GroupElement::d1(0));
        assert_eq!(invariance_defect(&k0, &FiniteSubset::interval(3, 9)).unwrap().count, 0);
        assert!(invariance_defect(&k3(), &FiniteSubset::empty(Dim::One)).is_err());
        assert!(matches!(
            invariance_defect(&FiniteSubset::rect(0, 1, 0, 1), &FiniteSubset::interval(0, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn strict_invariance_threshold() {
        let d = invariance_defect(&k3(), &FiniteSubset::interval(0, 80)).unwrap();
        // 4/80 = 0.05 exactly: not below 0.05.
        assert!(!d.is_below(Ratio::new(5, 100)));
        assert!(d.is_below(Ratio::new(51, 1000)));
    }

    #[test]
    fn folner_defect_examples() {
        let d = folner_defect(GroupElement::d1(1), &FiniteSubset::interval(0, 10)).unwrap();
        assert_eq!((d.count, d.size), (2, 10));
        let d = folner_defect(GroupElement::identity(Dim::One), &FiniteSubset::interval(0, 10)).unwrap();
        assert_eq!(d.count, 0);
        let d = folner_defect(GroupElement::d2(1, 0), &FiniteSubset::rect(0, 8, 0, 8)).unwrap();
        assert_eq!((d.count, d.size), (16, 64));
    }

    #[test]
    fn canonical_text_round_trip() {
        let f = FiniteSubset::rect(-1, 1, 0, 2);
        let text = f.to_canonical_text();
        assert_eq!(text, "(-1,0)\n(-1,1)\n(0,0)\n(0,1)\n");
        assert_eq!(FiniteSubset::parse_canonical_text(Dim::Two, &text).unwrap(), f);
    }

    #[test]
    fn diagnostics_for_standard_sequences() {
        let d1 = sequence_diagnostics(&FolnerSequence::StandardBoxes(Dim::One), 10).unwrap();
        assert!(d1.rows.iter().all(|r| r.temperedness.value() <= 2.0));
        let d2 = sequence_diagnostics(&FolnerSequence::StandardBoxes(Dim::Two), 8).unwrap();
        assert!(d2.growth_monotone);
        let constant = FolnerSequence::Custom(vec![FiniteSubset::singleton(GroupElement::d1(0)); 10]);
        let dc = sequence_diagnostics(&constant, 10).unwrap();
        assert!(!dc.growth_monotone && !dc.growth_monotone_tail);
        assert!(dc.rows.last().unwrap().growth < 0.5);
    }

    #[test]
    fn box_defect_decreases_in_n() {
        let k = FiniteSubset::interval(-2, 3);
        let mut last = f64::INFINITY;
        for n in 5..=100 {
            let v = invariance_defect(&k, &FiniteSubset::interval(0, n)).unwrap().value();
            assert!(v <= last);
            last = v;
        }
    }
}
