//! Quasi-tilings, their disjointification, congruent tiling hierarchies and
//! the Følner decomposition `M(k)`, `H(k)`, `𝓗_k` with the brick covers `Λ_n`.
//!
//! Congruent tilings are aligned dyadic (more generally, nested) box
//! partitions of ℤ^d. Decompositions are only materialized on the region
//! meeting the requested `F_n`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{invariance_defect, Dim, FiniteSubset, GroupElement};

/// Smallest integer strictly greater than `(1 − ε)·size`.
fn strict_keep_threshold(size: usize, epsilon: Ratio<u64>) -> usize {
    let (num, den) = (*epsilon.numer() as u128, *epsilon.denom() as u128);
    let keep = (den.saturating_sub(num)) * size as u128;
    (keep / den) as usize + 1
}

fn check_epsilon(epsilon: Ratio<u64>) -> Result<()> {
    if *epsilon.numer() == 0 || epsilon >= Ratio::from_integer(1) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsDisjointOutcome {
    /// Pairwise disjoint `B_i ⊆ A_i` with `|B_i| > (1 − ε)|A_i|`.
    Witness(Vec<FiniteSubset>),
    /// No such family exists; the search is exact, so this is a proof.
    Refusal,
}

impl EpsDisjointOutcome {
    pub fn is_witness(&self) -> bool {
        matches!(self, EpsDisjointOutcome::Witness(_))
    }
}

/// Decides ε-disjointness exactly.
///
/// Points lying in a single set are kept by that set; the remaining shared
/// points are distributed by a bipartite max-flow against each set's residual
/// demand, which is feasible iff a witness exists.
pub fn check_eps_disjoint(sets: &[FiniteSubset], epsilon: Ratio<u64>) -> Result<EpsDisjointOutcome> {
    check_epsilon(epsilon)?;
    if let Some(first) = sets.first() {
        for s in sets {
            first.check_same_dim(s)?;
        }
    }
    let mut owners: BTreeMap<GroupElement, Vec<usize>> = BTreeMap::new();
    for (i, s) in sets.iter().enumerate() {
        for &p in s.iter() {
            owners.entry(p).or_default().push(i);
        }
    }
    let mut chosen: Vec<FiniteSubset> = sets.iter().map(|s| FiniteSubset::empty(s.dim())).collect();
    let mut shared: Vec<(GroupElement, Vec<usize>)> = Vec::new();
    for (p, own) in owners {
        if own.len() == 1 {
            chosen[own[0]].insert(p)?;
        } else {
            shared.push((p, own));
        }
    }
    let demand: Vec<usize> = sets
        .iter()
        .zip(&chosen)
        .map(|(s, c)| {
            if s.is_empty() {
                0
            } else {
                strict_keep_threshold(s.len(), epsilon).saturating_sub(c.len())
            }
        })
        .collect();
    let total: usize = demand.iter().sum();
    if total == 0 {
        return Ok(EpsDisjointOutcome::Witness(chosen));
    }
    if total > shared.len() {
        return Ok(EpsDisjointOutcome::Refusal);
    }
    let assignment = bipartite_assign(&shared, &demand, sets.len());
    match assignment {
        Some(assign) => {
            for (pi, set) in assign.into_iter().enumerate() {
                if let Some(i) = set {
                    chosen[i].insert(shared[pi].0)?;
                }
            }
            Ok(EpsDisjointOutcome::Witness(chosen))
        }
        None => Ok(EpsDisjointOutcome::Refusal),
    }
}

/// Assigns shared points to sets so that set `i` receives `demand[i]` points.
/// Augmenting-path search on the unit-capacity point side.
fn bipartite_assign(shared: &[(GroupElement, Vec<usize>)], demand: &[usize], nsets: usize) -> Option<Vec<Option<usize>>> {
    let mut assign: Vec<Option<usize>> = vec![None; shared.len()];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nsets];
    for (pi, (_, own)) in shared.iter().enumerate() {
        for &i in own {
            members[i].push(pi);
        }
    }
    let mut filled = vec![0usize; nsets];

    fn augment(
        set: usize,
        members: &[Vec<usize>],
        shared: &[(GroupElement, Vec<usize>)],
        assign: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &pi in &members[set] {
            if visited[pi] {
                continue;
            }
            visited[pi] = true;
            match assign[pi] {
                None => {
                    assign[pi] = Some(set);
                    return true;
                }
                Some(other) => {
                    // `other` keeps its count if it can take a different point.
                    if augment(other, members, shared, assign, visited) {
                        assign[pi] = Some(set);
                        return true;
                    }
                }
            }
        }
        false
    }

    for set in 0..nsets {
        while filled[set] < demand[set] {
            let mut visited = vec![false; shared.len()];
            if augment(set, &members, shared, &mut assign, &mut visited) {
                filled[set] += 1;
            } else {
                return None;
            }
        }
    }
    Some(assign)
}

/// An ε-quasi-tile of `target`: shapes `K_i` with center sets `C_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiTile {
    pub shapes: Vec<FiniteSubset>,
    pub centers: Vec<Vec<GroupElement>>,
    pub target: FiniteSubset,
    pub epsilon: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiTileCheck {
    pub inside_target: bool,
    pub shape_families_disjoint: bool,
    pub translates_eps_disjoint: bool,
    pub covered: usize,
    pub target_len: usize,
    pub coverage_ok: bool,
}

impl QuasiTileCheck {
    pub fn all_hold(&self) -> bool {
        self.inside_target && self.shape_families_disjoint && self.translates_eps_disjoint && self.coverage_ok
    }

    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.target_len as f64
    }
}

impl QuasiTile {
    pub fn translates(&self, shape: usize) -> Vec<FiniteSubset> {
        self.centers[shape].iter().map(|&c| self.shapes[shape].translate(c)).collect()
    }

    pub fn union_of_shape(&self, shape: usize) -> FiniteSubset {
        self.translates(shape)
            .iter()
            .fold(FiniteSubset::empty(self.target.dim()), |acc, t| acc.union(t))
    }

    pub fn tile_count(&self) -> usize {
        self.centers.iter().map(Vec::len).sum()
    }

    /// Re-checks the four defining properties from scratch.
    pub fn validate(&self) -> Result<QuasiTileCheck> {
        let unions: Vec<FiniteSubset> = (0..self.shapes.len()).map(|i| self.union_of_shape(i)).collect();
        let inside_target = unions.iter().all(|u| u.is_subset(&self.target));
        let mut shape_families_disjoint = true;
        for i in 0..unions.len() {
            for j in i + 1..unions.len() {
                if !unions[i].is_disjoint(&unions[j]) {
                    shape_families_disjoint = false;
                }
            }
        }
        let mut translates_eps_disjoint = true;
        for i in 0..self.shapes.len() {
            if !check_eps_disjoint(&self.translates(i), self.epsilon)?.is_witness() {
                translates_eps_disjoint = false;
            }
        }
        let all = unions.iter().fold(FiniteSubset::empty(self.target.dim()), |a, u| a.union(u));
        let covered = all.intersection_len(&self.target);
        let (num, den) = (*self.epsilon.numer() as u128, *self.epsilon.denom() as u128);
        let coverage_ok = covered as u128 * den >= (den - num) * self.target.len() as u128;
        Ok(QuasiTileCheck {
            inside_target,
            shape_families_disjoint,
            translates_eps_disjoint,
            covered,
            target_len: self.target.len(),
            coverage_ok,
        })
    }
}

/// Greedy Ornstein–Weiss placement.
///
/// Shapes are taken largest first; candidate centers are scanned in
/// lexicographic order. A translate `K_i c` is accepted when it lies in `A`,
/// avoids every cell already claimed by another shape, and brings strictly
/// more than `(1 − ε)|K_i|` cells not yet covered by its own shape.
pub fn quasi_tile(target: &FiniteSubset, shapes: &[FiniteSubset], epsilon: Ratio<u64>) -> Result<QuasiTile> {
    check_epsilon(epsilon)?;
    if target.is_empty() || shapes.is_empty() || shapes.iter().any(FiniteSubset::is_empty) {
        return Err(Error::EmptySet);
    }
    for s in shapes {
        target.check_same_dim(s)?;
    }
    if shapes.windows(2).any(|w| w[0].len() > w[1].len()) {
        return Err(Error::InvalidArgument("shapes must be indexed by increasing cardinality".into()));
    }
    let mut owner: HashMap<GroupElement, usize> = HashMap::new();
    let mut centers: Vec<Vec<GroupElement>> = vec![Vec::new(); shapes.len()];
    for i in (0..shapes.len()).rev() {
        let shape = &shapes[i];
        let anchor = *shape.iter().next().expect("nonempty shape");
        let need = strict_keep_threshold(shape.len(), epsilon);
        let candidates: Vec<GroupElement> = target.iter().map(|&a| a - anchor).collect();
        for c in candidates {
            let mut fresh = 0usize;
            let mut ok = true;
            for &k in shape.iter() {
                let p = k + c;
                if !target.contains(&p) {
                    ok = false;
                    break;
                }
                match owner.get(&p) {
                    Some(&o) if o != i => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => fresh += 1,
                }
            }
            if ok && fresh >= need {
                for &k in shape.iter() {
                    owner.insert(k + c, i);
                }
                centers[i].push(c);
            }
        }
    }
    let covered = owner.len();
    let (num, den) = (*epsilon.numer() as u128, *epsilon.denom() as u128);
    if (covered as u128) * den < (den - num) * target.len() as u128 {
        return Err(Error::CoverageShortfall {
            achieved: covered as f64 / target.len() as f64,
            required: 1.0 - num as f64 / den as f64,
        });
    }
    Ok(QuasiTile { shapes: shapes.to_vec(), centers, target: target.clone(), epsilon })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverPiece {
    /// `K(c) ⊆ K_i`, expressed relative to the center.
    pub shrunk_shape: FiniteSubset,
    pub center: GroupElement,
    pub parent: usize,
}

impl CoverPiece {
    pub fn cells(&self) -> FiniteSubset {
        self.shrunk_shape.translate(self.center)
    }
}

/// Pairwise disjoint shrunk translates covering at least `(1 − ε)²|A|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointCover {
    pub pieces: Vec<CoverPiece>,
    pub parents: Vec<FiniteSubset>,
    pub target: FiniteSubset,
    pub epsilon: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointCoverCheck {
    pub pairwise_disjoint: bool,
    pub pieces_within_parents: bool,
    pub retention_ok: bool,
    pub covered: usize,
    pub target_len: usize,
    /// `covered ≥ (1 − ε)²|A|`, decided in integers.
    pub squared_coverage_ok: bool,
}

impl DisjointCoverCheck {
    pub fn all_hold(&self) -> bool {
        self.pairwise_disjoint && self.pieces_within_parents && self.retention_ok && self.squared_coverage_ok
    }
}

impl DisjointCover {
    pub fn covered_len(&self) -> usize {
        self.pieces.iter().map(|p| p.shrunk_shape.len()).sum()
    }

    pub fn validate(&self) -> DisjointCoverCheck {
        let mut seen: HashMap<GroupElement, usize> = HashMap::new();
        let mut pairwise_disjoint = true;
        let mut pieces_within_parents = true;
        let mut retention_ok = true;
        let (num, den) = (*self.epsilon.numer() as u128, *self.epsilon.denom() as u128);
        for (idx, p) in self.pieces.iter().enumerate() {
            let parent = &self.parents[p.parent];
            if !p.shrunk_shape.is_subset(parent) {
                pieces_within_parents = false;
            }
            if (p.shrunk_shape.len() as u128) * den < (den - num) * parent.len() as u128 {
                retention_ok = false;
            }
            for &cell in p.cells().iter() {
                if seen.insert(cell, idx).is_some() {
                    pairwise_disjoint = false;
                }
            }
        }
        let covered = seen.keys().filter(|c| self.target.contains(c)).count();
        let keep = den - num;
        let squared_coverage_ok = covered as u128 * den * den >= keep * keep * self.target.len() as u128;
        DisjointCoverCheck {
            pairwise_disjoint,
            pieces_within_parents,
            retention_ok,
            covered,
            target_len: self.target.len(),
            squared_coverage_ok,
        }
    }

    pub fn coverage(&self) -> f64 {
        self.covered_len() as f64 / self.target.len() as f64
    }
}

/// Shrinks every translate of a valid quasi-tile to a pairwise disjoint cover.
///
/// Translates claim their cells first-come in placement order; if that leaves
/// some translate at or below `(1 − ε)` of its shape, the exact ε-disjointness
/// witness is used for that shape family instead.
pub fn disjointify(qt: &QuasiTile) -> Result<DisjointCover> {
    let check = qt.validate()?;
    if !check.all_hold() {
        return Err(Error::InvalidArgument(format!("quasi-tile fails its own re-check: {check:?}")));
    }
    let mut pieces = Vec::new();
    for (i, shape) in qt.shapes.iter().enumerate() {
        let need = strict_keep_threshold(shape.len(), qt.epsilon);
        let mut claimed = FiniteSubset::empty(qt.target.dim());
        let mut family = Vec::new();
        let mut greedy_ok = true;
        for &c in &qt.centers[i] {
            let t = shape.translate(c);
            let kept = t.difference(&claimed);
            if kept.len() < need {
                greedy_ok = false;
                break;
            }
            claimed = claimed.union(&kept);
            family.push(CoverPiece { shrunk_shape: kept.translate(-c), center: c, parent: i });
        }
        if !greedy_ok {
            family.clear();
            match check_eps_disjoint(&qt.translates(i), qt.epsilon)? {
                EpsDisjointOutcome::Witness(bs) => {
                    for (b, &c) in bs.iter().zip(&qt.centers[i]) {
                        family.push(CoverPiece { shrunk_shape: b.translate(-c), center: c, parent: i });
                    }
                }
                EpsDisjointOutcome::Refusal => {
                    return Err(Error::InvalidArgument(format!("shape {i} translates are not ε-disjoint")));
                }
            }
        }
        pieces.extend(family);
    }
    Ok(DisjointCover { pieces, parents: qt.shapes.clone(), target: qt.target.clone(), epsilon: qt.epsilon })
}

/// An aligned box tile `[lo, lo + side)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub dim: Dim,
    pub lo: [i64; 2],
    pub side: i64,
}

impl Tile {
    pub fn len(&self) -> u64 {
        (self.side as u64).pow(self.dim.rank() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn to_subset(&self) -> FiniteSubset {
        match self.dim {
            Dim::One => FiniteSubset::interval(self.lo[0], self.lo[0] + self.side),
            Dim::Two => FiniteSubset::rect(self.lo[0], self.lo[0] + self.side, self.lo[1], self.lo[1] + self.side),
        }
    }

    pub fn center(&self) -> GroupElement {
        GroupElement::from_coords(self.dim, self.lo)
    }

    /// Whether the tile lies inside the box `[0, n)^d`.
    pub fn inside_standard_box(&self, n: i64) -> bool {
        (0..self.dim.rank()).all(|a| self.lo[a] >= 0 && self.lo[a] + self.side <= n)
    }
}

/// A congruent sequence of aligned box tilings `T_1, T_2, …` of ℤ^d.
///
/// Level `k` (1-based) tiles ℤ^d by `[0, s_k)^d + s_k ℤ^d`; each side divides
/// the next, which makes every level-`k+1` tile a disjoint union of
/// `(s_{k+1}/s_k)^d` level-`k` tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingHierarchy {
    pub dim: Dim,
    pub sides: Vec<i64>,
}

impl TilingHierarchy {
    pub fn levels(&self) -> usize {
        self.sides.len()
    }

    /// Side length of level `k` (1-based).
    pub fn side(&self, level: usize) -> i64 {
        self.sides[level - 1]
    }

    /// The single shape `S_k = [0, s_k)^d`.
    pub fn shape(&self, level: usize) -> FiniteSubset {
        FiniteSubset::standard_box(self.dim, self.side(level))
    }

    pub fn tile_containing(&self, level: usize, p: GroupElement) -> Tile {
        let s = self.side(level);
        let c = p.coords();
        let mut lo = [c[0].div_euclid(s) * s, c[1].div_euclid(s) * s];
        if self.dim == Dim::One {
            lo[1] = 0;
        }
        Tile { dim: self.dim, lo, side: s }
    }

    /// Level-`level` tiles whose union is `tile` (a tile of a coarser level).
    pub fn children(&self, level: usize, tile: &Tile) -> Vec<Tile> {
        let s = self.side(level);
        let per = tile.side / s;
        let mut out = Vec::new();
        let ys = if self.dim == Dim::Two { per } else { 1 };
        for i in 0..per {
            for j in 0..ys {
                out.push(Tile { dim: self.dim, lo: [tile.lo[0] + i * s, tile.lo[1] + j * s], side: s });
            }
        }
        out
    }

    /// Checks that the level-`level` tiles meeting `tile` exactly partition it.
    pub fn congruence_holds(&self, level: usize, tile: &Tile) -> bool {
        let target = tile.to_subset();
        let mut meeting: Vec<Tile> = target.iter().map(|&p| self.tile_containing(level, p)).collect();
        meeting.sort();
        meeting.dedup();
        let mut union = FiniteSubset::empty(self.dim);
        let mut total = 0usize;
        for t in &meeting {
            let cells = t.to_subset();
            total += cells.len();
            union = union.union(&cells);
        }
        union == target && total == target.len()
    }
}

pub fn build_hierarchy(dim: Dim, sides: &[i64]) -> Result<TilingHierarchy> {
    if sides.is_empty() || sides[0] < 1 {
        return Err(Error::NonDividingSides(sides.to_vec()));
    }
    for w in sides.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(Error::NonDividingSides(sides.to_vec()));
        }
    }
    Ok(TilingHierarchy { dim, sides: sides.to_vec() })
}

/// Smallest power of two `s` with `[0, s)^d` being `(K, ε)`-invariant.
pub fn minimal_dyadic_side(k: &FiniteSubset, epsilon: Ratio<u64>, max_exponent: u32) -> Result<i64> {
    for e in 0..=max_exponent {
        let s = 1i64 << e;
        let f = FiniteSubset::standard_box(k.dim(), s);
        if invariance_defect(k, &f)?.is_below(epsilon) {
            return Ok(s);
        }
    }
    Err(Error::BudgetExceeded(format!("no dyadic side up to 2^{max_exponent} is invariant enough")))
}

/// Dyadic hierarchy whose level-`k` shape is `(K_k, ε_k)`-invariant.
pub fn hierarchy_for_invariance(dim: Dim, requests: &[(FiniteSubset, Ratio<u64>)]) -> Result<TilingHierarchy> {
    let mut sides: Vec<i64> = Vec::new();
    for (k, eps) in requests {
        let mut s = minimal_dyadic_side(k, *eps, 24)?;
        if let Some(&prev) = sides.last() {
            s = s.max(prev * 2);
        }
        sides.push(s);
    }
    build_hierarchy(dim, &sides)
}

/// `|∂_{[0,s)^d}([0,n)^d)|` in closed form.
pub fn box_boundary_len(dim: Dim, side: i64, n: i64) -> u64 {
    let meet = (n + side - 1) as u64;
    let inside = (n - side + 1).max(0) as u64;
    let r = dim.rank() as u32;
    meet.pow(r) - inside.pow(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionLevel {
    /// `M(k)`.
    pub m: u64,
    /// Side of the box `H(k) = [0, h)^d`; zero for `H(0) = ∅`.
    pub h_side: i64,
    /// Defect `|∂_{S_{k+1}} F_{M(k)}|·|S_{k+1}| / |F_{M(k)}|`, which must stay below `β_{k+1}`.
    pub scaled_defect: f64,
    /// `|H(k−1)| / |F_{M(k)}|`, which must stay below `β_{k+1}`.
    pub previous_h_fraction: f64,
}

/// The nested decomposition of `⋃ F_n` into layers of standard bricks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolnerDecomposition {
    pub dim: Dim,
    pub hierarchy: TilingHierarchy,
    /// `β_1, β_2, …` (index 0 holds `β_1`).
    pub beta: Vec<Ratio<u64>>,
    /// `levels[k]` describes `M(k)` and `H(k)` for `k = 0..=kmax`.
    pub levels: Vec<DecompositionLevel>,
}

/// The default `β_k = 2^{−k}`.
pub fn default_beta(count: usize) -> Vec<Ratio<u64>> {
    (1..=count).map(|k| Ratio::new(1, 1u64 << k)).collect()
}

fn below_fraction(lhs: u128, rhs_scale: u128, beta: Ratio<u64>) -> bool {
    // lhs < β · rhs_scale
    lhs * (*beta.denom() as u128) < (*beta.numer() as u128) * rhs_scale
}

/// Chooses `M(0) < M(1) < … < M(kmax)` for the standard boxes.
///
/// `M(k)` is the least index past `M(k−1)` from which `F_n` is
/// `(S_{k+1}, β_{k+1}/|S_{k+1}|)`-invariant and `|H(k−1)| < β_{k+1}|F_n|`.
/// Both conditions are monotone in `n` once `n ≥ s_{k+1}`, so the first hit
/// holds for every larger `n`.
pub fn build_decomposition(hier: &TilingHierarchy, beta: &[Ratio<u64>], kmax: usize, cap: u64) -> Result<FolnerDecomposition> {
    if hier.levels() < kmax + 1 || beta.len() < kmax + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} hierarchy levels and β values, have {} and {}",
            kmax + 1,
            hier.levels(),
            beta.len()
        )));
    }
    if beta.windows(2).any(|w| w[1] >= w[0]) || beta.iter().any(|b| *b.numer() == 0) {
        return Err(Error::InvalidArgument("β must be positive and strictly decreasing".into()));
    }
    let dim = hier.dim;
    let r = dim.rank() as u32;
    let mut levels: Vec<DecompositionLevel> = Vec::with_capacity(kmax + 1);
    let mut prev_m = 0u64;
    let mut prev_h_side = 0i64;
    for k in 0..=kmax {
        let s = hier.side(k + 1);
        let shape_len = (s as u128).pow(r);
        let b = beta[k];
        let h_prev_len = (prev_h_side as u128).pow(r);
        let start = if k == 0 { 1 } else { prev_m + 1 };
        let mut found = None;
        let mut n = start.max(s as u64);
        while n <= cap {
            let fn_len = (n as u128).pow(r);
            let bd = box_boundary_len(dim, s, n as i64) as u128;
            if below_fraction(bd * shape_len, fn_len, b) && below_fraction(h_prev_len, fn_len, b) {
                found = Some(n);
                break;
            }
            n += 1;
        }
        let m = found.ok_or(Error::UnreachableThreshold { level: k, cap })?;
        let fn_len = (m as f64).powi(r as i32);
        let h_side = if k == 0 {
            0
        } else {
            // Level-(k+1) tiles meeting ⋃_{i ≤ M(k)} F_i = [0, M(k))^d.
            ((m as i64 + s - 1) / s) * s
        };
        levels.push(DecompositionLevel {
            m,
            h_side,
            scaled_defect: box_boundary_len(dim, s, m as i64) as f64 * shape_len as f64 / fn_len,
            previous_h_fraction: h_prev_len as f64 / fn_len,
        });
        prev_m = m;
        prev_h_side = h_side;
    }
    Ok(FolnerDecomposition { dim, hierarchy: hier.clone(), beta: beta.to_vec(), levels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaBricks {
    pub n: u64,
    /// The `k` with `M(k−1) < n ≤ M(k)`.
    pub level: usize,
    /// Level-`k` bricks of `𝓗_k` inside `F_n`.
    pub lambda1: Vec<Tile>,
    /// Level-`(k−1)` bricks of `𝓗_{k−1}` inside `F_n`.
    pub lambda2: Vec<Tile>,
    pub fprime_len: u64,
    pub fn_len: u64,
    /// `|F′_n| > (1 − 2β_k)|F_n|`, decided in integers.
    pub bound_holds: bool,
}

impl LambdaBricks {
    pub fn fprime(&self) -> FiniteSubset {
        let dim = self.lambda1.first().or(self.lambda2.first()).map(|t| t.dim).unwrap_or(Dim::One);
        self.lambda1
            .iter()
            .chain(&self.lambda2)
            .fold(FiniteSubset::empty(dim), |acc, t| acc.union(&t.to_subset()))
    }

    pub fn coverage(&self) -> f64 {
        self.fprime_len as f64 / self.fn_len as f64
    }
}

impl FolnerDecomposition {
    pub fn kmax(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn m(&self, k: usize) -> u64 {
        self.levels[k].m
    }

    pub fn h_side(&self, k: usize) -> i64 {
        self.levels[k].h_side
    }

    /// `|H(k)|`.
    pub fn h_len(&self, k: usize) -> u64 {
        (self.h_side(k) as u64).pow(self.dim.rank() as u32)
    }

    pub fn beta(&self, k: usize) -> Ratio<u64> {
        self.beta[k - 1]
    }

    /// The `k ≥ 1` with `M(k−1) < n ≤ M(k)`.
    pub fn level_of(&self, n: u64) -> Result<usize> {
        let lo = self.m(0);
        let hi = self.m(self.kmax());
        if n <= lo || n > hi || self.kmax() == 0 {
            return Err(Error::OutsideRange { n, lo, hi });
        }
        Ok((1..=self.kmax()).find(|&k| n <= self.m(k)).expect("in range"))
    }

    /// Bricks of `𝓗_k`: level-`k` tiles in `H(k) ∖ H(k−1)` whose tiles lie in `[0, limit)^d`.
    pub fn layer_bricks_within(&self, k: usize, limit: i64) -> Vec<Tile> {
        if k == 0 {
            return Vec::new();
        }
        let s = self.hierarchy.side(k);
        let outer = self.h_side(k).min((limit / s) * s).max(0);
        let inner = self.h_side(k - 1);
        let per = outer / s;
        let mut out = Vec::new();
        match self.dim {
            Dim::One => {
                for i in inner / s..per {
                    out.push(Tile { dim: Dim::One, lo: [i * s, 0], side: s });
                }
            }
            Dim::Two => {
                for i in 0..per {
                    for j in 0..per {
                        let lo = [i * s, j * s];
                        if lo[0] + s <= inner && lo[1] + s <= inner {
                            continue;
                        }
                        out.push(Tile { dim: Dim::Two, lo, side: s });
                    }
                }
            }
        }
        out
    }

    /// All bricks of `𝓗_k`.
    pub fn layer_bricks(&self, k: usize) -> Vec<Tile> {
        self.layer_bricks_within(k, self.h_side(k))
    }

    /// The brick cover `Λ_n = Λ¹_n ∪ Λ²_n` and `F′_n = ⋃ Λ_n`.
    pub fn lambda_bricks(&self, n: u64) -> Result<LambdaBricks> {
        let k = self.level_of(n)?;
        let lambda1 = self.layer_bricks_within(k, n as i64);
        let lambda2 = self.layer_bricks_within(k - 1, n as i64);
        let fprime_len: u64 = lambda1.iter().chain(&lambda2).map(Tile::len).sum();
        let fn_len = (n).pow(self.dim.rank() as u32);
        let b = self.beta(k);
        let (bn, bd) = (*b.numer() as u128, *b.denom() as u128);
        let bound_holds = if 2 * bn >= bd {
            fprime_len as u128 * bd > 0 || fn_len == 0
        } else {
            fprime_len as u128 * bd > (bd - 2 * bn) * fn_len as u128
        };
        Ok(LambdaBricks { n, level: k, lambda1, lambda2, fprime_len, fn_len, bound_holds })
    }

    /// `|F′_n|` without materializing brick lists.
    pub fn fprime_len(&self, n: u64) -> Result<u64> {
        let k = self.level_of(n)?;
        let count = |layer: usize| -> u64 {
            if layer == 0 {
                return 0;
            }
            let s = self.hierarchy.side(layer);
            let outer = self.h_side(layer).min((n as i64 / s) * s);
            let inner = self.h_side(layer - 1).min(outer);
            let r = self.dim.rank() as u32;
            (outer as u64).pow(r) - (inner as u64).pow(r)
        };
        Ok(count(k) + count(k - 1))
    }

    /// Level records, then one record per brick while the brick count stays
    /// under `brick_limit`; past it each layer gets a single count record.
    pub fn write_records<W: Write>(&self, mut out: W, brick_limit: u64) -> Result<()> {
        for (k, lvl) in self.levels.iter().enumerate() {
            let rec = serde_json::json!({
                "record": "decomposition_level",
                "k": k,
                "M": lvl.m,
                "H_side": lvl.h_side,
                "scaled_defect": lvl.scaled_defect,
                "previous_h_fraction": lvl.previous_h_fraction,
            });
            writeln!(out, "{rec}")?;
        }
        let r = self.dim.rank() as u32;
        let total: u64 = (1..=self.kmax()).map(|k| (self.h_len(k) - self.h_len(k - 1)) / (self.hierarchy.side(k) as u64).pow(r)).sum();
        if total > brick_limit {
            for k in 1..=self.kmax() {
                let rec = serde_json::json!({
                    "record": "brick_layer",
                    "level": k,
                    "side": self.hierarchy.side(k),
                    "bricks": (self.h_len(k) - self.h_len(k - 1)) / (self.hierarchy.side(k) as u64).pow(r),
                });
                writeln!(out, "{rec}")?;
            }
            return Ok(());
        }
        for k in 1..=self.kmax() {
            for t in self.layer_bricks(k) {
                let rec = serde_json::json!({
                    "record": "brick",
                    "level": k,
                    "shape": 0,
                    "center": &t.lo[..self.dim.rank()],
                    "side": t.side,
                });
                writeln!(out, "{rec}")?;
            }
        }
        Ok(())
    }
}

fn coords_of(e: &GroupElement) -> Vec<i64> {
    e.coords()[..e.dim().rank()].to_vec()
}

/// One record per piece: level, shape id, center and the shrunk cell list.
pub fn write_cover_records<W: Write>(cover: &DisjointCover, level: usize, mut out: W) -> Result<()> {
    for p in &cover.pieces {
        let cells: Vec<Vec<i64>> = p.cells().iter().map(coords_of).collect();
        let rec = serde_json::json!({
            "record": "piece",
            "level": level,
            "shape": p.parent,
            "center": coords_of(&p.center),
            "cells": cells,
        });
        writeln!(out, "{rec}")?;
    }
    Ok(())
}
