//! Subshifts, the canonical separating family and the point metric it
//! induces, mistake balls, and separated/spanning counts.
//!
//! Configurations are finitely described: a pattern on a box window plus a
//! periodic or constant-fill extension. Every finite-`F` evaluation touches
//! finitely many cells and is computed on demand.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Dim, FiniteSubset, GroupElement};

/// Full shift, or a one-step SFT on ℤ given by a 0/1 transition matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    Full,
    Sft { matrix: Vec<Vec<bool>> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSystem {
    alphabet: usize,
    dim: Dim,
    kind: SystemKind,
    /// Least `m` with `A^m > 0`; `1` for full shifts.
    mixing_gap: usize,
}

fn bool_matmul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    let mut out = vec![vec![false; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] {
                for j in 0..n {
                    out[i][j] |= b[k][j];
                }
            }
        }
    }
    out
}

impl ShiftSystem {
    pub fn full(alphabet: usize, dim: Dim) -> Result<Self> {
        if !(2..=255).contains(&alphabet) {
            return Err(Error::InvalidArgument(format!("alphabet size {alphabet} outside 2..=255")));
        }
        Ok(ShiftSystem { alphabet, dim, kind: SystemKind::Full, mixing_gap: 1 })
    }

    /// A mixing one-step SFT on ℤ.
    pub fn sft(matrix: Vec<Vec<bool>>) -> Result<Self> {
        let k = matrix.len();
        if !(2..=255).contains(&k) || matrix.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument("transition matrix must be square with size in 2..=255".into()));
        }
        for i in 0..k {
            if !matrix[i].iter().any(|&b| b) || !(0..k).any(|j| matrix[j][i]) {
                return Err(Error::InvalidArgument(format!("symbol {i} has an all-zero row or column")));
            }
        }
        // Wielandt: a primitive matrix has A^m > 0 for m = (k−1)² + 1.
        let bound = (k - 1) * (k - 1) + 1;
        let mut power = matrix.clone();
        let mut gap = None;
        for m in 1..=bound {
            if power.iter().all(|row| row.iter().all(|&b| b)) {
                gap = Some(m);
                break;
            }
            power = bool_matmul(&power, &matrix);
        }
        let mixing_gap = gap.ok_or(Error::NotMixing(bound))?;
        Ok(ShiftSystem { alphabet: k, dim: Dim::One, kind: SystemKind::Sft { matrix }, mixing_gap })
    }

    /// Transition rows as bit-strings, e.g. `["11", "10"]`.
    pub fn sft_from_rows(rows: &[&str]) -> Result<Self> {
        let matrix: Result<Vec<Vec<bool>>> = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::InvalidArgument(format!("bad matrix entry {other:?}"))),
                    })
                    .collect()
            })
            .collect();
        ShiftSystem::sft(matrix?)
    }

    /// The SFT on {0,1} forbidding the word `11`.
    pub fn golden_mean() -> Self {
        ShiftSystem::sft_from_rows(&["11", "10"]).expect("golden mean matrix is mixing")
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn mixing_gap(&self) -> usize {
        self.mixing_gap
    }

    pub fn is_full(&self) -> bool {
        matches!(self.kind, SystemKind::Full)
    }

    pub fn allowed(&self, a: u8, b: u8) -> bool {
        match &self.kind {
            SystemKind::Full => true,
            SystemKind::Sft { matrix } => matrix[a as usize][b as usize],
        }
    }

    /// `reach[a][b]`: some admissible path of exactly `steps` transitions leads from `a` to `b`.
    pub fn reach(&self, steps: u64) -> Vec<Vec<bool>> {
        let k = self.alphabet;
        match &self.kind {
            SystemKind::Full => vec![vec![true; k]; k],
            SystemKind::Sft { matrix } => {
                if steps >= self.mixing_gap as u64 {
                    return vec![vec![true; k]; k];
                }
                let mut out: Vec<Vec<bool>> = (0..k).map(|i| (0..k).map(|j| i == j).collect()).collect();
                for _ in 0..steps {
                    out = bool_matmul(&out, matrix);
                }
                out
            }
        }
    }

    /// Checks a pattern on cells of `F` (in set order) against the system.
    pub fn pattern_admissible(&self, f: &FiniteSubset, pattern: &[u8]) -> bool {
        if pattern.len() != f.len() || pattern.iter().any(|&a| a as usize >= self.alphabet) {
            return false;
        }
        if self.is_full() {
            return true;
        }
        let xs: Vec<i64> = f.iter().map(|e| e.x()).collect();
        for i in 1..xs.len() {
            let steps = (xs[i] - xs[i - 1]) as u64;
            if !self.reach(steps)[pattern[i - 1] as usize][pattern[i] as usize] {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// `x(p) = pattern(lo + (p − lo) mod period)`.
    Periodic { period: [i64; 2] },
    /// Every cell outside the window carries `fill`.
    Constant { fill: u8 },
}

/// A point of the shift described by a window pattern and an extension rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    dim: Dim,
    lo: [i64; 2],
    /// Width and height of the window (height 1 in rank one).
    extent: [usize; 2],
    /// Row-major over the window: index `(y − lo_y)·width + (x − lo_x)`.
    symbols: Vec<u8>,
    extension: Extension,
}

impl Configuration {
    pub fn new(dim: Dim, lo: [i64; 2], extent: [usize; 2], symbols: Vec<u8>, extension: Extension) -> Result<Self> {
        let extent = if dim == Dim::One { [extent[0], 1] } else { extent };
        let lo = if dim == Dim::One { [lo[0], 0] } else { lo };
        if extent[0] == 0 || extent[1] == 0 || symbols.len() != extent[0] * extent[1] {
            return Err(Error::InvalidArgument("window extent does not match the symbol count".into()));
        }
        if let Extension::Periodic { period } = &extension {
            let used = dim.rank();
            for a in 0..used {
                if period[a] < 1 || period[a] as usize > extent[a] {
                    return Err(Error::InvalidArgument(format!("period {period:?} must lie within the window extent")));
                }
            }
        }
        Ok(Configuration { dim, lo, extent, symbols, extension })
    }

    /// The bi-infinite repetition of `word`, with `word[0]` at the origin.
    pub fn periodic_word(word: &[u8]) -> Result<Self> {
        Configuration::new(Dim::One, [0, 0], [word.len(), 1], word.to_vec(), Extension::Periodic { period: [word.len() as i64, 1] })
    }

    /// `word` placed at `lo`, constant `fill` elsewhere.
    pub fn padded_word(word: &[u8], lo: i64, fill: u8) -> Result<Self> {
        Configuration::new(Dim::One, [lo, 0], [word.len(), 1], word.to_vec(), Extension::Constant { fill })
    }

    /// Doubly periodic plane configuration; `rows[y][x]` with the window at the origin.
    pub fn periodic_grid(rows: &[Vec<u8>]) -> Result<Self> {
        let h = rows.len();
        let w = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::InvalidArgument("ragged grid".into()));
        }
        let symbols: Vec<u8> = rows.iter().flatten().copied().collect();
        Configuration::new(Dim::Two, [0, 0], [w, h], symbols, Extension::Periodic { period: [w as i64, h as i64] })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn window_lo(&self) -> [i64; 2] {
        self.lo
    }

    pub fn extent(&self) -> [usize; 2] {
        self.extent
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn extension(&self) -> &Extension {
        &self.extension
    }

    fn window_index(&self, c: [i64; 2]) -> Option<usize> {
        let dx = c[0] - self.lo[0];
        let dy = c[1] - self.lo[1];
        if dx >= 0 && dy >= 0 && (dx as usize) < self.extent[0] && (dy as usize) < self.extent[1] {
            Some(dy as usize * self.extent[0] + dx as usize)
        } else {
            None
        }
    }

    pub fn get(&self, p: GroupElement) -> u8 {
        let c = p.coords();
        if let Some(i) = self.window_index(c) {
            return self.symbols[i];
        }
        match &self.extension {
            Extension::Constant { fill } => *fill,
            Extension::Periodic { period } => {
                let x = self.lo[0] + (c[0] - self.lo[0]).rem_euclid(period[0]);
                let y = if self.dim == Dim::Two { self.lo[1] + (c[1] - self.lo[1]).rem_euclid(period[1]) } else { 0 };
                self.symbols[self.window_index([x, y]).expect("reduced into the window")]
            }
        }
    }

    /// Symbols on the cells of `F`, in set order.
    pub fn pattern_on(&self, f: &FiniteSubset) -> Vec<u8> {
        f.iter().map(|&p| self.get(p)).collect()
    }

    /// Symbols on `F + s`, listed in the order of `F`.
    pub fn pattern_on_translate(&self, f: &FiniteSubset, s: GroupElement) -> Vec<u8> {
        f.iter().map(|&p| self.get(p + s)).collect()
    }

    /// Checks symbols and, for SFTs, every transition including the extension seams.
    pub fn check_admissible(&self, system: &ShiftSystem) -> Result<()> {
        if system.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: system.dim(), found: self.dim });
        }
        let k = system.alphabet();
        let bad_symbol = self.symbols.iter().copied().find(|&a| a as usize >= k);
        let fill_bad = matches!(self.extension, Extension::Constant { fill } if fill as usize >= k);
        if bad_symbol.is_some() || fill_bad {
            return Err(Error::Inadmissible(format!("symbol outside alphabet of size {k}")));
        }
        if system.is_full() {
            return Ok(());
        }
        // One full period (or the window plus one fill cell on each side) covers every distinct transition.
        let (a, b) = match &self.extension {
            Extension::Periodic { period } => (self.lo[0], self.lo[0] + period[0] + 1),
            Extension::Constant { .. } => (self.lo[0] - 2, self.lo[0] + self.extent[0] as i64 + 2),
        };
        for x in a..b - 1 {
            let (u, v) = (self.get(GroupElement::d1(x)), self.get(GroupElement::d1(x + 1)));
            if !system.allowed(u, v) {
                return Err(Error::Inadmissible(format!("forbidden transition {u}->{v} at {x}")));
            }
        }
        Ok(())
    }
}

/// `(s·x)(t) = x(t + s)`.
pub fn shift_act(s: GroupElement, x: &Configuration) -> Result<Configuration> {
    if s.dim() != x.dim {
        return Err(Error::DimensionMismatch { expected: x.dim, found: s.dim() });
    }
    let c = s.coords();
    let mut out = x.clone();
    out.lo = [x.lo[0] - c[0], x.lo[1] - c[1]];
    Ok(out)
}

/// Tabulated monotone mistake-density function `g`, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeFunction {
    points: Vec<(f64, f64)>,
}

impl MistakeFunction {
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("mistake function needs at least one grid point".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument("mistake function grid must increase with nondecreasing values".into()));
            }
        }
        if points.iter().any(|&(r, g)| !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&g)) {
            return Err(Error::InvalidArgument("mistake function values must lie in [0, 1]".into()));
        }
        Ok(MistakeFunction { points })
    }

    /// `g(r) = r` on a 64-point grid.
    pub fn identity() -> Self {
        let pts = (1..=64).map(|i| (i as f64 / 64.0, i as f64 / 64.0)).collect();
        MistakeFunction { points: pts }
    }

    /// A constant budget. Not a mistake-density function in the limit sense,
    /// but useful for probing ball membership.
    pub fn constant(c: f64) -> Self {
        MistakeFunction { points: vec![(0.0, c), (1.0, c)] }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let pts = &self.points;
        if r <= pts[0].0 {
            return if pts[0].0 > 0.0 { pts[0].1 * (r / pts[0].0).max(0.0) } else { pts[0].1 };
        }
        for w in pts.windows(2) {
            if r <= w[1].0 {
                let t = (r - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        pts[pts.len() - 1].1
    }
}

/// Cylinder indicators on centered windows, enumerated block by radius and
/// lexicographically inside a block; `φ_i` carries weight `2^{−i}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatingFamily {
    alphabet: usize,
    dim: Dim,
    truncation: u32,
}

/// One indicator of the family: the pattern `pattern` on window radius `radius`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyEntry {
    pub index: u32,
    pub radius: usize,
    pub pattern: Vec<u8>,
}

/// Outcome of [`SeparatingFamily::resolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub radius: usize,
    pub window: FiniteSubset,
    /// Disagreement at the center forces `ρ ≥ floor`.
    pub floor: f64,
    /// Agreement on the window forces `ρ ≤ tail`.
    pub tail: f64,
}

pub const DEFAULT_TRUNCATION: u32 = 24;

impl SeparatingFamily {
    pub fn new(alphabet: usize, dim: Dim, truncation: u32) -> Result<Self> {
        if !(1..=62).contains(&truncation) {
            return Err(Error::InvalidArgument(format!("truncation level {truncation} outside 1..=62")));
        }
        Ok(SeparatingFamily { alphabet, dim, truncation })
    }

    pub fn for_system(system: &ShiftSystem) -> Self {
        SeparatingFamily { alphabet: system.alphabet(), dim: system.dim(), truncation: DEFAULT_TRUNCATION }
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Guaranteed bound on the truncation error of any distance.
    pub fn truncation_error(&self) -> f64 {
        (-(self.truncation as f64)).exp2()
    }

    pub fn window(&self, radius: usize) -> FiniteSubset {
        let r = radius as i64;
        match self.dim {
            Dim::One => FiniteSubset::interval(-r, r + 1),
            Dim::Two => FiniteSubset::rect(-r, r + 1, -r, r + 1),
        }
    }

    fn block_len(&self, radius: usize) -> u64 {
        let cells = (2 * radius + 1).pow(self.dim.rank() as u32) as u32;
        (self.alphabet as u64).checked_pow(cells).unwrap_or(u64::MAX)
    }

    /// Index of the first indicator of the radius-`radius` block.
    pub fn block_offset(&self, radius: usize) -> u64 {
        let mut off = 1u64;
        for r in 0..radius {
            off = off.saturating_add(self.block_len(r));
        }
        off
    }

    /// Largest radius whose block starts within the truncation.
    pub fn max_radius(&self) -> usize {
        let mut r = 0;
        while self.block_offset(r + 1) <= self.truncation as u64 {
            r += 1;
        }
        r
    }

    /// Index of `pattern` (cells in window order) if it is at most the truncation level.
    pub fn truncated_index(&self, radius: usize, pattern: &[u8]) -> Option<u32> {
        let limit = self.truncation as u64;
        let off = self.block_offset(radius);
        if off > limit {
            return None;
        }
        let room = limit - off;
        let mut rank = 0u64;
        for &a in pattern {
            rank = rank.checked_mul(self.alphabet as u64)?.checked_add(a as u64)?;
        }
        (rank <= room).then(|| (off + rank) as u32)
    }

    /// Inverse of the lexicographic rank inside a block.
    pub fn unrank(&self, radius: usize, mut rank: u64) -> Vec<u8> {
        let cells = (2 * radius + 1).pow(self.dim.rank() as u32);
        let mut out = vec![0u8; cells];
        for slot in out.iter_mut().rev() {
            *slot = (rank % self.alphabet as u64) as u8;
            rank /= self.alphabet as u64;
        }
        out
    }

    /// The first `L` indicators.
    pub fn entries(&self) -> Vec<FamilyEntry> {
        let mut out = Vec::with_capacity(self.truncation as usize);
        let mut radius = 0;
        while out.len() < self.truncation as usize {
            let off = self.block_offset(radius);
            let len = self.block_len(radius);
            let mut rank = 0u64;
            while rank < len && out.len() < self.truncation as usize {
                out.push(FamilyEntry { index: (off + rank) as u32, radius, pattern: self.unrank(radius, rank) });
                rank += 1;
            }
            radius += 1;
        }
        out
    }

    /// `2^{−(k−1)} + 2^{−k}`: the least mass flipped when two points disagree at the center.
    pub fn floor(&self) -> f64 {
        let k = self.alphabet as i32;
        2f64.powi(-(k - 1)) + 2f64.powi(-k)
    }

    /// Upper bound on `ρ` for points that agree on the center cell.
    ///
    /// Only blocks of radius ≥ 1 can differ, and each contributes two indicators.
    pub fn collar_bound(&self) -> f64 {
        let mut total = 0.0;
        for r in 1..=self.max_radius() {
            let off = self.block_offset(r);
            total += (-(off as f64)).exp2() + (-(off as f64 + 1.0)).exp2();
        }
        total
    }

    /// `Σ_{i > end of block r} 2^{−i}`.
    pub fn tail_after_block(&self, radius: usize) -> f64 {
        let end = self.block_offset(radius + 1) - 1;
        (-(end as f64)).exp2()
    }

    pub fn resolution(&self, epsilon: f64) -> Result<Resolution> {
        let floor = self.floor();
        if !(epsilon > 0.0 && epsilon < floor) {
            return Err(Error::AboveResolutionThreshold { epsilon, threshold: floor });
        }
        let mut radius = 0;
        while self.tail_after_block(radius) > epsilon {
            radius += 1;
        }
        Ok(Resolution { radius, window: self.window(radius), floor, tail: self.tail_after_block(radius) })
    }

    /// `ρ(sx, sy)` in units of `2^{−L}`.
    pub fn rho_units_at(&self, x: &Configuration, y: &Configuration, s: GroupElement) -> u64 {
        let l = self.truncation;
        let rmax = self.max_radius() as i64;
        let ry = if self.dim == Dim::Two { rmax } else { 0 };
        let agree = (-ry..=ry).all(|dy| {
            (-rmax..=rmax).all(|dx| {
                let p = s + GroupElement::from_coords(self.dim, [dx, dy]);
                x.get(p) == y.get(p)
            })
        });
        if agree {
            return 0;
        }
        let mut units = 0u64;
        for r in 0..=self.max_radius() {
            let w = self.window(r);
            let px = x.pattern_on_translate(&w, s);
            let py = y.pattern_on_translate(&w, s);
            if px == py {
                continue;
            }
            for p in [&px, &py] {
                if let Some(i) = self.truncated_index(r, p) {
                    units += 1u64 << (l - i);
                }
            }
        }
        units
    }

    pub fn rho(&self, x: &Configuration, y: &Configuration) -> f64 {
        self.units_to_distance(self.rho_units_at(x, y, GroupElement::identity(x.dim())))
    }

    pub fn units_to_distance(&self, units: u64) -> f64 {
        units as f64 / (1u64 << self.truncation) as f64
    }

    /// `ρ_F(x, y) = max_{s ∈ F} ρ(sx, sy)`, in units of `2^{−L}`.
    pub fn rho_f_units(&self, x: &Configuration, y: &Configuration, f: &FiniteSubset) -> u64 {
        f.iter().map(|&s| self.rho_units_at(x, y, s)).max().unwrap_or(0)
    }

    pub fn rho_f(&self, x: &Configuration, y: &Configuration, f: &FiniteSubset) -> f64 {
        self.units_to_distance(self.rho_f_units(x, y, f))
    }

    /// Positions `s ∈ F` with `ρ(sx, sy) > ε`.
    pub fn mistakes(&self, x: &Configuration, y: &Configuration, f: &FiniteSubset, epsilon: f64) -> usize {
        f.iter()
            .filter(|&&s| self.units_to_distance(self.rho_units_at(x, y, s)) > epsilon)
            .count()
    }
}

/// Membership in the mistake ball `B(g; F, x, ε)`, with the mistake count.
pub fn mistake_ball_contains(
    family: &SeparatingFamily,
    g: &MistakeFunction,
    f: &FiniteSubset,
    x: &Configuration,
    y: &Configuration,
    epsilon: f64,
) -> (bool, usize) {
    let count = family.mistakes(x, y, f, epsilon);
    (count as f64 <= g.eval(epsilon) * f.len() as f64, count)
}

/// Number of admissible patterns on `F`.
pub fn count_admissible(system: &ShiftSystem, f: &FiniteSubset) -> Result<BigUint> {
    if f.dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: f.dim() });
    }
    let k = system.alphabet();
    if system.is_full() {
        return Ok(BigUint::from(k).pow(f.len() as u32));
    }
    let xs: Vec<i64> = f.iter().map(|e| e.x()).collect();
    if xs.is_empty() {
        return Ok(BigUint::from(1u8));
    }
    let mut v: Vec<BigUint> = vec![BigUint::from(1u8); k];
    for i in 1..xs.len() {
        let reach = system.reach((xs[i] - xs[i - 1]) as u64);
        let mut next = vec![BigUint::from(0u8); k];
        for a in 0..k {
            for b in 0..k {
                if reach[a][b] {
                    next[b] += &v[a];
                }
            }
        }
        v = next;
    }
    Ok(v.into_iter().sum())
}

/// Admissible words of length `n` starting with `prefix`.
pub fn count_words_with_prefix(system: &ShiftSystem, n: usize, prefix: &[u8]) -> Result<BigUint> {
    if system.dim() != Dim::One {
        return Err(Error::DimensionMismatch { expected: Dim::One, found: system.dim() });
    }
    let f = FiniteSubset::interval(0, prefix.len() as i64);
    if prefix.len() > n || !system.pattern_admissible(&f, prefix) {
        return Ok(BigUint::from(0u8));
    }
    let k = system.alphabet();
    let mut v = vec![BigUint::from(0u8); k];
    match prefix.last() {
        Some(&a) => v[a as usize] = BigUint::from(1u8),
        None => {
            if n == 0 {
                return Ok(BigUint::from(1u8));
            }
            v = vec![BigUint::from(1u8); k];
        }
    }
    let start = prefix.len().max(1);
    for _ in start..n {
        let mut next = vec![BigUint::from(0u8); k];
        for a in 0..k {
            for b in 0..k {
                if system.allowed(a as u8, b as u8) {
                    next[b] += &v[a];
                }
            }
        }
        v = next;
    }
    Ok(v.into_iter().sum())
}

/// Admissible words of length `len`; the partition used for split counting.
pub fn admissible_prefixes(system: &ShiftSystem, len: usize) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    for_each_pattern(system, &FiniteSubset::interval(0, len as i64), u64::MAX, |w| out.push(w.to_vec()))?;
    Ok(out)
}

/// Word count split by prefix block and summed; identical to the serial count.
pub fn count_words_partitioned(system: &ShiftSystem, n: usize, prefix_len: usize) -> Result<BigUint> {
    let prefixes = admissible_prefixes(system, prefix_len.min(n))?;
    let parts: Vec<Result<BigUint>> = std::thread::scope(|scope| {
        let handles: Vec<_> = prefixes
            .iter()
            .map(|p| scope.spawn(move || count_words_with_prefix(system, n, p)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("counting thread")).collect()
    });
    let mut total = BigUint::from(0u8);
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// Calls `visit` on every admissible pattern on `F` (cells in set order).
/// Fails with `BudgetExceeded` after `budget` patterns.
pub fn for_each_pattern<V: FnMut(&[u8])>(system: &ShiftSystem, f: &FiniteSubset, budget: u64, mut visit: V) -> Result<u64> {
    let k = system.alphabet() as u8;
    let xs: Vec<i64> = f.iter().map(|e| e.x()).collect();
    let reaches: Vec<Vec<Vec<bool>>> = if system.is_full() {
        Vec::new()
    } else {
        (1..xs.len()).map(|i| system.reach((xs[i] - xs[i - 1]) as u64)).collect()
    };
    let n = f.len();
    let mut word = vec![0u8; n];
    let mut visited = 0u64;
    if n == 0 {
        visit(&word);
        return Ok(1);
    }
    // Iterative DFS; `next[i]` is the next symbol to try at depth i.
    let mut next = vec![0u8; n];
    let mut depth = 0usize;
    loop {
        if next[depth] >= k {
            if depth == 0 {
                break;
            }
            next[depth] = 0;
            depth -= 1;
            continue;
        }
        let a = next[depth];
        next[depth] += 1;
        if depth > 0 && !reaches.is_empty() && !reaches[depth - 1][word[depth - 1] as usize][a as usize] {
            continue;
        }
        word[depth] = a;
        if depth + 1 == n {
            visited += 1;
            if visited > budget {
                return Err(Error::BudgetExceeded(format!("more than {budget} patterns on a set of size {n}")));
            }
            visit(&word);
        } else {
            depth += 1;
        }
    }
    Ok(visited)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeparationMode {
    Separated,
    Spanning,
    /// Points conflict when their mistake sets have fewer than `δ|F|` positions.
    Hamming { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CountQuality {
    Exact,
    LowerBound,
    UpperBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationCount {
    pub count: BigUint,
    pub quality: CountQuality,
    /// Patterns on `F ⊕ W(ε)`, an upper bound for both separated and spanning counts.
    pub word_count: BigUint,
    pub resolution_radius: usize,
}

impl SeparationCount {
    pub fn ln(&self) -> f64 {
        ln_biguint(&self.count)
    }
}

pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        let f: f64 = n.to_string().parse().unwrap_or(f64::INFINITY);
        if f.is_finite() {
            return f.ln();
        }
    }
    let shift = bits.saturating_sub(64);
    let top: BigUint = n >> shift;
    let top_f: f64 = top.to_string().parse().expect("fits in f64");
    top_f.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Largest `(F, ε)`-separated (or smallest spanning) cardinality over the whole system.
///
/// Below the family's floor threshold, points with different `F`-patterns
/// are separated. When `ε` is also at least the collar bound, points with the
/// same `F`-pattern are never separated, so both counts equal the number of
/// admissible `F`-patterns exactly. Otherwise that number is reported as a
/// lower bound alongside the `F ⊕ W(ε)` word count.
pub fn max_separated(
    system: &ShiftSystem,
    family: &SeparatingFamily,
    f: &FiniteSubset,
    epsilon: f64,
    mode: SeparationMode,
    cap: usize,
) -> Result<SeparationCount> {
    let res = family.resolution(epsilon)?;
    let fw = f.product(&res.window);
    let word_count = count_admissible(system, &fw)?;
    let exact_f_level = epsilon >= family.collar_bound();
    match mode {
        SeparationMode::Separated | SeparationMode::Spanning => {
            let count = count_admissible(system, f)?;
            let quality = if exact_f_level || count == word_count { CountQuality::Exact } else { CountQuality::LowerBound };
            Ok(SeparationCount { count, quality, word_count, resolution_radius: res.radius })
        }
        SeparationMode::Hamming { delta } => {
            let mut words: Vec<Vec<u8>> = Vec::new();
            let budget = (cap as u64).max(1);
            let enumerated = for_each_pattern(system, f, budget, |w| words.push(w.to_vec()));
            let need = (delta * f.len() as f64).ceil() as usize;
            let far = |a: &[u8], b: &[u8]| a.iter().zip(b).filter(|(u, v)| u != v).count() >= need;
            let (size, exact) = match enumerated {
                Ok(_) => {
                    let adj = conflict_graph(words.len(), |i, j| !far(&words[i], &words[j]));
                    max_independent_set(&adj, 2_000_000)
                }
                Err(Error::BudgetExceeded(_)) => {
                    // Greedy lexicode over the lexicographic stream.
                    let mut code: Vec<Vec<u8>> = Vec::new();
                    let _ = for_each_pattern(system, f, u64::MAX, |w| {
                        if code.len() < 1 << 16 && code.iter().all(|c| far(c, w)) {
                            code.push(w.to_vec());
                        }
                    });
                    (code.len(), false)
                }
                Err(e) => return Err(e),
            };
            let quality = if exact && exact_f_level { CountQuality::Exact } else { CountQuality::LowerBound };
            Ok(SeparationCount { count: BigUint::from(size), quality, word_count, resolution_radius: res.radius })
        }
    }
}

/// Adjacency as bitmask rows; `n ≤ 128`.
pub fn conflict_graph<C: Fn(usize, usize) -> bool>(n: usize, conflict: C) -> Vec<u128> {
    let mut adj = vec![0u128; n];
    for i in 0..n {
        for j in i + 1..n {
            if conflict(i, j) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

/// Exact maximum independent set by branch and bound; returns `(size, exact)`.
/// When the node budget runs out the best size found so far is returned.
pub fn max_independent_set(adj: &[u128], node_budget: u64) -> (usize, bool) {
    assert!(adj.len() <= 128, "bitmask graphs hold at most 128 vertices");
    let all: u128 = if adj.len() == 128 { u128::MAX } else { (1u128 << adj.len()) - 1 };
    let mut best = 0usize;
    let mut nodes = 0u64;
    fn go(cand: u128, size: usize, adj: &[u128], best: &mut usize, nodes: &mut u64, budget: u64) {
        *nodes += 1;
        if cand == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + cand.count_ones() as usize <= *best || *nodes > budget {
            return;
        }
        // Branch on the candidate of largest degree within the candidates.
        let mut v = cand.trailing_zeros() as usize;
        let mut deg = 0;
        let mut rest = cand;
        while rest != 0 {
            let u = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let d = (adj[u] & cand).count_ones();
            if d > deg {
                deg = d;
                v = u;
            }
        }
        if deg == 0 {
            *best = (*best).max(size + cand.count_ones() as usize);
            return;
        }
        go(cand & !adj[v] & !(1 << v), size + 1, adj, best, nodes, budget);
        go(cand & !(1 << v), size, adj, best, nodes, budget);
    }
    go(all, 0, adj, &mut best, &mut nodes, node_budget);
    (best, nodes <= node_budget)
}

/// Exact minimum dominating set of the closed-neighborhood graph; `(size, exact)`.
pub fn min_dominating_set(closed: &[u128], node_budget: u64) -> (usize, bool) {
    let n = closed.len();
    assert!(n <= 128, "bitmask graphs hold at most 128 vertices");
    let all: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let max_cover = closed.iter().map(|c| c.count_ones()).max().unwrap_or(1).max(1) as usize;
    // Greedy start gives the initial incumbent.
    let mut dominated = 0u128;
    let mut greedy = 0;
    while dominated != all {
        let v = (0..n).max_by_key(|&v| (closed[v] & !dominated).count_ones()).expect("nonempty");
        dominated |= closed[v];
        greedy += 1;
    }
    let mut best = greedy;
    let mut nodes = 0u64;
    fn go(dom: u128, chosen: usize, all: u128, closed: &[u128], max_cover: usize, best: &mut usize, nodes: &mut u64, budget: u64) {
        *nodes += 1;
        if dom == all {
            *best = (*best).min(chosen);
            return;
        }
        let left = (all & !dom).count_ones() as usize;
        if chosen + left.div_ceil(max_cover) >= *best || *nodes > budget {
            return;
        }
        let u = (all & !dom).trailing_zeros() as usize;
        // Some member of N[u] must be chosen.
        let mut opts: Vec<usize> = (0..closed.len()).filter(|&w| closed[u] >> w & 1 == 1).collect();
        opts.sort_by_key(|&w| std::cmp::Reverse((closed[w] & !dom).count_ones()));
        for w in opts {
            go(dom | closed[w], chosen + 1, all, closed, max_cover, best, nodes, budget);
        }
    }
    if n > 0 {
        go(0, 0, all, closed, max_cover, &mut best, &mut nodes, node_budget);
    } else {
        best = 0;
    }
    (best, nodes <= node_budget)
}

/// Separated/spanning cardinalities for an explicit finite set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSetCount {
    pub count: usize,
    pub quality: CountQuality,
}

/// Largest `(F, ε)`-separated subset of `points` (or `(δ, F, ε)` in Hamming mode).
pub fn max_separated_points(
    family: &SeparatingFamily,
    points: &[Configuration],
    f: &FiniteSubset,
    epsilon: f64,
    mode: SeparationMode,
    node_budget: u64,
) -> Result<PointSetCount> {
    if points.len() > 128 {
        return Err(Error::InvalidArgument("explicit point sets hold at most 128 points".into()));
    }
    let eps_units = distance_units_floor(family, epsilon);
    let adj = match mode {
        SeparationMode::Separated => conflict_graph(points.len(), |i, j| family.rho_f_units(&points[i], &points[j], f) <= eps_units),
        SeparationMode::Hamming { delta } => {
            let need = delta * f.len() as f64;
            conflict_graph(points.len(), |i, j| (family.mistakes(&points[i], &points[j], f, epsilon) as f64) < need)
        }
        SeparationMode::Spanning => {
            return Err(Error::InvalidArgument("use min_spanning_points for spanning sets".into()));
        }
    };
    let (count, exact) = max_independent_set(&adj, node_budget);
    Ok(PointSetCount { count, quality: if exact { CountQuality::Exact } else { CountQuality::LowerBound } })
}

/// Smallest `E ⊆ points` with every point within `ρ_F ≤ ε` of `E`.
pub fn min_spanning_points(
    family: &SeparatingFamily,
    points: &[Configuration],
    f: &FiniteSubset,
    epsilon: f64,
    node_budget: u64,
) -> Result<PointSetCount> {
    if points.len() > 128 {
        return Err(Error::InvalidArgument("explicit point sets hold at most 128 points".into()));
    }
    let eps_units = distance_units_floor(family, epsilon);
    let mut closed = conflict_graph(points.len(), |i, j| family.rho_f_units(&points[i], &points[j], f) <= eps_units);
    for (i, row) in closed.iter_mut().enumerate() {
        *row |= 1 << i;
    }
    let (count, exact) = min_dominating_set(&closed, node_budget);
    Ok(PointSetCount { count, quality: if exact { CountQuality::Exact } else { CountQuality::UpperBound } })
}

/// Largest unit count `u` with `u·2^{−L} ≤ ε`.
fn distance_units_floor(family: &SeparatingFamily, epsilon: f64) -> u64 {
    (epsilon * (1u64 << family.truncation()) as f64).floor().max(0.0) as u64
}

/// Per-symbol counts of a pattern, used as the depth-1 statistic.
pub fn symbol_counts(pattern: &[u8], alphabet: usize) -> Vec<u32> {
    let mut c = vec![0u32; alphabet];
    for &a in pattern {
        c[a as usize] += 1;
    }
    c
}

/// Tally of windows: pattern → multiplicity.
pub type PatternTally = BTreeMap<Vec<u8>, u64>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary() -> (ShiftSystem, SeparatingFamily) {
        let s = ShiftSystem::full(2, Dim::One).unwrap();
        let f = SeparatingFamily::for_system(&s);
        (s, f)
    }

    /// Direct definition: sum 2^{−i}|φ_i(x) − φ_i(y)| over the enumerated indicators.
    fn rho_oracle(fam: &SeparatingFamily, x: &Configuration, y: &Configuration) -> f64 {
        fam.entries()
            .iter()
            .map(|e| {
                let w = fam.window(e.radius);
                let fx = (x.pattern_on(&w) == e.pattern) as i32;
                let fy = (y.pattern_on(&w) == e.pattern) as i32;
                (fx - fy).abs() as f64 * (-(e.index as f64)).exp2()
            })
            .sum()
    }

    #[test]
    fn family_layout() {
        let (_, fam) = binary();
        assert_eq!(fam.block_offset(0), 1);
        assert_eq!(fam.block_offset(1), 3);
        assert_eq!(fam.block_offset(2), 11);
        assert_eq!(fam.block_offset(3), 43);
        assert_eq!(fam.max_radius(), 2);
        let e = fam.entries();
        assert_eq!(e.len(), 24);
        assert_eq!((e[0].radius, e[0].pattern.clone()), (0, vec![0]));
        assert_eq!((e[2].index, e[2].pattern.clone()), (3, vec![0, 0, 0]));
        assert_eq!((e[3].index, e[3].pattern.clone()), (4, vec![0, 0, 1]));
        assert_eq!((e[23].index, e[23].radius), (24, 2));
        assert_eq!(fam.truncated_index(1, &[1, 1, 1]), Some(10));
        assert_eq!(fam.truncated_index(2, &[0, 1, 1, 0, 1]), Some(24));
        assert_eq!(fam.truncated_index(2, &[0, 1, 1, 1, 0]), None);
    }

    #[test]
    fn rho_identity_and_center_flip() {
        let (_, fam) = binary();
        let x = Configuration::periodic_word(&[0, 1, 1, 0, 1]).unwrap();
        assert_eq!(fam.rho(&x, &x), 0.0);
        let a = Configuration::padded_word(&[0], 0, 0).unwrap();
        let b = Configuration::padded_word(&[1], 0, 0).unwrap();
        let d = fam.rho(&a, &b);
        // Both radius-0 indicators flip, and so do the higher-radius ones.
        assert!(d >= 0.75);
        assert_eq!(d, rho_oracle(&fam, &a, &b));
        // Radius 1: 000 is index 3, 010 is index 5. Radius 2: 00000 is 11, 00100 is 15.
        let expected = 0.5 + 0.25 + 2f64.powi(-3) + 2f64.powi(-5) + 2f64.powi(-11) + 2f64.powi(-15);
        assert_eq!(d, expected);
    }

    #[test]
    fn resolution_examples() {
        let (_, fam) = binary();
        let r = fam.resolution(0.5).unwrap();
        assert_eq!((r.radius, r.floor), (0, 0.75));
        assert_eq!(r.window, FiniteSubset::singleton(GroupElement::d1(0)));
        let r = fam.resolution(0.2).unwrap();
        assert_eq!(r.window, FiniteSubset::interval(-1, 2));
        assert!(matches!(fam.resolution(0.9), Err(Error::AboveResolutionThreshold { .. })));
    }

    #[test]
    fn shift_examples() {
        let x = Configuration::periodic_word(&[0, 1]).unwrap();
        let id = shift_act(GroupElement::d1(0), &x).unwrap();
        assert_eq!(id, x);
        let y = shift_act(GroupElement::d1(1), &x).unwrap();
        let want = Configuration::periodic_word(&[1, 0]).unwrap();
        for t in -5..5 {
            assert_eq!(y.get(GroupElement::d1(t)), want.get(GroupElement::d1(t)));
        }
    }

    #[test]
    fn sft_construction() {
        let g = ShiftSystem::golden_mean();
        assert_eq!(g.mixing_gap(), 2);
        assert!(matches!(ShiftSystem::sft_from_rows(&["01", "10"]), Err(Error::NotMixing(_))));
        assert!(ShiftSystem::sft_from_rows(&["00", "11"]).is_err());
        let bad = Configuration::periodic_word(&[1, 1, 0]).unwrap();
        assert!(bad.check_admissible(&g).is_err());
        // Seam 1 → 1 across the period boundary.
        let seam = Configuration::periodic_word(&[1, 0, 1]).unwrap();
        assert!(seam.check_admissible(&g).is_err());
        assert!(Configuration::periodic_word(&[1, 0, 0]).unwrap().check_admissible(&g).is_ok());
        assert!(Configuration::padded_word(&[1, 0, 1], 0, 1).unwrap().check_admissible(&g).is_err());
        assert!(Configuration::padded_word(&[1, 0, 1], 0, 0).unwrap().check_admissible(&g).is_ok());
    }

    fn fib(n: usize) -> u64 {
        let (mut a, mut b) = (0u64, 1u64);
        for _ in 0..n {
            let t = a + b;
            a = b;
            b = t;
        }
        a
    }

    #[test]
    fn golden_mean_counts() {
        let g = ShiftSystem::golden_mean();
        let fam = SeparatingFamily::for_system(&g);
        for n in 1..=12 {
            let f = FiniteSubset::interval(0, n as i64);
            let mut brute = 0u64;
            for w in 0u32..(1 << n) {
                let word: Vec<u8> = (0..n).map(|i| (w >> i & 1) as u8).collect();
                if word.windows(2).all(|p| !(p[0] == 1 && p[1] == 1)) {
                    brute += 1;
                }
            }
            assert_eq!(brute, fib(n + 2));
            let c = max_separated(&g, &fam, &f, 0.5, SeparationMode::Separated, 64).unwrap();
            assert_eq!(c.count, BigUint::from(brute));
            assert_eq!(c.quality, CountQuality::Exact);
            assert_eq!(count_words_partitioned(&g, n, 3).unwrap(), BigUint::from(brute));
        }
    }

    #[test]
    fn full_shift_three_letters() {
        let (s, fam) = binary();
        let f = FiniteSubset::interval(0, 3);
        let mut words = 0;
        for_each_pattern(&s, &f, 100, |_| words += 1).unwrap();
        assert_eq!(words, 8);
        let c = max_separated(&s, &fam, &f, 0.5, SeparationMode::Separated, 64).unwrap();
        assert_eq!(c.count, BigUint::from(8u8));
        let r = max_separated(&s, &fam, &f, 0.5, SeparationMode::Spanning, 64).unwrap();
        assert!(r.count <= c.count);
    }

    #[test]
    fn hamming_codes() {
        let (s, fam) = binary();
        // Binary codes of length 3 with minimum distance 2: the even-weight code, size 4.
        let f = FiniteSubset::interval(0, 3);
        let c = max_separated(&s, &fam, &f, 0.5, SeparationMode::Hamming { delta: 0.6 }, 64).unwrap();
        assert_eq!(c.count, BigUint::from(4u8));
        assert_eq!(c.quality, CountQuality::Exact);
        // Length 5, distance 3: A(5,3) = 4.
        let f = FiniteSubset::interval(0, 5);
        let c = max_separated(&s, &fam, &f, 0.5, SeparationMode::Hamming { delta: 0.6 }, 64).unwrap();
        assert_eq!(c.count, BigUint::from(4u8));
        // Over the cap the lexicode is reported as a lower bound.
        let f = FiniteSubset::interval(0, 8);
        let c = max_separated(&s, &fam, &f, 0.5, SeparationMode::Hamming { delta: 0.4 }, 64).unwrap();
        assert_eq!(c.quality, CountQuality::LowerBound);
        assert!(c.count >= BigUint::from(16u8));
    }

    #[test]
    fn mistake_ball_examples() {
        let (_, fam) = binary();
        let f = FiniteSubset::interval(0, 20);
        let x = Configuration::periodic_word(&[0; 20]).unwrap();
        let g = MistakeFunction::tabulated(vec![(0.1, 0.05), (0.5, 0.1), (0.7, 0.2)]).unwrap();
        assert_eq!(mistake_ball_contains(&fam, &g, &f, &x, &x, 0.5), (true, 0));
        // g(0.5)|F| = 2; flip 3 well-separated cells (resolution window {0}).
        let mut w = vec![0u8; 20];
        for i in [2, 9, 16] {
            w[i] = 1;
        }
        let y = Configuration::periodic_word(&w).unwrap();
        assert_eq!(mistake_ball_contains(&fam, &g, &f, &x, &y, 0.5), (false, 3));
        let half = MistakeFunction::constant(0.5);
        assert_eq!(mistake_ball_contains(&fam, &half, &f, &x, &y, 0.5), (true, 3));
        let all = MistakeFunction::constant(1.0);
        let z = Configuration::periodic_word(&[1; 20]).unwrap();
        assert!(mistake_ball_contains(&fam, &all, &f, &x, &z, 0.5).0);
    }

    #[test]
    fn mis_and_domination_small_graphs() {
        // 5-cycle: α = 2, γ = 2.
        let adj = conflict_graph(5, |i, j| (i + 1) % 5 == j || (j + 1) % 5 == i);
        assert_eq!(max_independent_set(&adj, 1000), (2, true));
        let closed: Vec<u128> = adj.iter().enumerate().map(|(i, r)| r | 1 << i).collect();
        assert_eq!(min_dominating_set(&closed, 1000), (2, true));
    }

    #[test]
    fn plane_family() {
        let s = ShiftSystem::full(2, Dim::Two).unwrap();
        let fam = SeparatingFamily::for_system(&s);
        assert_eq!(fam.block_offset(1), 3);
        assert_eq!(fam.max_radius(), 1);
        let x = Configuration::periodic_grid(&[vec![0, 1], vec![1, 0]]).unwrap();
        let y = shift_act(GroupElement::d2(1, 0), &x).unwrap();
        assert_eq!(fam.rho(&x, &y), rho_oracle(&fam, &x, &y));
        assert!(fam.rho(&x, &y) >= 0.75);
        let f = FiniteSubset::rect(0, 2, 0, 2);
        assert_eq!(count_admissible(&s, &f).unwrap(), BigUint::from(16u8));
    }

    fn word_strategy() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..2, 1..9)
    }

    proptest! {
        #[test]
        fn shift_composes(w in word_strategy(), s in -10i64..10, t in -10i64..10, p in -20i64..20) {
            let x = Configuration::periodic_word(&w).unwrap();
            let a = shift_act(GroupElement::d1(s), &shift_act(GroupElement::d1(t), &x).unwrap()).unwrap();
            let b = shift_act(GroupElement::d1(s + t), &x).unwrap();
            prop_assert_eq!(a.get(GroupElement::d1(p)), b.get(GroupElement::d1(p)));
            prop_assert_eq!(a.get(GroupElement::d1(p)), x.get(GroupElement::d1(p + s + t)));
        }

        #[test]
        fn rho_is_a_metric(a in word_strategy(), b in word_strategy(), c in word_strategy()) {
            let (_, fam) = binary();
            let x = Configuration::periodic_word(&a).unwrap();
            let y = Configuration::periodic_word(&b).unwrap();
            let z = Configuration::periodic_word(&c).unwrap();
            let o = GroupElement::d1(0);
            let (xy, yz, xz) = (fam.rho_units_at(&x, &y, o), fam.rho_units_at(&y, &z, o), fam.rho_units_at(&x, &z, o));
            prop_assert_eq!(xy, fam.rho_units_at(&y, &x, o));
            prop_assert!(xz <= xy + yz);
            prop_assert_eq!(fam.rho(&x, &y), rho_oracle(&fam, &x, &y));
        }

        #[test]
        fn spanning_separated_inequalities(
            words in prop::collection::vec(prop::collection::vec(0u8..2, 6), 2..14),
            flen in 1i64..4,
            eps_idx in 0usize..4,
        ) {
            let (_, fam) = binary();
            let pts: Vec<Configuration> = words.iter().map(|w| Configuration::periodic_word(w).unwrap()).collect();
            let f = FiniteSubset::interval(0, flen);
            let eps = [0.05, 0.1, 0.2, 0.3][eps_idx];
            let s = max_separated_points(&fam, &pts, &f, eps, SeparationMode::Separated, 1 << 20).unwrap();
            let r = min_spanning_points(&fam, &pts, &f, eps, 1 << 20).unwrap();
            let s2 = max_separated_points(&fam, &pts, &f, 2.0 * eps, SeparationMode::Separated, 1 << 20).unwrap();
            prop_assert!(r.count <= s.count);
            prop_assert!(s2.count <= r.count);
        }

        #[test]
        fn generous_ball_contains_everything(a in word_strategy(), b in word_strategy()) {
            let (_, fam) = binary();
            let x = Configuration::periodic_word(&a).unwrap();
            let y = Configuration::periodic_word(&b).unwrap();
            let f = FiniteSubset::interval(0, 7);
            prop_assert!(mistake_ball_contains(&fam, &MistakeFunction::constant(1.0), &f, &x, &y, 0.3).0);
        }

        #[test]
        fn sft_outputs_are_admissible(n in 1usize..9) {
            let g = ShiftSystem::golden_mean();
            let mut ok = true;
            for_each_pattern(&g, &FiniteSubset::interval(0, n as i64), 1 << 12, |w| {
                let x = Configuration::padded_word(w, 0, 0).unwrap();
                ok &= x.check_admissible(&g).is_ok();
            }).unwrap();
            prop_assert!(ok);
        }
    }
}
