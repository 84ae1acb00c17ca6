//! Cylinder-marginal measures and the weak* metric.
//!
//! A measure is a stack of tables: `tables[r]` holds the mass of every
//! pattern on the centered window of radius `r`, ranked lexicographically
//! with the first window cell most significant. "Depth d" means radii
//! `0..d`, so depth 1 is the one-site marginal.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Dim, FiniteSubset, GroupElement};
use crate::shift::{Configuration, SeparatingFamily, ShiftSystem, SystemKind};

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

pub fn centered_window(dim: Dim, radius: usize) -> FiniteSubset {
    let r = radius as i64;
    match dim {
        Dim::One => FiniteSubset::interval(-r, r + 1),
        Dim::Two => FiniteSubset::rect(-r, r + 1, -r, r + 1),
    }
}

fn rank(pattern: &[u8], alphabet: usize) -> usize {
    pattern.iter().fold(0usize, |acc, &a| acc * alphabet + a as usize)
}

fn unrank(mut r: usize, len: usize, alphabet: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for slot in out.iter_mut().rev() {
        *slot = (r % alphabet) as u8;
        r /= alphabet;
    }
    out
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// A generating description from which every marginal is computed exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// I.i.d. symbols; `p[a]` is the probability of symbol `a`.
    Bernoulli { p: Vec<f64> },
    /// Stationary Markov chain on ℤ.
    Markov { p: Vec<Vec<f64>>, pi: Vec<f64> },
    /// Convex combination of component measures.
    Convex { weights: Vec<f64>, components: Vec<MeasureSpec> },
}

fn check_probability_vector(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic(format!("{what}: {v:?}")));
    }
    Ok(())
}

impl MeasureSpec {
    /// Bernoulli measure on {0,1} with `P(symbol 1) = p`.
    pub fn bernoulli_binary(p: f64) -> Self {
        MeasureSpec::Bernoulli { p: vec![1.0 - p, p] }
    }

    pub fn alphabet(&self) -> usize {
        match self {
            MeasureSpec::Bernoulli { p } => p.len(),
            MeasureSpec::Markov { pi, .. } => pi.len(),
            MeasureSpec::Convex { components, .. } => components.first().map(MeasureSpec::alphabet).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::Bernoulli { p } => check_probability_vector(p, "bernoulli vector"),
            MeasureSpec::Markov { p, pi } => {
                let k = pi.len();
                check_probability_vector(pi, "stationary vector")?;
                if p.len() != k {
                    return Err(Error::NotStochastic("matrix and stationary vector sizes differ".into()));
                }
                for row in p {
                    if row.len() != k {
                        return Err(Error::NotStochastic("matrix is not square".into()));
                    }
                    check_probability_vector(row, "transition row")?;
                }
                let residual = (0..k)
                    .map(|j| ((0..k).map(|i| pi[i] * p[i][j]).sum::<f64>() - pi[j]).abs())
                    .fold(0.0, f64::max);
                if residual > STATIONARY_TOL {
                    return Err(Error::NotStationary(residual));
                }
                Ok(())
            }
            MeasureSpec::Convex { weights, components } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(Error::NotStochastic("convex combination needs one weight per component".into()));
                }
                check_probability_vector(weights, "convex weights")?;
                let k = components[0].alphabet();
                for c in components {
                    if c.alphabet() != k {
                        return Err(Error::InvalidArgument("components must share an alphabet".into()));
                    }
                    c.validate()?;
                }
                Ok(())
            }
        }
    }

    /// The Parry (maximal entropy) Markov measure of a mixing SFT, or the
    /// uniform Bernoulli measure of a full shift.
    pub fn max_entropy(system: &ShiftSystem) -> Self {
        let k = system.alphabet();
        match system.kind() {
            SystemKind::Full => MeasureSpec::Bernoulli { p: vec![1.0 / k as f64; k] },
            SystemKind::Sft { matrix } => {
                let a: Vec<Vec<f64>> = matrix.iter().map(|r| r.iter().map(|&b| b as u8 as f64).collect()).collect();
                let perron = |transpose: bool| -> (f64, Vec<f64>) {
                    let mut v = vec![1.0; k];
                    let mut lambda = 1.0;
                    for _ in 0..10_000 {
                        let mut w = vec![0.0; k];
                        for i in 0..k {
                            for j in 0..k {
                                w[i] += if transpose { a[j][i] } else { a[i][j] } * v[j];
                            }
                        }
                        let norm: f64 = w.iter().sum();
                        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
                        let delta = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        v = next;
                        lambda = norm;
                        if delta < 1e-16 {
                            break;
                        }
                    }
                    (lambda / v.iter().sum::<f64>(), v)
                };
                let (lambda, right) = perron(false);
                let (_, left) = perron(true);
                let p: Vec<Vec<f64>> = (0..k)
                    .map(|i| (0..k).map(|j| a[i][j] * right[j] / (lambda * right[i])).collect())
                    .collect();
                let z: f64 = (0..k).map(|i| left[i] * right[i]).sum();
                let pi: Vec<f64> = (0..k).map(|i| left[i] * right[i] / z).collect();
                MeasureSpec::Markov { p, pi }
            }
        }
    }

    /// Mass of the cylinder `{x : x|_F = pattern}` (cells of `F` in set order).
    pub fn cylinder_mass(&self, f: &FiniteSubset, pattern: &[u8]) -> f64 {
        match self {
            MeasureSpec::Bernoulli { p } => pattern.iter().map(|&a| p[a as usize]).product(),
            MeasureSpec::Markov { .. } => self.ln_cylinder_mass(f, pattern).exp(),
            MeasureSpec::Convex { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.cylinder_mass(f, pattern)).sum()
            }
        }
    }

    /// `ln μ([pattern]_F)`, computed without underflow for large `F`.
    pub fn ln_cylinder_mass(&self, f: &FiniteSubset, pattern: &[u8]) -> f64 {
        match self {
            MeasureSpec::Bernoulli { p } => pattern.iter().map(|&a| p[a as usize].ln()).sum(),
            MeasureSpec::Markov { p, pi } => {
                let xs: Vec<i64> = f.iter().map(GroupElement::x).collect();
                if xs.is_empty() {
                    return 0.0;
                }
                let mut total = pi[pattern[0] as usize].ln();
                let mut cache: BTreeMap<i64, Vec<Vec<f64>>> = BTreeMap::new();
                for i in 1..xs.len() {
                    let gap = xs[i] - xs[i - 1];
                    let (a, b) = (pattern[i - 1] as usize, pattern[i] as usize);
                    let step = if gap == 1 {
                        p[a][b]
                    } else {
                        cache.entry(gap).or_insert_with(|| matrix_power(p, gap as u64))[a][b]
                    };
                    total += step.ln();
                }
                total
            }
            MeasureSpec::Convex { weights, components } => {
                let logs: Vec<f64> = weights
                    .iter()
                    .zip(components)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, c)| w.ln() + c.ln_cylinder_mass(f, pattern))
                    .collect();
                let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return m;
                }
                m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
            }
        }
    }

    /// Exact metric entropy in nats; entropy is affine on convex combinations.
    pub fn entropy(&self) -> f64 {
        match self {
            MeasureSpec::Bernoulli { p } => -p.iter().map(|&x| xlogx(x)).sum::<f64>(),
            MeasureSpec::Markov { p, pi } => {
                -pi.iter().zip(p).map(|(w, row)| w * row.iter().map(|&x| xlogx(x)).sum::<f64>()).sum::<f64>()
            }
            MeasureSpec::Convex { weights, components } => weights.iter().zip(components).map(|(w, c)| w * c.entropy()).sum(),
        }
    }

    /// One-site marginal.
    pub fn symbol_frequencies(&self) -> Vec<f64> {
        match self {
            MeasureSpec::Bernoulli { p } => p.clone(),
            MeasureSpec::Markov { pi, .. } => pi.clone(),
            MeasureSpec::Convex { weights, components } => {
                let k = self.alphabet();
                let mut out = vec![0.0; k];
                for (w, c) in weights.iter().zip(components) {
                    for (o, f) in out.iter_mut().zip(c.symbol_frequencies()) {
                        *o += w * f;
                    }
                }
                out
            }
        }
    }

    /// A sample word of length `n` on `[0, n)`; a convex spec first draws its component.
    pub fn sample_word<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<u8> {
        let draw = |probs: &[f64], rng: &mut R| -> u8 {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (a, &q) in probs.iter().enumerate() {
                acc += q;
                if u < acc {
                    return a as u8;
                }
            }
            // Rounding left u above the total; take the last symbol with positive mass.
            probs.iter().rposition(|&q| q > 0.0).unwrap_or(0) as u8
        };
        match self {
            MeasureSpec::Bernoulli { p } => (0..n).map(|_| draw(p, rng)).collect(),
            MeasureSpec::Markov { p, pi } => {
                let mut out = Vec::with_capacity(n);
                if n == 0 {
                    return out;
                }
                out.push(draw(pi, rng));
                for i in 1..n {
                    let prev = out[i - 1] as usize;
                    out.push(draw(&p[prev], rng));
                }
                out
            }
            MeasureSpec::Convex { weights, components } => {
                let c = draw(weights, rng) as usize;
                components[c].sample_word(n, rng)
            }
        }
    }
}

fn matrix_power(p: &[Vec<f64>], mut e: u64) -> Vec<Vec<f64>> {
    let k = p.len();
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..k).map(|i| (0..k).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
    };
    let mut result: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut base = p.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base);
        }
        base = mul(&base, &base);
        e >>= 1;
    }
    result
}

/// Marginal tables on centered windows of radius `0..=radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderMeasure {
    alphabet: usize,
    dim: Dim,
    radius: usize,
    tables: Vec<Vec<f64>>,
    /// For empirical measures: integer counts per table and the common denominator `|F|`.
    counts: Option<(Vec<Vec<u64>>, u64)>,
    invariant: bool,
    spec: Option<MeasureSpec>,
}

/// Radius stored for a requested depth.
pub fn radius_for_depth(depth: usize) -> Result<usize> {
    depth.checked_sub(1).ok_or_else(|| Error::InvalidArgument("depth must be at least 1".into()))
}

/// Default depth: 3 on ℤ (radius 2) and 2 on ℤ² (radius 1), enough for the default truncation.
pub fn default_depth(dim: Dim) -> usize {
    match dim {
        Dim::One => 3,
        Dim::Two => 2,
    }
}

/// Builds the exact marginals of a spec up to `depth`.
pub fn make_measure(spec: &MeasureSpec, dim: Dim, depth: usize) -> Result<CylinderMeasure> {
    spec.validate()?;
    if dim == Dim::Two && !matches!(spec, MeasureSpec::Bernoulli { .. }) && !is_product_mixture(spec) {
        return Err(Error::InvalidArgument("plane measures must be Bernoulli or mixtures of Bernoulli".into()));
    }
    let radius = radius_for_depth(depth)?;
    let k = spec.alphabet();
    let mut tables = Vec::with_capacity(radius + 1);
    for r in 0..=radius {
        let w = centered_window(dim, r);
        let size = k.checked_pow(w.len() as u32).filter(|&s| s <= 1 << 22).ok_or_else(|| {
            Error::BudgetExceeded(format!("marginal table of radius {r} has more than 2^22 entries"))
        })?;
        tables.push((0..size).map(|i| spec.cylinder_mass(&w, &unrank(i, w.len(), k))).collect());
    }
    Ok(CylinderMeasure { alphabet: k, dim, radius, tables, counts: None, invariant: true, spec: Some(spec.clone()) })
}

fn is_product_mixture(spec: &MeasureSpec) -> bool {
    match spec {
        MeasureSpec::Bernoulli { .. } => true,
        MeasureSpec::Markov { .. } => false,
        MeasureSpec::Convex { components, .. } => components.iter().all(is_product_mixture),
    }
}

/// `E_F(x) = |F|^{-1} Σ_{s∈F} δ_{sx}` on windows of radius `< depth`, with exact counts.
pub fn empirical_measure(x: &Configuration, alphabet: usize, f: &FiniteSubset, depth: usize) -> Result<CylinderMeasure> {
    if f.is_empty() {
        return Err(Error::EmptySet);
    }
    if f.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: f.dim() });
    }
    let radius = radius_for_depth(depth)?;
    let dim = x.dim();
    let total = f.len() as u64;
    let mut counts = Vec::with_capacity(radius + 1);
    for r in 0..=radius {
        let w = centered_window(dim, r);
        let size = alphabet.checked_pow(w.len() as u32).filter(|&s| s <= 1 << 22).ok_or_else(|| {
            Error::BudgetExceeded(format!("marginal table of radius {r} has more than 2^22 entries"))
        })?;
        let mut c = vec![0u64; size];
        for &s in f.iter() {
            c[rank(&x.pattern_on_translate(&w, s), alphabet)] += 1;
        }
        counts.push(c);
    }
    Ok(from_counts(alphabet, dim, counts, total))
}

/// Empirical measure of the word `word` along its own positions `[0, n)`, reading
/// outside cells from the periodic extension.
pub fn empirical_measure_of_word(word: &[u8], alphabet: usize, depth: usize) -> Result<CylinderMeasure> {
    let x = Configuration::periodic_word(word)?;
    empirical_measure(&x, alphabet, &FiniteSubset::interval(0, word.len() as i64), depth)
}

/// Depth-1 empirical measure with the given symbol counts.
pub fn from_symbol_counts(dim: Dim, counts: &[u64]) -> Result<CylinderMeasure> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptySet);
    }
    Ok(from_counts(counts.len(), dim, vec![counts.to_vec()], total))
}

fn from_counts(alphabet: usize, dim: Dim, counts: Vec<Vec<u64>>, total: u64) -> CylinderMeasure {
    let tables = counts.iter().map(|c| c.iter().map(|&n| n as f64 / total as f64).collect()).collect();
    CylinderMeasure {
        alphabet,
        dim,
        radius: counts.len() - 1,
        tables,
        counts: Some((counts, total)),
        invariant: false,
        spec: None,
    }
}

/// Summary of [`weakstar_distance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakStarDistance {
    pub value: f64,
    /// Truncation slack: the untruncated distance lies in `[value, value + error_bound]`.
    pub error_bound: f64,
}

impl CylinderMeasure {
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn depth(&self) -> usize {
        self.radius + 1
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    pub fn is_empirical(&self) -> bool {
        self.counts.is_some()
    }

    pub fn spec(&self) -> Option<&MeasureSpec> {
        self.spec.as_ref()
    }

    pub fn table(&self, radius: usize) -> &[f64] {
        &self.tables[radius]
    }

    /// `|F|` for empirical measures.
    pub fn sample_size(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.1)
    }

    /// Mass of a pattern on the radius-`radius` window.
    pub fn window_mass(&self, radius: usize, pattern: &[u8]) -> Result<f64> {
        if radius > self.radius {
            return Err(Error::InsufficientDepth { required: radius, available: self.radius });
        }
        Ok(self.tables[radius][rank(pattern, self.alphabet)])
    }

    pub fn window_mass_exact(&self, radius: usize, pattern: &[u8]) -> Option<Ratio<u64>> {
        let (counts, total) = self.counts.as_ref()?;
        counts.get(radius).map(|c| Ratio::new(c[rank(pattern, self.alphabet)], *total))
    }

    /// Masses of every pattern on `sub ⊆ W_radius` (cells of `sub` in set order).
    pub fn marginal(&self, radius: usize, sub: &FiniteSubset) -> Result<BTreeMap<Vec<u8>, f64>> {
        let (_, cells) = self.marginal_layout(radius, sub)?;
        let w_len = centered_window(self.dim, radius).len();
        let mut out = BTreeMap::new();
        for (i, &m) in self.tables[radius].iter().enumerate() {
            let full = unrank(i, w_len, self.alphabet);
            let key: Vec<u8> = cells.iter().map(|&c| full[c]).collect();
            *out.entry(key).or_insert(0.0) += m;
        }
        Ok(out)
    }

    fn marginal_layout(&self, radius: usize, sub: &FiniteSubset) -> Result<(FiniteSubset, Vec<usize>)> {
        if radius > self.radius {
            return Err(Error::InsufficientDepth { required: radius, available: self.radius });
        }
        let w = centered_window(self.dim, radius);
        if !sub.is_subset(&w) {
            return Err(Error::InvalidArgument("sub-window must lie inside the centered window".into()));
        }
        let position: BTreeMap<GroupElement, usize> = w.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let cells = sub.iter().map(|c| position[c]).collect();
        Ok((w, cells))
    }

    /// Mass of the cylinder `{x : x|_cells = pattern}` for any cell set inside the stored windows.
    pub fn cylinder_mass(&self, cells: &FiniteSubset, pattern: &[u8]) -> Result<f64> {
        let r = self.radius_covering(cells)?;
        Ok(self.marginal(r, cells)?.get(pattern).copied().unwrap_or(0.0))
    }

    /// Exact cylinder mass for empirical measures.
    pub fn cylinder_mass_exact(&self, cells: &FiniteSubset, pattern: &[u8]) -> Result<Option<Ratio<u64>>> {
        let Some((counts, total)) = self.counts.as_ref() else {
            return Ok(None);
        };
        let r = self.radius_covering(cells)?;
        let (_, idx) = self.marginal_layout(r, cells)?;
        let w_len = centered_window(self.dim, r).len();
        let mut n = 0u64;
        for (i, &c) in counts[r].iter().enumerate() {
            let full = unrank(i, w_len, self.alphabet);
            if idx.iter().zip(pattern).all(|(&j, &a)| full[j] == a) {
                n += c;
            }
        }
        Ok(Some(Ratio::new(n, *total)))
    }

    fn radius_covering(&self, cells: &FiniteSubset) -> Result<usize> {
        let need = cells
            .iter()
            .map(|c| {
                let xy = c.coords();
                xy[0].unsigned_abs().max(xy[1].unsigned_abs()) as usize
            })
            .max()
            .unwrap_or(0);
        if need > self.radius {
            return Err(Error::InsufficientDepth { required: need, available: self.radius });
        }
        Ok(need)
    }

    /// Largest violation of restriction- and translation-consistency across tables.
    pub fn consistency_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 1..=self.radius {
            let inner = centered_window(self.dim, r - 1);
            let m = self.marginal(r, &inner).expect("inner window");
            for (i, &v) in self.tables[r - 1].iter().enumerate() {
                let key = unrank(i, inner.len(), self.alphabet);
                worst = worst.max((m.get(&key).copied().unwrap_or(0.0) - v).abs());
            }
            if self.invariant {
                // Two unit translates of the inner window inside W_r must agree.
                let axes = self.dim.rank();
                for a in 0..axes {
                    let mut e = [0i64; 2];
                    e[a] = 1;
                    let plus = inner.translate(GroupElement::from_coords(self.dim, e));
                    let minus = inner.translate(GroupElement::from_coords(self.dim, [-e[0], -e[1]]));
                    let mp = self.marginal(r, &plus).expect("inside");
                    let mm = self.marginal(r, &minus).expect("inside");
                    for (k, v) in &mp {
                        worst = worst.max((mm.get(k).copied().unwrap_or(0.0) - v).abs());
                    }
                }
            }
        }
        for t in &self.tables {
            worst = worst.max((t.iter().sum::<f64>() - 1.0).abs());
        }
        worst
    }

    pub fn metric_entropy(&self) -> Result<f64> {
        self.spec.as_ref().map(MeasureSpec::entropy).ok_or(Error::NoGeneratingSpec)
    }

    /// Shannon entropy of the marginal on `cells`.
    pub fn marginal_entropy(&self, cells: &FiniteSubset) -> Result<f64> {
        if let Some(spec) = &self.spec {
            if self.dim == Dim::One && cells.len() <= 20 {
                let k = self.alphabet;
                let total = k.pow(cells.len() as u32);
                return Ok(-(0..total).map(|i| xlogx(spec.cylinder_mass(cells, &unrank(i, cells.len(), k)))).sum::<f64>());
            }
        }
        let r = self.radius_covering(cells)?;
        Ok(-self.marginal(r, cells)?.values().map(|&p| xlogx(p)).sum::<f64>())
    }
}

/// `H(W_d)/|W_d|` for `d` in `depths`, with the last increment as an error proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRate {
    pub depths: Vec<usize>,
    pub per_site: Vec<f64>,
    /// `H(W_d) − H(W_{d−1})` normalized by the number of added sites, one per depth after the first.
    pub increments: Vec<f64>,
    pub error_proxy: f64,
}

pub fn entropy_rate_estimate(mu: &CylinderMeasure, depths: std::ops::RangeInclusive<usize>) -> Result<EntropyRate> {
    let mut out = EntropyRate { depths: Vec::new(), per_site: Vec::new(), increments: Vec::new(), error_proxy: 0.0 };
    let mut prev: Option<(f64, usize)> = None;
    for d in depths {
        let w = centered_window(mu.dim, radius_for_depth(d)?);
        let h = mu.marginal_entropy(&w)?;
        out.depths.push(d);
        out.per_site.push(h / w.len() as f64);
        if let Some((hp, np)) = prev {
            out.increments.push((h - hp) / (w.len() - np) as f64);
        }
        prev = Some((h, w.len()));
    }
    out.error_proxy = match out.per_site.len() {
        0 | 1 => f64::NAN,
        n => (out.per_site[n - 2] - out.per_site[n - 1]).abs(),
    };
    Ok(out)
}

/// Truncated `D(μ, ν) = Σ_{i ≤ L} 2^{−i} |⟨φ_i, μ − ν⟩|`.
pub fn weakstar_distance(family: &SeparatingFamily, mu: &CylinderMeasure, nu: &CylinderMeasure) -> Result<WeakStarDistance> {
    check_compatible(family, mu, nu)?;
    let mut value = 0.0;
    for e in family.entries() {
        let a = mu.window_mass(e.radius, &e.pattern)?;
        let b = nu.window_mass(e.radius, &e.pattern)?;
        value += (-(e.index as f64)).exp2() * (a - b).abs();
    }
    Ok(WeakStarDistance { value, error_bound: family.truncation_error() })
}

/// Exact truncated distance between two empirical measures.
pub fn weakstar_distance_exact(family: &SeparatingFamily, mu: &CylinderMeasure, nu: &CylinderMeasure) -> Result<Ratio<i128>> {
    check_compatible(family, mu, nu)?;
    let mut total = Ratio::from_integer(0i128);
    for e in family.entries() {
        let a = mu.window_mass_exact(e.radius, &e.pattern).ok_or(Error::NoGeneratingSpec)?;
        let b = nu.window_mass_exact(e.radius, &e.pattern).ok_or(Error::NoGeneratingSpec)?;
        let a = Ratio::new(*a.numer() as i128, *a.denom() as i128);
        let b = Ratio::new(*b.numer() as i128, *b.denom() as i128);
        let diff = if a > b { a - b } else { b - a };
        total += diff / Ratio::from_integer(1i128 << e.index);
    }
    Ok(total)
}

fn check_compatible(family: &SeparatingFamily, mu: &CylinderMeasure, nu: &CylinderMeasure) -> Result<()> {
    if mu.dim != nu.dim || mu.dim != family.dim() {
        return Err(Error::DimensionMismatch { expected: family.dim(), found: if mu.dim != family.dim() { mu.dim } else { nu.dim } });
    }
    if mu.alphabet != nu.alphabet || mu.alphabet != family.alphabet() {
        return Err(Error::InvalidArgument("alphabet mismatch between measures and family".into()));
    }
    let need = family.entries().last().map(|e| e.radius).unwrap_or(0);
    let have = mu.radius.min(nu.radius);
    if need > have {
        return Err(Error::InsufficientDepth { required: need, available: have });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMode {
    /// Consecutive vertices joined by segments: a compact connected set.
    Polyline,
    /// Convex hull of the vertices: a compact convex set.
    ConvexHull,
}

/// A compact connected (or convex) set `K` of measures given by vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub vertices: Vec<CylinderMeasure>,
    pub mode: SetMode,
    /// Barycentric grid step for convex hulls of three or more vertices.
    pub step: f64,
}

/// `D(μ, K)` with how it was minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDistance {
    pub value: f64,
    pub error_bound: f64,
    /// Discretization step of the parameter search; `0` when the minimum is exact.
    pub step: f64,
    /// Barycentric weights of a minimizer over the vertices.
    pub argmin: Vec<f64>,
}

impl MeasureSet {
    pub fn new(vertices: Vec<CylinderMeasure>, mode: SetMode) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptySet);
        }
        let first = &vertices[0];
        if vertices.iter().any(|v| v.dim != first.dim || v.alphabet != first.alphabet) {
            return Err(Error::InvalidArgument("vertices must share dimension and alphabet".into()));
        }
        Ok(MeasureSet { vertices, mode, step: 1.0 / 64.0 })
    }

    pub fn singleton(mu: CylinderMeasure) -> Self {
        MeasureSet { vertices: vec![mu], mode: SetMode::Polyline, step: 1.0 / 64.0 }
    }

    /// The measure at barycentric weights `t` over the vertices.
    pub fn point(&self, t: &[f64]) -> CylinderMeasure {
        let radius = self.vertices.iter().map(|v| v.radius).min().expect("nonempty");
        let first = &self.vertices[0];
        let tables = (0..=radius)
            .map(|r| {
                let mut acc = vec![0.0; first.tables[r].len()];
                for (w, v) in t.iter().zip(&self.vertices) {
                    for (a, m) in acc.iter_mut().zip(&v.tables[r]) {
                        *a += w * m;
                    }
                }
                acc
            })
            .collect();
        let spec = self
            .vertices
            .iter()
            .map(|v| v.spec.clone())
            .collect::<Option<Vec<_>>>()
            .map(|components| MeasureSpec::Convex { weights: t.to_vec(), components });
        CylinderMeasure {
            alphabet: first.alphabet,
            dim: first.dim,
            radius,
            tables,
            counts: None,
            invariant: self.vertices.iter().all(|v| v.invariant),
            spec,
        }
    }
}

fn coordinate_vectors(family: &SeparatingFamily, mu: &CylinderMeasure) -> Result<Vec<f64>> {
    family.entries().iter().map(|e| mu.window_mass(e.radius, &e.pattern)).collect()
}

/// `D(μ, K) = min_{ν ∈ K} D(μ, ν)`.
///
/// On a segment `D(μ, ν(t))` is convex and piecewise linear in `t`, so its
/// minimum sits at a breakpoint and is found exactly. Hulls of three or more
/// vertices are searched over a barycentric grid of the set's step.
pub fn distance_to_set(family: &SeparatingFamily, mu: &CylinderMeasure, k: &MeasureSet) -> Result<SetDistance> {
    for v in &k.vertices {
        check_compatible(family, mu, v)?;
    }
    let weights: Vec<f64> = family.entries().iter().map(|e| (-(e.index as f64)).exp2()).collect();
    let m = coordinate_vectors(family, mu)?;
    let vs: Vec<Vec<f64>> = k.vertices.iter().map(|v| coordinate_vectors(family, v)).collect::<Result<_>>()?;
    let eval = |t: &[f64]| -> f64 {
        (0..weights.len())
            .map(|i| {
                let nu: f64 = t.iter().zip(&vs).map(|(w, v)| w * v[i]).sum();
                weights[i] * (m[i] - nu).abs()
            })
            .sum()
    };
    let n = vs.len();
    let error_bound = family.truncation_error();
    if n == 1 {
        return Ok(SetDistance { value: eval(&[1.0]), error_bound, step: 0.0, argmin: vec![1.0] });
    }
    let segment_min = |a: usize, b: usize| -> (f64, f64) {
        let mut ts = vec![0.0, 1.0];
        for i in 0..weights.len() {
            let (p, q) = (m[i] - vs[a][i], vs[b][i] - vs[a][i]);
            if q != 0.0 {
                let t = p / q;
                if (0.0..=1.0).contains(&t) {
                    ts.push(t);
                }
            }
        }
        ts.into_iter()
            .map(|t| {
                let mut bary = vec![0.0; n];
                bary[a] += 1.0 - t;
                bary[b] += t;
                (eval(&bary), t)
            })
            .fold((f64::INFINITY, 0.0), |best, c| if c.0 < best.0 { c } else { best })
    };
    let segments: Vec<(usize, usize)> = match (k.mode, n) {
        (SetMode::Polyline, _) | (SetMode::ConvexHull, 2) => (0..n - 1).map(|i| (i, i + 1)).collect(),
        _ => Vec::new(),
    };
    if !segments.is_empty() {
        let mut best = SetDistance { value: f64::INFINITY, error_bound, step: 0.0, argmin: Vec::new() };
        for (a, b) in segments {
            let (v, t) = segment_min(a, b);
            if v < best.value {
                let mut bary = vec![0.0; n];
                bary[a] = 1.0 - t;
                bary[b] = t;
                best = SetDistance { value: v, error_bound, step: 0.0, argmin: bary };
            }
        }
        return Ok(best);
    }
    // Barycentric grid with denominator `steps`.
    let steps = (1.0 / k.step).round().max(1.0) as usize;
    let mut best = SetDistance { value: f64::INFINITY, error_bound, step: k.step, argmin: Vec::new() };
    let mut counts = vec![0usize; n];
    fn visit<F: FnMut(&[usize])>(i: usize, left: usize, counts: &mut Vec<usize>, f: &mut F) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            visit(i + 1, left - c, counts, f);
        }
    }
    visit(0, steps, &mut counts, &mut |c: &[usize]| {
        let t: Vec<f64> = c.iter().map(|&x| x as f64 / steps as f64).collect();
        let v = eval(&t);
        if v < best.value {
            best.value = v;
            best.argmin = t;
        }
    });
    Ok(best)
}

/// Vertices of `{μ : ⟨f, μ⟩ = a}` within the one-site marginals, where `f` assigns
/// `phi[s]` to symbol `s`: points where simplex edges meet the hyperplane.
pub fn level_set_vertices(phi: &[f64], a: f64) -> Vec<Vec<f64>> {
    let k = phi.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        if (phi[i] - a).abs() < 1e-15 {
            let mut p = vec![0.0; k];
            p[i] = 1.0;
            out.push(p);
        }
        for j in i + 1..k {
            let (u, v) = (phi[i] - a, phi[j] - a);
            if u * v < 0.0 {
                // t·φ_i + (1−t)·φ_j = a
                let t = (a - phi[j]) / (phi[i] - phi[j]);
                let mut p = vec![0.0; k];
                p[i] = t;
                p[j] = 1.0 - t;
                out.push(p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn fam1() -> SeparatingFamily {
        SeparatingFamily::new(2, Dim::One, 24).unwrap()
    }

    #[test]
    fn bernoulli_half_marginals() {
        let mu = make_measure(&MeasureSpec::bernoulli_binary(0.5), Dim::One, 2).unwrap();
        for r in 0..=1 {
            let len = 2 * r + 1;
            for &m in mu.table(r) {
                assert_abs_diff_eq!(m, 0.5f64.powi(len as i32), epsilon = 1e-15);
            }
        }
        let two = FiniteSubset::interval(0, 2);
        assert_abs_diff_eq!(mu.cylinder_mass(&two, &[1, 0]).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn uniform_markov_is_bernoulli() {
        let markov = MeasureSpec::Markov { p: vec![vec![0.5, 0.5], vec![0.5, 0.5]], pi: vec![0.5, 0.5] };
        let a = make_measure(&markov, Dim::One, 3).unwrap();
        let b = make_measure(&MeasureSpec::bernoulli_binary(0.5), Dim::One, 3).unwrap();
        for r in 0..=2 {
            for (x, y) in a.table(r).iter().zip(b.table(r)) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn mixture_marginals() {
        let spec = MeasureSpec::Convex {
            weights: vec![0.5, 0.5],
            components: vec![MeasureSpec::bernoulli_binary(0.25), MeasureSpec::bernoulli_binary(0.75)],
        };
        let mu = make_measure(&spec, Dim::One, 2).unwrap();
        assert_abs_diff_eq!(mu.table(0)[0], 0.5, epsilon = 1e-15);
        // Direct mixture: P(00) = ½(¾·¾) + ½(¼·¼) = 0.3125, versus ¼ for Bernoulli(½).
        let pair = FiniteSubset::interval(0, 2);
        assert_abs_diff_eq!(mu.cylinder_mass(&pair, &[0, 0]).unwrap(), 0.3125, epsilon = 1e-15);
        assert_abs_diff_eq!(mu.metric_entropy().unwrap(), MeasureSpec::bernoulli_binary(0.25).entropy(), epsilon = 1e-12);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(MeasureSpec::Bernoulli { p: vec![0.5, 0.6] }.validate(), Err(Error::NotStochastic(_))));
        let bad = MeasureSpec::Markov { p: vec![vec![0.9, 0.1], vec![0.5, 0.5]], pi: vec![0.5, 0.5] };
        assert!(matches!(bad.validate(), Err(Error::NotStationary(_))));
    }

    #[test]
    fn empirical_examples() {
        let x = Configuration::periodic_word(&[0, 1]).unwrap();
        let e = empirical_measure(&x, 2, &FiniteSubset::interval(0, 2), 1).unwrap();
        assert_eq!(e.window_mass_exact(0, &[0]), Some(Ratio::new(1, 2)));
        let zero = Configuration::periodic_word(&[0]).unwrap();
        let e = empirical_measure(&zero, 2, &FiniteSubset::interval(-3, 9), 3).unwrap();
        for r in 0..=2 {
            assert_eq!(e.table(r)[0], 1.0);
        }
        let x = Configuration::periodic_word(&[0, 0, 1]).unwrap();
        let e = empirical_measure(&x, 2, &FiniteSubset::interval(0, 6), 2).unwrap();
        let pair = FiniteSubset::interval(0, 2);
        // Orbit count: x_s x_{s+1} = 00 at s = 0, 3.
        assert_eq!(e.cylinder_mass_exact(&pair, &[0, 0]).unwrap(), Some(Ratio::new(2, 6)));
        assert!(e.consistency_residual() < 1e-15);
    }

    #[test]
    fn distance_identities() {
        let fam = fam1();
        let mu = make_measure(&MeasureSpec::bernoulli_binary(0.3), Dim::One, 3).unwrap();
        assert_eq!(weakstar_distance(&fam, &mu, &mu).unwrap().value, 0.0);
        let x = Configuration::periodic_word(&[0, 1, 1, 0, 1, 0, 0]).unwrap();
        let y = Configuration::periodic_word(&[1, 1, 0, 0, 1]).unwrap();
        let origin = FiniteSubset::singleton(GroupElement::d1(0));
        let ex = empirical_measure(&x, 2, &origin, 3).unwrap();
        let ey = empirical_measure(&y, 2, &origin, 3).unwrap();
        assert_eq!(weakstar_distance(&fam, &ex, &ey).unwrap().value, fam.rho(&x, &y));
    }

    #[test]
    fn bernoulli_quarter_versus_three_quarters() {
        let fam = fam1();
        let a = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 3).unwrap();
        let b = make_measure(&MeasureSpec::bernoulli_binary(0.75), Dim::One, 3).unwrap();
        // Oracle: sum over the 24 enumerated cylinders using closed-form Bernoulli masses.
        let mut oracle = 0.0;
        let mut index = 1;
        'outer: for len in [1u32, 3, 5] {
            for w in 0..(1u32 << len) {
                let ones = w.count_ones() as i32;
                let zeros = len as i32 - ones;
                let pa = 0.25f64.powi(ones) * 0.75f64.powi(zeros);
                let pb = 0.75f64.powi(ones) * 0.25f64.powi(zeros);
                oracle += (pa - pb).abs() / 2f64.powi(index);
                index += 1;
                if index > 24 {
                    break 'outer;
                }
            }
        }
        let d = weakstar_distance(&fam, &a, &b).unwrap().value;
        assert_abs_diff_eq!(d, oracle, epsilon = 1e-15);
        // Frozen from an exact rational evaluation of the same sum: 3761196983 / 2^33.
        assert_abs_diff_eq!(d, 3761196983.0 / 8589934592.0, epsilon = 1e-15);
    }

    #[test]
    fn insufficient_depth() {
        let fam = fam1();
        let a = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 2).unwrap();
        assert!(matches!(weakstar_distance(&fam, &a, &a), Err(Error::InsufficientDepth { .. })));
    }

    #[test]
    fn entropies() {
        assert_abs_diff_eq!(MeasureSpec::bernoulli_binary(0.5).entropy(), std::f64::consts::LN_2, epsilon = 1e-15);
        let h = MeasureSpec::bernoulli_binary(0.25).entropy();
        assert_abs_diff_eq!(h, 0.25 * 4f64.ln() + 0.75 * (4.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.5623351446188083, epsilon = 1e-12);
        let mu = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 4).unwrap();
        let rate = entropy_rate_estimate(&mu, 1..=4).unwrap();
        for v in rate.per_site {
            assert_abs_diff_eq!(v, h, epsilon = 1e-12);
        }
        let empirical = empirical_measure(&Configuration::periodic_word(&[0, 1]).unwrap(), 2, &FiniteSubset::interval(0, 2), 1).unwrap();
        assert!(matches!(empirical.metric_entropy(), Err(Error::NoGeneratingSpec)));
    }

    #[test]
    fn golden_mean_parry_rate() {
        let spec = MeasureSpec::max_entropy(&ShiftSystem::golden_mean());
        spec.validate().unwrap();
        let log_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert_abs_diff_eq!(spec.entropy(), log_phi, epsilon = 1e-12);
        let mu = make_measure(&spec, Dim::One, 1).unwrap();
        let rate = entropy_rate_estimate(&mu, 1..=8).unwrap();
        for w in rate.per_site.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for inc in &rate.increments {
            assert_abs_diff_eq!(*inc, log_phi, epsilon = 1e-12);
        }
        assert!(rate.per_site.last().unwrap() - log_phi < 0.02);
    }

    #[test]
    fn sampled_bernoulli_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spec = MeasureSpec::bernoulli_binary(0.25);
        let word = spec.sample_word(10_000, &mut rng);
        let e = empirical_measure_of_word(&word, 2, 3).unwrap();
        let rate = entropy_rate_estimate(&e, 3..=3).unwrap();
        assert!((rate.per_site[0] - spec.entropy()).abs() < 0.05);
    }

    #[test]
    fn set_distance_on_segment_is_exact() {
        let fam = fam1();
        let a = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 3).unwrap();
        let b = make_measure(&MeasureSpec::bernoulli_binary(0.75), Dim::One, 3).unwrap();
        let k = MeasureSet::new(vec![a.clone(), b.clone()], SetMode::Polyline).unwrap();
        let mid = k.point(&[0.5, 0.5]);
        let d = distance_to_set(&fam, &mid, &k).unwrap();
        assert!(d.value < 1e-15);
        assert_eq!(d.step, 0.0);
        let outside = make_measure(&MeasureSpec::bernoulli_binary(0.5), Dim::One, 3).unwrap();
        let d = distance_to_set(&fam, &outside, &k).unwrap();
        // Any grid point on the segment is at least as far.
        for i in 0..=256 {
            let t = i as f64 / 256.0;
            let v = weakstar_distance(&fam, &outside, &k.point(&[1.0 - t, t])).unwrap().value;
            assert!(d.value <= v + 1e-15);
        }
        let hull = MeasureSet::new(vec![a, b, outside.clone()], SetMode::ConvexHull).unwrap();
        let d = distance_to_set(&fam, &outside, &hull).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.step, 1.0 / 64.0);
    }

    #[test]
    fn level_set_vertices_binary_and_ternary() {
        let v = level_set_vertices(&[0.0, 1.0], 0.3);
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0][1], 0.3, epsilon = 1e-15);
        let v = level_set_vertices(&[0.0, 1.0, 2.0], 1.0);
        // Vertex e_1 and the midpoint of the edge {0, 2}.
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn plane_bernoulli() {
        let mu = make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::Two, 2).unwrap();
        assert_eq!(mu.table(1).len(), 512);
        assert!(mu.consistency_residual() < 1e-12);
        let fam = SeparatingFamily::new(2, Dim::Two, 24).unwrap();
        assert_eq!(weakstar_distance(&fam, &mu, &mu).unwrap().value, 0.0);
    }

    proptest! {
        #[test]
        fn exact_distance_is_a_metric(
            a in prop::collection::vec(0u8..2, 1..12),
            b in prop::collection::vec(0u8..2, 1..12),
            c in prop::collection::vec(0u8..2, 1..12),
        ) {
            let fam = fam1();
            let (ma, mb, mc) = (
                empirical_measure_of_word(&a, 2, 3).unwrap(),
                empirical_measure_of_word(&b, 2, 3).unwrap(),
                empirical_measure_of_word(&c, 2, 3).unwrap(),
            );
            let ab = weakstar_distance_exact(&fam, &ma, &mb).unwrap();
            let bc = weakstar_distance_exact(&fam, &mb, &mc).unwrap();
            let ac = weakstar_distance_exact(&fam, &ma, &mc).unwrap();
            prop_assert_eq!(ab, weakstar_distance_exact(&fam, &mb, &ma).unwrap());
            prop_assert!(ac <= ab + bc);
            prop_assert!(ab <= Ratio::from_integer(1));
            let float = weakstar_distance(&fam, &ma, &mb).unwrap().value;
            prop_assert!((float - *ab.numer() as f64 / *ab.denom() as f64).abs() < 1e-12);
        }

        #[test]
        fn empirical_tables_are_consistent(a in prop::collection::vec(0u8..3, 1..15)) {
            let e = empirical_measure_of_word(&a, 3, 3).unwrap();
            prop_assert!(e.consistency_residual() < 1e-12);
        }

        #[test]
        fn entropy_is_affine(p in 0.0f64..1.0, q in 0.0f64..1.0, t in 0.0f64..1.0) {
            let (a, b) = (MeasureSpec::bernoulli_binary(p), MeasureSpec::bernoulli_binary(q));
            let mix = MeasureSpec::Convex { weights: vec![t, 1.0 - t], components: vec![a.clone(), b.clone()] };
            prop_assert!((mix.entropy() - (t * a.entropy() + (1.0 - t) * b.entropy())).abs() < 1e-12);
        }

        #[test]
        fn invariant_rates_decrease(p in 0.05f64..0.95, q in 0.05f64..0.95) {
            let spec = MeasureSpec::Markov {
                p: vec![vec![1.0 - p, p], vec![q, 1.0 - q]],
                pi: vec![q / (p + q), p / (p + q)],
            };
            let mu = make_measure(&spec, Dim::One, 3).unwrap();
            prop_assert!(mu.consistency_residual() < 1e-12);
            let rate = entropy_rate_estimate(&mu, 1..=5).unwrap();
            for w in rate.per_site.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
