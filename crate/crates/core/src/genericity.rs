//! Specification gluing, stretched measure schedules and generic-point synthesis.
//!
//! The synthesizer materializes a single configuration on a finite region
//! covering `F_{M(kmax)}`. Bricks of the layer `𝓗_k` are filled with sampled
//! patterns typical for `α_k` and glued together; the certificate records the
//! realized brick distances and the tracking bound they imply for every `F_n`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{family_for_depth, EntropyEstimate, EstimateMeta, Bias, PatternSet, Constraint, theta_estimate, DEFAULT_BUDGET};
use crate::group::{Dim, FiniteSubset, FolnerSequence, GroupElement};
use crate::measures::{
    distance_to_set, empirical_measure, from_symbol_counts, level_set_vertices, make_measure, CylinderMeasure, MeasureSet, MeasureSpec,
    SetMode,
};
use crate::shift::{ln_biguint, mistake_ball_contains, Configuration, CountQuality, Extension, MistakeFunction, SeparatingFamily, ShiftSystem};
use crate::tiling::{FolnerDecomposition, Tile};

/// One piece of a gluing specification: copy `sources[source]` on `f` up to `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueSegment {
    pub f: FiniteSubset,
    pub source: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluingSpec {
    pub sources: Vec<Configuration>,
    pub segments: Vec<GlueSegment>,
    pub mistake: MistakeFunction,
    /// Content for cells outside every segment (full shifts); zeros when absent.
    pub background: Option<Configuration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlueOutcome {
    pub y: Configuration,
    /// Mistakes of `y` against each segment's source, re-checked independently.
    pub mistakes: Vec<usize>,
    /// Connector words inserted between consecutive SFT segments, keyed by start cell.
    pub connectors: Vec<(i64, Vec<u8>)>,
}

fn region_of(sets: impl Iterator<Item = (GroupElement, GroupElement)>, dim: Dim) -> Result<([i64; 2], [usize; 2])> {
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for (a, b) in sets {
        for i in 0..2 {
            lo[i] = lo[i].min(a.coords()[i]);
            hi[i] = hi[i].max(b.coords()[i]);
        }
    }
    if lo[0] == i64::MAX {
        return Err(Error::EmptySet);
    }
    let ext1 = if dim == Dim::Two { (hi[1] - lo[1] + 1) as usize } else { 1 };
    Ok((lo, [(hi[0] - lo[0] + 1) as usize, ext1]))
}

fn cell_index(lo: [i64; 2], extent: [usize; 2], p: GroupElement) -> usize {
    let c = p.coords();
    (c[1] - lo[1]) as usize * extent[0] + (c[0] - lo[0]) as usize
}

/// Builds `y` in every mistake ball of the spec.
///
/// Full shifts copy each source on its set. SFTs (on ℤ, interval segments)
/// also need every gap of at least the mixing gap `M`, measured in steps from
/// the last cell of one segment to the first of the next; gaps are filled with
/// the lexicographically least admissible connector.
pub fn glue(spec: &GluingSpec, system: &ShiftSystem, family: &SeparatingFamily) -> Result<GlueOutcome> {
    let dim = system.dim();
    for seg in &spec.segments {
        seg.f.check_same_dim(&FiniteSubset::empty(dim))?;
        if seg.source >= spec.sources.len() {
            return Err(Error::InvalidArgument(format!("segment source {} out of range", seg.source)));
        }
        if seg.f.is_empty() {
            return Err(Error::EmptySet);
        }
    }
    let mut order: Vec<usize> = (0..spec.segments.len()).collect();
    order.sort_by_key(|&i| spec.segments[i].f.bounding_box().map(|b| b.0).expect("nonempty"));
    let boxes: Vec<(GroupElement, GroupElement)> = spec
        .segments
        .iter()
        .map(|s| {
            let (lo, hi) = s.f.bounding_box().expect("nonempty");
            (GroupElement::from_coords(dim, lo), GroupElement::from_coords(dim, hi))
        })
        .collect();
    let bg_box = spec.background.as_ref().map(|b| {
        let lo = b.window_lo();
        let ext = b.extent();
        let hi = [lo[0] + ext[0] as i64 - 1, lo[1] + ext[1] as i64 - 1];
        (GroupElement::from_coords(dim, lo), GroupElement::from_coords(dim, hi))
    });
    let (lo, extent) = region_of(boxes.iter().copied().chain(bg_box), dim)?;
    let mut symbols = vec![0u8; extent[0] * extent[1]];
    if let Some(bg) = &spec.background {
        if !system.is_full() {
            return Err(Error::InvalidArgument("a background is only meaningful on full shifts".into()));
        }
        for (i, s) in symbols.iter_mut().enumerate() {
            let x = lo[0] + (i % extent[0]) as i64;
            let y = lo[1] + (i / extent[0]) as i64;
            *s = bg.get(GroupElement::from_coords(dim, [x, y]));
        }
    }
    let mut owner: Vec<Option<usize>> = vec![None; symbols.len()];
    for (i, seg) in spec.segments.iter().enumerate() {
        let x = &spec.sources[seg.source];
        for &p in seg.f.iter() {
            let idx = cell_index(lo, extent, p);
            if let Some(j) = owner[idx] {
                return Err(Error::InvalidArgument(format!("segments {j} and {i} overlap")));
            }
            owner[idx] = Some(i);
            symbols[idx] = x.get(p);
        }
    }
    let mut connectors = Vec::new();
    if !system.is_full() {
        if dim != Dim::One {
            return Err(Error::InvalidArgument("SFT gluing is implemented on ℤ only".into()));
        }
        for seg in &spec.segments {
            let (a, b) = seg.f.bounding_box().expect("nonempty");
            if (b[0] - a[0] + 1) as usize != seg.f.len() {
                return Err(Error::InvalidArgument("SFT gluing needs interval segments".into()));
            }
        }
        let gap_needed = system.mixing_gap();
        for w in order.windows(2) {
            let (_, prev_hi) = spec.segments[w[0]].f.bounding_box().expect("nonempty");
            let (next_lo, _) = spec.segments[w[1]].f.bounding_box().expect("nonempty");
            let steps = next_lo[0] - prev_hi[0];
            if steps < gap_needed as i64 {
                return Err(Error::GapTooSmall { gap: steps, required: gap_needed });
            }
            let target = symbols[(next_lo[0] - lo[0]) as usize];
            let mut cur = symbols[(prev_hi[0] - lo[0]) as usize];
            let mut word = Vec::new();
            for pos in prev_hi[0] + 1..next_lo[0] {
                let left = (next_lo[0] - pos) as u64;
                let next = (0..system.alphabet() as u8)
                    .find(|&c| system.allowed(cur, c) && system.reach(left)[c as usize][target as usize])
                    .ok_or_else(|| Error::Inadmissible(format!("no connector through cell {pos}")))?;
                symbols[(pos - lo[0]) as usize] = next;
                word.push(next);
                cur = next;
            }
            connectors.push((prev_hi[0] + 1, word));
        }
    }
    let y = Configuration::new(dim, lo, extent, symbols, Extension::Constant { fill: 0 })?;
    if !system.is_full() {
        let region = FiniteSubset::interval(lo[0], lo[0] + extent[0] as i64);
        if !system.pattern_admissible(&region, &y.pattern_on(&region)) {
            return Err(Error::Inadmissible("glued word violates the transition rule".into()));
        }
    }
    let mut mistakes = Vec::with_capacity(spec.segments.len());
    for (i, seg) in spec.segments.iter().enumerate() {
        let (inside, count) = mistake_ball_contains(family, &spec.mistake, &seg.f, &spec.sources[seg.source], &y, seg.epsilon);
        if !inside {
            return Err(Error::MistakeBudgetExceeded { segment: i, mistakes: count, budget: spec.mistake.eval(seg.epsilon) * seg.f.len() as f64 });
        }
        mistakes.push(count);
    }
    Ok(GlueOutcome { y, mistakes, connectors })
}

/// Result of the averaging bound for a glued point against one probe measure:
/// `D(E_F(y), α) ≤ Σ (|F_i|/|F|)(D(μ_i, α) + ξ_i + ε_i + g(ε_i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the averaging bound against each probe; `typical[i]` is the
/// measure segment `i` was chosen for.
pub fn glue_averaging_check(
    spec: &GluingSpec,
    y: &Configuration,
    typical: &[CylinderMeasure],
    probes: &[CylinderMeasure],
    depth: usize,
) -> Result<Vec<AveragingCheck>> {
    let alphabet = typical.first().ok_or(Error::EmptySet)?.alphabet();
    let fam = family_for_depth(alphabet, y.dim(), depth)?;
    let union = FiniteSubset::from_elements(y.dim(), spec.segments.iter().flat_map(|s| s.f.iter().copied()))?;
    let e_union = empirical_measure(y, alphabet, &union, depth)?;
    // Per segment: weight, typical measure and ξ_i + ε_i + g(ε_i).
    let mut terms = Vec::with_capacity(spec.segments.len());
    for (seg, mu) in spec.segments.iter().zip(typical) {
        let w = seg.f.len() as f64 / union.len() as f64;
        let xi = crate::measures::weakstar_distance(&fam, &empirical_measure(&spec.sources[seg.source], alphabet, &seg.f, depth)?, mu)?.value;
        terms.push((w, mu, xi + seg.epsilon + spec.mistake.eval(seg.epsilon)));
    }
    probes
        .iter()
        .map(|probe| {
            let lhs = crate::measures::weakstar_distance(&fam, &e_union, probe)?.value;
            let mut rhs = 0.0;
            for (w, mu, slack) in &terms {
                rhs += w * (crate::measures::weakstar_distance(&fam, mu, probe)?.value + slack);
            }
            Ok(AveragingCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 })
        })
        .collect()
}

/// A base sequence `α_1, α_2, …` used level by level: `α′_n = α_k` for `M(k−1) < n ≤ M(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSchedule {
    pub measures: Vec<CylinderMeasure>,
    /// `D(α_j, α_{j+1})` in the depth-`depth` family.
    pub steps: Vec<f64>,
    /// Barycentric weights of each `α_j` over the vertices of `K`.
    pub weights: Vec<Vec<f64>>,
    pub depth: usize,
}

impl MeasureSchedule {
    pub fn constant(mu: CylinderMeasure, count: usize) -> Self {
        MeasureSchedule { depth: mu.depth(), measures: vec![mu; count.max(1)], steps: vec![0.0; count.max(1) - 1], weights: vec![vec![1.0]; count.max(1)] }
    }

    /// `α_k`, 1-based; indices past the end reuse the last measure.
    pub fn alpha(&self, k: usize) -> &CylinderMeasure {
        &self.measures[(k.max(1) - 1).min(self.measures.len() - 1)]
    }

    pub fn alpha_prime(&self, n: u64, dec: &FolnerDecomposition) -> Result<&CylinderMeasure> {
        Ok(self.alpha(dec.level_of(n)?))
    }

    /// `D(α_{k−1}, α_k)`, zero for `k ≤ 1`.
    pub fn step_into(&self, k: usize) -> f64 {
        if k <= 1 {
            0.0
        } else {
            let i = (k - 2).min(self.steps.len().saturating_sub(1));
            if k - 1 >= self.measures.len() {
                0.0
            } else {
                self.steps.get(i).copied().unwrap_or(0.0)
            }
        }
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| (1.0 - t) * u + t * v).collect()
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

/// Barycentric points visited by sweep `j` (1-based).
fn sweep_points(k: &MeasureSet, j: usize, max_vertex: usize) -> Vec<Vec<f64>> {
    let m = k.vertices.len();
    let path: Vec<usize> = match k.mode {
        SetMode::Polyline if m > 1 => (0..m).collect(),
        SetMode::ConvexHull if m > 1 => (0..m).chain(std::iter::once(0)).collect(),
        _ => vec![0],
    };
    if path.len() == 1 {
        return vec![unit(m, 0)];
    }
    let mut pts = vec![unit(m, path[0])];
    for w in path.windows(2) {
        let (a, b) = (unit(m, w[0]), unit(m, w[1]));
        for i in 1..=j {
            pts.push(lerp(&a, &b, i as f64 / j as f64));
        }
    }
    if k.mode == SetMode::Polyline && j % 2 == 0 {
        pts.reverse();
    }
    if k.mode == SetMode::ConvexHull {
        pts.push(unit(m, max_vertex));
        pts.push(unit(m, max_vertex));
    }
    pts
}

/// Walks `K`'s discretization with finer sweeps: sweep `j` splits each edge into `j`
/// steps, polylines alternate direction, and hull sweeps end on the
/// maximal-entropy vertex twice. Produces `α_1, …, α_{kmax+1}`.
pub fn stretched_schedule(k: &MeasureSet, dec: &FolnerDecomposition) -> Result<MeasureSchedule> {
    let count = dec.kmax() + 1;
    let max_vertex = k
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.spec().map(MeasureSpec::entropy).unwrap_or(f64::NEG_INFINITY)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    let mut weights: Vec<Vec<f64>> = Vec::new();
    let mut j = 1;
    while weights.len() < count {
        for p in sweep_points(k, j, max_vertex) {
            let dup = weights.last().map(|l| l.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-15)).unwrap_or(false);
            if !dup || k.vertices.len() == 1 || k.mode == SetMode::ConvexHull {
                weights.push(p);
            }
        }
        j += 1;
    }
    weights.truncate(count);
    let measures: Vec<CylinderMeasure> = weights.iter().map(|w| k.point(w)).collect();
    let depth = measures[0].depth();
    let fam = family_for_depth(measures[0].alphabet(), measures[0].dim(), depth)?;
    let steps = measures
        .windows(2)
        .map(|w| crate::measures::weakstar_distance(&fam, &w[0], &w[1]).map(|d| d.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureSchedule { measures, steps, weights, depth })
}

/// Sequences `ξ_k, γ_k, ε_k` and the mistake function used by the synthesizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    /// `ξ_k = xi_scale · 2^{−k}`.
    pub xi_scale: f64,
    /// `γ_k = gamma_scale · 2^{−k}`.
    pub gamma_scale: f64,
    /// `ε_k = eps_scale · 2^{−k}`.
    pub eps_scale: f64,
    pub mistake: MistakeFunction,
    pub draw_budget: usize,
    /// Separation parameters the sequences are tuned against.
    pub delta_star: f64,
    pub eps_star: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            xi_scale: 0.5,
            gamma_scale: 0.125,
            eps_scale: 0.125,
            mistake: MistakeFunction::identity(),
            draw_budget: 10_000,
            delta_star: 0.5,
            eps_star: 0.5,
        }
    }
}

impl SynthesisParams {
    pub fn xi(&self, k: usize) -> f64 {
        self.xi_scale / (1u64 << k) as f64
    }
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma_scale / (1u64 << k) as f64
    }
    pub fn epsilon(&self, k: usize) -> f64 {
        self.eps_scale / (1u64 << k) as f64
    }

    /// `γ₁ < min(½, ξ₀/3, δ*/2)`, `ε₁ < ε*/4` and `g(ε₁) < δ*/4`.
    pub fn proof_constraints_hold(&self) -> bool {
        self.gamma(1) < 0.5f64.min(self.xi(0) / 3.0).min(self.delta_star / 2.0)
            && self.epsilon(1) < self.eps_star / 4.0
            && self.mistake.eval(self.epsilon(1)) < self.delta_star / 4.0
    }
}

/// What one layer of bricks contributed to the synthesized point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCertificate {
    pub k: usize,
    pub side: i64,
    pub bricks: usize,
    pub xi_target: f64,
    /// `max D(E_S(y), α_k)` over the layer's bricks, on the final point.
    pub xi_realized: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub g_epsilon: f64,
    pub beta: f64,
    /// `D(α_{k−1}, α_k)`.
    pub alpha_step: f64,
    pub max_draws: usize,
    pub total_draws: usize,
    pub mistakes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub seed: u64,
    pub region_side: u64,
    pub depth: usize,
    pub layers: Vec<LayerCertificate>,
    /// Averaging-bound checks of the glued point against every schedule measure.
    pub averaging: Vec<AveragingCheck>,
}

impl Certificate {
    fn layer(&self, k: usize) -> &LayerCertificate {
        &self.layers[k.clamp(1, self.layers.len()) - 1]
    }

    /// `4γ_{k−1} + 4β_k + max(ξ_k, ξ_{k−1} + D(α_{k−1},α_k)) + ε_{k−1} + g(ε_{k−1})`
    /// for `M(k−1) < n ≤ M(k)`, with realized `ξ`.
    pub fn bound(&self, dec: &FolnerDecomposition, n: u64) -> Result<f64> {
        let k = dec.level_of(n)?;
        let cur = self.layer(k);
        let prev = self.layer(k.saturating_sub(1).max(1));
        let tile_term = if k >= 2 { cur.xi_realized.max(prev.xi_realized + cur.alpha_step) } else { cur.xi_realized };
        Ok(4.0 * prev.gamma + 4.0 * cur.beta + tile_term + prev.epsilon + prev.g_epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub y: Configuration,
    pub certificate: Certificate,
    /// Every brick with its layer, in fill order.
    pub bricks: Vec<(usize, Tile)>,
}

fn brick_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn counts_of(pattern: &[u8], alphabet: usize) -> Vec<u64> {
    let mut c = vec![0u64; alphabet];
    for &a in pattern {
        c[a as usize] += 1;
    }
    c
}

/// Pattern-level distance `D(E_S, α)` under the interior convention, plus the boundary slack.
fn pattern_distance(fam: &SeparatingFamily, brick: &FiniteSubset, pattern: &[u8], alpha: &CylinderMeasure, depth: usize) -> Result<Option<(f64, f64)>> {
    if depth == 1 {
        let e = from_symbol_counts(brick.dim(), &counts_of(pattern, alpha.alphabet()))?;
        return Ok(Some((crate::measures::weakstar_distance(fam, &e, alpha)?.value, 0.0)));
    }
    match crate::estimators::interior_empirical(brick, pattern, alpha.alphabet(), depth) {
        Ok((e, slack)) => Ok(Some((crate::measures::weakstar_distance(fam, &e, alpha)?.value, slack))),
        Err(Error::InvalidArgument(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn sample_pattern(spec: &MeasureSpec, dim: Dim, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u8>> {
    match (dim, spec) {
        (Dim::One, _) | (Dim::Two, MeasureSpec::Bernoulli { .. }) => Ok(spec.sample_word(len, rng)),
        (Dim::Two, MeasureSpec::Convex { weights, components }) => {
            use rand::Rng;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (w, c) in weights.iter().zip(components) {
                acc += w;
                if u < acc {
                    return sample_pattern(c, dim, len, rng);
                }
            }
            sample_pattern(components.last().expect("nonempty mixture"), dim, len, rng)
        }
        (Dim::Two, MeasureSpec::Markov { .. }) => Err(Error::InvalidArgument("Markov sampling is defined on ℤ only".into())),
    }
}

/// Fills each brick of `𝓗_1, …, 𝓗_kmax` with the first sampled pattern whose
/// pattern-level empirical measure is within `ξ_k` of `α_k`, then glues the
/// bricks into one point on `[0, M(kmax))^d`.
pub fn synthesize_generic(
    system: &ShiftSystem,
    schedule: &MeasureSchedule,
    dec: &FolnerDecomposition,
    params: &SynthesisParams,
    seed: u64,
) -> Result<Synthesis> {
    if !system.is_full() {
        return Err(Error::InvalidArgument("the synthesizer samples bricks independently and needs a full shift".into()));
    }
    if dec.kmax() == 0 {
        return Err(Error::InvalidArgument("decomposition needs kmax ≥ 1".into()));
    }
    let dim = dec.dim;
    let alphabet = system.alphabet();
    let depth = schedule.depth;
    let fam = family_for_depth(alphabet, dim, depth)?;
    let side = dec.m(dec.kmax()) as i64;
    let region = FiniteSubset::standard_box(dim, side);
    let lo = [0i64, 0];
    let extent = [side as usize, if dim == Dim::Two { side as usize } else { 1 }];
    // Cells outside every brick only need some admissible content.
    let last_spec = schedule.alpha(dec.kmax()).spec().ok_or(Error::NoGeneratingSpec)?;
    let mut symbols = {
        let mut rng = brick_rng(seed, 0);
        sample_pattern(last_spec, dim, region.len(), &mut rng)?
    };
    let mut bricks: Vec<(usize, Tile)> = Vec::new();
    let mut layers = Vec::new();
    let mut stream = 1u64;
    for k in 1..=dec.kmax() {
        let alpha = schedule.alpha(k);
        let spec = alpha.spec().ok_or(Error::NoGeneratingSpec)?;
        let xi = params.xi(k);
        let layer = dec.layer_bricks_within(k, side);
        let (mut max_draws, mut total_draws) = (0usize, 0usize);
        for tile in &layer {
            let cells = tile.to_subset();
            let mut rng = brick_rng(seed, stream);
            stream += 1;
            let mut accepted = None;
            for draw in 1..=params.draw_budget {
                let p = sample_pattern(spec, dim, cells.len(), &mut rng)?;
                let ok = match pattern_distance(&fam, &cells, &p, alpha, depth)? {
                    Some((d, slack)) => d <= xi + slack + 1e-12,
                    None => true,
                };
                if ok {
                    accepted = Some((p, draw));
                    break;
                }
            }
            let (p, draws) = accepted.ok_or(Error::SamplerExhausted { xi, budget: params.draw_budget })?;
            max_draws = max_draws.max(draws);
            total_draws += draws;
            for (&c, &a) in cells.iter().zip(&p) {
                symbols[cell_index(lo, extent, c)] = a;
            }
            bricks.push((k, *tile));
        }
        layers.push(LayerCertificate {
            k,
            side: dec.hierarchy.side(k),
            bricks: layer.len(),
            xi_target: xi,
            xi_realized: 0.0,
            gamma: params.gamma(k),
            epsilon: params.epsilon(k),
            g_epsilon: params.mistake.eval(params.epsilon(k)),
            beta: {
                let b = dec.beta(k);
                *b.numer() as f64 / *b.denom() as f64
            },
            alpha_step: schedule.step_into(k),
            max_draws,
            total_draws,
            mistakes: 0,
        });
    }
    let z = Configuration::new(dim, lo, extent, symbols, Extension::Constant { fill: 0 })?;
    let spec = GluingSpec {
        sources: vec![z.clone()],
        segments: bricks.iter().map(|(k, t)| GlueSegment { f: t.to_subset(), source: 0, epsilon: params.epsilon(*k) }).collect(),
        mistake: params.mistake.clone(),
        background: Some(z),
    };
    let glued = glue(&spec, system, &SeparatingFamily::for_system(system))?;
    let y = glued.y.clone();
    for ((k, t), m) in bricks.iter().zip(&glued.mistakes) {
        let cells = t.to_subset();
        let e = empirical_measure(&y, alphabet, &cells, depth)?;
        let d = crate::measures::weakstar_distance(&fam, &e, schedule.alpha(*k))?.value;
        let layer = &mut layers[k - 1];
        layer.xi_realized = layer.xi_realized.max(d);
        layer.mistakes += m;
    }
    let typical: Vec<CylinderMeasure> = bricks.iter().map(|(k, _)| schedule.alpha(*k).clone()).collect();
    let spec_y = GluingSpec { sources: vec![y.clone()], segments: spec.segments.clone(), mistake: spec.mistake.clone(), background: None };
    let averaging = glue_averaging_check(&spec_y, &y, &typical, &schedule.measures, depth)?;
    Ok(Synthesis {
        y,
        certificate: Certificate { seed, region_side: side as u64, depth, layers, averaging },
        bricks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingPoint {
    pub n: u64,
    pub level: usize,
    /// `D(E_{F_n}(y), α′_n)`.
    pub distance: f64,
    /// `D(E_{F_n}(y), K)` when a target set is given.
    pub set_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub points: Vec<TrackingPoint>,
    /// Distances over the top quartile never rise above the first quartile's minimum.
    pub trend_decreasing: bool,
    /// Set distances stay above `flag_threshold` over the top quartile.
    pub flagged: bool,
}

/// Exact truncated distances `D(E_{F_n}(y), α′_n)` for each requested `n`.
pub fn tracking_error(
    y: &Configuration,
    schedule: &MeasureSchedule,
    dec: &FolnerDecomposition,
    seq: &FolnerSequence,
    ns: &[u64],
    k: Option<&MeasureSet>,
    flag_threshold: f64,
) -> Result<TrackingReport> {
    let alphabet = schedule.measures[0].alphabet();
    let depth = schedule.depth;
    let fam = family_for_depth(alphabet, y.dim(), depth)?;
    let lo = y.window_lo();
    let ext = y.extent();
    let mut points = Vec::new();
    for &n in ns {
        let f = seq.get(n)?;
        let (a, b) = f.bounding_box().ok_or(Error::EmptySet)?;
        let inside = a[0] >= lo[0] && b[0] < lo[0] + ext[0] as i64 && (y.dim() == Dim::One || (a[1] >= lo[1] && b[1] < lo[1] + ext[1] as i64));
        if !inside {
            return Err(Error::RegionExceeded(format!("F_{n} leaves the materialized window")));
        }
        let level = dec.level_of(n)?;
        let e = empirical_measure(y, alphabet, &f, depth)?;
        let distance = crate::measures::weakstar_distance(&fam, &e, schedule.alpha(level))?.value;
        let set_distance = k.map(|k| distance_to_set(&fam, &e, k).map(|d| d.value)).transpose()?;
        points.push(TrackingPoint { n, level, distance, set_distance });
    }
    let q = crate::estimators::top_quartile_start(points.len());
    let head_min = points[..q.max(1).min(points.len())].iter().map(|p| p.distance).fold(f64::INFINITY, f64::min);
    let trend_decreasing = points[q..].iter().all(|p| p.distance <= head_min + 1e-12);
    let flagged = k.is_some() && points[q..].iter().all(|p| p.set_distance.unwrap_or(0.0) > flag_threshold);
    Ok(TrackingReport { points, trend_decreasing, flagged })
}

/// Per-shape data of the separated family built on `F_𝒩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileFamily {
    pub layer: usize,
    pub side: i64,
    pub tiles: usize,
    /// `#Γ` for one tile: patterns in `B(μ, ξ₀)`, pairwise word-separated.
    pub gamma_count: String,
    pub ln_gamma: f64,
    /// `#Γ ≥ e^{|K|(h_μ − η)}`.
    pub meets_tile_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullEntropyFamily {
    pub n: u64,
    pub kappa: usize,
    pub fn_len: u64,
    pub tiles: Vec<TileFamily>,
    /// `ln #Y`, the sum of tile log-counts.
    pub ln_cardinality: f64,
    pub normalized: f64,
    /// `(1 − 3η)(h_top − 2η)`.
    pub threshold: f64,
    pub holds: bool,
    /// Materialized members checked pairwise `(F_𝒩, ε*)`-separated.
    pub members_checked: usize,
    pub members_separated: bool,
}

/// The separated family `Y ⊂ Y^{(𝒩)}`: every brick of `Λ_𝒩` carries an
/// independent choice from `Γ = X_{K, B(μ, ξ₀)}`, and the tail follows the schedule.
#[allow(clippy::too_many_arguments)]
pub fn full_entropy_family(
    system: &ShiftSystem,
    schedule: &MeasureSchedule,
    dec: &FolnerDecomposition,
    mu: &CylinderMeasure,
    xi0: f64,
    eta: f64,
    n_cal: u64,
    params: &SynthesisParams,
    seed: u64,
    members: usize,
) -> Result<FullEntropyFamily> {
    let kappa = dec.level_of(n_cal)?;
    if kappa < 2 {
        return Err(Error::InvalidArgument(format!("𝒩 = {n_cal} must exceed M(1) = {}", dec.m(1))));
    }
    let lam = dec.lambda_bricks(n_cal)?;
    let gamma_set = PatternSet::new(system.clone(), Constraint::MeasureBall { set: MeasureSet::singleton(mu.clone()), delta: xi0, depth: 1 });
    let h_mu = mu.metric_entropy()?;
    let origin = FiniteSubset::singleton(GroupElement::identity(dec.dim));
    let mut per_side: BTreeMap<(usize, i64), (usize, BigUint)> = BTreeMap::new();
    for (layer, list) in [(kappa, &lam.lambda1), (kappa - 1, &lam.lambda2)] {
        for t in list.iter() {
            let key = (layer, t.side);
            if let Some(e) = per_side.get_mut(&key) {
                e.0 += 1;
            } else {
                let c = gamma_set.count(&t.to_subset(), &origin, DEFAULT_BUDGET)?.count;
                per_side.insert(key, (1, c));
            }
        }
    }
    let mut tiles = Vec::new();
    let mut ln_card = 0.0;
    for ((layer, side), (count, gamma)) in per_side {
        let ln_gamma = if gamma == BigUint::from(0u8) { f64::NEG_INFINITY } else { ln_biguint(&gamma) };
        let len = (side as u64).pow(dec.dim.rank() as u32) as f64;
        ln_card += count as f64 * ln_gamma;
        tiles.push(TileFamily {
            layer,
            side,
            tiles: count,
            gamma_count: gamma.to_string(),
            ln_gamma,
            meets_tile_bound: ln_gamma >= len * (h_mu - eta),
        });
    }
    let h_top = (system.alphabet() as f64).ln();
    let threshold = (1.0 - 3.0 * eta) * (h_top - 2.0 * eta);
    let normalized = ln_card / lam.fn_len as f64;

    // Materialize a few members over one synthesized tail.
    let base = synthesize_generic(system, schedule, dec, params, seed)?;
    let f_cal = FiniteSubset::standard_box(dec.dim, n_cal as i64);
    let cells: Vec<(usize, FiniteSubset)> = base
        .bricks
        .iter()
        .filter(|(k, _)| *k == kappa || *k + 1 == kappa)
        .map(|(k, t)| (*k, t.to_subset()))
        .collect();
    let mut configs = Vec::with_capacity(members);
    let lo = base.y.window_lo();
    let extent = base.y.extent();
    let uniform = MeasureSpec::Bernoulli { p: vec![1.0 / system.alphabet() as f64; system.alphabet()] };
    for u in 0..members {
        let mut symbols = base.y.symbols().to_vec();
        for (i, (_, f)) in cells.iter().enumerate() {
            let mut rng = brick_rng(seed ^ 0x9e37_79b9_7f4a_7c15, (u as u64) << 32 | i as u64);
            let p = loop {
                let p = sample_pattern(&uniform, dec.dim, f.len(), &mut rng)?;
                let c: Vec<u32> = counts_of(&p, system.alphabet()).iter().map(|&c| c as u32).collect();
                if gamma_set.accepts_counts(&c)? {
                    break p;
                }
            };
            for (&c, &a) in f.iter().zip(&p) {
                symbols[cell_index(lo, extent, c)] = a;
            }
        }
        configs.push(Configuration::new(dec.dim, lo, extent, symbols, Extension::Constant { fill: 0 })?);
    }
    let sep_family = SeparatingFamily::for_system(system);
    let mut separated = true;
    for i in 0..configs.len() {
        for j in i + 1..configs.len() {
            if sep_family.mistakes(&configs[i], &configs[j], &f_cal, params.eps_star) == 0 {
                separated = false;
            }
        }
    }
    Ok(FullEntropyFamily {
        n: n_cal,
        kappa,
        fn_len: lam.fn_len,
        tiles,
        ln_cardinality: ln_card,
        normalized,
        threshold,
        holds: normalized >= threshold,
        members_checked: configs.len(),
        members_separated: separated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub a: f64,
    pub entropy: f64,
    /// Gibbs parameter `λ` with `p_i ∝ e^{λφ_i}`.
    pub lambda: f64,
    /// `a` on the boundary of `[min φ, max φ]`.
    pub degenerate: bool,
}

/// `sup{h_μ : ∫φ dμ = a}` over Bernoulli measures, which attains the sup on full shifts.
pub fn spectrum_oracle(phi: &[f64], a: f64) -> Result<SpectrumPoint> {
    let (lo, hi) = phi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if phi.is_empty() || !(lo..=hi).contains(&a) {
        return Err(Error::InvalidArgument(format!("a = {a} lies outside [{lo}, {hi}]")));
    }
    if a <= lo + 1e-15 || a >= hi - 1e-15 {
        // The extremal measures sit on the symbols attaining the bound.
        let edge = if a <= lo + 1e-15 { lo } else { hi };
        let mult = phi.iter().filter(|&&v| (v - edge).abs() < 1e-15).count();
        return Ok(SpectrumPoint { a, entropy: (mult as f64).ln(), lambda: if edge == lo { f64::NEG_INFINITY } else { f64::INFINITY }, degenerate: true });
    }
    let gibbs = |lambda: f64| -> (f64, Vec<f64>) {
        let m = phi.iter().map(|&v| lambda * v).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = phi.iter().map(|&v| (lambda * v - m).exp()).collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / z).collect();
        (p.iter().zip(phi).map(|(q, v)| q * v).sum(), p)
    };
    let mut bound = 1.0;
    while gibbs(-bound).0 > a || gibbs(bound).0 < a {
        bound *= 2.0;
        if bound > 1e6 {
            return Err(Error::InvalidArgument("Gibbs parameter search diverged".into()));
        }
    }
    let (mut l, mut h) = (-bound, bound);
    for _ in 0..300 {
        let mid = 0.5 * (l + h);
        let (mean, _) = gibbs(mid);
        if (mean - a).abs() < 1e-12 {
            l = mid;
            h = mid;
            break;
        }
        if mean < a {
            l = mid;
        } else {
            h = mid;
        }
    }
    let lambda = 0.5 * (l + h);
    let (_, p) = gibbs(lambda);
    let entropy = -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>();
    Ok(SpectrumPoint { a, entropy, lambda, degenerate: false })
}

/// Second differences of an evenly spaced sequence are all ≤ `tol`.
pub fn is_concave(values: &[f64], tol: f64) -> bool {
    values.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] <= tol)
}

/// Per-`a` Θ-estimates with `K = F(a)`, the measures with `∫φ dμ = a`,
/// rendered at depth 1. Values of `a` outside the range of `φ` get the empty sentinel.
#[allow(clippy::too_many_arguments)]
pub fn spectrum_estimate(
    system: &ShiftSystem,
    phi: &[f64],
    a_grid: &[f64],
    seq: &FolnerSequence,
    family: &SeparatingFamily,
    epsilon: f64,
    delta: f64,
    ns: std::ops::RangeInclusive<u64>,
) -> Result<Vec<(f64, EntropyEstimate)>> {
    if phi.len() != system.alphabet() {
        return Err(Error::InvalidArgument("φ needs one value per symbol".into()));
    }
    let mut out = Vec::new();
    for &a in a_grid {
        let vertices = level_set_vertices(phi, a);
        if vertices.is_empty() {
            let rows = ns.clone().map(|n| Ok((n, seq.cardinality(n)?, BigUint::from(0u8)))).collect::<Result<Vec<_>>>()?;
            let meta = EstimateMeta { epsilon, delta: Some(delta), window_radius: 0, truncation: 0, depth: 1, slack: 0.0 };
            out.push((a, EntropyEstimate::build("spectrum", rows, Bias::Upper, CountQuality::Exact, meta)));
            continue;
        }
        let measures = vertices
            .into_iter()
            .map(|p| make_measure(&MeasureSpec::Bernoulli { p }, system.dim(), 1))
            .collect::<Result<Vec<_>>>()?;
        let mode = if measures.len() > 2 { SetMode::ConvexHull } else { SetMode::Polyline };
        let k = MeasureSet::new(measures, mode)?;
        let mut est = theta_estimate(system, &k, delta, 1, seq, family, epsilon, ns.clone())?;
        est.operation = "spectrum";
        out.push((a, est));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::{build_decomposition, build_hierarchy, default_beta};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binary() -> (ShiftSystem, SeparatingFamily) {
        let s = ShiftSystem::full(2, Dim::One).unwrap();
        let f = SeparatingFamily::for_system(&s);
        (s, f)
    }

    fn small_dec(kmax: usize) -> FolnerDecomposition {
        let hier = build_hierarchy(Dim::One, &[2, 4, 8, 16, 32]).unwrap();
        build_decomposition(&hier, &default_beta(5), kmax, 1 << 24).unwrap()
    }

    fn bern(p: f64) -> CylinderMeasure {
        make_measure(&MeasureSpec::bernoulli_binary(p), Dim::One, 1).unwrap()
    }

    #[test]
    fn full_shift_glue_copies() {
        let (s, fam) = binary();
        let x1 = Configuration::periodic_word(&[1, 0, 1, 1, 0]).unwrap();
        let x2 = Configuration::periodic_word(&[0, 0, 1]).unwrap();
        let spec = GluingSpec {
            sources: vec![x1.clone(), x2.clone()],
            segments: vec![
                GlueSegment { f: FiniteSubset::interval(0, 5), source: 0, epsilon: 0.5 },
                GlueSegment { f: FiniteSubset::interval(10, 15), source: 1, epsilon: 0.5 },
            ],
            mistake: MistakeFunction::identity(),
            background: None,
        };
        let out = glue(&spec, &s, &fam).unwrap();
        assert_eq!(out.mistakes, vec![0, 0]);
        for p in 0..5 {
            assert_eq!(out.y.get(GroupElement::d1(p)), x1.get(GroupElement::d1(p)));
            assert_eq!(out.y.get(GroupElement::d1(p + 10)), x2.get(GroupElement::d1(p + 10)));
        }
    }

    #[test]
    fn golden_mean_connectors() {
        let g = ShiftSystem::golden_mean();
        let fam = SeparatingFamily::for_system(&g);
        let x = Configuration::padded_word(&[1, 0, 1], 0, 0).unwrap();
        let x2 = Configuration::padded_word(&[1, 0, 1], 4, 0).unwrap();
        let spec = GluingSpec {
            sources: vec![x, x2],
            segments: vec![
                GlueSegment { f: FiniteSubset::interval(0, 3), source: 0, epsilon: 0.5 },
                GlueSegment { f: FiniteSubset::interval(4, 7), source: 1, epsilon: 0.5 },
            ],
            mistake: MistakeFunction::identity(),
            background: None,
        };
        let out = glue(&spec, &g, &fam).unwrap();
        assert_eq!(out.connectors, vec![(3, vec![0])]);
        assert_eq!(out.y.pattern_on(&FiniteSubset::interval(0, 7)), vec![1, 0, 1, 0, 1, 0, 1]);
        // Longer gaps: oracle is a path search over the transition graph.
        let x3 = Configuration::padded_word(&[1], 9, 0).unwrap();
        let mut spec2 = spec.clone();
        spec2.sources.push(x3);
        spec2.segments.push(GlueSegment { f: FiniteSubset::interval(9, 10), source: 2, epsilon: 0.5 });
        let out = glue(&spec2, &g, &fam).unwrap();
        assert_eq!(out.connectors[1], (7, vec![0, 0]));
        assert!(g.pattern_admissible(&FiniteSubset::interval(0, 10), &out.y.pattern_on(&FiniteSubset::interval(0, 10))));
        let mut tight = spec.clone();
        tight.segments[1].f = FiniteSubset::interval(3, 6);
        tight.sources[1] = Configuration::padded_word(&[1, 0, 1], 3, 0).unwrap();
        assert_eq!(glue(&tight, &g, &fam), Err(Error::GapTooSmall { gap: 1, required: 2 }));
    }

    #[test]
    fn oracle_values() {
        let phi = [0.0, 1.0];
        assert_abs_diff_eq!(spectrum_oracle(&phi, 0.5).unwrap().entropy, std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(spectrum_oracle(&phi, 0.5).unwrap().lambda, 0.0, epsilon = 1e-9);
        let third = spectrum_oracle(&phi, 1.0 / 3.0).unwrap().entropy;
        let closed = -(1.0f64 / 3.0) * (1.0f64 / 3.0).ln() - (2.0f64 / 3.0) * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(third, closed, epsilon = 1e-10);
        assert_abs_diff_eq!(third, 0.6365141682948128, epsilon = 1e-10);
        assert_abs_diff_eq!(spectrum_oracle(&[0.0, 1.0, 2.0], 1.0).unwrap().entropy, 3f64.ln(), epsilon = 1e-12);
        let edge = spectrum_oracle(&phi, 0.0).unwrap();
        assert!(edge.degenerate && edge.entropy == 0.0);
        let grid: Vec<f64> = (1..10).map(|i| spectrum_oracle(&phi, i as f64 / 10.0).unwrap().entropy).collect();
        assert!(is_concave(&grid, 1e-12));
    }

    #[test]
    fn binary_spectrum_estimates() {
        let (s, fam) = binary();
        let seq = FolnerSequence::StandardBoxes(Dim::One);
        let grid = [0.0, 1.0 / 3.0, 0.5, 1.5];
        let est = spectrum_estimate(&s, &[0.0, 1.0], &grid, &seq, &fam, 0.5, 0.04, 24..=24).unwrap();
        // At a fixed δ the a = 0 band still holds the words with one 1: ln 25 / 24.
        assert_abs_diff_eq!(est[0].1.slope.unwrap(), 25f64.ln() / 24.0, epsilon = 1e-12);
        let sharp = spectrum_estimate(&s, &[0.0, 1.0], &[0.0], &seq, &fam, 0.5, 1e-9, 24..=24).unwrap();
        assert_eq!(sharp[0].1.slope.unwrap(), 0.0);
        assert!((est[1].1.slope.unwrap() - 0.6365).abs() < 0.05);
        assert!(est[3].1.slope.is_none());
        let best = est.iter().filter_map(|(_, e)| e.slope).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(est[2].1.slope.unwrap(), best);
    }

    #[test]
    fn schedules() {
        let dec = small_dec(4);
        let single = stretched_schedule(&MeasureSet::singleton(bern(0.5)), &dec).unwrap();
        assert!(single.steps.iter().all(|&d| d == 0.0));
        let seg = MeasureSet::new(vec![bern(0.25), bern(0.75)], SetMode::Polyline).unwrap();
        let sch = stretched_schedule(&seg, &dec).unwrap();
        // Sweeps: (0, 1), then (½, 0) back; weights on the second vertex.
        let t: Vec<f64> = sch.weights.iter().map(|w| w[1]).collect();
        assert_eq!(t, vec![0.0, 1.0, 0.5, 0.0, 1.0 / 3.0]);
        // Depth-1 D along the segment is 0.75·|Δ frequency| = 0.75·0.5·|Δt|.
        assert_abs_diff_eq!(sch.steps[0], 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(sch.steps[1], 0.1875, epsilon = 1e-12);
        // Every vertex is revisited.
        assert!(t.contains(&0.0) && t.contains(&1.0));
    }

    #[test]
    fn synthesized_half_point() {
        let (s, _) = binary();
        let dec = small_dec(3);
        let sch = MeasureSchedule::constant(bern(0.5), 4);
        let syn = synthesize_generic(&s, &sch, &dec, &SynthesisParams::default(), 7).unwrap();
        let n = dec.m(3);
        let f = FiniteSubset::interval(0, n as i64);
        let freq = syn.y.pattern_on(&f).iter().filter(|&&a| a == 1).count() as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.05);
        assert!(syn.certificate.averaging.iter().all(|c| c.holds));
        assert!(syn.certificate.layers.iter().all(|l| l.mistakes == 0));
        let again = synthesize_generic(&s, &sch, &dec, &SynthesisParams::default(), 7).unwrap();
        assert_eq!(again.y, syn.y);
    }

    #[test]
    fn synthesized_point_mass() {
        let (s, _) = binary();
        let dec = small_dec(2);
        let sch = MeasureSchedule::constant(bern(0.0), 3);
        let syn = synthesize_generic(&s, &sch, &dec, &SynthesisParams::default(), 1).unwrap();
        assert!(syn.y.symbols().iter().all(|&a| a == 0));
    }

    #[test]
    fn segment_tracking_stays_below_certificate() {
        let (s, _) = binary();
        let dec = small_dec(3);
        let seg = MeasureSet::new(vec![bern(0.25), bern(0.75)], SetMode::Polyline).unwrap();
        let sch = stretched_schedule(&seg, &dec).unwrap();
        let syn = synthesize_generic(&s, &sch, &dec, &SynthesisParams::default(), 11).unwrap();
        let ns: Vec<u64> = (dec.m(0) + 1..=dec.m(3)).step_by(37).collect();
        let seq = FolnerSequence::StandardBoxes(Dim::One);
        let rep = tracking_error(&syn.y, &sch, &dec, &seq, &ns, Some(&seg), 0.05).unwrap();
        for p in &rep.points {
            assert!(p.distance <= syn.certificate.bound(&dec, p.n).unwrap() + 1e-12, "n = {}", p.n);
        }
        assert!(!rep.flagged);
    }

    #[test]
    fn adversarial_point_is_flagged() {
        use rand::SeedableRng;
        let dec = small_dec(2);
        let spec = MeasureSpec::bernoulli_binary(0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let word = spec.sample_word(dec.m(2) as usize, &mut rng);
        let y = Configuration::padded_word(&word, 0, 0).unwrap();
        let k = MeasureSet::singleton(bern(0.5));
        let sch = MeasureSchedule::constant(bern(0.5), 3);
        let ns: Vec<u64> = (200..=dec.m(2)).step_by(50).collect();
        let rep = tracking_error(&y, &sch, &dec, &FolnerSequence::StandardBoxes(Dim::One), &ns, Some(&k), 0.05).unwrap();
        assert!(rep.flagged);
        assert!(tracking_error(&y, &sch, &dec, &FolnerSequence::StandardBoxes(Dim::One), &[dec.m(2) + 1], None, 0.05).is_err());
    }

    #[test]
    fn periodic_point_tracking_decreases() {
        let dec = small_dec(2);
        let word: Vec<u8> = (0..dec.m(2) + 4).map(|i| (i % 2) as u8).collect();
        let y = Configuration::padded_word(&word, 0, 0).unwrap();
        let sch = MeasureSchedule::constant(bern(0.5), 3);
        let ns: Vec<u64> = vec![11, 13, 15, 17, 101, 301, 501, 897];
        let rep = tracking_error(&y, &sch, &dec, &FolnerSequence::StandardBoxes(Dim::One), &ns, None, 0.05).unwrap();
        // Odd n: one extra 0, so |f − ½| = 1/(2n) and D = 0.75/(2n).
        for p in &rep.points {
            assert_abs_diff_eq!(p.distance, 0.375 / p.n as f64, epsilon = 1e-12);
        }
        assert!(rep.trend_decreasing);
    }

    #[test]
    fn full_entropy_family_at_m2() {
        let (s, _) = binary();
        let dec = small_dec(3);
        let seg = MeasureSet::new(vec![bern(0.25), bern(0.75)], SetMode::Polyline).unwrap();
        let sch = stretched_schedule(&seg, &dec).unwrap();
        let fam = full_entropy_family(&s, &sch, &dec, &bern(0.5), 0.25, 0.1, dec.m(2), &SynthesisParams::default(), 3, 4).unwrap();
        assert_eq!(fam.kappa, 2);
        // Tiles: 25 of side 2 in H(1) = [0, 100) and 199 of side 4 in [100, 896).
        let counts: Vec<(i64, usize, &str)> = fam.tiles.iter().map(|t| (t.side, t.tiles, t.gamma_count.as_str())).collect();
        assert_eq!(counts, vec![(2, 50, "2"), (4, 199, "14")]);
        let oracle = (50.0 * 2f64.ln() + 199.0 * 14f64.ln()) / 897.0;
        assert_abs_diff_eq!(fam.normalized, oracle, epsilon = 1e-12);
        assert!(fam.holds && fam.members_separated);
    }

    #[test]
    fn default_params_meet_proof_constraints() {
        assert!(SynthesisParams::default().proof_constraints_hold());
        let bad = SynthesisParams { eps_scale: 1.0, ..Default::default() };
        assert!(!bad.proof_constraints_hold());
    }

    proptest! {
        #[test]
        fn averaging_bound_on_random_glues(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let (s, fam) = binary();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sources = Vec::new();
            let mut segments = Vec::new();
            let mut typical = Vec::new();
            let mut at = 0i64;
            for i in 0..rng.gen_range(1..5) {
                at += rng.gen_range(0..4);
                let len = rng.gen_range(4..40);
                let p: f64 = rng.gen_range(0.05..0.95);
                let spec = MeasureSpec::bernoulli_binary(p);
                sources.push(Configuration::padded_word(&spec.sample_word(len as usize + 4, &mut rng), at - 2, 0).unwrap());
                segments.push(GlueSegment { f: FiniteSubset::interval(at, at + len), source: i, epsilon: 0.5 });
                typical.push(make_measure(&spec, Dim::One, 2).unwrap());
                at += len;
            }
            let spec = GluingSpec { sources, segments, mistake: MistakeFunction::identity(), background: None };
            let out = glue(&spec, &s, &fam).unwrap();
            prop_assert!(out.mistakes.iter().all(|&m| m == 0));
            let probes: Vec<CylinderMeasure> = [0.2, 0.5, 0.7].iter().map(|&p| make_measure(&MeasureSpec::bernoulli_binary(p), Dim::One, 2).unwrap()).collect();
            for c in glue_averaging_check(&spec, &out.y, &typical, &probes, 2).unwrap() {
                prop_assert!(c.holds, "{:?}", c);
            }
        }
    }
}
