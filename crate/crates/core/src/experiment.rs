//! Config-driven experiment runner.
//!
//! A run parses and validates the whole config before touching the output
//! directory, executes operations in declaration order, and writes one JSON
//! record per line plus a manifest. Identical config and seed give
//! byte-identical record files; only the manifest carries a timestamp.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::Ratio;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{ordering_diagnostics, theta_estimate, upper_capacity_estimate, PatternSet, PrefixDag, DEFAULT_BUDGET, r_set_patterns};
use crate::genericity::{full_entropy_family, spectrum_estimate, spectrum_oracle, is_concave, stretched_schedule, synthesize_generic, tracking_error, SynthesisParams};
use crate::group::{Dim, FiniteSubset, FolnerSequence};
use crate::measures::{make_measure, MeasureSet, MeasureSpec, SetMode};
use crate::shift::{Configuration, SeparatingFamily, ShiftSystem};
use crate::tiling::{build_decomposition, build_hierarchy, default_beta, disjointify, quasi_tile, write_cover_records, FolnerDecomposition};

/// Decompositions with more bricks than this get per-layer counts instead of brick records.
pub const BRICK_RECORD_LIMIT: u64 = 100_000;

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Schema = 2,
    Refusal = 3,
    Budget = 4,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `full`, `sft` or `golden_mean`.
    pub kind: String,
    #[serde(default = "two")]
    pub alphabet: usize,
    #[serde(default = "one")]
    pub dim: u8,
    /// Transition matrix rows for `sft`, e.g. `["11", "10"]`.
    #[serde(default)]
    pub rows: Vec<String>,
}

fn two() -> usize {
    2
}
fn one() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilingConfig {
    pub sides: Vec<i64>,
    /// `β_k` as `"num/den"`; defaults to `2^{−k}`.
    #[serde(default)]
    pub beta: Vec<String>,
    pub kmax: usize,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

fn default_cap() -> u64 {
    1 << 24
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub vertices: Vec<String>,
    #[serde(default = "polyline")]
    pub mode: SetMode,
}

fn polyline() -> SetMode {
    SetMode::Polyline
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    /// Greedy quasi-tiling of `[0, target)^d` by boxes of the given sides, then disjointification.
    Tile { target: i64, shapes: Vec<i64>, epsilon: String, #[serde(default)] lemma_levels: Option<usize> },
    UpperCapacity {
        n: [u64; 2],
        #[serde(default = "half")]
        epsilon: f64,
        /// Restrict to `𝓡(K, δ)` of the target set instead of all admissible patterns.
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default = "one_usize")]
        depth: usize,
        #[serde(default)]
        ordering: bool,
    },
    Theta {
        n: [u64; 2],
        #[serde(default = "half")]
        epsilon: f64,
        delta: f64,
        #[serde(default = "one_usize")]
        depth: usize,
        #[serde(default)]
        ordering: bool,
    },
    Spectrum {
        phi: Vec<f64>,
        a_grid: Vec<f64>,
        n: [u64; 2],
        #[serde(default = "half")]
        epsilon: f64,
        delta: f64,
        tolerance: f64,
    },
    Generic {
        #[serde(default = "one_usize")]
        depth: usize,
        /// `n` values for tracking records; defaults to a ladder through every level.
        #[serde(default)]
        track: Vec<u64>,
        /// Separated-family check at `𝒩 = M(level)`.
        #[serde(default)]
        family_level: Option<usize>,
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default = "default_members")]
        members: usize,
    },
}

fn half() -> f64 {
    0.5
}
fn one_usize() -> usize {
    1
}
fn default_eta() -> f64 {
    0.1
}
fn default_members() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemConfig,
    #[serde(default)]
    pub tiling: Option<TilingConfig>,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    #[serde(default)]
    pub target: Option<TargetConfig>,
    #[serde(default, rename = "operation")]
    pub operations: Vec<Operation>,
}

fn schema<T: std::fmt::Display>(msg: T) -> Error {
    Error::Schema(msg.to_string())
}

fn ratio(s: &str) -> Result<Ratio<u64>> {
    Ratio::from_str(s.trim()).map_err(|_| schema(format!("`{s}` is not a ratio like 1/20")))
}

/// A config together with the objects it describes, all validated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub system: ShiftSystem,
    pub decomposition: Option<FolnerDecomposition>,
    pub source_text: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| schema(e.message().to_string()))
    }

    pub fn dim(&self) -> Result<Dim> {
        match self.system.dim {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            d => Err(schema(format!("dim must be 1 or 2, got {d}"))),
        }
    }

    fn build_system(&self) -> Result<ShiftSystem> {
        let dim = self.dim()?;
        match self.system.kind.as_str() {
            "full" => ShiftSystem::full(self.system.alphabet, dim).map_err(schema),
            "golden_mean" if dim == Dim::One => Ok(ShiftSystem::golden_mean()),
            "sft" if dim == Dim::One => {
                let rows: Vec<&str> = self.system.rows.iter().map(String::as_str).collect();
                ShiftSystem::sft_from_rows(&rows).map_err(schema)
            }
            other => Err(schema(format!("unsupported system kind `{other}` in dimension {}", self.system.dim))),
        }
    }

    /// Parses and validates everything that can be checked without running.
    pub fn prepare(text: &str) -> Result<Prepared> {
        let config = Self::parse(text)?;
        let system = config.build_system()?;
        for (name, spec) in &config.measures {
            spec.validate().map_err(|e| schema(format!("measure `{name}`: {e}")))?;
            if spec.alphabet() != system.alphabet() {
                return Err(schema(format!("measure `{name}` has the wrong alphabet size")));
            }
        }
        if let Some(t) = &config.target {
            if t.vertices.is_empty() {
                return Err(schema("target needs at least one vertex"));
            }
            for v in &t.vertices {
                if !config.measures.contains_key(v) {
                    return Err(schema(format!("target vertex `{v}` is not a declared measure")));
                }
            }
        }
        let decomposition = match &config.tiling {
            None => None,
            Some(t) => {
                let hier = build_hierarchy(system.dim(), &t.sides).map_err(schema)?;
                let beta = if t.beta.is_empty() { default_beta(t.kmax + 1) } else { t.beta.iter().map(|b| ratio(b)).collect::<Result<_>>()? };
                Some(build_decomposition(&hier, &beta, t.kmax, t.cap).map_err(schema)?)
            }
        };
        for op in &config.operations {
            let range = match op {
                Operation::UpperCapacity { n, .. } | Operation::Theta { n, .. } | Operation::Spectrum { n, .. } => Some(n),
                _ => None,
            };
            if let Some(n) = range {
                if n[0] == 0 || n[0] > n[1] {
                    return Err(schema(format!("bad n range {n:?}")));
                }
            }
            let needs_target = matches!(op, Operation::Theta { .. } | Operation::Generic { .. } | Operation::UpperCapacity { delta: Some(_), .. });
            if needs_target && config.target.is_none() {
                return Err(schema("operation needs a [target] section"));
            }
            match op {
                Operation::Tile { epsilon, shapes, target, .. } => {
                    ratio(epsilon)?;
                    if shapes.is_empty() || shapes.iter().any(|&s| s < 1 || s > *target) {
                        return Err(schema("tile shapes must be sides in 1..=target"));
                    }
                }
                Operation::Generic { .. } if decomposition.is_none() => return Err(schema("generic needs a [tiling] section")),
                Operation::Spectrum { phi, .. } if phi.len() != system.alphabet() => return Err(schema("phi needs one value per symbol")),
                _ => {}
            }
        }
        Ok(Prepared { config, system, decomposition, source_text: text.to_string() })
    }
}

impl Prepared {
    fn target(&self, depth: usize) -> Result<MeasureSet> {
        let t = self.config.target.as_ref().ok_or_else(|| schema("missing [target]"))?;
        let vs = t
            .vertices
            .iter()
            .map(|v| make_measure(&self.config.measures[v], self.system.dim(), depth))
            .collect::<Result<Vec<_>>>()?;
        MeasureSet::new(vs, t.mode)
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.source_text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Records of one run, in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<Value>,
    /// Extra files (name, contents) written next to the records.
    pub artifacts: Vec<(String, String)>,
    pub status: Option<ExitStatus>,
}

fn push_lines(out: &mut Vec<Value>, bytes: &[u8], extra: &Value) -> Result<()> {
    for line in String::from_utf8_lossy(bytes).lines() {
        let mut v: Value = serde_json::from_str(line).map_err(|e| Error::Io(e.to_string()))?;
        if let (Some(obj), Some(ext)) = (v.as_object_mut(), extra.as_object()) {
            for (k, val) in ext {
                obj.insert(k.clone(), val.clone());
            }
        }
        out.push(v);
    }
    Ok(())
}

fn ordering_record(z: &PatternSet, n: u64, label: &str, index: usize) -> Result<Value> {
    let dag = PrefixDag::from_depth_one(z, n as usize)?;
    let diag = ordering_diagnostics(&dag, 1..=n as usize, 0.02)?;
    Ok(json!({ "record": "ordering", "op_index": index, "operation": label, "n": n, "diagnostics": diag }))
}

fn configuration_text(y: &Configuration) -> String {
    let ext = y.extent();
    y.symbols()
        .chunks(ext[0])
        .map(|row| row.iter().map(|a| char::from_digit(*a as u32, 36).unwrap_or('?')).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn run_operation(p: &Prepared, index: usize, op: &Operation, seed: u64, out: &mut RunOutput) -> Result<()> {
    let system = &p.system;
    let dim = system.dim();
    let seq = FolnerSequence::StandardBoxes(dim);
    let family = SeparatingFamily::for_system(system);
    let tag = json!({ "op_index": index });
    match op {
        Operation::Tile { target, shapes, epsilon, lemma_levels } => {
            let eps = ratio(epsilon)?;
            let mut sides = shapes.clone();
            sides.sort_unstable();
            let shape_sets: Vec<FiniteSubset> = sides.iter().map(|&s| FiniteSubset::standard_box(dim, s)).collect();
            let target_set = FiniteSubset::standard_box(dim, *target);
            let qt = quasi_tile(&target_set, &shape_sets, eps)?;
            let check = qt.validate()?;
            let cover = disjointify(&qt)?;
            let dcheck = cover.validate();
            out.records.push(json!({
                "record": "quasi_tile", "op_index": index, "target": target, "shapes": sides, "epsilon": epsilon,
                "tiles": qt.tile_count(), "coverage": check.coverage(), "check": check, "all_hold": check.all_hold(),
            }));
            let mut buf = Vec::new();
            write_cover_records(&cover, 0, &mut buf)?;
            push_lines(&mut out.records, &buf, &tag)?;
            out.records.push(json!({
                "record": "disjoint_cover", "op_index": index, "pieces": cover.pieces.len(), "coverage": cover.coverage(),
                "check": dcheck, "all_hold": dcheck.all_hold(),
            }));
            if let Some(dec) = &p.decomposition {
                let mut buf = Vec::new();
                dec.write_records(&mut buf, BRICK_RECORD_LIMIT)?;
                push_lines(&mut out.records, &buf, &tag)?;
                let upto = lemma_levels.unwrap_or(dec.kmax()).min(dec.kmax());
                let mut worst = f64::INFINITY;
                let mut holds = true;
                for n in dec.m(0) + 1..=dec.m(upto) {
                    let k = dec.level_of(n)?;
                    let fp = dec.fprime_len(n)? as f64;
                    let fn_len = (n as f64).powi(dim.rank() as i32);
                    let beta = dec.beta(k);
                    let floor = 1.0 - 2.0 * (*beta.numer() as f64 / *beta.denom() as f64);
                    holds &= fp > floor * fn_len;
                    worst = worst.min(fp / fn_len);
                }
                out.records.push(json!({
                    "record": "brick_cover_bound", "op_index": index, "n_lo": dec.m(0) + 1, "n_hi": dec.m(upto),
                    "all_hold": holds, "min_coverage": worst,
                }));
            }
        }
        Operation::UpperCapacity { n, epsilon, delta, depth, ordering } => {
            let z = match delta {
                Some(d) => r_set_patterns(system, &p.target(*depth)?, *d, *depth),
                None => PatternSet::all(system.clone()),
            };
            let est = upper_capacity_estimate(&z, &seq, &family, *epsilon, n[0]..=n[1], DEFAULT_BUDGET)?;
            push_values(&mut out.records, est.records(), &tag);
            if *ordering {
                out.records.push(ordering_record(&z, n[1], "upper_capacity", index)?);
            }
        }
        Operation::Theta { n, epsilon, delta, depth, ordering } => {
            let k = p.target(*depth)?;
            let est = theta_estimate(system, &k, *delta, *depth, &seq, &family, *epsilon, n[0]..=n[1])?;
            push_values(&mut out.records, est.records(), &tag);
            if *ordering {
                out.records.push(ordering_record(&r_set_patterns(system, &k, *delta, *depth), n[1], "theta", index)?);
            }
        }
        Operation::Spectrum { phi, a_grid, n, epsilon, delta, tolerance } => {
            let ests = spectrum_estimate(system, phi, a_grid, &seq, &family, *epsilon, *delta, n[0]..=n[1])?;
            let mut sup_err: f64 = 0.0;
            let mut oracle_vals = Vec::new();
            for (a, est) in &ests {
                push_values(&mut out.records, est.records(), &json!({ "op_index": index, "a": a }));
                let oracle = spectrum_oracle(phi, *a).ok();
                let err = match (&oracle, est.slope) {
                    (Some(o), Some(s)) => Some((o.entropy - s).abs()),
                    _ => None,
                };
                if let Some(e) = err {
                    sup_err = sup_err.max(e);
                }
                if let Some(o) = &oracle {
                    oracle_vals.push(o.entropy);
                }
                out.records.push(json!({
                    "record": "spectrum_point", "op_index": index, "a": a, "estimate": est.slope, "oracle": oracle,
                    "abs_error": err, "within_tolerance": err.map(|e| e <= *tolerance),
                }));
            }
            out.records.push(json!({
                "record": "spectrum_summary", "op_index": index, "sup_error": sup_err, "tolerance": tolerance,
                "oracle_concave": is_concave(&oracle_vals, 1e-12), "passed": sup_err <= *tolerance,
            }));
        }
        Operation::Generic { depth, track, family_level, eta, members } => {
            let dec = p.decomposition.as_ref().expect("validated");
            let k = p.target(*depth)?;
            let schedule = stretched_schedule(&k, dec)?;
            let params = SynthesisParams::default();
            let syn = synthesize_generic(system, &schedule, dec, &params, seed)?;
            out.artifacts.push((format!("configuration_{index}.txt"), configuration_text(&syn.y)));
            let mut cert = String::new();
            for layer in &syn.certificate.layers {
                cert += &json!({ "record": "certificate_layer", "op_index": index, "layer": layer }).to_string();
                cert.push('\n');
            }
            for (i, c) in syn.certificate.averaging.iter().enumerate() {
                cert += &json!({ "record": "averaging_check", "op_index": index, "probe": i, "check": c }).to_string();
                cert.push('\n');
            }
            out.artifacts.push((format!("certificate_{index}.jsonl"), cert));
            let ns: Vec<u64> = if track.is_empty() {
                let lo = dec.m(0) + 1;
                let hi = dec.m(dec.kmax());
                let mut v: Vec<u64> = (0..24).map(|i| lo + ((hi - lo) as f64 * (i as f64 / 23.0).powi(3)) as u64).collect();
                v.dedup();
                v
            } else {
                track.clone()
            };
            let rep = tracking_error(&syn.y, &schedule, dec, &seq, &ns, Some(&k), 0.05)?;
            for pt in &rep.points {
                let bound = syn.certificate.bound(dec, pt.n)?;
                out.records.push(json!({
                    "record": "tracking", "op_index": index, "n": pt.n, "level": pt.level, "distance": pt.distance,
                    "set_distance": pt.set_distance, "bound": bound, "within_bound": pt.distance <= bound + 1e-12,
                }));
            }
            out.records.push(json!({
                "record": "synthesis", "op_index": index, "seed": seed, "region_side": syn.certificate.region_side,
                "bricks": syn.bricks.len(), "averaging_all_hold": syn.certificate.averaging.iter().all(|c| c.holds),
                "trend_decreasing": rep.trend_decreasing, "flagged": rep.flagged,
            }));
            if let Some(level) = family_level {
                let mu = make_measure(&MeasureSpec::max_entropy(system), dim, 1)?;
                let fam = full_entropy_family(system, &schedule, dec, &mu, params.xi(0) / 2.0, *eta, dec.m(*level), &params, seed, *members)?;
                out.records.push(json!({ "record": "separated_family", "op_index": index, "family": fam }));
            }
        }
    }
    Ok(())
}

fn push_values(out: &mut Vec<Value>, values: Vec<Value>, extra: &Value) {
    for mut v in values {
        if let (Some(obj), Some(ext)) = (v.as_object_mut(), extra.as_object()) {
            for (k, val) in ext {
                obj.insert(k.clone(), val.clone());
            }
        }
        out.push(v);
    }
}

fn refusal_status(e: &Error) -> ExitStatus {
    match e {
        Error::BudgetExceeded(_) => ExitStatus::Budget,
        Error::Schema(_) => ExitStatus::Schema,
        _ => ExitStatus::Refusal,
    }
}

/// Runs every operation; failures become refusal records and set the status.
pub fn execute(p: &Prepared, seed: u64) -> RunOutput {
    let mut out = RunOutput::default();
    let mut status = ExitStatus::Ok;
    for (i, op) in p.config.operations.iter().enumerate() {
        if let Err(e) = run_operation(p, i, op, seed, &mut out) {
            let s = refusal_status(&e);
            out.records.push(json!({ "record": "refusal", "op_index": i, "error": e.to_string(), "exit_code": s as i32 }));
            status = status.max_by_code(s);
        }
    }
    out.status = Some(status);
    out
}

impl ExitStatus {
    fn max_by_code(self, other: ExitStatus) -> ExitStatus {
        if other as i32 > self as i32 {
            other
        } else {
            self
        }
    }

    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Reads, validates, runs and writes; nothing is written when the config is malformed.
pub fn run_experiment(config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<ExitStatus> {
    run_selected(config_path, seed, out_dir, |_| true)
}

/// Like [`run_experiment`] but only the operations `keep` accepts; a config
/// with none of them is a schema error.
pub fn run_selected<K: Fn(&Operation) -> bool>(config_path: &Path, seed: Option<u64>, out_dir: &Path, keep: K) -> Result<ExitStatus> {
    let text = fs::read_to_string(config_path)?;
    let mut prepared = ExperimentConfig::prepare(&text)?;
    prepared.config.operations.retain(|op| keep(op));
    if prepared.config.operations.is_empty() {
        return Err(schema("config declares no operation for this command"));
    }
    let seed = seed.unwrap_or(prepared.config.seed);
    let output = execute(&prepared, seed);
    write_outputs(&prepared, seed, &output, out_dir)?;
    Ok(output.status.unwrap_or(ExitStatus::Ok))
}

pub fn write_outputs(p: &Prepared, seed: u64, output: &RunOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let records_path: PathBuf = out_dir.join("records.jsonl");
    let mut f = fs::File::create(&records_path)?;
    for r in &output.records {
        writeln!(f, "{r}")?;
    }
    for (name, body) in &output.artifacts {
        fs::write(out_dir.join(name), body)?;
    }
    let timestamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "name": p.config.name,
        "config_sha256": p.config_hash(),
        "seed": seed,
        "library_version": env!("CARGO_PKG_VERSION"),
        "records": output.records.len(),
        "exit_code": output.status.unwrap_or(ExitStatus::Ok).code(),
        "timestamp": timestamp,
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const UC: &str = r#"
name = "uc"
seed = 3
[system]
kind = "full"
[[operation]]
op = "upper_capacity"
n = [1, 12]
ordering = true
"#;

    #[test]
    fn parses_and_runs() {
        let p = ExperimentConfig::prepare(UC).unwrap();
        let out = execute(&p, 3);
        assert_eq!(out.status, Some(ExitStatus::Ok));
        assert_eq!(out.records.len(), 13);
        assert_eq!(out.records[11]["count"], "4096");
        assert_eq!(out.records[12]["record"], "ordering");
    }

    #[test]
    fn schema_errors() {
        for bad in [
            "name = 1",
            "name = \"x\"\n[system]\nkind = \"full\"\ncolour = 3",
            "name = \"x\"\n[system]\nkind = \"sft\"\nrows = [\"12\"]",
            "name = \"x\"\n[system]\nkind = \"full\"\n[[operation]]\nop = \"theta\"\nn = [1, 4]\ndelta = 0.1",
            "name = \"x\"\n[system]\nkind = \"full\"\n[[operation]]\nop = \"upper_capacity\"\nn = [5, 4]",
        ] {
            assert!(matches!(ExperimentConfig::prepare(bad), Err(Error::Schema(_))), "{bad}");
        }
    }

    #[test]
    fn refusal_is_recorded() {
        let text = "name = \"x\"\n[system]\nkind = \"full\"\n[[operation]]\nop = \"upper_capacity\"\nn = [1, 3]\nepsilon = 0.9";
        let out = execute(&ExperimentConfig::prepare(text).unwrap(), 0);
        assert_eq!(out.status, Some(ExitStatus::Refusal));
        assert_eq!(out.records[0]["record"], "refusal");
    }
}
