//! Membership scores computed from probability slices.
//!
//! Every method has a fixed [`Polarity`]. Scores are reported raw; nothing
//! is flipped to push an AUC above one half.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dumpio::Label;
use crate::entropy::{renyi, sme_dispatch, EntropyParams, ProbDist, DEFAULT_EPS};
use crate::error::{Error, Result};

/// Probabilities are clamped here before taking logs.
const PROB_FLOOR: f64 = 1e-300;

/// Which side of the threshold indicates a training member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    LowerIsMember,
    HigherIsMember,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::LowerIsMember => "lower_is_member",
            Polarity::HigherIsMember => "higher_is_member",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    VidSme,
    Perplexity,
    MinKProb,
    MaxProbGap,
    MaxRenyi,
    ModRenyi,
    ModifiedEntropy,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::VidSme,
        Method::Perplexity,
        Method::MinKProb,
        Method::MaxProbGap,
        Method::MaxRenyi,
        Method::ModRenyi,
        Method::ModifiedEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::VidSme => "vid-sme",
            Method::Perplexity => "perplexity",
            Method::MinKProb => "min-k-prob",
            Method::MaxProbGap => "max-prob-gap",
            Method::MaxRenyi => "max-renyi",
            Method::ModRenyi => "mod-renyi",
            Method::ModifiedEntropy => "modified-entropy",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Method::VidSme | Method::Perplexity | Method::ModRenyi | Method::ModifiedEntropy => {
                Polarity::LowerIsMember
            }
            Method::MinKProb | Method::MaxProbGap | Method::MaxRenyi => Polarity::HigherIsMember,
        }
    }

    /// Whether the method reads ground-truth next-token ids.
    pub fn needs_targets(self) -> bool {
        matches!(
            self,
            Method::Perplexity | Method::MinKProb | Method::ModRenyi | Method::ModifiedEntropy
        )
    }

    fn takes_k(self) -> bool {
        matches!(self, Method::VidSme | Method::MinKProb | Method::MaxRenyi)
    }

    fn takes_alpha(self) -> bool {
        matches!(self, Method::MaxRenyi | Method::ModRenyi)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown method {s:?}")))
    }
}

/// Method parameters: a K percentage and/or a Rényi order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Variant {
    pub k: Option<f64>,
    pub alpha: Option<f64>,
}

impl Variant {
    pub fn none() -> Self {
        Variant::default()
    }

    pub fn k(k: f64) -> Self {
        Variant {
            k: Some(k),
            alpha: None,
        }
    }

    pub fn alpha(alpha: f64) -> Self {
        Variant {
            k: None,
            alpha: Some(alpha),
        }
    }

    pub fn alpha_k(alpha: f64, k: f64) -> Self {
        Variant {
            k: Some(k),
            alpha: Some(alpha),
        }
    }
}

fn fmt_number(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        x.to_string()
    }
}

/// `alpha=…,k=…`, omitting absent parts; empty for parameterless methods.
impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(a) = self.alpha {
            parts.push(format!("alpha={}", fmt_number(a)));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={}", fmt_number(k)));
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = Variant::none();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::InvalidParam(format!("malformed variant {s:?}"));
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: f64 = match value.trim() {
                "inf" | "∞" => f64::INFINITY,
                other => other.parse().map_err(|_| bad())?,
            };
            match key.trim() {
                "k" => v.k = Some(value),
                "alpha" => v.alpha = Some(value),
                _ => return Err(bad()),
            }
        }
        Ok(v)
    }
}

/// A method together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackSpec {
    pub method: Method,
    pub variant: Variant,
}

impl AttackSpec {
    pub fn new(method: Method, variant: Variant) -> Result<Self> {
        let spec = AttackSpec { method, variant };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let m = self.method;
        if m.takes_k() != self.variant.k.is_some() {
            return Err(Error::InvalidParam(format!(
                "{m} {} a K value",
                if m.takes_k() { "needs" } else { "does not take" }
            )));
        }
        if m.takes_alpha() != self.variant.alpha.is_some() {
            return Err(Error::InvalidParam(format!(
                "{m} {} an alpha value",
                if m.takes_alpha() { "needs" } else { "does not take" }
            )));
        }
        if let Some(k) = self.variant.k {
            check_k(k)?;
        }
        if let Some(a) = self.variant.alpha {
            if a.is_nan() || a <= 0.0 || (m == Method::ModRenyi && a.is_infinite()) {
                return Err(Error::InvalidParam(format!("invalid alpha {a} for {m}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.variant.to_string();
        if v.is_empty() {
            write!(f, "{}", self.method)
        } else {
            write!(f, "{}[{v}]", self.method)
        }
    }
}

/// The default battery: every method with the standard K and α grids.
pub fn default_specs() -> Vec<AttackSpec> {
    const KS: [f64; 6] = DEFAULT_KS;
    let mut specs = Vec::new();
    let mut push = |method, variant| specs.push(AttackSpec { method, variant });
    for k in KS {
        push(Method::VidSme, Variant::k(k));
    }
    push(Method::Perplexity, Variant::none());
    for k in KS {
        push(Method::MinKProb, Variant::k(k));
    }
    push(Method::MaxProbGap, Variant::none());
    for alpha in [0.5, 1.0, 2.0, f64::INFINITY] {
        for k in KS {
            push(Method::MaxRenyi, Variant::alpha_k(alpha, k));
        }
    }
    for alpha in [0.5, 2.0] {
        push(Method::ModRenyi, Variant::alpha(alpha));
    }
    push(Method::ModifiedEntropy, Variant::none());
    specs
}

/// Default K percentages of the K-parameterized methods.
pub const DEFAULT_KS: [f64; 6] = [0.0, 5.0, 30.0, 60.0, 90.0, 100.0];

/// Every combination of the requested methods with the given K and α
/// grids, in method order. Methods ignore the grid they take no part in;
/// `mod-renyi` skips `α = ∞`, which it does not define. An empty grid falls
/// back to the defaults of [`default_specs`].
pub fn spec_grid(methods: &[Method], ks: &[f64], alphas: &[f64]) -> Result<Vec<AttackSpec>> {
    let ks = if ks.is_empty() { &DEFAULT_KS[..] } else { ks };
    let mut specs = Vec::new();
    for &method in methods {
        let method_alphas: Vec<f64> = match (alphas.is_empty(), method) {
            (true, Method::MaxRenyi) => vec![0.5, 1.0, 2.0, f64::INFINITY],
            (true, Method::ModRenyi) => vec![0.5, 2.0],
            (false, Method::ModRenyi) => alphas.iter().copied().filter(|a| a.is_finite()).collect(),
            _ => alphas.to_vec(),
        };
        let variants: Vec<Variant> = match (method.takes_alpha(), method.takes_k()) {
            (true, true) => method_alphas
                .iter()
                .flat_map(|&a| ks.iter().map(move |&k| Variant::alpha_k(a, k)))
                .collect(),
            (true, false) => method_alphas.iter().map(|&a| Variant::alpha(a)).collect(),
            (false, true) => ks.iter().map(|&k| Variant::k(k)).collect(),
            (false, false) => vec![Variant::none()],
        };
        if variants.is_empty() {
            return Err(Error::InvalidParam(format!("no usable alpha values for {method}")));
        }
        for variant in variants {
            specs.push(AttackSpec::new(method, variant)?);
        }
    }
    Ok(specs)
}

fn check_k(k: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&k) {
        return Err(Error::InvalidParam(format!("K must lie in [0, 100], got {k}")));
    }
    Ok(())
}

/// Per-position entropy of each slice.
pub fn entropy_sequence(slices: &[ProbDist], params: &EntropyParams) -> Result<Vec<f64>> {
    if slices.is_empty() {
        return Err(Error::EmptySlice);
    }
    Ok(slices.iter().map(|p| sme_dispatch(p, params)).collect())
}

/// `S_nat - S_rev`, element-wise.
pub fn delta_entropy(natural: &[f64], reversed: &[f64]) -> Result<Vec<f64>> {
    if natural.len() != reversed.len() {
        return Err(Error::SliceLengthMismatch {
            natural: natural.len(),
            reversed: reversed.len(),
        });
    }
    Ok(natural.iter().zip(reversed).map(|(a, b)| a - b).collect())
}

/// Elements selected for a K percentage of a sequence of length `len`:
/// `max(1, floor(K·len/100))`, so K = 0 selects exactly one.
pub fn selection_count(len: usize, k: f64) -> Result<usize> {
    check_k(k)?;
    Ok(((k / 100.0 * len as f64).floor() as usize).clamp(1, len.max(1)))
}

fn select(seq: &[f64], k: f64, largest: bool) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::EmptySlice);
    }
    let n = selection_count(seq.len(), k)?;
    let mut sorted = seq.to_vec();
    // stable, so equal values keep their positional order
    if largest {
        sorted.sort_by(|a, b| b.total_cmp(a));
    } else {
        sorted.sort_by(f64::total_cmp);
    }
    sorted.truncate(n);
    Ok(sorted)
}

/// The smallest K% of `seq`, ascending.
pub fn min_k_select(seq: &[f64], k: f64) -> Result<Vec<f64>> {
    select(seq, k, false)
}

/// The largest K% of `seq`, descending.
pub fn max_k_select(seq: &[f64], k: f64) -> Result<Vec<f64>> {
    select(seq, k, true)
}

/// Correctly rounded `Σ xs` (Shewchuk's non-overlapping partials, as in
/// Python's `math.fsum`). Finite inputs only.
fn exact_sum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &value in xs {
        let mut x = value;
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // add the partials from the top until the sum stops being exact
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // round half-even correction when the remainder sits exactly on a tie
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Correctly rounded sum over the count. The result does not depend on the
/// order of `xs`, so a sorted selection, the positional sequence and its
/// negation all agree to the bit.
fn mean(xs: &[f64]) -> f64 {
    exact_sum(xs) / xs.len() as f64
}

/// Mean of the K% extreme values.
fn selected_mean(seq: &[f64], k: f64, largest: bool) -> Result<f64> {
    Ok(mean(&select(seq, k, largest)?))
}

/// Mean of the smallest K% entropy differences. Lower means member.
pub fn vid_sme_score(delta: &[f64], k: f64) -> Result<f64> {
    selected_mean(delta, k, false)
}

/// `ln p(target)` for every position that has a target.
fn target_log_probs(slices: &[ProbDist], targets: &[usize]) -> Result<Vec<f64>> {
    if targets.is_empty() || slices.is_empty() {
        return Err(Error::EmptySlice);
    }
    if targets.len() > slices.len() {
        return Err(Error::InvalidInput(format!(
            "{} targets for {} positions",
            targets.len(),
            slices.len()
        )));
    }
    slices
        .iter()
        .zip(targets)
        .map(|(p, &t)| {
            p.probs()
                .get(t)
                .map(|&pt| pt.max(PROB_FLOOR).ln())
                .ok_or_else(|| Error::InvalidInput(format!("target {t} outside vocabulary of {}", p.len())))
        })
        .collect()
}

fn require<'a>(targets: Option<&'a [usize]>, method: Method) -> Result<&'a [usize]> {
    targets.ok_or(Error::MissingTargets(method.name()))
}

/// `exp(-mean ln p(target))`. Lower means member.
pub fn perplexity_score(slices: &[ProbDist], targets: Option<&[usize]>) -> Result<f64> {
    let lp = target_log_probs(slices, require(targets, Method::Perplexity)?)?;
    Ok((-mean(&lp)).exp())
}

/// Mean log-probability of the K% least likely targets. Higher means member.
pub fn min_k_prob_score(slices: &[ProbDist], targets: Option<&[usize]>, k: f64) -> Result<f64> {
    let lp = target_log_probs(slices, require(targets, Method::MinKProb)?)?;
    selected_mean(&lp, k, false)
}

/// Mean gap between the two largest probabilities. Higher means member.
pub fn max_prob_gap_score(slices: &[ProbDist]) -> Result<f64> {
    if slices.is_empty() {
        return Err(Error::EmptySlice);
    }
    let gaps = slices
        .iter()
        .map(|p| {
            if p.len() < 2 {
                return Err(Error::InvalidInput("probability gap needs at least two outcomes".into()));
            }
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &x in p.probs() {
                if x > first {
                    second = first;
                    first = x;
                } else if x > second {
                    second = x;
                }
            }
            Ok(first - second)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&gaps))
}

/// Mean of the K% largest per-position Rényi entropies. Higher means member.
pub fn max_renyi_score(slices: &[ProbDist], alpha: f64, k: f64) -> Result<f64> {
    if slices.is_empty() {
        return Err(Error::EmptySlice);
    }
    let h = slices.iter().map(|p| renyi(p, alpha)).collect::<Result<Vec<_>>>()?;
    selected_mean(&h, k, true)
}

/// Modified Rényi entropy of one position with true token `y`.
///
/// With `e = |1 - α|`:
/// `-(1/e)[(1-p_y)(p_y^e - 1) + Σ_{j≠y} p_j((1-p_j)^e - 1)]`,
/// which tends to the Modified Entropy
/// `-(1-p_y) ln p_y - Σ_{j≠y} p_j ln(1-p_j)` as `α → 1`.
pub fn mod_renyi_position(p: &ProbDist, y: usize, alpha: f64) -> f64 {
    let e = (1.0 - alpha).abs();
    let probs = p.probs();
    let ln = |x: f64| x.max(PROB_FLOOR).ln();
    let py = probs[y];
    if e < DEFAULT_EPS {
        let rest: f64 = probs
            .iter()
            .enumerate()
            .filter(|&(j, &pj)| j != y && pj > 0.0)
            .map(|(_, &pj)| pj * ln(1.0 - pj))
            .sum();
        return -(1.0 - py) * ln(py) - rest;
    }
    let rest: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(j, &pj)| j != y && pj > 0.0)
        .map(|(_, &pj)| pj * (e * ln(1.0 - pj)).exp_m1())
        .sum();
    -((1.0 - py) * (e * ln(py)).exp_m1() + rest) / e
}

/// Mean modified Rényi entropy over positions with targets. Lower means member.
pub fn mod_renyi_score(slices: &[ProbDist], targets: Option<&[usize]>, alpha: f64) -> Result<f64> {
    let method = if (alpha - 1.0).abs() < DEFAULT_EPS {
        Method::ModifiedEntropy
    } else {
        Method::ModRenyi
    };
    let targets = require(targets, method)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParam(format!("alpha must be positive and finite, got {alpha}")));
    }
    // validates lengths and ranges
    target_log_probs(slices, targets)?;
    let values: Vec<f64> = slices
        .iter()
        .zip(targets)
        .map(|(p, &y)| mod_renyi_position(p, y, alpha))
        .collect();
    Ok(mean(&values))
}

/// Inputs for scoring one sample.
#[derive(Clone, Copy, Debug)]
pub struct SampleInputs<'a> {
    /// Per-position entropy differences for Vid-SME.
    pub delta: &'a [f64],
    /// Natural-run rows the baselines score.
    pub baseline_slices: &'a [ProbDist],
    pub baseline_targets: Option<&'a [usize]>,
}

/// Evaluates one attack.
pub fn score(spec: &AttackSpec, inputs: &SampleInputs<'_>) -> Result<f64> {
    let v = spec.variant;
    let (slices, targets) = (inputs.baseline_slices, inputs.baseline_targets);
    let k = || v.k.ok_or_else(|| Error::InvalidParam(format!("{} needs K", spec.method)));
    let alpha = || v.alpha.ok_or_else(|| Error::InvalidParam(format!("{} needs alpha", spec.method)));
    match spec.method {
        Method::VidSme => vid_sme_score(inputs.delta, k()?),
        Method::Perplexity => perplexity_score(slices, targets),
        Method::MinKProb => min_k_prob_score(slices, targets, k()?),
        Method::MaxProbGap => max_prob_gap_score(slices),
        Method::MaxRenyi => max_renyi_score(slices, alpha()?, k()?),
        Method::ModRenyi => mod_renyi_score(slices, targets, alpha()?),
        Method::ModifiedEntropy => mod_renyi_score(slices, targets, 1.0),
    }
}

/// One row of the scores table.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub method: Method,
    pub variant: Variant,
    pub score: f64,
    pub label: Label,
}

impl ScoreRecord {
    pub fn polarity(&self) -> Polarity {
        self.method.polarity()
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    sample_id: String,
    method: String,
    variant: String,
    score: f64,
    label: Label,
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `sample_id,method,variant,score,label`; scores use the shortest
/// round-tripping decimal form.
pub fn write_scores_csv(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(CsvRow {
            sample_id: r.sample_id.clone(),
            method: r.method.to_string(),
            variant: r.variant.to_string(),
            score: r.score,
            label: r.label,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_err(path, e))?;
            Ok(ScoreRecord {
                method: row.method.parse()?,
                variant: row.variant.parse()?,
                sample_id: row.sample_id,
                score: row.score,
                label: row.label,
            })
        })
        .collect()
}
