//! Generalized entropies of next-token distributions.
//!
//! The central quantity is the Sharma–Mittal entropy
//!
//! ```text
//! S_{q,r}(p) = ((Σ_j p_j^q)^((1-r)/(1-q)) - 1) / (1 - r)
//! ```
//!
//! which collapses to Rényi (`r → 1`), Tsallis (`r = q`) and Shannon
//! (`q, r → 1`). [`sme_dispatch`] picks the right closed form whenever the
//! parameters sit within `eps` of one of those singular lines. All values are
//! in nats.

use crate::error::{Error, Result};

/// Degeneracy threshold applied to `|q-1|`, `|r-1|` and `|q-r|`.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Probabilities at or below this are left out of log-space sums.
const LOG_FLOOR: f64 = 1e-300;

/// Allowed deviation of `Σ p` from one.
const SUM_TOLERANCE: f64 = 1e-6;

/// Below this `|q-1|` the power sum is evaluated through `expm1` instead of
/// a plain logsumexp, which would cancel catastrophically near `q = 1`.
const NEAR_ONE: f64 = 0.25;

/// A discrete probability distribution over a vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    /// Validates non-negativity and normalization (to within `1e-6`).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidInput(format!(
                "probability {bad} is negative or non-finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(ProbDist(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one outcome");
        ProbDist(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        assert!(index < n, "one-hot index {index} out of range for {n} outcomes");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        ProbDist(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest probability.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for ProbDist {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        ProbDist::new(probs)
    }
}

impl AsRef<[f64]> for ProbDist {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Order `q`, deformation `r` and the degeneracy threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyParams {
    q: f64,
    r: f64,
    eps: f64,
}

/// Which closed form [`sme_dispatch`] evaluates for a parameter pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyFamily {
    Shannon,
    Renyi,
    Tsallis,
    /// `q → 1` with `r` away from one.
    ShannonLimit,
    SharmaMittal,
}

impl EntropyParams {
    pub fn new(q: f64, r: f64) -> Result<Self> {
        Self::with_eps(q, r, DEFAULT_EPS)
    }

    pub fn with_eps(q: f64, r: f64, eps: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParam(format!("q must be positive, got {q}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParam(format!("r must be positive, got {r}")));
        }
        if !(eps > 0.0 && eps < 1e-3) {
            return Err(Error::InvalidParam(format!(
                "eps must lie in (0, 1e-3), got {eps}"
            )));
        }
        Ok(EntropyParams { q, r, eps })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn family(&self) -> EntropyFamily {
        let (q_one, r_one) = ((self.q - 1.0).abs() < self.eps, (self.r - 1.0).abs() < self.eps);
        if q_one && r_one {
            EntropyFamily::Shannon
        } else if r_one {
            EntropyFamily::Renyi
        } else if (self.q - self.r).abs() < self.eps {
            EntropyFamily::Tsallis
        } else if q_one {
            EntropyFamily::ShannonLimit
        } else {
            EntropyFamily::SharmaMittal
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Result<ProbDist> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty logit vector".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite logit".into()));
    }
    Ok(ProbDist(softmax_unchecked(logits.iter().copied())))
}

/// Softmax of an `f32` row as stored in dumps, evaluated in `f64`.
pub(crate) fn softmax_f32(logits: &[f32]) -> Result<ProbDist> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty logit vector".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite logit".into()));
    }
    Ok(ProbDist(softmax_unchecked(logits.iter().map(|&x| f64::from(x)))))
}

fn softmax_unchecked(logits: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let max = logits.clone().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `ln Σ_j p_j^q` over the outcomes above the log floor.
fn log_power_sum(p: &[f64], q: f64) -> f64 {
    let support = p.iter().copied().filter(|&x| x > LOG_FLOOR);
    if (q - 1.0).abs() <= NEAR_ONE {
        // Σ p^q = Σ p + Σ p (p^(q-1) - 1)
        let (mass, excess) = support.fold((0.0, 0.0), |(m, d), x| {
            (m + x, d + x * ((q - 1.0) * x.ln()).exp_m1())
        });
        mass.ln() + (excess / mass).ln_1p()
    } else {
        let max = support
            .clone()
            .map(|x| q * x.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = support.map(|x| (q * x.ln() - max).exp()).sum();
        max + total.ln()
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value <= 0.0 {
        return Err(Error::InvalidParam(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

/// General Sharma–Mittal entropy. Rejects parameters inside the degeneracy
/// band; route those through [`sme_dispatch`].
pub fn sharma_mittal(p: &ProbDist, q: f64, r: f64) -> Result<f64> {
    check_positive("q", q)?;
    check_positive("r", r)?;
    if !q.is_finite() || !r.is_finite() {
        return Err(Error::InvalidParam("q and r must be finite".into()));
    }
    let eps = DEFAULT_EPS;
    if (q - 1.0).abs() < eps || (r - 1.0).abs() < eps || (q - r).abs() < eps {
        return Err(Error::DegenerateParams { q, r });
    }
    Ok(sharma_mittal_unchecked(p, q, r))
}

fn sharma_mittal_unchecked(p: &ProbDist, q: f64, r: f64) -> f64 {
    let exponent = (1.0 - r) / (1.0 - q) * log_power_sum(&p.0, q);
    (exponent.exp_m1() / (1.0 - r)).max(0.0)
}

/// Shannon entropy `-Σ p ln p`.
pub fn shannon(p: &ProbDist) -> f64 {
    let h: f64 = p
        .0
        .iter()
        .filter(|&&x| x > LOG_FLOOR)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}

/// Rényi entropy of order `alpha`; `f64::INFINITY` gives the min-entropy.
pub fn renyi(p: &ProbDist, alpha: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    if alpha.is_infinite() {
        return Ok((-p.max().ln()).max(0.0));
    }
    if (alpha - 1.0).abs() < DEFAULT_EPS {
        return Ok(shannon(p));
    }
    Ok(renyi_unchecked(p, alpha))
}

fn renyi_unchecked(p: &ProbDist, alpha: f64) -> f64 {
    (log_power_sum(&p.0, alpha) / (1.0 - alpha)).max(0.0)
}

/// Tsallis entropy `(Σ p^q - 1) / (1 - q)`.
pub fn tsallis(p: &ProbDist, q: f64) -> Result<f64> {
    check_positive("q", q)?;
    if !q.is_finite() {
        return Err(Error::InvalidParam("q must be finite".into()));
    }
    if (q - 1.0).abs() < DEFAULT_EPS {
        return Ok(shannon(p));
    }
    Ok(tsallis_unchecked(p, q))
}

fn tsallis_unchecked(p: &ProbDist, q: f64) -> f64 {
    (log_power_sum(&p.0, q).exp_m1() / (1.0 - q)).max(0.0)
}

/// The `q → 1` limit at fixed `r`: `(exp((1-r) H) - 1) / (1 - r)`.
fn shannon_limit(p: &ProbDist, r: f64) -> f64 {
    (((1.0 - r) * shannon(p)).exp_m1() / (1.0 - r)).max(0.0)
}

/// Sharma–Mittal entropy with threshold-dispatched reductions.
pub fn sme_dispatch(p: &ProbDist, params: &EntropyParams) -> f64 {
    let (q, r) = (params.q, params.r);
    match params.family() {
        EntropyFamily::Shannon => shannon(p),
        EntropyFamily::Renyi => renyi_unchecked(p, q),
        EntropyFamily::Tsallis => {
            if (q - 1.0).abs() < params.eps {
                shannon(p)
            } else {
                tsallis_unchecked(p, q)
            }
        }
        EntropyFamily::ShannonLimit => shannon_limit(p, r),
        EntropyFamily::SharmaMittal => sharma_mittal_unchecked(p, q, r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn skewed() -> ProbDist {
        ProbDist::new(vec![0.7, 0.2, 0.1]).unwrap()
    }

    #[test]
    fn prob_dist_validation() {
        assert!(ProbDist::new(vec![]).is_err());
        assert!(ProbDist::new(vec![0.5, 0.6]).is_err());
        assert!(ProbDist::new(vec![1.5, -0.5]).is_err());
        assert!(ProbDist::new(vec![0.5, 0.5 + 5e-7]).is_ok());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap().probs(), &[0.5, 0.5]);
        for p in softmax(&[1000.0, 1000.0, 1000.0]).unwrap().probs() {
            assert_relative_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        // 50-digit direct summation
        let expected = [0.659_001_138_885_967_9, 0.242_432_970_704_713_9, 0.098_565_890_409_318_17];
        for (got, want) in softmax(&[2.0, 1.0, 0.1]).unwrap().probs().iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::InvalidInput(_))));
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn sharma_mittal_examples() {
        assert_relative_eq!(sharma_mittal(&ProbDist::uniform(4), 2.0, 0.5).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(sharma_mittal(&ProbDist::one_hot(3, 0), 2.0, 0.5).unwrap(), 0.0);
        assert_eq!(sharma_mittal(&ProbDist::one_hot(3, 2), 0.3, 1.7).unwrap(), 0.0);
        assert_relative_eq!(
            sharma_mittal(&skewed(), 1.5, 1.2).unwrap(),
            0.648_181_198_507_248_8,
            max_relative = 1e-13
        );
        for (q, r) in [(1.0, 2.0), (2.0, 1.0), (1.5, 1.5 + 1e-12)] {
            assert!(matches!(
                sharma_mittal(&skewed(), q, r),
                Err(Error::DegenerateParams { .. })
            ));
        }
        assert!(matches!(sharma_mittal(&skewed(), -1.0, 2.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn shannon_examples() {
        assert_relative_eq!(shannon(&ProbDist::uniform(2)), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(shannon(&ProbDist::one_hot(5, 3)), 0.0);
        assert_relative_eq!(shannon(&skewed()), 0.801_818_552_543_337_3, max_relative = 1e-14);
    }

    #[test]
    fn renyi_examples() {
        assert_relative_eq!(renyi(&ProbDist::uniform(4), 2.0).unwrap(), 4f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(
            renyi(&ProbDist::uniform(2), f64::INFINITY).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_relative_eq!(renyi(&skewed(), 0.5).unwrap(), 0.940_133_989_539_785_9, max_relative = 1e-13);
        assert_eq!(renyi(&skewed(), 1.0).unwrap(), shannon(&skewed()));
        assert!(matches!(renyi(&skewed(), 0.0), Err(Error::InvalidParam(_))));
        assert!(matches!(renyi(&skewed(), -2.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn tsallis_examples() {
        assert_relative_eq!(tsallis(&ProbDist::uniform(2), 2.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(tsallis(&ProbDist::one_hot(2, 1), 2.0).unwrap(), 0.0);
        assert_relative_eq!(tsallis(&skewed(), 1.5).unwrap(), 0.586_544_971_448_943_6, max_relative = 1e-13);
        assert!(matches!(tsallis(&skewed(), 0.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn dispatch_examples() {
        let half = ProbDist::uniform(2);
        let both_one = EntropyParams::new(1.0 + 1e-12, 1.0 + 1e-12).unwrap();
        assert_eq!(both_one.family(), EntropyFamily::Shannon);
        assert_relative_eq!(sme_dispatch(&half, &both_one), std::f64::consts::LN_2, epsilon = 1e-15);

        let equal = EntropyParams::new(2.0, 2.0).unwrap();
        assert_eq!(equal.family(), EntropyFamily::Tsallis);
        assert_relative_eq!(sme_dispatch(&half, &equal), 0.5, epsilon = 1e-15);

        let general = EntropyParams::new(1.3, 1.05).unwrap();
        assert_eq!(general.family(), EntropyFamily::SharmaMittal);
        assert_relative_eq!(sme_dispatch(&skewed(), &general), 0.720_159_396_185_540_3, max_relative = 1e-13);

        let near_renyi = EntropyParams::new(1.3, 1.0 + 2e-10).unwrap();
        assert_eq!(near_renyi.family(), EntropyFamily::SharmaMittal);
        let gap = (sme_dispatch(&skewed(), &near_renyi) - renyi(&skewed(), 1.3).unwrap()).abs();
        assert!(gap <= 1e-8, "discontinuity {gap}");
        assert_relative_eq!(renyi(&skewed(), 1.3).unwrap(), 0.733_445_036_855_524_7, max_relative = 1e-13);
    }

    #[test]
    fn shannon_limit_branch() {
        let params = EntropyParams::new(1.0, 1.5).unwrap();
        assert_eq!(params.family(), EntropyFamily::ShannonLimit);
        let h = shannon(&skewed());
        let expected = (((1.0 - 1.5) * h).exp() - 1.0) / (1.0 - 1.5);
        assert_relative_eq!(sme_dispatch(&skewed(), &params), expected, max_relative = 1e-14);
        // continuous with the general form just outside the band
        let outside = EntropyParams::new(1.0 + 1e-7, 1.5).unwrap();
        let gap = (sme_dispatch(&skewed(), &outside) - expected).abs();
        assert!(gap < 1e-6, "gap {gap}");
    }

    #[test]
    fn params_validation() {
        assert!(EntropyParams::new(0.0, 1.0).is_err());
        assert!(EntropyParams::new(1.0, -1.0).is_err());
        assert!(EntropyParams::with_eps(1.0, 1.0, 1e-2).is_err());
        assert!(EntropyParams::with_eps(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn tiny_probabilities_do_not_poison_sums() {
        let mut probs = vec![1e-320; 10];
        probs.push(0.5);
        probs.push(0.5);
        let p = ProbDist::new(probs).unwrap();
        for q in [0.2, 0.9, 3.0] {
            assert_relative_eq!(renyi(&p, q).unwrap(), std::f64::consts::LN_2, max_relative = 1e-12);
        }
    }
}
