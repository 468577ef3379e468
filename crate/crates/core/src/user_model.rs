//! Population model: per-trait truncated Gaussians plus a categorical gender
//! distribution, and the 3-bit trait tuple that conditions task behavior.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::{
    BigFive, Corpus, Gender, UserProfile, LIKERT_MAX, LIKERT_MIN, MAX_AGE, MIN_AGE,
};
use crate::error::{Error, Result};

/// A trait is "high" iff its value is strictly greater than this.
pub const TRAIT_THRESHOLD: f64 = 3.0;

const REJECTION_CAP: usize = 1000;

/// Binarized (domain expertise, trust propensity, technical affinity).
///
/// Renders as `"000"`..`"111"` in that fixed bit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TraitTuple {
    pub domain_expertise_high: bool,
    pub trust_propensity_high: bool,
    pub technical_affinity_high: bool,
}

impl TraitTuple {
    pub fn all() -> impl Iterator<Item = TraitTuple> {
        (0..8).map(Self::from_index)
    }

    /// Index 0..8 matching the binary reading of the rendered string.
    pub fn index(self) -> usize {
        (usize::from(self.domain_expertise_high) << 2)
            | (usize::from(self.trust_propensity_high) << 1)
            | usize::from(self.technical_affinity_high)
    }

    pub fn from_index(i: usize) -> Self {
        TraitTuple {
            domain_expertise_high: i & 4 != 0,
            trust_propensity_high: i & 2 != 0,
            technical_affinity_high: i & 1 != 0,
        }
    }
}

impl fmt::Display for TraitTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bit = |b: bool| if b { '1' } else { '0' };
        write!(
            f,
            "{}{}{}",
            bit(self.domain_expertise_high),
            bit(self.trust_propensity_high),
            bit(self.technical_affinity_high)
        )
    }
}

impl FromStr for TraitTuple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(format!("invalid trait tuple `{s}`")),
            })
            .collect::<Result<_, _>>()?;
        match bits[..] {
            [e, p, t] => Ok(TraitTuple {
                domain_expertise_high: e,
                trust_propensity_high: p,
                technical_affinity_high: t,
            }),
            _ => Err(format!("trait tuple must have 3 bits, got `{s}`")),
        }
    }
}

impl Serialize for TraitTuple {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TraitTuple {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn binarize_traits(profile: &UserProfile) -> TraitTuple {
    TraitTuple {
        domain_expertise_high: profile.domain_expertise > TRAIT_THRESHOLD,
        trust_propensity_high: profile.trust_propensity > TRAIT_THRESHOLD,
        technical_affinity_high: profile.technical_affinity > TRAIT_THRESHOLD,
    }
}

/// Truncated Gaussian parameters for one numeric trait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitParams {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TraitParams {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        TraitParams { mean, sd, lo, hi }
    }

    pub fn likert(mean: f64, sd: f64) -> Self {
        Self::new(mean, sd, LIKERT_MIN, LIKERT_MAX)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample_truncated_gaussian(self.mean, self.sd, self.lo, self.hi, rng)
    }

    fn fit(values: &[f64], lo: f64, hi: f64) -> Self {
        let (mean, sd) = mean_sd(values);
        TraitParams { mean, sd, lo, hi }
    }
}

/// Sample mean and (n-1) standard deviation; SD is 0 for fewer than 2 values.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitDistributions {
    pub age: TraitParams,
    pub technical_affinity: TraitParams,
    pub trust_propensity: TraitParams,
    pub domain_expertise: TraitParams,
    pub big5: [TraitParams; 5],
    /// Probabilities of male, female, other.
    pub gender: [f64; 3],
}

impl Default for TraitDistributions {
    fn default() -> Self {
        TraitDistributions {
            age: TraitParams::new(34.0, 10.0, f64::from(MIN_AGE), f64::from(MAX_AGE)),
            technical_affinity: TraitParams::likert(3.3, 0.8),
            trust_propensity: TraitParams::likert(3.1, 0.7),
            domain_expertise: TraitParams::likert(2.9, 0.9),
            big5: [
                TraitParams::likert(3.5, 0.8),
                TraitParams::likert(3.6, 0.7),
                TraitParams::likert(3.1, 0.9),
                TraitParams::likert(3.4, 0.7),
                TraitParams::likert(2.9, 0.9),
            ],
            gender: [0.46, 0.52, 0.02],
        }
    }
}

impl TraitDistributions {
    fn numeric(&self) -> impl Iterator<Item = (&'static str, &TraitParams)> {
        [
            ("age", &self.age),
            ("technical_affinity", &self.technical_affinity),
            ("trust_propensity", &self.trust_propensity),
            ("domain_expertise", &self.domain_expertise),
        ]
        .into_iter()
        .chain(BigFive::NAMES.into_iter().zip(self.big5.iter()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in self.numeric() {
            let ok = p.lo < p.hi && p.sd >= 0.0 && p.mean.is_finite() && p.sd.is_finite();
            if !ok {
                return Err(Error::InvalidConfig(format!("trait `{name}` has invalid parameters {p:?}")));
            }
        }
        if self.age.lo < f64::from(MIN_AGE) || self.age.hi > f64::from(MAX_AGE) {
            return Err(Error::InvalidConfig("age bounds must lie within [18, 60]".into()));
        }
        for (name, p) in self.numeric().skip(1) {
            if p.lo < LIKERT_MIN || p.hi > LIKERT_MAX {
                return Err(Error::InvalidConfig(format!("trait `{name}` bounds must lie within [1, 5]")));
            }
        }
        if self.gender.iter().any(|p| !(*p >= 0.0)) || (self.gender.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "gender probabilities must be non-negative and sum to 1, got {:?}",
                self.gender
            )));
        }
        Ok(())
    }
}

/// Sample mean/SD per numeric trait with fixed bounds, empirical gender frequencies.
pub fn fit_trait_distributions(corpus: &Corpus) -> Result<TraitDistributions> {
    let profiles: Vec<&UserProfile> = corpus.users().map(|u| &u.profile).collect();
    if profiles.len() < 2 {
        return Err(Error::InsufficientUsers(profiles.len()));
    }
    let column = |f: &dyn Fn(&UserProfile) -> f64| -> Vec<f64> { profiles.iter().map(|p| f(p)).collect() };
    let likert = |values: Vec<f64>| TraitParams::fit(&values, LIKERT_MIN, LIKERT_MAX);

    let mut gender = [0.0; 3];
    for p in &profiles {
        gender[p.gender.index()] += 1.0;
    }
    let n = profiles.len() as f64;
    gender.iter_mut().for_each(|g| *g /= n);

    Ok(TraitDistributions {
        age: TraitParams::fit(
            &column(&|p| f64::from(p.age)),
            f64::from(MIN_AGE),
            f64::from(MAX_AGE),
        ),
        technical_affinity: likert(column(&|p| p.technical_affinity)),
        trust_propensity: likert(column(&|p| p.trust_propensity)),
        domain_expertise: likert(column(&|p| p.domain_expertise)),
        big5: std::array::from_fn(|i| likert(column(&|p| p.big5.to_array()[i]))),
        gender,
    })
}

/// Draws from N(mean, sd²) restricted to `[lo, hi]`.
///
/// Plain rejection sampling for up to 1000 tries, then an inverse-CDF draw,
/// which handles truncation windows far out in a tail. `sd == 0` returns
/// `mean` clamped into the window.
pub fn sample_truncated_gaussian<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lo < hi) || !(sd >= 0.0) || !sd.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidBounds { lo, hi, sd });
    }
    if sd == 0.0 {
        return Ok(mean.clamp(lo, hi));
    }
    for _ in 0..REJECTION_CAP {
        let z: f64 = rng.sample(StandardNormal);
        let x = mean + sd * z;
        if (lo..=hi).contains(&x) {
            return Ok(x);
        }
    }
    Ok(inverse_cdf_draw(mean, sd, lo, hi, rng))
}

fn inverse_cdf_draw<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let std = Normal::standard();
    let mut a = (lo - mean) / sd;
    let mut b = (hi - mean) / sd;
    // Work in the lower tail where the CDF has full relative precision.
    let flip = a > 0.0;
    if flip {
        (a, b) = (-b, -a);
    }
    let (fa, fb) = (std.cdf(a), std.cdf(b));
    let z = if fb > fa {
        let u: f64 = rng.random();
        std.inverse_cdf(fa + u * (fb - fa)).clamp(a, b)
    } else {
        // Window carries no representable mass; take the edge nearest the mode.
        b
    };
    let z = if flip { -z } else { z };
    (mean + sd * z).clamp(lo, hi)
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u: f64 = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    // Rounding slack: last index with positive mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

pub fn sample_user<R: Rng + ?Sized>(dists: &TraitDistributions, rng: &mut R) -> Result<UserProfile> {
    let age = dists.age.sample(rng)?.round().clamp(f64::from(MIN_AGE), f64::from(MAX_AGE)) as u32;
    let gender = Gender::ALL[sample_categorical(&dists.gender, rng)];
    let technical_affinity = dists.technical_affinity.sample(rng)?;
    let trust_propensity = dists.trust_propensity.sample(rng)?;
    let domain_expertise = dists.domain_expertise.sample(rng)?;
    let mut big5 = [0.0; 5];
    for (v, p) in big5.iter_mut().zip(&dists.big5) {
        *v = p.sample(rng)?;
    }
    Ok(UserProfile {
        age,
        gender,
        technical_affinity,
        trust_propensity,
        domain_expertise,
        big5: BigFive::from_array(big5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::{dialog, profile};
    use crate::corpus::ProactiveAct;
    use crate::rng::Stream;
    use proptest::prelude::*;
    use statrs::distribution::Continuous;

    /// Closed-form mean of N(mu, sd²) truncated to [lo, hi].
    fn truncated_mean(mu: f64, sd: f64, lo: f64, hi: f64) -> f64 {
        let n = Normal::standard();
        let (a, b) = ((lo - mu) / sd, (hi - mu) / sd);
        mu + sd * (n.pdf(a) - n.pdf(b)) / (n.cdf(b) - n.cdf(a))
    }

    #[test]
    fn age_always_in_bounds() {
        let mut rng = Stream::new(1).rng();
        for _ in 0..10_000 {
            let x = sample_truncated_gaussian(30.0, 10.0, 18.0, 60.0, &mut rng).unwrap();
            assert!((18.0..=60.0).contains(&x));
        }
    }

    #[test]
    fn degenerate_sd() {
        let mut rng = Stream::new(1).rng();
        assert_eq!(sample_truncated_gaussian(3.0, 0.0, 1.0, 5.0, &mut rng).unwrap(), 3.0);
        assert_eq!(sample_truncated_gaussian(7.0, 0.0, 1.0, 5.0, &mut rng).unwrap(), 5.0);
    }

    #[test]
    fn invalid_bounds() {
        let mut rng = Stream::new(1).rng();
        assert!(matches!(
            sample_truncated_gaussian(3.0, 1.0, 5.0, 1.0, &mut rng),
            Err(Error::InvalidBounds { .. })
        ));
        assert!(sample_truncated_gaussian(3.0, -1.0, 1.0, 5.0, &mut rng).is_err());
        assert!(sample_truncated_gaussian(3.0, 1.0, 2.0, 2.0, &mut rng).is_err());
    }

    #[test]
    fn empirical_mean_matches_closed_form() {
        let oracle = truncated_mean(3.0, 1.0, 1.0, 5.0);
        assert!((oracle - 3.0).abs() < 1e-12, "symmetric window keeps the mean");
        let oracle_skew = truncated_mean(4.2, 1.0, 1.0, 5.0);
        for (mu, expected) in [(3.0, oracle), (4.2, oracle_skew)] {
            let mut rng = Stream::new(99).rng();
            let n = 100_000;
            let mean = (0..n)
                .map(|_| sample_truncated_gaussian(mu, 1.0, 1.0, 5.0, &mut rng).unwrap())
                .sum::<f64>()
                / n as f64;
            assert!((mean - expected).abs() < 0.02, "mu={mu}: {mean} vs {expected}");
        }
    }

    #[test]
    fn far_tail_window_uses_inverse_cdf() {
        // Window 8..9 standard deviations above the mean: rejection never succeeds.
        let mut rng = Stream::new(5).rng();
        // Mirror into the lower tail so the oracle's CDF difference keeps precision.
        let oracle = -truncated_mean(0.0, 1.0, -9.0, -8.0);
        assert!(oracle > 8.0 && oracle < 8.2, "{oracle}");
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_truncated_gaussian(0.0, 1.0, 8.0, 9.0, &mut rng).unwrap();
            assert!((8.0..=9.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - oracle).abs() < 0.01, "{} vs {oracle}", sum / n as f64);
        let y = sample_truncated_gaussian(0.0, 1.0, -9.0, -8.0, &mut rng).unwrap();
        assert!((-9.0..=-8.0).contains(&y));
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize_traits(&profile(2.4, 4.0, 4.2)).to_string(), "011");
        assert_eq!(binarize_traits(&profile(1.0, 1.0, 1.0)).to_string(), "000");
        assert_eq!(binarize_traits(&profile(3.0, 3.0, 3.0)).to_string(), "000");
        assert_eq!(binarize_traits(&profile(5.0, 3.01, 5.0)).to_string(), "111");
    }

    #[test]
    fn tuple_string_round_trip() {
        for t in TraitTuple::all() {
            let s = t.to_string();
            assert_eq!(s.parse::<TraitTuple>().unwrap(), t);
            assert_eq!(usize::from_str_radix(&s, 2).unwrap(), t.index());
        }
        assert!("01".parse::<TraitTuple>().is_err());
        assert!("0a1".parse::<TraitTuple>().is_err());
        let json = serde_json::to_string(&TraitTuple::from_index(5)).unwrap();
        assert_eq!(json, "\"101\"");
    }

    #[test]
    fn fit_constant_age_and_gender_frequencies() {
        let mut dialogs = Vec::new();
        for i in 0..10 {
            let mut p = profile(3.0, 3.0, 3.0);
            p.gender = if i < 6 { Gender::Female } else { Gender::Male };
            dialogs.push(dialog(&format!("u{i}"), p, ProactiveAct::None));
        }
        let d = fit_trait_distributions(&Corpus::new(dialogs).unwrap()).unwrap();
        assert_eq!(d.age.mean, 30.0);
        assert_eq!(d.age.sd, 0.0);
        assert_eq!((d.age.lo, d.age.hi), (18.0, 60.0));
        assert_eq!(d.gender, [0.4, 0.6, 0.0]);
        d.validate().unwrap();
    }

    #[test]
    fn fit_needs_two_users() {
        let c = Corpus::new(vec![dialog("u", profile(3.0, 3.0, 3.0), ProactiveAct::None)]).unwrap();
        assert!(matches!(fit_trait_distributions(&c), Err(Error::InsufficientUsers(1))));
    }

    #[test]
    fn degenerate_gender() {
        let mut d = TraitDistributions::default();
        d.gender = [1.0, 0.0, 0.0];
        let mut rng = Stream::new(3).rng();
        for _ in 0..1000 {
            assert_eq!(sample_user(&d, &mut rng).unwrap().gender, Gender::Male);
        }
    }

    #[test]
    fn gender_frequencies_converge() {
        let d = TraitDistributions::default();
        let mut rng = Stream::new(11).rng();
        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_user(&d, &mut rng).unwrap().gender.index()] += 1;
        }
        for (c, p) in counts.iter().zip(d.gender) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.02);
        }
    }

    #[test]
    fn default_distributions_are_valid() {
        TraitDistributions::default().validate().unwrap();
        let mut bad = TraitDistributions::default();
        bad.gender = [0.5, 0.4, 0.0];
        assert!(bad.validate().is_err());
        let mut bad = TraitDistributions::default();
        bad.age.hi = 70.0;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn sampled_profiles_respect_bounds(seed in any::<u64>(), mean in -5.0f64..10.0, sd in 0.0f64..4.0) {
            let mut d = TraitDistributions::default();
            d.trust_propensity = TraitParams::likert(mean, sd);
            d.age.mean = mean * 10.0;
            let mut rng = Stream::new(seed).rng();
            for _ in 0..20 {
                let p = sample_user(&d, &mut rng).unwrap();
                prop_assert!(p.validate(0).is_ok());
            }
        }

        #[test]
        fn binarize_is_monotone(e in 1.0f64..5.0, p in 1.0f64..5.0, t in 1.0f64..5.0, bump in 0.0f64..2.0) {
            let low = binarize_traits(&profile(e, p, t));
            let high = binarize_traits(&profile((e + bump).min(5.0), (p + bump).min(5.0), (t + bump).min(5.0)));
            prop_assert!(!low.domain_expertise_high || high.domain_expertise_high);
            prop_assert!(!low.trust_propensity_high || high.trust_propensity_high);
            prop_assert!(!low.technical_affinity_high || high.technical_affinity_high);
        }
    }
}
