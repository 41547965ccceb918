//! Empirical measures of finite point sets and their weak-* distance to a
//! reference measure, measured by test functions.

use std::collections::HashSet;
use std::sync::Arc;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::TestFunction;
use crate::space::RealMetric;

/// A rational convex combination of Dirac measures.
///
/// Atoms keep the numerator and denominator exactly as given, so `[z, 3, 3]`
/// asks for three points near `z` while `[z, 1, 1]` asks for one.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracMixture {
    atoms: Vec<(f64, u64, u64)>,
}

impl DiracMixture {
    /// Atoms from `(coordinate, numerator, denominator)` triples.
    pub fn from_triples(triples: &[(f64, u64, u64)]) -> Result<Self> {
        if triples.is_empty() {
            return Err(invalid("a Dirac mixture needs at least one atom"));
        }
        let mut total = Ratio::from_integer(0u64);
        for (i, &(z, p, q)) in triples.iter().enumerate() {
            if !z.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if q == 0 {
                return Err(invalid(format!("atom {i} has a zero denominator")));
            }
            if p == 0 {
                return Err(invalid(format!("atom {i} has zero weight")));
            }
            total += Ratio::new(p, q);
        }
        if total != Ratio::from_integer(1) {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(DiracMixture {
            atoms: triples.to_vec(),
        })
    }

    /// Atoms with point counts `n_j`; the weights are `n_j / Σ n`.
    pub fn from_counts(counts: &[(f64, u64)]) -> Result<Self> {
        let n: u64 = counts.iter().map(|&(_, c)| c).sum();
        let triples: Vec<_> = counts.iter().map(|&(z, c)| (z, c, n)).collect();
        DiracMixture::from_triples(&triples)
    }

    pub fn atoms(&self) -> &[(f64, u64, u64)] {
        &self.atoms
    }

    pub fn weight(&self, j: usize) -> Ratio<u64> {
        let (_, p, q) = self.atoms[j];
        Ratio::new(p, q)
    }

    /// The common denominator `n` of the weights as written.
    pub fn denominator(&self) -> u64 {
        self.atoms.iter().fold(1u64, |acc, &(_, _, q)| acc.lcm(&q))
    }

    /// Point counts `n_j = w_j · n`.
    pub fn counts(&self) -> Vec<u64> {
        let n = self.denominator();
        self.atoms.iter().map(|&(_, p, q)| p * (n / q)).collect()
    }

    /// `Σ w_j f(z_j)`.
    pub fn integrate(&self, f: &TestFunction) -> f64 {
        self.atoms
            .iter()
            .map(|&(z, p, q)| (p as f64 / q as f64) * f.eval(z))
            .sum()
    }
}

impl Serialize for DiracMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            atoms: &'a [(f64, u64, u64)],
        }
        Repr { atoms: &self.atoms }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiracMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            atoms: Vec<(f64, u64, u64)>,
        }
        let repr = Repr::deserialize(d)?;
        DiracMixture::from_triples(&repr.atoms).map_err(serde::de::Error::custom)
    }
}

/// Finitely many test functions.
#[derive(Clone, Debug, Default)]
pub struct TestSuite {
    functions: Vec<TestFunction>,
}

impl TestSuite {
    pub fn new(functions: Vec<TestFunction>) -> Self {
        TestSuite { functions }
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn has_references(&self) -> bool {
        self.functions.iter().all(|f| f.reference_integral().is_some())
    }
}

/// A membership predicate for the full-measure set points must come from.
#[derive(Clone)]
pub struct AllowedSet {
    name: String,
    predicate: Arc<dyn Fn(f64) -> bool + Send + Sync>,
}

impl std::fmt::Debug for AllowedSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("AllowedSet").field(&self.name).finish()
    }
}

impl AllowedSet {
    pub fn new(name: impl Into<String>, predicate: impl Fn(f64) -> bool + Send + Sync + 'static) -> Self {
        AllowedSet {
            name: name.into(),
            predicate: Arc::new(predicate),
        }
    }

    pub fn everything() -> Self {
        AllowedSet::new("all", |_| true)
    }

    /// Excludes rationals `p/q` with `q <= max_den` (up to rounding of the
    /// floating-point test).
    pub fn excluding_rationals(max_den: u32) -> Self {
        AllowedSet::new(format!("no-rationals(q<={max_den})"), move |x: f64| {
            (1..=max_den).all(|q| {
                let s = x * q as f64;
                (s - s.round()).abs() > 1e-12
            })
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.predicate)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// `(1/|Y|) Σ f(y)`.
pub fn empirical_integral<P>(points: &[P], f: impl Fn(&P) -> f64) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("empirical integral over an empty point set"));
    }
    let values: Vec<f64> = points.iter().map(f).collect();
    Ok(crate::scalar::sum(&values) / points.len() as f64)
}

/// `max_i |∫ f_i dδ_Y − ∫ f_i dν|` over the suite.
pub fn weakstar_gap(points: &[f64], suite: &TestSuite) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for f in suite.functions() {
        let reference = f.reference_integral().ok_or_else(|| {
            Error::Contract(format!("test function `{}` has no reference integral", f.name()))
        })?;
        let emp = empirical_integral(points, |&y| f.eval(y))?;
        gap = gap.max((emp - reference).abs());
    }
    Ok(gap)
}

/// `{k/M : k < M}`.
pub fn uniform_grid(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(invalid("uniform grid needs M >= 1"));
    }
    Ok((0..m).map(|k| k as f64 / m as f64).collect())
}

/// Output of [`build_grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    /// Ball radius used around each atom.
    pub sigma: f64,
}

/// The ball radius for `target` and `suite` at tolerance `eps`.
pub fn grid_radius(target: &DiracMixture, suite: &TestSuite, eps: f64, metric: RealMetric) -> Result<f64> {
    let atoms = target.atoms();
    let mut sigma: f64 = 0.5;
    for (i, &(u, _, _)) in atoms.iter().enumerate() {
        for &(v, _, _) in &atoms[i + 1..] {
            let d = metric.distance(u, v);
            if d == 0.0 {
                return Err(invalid(format!("atoms at {u} coincide")));
            }
            sigma = sigma.min(0.5 * d);
        }
    }
    for f in suite.functions() {
        let r = f.modulus().radius_for(eps).ok_or_else(|| {
            Error::Contract(format!(
                "modulus of `{}` gives no radius at tolerance {eps}",
                f.name()
            ))
        })?;
        sigma = sigma.min(r);
    }
    Ok(sigma)
}

/// Places `n_j` distinct allowed points inside each open ball
/// `B_σ(z_j)`, so that every suite integral against the returned set is
/// within `eps` of its integral against `target`.
///
/// Offsets inside each ball follow a Kronecker sequence with a seeded
/// starting phase.
pub fn build_grid(
    target: &DiracMixture,
    suite: &TestSuite,
    eps: f64,
    allowed: &AllowedSet,
    seed: u64,
    metric: RealMetric,
) -> Result<Grid> {
    if !(eps > 0.0) {
        return Err(invalid(format!("tolerance {eps} must be positive")));
    }
    let sigma = grid_radius(target, suite, eps, metric)?;
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut points = Vec::with_capacity(target.denominator() as usize);
    for (&(z, _, _), count) in target.atoms().iter().zip(target.counts()) {
        let phase: f64 = rng.gen();
        let mut placed = 0u64;
        let budget = 64 * count + 1024;
        let mut i = 0u64;
        while placed < count {
            if i >= budget {
                return Err(Error::Construction(format!(
                    "could only place {placed} of {count} points near atom {z} (radius {sigma})"
                )));
            }
            let u = (phase + i as f64 * golden).fract();
            i += 1;
            let mut y = z + (2.0 * u - 1.0) * sigma * 0.999;
            match metric {
                RealMetric::Circle => y = y.rem_euclid(1.0),
                RealMetric::Interval => {
                    if !(0.0..=1.0).contains(&y) {
                        continue;
                    }
                }
            }
            if metric.distance(y, z) >= sigma || !allowed.contains(y) || !seen.insert(y.to_bits()) {
                continue;
            }
            points.push(y);
            placed += 1;
        }
    }
    Ok(Grid { points, sigma })
}
