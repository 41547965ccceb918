//! Ergodic means `A_n(F,T,x) = (1/n) Σ_{i<n} F(Tⁱx)` and the analyses
//! built on them.
//!
//! [`ErgodicMeans`] stores, for every orbit of length `p`, prefix sums of
//! `F` along two turns of the orbit, so a mean over any window costs two
//! lookups: with `n = qp + r`, the sum is `q·total + P[s+r] − P[s]`.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::{Accumulator, Scalar};
use crate::space::{format_real, FiniteSystem, Observable};

/// Prefix-sum tables for O(1) ergodic means.
#[derive(Clone, Debug)]
pub struct ErgodicMeans<S: Scalar> {
    orbit_of: Vec<u32>,
    offset: Vec<u32>,
    /// `(start in prefix, period)` per orbit.
    orbits: Vec<(usize, usize)>,
    prefix: Vec<S::Accum>,
}

impl<S: Scalar> ErgodicMeans<S> {
    pub fn new(system: &FiniteSystem, f: &Observable<S>) -> Result<Self> {
        let m = system.size();
        if f.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: f.len(),
            });
        }
        if m > u32::MAX as usize {
            return Err(Error::Resource(format!("{m} points exceed the index width")));
        }
        let mut orbit_of = vec![0u32; m];
        let mut offset = vec![0u32; m];
        let mut orbits = Vec::new();
        let mut prefix = Vec::with_capacity(2 * m + m.min(1 << 20));
        let mut seen = vec![false; m];
        let perm = system.perm();
        let mut cycle = Vec::new();
        for start in 0..m {
            if seen[start] {
                continue;
            }
            cycle.clear();
            let mut y = start;
            loop {
                seen[y] = true;
                cycle.push(y);
                y = perm.apply(y);
                if y == start {
                    break;
                }
            }
            let id = orbits.len() as u32;
            let p = cycle.len();
            orbits.push((prefix.len(), p));
            let mut acc = S::Accum::zero();
            prefix.push(acc);
            for i in 0..2 * p {
                acc = acc + S::Accum::of(f.at(cycle[i % p]));
                prefix.push(acc);
            }
            for (i, &y) in cycle.iter().enumerate() {
                orbit_of[y] = id;
                offset[y] = i as u32;
            }
        }
        Ok(ErgodicMeans {
            orbit_of,
            offset,
            orbits,
            prefix,
        })
    }

    pub fn size(&self) -> usize {
        self.orbit_of.len()
    }

    pub fn period(&self, x: usize) -> usize {
        self.orbits[self.orbit_of[x] as usize].1
    }

    /// `Σ_{i<n} F(Tⁱx)` as an accumulator.
    #[inline]
    pub fn window_sum(&self, x: usize, n: usize) -> S::Accum {
        let (base, p) = self.orbits[self.orbit_of[x] as usize];
        let s = self.offset[x] as usize;
        let (q, r) = (n / p, n % p);
        let total = self.prefix[base + p] - self.prefix[base];
        let head = self.prefix[base + s + r] - self.prefix[base + s];
        total.times(q as u64) + head
    }

    /// `A_n(F,T,x)` without argument checks.
    #[inline]
    pub fn mean_unchecked(&self, x: usize, n: usize) -> S {
        self.window_sum(x, n).value() / S::from_count(n)
    }

    pub fn mean(&self, x: usize, n: usize) -> Result<S> {
        if n == 0 {
            return Err(invalid("window length n must be at least 1"));
        }
        if x >= self.size() {
            return Err(Error::IndexOutOfRange {
                index: x,
                size: self.size(),
            });
        }
        Ok(self.mean_unchecked(x, n))
    }
}

/// `A_n(F,T,x)` by direct summation along the orbit; the reference for
/// [`ErgodicMeans`].
pub fn ergodic_mean_naive<S: Scalar>(
    system: &FiniteSystem,
    f: &Observable<S>,
    x: usize,
    n: usize,
) -> Result<S> {
    if n == 0 {
        return Err(invalid("window length n must be at least 1"));
    }
    system.perm().check_index(x)?;
    let mut y = x;
    let mut acc = S::Accum::zero();
    for _ in 0..n {
        acc = acc + S::Accum::of(f.at(y));
        y = system.perm().apply(y);
    }
    Ok(acc.value() / S::from_count(n))
}

/// `A_n(F,T,x)`.
pub fn ergodic_mean<S: Scalar>(
    system: &FiniteSystem,
    f: &Observable<S>,
    x: usize,
    n: usize,
) -> Result<S> {
    if n == 0 {
        return Err(invalid("window length n must be at least 1"));
    }
    system.perm().check_index(x)?;
    if f.len() != system.size() {
        return Err(Error::LengthMismatch {
            expected: system.size(),
            found: f.len(),
        });
    }
    let orbit = system.perm().orbit(x)?;
    let p = orbit.len();
    let (q, r) = (n / p, n % p);
    let mut total = S::Accum::zero();
    let mut head = S::Accum::zero();
    for (i, &y) in orbit.iter().enumerate() {
        total = total + S::Accum::of(f.at(y));
        if i + 1 == r {
            head = total;
        }
    }
    Ok((total.times(q as u64) + head).value() / S::from_count(n))
}

/// Sorted distinct sample of `count` points out of `m`, or every point when
/// `count >= m`.
pub fn sample_points(m: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= m {
        return (0..m).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, m, count).into_vec();
    picked.sort_unstable();
    picked
}

fn check_points(points: &[usize], m: usize) -> Result<()> {
    match points.iter().find(|&&x| x >= m) {
        Some(&x) => Err(Error::IndexOutOfRange { index: x, size: m }),
        None => Ok(()),
    }
}

/// Sampled means `(n, A_n)` of one base point.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanProfile<S> {
    pub base_index: usize,
    pub size: usize,
    pub samples: Vec<(usize, S)>,
}

impl<S: Scalar> MeanProfile<S> {
    /// The plotted pairs `(n/M, A_n)`.
    pub fn plot_points(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|&(n, a)| (n as f64 / self.size as f64, a.as_f64()))
            .collect()
    }

    /// CSV with header `a,mean`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a", "mean"])?;
        for (a, v) in self.plot_points() {
            w.write_record([format_real(a), format_real(v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Means of `x` at every window length of `n_grid`, sorted and deduplicated.
pub fn mean_curve<S: Scalar>(
    means: &ErgodicMeans<S>,
    x: usize,
    n_grid: &[usize],
) -> Result<MeanProfile<S>> {
    if n_grid.is_empty() {
        return Err(invalid("the window grid is empty"));
    }
    if n_grid.contains(&0) {
        return Err(invalid("window lengths must be at least 1"));
    }
    check_points(&[x], means.size())?;
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    Ok(MeanProfile {
        base_index: x,
        size: means.size(),
        samples: grid
            .into_iter()
            .map(|n| (n, means.mean_unchecked(x, n)))
            .collect(),
    })
}

/// Parses a window grid: `lin:a:b:count`, `log:a:b:count` or a comma list.
pub fn parse_n_grid(text: &str) -> Result<Vec<usize>> {
    let bad = |why: &str| Error::Parse(format!("window grid `{text}`: {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    let mut grid: Vec<usize> = match parts.as_slice() {
        [kind @ ("lin" | "log"), a, b, count] => {
            let a: usize = a.trim().parse().map_err(|_| bad("bad start"))?;
            let b: usize = b.trim().parse().map_err(|_| bad("bad end"))?;
            let count: usize = count.trim().parse().map_err(|_| bad("bad count"))?;
            if a == 0 || b < a || count == 0 {
                return Err(bad("need 1 <= start <= end and count >= 1"));
            }
            if count == 1 {
                vec![a]
            } else {
                (0..count)
                    .map(|i| {
                        let t = i as f64 / (count - 1) as f64;
                        let v = if *kind == "lin" {
                            a as f64 + t * (b - a) as f64
                        } else {
                            (a as f64).powf(1.0 - t) * (b as f64).powf(t)
                        };
                        (v.round() as usize).clamp(a, b)
                    })
                    .collect()
            }
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad("bad entry")))
            .collect::<Result<_>>()?,
        _ => return Err(bad("unknown form")),
    };
    if grid.contains(&0) {
        return Err(bad("window lengths must be at least 1"));
    }
    grid.sort_unstable();
    grid.dedup();
    Ok(grid)
}

/// Outcome of a doubling search for a plateau of the means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilizationResult {
    /// The largest passing window bound, or `n_min - 1` when none passes.
    pub plateau_length: usize,
    pub covered_fraction: f64,
    pub found: bool,
    pub epsilon: f64,
    pub delta: f64,
    pub n_min: usize,
    pub sample_size: usize,
    /// Every examined bound with its covered fraction.
    pub scanned: Vec<(usize, f64)>,
}

/// Doubling search over `L ∈ {n_min, 2n_min, 4n_min, .., M}` for the
/// largest `L` such that at least `1 - delta` of the sampled points have
/// `max A_n - min A_n <= epsilon` over `n_min <= n <= L`. Stops at the first
/// failing bound.
pub fn stabilization_scan<S: Scalar>(
    means: &ErgodicMeans<S>,
    epsilon: f64,
    delta: f64,
    n_min: usize,
    points: &[usize],
) -> Result<StabilizationResult> {
    if n_min == 0 {
        return Err(invalid("n_min must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta = {delta} must lie in (0,1)")));
    }
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon = {epsilon} must be positive")));
    }
    if points.is_empty() {
        return Err(invalid("the sample is empty"));
    }
    let m = means.size();
    check_points(points, m)?;
    let mut candidates = Vec::new();
    let mut l = n_min;
    while l < m {
        candidates.push(l);
        l = l.saturating_mul(2);
    }
    candidates.push(m.max(n_min));

    // per point: (next n to visit, running min, running max)
    let mut state: Vec<(usize, S, S)> = points
        .iter()
        .map(|&x| {
            let a = means.mean_unchecked(x, n_min);
            (n_min + 1, a, a)
        })
        .collect();
    let mut result = StabilizationResult {
        plateau_length: n_min - 1,
        covered_fraction: 0.0,
        found: false,
        epsilon,
        delta,
        n_min,
        sample_size: points.len(),
        scanned: Vec::new(),
    };
    for &bound in &candidates {
        let covered = state
            .par_iter_mut()
            .zip(points.par_iter())
            .map(|((next, lo, hi), &x)| {
                while *next <= bound {
                    let a = means.mean_unchecked(x, *next);
                    *lo = lo.min_of(a);
                    *hi = hi.max_of(a);
                    *next += 1;
                }
                usize::from((*hi - *lo).as_f64() <= epsilon)
            })
            .sum::<usize>();
        let fraction = covered as f64 / points.len() as f64;
        result.scanned.push((bound, fraction));
        if fraction < 1.0 - delta {
            if !result.found {
                result.covered_fraction = fraction;
            }
            break;
        }
        result.plateau_length = bound;
        result.covered_fraction = fraction;
        result.found = true;
    }
    Ok(result)
}

/// The largest `k` with indices `n_1 < .. < n_{2k}` such that
/// `|s_{n_{2i-1}} - s_{n_{2i}}| >= epsilon` for every `i`.
///
/// Greedy: close a pair as soon as the segment since the last pair spans
/// `epsilon`. Closing at the earliest possible index is optimal by the usual
/// exchange argument for interval scheduling.
pub fn fluctuation_count<S: Scalar>(sequence: &[S], epsilon: S) -> usize {
    let mut counter = FluctuationCounter::new(epsilon);
    for &v in sequence {
        counter.push(v);
    }
    counter.count()
}

/// Streaming form of [`fluctuation_count`].
#[derive(Clone, Copy, Debug)]
pub struct FluctuationCounter<S> {
    epsilon: S,
    range: Option<(S, S)>,
    count: usize,
}

impl<S: Scalar> FluctuationCounter<S> {
    pub fn new(epsilon: S) -> Self {
        FluctuationCounter {
            epsilon,
            range: None,
            count: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, v: S) {
        let (lo, hi) = match self.range {
            None => (v, v),
            Some((lo, hi)) => (lo.min_of(v), hi.max_of(v)),
        };
        if hi - lo >= self.epsilon {
            self.count += 1;
            self.range = None;
        } else {
            self.range = Some((lo, hi));
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Maximal fluctuation counts of the mean sequences `A_1, .., A_N` over a
/// sample, with the occupancy `k ↦ |{y : Fl(ε,N,y) <= k}| / sample`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluctuationReport {
    pub epsilon: f64,
    pub horizon: usize,
    pub points: Vec<usize>,
    pub counts: Vec<usize>,
    /// Entry `k` is the occupancy at `k`, for `k = 0..=max count`.
    pub occupancy: Vec<f64>,
}

impl FluctuationReport {
    pub fn max_count(&self) -> usize {
        self.occupancy.len() - 1
    }

    /// Smallest `k` whose occupancy reaches `level`.
    pub fn first_k_reaching(&self, level: f64) -> usize {
        self.occupancy
            .iter()
            .position(|&u| u >= level)
            .unwrap_or(self.max_count())
    }

    /// CSV with header `k,occupancy`.
    pub fn write_occupancy_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "occupancy"])?;
        for (k, u) in self.occupancy.iter().enumerate() {
            w.write_record([k.to_string(), format_real(*u)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with header `point,count`.
    pub fn write_counts_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["point", "count"])?;
        for (x, c) in self.points.iter().zip(&self.counts) {
            w.write_record([x.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fluctuation_report<S: Scalar>(
    means: &ErgodicMeans<S>,
    epsilon: f64,
    horizon: usize,
    points: &[usize],
) -> Result<FluctuationReport> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon = {epsilon} must be positive")));
    }
    if horizon == 0 {
        return Err(invalid("the horizon must be at least 1"));
    }
    if points.is_empty() {
        return Err(invalid("the sample is empty"));
    }
    check_points(points, means.size())?;
    let eps = S::from_real(epsilon).ok_or_else(|| invalid("epsilon is not representable"))?;
    let counts: Vec<usize> = points
        .par_iter()
        .map(|&x| {
            let mut c = FluctuationCounter::new(eps);
            for n in 1..=horizon {
                c.push(means.mean_unchecked(x, n));
            }
            c.count()
        })
        .collect();
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for &c in &counts {
        hist[c] += 1;
    }
    let mut running = 0;
    let occupancy = hist
        .iter()
        .map(|&h| {
            running += h;
            running as f64 / counts.len() as f64
        })
        .collect();
    Ok(FluctuationReport {
        epsilon,
        horizon,
        points: points.to_vec(),
        counts,
        occupancy,
    })
}

/// `(1/M) Σ_{|F(y)| > threshold} |F(y)|`.
pub fn tail_mass<S: Scalar>(f: &Observable<S>, threshold: S) -> Result<S> {
    if threshold < S::zero() {
        return Err(invalid("the threshold must be non-negative"));
    }
    if f.is_empty() {
        return Ok(S::zero());
    }
    let acc = f
        .values()
        .iter()
        .map(|v| v.abs())
        .filter(|&a| a > threshold)
        .fold(S::Accum::zero(), |acc, a| acc + S::Accum::of(a));
    Ok(acc.value() / S::from_count(f.len()))
}

/// `|A_K - A_L|` at each sampled point.
pub fn gap_profile<S: Scalar>(
    means: &ErgodicMeans<S>,
    k: usize,
    l: usize,
    points: &[usize],
) -> Result<Vec<S>> {
    if k == 0 || l == 0 {
        return Err(invalid("window lengths K and L must be at least 1"));
    }
    check_points(points, means.size())?;
    Ok(points
        .par_iter()
        .map(|&x| (means.mean_unchecked(x, k) - means.mean_unchecked(x, l)).abs())
        .collect())
}

/// `max_y |A_K(F,T,y) - A_L(F,T,y)|` over the sample.
pub fn mean_gap<S: Scalar>(
    means: &ErgodicMeans<S>,
    k: usize,
    l: usize,
    points: &[usize],
) -> Result<S> {
    Ok(gap_profile(means, k, l, points)?
        .into_iter()
        .fold(S::zero(), S::max_of))
}

/// `l_a(F,T,x) = A_{⌊aM⌋}(F,T,x)`.
pub fn limit_functional<S: Scalar>(means: &ErgodicMeans<S>, x: usize, a: f64) -> Result<S> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("a = {a} must be positive")));
    }
    let n = (a * means.size() as f64).floor();
    if n < 1.0 {
        return Err(invalid(format!("⌊aM⌋ = 0 for a = {a}")));
    }
    means.mean(x, n as usize)
}

/// `Av(|A_n(F,T,·)|)`.
pub fn mean_of_abs_means<S: Scalar>(means: &ErgodicMeans<S>, n: usize) -> Result<S> {
    if n == 0 {
        return Err(invalid("window length n must be at least 1"));
    }
    let m = means.size();
    let acc = (0..m).fold(S::Accum::zero(), |acc, x| {
        acc + S::Accum::of(means.mean_unchecked(x, n).abs())
    });
    Ok(acc.value() / S::from_count(m))
}
