//! Permutations of a finite grid approximating a map: maximum matching of
//! each point to a grid point near its image, cycle concatenation into a
//! single cycle, splitting into cycles of a fixed length, and the pointwise
//! approximation error.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::{
    symbolic_distance, CycleDecomposition, Embedding, FiniteSystem, Permutation, RealMetric, Words,
};

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;
type WordFn = dyn Fn(&[u8]) -> Vec<u8> + Send + Sync;

#[derive(Clone)]
pub enum Evaluator {
    Real(Arc<RealFn>),
    Symbolic(Arc<WordFn>),
}

/// A transformation `τ` of the ambient space.
#[derive(Clone)]
pub struct MapSpec {
    name: String,
    evaluator: Evaluator,
    continuity_set_note: String,
    invertible: bool,
}

impl fmt::Debug for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapSpec")
            .field("name", &self.name)
            .field("continuity_set_note", &self.continuity_set_note)
            .field("invertible", &self.invertible)
            .finish_non_exhaustive()
    }
}

impl MapSpec {
    pub fn real(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        continuity_set_note: impl Into<String>,
        invertible: bool,
    ) -> Self {
        MapSpec {
            name: name.into(),
            evaluator: Evaluator::Real(Arc::new(f)),
            continuity_set_note: continuity_set_note.into(),
            invertible,
        }
    }

    pub fn symbolic(
        name: impl Into<String>,
        f: impl Fn(&[u8]) -> Vec<u8> + Send + Sync + 'static,
        continuity_set_note: impl Into<String>,
        invertible: bool,
    ) -> Self {
        MapSpec {
            name: name.into(),
            evaluator: Evaluator::Symbolic(Arc::new(f)),
            continuity_set_note: continuity_set_note.into(),
            invertible,
        }
    }

    pub fn identity() -> Self {
        MapSpec::real("identity", |x| x, "everywhere", true)
    }

    /// `x ↦ x ⊕ α` on the circle.
    pub fn rotation(alpha: f64) -> Self {
        MapSpec::real(
            format!("rotation({alpha})"),
            move |x| (x + alpha).rem_euclid(1.0),
            "everywhere on the circle",
            true,
        )
    }

    /// `x ↦ 2x mod 1`, measure preserving but two-to-one.
    pub fn doubling() -> Self {
        MapSpec::real(
            "doubling",
            |x| (2.0 * x).rem_euclid(1.0),
            "everywhere on the circle",
            false,
        )
    }

    /// The left shift of a window, padded with symbol 0 on the right.
    pub fn shift() -> Self {
        MapSpec::symbolic(
            "shift",
            |w| {
                let mut out = w[1..].to_vec();
                out.push(0);
                out
            },
            "everywhere",
            true,
        )
    }

    /// A map given by its values on a finite table; other points map to NaN.
    pub fn tabulated(points: &[f64], images: &[f64]) -> Result<Self> {
        if points.len() != images.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: images.len(),
            });
        }
        let table: BTreeMap<u64, f64> = points
            .iter()
            .zip(images)
            .map(|(p, &q)| (p.to_bits(), q))
            .collect();
        if table.len() != points.len() {
            return Err(invalid("tabulated map has repeated points"));
        }
        Ok(MapSpec::real(
            "tabulated",
            move |x| table.get(&x.to_bits()).copied().unwrap_or(f64::NAN),
            "the table points",
            false,
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn continuity_set_note(&self) -> &str {
        &self.continuity_set_note
    }

    pub fn invertible(&self) -> bool {
        self.invertible
    }

    pub fn eval_real(&self, x: f64) -> Result<f64> {
        match &self.evaluator {
            Evaluator::Real(f) => Ok(f(x)),
            Evaluator::Symbolic(_) => Err(Error::Contract(format!(
                "map {} acts on windows, not real points",
                self.name
            ))),
        }
    }

    pub fn eval_word(&self, w: &[u8]) -> Result<Vec<u8>> {
        match &self.evaluator {
            Evaluator::Symbolic(f) => Ok(f(w)),
            Evaluator::Real(_) => Err(Error::Contract(format!(
                "map {} acts on real points, not windows",
                self.name
            ))),
        }
    }
}

/// Registered maps, as named in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MapConfig {
    Identity,
    Rotation { alpha: f64 },
    Doubling,
    Shift,
}

impl MapConfig {
    pub fn build(&self) -> MapSpec {
        match *self {
            MapConfig::Identity => MapSpec::identity(),
            MapConfig::Rotation { alpha } => MapSpec::rotation(alpha),
            MapConfig::Doubling => MapSpec::doubling(),
            MapConfig::Shift => MapSpec::shift(),
        }
    }
}

/// A bijection of the grid together with how many points it sends within
/// `delta` of their prescribed image.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub perm: Permutation,
    pub matched: usize,
    pub matched_fraction: f64,
    pub delta: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && !delta.is_nan() {
        Ok(())
    } else {
        Err(invalid(format!("delta = {delta} must be positive")))
    }
}

/// Pairs unmatched sources with unmatched targets in index order.
fn complete(mate: &[Option<usize>]) -> Result<Permutation> {
    let m = mate.len();
    let mut used = vec![false; m];
    for t in mate.iter().flatten() {
        used[*t] = true;
    }
    let mut free = (0..m).filter(|&t| !used[t]);
    let images = mate
        .iter()
        .map(|t| t.unwrap_or_else(|| free.next().expect("as many free targets as free sources")))
        .collect();
    Permutation::new(images)
}

fn finish(
    mate: Vec<Option<usize>>,
    delta: f64,
    close: impl Fn(usize, usize) -> bool,
) -> Result<MatchResult> {
    let perm = complete(&mate)?;
    let m = perm.len();
    let matched = (0..m).filter(|&y| close(y, perm.apply(y))).count();
    Ok(MatchResult {
        perm,
        matched,
        matched_fraction: matched as f64 / m as f64,
        delta,
    })
}

/// Maximum matching on an arbitrary bipartite graph with `adj[s]` listing
/// the targets of source `s`; augmenting paths tried from sources in index
/// order, neighbours in listed order.
pub fn match_adjacency(adj: &[Vec<usize>], targets: usize) -> Vec<Option<usize>> {
    let mut mate_s: Vec<Option<usize>> = vec![None; adj.len()];
    let mut mate_t: Vec<Option<usize>> = vec![None; targets];
    let mut seen = vec![usize::MAX; targets];
    for s in 0..adj.len() {
        // iterative DFS over alternating paths, stamping visited targets with s
        let mut stack: Vec<(usize, usize)> = vec![(s, 0)];
        let mut path: Vec<usize> = Vec::new();
        let mut found = false;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if let Some(&t) = adj[u].get(*next) {
                *next += 1;
                if seen[t] == s {
                    continue;
                }
                seen[t] = s;
                path.push(t);
                match mate_t[t] {
                    None => {
                        found = true;
                        break;
                    }
                    Some(v) => stack.push((v, 0)),
                }
            } else {
                stack.pop();
                path.pop();
            }
        }
        if found {
            for (i, &(u, _)) in stack.iter().enumerate() {
                let t = path[i];
                mate_s[u] = Some(t);
                mate_t[t] = Some(u);
            }
        }
    }
    mate_s
}

/// Contiguous ranges of sorted positions whose coordinate lies within
/// `delta` of `x`.
fn neighbour_ranges(sorted: &[f64], x: f64, delta: f64, metric: RealMetric) -> Vec<Range<usize>> {
    let m = sorted.len();
    let slack = delta * (1.0 + 1e-9) + 1e-12;
    let pos = |v: f64| sorted.partition_point(|&c| c < v);
    let mut ranges = Vec::with_capacity(2);
    match metric {
        RealMetric::Interval => ranges.push(pos(x - slack)..pos(x + slack).max(pos(x - slack))),
        RealMetric::Circle => {
            if slack >= 0.5 {
                ranges.push(0..m);
            } else {
                let lo = x - slack;
                let hi = x + slack;
                if lo < 0.0 {
                    ranges.push(pos(lo + 1.0)..m);
                }
                ranges.push(pos(lo.max(0.0))..pos(hi.min(1.0)));
                if hi > 1.0 {
                    ranges.push(0..pos(hi - 1.0));
                }
            }
        }
    }
    for r in &mut ranges {
        while r.start < r.end && metric.distance(x, sorted[r.start]) >= delta {
            r.start += 1;
        }
        while r.start < r.end && metric.distance(x, sorted[r.end - 1]) >= delta {
            r.end -= 1;
        }
    }
    ranges.retain(|r| !r.is_empty());
    ranges
}

/// Maximum matching of each point `y` to a distinct grid point within
/// `delta` of `images[y]`, completed to a bijection.
pub fn match_permutation(
    points: &[f64],
    images: &[f64],
    delta: f64,
    metric: RealMetric,
) -> Result<MatchResult> {
    check_delta(delta)?;
    let m = points.len();
    if images.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: images.len(),
        });
    }
    if m == 0 {
        return Err(invalid("matching needs at least one point"));
    }
    if let Some(i) = points.iter().chain(images).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i % m));
    }
    let images: Vec<f64> = match metric {
        RealMetric::Circle => images.iter().map(|x| x.rem_euclid(1.0)).collect(),
        RealMetric::Interval => images.to_vec(),
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    let ranges: Vec<Vec<Range<usize>>> = images
        .iter()
        .map(|&x| neighbour_ranges(&sorted, x, delta, metric))
        .collect();

    // greedy sweep: sources by right end of their main range, each taking
    // the leftmost free target
    let mut free: BTreeSet<usize> = (0..m).collect();
    let mut mate_s: Vec<Option<usize>> = vec![None; m];
    let mut mate_t: Vec<Option<usize>> = vec![None; m];
    // equal-width windows: ordering by right end is ordering by image
    let mut by_end: Vec<usize> = (0..m).filter(|&s| !ranges[s].is_empty()).collect();
    by_end.sort_by(|&a, &b| images[a].total_cmp(&images[b]).then(a.cmp(&b)));
    for &s in &by_end {
        let pick = ranges[s]
            .iter()
            .find_map(|r| free.range(r.clone()).next().copied());
        if let Some(p) = pick {
            free.remove(&p);
            mate_s[s] = Some(p);
            mate_t[p] = Some(s);
        }
    }

    // augmenting paths by breadth-first search; targets stay visited across
    // failed searches since the matching is unchanged
    let mut unvisited: BTreeSet<usize> = (0..m).collect();
    for s in 0..m {
        if mate_s[s].is_some() || ranges[s].is_empty() {
            continue;
        }
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([s]);
        let mut end = None;
        'search: while let Some(u) = queue.pop_front() {
            for r in &ranges[u] {
                let hits: Vec<usize> = unvisited.range(r.clone()).copied().collect();
                for t in hits {
                    unvisited.remove(&t);
                    parent.insert(t, u);
                    match mate_t[t] {
                        None => {
                            end = Some(t);
                            break 'search;
                        }
                        Some(v) => queue.push_back(v),
                    }
                }
            }
        }
        if let Some(mut t) = end {
            loop {
                let u = parent[&t];
                let prev = mate_s[u];
                mate_s[u] = Some(t);
                mate_t[t] = Some(u);
                match prev {
                    Some(p) => t = p,
                    None => break,
                }
            }
            unvisited = (0..m).collect();
        }
    }

    let mate: Vec<Option<usize>> = mate_s.iter().map(|t| t.map(|p| order[p])).collect();
    finish(mate, delta, |y, t| metric.distance(images[y], points[t]) < delta)
}

/// Largest `r` such that windows agreeing on `|j| <= r` are within `delta`;
/// `None` when every pair is.
fn symbolic_radius(delta: f64, radius: usize) -> Option<usize> {
    if delta > 1.0 {
        return None;
    }
    let mut r = 0usize;
    while r < radius && 0.5f64.powi(r as i32 + 1) >= delta {
        r += 1;
    }
    Some(r)
}

/// Maximum matching on windows under the symbolic metric. Two windows are
/// within `delta` exactly when they agree on a centred block, so the
/// compatibility graph splits into complete blocks keyed by that block.
pub fn match_symbolic(words: &Words, images: &[Vec<u8>], delta: f64) -> Result<MatchResult> {
    check_delta(delta)?;
    let m = words.len();
    if images.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: images.len(),
        });
    }
    if let Some(i) = images.iter().position(|w| w.len() != words.width()) {
        return Err(invalid(format!("image window {i} has the wrong width")));
    }
    let n = words.radius();
    let key = |w: &[u8]| -> Vec<u8> {
        match symbolic_radius(delta, n) {
            None => Vec::new(),
            Some(r) => w[n - r..=n + r].to_vec(),
        }
    };
    let mut groups: BTreeMap<Vec<u8>, VecDeque<usize>> = BTreeMap::new();
    for t in 0..m {
        let w = words.word(t);
        groups
            .entry(key(w))
            .or_default()
            .push_back(t);
    }
    let mate: Vec<Option<usize>> = images
        .iter()
        .map(|w| {
            groups.get_mut(&key(w)).and_then(|g| g.pop_front())
        })
        .collect();
    finish(mate, delta, |y, t| symbolic_distance(&images[y], words.word(t)) < delta)
}

/// The single cycle formed by concatenating the cycles of `perm`, longest
/// first, and the number of points whose image changed.
pub fn transitivize(perm: &Permutation) -> (Permutation, usize) {
    let decomposition = perm.cycles();
    let seq: Vec<usize> = decomposition.cycles().iter().flatten().copied().collect();
    let m = seq.len();
    let mut images = vec![0usize; m];
    for (i, &y) in seq.iter().enumerate() {
        images[y] = seq[(i + 1) % m];
    }
    let mismatches = (0..m).filter(|&y| images[y] != perm.apply(y)).count();
    (
        Permutation::new(images).expect("concatenated cycles form a bijection"),
        mismatches,
    )
}

/// Result of splitting every cycle into cycles of one length.
#[derive(Clone, Debug, PartialEq)]
pub struct Periodized {
    /// Retained original indices, ascending.
    pub kept: Vec<usize>,
    /// The permutation on positions in `kept`.
    pub perm: Permutation,
    pub trimmed: usize,
}

/// Drops the last `n_i mod n` points of each cycle and splits the rest into
/// consecutive `n`-cycles.
pub fn periodize(perm: &Permutation, n: usize) -> Result<Periodized> {
    if n == 0 {
        return Err(invalid("period n must be positive"));
    }
    let decomposition: CycleDecomposition = perm.cycles();
    let mut keep = vec![false; perm.len()];
    let mut chunks: Vec<&[usize]> = Vec::new();
    let mut trimmed = 0;
    for cycle in decomposition.cycles() {
        let r = cycle.len() % n;
        trimmed += r;
        let body = &cycle[..cycle.len() - r];
        for &y in body {
            keep[y] = true;
        }
        chunks.extend(body.chunks(n));
    }
    let kept: Vec<usize> = (0..perm.len()).filter(|&y| keep[y]).collect();
    let mut position = vec![usize::MAX; perm.len()];
    for (i, &y) in kept.iter().enumerate() {
        position[y] = i;
    }
    let mut images = vec![0usize; kept.len()];
    for chunk in chunks {
        for (i, &y) in chunk.iter().enumerate() {
            images[position[y]] = position[chunk[(i + 1) % n]];
        }
    }
    Ok(Periodized {
        kept,
        perm: Permutation::new(images)?,
        trimmed,
    })
}

/// The subsystem on the retained points of [`periodize`].
pub fn periodize_system(system: &FiniteSystem, n: usize) -> Result<(FiniteSystem, Periodized)> {
    let p = periodize(system.perm(), n)?;
    if p.kept.is_empty() {
        return Err(Error::Construction(format!("no cycle has length at least {n}")));
    }
    let embedding = match system.embedding() {
        Embedding::Abstract => Embedding::Abstract,
        Embedding::Circle(c) => Embedding::Circle(p.kept.iter().map(|&y| c[y]).collect()),
        Embedding::Interval(c) => Embedding::Interval(p.kept.iter().map(|&y| c[y]).collect()),
        Embedding::Symbolic(w) => Embedding::Symbolic(Words::new(
            w.alphabet(),
            w.radius(),
            p.kept.iter().flat_map(|&y| w.word(y).to_vec()).collect(),
        )?),
    };
    Ok((FiniteSystem::new(p.perm.clone(), embedding)?, p))
}

/// Fraction of points `y` with `ρ(T y, τ y) > epsilon`.
pub fn approx_error(system: &FiniteSystem, map: &MapSpec, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon = {epsilon} must be positive")));
    }
    let m = system.size();
    let perm = system.perm();
    let mut bad = 0usize;
    match system.embedding() {
        Embedding::Abstract => {
            return Err(Error::Contract(
                "approximation error needs an embedded system".into(),
            ))
        }
        Embedding::Circle(_) | Embedding::Interval(_) => {
            let (c, metric) = system.real_coordinates().expect("real embedding");
            for y in 0..m {
                let img = map.eval_real(c[y])?;
                if !img.is_finite() {
                    return Err(Error::NonFinite(y));
                }
                if metric.distance(c[perm.apply(y)], img) > epsilon {
                    bad += 1;
                }
            }
        }
        Embedding::Symbolic(w) => {
            for y in 0..m {
                let img = map.eval_word(w.word(y))?;
                if symbolic_distance(w.word(perm.apply(y)), &img) > epsilon {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad as f64 / m as f64)
}

/// Record of an [`approximate_system`] run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildLog {
    pub map: String,
    pub size: usize,
    pub delta: f64,
    pub matched: usize,
    pub matched_fraction: f64,
    /// Cycles of the matched permutation.
    pub b: usize,
    pub transitive: bool,
    pub mismatch_count: usize,
    pub unmatched_fraction: f64,
    pub cycle_fraction: f64,
    /// `(1 - matched_fraction) + mismatch_count/M`, an upper bound on
    /// `approx_error` at every `epsilon >= delta`.
    pub error_bound: f64,
}

/// Matches every point to a grid point near its image and optionally joins
/// the cycles into one.
pub fn approximate_system(
    map: &MapSpec,
    points: &Embedding,
    delta: f64,
    transitive: bool,
) -> Result<(FiniteSystem, BuildLog)> {
    let result = match points {
        Embedding::Abstract => {
            return Err(Error::Contract("matching needs embedded points".into()));
        }
        Embedding::Circle(c) | Embedding::Interval(c) => {
            let metric = if matches!(points, Embedding::Circle(_)) {
                RealMetric::Circle
            } else {
                RealMetric::Interval
            };
            let images = c.iter().map(|&x| map.eval_real(x)).collect::<Result<Vec<_>>>()?;
            match_permutation(c, &images, delta, metric)?
        }
        Embedding::Symbolic(w) => {
            let images = (0..w.len())
                .map(|y| map.eval_word(w.word(y)))
                .collect::<Result<Vec<_>>>()?;
            match_symbolic(w, &images, delta)?
        }
    };
    let m = result.perm.len();
    let b = result.perm.cycles().count();
    let (perm, mismatch_count) = if transitive {
        transitivize(&result.perm)
    } else {
        (result.perm.clone(), 0)
    };
    let system = FiniteSystem::new(perm, points.clone())?;
    let unmatched_fraction = 1.0 - result.matched_fraction;
    let log = BuildLog {
        map: map.name().to_string(),
        size: m,
        delta,
        matched: result.matched,
        matched_fraction: result.matched_fraction,
        b,
        transitive,
        mismatch_count,
        unmatched_fraction,
        cycle_fraction: b as f64 / m as f64,
        error_bound: unmatched_fraction + mismatch_count as f64 / m as f64,
    };
    Ok((system, log))
}
