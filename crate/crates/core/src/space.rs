//! Finite spaces with counting measure, permutations and their cycle
//! structure, and observables on them.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{sum, Accumulator, Scalar};

/// A bijection of `{0, .., M-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for (i, &img) in images.iter().enumerate() {
            if img >= m {
                return Err(Error::InvalidPermutation(format!(
                    "image {img} of {i} is outside 0..{m}"
                )));
            }
            if std::mem::replace(&mut seen[img], true) {
                return Err(Error::InvalidPermutation(format!(
                    "duplicate image {img} (at index {i})"
                )));
            }
        }
        Ok(Permutation { images })
    }

    pub fn identity(m: usize) -> Self {
        Permutation {
            images: (0..m).collect(),
        }
    }

    /// `k -> k + shift (mod m)`.
    pub fn rotation(m: usize, shift: usize) -> Self {
        assert!(m > 0, "rotation on an empty set");
        let shift = shift % m;
        Permutation {
            images: (0..m).map(|k| (k + shift) % m).collect(),
        }
    }

    /// Builds the permutation whose cycles are given; each cycle maps an
    /// element to its successor in the list.
    pub fn from_cycles(m: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images = vec![usize::MAX; m];
        for cycle in cycles {
            for (j, &y) in cycle.iter().enumerate() {
                if y >= m {
                    return Err(Error::IndexOutOfRange { index: y, size: m });
                }
                if images[y] != usize::MAX {
                    return Err(Error::InvalidPermutation(format!(
                        "{y} appears in two cycles"
                    )));
                }
                images[y] = cycle[(j + 1) % cycle.len()];
            }
        }
        if let Some(missing) = images.iter().position(|&v| v == usize::MAX) {
            return Err(Error::InvalidPermutation(format!(
                "{missing} is not covered by any cycle"
            )));
        }
        Permutation::new(images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &img) in self.images.iter().enumerate() {
            inv[img] = i;
        }
        Permutation { images: inv }
    }

    /// `self` after `first`: `x -> self(first(x))`.
    pub fn compose(&self, first: &Permutation) -> Result<Permutation> {
        if self.len() != first.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: first.len(),
            });
        }
        Ok(Permutation {
            images: first.images.iter().map(|&y| self.images[y]).collect(),
        })
    }

    /// Size of the orbit of `x`.
    pub fn period(&self, x: usize) -> Result<usize> {
        self.check_index(x)?;
        let mut p = 1;
        let mut y = self.images[x];
        while y != x {
            y = self.images[y];
            p += 1;
        }
        Ok(p)
    }

    /// The orbit of `x` in iteration order, starting at `x`.
    pub fn orbit(&self, x: usize) -> Result<Vec<usize>> {
        self.check_index(x)?;
        let mut orbit = vec![x];
        let mut y = self.images[x];
        while y != x {
            orbit.push(y);
            y = self.images[y];
        }
        Ok(orbit)
    }

    /// True when the permutation is a single cycle through all points.
    pub fn is_transitive(&self) -> bool {
        !self.is_empty() && self.period(0).map(|p| p == self.len()).unwrap_or(false)
    }

    pub fn cycles(&self) -> CycleDecomposition {
        CycleDecomposition::of(self)
    }

    pub(crate) fn check_index(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: x,
                size: self.len(),
            })
        }
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let images = Vec::<usize>::deserialize(d)?;
        Permutation::new(images).map_err(serde::de::Error::custom)
    }
}

/// Disjoint-cycle form of a permutation.
///
/// Cycles are sorted by non-increasing length, ties broken by their smallest
/// element; each cycle starts at its smallest element and lists the orbit in
/// iteration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleDecomposition {
    cycles: Vec<Vec<usize>>,
    length_counts: BTreeMap<usize, usize>,
}

impl CycleDecomposition {
    pub fn of(perm: &Permutation) -> Self {
        let m = perm.len();
        let mut visited = vec![false; m];
        let mut cycles = Vec::new();
        // Scanning in index order makes the first element of each cycle its
        // smallest one.
        for start in 0..m {
            if visited[start] {
                continue;
            }
            let mut cycle = vec![start];
            visited[start] = true;
            let mut y = perm.apply(start);
            while y != start {
                visited[y] = true;
                cycle.push(y);
                y = perm.apply(y);
            }
            cycles.push(cycle);
        }
        cycles.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        let mut length_counts = BTreeMap::new();
        for c in &cycles {
            *length_counts.entry(c.len()).or_insert(0) += 1;
        }
        CycleDecomposition {
            cycles,
            length_counts,
        }
    }

    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    /// `n -> a_n`, the number of cycles of length `n`.
    pub fn length_counts(&self) -> &BTreeMap<usize, usize> {
        &self.length_counts
    }

    /// Number of cycles `b`.
    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.cycles.iter().map(Vec::len)
    }

    pub fn size(&self) -> usize {
        self.lengths().sum()
    }
}

/// Validated permutation: `cycle_decompose` over raw images.
pub fn cycle_decompose(images: &[usize]) -> Result<CycleDecomposition> {
    Ok(Permutation::new(images.to_vec())?.cycles())
}

/// Which metric the ambient coordinates carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Circle,
    EuclideanInterval,
    Symbolic,
    Abstract,
}

/// Distance on the circle `[0,1)` with addition mod 1.
#[inline]
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Metric for real-coordinate spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealMetric {
    Circle,
    Interval,
}

impl RealMetric {
    #[inline]
    pub fn distance(self, x: f64, y: f64) -> f64 {
        match self {
            RealMetric::Circle => circle_distance(x, y),
            RealMetric::Interval => (x - y).abs(),
        }
    }

    pub fn kind(self) -> MetricKind {
        match self {
            RealMetric::Circle => MetricKind::Circle,
            RealMetric::Interval => MetricKind::EuclideanInterval,
        }
    }
}

/// Finite windows `y(-N..=N)` over the alphabet `{0..m-1}`.
///
/// Window positions are stored in order `-N, .., N`; a window's integer code
/// is base-`m` little-endian over the same order, so position `-N` is the
/// least significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Words {
    alphabet: usize,
    radius: usize,
    symbols: Vec<u8>,
}

impl Words {
    pub fn new(alphabet: usize, radius: usize, symbols: Vec<u8>) -> Result<Self> {
        if !(2..=256).contains(&alphabet) {
            return Err(invalid(format!("alphabet size {alphabet} not in 2..=256")));
        }
        let width = 2 * radius + 1;
        if !symbols.len().is_multiple_of(width) {
            return Err(Error::LengthMismatch {
                expected: width * (symbols.len() / width + 1),
                found: symbols.len(),
            });
        }
        if let Some(bad) = symbols.iter().position(|&s| s as usize >= alphabet) {
            return Err(invalid(format!("symbol at flat position {bad} exceeds alphabet")));
        }
        Ok(Words {
            alphabet,
            radius,
            symbols,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// `N`, so windows have length `2N+1`.
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn len(&self) -> usize {
        self.symbols.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn word(&self, i: usize) -> &[u8] {
        let w = self.width();
        &self.symbols[i * w..(i + 1) * w]
    }

    /// Symbol at coordinate `j` in `-N..=N` of word `i`.
    pub fn symbol(&self, i: usize, j: i64) -> u8 {
        self.word(i)[(j + self.radius as i64) as usize]
    }
}

/// Product-topology distance `2^{-min |j|}` over differing coordinates,
/// with windows read as zero-padded bi-infinite sequences.
pub fn symbolic_distance(a: &[u8], b: &[u8]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let radius = (a.len() / 2) as i64;
    let mut best: Option<i64> = None;
    for (p, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            let j = (p as i64 - radius).abs();
            best = Some(best.map_or(j, |b| b.min(j)));
        }
    }
    match best {
        None => 0.0,
        Some(j) => 0.5f64.powi(j as i32),
    }
}

/// Ambient coordinates of the points of a finite system.
#[derive(Clone, Debug, PartialEq)]
pub enum Embedding {
    Abstract,
    Circle(Vec<f64>),
    Interval(Vec<f64>),
    Symbolic(Words),
}

impl Embedding {
    pub fn kind(&self) -> MetricKind {
        match self {
            Embedding::Abstract => MetricKind::Abstract,
            Embedding::Circle(_) => MetricKind::Circle,
            Embedding::Interval(_) => MetricKind::EuclideanInterval,
            Embedding::Symbolic(_) => MetricKind::Symbolic,
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Embedding::Abstract => None,
            Embedding::Circle(v) | Embedding::Interval(v) => Some(v.len()),
            Embedding::Symbolic(w) => Some(w.len()),
        }
    }

    pub fn real(coords: Vec<f64>, metric: RealMetric) -> Self {
        match metric {
            RealMetric::Circle => Embedding::Circle(coords),
            RealMetric::Interval => Embedding::Interval(coords),
        }
    }
}

/// A finite point set `Y` with a permutation `T` and optional coordinates
/// in the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSystem {
    perm: Permutation,
    embedding: Embedding,
}

impl FiniteSystem {
    pub fn new(perm: Permutation, embedding: Embedding) -> Result<Self> {
        if perm.is_empty() {
            return Err(invalid("a finite system needs at least one point"));
        }
        if let Some(n) = embedding.len() {
            if n != perm.len() {
                return Err(Error::LengthMismatch {
                    expected: perm.len(),
                    found: n,
                });
            }
        }
        match &embedding {
            Embedding::Circle(c) => {
                if let Some(i) = c.iter().position(|x| !(0.0..1.0).contains(x)) {
                    return Err(invalid(format!(
                        "circle coordinate {} at index {i} is outside [0,1)",
                        c[i]
                    )));
                }
            }
            Embedding::Interval(c) => {
                if let Some(i) = c.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(i));
                }
            }
            _ => {}
        }
        Ok(FiniteSystem { perm, embedding })
    }

    pub fn abstract_system(perm: Permutation) -> Result<Self> {
        FiniteSystem::new(perm, Embedding::Abstract)
    }

    /// `M = |Y|`.
    pub fn size(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn metric_kind(&self) -> MetricKind {
        self.embedding.kind()
    }

    /// Real coordinates and their metric, for circle and interval systems.
    pub fn real_coordinates(&self) -> Option<(&[f64], RealMetric)> {
        match &self.embedding {
            Embedding::Circle(c) => Some((c, RealMetric::Circle)),
            Embedding::Interval(c) => Some((c, RealMetric::Interval)),
            _ => None,
        }
    }

    pub fn words(&self) -> Option<&Words> {
        match &self.embedding {
            Embedding::Symbolic(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_transitive(&self) -> bool {
        self.perm.is_transitive()
    }

    pub fn with_perm(&self, perm: Permutation) -> Result<Self> {
        FiniteSystem::new(perm, self.embedding.clone())
    }
}

/// A real-valued function on the points of a system.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable<S> {
    values: Vec<S>,
}

impl<S: Scalar> Observable<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Observable { values })
    }

    /// Checks the length against `system`.
    pub fn for_system(system: &FiniteSystem, values: Vec<S>) -> Result<Self> {
        if values.len() != system.size() {
            return Err(Error::LengthMismatch {
                expected: system.size(),
                found: values.len(),
            });
        }
        Observable::new(values)
    }

    pub fn constant(m: usize, c: S) -> Self {
        Observable { values: vec![c; m] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize) -> S {
        self.values[i]
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Result<Observable<S>> {
        Observable::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// `|F|`.
    pub fn abs(&self) -> Observable<S> {
        Observable {
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// `F ∘ T`.
    pub fn compose(&self, perm: &Permutation) -> Result<Observable<S>> {
        if perm.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: perm.len(),
            });
        }
        Ok(Observable {
            values: perm.images().iter().map(|&j| self.values[j]).collect(),
        })
    }

    pub fn max_abs(&self) -> S {
        self.values
            .iter()
            .fold(S::zero(), |acc, v| acc.max_of(v.abs()))
    }

    /// `Av(F) = (1/M) Σ F(y)`.
    pub fn global_average(&self) -> S {
        if self.values.is_empty() {
            return S::zero();
        }
        sum(&self.values) / S::from_count(self.values.len())
    }
}

/// `Av(F)`.
pub fn global_average<S: Scalar>(f: &Observable<S>) -> S {
    f.global_average()
}

/// `Av_x(F)`: the mean of `F` over the orbit of `x`.
pub fn orbit_average<S: Scalar>(system: &FiniteSystem, f: &Observable<S>, x: usize) -> Result<S> {
    if f.len() != system.size() {
        return Err(Error::LengthMismatch {
            expected: system.size(),
            found: f.len(),
        });
    }
    let orbit = system.perm().orbit(x)?;
    let total = orbit
        .iter()
        .fold(S::Accum::zero(), |acc, &y| acc + S::Accum::of(f.at(y)));
    Ok(total.value() / S::from_count(orbit.len()))
}

/// Formats a real with 17 significant digits and a period separator.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_real(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{what} `{field}`: {e}")))
}

fn parse_index(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|e| Error::Parse(format!("{what} `{field}`: {e}")))
}

/// Writes a system as CSV.
///
/// Columns: `index`, `perm_image`, `value` (empty without an observable),
/// then the coordinates: `coordinate(circle)` or `coordinate(interval)` for
/// real systems, `symbol(m=<m>,j=<j>)` for each window position `j` of a
/// symbolic system, none for abstract systems.
pub fn write_system_csv<W: Write>(
    out: W,
    system: &FiniteSystem,
    observable: Option<&Observable<f64>>,
) -> Result<()> {
    if let Some(f) = observable {
        if f.len() != system.size() {
            return Err(Error::LengthMismatch {
                expected: system.size(),
                found: f.len(),
            });
        }
    }
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut header = vec!["index".to_string(), "perm_image".into(), "value".into()];
    match system.embedding() {
        Embedding::Abstract => {}
        Embedding::Circle(_) => header.push("coordinate(circle)".into()),
        Embedding::Interval(_) => header.push("coordinate(interval)".into()),
        Embedding::Symbolic(words) => {
            let r = words.radius() as i64;
            for j in -r..=r {
                header.push(format!("symbol(m={},j={j})", words.alphabet()));
            }
        }
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..system.size() {
        row.clear();
        row.push(i.to_string());
        row.push(system.perm().apply(i).to_string());
        row.push(observable.map(|f| format_real(f.at(i))).unwrap_or_default());
        match system.embedding() {
            Embedding::Abstract => {}
            Embedding::Circle(c) | Embedding::Interval(c) => row.push(format_real(c[i])),
            Embedding::Symbolic(words) => {
                row.extend(words.word(i).iter().map(|s| s.to_string()));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a system written by [`write_system_csv`]. Rows may appear in any
/// order; every index must appear once.
/// index, image, optional value, extra columns
type CsvRow = (usize, Option<f64>, Vec<String>);

pub fn read_system_csv<R: Read>(input: R) -> Result<(FiniteSystem, Option<Observable<f64>>)> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3
        || &header[0] != "index"
        || &header[1] != "perm_image"
        || &header[2] != "value"
    {
        return Err(Error::Parse(
            "expected header index,perm_image,value,...".into(),
        ));
    }
    enum Coords {
        None,
        Real(RealMetric),
        Symbolic { alphabet: usize, width: usize },
    }
    let coords = match header.len() {
        3 => Coords::None,
        _ if &header[3] == "coordinate(circle)" && header.len() == 4 => {
            Coords::Real(RealMetric::Circle)
        }
        _ if &header[3] == "coordinate(interval)" && header.len() == 4 => {
            Coords::Real(RealMetric::Interval)
        }
        n => {
            let first = &header[3];
            let alphabet = first
                .strip_prefix("symbol(m=")
                .and_then(|s| s.split(',').next())
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("unknown coordinate column `{first}`")))?;
            let width = n - 3;
            if width % 2 == 0 {
                return Err(Error::Parse("symbolic windows need odd width".into()));
            }
            Coords::Symbolic { alphabet, width }
        }
    };

    let mut rows: Vec<Option<CsvRow>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let idx = parse_index(&rec[0], "index")?;
        let img = parse_index(&rec[1], "perm_image")?;
        let value = if rec[2].trim().is_empty() {
            None
        } else {
            Some(parse_real(&rec[2], "value")?)
        };
        if idx >= rows.len() {
            rows.resize(idx + 1, None);
        }
        if rows[idx].is_some() {
            return Err(Error::Parse(format!("index {idx} appears twice")));
        }
        let rest = rec.iter().skip(3).map(str::to_string).collect();
        rows[idx] = Some((img, value, rest));
    }
    let m = rows.len();
    let mut images = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    let mut reals = Vec::new();
    let mut symbols = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let (img, value, rest) = row.ok_or_else(|| Error::Parse(format!("index {i} missing")))?;
        images.push(img);
        values.push(value);
        match coords {
            Coords::None => {}
            Coords::Real(_) => reals.push(parse_real(&rest[0], "coordinate")?),
            Coords::Symbolic { .. } => {
                for s in &rest {
                    let v = parse_index(s, "symbol")?;
                    symbols.push(u8::try_from(v).map_err(|_| Error::Parse(format!("symbol {v}")))?);
                }
            }
        }
    }
    let perm = Permutation::new(images)?;
    let embedding = match coords {
        Coords::None => Embedding::Abstract,
        Coords::Real(metric) => Embedding::real(reals, metric),
        Coords::Symbolic { alphabet, width } => {
            Embedding::Symbolic(Words::new(alphabet, width / 2, symbols)?)
        }
    };
    let system = FiniteSystem::new(perm, embedding)?;
    let observable = if values.iter().all(Option::is_some) && m > 0 {
        Some(Observable::new(values.into_iter().map(Option::unwrap).collect())?)
    } else if values.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::Parse("value column is only partially filled".into()));
    };
    Ok((system, observable))
}

/// Writes a bare point list as CSV with columns `index,coordinate`.
pub fn write_points_csv<W: Write>(out: W, points: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "coordinate"])?;
    for (i, &p) in points.iter().enumerate() {
        w.write_record([i.to_string(), format_real(p)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn identity_has_only_fixed_points() {
        let c = Permutation::identity(3).cycles();
        assert_eq!(c.count(), 3);
        assert_eq!(c.length_counts().get(&1), Some(&3));
    }

    #[test]
    fn three_cycle() {
        let c = cycle_decompose(&[1, 2, 0]).unwrap();
        assert_eq!(c.cycles(), &[vec![0, 1, 2]]);
        assert_eq!(c.count(), 1);
    }

    #[test]
    fn two_transpositions() {
        let c = cycle_decompose(&[1, 0, 3, 2]).unwrap();
        assert_eq!(c.cycles(), &[vec![0, 1], vec![2, 3]]);
        assert_eq!(c.length_counts().get(&2), Some(&2));
    }

    #[test]
    fn cycles_sorted_longest_first_then_by_smallest_element() {
        // (0)(1 4)(2 3 5)
        let c = cycle_decompose(&[0, 4, 3, 5, 1, 2]).unwrap();
        assert_eq!(c.cycles(), &[vec![2, 3, 5], vec![1, 4], vec![0]]);
    }

    #[test]
    fn duplicate_image_rejected() {
        assert!(matches!(
            cycle_decompose(&[0, 0, 1]),
            Err(Error::InvalidPermutation(_))
        ));
        assert!(Permutation::new(vec![0, 3]).is_err());
    }

    #[test]
    fn periods() {
        assert_eq!(Permutation::identity(5).period(3).unwrap(), 1);
        assert_eq!(Permutation::rotation(8, 1).period(0).unwrap(), 8);
        let p = Permutation::new(vec![1, 0, 3, 2]).unwrap();
        assert_eq!(p.period(2).unwrap(), 2);
        assert!(p.period(4).is_err());
    }

    #[test]
    fn from_cycles_round_trips() {
        let p = Permutation::new(vec![0, 4, 3, 5, 1, 2]).unwrap();
        let c = p.cycles();
        assert_eq!(Permutation::from_cycles(6, c.cycles()).unwrap(), p);
    }

    #[test]
    fn averages() {
        let m = 8;
        let f = Observable::new((0..m).map(|k| k as f64 / m as f64).collect()).unwrap();
        assert_eq!(global_average(&f), 0.4375);
        assert_eq!(Observable::constant(5, 2.5).global_average(), 2.5);

        let mut delta = vec![0.0; 16];
        delta[0] = 16.0;
        assert_eq!(Observable::new(delta).unwrap().global_average(), 1.0);

        let sys = FiniteSystem::abstract_system(Permutation::new(vec![1, 0, 3, 2]).unwrap()).unwrap();
        let f = Observable::new(vec![0.0, 1.0, 10.0, 20.0]).unwrap();
        assert_eq!(orbit_average(&sys, &f, 0).unwrap(), 0.5);
        assert_eq!(orbit_average(&sys, &f, 3).unwrap(), 15.0);

        let id = FiniteSystem::abstract_system(Permutation::identity(4)).unwrap();
        assert_eq!(orbit_average(&id, &f, 2).unwrap(), 10.0);
    }

    #[test]
    fn transitive_orbit_average_is_exact_with_rationals() {
        let m = 12;
        let sys = FiniteSystem::abstract_system(Permutation::rotation(m, 5)).unwrap();
        let f = Observable::new((0..m as i64).map(|k| Rational64::new(k * k - 7, 3)).collect())
            .unwrap();
        let av = global_average(&f);
        for x in 0..m {
            assert_eq!(orbit_average(&sys, &f, x).unwrap(), av);
        }
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(matches!(Observable::new(vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
    }

    #[test]
    fn circle_metric_wraps() {
        assert!((circle_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert_eq!(circle_distance(0.25, 0.25), 0.0);
        assert!((circle_distance(0.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symbolic_metric() {
        assert_eq!(symbolic_distance(&[0, 1, 0], &[0, 1, 0]), 0.0);
        assert_eq!(symbolic_distance(&[0, 1, 0], &[0, 0, 0]), 1.0);
        assert_eq!(symbolic_distance(&[1, 1, 0], &[0, 1, 0]), 0.5);
    }

    #[test]
    fn circle_coordinates_validated() {
        let r = FiniteSystem::new(Permutation::identity(2), Embedding::Circle(vec![0.0, 1.0]));
        assert!(r.is_err());
        let r = FiniteSystem::new(Permutation::identity(2), Embedding::Circle(vec![0.0]));
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn csv_round_trip_real() {
        let sys = FiniteSystem::new(
            Permutation::rotation(4, 1),
            Embedding::Circle(vec![0.0, 0.25, 0.5, 0.75]),
        )
        .unwrap();
        let f = Observable::new(vec![0.1, 0.2, 0.3, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        write_system_csv(&mut buf, &sys, Some(&f)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,perm_image,value,coordinate(circle)\n"));
        let (back, obs) = read_system_csv(&buf[..]).unwrap();
        assert_eq!(back, sys);
        assert_eq!(obs.unwrap(), f);
    }

    #[test]
    fn csv_round_trip_symbolic_without_values() {
        let words = Words::new(2, 1, vec![0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0]).unwrap();
        let sys = FiniteSystem::new(
            Permutation::new(vec![1, 2, 3, 0]).unwrap(),
            Embedding::Symbolic(words),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_system_csv(&mut buf, &sys, None).unwrap();
        let (back, obs) = read_system_csv(&buf[..]).unwrap();
        assert_eq!(back, sys);
        assert!(obs.is_none());
    }

    #[test]
    fn real_format_has_17_significant_digits() {
        assert_eq!(format_real(0.4375), "4.3750000000000000e-1");
        assert_eq!(format_real(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
