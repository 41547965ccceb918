//! Built-in finite dynamical systems and observables: grid rotations,
//! Bernoulli block shifts and their de Bruijn cycles, and the delta, block
//! and coordinate observables on the rotation grid.

use num_integer::Integer;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::{FunctionSpec, TestFunction};
use crate::scalar::Scalar;
use crate::space::{Embedding, FiniteSystem, Observable, Permutation, Words};

/// Largest number of symbols a generated sequence or word table may hold.
pub const SYMBOL_BUDGET: usize = 1 << 27;

/// The grid `{k/M}` on the circle with `k -> k + N (mod M)`.
pub fn rotation_system(m: usize, n: usize) -> Result<FiniteSystem> {
    if m == 0 {
        return Err(invalid("rotation needs M >= 1"));
    }
    if n >= m {
        return Err(invalid(format!("rotation step N = {n} must be below M = {m}")));
    }
    let coords = (0..m).map(|k| k as f64 / m as f64).collect();
    FiniteSystem::new(Permutation::rotation(m, n), Embedding::Circle(coords))
}

/// Rotation by the convergent of `alpha` with the largest denominator not
/// above `m_max`.
pub fn rotation_irrational(alpha: f64, m_max: usize) -> Result<FiniteSystem> {
    let (n, m) = convergent(alpha, m_max)?;
    rotation_system(m as usize, n as usize)
}

/// Exact `(numerator, denominator)` of a float in `(0,1)`, if the
/// denominator fits.
fn float_fraction(alpha: f64) -> Option<(u128, u128)> {
    let bits = alpha.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    if e >= 0 {
        return None;
    }
    let twos = mant.trailing_zeros() as i32;
    let (mant, e) = ((mant >> twos) as u128, e + twos);
    if -e > 126 {
        return None;
    }
    Some((mant, 1u128 << (-e)))
}

/// The continued-fraction convergent `N/M` of `alpha` with the largest
/// `M <= m_max`. The expansion is taken of the exact binary value of
/// `alpha`.
pub fn convergent(alpha: f64, m_max: usize) -> Result<(u64, u64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0,1)")));
    }
    if m_max < 2 {
        return Err(invalid("M_max must be at least 2"));
    }
    let limit = m_max as u128;
    let Some((mut num, mut den)) = float_fraction(alpha) else {
        // alpha < 2^-73: the first partial quotient already exceeds any M_max
        return Ok((0, 1));
    };
    // h/k convergents, seeded with h_{-1}/k_{-1} = 1/0 and h_0/k_0 = 0/1
    let (mut h_prev, mut k_prev) = (1u128, 0u128);
    let (mut h, mut k) = (0u128, 1u128);
    // alpha = num/den < 1, so a_0 = 0; continue with den/num
    std::mem::swap(&mut num, &mut den);
    while den != 0 {
        let a = num / den;
        let r = num % den;
        let Some(k_next) = a.checked_mul(k).and_then(|v| v.checked_add(k_prev)) else {
            break;
        };
        if k_next > limit {
            break;
        }
        let h_next = a * h + h_prev;
        (h_prev, k_prev, h, k) = (h, k, h_next, k_next);
        num = den;
        den = r;
    }
    debug_assert_eq!(h.gcd(&k), 1);
    Ok((h as u64, k as u64))
}

/// A cyclic sequence in which every length-`n` word over `m` symbols
/// appears exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeBruijnSequence {
    alphabet: usize,
    order: usize,
    symbols: Vec<u8>,
}

impl DeBruijnSequence {
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The cyclic window `(s_i, s_{i⊕1}, .., s_{i⊕(n-1)})`.
    pub fn window(&self, i: usize) -> Vec<u8> {
        let l = self.len();
        (0..self.order).map(|p| self.symbols[(i + p) % l]).collect()
    }
}

/// Checks that all cyclic windows of length `n` in `symbols` are distinct.
pub fn windows_distinct(symbols: &[u8], alphabet: usize, n: usize) -> bool {
    let l = symbols.len();
    if l == 0 || alphabet.checked_pow(n as u32) != Some(l) {
        return false;
    }
    let mut seen = vec![false; l];
    let mut code = 0usize;
    let top = l / alphabet;
    // code = Σ_p s_{i+p} m^p, rolled forward one position at a time
    for p in (0..n).rev() {
        code = code * alphabet + symbols[p % l] as usize;
    }
    for i in 0..l {
        if std::mem::replace(&mut seen[code], true) {
            return false;
        }
        code = code / alphabet + symbols[(i + n) % l] as usize * top;
    }
    true
}

/// The lexicographically least `(m, n)` de Bruijn sequence, by
/// concatenating the Lyndon words whose length divides `n` in
/// lexicographic order.
pub fn de_bruijn(m: usize, n: usize) -> Result<DeBruijnSequence> {
    if !(2..=256).contains(&m) {
        return Err(invalid(format!("alphabet size {m} not in 2..=256")));
    }
    if n == 0 {
        return Err(invalid("de Bruijn order must be positive"));
    }
    let len = m
        .checked_pow(n as u32)
        .filter(|&l| l <= SYMBOL_BUDGET)
        .ok_or_else(|| Error::Resource(format!("{m}^{n} symbols exceed the budget")))?;
    let top = (m - 1) as u8;
    let mut symbols = Vec::with_capacity(len);
    let mut word: Vec<u8> = vec![0];
    loop {
        if n.is_multiple_of(word.len()) {
            symbols.extend_from_slice(&word);
        }
        let period = word.len();
        while word.len() < n {
            word.push(word[word.len() - period]);
        }
        while word.last() == Some(&top) {
            word.pop();
        }
        match word.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    debug_assert_eq!(symbols.len(), len);
    Ok(DeBruijnSequence {
        alphabet: m,
        order: n,
        symbols,
    })
}

/// Integer code of a window: base `m`, position `-N` least significant.
pub fn encode_word(word: &[u8], alphabet: usize) -> usize {
    word.iter()
        .rev()
        .fold(0usize, |acc, &s| acc * alphabet + s as usize)
}

pub fn decode_word(mut code: usize, alphabet: usize, width: usize) -> Vec<u8> {
    (0..width)
        .map(|_| {
            let s = (code % alphabet) as u8;
            code /= alphabet;
            s
        })
        .collect()
}

fn all_words(m: usize, radius: usize) -> Result<(usize, Words)> {
    let width = 2 * radius + 1;
    let size = m
        .checked_pow(width as u32)
        .filter(|&s| s.checked_mul(width).is_some_and(|b| b <= SYMBOL_BUDGET))
        .ok_or_else(|| Error::Resource(format!("{m}^{width} windows exceed the budget")))?;
    let mut symbols = Vec::with_capacity(size * width);
    for code in 0..size {
        symbols.extend(decode_word(code, m, width));
    }
    Ok((size, Words::new(m, radius, symbols)?))
}

/// All windows `Σ_m^{-N..N}` with the cyclic left shift
/// `S(y)(j) = y(j+1 mod 2N+1)`. Point `i` is the window with code `i`.
pub fn bernoulli_block_system(m: usize, radius: usize) -> Result<FiniteSystem> {
    let (size, words) = all_words(m, radius)?;
    let width = words.width();
    let images = (0..size)
        .map(|code| {
            let w = words.word(code);
            let shifted: Vec<u8> = (0..width).map(|p| w[(p + 1) % width]).collect();
            encode_word(&shifted, m)
        })
        .collect();
    FiniteSystem::new(Permutation::new(images)?, Embedding::Symbolic(words))
}

/// The de Bruijn cycle on `Σ_m^{-N..N}`: the window at position `i` of the
/// lexicographically least `(m, 2N+1)` de Bruijn sequence is sent to the
/// window at position `i⊕1`. A single cycle through all `m^{2N+1}` points.
pub fn bernoulli_debruijn_system(m: usize, radius: usize) -> Result<FiniteSystem> {
    let (size, words) = all_words(m, radius)?;
    let width = words.width();
    let seq = de_bruijn(m, width)?;
    let s = seq.symbols();
    let top = size / m;
    let mut images = vec![0usize; size];
    let mut code = encode_word(&seq.window(0), m);
    for i in 0..size {
        let next = code / m + s[(i + width) % size] as usize * top;
        images[code] = next;
        code = next;
    }
    FiniteSystem::new(Permutation::new(images)?, Embedding::Symbolic(words))
}

/// Fraction of points `y` with `T(y)_j = y_{j+1}` for every `-N <= j < N`.
pub fn shift_agreement(system: &FiniteSystem) -> Result<f64> {
    let words = system
        .words()
        .ok_or_else(|| Error::Contract("shift agreement needs a symbolic system".into()))?;
    let width = words.width();
    let agree = (0..system.size())
        .filter(|&y| {
            let w = words.word(y);
            let t = words.word(system.perm().apply(y));
            (0..width - 1).all(|p| t[p] == w[p + 1])
        })
        .count();
    Ok(agree as f64 / system.size() as f64)
}

/// Registered observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ObservableSpec {
    /// `F(k) = M δ_{0k}`.
    Delta,
    /// Indicator of the even-numbered length-`K` blocks.
    Block {
        #[serde(rename = "K")]
        k: usize,
    },
    /// `F(k) = k/M`.
    Coordinate,
    /// Indicator of windows with `y(j) = a` for each `(j, a)` in the pattern.
    Cylinder { pattern: Vec<(i64, u8)> },
    /// A registered function sampled at the point coordinates.
    Function { function: FunctionSpec },
}

/// Builds a registered observable on `system`.
pub fn observable<S: Scalar>(spec: &ObservableSpec, system: &FiniteSystem) -> Result<Observable<S>> {
    let m = system.size();
    let values: Vec<S> = match spec {
        ObservableSpec::Delta => (0..m)
            .map(|k| if k == 0 { S::from_count(m) } else { S::zero() })
            .collect(),
        ObservableSpec::Block { k: block } => {
            let block = *block;
            if block == 0 || block >= m {
                return Err(invalid(format!("block length K = {block} must satisfy 0 < K < M = {m}")));
            }
            if 4 * block > m {
                log::warn!("block length K = {block} exceeds M/4 for M = {m}");
            }
            let r = m / block;
            (0..m)
                .map(|k| {
                    let idx = k / block;
                    if idx < r && idx % 2 == 0 {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect()
        }
        ObservableSpec::Coordinate => (0..m).map(|k| S::from_ratio(k as i64, m as i64)).collect(),
        ObservableSpec::Cylinder { pattern } => {
            let words = system
                .words()
                .ok_or_else(|| Error::Contract("cylinder observables need a symbolic system".into()))?;
            let r = words.radius() as i64;
            if let Some(&(j, a)) = pattern
                .iter()
                .find(|&&(j, a)| j.abs() > r || a as usize >= words.alphabet())
            {
                return Err(invalid(format!("pattern entry ({j}, {a}) is outside the window")));
            }
            (0..m)
                .map(|y| {
                    if pattern.iter().all(|&(j, a)| words.symbol(y, j) == a) {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect()
        }
        ObservableSpec::Function { function } => {
            let f = TestFunction::registered(function)?;
            let (coords, _) = system
                .real_coordinates()
                .ok_or_else(|| Error::Contract("function observables need real coordinates".into()))?;
            coords
                .iter()
                .enumerate()
                .map(|(i, &x)| S::from_real(f.eval(x)).ok_or(Error::NonFinite(i)))
                .collect::<Result<_>>()?
        }
    };
    Observable::new(values)
}

/// The limiting mean profile of the coordinate observable on the grid
/// rotation by one step, at relative window `a`:
/// `t + a/2` for `t <= 1-a`, `t + a/2 - 1 + (1-t)/a` beyond.
pub fn psi<T: Float>(a: T, t: T) -> Result<T> {
    if !(a > T::zero() && a <= T::one()) {
        return Err(invalid("psi needs 0 < a <= 1"));
    }
    if !(t >= T::zero() && t <= T::one()) {
        return Err(invalid("psi needs 0 <= t <= 1"));
    }
    let two = T::one() + T::one();
    let base = t + a / two;
    Ok(if t <= T::one() - a {
        base
    } else {
        base - T::one() + (T::one() - t) / a
    })
}

/// Registered systems, as named in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SystemSpec {
    Rotation {
        #[serde(rename = "M")]
        m: usize,
        #[serde(rename = "N")]
        n: usize,
    },
    RotationIrrational {
        alpha: f64,
        #[serde(rename = "M_max")]
        m_max: usize,
    },
    BernoulliBlock {
        m: usize,
        #[serde(rename = "N")]
        n: usize,
    },
    BernoulliDebruijn {
        m: usize,
        #[serde(rename = "N")]
        n: usize,
    },
}

impl SystemSpec {
    pub fn build(&self) -> Result<FiniteSystem> {
        match *self {
            SystemSpec::Rotation { m, n } => rotation_system(m, n),
            SystemSpec::RotationIrrational { alpha, m_max } => rotation_irrational(alpha, m_max),
            SystemSpec::BernoulliBlock { m, n } => bernoulli_block_system(m, n),
            SystemSpec::BernoulliDebruijn { m, n } => bernoulli_debruijn_system(m, n),
        }
    }
}
