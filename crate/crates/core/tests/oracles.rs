use std::collections::HashMap;

use birkhoff::ergodic::fluctuation_count;
use birkhoff::systems::{convergent, de_bruijn, windows_distinct};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of distinct cyclic `(m, n)` de Bruijn sequences, by testing every
/// string of length `mⁿ` and dividing out the rotations.
fn count_de_bruijn(m: usize, n: usize) -> usize {
    let len = m.pow(n as u32);
    let mut valid = 0;
    let mut s = vec![0u8; len];
    for code in 0..m.pow(len as u32) {
        let mut c = code;
        for slot in s.iter_mut() {
            *slot = (c % m) as u8;
            c /= m;
        }
        if windows_distinct(&s, m, n) {
            valid += 1;
        }
    }
    valid / len
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

#[test]
fn de_bruijn_counts_match_formula() {
    for (m, n) in [(2usize, 1usize), (2, 2), (2, 3), (2, 4), (3, 1)] {
        let expected = factorial(m).pow(m.pow(n as u32 - 1) as u32) / m.pow(n as u32);
        assert_eq!(count_de_bruijn(m, n), expected, "(m, n) = ({m}, {n})");
    }
    assert_eq!(count_de_bruijn(2, 3), 2);
    assert_eq!(count_de_bruijn(2, 4), 16);
}

#[test]
fn de_bruijn_is_lexicographically_least() {
    // among all valid strings, as rotations are equivalent, the generated one
    // is the smallest string overall
    for (m, n) in [(2usize, 3usize), (2, 4), (3, 2)] {
        let len = m.pow(n as u32);
        let mut best: Option<Vec<u8>> = None;
        for code in 0..m.pow(len as u32) {
            let mut c = code;
            let s: Vec<u8> = (0..len)
                .map(|_| {
                    let v = (c % m) as u8;
                    c /= m;
                    v
                })
                .collect();
            if windows_distinct(&s, m, n) && best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
        }
        assert_eq!(de_bruijn(m, n).unwrap().symbols(), &best.unwrap()[..]);
    }
}

/// Denominators where `min_p |qα − p|` reaches a new record are exactly the
/// convergent denominators.
fn best_approximation(alpha: f64, m_max: usize) -> (u64, u64) {
    let mut record = f64::INFINITY;
    let mut best = (0, 1);
    for q in 1..=m_max {
        let p = (q as f64 * alpha).round();
        let err = (q as f64 * alpha - p).abs();
        if err < record {
            record = err;
            best = (p as u64, q as u64);
        }
    }
    best
}

#[test]
fn convergent_matches_best_approximation_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let alpha: f64 = rng.gen_range(0.001..0.999);
        let m_max = rng.gen_range(2..3000);
        let (n, m) = convergent(alpha, m_max).unwrap();
        // an equal-error tie at q = 1 only arises for α = 1/2
        let oracle = best_approximation(alpha, m_max);
        assert_eq!((n, m), oracle, "alpha = {alpha}, M_max = {m_max}");
        assert!((alpha - n as f64 / m as f64).abs() < 1.0 / (m * m) as f64);
    }
}

fn brute_fluct(s: &[f64], eps: f64) -> usize {
    fn go(s: &[f64], eps: f64, from: usize, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&v) = memo.get(&from) {
            return v;
        }
        let mut best = 0;
        for i in from..s.len() {
            for j in i + 1..s.len() {
                if (s[i] - s[j]).abs() >= eps {
                    best = best.max(1 + go(s, eps, j + 1, memo));
                }
            }
        }
        memo.insert(from, best);
        best
    }
    go(s, eps, 0, &mut HashMap::new())
}

#[test]
fn fluctuation_count_matches_brute_force_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let len = rng.gen_range(0..=20);
        let s: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = rng.gen_range(0.05..1.5);
        assert_eq!(fluctuation_count(&s, eps), brute_fluct(&s, eps), "{s:?} {eps}");
    }
}
