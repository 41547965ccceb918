use birkhoff::ergodic::{
    ergodic_mean_naive, fluctuation_count, mean_of_abs_means, tail_mass, ErgodicMeans,
};
use birkhoff::functions::{FunctionSpec, TestFunction};
use birkhoff::mapping::{match_permutation, periodize, transitivize};
use birkhoff::measure::{
    build_grid, empirical_integral, uniform_grid, weakstar_gap, AllowedSet, DiracMixture, TestSuite,
};
use birkhoff::systems::{bernoulli_block_system, bernoulli_debruijn_system, de_bruijn, psi, rotation_system, windows_distinct};
use birkhoff::{cycle_decompose, orbit_average, FiniteSystem, Observable, Permutation, Rational64, RealMetric};
use num_integer::Integer;
use num_traits::Signed;
use proptest::prelude::*;

fn perm_strategy(max: usize) -> impl Strategy<Value = Vec<usize>> {
    (1..=max).prop_flat_map(|m| Just((0..m).collect::<Vec<_>>()).prop_shuffle())
}

fn system_and_values(max: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    perm_strategy(max).prop_flat_map(|p| {
        let m = p.len();
        (Just(p), prop::collection::vec(-1.0f64..1.0, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn period_is_cycle_length(p in perm_strategy(40)) {
        let perm = Permutation::new(p.clone()).unwrap();
        let d = cycle_decompose(&p).unwrap();
        for c in d.cycles() {
            for &x in c {
                prop_assert_eq!(perm.period(x).unwrap(), c.len());
            }
        }
    }

    #[test]
    fn cycles_partition_points(p in perm_strategy(40)) {
        let d = cycle_decompose(&p).unwrap();
        let mut all: Vec<usize> = d.cycles().iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..p.len()).collect::<Vec<_>>());
        prop_assert_eq!(d.length_counts().values().sum::<usize>(), d.count());
        let lengths: Vec<usize> = d.lengths().collect();
        prop_assert!(lengths.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn transitive_orbit_average_is_exact(m in 1usize..60, step in 0usize..60, nums in prop::collection::vec(-50i64..50, 60)) {
        let step = step % m;
        prop_assume!(step.gcd(&m) == 1 || m == 1);
        let sys = rotation_system(m, step).unwrap();
        let f = Observable::new((0..m).map(|k| Rational64::new(nums[k], 7)).collect()).unwrap();
        let av = f.global_average();
        for x in 0..m {
            prop_assert_eq!(orbit_average(&sys, &f, x).unwrap(), av);
        }
    }

    #[test]
    fn transitive_orbit_average_float(m in 2usize..400, vals in prop::collection::vec(-1.0f64..1.0, 400)) {
        let sys = rotation_system(m, 1).unwrap();
        let f = Observable::new(vals[..m].to_vec()).unwrap();
        let av = f.global_average();
        for x in (0..m).step_by(7) {
            prop_assert!((orbit_average(&sys, &f, x).unwrap() - av).abs() <= 1e-12);
        }
    }

    #[test]
    fn prefix_means_equal_naive((p, v) in system_and_values(30), n in 1usize..100) {
        let sys = FiniteSystem::abstract_system(Permutation::new(p).unwrap()).unwrap();
        let f = Observable::new(v).unwrap();
        let means = ErgodicMeans::new(&sys, &f).unwrap();
        for x in 0..sys.size() {
            let a = means.mean(x, n).unwrap();
            prop_assert!((a - ergodic_mean_naive(&sys, &f, x, n).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn full_cycle_mean_is_global_average(m in 2usize..500, vals in prop::collection::vec(-1.0f64..1.0, 500)) {
        let sys = rotation_system(m, 1).unwrap();
        let f = Observable::new(vals[..m].to_vec()).unwrap();
        let means = ErgodicMeans::new(&sys, &f).unwrap();
        let av = f.global_average();
        for x in 0..m {
            prop_assert!((means.mean(x, m).unwrap() - av).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_of_means_bounded((p, v) in system_and_values(40), n in 1usize..90) {
        let sys = FiniteSystem::abstract_system(Permutation::new(p).unwrap()).unwrap();
        let f = Observable::new(v).unwrap();
        let means = ErgodicMeans::new(&sys, &f).unwrap();
        prop_assert!(mean_of_abs_means(&means, n).unwrap() <= f.abs().global_average() + 1e-12);
    }

    #[test]
    fn shift_identity((p, nums) in perm_strategy(30).prop_flat_map(|p| { let m = p.len(); (Just(p), prop::collection::vec(-20i64..20, m)) }), n in 1usize..70) {
        let perm = Permutation::new(p).unwrap();
        let sys = FiniteSystem::abstract_system(perm.clone()).unwrap();
        let f = Observable::new(nums.iter().map(|&k| Rational64::new(k, 3)).collect()).unwrap();
        let fmeans = ErgodicMeans::new(&sys, &f).unwrap();
        let shifted = ErgodicMeans::new(&sys, &f.compose(&perm).unwrap()).unwrap();
        let bound = f.max_abs() * Rational64::new(2, n as i64);
        for x in 0..sys.size() {
            let a = fmeans.mean(x, n).unwrap();
            let b = fmeans.mean(perm.apply(x), n).unwrap();
            prop_assert_eq!(shifted.mean(x, n).unwrap(), b);
            prop_assert!((b - a).abs() <= bound);
        }
    }

    #[test]
    fn fluctuations_monotone_in_epsilon(s in prop::collection::vec(-1.0f64..1.0, 0..40), e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(fluctuation_count(&s, hi) <= fluctuation_count(&s, lo));
    }

    #[test]
    fn fluctuations_shift_invariant(s in prop::collection::vec(-30i64..30, 0..40), c in -100i64..100, e in 1i64..40) {
        let a: Vec<Rational64> = s.iter().map(|&k| Rational64::new(k, 4)).collect();
        let b: Vec<Rational64> = a.iter().map(|&v| v + Rational64::new(c, 3)).collect();
        let eps = Rational64::new(e, 4);
        prop_assert_eq!(fluctuation_count(&a, eps), fluctuation_count(&b, eps));
    }

    #[test]
    fn tail_mass_monotone(v in prop::collection::vec(-5.0f64..5.0, 1..100), t1 in 0.0f64..6.0, t2 in 0.0f64..6.0) {
        let f = Observable::new(v).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(tail_mass(&f, hi).unwrap() <= tail_mass(&f, lo).unwrap());
        prop_assert!((tail_mass(&f, 0.0).unwrap() - f.abs().global_average()).abs() <= 1e-12);
    }

    #[test]
    fn matched_fraction_recomputable_and_monotone(
        pts in prop::collection::vec(0.0f64..1.0, 1..60),
        shift in 0.0f64..1.0,
        d1 in 0.001f64..0.2,
        d2 in 0.001f64..0.2,
    ) {
        let imgs: Vec<f64> = pts.iter().map(|x| (x * 3.0 + shift).rem_euclid(1.0)).collect();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = match_permutation(&pts, &imgs, lo, RealMetric::Circle).unwrap();
        let b = match_permutation(&pts, &imgs, hi, RealMetric::Circle).unwrap();
        let recount = (0..pts.len())
            .filter(|&y| RealMetric::Circle.distance(imgs[y], pts[a.perm.apply(y)]) < lo)
            .count();
        prop_assert_eq!(recount, a.matched);
        prop_assert_eq!(a.matched_fraction, recount as f64 / pts.len() as f64);
        prop_assert!(a.matched <= b.matched);
    }

    #[test]
    fn transitivize_yields_one_cycle(p in perm_strategy(64)) {
        let perm = Permutation::new(p).unwrap();
        let b = perm.cycles().count();
        let (c, k) = transitivize(&perm);
        prop_assert!(c.is_transitive());
        prop_assert!(k <= b);
        prop_assert_eq!(k, (0..perm.len()).filter(|&y| c.apply(y) != perm.apply(y)).count());
    }

    #[test]
    fn periodize_has_exact_period(p in perm_strategy(64), n in 1usize..7) {
        let perm = Permutation::new(p).unwrap();
        let out = periodize(&perm, n).unwrap();
        let expected: usize = perm.cycles().lengths().map(|l| l % n).sum();
        prop_assert_eq!(out.trimmed, expected);
        prop_assert_eq!(out.kept.len() + out.trimmed, perm.len());
        for y in 0..out.perm.len() {
            prop_assert_eq!(out.perm.period(y).unwrap(), n);
        }
    }

    #[test]
    fn grid_meets_tolerance(
        n1 in 1u64..6, n2 in 1u64..6, z1 in 0.05f64..0.45, z2 in 0.55f64..0.95,
        eps in 0.001f64..0.05, seed in 0u64..1000,
    ) {
        let target = DiracMixture::from_counts(&[(z1, n1), (z2, n2)]).unwrap();
        let suite = TestSuite::new(vec![
            TestFunction::registered(&FunctionSpec::Identity).unwrap(),
            TestFunction::registered(&FunctionSpec::Cos2pi { freq: 1 }).unwrap(),
        ]);
        let allowed = AllowedSet::excluding_rationals(50);
        let g = build_grid(&target, &suite, eps, &allowed, seed, RealMetric::Circle).unwrap();
        prop_assert_eq!(g.points.len() as u64, n1 + n2);
        prop_assert!(g.points.iter().all(|&y| allowed.contains(y)));
        for f in suite.functions() {
            let emp = empirical_integral(&g.points, |&y| f.eval(y)).unwrap();
            prop_assert!((emp - target.integrate(f)).abs() <= eps);
        }
    }

    #[test]
    fn psi_is_continuous_at_the_break(a in 0.01f64..1.0) {
        let t = 1.0 - a;
        let left = psi(a, t).unwrap();
        let right = psi(a, (t + 1e-12).min(1.0)).unwrap();
        prop_assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn de_bruijn_windows_distinct(m in 2usize..5, n in 1usize..7) {
        prop_assume!(m.pow(n as u32) <= 1 << 14);
        let s = de_bruijn(m, n).unwrap();
        prop_assert_eq!(s.len(), m.pow(n as u32));
        prop_assert!(windows_distinct(s.symbols(), m, n));
    }
}

#[test]
fn uniform_grid_gap_decreases() {
    let suite = TestSuite::new(vec![
        TestFunction::registered(&FunctionSpec::Identity).unwrap(),
        TestFunction::registered(&FunctionSpec::Square).unwrap(),
    ]);
    let mut last = f64::INFINITY;
    for m in [100usize, 1000, 10_000] {
        let gap = weakstar_gap(&uniform_grid(m).unwrap(), &suite).unwrap();
        // largest Lipschitz constant in the suite is 2
        assert!(gap <= 2.0 / (2.0 * m as f64) + 1e-15);
        assert!(gap < last);
        last = gap;
    }
}

#[test]
fn uniform_grid_gap_with_cosine() {
    let suite = TestSuite::new(
        [FunctionSpec::Identity, FunctionSpec::Square, FunctionSpec::Cos2pi { freq: 1 }]
            .iter()
            .map(|s| TestFunction::registered(s).unwrap())
            .collect(),
    );
    assert!(weakstar_gap(&uniform_grid(10_000).unwrap(), &suite).unwrap() <= 1e-4);
}

#[test]
fn rotation_transitive_iff_coprime() {
    for m in 1..=200usize {
        for n in 0..m {
            let sys = rotation_system(m, n).unwrap();
            assert_eq!(sys.is_transitive(), n.gcd(&m) == 1, "M={m} N={n}");
        }
    }
    for m in [500usize, 997, 1000] {
        for n in (0..m).step_by(13) {
            assert_eq!(rotation_system(m, n).unwrap().is_transitive(), n.gcd(&m) == 1);
        }
    }
}

#[test]
fn symbolic_systems_cycle_structure() {
    for (m, n) in [(2, 0), (2, 1), (2, 2), (3, 1), (2, 3), (4, 1)] {
        let block = bernoulli_block_system(m, n).unwrap();
        let width = 2 * n + 1;
        assert!(block.perm().cycles().lengths().all(|l| width % l == 0));
        assert!(bernoulli_debruijn_system(m, n).unwrap().is_transitive());
    }
}

/// Simpson's rule on `[lo, hi]` with `panels` (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn psi_integrates_to_one_half() {
    for a in [0.01, 0.1, 0.25, 0.3, 0.5, 0.75, 0.9, 1.0] {
        let f = |t: f64| psi(a, t).unwrap();
        let integral = simpson(f, 0.0, 1.0 - a, 1000) + simpson(f, 1.0 - a, 1.0, 1000);
        assert!((integral - 0.5).abs() <= 1e-9, "a={a}: {integral}");
    }
}
