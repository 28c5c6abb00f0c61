use num_rational::BigRational;
use proptest::prelude::*;
use tailsim_core::series::ratio;
use tailsim_core::{Distribution, Stream};
use tailsim_models::intermittency::*;

fn law(s: &str) -> Distribution {
    s.parse().unwrap()
}

fn models() -> Vec<ThresholdModel> {
    let pairs = [
        ("uniform", "uniform"),
        ("powdens:alpha=1", "uniform"),
        ("uniform", "betalike:alpha=0,beta=0.5"),
        ("powdens:alpha=-0.4", "betalike:alpha=2,beta=1"),
        ("betalike:alpha=1,beta=1", "uniform"),
        ("uniform", "twopoint:a=0.3,b=0.8,p=0.4"),
        ("uniform", "point:x=0.6"),
    ];
    let mut out = Vec::new();
    for (f, g) in pairs {
        for eta in [0.0, 0.3, 0.5, 0.9, 1.0] {
            out.push(ThresholdModel::new(law(f), law(g), eta).unwrap());
        }
    }
    out
}

#[test]
fn moment_table_invariants() {
    for m in models() {
        let t = moments(&m, 60).unwrap();
        assert!((t.a[0] - 1.0).abs() < 1e-12);
        let a1 = t.a[1];
        for n in 0..=60 {
            assert!(t.b[n] >= -1e-12, "{m:?} B({n})");
            if n < 60 {
                assert!((t.b[n] - (t.a[n] - t.a[n + 1])).abs() < 1e-12);
                assert!(t.a[n + 1] <= t.a[n] + 1e-12);
            }
            if n >= 1 {
                assert!(a1.powi(n as i32) <= t.a[n] + 1e-12 && t.a[n] <= a1 + 1e-12, "{m:?} A({n})");
            }
        }
    }
}

#[test]
fn quadrature_moments_match_closed_form() {
    // betalike(1,1) as the state law goes through quadrature; F(u) = 3u² - 2u³.
    let m = ThresholdModel::new(law("betalike:alpha=1,beta=1"), Distribution::uniform(), 0.5).unwrap();
    let t = moments(&m, 3).unwrap();
    assert!((t.a[1] - 0.5).abs() < 1e-12);
    // ∫(3u² - 2u³)² du = 9/5 - 2 + 4/7
    assert!((t.a[2] - (9.0 / 5.0 - 2.0 + 4.0 / 7.0)).abs() < 1e-12);
}

#[test]
fn sandwich_bounds() {
    for m in models() {
        let t = moments(&m, 42).unwrap();
        let p = pmf_series(&m, 40).unwrap().values;
        for (k, &v) in p.iter().enumerate() {
            let (lo, hi) = pmf_bounds(&t, m.eta, k);
            assert!(lo <= v + 1e-13 && v <= hi + 1e-13, "{m:?} T={k}: {lo} {v} {hi}");
        }
        if m.eta == 0.0 {
            for k in 0..40 {
                let (lo, hi) = pmf_bounds(&t, 0.0, k);
                assert!((lo - pmf_eta0(&t, k)).abs() < 1e-15 && (hi - lo).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn series_assembly_reproduces_eta1() {
    let m = ThresholdModel::new(law("powdens:alpha=0.5"), law("betalike:alpha=0,beta=1"), 1.0).unwrap();
    let t = moments(&m, 52).unwrap();
    let gf = assemble_generating_function(&t.a, &t.b, 1.0, 50);
    for k in 0..=50 {
        assert!((gf.coeffs()[k] - pmf_eta1(&t, k)).abs() < 1e-14);
    }
}

#[test]
fn eta0_closed_form() {
    let m = ThresholdModel::new(law("powdens:alpha=2"), law("betalike:alpha=1,beta=0.5"), 0.0).unwrap();
    let t = moments(&m, 32).unwrap();
    let p = pmf_series(&m, 30).unwrap().values;
    for k in 0..=30 {
        assert!((p[k] - pmf_eta0(&t, k)).abs() < 1e-15);
    }
}

#[test]
fn uniform_engines_agree() {
    for eta in [0.5, 0.7, 0.9] {
        let series = pmf_series(&ThresholdModel::uniform(eta).unwrap(), 64).unwrap().values;
        let gf = pmf_uniform_gf(eta, 64).unwrap().values;
        for t in 0..=64 {
            assert!((series[t] - gf[t]).abs() < 1e-12, "eta {eta} T {t}");
        }
        for t in 0..=MAX_NESTED_T {
            let nested = pmf_uniform_nested(eta, t).unwrap();
            assert!((nested - gf[t]).abs() < 1e-12, "eta {eta} T {t}: {nested} {}", gf[t]);
        }
    }
}

#[test]
fn exact_rational_matches_float_series() {
    let m = ThresholdModel::uniform(0.7).unwrap();
    let exact = pmf_series_exact(&m, &ratio(7, 10), 20).unwrap();
    let float = pmf_series(&m, 20).unwrap().values;
    for (e, f) in exact.iter().zip(&float) {
        assert!((to_f64(e) - f).abs() < 1e-15);
    }
    let via_gf = uniform_generating_function(ratio(7, 10), 20).unwrap();
    let gf_exact: Vec<BigRational> = via_gf.coeffs().to_vec();
    assert_eq!(gf_exact, exact);
}

#[test]
fn uniform_gf_normalizes_and_approaches_eta1() {
    let p = pmf_uniform_gf(0.5, 128).unwrap().values;
    assert!(p.iter().sum::<f64>() > 0.999);
    let near = pmf_uniform_gf(1.0 - 1e-6, 10).unwrap().values;
    for (t, v) in near.iter().enumerate() {
        assert!((v - 1.0 / ((t + 1) * (t + 2)) as f64).abs() < 1e-5);
    }
}

#[test]
fn beta_eta1_asymptote() {
    let ratio = pmf_eta1_beta(0.0, 1.0, 1000).unwrap() / pmf_eta1_beta_asymptote(0.0, 1.0, 1000.0);
    assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    // Matches the moment engine at η = 1.
    let m = ThresholdModel::new(law("powdens:alpha=0.5"), law("betalike:alpha=0,beta=0.5"), 1.0).unwrap();
    let t = moments(&m, 40).unwrap();
    for k in [0usize, 1, 7, 40] {
        assert!((pmf_eta1_beta(0.5, 0.5, k as u64).unwrap() - t.b[k]).abs() < 1e-14);
    }
}

#[test]
fn crossover_properties() {
    for i in 1..=99 {
        let eta = i as f64 / 100.0;
        let c = crossover(eta).unwrap();
        assert!(c.bound_holds && c.s0 > 1.0 && c.s0 <= c.s1, "{eta} {c:?}");
    }
    for eta in [0.9, 0.95, 0.99, 0.999] {
        let c = crossover(eta).unwrap();
        let r = c.ln_s0 / (1.0 - eta);
        assert!((0.5..=2.0).contains(&r), "{eta} {r}");
    }
}

#[test]
fn tail_regime_switch() {
    let eta = 0.9;
    let p = pmf_series(&ThresholdModel::uniform(eta).unwrap(), 400).unwrap().values;
    let pure = |t: f64| 1.0 / ((t + 1.0) * (t + 2.0));
    let loglog = |f: &dyn Fn(usize) -> f64, t: usize| (f(t + 1).ln() - f(t - 1).ln()) / (((t + 1) as f64).ln() - ((t - 1) as f64).ln());
    // Well below T_c ≈ 9.5 the local slope follows the η = 1 law.
    for t in 2..=4 {
        let got = loglog(&|k| p[k], t);
        let want = loglog(&|k| pure(k as f64), t);
        assert!((got - want).abs() < 0.15, "T={t}: {got} vs {want}");
    }
    let ln_s0 = crossover(eta).unwrap().ln_s0;
    for t in [300usize, 350, 399] {
        let slope = (p[t + 1].ln() - p[t - 1].ln()) / 2.0;
        assert!((slope / -ln_s0 - 1.0).abs() < 0.03, "T={t}: {slope} vs {}", -ln_s0);
    }
}

#[test]
fn monte_carlo_matches_series() {
    for eta in [0.0, 0.5, 0.9] {
        let m = ThresholdModel::new(law("powdens:alpha=1"), law("betalike:alpha=0,beta=1"), eta).unwrap();
        let n = 1_000_000u64;
        let mc = simulate_episodes(&m, n, 200, Stream::new(40));
        let exact = pmf_series(&m, 200).unwrap().values;
        let se = mc.standard_errors().unwrap();
        for t in 0..=200 {
            if exact[t] * n as f64 >= 100.0 {
                let sd = (exact[t] * (1.0 - exact[t]) / n as f64).sqrt();
                assert!((mc.values[t] - exact[t]).abs() <= 4.0 * sd, "eta {eta} T {t}: {} vs {} (se {})", mc.values[t], exact[t], se[t]);
            }
        }
    }
}

#[test]
fn shards_make_results_thread_independent() {
    let m = ThresholdModel::uniform(0.6).unwrap();
    let a = simulate_episodes(&m, 10_000, 50, Stream::new(5));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| simulate_episodes(&m, 10_000, 50, Stream::new(5)));
    assert_eq!(a, b);
}

#[test]
fn censoring_is_reported() {
    let m = ThresholdModel::uniform(1.0).unwrap();
    let pmf = simulate_episodes(&m, 100_000, 10, Stream::new(6));
    let Provenance::MonteCarlo { censored, episodes } = pmf.provenance else { panic!() };
    let counted: u64 = pmf.counts.as_ref().unwrap().iter().sum();
    assert_eq!(counted + censored, episodes);
    // Pr{T > 10} = 1/12 at η = 1.
    let frac = censored as f64 / episodes as f64;
    assert!((frac - 1.0 / 12.0).abs() < 4.0 * (1.0 / 12.0 * 11.0 / 12.0 / 1e5f64).sqrt(), "{frac}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn series_pmf_is_a_subprobability(eta in 0.0f64..0.999, alpha in -0.5f64..3.0, beta in -0.5f64..3.0) {
        let m = ThresholdModel::new(Distribution::power_density(alpha).unwrap(), Distribution::beta_like(0.0, beta).unwrap(), eta).unwrap();
        let p = pmf_series(&m, 60).unwrap().values;
        let mut total = 0.0;
        for v in p {
            prop_assert!((-1e-13..=1.0).contains(&v));
            total += v;
            prop_assert!(total <= 1.0 + 1e-12);
        }
    }
}
