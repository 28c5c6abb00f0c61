use proptest::prelude::*;
use tailsim_core::tail::{fit_tail_loglog, hill_estimator, split_window_fits, steepens};
use tailsim_core::{Distribution, EmpiricalDistribution, Stream};

fn draw(d: &Distribution, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Stream::new(seed).rng();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn parse(s: &str) -> Distribution {
    s.parse().unwrap()
}

#[test]
fn uniform_ks_million() {
    let d = Distribution::uniform();
    let e = EmpiricalDistribution::new(draw(&d, 1_000_000, 1)).unwrap();
    let ks = e.ks_distance(|x| d.cdf(x));
    assert!(ks < 0.002, "{ks}");
}

#[test]
fn uniform_ks_hundred_thousand() {
    let d = Distribution::uniform();
    let e = EmpiricalDistribution::new(draw(&d, 100_000, 2)).unwrap();
    assert!(e.ks_distance(|x| d.cdf(x)) < 0.006);
}

#[test]
fn pareto_mean() {
    let d = parse("pareto:B=1,omega=3");
    let e = EmpiricalDistribution::new(draw(&d, 1_000_000, 3)).unwrap();
    assert!((e.mean() / 2.0 - 1.0).abs() < 0.02, "{}", e.mean());
}

#[test]
fn samples_stay_in_support() {
    for s in ["uniform", "powdens:alpha=-0.5", "betalike:alpha=0,beta=1", "exp:rate=2", "pareto:B=2,omega=1.5", "lognormal:sigma=2"] {
        let d = parse(s);
        let (lo, hi) = d.support_bounds();
        assert!(draw(&d, 10_000, 4).iter().all(|&x| x >= lo && x <= hi), "{s}");
    }
}

#[test]
fn monte_carlo_moments_within_five_standard_errors() {
    let kinds = [
        "uniform",
        "uniform:lo=-1,hi=3",
        "powdens:alpha=0.5",
        "betalike:alpha=2,beta=0.5",
        "exp:rate=1.5",
        "pareto:B=1,omega=6",
        "point:x=0.3",
        "twopoint:a=-1,b=2,p=0.25",
        "lognormal:mu=0.1,sigma=0.4",
        "normal:mean=1,sd=2",
    ];
    let n = 1_000_000;
    for (i, s) in kinds.iter().enumerate() {
        let d = parse(s);
        let xs = draw(&d, n, 100 + i as u64);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = d.variance();
        let se = (var / n as f64).sqrt();
        assert!((mean - d.mean()).abs() <= 5.0 * se + 1e-9, "{s} mean {mean} vs {}", d.mean());
        // Variance check needs the fourth central moment; estimate it from the sample.
        let m4 = xs.iter().map(|x| (x - d.mean()).powi(4)).sum::<f64>() / n as f64;
        let svar = xs.iter().map(|x| (x - d.mean()).powi(2)).sum::<f64>() / n as f64;
        let se_var = ((m4 - var * var).max(0.0) / n as f64).sqrt();
        assert!((svar - var).abs() <= 5.0 * se_var + 1e-9, "{s} var {svar} vs {var}");
    }
}

#[test]
fn hill_on_pareto_draws() {
    let d = parse("pareto:B=1,omega=3");
    let e = EmpiricalDistribution::new(draw(&d, 1_000_000, 5)).unwrap();
    let fit = hill_estimator(&e, 10_000).unwrap();
    assert!((fit.exponent - 2.0).abs() < 0.05, "{fit:?}");
}

#[test]
fn exponential_tail_is_not_a_power_law() {
    let d = parse("exp:rate=1");
    let e = EmpiricalDistribution::new(draw(&d, 1_000_000, 6)).unwrap();
    let whole = fit_tail_loglog(&e, 5.0, 12.0).unwrap();
    assert!(whole.index() > 4.0, "{whole:?}");
    let (lower, upper) = split_window_fits(&e, 5.0, 12.0).unwrap();
    assert!(upper.index() > lower.index());
    assert!(steepens(&lower, &upper, 0.2));
}

#[test]
fn pareto_tail_does_not_steepen() {
    let d = parse("pareto:B=1,omega=3");
    let e = EmpiricalDistribution::new(draw(&d, 1_000_000, 7)).unwrap();
    let (lower, upper) = split_window_fits(&e, 2.0, 100.0).unwrap();
    assert!(!steepens(&lower, &upper, 0.2), "{lower:?} {upper:?}");
}

proptest! {
    #[test]
    fn ccdf_is_monotone_and_right_continuous(xs in proptest::collection::vec(-100.0f64..100.0, 1..200)) {
        let e = EmpiricalDistribution::new(xs).unwrap();
        let pts = e.ccdf_points();
        for w in pts.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
        for &(x, c) in &pts {
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert_eq!(e.ccdf(x), c);
            prop_assert!(e.ccdf(x.next_down()) >= c);
        }
    }

    #[test]
    fn cdf_is_nondecreasing(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        for s in ["pareto:B=1,omega=3", "betalike:alpha=0.3,beta=2", "exp:rate=2", "powdens:alpha=1"] {
            let d = parse(s);
            let (xa, xb) = (d.quantile(a), d.quantile(b));
            prop_assert!(d.cdf(xa) <= d.cdf(xb));
        }
    }
}
