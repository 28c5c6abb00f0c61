use proptest::prelude::*;
use rand::Rng;
use tailsim_core::{EmpiricalDistribution, Stream};
use tailsim_models::sandpile::fss::collapse_distance;
use tailsim_models::sandpile::*;

fn empty_btw(side: usize) -> LatticeConfig {
    LatticeConfig::btw(side, 1.0).unwrap().with_initial(InitialState::Empty)
}

#[test]
fn sub_threshold_grain_does_not_topple() {
    let mut pile = Sandpile::<f64>::new(empty_btw(9), Stream::new(1)).unwrap();
    let r = pile.drive_site_and_relax(4 * 9 + 4, 0.25).unwrap();
    assert_eq!((r.size, r.area, r.duration, r.dissipated), (0, 0, 0, 0.0));
    assert!(pile.is_quiescent());
}

#[test]
fn corner_toppling_loses_two_shares() {
    let mut pile = Sandpile::<f64>::new(empty_btw(5), Stream::new(1)).unwrap();
    pile.set_exceedance(0, 0, -0.25);
    let r = pile.drive_site_and_relax(0, 0.25).unwrap();
    assert_eq!((r.size, r.area, r.duration), (1, 1, 1));
    assert_eq!(r.dissipated, 2.0 * 1.0 / 4.0);
    assert_eq!(pile.exceedance(0, 0), -1.0);
    assert_eq!(pile.exceedance(0, 1), -0.75);
    assert_eq!(pile.exceedance(1, 0), -0.75);

    let mut exact = Sandpile::<i64>::new(empty_btw(5), Stream::new(1)).unwrap();
    exact.set_exceedance(0, 0, -1);
    let r = exact.drive_site_and_relax(0, 1).unwrap();
    assert_eq!((r.size, r.dissipated), (1, 0.5));
    assert_eq!(exact.injected(), 1);
    assert_eq!(exact.dissipated(), 2);
}

#[test]
fn zhang_site_sheds_everything() {
    let cfg = LatticeConfig::zhang(7, 2.0).unwrap().with_initial(InitialState::Empty);
    let mut pile = Sandpile::<f64>::new(cfg, Stream::new(1)).unwrap();
    let centre = 3 * 7 + 3;
    let r = pile.drive_site_and_relax(centre, 2.6).unwrap();
    assert_eq!(r.size, 1);
    // Exceedance 0.6 sheds 0.6 + E_c, leaving zero absolute energy.
    assert_eq!(pile.exceedance(3, 3), -2.0);
    assert!((pile.exceedance(2, 3) - (-2.0 + 2.6 / 4.0)).abs() < 1e-15);
    assert_eq!(r.dissipated, 0.0);
}

#[test]
fn parallel_steps_count_duration() {
    // A large drive leaves A active after its first toppling, so A and its
    // neighbour B topple together in the second step.
    let mut pile = Sandpile::<f64>::new(empty_btw(5), Stream::new(1)).unwrap();
    pile.set_exceedance(2, 2, -0.25);
    pile.set_exceedance(2, 3, -0.25);
    let r = pile.drive_site_and_relax(2 * 5 + 2, 1.5).unwrap();
    assert_eq!((r.size, r.area, r.duration), (3, 2, 2));
    assert_eq!(pile.exceedance(2, 2), -0.5);
    assert_eq!(pile.exceedance(2, 3), -0.75);
    assert_eq!(pile.exceedance(1, 2), -0.5);
    assert_eq!(pile.exceedance(1, 3), -0.75);
    assert!(pile.is_quiescent());
}

#[test]
fn small_lattice_exhaustive() {
    // Every stable exact BTW state of the 3x3 lattice, driven at every site.
    let cfg = empty_btw(3);
    let mut pile = Sandpile::<i64>::new(cfg, Stream::new(0)).unwrap();
    for code in 0..4u32.pow(9) {
        for site in 0..9 {
            for k in 0..9 {
                pile.set_exceedance(k / 3, k % 3, -4 + ((code >> (2 * k)) & 3) as i64);
            }
            let before = pile.stored() + pile.dissipated() - pile.injected();
            let r = pile.drive_site_and_relax(site, 1).unwrap();
            assert!(r.area <= 9 && r.area <= r.size && r.duration <= r.size);
            assert!(pile.is_quiescent());
            assert_eq!(pile.stored() + pile.dissipated() - pile.injected(), before);
        }
    }
}

#[test]
fn conservation_after_every_avalanche() {
    for cfg in [LatticeConfig::btw(8, 1.0).unwrap(), LatticeConfig::zhang(8, 1.3).unwrap()] {
        let mut pile = Sandpile::<f64>::new(cfg, Stream::new(4)).unwrap();
        let start = pile.stored();
        for _ in 0..5000 {
            let r = pile.drive_and_relax().unwrap();
            assert!(pile.is_quiescent());
            assert!(r.area <= r.size && r.duration <= r.size && r.area <= 64);
            let gap = pile.injected() - pile.dissipated() - (pile.stored() - start);
            assert!(gap.abs() <= 1e-9 * pile.injected(), "{gap}");
        }
    }
}

#[test]
fn exact_audit_closes() {
    let run = run_avalanches::<i64>(LatticeConfig::btw(32, 1.0).unwrap(), 200_000, Stream::new(5)).unwrap();
    assert!(run.audit.exact, "{:?}", run.audit);
    assert_eq!(run.audit.relative_residual, 0.0);
    assert_eq!(run.records.len(), 200_000);
    assert_eq!(run.transient, 50_000);
}

#[test]
fn identical_seed_identical_avalanches() {
    let cfg = LatticeConfig::zhang(16, 1.0).unwrap();
    let a = run_avalanches::<f64>(cfg, 20_000, Stream::new(6)).unwrap();
    let b = run_avalanches::<f64>(cfg, 20_000, Stream::new(6)).unwrap();
    let c = run_avalanches::<f64>(cfg, 20_000, Stream::new(7)).unwrap();
    assert_eq!(a.records, b.records);
    assert!(a.records.iter().zip(&b.records).all(|(x, y)| x.dissipated.to_bits() == y.dissipated.to_bits()));
    assert_ne!(a.records, c.records);
}

#[test]
fn size_distribution_is_a_power_law() {
    let run = run_avalanches::<f64>(LatticeConfig::btw(64, 1.0).unwrap(), 300_000, Stream::new(8)).unwrap();
    let fit = density_fit(&run.values(Observable::Size), 10.0, 1000.0, 5).unwrap();
    assert!(fit.r_squared > 0.98, "{fit:?}");
    assert!(fit.slope < -0.8 && fit.slope > -1.6, "{fit:?}");
}

#[test]
fn mean_size_grows_with_lattice() {
    let mean = |side| -> f64 {
        (0..3).map(|k| run_avalanches::<f64>(LatticeConfig::btw(side, 1.0).unwrap(), 20_000, Stream::new(20 + k)).unwrap().mean_size()).sum::<f64>() / 3.0
    };
    let m: Vec<f64> = [16, 32, 64].into_iter().map(mean).collect();
    assert!(m[0] <= m[1] && m[1] <= m[2], "{m:?}");
}

#[test]
fn initial_state_is_forgotten() {
    let uniform = LatticeConfig::btw(16, 1.0).unwrap();
    let a = run_avalanches::<f64>(uniform, 100_000, Stream::new(9)).unwrap();
    let b = run_avalanches::<f64>(uniform.with_initial(InitialState::Empty), 100_000, Stream::new(10)).unwrap();
    let (ea, eb) = (a.distribution(Observable::Size).unwrap(), b.distribution(Observable::Size).unwrap());
    let ks = ea.samples().iter().chain(eb.samples()).map(|&x| (ea.cdf(x) - eb.cdf(x)).abs()).fold(0.0, f64::max);
    assert!(ks < 0.02, "{ks}");
}

fn planted(tau: f64, sigma: f64, seed: u64) -> Vec<FssSample> {
    let mut rng = Stream::new(seed).rng();
    [16usize, 32, 64, 128]
        .iter()
        .map(|&side| {
            let c = (side as f64).powf(sigma);
            let mut values = Vec::with_capacity(200_000);
            // Pareto proposal x^{-τ} on [1, ∞), thinned by the cutoff factor.
            while values.len() < 200_000 {
                let x = (1.0 - rng.random::<f64>()).powf(-1.0 / (tau - 1.0));
                if rng.random::<f64>() < (-(x - 1.0) / c).exp() {
                    values.push(x);
                }
            }
            FssSample { side, values }
        })
        .collect()
}

#[test]
fn fss_recovers_planted_exponents() {
    for (tau, sigma, seed) in [(1.3, 2.7, 11), (1.1, 2.0, 12)] {
        let sets = planted(tau, sigma, seed);
        let fit = fss_fit(&sets, &FssOptions::continuous(1.0)).unwrap();
        assert!((fit.tau - tau).abs() <= 0.05, "{fit:?}");
        assert!((fit.sigma - sigma).abs() <= 0.05, "{fit:?}");
        assert!(!fit.low_confidence);
        let emps: Vec<_> = sets.iter().map(|s| (s.side, EmpiricalDistribution::new(s.values.clone()).unwrap())).collect();
        for d in [-0.3, 0.3] {
            assert!(fit.collapse < collapse_distance(&emps, fit.tau + d, fit.sigma, 1.0), "τ{d:+}");
        }
    }
}

#[test]
fn area_cutoff_respects_lattice_bound() {
    let runs = run_many(&[16, 32, 64].map(|l| LatticeConfig::btw(l, 1.0).unwrap()), 100_000, Stream::new(13), false).unwrap();
    let sets: Vec<FssSample> = runs.iter().map(|r| FssSample { side: r.config.side, values: r.values(Observable::Area) }).collect();
    let q99 = fss_fit(&sets, &FssOptions { cutoff: CutoffScale::Quantile { p: 0.99 }, ..FssOptions::discrete(1.0) }).unwrap();
    assert!(q99.sigma <= 2.0, "{q99:?}");
    let ratio = fss_fit(&sets, &FssOptions::discrete(1.0)).unwrap();
    assert!(ratio.cutoffs.iter().all(|&(l, c)| c <= (l * l) as f64));
}

#[test]
fn fss_needs_two_sizes() {
    let one = [FssSample { side: 16, values: vec![1.0, 2.0, 3.0] }];
    assert!(matches!(fss_fit(&one, &FssOptions::continuous(1.0)), Err(SandpileError::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn avalanche_invariants(side in 3usize..12, zhang in any::<bool>(), ec in 0.5f64..4.0, seed in any::<u64>()) {
        let model = if zhang { Model::Zhang } else { Model::Btw };
        let run = run_avalanches::<f64>(LatticeConfig::of_model(model, side, ec).unwrap(), 400, Stream::new(seed)).unwrap();
        for r in &run.records {
            prop_assert!(r.area <= r.size && r.duration <= r.size && r.area <= (side * side) as u64);
            prop_assert!(r.dissipated >= 0.0);
        }
        prop_assert!(run.audit.relative_residual < 1e-9);
    }
}
