use std::sync::Arc;

use msalab::disorder::{holder_check, sample_potential, site_uniform, DisorderKind, DisorderSpec};
use msalab::lattice::LatticeBox;
use msalab::operator::{assemble, Model};
use msalab::weight::{gamma_norm_bound, HoppingKernel};
use num_complex::Complex64;
use proptest::prelude::*;

fn nearest_neighbour() -> HoppingKernel {
    HoppingKernel::table([(vec![1], Complex64::new(1.0, 0.0))]).unwrap()
}

fn uniform() -> DisorderSpec {
    DisorderSpec::uniform(1.0, 1.0, 1.0).unwrap()
}

#[test]
fn degenerate_bernoulli_takes_low_atom() {
    let spec = DisorderSpec::new(DisorderKind::Bernoulli { low: -1.0, high: 1.0, p: 0.0 }, 1.0, 1.0, 1.0, 1.0).unwrap();
    let b = LatticeBox::centered(1, 50).unwrap();
    assert!(sample_potential(&b, &spec, 3, 0).unwrap().iter().all(|&v| v == -1.0));
}

#[test]
fn uniform_mean_within_clt_band() {
    let b = LatticeBox::centered(1, 500_000).unwrap();
    let v = sample_potential(&b, &uniform(), 11, 0).unwrap();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    // σ = 1/√3 per draw.
    assert!(mean.abs() <= 3.0 / (3f64.sqrt() * (v.len() as f64).sqrt()), "mean = {mean}");
    assert!(v.iter().all(|x| (-1.0..1.0).contains(x)));
}

#[test]
fn power_law_cdf_matches() {
    let spec = DisorderSpec::new(DisorderKind::Power, 1.0, 0.5, 1.0, 1.0).unwrap();
    let b = LatticeBox::centered(1, 50_000).unwrap();
    let v = sample_potential(&b, &spec, 5, 2).unwrap();
    let freq = v.iter().filter(|&&x| x <= 0.01).count() as f64 / v.len() as f64;
    let sd = (0.1f64 * 0.9 / v.len() as f64).sqrt();
    assert!((freq - 0.1).abs() <= 4.0 * sd, "freq = {freq}");
    assert!((spec.cdf(0.01) - 0.1).abs() < 1e-15);
}

#[test]
fn holder_examples() {
    let u = uniform();
    assert!((u.interval_mass(-0.1, 0.1) - 0.1).abs() < 1e-15);
    assert!(holder_check(&u, &[0.01, 0.2, 1.0]).pass);

    let bern = DisorderSpec::new(DisorderKind::Bernoulli { low: -1.0, high: 1.0, p: 0.5 }, 1.0, 1.0, 1.0, 1.0).unwrap();
    let r = holder_check(&bern, &[1e-6]);
    assert!(!r.pass && !r.holder_kind);

    let pow = DisorderSpec::new(DisorderKind::Power, 1.0, 0.5, 1.0, 1.0).unwrap();
    let r = holder_check(&pow, &[0.01, 0.25]);
    assert!(r.pass);
    assert!((r.rows[0].max_mass - 0.1).abs() < 1e-12);
}

#[test]
fn disorder_validation() {
    assert!(DisorderSpec::uniform(0.0, 1.0, 1.0).is_err());
    assert!(DisorderSpec::new(DisorderKind::Uniform, 1.0, 1.5, 1.0, 1.0).is_err());
    assert!(DisorderSpec::new(DisorderKind::Bernoulli { low: 1.0, high: 1.0, p: 0.5 }, 1.0, 1.0, 1.0, 1.0).is_err());
    assert!(DisorderSpec::new(DisorderKind::QuantileTable { quantiles: vec![0.5, 0.1] }, 1.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn site_draws_are_keyed() {
    let a = site_uniform(1, 2, &[3, 4]).unwrap();
    assert_eq!(a, site_uniform(1, 2, &[3, 4]).unwrap());
    assert_ne!(a, site_uniform(1, 3, &[3, 4]).unwrap());
    assert_ne!(a, site_uniform(2, 2, &[3, 4]).unwrap());
    assert_ne!(a, site_uniform(1, 2, &[4, 3]).unwrap());
    assert!(site_uniform(1, 2, &[1 << 20]).is_err());
}

#[test]
fn zero_coupling_is_diagonal() {
    let model = Model::new(HoppingKernel::log_power(1.0, 2.0).unwrap(), uniform(), 0.0).unwrap();
    let s = model.sample(&LatticeBox::centered(2, 3).unwrap(), 7, 1).unwrap();
    let mut v = s.potential().to_vec();
    v.sort_by(f64::total_cmp);
    assert_eq!(s.spectrum(), v.as_slice());
    for i in 0..s.dim() {
        for j in 0..s.dim() {
            if i != j {
                assert_eq!(s.matrix().entry(i, j), Complex64::new(0.0, 0.0));
            }
        }
    }
}

#[test]
fn path_graph_spectrum() {
    let b = LatticeBox::centered(1, 1).unwrap();
    let s = assemble(&b, vec![0.0; 3], 1.0, Arc::new(nearest_neighbour())).unwrap();
    let r2 = 2f64.sqrt();
    for (got, want) in s.spectrum().iter().zip([-r2, 0.0, r2]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn complex_kernel_is_exactly_hermitian() {
    let k = HoppingKernel::log_power(1.0, 2.0).unwrap().with_phase(vec![0.3, 1.1]).unwrap();
    let model = Model::new(k, uniform(), 0.2).unwrap();
    let s = model.sample(&LatticeBox::centered(2, 3).unwrap(), 1, 0).unwrap();
    assert_eq!(s.matrix().hermitian_defect(), 0.0);
    assert!(s.spectrum().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn restriction_shares_potential() {
    let model = Model::new(HoppingKernel::log_power(1.0, 2.0).unwrap(), uniform(), 0.1).unwrap();
    let outer = model.sample(&LatticeBox::centered(1, 10).unwrap(), 4, 9).unwrap();
    let sub = LatticeBox::new(vec![3].into(), 2).unwrap();
    let restricted = outer.restrict(&sub).unwrap();
    let direct = model.sample(&sub, 4, 9).unwrap();
    assert_eq!(restricted.potential(), direct.potential());
    assert_eq!(restricted.matrix(), direct.matrix());
}

#[test]
fn assembly_rejects_bad_input() {
    let b = LatticeBox::centered(1, 1).unwrap();
    let k = Arc::new(nearest_neighbour());
    assert!(assemble(&b, vec![0.0; 2], 1.0, Arc::clone(&k)).is_err());
    assert!(assemble(&b, vec![0.0; 3], -1.0, Arc::clone(&k)).is_err());
    assert!(assemble(&LatticeBox::centered(2, 1).unwrap(), vec![0.0; 9], 1.0, k).is_err());
    assert!(Model::new(nearest_neighbour(), uniform(), f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectrum_within_weyl_bound(seed in any::<u64>(), eps in 0.0f64..2.0, radius in 1i64..12) {
        let k = HoppingKernel::log_power(1.0, 2.0).unwrap();
        let norm = gamma_norm_bound(&k, 1, 1000).unwrap().value;
        let model = Model::new(k, uniform(), eps).unwrap();
        let s = model.sample(&LatticeBox::centered(1, radius).unwrap(), seed, 0).unwrap();
        let bound = eps * norm + 1.0;
        prop_assert!(s.spectrum().iter().all(|e| e.abs() <= bound + 1e-12));
        prop_assert_eq!(s.matrix().hermitian_defect(), 0.0);
    }
}
