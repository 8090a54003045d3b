use msalab::weight::{
    gamma_norm_bound, log_weight, quasi_metric_constant, quasi_metric_envelope, verify_quasi_metric,
    HoppingKernel, QuasiMetricCertificate,
};
use msalab::Error;
use num_complex::Complex64;
use proptest::prelude::*;

/// Independent evaluation of `F` on the diagonal.
fn excess(x: f64, n: u32, rho: f64) -> f64 {
    let n = n as f64;
    (1.0 + n * x).ln().powf(rho) - n * (1.0 + x).ln().powf(rho)
}

/// Two-level 2000-point grid maximum of the diagonal excess on `[0, e^{ρ−1}]`.
fn grid_max(rho: f64, n: u32) -> (f64, f64) {
    let scan = |lo: f64, hi: f64| {
        let step = (hi - lo) / 1999.0;
        (0..2000)
            .map(|i| lo + step * i as f64)
            .map(|x| (x, excess(x, n, rho)))
            .fold((lo, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    };
    let top = (rho - 1.0).exp();
    let (x, _) = scan(0.0, top);
    let h = top / 1999.0;
    scan((x - h).max(0.0), (x + h).min(top))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn log_weight_examples() {
    assert_eq!(log_weight(&[0, 0], 2.0), 0.0);
    assert!(close(log_weight(&[1, 0], 2.0), 0.480_453_013_918_201_4, 1e-14));
    assert!(close(log_weight(&[3, -4, 0], 1.5), 2.041_791_263_642_209_8, 1e-12));
}

#[test]
fn certificate_single_summand_is_zero() {
    let c = quasi_metric_constant(2.0, 1).unwrap();
    assert_eq!((c.x0, c.sup_f, c.c_rho), (0.0, 0.0, 0.0));
}

#[test]
fn certificate_rho2_n2_frozen() {
    let c = quasi_metric_constant(2.0, 2).unwrap();
    let (lo, hi) = QuasiMetricCertificate::bracket(2.0, 2);
    assert!(close(lo, 0.859_140_914, 1e-8) && close(hi, 1.718_281_828, 1e-8));
    assert!(c.x0 > lo && c.x0 < hi);
    assert!(close(c.x0, 1.218_90, 1e-5), "x0 = {}", c.x0);
    assert!(close(c.sup_f, 0.254_354, 1e-6), "supF = {}", c.sup_f);
    assert!(close(c.c_rho, 0.529_406, 1e-6), "C = {}", c.c_rho);
    let (_, g) = grid_max(2.0, 2);
    assert!(close(c.sup_f, g, 1e-6));
}

#[test]
fn certificate_rho3_n5_matches_grid() {
    let c = quasi_metric_constant(3.0, 5).unwrap();
    let (gx, g) = grid_max(3.0, 5);
    assert!(close(c.sup_f, g, 1e-6), "bisection {} vs grid {}", c.sup_f, g);
    assert!(close(c.x0, gx, 1e-3));
    assert!(c.sup_f >= g - 1e-12, "grid exceeds the certified maximum");
}

#[test]
fn certificate_rejects_bad_input() {
    assert!(matches!(quasi_metric_constant(1.0, 2), Err(Error::InvalidParameter { .. })));
    assert!(quasi_metric_constant(2.0, 0).is_err());
    assert!(quasi_metric_constant(1.0001, 3).is_ok());
}

#[test]
fn verify_examples() {
    let r = verify_quasi_metric(2.0, 2, &[vec![1.0, 1.0]]).unwrap();
    assert!(r.holds());
    let lhs = 3f64.ln().powi(2);
    assert!(close(lhs, 1.206_948_960_812_582, 1e-14));
    assert!(lhs <= 2.0 * 2f64.ln().powi(2) + r.certificate.c_rho * 2f64.ln().powi(2));

    assert!(verify_quasi_metric(2.0, 3, &[vec![1e-9; 3]]).unwrap().holds());
    assert!(verify_quasi_metric(1.5, 4, &[vec![100.0, 1.0, 1.0, 1.0]]).unwrap().holds());
}

#[test]
fn verify_rejects_malformed_samples() {
    assert!(verify_quasi_metric(2.0, 2, &[vec![1.0]]).is_err());
    assert!(verify_quasi_metric(2.0, 2, &[vec![1.0, 0.0]]).is_err());
}

#[test]
fn envelope_dominates_sampled_ratios() {
    let env = quasi_metric_envelope(2.0, 1000).unwrap();
    assert!(env.ratios.iter().all(|&(_, r)| r <= env.c_rho + 1e-15));
    assert!(env.c_rho.is_finite() && env.c_rho > 0.0);
    assert!(quasi_metric_envelope(2.0, 1).is_err());
}

#[test]
fn kernel_eval_examples() {
    let k = HoppingKernel::log_power(1.0, 2.0).unwrap();
    assert_eq!(k.eval(&[0]), Complex64::new(0.0, 0.0));
    assert!(close(k.eval(&[1]).re, 0.618_503_137_801_576, 1e-14));
    let s = HoppingKernel::stretched(0.5).unwrap();
    assert!(close(s.eval(&[4]).re, 0.135_335_283_236_612_7, 1e-14));
}

#[test]
fn kernel_is_hermitian() {
    let t = HoppingKernel::table([(vec![1], Complex64::new(0.3, 0.4)), (vec![2], Complex64::new(-1.0, 0.0))]).unwrap();
    assert_eq!(t.eval(&[-1]), Complex64::new(0.3, -0.4));
    assert!(!t.is_real());
    let k = HoppingKernel::log_power(1.0, 2.0).unwrap().with_phase(vec![0.7, -0.2]).unwrap();
    for x in [[1, 0], [2, -3], [-5, 4]] {
        let m = [-x[0], -x[1]];
        assert!((k.eval(&x) - k.eval(&m).conj()).norm() < 1e-15);
    }
}

#[test]
fn table_rejects_inconsistent_entries() {
    assert!(HoppingKernel::table([(vec![0], Complex64::new(1.0, 0.0))]).is_err());
    assert!(HoppingKernel::table([
        (vec![1], Complex64::new(1.0, 0.0)),
        (vec![-1], Complex64::new(2.0, 0.0)),
    ])
    .is_err());
    assert!(HoppingKernel::table(Vec::new()).is_err());
    assert!(HoppingKernel::log_power(0.0, 2.0).is_err());
    assert!(HoppingKernel::stretched(1.0).is_err());
}

#[test]
fn gamma_norm_examples() {
    let nn = HoppingKernel::table([(vec![1], Complex64::new(1.0, 0.0))]).unwrap();
    assert_eq!(gamma_norm_bound(&nn, 1, 1).unwrap().value, 2.0);

    let k = HoppingKernel::log_power(1.0, 2.0).unwrap();
    let a = gamma_norm_bound(&k, 1, 10_000).unwrap();
    let b = gamma_norm_bound(&k, 1, 100_000).unwrap();
    assert!(a.value.is_finite());
    assert!((a.value - b.value).abs() <= k.tail_bound(1, 10_000));
    assert!(b.value <= a.value);

    let zero = k.scaled(0.0).unwrap();
    assert_eq!(gamma_norm_bound(&zero, 2, 50).unwrap().value, 0.0);
    assert!(gamma_norm_bound(&nn, 2, 5).is_err());
}

#[test]
fn gamma_norm_dominates_truncated_sum() {
    let k = HoppingKernel::log_power(1.0, 2.0).unwrap();
    let direct: f64 = (1..=2000i64).map(|r| 2.0 * k.eval(&[r]).re).sum();
    let bound = gamma_norm_bound(&k, 1, 200).unwrap().value;
    assert!(bound >= direct - 1e-12, "{bound} < {direct}");
}

proptest! {
    #[test]
    fn maximiser_solves_level_equation(rho in 1.05f64..4.0, n in 2u32..64) {
        let c = quasi_metric_constant(rho, n).unwrap();
        let h = |x: f64| (1.0 + x).ln().powf(rho - 1.0) / (1.0 + x);
        let nf = n as f64;
        prop_assert!((h(nf * c.x0) - h(c.x0)).abs() <= 1e-12);
        prop_assert!(c.sup_f >= 0.0 && c.c_rho >= 0.0);
    }

    #[test]
    fn certified_inequality_on_random_tuples(
        rho in prop_oneof![Just(1.5), Just(2.0), Just(3.0)],
        xs in prop::collection::vec(1e-6f64..1e6, 2..9),
    ) {
        let r = verify_quasi_metric(rho, xs.len() as u32, &[xs]).unwrap();
        prop_assert!(r.holds());
    }

    #[test]
    fn log_weight_is_subadditive_up_to_c(a in -500i64..500, b in -500i64..500, rho in 1.1f64..3.0) {
        let c = quasi_metric_constant(rho, 2).unwrap();
        let lhs = log_weight(&[a + b], rho);
        let rhs = log_weight(&[a], rho) + log_weight(&[b], rho) + c.slack();
        prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
    }
}
