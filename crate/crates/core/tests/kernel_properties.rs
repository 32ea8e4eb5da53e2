use proptest::prelude::*;

use ks_core::kernel::{CoulombKernel, Cutoff, KernelTable, Mollifier};
use ks_core::kernel_check::convolution_oracle;
use ks_core::pde::gaussian;
use ks_core::spectral::Spectral;
use ks_core::Grid;

fn c_d(d: usize) -> f64 {
    // d |B_1|
    match d {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!(),
    }
}

proptest! {
    #[test]
    fn cutoff_is_one_lipschitz_and_bounded(a in 0.1f64..5.0, x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let f = Cutoff::new(a).unwrap();
        let (fx, fy) = (f.scalar(x), f.scalar(y));
        prop_assert!((fx - fy).abs() <= (x - y).abs() * (1.0 + 1e-12) + 1e-15);
        prop_assert!(fx.abs() <= a + 1.0);
        if x.abs() <= a {
            prop_assert_eq!(fx, x);
        }
        if x > a + 1.0 {
            prop_assert_eq!(fx, a);
        }
        if x < -(a + 1.0) {
            prop_assert_eq!(fx, -a);
        }
        prop_assert_eq!(f.scalar(-x), -fx);
    }

    #[test]
    fn coulomb_magnitude_and_antisymmetry(d in 2usize..=3, v in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = &v[..d];
        let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let k = CoulombKernel::new(d).unwrap();
        let kx = k.eval(x).unwrap();
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        let kn = k.eval(&neg).unwrap();
        let mag = kx.iter().map(|c| c * c).sum::<f64>().sqrt();
        let expect = n.powi(1 - d as i32) / c_d(d);
        prop_assert!((mag / expect - 1.0).abs() < 1e-12);
        for i in 0..d {
            prop_assert_eq!(kx[i], -kn[i]);
            // points toward the origin
            prop_assert!(kx[i] * x[i] <= 0.0);
        }
    }

    #[test]
    fn table_lookup_is_antisymmetric(x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let moll = Mollifier::new(2, 0.5, 4).unwrap();
        let table = KernelTable::build(CoulombKernel::new(2).unwrap(), &moll, 2.0, moll.radius() / 16.0).unwrap();
        let a = table.lookup(&[x, y]);
        let b = table.lookup(&[-x, -y]);
        let scale = table.sup_norm();
        for i in 0..2 {
            prop_assert!((a[i] + b[i]).abs() <= 1e-12 * scale);
        }
        prop_assert!(a.iter().map(|c| c * c).sum::<f64>().sqrt() <= scale * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fourier_identity_on_mean_zero_mixtures(
        cx in -1.0f64..1.0, cy in -1.0f64..1.0, s1 in 0.3f64..0.6, s2 in 0.3f64..0.6, w in 0.2f64..2.0
    ) {
        let g = Grid::new(2, 128, 4.0).unwrap();
        let a = gaussian(&g, w, s1, &[cx, cy]);
        let b = gaussian(&g, w, s2, &[-cy, cx]);
        let f = a.sub(&b).unwrap();
        let out = Spectral::new(g).neg_div_kernel(&f);
        let err = out.sub(&f).unwrap().norm_lp(2.0) / f.norm_lp(2.0);
        prop_assert!(err < 1e-6, "{}", err);
    }
}

#[test]
fn table_matches_direct_quadrature() {
    let moll = Mollifier::new(2, 1.0 / 6.0, 1000).unwrap();
    let r = moll.radius();
    let table = KernelTable::build(CoulombKernel::new(2).unwrap(), &moll, 8.0, r / 32.0).unwrap();
    for &(px, py) in &[(0.3, 0.1), (-0.5, 0.6), (0.05, -0.9), (1.5, 0.4)] {
        let x = [px * r, py * r];
        let t = table.lookup(&x);
        let q = convolution_oracle(&moll, &x, 256, 256);
        let scale = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        for i in 0..2 {
            assert!((t[i] - q[i]).abs() <= 5e-3 * scale.max(1e-3), "{x:?}: {t:?} vs {q:?}");
        }
    }
}

#[test]
fn table_sup_grows_like_n_to_alpha_d_minus_1() {
    // sup |K*theta^N| = C N^{alpha (d - 1)}
    let alpha = 0.25;
    let mut ratios = Vec::new();
    for n in [16usize, 256, 4096] {
        let moll = Mollifier::new(2, alpha, n).unwrap();
        let table = KernelTable::build(CoulombKernel::new(2).unwrap(), &moll, 2.0, moll.radius() / 32.0).unwrap();
        ratios.push(table.sup_norm() / (n as f64).powf(alpha));
    }
    for w in ratios.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.02, "{ratios:?}");
    }
}
