use cdce_core::cdce::{soft_threshold, threshold_select, twisted_convolution};
use cdce_core::channel::ChannelStats;
use cdce_core::grid::{dd_to_tf, remove_cp, tf_to_dd, tf_to_time, time_to_tf, DdGrid, Dims, TfGrid};
use cdce_core::linalg::cis;
use cdce_core::pilot::discrete_af;
use cdce_core::{CMatrix, CVector, C64};
use proptest::prelude::*;

fn dft(size: usize) -> CMatrix {
    let s = (size as f64).sqrt();
    CMatrix::from_fn(size, size, |a, b| cis(-((a * b) as f64) / size as f64) / s)
}

fn grid(max_m: usize, max_n: usize) -> impl Strategy<Value = CMatrix> {
    (1..=max_m, 1..=max_n).prop_flat_map(|(m, n)| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * n)
            .prop_map(move |v| CMatrix::from_iterator(m, n, v.into_iter().map(|(a, b)| C64::new(a, b))))
    })
}

fn cp_grid() -> impl Strategy<Value = (CMatrix, usize)> {
    grid(8, 6).prop_filter("needs room for a prefix", |x| x.nrows() >= 2).prop_flat_map(|x| {
        let m = x.nrows();
        (Just(x), 0..m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sfft_is_unitary(x in grid(8, 8)) {
        let d = Dims::new(x.nrows(), x.ncols(), 0).unwrap();
        let tf = TfGrid::new(x).unwrap();
        let dd = tf_to_dd(&tf, d).unwrap();
        prop_assert!((dd.energy() - tf.energy()).abs() <= 1e-12 * tf.energy().max(1.0));
        let back = dd_to_tf(&dd, d).unwrap();
        prop_assert!((back.values() - tf.values()).norm() <= 1e-12 * tf.energy().sqrt().max(1.0));
    }

    #[test]
    fn sfft_matches_kronecker_form(x in grid(4, 4)) {
        let (m, n) = x.shape();
        let d = Dims::new(m, n, 0).unwrap();
        let dd = tf_to_dd(&TfGrid::new(x.clone()).unwrap(), d).unwrap();
        let op = dft(n).kronecker(&dft(m).adjoint());
        let expected = op * CVector::from_column_slice(x.as_slice());
        let got = CVector::from_column_slice(dd.as_vec());
        prop_assert!((got - expected).norm() <= 1e-12);
    }

    #[test]
    fn modulation_matches_kronecker_form(x in grid(4, 4)) {
        let (m, n) = x.shape();
        let d = Dims::new(m, n, 0).unwrap();
        let s = tf_to_time(&TfGrid::new(x.clone()).unwrap(), d, false).unwrap();
        let op = CMatrix::identity(n, n).kronecker(&dft(m).adjoint());
        let expected = op * CVector::from_column_slice(x.as_slice());
        prop_assert!((CVector::from_column_slice(s.samples()) - expected).norm() <= 1e-12);
    }

    #[test]
    fn cyclic_prefix_round_trip((x, cp) in cp_grid()) {
        let d = Dims::new(x.nrows(), x.ncols(), cp).unwrap();
        let tf = TfGrid::new(x).unwrap();
        let s = tf_to_time(&tf, d, true).unwrap();
        prop_assert_eq!(s.samples().len(), d.frame_len());
        for block in s.samples().chunks(d.block_len()) {
            for i in 0..cp {
                prop_assert_eq!(block[i], block[d.m() + i]);
            }
        }
        let back = time_to_tf(&remove_cp(&s, d).unwrap(), d).unwrap();
        prop_assert!((back.values() - tf.values()).norm() <= 1e-12 * tf.energy().sqrt().max(1.0));
    }

    #[test]
    fn af_is_self_correlation_and_peaks_at_origin(x in grid(6, 6)) {
        let dd = DdGrid::new(x).unwrap();
        let af = discrete_af(&dd);
        let tc = twisted_convolution(&dd, &dd).unwrap();
        prop_assert!((&af - &tc).norm() <= 1e-10 * dd.energy().max(1.0));
        let peak = af[(0, 0)];
        prop_assert!((peak.re - dd.energy()).abs() <= 1e-10 * dd.energy().max(1.0));
        prop_assert!(peak.im.abs() <= 1e-10 * dd.energy().max(1.0));
        for v in af.iter() {
            prop_assert!(v.norm() <= peak.re * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero(re in -5.0f64..5.0, im in -5.0f64..5.0, g in 0.0f64..3.0) {
        let x = C64::new(re, im);
        let y = soft_threshold(x, g);
        prop_assert!(y.norm() <= x.norm());
        prop_assert!((y.norm() - (x.norm() - g).max(0.0)).abs() <= 1e-12);
        if y.norm() > 0.0 {
            prop_assert!((y / y.norm() - x / x.norm()).norm() <= 1e-12);
        }
    }

    #[test]
    fn raising_the_threshold_keeps_a_subset(v in grid(8, 14), g1 in 0.0f64..1.5, dg in 0.0f64..1.0) {
        prop_assume!(v.nrows() >= 3 && v.ncols() >= 7);
        let stats = ChannelStats::new(1, 2, 3);
        let low = threshold_select(&v, stats, g1);
        let high = threshold_select(&v, stats, g1 + dg);
        prop_assert!(high.pairs.iter().all(|p| low.pairs.contains(p)));
        prop_assert!(low.scores.windows(2).all(|w| w[0].norm() >= w[1].norm()));
    }
}
