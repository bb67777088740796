use ndarray::Array2;
use proptest::prelude::*;
use sdmscr::graph::TextAttributedGraph;
use sdmscr::objectives::{combined_loss, orthogonality_metric, scr_loss, sdm_loss, Negatives};

fn matrix(n: usize, o: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * o)
        .prop_map(move |v| Array2::from_shape_vec((n, o), v).unwrap())
        .prop_filter("rows must be non-zero", |m| {
            m.rows().into_iter().all(|r| r.dot(&r) > 1e-6)
        })
}

fn instance() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, Array2<f64>, TextAttributedGraph)> {
    (2usize..9, 1usize..6).prop_flat_map(|(n, o)| {
        let edges = prop::collection::vec(any::<bool>(), n * (n - 1) / 2);
        (matrix(n, o), matrix(n, o), matrix(n, o), edges).prop_map(move |(a, b, c, mask)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if mask[k] {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            let g = TextAttributedGraph::new(n, &edges, vec![String::new(); n], vec![0; n]).unwrap();
            (a, b, c, g)
        })
    })
}

proptest! {
    #[test]
    fn losses_are_scale_invariant_per_row(
        (ori, rel, irr, g) in instance(),
        which in 0usize..3,
        row in 0usize..8,
        c in prop::sample::select(vec![0.1, 10.0]),
        lambda in 0.0f64..=1.0,
    ) {
        let base = combined_loss(&ori, &rel, &irr, &g, lambda, 0.5, Negatives::All).unwrap().0;
        let (mut o2, mut r2, mut i2) = (ori.clone(), rel.clone(), irr.clone());
        let target = [&mut o2, &mut r2, &mut i2].into_iter().nth(which).unwrap();
        let row = row % target.nrows();
        target.row_mut(row).mapv_inplace(|v| v * c);
        let scaled = combined_loss(&o2, &r2, &i2, &g, lambda, 0.5, Negatives::All).unwrap().0;
        prop_assert!((base.l_sdm - scaled.l_sdm).abs() <= 1e-9);
        prop_assert!((base.l_scr - scaled.l_scr).abs() <= 1e-9);
        prop_assert!((base.l_total - scaled.l_total).abs() <= 1e-9);
    }

    #[test]
    fn sdm_is_positive((ori, rel, irr, _g) in instance(), tau in 0.05f64..5.0) {
        let (l, grads) = sdm_loss(&ori, &rel, &irr, tau, Negatives::All).unwrap();
        prop_assert!(l > 0.0 && l.is_finite());
        prop_assert!(grads.ori.iter().chain(grads.rel.iter()).chain(grads.irr.iter()).all(|v| v.is_finite()));
    }

    #[test]
    fn scr_is_bounded((_o, rel, _i, g) in instance()) {
        let (l, _) = scr_loss(&rel, &g).unwrap();
        prop_assert!((0.0..=2.0).contains(&l));
    }

    #[test]
    fn combination_is_convex((ori, rel, irr, g) in instance(), lambda in 0.0f64..=1.0, tau in 0.1f64..2.0) {
        let (r, _) = combined_loss(&ori, &rel, &irr, &g, lambda, tau, Negatives::All).unwrap();
        prop_assert!((r.l_total - (lambda * r.l_sdm + (1.0 - lambda) * r.l_scr)).abs() <= 1e-12);
        prop_assert!(r.is_finite());
    }

    #[test]
    fn large_logits_stay_finite((ori, rel, irr, _g) in instance()) {
        // e^{-2/τ} underflows here, so only finiteness and sign are checked
        let (l, grads) = sdm_loss(&ori, &rel, &irr, 1e-3, Negatives::All).unwrap();
        prop_assert!(l.is_finite() && l >= 0.0);
        prop_assert!(grads.ori.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn orthogonality_metric_is_a_mean_abs_cosine((a, b, _c, _g) in instance()) {
        let m = orthogonality_metric(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!((orthogonality_metric(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn boundary_weights_report_single_terms_exactly() {
    let g = TextAttributedGraph::new(3, &[(0, 1), (1, 2)], vec![String::new(); 3], vec![0; 3]).unwrap();
    let ori = ndarray::array![[1.0, 0.2], [0.1, 1.0], [0.5, -0.4]];
    let rel = ndarray::array![[0.9, 0.1], [0.2, 0.8], [0.4, -0.5]];
    let irr = ndarray::array![[0.0, 1.0], [1.0, 0.3], [-0.2, 0.1]];
    let (one, _) = combined_loss(&ori, &rel, &irr, &g, 1.0, 0.5, Negatives::All).unwrap();
    assert_eq!(one.l_total, one.l_sdm);
    assert_eq!(one.l_scr, 0.0);
    let (zero, _) = combined_loss(&ori, &rel, &irr, &g, 0.0, 0.5, Negatives::All).unwrap();
    assert_eq!(zero.l_total, zero.l_scr);
}

#[test]
fn random_unit_rows_have_expected_orthogonality() {
    // E|cos| of independent isotropic vectors in 64 dimensions
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = sdmscr::rng::seeded(11);
    let n = 100_000;
    let a = Array2::from_shape_simple_fn((n, 64), || StandardNormal.sample(&mut rng));
    let b = Array2::from_shape_simple_fn((n, 64), || StandardNormal.sample(&mut rng));
    let m = orthogonality_metric(&a, &b).unwrap();
    let expected = (2.0 / (std::f64::consts::PI * 64.0)).sqrt();
    assert!((m - expected).abs() < 0.002, "{m} vs {expected}");
}
