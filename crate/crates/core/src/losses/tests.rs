use proptest::prelude::*;

use super::*;
use crate::numgrad::{grad_check, pair_evaluations, reset_pair_evaluations};
use crate::rng::SeededRng;

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn bank(proxies: Matrix) -> ProxyBank {
    let ids = (0..proxies.rows() as u32).collect();
    ProxyBank::new(proxies, ids).unwrap()
}

fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// Random batch where every class in `0..classes` appears at least twice.
fn random_batch(n: usize, classes: u32, dim: usize, seed: u64) -> (Matrix, Vec<u32>, ProxyBank) {
    let mut rng = SeededRng::new(seed);
    let labels: Vec<u32> = (0..n).map(|i| (i as u32) % classes).collect();
    (random(n, dim, &mut rng), labels, bank(random(classes as usize, dim, &mut rng)))
}

type LossFn = fn(&Matrix, &BatchLabels, &ProxyBank, f64) -> Result<LossValue>;

const PROXY_LOSSES: [(&str, LossFn); 3] = [
    ("proxynca", proxynca_loss),
    ("proxynca_pp", proxynca_pp_loss),
    ("normsoftmax", normsoftmax_loss),
];

fn check_loss_gradients(f: LossFn, emb: &Matrix, labels: &[u32], bank0: &ProxyBank, t: f64) -> (f64, f64) {
    let lab = BatchLabels::new(labels, bank0).unwrap();
    let err_e = grad_check(
        |x| f(x, &lab, bank0, t).map(|l| (l.value, l.grad_embeddings)),
        emb,
        1e-5,
    )
    .unwrap();
    let err_p = grad_check(
        |p| {
            let b = ProxyBank::new(p.clone(), bank0.class_ids.clone())?;
            f(emb, &lab, &b, t).map(|l| (l.value, l.grad_proxies.unwrap()))
        },
        &bank0.proxies,
        1e-5,
    )
    .unwrap();
    (err_e, err_p)
}

#[test]
fn nca_far_apart_pairs() {
    let d: f64 = 10.0;
    let x = m(&[&[0.0, 0.0], &[0.0, 0.0], &[d.sqrt(), 0.0], &[d.sqrt(), 0.0]]);
    let loss = nca_batch_loss(&x, &BatchLabels::unresolved(&[0, 0, 1, 1])).unwrap();
    // each anchor: positive at distance 0, two negatives at squared distance d
    let per_anchor = -(1.0_f64 / (2.0 * (-d).exp())).ln();
    assert!((loss.value - per_anchor).abs() < 1e-12);
    assert!(loss.value < -9.0);
    assert!(loss.grad_proxies.is_none());
}

#[test]
fn nca_rejects_degenerate_batch() {
    let x = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
    match nca_batch_loss(&x, &BatchLabels::unresolved(&[0, 1])) {
        Err(Error::DegenerateBatch { anchor: 0, missing: "positive" }) => {}
        other => panic!("{other:?}"),
    }
    let x = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
    assert!(matches!(
        nca_batch_loss(&x, &BatchLabels::unresolved(&[3, 3])),
        Err(Error::DegenerateBatch { missing: "negative", .. })
    ));
}

#[test]
fn nca_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(31);
    let x = random(6, 3, &mut rng).scale(0.7);
    let lab = BatchLabels::unresolved(&[0, 1, 0, 1, 0, 1]);
    let err = grad_check(|p| nca_batch_loss(p, &lab).map(|l| (l.value, l.grad_embeddings)), &x, 1e-5)
        .unwrap();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn proxynca_worked_example() {
    let b = bank(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let lab = BatchLabels::new(&[0], &b).unwrap();
    let loss = proxynca_loss(&m(&[&[1.0, 0.0]]), &lab, &b, 1.0).unwrap();
    // -log(exp(0) / exp(-2))
    assert!((loss.value - (-2.0)).abs() < 1e-12, "{}", loss.value);
}

#[test]
fn proxynca_equidistant_is_zero() {
    let b = bank(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let lab = BatchLabels::new(&[1], &b).unwrap();
    let x = m(&[&[1.0, 1.0]]);
    assert!(proxynca_loss(&x, &lab, &b, 0.3).unwrap().value.abs() < 1e-12);
}

#[test]
fn proxynca_needs_two_classes() {
    let b = bank(m(&[&[1.0, 0.0]]));
    let lab = BatchLabels::new(&[0], &b).unwrap();
    assert!(matches!(
        proxynca_loss(&m(&[&[1.0, 0.0]]), &lab, &b, 1.0),
        Err(Error::Config(_))
    ));
}

#[test]
fn assignment_prob_examples() {
    let single = bank(m(&[&[0.3, -2.0]]));
    let x = m(&[&[1.0, 0.0], &[0.0, 5.0]]);
    let p = proxy_assignment_prob(&x, &BatchLabels::new(&[0, 0], &single).unwrap(), &single, 0.1).unwrap();
    assert_eq!(p.as_slice(), &[1.0, 1.0]);

    let four = bank(m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, -1.0, 0.0]]));
    let x = m(&[&[0.0, 0.0, 2.0]]);
    let p = proxy_assignment_prob(&x, &BatchLabels::new(&[2], &four).unwrap(), &four, 0.5).unwrap();
    for &v in p.as_slice() {
        assert!((v - 0.25).abs() < 1e-15);
    }

    let two = bank(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let p = proxy_assignment_prob(&m(&[&[1.0, 0.0]]), &BatchLabels::new(&[0], &two).unwrap(), &two, 1.0)
        .unwrap();
    let e2 = (-2.0_f64).exp();
    assert!((p[(0, 0)] - 1.0 / (1.0 + e2)).abs() < 1e-15);
    assert!((p[(0, 1)] - e2 / (1.0 + e2)).abs() < 1e-15);
    assert!((p[(0, 0)] - 0.8808).abs() < 1e-4 && (p[(0, 1)] - 0.1192).abs() < 1e-4);
}

#[test]
fn proxynca_pp_worked_example() {
    let b = bank(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let lab = BatchLabels::new(&[0], &b).unwrap();
    let loss = proxynca_pp_loss(&m(&[&[1.0, 0.0]]), &lab, &b, 1.0).unwrap();
    let expected = -(1.0 / (1.0 + (-2.0_f64).exp())).ln();
    assert!((loss.value - expected).abs() < 1e-15);
    assert!((loss.value - 0.1269).abs() < 1e-4);
}

#[test]
fn single_proxy_losses_are_zero() {
    let b = bank(m(&[&[0.2, 0.9]]));
    let x = m(&[&[1.0, -3.0], &[0.5, 0.5]]);
    let lab = BatchLabels::new(&[0, 0], &b).unwrap();
    assert_eq!(proxynca_pp_loss(&x, &lab, &b, 1.0 / 9.0).unwrap().value, 0.0);
    assert_eq!(normsoftmax_loss(&x, &lab, &b, 0.5).unwrap().value, 0.0);
}

#[test]
fn unknown_label_is_rejected() {
    let b = bank(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
    assert!(matches!(BatchLabels::new(&[5], &b), Err(Error::Labeling(_))));
    let foreign = BatchLabels::unresolved(&[0]);
    assert!(matches!(
        proxynca_pp_loss(&m(&[&[1.0, 0.0]]), &foreign, &b, 1.0),
        Err(Error::Labeling(_))
    ));
}

#[test]
fn rejects_bad_temperature() {
    let (x, labels, b) = random_batch(4, 2, 3, 1);
    let lab = BatchLabels::new(&labels, &b).unwrap();
    for t in [0.0, -1.0, f64::NAN] {
        assert!(proxynca_pp_loss(&x, &lab, &b, t).is_err());
        assert!(proxynca_loss(&x, &lab, &b, t).is_err());
    }
}

#[test]
fn proxy_loss_gradients_match_finite_differences() {
    for (name, f) in PROXY_LOSSES {
        for (seed, t) in [(1, 1.0), (2, 1.0 / 9.0), (3, 0.5)] {
            let (x, labels, b) = random_batch(6, 3, 4, seed);
            let (ee, ep) = check_loss_gradients(f, &x, &labels, &b, t);
            assert!(ee < 1e-5 && ep < 1e-5, "{name} T={t}: {ee} {ep}");
        }
    }
}

#[test]
fn raw_proxy_variant_gradients_match_finite_differences() {
    let (x, labels, b0) = random_batch(6, 3, 4, 9);
    let lab = BatchLabels::new(&labels, &b0).unwrap();
    for kind in [LossKind::ProxyNca, LossKind::ProxyNcaPp, LossKind::NormSoftmax] {
        let err = grad_check(
            |p| {
                let b = ProxyBank::new(p.clone(), b0.class_ids.clone())?;
                evaluate_loss(kind, &x, &lab, &b, 0.5, ProxyNorm::Raw)
                    .map(|l| (l.value, l.grad_proxies.unwrap()))
            },
            &b0.proxies,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "{kind:?}: {err}");
    }
}

#[test]
fn removing_own_term_from_pp_denominator_gives_proxynca() {
    for seed in 0..20 {
        let (x, labels, b) = random_batch(5, 4, 3, 100 + seed);
        let t = 1.0;
        // per-sample ProxyNCA values recomputed from explicit exponentials
        let xh = numgrad::l2_normalize(&x).unwrap().value;
        let ph = numgrad::l2_normalize(&b.proxies).unwrap().value;
        for i in 0..x.rows() {
            let y = labels[i] as usize;
            let e: Vec<f64> = (0..ph.rows())
                .map(|a| {
                    let d: f64 = xh.row(i).iter().zip(ph.row(a)).map(|(u, v)| (u - v).powi(2)).sum();
                    (-d / t).exp()
                })
                .collect();
            let all: f64 = e.iter().sum();
            let without_own = all - e[y];
            let eq3 = -(e[y] / without_own).ln();
            let one = BatchLabels::new(&labels[i..=i], &b).unwrap();
            let single = x.select_rows(&[i]);
            let got = proxynca_loss(&single, &one, &b, t).unwrap().value;
            assert!((got - eq3).abs() < 1e-12, "{got} vs {eq3}");
        }
    }
}

#[test]
fn pp_at_t_equals_normsoftmax_at_half_t() {
    for seed in 0..20 {
        let (x, labels, b) = random_batch(7, 3, 5, 200 + seed);
        let lab = BatchLabels::new(&labels, &b).unwrap();
        for t in [1.0, 1.0 / 9.0, 0.25, 3.0] {
            let pp = proxynca_pp_loss(&x, &lab, &b, t).unwrap();
            let ns = normsoftmax_loss(&x, &lab, &b, t / 2.0).unwrap();
            assert!((pp.value - ns.value).abs() < 1e-10);
            assert!(pp.grad_embeddings.max_abs_diff(&ns.grad_embeddings) < 1e-9);
        }
    }
}

fn entropy(row: &[f64]) -> f64 {
    -row.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

#[test]
fn entropy_grows_with_temperature_and_argmax_is_fixed() {
    let grid: Vec<f64> = (-5..=4).map(|e| 2f64.powi(e)).collect();
    assert_eq!(grid.len(), 10);
    for seed in 0..20 {
        let (x, labels, b) = random_batch(6, 5, 4, 300 + seed);
        let lab = BatchLabels::new(&labels, &b).unwrap();
        let probs: Vec<Matrix> = grid
            .iter()
            .map(|&t| proxy_assignment_prob(&x, &lab, &b, t).unwrap())
            .collect();
        for i in 0..x.rows() {
            let argmax = |p: &Matrix| {
                (0..p.cols())
                    .max_by(|&a, &c| p[(i, a)].partial_cmp(&p[(i, c)]).unwrap())
                    .unwrap()
            };
            let a0 = argmax(&probs[0]);
            let mut prev = f64::NEG_INFINITY;
            for p in &probs {
                assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let h = entropy(p.row(i));
                assert!(h >= prev - 1e-12, "entropy decreased");
                prev = h;
                assert_eq!(argmax(p), a0);
            }
        }
    }
}

#[test]
fn counts_b_times_k_distances() {
    let (x, labels, b) = random_batch(12, 5, 4, 7);
    let lab = BatchLabels::new(&labels, &b).unwrap();
    for (_, f) in PROXY_LOSSES {
        reset_pair_evaluations();
        f(&x, &lab, &b, 0.5).unwrap();
        assert_eq!(pair_evaluations(), 12 * 5);
    }
    reset_pair_evaluations();
    proxy_assignment_prob(&x, &lab, &b, 0.5).unwrap();
    assert_eq!(pair_evaluations(), 60);
}

#[test]
fn pp_and_normsoftmax_are_non_negative() {
    for seed in 0..20 {
        let (x, labels, b) = random_batch(6, 3, 4, 400 + seed);
        let lab = BatchLabels::new(&labels, &b).unwrap();
        assert!(proxynca_pp_loss(&x, &lab, &b, 0.2).unwrap().value >= 0.0);
        assert!(normsoftmax_loss(&x, &lab, &b, 0.2).unwrap().value >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_are_permutation_equivariant(seed in 0u64..10_000, t in 0.05f64..2.0) {
        let (x, labels, b) = random_batch(6, 3, 4, seed);
        let mut perm: Vec<usize> = (0..6).collect();
        SeededRng::new(seed ^ 0xabc).shuffle(&mut perm);
        let xp = x.select_rows(&perm);
        let lp: Vec<u32> = perm.iter().map(|&i| labels[i]).collect();
        let lab = BatchLabels::new(&labels, &b).unwrap();
        let labp = BatchLabels::new(&lp, &b).unwrap();
        for (_, f) in PROXY_LOSSES {
            let a = f(&x, &lab, &b, t).unwrap();
            let c = f(&xp, &labp, &b, t).unwrap();
            prop_assert!((a.value - c.value).abs() < 1e-12);
            prop_assert!(a.grad_embeddings.select_rows(&perm).max_abs_diff(&c.grad_embeddings) < 1e-12);
            prop_assert!(a.grad_proxies.unwrap().max_abs_diff(&c.grad_proxies.unwrap()) < 1e-12);
        }
        let a = nca_batch_loss(&x, &BatchLabels::unresolved(&labels)).unwrap();
        let c = nca_batch_loss(&xp, &BatchLabels::unresolved(&lp)).unwrap();
        prop_assert!((a.value - c.value).abs() < 1e-12);
        prop_assert!(a.grad_embeddings.select_rows(&perm).max_abs_diff(&c.grad_embeddings) < 1e-12);
    }
}
