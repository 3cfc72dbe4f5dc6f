use super::*;
use crate::numgrad::grad_check;
use crate::pooling::FeatureMap;

fn random_maps(n: usize, m: usize, e: usize, seed: u64) -> Vec<FeatureMap> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| FeatureMap::new(m, Matrix::from_fn(m * m, e, |_, _| rng.normal())).unwrap())
        .collect()
}

fn std_of(m: &Matrix) -> f64 {
    let n = m.as_slice().len() as f64;
    let mean = m.sum() / n;
    (m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[test]
fn constant_map_through_identity_head() {
    let params = EmbedderParams {
        pool_k: 4,
        embed_weights: Matrix::identity(3),
        embed_bias: Matrix::filled(1, 3, 0.5),
        use_layer_norm: false,
        ln_epsilon: DEFAULT_LN_EPSILON,
    };
    let fm = FeatureMap::new(2, Matrix::filled(4, 3, 1.0)).unwrap();
    let out = embed_batch(&[&fm], &params).unwrap().value;
    for &v in out.as_slice() {
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn identical_maps_embed_identically() {
    let maps = random_maps(1, 3, 5, 1);
    let params = init_params(5, 4, 0).unwrap();
    let out = embed_batch(&[&maps[0], &maps[0]], &params).unwrap().value;
    assert_eq!(out.row(0), out.row(1));
}

#[test]
fn rejects_mismatched_channels() {
    let maps = random_maps(1, 3, 5, 1);
    let params = init_params(6, 4, 0).unwrap();
    assert!(matches!(embed_batch(&[&maps[0]], &params), Err(Error::Shape { .. })));
    let other = random_maps(1, 2, 5, 2);
    let params = init_params(5, 4, 0).unwrap();
    assert!(embed_batch(&[&maps[0], &other[0]], &params).is_err());
}

#[test]
fn rows_unit_norm_for_every_configuration() {
    let maps = random_maps(6, 3, 8, 3);
    let refs: Vec<&FeatureMap> = maps.iter().collect();
    for k in [1, 4, 9] {
        for ln in [false, true] {
            let params = init_params(8, 5, 7).unwrap().with_pool_k(k).with_layer_norm(ln);
            let out = embed_batch(&refs, &params).unwrap().value;
            assert_eq!(out.shape(), (6, 5));
            for row in out.iter_rows() {
                let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn head_gradient_matches_finite_differences() {
    let maps = random_maps(5, 3, 6, 4);
    let refs: Vec<&FeatureMap> = maps.iter().collect();
    let mut rng = SeededRng::new(5);
    let w = Matrix::from_fn(5, 4, |_, _| rng.normal());
    for k in [1, 3, 9] {
        for ln in [false, true] {
            let base = init_params(6, 4, 11).unwrap().with_pool_k(k).with_layer_norm(ln);
            let scalar = |p: &EmbedderParams| -> Result<(f64, HeadGrads)> {
                let gp = embed_batch(&refs, p)?;
                let v = gp.value.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
                Ok((v, gp.pullback(&w)))
            };
            let err_w = grad_check(
                |x| {
                    let mut p = base.clone();
                    p.embed_weights = x.clone();
                    scalar(&p).map(|(v, g)| (v, g.weights))
                },
                &base.embed_weights,
                1e-5,
            )
            .unwrap();
            let err_b = grad_check(
                |x| {
                    let mut p = base.clone();
                    p.embed_bias = x.clone();
                    scalar(&p).map(|(v, g)| (v, g.bias))
                },
                &base.embed_bias,
                1e-5,
            )
            .unwrap();
            assert!(err_w < 1e-5 && err_b < 1e-5, "k={k} ln={ln}: {err_w} {err_b}");
        }
    }
}

#[test]
fn max_pooling_ignores_duplicated_positions_average_does_not() {
    // position 3 is dominated everywhere; overwrite it with a copy of position 1
    let base = Matrix::from_rows(&[
        [1.0, 0.5, 2.0],
        [3.0, 1.0, 0.2],
        [0.4, 2.5, 1.0],
        [0.0, 0.0, 0.0],
    ])
    .unwrap();
    let mut dup = base.clone();
    let src = base.row(1).to_vec();
    dup.row_mut(3).copy_from_slice(&src);
    let a = FeatureMap::new(2, base).unwrap();
    let b = FeatureMap::new(2, dup).unwrap();
    let params = init_params(3, 4, 1).unwrap();
    let gmp = params.clone().with_pool_k(1);
    assert_eq!(
        embed_batch(&[&a], &gmp).unwrap().value,
        embed_batch(&[&b], &gmp).unwrap().value
    );
    let gap = params.with_pool_k(4);
    assert_ne!(
        embed_batch(&[&a], &gap).unwrap().value,
        embed_batch(&[&b], &gap).unwrap().value
    );
}

#[test]
fn init_params_deterministic_and_scaled() {
    assert_eq!(init_params(16, 8, 3).unwrap(), init_params(16, 8, 3).unwrap());
    assert_ne!(
        init_params(16, 8, 3).unwrap().embed_weights,
        init_params(16, 8, 4).unwrap().embed_weights
    );
    let p = init_params(256, 64, 0).unwrap();
    let target = 1.0 / 16.0;
    assert!((std_of(&p.embed_weights) - target).abs() < 0.2 * target);
    assert_eq!(p.embed_bias, Matrix::zeros(1, 64));
    assert!(init_params(0, 4, 0).is_err());
}

#[test]
fn init_proxies_deterministic_and_scaled() {
    let ids: Vec<u32> = (0..100).collect();
    assert_eq!(init_proxies(&ids, 64, 1).unwrap(), init_proxies(&ids, 64, 1).unwrap());
    assert_ne!(init_proxies(&ids, 64, 1).unwrap(), init_proxies(&ids, 64, 2).unwrap());
    let bank = init_proxies(&ids, 64, 0).unwrap();
    assert!((std_of(&bank.proxies) - 0.125).abs() < 0.2 * 0.125);
    assert_eq!(bank.row_of(42), Some(42));
    assert!(init_proxies(&[], 4, 0).is_err());
    assert!(ProxyBank::new(Matrix::zeros(2, 3), vec![1, 1]).is_err());
}

#[test]
fn toy_zero_weights_give_zero_logits() {
    let pts = Matrix::from_rows(&[[0.3, -1.0], [2.0, 1.0]]).unwrap();
    assert_eq!(toy_forward(&pts, &ToyBackbone::zeros()).unwrap().value, Matrix::zeros(2, 2));
    assert!(toy_forward(&Matrix::zeros(2, 3), &ToyBackbone::zeros()).is_err());
}

#[test]
fn toy_single_active_unit() {
    let mut net = ToyBackbone::zeros();
    net.layer1_weights[(0, 7)] = 2.0;
    net.layer2_weights[(7, 0)] = 0.5;
    net.layer2_weights[(7, 1)] = -3.0;
    let pts = Matrix::from_rows(&[[1.5, 9.0]]).unwrap();
    let logits = toy_forward(&pts, &net).unwrap().value;
    assert_eq!(logits.as_slice(), &[1.5, -9.0]);
}

#[test]
fn toy_gradient_matches_finite_differences() {
    let net = ToyBackbone::init(3);
    let mut rng = SeededRng::new(8);
    let pts = Matrix::from_fn(7, 2, |_, _| rng.normal());
    let w = Matrix::from_fn(7, 2, |_, _| rng.normal());
    let eval = |n: &ToyBackbone| -> Result<(f64, ToyGrads)> {
        let gp = toy_forward(&pts, n)?;
        let v = gp.value.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
        Ok((v, gp.pullback(&w)))
    };
    for block in 0..4 {
        let start = net.clone().blocks_mut()[block].clone();
        let err = grad_check(
            |x| {
                let mut n = net.clone();
                *n.blocks_mut()[block] = x.clone();
                eval(&n).map(|(v, g)| (v, g.blocks()[block].clone()))
            },
            &start,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "block {block}: {err}");
    }
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let mut params = init_params(6, 4, 1).unwrap().with_pool_k(3);
    params.ln_epsilon = 1.0 / 3.0;
    params.embed_weights[(0, 0)] = -0.0;
    params.embed_weights[(1, 1)] = f64::MIN_POSITIVE / 8.0;
    let bank = init_proxies(&[4, 9, 2], 4, 1).unwrap();
    let ckpt = Checkpoint::new(17, serde_json::json!({"loss": "proxynca_pp"}), params, bank);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.embedder.embed_weights), bits(&ckpt.embedder.embed_weights));
    assert_eq!(back.embedder.ln_epsilon.to_bits(), ckpt.embedder.ln_epsilon.to_bits());
    assert_eq!(back, ckpt);
    assert_eq!(back.to_json().unwrap(), ckpt.to_json().unwrap());
}

#[test]
fn checkpoint_rejects_inconsistent_blocks() {
    let params = init_params(6, 4, 1).unwrap();
    let bank = init_proxies(&[0, 1], 5, 1).unwrap();
    let text = Checkpoint::new(0, serde_json::Value::Null, params, bank).to_json().unwrap();
    assert!(Checkpoint::from_json(&text).is_err());
}
