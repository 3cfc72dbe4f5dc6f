use super::*;
use crate::embedder::pool_batch;
use crate::evalkit::recall_at_1;

fn small_cfg(seed: u64) -> ZeroShotConfig {
    ZeroShotConfig {
        num_classes: 6,
        per_class: 5,
        seed,
        ..ZeroShotConfig::default()
    }
}

#[test]
fn noiseless_moons_lie_on_arcs() {
    let ds = make_two_moons(4, 0.0, 0).unwrap();
    let p = ds.points().unwrap();
    let expect = [[1.0, 0.0], [-1.0, 0.0], [0.0, 0.5], [2.0, 0.5]];
    for (row, e) in p.iter_rows().zip(expect) {
        assert!((row[0] - e[0]).abs() < 1e-12 && (row[1] - e[1]).abs() < 1e-12, "{row:?}");
    }
    assert_eq!(ds.labels, vec![0, 0, 1, 1]);

    let ds = make_two_moons(600, 0.0, 3).unwrap();
    for (row, &l) in ds.points().unwrap().iter_rows().zip(&ds.labels) {
        let r = if l == 0 {
            row[0].hypot(row[1])
        } else {
            (1.0 - row[0]).hypot(0.5 - row[1])
        };
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn moons_default_configuration() {
    let ds = make_two_moons(600, 0.3, 0).unwrap();
    assert_eq!(ds.labels.iter().filter(|&&l| l == 0).count(), 300);
    assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 300);
    let clean = make_two_moons(600, 0.0, 0).unwrap();
    let (p, c) = (ds.points().unwrap(), clean.points().unwrap());
    let bound = 3.0 * 0.3 / 300f64.sqrt();
    for col in 0..2 {
        let mean = (0..300).map(|i| p[(i, col)] - c[(i, col)]).sum::<f64>() / 300.0;
        assert!(mean.abs() < bound, "{mean}");
    }
}

#[test]
fn moons_errors_and_determinism() {
    assert!(make_two_moons(5, 0.1, 0).is_err());
    assert!(make_two_moons(0, 0.1, 0).is_err());
    assert!(make_two_moons(4, -0.1, 0).is_err());
    assert_eq!(make_two_moons(20, 0.3, 1).unwrap(), make_two_moons(20, 0.3, 1).unwrap());
    assert_ne!(make_two_moons(20, 0.3, 1).unwrap(), make_two_moons(20, 0.3, 2).unwrap());
}

#[test]
fn zero_shot_splits_are_disjoint_and_deterministic() {
    let (train, test) = make_zero_shot_gaussians(&small_cfg(1)).unwrap();
    assert_eq!(train.classes(), vec![0, 1, 2]);
    assert_eq!(test.classes(), vec![3, 4, 5]);
    assert_eq!(train.len(), 15);
    assert_eq!(train.map_shape(), Some((4, 32)));
    let (again, _) = make_zero_shot_gaussians(&small_cfg(1)).unwrap();
    assert_eq!(train, again);
    let (other, _) = make_zero_shot_gaussians(&small_cfg(2)).unwrap();
    assert_ne!(train, other);
}

#[test]
fn zero_shot_parameter_checks() {
    for bad in [
        ZeroShotConfig { num_classes: 5, ..small_cfg(0) },
        ZeroShotConfig { num_classes: 2, ..small_cfg(0) },
        ZeroShotConfig { object_size: 17, ..small_cfg(0) },
        ZeroShotConfig { separation: -1.0, ..small_cfg(0) },
        ZeroShotConfig { per_class: 0, ..small_cfg(0) },
    ] {
        assert!(make_zero_shot_gaussians(&bad).is_err());
    }
}

fn pooled(ds: &LabeledDataset, k: usize) -> crate::numgrad::Matrix {
    let refs: Vec<_> = ds.feature_maps().unwrap().iter().collect();
    pool_batch(&refs, k).unwrap()
}

#[test]
fn zero_separation_is_chance_level() {
    let mut total = 0.0;
    for seed in 0..5 {
        let cfg = ZeroShotConfig { separation: 0.0, num_classes: 20, seed, ..ZeroShotConfig::default() };
        let (_, test) = make_zero_shot_gaussians(&cfg).unwrap();
        total += recall_at_1(&pooled(&test, 1), &test.labels).unwrap();
    }
    let mean = total / 5.0;
    // chance for 10 classes of 30: 29 / 299
    assert!((mean - 29.0 / 299.0).abs() < 0.04, "{mean}");
}

#[test]
fn wide_separation_is_linearly_trivial() {
    let cfg = ZeroShotConfig {
        separation: 40.0,
        nuisance_sigma: 0.0,
        background: 0.1,
        ..ZeroShotConfig::default()
    };
    let (train, _) = make_zero_shot_gaussians(&cfg).unwrap();
    let x = pooled(&train, 1);
    let classes = train.classes();
    let means: Vec<Vec<f64>> = classes
        .iter()
        .map(|&c| {
            let idx: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == c).collect();
            (0..x.cols()).map(|j| idx.iter().map(|&i| x[(i, j)]).sum::<f64>() / idx.len() as f64).collect()
        })
        .collect();
    let correct = (0..train.len())
        .filter(|&i| {
            let best = (0..classes.len())
                .min_by(|&a, &b| {
                    let da: f64 = x.row(i).iter().zip(&means[a]).map(|(u, v)| (u - v).powi(2)).sum();
                    let db: f64 = x.row(i).iter().zip(&means[b]).map(|(u, v)| (u - v).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            classes[best] == train.labels[i]
        })
        .count();
    assert!(correct as f64 / train.len() as f64 >= 0.99, "{correct}");
}

#[test]
fn dataset_file_round_trips() {
    let (train, _) = make_zero_shot_gaussians(&small_cfg(4)).unwrap();
    let text = train.to_text().unwrap();
    assert_eq!(LabeledDataset::from_text(&text).unwrap(), train);

    let mut moons = make_two_moons(10, 0.3, 0).unwrap();
    moons.class_names = Some(vec!["upper".into(), "lower".into()]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("moons.txt");
    save_dataset(&moons, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), moons);
}

#[test]
fn dataset_file_errors() {
    let moons = make_two_moons(10, 0.3, 0).unwrap();
    let text = moons.to_text().unwrap();
    let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
    match LabeledDataset::from_text(&truncated) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 7);
            assert!(msg.contains("truncated"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
    let short_row = text.replacen(" 3", "", 1);
    assert!(matches!(LabeledDataset::from_text(&short_row), Err(Error::Parse { .. })));
    let empty = r#"{"format":"proxylab-dataset","version":1,"kind":"points","count":0,"width":2,"spatial":null,"channels":null,"labels":[],"class_names":null}"#;
    assert!(LabeledDataset::from_text(empty).is_err());
    let v2 = text.replacen("\"version\":1", "\"version\":2", 1);
    match LabeledDataset::from_text(&v2) {
        Err(Error::Parse { line: 1, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(LabeledDataset::from_text("").is_err());
    let empty_ds = LabeledDataset::new(Samples::Points(crate::numgrad::Matrix::zeros(0, 2)), vec![]).unwrap();
    assert!(empty_ds.to_text().is_err());
}
