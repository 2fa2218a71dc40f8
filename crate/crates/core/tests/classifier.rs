use meip::classifier::{extract_features, ClassGaussian, ConfusionMatrix, FeatureMap, GaussianClassifier};
use meip::fem::{assemble_stiffness, grayscale_to_force, DesignField, GridMesh, NodeVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hand_dataset_matches_direct_formulas() {
    let class0 = [[1.0, 2.0], [3.0, 2.0], [2.0, 4.0], [2.0, 0.0]];
    let class1 = [[-1.0, -1.0], [0.0, -2.0], [-2.0, -0.5]];
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for z in class0 {
        features.push(z.to_vec());
        labels.push(0);
    }
    for z in class1 {
        features.push(z.to_vec());
        labels.push(1);
    }
    let ridge = 1e-3;
    let model = GaussianClassifier::fit(&features, &labels, 2, ridge).unwrap();
    for (j, pts) in [(0usize, &class0[..]), (1, &class1[..])] {
        let m = pts.len() as f64;
        let mu = [pts.iter().map(|p| p[0]).sum::<f64>() / m, pts.iter().map(|p| p[1]).sum::<f64>() / m];
        let mut s = [[0.0; 2]; 2];
        for p in pts {
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += (p[a] - mu[a]) * (p[b] - mu[b]) / m;
                }
            }
        }
        let bump = ridge * (s[0][0] + s[1][1]) / 2.0;
        s[0][0] += bump;
        s[1][1] += bump;
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let b = [inv[0][0] * mu[0] + inv[0][1] * mu[1], inv[1][0] * mu[0] + inv[1][1] * mu[1]];
        let prior = m / 7.0;
        let c = -0.5 * (mu[0] * b[0] + mu[1] * b[1]) - 0.5 * det.ln() + prior.ln();
        let g = &model.classes()[j];
        assert!((g.prior - prior).abs() <= 1e-15);
        assert!((g.mean[0] - mu[0]).abs() <= 1e-14 && (g.mean[1] - mu[1]).abs() <= 1e-14);
        for a in 0..2 {
            for k in 0..2 {
                assert!((g.cov[a * 2 + k] - s[a][k]).abs() <= 1e-14);
                assert!((g.h()[a * 2 + k] + inv[a][k]).abs() <= 1e-12);
            }
            assert!((g.b()[a] - b[a]).abs() <= 1e-12);
        }
        assert!((g.c() - c).abs() <= 1e-12, "class {j}: {} vs {c}", g.c());
        let z = [0.7, -0.3];
        let dz = [z[0] - mu[0], z[1] - mu[1]];
        let maha = dz[0] * (inv[0][0] * dz[0] + inv[0][1] * dz[1]) + dz[1] * (inv[1][0] * dz[0] + inv[1][1] * dz[1]);
        let zinvz = z[0] * (inv[0][0] * z[0] + inv[0][1] * z[1]) + z[1] * (inv[1][0] * z[0] + inv[1][1] * z[1]);
        // log of prior * N(z; μ, Σ) up to the shared −ln 2π, plus the μ-free ½ zᵀΣ⁻¹z
        let want = -0.5 * maha - 0.5 * det.ln() + prior.ln() + 0.5 * zinvz;
        assert!((g.discriminant(&z) + 0.5 * zinvz - want).abs() <= 1e-12);
    }
}

#[test]
fn symmetric_one_dimensional_classes() {
    let features: Vec<Vec<f64>> = vec![vec![-1.0], vec![1.0], vec![1.0], vec![3.0]];
    let labels = [0, 0, 1, 1];
    let model = GaussianClassifier::fit(&features, &labels, 2, 0.0).unwrap();
    assert_eq!(model.classes()[0].mean, vec![0.0]);
    assert_eq!(model.classes()[0].cov, vec![1.0]);
    let p = model.posterior(&[1.0]);
    assert!((p[0] - 0.5).abs() <= 1e-15);
    assert!(model.posterior(&[0.9])[0] > 0.5 && model.posterior(&[1.1])[1] > 0.5);
}

#[test]
fn single_class_and_identical_classes() {
    let one = GaussianClassifier::from_classes(vec![ClassGaussian::new(1.0, vec![0.0], vec![2.0]).unwrap()]).unwrap();
    assert_eq!(one.posterior(&[5.0]), vec![1.0]);
    let g = ClassGaussian::new(0.5, vec![1.0, 2.0], vec![2.0, 0.3, 0.3, 1.0]).unwrap();
    let two = GaussianClassifier::from_classes(vec![g.clone(), g]).unwrap();
    for z in [[0.0, 0.0], [10.0, -3.0], [1.0, 2.0]] {
        assert_eq!(two.posterior(&z), vec![0.5, 0.5]);
        assert_eq!(two.predict(&z), 0);
    }
}

#[test]
fn predictions_follow_discriminants() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let features: Vec<Vec<f64>> = (0..90).map(|i| vec![rng.gen_range(-1.0..1.0) + (i % 3) as f64, rng.gen_range(-1.0..1.0)]).collect();
    let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
    let model = GaussianClassifier::fit(&features, &labels, 3, 1e-6).unwrap();
    for _ in 0..100 {
        let z = [rng.gen_range(-3.0..5.0), rng.gen_range(-3.0..3.0)];
        let beta = model.discriminants(&z);
        let arg = (0..3).fold(0, |b, j| if beta[j] > beta[b] { j } else { b });
        assert_eq!(model.predict(&z), arg);
        let post = model.posterior(&z);
        let parg = (0..3).fold(0, |b, j| if post[j] > post[b] { j } else { b });
        assert_eq!(parg, arg);
    }
}

#[test]
fn samples_at_separated_means_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let centers = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 5.0]];
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (j, c) in centers.iter().enumerate() {
        for _ in 0..50 {
            features.push(c.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect::<Vec<_>>());
            labels.push(j);
        }
    }
    let model = GaussianClassifier::fit(&features, &labels, 3, 1e-6).unwrap();
    for (j, g) in model.classes().iter().enumerate() {
        assert_eq!(model.predict(&g.mean), j);
    }
}

#[test]
fn two_class_test_layout() {
    // rows are outputs, columns are targets
    let mut predicted = Vec::new();
    let mut target = Vec::new();
    for (p, t, n) in [(0, 0, 980), (0, 1, 2), (1, 0, 0), (1, 1, 1133)] {
        predicted.extend(std::iter::repeat(p).take(n));
        target.extend(std::iter::repeat(t).take(n));
    }
    let m = ConfusionMatrix::from_predictions(&predicted, &target, 2).unwrap();
    assert_eq!(m.counts, vec![vec![980, 2], vec![0, 1133]]);
    assert_eq!(m.total(), 2115);
    assert_eq!(format!("{:.4}", m.accuracy()), "0.9991");
    assert_eq!(m.precision(0), Some(980.0 / 982.0));
    assert_eq!(m.recall(1), Some(1133.0 / 1135.0));
}

#[test]
fn hand_tally() {
    let target = [0, 1, 2, 2, 1, 0, 0, 2, 1, 1];
    let predicted = [0, 1, 2, 1, 1, 2, 0, 2, 0, 1];
    let m = ConfusionMatrix::from_predictions(&predicted, &target, 3).unwrap();
    assert_eq!(m.counts, vec![vec![2, 1, 0], vec![0, 3, 1], vec![1, 0, 2]]);
    assert_eq!(m.correct(), 7);
    assert_eq!(m.accuracy(), 0.7);
    assert_eq!(m.precision(1), Some(0.75));
    assert_eq!(m.recall(0), Some(2.0 / 3.0));
    let perfect = ConfusionMatrix::from_predictions(&target, &target, 3).unwrap();
    assert_eq!(perfect.accuracy(), 1.0);
    assert!((0..3).all(|i| (0..3).all(|j| i == j || perfect.counts[i][j] == 0)));
}

#[test]
fn features_are_mutual_energies() {
    let mesh = GridMesh::new(4, 3);
    let ne = mesh.element_count();
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let design = DesignField {
        p: (0..ne).map(|_| rng.gen_range(0.2..1.0)).collect(),
        q: (0..ne).map(|_| rng.gen_range(0.2..1.0)).collect(),
    };
    let k = assemble_stiffness(&mesh, &design, 1e5).unwrap();
    let axes: Vec<NodeVector> = (0..3)
        .map(|_| NodeVector((0..mesh.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let gray: Vec<f64> = (0..ne).map(|_| rng.gen_range(0.0..1.0)).collect();
    let z = extract_features(&mesh, &axes, &gray).unwrap();
    let force = grayscale_to_force(&mesh, &gray).unwrap();
    let d = k.solve(&force);
    for (m, a) in axes.iter().enumerate() {
        let e = k.mutual_energy(&d, a).unwrap();
        assert!((z[m] - e).abs() <= 1e-9 * e.abs().max(1e-12), "{} vs {e}", z[m]);
    }
    assert_eq!(extract_features(&mesh, &axes, &vec![0.0; ne]).unwrap(), vec![0.0; 3]);
    let unit = NodeVector(force.iter().map(|v| v / force.norm()).collect());
    let z1 = FeatureMap::new(&mesh, &[unit]).unwrap().map(&gray)[0];
    assert!((z1 - force.norm()).abs() <= 1e-12 * force.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn posterior_sums_to_one_and_ignores_shifts(
        seed in any::<u64>(),
        z in prop::collection::vec(-50.0f64..50.0, 3),
        shrink in 0.01f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        let mut classes = Vec::new();
        let mut shifted = Vec::new();
        for _ in 0..n {
            let mean: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let a: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut cov = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    cov[i * 3 + j] = (0..3).map(|k| a[i * 3 + k] * a[j * 3 + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
                }
            }
            let prior = rng.gen_range(0.05..1.0);
            classes.push(ClassGaussian::new(prior, mean.clone(), cov.clone()).unwrap());
            // scaling every prior adds the same constant to every discriminant
            shifted.push(ClassGaussian::new(prior * shrink, mean, cov).unwrap());
        }
        let model = GaussianClassifier::from_classes(classes).unwrap();
        let other = GaussianClassifier::from_classes(shifted).unwrap();
        let p = model.posterior(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(model.predict(&z), other.predict(&z));
        for (a, b) in p.iter().zip(other.posterior(&z)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn confusion_bookkeeping(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let predicted: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let target: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let m = ConfusionMatrix::from_predictions(&predicted, &target, 4).unwrap();
        prop_assert_eq!(m.total(), pairs.len());
        for j in 0..4 {
            let row: usize = m.counts[j].iter().sum();
            let col: usize = (0..4).map(|i| m.counts[i][j]).sum();
            prop_assert_eq!(m.precision(j), (row > 0).then(|| m.counts[j][j] as f64 / row as f64));
            prop_assert_eq!(m.recall(j), (col > 0).then(|| m.counts[j][j] as f64 / col as f64));
        }
    }
}
