//! Independent reference computations and fixture builders shared by the
//! integration tests. Nothing here calls into the crate's numerical kernels.
#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use repsim_core::store::{write_tensor, ActivationTensor, LayerEntry, Manifest, TensorShape};
use repsim_core::Matrix64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix64 {
    Matrix64::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn to_na(m: &Matrix64) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    c
}

/// Canonical correlations from the generalized eigenproblem
/// `Σx⁻¹ Σxy Σy⁻¹ Σyx a = ρ² a`, symmetrized through the Cholesky factor of
/// `Σx`. No truncation; inputs must have full column rank.
pub fn oracle_canonical_correlations(x: &Matrix64, y: &Matrix64) -> Vec<f64> {
    let n = x.rows() as f64;
    let xc = centered(&to_na(x));
    let yc = centered(&to_na(y));
    let sxx = xc.transpose() * &xc / (n - 1.0);
    let syy = yc.transpose() * &yc / (n - 1.0);
    let sxy = xc.transpose() * &yc / (n - 1.0);

    let syy_inv_syx = syy
        .cholesky()
        .expect("Σy positive definite")
        .solve(&sxy.transpose());
    let m = &sxy * syy_inv_syx;
    let l = sxx.cholesky().expect("Σx positive definite").l();
    let linv_m = l.solve_lower_triangular(&m).expect("triangular solve");
    let mut sym = l
        .solve_lower_triangular(&linv_m.transpose())
        .expect("triangular solve");
    sym = (&sym + sym.transpose()) * 0.5;

    let mut rho: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    rho.sort_by(|a, b| b.total_cmp(a));
    rho.truncate(x.cols().min(y.cols()));
    rho
}

/// Singular values as square roots of the Gram matrix eigenvalues.
pub fn oracle_singular_values(m: &Matrix64) -> Vec<f64> {
    let a = to_na(m);
    let gram = a.transpose() * &a;
    let mut s: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.truncate(m.rows().min(m.cols()));
    s
}

/// Entry-by-entry `Σᵢ xᵢₐ yᵢᵦ / (n − 1)`.
pub fn oracle_covariance(x: &Matrix64, y: &Matrix64) -> Vec<Vec<f64>> {
    let n = x.rows();
    (0..x.cols())
        .map(|a| {
            (0..y.cols())
                .map(|b| (0..n).map(|i| x[(i, a)] * y[(i, b)]).sum::<f64>() / (n as f64 - 1.0))
                .collect()
        })
        .collect()
}

/// AUC by enumerating every positive/negative pair.
pub fn oracle_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut half_wins = 0u64;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                half_wins += 2;
            } else if scores[i] == scores[j] {
                half_wins += 1;
            }
        }
    }
    half_wins as f64 / (2 * pairs) as f64
}

/// `round(target / (h·w))` with ties to even, clamped to `[1, available]`,
/// in integer arithmetic.
pub fn oracle_plan_stimuli(available: usize, h: usize, w: usize, target: usize) -> usize {
    let hw = h * w;
    let (q, r) = (target / hw, target % hw);
    let rounded = match (2 * r).cmp(&hw) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q % 2),
        std::cmp::Ordering::Less => q,
    };
    rounded.clamp(1, available)
}

pub fn noise_tensor(name: &str, shape: TensorShape, rng: &mut ChaCha8Rng) -> ActivationTensor<f64> {
    let values = (0..shape.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    ActivationTensor::new(name, shape, values).unwrap()
}

/// Per-position channel mix `b = a·M + noise_scale·E`.
pub fn mixed_tensor(
    name: &str,
    a: &ActivationTensor<f64>,
    mix: &Matrix64,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> ActivationTensor<f64> {
    let s = a.shape();
    assert_eq!(mix.rows(), s.c);
    let c_out = mix.cols();
    let rows = s.n * s.h * s.w;
    let mut values = Vec::with_capacity(rows * c_out);
    for r in 0..rows {
        let src = &a.values()[r * s.c..(r + 1) * s.c];
        for j in 0..c_out {
            let mixed: f64 = src.iter().enumerate().map(|(k, &v)| v * mix[(k, j)]).sum();
            let e: f64 = rng.sample(StandardNormal);
            values.push(mixed + noise_scale * e);
        }
    }
    ActivationTensor::new(name, TensorShape::new(s.n, s.h, s.w, c_out), values).unwrap()
}

/// Writes tensors as `<prefix>_<layer>.npy` (in f32) and a manifest next to them.
pub fn write_checkpoint(
    dir: &Path,
    model_id: &str,
    tag: &str,
    tensors: &[ActivationTensor<f64>],
) -> std::path::PathBuf {
    let mut layers = Vec::new();
    for t in tensors {
        let file = format!("{model_id}_{tag}_{}.npy", t.layer_name());
        let narrowed: Vec<f32> = t.values().iter().map(|&v| v as f32).collect();
        let t32 = ActivationTensor::new(t.layer_name(), t.shape(), narrowed).unwrap();
        write_tensor(&t32, &dir.join(&file)).unwrap();
        layers.push(LayerEntry {
            name: t.layer_name().to_owned(),
            path: file.into(),
            shape: t.shape(),
        });
    }
    let manifest = Manifest::new(model_id, tag, 0, "synthetic", layers, dir).unwrap();
    let path = dir.join(format!("{model_id}_{tag}.json"));
    manifest.save(&path).unwrap();
    path
}

use repsim_core::prediction::{PredictionRecord, PredictionSet};

/// Record whose scores put all mass on `pred`.
pub fn one_hot_record(id: &str, truth: usize, pred: usize, classes: usize) -> PredictionRecord {
    let mut scores = vec![0.05; classes];
    scores[pred] = 0.9;
    PredictionRecord {
        example_id: id.to_owned(),
        true_label: truth,
        predicted_label: pred,
        scores,
    }
}

/// Two classifiers that are independently correct with probabilities
/// `acc_a`, `acc_b` on shared ground truth.
pub fn independent_predictors(
    n: usize,
    acc_a: f64,
    acc_b: f64,
    classes: usize,
    seed: u64,
) -> (PredictionSet, PredictionSet) {
    let mut r = rng(seed);
    let mut ra = Vec::with_capacity(n);
    let mut rb = Vec::with_capacity(n);
    for i in 0..n {
        let truth = r.random_range(0..classes);
        let id = format!("ex{i:06}");
        for (acc, out) in [(acc_a, &mut ra), (acc_b, &mut rb)] {
            let pred = if r.random::<f64>() < acc {
                truth
            } else {
                (truth + r.random_range(1..classes)) % classes
            };
            out.push(one_hot_record(&id, truth, pred, classes));
        }
    }
    (
        PredictionSet::new("a", classes, ra).unwrap(),
        PredictionSet::new("b", classes, rb).unwrap(),
    )
}

/// Ten examples with a known outcome pattern (1 = correct):
///
/// | ex | 0 1 2 3 4 5 6 7 8 9 |
/// | a  | 1 1 1 1 0 0 0 1 0 1 |
/// | b  | 1 1 0 1 0 1 0 1 1 1 |
///
/// both correct {0,1,3,7,9} = 5, a only {2} = 1, b only {5,8} = 2,
/// both wrong {4,6} = 2; agreement 7/10; acc_a 0.6, acc_b 0.7.
pub fn ten_example_fixture() -> (PredictionSet, PredictionSet) {
    let a_ok = [1, 1, 1, 1, 0, 0, 0, 1, 0, 1];
    let b_ok = [1, 1, 0, 1, 0, 1, 0, 1, 1, 1];
    let truth = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
    let build = |ok: &[i32; 10], model: &str| {
        let records = (0..10)
            .map(|i| {
                let pred = if ok[i] == 1 {
                    truth[i]
                } else {
                    (truth[i] + 1 + i % 2) % 3
                };
                one_hot_record(&format!("img{i:02}"), truth[i], pred, 3)
            })
            .collect();
        PredictionSet::new(model, 3, records).unwrap()
    };
    (build(&a_ok, "ft-imagenet"), build(&b_ok, "ft-radimagenet"))
}
