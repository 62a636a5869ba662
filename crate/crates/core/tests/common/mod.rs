//! Random instances and brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use oodkit::probe::Dense;
use oodkit::store::{write_labels, write_matrix, SplitSpec};
use oodkit::{
    DatasetSplit, EmbeddingMatrix, LabelVector, LinearHead, Manifest, MlpHead, ProbeHead, Role,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, d: usize, scale: f32) -> EmbeddingMatrix {
    let data = (0..n * d).map(|_| rng.gen_range(-scale..scale)).collect();
    EmbeddingMatrix::new(n, d, data).unwrap()
}

/// Labels covering every class at least once (needs `n ≥ c`).
pub fn random_labels(rng: &mut impl Rng, n: usize, c: usize) -> LabelVector {
    let values = (0..n)
        .map(|i| {
            if i < c {
                i as i64
            } else {
                rng.gen_range(0..c as i64)
            }
        })
        .collect();
    LabelVector::new(values, c).unwrap()
}

pub fn train_split(rng: &mut impl Rng, n: usize, d: usize, c: usize) -> DatasetSplit {
    let m = random_matrix(rng, n, d, 2.0);
    let y = random_labels(rng, n, c);
    DatasetSplit::new("id_train", Role::IdTrain, m, Some(y)).unwrap()
}

pub fn split(name: &str, role: Role, m: EmbeddingMatrix) -> DatasetSplit {
    DatasetSplit::new(name, role, m, None).unwrap()
}

fn dense(rng: &mut impl Rng, out: usize, inp: usize, scale: f32) -> Dense {
    let w = (0..out * inp)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    let b = (0..out).map(|_| rng.gen_range(-scale..scale)).collect();
    Dense::new(out, inp, w, b).unwrap()
}

pub fn random_linear_head(rng: &mut impl Rng, d: usize, c: usize) -> ProbeHead {
    ProbeHead::Linear(LinearHead {
        layer: dense(rng, c, d, 1.0),
    })
}

pub fn random_mlp_head(rng: &mut impl Rng, d: usize, h: usize, c: usize) -> ProbeHead {
    let layers = [
        dense(rng, h, d, 0.5),
        dense(rng, h, h, 0.5),
        dense(rng, c, h, 0.5),
    ];
    ProbeHead::Mlp(MlpHead::new(layers).unwrap())
}

/// Σ[1(i > o) + ½·1(i = o)] / (n_id·n_ood), counted pair by pair.
pub fn brute_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut twice = 0u64;
    for a in id {
        for b in ood {
            twice += if a > b {
                2
            } else if a == b {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * id.len() * ood.len()) as f64
}

/// Try every ID value as a threshold; keep the largest one accepting ≥ tpr of ID.
pub fn brute_fpr(id: &[f64], ood: &[f64], tpr: f64) -> f64 {
    let n = id.len();
    let mut best: Option<f64> = None;
    for &t in id {
        let accepted = id.iter().filter(|v| **v >= t).count();
        if accepted as f64 / n as f64 >= tpr && best.is_none_or(|b| t > b) {
            best = Some(t);
        }
    }
    let t = best.expect("the minimum always accepts every ID score");
    ood.iter().filter(|v| **v >= t).count() as f64 / ood.len() as f64
}

/// Full sort of every distance; ties by index.
pub fn brute_knn(train: &EmbeddingMatrix, test: &EmbeddingMatrix, k: usize) -> Vec<f64> {
    let norm = |r: &[f32]| -> Vec<f64> {
        let n = r
            .iter()
            .map(|v| (*v as f64) * (*v as f64))
            .sum::<f64>()
            .sqrt();
        r.iter()
            .map(|v| if n == 0.0 { 0.0 } else { *v as f64 / n })
            .collect()
    };
    let reference: Vec<Vec<f64>> = train.rows().map(norm).collect();
    test.rows()
        .map(|q| {
            let q = norm(q);
            let mut d: Vec<(f64, usize)> = reference
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut acc = 0.0;
                    for (a, b) in q.iter().zip(r) {
                        acc += (a - b) * (a - b);
                    }
                    (acc, i)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            -d[k - 1].0.sqrt()
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Write id_train / id_test / ood_test as NPY files plus `manifest.json`.
pub fn write_manifest(
    dir: &Path,
    train: &DatasetSplit,
    test: &DatasetSplit,
    oods: &[&DatasetSplit],
) -> std::path::PathBuf {
    let mut m = Manifest::new("fixture", dir);
    let mut splits = BTreeMap::new();
    for s in [train, test].into_iter().chain(oods.iter().copied()) {
        let matrix = format!("{}.npy", s.name);
        write_matrix(dir.join(&matrix), &s.matrix).unwrap();
        let labels = s.labels.as_ref().map(|l| {
            let p = format!("{}_labels.npy", s.name);
            write_labels(dir.join(&p), l).unwrap();
            p.into()
        });
        splits.insert(
            s.name.clone(),
            SplitSpec {
                matrix: matrix.into(),
                labels,
                role: s.role,
                n: Some(s.len()),
                d: Some(s.dim()),
            },
        );
    }
    m.splits = splits;
    let path = dir.join("manifest.json");
    m.save(&path).unwrap();
    path
}

/// KL(u ‖ softmax(W z + b)) with `params = [W row-major, b]`.
pub fn kl_uniform(params: &[f64], z: &[f64], c: usize) -> f64 {
    let d = z.len();
    let logits: Vec<f64> = (0..c)
        .map(|o| params[c * d + o] + (0..d).map(|j| params[o * d + j] * z[j]).sum::<f64>())
        .collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let u = 1.0 / c as f64;
    logits.iter().map(|l| u * (u.ln() - (l - lse))).sum()
}

/// ReLU on/off pattern of both hidden layers over every row, from flat
/// `[W1, b1, W2, b2, W3, b3]` parameters. Empty for a linear head.
pub fn relu_pattern(
    arch: oodkit::probe::Architecture,
    params: &[f64],
    x: &EmbeddingMatrix,
) -> Vec<bool> {
    let oodkit::probe::Architecture::Mlp { d, h, .. } = arch else {
        return Vec::new();
    };
    let (w1, rest) = params.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, rest) = rest.split_at(h * h);
    let b2 = &rest[..h];
    let layer = |w: &[f64], b: &[f64], v: &[f64]| -> Vec<f64> {
        (0..b.len())
            .map(|o| b[o] + (0..v.len()).map(|j| w[o * v.len() + j] * v[j]).sum::<f64>())
            .collect()
    };
    let mut pattern = Vec::new();
    for row in x.rows() {
        let z: Vec<f64> = row.iter().map(|v| *v as f64).collect();
        let a1 = layer(w1, b1, &z);
        pattern.extend(a1.iter().map(|a| *a > 0.0));
        let h1: Vec<f64> = a1.iter().map(|a| a.max(0.0)).collect();
        pattern.extend(layer(w2, b2, &h1).iter().map(|a| *a > 0.0));
    }
    pattern
}

pub fn gradient_error(arch: oodkit::probe::Architecture, split: &DatasetSplit, seed: u64) -> f64 {
    gradient_error_step(arch, split, seed, 1e-3)
}

/// Normwise relative error between the analytic gradient and central
/// differences with step `h`. Parameters are redrawn until no single ±h step
/// flips a ReLU, since a difference across a kink is not a derivative.
pub fn gradient_error_step(
    arch: oodkit::probe::Architecture,
    split: &DatasetSplit,
    seed: u64,
    h: f64,
) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let kink_free = |p: &[f64]| {
        let base = relu_pattern(arch, p, &split.matrix);
        (0..p.len()).all(|i| {
            [h, -h].iter().all(|s| {
                let mut q = p.to_vec();
                q[i] += s;
                relu_pattern(arch, &q, &split.matrix) == base
            })
        })
    };
    let params = (0..1000)
        .map(|_| {
            arch.init(&mut r)
                .into_iter()
                .map(|p| p + r.gen_range(-0.1..0.1))
                .collect::<Vec<f64>>()
        })
        .find(|p| kink_free(p))
        .expect("a kink-free draw within 1000 attempts");
    let y = split.labels().unwrap();
    let rows: Vec<usize> = (0..split.len()).collect();
    let (_, analytic) = arch.loss_and_grad(&params, &split.matrix, y, &rows);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += h;
        let up = arch.loss(&p, &split.matrix, y, &rows);
        p[i] -= 2.0 * h;
        let down = arch.loss(&p, &split.matrix, y, &rows);
        let fd = (up - down) / (2.0 * h);
        num += (fd - analytic[i]).powi(2);
        den += fd.powi(2).max(analytic[i].powi(2));
    }
    num.sqrt() / den.sqrt().max(1e-12)
}

/// Two clusters at (±5, 0) with σ = 0.1, 100 points each.
pub fn separable_toy() -> DatasetSplit {
    let mut g = oodkit::synth::GaussianStream::new(42);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let c = i % 2;
        let cx = if c == 0 { -5.0 } else { 5.0 };
        rows.push([(cx + 0.1 * g.normal()) as f32, (0.1 * g.normal()) as f32]);
        labels.push(c as i64);
    }
    let m = EmbeddingMatrix::from_rows(&rows).unwrap();
    DatasetSplit::new(
        "toy",
        Role::IdTrain,
        m,
        Some(LabelVector::new(labels, 2).unwrap()),
    )
    .unwrap()
}
