//! Synthetic feature-space scenarios with two kinds of OOD data.
//!
//! ID classes and *concentrated* OOD clusters are isotropic Gaussians whose
//! means sit on a sphere of radius `r`, at least `min_mean_separation` apart.
//! *Scattered* OOD is one broad Gaussian at the origin, so its samples land
//! inside every class's decision region.
//!
//! Draw order from the seeded stream: cluster means (with rejections), then
//! id_train (class-major), id_test, ood_concentrated (cluster-major) and
//! finally ood_scattered.

mod experiment;
mod rng;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{
    write_labels, write_matrix, DatasetSplit, EmbeddingMatrix, LabelVector, Manifest, Role,
    SplitSpec,
};

pub use experiment::{run_geometry_experiment, run_geometry_sweep, GeometrySummary};
pub use rng::GaussianStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub d: usize,
    pub n_classes: usize,
    pub n_ood_clusters: usize,
    pub n_per_cluster: usize,
    pub radius: f64,
    pub sigma_id: f64,
    /// Per-coordinate spread of scattered OOD; `None` means `2r/√d`.
    pub sigma_scatter: Option<f64>,
    /// The default 13 is about the widest spacing 15 means on the radius-10
    /// sphere in 32 dimensions accept reliably; lower it for small `d` or `r`.
    pub min_mean_separation: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            d: 32,
            n_classes: 10,
            n_ood_clusters: 5,
            n_per_cluster: 200,
            radius: 10.0,
            sigma_id: 0.5,
            sigma_scatter: None,
            min_mean_separation: 13.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.d < 2 {
            return fail("scenario needs d ≥ 2");
        }
        if self.n_classes < 2 {
            return fail("scenario needs at least 2 ID classes");
        }
        if self.n_ood_clusters < 1 {
            return fail("scenario needs at least 1 OOD cluster");
        }
        if self.n_per_cluster < 1 {
            return fail("scenario needs n_per_cluster ≥ 1");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return fail("radius must be positive");
        }
        if !(self.min_mean_separation > 0.0 && self.min_mean_separation.is_finite()) {
            return fail("min_mean_separation must be positive");
        }
        if !(self.sigma_id >= 0.0 && self.sigma_id < self.min_mean_separation / 4.0) {
            return fail("sigma_id must lie in [0, min_mean_separation / 4)");
        }
        if let Some(s) = self.sigma_scatter {
            if !(s > 0.0 && s.is_finite()) {
                return fail("sigma_scatter must be positive");
            }
        }
        Ok(())
    }

    pub fn scatter_sigma(&self) -> f64 {
        self.sigma_scatter
            .unwrap_or(2.0 * self.radius / (self.d as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// `C + M` cluster means, ID classes first.
    pub means: Vec<Vec<f64>>,
    pub id_train: DatasetSplit,
    pub id_test: DatasetSplit,
    pub ood_concentrated: DatasetSplit,
    pub ood_scattered: DatasetSplit,
}

impl Scenario {
    pub fn splits(&self) -> [&DatasetSplit; 4] {
        [
            &self.id_train,
            &self.id_test,
            &self.ood_concentrated,
            &self.ood_scattered,
        ]
    }
}

fn place_means(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<Vec<Vec<f64>>> {
    let total = cfg.n_classes + cfg.n_ood_clusters;
    let budget = 10 * total * total;
    let mut attempts = 0;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(total);
    while means.len() < total {
        if attempts >= budget {
            return Err(Error::Placement { attempts });
        }
        attempts += 1;
        let v = g.normals(cfg.d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let candidate: Vec<f64> = v.iter().map(|x| x / norm * cfg.radius).collect();
        let far_enough = means.iter().all(|m| {
            m.iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                >= cfg.min_mean_separation
        });
        if far_enough {
            means.push(candidate);
        }
    }
    Ok(means)
}

fn sample_around(
    g: &mut GaussianStream,
    centers: &[Vec<f64>],
    n_each: usize,
    sigma: f64,
) -> Vec<f32> {
    let mut data = Vec::with_capacity(centers.len() * n_each * centers.first().map_or(0, Vec::len));
    for c in centers {
        for _ in 0..n_each {
            data.extend(c.iter().map(|m| (m + sigma * g.normal()) as f32));
        }
    }
    data
}

fn id_split(name: &str, role: Role, data: Vec<f32>, cfg: &ScenarioConfig) -> Result<DatasetSplit> {
    let n = cfg.n_classes * cfg.n_per_cluster;
    let labels = (0..cfg.n_classes as i64)
        .flat_map(|c| std::iter::repeat_n(c, cfg.n_per_cluster))
        .collect();
    DatasetSplit::new(
        name,
        role,
        EmbeddingMatrix::new(n, cfg.d, data)?,
        Some(LabelVector::new(labels, cfg.n_classes)?),
    )
}

/// Deterministic function of `cfg`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut g = GaussianStream::new(cfg.seed);
    let means = place_means(cfg, &mut g)?;
    let (id_means, ood_means) = means.split_at(cfg.n_classes);
    let n = cfg.n_per_cluster;

    let train = sample_around(&mut g, id_means, n, cfg.sigma_id);
    let test = sample_around(&mut g, id_means, n, cfg.sigma_id);
    let conc = sample_around(&mut g, ood_means, n, cfg.sigma_id);
    let origin = vec![vec![0.0; cfg.d]];
    let n_scatter = cfg.n_ood_clusters * n;
    let scat = sample_around(&mut g, &origin, n_scatter, cfg.scatter_sigma());

    Ok(Scenario {
        id_train: id_split("id_train", Role::IdTrain, train, cfg)?,
        id_test: id_split("id_test", Role::IdTest, test, cfg)?,
        ood_concentrated: DatasetSplit::new(
            "ood_concentrated",
            Role::OodTest,
            EmbeddingMatrix::new(cfg.n_ood_clusters * n, cfg.d, conc)?,
            None,
        )?,
        ood_scattered: DatasetSplit::new(
            "ood_scattered",
            Role::OodTest,
            EmbeddingMatrix::new(n_scatter, cfg.d, scat)?,
            None,
        )?,
        config: cfg.clone(),
        means,
    })
}

/// Write every split as NPY plus `manifest.json` into `dir`; returns the manifest path.
pub fn write_scenario(s: &Scenario, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Manifest::new("synthetic", dir);
    manifest.n_classes = Some(s.config.n_classes);
    manifest
        .metadata
        .insert("scenario".into(), serde_json::to_string(&s.config)?);
    for split in s.splits() {
        let matrix = PathBuf::from(format!("{}.npy", split.name));
        write_matrix(dir.join(&matrix), &split.matrix)?;
        let labels = match &split.labels {
            Some(l) => {
                let p = PathBuf::from(format!("{}_labels.npy", split.name));
                write_labels(dir.join(&p), l)?;
                Some(p)
            }
            None => None,
        };
        manifest.splits.insert(
            split.name.clone(),
            SplitSpec {
                matrix,
                labels,
                role: split.role,
                n: Some(split.len()),
                d: Some(split.dim()),
            },
        );
    }
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Mean Euclidean distance from each row of `queries` to its nearest row of `reference`.
pub fn mean_nearest_distance(queries: &EmbeddingMatrix, reference: &EmbeddingMatrix) -> f64 {
    use rayon::prelude::*;
    let total: f64 = (0..queries.n_rows())
        .into_par_iter()
        .map(|i| {
            let q = queries.row(i);
            reference
                .rows()
                .map(|r| {
                    q.iter()
                        .zip(r)
                        .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / queries.n_rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            d: 2,
            n_classes: 2,
            n_ood_clusters: 1,
            n_per_cluster: 50,
            radius: 10.0,
            sigma_id: 0.5,
            min_mean_separation: 5.0,
            seed: 7,
            sigma_scatter: None,
        }
    }

    #[test]
    fn means_are_separated_and_on_sphere() {
        let s = generate_scenario(&small()).unwrap();
        assert_eq!(s.means.len(), 3);
        for (i, a) in s.means.iter().enumerate() {
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 10.0).abs() < 1e-9);
            for b in &s.means[i + 1..] {
                let dist = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(dist >= 5.0, "{dist}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            generate_scenario(&small()).unwrap(),
            generate_scenario(&small()).unwrap()
        );
        let other = generate_scenario(&ScenarioConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(
            other.id_train,
            generate_scenario(&small()).unwrap().id_train
        );
    }

    #[test]
    fn impossible_separation_fails() {
        let cfg = ScenarioConfig {
            n_classes: 3,
            n_ood_clusters: 1,
            min_mean_separation: 21.0,
            sigma_id: 0.5,
            ..small()
        };
        let err = generate_scenario(&cfg).unwrap_err();
        assert!(err
            .to_string()
            .starts_with("cannot place means; relax separation"));
        assert!(matches!(err, Error::Placement { attempts: 160 }));
    }

    #[test]
    fn labels_cover_every_class() {
        let s = generate_scenario(&ScenarioConfig {
            n_classes: 4,
            ..small()
        })
        .unwrap();
        for split in [&s.id_train, &s.id_test] {
            let l = split.labels.as_ref().unwrap();
            assert_eq!(l.n_classes(), 4);
            assert_eq!(l.counts(), vec![50; 4]);
        }
        assert_eq!(s.ood_scattered.len(), 50);
    }

    #[test]
    fn config_invariants() {
        assert!(ScenarioConfig { d: 1, ..small() }.validate().is_err());
        assert!(ScenarioConfig {
            n_classes: 1,
            ..small()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            sigma_id: 1.25,
            ..small()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig::default().validate().is_ok());
    }

    #[test]
    fn scenario_writes_a_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_scenario(&small()).unwrap();
        let path = write_scenario(&s, dir.path()).unwrap();
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.splits.len(), 4);
        assert!(crate::store::validate_manifest(&m).is_empty());
        let back = crate::store::load_split(&m, "id_train").unwrap();
        assert_eq!(back, s.id_train);
    }
}
