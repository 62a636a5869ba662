// Write embeddings and labels as NPY, describe them in a manifest, validate
// it and read a split back.
//
// cargo run --example store_roundtrip

use std::collections::BTreeMap;

use oodkit::store::{
    load_split, read_matrix, validate_manifest, write_labels, write_matrix, SplitSpec,
};
use oodkit::{EmbeddingMatrix, LabelVector, Manifest, Role};

pub fn run_example() -> oodkit::Result<()> {
    let dir = std::env::temp_dir().join(format!("oodkit-store-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| oodkit::Error::io(&dir, e))?;

    let train = EmbeddingMatrix::from_rows(&[[0.0f32, 1.0, 2.0], [3.0, 4.0, 5.0]])?;
    let labels = LabelVector::new(vec![0, 1], 2)?;
    let ood = EmbeddingMatrix::from_rows(&[[9.0f32, 9.0, 9.0]])?;
    write_matrix(dir.join("train.npy"), &train)?;
    write_labels(dir.join("train_labels.npy"), &labels)?;
    write_matrix(dir.join("ood.npy"), &ood)?;
    assert_eq!(read_matrix(dir.join("train.npy"))?, train);

    let mut manifest = Manifest::new("toy", &dir);
    let spec = |m: &str, l: Option<&str>, role| SplitSpec {
        matrix: m.into(),
        labels: l.map(Into::into),
        role,
        n: None,
        d: Some(3),
    };
    manifest.splits = BTreeMap::from([
        (
            "train".to_string(),
            spec("train.npy", Some("train_labels.npy"), Role::IdTrain),
        ),
        (
            "test".to_string(),
            spec("train.npy", Some("train_labels.npy"), Role::IdTest),
        ),
        ("far".to_string(), spec("ood.npy", None, Role::OodTest)),
    ]);
    let path = dir.join("manifest.json");
    manifest.save(&path)?;

    let manifest = Manifest::load(&path)?;
    let issues = validate_manifest(&manifest);
    println!("{} issues", issues.len());
    let far = load_split(&manifest, "far")?;
    println!(
        "split '{}' ({}): {}x{}",
        far.name,
        far.role,
        far.len(),
        far.dim()
    );

    std::fs::remove_dir_all(&dir).map_err(|e| oodkit::Error::io(&dir, e))?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
