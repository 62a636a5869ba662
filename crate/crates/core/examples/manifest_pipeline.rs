// The full file-based flow: synthesize a dataset onto disk, then load it by
// manifest, probe, score and report. Real embeddings dumped as NPY plus a
// manifest go through the same path.
//
// cargo run --release --example manifest_pipeline

use oodkit::evaluator::{render_report, Format, ReportMeta};
use oodkit::pipeline::{evaluate, train_probe};
use oodkit::probe::accuracy;
use oodkit::store::load_split;
use oodkit::synth::write_scenario;
use oodkit::{
    generate_scenario, Manifest, Method, ProbeConfig, ProbeKind, Role, ScenarioConfig, ScorerParams,
};

pub fn run_example() -> oodkit::Result<()> {
    let dir = std::env::temp_dir().join(format!("oodkit-pipeline-{}", std::process::id()));
    let s = generate_scenario(&ScenarioConfig {
        n_per_cluster: 80,
        seed: 11,
        ..ScenarioConfig::default()
    })?;
    let path = write_scenario(&s, &dir)?;

    let manifest = Manifest::load(&path)?;
    let train = load_split(&manifest, manifest.id_train_name()?)?;
    let id_test = load_split(&manifest, manifest.names_with_role(Role::IdTest)[0])?;
    let oods = manifest
        .names_with_role(Role::OodTest)
        .into_iter()
        .map(|n| load_split(&manifest, n))
        .collect::<oodkit::Result<Vec<_>>>()?;

    let head = train_probe(ProbeKind::Linear, &train, &ProbeConfig::default())?;
    let methods = [Method::Msp, Method::Energy, Method::Vim, Method::Knn];
    let report = evaluate(
        &methods,
        &train,
        Some(&head),
        &id_test,
        &oods.iter().collect::<Vec<_>>(),
        &ScorerParams::default(),
        ReportMeta {
            dataset: manifest.dataset.clone(),
            id_accuracy: Some(accuracy(&head, &id_test)?),
            ..ReportMeta::default()
        },
    )?;
    print!(
        "{}",
        String::from_utf8_lossy(&render_report(&report, Format::Text)?)
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
