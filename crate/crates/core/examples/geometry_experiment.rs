// Concentrated vs scattered OOD on synthetic features: the decision-boundary
// score (MSP) against the feature-space score (kNN), over a seed sweep.
//
// cargo run --release --example geometry_experiment

use oodkit::evaluator::{render_report, Format};
use oodkit::synth::run_geometry_sweep;
use oodkit::{Method, ProbeConfig, ScenarioConfig, ScorerParams};

pub fn run_example() -> oodkit::Result<()> {
    let seeds: Vec<u64> = (0..10).collect();
    let methods = [
        Method::Msp,
        Method::Energy,
        Method::Mahalanobis,
        Method::Knn,
    ];
    let summary = run_geometry_sweep(
        &ScenarioConfig::default(),
        &seeds,
        &methods,
        &ScorerParams::default(),
        &ProbeConfig::default(),
    )?;
    for run in &summary.runs {
        let msp = run.cell("MSP", "ood_scattered").map(|c| c.auroc);
        let knn = run.cell("KNN", "ood_scattered").map(|c| c.auroc);
        println!("{}: MSP {:?} KNN {:?}", run.dataset, msp, knn);
    }
    let text = render_report(&summary.median, Format::Text)?;
    print!("{}", String::from_utf8_lossy(&text));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
