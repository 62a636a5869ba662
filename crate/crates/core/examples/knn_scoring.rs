// Deep nearest-neighbour scoring without any probe: the score is minus the
// distance from the normalized query to its k-th nearest training feature.
//
// cargo run --release --example knn_scoring

use oodkit::scorers::KnnState;
use oodkit::{auroc, fit, generate_scenario, score, Method, ScenarioConfig, ScorerParams};

pub fn run_example() -> oodkit::Result<()> {
    let s = generate_scenario(&ScenarioConfig {
        n_per_cluster: 100,
        ..ScenarioConfig::default()
    })?;

    // direct use of the index
    let index = KnnState::fit(&s.id_train.matrix, 10);
    println!(
        "first id_test row: {:.4}, first scattered row: {:.4}",
        index.score_row(s.id_test.matrix.row(0)),
        index.score_row(s.ood_scattered.matrix.row(0))
    );

    // the same through the generic scorer interface, sweeping k
    for k in [1, 10, 50] {
        let params = ScorerParams {
            k,
            ..ScorerParams::default()
        };
        let fitted = fit(Method::Knn, &s.id_train, None, &params)?;
        let id = score(&fitted, &s.id_test)?;
        let conc = score(&fitted, &s.ood_concentrated)?;
        let scat = score(&fitted, &s.ood_scattered)?;
        println!(
            "k={k:>2}: AUROC concentrated {:.4}, scattered {:.4}",
            auroc(&id.values, &conc.values)?,
            auroc(&id.values, &scat.values)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
