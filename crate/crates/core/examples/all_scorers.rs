// Every scoring method on one probe, including a fitted scorer saved to disk
// and loaded back. Methods that cannot run on the head are reported, not fatal.
//
// cargo run --release --example all_scorers

use oodkit::pipeline::train_probe;
use oodkit::scorers::{load_scorer, save_scorer};
use oodkit::{
    auroc, fit, generate_scenario, score, Method, ProbeConfig, ProbeKind, ScenarioConfig,
    ScorerParams,
};

pub fn run_example() -> oodkit::Result<()> {
    let s = generate_scenario(&ScenarioConfig {
        n_per_cluster: 60,
        ..ScenarioConfig::default()
    })?;
    let cfg = ProbeConfig {
        epochs: 30,
        hidden_width: 64,
        ..ProbeConfig::default()
    };
    let params = ScorerParams::default();

    for kind in [ProbeKind::Linear, ProbeKind::Mlp] {
        let head = train_probe(kind, &s.id_train, &cfg)?;
        println!("{kind:?} head");
        for method in Method::ALL {
            match fit(method, &s.id_train, Some(&head), &params) {
                Ok(fitted) => {
                    let id = score(&fitted, &s.id_test)?;
                    let ood = score(&fitted, &s.ood_scattered)?;
                    println!(
                        "  {:<12} scattered AUROC {:.4}",
                        method.label(),
                        auroc(&id.values, &ood.values)?
                    );
                }
                Err(e) => println!("  {:<12} skipped: {e}", method.label()),
            }
        }
    }

    let head = train_probe(ProbeKind::Linear, &s.id_train, &cfg)?;
    let vim = fit(Method::Vim, &s.id_train, Some(&head), &params)?;
    let dir = std::env::temp_dir().join(format!("oodkit-vim-{}", std::process::id()));
    save_scorer(&dir, &vim)?;
    let back = load_scorer(&dir)?;
    assert_eq!(
        score(&back, &s.id_test)?.values,
        score(&vim, &s.id_test)?.values
    );
    println!("ViM state round-trips through {}", dir.display());
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
