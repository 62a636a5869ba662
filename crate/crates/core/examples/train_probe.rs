// Train a linear and a 3-layer MLP probe on a synthetic ID task and report
// accuracy plus the per-epoch loss curve.
//
// cargo run --release --example train_probe

use oodkit::probe::{accuracy, train_linear_probe_logged, train_mlp_probe_logged};
use oodkit::{generate_scenario, ProbeConfig, ProbeHead, ScenarioConfig};

pub fn run_example() -> oodkit::Result<()> {
    let s = generate_scenario(&ScenarioConfig {
        n_per_cluster: 50,
        ..ScenarioConfig::default()
    })?;
    let cfg = ProbeConfig {
        epochs: 20,
        hidden_width: 64,
        ..ProbeConfig::default()
    };

    let (linear, losses) = train_linear_probe_logged(&s.id_train, &cfg)?;
    let linear: ProbeHead = linear.into();
    println!(
        "linear: loss {:.4} -> {:.6}, test accuracy {:.3}",
        losses[0],
        losses[losses.len() - 1],
        accuracy(&linear, &s.id_test)?
    );

    let (mlp, losses) = train_mlp_probe_logged(&s.id_train, &cfg)?;
    let mlp: ProbeHead = mlp.into();
    println!(
        "mlp:    loss {:.4} -> {:.6}, test accuracy {:.3}",
        losses[0],
        losses[losses.len() - 1],
        accuracy(&mlp, &s.id_test)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
