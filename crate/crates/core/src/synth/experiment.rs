use serde_json::json;

use super::{generate_scenario, Scenario, ScenarioConfig};
use crate::error::Result;
use crate::evaluator::{median_report, EvalReport, ReportMeta};
use crate::pipeline::evaluate;
use crate::probe::{accuracy, train_linear_probe, ProbeConfig, ProbeHead};
use crate::scorers::{Method, ScorerParams};

/// Linear-probe the scenario's ID classes, then score ID test data against
/// both OOD regimes with every method.
pub fn run_geometry_experiment(
    s: &Scenario,
    methods: &[Method],
    params: &ScorerParams,
    probe: &ProbeConfig,
) -> Result<EvalReport> {
    let head: ProbeHead = train_linear_probe(&s.id_train, probe)?.into();
    let acc = accuracy(&head, &s.id_test)?;
    let meta = ReportMeta {
        dataset: format!("synthetic (seed {})", s.config.seed),
        id_accuracy: Some(acc),
        failures: Vec::new(),
        config: json!({
            "scenario": s.config,
            "probe": probe,
            "scorers": params,
            "methods": methods.iter().map(Method::key).collect::<Vec<_>>(),
        }),
    };
    evaluate(
        methods,
        &s.id_train,
        Some(&head),
        &s.id_test,
        &[&s.ood_concentrated, &s.ood_scattered],
        params,
        meta,
    )
}

#[derive(Debug, Clone)]
pub struct GeometrySummary {
    pub runs: Vec<EvalReport>,
    pub median: EvalReport,
}

/// Run the experiment for each seed (scenario and probe share the seed) and
/// aggregate per-cell medians.
pub fn run_geometry_sweep(
    base: &ScenarioConfig,
    seeds: &[u64],
    methods: &[Method],
    params: &ScorerParams,
    probe: &ProbeConfig,
) -> Result<GeometrySummary> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = ScenarioConfig {
            seed,
            ..base.clone()
        };
        let scenario = generate_scenario(&cfg)?;
        let probe = ProbeConfig {
            seed,
            ..probe.clone()
        };
        runs.push(run_geometry_experiment(&scenario, methods, params, &probe)?);
    }
    let median = median_report(
        &runs,
        ReportMeta {
            dataset: format!("synthetic median over {} seeds {:?}", seeds.len(), seeds),
            id_accuracy: None,
            failures: Vec::new(),
            config: json!({
                "scenario": base,
                "probe": probe,
                "scorers": params,
                "methods": methods.iter().map(Method::key).collect::<Vec<_>>(),
                "seeds": seeds,
            }),
        },
    )?;
    Ok(GeometrySummary { runs, median })
}
