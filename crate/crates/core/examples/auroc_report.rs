// AUROC and FPR@95 from raw score vectors, assembled into a report and
// rendered as text, CSV and JSON.
//
// cargo run --example auroc_report

use oodkit::evaluator::{build_report, render_report, Format, ReportMeta};
use oodkit::pipeline::eval_cell;
use oodkit::{auroc, fpr_at_tpr};

pub fn run_example() -> oodkit::Result<()> {
    // higher score = more in-distribution
    let id = [0.9, 0.8, 0.8, 0.7, 0.6];
    let near = [0.8, 0.5, 0.4];
    let far = [0.1, 0.2, 0.0];

    println!(
        "AUROC near {:.4}, far {:.4}",
        auroc(&id, &near)?,
        auroc(&id, &far)?
    );
    println!("FPR@95 near {:.4}", fpr_at_tpr(&id, &near, 0.95)?);

    let cells = vec![
        eval_cell("Toy", "near", &id, &near)?,
        eval_cell("Toy", "far", &id, &far)?,
        eval_cell("Flipped", "near", &near, &id)?,
        eval_cell("Flipped", "far", &far, &id)?,
    ];
    let report = build_report(
        cells,
        ReportMeta {
            dataset: "hand-made".into(),
            ..ReportMeta::default()
        },
    )?;
    for f in [Format::Text, Format::Csv, Format::Json] {
        println!("{}", String::from_utf8_lossy(&render_report(&report, f)?));
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
