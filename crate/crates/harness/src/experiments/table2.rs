//! Symmetry pattern of the Bregman kinetic energy.
//!
//! The Euclidean and negative-entropy rows are asserted against the reference
//! pattern. The quadratic-form row is reported only: its kinetic energy is
//! exactly translation invariant, so it is not a generic non-Euclidean metric.

use noetherdyn_core::symmetry::{random_skew, table2_report, SymmetryTransform};
use noetherdyn_core::{Metric, Vector};

use super::{residual::metric_form, rng};
use crate::config::ExperimentConfig;
use crate::output::TextTable;
use crate::verdict::Verdict;
use crate::{Artifacts, HarnessError};

const DIM: usize = 4;
const SYMMETRIC_MAX: f64 = 1e-8;
const ASYMMETRIC_MIN: f64 = 1e-3;

fn expected_symmetric(metric: &str, transform: &str) -> Option<bool> {
    match metric {
        "euclidean" => Some(matches!(transform, "translation" | "rotation")),
        "negative-entropy" => Some(false),
        _ => None,
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let samples = config.count_or("samples", 200)?;
    if samples == 0 {
        return Err(HarnessError::Config("samples must be positive".into()));
    }
    let mut rng = rng(config);
    let metrics = [
        Metric::euclidean(DIM),
        Metric::negative_entropy(DIM),
        Metric::quadratic_form(metric_form())?,
    ];
    let transforms = [
        SymmetryTransform::translation(Vector::from_element(DIM, 1.0))?,
        SymmetryTransform::rotation(random_skew(DIM, &mut rng))?,
        SymmetryTransform::Scale,
        SymmetryTransform::Rescale { split: DIM / 2 },
    ];
    let cells = table2_report(&metrics, &transforms, samples, &mut rng)?;

    let mut art = Artifacts::default();
    let header = ["metric", "transform", "max_abs", "median_abs", "symmetric", "asserted"];
    let mut values = TextTable {
        name: "table2".into(),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: Vec::new(),
    };
    let mut pattern = TextTable {
        name: "table2_pattern".into(),
        header: std::iter::once("metric".to_string())
            .chain(transforms.iter().map(|t| t.kind().name().to_string()))
            .collect(),
        rows: Vec::new(),
    };
    for metric in &metrics {
        let mut row = vec![metric.name().to_string()];
        for cell in cells.iter().filter(|c| c.metric == metric.name()) {
            let transform = cell.transform.name();
            let expected = expected_symmetric(&cell.metric, transform);
            row.push(if cell.symmetric { "symmetric" } else { "asymmetric" }.into());
            values.rows.push(vec![
                cell.metric.clone(),
                transform.into(),
                format!("{:e}", cell.max_abs),
                format!("{:e}", cell.median_abs),
                cell.symmetric.to_string(),
                expected.is_some().to_string(),
            ]);
            let id = format!("C1.{}.{}", cell.metric, transform);
            match expected {
                Some(true) => art.verdicts.push(Verdict::at_most(format!("{id}.symmetric"), cell.max_abs, SYMMETRIC_MAX)),
                Some(false) => art.verdicts.push(Verdict::at_least(format!("{id}.asymmetric"), cell.median_abs, ASYMMETRIC_MIN)),
                None => {}
            }
        }
        pattern.rows.push(row);
    }
    art.text_tables.push(values);
    art.text_tables.push(pattern);
    Ok(art)
}
