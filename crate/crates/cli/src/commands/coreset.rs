use std::io;
use std::path::Path;

use idtrace_core::{
    check_core_set, enumerate_core_sets, greedy_core_set, CoreSetError, CoreSetReport, Minimality,
    Universe,
};
use serde::Serialize;

use super::{attribute_name, load_universe, object_index, parse_known, value_name};
use crate::error::CliError;
use crate::output::{emit, fmt_bits, text_table, Format, Render};

#[derive(Debug, Serialize)]
pub struct CoreSetEntry {
    pub attributes: Vec<String>,
    /// The object's value for each listed attribute.
    pub values: Vec<String>,
    pub is_identifying: bool,
    pub is_minimal: bool,
    /// Identity entropy after each attribute, in listed order.
    pub entropy_trace: Vec<f64>,
    /// Greedy pick order before redundant attributes were dropped.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub selection_order: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct CoreSetOutput {
    pub object: String,
    pub method: &'static str,
    pub minimality: Minimality,
    /// Objects left after the known values.
    pub search_space: usize,
    pub core_sets: Vec<CoreSetEntry>,
}

impl Render for CoreSetOutput {
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = [
            "set",
            "size",
            "attributes",
            "values",
            "is_identifying",
            "is_minimal",
            "final_entropy",
        ]
        .map(String::from)
        .to_vec();
        let rows = self
            .core_sets
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![
                    (i + 1).to_string(),
                    c.attributes.len().to_string(),
                    c.attributes.join(";"),
                    c.values.join(";"),
                    c.is_identifying.to_string(),
                    c.is_minimal.to_string(),
                    c.entropy_trace
                        .last()
                        .map_or_else(String::new, |b| fmt_bits(*b)),
                ]
            })
            .collect();
        (header, rows)
    }

    fn text(&self) -> String {
        let mut out = format!(
            "object {}: {} core set(s) by {} search over {} objects\n\n",
            self.object,
            self.core_sets.len(),
            self.method,
            self.search_space
        );
        let rows: Vec<Vec<String>> = self
            .core_sets
            .iter()
            .map(|c| {
                let pairs = c
                    .attributes
                    .iter()
                    .zip(&c.values)
                    .map(|(a, v)| format!("{a}={v}"));
                vec![
                    c.attributes.len().to_string(),
                    pairs.collect::<Vec<_>>().join(", "),
                ]
            })
            .collect();
        out.push_str(&text_table(&["size", "attributes"], &rows));
        out
    }
}

fn entry(universe: &Universe, target: usize, report: CoreSetReport) -> CoreSetEntry {
    CoreSetEntry {
        values: report
            .attribute_ids
            .iter()
            .map(|&a| value_name(universe, a, universe.cell(target, a)))
            .collect(),
        attributes: report
            .attribute_ids
            .iter()
            .map(|&a| attribute_name(universe, a))
            .collect(),
        is_identifying: report.is_identifying,
        is_minimal: report.is_minimal,
        entropy_trace: report.entropy_trace.iter().map(|b| b.value()).collect(),
        selection_order: report
            .selection_order
            .iter()
            .map(|&a| attribute_name(universe, a))
            .collect(),
    }
}

pub fn run(
    dataset: &Path,
    object: &str,
    known: &[String],
    enumerate: bool,
    max_size: Option<usize>,
    strict: bool,
    format: Format,
) -> Result<(), CliError> {
    let universe = load_universe(dataset)?;
    let target = object_index(&universe, object)?;
    let known = parse_known(&universe, known)?;
    let space = universe.filter_all(&universe.all(), known.iter());
    if !space.contains(target) {
        return Err(CliError::Data(format!(
            "object `{object}` does not match the known values"
        )));
    }
    let minimality = if strict {
        Minimality::Strict
    } else {
        Minimality::Target
    };
    let core_sets = if enumerate {
        let max = max_size.unwrap_or(universe.n_attributes());
        enumerate_core_sets(&universe, &space, target, max)?
            .into_iter()
            .map(|set| {
                Ok(entry(
                    &universe,
                    target,
                    check_core_set(&universe, &space, target, &set, minimality)?,
                ))
            })
            .collect::<Result<Vec<_>, CoreSetError>>()?
    } else {
        let mut report = greedy_core_set(&universe, &universe.all(), target, &known)?;
        if strict {
            report.is_minimal =
                check_core_set(&universe, &space, target, &report.attribute_ids, minimality)?
                    .is_minimal;
        }
        vec![entry(&universe, target, report)]
    };
    let output = CoreSetOutput {
        object: object.to_string(),
        method: if enumerate { "exhaustive" } else { "greedy" },
        minimality,
        search_space: space.len(),
        core_sets,
    };
    emit(format, &output, &mut io::stdout().lock())
}
