pub mod bench;
pub mod coreset;
pub mod data;
pub mod serve;
pub mod trace;

use std::path::Path;

use idtrace_core::{ObjectIdx, ObservationSet, Universe};

use crate::error::CliError;

pub fn load_universe(path: &Path) -> Result<Universe, CliError> {
    Universe::load(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn object_index(universe: &Universe, id: &str) -> Result<ObjectIdx, CliError> {
    universe
        .object_index(id)
        .ok_or_else(|| CliError::Data(format!("no object `{id}` in the dataset")))
}

/// Parses `attribute=value` pairs into observations.
pub fn parse_known(universe: &Universe, pairs: &[String]) -> Result<ObservationSet, CliError> {
    let mut set = ObservationSet::new();
    for pair in pairs {
        let (a, v) = pair.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("known value `{pair}` is not attribute=value"))
        })?;
        let obs = universe.observation(a.trim(), v.trim())?;
        set.insert(obs)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(set)
}

pub fn attribute_name(universe: &Universe, attr: usize) -> String {
    universe
        .schema()
        .attribute(attr)
        .expect("attribute in range")
        .name
        .clone()
}

pub fn value_name(universe: &Universe, attr: usize, code: u16) -> String {
    universe
        .schema()
        .attribute(attr)
        .expect("attribute in range")
        .value_name(code)
        .to_string()
}
