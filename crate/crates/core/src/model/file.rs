//! Network description files.
//!
//! TOML, one table per state:
//!
//! ```toml
//! schema_version = 1
//! links = 2
//! pi_true = [1.0]            # optional, one entry per state
//! conflicts = [[0, 1]]       # optional, informational
//!
//! [[states]]
//! routing = [[1, 0], [0, 1]] # optional, identity when omitted
//! modes = [[0, 0], [1, 0], [0, 1]]
//! powers = [0.0, 1.0, 1.0]   # optional, ‖G_k‖² when omitted
//! ```
//!
//! Links are 0-based. `routing[i][j] = -1` means link `i` is the next hop of
//! link `j`.

use serde::{Deserialize, Serialize};

use super::{AllocationMode, NetworkSpec, RoutingMatrix, StateConfig, MAX_FILE_LINKS};
use crate::error::{Error, Result};

pub const NETWORK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    schema_version: u32,
    links: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conflicts: Option<Vec<[usize; 2]>>,
    states: Vec<StateEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    routing: Option<Vec<Vec<i64>>>,
    modes: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    powers: Option<Vec<f64>>,
}

impl NetworkSpec {
    /// Parse a network file. Checks shape only; use
    /// [`validate_spec`](super::validate_spec) for the structural invariants.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: NetworkFile =
            toml::from_str(text).map_err(|e| Error::Format(format!("network file: {e}")))?;
        if file.schema_version != NETWORK_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported network schema_version {} (expected {NETWORK_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let n = file.links;
        if n == 0 || n > MAX_FILE_LINKS {
            return Err(Error::Format(format!(
                "links must be in 1..={MAX_FILE_LINKS}, got {n}"
            )));
        }
        let mut states = Vec::with_capacity(file.states.len());
        for (m, entry) in file.states.into_iter().enumerate() {
            let routing = match entry.routing {
                Some(rows) => {
                    if rows.len() != n {
                        return Err(Error::Format(format!(
                            "state {m}: routing has {} rows, expected {n}",
                            rows.len()
                        )));
                    }
                    RoutingMatrix::from_rows(rows)
                        .map_err(|e| Error::Format(format!("state {m}: {e}")))?
                }
                None => RoutingMatrix::identity(n),
            };
            if let Some(p) = &entry.powers {
                if p.len() != entry.modes.len() {
                    return Err(Error::Format(format!(
                        "state {m}: {} powers for {} modes",
                        p.len(),
                        entry.modes.len()
                    )));
                }
            }
            let mut modes = Vec::with_capacity(entry.modes.len());
            for (k, row) in entry.modes.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Format(format!(
                        "state {m}: mode {k} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                modes.push(match &entry.powers {
                    Some(p) => AllocationMode::with_power(row, p[k]),
                    None => AllocationMode::new(row),
                });
            }
            states.push(StateConfig { modes, routing });
        }
        Ok(NetworkSpec {
            links: n,
            states,
            pi_true: file.pi_true,
            conflicts: file
                .conflicts
                .map(|c| c.into_iter().map(|[a, b]| (a, b)).collect()),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let file = NetworkFile {
            schema_version: NETWORK_SCHEMA_VERSION,
            links: self.links,
            pi_true: self.pi_true.clone(),
            conflicts: self
                .conflicts
                .as_ref()
                .map(|c| c.iter().map(|&(a, b)| [a, b]).collect()),
            states: self
                .states
                .iter()
                .map(|s| {
                    let default_powers = s
                        .modes
                        .iter()
                        .all(|m| m.power == super::squared_norm(&m.departures));
                    StateEntry {
                        routing: if s.routing == RoutingMatrix::identity(self.links) {
                            None
                        } else {
                            Some(s.routing.rows())
                        },
                        modes: s.modes.iter().map(|m| m.departures.clone()).collect(),
                        powers: (!default_powers)
                            .then(|| s.modes.iter().map(|m| m.power).collect()),
                    }
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| Error::Format(format!("network file: {e}")))
    }
}
