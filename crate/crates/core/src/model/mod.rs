//! Network structure: links, states, routing, allocation modes, and the
//! per-slot queue update.
//!
//! Links are indexed from 0. A routing matrix `R(m)` has `R[i][i] = 1` and
//! `R[i][j] = -1` when link `i` is the next hop of link `j`, so `R·d` is the
//! net change in backlog caused by a departure vector `d`: packets leave
//! their own link and are credited to the next hop.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod file;

pub use file::NETWORK_SCHEMA_VERSION;

/// Largest link count accepted by [`enumerate_modes`].
pub const MAX_ENUMERATION_LINKS: usize = 25;

/// Largest number of independent sets [`enumerate_modes`] will materialize.
pub const MAX_ENUMERATED_MODES: usize = 1 << 20;

/// Largest link count accepted when reading a network file.
pub const MAX_FILE_LINKS: usize = 1024;

/// Tolerance on `Σ π = 1` for the true state fractions.
pub const PI_SUM_TOLERANCE: f64 = 1e-12;

/// One simultaneous-transmission configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationMode {
    /// Packets per slot each link transmits when this mode is chosen.
    pub departures: Vec<i64>,
    /// Energy spent per slot in this mode.
    pub power: f64,
}

impl AllocationMode {
    /// Mode with the default power `‖G_k‖²`.
    pub fn new(departures: Vec<i64>) -> Self {
        let power = squared_norm(&departures);
        Self { departures, power }
    }

    pub fn with_power(departures: Vec<i64>, power: f64) -> Self {
        Self { departures, power }
    }

    pub fn idle(links: usize) -> Self {
        Self::new(vec![0; links])
    }

    /// Links that transmit at least one packet.
    pub fn served_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.departures
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, _)| i)
    }
}

pub fn squared_norm(v: &[i64]) -> f64 {
    v.iter().map(|&d| (d as f64) * (d as f64)).sum()
}

/// Dense `n × n` integer routing matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl RoutingMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Self { n, entries }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "routing matrix must be square ({n} rows)"
            )));
        }
        Ok(Self {
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// Identity routing plus `R[to][from] = -1` for each `(from, to)` hop.
    pub fn from_next_hops(n: usize, hops: &[(usize, usize)]) -> Result<Self> {
        let mut r = Self::identity(n);
        for &(from, to) in hops {
            if from >= n || to >= n || from == to {
                return Err(Error::Input(format!("invalid hop {from} -> {to}")));
            }
            r.entries[to * n + from] = -1;
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.n + col]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    /// `R · d`.
    pub fn apply(&self, d: &[i64]) -> Vec<i64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * d[j]).sum())
            .collect()
    }

    /// `Rᵀ · w`.
    pub fn transpose_apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j) as f64 * w[i]).sum())
            .collect()
    }

    /// Next hop of `link`, if it forwards anywhere.
    pub fn next_hop(&self, link: usize) -> Option<usize> {
        (0..self.n).find(|&i| i != link && self.get(i, link) == -1)
    }
}

/// Modes and routing that apply while the network is in one state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateConfig {
    pub modes: Vec<AllocationMode>,
    pub routing: RoutingMatrix,
}

impl StateConfig {
    /// Column `k` of `R(m)·G(m)`.
    pub fn routed_departures(&self, k: usize) -> Vec<i64> {
        self.routing.apply(&self.modes[k].departures)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub links: usize,
    pub states: Vec<StateConfig>,
    /// True state fractions, known only to generators and oracles.
    pub pi_true: Option<Vec<f64>>,
    /// Conflict edges the modes were derived from, when known.
    pub conflicts: Option<Vec<(usize, usize)>>,
}

impl NetworkSpec {
    /// Single state with identity routing.
    pub fn single_state(links: usize, modes: Vec<AllocationMode>) -> Self {
        Self {
            links,
            states: vec![StateConfig {
                modes,
                routing: RoutingMatrix::identity(links),
            }],
            pi_true: Some(vec![1.0]),
            conflicts: None,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn mode_counts(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.modes.len()).collect()
    }

    pub fn max_power(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.modes.iter().map(|m| m.power))
            .fold(0.0, f64::max)
    }

    /// Largest `|(R(m)G(m))_{ik}|` over all states, rows and modes.
    pub fn max_routed_entry(&self) -> i64 {
        self.states
            .iter()
            .flat_map(|s| (0..s.modes.len()).flat_map(move |k| s.routed_departures(k)))
            .map(i64::abs)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_spec(self)
    }
}

/// Unordered link conflicts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterferenceGraph {
    links: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl InterferenceGraph {
    pub fn new(links: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Input(format!("self-loop on link {a}")));
            }
            if a >= links || b >= links {
                return Err(Error::Input(format!(
                    "edge ({a}, {b}) references a link outside 0..{links}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { links, edges: set })
    }

    pub fn edgeless(links: usize) -> Self {
        Self {
            links,
            edges: BTreeSet::new(),
        }
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }
}

/// All independent sets of `graph` as 0/1 modes with power `‖G_k‖²`,
/// ordered by bitmask (bit `i` = link `i`), starting with the idle mode.
pub fn enumerate_modes(graph: &InterferenceGraph) -> Result<Vec<AllocationMode>> {
    let n = graph.links();
    if n > MAX_ENUMERATION_LINKS {
        return Err(Error::TooManyLinks {
            links: n,
            max: MAX_ENUMERATION_LINKS,
        });
    }
    let mut adjacency = vec![0u32; n];
    for (a, b) in graph.edges() {
        adjacency[a] |= 1 << b;
        adjacency[b] |= 1 << a;
    }

    // independent[mask] = independent[mask without top bit] && top bit has no
    // neighbour in the rest of the mask.
    let total = 1usize << n;
    let mut independent = vec![false; total];
    independent[0] = true;
    let mut count = 1usize;
    for mask in 1..total {
        let top = usize::BITS - 1 - mask.leading_zeros();
        let rest = mask & !(1 << top);
        let ok = independent[rest] && (adjacency[top as usize] as usize & rest) == 0;
        independent[mask] = ok;
        if ok {
            count += 1;
            if count > MAX_ENUMERATED_MODES {
                return Err(Error::Input(format!(
                    "conflict graph on {n} links has more than {MAX_ENUMERATED_MODES} independent sets"
                )));
            }
        }
    }

    Ok(independent
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(|(mask, _)| {
            AllocationMode::new((0..n).map(|i| ((mask >> i) & 1) as i64).collect())
        })
        .collect())
}

/// A broken structural invariant, with where it was found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Report every violated structural invariant; an empty list means valid.
pub fn validate_spec(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location: String, message: &str| {
        out.push(Violation {
            location,
            message: message.to_string(),
        })
    };
    let n = spec.links;
    if n == 0 {
        push("network".into(), "link count must be positive");
    }
    if spec.states.is_empty() {
        push("network".into(), "state count must be positive");
    }
    for (m, state) in spec.states.iter().enumerate() {
        let loc = |what: String| format!("state {m}: {what}");
        if state.modes.is_empty() {
            push(loc("modes".into()), "every state needs at least one allocation mode");
        }
        for (k, mode) in state.modes.iter().enumerate() {
            if mode.departures.len() != n {
                push(loc(format!("mode {k}")), "departure vector length must equal the link count");
            }
            if mode.departures.iter().any(|&d| d < 0) {
                push(loc(format!("mode {k}")), "departures must be non-negative");
            }
            if !(mode.power >= 0.0) || !mode.power.is_finite() {
                push(loc(format!("mode {k}")), "power must be finite and non-negative");
            }
        }
        let r = &state.routing;
        if r.dim() != n {
            push(loc("routing".into()), "routing matrix dimension must equal the link count");
            continue;
        }
        for i in 0..n {
            if r.get(i, i) != 1 {
                push(loc(format!("routing[{i}][{i}]")), "diagonal must be 1");
            }
        }
        for j in 0..n {
            let mut next_hops = 0;
            for i in (0..n).filter(|&i| i != j) {
                match r.get(i, j) {
                    0 => {}
                    -1 => next_hops += 1,
                    _ => push(
                        loc(format!("routing[{i}][{j}]")),
                        "off-diagonal entries must be 0 or -1",
                    ),
                }
            }
            if next_hops > 1 {
                push(loc(format!("routing column {j}")), "multiple next hops");
            }
        }
    }
    if let Some(pi) = &spec.pi_true {
        if pi.len() != spec.states.len() {
            push("pi_true".into(), "length must equal the state count");
        }
        if pi.iter().any(|&p| !(p >= 0.0)) {
            push("pi_true".into(), "entries must be non-negative");
        }
        if (pi.iter().sum::<f64>() - 1.0).abs() > PI_SUM_TOLERANCE {
            push("pi_true".into(), "entries must sum to 1");
        }
    }
    if let Some(edges) = &spec.conflicts {
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                push(format!("conflicts ({a}, {b})"), "edge must join two distinct valid links");
                continue;
            }
            for (m, state) in spec.states.iter().enumerate() {
                for (k, mode) in state.modes.iter().enumerate() {
                    let d = &mode.departures;
                    if d.len() == n && d[a] > 0 && d[b] > 0 {
                        push(
                            format!("state {m}: mode {k}"),
                            "mode serves two conflicting links",
                        );
                    }
                }
            }
        }
    }
    out
}

/// Physical per-link queue lengths; never negative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct QueueVector(Vec<i64>);

impl QueueVector {
    pub fn new(q: Vec<i64>) -> Result<Self> {
        if q.iter().any(|&x| x < 0) {
            return Err(Error::Input("queue lengths must be non-negative".into()));
        }
        Ok(Self(q))
    }

    pub fn zeros(links: usize) -> Self {
        Self(vec![0; links])
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> i64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> i64 {
        self.0.iter().sum()
    }
}

impl TryFrom<Vec<i64>> for QueueVector {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QueueVector> for Vec<i64> {
    fn from(q: QueueVector) -> Self {
        q.0
    }
}

/// One slot of queue dynamics: arrivals land first, then the mode is served.
///
/// A link whose post-arrival queue is shorter than its nominal departures
/// transmits nothing. Packets forwarded to a next hop are credited in the
/// same slot. Returns the new queue and the effective departure vector.
pub fn apply_slot(
    q: &QueueVector,
    arrivals: &[i64],
    routing: &RoutingMatrix,
    mode: &AllocationMode,
) -> Result<(QueueVector, Vec<i64>)> {
    let n = q.len();
    if arrivals.len() != n || mode.departures.len() != n || routing.dim() != n {
        return Err(Error::Dimension(format!(
            "apply_slot: queue has {n} links, arrivals {}, mode {}, routing {}",
            arrivals.len(),
            mode.departures.len(),
            routing.dim()
        )));
    }
    if let Some(i) = arrivals.iter().position(|&a| a < 0) {
        return Err(Error::Input(format!("negative arrival on link {i}")));
    }
    let backlog: Vec<i64> = q.0.iter().zip(arrivals).map(|(a, b)| a + b).collect();
    let effective: Vec<i64> = backlog
        .iter()
        .zip(&mode.departures)
        .map(|(&b, &g)| if b >= g { g } else { 0 })
        .collect();
    let moved = routing.apply(&effective);
    let next: Vec<i64> = backlog.iter().zip(&moved).map(|(b, m)| b - m).collect();
    debug_assert!(next.iter().all(|&x| x >= 0));
    Ok((QueueVector(next), effective))
}
