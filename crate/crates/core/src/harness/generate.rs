//! Random geometric networks.
//!
//! Transmitters are placed uniformly on the unit square; each receiver sits
//! at `link_length` from its transmitter in a uniformly random direction.
//! Links `i` and `j` conflict when either transmitter lies within
//! `radius` of the other link's receiver. Modes are all independent sets of
//! the resulting conflict graph with power `‖G‖²`, in a single state with
//! identity routing.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{enumerate_modes, InterferenceGraph, NetworkSpec, MAX_ENUMERATION_LINKS};
use crate::stochastic::stream_rng;

pub const GEOMETRY_STREAM: u64 = 3;
pub const DEFAULT_LINK_LENGTH: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryParams {
    pub links: usize,
    pub radius: f64,
    pub link_length: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub tx: (f64, f64),
    pub rx: (f64, f64),
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn place_links(params: &GeometryParams) -> Vec<Placement> {
    let mut rng = stream_rng(params.seed, GEOMETRY_STREAM);
    (0..params.links)
        .map(|_| {
            let tx = (rng.random::<f64>(), rng.random::<f64>());
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let rx = (
                tx.0 + params.link_length * angle.cos(),
                tx.1 + params.link_length * angle.sin(),
            );
            Placement { tx, rx }
        })
        .collect()
}

pub fn conflict_graph(placements: &[Placement], radius: f64) -> Result<InterferenceGraph> {
    let mut edges = Vec::new();
    for i in 0..placements.len() {
        for j in i + 1..placements.len() {
            let (a, b) = (placements[i], placements[j]);
            if dist(a.tx, b.rx) < radius || dist(b.tx, a.rx) < radius {
                edges.push((i, j));
            }
        }
    }
    InterferenceGraph::new(placements.len(), edges)
}

pub fn gen_network(params: &GeometryParams) -> Result<NetworkSpec> {
    if params.links == 0 {
        return Err(Error::Config("a network needs at least one link".into()));
    }
    if params.links > MAX_ENUMERATION_LINKS {
        return Err(Error::TooManyLinks {
            links: params.links,
            max: MAX_ENUMERATION_LINKS,
        });
    }
    if !(params.radius >= 0.0) || !params.radius.is_finite() {
        return Err(Error::Config("radius must be finite and non-negative".into()));
    }
    if !(params.link_length >= 0.0) || !params.link_length.is_finite() {
        return Err(Error::Config("link_length must be finite and non-negative".into()));
    }
    let graph = conflict_graph(&place_links(params), params.radius)?;
    let modes = enumerate_modes(&graph)?;
    if modes.iter().all(|m| m.departures.iter().all(|&d| d == 0)) {
        return Err(Error::Config("generated network cannot serve any link".into()));
    }
    let mut net = NetworkSpec::single_state(params.links, modes);
    net.conflicts = Some(graph.edges().collect());
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(radius: f64) -> GeometryParams {
        GeometryParams {
            links: 7,
            radius,
            link_length: DEFAULT_LINK_LENGTH,
            seed: 11,
        }
    }

    #[test]
    fn radius_extremes() {
        assert_eq!(gen_network(&params(0.0)).unwrap().states[0].modes.len(), 128);
        assert_eq!(gen_network(&params(10.0)).unwrap().states[0].modes.len(), 8);
    }

    #[test]
    fn deterministic_and_valid() {
        let a = gen_network(&params(0.3)).unwrap();
        assert_eq!(a, gen_network(&params(0.3)).unwrap());
        assert!(a.states[0].modes.len() >= 8);
        assert!(a.validate().is_empty());
    }

    #[test]
    fn link_count_limits() {
        let mut p = params(0.1);
        p.links = 0;
        assert!(gen_network(&p).is_err());
        p.links = 26;
        assert!(matches!(gen_network(&p), Err(Error::TooManyLinks { .. })));
    }
}
