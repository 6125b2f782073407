#![allow(dead_code)]

use backhaul::net::{build_network, Network, Node};
use backhaul::propagation::{compute_link_budget, InterferenceMatrix, PropagationParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn node(id: usize, x: f64, y: f64, gateway: bool) -> Node {
    Node {
        id,
        x,
        y,
        height: 6.0,
        is_gateway: gateway,
        canyons: Vec::new(),
    }
}

/// Gateway 0 followed by a straight line of `n - 1` clients, 50 m apart.
pub fn chain(n: usize) -> Network {
    let nodes = (0..n)
        .map(|i| node(i, 50.0 * i as f64, 0.0, i == 0))
        .collect();
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    build_network(nodes, &edges).unwrap()
}

pub fn nominal() -> f64 {
    11f64.log2()
}

/// Conflict-only matrix at 10 dB.
pub fn conflicts(net: &Network) -> InterferenceMatrix {
    InterferenceMatrix::from_conflicts(net, 10.0)
}

/// A connected random network of 3 to 7 nodes and at most 6 edges with one or
/// two gateways, laid out in a 200 m square so links interfere.
pub fn small_random(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=7usize);
    let mut pos: Vec<(f64, f64)> = Vec::new();
    while pos.len() < n {
        let p = (rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0));
        if pos
            .iter()
            .all(|q: &(f64, f64)| (q.0 - p.0).hypot(q.1 - p.1) > 20.0)
        {
            pos.push(p);
        }
    }
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.push((j, i));
    }
    while edges.len() < 6 && rng.gen_bool(0.5) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let e = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
            edges.push(e);
        }
    }
    let gateways = if n >= 5 && rng.gen_bool(0.4) { 2 } else { 1 };
    let nodes = pos
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| node(i, x, y, i < gateways))
        .collect();
    build_network(nodes, &edges).unwrap()
}

pub fn suburban_matrix(net: &Network, seed: u64) -> InterferenceMatrix {
    compute_link_budget(net, &PropagationParams::default(), seed).unwrap()
}
