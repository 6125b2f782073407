//! Partitioning a network into single-gateway (or gateway-group) clusters.

use super::{build_network_in, NetError, Network, Node};

/// Assign every node to a gateway group by multi-source breadth-first search.
///
/// A node reached at hop `h` may join any group that owns one of its
/// neighbors at hop `h - 1`; among those it picks the group containing the
/// Euclidean-nearest gateway (then the lowest group index). Every cluster is
/// therefore connected and contains its gateways.
pub fn partition_groups(net: &Network, groups: &[Vec<usize>]) -> Vec<usize> {
    let n = net.num_nodes();
    let mut label = vec![usize::MAX; n];
    let mut hop = vec![usize::MAX; n];
    let mut frontier = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for &v in g {
            label[v] = gi;
            hop[v] = 0;
            frontier.push(v);
        }
    }
    let nearest_in = |v: usize, gi: usize| -> f64 {
        groups[gi]
            .iter()
            .map(|&g| net.nodes[v].ground_distance(&net.nodes[g]))
            .fold(f64::INFINITY, f64::min)
    };
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut next: Vec<usize> = Vec::new();
        for &v in &frontier {
            for w in net.neighbors(v) {
                if hop[w] == usize::MAX {
                    hop[w] = depth + 1;
                    next.push(w);
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        for &w in &next {
            let mut best: Option<(f64, usize)> = None;
            for u in net.neighbors(w) {
                if hop[u] == depth {
                    let gi = label[u];
                    let d = nearest_in(w, gi);
                    if best.is_none_or(|(bd, bg)| d < bd || (d == bd && gi < bg)) {
                        best = Some((d, gi));
                    }
                }
            }
            label[w] = best
                .map(|b| b.1)
                .expect("node at hop h has a neighbor at hop h-1");
        }
        frontier = next;
        depth += 1;
    }
    label
}

/// Nearest-gateway partition: one group per gateway, labels follow gateway id order.
pub fn partition_by_gateway(net: &Network) -> Vec<usize> {
    let groups: Vec<Vec<usize>> = net.gateways().into_iter().map(|g| vec![g]).collect();
    partition_groups(net, &groups)
}

/// Split the gateways into `parts` groups of consecutive x coordinate.
pub fn split_gateways_by_x(net: &Network, parts: usize) -> Vec<Vec<usize>> {
    let mut gws = net.gateways();
    gws.sort_by(|&a, &b| net.nodes[a].x.total_cmp(&net.nodes[b].x).then(a.cmp(&b)));
    let parts = parts.clamp(1, gws.len().max(1));
    let mut out = vec![Vec::new(); parts];
    for (i, g) in gws.iter().enumerate() {
        out[i * parts / gws.len()].push(*g);
    }
    for g in &mut out {
        g.sort_unstable();
    }
    out
}

fn induced(net: &Network, members: &[usize]) -> Result<Network, NetError> {
    let mut map = vec![usize::MAX; net.num_nodes()];
    let nodes: Vec<Node> = members
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            map[v] = i;
            Node {
                id: i,
                ..net.nodes[v].clone()
            }
        })
        .collect();
    let edges: Vec<(usize, usize)> = net
        .edges
        .iter()
        .filter(|&&(a, b)| map[a] != usize::MAX && map[b] != usize::MAX)
        .map(|&(a, b)| (map[a], map[b]))
        .collect();
    build_network_in(
        nodes,
        &edges,
        net.environment,
        net.streets.clone(),
        net.seed,
    )
}

/// Induced subnetworks of a partition, one per group, with inter-cluster links dropped.
pub fn cluster_groups(net: &Network, groups: &[Vec<usize>]) -> Result<Vec<Network>, NetError> {
    let label = partition_groups(net, groups);
    (0..groups.len())
        .map(|gi| {
            let members: Vec<usize> = (0..net.num_nodes()).filter(|&v| label[v] == gi).collect();
            induced(net, &members)
        })
        .collect()
}

/// One cluster per gateway, each node joining its nearest gateway by hop count.
pub fn cluster_by_gateway(net: &Network) -> Result<Vec<Network>, NetError> {
    let g = net.gateways().len();
    if g < 2 {
        return Err(NetError::TooFewGateways(g));
    }
    let groups: Vec<Vec<usize>> = net.gateways().into_iter().map(|g| vec![g]).collect();
    cluster_groups(net, &groups)
}

#[cfg(test)]
mod tests {
    use super::super::{build_network, test_node};
    use super::*;

    fn barbell() -> Network {
        // g0 - a - b - c - g1, with b closer to g1.
        let nodes = vec![
            test_node(0, 0.0, 0.0, true),
            test_node(1, 40.0, 0.0, false),
            test_node(2, 85.0, 0.0, false),
            test_node(3, 130.0, 0.0, false),
            test_node(4, 160.0, 0.0, true),
        ];
        build_network(nodes, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap()
    }

    #[test]
    fn barbell_splits_in_two() {
        let net = barbell();
        let label = partition_by_gateway(&net);
        assert_eq!(label, vec![0, 0, 1, 1, 1]);
        let cl = cluster_by_gateway(&net).unwrap();
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].num_nodes() + cl[1].num_nodes(), 5);
        assert_eq!(cl[0].gateways().len(), 1);
        assert_eq!(cl[1].gateways().len(), 1);
    }

    #[test]
    fn single_gateway_rejected() {
        let net = build_network(
            vec![test_node(0, 0.0, 0.0, true), test_node(1, 30.0, 0.0, false)],
            &[(0, 1)],
        )
        .unwrap();
        assert!(matches!(
            cluster_by_gateway(&net),
            Err(NetError::TooFewGateways(1))
        ));
    }

    #[test]
    fn gateway_groups_by_x() {
        let net = barbell();
        assert_eq!(split_gateways_by_x(&net, 2), vec![vec![0], vec![4]]);
        assert_eq!(split_gateways_by_x(&net, 1), vec![vec![0, 4]]);
    }
}
