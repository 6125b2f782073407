//! Random suburban topologies and synthetic urban street grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_network_in, Axis, Canyon, Environment, NetError, Network, Node, StreetGeometry,
    MAX_DEGREE,
};

const PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub nodes: usize,
    /// Side of the square deployment area in meters.
    pub area: f64,
    pub gateway_fraction: f64,
    /// Exact gateway count; overrides `gateway_fraction` when set.
    pub gateways: Option<usize>,
    pub degree_min: usize,
    pub degree_max: usize,
    pub min_distance: f64,
    /// Links longer than this are removed (an isolated node keeps its nearest link).
    pub truncation: f64,
    pub height_min: f64,
    pub height_max: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            nodes: 100,
            area: 500.0,
            gateway_fraction: 0.1,
            gateways: None,
            degree_min: 3,
            degree_max: 5,
            min_distance: 10.0,
            truncation: 120.0,
            height_min: 5.0,
            height_max: 8.0,
            seed: 1,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidParams(m.to_string()));
        if self.nodes < 2 {
            return bad("node count must be at least 2");
        }
        if !(self.gateway_fraction > 0.0 && self.gateway_fraction <= 1.0) {
            return bad("gateway fraction must lie in (0, 1]");
        }
        if let Some(g) = self.gateways {
            if g == 0 || g > self.nodes {
                return bad("gateway count must lie in [1, node count]");
            }
        }
        if self.degree_min < 1 || self.degree_min > self.degree_max || self.degree_max > MAX_DEGREE
        {
            return bad("degree range must lie within [1, 6]");
        }
        if !(self.area > 0.0 && self.min_distance >= 0.0 && self.truncation > 0.0) {
            return bad("area, minimum distance and truncation must be positive");
        }
        if !(self.height_min > 0.0 && self.height_min <= self.height_max) {
            return bad("height range must be positive and ordered");
        }
        Ok(())
    }

    /// Number of gateways: the explicit count, or the rounded fraction (at least 1).
    pub fn gateway_count(&self) -> usize {
        self.gateways.unwrap_or_else(|| {
            ((self.gateway_fraction * self.nodes as f64).round() as usize).clamp(1, self.nodes)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UrbanParams {
    /// Blocks along x; there are `blocks_x + 1` vertical streets.
    pub blocks_x: usize,
    /// Blocks along y; there are `blocks_y + 1` horizontal streets.
    pub blocks_y: usize,
    /// Distance between adjacent street center lines along x.
    pub block_x: f64,
    /// Distance between adjacent street center lines along y.
    pub block_y: f64,
    pub street_width: f64,
    /// Spacing of nodes placed between intersections.
    pub spacing: f64,
    pub wall_offset_min: f64,
    pub wall_offset_max: f64,
    pub height_min: f64,
    pub height_max: f64,
    pub gateway_fraction: f64,
    pub gateways: Option<usize>,
    pub seed: u64,
}

impl Default for UrbanParams {
    fn default() -> Self {
        UrbanParams {
            blocks_x: 3,
            blocks_y: 2,
            block_x: 250.0,
            block_y: 80.0,
            street_width: 25.0,
            spacing: 50.0,
            wall_offset_min: 4.0,
            wall_offset_max: 21.0,
            height_min: 5.0,
            height_max: 8.0,
            gateway_fraction: 0.1,
            gateways: Some(4),
            seed: 1,
        }
    }
}

/// Uniform anchor points on a ceil(sqrt(g)) square grid, row-major, first `g` kept.
fn anchors(g: usize, x0: f64, y0: f64, w: f64, h: f64) -> Vec<(f64, f64)> {
    let k = (g as f64).sqrt().ceil() as usize;
    let mut out = Vec::with_capacity(g);
    'outer: for j in 0..k {
        for i in 0..k {
            if out.len() == g {
                break 'outer;
            }
            out.push((
                x0 + (i as f64 + 0.5) * w / k as f64,
                y0 + (j as f64 + 0.5) * h / k as f64,
            ));
        }
    }
    out
}

fn mark_gateways(nodes: &mut [Node], g: usize, x0: f64, y0: f64, w: f64, h: f64) {
    for (ax, ay) in anchors(g, x0, y0, w, h) {
        let best = nodes
            .iter()
            .filter(|n| !n.is_gateway)
            .min_by(|a, b| {
                let da = (a.x - ax).hypot(a.y - ay);
                let db = (b.x - ax).hypot(b.y - ay);
                da.total_cmp(&db).then(a.id.cmp(&b.id))
            })
            .map(|n| n.id);
        if let Some(id) = best {
            nodes[id].is_gateway = true;
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

struct EdgeSet {
    adj: Vec<Vec<usize>>,
}

impl EdgeSet {
    fn has(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }
    fn add(&mut self, a: usize, b: usize) {
        self.adj[a].push(b);
        self.adj[b].push(a);
    }
    fn remove(&mut self, a: usize, b: usize) {
        self.adj[a].retain(|&x| x != b);
        self.adj[b].retain(|&x| x != a);
    }
    fn degree(&self, a: usize) -> usize {
        self.adj[a].len()
    }
    fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = (0..self.adj.len())
            .flat_map(|a| {
                self.adj[a]
                    .iter()
                    .filter(move |&&b| a < b)
                    .map(move |&b| (a, b))
            })
            .collect();
        e.sort_unstable();
        e
    }
    fn components(&self) -> Vec<usize> {
        let n = self.adj.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(v) = stack.pop() {
                for &w in &self.adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Join every component without a gateway to the rest of the graph through
/// the shortest edge whose endpoints both have spare degree.
fn repair_connectivity(nodes: &[Node], es: &mut EdgeSet, seed: u64) -> Result<(), NetError> {
    loop {
        let comp = es.components();
        let ncomp = comp.iter().max().map_or(0, |&c| c + 1);
        let mut has_gw = vec![false; ncomp];
        for n in nodes {
            if n.is_gateway {
                has_gw[comp[n.id]] = true;
            }
        }
        let Some(orphan) = (0..ncomp).find(|&c| !has_gw[c]) else {
            return Ok(());
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for a in nodes
            .iter()
            .filter(|n| comp[n.id] == orphan && es.degree(n.id) < MAX_DEGREE)
        {
            for b in nodes
                .iter()
                .filter(|n| comp[n.id] != orphan && es.degree(n.id) < MAX_DEGREE)
            {
                let d = a.ground_distance(b);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a.id, b.id));
                }
            }
        }
        match best {
            Some((_, a, b)) => es.add(a, b),
            None => {
                return Err(NetError::GenerationFailure {
                    seed,
                    reason: "cannot connect every node to a gateway".into(),
                })
            }
        }
    }
}

/// Random suburban topology: uniform placement with a minimum spacing,
/// nearest-neighbor edges with a per-node degree draw, length truncation and
/// gateways nearest to a uniform anchor grid.
pub fn generate_suburban(params: &GenParams) -> Result<Network, NetError> {
    params.validate()?;
    let seed = params.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<Node> = Vec::with_capacity(params.nodes);
    while nodes.len() < params.nodes {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let x = rng.gen_range(0.0..params.area);
            let y = rng.gen_range(0.0..params.area);
            if nodes
                .iter()
                .all(|n| (n.x - x).hypot(n.y - y) >= params.min_distance)
            {
                let height = draw(&mut rng, params.height_min, params.height_max);
                nodes.push(Node {
                    id: nodes.len(),
                    x,
                    y,
                    height,
                    is_gateway: false,
                    canyons: Vec::new(),
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(NetError::GenerationFailure {
                seed,
                reason: format!(
                    "could not place node {} at minimum distance {}",
                    nodes.len(),
                    params.min_distance
                ),
            });
        }
    }

    let n = nodes.len();
    let mut es = EdgeSet {
        adj: vec![Vec::new(); n],
    };
    let targets: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(params.degree_min..=params.degree_max))
        .collect();
    let by_distance = |i: usize| -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            nodes[i]
                .ground_distance(&nodes[a])
                .total_cmp(&nodes[i].ground_distance(&nodes[b]))
                .then(a.cmp(&b))
        });
        order
    };
    for i in 0..n {
        for j in by_distance(i) {
            if es.degree(i) >= targets[i] {
                break;
            }
            if es.has(i, j) || es.degree(j) >= MAX_DEGREE {
                continue;
            }
            es.add(i, j);
        }
    }
    for (a, b) in es.edges() {
        if nodes[a].ground_distance(&nodes[b]) > params.truncation {
            es.remove(a, b);
        }
    }
    for i in 0..n {
        if es.degree(i) == 0 {
            if let Some(j) = by_distance(i)
                .into_iter()
                .find(|&j| es.degree(j) < MAX_DEGREE)
            {
                es.add(i, j);
            }
        }
    }

    mark_gateways(
        &mut nodes,
        params.gateway_count(),
        0.0,
        0.0,
        params.area,
        params.area,
    );
    repair_connectivity(&nodes, &mut es, seed)?;
    build_network_in(nodes, &es.edges(), Environment::Suburban, None, Some(seed))
}

/// Manhattan-style grid: nodes at every intersection plus evenly spaced nodes
/// between intersections, laterally jittered inside the street. Consecutive
/// nodes along a street are linked. Gateways go to the intersections nearest
/// to anchor points spread over the grid, favoring busier intersections on
/// ties; with more gateways than intersections any node may be picked.
pub fn generate_urban_grid(params: &UrbanParams) -> Result<Network, NetError> {
    let bad = |m: &str| Err(NetError::InvalidParams(m.to_string()));
    if params.blocks_x == 0 && params.blocks_y == 0 {
        return bad("grid needs at least one block along some axis");
    }
    if !(params.street_width > 0.0
        && params.spacing > 0.0
        && params.block_x > 0.0
        && params.block_y > 0.0)
    {
        return bad("street dimensions must be positive");
    }
    if !(params.wall_offset_min >= 0.0
        && params.wall_offset_min <= params.wall_offset_max
        && params.wall_offset_max <= params.street_width)
    {
        return bad("wall offsets must lie inside the street");
    }
    if !(params.height_min > 0.0 && params.height_min <= params.height_max) {
        return bad("height range must be positive and ordered");
    }
    let seed = params.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = params.street_width;
    let (nx, ny) = (params.blocks_x + 1, params.blocks_y + 1);
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * params.block_x).collect();
    let ys: Vec<f64> = (0..ny).map(|j| j as f64 * params.block_y).collect();

    let mut canyons = Vec::new();
    let mut h_canyon = vec![None; ny];
    let mut v_canyon = vec![None; nx];
    if params.blocks_x > 0 {
        for (j, &y) in ys.iter().enumerate() {
            h_canyon[j] = Some(canyons.len());
            canyons.push(Canyon {
                id: canyons.len(),
                axis: Axis::Horizontal,
                center: y,
            });
        }
    }
    if params.blocks_y > 0 {
        for (i, &x) in xs.iter().enumerate() {
            v_canyon[i] = Some(canyons.len());
            canyons.push(Canyon {
                id: canyons.len(),
                axis: Axis::Vertical,
                center: x,
            });
        }
    }

    let mut nodes: Vec<Node> = Vec::new();
    let offset =
        |rng: &mut ChaCha8Rng| -w / 2.0 + draw(rng, params.wall_offset_min, params.wall_offset_max);
    let push =
        |nodes: &mut Vec<Node>, x: f64, y: f64, canyons: Vec<usize>, rng: &mut ChaCha8Rng| {
            let height = draw(rng, params.height_min, params.height_max);
            let id = nodes.len();
            nodes.push(Node {
                id,
                x,
                y,
                height,
                is_gateway: false,
                canyons,
            });
            id
        };

    let mut inter = vec![vec![0usize; nx]; ny];
    for j in 0..ny {
        for i in 0..nx {
            let cs: Vec<usize> = h_canyon[j].into_iter().chain(v_canyon[i]).collect();
            let dx = if v_canyon[i].is_some() {
                offset(&mut rng)
            } else {
                0.0
            };
            let dy = if h_canyon[j].is_some() {
                offset(&mut rng)
            } else {
                0.0
            };
            inter[j][i] = push(&mut nodes, xs[i] + dx, ys[j] + dy, cs, &mut rng);
        }
    }

    let between = |len: f64| ((len / params.spacing + 1e-9).floor() as usize).saturating_sub(1);
    let mut edges = Vec::new();
    for j in 0..ny {
        let Some(c) = h_canyon[j] else { continue };
        for i in 0..params.blocks_x {
            let k = between(params.block_x);
            let step = params.block_x / (k + 1) as f64;
            let mut prev = inter[j][i];
            for s in 1..=k {
                let dy = offset(&mut rng);
                let id = push(
                    &mut nodes,
                    xs[i] + s as f64 * step,
                    ys[j] + dy,
                    vec![c],
                    &mut rng,
                );
                edges.push((prev, id));
                prev = id;
            }
            edges.push((prev, inter[j][i + 1]));
        }
    }
    for i in 0..nx {
        let Some(c) = v_canyon[i] else { continue };
        for j in 0..params.blocks_y {
            let k = between(params.block_y);
            let step = params.block_y / (k + 1) as f64;
            let mut prev = inter[j][i];
            for s in 1..=k {
                let dx = offset(&mut rng);
                let id = push(
                    &mut nodes,
                    xs[i] + dx,
                    ys[j] + s as f64 * step,
                    vec![c],
                    &mut rng,
                );
                edges.push((prev, id));
                prev = id;
            }
            edges.push((prev, inter[j + 1][i]));
        }
    }

    let total = nodes.len();
    let g = params
        .gateways
        .unwrap_or_else(|| ((params.gateway_fraction * total as f64).round() as usize).max(1))
        .min(total);
    let (wx, wy) = (xs[nx - 1] - xs[0], ys[ny - 1] - ys[0]);
    if g <= nx * ny {
        let mut degree = vec![0usize; nodes.len()];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let ky = (((g as f64) * wy / wx.max(1e-9)).sqrt().round() as usize).clamp(1, g);
        let kx = g.div_ceil(ky);
        let mut taken = vec![vec![false; nx]; ny];
        for a in 0..g {
            let (ax, ay) = ((a % kx) as f64 + 0.5, (a / kx) as f64 + 0.5);
            let (ax, ay) = (ax * wx / kx as f64, ay * wy / ky as f64);
            let mut best: Option<(f64, usize, usize, usize)> = None;
            for j in 0..ny {
                for i in 0..nx {
                    if taken[j][i] {
                        continue;
                    }
                    let d = (xs[i] - ax).hypot(ys[j] - ay);
                    let better = match best {
                        None => true,
                        Some((bd, bi, bj, _)) => {
                            d < bd - 1e-9
                                || (d <= bd + 1e-9 && degree[inter[j][i]] > degree[inter[bj][bi]])
                        }
                    };
                    if better {
                        best = Some((d, i, j, inter[j][i]));
                    }
                }
            }
            let (_, i, j, id) = best.expect("free intersection");
            taken[j][i] = true;
            nodes[id].is_gateway = true;
        }
    } else {
        mark_gateways(&mut nodes, g, 0.0, 0.0, wx.max(1e-9), wy.max(1e-9));
    }
    let streets = StreetGeometry {
        street_width: w,
        block_x: params.block_x,
        block_y: params.block_y,
        canyons,
    };
    build_network_in(nodes, &edges, Environment::Urban, Some(streets), Some(seed))
}
