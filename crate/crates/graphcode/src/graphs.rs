//! Network topologies, the BFS spanning tree / layering machinery, and the
//! square-tessellation and backbone constructions used by the geometric
//! gathering scheme.
//!
//! Convention: node ids are `0..total_nodes`, distances are hop counts of
//! directed paths toward the sink, and the natural logarithm is used in
//! every sizing expression (`rho * ln N`, `c * ln N`).

use crate::channels::StreamRng;
use crate::{Error, Result};
use rand::Rng;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

pub type NodeId = usize;

/// A directed broadcast network with a designated sink.
#[derive(Clone, Debug)]
pub struct Network {
    total_nodes: usize,
    sink: NodeId,
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    coords: Option<Vec<(f64, f64)>>,
    radius: Option<f64>,
    label: String,
    bit_index: Vec<Option<usize>>,
}

impl Network {
    /// Builds a network from a directed edge list. Parallel edges collapse;
    /// self-loops are kept (extended Erdős–Rényi graphs allow them).
    pub fn from_edges(
        total_nodes: usize,
        sink: NodeId,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        coords: Option<Vec<(f64, f64)>>,
        radius: Option<f64>,
        label: impl Into<String>,
    ) -> Self {
        assert!(sink < total_nodes, "sink id out of range");
        if let Some(c) = &coords {
            assert_eq!(c.len(), total_nodes, "one coordinate per node required");
        }
        let mut out_adj = vec![Vec::new(); total_nodes];
        let mut in_adj = vec![Vec::new(); total_nodes];
        for (u, v) in edges {
            assert!(u < total_nodes && v < total_nodes, "edge endpoint out of range");
            out_adj[u].push(v);
            in_adj[v].push(u);
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
            adj.dedup();
        }
        let mut bit_index = vec![None; total_nodes];
        let mut next = 0;
        for v in 0..total_nodes {
            if v != sink {
                bit_index[v] = Some(next);
                next += 1;
            }
        }
        Self { total_nodes, sink, out_adj, in_adj, coords, radius, label: label.into(), bit_index }
    }

    /// Number of non-sink nodes (the `N` of every sizing formula).
    pub fn n(&self) -> usize {
        self.total_nodes - 1
    }

    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_adj[v]
    }

    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_adj[v]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out_adj[u].binary_search(&v).is_ok()
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Directed edge count over the whole graph.
    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// Directed edges between non-sink nodes (the E1 set of an extended
    /// Erdős–Rényi graph).
    pub fn non_sink_edge_count(&self) -> usize {
        self.out_adj
            .iter()
            .enumerate()
            .filter(|(u, _)| *u != self.sink)
            .map(|(_, adj)| adj.iter().filter(|&&v| v != self.sink).count())
            .sum()
    }

    pub fn non_sink_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.total_nodes).filter(move |&v| v != self.sink)
    }

    /// Position of a non-sink node in the self-information bit vector.
    pub fn bit_index(&self, v: NodeId) -> usize {
        self.bit_index[v].expect("sink holds no self-information bit")
    }

    /// In-degree of each non-sink node counting only non-sink in-edges
    /// (the `d_n` of the density bounds).
    pub fn non_sink_in_degrees(&self) -> Vec<usize> {
        self.non_sink_nodes()
            .map(|v| self.in_adj[v].iter().filter(|&&u| u != self.sink).count())
            .collect()
    }

    /// Checks assumption A.2: the sink must be reachable from every
    /// non-sink node along directed edges (reverse BFS from the sink).
    pub fn validate_connectivity(&self) -> Result<()> {
        let mut seen = vec![false; self.total_nodes];
        seen[self.sink] = true;
        let mut queue = std::collections::VecDeque::from([self.sink]);
        while let Some(v) = queue.pop_front() {
            for &u in &self.in_adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        let unreachable: Vec<NodeId> = (0..self.total_nodes).filter(|&v| !seen[v]).collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(Error::Disconnected { unreachable })
        }
    }

    pub fn is_connected(&self) -> bool {
        self.validate_connectivity().is_ok()
    }

    /// Writes the plain-text edge list: `N <count> SINK <id>`, optional
    /// `POS <id> <x> <y>` lines, then `E <src> <dst>` lines.
    pub fn write_edge_list<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "N {} SINK {}", self.n(), self.sink)?;
        if let Some(coords) = &self.coords {
            for (v, (x, y)) in coords.iter().enumerate() {
                writeln!(w, "POS {v} {x} {y}")?;
            }
        }
        for u in 0..self.total_nodes {
            for &v in &self.out_adj[u] {
                writeln!(w, "E {u} {v}")?;
            }
        }
        Ok(())
    }

    /// Parses the edge-list format written by [`Network::write_edge_list`].
    /// Connectivity (A.2) is validated on demand, not here.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))??;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 4 || tok[0] != "N" || tok[2] != "SINK" {
            return Err(Error::Parse(format!("bad header line: {header}")));
        }
        let n: usize =
            tok[1].parse().map_err(|_| Error::Parse(format!("bad node count: {}", tok[1])))?;
        let sink: NodeId =
            tok[3].parse().map_err(|_| Error::Parse(format!("bad sink id: {}", tok[3])))?;
        let total = n + 1;
        if sink >= total {
            return Err(Error::Parse(format!("sink id {sink} out of range for {n} nodes")));
        }
        let mut coords: Vec<Option<(f64, f64)>> = vec![None; total];
        let mut any_pos = false;
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok.as_slice() {
                [] => {}
                ["POS", id, x, y] => {
                    let id: usize =
                        id.parse().map_err(|_| Error::Parse(format!("bad POS id: {id}")))?;
                    if id >= total {
                        return Err(Error::Parse(format!("POS id {id} out of range")));
                    }
                    let x: f64 =
                        x.parse().map_err(|_| Error::Parse(format!("bad POS x: {x}")))?;
                    let y: f64 =
                        y.parse().map_err(|_| Error::Parse(format!("bad POS y: {y}")))?;
                    coords[id] = Some((x, y));
                    any_pos = true;
                }
                ["E", u, v] => {
                    let u: usize =
                        u.parse().map_err(|_| Error::Parse(format!("bad edge src: {u}")))?;
                    let v: usize =
                        v.parse().map_err(|_| Error::Parse(format!("bad edge dst: {v}")))?;
                    if u >= total || v >= total {
                        return Err(Error::Parse(format!("edge ({u},{v}) out of range")));
                    }
                    edges.push((u, v));
                }
                _ => return Err(Error::Parse(format!("unrecognized line: {line}"))),
            }
        }
        let coords = if any_pos {
            let filled: Option<Vec<(f64, f64)>> = coords.into_iter().collect();
            Some(filled.ok_or_else(|| Error::Parse("POS lines must cover every node".into()))?)
        } else {
            None
        };
        Ok(Self::from_edges(total, sink, edges, coords, None, "file"))
    }
}

/// Complete graph: every pair of nodes (sink included) linked both ways.
pub fn gen_complete(n: usize) -> Network {
    assert!(n >= 1);
    let total = n + 1;
    let mut edges = Vec::with_capacity(total * (total - 1));
    for u in 0..total {
        for v in 0..total {
            if u != v {
                edges.push((u, v));
            }
        }
    }
    Network::from_edges(total, 0, edges, None, None, format!("complete(n={n})"))
}

/// `side x side` nodes on the integer lattice, sink at the (0,0) corner,
/// bidirectional edges within Euclidean distance `r` (in lattice units).
pub fn gen_grid(side: usize, r: f64) -> Result<Network> {
    if side < 2 {
        return Err(Error::Input(format!("grid side must be >= 2, got {side}")));
    }
    if r < 1.0 {
        return Err(Error::Input(format!("grid radius must be >= 1, got {r}")));
    }
    let total = side * side;
    let coords: Vec<(f64, f64)> =
        (0..total).map(|i| ((i % side) as f64, (i / side) as f64)).collect();
    let mut edges = Vec::new();
    for u in 0..total {
        for v in 0..total {
            if u != v && dist(coords[u], coords[v]) <= r {
                edges.push((u, v));
            }
        }
    }
    let net = Network::from_edges(
        total,
        0,
        edges,
        Some(coords),
        None,
        format!("grid(side={side},r={r})"),
    );
    net.validate_connectivity()?;
    Ok(net)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn build_geometric(coords: Vec<(f64, f64)>, r: f64, label: String) -> Network {
    let total = coords.len();
    let mut edges = Vec::new();
    for u in 0..total {
        for v in u + 1..total {
            if dist(coords[u], coords[v]) <= r {
                edges.push((u, v));
                edges.push((v, u));
            }
        }
    }
    Network::from_edges(total, 0, edges, Some(coords), Some(r), label)
}

/// Geometric graph over explicit positions in the unit square; node 0 is
/// the sink. Bidirectional edges exactly between pairs at distance <= `r`.
pub fn gen_geometric(coords: &[(f64, f64)], r: f64) -> Result<Network> {
    if !(0.0..1.0).contains(&r) || r <= 0.0 {
        return Err(Error::Input(format!("geometric radius must be in (0,1), got {r}")));
    }
    if coords.is_empty() {
        return Err(Error::Input("geometric graph needs at least the sink position".into()));
    }
    for (i, &(x, y)) in coords.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::Input(format!("coordinate {i} = ({x},{y}) outside unit square")));
        }
    }
    let net = build_geometric(
        coords.to_vec(),
        r,
        format!("geometric(n={},r={r})", coords.len() - 1),
    );
    net.validate_connectivity()?;
    Ok(net)
}

/// Random geometric graph: `n`+1 i.i.d. uniform positions in the unit
/// square. Connectivity is reported, not enforced; callers condition on it.
pub fn gen_random_geometric(n: usize, r: f64, rng: &mut StreamRng) -> Result<(Network, bool)> {
    if !(0.0..1.0).contains(&r) || r <= 0.0 {
        return Err(Error::Input(format!("geometric radius must be in (0,1), got {r}")));
    }
    let coords: Vec<(f64, f64)> =
        (0..=n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let net = build_geometric(coords, r, format!("random_geometric(n={n},r={r})"));
    let connected = net.is_connected();
    Ok((net, connected))
}

/// Extended Erdős–Rényi graph: each ordered pair of non-sink nodes
/// (self-loops included) connected independently with `p = c ln n / n`,
/// plus one directed edge from every non-sink node to the sink.
pub fn gen_extended_er(n: usize, c: f64, rng: &mut StreamRng) -> Result<Network> {
    if n < 1 || c <= 0.0 {
        return Err(Error::Input(format!("need n >= 1 and c > 0, got n={n}, c={c}")));
    }
    let p = c * (n as f64).ln() / n as f64;
    if p > 1.0 {
        return Err(Error::Input(format!(
            "connection probability c*ln(n)/n = {p} exceeds 1 (n={n}, c={c})"
        )));
    }
    let total = n + 1;
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    // Nodes 1..=n; pair (i,j) maps to linear index (i-1)*n + (j-1). Skip
    // sampling visits exactly the Bernoulli(p) successes in order.
    let pairs = (n as u64) * (n as u64);
    if p >= 1.0 {
        for i in 1..=n {
            for j in 1..=n {
                edges.push((i, j));
            }
        }
    } else if p > 0.0 {
        let log1mp = (1.0 - p).ln();
        let mut idx: u64 = 0;
        loop {
            // Geometric gap: number of failures before the next success.
            let u: f64 = rng.random();
            let gap = (u.ln() / log1mp).floor() as u64;
            idx = match idx.checked_add(gap) {
                Some(i) => i,
                None => break,
            };
            if idx >= pairs {
                break;
            }
            let i = (idx / n as u64) as usize + 1;
            let j = (idx % n as u64) as usize + 1;
            edges.push((i, j));
            idx += 1;
        }
    }
    for v in 1..=n {
        edges.push((v, 0));
    }
    Ok(Network::from_edges(total, 0, edges, None, None, format!("er(n={n},c={c})")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarKind {
    /// Tails end in cliques.
    Heavy,
    /// Bare tails.
    Light,
}

use serde::{Deserialize, Serialize};

/// Star of `tails` paths of length `tail_len` around a central sink; the
/// heavy kind appends a clique of `clique_size` extra nodes at every tail
/// end, each clique member also linked to the tail end.
pub fn gen_star(tails: usize, tail_len: usize, clique_size: usize, kind: StarKind) -> Network {
    assert!(tails >= 1 && tail_len >= 1);
    if kind == StarKind::Heavy {
        assert!(clique_size >= 1, "heavy star needs a clique");
    }
    let path_nodes = tails * tail_len;
    let clique_nodes = if kind == StarKind::Heavy { tails * clique_size } else { 0 };
    let total = 1 + path_nodes + clique_nodes;
    let mut edges = Vec::new();
    let both = |a: NodeId, b: NodeId, edges: &mut Vec<(NodeId, NodeId)>| {
        edges.push((a, b));
        edges.push((b, a));
    };
    for t in 0..tails {
        let first = 1 + t * tail_len;
        both(0, first, &mut edges);
        for k in 1..tail_len {
            both(first + k - 1, first + k, &mut edges);
        }
        if kind == StarKind::Heavy {
            let tail_end = first + tail_len - 1;
            let base = 1 + path_nodes + t * clique_size;
            for a in 0..clique_size {
                both(tail_end, base + a, &mut edges);
                for b in a + 1..clique_size {
                    both(base + a, base + b, &mut edges);
                }
            }
        }
    }
    let label = match kind {
        StarKind::Heavy => format!("star(heavy,tails={tails},len={tail_len},clique={clique_size})"),
        StarKind::Light => format!("star(light,tails={tails},len={tail_len})"),
    };
    Network::from_edges(total, 0, edges, None, None, label)
}

/// BFS spanning tree rooted at the sink, with layers, parents, children
/// and descendant sets. Parent ties break toward the lowest node id so
/// descendant counts (and with them broadcast counts) are deterministic.
#[derive(Clone, Debug)]
pub struct BfsLayering {
    sink: NodeId,
    parent: Vec<Option<NodeId>>,
    dist: Vec<usize>,
    layers: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    descendants: Vec<Vec<NodeId>>,
}

impl BfsLayering {
    pub fn sink(&self) -> NodeId {
        self.sink
    }

    /// Hop distance d(v, sink); 0 for the sink itself.
    pub fn dist(&self, v: NodeId) -> usize {
        self.dist[v]
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    /// Layers V_1 .. V_L; `layers()[l-1]` holds the nodes at distance l.
    pub fn layers(&self) -> &[Vec<NodeId>] {
        &self.layers
    }

    pub fn max_dist(&self) -> usize {
        self.layers.len()
    }

    /// All tree descendants of `v`, sorted by id (`v` excluded).
    pub fn descendants(&self, v: NodeId) -> &[NodeId] {
        &self.descendants[v]
    }

    pub fn descendant_count(&self, v: NodeId) -> usize {
        self.descendants[v].len()
    }

    /// Average hop distance to the sink over non-sink nodes.
    pub fn avg_distance(&self) -> f64 {
        let n: usize = self.layers.iter().map(Vec::len).sum();
        if n == 0 {
            return 0.0;
        }
        let total: usize = self.layers.iter().enumerate().map(|(i, l)| (i + 1) * l.len()).sum();
        total as f64 / n as f64
    }

    /// Nodes in post order (children before parents), ids ascending among
    /// siblings; the sink comes last.
    pub fn post_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.dist.len());
        let mut stack = vec![(self.sink, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
            } else {
                stack.push((v, true));
                for &c in self.children[v].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        order
    }
}

/// Builds the BFS layering of a connected network.
pub fn bfs_layering(net: &Network) -> Result<BfsLayering> {
    let total = net.total_nodes();
    let sink = net.sink();
    const UNSEEN: usize = usize::MAX;
    let mut dist = vec![UNSEEN; total];
    dist[sink] = 0;
    let mut queue = std::collections::VecDeque::from([sink]);
    while let Some(v) = queue.pop_front() {
        for &u in net.in_neighbors(v) {
            if dist[u] == UNSEEN {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let unreachable: Vec<NodeId> = (0..total).filter(|&v| dist[v] == UNSEEN).collect();
    if !unreachable.is_empty() {
        return Err(Error::Disconnected { unreachable });
    }

    let mut parent = vec![None; total];
    let mut children = vec![Vec::new(); total];
    for v in 0..total {
        if v == sink {
            continue;
        }
        // Lowest-id out-neighbor one layer closer to the sink.
        let p = net
            .out_neighbors(v)
            .iter()
            .copied()
            .find(|&w| dist[w] + 1 == dist[v])
            .expect("BFS dist admits a parent");
        parent[v] = Some(p);
        children[p].push(v);
    }

    let max_dist = dist.iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); max_dist];
    for v in 0..total {
        if v != sink {
            layers[dist[v] - 1].push(v);
        }
    }

    let mut descendants = vec![Vec::new(); total];
    let layering = BfsLayering { sink, parent, dist, layers, children, descendants: Vec::new() };
    for v in layering.post_order() {
        let mut set: Vec<NodeId> = Vec::new();
        for &c in &layering.children[v] {
            set.extend_from_slice(&descendants[c]);
            set.push(c);
        }
        set.sort_unstable();
        descendants[v] = set;
    }
    Ok(BfsLayering { descendants, ..layering })
}

/// One group of the tessellation: member ids may be dummies.
#[derive(Clone, Debug)]
pub struct Group {
    pub cell: usize,
    /// Virtual member ids; ids beyond the physical range are dummies.
    pub members: Vec<usize>,
}

/// Square tessellation of the unit square into B x B cells plus the
/// grouping of nodes (with dummy replication in sparse cells) used by the
/// geometric scheme.
#[derive(Clone, Debug)]
pub struct CellPartition {
    b: usize,
    cell_of: Vec<usize>,
    dense_cells: Vec<usize>,
    sparse_cells: Vec<usize>,
    heads: BTreeMap<usize, NodeId>,
    groups: Vec<Group>,
    dummy_to_phys: BTreeMap<usize, NodeId>,
    rho_log_n: f64,
}

impl CellPartition {
    /// Grid dimension B.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn cell_count(&self) -> usize {
        self.b * self.b
    }

    pub fn cell_of(&self, v: NodeId) -> usize {
        self.cell_of[v]
    }

    /// Dense cells: non-sink population strictly above rho ln N.
    pub fn dense_cells(&self) -> &[usize] {
        &self.dense_cells
    }

    pub fn sparse_cells(&self) -> &[usize] {
        &self.sparse_cells
    }

    /// Head (minimum distance to sink, ties to lowest id) per nonempty cell.
    pub fn head(&self, cell: usize) -> Option<NodeId> {
        self.heads.get(&cell).copied()
    }

    pub fn heads(&self) -> impl Iterator<Item = (usize, NodeId)> + '_ {
        self.heads.iter().map(|(&c, &h)| (c, h))
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Physical node behind a (possibly dummy) member id.
    pub fn physical(&self, member: usize) -> NodeId {
        self.dummy_to_phys.get(&member).copied().unwrap_or(member)
    }

    pub fn is_dummy(&self, member: usize) -> bool {
        self.dummy_to_phys.contains_key(&member)
    }

    /// The group-sizing threshold rho * ln N.
    pub fn rho_log_n(&self) -> f64 {
        self.rho_log_n
    }
}

/// Tessellates a geometric network and forms the encoding groups.
///
/// Cell side is `1/B` with `B = ceil(sqrt(2)/r)`, so any two nodes in one
/// cell are within `r`. Points exactly on a cell line go to the lower
/// cell index. Dense cells (> rho ln N non-sink members) are packed
/// greedily into groups of `ceil(rho ln N)` with a short remainder merged
/// into the previous group; each nonempty sparse cell replicates every
/// member `ceil(rho ln N / |cell|)` times into one all-dummy group.
pub fn tessellate(net: &Network, r: f64, rho: f64) -> Result<CellPartition> {
    let coords = net
        .coords()
        .ok_or_else(|| Error::Input("tessellation needs node coordinates".into()))?;
    if rho <= 0.0 {
        return Err(Error::Input(format!("group density must be positive, got {rho}")));
    }
    if r <= 0.0 {
        return Err(Error::Input(format!("radius must be positive, got {r}")));
    }
    for &(x, y) in coords {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::Input(
                "tessellation requires coordinates in the unit square".into(),
            ));
        }
    }
    let layering = bfs_layering(net)?;

    let b = (2.0f64.sqrt() / r).ceil() as usize;
    let cell_axis = |t: f64| -> usize {
        // ceil(t*B) - 1 sends boundary points to the lower cell.
        let idx = (t * b as f64).ceil() as isize - 1;
        idx.clamp(0, b as isize - 1) as usize
    };
    let cell_of: Vec<usize> =
        coords.iter().map(|&(x, y)| cell_axis(y) * b + cell_axis(x)).collect();

    let n = net.n();
    let rho_log_n = rho * (n as f64).ln();

    let mut cell_members: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for v in net.non_sink_nodes() {
        cell_members.entry(cell_of[v]).or_default().push(v);
    }
    let mut heads: BTreeMap<usize, NodeId> = BTreeMap::new();
    for v in 0..net.total_nodes() {
        let cell = cell_of[v];
        let best = heads.entry(cell).or_insert(v);
        if layering.dist(v) < layering.dist(*best)
            || (layering.dist(v) == layering.dist(*best) && v < *best)
        {
            *best = v;
        }
    }

    let mut dense_cells = Vec::new();
    let mut sparse_cells = Vec::new();
    for cell in 0..b * b {
        let count = cell_members.get(&cell).map_or(0, Vec::len);
        if count as f64 > rho_log_n {
            dense_cells.push(cell);
        } else {
            sparse_cells.push(cell);
        }
    }

    let chunk = (rho_log_n.ceil() as usize).max(1);
    let mut groups = Vec::new();
    let mut dummy_to_phys = BTreeMap::new();
    let mut next_dummy = net.total_nodes();
    for (&cell, members) in &cell_members {
        if (members.len() as f64) > rho_log_n {
            // Dense: chunks of ceil(rho ln N); a remainder below rho ln N
            // merges into the previous group.
            let mut sizes = Vec::new();
            let mut left = members.len();
            while left >= chunk {
                sizes.push(chunk);
                left -= chunk;
            }
            if left > 0 {
                if (left as f64) < rho_log_n && !sizes.is_empty() {
                    *sizes.last_mut().unwrap() += left;
                } else {
                    sizes.push(left);
                }
            }
            let mut at = 0;
            for size in sizes {
                groups.push(Group { cell, members: members[at..at + size].to_vec() });
                at += size;
            }
        } else {
            // Sparse nonempty: replicate each node into dummies, one group.
            let reps = ((rho_log_n / members.len() as f64).ceil() as usize).max(1);
            let mut group_members = Vec::with_capacity(members.len() * reps);
            for &v in members {
                for _ in 0..reps {
                    dummy_to_phys.insert(next_dummy, v);
                    group_members.push(next_dummy);
                    next_dummy += 1;
                }
            }
            groups.push(Group { cell, members: group_members });
        }
    }

    Ok(CellPartition {
        b,
        cell_of,
        dense_cells,
        sparse_cells,
        heads,
        groups,
        dummy_to_phys,
        rho_log_n,
    })
}

/// Backbone network over cell heads. Heads are adjacent iff some physical
/// edge joins their cells; each backbone edge carries its realizing
/// physical path of at most three hops.
#[derive(Clone, Debug)]
pub struct Backbone {
    /// Heads in ascending id order; index in this list = backbone node id.
    heads: Vec<NodeId>,
    /// Backbone graph over head indices; sink is the sink-cell head.
    graph: Network,
    /// Physical hop sequence (inclusive endpoints) per directed head pair.
    paths: BTreeMap<(NodeId, NodeId), Vec<NodeId>>,
}

impl Backbone {
    pub fn heads(&self) -> &[NodeId] {
        &self.heads
    }

    /// Backbone topology; node i of this graph is `heads()[i]`.
    pub fn graph(&self) -> &Network {
        &self.graph
    }

    /// Physical path realizing the backbone edge from `from` to `to`
    /// (head node ids, inclusive endpoints).
    pub fn path(&self, from: NodeId, to: NodeId) -> &[NodeId] {
        &self.paths[&(from, to)]
    }
}

/// Builds the backbone over the heads of a tessellated geometric network.
pub fn backbone(net: &Network, partition: &CellPartition, layering: &BfsLayering) -> Result<Backbone> {
    let heads: Vec<NodeId> = partition.heads().map(|(_, h)| h).collect();
    let mut head_of_cell: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &h) in heads.iter().enumerate() {
        head_of_cell.insert(partition.cell_of(h), i);
    }
    let sink_head_idx = *head_of_cell
        .get(&partition.cell_of(net.sink()))
        .expect("sink cell always has a head");

    // First physical edge (in sorted order) between each ordered cell pair.
    let mut cross: BTreeMap<(usize, usize), (NodeId, NodeId)> = BTreeMap::new();
    for u in 0..net.total_nodes() {
        for &w in net.out_neighbors(u) {
            let (cu, cw) = (partition.cell_of(u), partition.cell_of(w));
            if cu != cw {
                cross.entry((cu, cw)).or_insert((u, w));
            }
        }
    }

    let mut edges = Vec::new();
    let mut paths = BTreeMap::new();
    for (&(cu, cw), &(u, w)) in &cross {
        let (hi, hj) = (head_of_cell[&cu], head_of_cell[&cw]);
        edges.push((hi, hj));
        let (head_u, head_w) = (heads[hi], heads[hj]);
        let mut path = vec![head_u];
        if u != head_u {
            debug_assert!(net.has_edge(head_u, u), "intra-cell hop missing");
            path.push(u);
        }
        path.push(w);
        if w != head_w {
            debug_assert!(net.has_edge(w, head_w), "intra-cell hop missing");
            path.push(head_w);
        }
        paths.insert((head_u, head_w), path);
    }

    let mut graph = Network::from_edges(
        heads.len(),
        sink_head_idx,
        edges,
        None,
        None,
        format!("backbone(b={})", partition.b()),
    );
    // Heads inherit reachability from the underlying graph; a disconnected
    // backbone over a connected geometric net breaks the construction.
    if layering.max_dist() > 0 && !graph.is_connected() {
        let bad = graph.validate_connectivity().unwrap_err();
        if let Error::Disconnected { unreachable } = bad {
            return Err(Error::Disconnected {
                unreachable: unreachable.into_iter().map(|i| heads[i]).collect(),
            });
        }
    }
    graph.label = format!("backbone(b={},heads={})", partition.b(), heads.len());
    Ok(Backbone { heads, graph, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::TrialRng;
    use rand::Rng;

    fn setup_rng(seed: u64) -> StreamRng {
        TrialRng::new(seed).stream(0, 1000)
    }

    #[test]
    fn complete_graph_shape() {
        let net = gen_complete(3);
        assert_eq!(net.total_nodes(), 4);
        assert_eq!(net.non_sink_edge_count(), 6);
        assert!(net.is_connected());
        let lay = bfs_layering(&net).unwrap();
        assert_eq!(lay.avg_distance(), 1.0);

        let single = gen_complete(1);
        assert!(single.has_edge(1, 0) && single.has_edge(0, 1));
        assert!(gen_complete(50).is_connected());
    }

    #[test]
    fn grid_distances() {
        let net = gen_grid(2, 1.0).unwrap();
        let lay = bfs_layering(&net).unwrap();
        let mut dists: Vec<usize> = net.non_sink_nodes().map(|v| lay.dist(v)).collect();
        dists.sort_unstable();
        assert_eq!(dists, vec![1, 1, 2]);
        assert!((lay.avg_distance() - 4.0 / 3.0).abs() < 1e-12);

        let lay3 = bfs_layering(&gen_grid(3, 1.0).unwrap()).unwrap();
        assert_eq!(lay3.max_dist(), 4);

        // r = 2 covers the whole 2x2 square: complete, avg distance 1.
        let lay_r2 = bfs_layering(&gen_grid(2, 2.0).unwrap()).unwrap();
        assert_eq!(lay_r2.avg_distance(), 1.0);
    }

    #[test]
    fn grid_rejects_bad_params() {
        assert!(gen_grid(1, 1.0).is_err());
        assert!(gen_grid(3, 0.5).is_err());
    }

    #[test]
    fn geometric_edges_exact_threshold() {
        let net = gen_geometric(&[(0.1, 0.1), (0.1, 0.3)], 0.3).unwrap();
        assert!(net.has_edge(0, 1) && net.has_edge(1, 0));
        assert!(gen_geometric(&[(0.1, 0.1), (0.1, 0.41)], 0.3).is_err()); // disconnected
        let err = gen_geometric(&[(0.0, 0.0), (0.5, 0.5), (0.51, 0.5)], 0.1).unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }));
    }

    #[test]
    fn geometric_chain_average_distance() {
        // Collinear chain, spacing 0.09, r = 0.1: a path; sink at one end
        // gives avg distance (N+1)/2.
        let n = 7;
        let coords: Vec<(f64, f64)> = (0..=n).map(|i| (0.05 + 0.09 * i as f64, 0.5)).collect();
        let net = gen_geometric(&coords, 0.1).unwrap();
        let lay = bfs_layering(&net).unwrap();
        assert!((lay.avg_distance() - (n as f64 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_geometric_deterministic_and_usually_connected() {
        let n = 200;
        let r = (2.0 * (n as f64).ln() / n as f64).sqrt();
        let mut connected = 0;
        for seed in 0..100u64 {
            let (net, ok) = gen_random_geometric(n, r, &mut setup_rng(seed)).unwrap();
            let (net2, _) = gen_random_geometric(n, r, &mut setup_rng(seed)).unwrap();
            assert_eq!(net.edge_count(), net2.edge_count());
            if ok {
                connected += 1;
            }
            assert_eq!(ok, net.is_connected());
        }
        assert!(connected > 50, "only {connected}/100 connected");
    }

    #[test]
    fn random_geometric_rejects_radius() {
        assert!(gen_random_geometric(10, 1.5, &mut setup_rng(0)).is_err());
    }

    #[test]
    fn extended_er_structure() {
        // p = 1: full digraph over non-sink nodes, self-loops included.
        let n = 20;
        let c = n as f64 / (n as f64).ln();
        let net = gen_extended_er(n, c, &mut setup_rng(1)).unwrap();
        assert_eq!(net.non_sink_edge_count(), n * n);
        for v in 1..=n {
            assert!(net.has_edge(v, 0), "missing sink link from {v}");
        }
        assert!(gen_extended_er(10, 100.0, &mut setup_rng(2)).is_err());
    }

    #[test]
    fn extended_er_edge_count_binomial() {
        let n = 100;
        let c = 2.0;
        let p = c * (n as f64).ln() / n as f64;
        let trials = 200;
        let mut sum = 0u64;
        let mut sumsq = 0f64;
        for seed in 0..trials {
            let net = gen_extended_er(n, c, &mut setup_rng(100 + seed)).unwrap();
            let e = net.non_sink_edge_count() as u64;
            sum += e;
            sumsq += (e as f64) * (e as f64);
        }
        let m = n as f64 * n as f64;
        let mean = sum as f64 / trials as f64;
        let expect_mean = m * p;
        let var_of_mean = m * p * (1.0 - p) / trials as f64;
        assert!(
            (mean - expect_mean).abs() < 3.0 * var_of_mean.sqrt(),
            "mean {mean} vs {expect_mean}"
        );
        let var = sumsq / trials as f64 - mean * mean;
        let expect_var = m * p * (1.0 - p);
        assert!(var > expect_var * 0.5 && var < expect_var * 2.0, "var {var} vs {expect_var}");
    }

    #[test]
    fn star_shapes() {
        let light = gen_star(2, 1, 0, StarKind::Light);
        let lay = bfs_layering(&light).unwrap();
        assert_eq!(light.n(), 2);
        assert_eq!(lay.avg_distance(), 1.0);

        let heavy = gen_star(2, 2, 4, StarKind::Heavy);
        // Each clique of 4 holds 6 bidirectional pairs.
        let base = 1 + 2 * 2;
        let mut pairs = 0;
        for a in base..base + 4 {
            for b in a + 1..base + 4 {
                assert!(heavy.has_edge(a, b) && heavy.has_edge(b, a));
                pairs += 1;
            }
        }
        assert_eq!(pairs, 6);

        let lay3 = bfs_layering(&gen_star(3, 5, 0, StarKind::Light)).unwrap();
        assert!((lay3.avg_distance() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bfs_matches_petgraph_oracle() {
        use petgraph::algo::dijkstra;
        use petgraph::graph::DiGraph;
        let mut rng = setup_rng(7);
        for case in 0..60 {
            let net = match case % 3 {
                0 => gen_complete(1 + (rng.random::<u32>() % 8) as usize),
                1 => gen_grid(2 + (rng.random::<u32>() % 3) as usize, 1.5).unwrap(),
                _ => loop {
                    let n = 3 + (rng.random::<u32>() % 10) as usize;
                    if let Ok(net) = gen_extended_er(n, 3.0, &mut rng) {
                        if net.is_connected() {
                            break net;
                        }
                    }
                },
            };
            let lay = bfs_layering(&net).unwrap();
            // Oracle over the reversed graph: distance sink -> v equals
            // distance v -> sink in the original.
            let mut g = DiGraph::<(), ()>::new();
            let idx: Vec<_> = (0..net.total_nodes()).map(|_| g.add_node(())).collect();
            for u in 0..net.total_nodes() {
                for &v in net.out_neighbors(u) {
                    g.add_edge(idx[v], idx[u], ());
                }
            }
            let d = dijkstra(&g, idx[net.sink()], None, |_| 1usize);
            for v in 0..net.total_nodes() {
                assert_eq!(lay.dist(v), d[&idx[v]], "dist mismatch at node {v}");
            }
            // Parent edges exist and head toward the sink.
            for v in net.non_sink_nodes() {
                let p = lay.parent(v).unwrap();
                assert!(net.has_edge(v, p));
                assert_eq!(lay.dist(p) + 1, lay.dist(v));
            }
            // Layers partition the non-sink nodes.
            let total: usize = lay.layers().iter().map(Vec::len).sum();
            assert_eq!(total, net.n());
        }
    }

    #[test]
    fn bfs_path_descendants() {
        // Path 0 <- 1 <- 2 <- 3 <- 4 (sink 0).
        let edges = vec![(1, 0), (0, 1), (2, 1), (1, 2), (3, 2), (2, 3), (4, 3), (3, 4)];
        let net = Network::from_edges(5, 0, edges, None, None, "path");
        let lay = bfs_layering(&net).unwrap();
        assert_eq!((1..=4).map(|v| lay.dist(v)).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(lay.descendants(1), &[2, 3, 4]);
        assert_eq!(lay.descendants(4), &[] as &[usize]);
        assert!((lay.avg_distance() - 2.5).abs() < 1e-12);

        let lay2 = bfs_layering(&gen_grid(2, 1.0).unwrap()).unwrap();
        let sizes: Vec<usize> = lay2.layers().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 1]);
    }

    #[test]
    fn tessellation_cells_and_groups() {
        // B = ceil(sqrt(2)/0.3) = 5.
        let coords = vec![(0.05, 0.05), (0.06, 0.05), (0.07, 0.05)];
        let net = gen_geometric(&coords, 0.3).unwrap();
        let part = tessellate(&net, 0.3, 1.0).unwrap();
        assert_eq!(part.b(), 5);
        assert_eq!(part.cell_count(), 25);

        // Sparse cell of one node with rho ln N ~ 6.9: 7 dummies.
        let mut coords: Vec<(f64, f64)> = Vec::new();
        let mut rng = setup_rng(3);
        for _ in 0..1000 {
            coords.push((rng.random::<f64>() * 0.09, rng.random::<f64>() * 0.09));
        }
        coords.push((0.25, 0.05));
        let net = gen_geometric(&coords, 0.3).unwrap();
        let n = net.n() as f64;
        let part = tessellate(&net, 0.3, 1.0).unwrap();
        let l = part.rho_log_n();
        assert!((l - n.ln()).abs() < 1e-12);
        let lone_cell = part.cell_of(1000);
        let sparse_group = part
            .groups()
            .iter()
            .find(|g| g.cell == lone_cell)
            .expect("lone node grouped");
        assert_eq!(sparse_group.members.len(), 7);
        assert!(sparse_group.members.iter().all(|&m| part.physical(m) == 1000));
        assert!(part.sparse_cells().contains(&lone_cell));

        // Every group size within the documented guarantee, and group
        // membership partitions the (dummy-expanded) population.
        let chunk = l.ceil() as usize;
        for g in part.groups() {
            assert!(g.members.len() as f64 >= l, "undersized group {}", g.members.len());
            assert!(
                g.members.len() <= (2.0 * l).floor() as usize + 1
                    && g.members.len() <= 2 * chunk - 1 + chunk, // merge bound
                "oversized group {}",
                g.members.len()
            );
        }
        // Each physical node appears in exactly one cell's groups, and
        // every (dummy) member maps to a physical node of the same cell.
        let mut seen: BTreeMap<NodeId, usize> = BTreeMap::new();
        for g in part.groups() {
            for &m in &g.members {
                assert_eq!(part.cell_of(part.physical(m)), g.cell, "dummy escaped its cell");
                *seen.entry(part.physical(m)).or_default() += 1;
            }
        }
        assert_eq!(seen.len(), net.n());

        // Same-cell nodes are mutually within r.
        let coords = net.coords().unwrap();
        for u in net.non_sink_nodes() {
            for v in net.non_sink_nodes() {
                if part.cell_of(u) == part.cell_of(v) {
                    assert!(dist(coords[u], coords[v]) <= 0.3 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn tessellation_exact_group_arithmetic() {
        // 12 nodes in one cell, rho ln N = 4 exactly: three groups of 4.
        let mut coords = vec![(0.01, 0.01)];
        for i in 0..12 {
            coords.push((0.02 + 0.001 * i as f64, 0.01));
        }
        let net = gen_geometric(&coords, 0.5).unwrap();
        let rho = 4.0 / (12.0f64).ln();
        let part = tessellate(&net, 0.5, rho).unwrap();
        let sizes: Vec<usize> = part.groups().iter().map(|g| g.members.len()).collect();
        assert_eq!(sizes, vec![4, 4, 4]);
        let l = part.rho_log_n();
        for &s in &sizes {
            assert!(s as f64 >= l && s as f64 <= 2.0 * l);
        }
    }

    #[test]
    fn backbone_paths_and_connectivity() {
        // Two clusters joined by a single cross edge.
        let coords = vec![
            (0.05, 0.05),
            (0.10, 0.05),
            (0.15, 0.05),
            (0.32, 0.05), // second cell, reachable from (0.15, 0.05) with r = 0.2
            (0.36, 0.05),
        ];
        let net = gen_geometric(&coords, 0.2).unwrap();
        let lay = bfs_layering(&net).unwrap();
        let part = tessellate(&net, 0.2, 0.5).unwrap();
        let bb = backbone(&net, &part, &lay).unwrap();
        assert!(bb.graph().is_connected());
        for (i, &hi) in bb.heads().iter().enumerate() {
            for &j in bb.graph().out_neighbors(i) {
                let hj = bb.heads()[j];
                let path = bb.path(hi, hj);
                assert!(path.len() >= 2 && path.len() <= 4, "path {path:?}");
                assert_eq!(*path.first().unwrap(), hi);
                assert_eq!(*path.last().unwrap(), hj);
                for hop in path.windows(2) {
                    assert!(net.has_edge(hop[0], hop[1]), "missing hop {hop:?}");
                }
            }
        }
        // A single-cell net collapses to one head (the sink's cell head).
        let tight = gen_geometric(&[(0.05, 0.05), (0.06, 0.05)], 0.9).unwrap();
        let lay_t = bfs_layering(&tight).unwrap();
        let part_t = tessellate(&tight, 0.9, 0.5).unwrap();
        let bb_t = backbone(&tight, &part_t, &lay_t).unwrap();
        assert_eq!(bb_t.heads().len(), 1);
    }

    #[test]
    fn backbone_reaches_all_heads_on_random_nets() {
        let mut ok = 0;
        for seed in 0..30u64 {
            let (net, connected) = gen_random_geometric(80, 0.28, &mut setup_rng(400 + seed)).unwrap();
            if !connected {
                continue;
            }
            let lay = bfs_layering(&net).unwrap();
            let part = tessellate(&net, 0.28, 1.0).unwrap();
            let bb = backbone(&net, &part, &lay).unwrap();
            assert!(bb.graph().is_connected());
            ok += 1;
        }
        assert!(ok > 10);
    }

    #[test]
    fn edge_list_round_trip() {
        let (net, _) = gen_random_geometric(25, 0.4, &mut setup_rng(9)).unwrap();
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        let parsed = Network::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(parsed.total_nodes(), net.total_nodes());
        assert_eq!(parsed.sink(), net.sink());
        assert_eq!(parsed.edge_count(), net.edge_count());
        for u in 0..net.total_nodes() {
            assert_eq!(parsed.out_neighbors(u), net.out_neighbors(u));
        }
        let pc = parsed.coords().unwrap();
        let nc = net.coords().unwrap();
        for (a, b) in pc.iter().zip(nc) {
            assert_eq!(a, b, "coordinates survive the round trip bit-exactly");
        }
        assert!(parsed.validate_connectivity().is_ok() == net.is_connected());
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(Network::read_edge_list("N x SINK 0".as_bytes()).is_err());
        assert!(Network::read_edge_list("N 2 SINK 5\n".as_bytes()).is_err());
        assert!(Network::read_edge_list("N 2 SINK 0\nE 0 9\n".as_bytes()).is_err());
        assert!(Network::read_edge_list("N 2 SINK 0\nWHAT 1 2\n".as_bytes()).is_err());
    }
}
