//! Finite rectangular lattices in Z² with von Neumann neighbourhoods and a
//! clamped external boundary, plus the generic digraph notions (distance,
//! eccentricity, centre, boundary) used to pick observation nodes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Cell of Z², ordered lexically by (row, col). Boundary cells sit outside
/// the free region, so coordinates may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId {
    pub row: i32,
    pub col: i32,
}

impl NodeId {
    pub fn new(row: i32, col: i32) -> Self {
        NodeId { row, col }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// One of the four strict neighbours of a free node: either another free
/// node (by index into `free_nodes`) or a clamped boundary cell (by index
/// into `boundary_nodes`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbour {
    Free(usize),
    Boundary(usize),
}

/// Weighted digraph; an arc `j -> i` carries the influence weight of `j`
/// on `i`. Absent arcs are exactly the zero weights.
#[derive(Debug, Clone, Default)]
pub struct Digraph {
    vertices: BTreeSet<NodeId>,
    out: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
}

impl Digraph {
    pub fn new() -> Self {
        Digraph::default()
    }

    pub fn add_vertex(&mut self, v: NodeId) {
        self.vertices.insert(v);
    }

    /// Inserts the arc `from -> to`. Zero weights are rejected so that
    /// "arc present" and "nonzero weight" stay synonymous.
    pub fn add_arc(&mut self, from: NodeId, to: NodeId, weight: f64) -> Result<()> {
        if weight == 0.0 {
            return Err(Error::ZeroWeightArc { from, to });
        }
        self.vertices.insert(from);
        self.vertices.insert(to);
        self.out.entry(from).or_default().insert(to, weight);
        Ok(())
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn weight(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.out.get(&from).and_then(|m| m.get(&to)).copied()
    }

    pub fn out_neighbours(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.out
            .get(&v)
            .into_iter()
            .flat_map(|m| m.iter().map(|(n, w)| (*n, *w)))
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.out
            .values()
            .filter(|targets| targets.contains_key(&v))
            .count()
    }

    /// Directed BFS distances from `u`; unreachable vertices are omitted.
    pub fn distances_from(&self, u: NodeId) -> BTreeMap<NodeId, u32> {
        let mut dist = BTreeMap::new();
        dist.insert(u, 0);
        let mut queue = VecDeque::from([u]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            for (w, _) in self.out_neighbours(v) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Maximal finite directed distance from a vertex; `Infinite` when the
/// vertex reaches no other vertex, so it can never be central.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Eccentricity {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Eccentricity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eccentricity::Finite(d) => write!(f, "{d}"),
            Eccentricity::Infinite => write!(f, "inf"),
        }
    }
}

/// Maximal distance from `u` to the vertices it reaches.
pub fn eccentricity(g: &Digraph, u: NodeId) -> Result<Eccentricity> {
    if !g.contains(u) {
        return Err(Error::VertexNotFound(u));
    }
    let reached = g.distances_from(u);
    match reached.iter().filter(|(v, _)| **v != u).map(|(_, d)| *d).max() {
        Some(d) => Ok(Eccentricity::Finite(d)),
        None => Ok(Eccentricity::Infinite),
    }
}

/// Vertices of minimal finite eccentricity, in lexical order. Empty when
/// every eccentricity is infinite (no vertex reaches any other).
pub fn centre(g: &Digraph) -> Vec<NodeId> {
    let mut best = Eccentricity::Infinite;
    let mut members = Vec::new();
    for v in g.vertices() {
        let e = eccentricity(g, v).expect("vertex enumerated from the digraph");
        if e == Eccentricity::Infinite {
            continue;
        }
        if e < best {
            best = e;
            members.clear();
        }
        if e == best {
            members.push(v);
        }
    }
    members
}

/// Sources of the digraph: vertices with in-degree 0.
pub fn graph_boundary(g: &Digraph) -> Vec<NodeId> {
    let mut with_incoming = BTreeSet::new();
    for (_, targets) in g.out.iter() {
        for t in targets.keys() {
            with_incoming.insert(*t);
        }
    }
    g.vertices().filter(|v| !with_incoming.contains(v)).collect()
}

/// A `width x height` rectangle of free nodes together with the clamped
/// cells of its external boundary and per-node neighbour wiring.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    width: u32,
    height: u32,
    free_nodes: Vec<NodeId>,
    neighbours: Vec<[Neighbour; 4]>,
    boundary_nodes: Vec<NodeId>,
    centre: Vec<NodeId>,
}

/// The four strict-neighbour offsets in lexical order (N, W, E, S).
const OFFSETS: [(i32, i32); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

/// Builds the lattice for a `width x height` region anchored at (0,0).
pub fn build_lattice(width: u32, height: u32) -> Result<NetworkTopology> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let (w, h) = (width as i32, height as i32);
    let inside = |n: NodeId| n.row >= 0 && n.row < h && n.col >= 0 && n.col < w;

    let mut free_nodes = Vec::with_capacity((width * height) as usize);
    for row in 0..h {
        for col in 0..w {
            free_nodes.push(NodeId::new(row, col));
        }
    }

    let mut boundary_set = BTreeSet::new();
    for &n in &free_nodes {
        for (dr, dc) in OFFSETS {
            let nb = NodeId::new(n.row + dr, n.col + dc);
            if !inside(nb) {
                boundary_set.insert(nb);
            }
        }
    }
    let boundary_nodes: Vec<NodeId> = boundary_set.into_iter().collect();
    let boundary_index: BTreeMap<NodeId, usize> = boundary_nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i))
        .collect();

    let mut neighbours = Vec::with_capacity(free_nodes.len());
    for &n in &free_nodes {
        let mut slots = [Neighbour::Free(0); 4];
        for (s, (dr, dc)) in OFFSETS.into_iter().enumerate() {
            let nb = NodeId::new(n.row + dr, n.col + dc);
            slots[s] = if inside(nb) {
                Neighbour::Free((nb.row * w + nb.col) as usize)
            } else {
                Neighbour::Boundary(boundary_index[&nb])
            };
        }
        neighbours.push(slots);
    }

    let mut topology = NetworkTopology {
        width,
        height,
        free_nodes,
        neighbours,
        boundary_nodes,
        centre: Vec::new(),
    };
    topology.centre = if topology.free_nodes.len() == 1 {
        // A lone vertex reaches no other, so its eccentricity is infinite;
        // the observation node of a 1x1 region is still the node itself.
        topology.free_nodes.clone()
    } else {
        centre(&topology.free_digraph())
    };
    Ok(topology)
}

impl NetworkTopology {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn free_count(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn free_nodes(&self) -> &[NodeId] {
        &self.free_nodes
    }

    pub fn boundary_nodes(&self) -> &[NodeId] {
        &self.boundary_nodes
    }

    pub fn neighbours(&self, free_index: usize) -> &[Neighbour; 4] {
        &self.neighbours[free_index]
    }

    pub fn free_index(&self, n: NodeId) -> Option<usize> {
        let (w, h) = (self.width as i32, self.height as i32);
        if n.row >= 0 && n.row < h && n.col >= 0 && n.col < w {
            Some((n.row * w + n.col) as usize)
        } else {
            None
        }
    }

    /// Centre of the symmetric free-node lattice, in lexical order.
    pub fn centre_nodes(&self) -> &[NodeId] {
        &self.centre
    }

    /// Observation node: lexically first centre member.
    pub fn central_node(&self) -> NodeId {
        self.centre[0]
    }

    pub fn central_index(&self) -> usize {
        self.free_index(self.central_node())
            .expect("centre lies in the free region")
    }

    /// Number of clamped boundary neighbours of each free node.
    pub fn boundary_degree(&self, free_index: usize) -> u8 {
        self.neighbours[free_index]
            .iter()
            .filter(|n| matches!(n, Neighbour::Boundary(_)))
            .count() as u8
    }

    /// Symmetric digraph on the free nodes only (unit arc labels).
    pub fn free_digraph(&self) -> Digraph {
        let mut g = Digraph::new();
        for &n in &self.free_nodes {
            g.add_vertex(n);
        }
        for (i, slots) in self.neighbours.iter().enumerate() {
            for nb in slots {
                if let Neighbour::Free(j) = nb {
                    g.add_arc(self.free_nodes[i], self.free_nodes[*j], 1.0)
                        .expect("unit weight");
                }
            }
        }
        g
    }

    /// Digraph of the clamped network: arcs into each free node from every
    /// neighbour (free or boundary) plus self arcs, labelled by `weights`.
    /// Boundary cells receive no incoming arcs.
    pub fn clamped_digraph(&self, weights: &LatticeWeights) -> Digraph {
        let mut g = Digraph::new();
        for &n in &self.free_nodes {
            g.add_vertex(n);
        }
        for &b in &self.boundary_nodes {
            g.add_vertex(b);
        }
        for (i, slots) in self.neighbours.iter().enumerate() {
            let target = self.free_nodes[i];
            if weights.self_weight(i) != 0.0 {
                g.add_arc(target, target, weights.self_weight(i))
                    .expect("nonzero");
            }
            for (s, nb) in slots.iter().enumerate() {
                let w = weights.couple_weight(i, s);
                if w == 0.0 {
                    continue;
                }
                let source = match nb {
                    Neighbour::Free(j) => self.free_nodes[*j],
                    Neighbour::Boundary(b) => self.boundary_nodes[*b],
                };
                g.add_arc(source, target, w).expect("nonzero");
            }
        }
        g
    }

    /// Node id of a neighbour slot.
    pub fn neighbour_node(&self, free_index: usize, slot: usize) -> NodeId {
        match self.neighbours[free_index][slot] {
            Neighbour::Free(j) => self.free_nodes[j],
            Neighbour::Boundary(b) => self.boundary_nodes[b],
        }
    }
}

/// Per-arc interaction weights of a clamped lattice: one self weight per
/// free node and one couple weight per (node, neighbour-slot) pair.
#[derive(Debug, Clone)]
pub struct LatticeWeights {
    self_weights: Vec<f64>,
    couple_weights: Vec<[f64; 4]>,
}

impl LatticeWeights {
    /// Uniform assignment: `w0` on every self arc, `w1` on every couple arc.
    pub fn isotropic(topology: &NetworkTopology, w0: f64, w1: f64) -> Self {
        LatticeWeights {
            self_weights: vec![w0; topology.free_count()],
            couple_weights: vec![[w1; 4]; topology.free_count()],
        }
    }

    pub fn self_weight(&self, free_index: usize) -> f64 {
        self.self_weights[free_index]
    }

    pub fn couple_weight(&self, free_index: usize, slot: usize) -> f64 {
        self.couple_weights[free_index][slot]
    }

    pub fn set_self_weight(&mut self, free_index: usize, w: f64) {
        self.self_weights[free_index] = w;
    }

    pub fn set_couple_weight(&mut self, free_index: usize, slot: usize, w: f64) {
        self.couple_weights[free_index][slot] = w;
    }
}

/// One failed structural check: the offending node pair and why.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub pair: (NodeId, NodeId),
    pub reason: String,
}

/// Outcome of the four structural hypotheses on a weight assignment.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub isotropic: bool,
    pub translation_invariant: bool,
    pub symmetric: bool,
    pub attractive: bool,
    pub violations: Vec<Violation>,
}

/// Checks isotropy (equal couple weights within each neighbourhood),
/// translation invariance (equal weights across nodes, slot by slot),
/// symmetry (w_{i,j} = w_{j,i} between free nodes) and attractiveness
/// (negative self weights, positive couple weights).
pub fn validate_structure(weights: &LatticeWeights, topology: &NetworkTopology) -> StructureReport {
    let mut violations = Vec::new();
    let mut isotropic = true;
    let mut translation_invariant = true;
    let mut symmetric = true;
    let mut attractive = true;

    for i in 0..topology.free_count() {
        let node = topology.free_nodes()[i];
        let reference = weights.couple_weight(i, 0);
        for s in 1..4 {
            if weights.couple_weight(i, s) != reference {
                isotropic = false;
                violations.push(Violation {
                    pair: (node, topology.neighbour_node(i, s)),
                    reason: format!(
                        "isotropy: weight {} differs from {} within the neighbourhood",
                        weights.couple_weight(i, s),
                        reference
                    ),
                });
            }
        }

        if weights.self_weight(i) != weights.self_weight(0) {
            translation_invariant = false;
            violations.push(Violation {
                pair: (node, node),
                reason: format!(
                    "translation invariance: self weight {} differs from {}",
                    weights.self_weight(i),
                    weights.self_weight(0)
                ),
            });
        }
        for s in 0..4 {
            if weights.couple_weight(i, s) != weights.couple_weight(0, s) {
                translation_invariant = false;
                violations.push(Violation {
                    pair: (node, topology.neighbour_node(i, s)),
                    reason: format!(
                        "translation invariance: slot {} weight {} differs from {}",
                        s,
                        weights.couple_weight(i, s),
                        weights.couple_weight(0, s)
                    ),
                });
            }
        }

        for (s, nb) in topology.neighbours(i).iter().enumerate() {
            if let Neighbour::Free(j) = nb {
                let back_slot = topology
                    .neighbours(*j)
                    .iter()
                    .position(|n| matches!(n, Neighbour::Free(k) if *k == i))
                    .expect("free adjacency is mutual");
                let forward = weights.couple_weight(i, s);
                let backward = weights.couple_weight(*j, back_slot);
                if *j > i && forward != backward {
                    symmetric = false;
                    violations.push(Violation {
                        pair: (node, topology.free_nodes()[*j]),
                        reason: format!("symmetry: {forward} forward vs {backward} backward"),
                    });
                }
            }
        }

        if weights.self_weight(i) >= 0.0 {
            attractive = false;
            violations.push(Violation {
                pair: (node, node),
                reason: format!(
                    "attractiveness: self weight {} must be negative",
                    weights.self_weight(i)
                ),
            });
        }
        for s in 0..4 {
            if weights.couple_weight(i, s) <= 0.0 {
                attractive = false;
                violations.push(Violation {
                    pair: (node, topology.neighbour_node(i, s)),
                    reason: format!(
                        "attractiveness: couple weight {} must be positive",
                        weights.couple_weight(i, s)
                    ),
                });
            }
        }
    }

    StructureReport {
        isotropic,
        translation_invariant,
        symmetric,
        attractive,
        violations,
    }
}
