//! Node bookkeeping and pre-simulation design-rule checks.
//!
//! Analysis refuses to start on an ill-posed deck, so before anything is
//! stamped we check that ground exists, every node has a path to ground,
//! voltage sources and inductors form no DC loop, and no current source
//! drives an open circuit. Violations are data, not errors: callers decide
//! what to do with them.

use std::collections::HashMap;
use std::fmt;

use crate::netlist::{name_key, same_name, Element, Netlist, GROUND};

/// Bijection between non-ground node names and dense unknown indices
/// `0..N-1`, in order of first appearance in the deck.
#[derive(Debug, Clone, Default)]
pub struct NodeMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeMap {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Unknown index for a node name; `None` for ground or unknown names.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(&name_key(name)).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        same_name(name, GROUND) || self.index.contains_key(&name_key(name))
    }

    /// Node names in index order (as first written in the deck).
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Map every node that appears on any element terminal, excluding ground.
pub fn build_node_map(netlist: &Netlist) -> NodeMap {
    let mut map = NodeMap::default();
    for e in &netlist.elements {
        for node in e.nodes() {
            if same_name(node, GROUND) {
                continue;
            }
            let key = name_key(node);
            if !map.index.contains_key(&key) {
                map.index.insert(key, map.names.len());
                map.names.push(node.to_string());
            }
        }
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrcKind {
    NoGround,
    FloatingIsland,
    VsourceLoop,
    IsourceCutset,
}

impl fmt::Display for DrcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DrcKind::NoGround => "NO_GROUND",
            DrcKind::FloatingIsland => "FLOATING_ISLAND",
            DrcKind::VsourceLoop => "VSOURCE_LOOP",
            DrcKind::IsourceCutset => "ISOURCE_CUTSET",
        };
        write!(f, "{s}")
    }
}

/// One design-rule violation with its witness nodes and/or elements.
#[derive(Debug, Clone, PartialEq)]
pub struct DrcViolation {
    pub kind: DrcKind,
    pub nodes: Vec<String>,
    pub elements: Vec<String>,
}

impl fmt::Display for DrcViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DRC {}: ", self.kind)?;
        let witness: Vec<&str> = self
            .elements
            .iter()
            .chain(self.nodes.iter())
            .map(String::as_str)
            .collect();
        if witness.is_empty() {
            write!(f, "(empty deck)")
        } else {
            write!(f, "{}", witness.join(","))
        }
    }
}

/// Which edge roles an element plays in the three check graphs.
///
/// Capacitors hold a node for connectivity (the island check) but are open
/// at DC, so they do not give a current source a return path; current
/// sources are never edges at all. MOSFETs connect drain to source only —
/// the gate is an open circuit.
fn edges(e: &Element) -> Option<(&str, &str, EdgeRole)> {
    match e {
        Element::Resistor { n1, n2, .. } => Some((n1, n2, EdgeRole::Conductive)),
        Element::Capacitor { n1, n2, .. } => Some((n1, n2, EdgeRole::ConnectivityOnly)),
        Element::Inductor { n1, n2, .. } => Some((n1, n2, EdgeRole::Short)),
        Element::VSource { np, nn, .. } => Some((np, nn, EdgeRole::Short)),
        Element::Diode { np, nn, .. } => Some((np, nn, EdgeRole::Conductive)),
        Element::Mosfet { nd, ns, .. } => Some((nd, ns, EdgeRole::Conductive)),
        Element::ISource { .. } => None,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum EdgeRole {
    /// Carries DC current (R, D, MOSFET channel).
    Conductive,
    /// DC short (V source, inductor) — also conductive.
    Short,
    /// Holds the node topologically but passes no DC current (capacitor).
    ConnectivityOnly,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Run all design-rule checks. An empty list means the deck is well-posed.
/// Identical decks produce identical violation lists in identical order.
pub fn check_drc(netlist: &Netlist) -> Vec<DrcViolation> {
    let map = build_node_map(netlist);
    let mut violations = Vec::new();

    // graph node ids: 0 = ground, i+1 = map index i
    let id_of = |name: &str| -> usize {
        if same_name(name, GROUND) {
            0
        } else {
            map.index_of(name).expect("mapped node") + 1
        }
    };
    let n_ids = map.len() + 1;

    let has_ground = netlist
        .elements
        .iter()
        .any(|e| e.nodes().iter().any(|n| same_name(n, GROUND)));
    if !has_ground {
        violations.push(DrcViolation {
            kind: DrcKind::NoGround,
            nodes: map.names().first().cloned().into_iter().collect(),
            elements: Vec::new(),
        });
    }

    // (b) island check: connectivity over R/C/L/V/D/M(d-s) edges from ground
    {
        let mut uf = UnionFind::new(n_ids);
        for e in &netlist.elements {
            if let Some((a, b, _)) = edges(e) {
                uf.union(id_of(a), id_of(b));
            }
        }
        let ground_root = uf.find(0);
        let mut islands: Vec<Vec<String>> = Vec::new();
        let mut root_to_island: HashMap<usize, usize> = HashMap::new();
        for (i, name) in map.names().iter().enumerate() {
            let root = uf.find(i + 1);
            if root == ground_root && has_ground {
                continue;
            }
            let slot = *root_to_island.entry(root).or_insert_with(|| {
                islands.push(Vec::new());
                islands.len() - 1
            });
            islands[slot].push(name.clone());
        }
        for island in islands {
            violations.push(DrcViolation {
                kind: DrcKind::FloatingIsland,
                nodes: island,
                elements: Vec::new(),
            });
        }
    }

    // (c) loops in the subgraph of DC shorts (V sources and inductors)
    {
        let mut uf = UnionFind::new(n_ids);
        // adjacency over accepted short edges, for witness paths
        let mut adjacency: Vec<Vec<(usize, String)>> = vec![Vec::new(); n_ids];
        for e in &netlist.elements {
            let Some((a, b, EdgeRole::Short)) = edges(e) else {
                continue;
            };
            let (ia, ib) = (id_of(a), id_of(b));
            if ia == ib {
                // both terminals on one node: degenerate loop
                violations.push(DrcViolation {
                    kind: DrcKind::VsourceLoop,
                    nodes: vec![a.to_string()],
                    elements: vec![e.name().to_string()],
                });
                continue;
            }
            if uf.union(ia, ib) {
                adjacency[ia].push((ib, e.name().to_string()));
                adjacency[ib].push((ia, e.name().to_string()));
            } else {
                // closing edge: witness is the path already joining its ends
                let mut path = short_path(&adjacency, ia, ib);
                path.push(e.name().to_string());
                violations.push(DrcViolation {
                    kind: DrcKind::VsourceLoop,
                    nodes: Vec::new(),
                    elements: path,
                });
            }
        }
    }

    // (d) current sources whose terminals have no DC return path
    {
        let mut uf = UnionFind::new(n_ids);
        for e in &netlist.elements {
            if let Some((a, b, role)) = edges(e) {
                if role != EdgeRole::ConnectivityOnly {
                    uf.union(id_of(a), id_of(b));
                }
            }
        }
        for e in &netlist.elements {
            if let Element::ISource { name, np, nn, .. } = e {
                if uf.find(id_of(np)) != uf.find(id_of(nn)) {
                    violations.push(DrcViolation {
                        kind: DrcKind::IsourceCutset,
                        nodes: vec![np.clone(), nn.clone()],
                        elements: vec![name.clone()],
                    });
                }
            }
        }
    }

    violations
}

/// BFS through the accepted short edges; returns the element names along the
/// path from `from` to `to`.
fn short_path(adjacency: &[Vec<(usize, String)>], from: usize, to: usize) -> Vec<String> {
    let mut prev: Vec<Option<(usize, &String)>> = vec![None; adjacency.len()];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(from);
    let mut seen = vec![false; adjacency.len()];
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for (v, elem) in &adjacency[u] {
            if !seen[*v] {
                seen[*v] = true;
                prev[*v] = Some((u, elem));
                queue.push_back(*v);
            }
        }
    }
    let mut path = Vec::new();
    let mut cursor = to;
    while let Some((u, elem)) = prev[cursor] {
        path.push(elem.clone());
        cursor = u;
    }
    path.reverse();
    path
}
