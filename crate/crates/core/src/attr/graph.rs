use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use super::{AttrError, Schema, Value};
use crate::grammar::{DerivationTree, NodeId};

/// Tie-breaking policy for topological sorting. Both give valid orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalOrder {
    /// Smallest ready vertex first.
    #[default]
    Forward,
    /// Largest ready vertex first.
    Reverse,
}

/// Attribute-instance dependency graph of one tree. Edges run from a
/// dependency to the attribute computed from it.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    /// `(node, attribute slot)` per vertex.
    pub vertices: Vec<(NodeId, usize)>,
    pub edges: Vec<(usize, usize)>,
    defs: Vec<Option<(usize, Vec<usize>)>>,
    init: Vec<Option<Value>>,
}

/// Graph over tree nodes obtained by merging the attributes of each node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedGraph {
    pub nodes: Vec<NodeId>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl DependencyGraph {
    /// A bare graph, for fixtures and tests.
    pub fn from_parts(vertices: Vec<(NodeId, usize)>, edges: Vec<(usize, usize)>) -> Self {
        let n = vertices.len();
        DependencyGraph {
            vertices,
            edges,
            defs: vec![None; n],
            init: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub(crate) fn definition(&self, v: usize) -> Option<&(usize, Vec<usize>)> {
        self.defs[v].as_ref()
    }

    pub(crate) fn initial(&self, v: usize) -> Option<&Value> {
        self.init[v].as_ref()
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self, order: EvalOrder) -> Option<Vec<usize>> {
        topo(self.vertices.len(), self.edges.iter().copied(), order)
    }

    /// Merges vertices of the same tree node. Edges inside one node are
    /// dropped, except an attribute depending on itself, which stays a
    /// self-loop.
    pub fn merged(&self) -> MergedGraph {
        let mut index: HashMap<NodeId, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut id_of = |n: NodeId, nodes: &mut Vec<NodeId>| {
            *index.entry(n).or_insert_with(|| {
                nodes.push(n);
                nodes.len() - 1
            })
        };
        for &(n, _) in &self.vertices {
            id_of(n, &mut nodes);
        }
        let mut edges = BTreeSet::new();
        for &(a, b) in &self.edges {
            let na = self.vertices[a].0;
            let nb = self.vertices[b].0;
            if na != nb || a == b {
                edges.insert((id_of(na, &mut nodes), id_of(nb, &mut nodes)));
            }
        }
        MergedGraph { nodes, edges }
    }
}

impl MergedGraph {
    pub fn is_acyclic(&self) -> bool {
        topo(
            self.nodes.len(),
            self.edges.iter().copied(),
            EvalOrder::Forward,
        )
        .is_some()
    }
}

fn topo(
    n: usize,
    edges: impl Iterator<Item = (usize, usize)>,
    order: EvalOrder,
) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in edges {
        out[a].push(b);
        indeg[b] += 1;
    }
    let mut fwd: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut rev: BinaryHeap<usize> = BinaryHeap::new();
    for (v, &d) in indeg.iter().enumerate() {
        if d == 0 {
            fwd.push(Reverse(v));
            rev.push(v);
        }
    }
    let mut result = Vec::with_capacity(n);
    loop {
        let next = match order {
            EvalOrder::Forward => fwd.pop().map(|Reverse(v)| v),
            EvalOrder::Reverse => rev.pop(),
        };
        let Some(v) = next else { break };
        result.push(v);
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                fwd.push(Reverse(w));
                rev.push(w);
            }
        }
    }
    (result.len() == n).then_some(result)
}

/// Builds the instance graph of `tree` (complete or partial) under `schema`.
pub fn build_dependency_graph(
    schema: &Schema,
    tree: &DerivationTree,
) -> Result<DependencyGraph, AttrError> {
    let mut graph = DependencyGraph::default();
    let mut index: HashMap<(NodeId, usize), usize> = HashMap::new();
    for (id, node) in tree.nodes() {
        for slot in 0..schema.decls_of(node.symbol).len() {
            index.insert((id, slot), graph.vertices.len());
            graph.vertices.push((id, slot));
        }
    }
    graph.defs = vec![None; graph.vertices.len()];
    graph.init = vec![None; graph.vertices.len()];

    let root = tree.root();
    for (decl, value) in schema.root_init() {
        let sym = schema.decl(*decl).owner;
        if sym == tree.symbol(root) {
            let slot = schema
                .decls_of(sym)
                .iter()
                .position(|d| d == decl)
                .expect("declared");
            graph.init[index[&(root, slot)]] = Some(value.clone());
        }
    }

    for (id, node) in tree.nodes() {
        let Some(p) = node.production else { continue };
        let at = |pos: usize| if pos == 0 { id } else { node.children[pos - 1] };
        for &r in schema.rules_of(p) {
            let rule = &schema.rules()[r];
            let target = index[&(at(rule.target.pos), rule.target.slot)];
            if graph.defs[target].is_some() || graph.init[target].is_some() {
                let (tn, ts) = graph.vertices[target];
                let decl = schema.decls_of(tree.symbol(tn))[ts];
                let (symbol, attr) = schema.names(decl);
                return Err(AttrError::Redefined {
                    symbol,
                    attr,
                    node: tn.0,
                });
            }
            let deps: Vec<usize> = rule
                .deps
                .iter()
                .map(|d| index[&(at(d.pos), d.slot)])
                .collect();
            for &d in &deps {
                graph.edges.push((d, target));
            }
            graph.defs[target] = Some((r, deps));
        }
    }
    Ok(graph)
}

/// True iff both the attribute-instance graph and its node-merged
/// projection are acyclic.
pub fn check_noncircular(graph: &DependencyGraph) -> bool {
    graph.topological_order(EvalOrder::Forward).is_some() && graph.merged().is_acyclic()
}
