use serde::{Deserialize, Serialize};

use super::{Grammar, SymbolId};

/// Index into a [`DerivationTree`] arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub symbol: SymbolId,
    pub parent: Option<NodeId>,
    /// Position among the parent's children.
    pub slot: usize,
    pub depth: usize,
    /// Production applied at this node; `None` for terminals and open nonterminals.
    pub production: Option<usize>,
    pub children: Vec<NodeId>,
}

/// A (possibly partial) derivation tree stored as an arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTree {
    nodes: Vec<TreeNode>,
}

impl DerivationTree {
    /// A tree holding only the start symbol.
    pub fn new(grammar: &Grammar) -> Self {
        Self::with_root(grammar.start())
    }

    pub fn with_root(symbol: SymbolId) -> Self {
        DerivationTree {
            nodes: vec![TreeNode {
                symbol,
                parent: None,
                slot: 0,
                depth: 0,
                production: None,
                children: Vec::new(),
            }],
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &TreeNode)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.index()].children
    }

    pub fn child(&self, id: NodeId, slot: usize) -> NodeId {
        self.nodes[id.index()].children[slot]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn symbol(&self, id: NodeId) -> SymbolId {
        self.nodes[id.index()].symbol
    }

    pub fn production(&self, id: NodeId) -> Option<usize> {
        self.nodes[id.index()].production
    }

    /// Applies `production` at an open nonterminal and returns the new children.
    ///
    /// Panics if the node is already expanded or the production's lhs differs.
    pub fn expand(&mut self, grammar: &Grammar, id: NodeId, production: usize) -> &[NodeId] {
        let p = grammar.production(production);
        let node = &self.nodes[id.index()];
        assert!(node.production.is_none(), "node already expanded");
        assert_eq!(node.symbol, p.lhs, "production lhs does not match node");
        let depth = node.depth + 1;
        let first = self.nodes.len() as u32;
        for (slot, &symbol) in p.rhs.iter().enumerate() {
            self.nodes.push(TreeNode {
                symbol,
                parent: Some(id),
                slot,
                depth,
                production: None,
                children: Vec::new(),
            });
        }
        let kids: Vec<NodeId> = (first..self.nodes.len() as u32).map(NodeId).collect();
        let node = &mut self.nodes[id.index()];
        node.production = Some(production);
        node.children = kids;
        &node.children
    }

    /// Whether the node is a nonterminal with no production applied yet.
    pub fn is_open(&self, grammar: &Grammar, id: NodeId) -> bool {
        let n = &self.nodes[id.index()];
        n.production.is_none() && !grammar.symbol(n.symbol).is_terminal()
    }

    /// Nodes in pre-order (parents before children, left to right).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id.index()].children.iter().rev());
        }
        out
    }

    /// Open nonterminals left to right.
    pub fn frontier(&self, grammar: &Grammar) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| self.is_open(grammar, id))
            .collect()
    }

    pub fn leftmost_open(&self, grammar: &Grammar) -> Option<NodeId> {
        self.frontier(grammar).into_iter().next()
    }

    pub fn is_complete(&self, grammar: &Grammar) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, _)| !self.is_open(grammar, NodeId(i as u32)))
    }

    /// Concatenation of the terminal leaves; open nonterminals render as `<name>`.
    pub fn yield_string(&self, grammar: &Grammar) -> String {
        let mut out = String::new();
        for id in self.preorder() {
            let n = &self.nodes[id.index()];
            let sym = grammar.symbol(n.symbol);
            if sym.is_terminal() {
                out.push_str(&sym.name);
            } else if n.production.is_none() {
                out.push_str(&sym.to_string());
            }
        }
        out
    }

    /// Character offset in the yield where each node's span starts.
    pub fn offsets(&self, grammar: &Grammar) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        let mut pos = 0;
        for id in self.preorder() {
            out[id.index()] = pos;
            let n = &self.nodes[id.index()];
            let sym = grammar.symbol(n.symbol);
            if sym.is_terminal() {
                pos += sym.name.chars().count();
            }
        }
        out
    }

    /// Number of applied productions.
    pub fn rule_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.production.is_some()).count()
    }
}
