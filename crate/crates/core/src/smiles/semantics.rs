use std::collections::HashMap;

use super::ast::{class_max_valence, Bond, Element};
use super::{check_smiles, schema};
use crate::attr::{CheckReport, Schema, Value};
use crate::decoder::{LinkRequest, MaskCtx, Semantics};
use crate::grammar::{DerivationTree, Grammar, NodeId, SymbolId};

/// Valence assumed for atoms whose element is not chosen yet.
const ANY_MAX: u8 = 6;
/// Productions added by closing one more ring at an atom of the plan.
const RING_COST: usize = 3;
/// Productions of a one-atom branch.
const BRANCH_COST: usize = 6;
/// Productions of one more atom in a chain.
const EXTEND_COST: usize = 4;

struct Syms {
    smiles: SymbolId,
    chain: SymbolId,
    ba: SymbolId,
    atom: SymbolId,
    symbol: SymbolId,
    aliphatic: SymbolId,
    aromatic: SymbolId,
    bah: SymbolId,
    hcount: SymbolId,
    digit: SymbolId,
    bond: SymbolId,
    ringbond: SymbolId,
    ringbonds: SymbolId,
    branches: SymbolId,
    branch: SymbolId,
    bracket: SymbolId,
}

#[derive(Debug, Clone, Copy)]
struct Ring {
    opener: usize,
    bond: Option<Bond>,
}

impl Ring {
    fn min_order(self) -> u8 {
        self.bond.map_or(1, Bond::order)
    }
}

#[derive(Debug, Clone, Copy)]
struct AtomState {
    max: u8,
    /// Bond orders and hydrogens already attached.
    used: u8,
    /// Orders promised to bonds that are certain to come.
    reserved: u8,
    /// Digits used here, bit `d - 1` for digit `d`.
    digits: u8,
    /// Ring-bond slots created so far, and how many are covered by `reserved`.
    slots: u8,
    covered: u8,
}

impl AtomState {
    fn spare(&self) -> i32 {
        self.max as i32 - self.used as i32 - self.reserved as i32
    }
}

/// Generation state: atoms with their valence accounting, ring digits
/// currently open, and the drawn `sa` of every branched atom.
#[derive(Debug, Clone, Default)]
pub struct SmilesEnv {
    atoms: Vec<AtomState>,
    atom_of: HashMap<NodeId, usize>,
    sa: HashMap<NodeId, u8>,
    open: [Option<Ring>; 8],
}

impl SmilesEnv {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Open ring digits, bit `d - 1` for digit `d`.
    pub fn open_mask(&self) -> u8 {
        open_mask(&self.open)
    }
}

fn open_mask(open: &[Option<Ring>; 8]) -> u8 {
    open.iter()
        .enumerate()
        .fold(0, |m, (d, r)| if r.is_some() { m | 1 << d } else { m })
}

/// Work still to come, as seen by the canonical completion.
#[derive(Debug, Clone, Copy)]
enum Item {
    Steps(usize),
    /// One fresh atom with room for `cap` ring orders.
    Host {
        cap: u8,
        base: usize,
    },
    /// An unexpanded chain; it can grow to host more rings.
    Chain {
        inn: u8,
        succ: bool,
        base: usize,
    },
}

/// The atom whose ring bonds are being generated.
#[derive(Debug, Clone, Copy, Default)]
struct Current {
    /// Digits it still has to place, closing or opening.
    sa_rem: u8,
    /// Pending ring-bond items, and whether a `<ringbonds>` is unexpanded.
    items: u8,
    more: bool,
    digits: u8,
    spare: i32,
    /// Whether it can still take more branches.
    site: bool,
    created: u8,
    covered: u8,
}

#[derive(Debug, Default)]
struct Future {
    base: usize,
    rings: Vec<u8>,
    bins: Vec<u8>,
    chains: Vec<(usize, u8, bool)>,
    site: bool,
}

impl Future {
    fn add(&mut self, item: Item) {
        match item {
            Item::Steps(n) => self.base += n,
            Item::Host { cap, base } => {
                self.base += base;
                self.bins.push(cap);
            }
            Item::Chain { inn, succ, base } => {
                self.base += base;
                self.chains.push((self.bins.len(), inn, succ));
                self.bins.push(ANY_MAX - inn - succ as u8);
            }
        }
    }

    /// Productions of the canonical completion: every open ring is closed
    /// once at a fresh atom, growing a chain or adding branches when the
    /// planned atoms lack room. `None` if no completion exists.
    fn cost(mut self) -> Option<usize> {
        if self.rings.is_empty() {
            return Some(self.base);
        }
        self.rings.sort_unstable_by(|a, b| b.cmp(a));
        let k = self.rings.len();
        let fixed = self.base + RING_COST * k;
        if pack(&self.rings, self.bins.clone()) {
            return Some(fixed);
        }
        let mut chains = self.chains.clone();
        chains.sort_by_key(|c| (c.1, c.2));
        chains.dedup_by_key(|c| (c.1, c.2));
        for e in 1..=k {
            for &(i, inn, succ) in &chains {
                let mut bins = self.bins.clone();
                bins[i] = ANY_MAX - inn - 1;
                bins.extend(std::iter::repeat_n(ANY_MAX - 2, e - 1));
                bins.push(ANY_MAX - 1 - succ as u8);
                if pack(&self.rings, bins) {
                    return Some(fixed + EXTEND_COST * e);
                }
            }
            let grow = |mut bins: Vec<u8>| {
                bins.extend(std::iter::repeat_n(ANY_MAX - 2, e - 1));
                bins.push(ANY_MAX - 1);
                bins
            };
            let branched = fixed + BRANCH_COST + EXTEND_COST * (e - 1);
            if self.site && pack(&self.rings, grow(self.bins.clone())) {
                return Some(branched);
            }
            let mut tried = 0u32;
            for i in 0..self.bins.len() {
                let c = self.bins[i];
                if c == 0 || tried >> c & 1 == 1 {
                    continue;
                }
                tried |= 1 << c;
                let mut bins = self.bins.clone();
                bins[i] -= 1;
                if pack(&self.rings, grow(bins)) {
                    return Some(branched);
                }
            }
        }
        None
    }
}

/// Whether rings (sorted descending) fit into bins by capacity.
fn pack(rings: &[u8], mut bins: Vec<u8>) -> bool {
    let need: u32 = rings.iter().map(|&r| r as u32).sum();
    let have: u32 = bins.iter().map(|&b| b as u32).sum();
    if need > have {
        return false;
    }
    bins.sort_unstable_by(|a, b| b.cmp(a));
    bins.truncate(rings.len());
    fn go(rings: &[u8], bins: &mut [u8]) -> bool {
        let Some((&r, rest)) = rings.split_first() else {
            return true;
        };
        let mut tried = 0u32;
        for j in 0..bins.len() {
            let c = bins[j];
            if c < r || tried >> c & 1 == 1 {
                continue;
            }
            tried |= 1 << c;
            bins[j] -= r;
            if go(rest, bins) {
                return true;
            }
            bins[j] += r;
        }
        false
    }
    go(rings, &mut bins)
}

struct Link {
    has_anchor: bool,
    /// Branched atom holding the previous atom, once known.
    anchor: Option<NodeId>,
    bond: Option<NodeId>,
}

/// Decoder hooks for SMILES. Every branched atom first draws `sa`, the set
/// of ring digits it will carry: open ones it closes, the rest it opens. Masks keep a valence budget per atom
/// and only allow choices after which a canonical completion, closing each
/// open ring at one fresh atom, is still possible within the step budget.
pub struct SmilesSemantics {
    grammar: Grammar,
    schema: Schema,
    s: Syms,
    chain_bond: usize,
    branch_bond: usize,
}

impl SmilesSemantics {
    pub fn new(grammar: Grammar) -> Self {
        let schema = schema(&grammar);
        let nt = |n: &str| grammar.nonterminal(n).expect("SMILES nonterminal");
        let s = Syms {
            smiles: nt("smiles"),
            chain: nt("chain"),
            ba: nt("branched atom"),
            atom: nt("atom"),
            symbol: nt("symbol"),
            aliphatic: nt("aliphatic organic"),
            aromatic: nt("aromatic organic"),
            bah: nt("bracket atom (h count)"),
            hcount: nt("h count"),
            digit: nt("digit"),
            bond: nt("bond"),
            ringbond: nt("ringbond"),
            ringbonds: nt("ringbonds"),
            branches: nt("branches"),
            branch: nt("branch"),
            bracket: nt("bracket atom"),
        };
        let f = |p: &str| grammar.find(p).expect("SMILES production");
        SmilesSemantics {
            chain_bond: f("<chain> -> <chain> <bond> <branched atom>"),
            branch_bond: f("<branch> -> '(' <bond> <chain> ')'"),
            s,
            schema,
            grammar,
        }
    }

    pub fn builtin() -> Self {
        Self::new(crate::GrammarId::Smiles.load_builtin())
    }

    fn owner(&self, tree: &DerivationTree, node: NodeId) -> Option<NodeId> {
        let mut n = node;
        loop {
            if tree.symbol(n) == self.s.ba {
                return Some(n);
            }
            n = tree.parent(n)?;
        }
    }

    fn has(&self, p: usize, sym: SymbolId) -> bool {
        self.grammar.production(p).rhs.contains(&sym)
    }

    /// (ring bonds, branches) of an expanded branched atom.
    fn shape(&self, tree: &DerivationTree, ba: NodeId) -> (bool, bool) {
        let p = tree.production(ba).expect("expanded branched atom");
        (self.has(p, self.s.ringbonds), self.has(p, self.s.branches))
    }

    fn link(&self, tree: &DerivationTree, node: NodeId) -> Link {
        let none = Link {
            has_anchor: false,
            anchor: None,
            bond: None,
        };
        let Some(p) = tree.parent(node) else {
            return none;
        };
        if tree.symbol(node) == self.s.ba {
            if tree.node(node).slot == 0 {
                return self.link(tree, p);
            }
            let inner = tree.child(p, 0);
            return Link {
                has_anchor: true,
                anchor: tree.children(inner).last().copied(),
                bond: (tree.production(p) == Some(self.chain_bond)).then(|| tree.child(p, 1)),
            };
        }
        let ps = tree.symbol(p);
        if ps == self.s.chain {
            self.link(tree, p)
        } else if ps == self.s.branch {
            Link {
                has_anchor: true,
                anchor: self.owner(tree, p),
                bond: (tree.production(p) == Some(self.branch_bond)).then(|| tree.child(p, 1)),
            }
        } else {
            none
        }
    }

    fn bond_of(&self, tree: &DerivationTree, bond: NodeId) -> Option<Bond> {
        tree.production(bond)
            .map(|p| Bond::ALL[self.grammar.alternative_index(p)])
    }

    /// Order of the bond entering the first atom of `node` (a chain or a
    /// branched atom); an undecided bond counts as single.
    fn in_order(&self, tree: &DerivationTree, node: NodeId, over: Option<(NodeId, Bond)>) -> u8 {
        let l = self.link(tree, node);
        if !l.has_anchor {
            return 0;
        }
        match l.bond {
            None => 1,
            Some(b) => match over {
                Some((n, bond)) if n == b => bond.order(),
                _ => self.bond_of(tree, b).map_or(1, Bond::order),
            },
        }
    }

    fn succ(&self, tree: &DerivationTree, node: NodeId) -> bool {
        let chain = if tree.symbol(node) == self.s.ba {
            tree.parent(node).expect("branched atom in a chain")
        } else {
            node
        };
        tree.node(chain).slot == 0
            && tree
                .parent(chain)
                .is_some_and(|p| tree.symbol(p) == self.s.chain)
    }

    fn min_order(open: &[Option<Ring>; 8], digit: usize) -> u8 {
        open[digit].map_or(1, Ring::min_order)
    }

    /// Valence a branched atom needs before any hydrogen.
    fn requirement(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        ba: NodeId,
        sa: u8,
        rings: bool,
        branches: bool,
    ) -> u8 {
        let ring_need: u8 = if rings {
            (0..8)
                .filter(|d| sa >> d & 1 == 1)
                .map(|d| Self::min_order(&env.open, d))
                .sum()
        } else {
            0
        };
        self.in_order(tree, ba, None) + self.succ(tree, ba) as u8 + ring_need + branches as u8
    }

    fn current(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
        pending: &[NodeId],
    ) -> (Current, Option<NodeId>) {
        let Some(ba) = self.owner(tree, node) else {
            return (Current::default(), None);
        };
        let (rings, branches) = self.shape(tree, ba);
        let sa = env.sa.get(&ba).copied().unwrap_or(0);
        let mut c = Current {
            items: pending
                .iter()
                .filter(|&&n| tree.symbol(n) == self.s.ringbond)
                .count() as u8,
            more: pending.iter().any(|&n| tree.symbol(n) == self.s.ringbonds),
            site: pending.iter().any(|&n| tree.symbol(n) == self.s.branches),
            ..Current::default()
        };
        match env.atom_of.get(&ba) {
            Some(&a) => {
                let at = &env.atoms[a];
                c.spare = at.spare();
                c.sa_rem = sa & !at.digits;
                c.digits = at.digits;
                c.created = at.slots;
                c.covered = at.covered;
            }
            None => {
                c.spare =
                    ANY_MAX as i32 - self.requirement(env, tree, ba, sa, rings, branches) as i32;
                c.sa_rem = sa;
                c.covered = if rings { sa.count_ones() as u8 } else { 0 };
            }
        }
        (c, Some(ba))
    }

    fn future(
        &self,
        tree: &DerivationTree,
        open: &[Option<Ring>; 8],
        pending: &[NodeId],
        x: &Current,
        extras: &[Item],
        over: Option<(NodeId, Bond)>,
    ) -> Option<Future> {
        let mut f = Future::default();
        let r = x.sa_rem.count_ones() as u8;
        let unexpanded = if x.more {
            r.saturating_sub(x.items).max(1)
        } else {
            0
        };
        if x.items + unexpanded != r {
            return None;
        }
        let spare = x.spare - (x.created + unexpanded).saturating_sub(x.covered) as i32;
        if spare < 0 {
            return None;
        }
        f.base += 2 * x.items as usize + RING_COST * unexpanded as usize;
        // Rings left open after this atom: open ones it does not close and
        // the ones it still opens.
        for (d, ring) in open.iter().enumerate() {
            match ring {
                Some(ring) if x.sa_rem >> d & 1 == 0 => f.rings.push(ring.min_order()),
                None if x.sa_rem >> d & 1 == 1 => f.rings.push(1),
                _ => {}
            }
        }
        f.site = x.site && spare >= 1;
        for &n in pending {
            let sym = tree.symbol(n);
            if sym == self.s.ringbond || sym == self.s.ringbonds {
                continue;
            }
            if tree
                .parent(n)
                .is_some_and(|p| tree.symbol(p) == self.s.ringbond)
            {
                continue;
            }
            let item = if sym == self.s.chain {
                Item::Chain {
                    inn: self.in_order(tree, n, over),
                    succ: self.succ(tree, n),
                    base: 4,
                }
            } else if sym == self.s.ba {
                Item::Host {
                    cap: ANY_MAX - self.in_order(tree, n, over) - self.succ(tree, n) as u8,
                    base: 3,
                }
            } else if sym == self.s.branches {
                Item::Chain {
                    inn: 1,
                    succ: false,
                    base: 6,
                }
            } else if sym == self.s.branch {
                Item::Chain {
                    inn: 1,
                    succ: false,
                    base: 5,
                }
            } else {
                Item::Steps(self.min_steps(sym, spare))
            };
            f.add(item);
        }
        for &e in extras {
            f.add(e);
        }
        Some(f)
    }

    /// Fewest productions for `sym`; without room for a hydrogen the
    /// hydrogen-count part must take the charge route.
    fn min_steps(&self, sym: SymbolId, spare: i32) -> usize {
        let n = self.grammar.min_steps(sym);
        if sym == self.s.bah && spare < 1 {
            n + 1
        } else {
            n
        }
    }

    fn fits(f: Option<Future>, own: usize, ctx: &MaskCtx) -> bool {
        f.and_then(Future::cost).is_some_and(|c| ctx.fits(own + c))
    }

    /// Cost of expanding branched atom `ba` with the given shape if it carries `sa`.
    #[allow(clippy::too_many_arguments)]
    fn ba_cost(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        ba: NodeId,
        sa: u8,
        rings: bool,
        branches: bool,
        pending: &[NodeId],
    ) -> Option<usize> {
        if (sa != 0) != rings {
            return None;
        }
        let need = self.requirement(env, tree, ba, sa, rings, branches);
        if need > ANY_MAX {
            return None;
        }
        let x = Current {
            sa_rem: sa,
            more: rings,
            spare: (ANY_MAX - need) as i32,
            site: branches,
            covered: sa.count_ones() as u8,
            ..Current::default()
        };
        let mut extras = vec![Item::Steps(self.grammar.min_steps(self.s.atom))];
        if branches {
            extras.push(Item::Chain {
                inn: 1,
                succ: false,
                base: 6,
            });
        }
        self.future(tree, &env.open, pending, &x, &extras, None)?
            .cost()
            .map(|c| 1 + c)
    }

    fn ba_shapes(&self, ba: NodeId, tree: &DerivationTree) -> Vec<(bool, bool)> {
        self.grammar
            .alternatives(tree.symbol(ba))
            .iter()
            .map(|&p| (self.has(p, self.s.ringbonds), self.has(p, self.s.branches)))
            .collect()
    }

    /// Whether filling the current ring-bond slot with `digit` (0-based) and
    /// `bond` leaves a completion within `own` plus the budget.
    #[allow(clippy::too_many_arguments)]
    fn fill_fits(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        x: &Current,
        ba: NodeId,
        pending: &[NodeId],
        digit: usize,
        bond: Option<Bond>,
        own: usize,
        ctx: &MaskCtx,
    ) -> bool {
        let Some(&a) = env.atom_of.get(&ba) else {
            return false;
        };
        let bit = 1u8 << digit;
        if x.sa_rem & bit == 0 {
            return false;
        }
        let mut open = env.open;
        let mut y = *x;
        y.sa_rem &= !bit;
        match open[digit] {
            Some(ring) => {
                if let (Some(o), Some(k)) = (ring.bond, bond) {
                    if o != k {
                        return false;
                    }
                }
                let order = ring.bond.or(bond).map_or(1, Bond::order);
                y.spare -= (order - ring.min_order()) as i32;
                if ring.bond.is_none() {
                    if let Some(k) = bond {
                        if env.atoms[ring.opener].spare() < (k.order() - 1) as i32 {
                            return false;
                        }
                    }
                }
                open[digit] = None;
            }
            None => {
                y.spare -= (bond.map_or(1, Bond::order) - 1) as i32;
                open[digit] = Some(Ring { opener: a, bond });
            }
        }
        y.digits |= bit;
        Self::fits(self.future(tree, &open, pending, &y, &[], None), own, ctx)
    }

    fn any_fill(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
        bond: Option<Bond>,
        own: usize,
        ctx: &MaskCtx,
    ) -> bool {
        let (x, ba) = self.current(env, tree, node, ctx.pending);
        let ba = ba.expect("ring bond inside a branched atom");
        (0..8).any(|d| self.fill_fits(env, tree, &x, ba, ctx.pending, d, bond, own, ctx))
    }

    fn atom_index(&self, env: &SmilesEnv, ba: Option<NodeId>) -> Option<usize> {
        ba.and_then(|b| env.atom_of.get(&b).copied())
    }

    fn create_atom(
        &self,
        env: &mut SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
        element: Element,
    ) {
        let ba = self.owner(tree, node).expect("atom inside a branched atom");
        let (rings, branches) = self.shape(tree, ba);
        let sa = env.sa.get(&ba).copied().unwrap_or(0);
        let need = self.requirement(env, tree, ba, sa, rings, branches);
        let inn = self.in_order(tree, ba, None);
        let link = self.link(tree, ba);
        if link.has_anchor && link.bond.is_none() {
            let prev = self
                .atom_index(env, link.anchor)
                .expect("previous atom exists");
            env.atoms[prev].used += 1;
            env.atoms[prev].reserved -= 1;
        }
        env.atom_of.insert(ba, env.atoms.len());
        env.atoms.push(AtomState {
            max: element.max_valence(),
            used: inn,
            reserved: need - inn,
            digits: 0,
            slots: 0,
            covered: if rings { sa.count_ones() as u8 } else { 0 },
        });
    }

    /// Ring digits carried by branched atom `ba`.
    fn carried(&self, tree: &DerivationTree, ba: NodeId) -> u8 {
        let mut out = 0u8;
        let mut stack = vec![ba];
        while let Some(n) = stack.pop() {
            let sym = tree.symbol(n);
            if sym == self.s.digit
                && tree
                    .parent(n)
                    .is_some_and(|p| tree.symbol(p) == self.s.ringbond)
            {
                if let Some(p) = tree.production(n) {
                    out |= 1 << self.grammar.alternative_index(p);
                }
            } else if sym == self.s.ba && n != ba || sym == self.s.branches {
                continue;
            } else {
                stack.extend(tree.children(n).iter().copied());
            }
        }
        out
    }
}

impl Semantics for SmilesSemantics {
    type Env = SmilesEnv;

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn start(&self) -> SmilesEnv {
        SmilesEnv::default()
    }

    fn lazy_attr(&self, tree: &DerivationTree, node: NodeId) -> Option<&'static str> {
        (tree.symbol(node) == self.s.ba).then_some("sa")
    }

    fn lazy_bit_options(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
        bit: usize,
        decided: u64,
        ctx: &MaskCtx,
    ) -> [bool; 2] {
        // Opening more rings never helps, so completions of the remaining
        // bits only need to range over closing later open digits.
        let open = env.open_mask();
        let b = 1u8 << bit;
        let decided = decided as u8;
        let later = open & !((b << 1).wrapping_sub(1));
        let shapes = self.ba_shapes(node, tree);
        let ok = |z: u8| {
            shapes.iter().any(|&(r, br)| {
                self.ba_cost(env, tree, node, z, r, br, ctx.pending)
                    .is_some_and(|c| ctx.fits(c))
            })
        };
        let mut out = [false; 2];
        for (v, slot) in out.iter_mut().enumerate() {
            let base = decided | if v == 1 { b } else { 0 };
            let mut s = 0u8;
            loop {
                if ok(base | s) {
                    *slot = true;
                    break;
                }
                s = s.wrapping_sub(later) & later;
                if s == 0 {
                    break;
                }
            }
        }
        out
    }

    fn record_lazy(&self, env: &mut SmilesEnv, _tree: &DerivationTree, node: NodeId, value: u64) {
        env.sa.insert(node, value as u8);
    }

    fn rule_options(
        &self,
        env: &SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
        ctx: &MaskCtx,
    ) -> Vec<bool> {
        let s = &self.s;
        let sym = tree.symbol(node);
        let g = &self.grammar;
        let alts = g.alternatives(sym);
        let min_rhs = |p: usize, spare: i32| -> usize {
            g.production(p)
                .rhs
                .iter()
                .map(|&r| self.min_steps(r, spare))
                .sum()
        };

        if sym == s.ba {
            let sa = env.sa.get(&node).copied().unwrap_or(0);
            return self
                .ba_shapes(node, tree)
                .into_iter()
                .map(|(r, br)| {
                    self.ba_cost(env, tree, node, sa, r, br, ctx.pending)
                        .is_some_and(|c| ctx.fits(c))
                })
                .collect();
        }
        if sym == s.smiles {
            let f = self.future(
                tree,
                &env.open,
                ctx.pending,
                &Current::default(),
                &[Item::Chain {
                    inn: 0,
                    succ: false,
                    base: 4,
                }],
                None,
            );
            return vec![Self::fits(f, 1, ctx)];
        }
        if sym == s.chain {
            let inn = self.in_order(tree, node, None);
            let succ = self.succ(tree, node);
            let (x, _) = self.current(env, tree, node, ctx.pending);
            let head = Item::Chain {
                inn,
                succ: true,
                base: 4,
            };
            let last = Item::Host {
                cap: ANY_MAX - 1 - succ as u8,
                base: 3,
            };
            return alts
                .iter()
                .map(|&p| {
                    let extras: Vec<Item> = match g.production(p).rhs.len() {
                        1 => vec![Item::Host {
                            cap: ANY_MAX - inn - succ as u8,
                            base: 3,
                        }],
                        2 => vec![head, last],
                        _ => vec![head, Item::Steps(1), last],
                    };
                    Self::fits(
                        self.future(tree, &env.open, ctx.pending, &x, &extras, None),
                        1,
                        ctx,
                    )
                })
                .collect();
        }
        if sym == s.branches {
            let (x, _) = self.current(env, tree, node, ctx.pending);
            let branch = Item::Chain {
                inn: 1,
                succ: false,
                base: 5,
            };
            return alts
                .iter()
                .map(|&p| {
                    let rec = g.production(p).rhs.len() == 2;
                    let mut y = x;
                    let mut extras = vec![branch];
                    if rec {
                        y.spare -= 1;
                        y.site = true;
                        extras.push(Item::Chain {
                            inn: 1,
                            succ: false,
                            base: 6,
                        });
                    }
                    y.spare >= 0
                        && Self::fits(
                            self.future(tree, &env.open, ctx.pending, &y, &extras, None),
                            1,
                            ctx,
                        )
                })
                .collect();
        }
        if sym == s.branch {
            let (x, _) = self.current(env, tree, node, ctx.pending);
            return alts
                .iter()
                .map(|&p| {
                    let chain = Item::Chain {
                        inn: 1,
                        succ: false,
                        base: 4,
                    };
                    let extras = if self.has(p, s.bond) {
                        vec![Item::Steps(1), chain]
                    } else {
                        vec![chain]
                    };
                    Self::fits(
                        self.future(tree, &env.open, ctx.pending, &x, &extras, None),
                        1,
                        ctx,
                    )
                })
                .collect();
        }
        if sym == s.ringbonds {
            let (x, _) = self.current(env, tree, node, ctx.pending);
            return alts
                .iter()
                .map(|&p| {
                    let mut y = x;
                    y.items += 1;
                    y.created += 1;
                    y.more = g.production(p).rhs.len() == 2;
                    Self::fits(
                        self.future(tree, &env.open, ctx.pending, &y, &[], None),
                        1,
                        ctx,
                    )
                })
                .collect();
        }
        if sym == s.ringbond {
            return alts
                .iter()
                .map(|&p| {
                    if g.production(p).rhs.len() == 1 {
                        self.any_fill(env, tree, node, None, 2, ctx)
                    } else {
                        Bond::ALL
                            .iter()
                            .any(|&b| self.any_fill(env, tree, node, Some(b), 3, ctx))
                    }
                })
                .collect();
        }
        let parent_sym = tree.parent(node).map(|p| tree.symbol(p));
        if sym == s.bond {
            if parent_sym == Some(s.ringbond) {
                return Bond::ALL
                    .iter()
                    .map(|&b| self.any_fill(env, tree, node, Some(b), 2, ctx))
                    .collect();
            }
            // A bond between atoms: the previous atom must have room.
            let parent = tree.parent(node).expect("bond has a parent");
            let anchor = if parent_sym == Some(s.chain) {
                tree.children(tree.child(parent, 0)).last().copied()
            } else {
                self.owner(tree, parent)
            };
            let spare = self
                .atom_index(env, anchor)
                .map_or(0, |a| env.atoms[a].spare());
            let (x, _) = self.current(env, tree, node, ctx.pending);
            return Bond::ALL
                .iter()
                .map(|&b| {
                    spare >= (b.order() - 1) as i32
                        && Self::fits(
                            self.future(tree, &env.open, ctx.pending, &x, &[], Some((node, b))),
                            1,
                            ctx,
                        )
                })
                .collect();
        }
        if sym == s.digit && parent_sym == Some(s.ringbond) {
            let parent = tree.parent(node).expect("digit has a parent");
            let bond = if tree.children(parent).len() == 2 {
                self.bond_of(tree, tree.child(parent, 0))
            } else {
                None
            };
            let (x, ba) = self.current(env, tree, node, ctx.pending);
            let ba = ba.expect("ring bond inside a branched atom");
            return (0..8)
                .map(|d| self.fill_fits(env, tree, &x, ba, ctx.pending, d, bond, 1, ctx))
                .collect();
        }

        let (x, _) = self.current(env, tree, node, ctx.pending);
        // Alternatives that settle the element bound the atom's valence.
        if sym == s.atom || sym == s.symbol || sym == s.aliphatic || sym == s.aromatic {
            return alts
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let max = if sym == s.aliphatic || sym == s.aromatic {
                        Element {
                            aromatic: sym == s.aromatic,
                            index: i as u8,
                        }
                        .max_valence()
                    } else {
                        let first = g.production(p).rhs[0];
                        if first == s.aromatic {
                            class_max_valence(true)
                        } else if first == s.aliphatic || first == s.bracket {
                            class_max_valence(false)
                        } else {
                            ANY_MAX
                        }
                    };
                    let mut y = x;
                    y.spare -= (ANY_MAX - max) as i32;
                    y.spare >= 0
                        && Self::fits(
                            self.future(tree, &env.open, ctx.pending, &y, &[], None),
                            1 + min_rhs(p, y.spare),
                            ctx,
                        )
                })
                .collect();
        }
        // Explicit hydrogens use up valence.
        let hydrogens = |p: usize| -> i32 {
            if sym == s.bah || sym == s.hcount {
                (sym == s.hcount || self.has(p, s.hcount)) as i32
            } else if sym == s.digit && parent_sym == Some(s.hcount) {
                g.alternative_index(p) as i32 + 1
            } else {
                0
            }
        };
        let base = self
            .future(tree, &env.open, ctx.pending, &x, &[], None)
            .and_then(Future::cost);
        alts.iter()
            .map(|&p| {
                let h = hydrogens(p);
                if h == 0 {
                    return base.is_some_and(|c| ctx.fits(1 + min_rhs(p, x.spare) + c));
                }
                let mut y = x;
                y.spare -= h;
                y.spare >= 0
                    && Self::fits(
                        self.future(tree, &env.open, ctx.pending, &y, &[], None),
                        1 + min_rhs(p, y.spare),
                        ctx,
                    )
            })
            .collect()
    }

    fn apply_rule(
        &self,
        env: &mut SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
        alternative: usize,
    ) {
        let s = &self.s;
        let sym = tree.symbol(node);
        let parent_sym = tree.parent(node).map(|p| tree.symbol(p));
        let here = || self.atom_index(env, self.owner(tree, node));
        if sym == s.aliphatic || sym == s.aromatic {
            let e = Element {
                aromatic: sym == s.aromatic,
                index: alternative as u8,
            };
            self.create_atom(env, tree, node, e);
        } else if sym == s.bond && parent_sym != Some(s.ringbond) {
            let parent = tree.parent(node).expect("bond has a parent");
            let anchor = if parent_sym == Some(s.chain) {
                tree.children(tree.child(parent, 0)).last().copied()
            } else {
                self.owner(tree, parent)
            };
            let a = self.atom_index(env, anchor).expect("bond follows an atom");
            env.atoms[a].used += Bond::ALL[alternative].order();
            env.atoms[a].reserved -= 1;
        } else if sym == s.hcount && alternative == 0 {
            let a = here().expect("hydrogens on an atom");
            env.atoms[a].used += 1;
        } else if sym == s.digit && parent_sym == Some(s.hcount) {
            let a = here().expect("hydrogens on an atom");
            env.atoms[a].used += alternative as u8 + 1;
        } else if sym == s.ringbonds {
            let a = here().expect("ring bonds on an atom");
            let at = &mut env.atoms[a];
            at.slots += 1;
            if at.slots > at.covered {
                at.covered += 1;
                at.reserved += 1;
            }
        } else if sym == s.branches && alternative == 0 {
            let a = here().expect("branches on an atom");
            env.atoms[a].reserved += 1;
        } else if sym == s.digit && parent_sym == Some(s.ringbond) {
            let a = here().expect("ring bonds on an atom");
            let parent = tree.parent(node).expect("digit has a parent");
            let bond = if tree.children(parent).len() == 2 {
                self.bond_of(tree, tree.child(parent, 0))
            } else {
                None
            };
            let bit = 1u8 << alternative;
            env.atoms[a].digits |= bit;
            match env.open[alternative].take() {
                Some(ring) => {
                    let order = ring.bond.or(bond).map_or(1, Bond::order);
                    let at = &mut env.atoms[a];
                    at.used += order;
                    at.reserved -= ring.min_order();
                    if ring.bond.is_none() {
                        if let Some(k) = bond {
                            env.atoms[ring.opener].used += k.order() - 1;
                        }
                    }
                }
                None => {
                    let at = &mut env.atoms[a];
                    at.used += bond.map_or(1, Bond::order);
                    at.reserved -= 1;
                    env.open[alternative] = Some(Ring { opener: a, bond });
                }
            }
        }
    }

    fn finish_node(
        &self,
        env: &mut SmilesEnv,
        tree: &DerivationTree,
        node: NodeId,
    ) -> Option<LinkRequest> {
        if tree.symbol(node) != self.s.ba {
            return None;
        }
        let digits = env.atom_of.get(&node).map_or(0, |&a| env.atoms[a].digits);
        Some(LinkRequest {
            node,
            attr: "sa",
            value: Value::Bits(digits as u64),
        })
    }

    fn implied_lazy(&self, tree: &DerivationTree, node: NodeId) -> u64 {
        self.carried(tree, node) as u64
    }

    fn check(&self, tree: &DerivationTree) -> CheckReport {
        check_smiles(&self.grammar, tree)
    }
}
