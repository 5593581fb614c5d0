use super::parse::Prods;
use super::{check_program, schema, CheckOptions, MAX_ASSIGNMENTS};
use crate::attr::{CheckReport, Schema};
use crate::decoder::{MaskCtx, Semantics};
use crate::grammar::{DerivationTree, Grammar, NodeId, SymbolId};

/// Fewest productions that complete an assignment statement.
const ASSIGN_COST: usize = 12;

/// Decoder hooks for the program grammar. The environment tracks which
/// variables are defined so far; uses are masked to that set, a return is
/// forced exactly at the end of the list, and the list stops growing at
/// [`MAX_ASSIGNMENTS`].
pub struct ProgramSemantics {
    grammar: Grammar,
    schema: Schema,
    opts: CheckOptions,
    prods: Prods,
    stat: SymbolId,
    stat_list: SymbolId,
    var_id: SymbolId,
    assign: SymbolId,
}

#[derive(Debug, Clone)]
pub struct ProgramEnv {
    /// Bit `i` is set once `v<i>` is defined; `v0` from the start.
    defined: u16,
    assigns: i64,
    pending_def: Option<u8>,
}

impl ProgramEnv {
    pub fn defined(&self) -> u16 {
        self.defined
    }
}

impl ProgramSemantics {
    pub fn new(grammar: Grammar, opts: CheckOptions) -> Self {
        let schema = schema(&grammar, opts);
        let prods = Prods::new(&grammar);
        let nt = |n: &str| grammar.nonterminal(n).expect("program nonterminal");
        ProgramSemantics {
            stat: nt("stat"),
            stat_list: nt("stat list"),
            var_id: nt("var id"),
            assign: nt("assign"),
            schema,
            opts,
            prods,
            grammar,
        }
    }

    pub fn builtin() -> Self {
        Self::new(
            crate::GrammarId::Program.load_builtin(),
            CheckOptions::default(),
        )
    }

    pub fn options(&self) -> CheckOptions {
        self.opts
    }

    // A stat is an assignment iff its list continues after it.
    fn is_assign_stat(&self, tree: &DerivationTree, stat: NodeId) -> bool {
        let list = tree.parent(stat).expect("stat under a list");
        tree.production(list) == Some(self.prods.list_rec)
    }

    // A var id defines a variable iff it sits under the lhs of an assignment.
    fn is_definition(&self, tree: &DerivationTree, var_id: NodeId) -> bool {
        let lhs = tree.parent(var_id).and_then(|v| tree.parent(v));
        let owner = lhs.and_then(|l| tree.parent(l));
        owner.is_some_and(|o| tree.symbol(o) == self.assign)
    }

    fn cost(&self, tree: &DerivationTree, node: NodeId) -> usize {
        let sym = tree.symbol(node);
        if sym == self.stat && self.is_assign_stat(tree, node) {
            ASSIGN_COST
        } else {
            self.grammar.min_steps(sym)
        }
    }
}

impl Semantics for ProgramSemantics {
    type Env = ProgramEnv;

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn start(&self) -> ProgramEnv {
        ProgramEnv {
            defined: 1,
            assigns: 0,
            pending_def: None,
        }
    }

    fn rule_options(
        &self,
        env: &ProgramEnv,
        tree: &DerivationTree,
        node: NodeId,
        ctx: &MaskCtx,
    ) -> Vec<bool> {
        let rest: usize = ctx.pending.iter().map(|&n| self.cost(tree, n)).sum();
        let sym = tree.symbol(node);
        let return_cost = self.grammar.min_steps(self.stat);
        if sym == self.stat_list {
            // <stat> ';' <stat list>  |  <stat>
            let more =
                env.assigns < MAX_ASSIGNMENTS && ctx.fits(1 + ASSIGN_COST + 1 + return_cost + rest);
            return vec![more, ctx.fits(1 + return_cost + rest)];
        }
        if sym == self.stat {
            // <assign> | <return>
            let assign = self.is_assign_stat(tree, node);
            let need = if assign { ASSIGN_COST } else { return_cost };
            let fits = ctx.fits(need + rest);
            return vec![assign && fits, !assign && fits];
        }
        if sym == self.var_id {
            let fits = ctx.fits(1 + rest);
            let define = self.is_definition(tree, node);
            return (0..10)
                .map(|v| {
                    let seen = env.defined >> v & 1 == 1;
                    fits && if define {
                        !(self.opts.single_assignment && seen)
                    } else {
                        seen
                    }
                })
                .collect();
        }
        let alts = self.grammar.alternatives(sym);
        alts.iter()
            .map(|&p| {
                let need: usize = 1 + self
                    .grammar
                    .production(p)
                    .rhs
                    .iter()
                    .map(|&s| self.grammar.min_steps(s))
                    .sum::<usize>();
                ctx.fits(need + rest)
            })
            .collect()
    }

    fn apply_rule(
        &self,
        env: &mut ProgramEnv,
        tree: &DerivationTree,
        node: NodeId,
        alternative: usize,
    ) {
        let sym = tree.symbol(node);
        if sym == self.stat_list && alternative == 0 {
            env.assigns += 1;
        } else if sym == self.var_id && self.is_definition(tree, node) {
            env.pending_def = Some(alternative as u8);
        }
    }

    fn finish_node(
        &self,
        env: &mut ProgramEnv,
        tree: &DerivationTree,
        node: NodeId,
    ) -> Option<crate::decoder::LinkRequest> {
        if tree.symbol(node) == self.assign {
            if let Some(v) = env.pending_def.take() {
                env.defined |= 1 << v;
            }
        }
        None
    }

    fn check(&self, tree: &DerivationTree) -> CheckReport {
        check_program(&self.grammar, &self.schema, tree)
    }
}
