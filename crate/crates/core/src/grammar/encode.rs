use thiserror::Error;

use super::{DerivationTree, Grammar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("tree is incomplete")]
    Incomplete,
    #[error("step {step}: production {production} does not expand the leftmost open <{expected}>")]
    Mismatch {
        step: usize,
        production: usize,
        expected: String,
    },
    #[error("step {step}: production index {production} out of range")]
    OutOfRange { step: usize, production: usize },
    #[error("sequence ended before the tree was complete")]
    Truncated,
    #[error("sequence has {extra} productions after the tree was complete")]
    Trailing { extra: usize },
    #[error("sequence of length {len} exceeds {max_len} steps")]
    TooLong { len: usize, max_len: usize },
}

/// Pre-order (leftmost-derivation) list of production indices.
pub fn tree_to_rule_sequence(
    grammar: &Grammar,
    tree: &DerivationTree,
) -> Result<Vec<usize>, EncodeError> {
    if !tree.is_complete(grammar) {
        return Err(EncodeError::Incomplete);
    }
    Ok(tree
        .preorder()
        .into_iter()
        .filter_map(|id| tree.production(id))
        .collect())
}

/// Rebuilds a tree by applying each production to the leftmost open nonterminal.
pub fn rule_sequence_to_tree(
    grammar: &Grammar,
    seq: &[usize],
) -> Result<DerivationTree, EncodeError> {
    let mut tree = DerivationTree::new(grammar);
    // Stack of open nodes, top is leftmost.
    let mut stack = vec![tree.root()];
    for (step, &production) in seq.iter().enumerate() {
        if production >= grammar.productions().len() {
            return Err(EncodeError::OutOfRange { step, production });
        }
        let Some(node) = stack.pop() else {
            return Err(EncodeError::Trailing {
                extra: seq.len() - step,
            });
        };
        if grammar.production(production).lhs != tree.symbol(node) {
            return Err(EncodeError::Mismatch {
                step,
                production,
                expected: grammar.symbol(tree.symbol(node)).name.clone(),
            });
        }
        let kids = tree.expand(grammar, node, production).to_vec();
        for &k in kids.iter().rev() {
            if !grammar.symbol(tree.symbol(k)).is_terminal() {
                stack.push(k);
            }
        }
    }
    if !stack.is_empty() {
        return Err(EncodeError::Truncated);
    }
    Ok(tree)
}

/// Row-major `max_len x |R|` one-hot matrix; rows past the sequence are zero.
pub fn one_hot_encode(
    grammar: &Grammar,
    seq: &[usize],
    max_len: usize,
) -> Result<Vec<Vec<u8>>, EncodeError> {
    if seq.len() > max_len {
        return Err(EncodeError::TooLong {
            len: seq.len(),
            max_len,
        });
    }
    let width = grammar.productions().len();
    Ok((0..max_len)
        .map(|t| {
            let mut row = vec![0u8; width];
            if let Some(&p) = seq.get(t) {
                row[p] = 1;
            }
            row
        })
        .collect())
}
