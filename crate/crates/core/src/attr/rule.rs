use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Value;

/// Predicate used by checking rules. A failed check yields `Flag(false)` and
/// a violation carrying the rule id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckFn {
    /// All dependencies are equal.
    AllEqual,
    EqualsConst(Value),
    NotEqualConst(Value),
    /// The single set dependency is a subset of the constant.
    SubsetOfConst(BTreeSet<String>),
    /// The single counter dependency is at most the bound.
    AtMost(i64),
    /// `deps[1]` (a token) is not a member of `deps[0]` (a set).
    NotMember,
    IsEmpty,
    /// The set dependencies are pairwise disjoint.
    Disjoint,
}

/// Closed vocabulary of pure semantic functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleFn {
    Const(Value),
    Copy,
    Union,
    Intersect,
    /// `deps[0] \ deps[1] \ ...`
    Minus,
    SymDiff,
    /// `deps[0] ∪ {deps[1]}`
    Insert,
    /// Singleton set holding the concatenation of the token dependencies.
    SetOf,
    /// Token `prefix` followed by the token dependencies.
    Concat {
        prefix: String,
    },
    /// Sum of the counter dependencies plus `k`.
    CounterAdd(i64),
    /// Bit `i` is set iff the set dependency has more than `i` elements.
    CountBits {
        cap: usize,
    },
    /// Bit `i` is set iff `labels[i]` is in the set dependency.
    Membership {
        labels: Vec<String>,
    },
    Check {
        check: CheckFn,
        id: String,
    },
}

/// Failure of a rule function on ill-typed inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeMismatch(pub &'static str);

/// Outcome of applying a rule: the value, plus offending detail for failed checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub value: Value,
    pub failed: Option<String>,
}

fn sets<'a>(deps: &[&'a Value]) -> Result<Vec<&'a BTreeSet<String>>, TypeMismatch> {
    deps.iter()
        .map(|v| v.as_set().ok_or(TypeMismatch("expected a set")))
        .collect()
}

fn bits(deps: &[&Value]) -> Option<Vec<u64>> {
    deps.iter().map(|v| v.as_bits()).collect()
}

impl RuleFn {
    pub fn apply(&self, deps: &[&Value]) -> Result<Applied, TypeMismatch> {
        let ok = |value| {
            Ok(Applied {
                value,
                failed: None,
            })
        };
        match self {
            RuleFn::Const(v) => ok(v.clone()),
            RuleFn::Copy => match deps {
                [v] => ok((*v).clone()),
                _ => Err(TypeMismatch("copy takes one dependency")),
            },
            RuleFn::Union | RuleFn::Intersect | RuleFn::SymDiff | RuleFn::Minus => {
                if deps.is_empty() {
                    return Err(TypeMismatch("set operation without dependencies"));
                }
                if let Some(b) = bits(deps) {
                    let first = b[0];
                    let r = b[1..].iter().fold(first, |acc, &x| match self {
                        RuleFn::Union => acc | x,
                        RuleFn::Intersect => acc & x,
                        RuleFn::SymDiff => acc ^ x,
                        _ => acc & !x,
                    });
                    return ok(Value::Bits(r));
                }
                let s = sets(deps)?;
                let mut acc = s[0].clone();
                for other in &s[1..] {
                    acc = match self {
                        RuleFn::Union => acc.union(other).cloned().collect(),
                        RuleFn::Intersect => acc.intersection(other).cloned().collect(),
                        RuleFn::SymDiff => acc.symmetric_difference(other).cloned().collect(),
                        _ => acc.difference(other).cloned().collect(),
                    };
                }
                ok(Value::Set(acc))
            }
            RuleFn::Insert => match deps {
                [Value::Set(s), Value::Token(t)] => {
                    let mut s = s.clone();
                    s.insert(t.clone());
                    ok(Value::Set(s))
                }
                _ => Err(TypeMismatch("insert takes a set and a token")),
            },
            RuleFn::SetOf => {
                let mut text = String::new();
                for d in deps {
                    text.push_str(d.as_token().ok_or(TypeMismatch("expected a token"))?);
                }
                ok(Value::set_of([text]))
            }
            RuleFn::Concat { prefix } => {
                let mut text = prefix.clone();
                for d in deps {
                    text.push_str(d.as_token().ok_or(TypeMismatch("expected a token"))?);
                }
                ok(Value::Token(text))
            }
            RuleFn::CounterAdd(k) => {
                let mut total = *k;
                for d in deps {
                    total += d.as_counter().ok_or(TypeMismatch("expected a counter"))?;
                }
                ok(Value::Counter(total))
            }
            RuleFn::CountBits { cap } => match deps {
                [Value::Set(s)] => {
                    let n = s.len().min(*cap);
                    ok(Value::Bits(if n >= 64 {
                        u64::MAX
                    } else {
                        (1u64 << n) - 1
                    }))
                }
                _ => Err(TypeMismatch("count-bits takes one set")),
            },
            RuleFn::Membership { labels } => match deps {
                [Value::Set(s)] => {
                    let mut b = 0u64;
                    for (i, l) in labels.iter().enumerate() {
                        if s.contains(l) {
                            b |= 1 << i;
                        }
                    }
                    ok(Value::Bits(b))
                }
                _ => Err(TypeMismatch("membership takes one set")),
            },
            RuleFn::Check { check, .. } => {
                let failed = check.evaluate(deps)?;
                Ok(Applied {
                    value: Value::Flag(failed.is_none()),
                    failed,
                })
            }
        }
    }
}

impl CheckFn {
    /// `None` when the check holds, otherwise a short description of the offending values.
    fn evaluate(&self, deps: &[&Value]) -> Result<Option<String>, TypeMismatch> {
        let describe = || {
            deps.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" vs ")
        };
        Ok(match self {
            CheckFn::AllEqual => {
                if deps.windows(2).all(|w| w[0] == w[1]) {
                    None
                } else {
                    Some(describe())
                }
            }
            CheckFn::EqualsConst(c) => match deps {
                [v] if *v == c => None,
                [v] => Some(v.to_string()),
                _ => return Err(TypeMismatch("equality check takes one dependency")),
            },
            CheckFn::NotEqualConst(c) => match deps {
                [v] if *v != c => None,
                [v] => Some(v.to_string()),
                _ => return Err(TypeMismatch("inequality check takes one dependency")),
            },
            CheckFn::SubsetOfConst(allowed) => match deps {
                [Value::Set(s)] => {
                    let extra: Vec<&str> = s.difference(allowed).map(String::as_str).collect();
                    (!extra.is_empty()).then(|| extra.join(","))
                }
                _ => return Err(TypeMismatch("subset check takes one set")),
            },
            CheckFn::AtMost(bound) => match deps {
                [Value::Counter(c)] => (c > bound).then(|| c.to_string()),
                _ => return Err(TypeMismatch("bound check takes one counter")),
            },
            CheckFn::NotMember => match deps {
                [Value::Set(s), Value::Token(t)] => s.contains(t).then(|| t.clone()),
                _ => return Err(TypeMismatch("membership check takes a set and a token")),
            },
            CheckFn::IsEmpty => match deps {
                [Value::Set(s)] => (!s.is_empty()).then(|| deps[0].to_string()),
                [Value::Bits(b)] => (*b != 0).then(|| deps[0].to_string()),
                _ => return Err(TypeMismatch("emptiness check takes one set")),
            },
            CheckFn::Disjoint => {
                let s = sets(deps)?;
                let mut seen = BTreeSet::new();
                let mut dup = Vec::new();
                for set in s {
                    for x in set {
                        if !seen.insert(x) {
                            dup.push(x.as_str());
                        }
                    }
                }
                (!dup.is_empty()).then(|| dup.join(","))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(items: &[&str]) -> Value {
        Value::set_of(items.iter().copied())
    }

    #[test]
    fn set_algebra() {
        let a = s(&["-1", "=2"]);
        let b = s(&["-1"]);
        assert_eq!(
            RuleFn::Intersect.apply(&[&a, &b]).unwrap().value,
            s(&["-1"])
        );
        assert_eq!(RuleFn::Union.apply(&[&a, &b]).unwrap().value, a);
        assert_eq!(RuleFn::Minus.apply(&[&a, &b]).unwrap().value, s(&["=2"]));
        assert_eq!(RuleFn::SymDiff.apply(&[&a, &b]).unwrap().value, s(&["=2"]));
        assert_eq!(
            RuleFn::Union
                .apply(&[&Value::Bits(0b01), &Value::Bits(0b10)])
                .unwrap()
                .value,
            Value::Bits(0b11)
        );
    }

    #[test]
    fn token_functions() {
        let d = Value::token("1");
        let b = Value::token("-");
        assert_eq!(RuleFn::SetOf.apply(&[&b, &d]).unwrap().value, s(&["-1"]));
        assert_eq!(
            RuleFn::Concat { prefix: "v".into() }
                .apply(&[&d])
                .unwrap()
                .value,
            Value::token("v1")
        );
        assert_eq!(
            RuleFn::Insert.apply(&[&s(&["2"]), &d]).unwrap().value,
            s(&["1", "2"])
        );
        assert_eq!(
            RuleFn::CounterAdd(1)
                .apply(&[&Value::Counter(4)])
                .unwrap()
                .value,
            Value::Counter(5)
        );
    }

    #[test]
    fn lazy_encodings() {
        assert_eq!(
            RuleFn::CountBits { cap: 1 }
                .apply(&[&s(&["-1"])])
                .unwrap()
                .value,
            Value::Bits(1)
        );
        assert_eq!(
            RuleFn::CountBits { cap: 1 }
                .apply(&[&s(&[])])
                .unwrap()
                .value,
            Value::Bits(0)
        );
        let labels: Vec<String> = (1..=8).map(|d| d.to_string()).collect();
        assert_eq!(
            RuleFn::Membership { labels }
                .apply(&[&s(&["1", "3"])])
                .unwrap()
                .value,
            Value::Bits(0b101)
        );
    }

    #[test]
    fn checks_report_detail() {
        let check = |c: CheckFn, deps: &[&Value]| {
            RuleFn::Check {
                check: c,
                id: "x".into(),
            }
            .apply(deps)
            .unwrap()
        };
        let r = check(CheckFn::AllEqual, &[&s(&["-1"]), &s(&["=1"])]);
        assert_eq!(r.value, Value::Flag(false));
        assert_eq!(r.failed.as_deref(), Some("{-1} vs {=1}"));
        let r = check(
            CheckFn::SubsetOfConst(["v0".to_string()].into()),
            &[&s(&["v0", "v2", "v8"])],
        );
        assert_eq!(r.failed.as_deref(), Some("v2,v8"));
        assert!(check(CheckFn::AtMost(10), &[&Value::Counter(10)])
            .failed
            .is_none());
        assert!(check(CheckFn::AtMost(10), &[&Value::Counter(11)])
            .failed
            .is_some());
        assert!(check(CheckFn::NotMember, &[&s(&["1"]), &Value::token("1")])
            .failed
            .is_some());
        assert!(check(CheckFn::IsEmpty, &[&s(&[])]).failed.is_none());
        assert!(check(CheckFn::Disjoint, &[&s(&["a"]), &s(&["b"])])
            .failed
            .is_none());
    }

    #[test]
    fn type_errors() {
        assert!(RuleFn::Copy.apply(&[]).is_err());
        assert!(RuleFn::Insert.apply(&[&Value::Counter(1)]).is_err());
        assert!(RuleFn::Union
            .apply(&[&Value::Counter(1), &Value::Counter(2)])
            .is_err());
    }
}
