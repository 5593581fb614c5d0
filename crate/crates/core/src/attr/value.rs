use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Value domain of an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Fixed-width bit vector with `cap` bits (at most 64).
    BitSet {
        cap: usize,
    },
    Counter,
    SymbolSet,
    Token,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Bits(u64),
    Counter(i64),
    Set(BTreeSet<String>),
    Token(String),
    Flag(bool),
}

impl Value {
    pub fn empty_set() -> Value {
        Value::Set(BTreeSet::new())
    }

    pub fn set_of<I, S>(items: I) -> Value
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Value::Set(items.into_iter().map(Into::into).collect())
    }

    pub fn token(s: impl Into<String>) -> Value {
        Value::Token(s.into())
    }

    pub fn as_set(&self) -> Option<&BTreeSet<String>> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            Value::Token(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_counter(&self) -> Option<i64> {
        match self {
            Value::Counter(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_bits(&self) -> Option<u64> {
        match self {
            Value::Bits(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            Value::Flag(f) => Some(*f),
            _ => None,
        }
    }

    pub fn fits(&self, domain: Domain) -> bool {
        match (self, domain) {
            (Value::Bits(b), Domain::BitSet { cap }) => cap >= 64 || *b >> cap == 0,
            (Value::Counter(_), Domain::Counter)
            | (Value::Set(_), Domain::SymbolSet)
            | (Value::Token(_), Domain::Token)
            | (Value::Flag(_), Domain::Flag) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bits(b) => write!(f, "{b:#b}"),
            Value::Counter(c) => write!(f, "{c}"),
            Value::Set(s) => {
                let items: Vec<&str> = s.iter().map(String::as_str).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            Value::Token(t) => write!(f, "{t}"),
            Value::Flag(b) => write!(f, "{b}"),
        }
    }
}

/// State of one attribute instance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Slot {
    #[default]
    Unset,
    /// Predetermined by a stochastic draw, awaiting its synthesized value.
    PendingLazy(Value),
    Set(Value),
}

impl Slot {
    pub fn value(&self) -> Option<&Value> {
        match self {
            Slot::Set(v) => Some(v),
            _ => None,
        }
    }
}
