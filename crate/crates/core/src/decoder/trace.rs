use serde::{Deserialize, Serialize};

/// One decision of a decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceStep {
    Rule {
        node: u32,
        production: usize,
        alternative: usize,
        allowed: Vec<bool>,
        depth: usize,
        parent_production: Option<usize>,
        logp: f64,
    },
    Lazy {
        node: u32,
        /// Symbol id of the attribute's owner.
        owner: u32,
        attr: String,
        bit: usize,
        value: bool,
        allowed: [bool; 2],
        depth: usize,
        logp: f64,
    },
}

impl TraceStep {
    pub fn logp(&self) -> f64 {
        match self {
            TraceStep::Rule { logp, .. } | TraceStep::Lazy { logp, .. } => *logp,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeTrace {
    pub steps: Vec<TraceStep>,
}

impl DecodeTrace {
    /// Sum of step log-probabilities, accumulated in step order.
    pub fn total_logp(&self) -> f64 {
        self.steps.iter().map(TraceStep::logp).sum()
    }

    /// Production indices in the order they were applied.
    pub fn rule_sequence(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                TraceStep::Rule { production, .. } => Some(*production),
                TraceStep::Lazy { .. } => None,
            })
            .collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("trace step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(DecodeTrace { steps })
    }
}
