//! JSON interchange for chains and distributions.
//!
//! Chain spec:
//! `{"type":"general","N":3,"rows":[{"from":1,"to":[0,2],"p":[0.5,0.5]},...],
//!   "order":"total","minimal":1}`
//! with `"order"` either the string `"total"` or `{"pairs":[[x,y],...]}`.
//! Distribution: `{"weights":{"1":0.2,"2":0.8}}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::kernel::{AbsorbedKernel, TruncationMode};
use crate::space::{OrderKind, StateSpace};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowJson {
    pub from: usize,
    pub to: Vec<usize>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderJson {
    Named(String),
    Pairs { pairs: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpecJson {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub rows: Vec<RowJson>,
    pub order: OrderJson,
    pub minimal: usize,
}

impl ChainSpecJson {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QsdError::InvalidChainSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn to_kernel(&self, mode: TruncationMode) -> Result<AbsorbedKernel> {
        if self.kind != "general" {
            return Err(QsdError::InvalidChainSpec(format!(
                "unknown chain type {:?}",
                self.kind
            )));
        }
        if self.minimal != 1 {
            return Err(QsdError::InvalidChainSpec(format!(
                "the minimal state must be 1, got {}",
                self.minimal
            )));
        }
        let space = match &self.order {
            OrderJson::Named(s) if s == "total" => StateSpace::total(self.n),
            OrderJson::Named(s) => {
                return Err(QsdError::InvalidChainSpec(format!(
                    "unknown order {s:?}, expected \"total\" or {{\"pairs\": ...}}"
                )))
            }
            OrderJson::Pairs { pairs } => StateSpace::explicit(self.n, pairs)?,
        };
        let mut raw: Vec<Option<Vec<(usize, f64)>>> = vec![None; self.n];
        for row in &self.rows {
            if row.from == 0 || row.from > self.n {
                return Err(QsdError::InvalidChainSpec(format!(
                    "row for state {} outside 1..={}",
                    row.from, self.n
                )));
            }
            if row.to.len() != row.p.len() {
                return Err(QsdError::InvalidChainSpec(format!(
                    "row {}: {} targets but {} probabilities",
                    row.from,
                    row.to.len(),
                    row.p.len()
                )));
            }
            let slot = &mut raw[row.from - 1];
            if slot.is_some() {
                return Err(QsdError::InvalidChainSpec(format!(
                    "duplicate row for state {}",
                    row.from
                )));
            }
            *slot = Some(row.to.iter().copied().zip(row.p.iter().copied()).collect());
        }
        let rows = raw
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| QsdError::InvalidChainSpec(format!("missing row for state {}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        AbsorbedKernel::from_rows(space, rows, mode)
    }

    pub fn from_kernel(k: &AbsorbedKernel) -> Self {
        let n = k.n_states();
        let rows = (1..=n)
            .map(|x| {
                let row = k.row(x);
                let mut to = Vec::new();
                let mut p = Vec::new();
                if row.absorb() > 0.0 {
                    to.push(0);
                    p.push(row.absorb());
                }
                for &(y, w) in row.targets() {
                    to.push(y);
                    p.push(w);
                }
                RowJson { from: x, to, p }
            })
            .collect();
        let order = match k.space().order() {
            OrderKind::Total => OrderJson::Named("total".into()),
            OrderKind::Explicit(ord) => OrderJson::Pairs {
                pairs: ord.related_pairs(),
            },
        };
        ChainSpecJson {
            kind: "general".into(),
            n,
            rows,
            order,
            minimal: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionJson {
    pub weights: BTreeMap<String, f64>,
}

impl DistributionJson {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QsdError::InvalidDistribution(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn to_distribution(&self) -> Result<Distribution> {
        let mut w = BTreeMap::new();
        for (k, &v) in &self.weights {
            let x: usize = k
                .parse()
                .map_err(|_| QsdError::InvalidDistribution(format!("bad state key {k:?}")))?;
            w.insert(x, v);
        }
        Distribution::from_weights(w)
    }

    pub fn from_distribution(d: &Distribution) -> Self {
        Self {
            weights: d.iter().map(|(x, w)| (x.to_string(), w)).collect(),
        }
    }
}
