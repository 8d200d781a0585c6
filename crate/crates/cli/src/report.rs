//! The machine-readable report and its text rendering.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use copdiv::{Copula, Divergence, StudySummary};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: &str = "1";

/// Fields a subcommand does not produce are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<Copula>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub divergence: Option<Divergence>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_hat: Option<Vec<f64>>,
    #[serde(rename = "D_hat", skip_serializing_if = "Option::is_none", default)]
    pub d_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub at_boundary: Option<bool>,
    #[serde(rename = "T_n", skip_serializing_if = "Option::is_none", default)]
    pub t_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub df: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reject: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decision: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    /// `√(Ξ̂/n)` per coordinate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub se: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma2_hat: Option<f64>,
    /// Population divergence at the alternative.
    #[serde(rename = "D", skip_serializing_if = "Option::is_none", default)]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_star: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n0_closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub power: Option<f64>,
    /// Path of the CSV written by `sample`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub written: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub study: Option<StudySummary>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            seed: config.seed,
            family: config.family,
            divergence: config.divergence,
            config,
            n: None,
            theta_hat: None,
            d_hat: None,
            converged: None,
            at_boundary: None,
            t_n: None,
            df: None,
            p_value: None,
            reject: None,
            decision: None,
            alpha: None,
            se: None,
            sigma2_hat: None,
            d: None,
            sigma: None,
            n_star: None,
            n0: None,
            n0_closed_form: None,
            power: None,
            written: None,
            study: None,
            warnings: Vec::new(),
        }
    }

    /// Pretty JSON with a trailing newline. Floats are written in their
    /// shortest exactly round-tripping form.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// `key: value` lines mirroring the JSON structure.
    pub fn to_text(&self) -> serde_json::Result<String> {
        let value = serde_json::to_value(self)?;
        let mut out = String::new();
        if let Some(decision) = &self.decision {
            out.push_str(decision);
            out.push('\n');
        }
        render(&value, "", &mut out);
        Ok(out)
    }
}

/// Arrays longer than this print as a count in text mode.
const TEXT_ARRAY_LIMIT: usize = 8;

fn render(value: &Value, prefix: &str, out: &mut String) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                render(v, &key, out);
            }
        }
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            let line = if items.len() > TEXT_ARRAY_LIMIT {
                format!("[{} values]", items.len())
            } else {
                let parts: Vec<String> = items.iter().map(scalar).collect();
                format!("[{}]", parts.join(", "))
            };
            out.push_str(&format!("{prefix}: {line}\n"));
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                render(v, &format!("{prefix}[{i}]"), out);
            }
        }
        v => out.push_str(&format!("{prefix}: {}\n", scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
