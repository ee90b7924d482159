use serde::Serialize;
use serde_json::{json, Value};

use did_miss::{compute_rates, Error, PanelDataset, RateTable};

#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub rows: usize,
    pub arm_sizes: [usize; 2],
    pub aux_arity: usize,
    pub covariate_arity: usize,
    pub rates: RateTable,
}

impl Fingerprint {
    pub fn of(data: &PanelDataset) -> Self {
        Fingerprint {
            rows: data.len(),
            arm_sizes: data.arm_sizes(),
            aux_arity: data.aux_arity(),
            covariate_arity: data.covariate_arity(),
            rates: compute_rates(data),
        }
    }
}

/// Self-contained record of one invocation.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub status: &'static str,
    pub command: Vec<String>,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub fingerprint: Option<Fingerprint>,
    pub result: Value,
    pub diagnostics: Value,
}

impl RunReport {
    pub fn new(command: Vec<String>, seed: Option<u64>, fingerprint: Option<Fingerprint>, result: Value, diagnostics: Value) -> Self {
        RunReport {
            status: "ok",
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            fingerprint,
            result,
            diagnostics,
        }
    }

    pub fn refused(command: Vec<String>, fingerprint: Option<Fingerprint>, error: &Error) -> Self {
        RunReport {
            status: "refused",
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: None,
            fingerprint,
            result: Value::Null,
            diagnostics: json!({ "refusal": error.to_string() }),
        }
    }

    pub fn print(&self, pretty: bool) {
        let v = serde_json::to_value(self).expect("report serializes");
        if pretty {
            print!("{}", table(&v));
        } else {
            println!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(a) if a.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let items: Vec<String> = a.iter().map(scalar).collect();
            out.push((prefix.to_string(), format!("[{}]", items.join(", "))));
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Two aligned columns: dotted key path and value.
pub fn table(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_flattens_nested_values() {
        let v = json!({ "a": { "b": 1.5, "c": [1, 2] }, "d": null, "e": [{ "f": "x" }] });
        assert_eq!(table(&v), "a.b     1.5\na.c     [1, 2]\nd       -\ne[0].f  x\n");
    }
}
