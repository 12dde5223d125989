//! Shared report plumbing: the surrogacy caveat and deterministic JSON output.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Embedded in every numeric report.
pub const CAVEAT: &str = "Eigenvalues are those of a Monte Carlo Ulam discretization of the twisted \
transfer operators, not of the operators on an anisotropic Banach space. Only the leading branch \
lambda_w near w = 0 is treated as quantitatively meaningful; sub-leading Ulam eigenvalues are \
exploratory and carry no claim about true Ruelle resonances.";

/// Field that legitimately differs between otherwise identical runs.
pub const RUNTIME_FIELD: &str = "runtime_seconds";

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// Removes the runtime field (recursively) so reports can be compared.
pub fn strip_runtime(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove(RUNTIME_FIELD);
            m.values_mut().for_each(strip_runtime);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runtime_is_stripped_everywhere() {
        let mut v = serde_json::json!({"a": 1, "runtime_seconds": 2.0, "inner": [{"runtime_seconds": 1}]});
        strip_runtime(&mut v);
        assert_eq!(v, serde_json::json!({"a": 1, "inner": [{}]}));
    }

    #[test]
    fn json_ends_with_newline() {
        let s = to_json_string(&serde_json::json!({"x": [1, 2]})).unwrap();
        assert!(s.ends_with("}\n"));
    }
}
