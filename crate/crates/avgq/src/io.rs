//! Model files: a JSON object with `"S"`, `"A"`, `"P"` (S x A x S) and `"r"` (S x A).

use std::fs;
use std::path::Path;

use avgq_core::Amdp;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    #[serde(rename = "S")]
    states: usize,
    #[serde(rename = "A")]
    actions: usize,
    #[serde(rename = "P")]
    kernel: Vec<Vec<Vec<f64>>>,
    r: Vec<Vec<f64>>,
}

pub fn parse_mdp(text: &str) -> Result<Amdp> {
    let file: MdpFile = serde_json::from_str(text)?;
    let mdp = Amdp::from_nested(&file.kernel, &file.r)?;
    if mdp.states() != file.states || mdp.actions() != file.actions {
        return Err(HarnessError::Config(format!(
            "declared S={}, A={} but arrays are {}x{}",
            file.states,
            file.actions,
            mdp.states(),
            mdp.actions()
        )));
    }
    Ok(mdp)
}

pub fn mdp_to_json(mdp: &Amdp) -> String {
    let file = MdpFile {
        states: mdp.states(),
        actions: mdp.actions(),
        kernel: mdp.kernel_nested(),
        r: mdp.reward_nested(),
    };
    serde_json::to_string_pretty(&file).expect("plain numeric arrays always serialize")
}

pub fn read_mdp(path: &Path) -> Result<Amdp> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_mdp(&text)
}

pub fn write_mdp(path: &Path, mdp: &Amdp) -> Result<()> {
    fs::write(path, mdp_to_json(mdp)).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        let mdp = Amdp::new(2, 1, vec![0.3, 0.7, 1.0, 0.0], vec![0.1, 0.123456789012345]).unwrap();
        let back = parse_mdp(&mdp_to_json(&mdp)).unwrap();
        assert_eq!(back, mdp);
    }

    #[test]
    fn rejects_bad_rows_and_shapes() {
        let bad_row = r#"{"S":1,"A":1,"P":[[[0.9]]],"r":[[0.5]]}"#;
        assert!(matches!(parse_mdp(bad_row), Err(HarnessError::Mdp(_))));
        let bad_decl = r#"{"S":2,"A":1,"P":[[[1.0]]],"r":[[0.5]]}"#;
        assert!(matches!(parse_mdp(bad_decl), Err(HarnessError::Config(_))));
        assert!(matches!(parse_mdp("{"), Err(HarnessError::Json(_))));
    }
}
