//! Plain-text policy checkpoints.
//!
//! ```text
//! contexts=2
//! candidates=3
//! role=trained
//! 0.0000000000000000e0 1.2500000000000000e-1 -3.0000000000000000e0
//! ...
//! ```
//!
//! Logits are written with 17 significant digits so every `f64` round-trips
//! exactly. The file must end with a newline after the last row; anything
//! short of that is reported as truncated.

use std::fs;
use std::path::Path;

use crate::error::{Result, VpoError};
use crate::policy::{PolicyRole, TabularPolicy};

pub fn save_policy(policy: &TabularPolicy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!(
        "contexts={}\ncandidates={}\nrole={}\n",
        policy.num_contexts(),
        policy.num_candidates(),
        policy.role()
    );
    for row in policy.logits().chunks(policy.num_candidates()) {
        let cells: Vec<String> = row.iter().map(|l| format!("{l:.16e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| VpoError::io(path, e))
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<TabularPolicy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| VpoError::io(path, e))?;
    parse_policy(&text).map_err(|message| VpoError::Integrity {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_policy(text: &str) -> std::result::Result<TabularPolicy, String> {
    if !text.ends_with('\n') {
        return Err("file does not end with a newline (truncated?)".into());
    }
    let mut lines = text.lines();
    let mut header = |key: &str| -> std::result::Result<String, String> {
        let line = lines.next().ok_or_else(|| format!("missing `{key}=` header"))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::to_owned)
            .ok_or_else(|| format!("expected `{key}=...`, found `{line}`"))
    };
    let contexts: usize = header("contexts")?
        .parse()
        .map_err(|e| format!("contexts: {e}"))?;
    let candidates: usize = header("candidates")?
        .parse()
        .map_err(|e| format!("candidates: {e}"))?;
    let role: PolicyRole = header("role")?.parse().map_err(|e: VpoError| e.to_string())?;

    let mut logits = Vec::with_capacity(contexts * candidates);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| format!("row {i}: `{t}`: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        if row.len() != candidates {
            return Err(format!("row {i} has {} logits, expected {candidates}", row.len()));
        }
        logits.extend(row);
        rows += 1;
    }
    if rows != contexts {
        return Err(format!("found {rows} logit rows, expected {contexts}"));
    }
    TabularPolicy::from_logits(contexts, candidates, logits, role).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = TabularPolicy::random(3, 5, 40.0, PolicyRole::Reference, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_policy(&p, &path).unwrap();
        assert_eq!(load_policy(&path).unwrap(), p);
    }

    #[test]
    fn truncation_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = TabularPolicy::random(4, 3, 1.0, PolicyRole::Trained, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_policy(&p, &path).unwrap();
        let full = std::fs::read_to_string(&path).unwrap();
        for cut in [full.len() - 1, full.len() - 5, full.len() / 2, 10] {
            std::fs::write(&path, &full[..cut]).unwrap();
            assert!(
                matches!(load_policy(&path), Err(VpoError::Integrity { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn bad_header() {
        assert!(parse_policy("contexts=1\ncandidates=2\nrole=frozen\n0 0\n").is_err());
        assert!(parse_policy("candidates=2\ncontexts=1\nrole=trained\n0 0\n").is_err());
        assert!(parse_policy("contexts=1\ncandidates=2\nrole=trained\n0 nan\n").is_err());
        assert!(parse_policy("contexts=1\ncandidates=2\nrole=trained\n0 1\n").is_ok());
    }
}
