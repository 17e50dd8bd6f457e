//! Model parameter files and provenance hashes.
//!
//! A params file is a text header of `key=value` lines closed by a line
//! reading `end`, followed by the flat parameter vector as little-endian
//! f64.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{MlpArchitecture, ModelParams};

const MAGIC: &str = "reconlab-params-1";

/// Hex SHA-256 of `text`, truncated to 16 characters.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)[..16].to_string()
}

/// The provenance line written at the top of every output.
pub fn provenance(hash: &str) -> String {
    format!("reconlab config_hash={hash}")
}

pub fn save_params(path: impl AsRef<Path>, params: &ModelParams, meta: &[(&str, String)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "format={MAGIC}")?;
    writeln!(out, "arch={}", params.arch().describe())?;
    writeln!(out, "count={}", params.parameter_count())?;
    for (k, v) in meta {
        if k.contains('=') || v.contains('\n') || *k == "end" {
            return Err(Error::invalid(format!("unusable metadata key {k:?}")));
        }
        writeln!(out, "{k}={v}")?;
    }
    writeln!(out, "end")?;
    for v in params.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Parameters plus the header's extra metadata, in file order.
pub fn load_params(path: impl AsRef<Path>) -> Result<(ModelParams, Vec<(String, String)>)> {
    let path = path.as_ref();
    let bad = |m: &str| Error::format(path, m);
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut meta = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad("header is not terminated"));
        }
        let l = line.trim_end_matches('\n');
        if l == "end" {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        meta.push((k.to_string(), v.to_string()));
    }
    let take = |meta: &mut Vec<(String, String)>, key: &str| -> Result<String> {
        let i = meta.iter().position(|(k, _)| k == key).ok_or_else(|| bad(&format!("missing {key}")))?;
        Ok(meta.remove(i).1)
    };
    if take(&mut meta, "format")? != MAGIC {
        return Err(bad("not a params file"));
    }
    let arch = MlpArchitecture::parse(&take(&mut meta, "arch")?)?;
    let count: usize = take(&mut meta, "count")?.parse().map_err(|_| bad("bad count"))?;
    if count != arch.parameter_count() {
        return Err(bad("count disagrees with the architecture"));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(bad(&format!("expected {} payload bytes, found {}", count * 8, bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((ModelParams::from_flat(&arch, data)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Activation};

    #[test]
    fn params_round_trip() {
        let arch = MlpArchitecture::new(vec![4, 3, 2], Activation::Tanh).unwrap();
        let p = init_params(&arch, 12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.params");
        save_params(&path, &p, &[("init_seed", "12".into())]).unwrap();
        let (back, meta) = load_params(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(meta, vec![("init_seed".to_string(), "12".to_string())]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let arch = MlpArchitecture::new(vec![2, 2], Activation::Identity).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.params");
        save_params(&path, &init_params(&arch, 1), &[]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_params(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea");
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }
}
