//! `key = value` metadata sidecars written next to every output file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// `out.csv` gets `out.csv.meta`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn to_text<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{} = {}\n", k.as_ref(), v.as_ref().replace('\n', " ")))
        .collect()
}

pub fn write_sidecar<K: AsRef<str>, V: AsRef<str>>(output: &Path, pairs: &[(K, V)]) -> Result<PathBuf> {
    let path = sidecar_path(output);
    fs::write(&path, to_text(pairs)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Parses sidecar text back into pairs, in file order.
pub fn parse(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_round_trip() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.meta"));
        let pairs = vec![("seed", "3"), ("note", "two\nlines")];
        let text = to_text(&pairs);
        assert_eq!(text, "seed = 3\nnote = two lines\n");
        assert_eq!(parse(&text), vec![("seed".into(), "3".into()), ("note".into(), "two lines".into())]);
    }
}
