//! Flat `key = value` configuration merged under command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// Keys are flag names without the leading dashes; `_` and `-` are
/// interchangeable.
fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
        let (k, v) = (normalize(k), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            bail!("config line {}: empty key or value", i + 1);
        }
        if map.insert(k.clone(), v).is_some() {
            bail!("config line {}: duplicate key `{k}`", i + 1);
        }
    }
    Ok(map)
}

pub fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text)
}

/// Resolved parameters: flag, then config file, then default.
#[derive(Debug, Clone)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn resolve(
        flags: Vec<(&'static str, Option<String>, Option<&'static str>)>,
        mut file: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (key, flag, default) in flags {
            let from_file = file.remove(key);
            if let Some(v) = flag.or(from_file).or(default.map(String::from)) {
                values.insert(key.to_string(), v);
            }
        }
        if let Some(unknown) = file.keys().next() {
            bail!("config key `{unknown}` does not apply to this command");
        }
        Ok(Params { values })
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.opt(key).ok_or_else(|| anyhow!("missing parameter --{key}"))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.opt(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(other) => bail!("`{key}` must be true or false, got `{other}`"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_separators() {
        let map = parse("# sweep\np = 1\nn_max = 8  # inline\n\nr=sqrt2/10\n").unwrap();
        assert_eq!(map["p"], "1");
        assert_eq!(map["n-max"], "8");
        assert_eq!(map["r"], "sqrt2/10");
        assert!(parse("p 1").is_err());
        assert!(parse("p = 1\np = 2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse("c = 1/9\nt = 1/3").unwrap();
        let params = Params::resolve(
            vec![("c", Some("1/27".into()), None), ("t", None, Some("1")), ("r", None, Some("0"))],
            file,
        )
        .unwrap();
        assert_eq!(params.get("c").unwrap(), "1/27");
        assert_eq!(params.get("t").unwrap(), "1/3");
        assert_eq!(params.get("r").unwrap(), "0");
        assert!(Params::resolve(vec![], parse("bogus = 1").unwrap()).is_err());
    }
}
