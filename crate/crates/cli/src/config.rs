use std::collections::BTreeMap;
use std::path::Path;

/// Keys accepted in a config file, one `key = value` per line.
pub const KEYS: &[&str] = &[
    "levels",
    "level",
    "outer_tol",
    "inner_tol",
    "max_outer",
    "max_inner",
    "inner",
    "format",
    "out",
    "seed",
    "threads",
];

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let k = k.trim().replace('-', "_");
            if !KEYS.contains(&k.as_str()) {
                return Err(format!("line {}: unknown key `{k}`", n + 1));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| format!("config key `{key}`: cannot parse `{v}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let c = FileConfig::parse("# run\nlevels = 3\nouter-tol=1e-8 # loose\n\n").unwrap();
        assert_eq!(c.get::<usize>("levels").unwrap(), Some(3));
        assert_eq!(c.get::<f64>("outer_tol").unwrap(), Some(1e-8));
        assert_eq!(c.get::<u64>("seed").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(FileConfig::parse("colour = red").is_err());
        assert!(FileConfig::parse("levels 3").is_err());
        let c = FileConfig::parse("levels = many").unwrap();
        assert!(c.get::<usize>("levels").is_err());
    }
}
