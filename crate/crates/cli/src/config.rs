//! `key = value` configuration files. Blank lines and `#` comments are
//! ignored.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use celltrail::repository::RepoConfig;

pub fn repo_config(root: PathBuf, file: Option<&Path>) -> anyhow::Result<RepoConfig> {
    let mut config = RepoConfig::new(root);
    let Some(file) = file else {
        return Ok(config);
    };
    let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", file.display(), n + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = || format!("{}:{}: invalid value {value:?} for {key}", file.display(), n + 1);
        match key {
            "inactivity_timeout" => config.inactivity_timeout = value.parse().with_context(bad)?,
            "token_bits" => config.token_bits = value.parse().with_context(bad)?,
            other => bail!("{}:{}: unknown key {other:?}", file.display(), n + 1),
        }
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("repo.conf");
        std::fs::write(&f, "# policy\ninactivity_timeout = 600\n\ntoken_bits=256 # wide\n").unwrap();
        let c = repo_config("r".into(), Some(&f)).unwrap();
        assert_eq!((c.inactivity_timeout, c.token_bits), (600, 256));
        std::fs::write(&f, "colour = blue\n").unwrap();
        assert!(repo_config("r".into(), Some(&f)).is_err());
        std::fs::write(&f, "inactivity_timeout = 0\n").unwrap();
        assert!(repo_config("r".into(), Some(&f)).is_err());
        assert_eq!(repo_config("r".into(), None).unwrap().inactivity_timeout, 1800);
    }
}
