//! Flat `key = value` run configuration. `#` starts a comment; blank lines
//! are ignored; keys may appear once.

use std::collections::BTreeMap;
use std::path::Path;

use isoblock::inclusion::StrategyKind;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub type CfgResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> CfgResult<T> {
    Err(ConfigError(msg.into()))
}

const KNOWN_KEYS: &[&str] = &[
    "model", "seed", "dt", "t_end", "a", "b", "c", "n", "omega", "epsilon_reg", "k", "sign", "x0", "strategy",
    "bundle", "eps0", "eps_steps", "delta", "band", "horizon", "probe_horizon", "grid_n", "region_radius",
    "o_radius", "rays", "levels", "points", "suite", "expect_fail", "k_max", "samples", "pairs", "approach", "u0",
    "v0", "out",
];

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CfgResult<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", no + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return err(format!("line {}: unknown key `{k}`", no + 1));
            }
            if v.is_empty() {
                return err(format!("line {}: empty value for `{k}`", no + 1));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return err(format!("line {}: duplicate key `{k}`", no + 1));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CfgResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CfgResult<f64> {
        self.f64_opt(key).map(|v| v.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> CfgResult<Option<f64>> {
        match self.str(key) {
            None => Ok(None),
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => err(format!("`{key}` must be a finite number, got `{s}`")),
            },
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CfgResult<usize> {
        match self.str(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| ConfigError(format!("`{key}` must be a nonnegative integer, got `{s}`"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> CfgResult<u64> {
        match self.str(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| ConfigError(format!("`{key}` must be a nonnegative integer, got `{s}`"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> CfgResult<bool> {
        match self.str(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(s) => err(format!("`{key}` must be true or false, got `{s}`")),
        }
    }

    pub fn sign_or(&self, key: &str, default: i8) -> CfgResult<i8> {
        match self.str(key) {
            None => Ok(default),
            Some("+" | "+1" | "1") => Ok(1),
            Some("-" | "-1") => Ok(-1),
            Some(s) => err(format!("`{key}` must be + or -, got `{s}`")),
        }
    }

    /// Comma-separated numbers.
    pub fn vec_opt(&self, key: &str) -> CfgResult<Option<Vec<f64>>> {
        self.str(key).map(|s| parse_list(key, s)).transpose()
    }
}

pub fn parse_list(key: &str, s: &str) -> CfgResult<Vec<f64>> {
    s.split(',')
        .map(|t| match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => err(format!("`{key}`: `{}` is not a finite number", t.trim())),
        })
        .collect()
}

/// `maximal | minimal | zero | random:<dwell> | delayed:<tau>:<+|->`.
pub fn parse_strategy(s: &str) -> CfgResult<StrategyKind> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| -> CfgResult<f64> {
        t.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(|| ConfigError(format!("bad number `{t}` in strategy `{s}`")))
    };
    match parts.as_slice() {
        ["maximal"] => Ok(StrategyKind::Maximal),
        ["minimal"] => Ok(StrategyKind::Minimal),
        ["zero"] => Ok(StrategyKind::Zero),
        ["random", d] => {
            let dwell = num(d)?;
            if dwell <= 0.0 {
                return err("random dwell must be positive");
            }
            Ok(StrategyKind::RandomPiecewiseConstant { dwell })
        }
        ["delayed", tau, sign] => {
            let sign = match *sign {
                "+" => 1,
                "-" => -1,
                other => return err(format!("departure sign must be + or -, got `{other}`")),
            };
            Ok(StrategyKind::DelayedDeparture { tau: num(tau)?, sign })
        }
        _ => err(format!("unknown strategy `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let c = RawConfig::parse("# header\nmodel = saddle  # trailing\n\na = 2\nx0 = 0.5, -1\n").unwrap();
        assert_eq!(c.str("model"), Some("saddle"));
        assert_eq!(c.f64_or("a", 1.0).unwrap(), 2.0);
        assert_eq!(c.f64_or("b", 1.0).unwrap(), 1.0);
        assert_eq!(c.vec_opt("x0").unwrap(), Some(vec![0.5, -1.0]));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RawConfig::parse("model saddle").is_err());
        assert!(RawConfig::parse("colour = red").is_err());
        assert!(RawConfig::parse("a = 1\na = 2").is_err());
        assert!(RawConfig::parse("a =").is_err());
        let c = RawConfig::parse("a = nan\nseed = -3").unwrap();
        assert!(c.f64_or("a", 0.0).is_err());
        assert!(c.u64_or("seed", 0).is_err());
    }

    #[test]
    fn strategies() {
        assert_eq!(parse_strategy("maximal").unwrap(), StrategyKind::Maximal);
        assert_eq!(parse_strategy("random:0.1").unwrap(), StrategyKind::RandomPiecewiseConstant { dwell: 0.1 });
        assert_eq!(parse_strategy("delayed:1:-").unwrap(), StrategyKind::DelayedDeparture { tau: 1.0, sign: -1 });
        assert!(parse_strategy("random:0").is_err());
        assert!(parse_strategy("sideways").is_err());
    }
}
