//! Settings resolution (flags, then the `TFCKA_CONFIG` file, then defaults)
//! and parsing of list and range arguments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// A bad flag, config entry or range. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub type UsageResult<T> = std::result::Result<T, UsageError>;

fn usage<T>(msg: impl Into<String>) -> UsageResult<T> {
    Err(UsageError(msg.into()))
}

/// Keys accepted in the config file; same spelling as the long flags.
pub const CONFIG_KEYS: [&str; 11] = ["n", "m", "loss-db", "rounds", "pd", "misalign", "eps-tot", "q", "format", "jobs", "fraction"];

/// Parsed `key = value` config file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> UsageResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("config line {}: expected `key = value`, got `{raw}`", i + 1));
            };
            let key = key.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return usage(format!("config line {}: unknown key `{key}`", i + 1));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> UsageResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Reads the file named by `TFCKA_CONFIG`, if set.
    pub fn from_env() -> UsageResult<Self> {
        match std::env::var_os("TFCKA_CONFIG") {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Flag value if given, else config value, else the default.
pub fn resolve(flag: &Option<String>, config: &ConfigFile, key: &str, default: &str) -> String {
    flag.clone().or_else(|| config.get(key).map(str::to_string)).unwrap_or_else(|| default.to_string())
}

pub fn parse_f64(what: &str, s: &str) -> UsageResult<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => usage(format!("{what}: `{s}` is not a finite number")),
    }
}

pub fn parse_usize_list(what: &str, s: &str) -> UsageResult<Vec<usize>> {
    let out: UsageResult<Vec<usize>> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| UsageError(format!("{what}: `{p}` is not a positive integer"))))
        .collect();
    let out = out?;
    if out.is_empty() {
        return usage(format!("{what}: empty list"));
    }
    Ok(out)
}

pub fn parse_f64_list(what: &str, s: &str) -> UsageResult<Vec<f64>> {
    s.split(',').map(|p| parse_f64(what, p)).collect()
}

/// `a:b:step` (inclusive, step > 0), a single value, or a comma list.
pub fn parse_linear_range(what: &str, s: &str) -> UsageResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => parse_f64_list(what, single),
        [a, b, step] => {
            let (a, b, step) = (parse_f64(what, a)?, parse_f64(what, b)?, parse_f64(what, step)?);
            if !(step > 0.0) || b < a {
                return usage(format!("{what}: range `{s}` needs start <= stop and step > 0"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            if count > 1_000_000 {
                return usage(format!("{what}: range `{s}` has too many points"));
            }
            Ok((0..count).map(|i| a + step * i as f64).collect())
        }
        _ => usage(format!("{what}: expected `start:stop:step`, a value or a list, got `{s}`")),
    }
}

/// `a:b:log10` (one point per decade), `a:b:log2` (doublings), `a:b:k` with
/// numeric factor `k > 1`, a single value, or a comma list.
pub fn parse_log_range(what: &str, s: &str) -> UsageResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => parse_f64_list(what, single),
        [a, b, spacing] => {
            let (a, b) = (parse_f64(what, a)?, parse_f64(what, b)?);
            let factor = match *spacing {
                "log10" => 10.0,
                "log2" => 2.0,
                k => parse_f64(what, k)?,
            };
            if !(a > 0.0) || b < a || !(factor > 1.0) {
                return usage(format!("{what}: range `{s}` needs 0 < start <= stop and factor > 1"));
            }
            let steps = ((b / a).ln() / factor.ln() + 1e-9).floor() as i32;
            if steps > 10_000 {
                return usage(format!("{what}: range `{s}` has too many points"));
            }
            Ok((0..=steps).map(|k| (a * factor.powi(k)).round().max(1.0)).collect())
        }
        _ => usage(format!("{what}: expected `start:stop:log10`, a value or a list, got `{s}`")),
    }
}

/// `--q`: `auto` or one or more fixed values.
#[derive(Debug, Clone, PartialEq)]
pub enum QChoice {
    Optimize,
    Fixed(Vec<f64>),
}

impl QChoice {
    pub fn parse(s: &str) -> UsageResult<Self> {
        if s.trim() == "auto" {
            return Ok(Self::Optimize);
        }
        let values = parse_f64_list("--q", s)?;
        if values.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return usage(format!("--q: values must lie in [0, 1], got `{s}`"));
        }
        Ok(Self::Fixed(values))
    }

    /// One entry per sweep value; `None` means optimize.
    pub fn values(&self) -> Vec<Option<f64>> {
        match self {
            Self::Optimize => vec![None],
            Self::Fixed(v) => v.iter().map(|&q| Some(q)).collect(),
        }
    }
}

/// `--m`: `auto` (command-specific) or a list of port counts.
#[derive(Debug, Clone, PartialEq)]
pub enum PortChoice {
    Auto,
    List(Vec<usize>),
}

impl PortChoice {
    pub fn parse(s: &str) -> UsageResult<Self> {
        if s.trim() == "auto" {
            Ok(Self::Auto)
        } else {
            Ok(Self::List(parse_usize_list("--m", s)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> UsageResult<Self> {
        match s.trim() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => usage(format!("--format: expected csv or json, got `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ranges() {
        assert_eq!(parse_linear_range("x", "0:3:1").unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(parse_linear_range("x", "0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_linear_range("x", "20").unwrap(), vec![20.0]);
        assert_eq!(parse_linear_range("x", "1,20,40").unwrap(), vec![1.0, 20.0, 40.0]);
        assert!(parse_linear_range("x", "0:3:0").is_err());
        assert!(parse_linear_range("x", "3:0:1").is_err());
        assert!(parse_linear_range("x", "a:b").is_err());
    }

    #[test]
    fn log_ranges() {
        assert_eq!(parse_log_range("L", "1e7:1e9:log10").unwrap(), vec![1e7, 1e8, 1e9]);
        assert_eq!(parse_log_range("L", "8:64:log2").unwrap(), vec![8.0, 16.0, 32.0, 64.0]);
        assert!(parse_log_range("L", "0:10:log10").is_err());
    }

    #[test]
    fn config_precedence() {
        let cfg = ConfigFile::parse("# defaults\npd = 1e-7\neps_tot=1e-6\n").unwrap();
        assert_eq!(resolve(&None, &cfg, "pd", "1e-9"), "1e-7");
        assert_eq!(resolve(&Some("1e-5".into()), &cfg, "pd", "1e-9"), "1e-5");
        assert_eq!(resolve(&None, &cfg, "eps-tot", "1e-8"), "1e-6");
        assert_eq!(resolve(&None, &cfg, "misalign", "0.02"), "0.02");
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("pd 1e-9").is_err());
    }

    #[test]
    fn choices() {
        assert_eq!(QChoice::parse("auto").unwrap(), QChoice::Optimize);
        assert_eq!(QChoice::parse("0.9,0.99").unwrap().values(), vec![Some(0.9), Some(0.99)]);
        assert!(QChoice::parse("1.5").is_err());
        assert_eq!(PortChoice::parse("10").unwrap(), PortChoice::List(vec![10]));
        assert!(Format::parse("xml").is_err());
    }
}
