//! Campaign configuration: `key = value` lines, `#` comments. `nu` and `snr`
//! take comma-separated lists; their product defines the experiments.

use std::fmt::Write as _;
use std::path::Path;

use kbh_core::datagen::ExperimentConfig;

use crate::error::{HarnessError, Result};
use crate::table::num;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub nu: Vec<usize>,
    pub snr: Vec<f64>,
    /// Samples per run (`N`).
    pub samples: usize,
    pub n: usize,
    pub p: usize,
    pub runs: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        Self {
            nu: vec![4, 8, 10, 20],
            snr: vec![10.0, 1.0],
            samples: d.samples,
            n: d.n,
            p: d.p,
            runs: d.runs,
            seed: d.seed,
            tol: 1e-3,
            max_iter: 200,
        }
    }
}

impl CampaignConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(path, &text)
    }

    /// Keys not present keep their defaults.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| HarnessError::parse(path, line_no, msg);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            let bad = |what: &str| err(format!("`{key}` must be {what}, got `{value}`"));
            match key {
                "nu" => {
                    cfg.nu = parse_list(value).ok_or_else(|| bad("a list of positive integers"))?
                }
                "snr" => {
                    cfg.snr = parse_list(value).ok_or_else(|| bad("a list of positive numbers"))?
                }
                "N" => cfg.samples = value.parse().map_err(|_| bad("a positive integer"))?,
                "n" => cfg.n = value.parse().map_err(|_| bad("a positive integer"))?,
                "p" => cfg.p = value.parse().map_err(|_| bad("a positive integer"))?,
                "runs" => cfg.runs = value.parse().map_err(|_| bad("a non-negative integer"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("a non-negative integer"))?,
                "tol" => cfg.tol = value.parse().map_err(|_| bad("a positive number"))?,
                "max_iter" => {
                    cfg.max_iter = value.parse().map_err(|_| bad("a non-negative integer"))?
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate().map_err(|e| match e {
            HarnessError::Usage(msg) => HarnessError::parse(path, 0, msg),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(HarnessError::Usage(msg.to_string()));
        if self.nu.is_empty() || self.nu.contains(&0) {
            return fail("nu must list at least one positive system order");
        }
        if self.snr.is_empty() || self.snr.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return fail("snr must list at least one positive finite value");
        }
        if self.n == 0 || self.n > self.samples {
            return fail("need 1 <= n <= N");
        }
        if self.p < 7 {
            return fail("p must be at least 7 to hold the degree-6 polynomial nonlinearity");
        }
        if !(self.tol > 0.0) {
            return fail("tol must be positive");
        }
        Ok(())
    }

    /// Experiments in order: SNR outer, system order inner.
    pub fn experiments(&self) -> Vec<ExperimentConfig> {
        self.snr
            .iter()
            .flat_map(|&snr| {
                self.nu.iter().map(move |&nu| ExperimentConfig {
                    nu,
                    snr,
                    samples: self.samples,
                    n: self.n,
                    p: self.p,
                    runs: self.runs,
                    seed: self.seed,
                })
            })
            .collect()
    }

    /// Text that [`Self::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: Vec<String>| v.join(", ");
        let _ = writeln!(
            s,
            "nu = {}",
            join(self.nu.iter().map(|v| v.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "snr = {}",
            join(self.snr.iter().map(|v| num(*v)).collect())
        );
        let _ = writeln!(s, "N = {}", self.samples);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "runs = {}", self.runs);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "tol = {}", num(self.tol));
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        s
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value.split(',').map(|v| v.trim().parse().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<CampaignConfig> {
        CampaignConfig::parse(Path::new("c.txt"), text)
    }

    #[test]
    fn defaults_mirror_the_eight_experiments() {
        let cfg = parse("").unwrap();
        let exps = cfg.experiments();
        assert_eq!(
            exps,
            kbh_core::datagen::standard_experiments()
                .into_iter()
                .map(|e| ExperimentConfig { runs: 100, ..e })
                .collect::<Vec<_>>()
        );
        assert_eq!(cfg.max_iter, 200);
        assert_eq!(cfg.tol, 1e-3);
    }

    #[test]
    fn parses_lists_and_comments() {
        let cfg =
            parse("# desk scale\nnu = 10\nsnr=10 # row 3\nruns = 20\nN = 300\nn=50\nseed = 9\n")
                .unwrap();
        assert_eq!(cfg.nu, vec![10]);
        assert_eq!(cfg.snr, vec![10.0]);
        assert_eq!((cfg.runs, cfg.samples, cfg.n, cfg.seed), (20, 300, 50, 9));
        assert_eq!(cfg.experiments().len(), 1);
    }

    #[test]
    fn text_round_trip() {
        let cfg = parse("nu = 4, 20\nsnr = 0.5, 1e6\ntol = 0.0001\n").unwrap();
        assert_eq!(parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("nu = 4\nbogus = 1\n", ":2:"),
            ("nu = 4\nnu = 8\n", ":2:"),
            ("\n\nsnr = ten\n", ":3:"),
            ("runs\n", ":1:"),
        ] {
            let msg = parse(text).unwrap_err().to_string();
            assert!(msg.contains(line), "{text:?}: {msg}");
        }
        assert!(parse("n = 600\n").is_err());
        assert!(parse("p = 3\n").is_err());
        assert!(parse("snr = 0\n").is_err());
    }
}
