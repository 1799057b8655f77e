//! `section.key = value` overrides. A command-line flag beats the file,
//! which beats the built-in default.

use std::collections::BTreeMap;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};

use brainnoc::powermodel::PowerParams;

const SECTIONS: [&str; 7] = ["growth", "sweep", "communities", "map", "route", "sim", "power"];

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected key = value", i + 1);
            };
            let k = k.trim();
            let known = k == "seed" || k.split_once('.').is_some_and(|(s, _)| SECTIONS.contains(&s));
            if !known {
                bail!("line {}: unknown key `{k}`", i + 1);
            }
            if values.insert(k.to_string(), (i + 1, v.trim().to_string())).is_some() {
                bail!("line {}: `{k}` set twice", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|(line, v)| {
                v.parse()
                    .map_err(|_| anyhow!("line {line}: bad value `{v}` for `{key}`"))
            })
            .transpose()
    }

    pub fn value<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.optional(key)?.unwrap_or(default)),
        }
    }

    /// Power coefficients with every `power.*` key applied.
    pub fn power(&self) -> Result<PowerParams<f64>> {
        let mut p = PowerParams::default();
        for (k, (line, v)) in self.values.range("power.".to_string()..) {
            let Some(name) = k.strip_prefix("power.") else { break };
            let x: f64 = v.parse().map_err(|_| anyhow!("line {line}: bad number `{v}`"))?;
            p.set(name, x).map_err(|e| anyhow!("line {line}: {e}"))?;
        }
        p.validate()?;
        Ok(p)
    }
}
