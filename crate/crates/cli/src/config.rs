//! Run configuration: a flat `key = value` text format with sections.
//!
//! ```text
//! file    := line*
//! line    := blank | comment | section | pair
//! comment := '#' <any text>
//! section := '[' name ']'
//! pair    := key '=' value            (value may carry a trailing '# comment')
//! list    := value (',' value)*
//! ```
//!
//! Known sections and keys:
//!
//! | section  | keys |
//! |----------|------|
//! | `domain` | `n`, `boundary` (`sphere` or `interval`), `r`, `left`, `right`, `eps`, `nodes` (alias `N`) |
//! | `flow`   | `sigma`, `scheme` (`semi_implicit` or `explicit_rk2`), `dt`, `cfl_safety`, `t_max`, `residual_tol`, `diag_every`, `initial` (`cap`, `perturbed_cap` or `cmc`), `bump`, `snapshot_times` |
//! | `cmc`    | `sigma0`, `step`, `min_step`, `newton_tol`, `update_tol`, `max_newton_iters`, `max_halvings` |
//! | `sweep`  | `eps_list`, `nodes_list` |
//!
//! Key names are unique across sections, so a key may also appear before the
//! first section header or be overridden as `key=value` or `section.key=value`.
//! Setting a key twice in one file is an error; overrides replace file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use mmcf::cmc::ContinuationPlan;
use mmcf::flow::{DtPolicy, FlowConfig, InitialShape, Scheme};
use mmcf::{Boundary, Domain};
use serde::Serialize;

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "domain",
        &["n", "boundary", "r", "left", "right", "eps", "nodes"],
    ),
    (
        "flow",
        &[
            "sigma",
            "scheme",
            "dt",
            "cfl_safety",
            "t_max",
            "residual_tol",
            "diag_every",
            "initial",
            "bump",
            "snapshot_times",
        ],
    ),
    (
        "cmc",
        &[
            "sigma0",
            "step",
            "min_step",
            "newton_tol",
            "update_tol",
            "max_newton_iters",
            "max_halvings",
        ],
    ),
    ("sweep", &["eps_list", "nodes_list"]),
];

fn canonical(key: &str) -> &str {
    if key == "N" {
        "nodes"
    } else {
        key
    }
}

fn section_of(key: &str) -> Option<&'static str> {
    SCHEMA
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(section, _)| *section)
}

/// Raw key/value pairs, keyed by the canonical key name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {lineno}: unterminated section header"))?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    bail!("line {lineno}: unknown section `{name}`");
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {lineno}: expected `key = value`, found `{line}`"))?;
            let key = canonical(key.trim());
            let home =
                section_of(key).ok_or_else(|| anyhow!("line {lineno}: unknown key `{key}`"))?;
            if let Some(s) = &section {
                if s != home {
                    bail!("line {lineno}: key `{key}` belongs to section [{home}], not [{s}]");
                }
            }
            if raw
                .values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                bail!("line {lineno}: key `{key}` is set twice");
            }
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Applies one `key=value` or `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
        let key = key.trim();
        let (section, name) = match key.split_once('.') {
            Some((s, k)) => (Some(s), canonical(k)),
            None => (None, canonical(key)),
        };
        let home = section_of(name).ok_or_else(|| anyhow!("unknown key `{name}`"))?;
        if let Some(s) = section {
            if s != home {
                bail!("key `{name}` belongs to section [{home}], not [{s}]");
            }
        }
        self.values
            .insert(name.to_string(), value.trim().to_string());
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| anyhow!("invalid value `{s}` for key `{key}`: {e}"))
            })
            .transpose()
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(s) = self.values.get(key) else {
            return Ok(None);
        };
        s.split(',')
            .map(str::trim)
            .filter(|item| !item.is_empty())
            .map(|item| {
                item.parse::<T>()
                    .map_err(|e| anyhow!("invalid entry `{item}` in key `{key}`: {e}"))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head)
}

/// Typed settings shared by all subcommands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub flow: FlowConfig,
    pub plan: ContinuationPlan,
    pub initial: InitialShape,
    pub snapshot_times: Vec<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub nodes_list: Option<Vec<usize>>,
}

impl Settings {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let n: usize = raw.get_or("n", 2)?;
        let eps: f64 = raw.get_or("eps", 0.05)?;
        let boundary = match raw.get_or::<String>("boundary", "sphere".into())?.as_str() {
            "sphere" => Boundary::Sphere {
                r: raw.get_or("r", 1.0)?,
            },
            "interval" => Boundary::Interval {
                left: raw
                    .get("left")?
                    .ok_or_else(|| anyhow!("key `left` is required for boundary = interval"))?,
                right: raw
                    .get("right")?
                    .ok_or_else(|| anyhow!("key `right` is required for boundary = interval"))?,
            },
            other => {
                bail!("invalid value `{other}` for key `boundary`: expected sphere or interval")
            }
        };
        let domain = Domain { n, boundary, eps };
        let nodes: usize = raw.get_or("nodes", 200)?;
        let sigma: f64 = raw.get_or("sigma", 0.5)?;

        let mut flow = FlowConfig::new(sigma, domain, nodes);
        flow.scheme = match raw
            .get_or::<String>("scheme", "semi_implicit".into())?
            .as_str()
        {
            "semi_implicit" => Scheme::SemiImplicit,
            "explicit_rk2" => Scheme::ExplicitRk2,
            other => bail!(
                "invalid value `{other}` for key `scheme`: expected semi_implicit or explicit_rk2"
            ),
        };
        flow.dt = match (raw.get::<f64>("dt")?, raw.get::<f64>("cfl_safety")?) {
            (Some(_), Some(_)) => bail!("keys `dt` and `cfl_safety` are mutually exclusive"),
            (Some(dt), None) => DtPolicy::Fixed { dt },
            (None, Some(safety)) => DtPolicy::Cfl { safety },
            (None, None) => flow.dt,
        };
        flow.t_max = raw.get_or("t_max", flow.t_max)?;
        flow.residual_tol = raw.get_or("residual_tol", flow.residual_tol)?;
        flow.diag_every = raw.get_or("diag_every", flow.diag_every)?;
        flow.record_fields = false;

        let defaults = ContinuationPlan::new(raw.get_or("sigma0", 0.9)?);
        let plan = ContinuationPlan {
            step: raw.get_or("step", defaults.step)?,
            min_step: raw.get_or("min_step", defaults.min_step)?,
            newton_tol: raw.get_or("newton_tol", defaults.newton_tol)?,
            update_tol: raw.get_or("update_tol", defaults.update_tol)?,
            max_newton_iters: raw.get_or("max_newton_iters", defaults.max_newton_iters)?,
            max_halvings: raw.get_or("max_halvings", defaults.max_halvings)?,
            ..defaults
        };

        let initial = match raw.get_or::<String>("initial", "cmc".into())?.as_str() {
            "cap" => InitialShape::Cap,
            "perturbed_cap" => InitialShape::PerturbedCap {
                amplitude: raw.get_or("bump", 0.05)?,
            },
            "cmc" => InitialShape::Cmc {
                sigma0: plan.sigma_target,
            },
            other => bail!(
                "invalid value `{other}` for key `initial`: expected cap, perturbed_cap or cmc"
            ),
        };

        let mut snapshot_times: Vec<f64> = raw.list("snapshot_times")?.unwrap_or_default();
        if snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            bail!("invalid value for key `snapshot_times`: times must be >= 0");
        }
        snapshot_times.sort_by(f64::total_cmp);
        snapshot_times.dedup();

        Ok(Settings {
            flow,
            plan,
            initial,
            snapshot_times,
            eps_list: raw.list("eps_list")?,
            nodes_list: raw.list("nodes_list")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_bare_keys() {
        let raw = RawConfig::parse(
            "sigma = 0.3  # bare key\n\n[domain]\nN = 100\neps=0.1\n[flow]\nsnapshot_times = 1, 0.5\n",
        )
        .unwrap();
        let s = Settings::from_raw(&raw).unwrap();
        assert_eq!(s.flow.sigma, 0.3);
        assert_eq!(s.flow.nodes, 100);
        assert_eq!(s.flow.domain.eps, 0.1);
        assert_eq!(s.snapshot_times, vec![0.5, 1.0]);
    }

    #[test]
    fn errors_name_the_key() {
        let err = |text: &str| format!("{:#}", RawConfig::parse(text).unwrap_err());
        assert!(err("[flow]\nsigmaa = 1\n").contains("`sigmaa`"));
        assert!(err("[domain]\nsigma = 1\n").contains("`sigma`"));
        assert!(err("sigma = 1\nsigma = 2\n").contains("`sigma`"));
        let raw = RawConfig::parse("t_max = soon\n").unwrap();
        assert!(format!("{:#}", Settings::from_raw(&raw).unwrap_err()).contains("`t_max`"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut raw = RawConfig::parse("[flow]\nsigma = 0.3\n").unwrap();
        raw.set("flow.sigma=0.4").unwrap();
        raw.set("N=50").unwrap();
        assert!(raw.set("cmc.sigma=0.1").is_err());
        let s = Settings::from_raw(&raw).unwrap();
        assert_eq!((s.flow.sigma, s.flow.nodes), (0.4, 50));
    }

    #[test]
    fn dt_and_cfl_are_exclusive() {
        let raw = RawConfig::parse("dt = 1e-3\ncfl_safety = 0.5\n").unwrap();
        assert!(Settings::from_raw(&raw).is_err());
    }

    #[test]
    fn empty_list_parses_to_empty() {
        let raw = RawConfig::parse("[sweep]\neps_list =\n").unwrap();
        assert_eq!(Settings::from_raw(&raw).unwrap().eps_list, Some(vec![]));
    }
}
