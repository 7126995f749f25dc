use std::collections::BTreeMap;

use anyhow::{bail, Result};
use clap::ValueEnum;
use cyclescope::continuation::RotatedFamily;
use cyclescope::equation::PiecewiseEquation;
use cyclescope::field::{Domain, ScalarField};
use cyclescope::models::{
    abel_model, classify_regime, harvesting_family, harvesting_model, long_wait_family, mosquito_long_wait,
    mosquito_short_wait, AbelSpec, HarvestSpec, MosquitoSpec,
};
use serde_json::{json, Value};

use crate::Invalid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Harvesting,
    Abel,
    MosquitoLong,
    MosquitoShort,
}

pub struct Built {
    pub equation: PiecewiseEquation,
    pub thresholds: Value,
}

impl Preset {
    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Preset::Harvesting => &[("h", 0.1), ("r", 1.0), ("K", 1.0), ("T", 2.0), ("T1", 1.0)],
            Preset::Abel => &[
                ("a1", 1.0),
                ("b1", -3.0),
                ("c1", 2.0),
                ("a2", 1.0),
                ("b2", -3.0),
                ("c2", 2.0),
                ("T", 2.0),
                ("T1", 1.0),
            ],
            Preset::MosquitoLong => {
                &[("a", 2.0), ("mu", 1.0), ("xi", 1.0), ("c", 0.1), ("T", 1.5), ("T_bar", 1.0)]
            }
            Preset::MosquitoShort => {
                &[("a", 2.0), ("mu", 1.0), ("xi", 1.0), ("c", 0.09), ("T", 0.6), ("T_bar", 1.0)]
            }
        }
    }

    /// The parameter threshold, branch and sweep vary by default.
    pub fn default_parameter(self) -> &'static str {
        match self {
            Preset::Harvesting => "h",
            Preset::Abel => "c1",
            Preset::MosquitoLong | Preset::MosquitoShort => "c",
        }
    }

    /// Defaults overridden by `key=value` pairs.
    pub fn params(self, overrides: &[String]) -> Result<BTreeMap<String, f64>> {
        let mut p: BTreeMap<String, f64> = self.defaults().iter().map(|&(k, v)| (k.to_string(), v)).collect();
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!(Invalid(format!("parameter `{o}` is not key=value")));
            };
            let Some(slot) = p.get_mut(k.trim()) else {
                let known: Vec<&str> = self.defaults().iter().map(|d| d.0).collect();
                bail!(Invalid(format!("unknown parameter `{k}` for this preset, expected one of {known:?}")));
            };
            *slot = v.trim().parse().map_err(|_| Invalid(format!("parameter `{k}`: `{v}` is not a number")))?;
        }
        Ok(p)
    }

    pub fn build(self, p: &BTreeMap<String, f64>) -> Result<Built> {
        match self {
            Preset::Harvesting => {
                let spec = harvest_spec(p)?;
                let (equation, th) = harvesting_model(&spec)?;
                Ok(Built { equation, thresholds: serde_json::to_value(th)? })
            }
            Preset::Abel => {
                let (equation, det) = abel_model(&abel_spec(p))?;
                Ok(Built { equation, thresholds: json!({ "determinants": det }) })
            }
            Preset::MosquitoLong => {
                let spec = mosquito_spec(p);
                let (equation, th) = mosquito_long_wait(&spec)?;
                let regime = classify_regime(&spec)?;
                Ok(Built { equation, thresholds: json!({ "thresholds": th, "regime": regime }) })
            }
            Preset::MosquitoShort => {
                let spec = mosquito_spec(p);
                let (equation, th) = mosquito_short_wait(&spec)?;
                let regime = classify_regime(&spec)?;
                Ok(Built { equation, thresholds: json!({ "thresholds": th, "regime": regime }) })
            }
        }
    }

    /// Rotated family in the default parameter and the bracket holding its fold.
    pub fn family(self, p: &BTreeMap<String, f64>) -> Result<(RotatedFamily, (f64, f64))> {
        match self {
            Preset::Harvesting => {
                let spec = harvest_spec(p)?;
                let th = harvesting_model(&spec)?.1;
                Ok((harvesting_family(&spec)?, th.bracket))
            }
            Preset::MosquitoLong => {
                let spec = mosquito_spec(p);
                let th = mosquito_long_wait(&spec)?.1;
                Ok((long_wait_family(&spec)?, (th.g_star, th.c_star)))
            }
            _ => bail!(Invalid("continuation is available for the harvesting and mosquito-long presets".into())),
        }
    }
}

fn harvest_spec(p: &BTreeMap<String, f64>) -> Result<HarvestSpec> {
    let (r, k) = (p["r"], p["K"]);
    if !(r > 0.0 && k > 0.0) {
        bail!(Invalid(format!("r = {r} and K = {k} must be positive")));
    }
    let g = ScalarField::polynomial(&[0.0, r, -r / k], Domain::non_negative())?;
    Ok(HarvestSpec { g, h: p["h"], t: p["T"], t1: p["T1"] })
}

fn abel_spec(p: &BTreeMap<String, f64>) -> AbelSpec {
    AbelSpec::new([p["a1"], p["b1"], p["c1"]], [p["a2"], p["b2"], p["c2"]], p["T"], p["T1"])
}

fn mosquito_spec(p: &BTreeMap<String, f64>) -> MosquitoSpec {
    MosquitoSpec { a: p["a"], mu: p["mu"], xi: p["xi"], c: p["c"], t: p["T"], t_bar: p["T_bar"] }
}
