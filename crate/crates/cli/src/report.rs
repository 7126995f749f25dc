use anyhow::Result;
use cyclescope::cycles::{LimitCycle, PartitionReport};
use cyclescope::equation::{ModelFile, NormalizedEquation};
use cyclescope::poincare::{derivative_discrete, derivative_integral, displacement, knots};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub equation: ModelFile,
    pub annulus: bool,
    pub partition: Option<PartitionReport>,
    pub cycles: Vec<LimitCycle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Value>,
    pub verification: Verification,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Verification {
    pub samples: usize,
    pub checked: usize,
    pub escaped: usize,
    pub escaped_fraction: f64,
    pub max_disagreement: f64,
    /// Largest `|P' - 1|` seen; zero on a periodic annulus.
    pub max_multiplier_offset: f64,
}

/// Pairwise disagreement of the available derivative routes at `x0`, `None` when `x0` escapes.
pub fn route_check(eq: &NormalizedEquation, x0: f64) -> Option<(f64, f64)> {
    let k = knots(eq, x0).ok()?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut firsts = Vec::new();
    let mut seconds = Vec::new();
    if let Ok(j) = derivative_integral(eq, x0, 2) {
        firsts.push(j.d1);
        seconds.extend(j.d2);
    }
    if k.in_v {
        if let Ok(j) = derivative_discrete(eq, &k, 2) {
            firsts.push(j.d1);
            seconds.extend(j.d2);
        }
    }
    if let Some((d1, d2)) = settled_difference(|x| displacement(eq, x).ok(), x0) {
        firsts.push(d1 + 1.0);
        seconds.push(d2);
    }
    let first = *firsts.first()?;
    let mut worst: f64 = 0.0;
    for v in [&firsts, &seconds] {
        for a in v.iter() {
            for b in v.iter() {
                worst = worst.max(rel(*a, *b));
            }
        }
    }
    Some((worst, (first - 1.0).abs()))
}

/// Five-point differences over halving steps, keeping the estimate whose neighbour agrees best.
fn settled_difference<F: Fn(f64) -> Option<f64>>(f: F, x: f64) -> Option<(f64, f64)> {
    let stencil = |h: f64| -> Option<(f64, f64)> {
        let s = [f(x - 2.0 * h)?, f(x - h)?, f(x)?, f(x + h)?, f(x + 2.0 * h)?];
        Some((
            (s[0] - 8.0 * s[1] + 8.0 * s[3] - s[4]) / (12.0 * h),
            (-s[0] + 16.0 * s[1] - 30.0 * s[2] + 16.0 * s[3] - s[4]) / (12.0 * h * h),
        ))
    };
    let mut best: Option<((f64, f64), f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut h = 4e-3;
    while h > 1e-5 {
        let est = stencil(h);
        if let (Some(p), Some(e)) = (prev, est) {
            let spread = ((e.0 - p.0) / e.0.abs().max(1.0)).abs() + ((e.1 - p.1) / e.1.abs().max(1.0)).abs();
            if best.is_none_or(|(_, s)| spread < s) {
                best = Some((e, spread));
            }
        }
        prev = est;
        h *= 0.5;
    }
    best.map(|(e, _)| e)
}

pub fn cycles_csv(cycles: &[LimitCycle]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x0", "kind", "multiplicity", "stability", "d1", "d2", "d3", "route"])?;
    for c in cycles {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            c.x0.to_string(),
            json_tag(&c.kind)?,
            c.multiplicity.to_string(),
            json_tag(&c.stability)?,
            c.jet.d1.to_string(),
            opt(c.jet.d2),
            opt(c.jet.d3),
            json_tag(&c.jet.route)?,
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// The serde name of a unit enum variant.
pub fn json_tag<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_value(v)?.as_str().unwrap_or_default().to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub status: String,
    pub count: Option<u32>,
    pub x0: Vec<f64>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "status", "count", "x0"])?;
    for r in rows {
        let xs: Vec<String> = r.x0.iter().map(|x| x.to_string()).collect();
        w.write_record([
            r.alpha.to_string(),
            r.status.clone(),
            r.count.map(|c| c.to_string()).unwrap_or_default(),
            xs.join(";"),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
