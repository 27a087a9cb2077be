use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use super::run::{read_ndjson, SummaryRecord};
use crate::diagnostics::{log_log_fit, RateFit};
use crate::error::{Error, Result};

/// Log-log regression of one estimand against the particle count.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub system: String,
    pub estimand: String,
    /// Points with a positive finite value.
    pub points: usize,
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summaries: Vec<SummaryRecord>,
    pub rates: Vec<RateRow>,
    /// `Some(true)` when every coupled run kept all distances at zero.
    pub coupling_identity: Option<bool>,
}

impl Report {
    /// Human-readable flags.
    pub fn flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.coupling_identity {
            Some(true) => out.push("coupling identity verified".to_string()),
            Some(false) => out.push("coupling distances nonzero".to_string()),
            None => {}
        }
        let censored: usize = self.summaries.iter().map(|s| s.censored).sum();
        if censored > 0 {
            out.push(format!("{censored} censored replicas"));
        }
        out
    }
}

#[derive(Serialize)]
struct RateCsv<'a> {
    system: &'a str,
    estimand: &'a str,
    points: usize,
    slope: Option<f64>,
    slope_error: Option<f64>,
    intercept: Option<f64>,
    r_squared: Option<f64>,
}

/// Fits every estimand of `summaries` against `N`.
pub fn rate_table(summaries: &[SummaryRecord]) -> Vec<RateRow> {
    let systems: BTreeSet<&str> = summaries.iter().map(|s| s.system.as_str()).collect();
    let mut rows = Vec::new();
    for system in systems {
        let group: Vec<&SummaryRecord> = summaries.iter().filter(|s| s.system == system).collect();
        let keys: BTreeSet<&String> = group.iter().flat_map(|s| s.estimands.keys()).collect();
        for key in keys.into_iter().filter(|k| !k.ends_with("_se")) {
            let (x, y): (Vec<f64>, Vec<f64>) = group
                .iter()
                .filter_map(|s| s.estimands.get(key).map(|v| (s.particles as f64, *v)))
                .filter(|(_, v)| *v > 0.0 && v.is_finite())
                .unzip();
            let distinct = x.windows(2).any(|w| w[0] != w[1]);
            let fit = if x.len() >= 2 && distinct {
                log_log_fit(&x, &y).ok()
            } else {
                None
            };
            rows.push(RateRow {
                system: system.to_string(),
                estimand: key.clone(),
                points: x.len(),
                fit,
            });
        }
    }
    rows
}

/// Aggregates `summary.ndjson` of a run directory into `summary.csv` and
/// `rates.csv`.
pub fn report(dir: &Path) -> Result<Report> {
    let summaries: Vec<SummaryRecord> = read_ndjson(&dir.join("summary.ndjson"))?;
    if summaries.is_empty() {
        return Err(Error::InsufficientData(format!("{}: empty summary", dir.display())));
    }
    let csv_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: csv::Error| Error::Format(format!("{}: {e}", p.display()))
    };

    let path = dir.join("summary.csv");
    let keys: BTreeSet<&String> = summaries.iter().flat_map(|s| s.estimands.keys()).collect();
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let mut header: Vec<String> = ["system", "particles", "eta", "gamma", "replicas", "censored", "coupling_identity"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(keys.iter().map(|k| k.to_string()));
    w.write_record(&header).map_err(csv_err(&path))?;
    for s in &summaries {
        let mut row = vec![
            s.system.clone(),
            s.particles.to_string(),
            s.eta.to_string(),
            s.gamma.to_string(),
            s.replicas.to_string(),
            s.censored.to_string(),
            s.coupling_identity.map_or(String::new(), |b| b.to_string()),
        ];
        row.extend(keys.iter().map(|k| s.estimands.get(*k).map_or(String::new(), |v| v.to_string())));
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let rates = rate_table(&summaries);
    let path = dir.join("rates.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for r in &rates {
        w.serialize(RateCsv {
            system: &r.system,
            estimand: &r.estimand,
            points: r.points,
            slope: r.fit.as_ref().map(|f| f.slope),
            slope_error: r.fit.as_ref().map(|f| f.slope_error),
            intercept: r.fit.as_ref().map(|f| f.intercept),
            r_squared: r.fit.as_ref().map(|f| f.r_squared),
        })
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let coupled: Vec<bool> = summaries.iter().filter_map(|s| s.coupling_identity).collect();
    let coupling_identity = (!coupled.is_empty()).then(|| coupled.iter().all(|b| *b));
    Ok(Report {
        summaries,
        rates,
        coupling_identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn summary(n: usize, v: f64) -> SummaryRecord {
        SummaryRecord {
            system: "lln".into(),
            particles: n,
            eta: 1.0,
            gamma: 1.0,
            replicas: 4,
            censored: 0,
            estimands: BTreeMap::from([("rms".to_string(), v), ("rms_se".to_string(), 0.1)]),
            coupling_identity: None,
        }
    }

    #[test]
    fn one_rate_row_per_estimand() {
        let s: Vec<_> = [128, 256, 512, 1024]
            .iter()
            .map(|&n| summary(n, 3.0 / (n as f64).sqrt()))
            .collect();
        let rows = rate_table(&s);
        assert_eq!(rows.len(), 1);
        let fit = rows[0].fit.as_ref().unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
    }
}
