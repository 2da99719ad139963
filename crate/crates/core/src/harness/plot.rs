use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use super::{HarnessError, Result};

/// Data series behind the figures; rendering is left to external tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    AccVsAlpha,
    AccVsThetaj,
    AccVsThetac,
    AccVsNl,
    EntropyVsThetac,
    AccVsEntropy,
}

impl PlotKind {
    pub const ALL: [PlotKind; 6] = [
        Self::AccVsAlpha,
        Self::AccVsThetaj,
        Self::AccVsThetac,
        Self::AccVsNl,
        Self::EntropyVsThetac,
        Self::AccVsEntropy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AccVsAlpha => "acc_vs_alpha",
            Self::AccVsThetaj => "acc_vs_thetaj",
            Self::AccVsThetac => "acc_vs_thetac",
            Self::AccVsNl => "acc_vs_nl",
            Self::EntropyVsThetac => "entropy_vs_thetac",
            Self::AccVsEntropy => "acc_vs_entropy",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HarnessError::Argument(format!("unknown plot kind '{s}'")))
    }
}

/// One point of a series: mean `y` at `x`, its spread and extremes over `count` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub group: String,
    pub x: f64,
    pub y: f64,
    pub spread: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub count: usize,
}

type Record = HashMap<String, String>;

fn field(r: &Record, name: &str) -> Result<Option<f64>> {
    match r.get(name).map(String::as_str) {
        None | Some("") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| HarnessError::Argument(format!("column {name}: '{v}' is not a number"))),
    }
}

fn need(r: &Record, name: &str) -> Result<f64> {
    field(r, name)?.ok_or_else(|| HarnessError::Argument(format!("input lacks column {name}")))
}

fn text(r: &Record, name: &str) -> String {
    r.get(name).cloned().unwrap_or_default()
}

/// `(group, x, y, own spread)`.
type Point = (String, f64, f64, Option<f64>);
/// `(x, y, own spread)` points per `(group, pairing key bits)`.
type Buckets = BTreeMap<(String, u64), Vec<(f64, f64, Option<f64>)>>;

/// One point extracted from an input row, or `None` to skip it.
fn extract(kind: PlotKind, r: &Record) -> Result<Option<Point>> {
    let series = || {
        let g = text(r, "group");
        if g.is_empty() {
            text(r, "config_descriptor")
        } else {
            g
        }
    };
    Ok(match kind {
        PlotKind::AccVsAlpha => Some((format!("range={}", text(r, "range")), need(r, "alpha")?, need(r, "eta")?, None)),
        PlotKind::AccVsThetaj => Some((format!("range={}", text(r, "range")), need(r, "theta_j")?, need(r, "eta")?, None)),
        PlotKind::AccVsThetac => Some((series(), need(r, "theta_c")?, need(r, "eta")?, None)),
        PlotKind::AccVsNl => Some((format!("theta_c={}", text(r, "theta_c")), need(r, "n_l")?, need(r, "eta")?, None)),
        PlotKind::EntropyVsThetac => match field(r, "mean_entropy_bits")? {
            Some(s) => Some((series(), need(r, "theta_c")?, s, field(r, "std_entropy_bits")?)),
            None => None,
        },
        PlotKind::AccVsEntropy => match field(r, "mean_entropy_bits")? {
            Some(s) => Some((series(), s, need(r, "eta")?, None)),
            None => None,
        },
    })
}

/// Reads a result CSV and emits one aggregated row per `(group, x)`.
///
/// For `acc_vs_entropy` rows are first paired by `θ_c`, so each output point
/// is the mean `S̄` and mean `η` of one grid value.
pub fn emit_plot_data<R: Read>(results: R, kind: PlotKind) -> Result<Vec<PlotRow>> {
    let mut reader = csv::Reader::from_reader(results);
    let headers = reader.headers()?.clone();
    let mut buckets = Buckets::new();
    for rec in reader.records() {
        let rec = rec?;
        let r: Record = headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect();
        let Some((group, x, y, own)) = extract(kind, &r)? else { continue };
        // Pairing key: θ_c for the entropy scatter, x otherwise.
        let key = if kind == PlotKind::AccVsEntropy { need(&r, "theta_c")? } else { x };
        buckets.entry((group, key.to_bits())).or_default().push((x, y, own));
    }
    let mut rows: Vec<PlotRow> = buckets
        .into_iter()
        .map(|((group, _), pts)| {
            let n = pts.len() as f64;
            let x = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let y = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let spread = match pts.as_slice() {
                [(_, _, Some(own))] => *own,
                _ => (pts.iter().map(|p| (p.1 - y).powi(2)).sum::<f64>() / n).sqrt(),
            };
            PlotRow {
                group,
                x,
                y,
                spread,
                y_min: pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
                y_max: pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
                count: pts.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.group.cmp(&b.group).then(a.x.total_cmp(&b.x)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = "\
group,theta_c,eta,n_l,mean_entropy_bits,std_entropy_bits,alpha,range
bx(1),0.5,0.90,0,0.2,0.01,1.5,4
bx(1),1.0,0.92,0,0.4,0.02,1.5,4
bx(2),0.5,0.91,0,0.3,0.01,1.5,4
bx(2),0.5,0.93,0,0.5,0.01,1.5,4
";

    #[test]
    fn series_per_group() {
        let rows = emit_plot_data(SWEEP.as_bytes(), PlotKind::AccVsThetac).unwrap();
        let groups: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, vec!["bx(1)", "bx(1)", "bx(2)"]);
        let last = &rows[2];
        assert!((last.y - 0.92).abs() < 1e-12 && (last.spread - 0.01).abs() < 1e-12);
        assert_eq!((last.y_min, last.y_max, last.count), (0.91, 0.93, 2));
    }

    #[test]
    fn entropy_pairs_and_own_spread() {
        let rows = emit_plot_data(SWEEP.as_bytes(), PlotKind::AccVsEntropy).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[2].x - 0.4).abs() < 1e-12 && (rows[2].y - 0.92).abs() < 1e-12);
        let rows = emit_plot_data(SWEEP.as_bytes(), PlotKind::EntropyVsThetac).unwrap();
        assert_eq!(rows[0].spread, 0.01);
    }

    #[test]
    fn empty_input_and_unknown_kind() {
        assert!(emit_plot_data("group,theta_c,eta\n".as_bytes(), PlotKind::AccVsThetac).unwrap().is_empty());
        assert!(emit_plot_data("".as_bytes(), PlotKind::AccVsNl).unwrap().is_empty());
        assert!(matches!("acc_vs_beta".parse::<PlotKind>(), Err(HarnessError::Argument(_))));
        for k in PlotKind::ALL {
            assert_eq!(k.as_str().parse::<PlotKind>().unwrap(), k);
        }
        assert!(emit_plot_data("theta_c\n0.1\n".as_bytes(), PlotKind::AccVsThetac).is_err());
    }
}
