//! Inter-module connectivity: boundary-crossing ranges, arbitrary edge sets and
//! one-to-one parallel masks, plus their enumeration and text encoding.
//!
//! Text encoding (used in configs and result CSVs):
//!
//! | form                      | meaning                                                        |
//! |---------------------------|----------------------------------------------------------------|
//! | `none`                    | no inter-module edges                                          |
//! | `bx:<R×>`                 | all `(k, l)` across the two-module boundary with `\|k-l\| ≤ R×` |
//! | `arb:<R×>+<k-l,k-l,…>`    | the `bx:<R×>` set plus extra cross-module edges                |
//! | `par:<mask>`              | two modules; bit `i` (leftmost is 1) is edge `(i, i+n₀)`       |
//! | `par:<maskA>\|<maskB>`    | three modules; one mask per neighbouring pair                  |

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::coupling::{validate_edges, InterEdge, ModuleLayout};
use super::{ReservoirError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Connectivity {
    None,
    BoundaryCross(usize),
    Arbitrary {
        r_cross: usize,
        extra: Vec<(usize, usize)>,
    },
    /// One mask per neighbouring module pair; `mask[i]` activates edge `(i+1, i+1+n₀)`
    /// shifted by the pair's offsets.
    Parallel(Vec<Vec<bool>>),
}

/// Family label used for grouping sweep rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeFamily {
    None,
    BoundaryCross,
    Arbitrary,
    Parallel,
}

impl SchemeFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeFamily::None => "none",
            SchemeFamily::BoundaryCross => "bx",
            SchemeFamily::Arbitrary => "arb",
            SchemeFamily::Parallel => "par",
        }
    }
}

/// `(k, l)` pairs across a two-module boundary with `|k - l| ≤ r_cross`.
fn boundary_pairs(layout: &ModuleLayout, r_cross: usize) -> Result<Vec<(usize, usize)>> {
    if layout.n_modules() != 2 {
        return Err(ReservoirError::Layout(format!(
            "boundary-crossing edges need exactly 2 modules, layout is {layout}"
        )));
    }
    let mut pairs = Vec::new();
    for k in layout.qubits(0) {
        for l in layout.qubits(1) {
            if l - k <= r_cross {
                pairs.push((k, l));
            }
        }
    }
    Ok(pairs)
}

/// All boundary-crossing edges of range `r_cross` on a two-module layout.
pub fn boundary_cross_edges(
    layout: &ModuleLayout,
    r_cross: usize,
    theta_c: f64,
) -> Result<Vec<InterEdge>> {
    Ok(boundary_pairs(layout, r_cross)?
        .into_iter()
        .map(|(k, l)| InterEdge { k, l, theta_c })
        .collect())
}

impl Connectivity {
    pub fn family(&self) -> SchemeFamily {
        match self {
            Connectivity::None => SchemeFamily::None,
            Connectivity::BoundaryCross(_) => SchemeFamily::BoundaryCross,
            Connectivity::Arbitrary { .. } => SchemeFamily::Arbitrary,
            Connectivity::Parallel(_) => SchemeFamily::Parallel,
        }
    }

    /// `R×` for boundary and arbitrary schemes, 0 otherwise.
    pub fn r_cross(&self) -> usize {
        match self {
            Connectivity::BoundaryCross(r) | Connectivity::Arbitrary { r_cross: r, .. } => *r,
            _ => 0,
        }
    }

    /// `n_a`: extra arbitrary edges outside the `R×` set.
    pub fn n_arbitrary(&self) -> usize {
        match self {
            Connectivity::Arbitrary { extra, .. } => extra.len(),
            _ => 0,
        }
    }

    /// `n_ℓ`: active parallel edges.
    pub fn n_parallel(&self) -> usize {
        match self {
            Connectivity::Parallel(masks) => masks.iter().flatten().filter(|&&b| b).count(),
            _ => 0,
        }
    }

    /// Whether every neighbouring module pair carries at least one edge.
    pub fn is_connected(&self, layout: &ModuleLayout) -> bool {
        let Ok(edges) = self.edges(layout, 1.0) else {
            return false;
        };
        (0..layout.n_modules().saturating_sub(1)).all(|m| {
            edges.iter().any(|e| {
                layout.module_of(e.k) == Some(m) && layout.module_of(e.l) == Some(m + 1)
            })
        })
    }

    /// Expands the scheme into validated edges carrying a uniform `theta_c`.
    pub fn edges(&self, layout: &ModuleLayout, theta_c: f64) -> Result<Vec<InterEdge>> {
        let pairs: Vec<(usize, usize)> = match self {
            Connectivity::None => Vec::new(),
            Connectivity::BoundaryCross(r) => boundary_pairs(layout, *r)?,
            Connectivity::Arbitrary { r_cross, extra } => {
                let mut pairs = if *r_cross > 0 || layout.n_modules() == 2 {
                    boundary_pairs(layout, *r_cross)?
                } else {
                    Vec::new()
                };
                for &(k, l) in extra {
                    if pairs.contains(&(k, l)) {
                        return Err(ReservoirError::Edge {
                            k,
                            l,
                            reason: format!("already implied by R× = {r_cross}"),
                        });
                    }
                    pairs.push((k, l));
                }
                pairs
            }
            Connectivity::Parallel(masks) => {
                if masks.len() + 1 != layout.n_modules() {
                    return Err(ReservoirError::Layout(format!(
                        "{} parallel masks do not fit layout {layout}",
                        masks.len()
                    )));
                }
                let mut pairs = Vec::new();
                for (m, mask) in masks.iter().enumerate() {
                    let width = layout.sizes()[m].min(layout.sizes()[m + 1]);
                    if mask.len() != width {
                        return Err(ReservoirError::Layout(format!(
                            "parallel mask {m} has {} bits, modules {} and {} allow {width}",
                            mask.len(),
                            m + 1,
                            m + 2
                        )));
                    }
                    let (a, b) = (layout.offset(m), layout.offset(m + 1));
                    for (i, _) in mask.iter().enumerate().filter(|(_, &on)| on) {
                        pairs.push((a + i + 1, b + i + 1));
                    }
                }
                pairs
            }
        };
        let edges: Vec<InterEdge> = pairs
            .into_iter()
            .map(|(k, l)| InterEdge { k, l, theta_c })
            .collect();
        validate_edges(layout, &edges)?;
        Ok(edges)
    }
}

fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_mask(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|ch| match ch {
            '1' => Ok(true),
            '0' => Ok(false),
            _ => Err(ReservoirError::Parse(format!("bad mask character {ch:?} in {s:?}"))),
        })
        .collect()
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connectivity::None => write!(f, "none"),
            Connectivity::BoundaryCross(r) => write!(f, "bx:{r}"),
            Connectivity::Arbitrary { r_cross, extra } => {
                let list: Vec<String> = extra.iter().map(|(k, l)| format!("{k}-{l}")).collect();
                write!(f, "arb:{r_cross}+{}", list.join(","))
            }
            Connectivity::Parallel(masks) => {
                let list: Vec<String> = masks.iter().map(|m| mask_string(m)).collect();
                write!(f, "par:{}", list.join("|"))
            }
        }
    }
}

impl FromStr for Connectivity {
    type Err = ReservoirError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ReservoirError::Parse(format!("unrecognised connectivity {s:?}"));
        if s == "none" {
            return Ok(Connectivity::None);
        }
        let (tag, body) = s.split_once(':').ok_or_else(bad)?;
        match tag {
            "bx" => Ok(Connectivity::BoundaryCross(body.parse().map_err(|_| bad())?)),
            "arb" => {
                let (r, list) = body.split_once('+').ok_or_else(bad)?;
                let r_cross = r.parse().map_err(|_| bad())?;
                let extra = list
                    .split(',')
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        let (k, l) = p.split_once('-').ok_or_else(bad)?;
                        Ok((k.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Connectivity::Arbitrary { r_cross, extra })
            }
            "par" => Ok(Connectivity::Parallel(
                body.split('|').map(parse_mask).collect::<Result<_>>()?,
            )),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Connectivity {
    type Error = ReservoirError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Connectivity> for String {
    fn from(c: Connectivity) -> Self {
        c.to_string()
    }
}

fn mask_from_bits(bits: usize, width: usize) -> Vec<bool> {
    // Leftmost character is qubit 1, i.e. the most significant bit of `bits`.
    (0..width).map(|i| bits >> (width - 1 - i) & 1 == 1).collect()
}

/// Every subset of one-to-one parallel edges on equal-size modules (m = 2 or 3).
pub fn enumerate_parallel_configs(layout: &ModuleLayout) -> Result<Vec<Connectivity>> {
    let n0 = layout.uniform_size().ok_or_else(|| {
        ReservoirError::Layout(format!("parallel enumeration needs equal module sizes, got {layout}"))
    })?;
    let pairs = layout.n_modules() - 1;
    if !(1..=2).contains(&pairs) {
        return Err(ReservoirError::Layout(format!(
            "parallel enumeration supports 2 or 3 modules, got {layout}"
        )));
    }
    let per_pair = 1usize << n0;
    let total = per_pair.pow(pairs as u32);
    Ok((0..total)
        .map(|idx| {
            let masks = (0..pairs)
                .rev()
                .map(|p| mask_from_bits(idx / per_pair.pow(p as u32) % per_pair, n0))
                .collect();
            Connectivity::Parallel(masks)
        })
        .collect())
}

/// Every choice of `n_a` extra cross-module edges outside the `R×` set, on two modules.
pub fn enumerate_arbitrary_configs(
    layout: &ModuleLayout,
    r_cross: usize,
    n_a: usize,
) -> Result<Vec<Connectivity>> {
    let implied = boundary_pairs(layout, r_cross)?;
    let candidates: Vec<(usize, usize)> = layout
        .qubits(0)
        .flat_map(|k| layout.qubits(1).map(move |l| (k, l)))
        .filter(|p| !implied.contains(p))
        .collect();
    if n_a > candidates.len() {
        return Err(ReservoirError::Count {
            requested: n_a,
            available: candidates.len(),
        });
    }
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = (0..n_a).collect();
    loop {
        out.push(Connectivity::Arbitrary {
            r_cross,
            extra: chosen.iter().map(|&i| candidates[i]).collect(),
        });
        // Advance to the next combination in lexicographic order.
        let Some(pos) = (0..n_a).rev().find(|&i| chosen[i] < candidates.len() - n_a + i) else {
            break;
        };
        chosen[pos] += 1;
        for i in pos + 1..n_a {
            chosen[i] = chosen[i - 1] + 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn two() -> ModuleLayout {
        ModuleLayout::new(vec![5, 5]).unwrap()
    }

    fn pairs(edges: &[InterEdge]) -> Vec<(usize, usize)> {
        edges.iter().map(|e| (e.k, e.l)).collect()
    }

    #[test]
    fn boundary_cross_counts() {
        let layout = two();
        assert!(boundary_cross_edges(&layout, 0, 0.5).unwrap().is_empty());
        assert_eq!(pairs(&boundary_cross_edges(&layout, 1, 0.5).unwrap()), vec![(5, 6)]);
        let mut e = pairs(&boundary_cross_edges(&layout, 2, 0.5).unwrap());
        e.sort();
        assert_eq!(e, vec![(4, 6), (5, 6), (5, 7)]);
        for (r, n_cross) in [(0, 0), (1, 1), (2, 3), (3, 6), (4, 10)] {
            assert_eq!(boundary_cross_edges(&layout, r, 0.1).unwrap().len(), n_cross);
            assert_eq!(n_cross, r * (r + 1) / 2);
        }
        let three = ModuleLayout::new(vec![5, 5, 5]).unwrap();
        assert!(matches!(
            boundary_cross_edges(&three, 1, 0.1),
            Err(ReservoirError::Layout(_))
        ));
    }

    #[test]
    fn parallel_enumeration_two_modules() {
        let configs = enumerate_parallel_configs(&two()).unwrap();
        assert_eq!(configs.len(), 32);
        for n_l in 0..=5 {
            let count = configs.iter().filter(|c| c.n_parallel() == n_l).count();
            assert_eq!(count, binomial(5, n_l));
        }
        assert_eq!(configs.iter().filter(|c| c.n_parallel() == 0).count(), 1);
        assert_eq!(configs[16].to_string(), "par:10000");
        assert_eq!(
            pairs(&configs[16].edges(&two(), 0.3).unwrap()),
            vec![(1, 6)]
        );
    }

    #[test]
    fn parallel_enumeration_three_modules() {
        let layout = ModuleLayout::new(vec![5, 5, 5]).unwrap();
        let configs = enumerate_parallel_configs(&layout).unwrap();
        assert_eq!(configs.len(), 1024);
        let connected = configs.iter().filter(|c| c.is_connected(&layout)).count();
        assert_eq!(connected, 961);
        assert_eq!(configs.len() - connected, 63);
        let c: Connectivity = "par:00001|10000".parse().unwrap();
        assert_eq!(pairs(&c.edges(&layout, 0.1).unwrap()), vec![(5, 10), (6, 11)]);
        assert!(c.is_connected(&layout));
        assert!(enumerate_parallel_configs(&ModuleLayout::new(vec![5, 4]).unwrap()).is_err());
        assert!(enumerate_parallel_configs(&ModuleLayout::new(vec![5]).unwrap()).is_err());
    }

    #[test]
    fn arbitrary_enumeration_counts() {
        let layout = two();
        assert_eq!(enumerate_arbitrary_configs(&layout, 0, 1).unwrap().len(), 25);
        assert_eq!(enumerate_arbitrary_configs(&layout, 1, 1).unwrap().len(), 24);
        assert_eq!(enumerate_arbitrary_configs(&layout, 2, 0).unwrap().len(), 1);
        for n_a in 0..=4 {
            assert_eq!(
                enumerate_arbitrary_configs(&layout, 0, n_a).unwrap().len(),
                binomial(25, n_a)
            );
        }
        assert_eq!(
            enumerate_arbitrary_configs(&layout, 2, 22).unwrap().len(),
            1
        );
        assert!(matches!(
            enumerate_arbitrary_configs(&layout, 2, 23),
            Err(ReservoirError::Count { requested: 23, available: 22 })
        ));
        for c in enumerate_arbitrary_configs(&layout, 1, 2).unwrap() {
            assert_eq!(c.edges(&layout, 0.2).unwrap().len(), 3);
        }
    }

    #[test]
    fn arbitrary_rejects_duplicates_of_implied_edges() {
        let c = Connectivity::Arbitrary {
            r_cross: 1,
            extra: vec![(5, 6)],
        };
        assert!(matches!(c.edges(&two(), 0.1), Err(ReservoirError::Edge { .. })));
    }

    #[test]
    fn text_encoding_round_trips() {
        for s in ["none", "bx:3", "arb:1+2-7,3-9", "arb:0+", "par:10010", "par:11111|00000"] {
            let c: Connectivity = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
        }
        for bad in ["bx", "bx:x", "arb:1", "par:1021", "foo:1", ""] {
            assert!(bad.parse::<Connectivity>().is_err(), "{bad}");
        }
        let c: Connectivity = "arb:1+2-7".parse().unwrap();
        assert_eq!((c.r_cross(), c.n_arbitrary(), c.family()), (1, 1, SchemeFamily::Arbitrary));
    }
}
