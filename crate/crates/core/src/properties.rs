//! Checks a label map against the four partition properties of a
//! segmentation with respect to a region predicate `H`:
//!
//! * (a) the regions cover the whole grid;
//! * (b) the regions are pairwise disjoint;
//! * (c) `H(R)` holds for every region;
//! * (d) `H(Ri ∪ Rj)` fails for every pair of adjacent regions (maximality).
//!
//! Reports are available as line-oriented text ([`PropertyReport::to_text`])
//! and JSON (serde).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{compute_gradient, GradientField};
use crate::grid::{NeighborIter, Neighborhood, ScalarGrid, Site};
use crate::grow::{LabelMap, RegionId};

/// Counterexamples kept per failed property.
pub const MAX_COUNTEREXAMPLES: usize = 10;

/// Homogeneity predicate `H(R)` over a set of sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionPredicate {
    /// Every member lies within `t` of the set's mean intensity.
    MaxDeviation { t: f64 },
    /// Every interior member (all of its in-bounds neighbors are members) has
    /// gradient magnitude below `k * Gmax`.
    MaxGradientInterior { k: f64 },
}

impl RegionPredicate {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionPredicate::MaxDeviation { t } if !(t.is_finite() && t >= 0.0) => Err(
                Error::config(format!("dev: t must be a finite value >= 0, got {t}")),
            ),
            RegionPredicate::MaxGradientInterior { k } if !(k.is_finite() && k > 0.0) => Err(
                Error::config(format!("grad: k must be a finite value > 0, got {k}")),
            ),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for RegionPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionPredicate::MaxDeviation { t } => write!(f, "dev:t={t}"),
            RegionPredicate::MaxGradientInterior { k } => write!(f, "grad:k={k}"),
        }
    }
}

impl std::str::FromStr for RegionPredicate {
    type Err = Error;

    /// `dev:t=<value>` or `grad:k=<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("predicate `{s}`: expected dev:t=<v> or grad:k=<v>"));
        let (kind, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let (key, value) = rest.split_once('=').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        let pred = match (kind.trim(), key.trim()) {
            ("dev", "t") => RegionPredicate::MaxDeviation { t: value },
            ("grad", "k") => RegionPredicate::MaxGradientInterior { k: value },
            _ => return Err(bad()),
        };
        pred.validate()?;
        Ok(pred)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "property", rename_all = "snake_case")]
pub enum Counterexample {
    /// (a): a site with label 0.
    Unallocated { site: Site },
    /// (b): recorded region size disagrees with the labels.
    SizeMismatch {
        region: RegionId,
        recorded: usize,
        actual: usize,
    },
    /// (c): a member violating the predicate.
    Inhomogeneous { region: RegionId, site: Site },
    /// (d): adjacent regions whose union is still homogeneous.
    MergeHomogeneous { regions: (RegionId, RegionId) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub covers_domain: bool,
    pub disjoint: bool,
    pub per_region_homogeneous: Vec<(RegionId, bool)>,
    pub merged_adjacent_inhomogeneous: Vec<((RegionId, RegionId), bool)>,
    pub counterexamples: Vec<Counterexample>,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.covers_domain
            && self.disjoint
            && self.per_region_homogeneous.iter().all(|p| p.1)
            && self.merged_adjacent_inhomogeneous.iter().all(|p| p.1)
    }

    /// One record per line; see `docs/formats.md`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "covers_domain {}", self.covers_domain);
        let _ = writeln!(out, "disjoint {}", self.disjoint);
        for (r, ok) in &self.per_region_homogeneous {
            let _ = writeln!(out, "homogeneous {r} {ok}");
        }
        for ((a, b), ok) in &self.merged_adjacent_inhomogeneous {
            let _ = writeln!(out, "merged_inhomogeneous {a} {b} {ok}");
        }
        for c in &self.counterexamples {
            let _ = match c {
                Counterexample::Unallocated { site } => writeln!(
                    out,
                    "counterexample a unallocated {} {} {}",
                    site.x, site.y, site.z
                ),
                Counterexample::SizeMismatch {
                    region,
                    recorded,
                    actual,
                } => writeln!(
                    out,
                    "counterexample b size_mismatch {region} {recorded} {actual}"
                ),
                Counterexample::Inhomogeneous { region, site } => writeln!(
                    out,
                    "counterexample c inhomogeneous {region} {} {} {}",
                    site.x, site.y, site.z
                ),
                Counterexample::MergeHomogeneous { regions: (a, b) } => {
                    writeln!(out, "counterexample d merge_homogeneous {a} {b}")
                }
            };
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Evaluator<'a> {
    grid: &'a ScalarGrid,
    labels: &'a [RegionId],
    nb: Neighborhood,
    pred: RegionPredicate,
    gradient: Option<GradientField>,
}

impl Evaluator<'_> {
    /// Members of the set (all labels in `set`) violating the predicate, up
    /// to `limit`; `None` when the predicate holds.
    fn violations(&self, members: &[usize], set: &[RegionId], limit: usize) -> Option<Vec<Site>> {
        let dims = self.grid.dims();
        let mut bad = Vec::new();
        let mut failed = false;
        match self.pred {
            RegionPredicate::MaxDeviation { t } => {
                if members.is_empty() {
                    return None;
                }
                let mean =
                    members.iter().map(|&i| self.grid.at(i)).sum::<f64>() / members.len() as f64;
                for &i in members {
                    if (self.grid.at(i) - mean).abs() > t {
                        failed = true;
                        if bad.len() < limit {
                            bad.push(dims.site(i));
                        }
                    }
                }
            }
            RegionPredicate::MaxGradientInterior { k } => {
                let grad = self.gradient.as_ref().expect("gradient computed");
                if grad.gmax() == 0.0 {
                    return None;
                }
                let bound = k * grad.gmax();
                for &i in members {
                    let interior = NeighborIter::new(dims, dims.site(i), self.nb)
                        .all(|n| set.contains(&self.labels[dims.index_unchecked(n)]));
                    if interior && grad.magnitude_index(i) >= bound {
                        failed = true;
                        if bad.len() < limit {
                            bad.push(dims.site(i));
                        }
                    }
                }
            }
        }
        failed.then_some(bad)
    }
}

/// Evaluate properties (a)-(d) of `labels` over `grid`.
///
/// Unallocated sites make (a) false and are otherwise ignored. Pairs in (d)
/// are exactly the region pairs adjacent under `nb`, in ascending order.
pub fn check_properties(
    grid: &ScalarGrid,
    labels: &LabelMap,
    pred: RegionPredicate,
    nb: Neighborhood,
) -> Result<PropertyReport> {
    let dims = grid.dims();
    if labels.dims() != dims {
        return Err(Error::config(format!(
            "label map is {} but grid is {dims}",
            labels.dims()
        )));
    }
    nb.check(dims)?;
    pred.validate()?;

    let raw = labels.labels();
    let q = labels.region_count() as usize;
    let mut counterexamples = Vec::new();

    // (a)
    let mut unallocated = raw
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 0)
        .map(|(i, _)| i);
    let covers_domain = match unallocated.next() {
        None => true,
        Some(first) => {
            counterexamples.extend(
                std::iter::once(first)
                    .chain(unallocated)
                    .take(MAX_COUNTEREXAMPLES)
                    .map(|i| Counterexample::Unallocated { site: dims.site(i) }),
            );
            false
        }
    };

    // (b)
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); q];
    for (i, &l) in raw.iter().enumerate() {
        if l != 0 {
            members[l as usize - 1].push(i);
        }
    }
    let mut disjoint = true;
    let mut mismatches = 0;
    let recorded_total: usize = labels.region_stats().iter().map(|s| s.size()).sum();
    let labeled = raw.iter().filter(|&&l| l != 0).count();
    for (r, m) in members.iter().enumerate() {
        let recorded = labels.region_stats()[r].size();
        if recorded != m.len() {
            disjoint = false;
            mismatches += 1;
            if mismatches <= MAX_COUNTEREXAMPLES {
                counterexamples.push(Counterexample::SizeMismatch {
                    region: r as RegionId + 1,
                    recorded,
                    actual: m.len(),
                });
            }
        }
    }
    if recorded_total != labeled {
        disjoint = false;
    }

    let eval = Evaluator {
        grid,
        labels: raw,
        nb,
        pred,
        gradient: matches!(pred, RegionPredicate::MaxGradientInterior { .. })
            .then(|| compute_gradient(grid)),
    };

    // (c)
    let mut per_region_homogeneous = Vec::with_capacity(q);
    let mut budget = MAX_COUNTEREXAMPLES;
    for (r, m) in members.iter().enumerate() {
        let region = r as RegionId + 1;
        match eval.violations(m, &[region], budget) {
            None => per_region_homogeneous.push((region, true)),
            Some(sites) => {
                budget -= sites.len();
                counterexamples.extend(
                    sites
                        .into_iter()
                        .map(|site| Counterexample::Inhomogeneous { region, site }),
                );
                per_region_homogeneous.push((region, false));
            }
        }
    }

    // (d)
    let mut pairs = BTreeSet::new();
    for (i, &a) in raw.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for n in NeighborIter::new(dims, dims.site(i), nb) {
            let b = raw[dims.index_unchecked(n)];
            if b != 0 && b != a {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut merged_adjacent_inhomogeneous = Vec::with_capacity(pairs.len());
    let mut merge_failures = 0;
    for (a, b) in pairs {
        let mut union = members[a as usize - 1].clone();
        union.extend_from_slice(&members[b as usize - 1]);
        let breaks = eval.violations(&union, &[a, b], 0).is_some();
        if !breaks && merge_failures < MAX_COUNTEREXAMPLES {
            merge_failures += 1;
            counterexamples.push(Counterexample::MergeHomogeneous { regions: (a, b) });
        }
        merged_adjacent_inhomogeneous.push(((a, b), breaks));
    }

    Ok(PropertyReport {
        covers_domain,
        disjoint,
        per_region_homogeneous,
        merged_adjacent_inhomogeneous,
        counterexamples,
    })
}
