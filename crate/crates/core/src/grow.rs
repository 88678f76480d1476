//! Region growing engines.
//!
//! [`grow_classic`] is best-first multi-seed growth: at every step the
//! unallocated site adjacent to some region whose intensity is closest to
//! that region's running mean is allocated to it, until nothing is left.
//!
//! [`grow_stack`] floods each seed in turn with an explicit LIFO stack,
//! admitting neighbors through a [`CriterionConfig`].

use std::collections::BTreeSet;
use std::ops::Bound;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::criterion::{admit, AdmissionContext, CriterionConfig};
use crate::error::{Error, Result};
use crate::gradient::{compute_gradient, GradientField};
use crate::grid::{GridDims, NeighborIter, Neighborhood, ScalarGrid, Site};

pub type RegionId = u32;

/// Ordered seeds; the i-th seed (0-based) anchors region `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet {
    sites: Vec<Site>,
}

impl SeedSet {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if sites.len() > RegionId::MAX as usize {
            return Err(Error::config("too many seeds"));
        }
        for (i, s) in sites.iter().enumerate() {
            if let Some(j) = sites[..i].iter().position(|t| t == s) {
                return Err(Error::InvalidSeed {
                    index: i + 1,
                    site: *s,
                    reason: format!("duplicates seed #{}", j + 1),
                });
            }
        }
        Ok(Self { sites })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn region_count(&self) -> RegionId {
        self.sites.len() as RegionId
    }

    /// `(region id, seed site)` pairs in input order.
    pub fn iter(&self) -> impl Iterator<Item = (RegionId, Site)> + '_ {
        self.sites
            .iter()
            .enumerate()
            .map(|(i, &s)| (i as RegionId + 1, s))
    }

    pub fn check(&self, dims: GridDims) -> Result<()> {
        for (region, s) in self.iter() {
            dims.check(s).map_err(|e| Error::InvalidSeed {
                index: region as usize,
                site: s,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SeedRecord {
    region: RegionId,
    x: usize,
    y: usize,
    z: usize,
}

impl Serialize for SeedSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|(region, site)| SeedRecord {
            region,
            x: site.x,
            y: site.y,
            z: site.z,
        }))
    }
}

impl<'de> Deserialize<'de> for SeedSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<SeedRecord>::deserialize(d)?;
        SeedSet::new(
            records
                .into_iter()
                .map(|r| Site::new(r.x, r.y, r.z))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Running statistics of one region.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionStats {
    size: usize,
    sum: f64,
    coord_sum: [u64; 3],
}

impl RegionStats {
    #[inline]
    fn add(&mut self, s: Site, value: f64) {
        self.size += 1;
        self.sum += value;
        self.coord_sum[0] += s.x as u64;
        self.coord_sum[1] += s.y as u64;
        self.coord_sum[2] += s.z as u64;
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Mean intensity; zero for an empty region.
    #[inline]
    pub fn mean(&self) -> f64 {
        if self.size == 0 {
            0.0
        } else {
            self.sum / self.size as f64
        }
    }

    /// Mean coordinates `(Xc, Yc, Zc)`.
    pub fn centroid(&self) -> [f64; 3] {
        if self.size == 0 {
            return [0.0; 3];
        }
        let n = self.size as f64;
        self.coord_sum.map(|c| c as f64 / n)
    }
}

/// Serializable view of one region's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: RegionId,
    pub size: usize,
    pub sum: f64,
    pub mean: f64,
    pub centroid: [f64; 3],
}

/// Per-site region labels (0 = unallocated) with per-region statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    dims: GridDims,
    labels: Vec<RegionId>,
    stats: Vec<RegionStats>,
}

impl LabelMap {
    fn empty(dims: GridDims, regions: RegionId) -> Self {
        Self {
            dims,
            labels: vec![0; dims.len()],
            stats: vec![RegionStats::default(); regions as usize],
        }
    }

    /// Build from raw labels; the region count is the largest label present.
    pub fn from_labels(grid: &ScalarGrid, labels: Vec<RegionId>) -> Result<Self> {
        let q = labels.iter().copied().max().unwrap_or(0);
        Self::from_labels_with_count(grid, labels, q)
    }

    pub fn from_labels_with_count(
        grid: &ScalarGrid,
        labels: Vec<RegionId>,
        regions: RegionId,
    ) -> Result<Self> {
        let dims = grid.dims();
        if labels.len() != dims.len() {
            return Err(Error::data(format!(
                "label map for {dims} needs {} labels, got {}",
                dims.len(),
                labels.len()
            )));
        }
        let mut map = Self::empty(dims, regions);
        for (i, &l) in labels.iter().enumerate() {
            if l > regions {
                return Err(Error::data(format!(
                    "label {l} at {} exceeds region count {regions}",
                    dims.site(i)
                )));
            }
            if l != 0 {
                map.stats[l as usize - 1].add(dims.site(i), grid.at(i));
            }
        }
        map.labels = labels;
        Ok(map)
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn labels(&self) -> &[RegionId] {
        &self.labels
    }

    pub fn label(&self, s: Site) -> Result<RegionId> {
        self.dims.check(s)?;
        Ok(self.labels[self.dims.index_unchecked(s)])
    }

    pub fn region_count(&self) -> RegionId {
        self.stats.len() as RegionId
    }

    /// Statistics for region `id` (1-based).
    pub fn stats(&self, id: RegionId) -> Option<&RegionStats> {
        id.checked_sub(1).and_then(|i| self.stats.get(i as usize))
    }

    pub fn region_stats(&self) -> &[RegionStats] {
        &self.stats
    }

    pub fn allocated(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn summaries(&self) -> Vec<RegionSummary> {
        self.stats
            .iter()
            .enumerate()
            .map(|(i, s)| RegionSummary {
                region: i as RegionId + 1,
                size: s.size(),
                sum: s.sum(),
                mean: s.mean(),
                centroid: s.centroid(),
            })
            .collect()
    }

    #[inline]
    fn assign(&mut self, index: usize, region: RegionId, value: f64) {
        self.labels[index] = region;
        self.stats[region as usize - 1].add(self.dims.site(index), value);
    }
}

/// One pending allocation in the best-first frontier: `site` would join
/// `target_region` at distance `delta` from that region's mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierEntry {
    pub site: Site,
    pub delta: f64,
    pub target_region: RegionId,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Classic,
    Stack,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classic" => Ok(Engine::Classic),
            "stack" => Ok(Engine::Stack),
            other => Err(Error::config(format!(
                "unknown engine `{other}` (expected classic or stack)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FrontierExhausted,
    AllSitesAllocated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowReport {
    pub engine: Engine,
    pub neighborhood: Neighborhood,
    /// Stack engine only.
    pub criterion: Option<CriterionConfig>,
    pub seeds: SeedSet,
    /// Seeds plus every candidate evaluation.
    pub sites_examined: u64,
    /// Sites labeled, seeds included.
    pub sites_accepted: u64,
    pub termination: Termination,
}

fn prepare(grid: &ScalarGrid, seeds: &SeedSet, nb: Neighborhood) -> Result<LabelMap> {
    let dims = grid.dims();
    nb.check(dims)?;
    seeds.check(dims)?;
    let mut map = LabelMap::empty(dims, seeds.region_count());
    for (region, s) in seeds.iter() {
        let i = dims.index_unchecked(s);
        map.assign(i, region, grid.at(i));
    }
    Ok(map)
}

fn termination(map: &LabelMap) -> Termination {
    if map.labels.iter().all(|&l| l != 0) {
        Termination::AllSitesAllocated
    } else {
        Termination::FrontierExhausted
    }
}

// (intensity, tick, site index); ordering by intensity lets the closest value
// to a region mean be found with two range queries.
type FrontierKey = (OrderedFloat<f64>, u64, usize);

#[derive(Debug, Clone, Copy)]
struct Candidate {
    delta: f64,
    key: FrontierKey,
}

impl Candidate {
    fn precedes(&self, other: &Candidate) -> bool {
        (self.delta, self.key.1) < (other.delta, other.key.1)
    }
}

/// Smallest `(delta, tick)` entry of one region's frontier, dropping entries
/// for sites that were allocated to another region in the meantime.
///
/// Within one side of the mean, `|g - mean|` is monotone in `g`, so only the
/// nearest intensity below and above need inspecting. Distinct intensities
/// whose distances round to the same float are not distinguished; for
/// integer-valued data this cannot happen.
fn region_best(
    frontier: &mut BTreeSet<FrontierKey>,
    labels: &[RegionId],
    mean: f64,
) -> Option<Candidate> {
    let pivot = (OrderedFloat(mean), u64::MAX, usize::MAX);
    loop {
        let below = frontier
            .range(..=pivot)
            .next_back()
            .and_then(|k| frontier.range((k.0, 0, 0)..).next())
            .copied();
        let above = frontier
            .range((Bound::Excluded(pivot), Bound::Unbounded))
            .next()
            .copied();
        let mut stale = false;
        for k in [below, above].into_iter().flatten() {
            if labels[k.2] != 0 {
                frontier.remove(&k);
                stale = true;
            }
        }
        if stale {
            continue;
        }
        let cand = |k: FrontierKey| Candidate {
            delta: (k.0 .0 - mean).abs(),
            key: k,
        };
        return match (below.map(cand), above.map(cand)) {
            (Some(a), Some(b)) => Some(if b.precedes(&a) { b } else { a }),
            (a, b) => a.or(b),
        };
    }
}

/// Best-first seeded region growing over all seeds at once.
///
/// Every step allocates the frontier entry with the smallest
/// `delta = |g(site) - mean(region)|`, ties going to the entry created first.
/// An entry `(site, region)` is created, and stamped with the next tick, the
/// first time `site` becomes adjacent to `region`. Means are exact running
/// means (`sum / size`) updated after each allocation, and every entry's
/// distance is evaluated against the current mean of its region. Growth ends
/// when every site is allocated.
pub fn grow_classic(
    grid: &ScalarGrid,
    seeds: &SeedSet,
    nb: Neighborhood,
) -> Result<(LabelMap, GrowReport)> {
    let mut map = prepare(grid, seeds, nb)?;
    let dims = grid.dims();
    let q = seeds.region_count() as usize;

    let mut frontiers: Vec<BTreeSet<FrontierKey>> = vec![BTreeSet::new(); q];
    let mut has_entry: Vec<SmallVec<[RegionId; 2]>> = vec![SmallVec::new(); dims.len()];
    let mut tick = 0u64;
    let mut examined = q as u64;

    let mut expand = |map: &LabelMap,
                      frontiers: &mut [BTreeSet<FrontierKey>],
                      has_entry: &mut [SmallVec<[RegionId; 2]>],
                      from: usize,
                      region: RegionId| {
        for n in NeighborIter::new(dims, dims.site(from), nb) {
            let ni = dims.index_unchecked(n);
            if map.labels[ni] == 0 && !has_entry[ni].contains(&region) {
                has_entry[ni].push(region);
                frontiers[region as usize - 1].insert((OrderedFloat(grid.at(ni)), tick, ni));
                tick += 1;
                examined += 1;
            }
        }
    };

    for (region, s) in seeds.iter() {
        expand(
            &map,
            &mut frontiers,
            &mut has_entry,
            dims.index_unchecked(s),
            region,
        );
    }

    let mut best: Vec<Option<Candidate>> = (0..q)
        .map(|r| region_best(&mut frontiers[r], &map.labels, map.stats[r].mean()))
        .collect();

    loop {
        let mut chosen: Option<(usize, Candidate)> = None;
        for (r, c) in best.iter().enumerate() {
            if let Some(c) = c {
                if chosen.is_none_or(|(_, cur)| c.precedes(&cur)) {
                    chosen = Some((r, *c));
                }
            }
        }
        let Some((r, cand)) = chosen else { break };
        let index = cand.key.2;
        let region = r as RegionId + 1;

        frontiers[r].remove(&cand.key);
        map.assign(index, region, cand.key.0 .0);

        for j in 0..q {
            if j != r && best[j].is_some_and(|c| c.key.2 == index) {
                best[j] = region_best(&mut frontiers[j], &map.labels, map.stats[j].mean());
            }
        }
        expand(&map, &mut frontiers, &mut has_entry, index, region);
        best[r] = region_best(&mut frontiers[r], &map.labels, map.stats[r].mean());
    }

    let report = GrowReport {
        engine: Engine::Classic,
        neighborhood: nb,
        criterion: None,
        seeds: seeds.clone(),
        sites_examined: examined,
        sites_accepted: map.allocated() as u64,
        termination: termination(&map),
    };
    Ok((map, report))
}

/// Criterion-gated flood from each seed, one seed at a time, with an
/// explicit stack.
///
/// All seed sites are labeled up front. Then, per seed in input order: pop a
/// site, label it with the seed's region and mark it visited, and push each
/// neighbor (canonical order) that is unlabeled, unvisited and admitted by
/// `cfg`. The region mean seen by `cfg` is the running mean of the sites
/// labeled so far in that region. Sites claimed by an earlier region are never
/// relabeled.
pub fn grow_stack(
    grid: &ScalarGrid,
    grad: &GradientField,
    seeds: &SeedSet,
    nb: Neighborhood,
    cfg: &CriterionConfig,
) -> Result<(LabelMap, GrowReport)> {
    cfg.validate()?;
    let dims = grid.dims();
    if grad.dims() != dims {
        return Err(Error::config(format!(
            "gradient field is {} but grid is {dims}",
            grad.dims()
        )));
    }
    let mut map = prepare(grid, seeds, nb)?;
    let (gmax, gmin) = (grad.gmax(), grad.gmin());

    let mut visited = vec![false; dims.len()];
    let mut stack: Vec<usize> = Vec::new();
    let mut examined = seeds.region_count() as u64;

    for (region, seed) in seeds.iter() {
        let r = region as usize - 1;
        stack.push(dims.index_unchecked(seed));
        while let Some(index) = stack.pop() {
            if visited[index] {
                continue;
            }
            visited[index] = true;
            if map.labels[index] == 0 {
                map.assign(index, region, grid.at(index));
            }
            for n in NeighborIter::new(dims, dims.site(index), nb) {
                let ni = dims.index_unchecked(n);
                if map.labels[ni] != 0 || visited[ni] {
                    continue;
                }
                examined += 1;
                let ctx = AdmissionContext {
                    candidate: n,
                    region_mean: map.stats[r].mean(),
                    intensity: grid.at(ni),
                    grad_mag: grad.magnitude_index(ni),
                    gmax,
                    gmin,
                };
                if admit(cfg, &ctx) {
                    stack.push(ni);
                }
            }
        }
    }

    let report = GrowReport {
        engine: Engine::Stack,
        neighborhood: nb,
        criterion: Some(cfg.clone()),
        seeds: seeds.clone(),
        sites_examined: examined,
        sites_accepted: map.allocated() as u64,
        termination: termination(&map),
    };
    Ok((map, report))
}

/// Run either engine. The stack engine requires a criterion and reuses
/// `grad` when given (computing it otherwise); the classic engine takes none.
pub fn grow(
    grid: &ScalarGrid,
    grad: Option<&GradientField>,
    seeds: &SeedSet,
    engine: Engine,
    nb: Neighborhood,
    cfg: Option<&CriterionConfig>,
) -> Result<(LabelMap, GrowReport)> {
    match (engine, cfg) {
        (Engine::Classic, None) => grow_classic(grid, seeds, nb),
        (Engine::Classic, Some(_)) => Err(Error::config("the classic engine takes no criterion")),
        (Engine::Stack, None) => Err(Error::config("the stack engine needs a criterion")),
        (Engine::Stack, Some(cfg)) => match grad {
            Some(g) => grow_stack(grid, g, seeds, nb, cfg),
            None => grow_stack(grid, &compute_gradient(grid), seeds, nb, cfg),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient::compute_gradient;

    fn row(values: &[f64]) -> ScalarGrid {
        ScalarGrid::new(GridDims::new_2d(values.len(), 1).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn seed_set_validation() {
        assert!(SeedSet::new(vec![]).is_err());
        let err = SeedSet::new(vec![Site::xy(1, 1), Site::xy(1, 1)]).unwrap_err();
        assert!(err.to_string().contains("seed #2"));
        let seeds = SeedSet::new(vec![Site::xy(5, 0)]).unwrap();
        let err = seeds.check(GridDims::new_2d(5, 1).unwrap()).unwrap_err();
        assert!(err.to_string().contains("seed #1"), "{err}");
    }

    #[test]
    fn classic_five_site_trace() {
        // frontier: s1 (r1, d0, t0), s3 (r2, d0, t1); then s2 enters r1 at
        // d40 t2 and r2 at d40 t3, so region 1 wins the tie.
        let g = row(&[10.0, 10.0, 50.0, 90.0, 90.0]);
        let seeds = SeedSet::new(vec![Site::xy(0, 0), Site::xy(4, 0)]).unwrap();
        let (map, report) = grow_classic(&g, &seeds, Neighborhood::N4).unwrap();
        assert_eq!(map.labels(), &[1, 1, 1, 2, 2]);
        assert_eq!(report.termination, Termination::AllSitesAllocated);
        assert_eq!(report.sites_accepted, 5);
        assert_eq!(report.sites_examined, 2 + 4);
    }

    #[test]
    fn classic_single_region_takes_everything() {
        let g = ScalarGrid::from_fn(GridDims::new_2d(6, 5).unwrap(), |s| {
            ((s.x * 7 + s.y * 13) % 11) as f64
        })
        .unwrap();
        let seeds = SeedSet::new(vec![Site::xy(2, 3)]).unwrap();
        let (map, _) = grow_classic(&g, &seeds, Neighborhood::N8).unwrap();
        assert!(map.labels().iter().all(|&l| l == 1));
        assert_eq!(map.stats(1).unwrap().size(), 30);
    }

    #[test]
    fn classic_rejects_bad_neighborhood() {
        let g = row(&[1.0, 2.0]);
        let seeds = SeedSet::new(vec![Site::xy(0, 0)]).unwrap();
        assert!(grow_classic(&g, &seeds, Neighborhood::N6).is_err());
    }

    #[test]
    fn stack_wall_blocks_flood() {
        let g = row(&[100.0, 100.0, 100.0, 0.0, 100.0, 100.0]);
        let grad = compute_gradient(&g);
        let seeds = SeedSet::new(vec![Site::xy(0, 0)]).unwrap();
        let cfg = CriterionConfig::SimpleIntensity { tint: 10.0 };
        let (map, report) = grow_stack(&g, &grad, &seeds, Neighborhood::N4, &cfg).unwrap();
        assert_eq!(map.labels(), &[1, 1, 1, 0, 0, 0]);
        assert_eq!(report.termination, Termination::FrontierExhausted);
        assert_eq!(report.sites_accepted, 3);
    }

    #[test]
    fn stack_uniform_grid_fills() {
        let g = ScalarGrid::filled(GridDims::new_2d(5, 5).unwrap(), 3.0).unwrap();
        let grad = compute_gradient(&g);
        let seeds = SeedSet::new(vec![Site::xy(2, 2)]).unwrap();
        for k in [0.01, 0.25, 2.0] {
            let cfg = CriterionConfig::GradientGn { k };
            let (map, report) = grow_stack(&g, &grad, &seeds, Neighborhood::N4, &cfg).unwrap();
            assert_eq!(map.allocated(), 25);
            assert_eq!(report.termination, Termination::AllSitesAllocated);
        }
    }

    #[test]
    fn stack_seed_always_labeled() {
        let g = row(&[0.0, 0.0, 100.0, 0.0, 0.0]);
        let grad = compute_gradient(&g);
        let seeds = SeedSet::new(vec![Site::xy(2, 0)]).unwrap();
        let cfg = CriterionConfig::SimpleIntensity { tint: 1.0 };
        let (map, _) = grow_stack(&g, &grad, &seeds, Neighborhood::N4, &cfg).unwrap();
        assert_eq!(map.labels(), &[0, 0, 1, 0, 0]);
    }

    #[test]
    fn stack_first_seed_wins_but_seeds_are_kept() {
        let g = ScalarGrid::filled(GridDims::new_2d(4, 1).unwrap(), 1.0).unwrap();
        let grad = compute_gradient(&g);
        let seeds = SeedSet::new(vec![Site::xy(0, 0), Site::xy(3, 0)]).unwrap();
        let cfg = CriterionConfig::GradientGn { k: 1.0 };
        let (map, _) = grow_stack(&g, &grad, &seeds, Neighborhood::N4, &cfg).unwrap();
        assert_eq!(map.labels(), &[1, 1, 1, 2]);
    }

    #[test]
    fn stack_rejects_mismatched_gradient() {
        let g = row(&[1.0, 2.0]);
        let other = compute_gradient(&row(&[1.0, 2.0, 3.0]));
        let seeds = SeedSet::new(vec![Site::xy(0, 0)]).unwrap();
        let cfg = CriterionConfig::GradientGn { k: 1.0 };
        assert!(grow_stack(&g, &other, &seeds, Neighborhood::N4, &cfg).is_err());
    }

    #[test]
    fn label_map_from_labels_stats() {
        let g = row(&[1.0, 2.0, 3.0, 4.0]);
        let map = LabelMap::from_labels(&g, vec![1, 1, 0, 2]).unwrap();
        assert_eq!(map.region_count(), 2);
        assert_eq!(map.stats(1).unwrap().mean(), 1.5);
        assert_eq!(map.stats(1).unwrap().centroid(), [0.5, 0.0, 0.0]);
        assert_eq!(map.stats(2).unwrap().size(), 1);
        assert!(map.stats(0).is_none());
        assert!(LabelMap::from_labels_with_count(&g, vec![3, 0, 0, 0], 2).is_err());
    }

    #[test]
    fn report_serializes() {
        let g = row(&[1.0, 1.0]);
        let grad = compute_gradient(&g);
        let seeds = SeedSet::new(vec![Site::xy(0, 0)]).unwrap();
        let cfg = CriterionConfig::GradientGn { k: 0.25 };
        let (_, report) = grow_stack(&g, &grad, &seeds, Neighborhood::N4, &cfg).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"criterion\":\"gn:k=0.25\""), "{json}");
        let back: GrowReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
