//! Slow reference implementations written without sharing code paths with
//! the library engines.
#![allow(dead_code, clippy::needless_range_loop)]

use seedgrow_core::{GridDims, Neighborhood, RegionId, ScalarGrid, Site};

/// Neighbors from explicit coordinate arithmetic, canonical order.
pub fn neighbors(dims: GridDims, s: Site, nb: Neighborhood) -> Vec<Site> {
    let (w, h, d) = (
        dims.width() as i64,
        dims.height() as i64,
        dims.depth() as i64,
    );
    let (x, y, z) = (s.x as i64, s.y as i64, s.z as i64);
    let mut offs: Vec<(i64, i64, i64)> = vec![(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0)];
    match nb {
        Neighborhood::N4 => {}
        Neighborhood::N6 => offs.extend([(0, 0, -1), (0, 0, 1)]),
        Neighborhood::N8 => offs.extend([(-1, -1, 0), (1, -1, 0), (-1, 1, 0), (1, 1, 0)]),
    }
    offs.into_iter()
        .map(|(dx, dy, dz)| (x + dx, y + dy, z + dz))
        .filter(|&(a, b, c)| a >= 0 && b >= 0 && c >= 0 && a < w && b < h && c < d)
        .map(|(a, b, c)| Site::new(a as usize, b as usize, c as usize))
        .collect()
}

fn idx(dims: GridDims, s: Site) -> usize {
    s.x + dims.width() * (s.y + dims.height() * s.z)
}

/// Sobel in-plane plus central difference in depth, replicated borders,
/// spelled out as explicit kernel sums.
pub fn sobel_magnitudes(grid: &ScalarGrid) -> Vec<f64> {
    let dims = grid.dims();
    let (w, h, d) = (
        dims.width() as i64,
        dims.height() as i64,
        dims.depth() as i64,
    );
    let v = |x: i64, y: i64, z: i64| {
        let s = Site::new(
            x.clamp(0, w - 1) as usize,
            y.clamp(0, h - 1) as usize,
            z.clamp(0, d - 1) as usize,
        );
        grid.values()[idx(dims, s)]
    };
    const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut out = Vec::new();
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let (mut gx, mut gy) = (0.0, 0.0);
                for j in 0..3 {
                    for i in 0..3 {
                        let s = v(x + i as i64 - 1, y + j as i64 - 1, z);
                        gx += KX[j][i] * s;
                        gy += KX[i][j] * s;
                    }
                }
                let gz = if d > 1 {
                    v(x, y, z + 1) - v(x, y, z - 1)
                } else {
                    0.0
                };
                out.push((gx * gx + gy * gy + gz * gz).sqrt());
            }
        }
    }
    out
}

/// Multi-seed flood reference: seeds are taken in order, each one claims the
/// connected set of admitted sites it can reach without crossing earlier
/// regions or other seeds. The seed itself is always claimed.
pub fn flood_components(
    dims: GridDims,
    seeds: &[Site],
    nb: Neighborhood,
    admitted: impl Fn(usize) -> bool,
) -> Vec<RegionId> {
    let mut labels = vec![0; dims.len()];
    let seed_idx: Vec<usize> = seeds.iter().map(|&s| idx(dims, s)).collect();
    for (r, &s) in seed_idx.iter().enumerate() {
        labels[s] = r as RegionId + 1;
    }
    for (r, &s) in seed_idx.iter().enumerate() {
        let region = r as RegionId + 1;
        let mut queue = std::collections::VecDeque::from([s]);
        let mut seen = vec![false; dims.len()];
        seen[s] = true;
        while let Some(i) = queue.pop_front() {
            let site = Site::new(
                i % dims.width(),
                (i / dims.width()) % dims.height(),
                i / (dims.width() * dims.height()),
            );
            for n in neighbors(dims, site, nb) {
                let ni = idx(dims, n);
                if !seen[ni] && labels[ni] == 0 && admitted(ni) {
                    seen[ni] = true;
                    labels[ni] = region;
                    queue.push_back(ni);
                }
            }
        }
    }
    labels
}

/// Best-first growth by exhaustive rescanning: every step looks at every
/// pending (site, region) entry and picks the smallest distance to the
/// region's current mean, earliest entry first on ties. Returns labels and
/// the number of entries created plus seeds.
pub fn classic_bruteforce(
    grid: &ScalarGrid,
    seeds: &[Site],
    nb: Neighborhood,
) -> (Vec<RegionId>, u64) {
    let dims = grid.dims();
    let g = grid.values();
    let q = seeds.len();
    let mut labels = vec![0 as RegionId; dims.len()];
    let mut sum = vec![0.0f64; q];
    let mut size = vec![0usize; q];
    // (site index, region, tick)
    let mut entries: Vec<(usize, usize, u64)> = Vec::new();
    let mut tick = 0u64;

    let add_entries = |labels: &[RegionId],
                       entries: &mut Vec<(usize, usize, u64)>,
                       tick: &mut u64,
                       from: Site,
                       r: usize| {
        for n in neighbors(dims, from, nb) {
            let ni = idx(dims, n);
            if labels[ni] == 0 && !entries.iter().any(|e| e.0 == ni && e.1 == r) {
                entries.push((ni, r, *tick));
                *tick += 1;
            }
        }
    };

    for (r, &s) in seeds.iter().enumerate() {
        let i = idx(dims, s);
        labels[i] = r as RegionId + 1;
        sum[r] += g[i];
        size[r] += 1;
    }
    for (r, &s) in seeds.iter().enumerate() {
        add_entries(&labels, &mut entries, &mut tick, s, r);
    }

    loop {
        let mut best: Option<(f64, u64, usize, usize)> = None;
        for &(i, r, t) in &entries {
            if labels[i] != 0 {
                continue;
            }
            let delta = (g[i] - sum[r] / size[r] as f64).abs();
            if best.is_none_or(|b| (delta, t) < (b.0, b.1)) {
                best = Some((delta, t, i, r));
            }
        }
        let Some((_, _, i, r)) = best else { break };
        labels[i] = r as RegionId + 1;
        sum[r] += g[i];
        size[r] += 1;
        let site = Site::new(
            i % dims.width(),
            (i / dims.width()) % dims.height(),
            i / (dims.width() * dims.height()),
        );
        add_entries(&labels, &mut entries, &mut tick, site, r);
    }
    (labels, seeds.len() as u64 + tick)
}
