use seedgrow_core::RegionId;

/// `[label, run length]` pairs; adjacent runs always differ in label.
pub fn rle_encode(labels: &[RegionId]) -> Vec<(RegionId, u64)> {
    let mut runs: Vec<(RegionId, u64)> = Vec::new();
    for &l in labels {
        match runs.last_mut() {
            Some((last, n)) if *last == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    runs
}

pub fn rle_decode(runs: &[(RegionId, u64)]) -> Vec<RegionId> {
    runs.iter()
        .flat_map(|&(l, n)| std::iter::repeat_n(l, n as usize))
        .collect()
}
