use seedgrow_core::{LabelMap, ScalarGrid};

/// Region `r` is drawn in `PALETTE[(r - 1) % 12]`.
pub const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [255, 225, 25],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [0, 128, 128],
    [170, 110, 40],
    [128, 0, 0],
];

/// Binary PPM (`P6`, maxval 255) of the image's first slice: unlabeled
/// sites as gray (intensity range stretched to `0..=255`, flat images at
/// 128), labeled sites in their palette color.
pub fn render_overlay(grid: &ScalarGrid, labels: &LabelMap) -> Vec<u8> {
    let dims = grid.dims();
    let n = dims.width() * dims.height();
    let (lo, hi) = grid.min_max();
    let mut out = format!("P6\n{} {}\n255\n", dims.width(), dims.height()).into_bytes();
    out.reserve(3 * n);
    for (i, &l) in labels.labels()[..n].iter().enumerate() {
        if l == 0 {
            let v = if hi > lo {
                ((grid.at(i) - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128
            };
            out.extend([v; 3]);
        } else {
            out.extend(PALETTE[(l as usize - 1) % PALETTE.len()]);
        }
    }
    out
}
