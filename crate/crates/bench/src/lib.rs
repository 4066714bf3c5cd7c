//! Fixtures shared by the benchmarks.

use gevrey_core::quad::PanelGrid;
use gevrey_core::ComplexHP;

/// Smooth compactly supported right-hand side on the grid, like a cut-off level source.
pub fn bump_source(grid: &PanelGrid) -> Vec<ComplexHP> {
    grid.nodes()
        .into_iter()
        .map(|x| {
            let u = (x - 10.0) / 6.0;
            let v = if u.abs() < 1.0 { (-1.0 / (1.0 - u * u)).exp() } else { 0.0 };
            ComplexHP::new(v, 0.5 * v)
        })
        .collect()
}
