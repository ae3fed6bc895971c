use super::eigen::{EigenPair, Spectrum};
use super::grid::{Region, Snapped, TensorGrid};
use crate::error::{Error, Result};

/// `∬_region U² L ds dt` for an interior eigenvector.
pub fn restrict_norm(grid: &TensorGrid, pair: &EigenPair, region: Region) -> Result<f64> {
    if grid.cells(region).is_empty() {
        return Err(Error::EmptyRegion(format!("{region:?}")));
    }
    Ok(grid.quadratic(&grid.expand(&pair.vector), region).mass)
}

/// Mass of `0 <= s <= b` after snapping `b` to the grid.
pub fn wing_norm(grid: &TensorGrid, pair: &EigenPair, b: f64) -> Result<(Snapped, f64)> {
    let snapped = grid.snap(b)?;
    Ok((snapped, restrict_norm(grid, pair, Region::WingBelow(snapped.node))?))
}

/// Relative eigenvalue shift `|E_coarse - E_fine| / E_fine` between two
/// discretizations, matched by position in the spectrum. `None` when the
/// coarse spectrum does not contain that index.
pub fn refinement_shifts(fine: &Spectrum, coarse: &Spectrum) -> Vec<Option<f64>> {
    fine.pairs
        .iter()
        .map(|p| coarse.pairs.iter().find(|c| c.index == p.index).map(|c| (c.energy - p.energy).abs() / p.energy))
        .collect()
}
