use rayon::prelude::*;

use super::maxflow::{FlowNetwork, FlowStats};
use super::{bv_energy_with, discrete_perimeter, extended_field, BoundaryDatum, DomainGrid, PerimeterStencil, PolycrystalError};

/// Per-gap min-cut statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub gap: usize,
    pub cut_cost: f64,
    pub flow: FlowStats,
}

/// Piecewise-constant map on the levels of the datum.
#[derive(Debug, Clone, PartialEq)]
pub struct GrainMap {
    /// Level index per cell; exterior cells carry the datum.
    pub level_index: Vec<usize>,
    /// Level value per cell.
    pub values: Vec<f64>,
    pub energy: f64,
    /// `level_sets[i]` holds the cells with value `>= m_{i+2}` (gap
    /// `(m_{i+1}, m_{i+2})`, 1-based levels); nested decreasingly in `i`.
    pub level_sets: Vec<Vec<bool>>,
    /// Discrete perimeter of each level set.
    pub perimeters: Vec<f64>,
    pub stats: Vec<SolverStats>,
}

impl GrainMap {
    fn assemble(grid: &DomainGrid, datum: &BoundaryDatum, level_sets: Vec<Vec<bool>>, perimeters: Vec<f64>, stats: Vec<SolverStats>) -> Self {
        let levels = datum.levels();
        let level_index: Vec<usize> = (0..grid.len())
            .map(|c| if grid.is_interior(c) { level_sets.iter().filter(|s| s[c]).count() } else { datum.assignment()[c] })
            .collect();
        let values = level_index.iter().map(|&i| levels[i]).collect();
        let energy = perimeters.iter().enumerate().map(|(i, p)| (levels[i + 1] - levels[i]) * p).sum();
        Self { level_index, values, energy, level_sets, perimeters, stats }
    }

    /// Level sets are nested: `level_sets[i + 1] ⊆ level_sets[i]`.
    pub fn is_nested(&self) -> bool {
        self.level_sets
            .windows(2)
            .all(|w| w[1].iter().zip(&w[0]).all(|(&hi, &lo)| !hi || lo))
    }

    /// Number of distinct levels present in the interior.
    pub fn grain_count(&self, grid: &DomainGrid) -> usize {
        let mut seen: Vec<usize> = (0..grid.len()).filter(|&c| grid.is_interior(c)).map(|c| self.level_index[c]).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Minimises the discrete anisotropic total variation over maps with values
/// in the datum levels, one binary min-cut per gap.
///
/// Gaps are processed from the top: the set `{u >= m_{i+1}}` is forced to
/// contain `{u >= m_{i+2}}`. Each cut returns the minimal optimal set, and
/// minimal optimal sets of a parametric family with growing boundary data
/// are nested, so the constraint never binds at the optimum.
pub fn solve_polycrystal(stencil: &PerimeterStencil, grid: &DomainGrid, datum: &BoundaryDatum) -> Result<GrainMap, PolycrystalError> {
    check_reach(stencil, grid)?;
    let k = datum.level_count();
    let mut level_sets: Vec<Vec<bool>> = Vec::with_capacity(k.saturating_sub(1));
    let mut perimeters = Vec::new();
    let mut stats = Vec::new();
    for gap in (0..k.saturating_sub(1)).rev() {
        let forced = level_sets.last().cloned();
        let fixed: Vec<Option<bool>> = (0..grid.len())
            .map(|c| {
                if !grid.is_interior(c) {
                    Some(datum.assignment()[c] > gap)
                } else if forced.as_ref().is_some_and(|f| f[c]) {
                    Some(true)
                } else {
                    None
                }
            })
            .collect();
        let (set, cost, flow) = binary_min_cut(stencil, grid, &fixed);
        stats.push(SolverStats { gap, cut_cost: cost, flow });
        perimeters.push(discrete_perimeter(stencil, grid, &set));
        level_sets.push(set);
    }
    level_sets.reverse();
    perimeters.reverse();
    stats.reverse();
    Ok(GrainMap::assemble(grid, datum, level_sets, perimeters, stats))
}

fn check_reach(stencil: &PerimeterStencil, grid: &DomainGrid) -> Result<(), PolycrystalError> {
    let required = stencil.kind().reach();
    if grid.margin() < required {
        return Err(PolycrystalError::MarginTooSmall { margin: grid.margin(), required });
    }
    Ok(())
}

/// Minimal set `E` minimising `sum c_d [p not in E, p + d in E]` subject to
/// the fixed cells. Returns the set (fixed cells included), its cost and
/// flow statistics.
pub(crate) fn binary_min_cut(stencil: &PerimeterStencil, grid: &DomainGrid, fixed: &[Option<bool>]) -> (Vec<bool>, f64, FlowStats) {
    let mut node = vec![usize::MAX; grid.len()];
    let mut free = 0;
    for c in 0..grid.len() {
        if fixed[c].is_none() {
            node[c] = free;
            free += 1;
        }
    }
    let (s, t) = (free, free + 1);
    let mut net = FlowNetwork::new(free + 2);
    let mut constant = 0.0;
    for p in 0..grid.len() {
        let (i, j) = grid.coords(p);
        for ((di, dj), c) in stencil.weights() {
            let Some(q) = grid.offset(i, j, di, dj) else { continue };
            if c == 0.0 || !(grid.is_interior(p) || grid.is_interior(q)) {
                continue;
            }
            // Cost c when p is outside and q inside.
            match (fixed[p], fixed[q]) {
                (None, None) => net.add_arc(node[q], node[p], c),
                (None, Some(true)) => net.add_arc(s, node[p], c),
                (Some(false), None) => net.add_arc(node[q], t, c),
                (Some(false), Some(true)) => constant += c,
                _ => {}
            }
        }
    }
    let (flow, stats) = net.max_flow(s, t);
    let side = net.source_side(s);
    let set: Vec<bool> = (0..grid.len()).map(|c| fixed[c].unwrap_or_else(|| side[node[c]])).collect();
    (set, flow + constant, stats)
}

/// Replaces an arbitrary field by a piecewise-constant one on the datum
/// levels without increasing the energy.
///
/// `u` is clamped to `[m_1, m_k]`; for each gap the superlevel set
/// `{u > v}` with least perimeter among all thresholds `v` in the gap is kept.
pub fn flatten_to_polycrystal(stencil: &PerimeterStencil, grid: &DomainGrid, datum: &BoundaryDatum, u: &[f64]) -> Result<GrainMap, PolycrystalError> {
    check_reach(stencil, grid)?;
    let levels = datum.levels();
    let (lo, hi) = (levels[0], levels[levels.len() - 1]);
    let field: Vec<f64> = extended_field(grid, datum, u)?.into_iter().map(|v| v.clamp(lo, hi)).collect();
    let mut level_sets = Vec::new();
    let mut perimeters = Vec::new();
    for gap in 0..levels.len().saturating_sub(1) {
        let (a, b) = (levels[gap], levels[gap + 1]);
        let mut thresholds: Vec<f64> = field.iter().copied().filter(|&v| v > a && v < b).collect();
        thresholds.push(a);
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let (best_v, best_p) = thresholds
            .par_iter()
            .map(|&v| {
                let set: Vec<bool> = field.iter().map(|&x| x > v).collect();
                (v, discrete_perimeter(stencil, grid, &set))
            })
            .reduce(
                || (f64::INFINITY, f64::INFINITY),
                |x, y| if y.1 < x.1 || (y.1 == x.1 && y.0 < x.0) { y } else { x },
            );
        level_sets.push(field.iter().map(|&x| x > best_v).collect());
        perimeters.push(best_p);
    }
    let map = GrainMap::assemble(grid, datum, level_sets, perimeters, Vec::new());
    debug_assert!(bv_energy_with(stencil, grid, datum, &map.values).is_ok());
    Ok(map)
}
