//! Limit polycrystal problem: anisotropic total variation with a
//! piecewise-constant boundary datum, solved on a grid through nested
//! binary min-cuts.
//!
//! The domain `Omega` is the set of interior cells; the exterior cells form
//! the extension `Omega'` and carry the datum, so the boundary term of the
//! energy becomes ordinary interface terms between interior and exterior.

mod limit;
pub mod maxflow;
mod solve;

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::elastostatics::Vec2;
use crate::relaxation::DensityFunction;

pub use limit::{evaluate_limit_functional, LimitState};
pub use solve::{flatten_to_polycrystal, solve_polycrystal, GrainMap, SolverStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolycrystalError {
    #[error("grid must have positive size and spacing, got {nx} x {ny}, h = {h}")]
    BadGrid { nx: usize, ny: usize, h: f64 },
    #[error("mask has {got} cells, grid has {expected}")]
    MaskSize { got: usize, expected: usize },
    #[error("domain has no interior cells")]
    EmptyInterior,
    #[error("interior cells are not 4-connected")]
    Disconnected,
    #[error("margin {margin} is below the required {required}")]
    MarginTooSmall { margin: usize, required: usize },
    #[error("levels must be finite and strictly increasing")]
    BadLevels,
    #[error("datum assignment has {got} entries, grid has {expected} cells")]
    AssignmentSize { got: usize, expected: usize },
    #[error("exterior cell {cell} has level index {index}, only {levels} levels")]
    BadAssignment { cell: usize, index: usize, levels: usize },
    #[error("field has {got} values, grid has {expected} cells")]
    FieldSize { got: usize, expected: usize },
    #[error("field value at cell {0} is not finite")]
    NonFiniteField(usize),
    #[error("sector count must be at least 1")]
    BadSectors,
}

/// Rectangular array of square cells, each interior (in `Omega`) or exterior.
/// Cell `(i, j)` has index `j * nx + i` and lower-left corner
/// `origin + h (i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    nx: usize,
    ny: usize,
    h: f64,
    origin: Vec2,
    interior: Vec<bool>,
    margin: usize,
}

impl DomainGrid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: Vec2, interior: Vec<bool>, margin: usize) -> Result<Self, PolycrystalError> {
        if nx == 0 || ny == 0 || !(h > 0.0 && h.is_finite()) {
            return Err(PolycrystalError::BadGrid { nx, ny, h });
        }
        if interior.len() != nx * ny {
            return Err(PolycrystalError::MaskSize { got: interior.len(), expected: nx * ny });
        }
        let grid = Self { nx, ny, h, origin, interior, margin };
        grid.validate()?;
        Ok(grid)
    }

    /// `Omega = (0, extent)^2` split into `n x n` interior cells, surrounded by
    /// `margin` exterior rings.
    pub fn square(n: usize, extent: f64, margin: usize) -> Result<Self, PolycrystalError> {
        Self::rectangle(n, n, extent / n as f64, margin)
    }

    /// `Omega = (0, nx h) x (0, ny h)`, surrounded by `margin` exterior rings.
    pub fn rectangle(nx: usize, ny: usize, h: f64, margin: usize) -> Result<Self, PolycrystalError> {
        let (tx, ty) = (nx + 2 * margin, ny + 2 * margin);
        let mut interior = vec![false; tx * ty];
        for j in 0..ny {
            for i in 0..nx {
                interior[(j + margin) * tx + i + margin] = true;
            }
        }
        let origin = Vec2::new(-(margin as f64) * h, -(margin as f64) * h);
        Self::new(tx, ty, h, origin, interior, margin)
    }

    fn validate(&self) -> Result<(), PolycrystalError> {
        if self.margin < 1 {
            return Err(PolycrystalError::MarginTooSmall { margin: self.margin, required: 1 });
        }
        let cells: Vec<usize> = (0..self.len()).filter(|&c| self.interior[c]).collect();
        let Some(&start) = cells.first() else {
            return Err(PolycrystalError::EmptyInterior);
        };
        let clearance = cells
            .iter()
            .map(|&c| {
                let (i, j) = self.coords(c);
                i.min(j).min(self.nx - 1 - i).min(self.ny - 1 - j)
            })
            .min()
            .unwrap_or(0);
        if clearance < self.margin {
            return Err(PolycrystalError::MarginTooSmall { margin: clearance, required: self.margin });
        }
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for n in self.neighbours4(c) {
                if self.interior[n] && !seen[n] {
                    seen[n] = true;
                    count += 1;
                    queue.push_back(n);
                }
            }
        }
        if count != cells.len() {
            return Err(PolycrystalError::Disconnected);
        }
        Ok(())
    }

    fn neighbours4(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(c);
        [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .filter_map(move |(di, dj)| self.offset(i, j, di, dj))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_interior(&self, c: usize) -> bool {
        self.interior[c]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// `|Omega|`.
    pub fn area(&self) -> f64 {
        self.interior_count() as f64 * self.h * self.h
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn offset(&self, i: usize, j: usize, di: i64, dj: i64) -> Option<usize> {
        let (a, b) = (i as i64 + di, j as i64 + dj);
        (a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny).then(|| self.index(a as usize, b as usize))
    }

    pub fn center(&self, c: usize) -> Vec2 {
        let (i, j) = self.coords(c);
        self.origin + Vec2::new((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    /// Bounding box of the interior cells: lower-left and upper-right corners.
    pub fn interior_bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in (0..self.len()).filter(|&c| self.interior[c]) {
            let p = self.center(c);
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let half = Vec2::new(0.5 * self.h, 0.5 * self.h);
        (lo - half, hi + half)
    }
}

/// How exterior cells are split among the levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DatumLayout {
    /// Every exterior cell gets level `index`.
    Constant(usize),
    /// Level 0 left of the vertical midline of `Omega`, level 1 right of it.
    LeftRight,
    /// Level 0 below the horizontal midline, level 1 above it.
    TopBottom,
    /// `count` equal angular sectors around the centre of `Omega`; sector `s`
    /// gets level `s mod k`.
    Sectors(usize),
}

/// Levels `m_1 < ... < m_k` and a level index for every exterior cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDatum {
    levels: Vec<f64>,
    assignment: Vec<usize>,
}

impl BoundaryDatum {
    /// `assignment[c]` is read for exterior cells only.
    pub fn new(grid: &DomainGrid, levels: Vec<f64>, assignment: Vec<usize>) -> Result<Self, PolycrystalError> {
        if levels.is_empty() || levels.iter().any(|m| !m.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PolycrystalError::BadLevels);
        }
        if assignment.len() != grid.len() {
            return Err(PolycrystalError::AssignmentSize { got: assignment.len(), expected: grid.len() });
        }
        for c in 0..grid.len() {
            if !grid.is_interior(c) && assignment[c] >= levels.len() {
                return Err(PolycrystalError::BadAssignment { cell: c, index: assignment[c], levels: levels.len() });
            }
        }
        let assignment = (0..grid.len()).map(|c| if grid.is_interior(c) { 0 } else { assignment[c] }).collect();
        Ok(Self { levels, assignment })
    }

    pub fn with_layout(grid: &DomainGrid, levels: Vec<f64>, layout: DatumLayout) -> Result<Self, PolycrystalError> {
        let k = levels.len();
        let (lo, hi) = grid.interior_bounds();
        let mid = (lo + hi) * 0.5;
        let assignment = (0..grid.len())
            .map(|c| {
                let p = grid.center(c) - mid;
                match layout {
                    DatumLayout::Constant(idx) => Ok(idx),
                    DatumLayout::LeftRight => Ok(usize::from(p.x > 0.0)),
                    DatumLayout::TopBottom => Ok(usize::from(p.y > 0.0)),
                    DatumLayout::Sectors(0) => Err(PolycrystalError::BadSectors),
                    DatumLayout::Sectors(n) => {
                        let a = p.y.atan2(p.x).rem_euclid(2.0 * std::f64::consts::PI);
                        let s = ((a / (2.0 * std::f64::consts::PI) * n as f64).floor() as usize).min(n - 1);
                        Ok(s % k.max(1))
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(grid, levels, assignment)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Datum value of an exterior cell.
    pub fn value(&self, c: usize) -> f64 {
        self.levels[self.assignment[c]]
    }

    /// Per-cell level indices with every interior cell copying its nearest
    /// exterior cell (ties by index). A feasible competitor for the solver.
    pub fn nearest_extension(&self, grid: &DomainGrid) -> Vec<usize> {
        let mut idx = vec![usize::MAX; grid.len()];
        let mut queue = VecDeque::new();
        for c in 0..grid.len() {
            if !grid.is_interior(c) {
                idx[c] = self.assignment[c];
                queue.push_back(c);
            }
        }
        while let Some(c) = queue.pop_front() {
            for n in grid.neighbours4(c) {
                if idx[n] == usize::MAX {
                    idx[n] = idx[c];
                    queue.push_back(n);
                }
            }
        }
        idx
    }

    /// Multiplies every level by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { levels: self.levels.iter().map(|m| m * s).collect(), assignment: self.assignment.clone() }
    }
}

/// Neighbourhood used to discretise the anisotropic perimeter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StencilKind {
    #[default]
    Four,
    Eight,
    Sixteen,
}

impl StencilKind {
    pub fn from_size(n: usize) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            16 => Some(Self::Sixteen),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
            Self::Sixteen => 16,
        }
    }

    /// Largest cell offset in the stencil.
    pub fn reach(self) -> usize {
        match self {
            Self::Sixteen => 2,
            _ => 1,
        }
    }

    fn offsets(self) -> Vec<(i64, i64)> {
        let mut v = vec![(1, 0), (-1, 0), (0, 1), (0, -1)];
        if matches!(self, Self::Eight | Self::Sixteen) {
            v.extend([(1, 1), (-1, -1), (1, -1), (-1, 1)]);
        }
        if self == Self::Sixteen {
            v.extend([(1, 2), (-1, -2), (2, 1), (-2, -1), (2, -1), (-2, 1), (1, -2), (-1, 2)]);
        }
        v
    }
}

impl fmt::Display for StencilKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.size())
    }
}

/// Pair weights `c_d >= 0` such that the discrete perimeter
/// `sum_p sum_d c_d [p not in E, p + d in E]` approximates the
/// `phi`-perimeter of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterStencil {
    kind: StencilKind,
    offsets: Vec<(i64, i64)>,
    weights: Vec<f64>,
}

const FIT_NORMALS: usize = 720;
const FIT_ITERATIONS: usize = 20_000;

impl PerimeterStencil {
    /// For the 4-neighbourhood `c_d = h phi(d)` exactly; wider stencils fit
    /// `sum_d c_d (nu · d)_+ = h phi(nu)` over sampled normals by nonnegative
    /// least squares.
    pub fn new(density: &DensityFunction, h: f64, kind: StencilKind) -> Self {
        let offsets = kind.offsets();
        let weights = match kind {
            StencilKind::Four => offsets.iter().map(|&(a, b)| h * density.phi_eval(Vec2::new(a as f64, b as f64))).collect(),
            _ => fit_weights(density, h, &offsets),
        };
        Self { kind, offsets, weights }
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    pub fn weights(&self) -> impl Iterator<Item = ((i64, i64), f64)> + '_ {
        self.offsets.iter().copied().zip(self.weights.iter().copied())
    }

    /// Discrete `h phi(nu)` for a unit normal `nu`.
    pub fn response(&self, nu: Vec2) -> f64 {
        self.weights().map(|((a, b), c)| c * nu.dot(Vec2::new(a as f64, b as f64)).max(0.0)).sum()
    }
}

fn fit_weights(density: &DensityFunction, h: f64, offsets: &[(i64, i64)]) -> Vec<f64> {
    let m = offsets.len();
    let rows: Vec<(Vec<f64>, f64)> = (0..FIT_NORMALS)
        .map(|k| {
            let nu = Vec2::from_angle(2.0 * std::f64::consts::PI * k as f64 / FIT_NORMALS as f64);
            let target = h * density.phi_eval(nu);
            let row = offsets
                .iter()
                .map(|&(a, b)| nu.dot(Vec2::new(a as f64, b as f64)).max(0.0) / target)
                .collect();
            (row, 1.0)
        })
        .collect();
    // Lipschitz constant of the gradient: largest eigenvalue of A^T A,
    // bounded by its Frobenius norm.
    let mut ata = vec![0.0; m * m];
    for (row, _) in &rows {
        for p in 0..m {
            for q in 0..m {
                ata[p * m + q] += row[p] * row[q];
            }
        }
    }
    let lipschitz = ata.iter().map(|v| v * v).sum::<f64>().sqrt();
    let atb: Vec<f64> = (0..m).map(|p| rows.iter().map(|(r, b)| r[p] * b).sum()).collect();
    // Accelerated projected gradient on |A c - 1|^2 / 2, c >= 0.
    let mut c = vec![0.0; m];
    let mut y = c.clone();
    let mut t = 1.0f64;
    for _ in 0..FIT_ITERATIONS {
        let grad: Vec<f64> = (0..m).map(|p| (0..m).map(|q| ata[p * m + q] * y[q]).sum::<f64>() - atb[p]).collect();
        let next: Vec<f64> = (0..m).map(|p| (y[p] - grad[p] / lipschitz).max(0.0)).collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = (0..m).map(|p| next[p] + (t - 1.0) / t_next * (next[p] - c[p])).collect();
        c = next;
        t = t_next;
    }
    c
}

/// Discrete energy of `u` for pair weights `stencil`.
///
/// `u` holds one value per cell; exterior entries are ignored and replaced
/// by the datum. Pairs with both cells exterior do not count.
pub fn bv_energy_with(stencil: &PerimeterStencil, grid: &DomainGrid, datum: &BoundaryDatum, u: &[f64]) -> Result<f64, PolycrystalError> {
    let field = extended_field(grid, datum, u)?;
    Ok(pair_sum(stencil, grid, |p, q| (field[q] - field[p]).max(0.0)))
}

/// [`bv_energy_with`] on the 4-neighbourhood.
pub fn bv_energy(density: &DensityFunction, grid: &DomainGrid, datum: &BoundaryDatum, u: &[f64]) -> Result<f64, PolycrystalError> {
    bv_energy_with(&PerimeterStencil::new(density, grid.h(), StencilKind::Four), grid, datum, u)
}

/// Discrete `phi`-perimeter of the cell set `inside`:
/// `sum c_d [p outside, p + d inside]` over counted pairs.
pub fn discrete_perimeter(stencil: &PerimeterStencil, grid: &DomainGrid, inside: &[bool]) -> f64 {
    pair_sum(stencil, grid, |p, q| if inside[q] && !inside[p] { 1.0 } else { 0.0 })
}

pub(crate) fn extended_field(grid: &DomainGrid, datum: &BoundaryDatum, u: &[f64]) -> Result<Vec<f64>, PolycrystalError> {
    if u.len() != grid.len() {
        return Err(PolycrystalError::FieldSize { got: u.len(), expected: grid.len() });
    }
    (0..grid.len())
        .map(|c| {
            if grid.is_interior(c) {
                if u[c].is_finite() {
                    Ok(u[c])
                } else {
                    Err(PolycrystalError::NonFiniteField(c))
                }
            } else {
                Ok(datum.value(c))
            }
        })
        .collect()
}

/// `sum c_d f(p, p + d)` over ordered pairs with at least one interior cell.
fn pair_sum(stencil: &PerimeterStencil, grid: &DomainGrid, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    for p in 0..grid.len() {
        let (i, j) = grid.coords(p);
        for ((di, dj), c) in stencil.weights() {
            if c == 0.0 {
                continue;
            }
            if let Some(q) = grid.offset(i, j, di, dj) {
                if grid.is_interior(p) || grid.is_interior(q) {
                    total += c * f(p, q);
                }
            }
        }
    }
    total
}
