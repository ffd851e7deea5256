use crate::elastostatics::{ElasticityTensor, Matrix2, Vec2};
use crate::relaxation::DensityFunction;

use super::{BoundaryDatum, DomainGrid, PolycrystalError};

const COMPATIBILITY_TOLERANCE: f64 = 1e-9;

/// Triplet `(mu, S, A)` on a grid: symmetric strain `S` and rotation scalar
/// `u` per cell (`A = [[0, u], [-u, 0]]`), and the dislocation measure on the
/// faces between interior cells.
///
/// Face `(i, j)` of `mu_x` separates cells `(i, j)` and `(i + 1, j)`; face
/// `(i, j)` of `mu_y` separates `(i, j)` and `(i, j + 1)`. Faces not between
/// two interior cells are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub strain: Vec<Matrix2>,
    pub rotation: Vec<f64>,
    pub mu_x: Vec<Vec2>,
    pub mu_y: Vec<Vec2>,
}

impl LimitState {
    pub fn zero(grid: &DomainGrid) -> Self {
        let n = grid.len();
        Self { strain: vec![Matrix2::ZERO; n], rotation: vec![0.0; n], mu_x: vec![Vec2::ZERO; n], mu_y: vec![Vec2::ZERO; n] }
    }

    /// State with `S = 0` whose measure is `Curl A = D u` for the given `u`.
    pub fn from_rotation(grid: &DomainGrid, rotation: Vec<f64>) -> Result<Self, PolycrystalError> {
        if rotation.len() != grid.len() {
            return Err(PolycrystalError::FieldSize { got: rotation.len(), expected: grid.len() });
        }
        let mut state = Self { rotation, ..Self::zero(grid) };
        state.mu_x = state.expected_measure(grid, 1, 0);
        state.mu_y = state.expected_measure(grid, 0, 1);
        Ok(state)
    }

    /// Per-cell `A`.
    pub fn rotation_matrix(&self, c: usize) -> Matrix2 {
        Matrix2::skew_from_scalar(self.rotation[c])
    }

    fn expected_measure(&self, grid: &DomainGrid, di: i64, dj: i64) -> Vec<Vec2> {
        let normal = Vec2::new(di as f64, dj as f64);
        (0..grid.len())
            .map(|p| {
                let (i, j) = grid.coords(p);
                match grid.offset(i, j, di, dj) {
                    Some(q) if grid.is_interior(p) && grid.is_interior(q) => normal * ((self.rotation[q] - self.rotation[p]) * grid.h()),
                    _ => Vec2::ZERO,
                }
            })
            .collect()
    }

    /// `Curl A = mu` face by face, within tolerance.
    pub fn is_compatible(&self, grid: &DomainGrid) -> bool {
        let check = |mu: &[Vec2], di, dj| {
            self.expected_measure(grid, di, dj).iter().zip(mu).enumerate().all(|(p, (e, m))| {
                let (i, j) = grid.coords(p);
                match grid.offset(i, j, di, dj) {
                    Some(q) if grid.is_interior(p) && grid.is_interior(q) => (*e - *m).norm() <= COMPATIBILITY_TOLERANCE * (1.0 + e.norm()),
                    _ => true,
                }
            })
        };
        let n = grid.len();
        self.strain.len() == n && self.rotation.len() == n && self.mu_x.len() == n && self.mu_y.len() == n && check(&self.mu_x, 1, 0) && check(&self.mu_y, 0, 1)
    }
}

/// `∫ W(S) + ∫ phi(dmu / d|mu|) d|mu|`, plus the boundary jumps against the
/// datum when one is given; `+inf` if `Curl A != mu`.
pub fn evaluate_limit_functional(
    tensor: &ElasticityTensor,
    density: &DensityFunction,
    grid: &DomainGrid,
    state: &LimitState,
    datum: Option<&BoundaryDatum>,
) -> f64 {
    if !state.is_compatible(grid) {
        return f64::INFINITY;
    }
    let h = grid.h();
    let mut total = 0.0;
    for c in (0..grid.len()).filter(|&c| grid.is_interior(c)) {
        total += h * h * tensor.energy_density(state.strain[c]);
    }
    for p in 0..grid.len() {
        total += density.phi_eval(state.mu_x[p]) + density.phi_eval(state.mu_y[p]);
    }
    if let Some(datum) = datum {
        for p in (0..grid.len()).filter(|&p| grid.is_interior(p)) {
            let (i, j) = grid.coords(p);
            for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                if let Some(q) = grid.offset(i, j, di, dj) {
                    if !grid.is_interior(q) {
                        let jump = datum.value(q) - state.rotation[p];
                        total += h * density.phi_eval(Vec2::new(di as f64, dj as f64) * jump);
                    }
                }
            }
        }
    }
    total
}
