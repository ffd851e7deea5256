//! Cell-problem self-energies of a single edge dislocation.
//!
//! Three quantities are computed for a Burgers vector `xi`:
//!
//! * [`psi_quadrature`]: the Volterra energy `∫_{B_R \ B_eps} W(beta_0(xi))`
//!   divided by `|log eps|`;
//! * [`psi_limit`]: its `eps -> 0` limit, the self-energy `psi(xi)`;
//! * [`psi_bar_direct`]: the hard-core cell problem on `B_rho \ B_eps`,
//!   minimised over all circulation-compatible strains.
//!
//! Every competitor in the hard-core problem has the form `beta_0 + grad u`:
//! the difference of two curl-free fields with the same circulation around the
//! hole has zero circulation, hence is a gradient on the annulus. So the
//! minimisation runs over displacement corrections `u` with free (traction-free)
//! boundary values on both circles.
//!
//! All work happens in log-polar coordinates `x = e^s (cos theta, sin theta)`.
//! `beta_0` is homogeneous of degree −1, so `r beta_0` depends on `theta` only
//! and `W(beta) dx = W(r beta) ds dtheta`: the annulus problem is translation
//! invariant in `s` and uniform cells in `s` are geometric cells in `r`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::elastostatics::{EdgeDislocation, ElasticityTensor, Matrix2, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfEnergyError {
    #[error("annulus radii must satisfy 0 < inner < outer, got inner = {inner}, outer = {outer}")]
    BadRadii { inner: f64, outer: f64 },
    #[error("core radius must lie in (0, 1), got {0}")]
    BadCoreRadius(f64),
    #[error("hard-core problem needs 0 < eps < rho / 2, got eps = {eps}, rho = {rho}")]
    BadHardCore { eps: f64, rho: f64 },
    #[error("annulus grid needs at least one radial and three angular cells, got {radial} x {angular}")]
    BadResolution { radial: usize, angular: usize },
    #[error("Burgers vector must be finite")]
    NonFinite,
    #[error("self-energy not converged: psi at eps = {eps} and eps/10 differ by {rel_diff:.3e} (relative)")]
    RichardsonMismatch { eps: f64, rel_diff: f64 },
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Polar tiling of `B_outer \ B_inner` into `radial x angular` cells with
/// geometric radial spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusGrid {
    inner: f64,
    outer: f64,
    radial: usize,
    angular: usize,
}

pub const DEFAULT_RADIAL_CELLS: usize = 64;
pub const DEFAULT_ANGULAR_CELLS: usize = 128;

impl AnnulusGrid {
    pub fn new(inner: f64, outer: f64, radial: usize, angular: usize) -> Result<Self, SelfEnergyError> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(SelfEnergyError::BadRadii { inner, outer });
        }
        if radial == 0 || angular < 3 {
            return Err(SelfEnergyError::BadResolution { radial, angular });
        }
        Ok(Self { inner, outer, radial, angular })
    }

    /// `C_eps = B_1 \ B_eps` at the default resolution.
    pub fn core_annulus(eps: f64) -> Result<Self, SelfEnergyError> {
        Self::new(eps, 1.0, DEFAULT_RADIAL_CELLS, DEFAULT_ANGULAR_CELLS)
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn radial(&self) -> usize {
        self.radial
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    /// `log(outer / inner)`, the length of the annulus in the log-radius.
    pub fn log_length(&self) -> f64 {
        (self.outer / self.inner).ln()
    }

    /// Radii `r_0 = inner < r_1 < ... < r_radial = outer`.
    pub fn radii(&self) -> Vec<f64> {
        let ds = self.log_length() / self.radial as f64;
        (0..=self.radial)
            .map(|i| if i == self.radial { self.outer } else { self.inner * (ds * i as f64).exp() })
            .collect()
    }

    /// Area of cell `(i, j)`; all angular cells of a ring are congruent.
    pub fn cell_area(&self, i: usize) -> f64 {
        let r = self.radii();
        0.5 * (r[i + 1] * r[i + 1] - r[i] * r[i]) * (2.0 * PI / self.angular as f64)
    }

    /// Same tiling, each cell split in two along both directions.
    pub fn refined(&self) -> Self {
        Self { radial: 2 * self.radial, angular: 2 * self.angular, ..*self }
    }
}

/// `∫ W(beta_0(xi)) dx` over the annulus, midpoint rule on the log-polar cells.
///
/// The integrand is `f(theta) / r^2`, for which the log-radius midpoint rule is
/// exact; the angular rule is exact for trigonometric polynomials of degree
/// below the angular cell count.
pub fn volterra_annulus_energy(tensor: &ElasticityTensor, xi: Vec2, grid: &AnnulusGrid) -> f64 {
    let field = EdgeDislocation::new(tensor, xi);
    let ds = grid.log_length() / grid.radial as f64;
    let dtheta = 2.0 * PI / grid.angular as f64;
    let s0 = grid.inner.ln();
    let mut total = 0.0;
    for i in 0..grid.radial {
        let r = (s0 + (i as f64 + 0.5) * ds).exp();
        let weight = r * r * ds * dtheta;
        let ring: f64 = (0..grid.angular)
            .map(|j| {
                let x = Vec2::from_angle((j as f64 + 0.5) * dtheta) * r;
                tensor.energy_density(field.strain(x))
            })
            .sum();
        total += ring * weight;
    }
    total
}

/// Volterra energy of the annulus divided by `|log eps|`, `eps = grid.inner()`.
pub fn psi_quadrature(tensor: &ElasticityTensor, xi: Vec2, grid: &AnnulusGrid) -> Result<f64, SelfEnergyError> {
    if !xi.is_finite() {
        return Err(SelfEnergyError::NonFinite);
    }
    let eps = grid.inner;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SelfEnergyError::BadCoreRadius(eps));
    }
    Ok(volterra_annulus_energy(tensor, xi, grid) / eps.ln().abs())
}

pub const DEFAULT_LIMIT_EPS: f64 = 1e-3;
const RICHARDSON_TOLERANCE: f64 = 0.01;

/// Self-energy `psi(xi)`: [`psi_quadrature`] at `eps = 1e-3` on `C_eps`,
/// cross-checked at `eps / 10`.
pub fn psi_limit(tensor: &ElasticityTensor, xi: Vec2) -> Result<f64, SelfEnergyError> {
    psi_limit_at(tensor, xi, DEFAULT_LIMIT_EPS)
}

pub fn psi_limit_at(tensor: &ElasticityTensor, xi: Vec2, eps: f64) -> Result<f64, SelfEnergyError> {
    let coarse = psi_quadrature(tensor, xi, &AnnulusGrid::core_annulus(eps)?)?;
    let fine = psi_quadrature(tensor, xi, &AnnulusGrid::core_annulus(eps / 10.0)?)?;
    let scale = coarse.abs().max(fine.abs());
    if scale > 0.0 {
        let rel_diff = (coarse - fine).abs() / scale;
        if rel_diff > RICHARDSON_TOLERANCE {
            return Err(SelfEnergyError::RichardsonMismatch { eps, rel_diff });
        }
    }
    Ok(coarse)
}

/// Closed-form self-energy coefficient of an isotropic body,
/// `mu / (4 pi (1 - nu))`, so that `psi(xi) = coefficient * |xi|^2`.
pub fn isotropic_line_energy_coefficient(tensor: &ElasticityTensor) -> f64 {
    tensor.mu() / (4.0 * PI * (1.0 - tensor.poisson_ratio()))
}

/// Constant `c` with `|xi|^2 / c <= psi(xi) <= c |xi|^2`, measured on 360
/// unit directions.
pub fn psi_bound_constant(tensor: &ElasticityTensor) -> Result<f64, SelfEnergyError> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..360 {
        let v = psi_limit(tensor, Vec2::from_angle(k as f64 * PI / 180.0))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi.max(1.0 / lo))
}

/// `psi` as the quadratic form it is: `psi(xi) = xi · Q xi`, with `Q`
/// recovered from [`psi_limit`] at `e1`, `e2` and `e1 + e2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSelfEnergy {
    pub form: Matrix2,
}

impl QuadraticSelfEnergy {
    pub fn from_tensor(tensor: &ElasticityTensor) -> Result<Self, SelfEnergyError> {
        let a = psi_limit(tensor, Vec2::E1)?;
        let d = psi_limit(tensor, Vec2::E2)?;
        let s = psi_limit(tensor, Vec2::new(1.0, 1.0))?;
        let off = 0.5 * (s - a - d);
        Ok(Self { form: Matrix2::new(a, off, off, d) })
    }

    /// `psi(xi) = k |xi|^2`.
    pub fn isotropic(k: f64) -> Self {
        Self { form: Matrix2::IDENTITY * k }
    }

    pub fn eval(&self, xi: Vec2) -> f64 {
        xi.dot(self.form.apply(xi))
    }
}

/// Conjugate-gradient knobs of [`psi_bar_direct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target.
    pub tolerance: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_iterations: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardCoreSolution {
    /// `min ∫ W / |log eps|`.
    pub psi_bar: f64,
    /// Minimal energy itself.
    pub energy: f64,
    /// Energy of the uncorrected Volterra strain on the same grid.
    pub volterra_energy: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Hard-core self-energy `psi_bar_eps(xi)` on `B_rho \ B_eps`.
///
/// `grid` fixes the radii (`eps = grid.inner()`, `rho = grid.outer()`) and the
/// resolution. The correction displacement is bilinear on the log-polar cells;
/// integration uses 2 Gauss points in `s` (exact, the integrand is quadratic
/// there) and 3 in `theta`.
pub fn psi_bar_direct(
    tensor: &ElasticityTensor,
    xi: Vec2,
    grid: &AnnulusGrid,
    cg: CgOptions,
) -> Result<HardCoreSolution, SelfEnergyError> {
    if !xi.is_finite() {
        return Err(SelfEnergyError::NonFinite);
    }
    let (eps, rho) = (grid.inner, grid.outer);
    if !(eps > 0.0 && eps < 1.0 && 2.0 * eps < rho) {
        return Err(SelfEnergyError::BadHardCore { eps, rho });
    }
    let log_eps = eps.ln().abs();
    let problem = LogPolarProblem::assemble(tensor, xi, grid);
    let (u, iterations, residual) = problem.solve(cg)?;
    let energy = problem.energy(&u);
    let volterra_energy = problem.energy(&vec![0.0; u.len()]);
    Ok(HardCoreSolution {
        psi_bar: energy / log_eps,
        energy,
        volterra_energy,
        iterations,
        residual,
    })
}

const GAUSS2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Quadratic energy `E(u) = e0 + b·u + 1/2 u·K u`, with element matrices that
/// depend on the angular column only.
struct LogPolarProblem {
    radial: usize,
    angular: usize,
    /// Per angular column: 8×8 element stiffness, row-major.
    stiffness: Vec<[f64; 64]>,
    /// Per angular column: element load (gradient of the linear term).
    load: Vec<[f64; 8]>,
    /// Per angular column: element energy of the Volterra strain.
    base_energy: Vec<f64>,
}

impl LogPolarProblem {
    fn assemble(tensor: &ElasticityTensor, xi: Vec2, grid: &AnnulusGrid) -> Self {
        let field = EdgeDislocation::new(tensor, xi);
        let ds = grid.log_length() / grid.radial as f64;
        let dtheta = 2.0 * PI / grid.angular as f64;
        let mut stiffness = Vec::with_capacity(grid.angular);
        let mut load = Vec::with_capacity(grid.angular);
        let mut base_energy = Vec::with_capacity(grid.angular);
        for j in 0..grid.angular {
            let mut k = [0.0; 64];
            let mut b = [0.0; 8];
            let mut e0 = 0.0;
            for &(gs, ws) in &GAUSS2 {
                for &(gt, wt) in &GAUSS3 {
                    let theta = (j as f64 + gt) * dtheta;
                    let er = Vec2::from_angle(theta);
                    let et = er.perp();
                    let w = ws * wt * ds * dtheta;
                    // Scaled Volterra strain r beta_0, evaluated at r = 1.
                    let base = field.strain(er);
                    // Local nodes: (i, j), (i+1, j), (i, j+1), (i+1, j+1).
                    let dn_ds = [-(1.0 - gt) / ds, (1.0 - gt) / ds, -gt / ds, gt / ds];
                    let dn_dt = [-(1.0 - gs) / dtheta, -gs / dtheta, (1.0 - gs) / dtheta, gs / dtheta];
                    let mut dg = [Matrix2::ZERO; 8];
                    for a in 0..4 {
                        let g = er * dn_ds[a] + et * dn_dt[a];
                        dg[2 * a] = Matrix2::outer(Vec2::E1, g);
                        dg[2 * a + 1] = Matrix2::outer(Vec2::E2, g);
                    }
                    let sigma_base = tensor.stress(base);
                    e0 += w * tensor.energy_density(base);
                    for p in 0..8 {
                        b[p] += w * sigma_base.contract(dg[p].sym());
                        let sp = tensor.stress(dg[p]);
                        for q in 0..8 {
                            k[8 * p + q] += w * sp.contract(dg[q].sym());
                        }
                    }
                }
            }
            stiffness.push(k);
            load.push(b);
            base_energy.push(e0);
        }
        Self { radial: grid.radial, angular: grid.angular, stiffness, load, base_energy }
    }

    fn unknowns(&self) -> usize {
        2 * (self.radial + 1) * self.angular
    }

    fn element_dofs(&self, i: usize, j: usize) -> [usize; 8] {
        let jn = (j + 1) % self.angular;
        let nodes = [i * self.angular + j, (i + 1) * self.angular + j, i * self.angular + jn, (i + 1) * self.angular + jn];
        let mut dofs = [0; 8];
        for (a, &n) in nodes.iter().enumerate() {
            dofs[2 * a] = 2 * n;
            dofs[2 * a + 1] = 2 * n + 1;
        }
        dofs
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.radial {
            for j in 0..self.angular {
                let dofs = self.element_dofs(i, j);
                let k = &self.stiffness[j];
                let local: [f64; 8] = std::array::from_fn(|q| u[dofs[q]]);
                for p in 0..8 {
                    let row = &k[8 * p..8 * p + 8];
                    out[dofs[p]] += row.iter().zip(local.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.unknowns()];
        for i in 0..self.radial {
            for j in 0..self.angular {
                for (p, &d) in self.element_dofs(i, j).iter().enumerate() {
                    b[d] -= self.load[j][p];
                }
            }
        }
        b
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.unknowns()];
        for i in 0..self.radial {
            for j in 0..self.angular {
                for (p, &d) in self.element_dofs(i, j).iter().enumerate() {
                    diag[d] += self.stiffness[j][9 * p];
                }
            }
        }
        diag
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        self.apply(u, &mut ku);
        let b = self.rhs();
        let e0: f64 = self.base_energy.iter().sum::<f64>() * self.radial as f64;
        // rhs = -load, so load·u = -rhs·u.
        let linear: f64 = -b.iter().zip(u).map(|(x, y)| x * y).sum::<f64>();
        let quad: f64 = 0.5 * ku.iter().zip(u).map(|(x, y)| x * y).sum::<f64>();
        e0 + linear + quad
    }

    /// Jacobi-preconditioned CG. Node 0 is pinned to remove the translations
    /// from the kernel.
    fn solve(&self, cg: CgOptions) -> Result<(Vec<f64>, usize, f64), SelfEnergyError> {
        let n = self.unknowns();
        let max_iter = cg.max_iterations.unwrap_or(10 * n);
        let pinned = |d: usize| d < 2;
        let mut b = self.rhs();
        b[0] = 0.0;
        b[1] = 0.0;
        let inv_diag: Vec<f64> = self
            .diagonal()
            .iter()
            .enumerate()
            .map(|(d, &v)| if pinned(d) || v <= 0.0 { 0.0 } else { 1.0 / v })
            .collect();
        let bnorm = norm(&b);
        let mut u = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok((u, 0, 0.0));
        }
        let mut r = b;
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, m)| a * m).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for it in 0..max_iter {
            self.apply(&p, &mut ap);
            ap[0] = 0.0;
            ap[1] = 0.0;
            let alpha = rz / dot(&p, &ap);
            for d in 0..n {
                u[d] += alpha * p[d];
                r[d] -= alpha * ap[d];
            }
            let res = norm(&r) / bnorm;
            if res <= cg.tolerance {
                return Ok((u, it + 1, res));
            }
            for d in 0..n {
                z[d] = r[d] * inv_diag[d];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for d in 0..n {
                p[d] = z[d] + beta * p[d];
            }
        }
        Err(SelfEnergyError::NotConverged { iterations: max_iter, residual: norm(&r) / bnorm })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One `selfenergy` run: `psi_eps` per core radius plus the limit, and the
/// hard-core values when a hard-core radius is given.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfEnergyReport {
    pub xi: Vec2,
    pub eps_list: Vec<f64>,
    pub psi_eps_values: Vec<f64>,
    pub psi_limit: f64,
    pub psi_bar_values: Option<Vec<f64>>,
}

pub fn self_energy_report(
    tensor: &ElasticityTensor,
    xi: Vec2,
    eps_list: &[f64],
    hard_core_radius: Option<f64>,
    radial: usize,
    angular: usize,
    cg: CgOptions,
) -> Result<SelfEnergyReport, SelfEnergyError> {
    let psi_limit = psi_limit(tensor, xi)?;
    let mut psi_eps_values = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        psi_eps_values.push(psi_quadrature(tensor, xi, &AnnulusGrid::new(eps, 1.0, radial, angular)?)?);
    }
    let psi_bar_values = match hard_core_radius {
        Some(rho) => {
            let mut v = Vec::with_capacity(eps_list.len());
            for &eps in eps_list {
                let grid = AnnulusGrid::new(eps, rho, radial, angular).map_err(|_| SelfEnergyError::BadHardCore { eps, rho })?;
                v.push(psi_bar_direct(tensor, xi, &grid, cg)?.psi_bar);
            }
            Some(v)
        }
        None => None,
    };
    Ok(SelfEnergyReport { xi, eps_list: eps_list.to_vec(), psi_eps_values, psi_limit, psi_bar_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ElasticityTensor {
        ElasticityTensor::isotropic(1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_tiles_the_annulus() {
        let g = AnnulusGrid::new(0.01, 1.0, 64, 128).unwrap();
        let area: f64 = (0..64).map(|i| g.cell_area(i) * 128.0).sum();
        assert!((area - PI * (1.0 - 1e-4)).abs() < 1e-12);
        assert!(AnnulusGrid::new(1.0, 1.0, 4, 4).is_err());
        assert!(AnnulusGrid::new(0.1, 1.0, 0, 4).is_err());
    }

    #[test]
    fn quadrature_rejects_bad_core_radius() {
        let c = unit();
        assert!(matches!(
            psi_quadrature(&c, Vec2::E1, &AnnulusGrid::new(1.5, 2.0, 8, 8).unwrap()),
            Err(SelfEnergyError::BadCoreRadius(_))
        ));
        assert!(AnnulusGrid::core_annulus(0.0).is_err());
        assert!(AnnulusGrid::core_annulus(1.0).is_err());
    }

    #[test]
    fn quadrature_zero_and_quadratic() {
        let c = ElasticityTensor::isotropic(0.3, 1.7).unwrap();
        let g = AnnulusGrid::core_annulus(1e-2).unwrap();
        assert_eq!(psi_quadrature(&c, Vec2::ZERO, &g).unwrap(), 0.0);
        let xi = Vec2::new(0.3, -0.8);
        let one = psi_quadrature(&c, xi, &g).unwrap();
        let two = psi_quadrature(&c, xi * 2.0, &g).unwrap();
        assert!((two - 4.0 * one).abs() <= 1e-13 * two);
    }

    #[test]
    fn quadrature_is_eps_independent() {
        let c = unit();
        let a = psi_quadrature(&c, Vec2::E1, &AnnulusGrid::core_annulus(1e-2).unwrap()).unwrap();
        let b = psi_quadrature(&c, Vec2::E1, &AnnulusGrid::core_annulus(1e-3).unwrap()).unwrap();
        assert!((a - b).abs() / a < 1e-3);
    }

    #[test]
    fn limit_matches_classical_line_energy() {
        // Frozen: 1 / (3 pi) for lambda = mu = 1 (nu = 1/4); reproduced by an
        // independent 4096-node angular quadrature during development.
        let c = unit();
        let psi = psi_limit(&c, Vec2::E1).unwrap();
        assert!((psi - 0.106_103_295_394_596_9).abs() < 1e-12);
        assert!((psi - isotropic_line_energy_coefficient(&c)).abs() < 1e-12);
        let psi2 = psi_limit(&c, Vec2::E2).unwrap();
        assert!((psi - psi2).abs() <= 1e-6 * psi);
        for s in [2.0, 3.0, 0.5] {
            let v = psi_limit(&c, Vec2::E1 * s).unwrap();
            assert!((v - s * s * psi).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn psi_two_sided_bound() {
        let c = ElasticityTensor::isotropic(2.0, 0.7).unwrap();
        let k = psi_bound_constant(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let xi = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let psi = psi_limit(&c, xi).unwrap();
            let n2 = xi.norm_sq();
            assert!(psi >= n2 / k * (1.0 - 1e-9) && psi <= k * n2 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn hard_core_zero_burgers() {
        let c = unit();
        let g = AnnulusGrid::new(1e-3, 0.5, 16, 32).unwrap();
        let sol = psi_bar_direct(&c, Vec2::ZERO, &g, CgOptions::default()).unwrap();
        assert_eq!(sol.psi_bar, 0.0);
    }

    #[test]
    fn hard_core_rejects_thin_annulus() {
        let c = unit();
        let g = AnnulusGrid::new(0.3, 0.5, 16, 32).unwrap();
        assert!(matches!(psi_bar_direct(&c, Vec2::E1, &g, CgOptions::default()), Err(SelfEnergyError::BadHardCore { .. })));
    }

    #[test]
    fn hard_core_below_volterra_energy() {
        let c = unit();
        let g = AnnulusGrid::new(1e-3, 0.5, 32, 64).unwrap();
        let sol = psi_bar_direct(&c, Vec2::E1, &g, CgOptions::default()).unwrap();
        let quad = volterra_annulus_energy(&c, Vec2::E1, &g) / 1e-3f64.ln().abs();
        assert!(sol.psi_bar <= quad + 1e-9);
        assert!((sol.volterra_energy - volterra_annulus_energy(&c, Vec2::E1, &g)).abs() < 1e-9);
    }

    #[test]
    fn hard_core_quadratic_in_burgers_vector() {
        let c = ElasticityTensor::isotropic(0.5, 1.0).unwrap();
        let g = AnnulusGrid::new(1e-2, 0.5, 16, 32).unwrap();
        let xi = Vec2::new(0.6, 0.2);
        let one = psi_bar_direct(&c, xi, &g, CgOptions::default()).unwrap().psi_bar;
        let three = psi_bar_direct(&c, xi * 3.0, &g, CgOptions::default()).unwrap().psi_bar;
        assert!((three - 9.0 * one).abs() <= 1e-8 * three);
    }

    #[test]
    fn hard_core_cg_cap_is_reported() {
        let c = unit();
        let g = AnnulusGrid::new(1e-3, 0.5, 16, 32).unwrap();
        let res = psi_bar_direct(&c, Vec2::E1, &g, CgOptions { tolerance: 1e-14, max_iterations: Some(3) });
        assert!(matches!(res, Err(SelfEnergyError::NotConverged { iterations: 3, .. })));
    }

    /// Hollow cylinder with traction-free faces and a Volterra edge
    /// dislocation: `E = psi (L - tanh L)` with `L = log(rho / eps)`.
    fn hollow_cylinder_energy(psi: f64, eps: f64, rho: f64) -> f64 {
        let l = (rho / eps).ln();
        psi * (l - l.tanh())
    }

    #[test]
    fn hard_core_matches_hollow_cylinder_closed_form() {
        let c = unit();
        let psi = isotropic_line_energy_coefficient(&c);
        for xi in [Vec2::E1, Vec2::E2, Vec2::new(1.0, 1.0)] {
            let g = AnnulusGrid::new(1e-3, 0.5, 64, 128).unwrap();
            let sol = psi_bar_direct(&c, xi, &g, CgOptions::default()).unwrap();
            let expected = hollow_cylinder_energy(psi * xi.norm_sq(), 1e-3, 0.5);
            assert!((sol.energy - expected).abs() <= 2e-3 * expected, "{} vs {}", sol.energy, expected);
        }
    }

    #[test]
    fn hard_core_decreases_under_refinement() {
        let c = ElasticityTensor::isotropic(2.0, 1.0).unwrap();
        let mut g = AnnulusGrid::new(1e-3, 0.5, 8, 16).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..3 {
            let v = psi_bar_direct(&c, Vec2::new(0.3, 1.0), &g, CgOptions::default()).unwrap().psi_bar;
            assert!(v <= prev + 1e-12);
            prev = v;
            g = g.refined();
        }
    }
}
