#![allow(dead_code)]

use linpoly::elastostatics::{ElasticityTensor, Vec2};
use linpoly::polycrystal::{bv_energy_with, BoundaryDatum, DomainGrid, PerimeterStencil};
use linpoly::relaxation::{build_density, enumerate_lattice, BurgersLattice, DensityFunction};
use linpoly::self_energy::isotropic_line_energy_coefficient;
use rand::Rng;

pub fn unit_tensor() -> ElasticityTensor {
    ElasticityTensor::isotropic(1.0, 1.0).unwrap()
}

/// `K |xi|^2` on the square lattice: the `K l1` gauge.
pub fn l1_density(k: f64) -> DensityFunction {
    build_density(&BurgersLattice::square(1.5).unwrap(), |x| k * x.norm_sq()).unwrap()
}

/// Elastic self-energy of the unit isotropic tensor on the square lattice.
pub fn elastic_square_density() -> (DensityFunction, f64) {
    let k = isotropic_line_energy_coefficient(&unit_tensor());
    (l1_density(k), k)
}

pub fn hexagonal_density() -> DensityFunction {
    build_density(&BurgersLattice::triangular(2.0).unwrap(), |x| x.norm_sq()).unwrap()
}

/// Brute-force `min sum w_k psi(xi_k)` over nonnegative combinations of at
/// most two truncated-lattice vectors reproducing `xi`.
pub fn lp_oracle(lattice: &BurgersLattice, psi: &impl Fn(Vec2) -> f64, xi: Vec2) -> f64 {
    let vs = enumerate_lattice(lattice);
    let ps: Vec<f64> = vs.iter().map(|&v| psi(v)).collect();
    let mut best = f64::INFINITY;
    for (a, &va) in vs.iter().enumerate() {
        if va.cross(xi).abs() <= 1e-14 * va.norm() * xi.norm() && va.dot(xi) > 0.0 {
            best = best.min(xi.norm() / va.norm() * ps[a]);
        }
        for (b, &vb) in vs.iter().enumerate().skip(a + 1) {
            let det = va.cross(vb);
            if det.abs() < 1e-12 {
                continue;
            }
            let wa = xi.cross(vb) / det;
            let wb = va.cross(xi) / det;
            if wa >= -1e-15 && wb >= -1e-15 {
                best = best.min(wa.max(0.0) * ps[a] + wb.max(0.0) * ps[b]);
            }
        }
    }
    best
}

/// Per-gap exhaustive minimum of the binary cut cost over every assignment
/// of the interior cells; `exterior_up[c]` says whether exterior cell `c`
/// lies above the gap.
pub fn exhaustive_binary_min(stencil: &PerimeterStencil, grid: &DomainGrid, exterior_up: &[bool]) -> f64 {
    let cells: Vec<usize> = (0..grid.len()).filter(|&c| grid.is_interior(c)).collect();
    assert!(cells.len() <= 20);
    let levels = BoundaryDatum::new(grid, vec![0.0, 1.0], exterior_up.iter().map(|&b| usize::from(b)).collect()).unwrap();
    let mut u: Vec<f64> = (0..grid.len()).map(|c| if exterior_up[c] { 1.0 } else { 0.0 }).collect();
    let mut best = f64::INFINITY;
    for code in 0u64..(1u64 << cells.len()) {
        for (bit, &c) in cells.iter().enumerate() {
            u[c] = ((code >> bit) & 1) as f64;
        }
        best = best.min(bv_energy_with(stencil, grid, &levels, &u).unwrap());
    }
    best
}

/// Random exterior ring with levels drawn from `0..k`.
pub fn random_ring(rng: &mut impl Rng, grid: &DomainGrid, k: usize) -> Vec<usize> {
    (0..grid.len()).map(|c| if grid.is_interior(c) { 0 } else { rng.gen_range(0..k) }).collect()
}

/// Random strictly increasing levels starting at 0.
pub fn random_levels(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut m = 0.0;
    (0..k)
        .map(|i| {
            if i > 0 {
                m += 0.2 + rng.gen::<f64>();
            }
            m
        })
        .collect()
}
