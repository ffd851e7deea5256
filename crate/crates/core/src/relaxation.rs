//! Relaxed dislocation density `phi`: the largest convex, positively
//! 1-homogeneous function below `psi` on the Burgers lattice.
//!
//! The unit ball of `phi` is the convex hull of the Frank points
//! `xi / psi(xi)` over the lattice, so `phi` is the gauge of a polygon and
//! every optimal decomposition uses at most the two endpoints of one edge.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::elastostatics::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("Burgers lattice needs two linearly independent generators")]
    Degenerate,
    #[error("generator {0:?} is not a rational combination of the basis; its span is not a lattice")]
    NotALattice(Vec2),
    #[error("enumeration radius {radius} is smaller than the longest generator ({longest})")]
    RadiusTooSmall { radius: f64, longest: f64 },
    #[error("generators and radius must be finite")]
    NonFinite,
    #[error("self-energy must be positive and finite on the lattice, got psi({xi:?}) = {value}")]
    BadSelfEnergy { xi: Vec2, value: f64 },
    #[error("origin is not inside the Frank-point hull")]
    OriginOutside,
    #[error("truncation certificate failed up to radius {radius} (margin {margin:.3e})")]
    CertificateFailed { radius: f64, margin: f64 },
    #[error("cannot decompose the zero vector")]
    ZeroVector,
    #[error("empty decomposition")]
    EmptyDecomposition,
    #[error("n = {n} cannot represent weight {weight:.3e}; raise n")]
    TooCoarse { n: u64, weight: f64 },
}

/// Largest denominator accepted when expressing a generator in the basis.
const MAX_DENOMINATOR: i64 = 1000;
const RATIONAL_TOLERANCE: f64 = 1e-9;
const CERTIFICATE_DIRECTIONS: usize = 720;
const MAX_DOUBLINGS: usize = 3;
const COLLINEAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersLattice {
    generators: Vec<Vec2>,
    radius: f64,
    basis: [Vec2; 2],
}

impl BurgersLattice {
    pub fn new(generators: Vec<Vec2>, radius: f64) -> Result<Self, RelaxationError> {
        if !radius.is_finite() || generators.iter().any(|g| !g.is_finite()) {
            return Err(RelaxationError::NonFinite);
        }
        let longest = generators.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if radius < longest {
            return Err(RelaxationError::RadiusTooSmall { radius, longest });
        }
        let basis = lattice_basis(&generators)?;
        Ok(Self { generators, radius, basis })
    }

    /// `{±e1, ±e2}`.
    pub fn square(radius: f64) -> Result<Self, RelaxationError> {
        Self::new(vec![Vec2::E1, Vec2::E2, -Vec2::E1, -Vec2::E2], radius)
    }

    /// Unit triangular lattice.
    pub fn triangular(radius: f64) -> Result<Self, RelaxationError> {
        let h = 0.5 * 3f64.sqrt();
        Self::new(vec![Vec2::E1, Vec2::new(0.5, h), Vec2::new(-0.5, h)], radius)
    }

    pub fn generators(&self) -> &[Vec2] {
        &self.generators
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Reduced basis of the integer span.
    pub fn basis(&self) -> [Vec2; 2] {
        self.basis
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self { radius, ..self.clone() }
    }
}

/// All nonzero lattice vectors with norm at most the enumeration radius,
/// ordered by norm then angle.
pub fn enumerate_lattice(lattice: &BurgersLattice) -> Vec<Vec2> {
    let [b1, b2] = lattice.basis;
    let det = b1.cross(b2).abs();
    let r = lattice.radius * (1.0 + 1e-12);
    let n1max = (r * b2.norm() / det).floor() as i64;
    let n2max = (r * b1.norm() / det).floor() as i64;
    let mut out = Vec::new();
    for n1 in -n1max..=n1max {
        for n2 in -n2max..=n2max {
            if n1 == 0 && n2 == 0 {
                continue;
            }
            let v = b1 * n1 as f64 + b2 * n2 as f64;
            if v.norm() <= r {
                out.push(v);
            }
        }
    }
    out.sort_by(|a, b| {
        a.norm_sq()
            .partial_cmp(&b.norm_sq())
            .unwrap_or(Ordering::Equal)
            .then(angle_key(*a).partial_cmp(&angle_key(*b)).unwrap_or(Ordering::Equal))
    });
    out
}

fn angle_key(v: Vec2) -> f64 {
    let a = v.angle();
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

fn lattice_basis(generators: &[Vec2]) -> Result<[Vec2; 2], RelaxationError> {
    // Best-conditioned independent pair as a real frame.
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..generators.len() {
        for j in i + 1..generators.len() {
            let (a, b) = (generators[i], generators[j]);
            let scale = a.norm() * b.norm();
            if scale == 0.0 {
                continue;
            }
            let s = a.cross(b).abs() / scale;
            if s > 1e-9 && best.is_none_or(|(_, _, t)| s > t + 1e-12) {
                best = Some((i, j, s));
            }
        }
    }
    let (i, j, _) = best.ok_or(RelaxationError::Degenerate)?;
    let (f1, f2) = (generators[i], generators[j]);
    let det = f1.cross(f2);
    // Generator coordinates in the frame, as fractions p/q.
    let mut coords = Vec::with_capacity(generators.len());
    for &g in generators {
        let c1 = g.cross(f2) / det;
        let c2 = f1.cross(g) / det;
        let r1 = rationalize(c1).ok_or(RelaxationError::NotALattice(g))?;
        let r2 = rationalize(c2).ok_or(RelaxationError::NotALattice(g))?;
        coords.push((r1, r2));
    }
    let denom = coords.iter().fold(1i128, |acc, ((_, q1), (_, q2))| lcm(lcm(acc, *q1 as i128), *q2 as i128));
    let ints: Vec<(i128, i128)> = coords
        .iter()
        .map(|((p1, q1), (p2, q2))| (*p1 as i128 * (denom / *q1 as i128), *p2 as i128 * (denom / *q2 as i128)))
        .collect();
    let (a, b) = integer_basis(ints);
    let to_real = |(x, y): (i128, i128)| (f1 * x as f64 + f2 * y as f64) * (1.0 / denom as f64);
    Ok(lagrange_reduce(to_real(a), to_real(b)))
}

/// Best rational approximation `p/q` with `q <= MAX_DENOMINATOR`, if within
/// tolerance.
fn rationalize(x: f64) -> Option<(i64, i64)> {
    let tol = RATIONAL_TOLERANCE * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let h = a.checked_mul(h1)?.checked_add(h0)?;
        let k = a.checked_mul(k1)?.checked_add(k0)?;
        if k > MAX_DENOMINATOR {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        if (x - h as f64 / k as f64).abs() <= tol {
            return Some((h, k));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    a / gcd(a, b) * b
}

/// Integer basis of the span of integer vectors (triangular form).
fn integer_basis(mut vs: Vec<(i128, i128)>) -> ((i128, i128), (i128, i128)) {
    loop {
        vs.retain(|v| *v != (0, 0));
        let with_x: Vec<usize> = (0..vs.len()).filter(|&k| vs[k].0 != 0).collect();
        if with_x.len() <= 1 {
            break;
        }
        let p = *with_x.iter().min_by_key(|&&k| vs[k].0.abs()).unwrap();
        let pv = vs[p];
        for &k in &with_x {
            if k != p {
                let m = vs[k].0 / pv.0;
                vs[k] = (vs[k].0 - m * pv.0, vs[k].1 - m * pv.1);
            }
        }
    }
    let pivot = *vs.iter().find(|v| v.0 != 0).expect("independent generators");
    let c = vs.iter().filter(|v| v.0 == 0).fold(0, |g, v| gcd(g, v.1));
    (pivot, (0, c))
}

fn lagrange_reduce(mut a: Vec2, mut b: Vec2) -> [Vec2; 2] {
    if a.norm_sq() > b.norm_sq() {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        let m = (a.dot(b) / a.norm_sq()).round();
        b = b - a * m;
        if b.norm_sq() >= a.norm_sq() {
            return [a, b];
        }
        std::mem::swap(&mut a, &mut b);
    }
}

/// A hull vertex: the Frank point and the lattice vector it comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullVertex {
    pub point: Vec2,
    pub burgers: Vec2,
    pub psi: f64,
}

/// Edge `{x : normal · x = offset}` of the unit ball of `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HullEdge {
    normal: Vec2,
    offset: f64,
}

/// Gauge of the Frank-point hull.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFunction {
    vertices: Vec<HullVertex>,
    edges: Vec<HullEdge>,
    truncation_certificate: f64,
    radius: f64,
}

/// Builds `phi` from `psi` on the truncated lattice, doubling the radius
/// until omitted lattice vectors are certified to have interior Frank points.
pub fn build_density(lattice: &BurgersLattice, psi: impl Fn(Vec2) -> f64) -> Result<DensityFunction, RelaxationError> {
    let c0 = (0..CERTIFICATE_DIRECTIONS)
        .map(|k| psi(Vec2::from_angle(2.0 * std::f64::consts::PI * k as f64 / CERTIFICATE_DIRECTIONS as f64)))
        .fold(f64::INFINITY, f64::min);
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(RelaxationError::BadSelfEnergy { xi: Vec2::E1, value: c0 });
    }
    let mut current = lattice.clone();
    let mut margin = f64::NEG_INFINITY;
    for _ in 0..=MAX_DOUBLINGS {
        let (vertices, edges) = frank_hull(&current, &psi)?;
        let inradius = edges.iter().map(|e| e.offset / e.normal.norm()).fold(f64::INFINITY, f64::min);
        margin = inradius - 1.0 / (c0 * current.radius);
        if margin > 0.0 {
            return Ok(DensityFunction { vertices, edges, truncation_certificate: margin, radius: current.radius });
        }
        current = current.with_radius(2.0 * current.radius);
    }
    Err(RelaxationError::CertificateFailed { radius: current.radius / 2.0, margin })
}

fn frank_hull(lattice: &BurgersLattice, psi: &impl Fn(Vec2) -> f64) -> Result<(Vec<HullVertex>, Vec<HullEdge>), RelaxationError> {
    let mut pts = Vec::new();
    for xi in enumerate_lattice(lattice) {
        let value = psi(xi);
        if !(value > 0.0 && value.is_finite()) {
            return Err(RelaxationError::BadSelfEnergy { xi, value });
        }
        pts.push(HullVertex { point: xi * (1.0 / value), burgers: xi, psi: value });
    }
    let vertices = convex_hull(pts);
    let n = vertices.len();
    if n < 3 {
        return Err(RelaxationError::OriginOutside);
    }
    let mut edges = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = (vertices[k].point, vertices[(k + 1) % n].point);
        let d = b - a;
        let normal = Vec2::new(d.y, -d.x);
        let offset = normal.dot(a);
        if offset <= COLLINEAR_TOLERANCE * normal.norm() * a.norm() {
            return Err(RelaxationError::OriginOutside);
        }
        edges.push(HullEdge { normal, offset });
    }
    Ok((vertices, edges))
}

/// Counter-clockwise hull, collinear boundary points dropped.
fn convex_hull(mut pts: Vec<HullVertex>) -> Vec<HullVertex> {
    pts.sort_by(|a, b| {
        (a.point.x, a.point.y)
            .partial_cmp(&(b.point.x, b.point.y))
            .unwrap_or(Ordering::Equal)
    });
    pts.dedup_by(|a, b| (a.point - b.point).norm() <= COLLINEAR_TOLERANCE * a.point.norm().max(b.point.norm()));
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Vec2, a: Vec2, b: Vec2| {
        let c = (a - o).cross(b - o);
        let scale = (a - o).norm() * (b - o).norm();
        c > COLLINEAR_TOLERANCE * scale
    };
    let mut lower: Vec<HullVertex> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && !turn(lower[lower.len() - 2].point, lower[lower.len() - 1].point, p.point) {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<HullVertex> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !turn(upper[upper.len() - 2].point, upper[upper.len() - 1].point, p.point) {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// One term `weight * burgers` of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionTerm {
    pub weight: f64,
    pub burgers: Vec2,
    pub psi: f64,
}

impl DensityFunction {
    /// Hull vertices in counter-clockwise order.
    pub fn hull_vertices(&self) -> &[HullVertex] {
        &self.vertices
    }

    /// `inradius - 1 / (c0 R)`; positive by construction.
    pub fn truncation_certificate(&self) -> f64 {
        self.truncation_certificate
    }

    /// Enumeration radius that passed the certificate.
    pub fn certified_radius(&self) -> f64 {
        self.radius
    }

    pub fn phi_eval(&self, xi: Vec2) -> f64 {
        self.edges.iter().map(|e| e.normal.dot(xi) / e.offset).fold(0.0, f64::max)
    }

    /// Optimal decomposition of `xi` into at most two hull vertices.
    pub fn decompose(&self, xi: Vec2) -> Result<Vec<DecompositionTerm>, RelaxationError> {
        if xi == Vec2::ZERO || !xi.is_finite() {
            return Err(RelaxationError::ZeroVector);
        }
        let mut on_ray: Vec<&HullVertex> = self
            .vertices
            .iter()
            .filter(|v| v.point.dot(xi) > 0.0 && v.point.cross(xi).abs() <= COLLINEAR_TOLERANCE * v.point.norm() * xi.norm())
            .collect();
        on_ray.sort_by(|a, b| (a.burgers.x, a.burgers.y).partial_cmp(&(b.burgers.x, b.burgers.y)).unwrap_or(Ordering::Equal));
        if let Some(v) = on_ray.first() {
            let weight = xi.dot(v.burgers) / v.burgers.norm_sq();
            return Ok(vec![DecompositionTerm { weight, burgers: v.burgers, psi: v.psi }]);
        }
        let n = self.vertices.len();
        let k = (0..n)
            .max_by(|&a, &b| {
                let fa = self.edges[a].normal.dot(xi) / self.edges[a].offset;
                let fb = self.edges[b].normal.dot(xi) / self.edges[b].offset;
                fa.partial_cmp(&fb).unwrap_or(Ordering::Equal).then(b.cmp(&a))
            })
            .expect("nonempty hull");
        let (va, vb) = (self.vertices[k], self.vertices[(k + 1) % n]);
        let det = va.burgers.cross(vb.burgers);
        let wa = xi.cross(vb.burgers) / det;
        let wb = va.burgers.cross(xi) / det;
        Ok(vec![
            DecompositionTerm { weight: wa.max(0.0), burgers: va.burgers, psi: va.psi },
            DecompositionTerm { weight: wb.max(0.0), burgers: vb.burgers, psi: vb.psi },
        ])
    }

    /// Hull as CSV: `x,y,xi_x,xi_y,psi` per vertex.
    pub fn hull_csv(&self) -> String {
        let mut s = String::from("x,y,xi_x,xi_y,psi\n");
        for v in &self.vertices {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                v.point.x, v.point.y, v.burgers.x, v.burgers.y, v.psi
            ));
        }
        s
    }

    /// Closed polygon, one `x y` pair per line.
    pub fn gnuplot_polygon(&self) -> String {
        let mut s = String::from("# x y\n");
        for v in self.vertices.iter().chain(self.vertices.first()) {
            s.push_str(&format!("{:.16e} {:.16e}\n", v.point.x, v.point.y));
        }
        s
    }
}

impl fmt::Display for DensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gauge of a {}-gon", self.vertices.len())
    }
}

/// A decomposition whose weights are integer multiples of `sum / n^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalDecomposition {
    pub terms: Vec<DecompositionTerm>,
    /// `z_j = n^2 weight_j / sum`, summing to `n^2`.
    pub counts: Vec<u64>,
    /// `sum weight_j burgers_j` after rounding.
    pub xi: Vec2,
}

/// Largest-remainder rounding of the weights to the grid `sum / n^2`.
pub fn rationalize_decomposition(terms: &[DecompositionTerm], n: u64) -> Result<RationalDecomposition, RelaxationError> {
    if terms.is_empty() || n == 0 {
        return Err(RelaxationError::EmptyDecomposition);
    }
    let total: f64 = terms.iter().map(|t| t.weight).sum();
    if !(total > 0.0) {
        return Err(RelaxationError::EmptyDecomposition);
    }
    let slots = n * n;
    let exact: Vec<f64> = terms.iter().map(|t| slots as f64 * t.weight / total).collect();
    let mut counts: Vec<u64> = exact.iter().map(|z| (z + 1e-9).floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    for &k in order.iter().take(slots.saturating_sub(assigned) as usize) {
        counts[k] += 1;
    }
    for (t, &z) in terms.iter().zip(&counts) {
        if z == 0 && t.weight > 0.0 {
            return Err(RelaxationError::TooCoarse { n, weight: t.weight });
        }
    }
    let new_terms: Vec<DecompositionTerm> = terms
        .iter()
        .zip(&counts)
        .map(|(t, &z)| DecompositionTerm { weight: z as f64 * total / slots as f64, ..*t })
        .collect();
    let xi = new_terms.iter().fold(Vec2::ZERO, |acc, t| acc + t.burgers * t.weight);
    Ok(RationalDecomposition { terms: new_terms, counts, xi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Vec2>) -> Vec<(i64, i64)> {
        let mut out: Vec<(i64, i64)> = v.drain(..).map(|p| (p.x.round() as i64, p.y.round() as i64)).collect();
        out.sort();
        out
    }

    #[test]
    fn enumerates_square_lattice() {
        let l = BurgersLattice::square(1.0).unwrap();
        assert_eq!(sorted(enumerate_lattice(&l)), vec![(-1, 0), (0, -1), (0, 1), (1, 0)]);
        let l = BurgersLattice::square(1.5).unwrap();
        assert_eq!(
            sorted(enumerate_lattice(&l)),
            vec![(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
        );
    }

    #[test]
    fn rejects_collinear_and_irrational_generators() {
        assert_eq!(BurgersLattice::new(vec![Vec2::E1, Vec2::E1 * 2.0], 3.0), Err(RelaxationError::Degenerate));
        assert!(matches!(
            BurgersLattice::new(vec![Vec2::E1, Vec2::E2, Vec2::new(2f64.sqrt(), 0.0)], 3.0),
            Err(RelaxationError::NotALattice(_))
        ));
        assert!(matches!(BurgersLattice::square(0.5), Err(RelaxationError::RadiusTooSmall { .. })));
    }

    #[test]
    fn redundant_generators_refine_the_lattice() {
        // e1, e2 and (1/2, 1/2) span the centred square lattice.
        let l = BurgersLattice::new(vec![Vec2::E1, Vec2::E2, Vec2::new(0.5, 0.5)], 1.0).unwrap();
        let v = enumerate_lattice(&l);
        assert_eq!(v.len(), 8);
        assert!(v.iter().any(|p| (p.x - 0.5).abs() < 1e-12 && (p.y + 0.5).abs() < 1e-12));
        let [a, b] = l.basis();
        assert!((a.cross(b).abs() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn enumeration_is_symmetric_and_sorted() {
        let l = BurgersLattice::triangular(3.0).unwrap();
        let v = enumerate_lattice(&l);
        for w in v.windows(2) {
            assert!(w[0].norm() <= w[1].norm() + 1e-12);
        }
        for p in &v {
            assert!(v.iter().any(|q| (*q + *p).norm() < 1e-12));
        }
        assert_eq!(v.iter().filter(|p| (p.norm() - 1.0).abs() < 1e-9).count(), 6);
    }

    #[test]
    fn square_lattice_gives_diamond() {
        let k = 0.37;
        let d = build_density(&BurgersLattice::square(1.5).unwrap(), |x| k * x.norm_sq()).unwrap();
        assert_eq!(d.hull_vertices().len(), 4);
        for v in d.hull_vertices() {
            assert!((d.phi_eval(v.point) - 1.0).abs() < 1e-12);
            assert!(d.phi_eval(v.burgers) <= v.psi + 1e-12);
        }
        assert_eq!(d.phi_eval(Vec2::ZERO), 0.0);
        let xi = Vec2::new(0.3, -1.7);
        assert!((d.phi_eval(xi) - k * 2.0).abs() < 1e-12);
        assert!(d.truncation_certificate() > 0.0);
    }

    #[test]
    fn certificate_raises_the_radius() {
        // At R = 1 only the four generators are seen; their hull has
        // inradius 1/(sqrt2 K) < 1/K, so the certificate needs R > sqrt 2.
        let d = build_density(&BurgersLattice::square(1.0).unwrap(), |x| x.norm_sq()).unwrap();
        assert_eq!(d.certified_radius(), 2.0);
    }

    #[test]
    fn certificate_failure_is_reported() {
        // Strongly anisotropic psi: the sampled minimum is tiny.
        let psi = |x: Vec2| 1e-4 * x.x * x.x + x.y * x.y;
        assert!(matches!(
            build_density(&BurgersLattice::square(1.0).unwrap(), psi),
            Err(RelaxationError::CertificateFailed { .. })
        ));
    }

    #[test]
    fn decomposition_examples() {
        let k = 2.0;
        let d = build_density(&BurgersLattice::square(1.5).unwrap(), |x| k * x.norm_sq()).unwrap();
        let t = d.decompose(Vec2::E1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].burgers, Vec2::E1);
        assert!((t[0].weight - 1.0).abs() < 1e-15);
        let t = d.decompose(Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!(t.len(), 2);
        let total: f64 = t.iter().map(|x| x.weight * x.psi).sum();
        assert!((total - 2.0 * k).abs() < 1e-12);
        for term in &t {
            assert!((term.weight - 1.0).abs() < 1e-12);
        }
        assert_eq!(d.decompose(Vec2::ZERO), Err(RelaxationError::ZeroVector));
    }

    #[test]
    fn rationalization_examples() {
        let single = [DecompositionTerm { weight: 0.7, burgers: Vec2::E1, psi: 1.0 }];
        let r = rationalize_decomposition(&single, 5).unwrap();
        assert_eq!(r.counts, vec![25]);
        assert_eq!(r.terms[0].weight, 0.7);

        let half = [
            DecompositionTerm { weight: 0.5, burgers: Vec2::E1, psi: 1.0 },
            DecompositionTerm { weight: 0.5, burgers: Vec2::E2, psi: 1.0 },
        ];
        let r = rationalize_decomposition(&half, 2).unwrap();
        assert_eq!(r.counts, vec![2, 2]);
        assert_eq!(r.terms, half.to_vec());

        let thirds = [
            DecompositionTerm { weight: 1.0 / 3.0, burgers: Vec2::E1, psi: 1.0 },
            DecompositionTerm { weight: 2.0 / 3.0, burgers: Vec2::E2, psi: 1.0 },
        ];
        let r = rationalize_decomposition(&thirds, 2).unwrap();
        assert_eq!(r.counts, vec![1, 3]);
        for (a, b) in r.terms.iter().zip(&thirds) {
            assert!((a.weight - b.weight).abs() <= 1.0 / 12.0 + 1e-15);
        }
        assert!((r.xi - Vec2::new(1.0 / 3.0, 2.0 / 3.0)).norm() <= 1.0 / 4.0);
    }

    #[test]
    fn rationalization_reports_coarse_n() {
        let t = [
            DecompositionTerm { weight: 0.01, burgers: Vec2::E1, psi: 1.0 },
            DecompositionTerm { weight: 0.99, burgers: Vec2::E2, psi: 1.0 },
        ];
        assert!(matches!(rationalize_decomposition(&t, 2), Err(RelaxationError::TooCoarse { n: 2, .. })));
        assert!(rationalize_decomposition(&t, 10).is_ok());
    }
}
