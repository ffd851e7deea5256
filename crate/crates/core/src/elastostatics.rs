//! Plane-strain linear elasticity kernels.
//!
//! Provides the small value types used everywhere else ([`Vec2`], [`Matrix2`]),
//! the isotropic elasticity tensor with its quadratic energy density, the
//! closed-form Volterra strain of a single edge dislocation and circulation
//! quadrature along circles.
//!
//! Matrices act on column vectors and a strain `beta` is read row-wise:
//! `beta[a][b] = d u_a / d x_b` for a gradient field. The row-wise curl is
//! `Curl beta = (d1 beta12 - d2 beta11, d1 beta22 - d2 beta21)`, and the
//! circulation of `beta` along a counter-clockwise circle is the line integral
//! of `beta * t` with `t = J nu`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElastoError {
    #[error("non-elliptic Lamé parameters (lambda = {lambda}, mu = {mu}): need mu > 0 and lambda + mu > 0")]
    NotElliptic { lambda: f64, mu: f64 },
    #[error("Volterra strain is singular at the dislocation line")]
    Singular,
    #[error("circle of radius {radius} around ({cx}, {cy}) leaves the field's domain")]
    CircleOutsideDomain { cx: f64, cy: f64, radius: f64 },
    #[error("circulation radius must be positive, got {0}")]
    BadRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    pub const E1: Vec2 = Vec2 { x: 1.0, y: 0.0 };
    pub const E2: Vec2 = Vec2 { x: 0.0, y: 1.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counter-clockwise rotation by a quarter turn, `J v`.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// A 2×2 real matrix stored row-major. No symmetry is assumed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Matrix2 {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2 { xx: 0.0, xy: 0.0, yx: 0.0, yy: 0.0 };
    pub const IDENTITY: Matrix2 = Matrix2 { xx: 1.0, xy: 0.0, yx: 0.0, yy: 1.0 };
    /// Counter-clockwise rotation by a quarter turn.
    pub const J: Matrix2 = Matrix2 { xx: 0.0, xy: -1.0, yx: 1.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yx: f64, yy: f64) -> Self {
        Self { xx, xy, yx, yy }
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    /// Antisymmetric matrix `[[0, u], [-u, 0]]`.
    pub fn skew_from_scalar(u: f64) -> Self {
        Self::new(0.0, u, -u, 0.0)
    }

    /// `a ⊗ b`, i.e. the matrix with entries `a_i b_j`.
    pub fn outer(a: Vec2, b: Vec2) -> Self {
        Self::new(a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y)
    }

    pub fn transpose(self) -> Self {
        Self::new(self.xx, self.yx, self.xy, self.yy)
    }

    pub fn sym(self) -> Self {
        let off = 0.5 * (self.xy + self.yx);
        Self::new(self.xx, off, off, self.yy)
    }

    pub fn skew(self) -> Self {
        let off = 0.5 * (self.xy - self.yx);
        Self::new(0.0, off, -off, 0.0)
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.yx
    }

    /// Frobenius inner product `A : B`.
    pub fn contract(self, o: Matrix2) -> f64 {
        self.xx * o.xx + self.xy * o.xy + self.yx * o.yx + self.yy * o.yy
    }

    pub fn norm(self) -> f64 {
        self.contract(self).sqrt()
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.yx * v.x + self.yy * v.y)
    }

    pub fn matmul(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.xx * o.xx + self.xy * o.yx,
            self.xx * o.xy + self.xy * o.yy,
            self.yx * o.xx + self.yy * o.yx,
            self.yx * o.xy + self.yy * o.yy,
        )
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yx.is_finite() && self.yy.is_finite()
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.xx + o.xx, self.xy + o.xy, self.yx + o.yx, self.yy + o.yy)
    }
}

impl AddAssign for Matrix2 {
    fn add_assign(&mut self, o: Matrix2) {
        *self = *self + o;
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.xx - o.xx, self.xy - o.xy, self.yx - o.yx, self.yy - o.yy)
    }
}

impl SubAssign for Matrix2 {
    fn sub_assign(&mut self, o: Matrix2) {
        *self = *self - o;
    }
}

impl Neg for Matrix2 {
    type Output = Matrix2;
    fn neg(self) -> Matrix2 {
        self * -1.0
    }
}

impl Mul<f64> for Matrix2 {
    type Output = Matrix2;
    fn mul(self, s: f64) -> Matrix2 {
        Matrix2::new(self.xx * s, self.xy * s, self.yx * s, self.yy * s)
    }
}

impl Mul<Matrix2> for f64 {
    type Output = Matrix2;
    fn mul(self, m: Matrix2) -> Matrix2 {
        m * self
    }
}

/// Isotropic plane-strain elasticity tensor, `C E = lambda tr(E) I + 2 mu E`
/// on symmetric `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityTensor {
    lame_lambda: f64,
    lame_mu: f64,
}

impl ElasticityTensor {
    pub fn isotropic(lambda: f64, mu: f64) -> Result<Self, ElastoError> {
        if !(lambda.is_finite() && mu.is_finite()) || mu <= 0.0 || lambda + mu <= 0.0 {
            return Err(ElastoError::NotElliptic { lambda, mu });
        }
        Ok(Self { lame_lambda: lambda, lame_mu: mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lame_lambda
    }

    pub fn mu(&self) -> f64 {
        self.lame_mu
    }

    /// Plane-strain Poisson ratio `lambda / (2 (lambda + mu))`.
    pub fn poisson_ratio(&self) -> f64 {
        self.lame_lambda / (2.0 * (self.lame_lambda + self.lame_mu))
    }

    /// `C F`. Only the symmetric part of `F` is seen by the tensor.
    pub fn stress(&self, f: Matrix2) -> Matrix2 {
        let e = f.sym();
        Matrix2::IDENTITY * (self.lame_lambda * e.trace()) + e * (2.0 * self.lame_mu)
    }

    /// `W(F) = 1/2 C sym F : sym F`.
    pub fn energy_density(&self, f: Matrix2) -> f64 {
        let e = f.sym();
        let tr = e.trace();
        0.5 * self.lame_lambda * tr * tr + self.lame_mu * e.contract(e)
    }

    /// Smallest `c` with `|sym F|^2 / c <= W(F) <= c |sym F|^2`.
    ///
    /// On symmetric 2×2 matrices `W / |E|^2` ranges over `[mu + min(lambda, 0),
    /// mu + max(lambda, 0)]` (trace-free part versus spherical part).
    pub fn coercivity_constant(&self) -> f64 {
        let upper = self.lame_mu + self.lame_lambda.max(0.0);
        let lower = self.lame_mu + self.lame_lambda.min(0.0);
        upper.max(1.0 / lower)
    }
}

/// Volterra field of a straight edge dislocation with Burgers vector `burgers`
/// sitting at the origin of an infinite isotropic body.
///
/// The displacement (for `burgers = b e1`, `c = b / 2 pi`, `k = 1/(4(1-nu))`) is
///
/// ```text
/// u1 = c (theta + 2k x y / r^2)
/// u2 = -c ((1 - 2 nu) k ln r^2 + k (x^2 - y^2) / r^2)
/// ```
///
/// and other Burgers vectors are obtained by rotation. The strain is `grad u`;
/// the multivalued `theta` makes its circulation equal to `burgers`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeDislocation {
    magnitude: f64,
    rot: Matrix2,
    nu: f64,
}

impl EdgeDislocation {
    pub fn new(tensor: &ElasticityTensor, burgers: Vec2) -> Self {
        let magnitude = burgers.norm();
        let rot = if magnitude > 0.0 {
            Matrix2::rotation(burgers.angle())
        } else {
            Matrix2::IDENTITY
        };
        Self { magnitude, rot, nu: tensor.poisson_ratio() }
    }

    fn local(&self, x: Vec2) -> Vec2 {
        self.rot.transpose().apply(x)
    }

    fn to_global(&self, m: Matrix2) -> Matrix2 {
        self.rot.matmul(m).matmul(self.rot.transpose()) * self.magnitude
    }

    /// `beta_0(x)`; the caller guarantees `x != 0`.
    pub fn strain(&self, x: Vec2) -> Matrix2 {
        if self.magnitude == 0.0 {
            return Matrix2::ZERO;
        }
        let p = self.local(x);
        let (px, py) = (p.x, p.y);
        let r2 = p.norm_sq();
        let r4 = r2 * r2;
        let nu = self.nu;
        let k = 0.25 / (1.0 - nu);
        let c = 0.5 / PI;
        let m = Matrix2::new(
            c * (-py / r2 + 2.0 * k * py * (py * py - px * px) / r4),
            c * (px / r2 + 2.0 * k * px * (px * px - py * py) / r4),
            -c * ((1.0 - 2.0 * nu) * k * 2.0 * px / r2 + 4.0 * k * px * py * py / r4),
            -c * ((1.0 - 2.0 * nu) * k * 2.0 * py / r2 - 4.0 * k * px * px * py / r4),
        );
        self.to_global(m)
    }

    /// Angular (degree-zero homogeneous, single-valued) part `P` of the
    /// displacement: `u = burgers theta / 2 pi + radial log term + P`.
    pub(crate) fn angular_displacement(&self, x: Vec2) -> Vec2 {
        if self.magnitude == 0.0 {
            return Vec2::ZERO;
        }
        let p = self.local(x);
        let r2 = p.norm_sq();
        let k = 0.25 / (1.0 - self.nu);
        let c = 0.5 / PI;
        let local = Vec2::new(c * 2.0 * k * p.x * p.y / r2, -c * k * (p.x * p.x - p.y * p.y) / r2);
        self.rot.apply(local) * self.magnitude
    }

    /// `grad P`, the part of `beta_0` with vanishing mean tangential trace.
    pub(crate) fn angular_displacement_gradient(&self, x: Vec2) -> Matrix2 {
        if self.magnitude == 0.0 {
            return Matrix2::ZERO;
        }
        let p = self.local(x);
        let (px, py) = (p.x, p.y);
        let r2 = p.norm_sq();
        let r4 = r2 * r2;
        let k = 0.25 / (1.0 - self.nu);
        let c = 0.5 / PI;
        let m = Matrix2::new(
            c * 2.0 * k * py * (py * py - px * px) / r4,
            c * 2.0 * k * px * (px * px - py * py) / r4,
            -c * 4.0 * k * px * py * py / r4,
            c * 4.0 * k * px * px * py / r4,
        );
        self.to_global(m)
    }
}

/// `beta_0(xi)(x)`: strain of an edge dislocation with Burgers vector `xi` at
/// the origin, evaluated at `x`.
pub fn volterra_strain(tensor: &ElasticityTensor, xi: Vec2, x: Vec2) -> Result<Matrix2, ElastoError> {
    if x.norm_sq() == 0.0 {
        return Err(ElastoError::Singular);
    }
    Ok(EdgeDislocation::new(tensor, xi).strain(x))
}

/// Default node count of the circulation rule.
pub const CIRCULATION_NODES: usize = 512;

/// Trapezoidal quadrature of `beta · t` over the counter-clockwise circle.
///
/// `field` returns `None` outside its domain, which is reported as an error.
pub fn circulation<F>(field: F, center: Vec2, radius: f64, nodes: usize) -> Result<Vec2, ElastoError>
where
    F: Fn(Vec2) -> Option<Matrix2>,
{
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(ElastoError::BadRadius(radius));
    }
    let n = nodes.max(3);
    let dtheta = 2.0 * PI / n as f64;
    let mut acc = Vec2::ZERO;
    for j in 0..n {
        let dir = Vec2::from_angle(j as f64 * dtheta);
        let beta = field(center + dir * radius).ok_or(ElastoError::CircleOutsideDomain {
            cx: center.x,
            cy: center.y,
            radius,
        })?;
        acc += beta.apply(dir.perp());
    }
    Ok(acc * (radius * dtheta))
}

/// [`circulation`] for fields defined on the whole plane.
pub fn circulation_closed_form<F>(field: F, center: Vec2, radius: f64, nodes: usize) -> Result<Vec2, ElastoError>
where
    F: Fn(Vec2) -> Matrix2,
{
    circulation(|x| Some(field(x)), center, radius, nodes)
}

/// Central-difference divergence of `C beta` at `x` (row-wise divergence).
pub fn stress_divergence<F>(tensor: &ElasticityTensor, field: F, x: Vec2, step: f64) -> Vec2
where
    F: Fn(Vec2) -> Matrix2,
{
    let sx = (tensor.stress(field(x + Vec2::E1 * step)) - tensor.stress(field(x - Vec2::E1 * step))) * (0.5 / step);
    let sy = (tensor.stress(field(x + Vec2::E2 * step)) - tensor.stress(field(x - Vec2::E2 * step))) * (0.5 / step);
    Vec2::new(sx.xx + sy.xy, sx.yx + sy.yy)
}
