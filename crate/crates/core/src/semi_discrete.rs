//! Semi-discrete model at core radius `eps`: scales, admissible
//! configurations, recovery strains built from periodic dislocation
//! arrays, their energy, and the trend of `F_eps` towards the limit.
//!
//! The recovery strain of a grain with target `(xi dx, S, A)` is
//!
//! ```text
//! N A + sqrt(N |log eps|) S + sum_i core_i
//! ```
//!
//! where each core term lives in `B_r(x_i)` and carries circulation `xi_i`
//! on `∂B_eps(x_i)`. The harmonic corrections that would make the field
//! curl-free between cores are not built, so `F_eps` exceeds its limit by a
//! quantity that decays like `1 / |log eps|` at best.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::elastostatics::{circulation_closed_form, EdgeDislocation, ElasticityTensor, Matrix2, Vec2, CIRCULATION_NODES};
use crate::polycrystal::{evaluate_limit_functional, DomainGrid, LimitState, PolycrystalError};
use crate::relaxation::{rationalize_decomposition, DensityFunction, RelaxationError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiDiscreteError {
    #[error("core radius must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error("scale exponent must be positive and finite, got {0}")]
    BadExponent(f64),
    #[error("dislocation count must be at least 1")]
    BadCount,
    #[error("grid spacing {h} does not resolve the core: need h <= {required} (at least 4 cells across a core)")]
    GridTooCoarse { h: f64, required: f64 },
    #[error("recovery needs a rectangular domain")]
    NonRectangular,
    #[error("hard-core radius {rho} exceeds the kernel radius {r}; use a larger dislocation count")]
    RhoExceedsSpacing { rho: f64, r: f64 },
    #[error("bad grain partition: {0}")]
    Partition(String),
    #[error("{points} points but {burgers} Burgers vectors")]
    LengthMismatch { points: usize, burgers: usize },
    #[error("core radius list must be strictly decreasing")]
    EpsNotDecreasing,
    #[error("target strain of grain {0} is not symmetric")]
    NonSymmetricStrain(usize),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Grid(#[from] PolycrystalError),
}

/// `eps`, `rho = eps^t` and `N = round(eps^-t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSet {
    eps: f64,
    t: f64,
    rho: f64,
    count: usize,
}

/// Ratios that should be large, small and large in the supercritical regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleDiagnostics {
    /// `rho / eps^0.9`.
    pub core_ratio: f64,
    /// `N rho^2`.
    pub dilution: f64,
    /// `N / |log eps|`.
    pub supercritical: f64,
}

impl ScaleSet {
    pub fn new(eps: f64, t: f64) -> Result<Self, SemiDiscreteError> {
        check_eps(eps)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(SemiDiscreteError::BadExponent(t));
        }
        let count = (eps.powf(-t).round() as usize).max(1);
        Ok(Self { eps, t, rho: eps.powf(t), count })
    }

    /// Exponent chosen so that `N = count` exactly; then `rho = 1 / count`.
    pub fn with_count(eps: f64, count: usize) -> Result<Self, SemiDiscreteError> {
        check_eps(eps)?;
        if count == 0 {
            return Err(SemiDiscreteError::BadCount);
        }
        let t = (count as f64).ln() / eps.ln().abs();
        if !(t > 0.0) {
            return Err(SemiDiscreteError::BadExponent(t));
        }
        Ok(Self { eps, t, rho: 1.0 / count as f64, count })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `|log eps|`.
    pub fn log_eps(&self) -> f64 {
        self.eps.ln().abs()
    }

    pub fn diagnostics(&self) -> ScaleDiagnostics {
        let n = self.count as f64;
        ScaleDiagnostics {
            core_ratio: self.rho / self.eps.powf(0.9),
            dilution: n * self.rho * self.rho,
            supercritical: n / self.log_eps(),
        }
    }
}

fn check_eps(eps: f64) -> Result<(), SemiDiscreteError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(SemiDiscreteError::BadEps(eps))
    }
}

/// How the dislocation count follows `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    Exponent(f64),
    Count(usize),
}

impl ScaleMode {
    pub fn scales(self, eps: f64) -> Result<ScaleSet, SemiDiscreteError> {
        match self {
            Self::Exponent(t) => ScaleSet::new(eps, t),
            Self::Count(n) => ScaleSet::with_count(eps, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DislocationConfig {
    pub points: Vec<Vec2>,
    pub burgers: Vec<Vec2>,
    pub scales: ScaleSet,
}

impl DislocationConfig {
    pub fn new(points: Vec<Vec2>, burgers: Vec<Vec2>, scales: ScaleSet) -> Result<Self, SemiDiscreteError> {
        if points.len() != burgers.len() {
            return Err(SemiDiscreteError::LengthMismatch { points: points.len(), burgers: burgers.len() });
        }
        Ok(Self { points, burgers, scales })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// `|x_i - x_j| < 2 rho`.
    Separation { i: usize, j: usize, distance: f64, required: f64 },
    /// `B_rho(x_i)` leaves `Omega`; `clearance` is the distance to the
    /// complement.
    Containment { i: usize, clearance: f64, required: f64 },
}

/// Every violated separation or containment constraint; empty when the
/// configuration is admissible.
pub fn validate_admissible(cfg: &DislocationConfig, omega: &DomainGrid) -> Vec<Violation> {
    let rho = cfg.scales.rho;
    let mut out = Vec::new();
    for i in 0..cfg.points.len() {
        for j in i + 1..cfg.points.len() {
            let distance = (cfg.points[i] - cfg.points[j]).norm();
            if distance < 2.0 * rho {
                out.push(Violation::Separation { i, j, distance, required: 2.0 * rho });
            }
        }
    }
    for (i, &x) in cfg.points.iter().enumerate() {
        let clearance = distance_to_exterior(omega, x, rho);
        if clearance < rho {
            out.push(Violation::Containment { i, clearance, required: rho });
        }
    }
    out
}

/// Distance from `x` to the exterior cells and the array border; exterior
/// cells are searched within `reach` only.
fn distance_to_exterior(grid: &DomainGrid, x: Vec2, reach: f64) -> f64 {
    let h = grid.h();
    let base = grid.center(0) - Vec2::new(0.5 * h, 0.5 * h);
    let (nx, ny) = (grid.nx() as f64 * h, grid.ny() as f64 * h);
    let local = x - base;
    let mut best = local.x.min(local.y).min(nx - local.x).min(ny - local.y).max(0.0);
    if local.x < 0.0 || local.y < 0.0 || local.x > nx || local.y > ny {
        return 0.0;
    }
    let span = (reach / h).ceil() as i64 + 1;
    let (ci, cj) = ((local.x / h).floor() as i64, (local.y / h).floor() as i64);
    for dj in -span..=span {
        for di in -span..=span {
            let (i, j) = (ci + di, cj + dj);
            if i < 0 || j < 0 || i >= grid.nx() as i64 || j >= grid.ny() as i64 {
                continue;
            }
            let c = grid.index(i as usize, j as usize);
            if grid.is_interior(c) {
                continue;
            }
            let lo = Vec2::new(i as f64 * h, j as f64 * h);
            let dx = (lo.x - local.x).max(local.x - lo.x - h).max(0.0);
            let dy = (lo.y - local.y).max(local.y - lo.y - h).max(0.0);
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Grain geometry of a recovery target.
#[derive(Debug, Clone, PartialEq)]
pub enum Partition {
    Single,
    /// Grains separated by lines `x = cut` (`Axis::X`) or `y = cut`.
    Stripes { axis: Axis, cuts: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Constant data of one grain: `mu = mu_density dx`, `S = strain`,
/// `A = skew(skew_offset + mu_density · x)`, so that `Curl A = mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrainTarget {
    pub mu_density: Vec2,
    pub strain: Matrix2,
    pub skew_offset: f64,
}

impl GrainTarget {
    pub fn rotation(&self, x: Vec2) -> f64 {
        self.skew_offset + self.mu_density.dot(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTarget {
    pub partition: Partition,
    pub grains: Vec<GrainTarget>,
}

impl RecoveryTarget {
    pub fn single(grain: GrainTarget) -> Self {
        Self { partition: Partition::Single, grains: vec![grain] }
    }

    fn validate(&self) -> Result<(), SemiDiscreteError> {
        let expected = match &self.partition {
            Partition::Single => 1,
            Partition::Stripes { cuts, .. } => {
                if cuts.windows(2).any(|w| w[0] >= w[1]) || cuts.iter().any(|c| !c.is_finite()) {
                    return Err(SemiDiscreteError::Partition("cuts must be finite and strictly increasing".into()));
                }
                cuts.len() + 1
            }
        };
        if self.grains.len() != expected {
            return Err(SemiDiscreteError::Partition(format!("{} grains given, partition has {}", self.grains.len(), expected)));
        }
        for (g, grain) in self.grains.iter().enumerate() {
            if (grain.strain.xy - grain.strain.yx).abs() > 1e-12 * (1.0 + grain.strain.norm()) {
                return Err(SemiDiscreteError::NonSymmetricStrain(g));
            }
        }
        Ok(())
    }

    pub fn grain_of(&self, x: Vec2) -> usize {
        match &self.partition {
            Partition::Single => 0,
            Partition::Stripes { axis, cuts } => {
                let v = if *axis == Axis::X { x.x } else { x.y };
                cuts.iter().filter(|&&c| v >= c).count()
            }
        }
    }

    /// Rectangle of grain `g` inside the box `[lo, hi]`.
    fn grain_box(&self, g: usize, lo: Vec2, hi: Vec2) -> (Vec2, Vec2) {
        match &self.partition {
            Partition::Single => (lo, hi),
            Partition::Stripes { axis, cuts } => {
                let (a, b) = if *axis == Axis::X { (lo.x, hi.x) } else { (lo.y, hi.y) };
                let start = if g == 0 { a } else { cuts[g - 1].clamp(a, b) };
                let end = if g == cuts.len() { b } else { cuts[g].clamp(a, b) };
                if *axis == Axis::X {
                    (Vec2::new(start, lo.y), Vec2::new(end, hi.y))
                } else {
                    (Vec2::new(lo.x, start), Vec2::new(hi.x, end))
                }
            }
        }
    }
}

/// Strain near a recovery core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoreKernel {
    /// Superposed Volterra fields of all cores, no background.
    Volterra,
    /// `xi ⊗ J y / (2 pi |y|^2)` on the kernel disc, plus the compensator.
    Diffused,
    /// Volterra strain up to `rho / 2`, blended into the diffused kernel on
    /// `[rho / 2, rho]`, plus the compensator.
    #[default]
    HardCore,
}

impl CoreKernel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Volterra => "volterra",
            Self::Diffused => "diffused",
            Self::HardCore => "hardcore",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "volterra" => Some(Self::Volterra),
            "diffused" => Some(Self::Diffused),
            "hardcore" => Some(Self::HardCore),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecoveryOptions {
    pub kernel: CoreKernel,
    /// Side `n` of the site blocks; `None` picks the smallest `n <= 16` whose
    /// rounded weights reproduce the target within 1%.
    pub block: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Core {
    center: Vec2,
    burgers: Vec2,
    grain: usize,
    /// Kernel disc radius.
    radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GrainBackground {
    /// `N mu_density`: curl density of `N A`.
    curl: Vec2,
    /// `N skew_offset`.
    offset: f64,
    /// `sqrt(N |log eps|) S`.
    strain: Matrix2,
}

/// Per-grain placement summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GrainPlacement {
    pub grain: usize,
    pub block: u64,
    /// Sum of the rounded decomposition weights.
    pub total_weight: f64,
    pub kernel_radius: f64,
    /// `(burgers, weight, sites)` per decomposition term.
    pub types: Vec<(Vec2, f64, usize)>,
}

/// Recovery strain, evaluated on demand at cell centres. Cells whose centre
/// lies within `eps` of a core, and exterior cells, read as zero.
#[derive(Debug, Clone)]
pub struct StrainFieldSampled {
    grid: DomainGrid,
    scales: ScaleSet,
    kernel: CoreKernel,
    cores: Vec<Core>,
    models: Vec<EdgeDislocation>,
    target: RecoveryTarget,
    backgrounds: Vec<GrainBackground>,
    buckets: Buckets,
    placements: Vec<GrainPlacement>,
}

/// Uniform bucket grid over the cores.
#[derive(Debug, Clone)]
struct Buckets {
    origin: Vec2,
    size: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(cores: &[Core], lo: Vec2, hi: Vec2, size: f64) -> Self {
        let size = size.max(1e-12);
        let nx = (((hi.x - lo.x) / size).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / size).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (k, c) in cores.iter().enumerate() {
            let (i, j) = Self::locate(lo, size, nx, ny, c.center);
            cells[j * nx + i].push(k);
        }
        Self { origin: lo, size, nx, ny, cells }
    }

    fn locate(origin: Vec2, size: f64, nx: usize, ny: usize, x: Vec2) -> (usize, usize) {
        let i = ((x.x - origin.x) / size).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((x.y - origin.y) / size).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    /// Cores whose bucket touches the 3x3 neighbourhood of `x`.
    fn near(&self, x: Vec2) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = Self::locate(self.origin, self.size, self.nx, self.ny, x);
        let (i0, i1) = (i.saturating_sub(1), (i + 1).min(self.nx - 1));
        let (j0, j1) = (j.saturating_sub(1), (j + 1).min(self.ny - 1));
        (j0..=j1).flat_map(move |jj| (i0..=i1).flat_map(move |ii| self.cells[jj * self.nx + ii].iter().copied()))
    }
}

fn smoothstep(tau: f64) -> (f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    (t * t * (3.0 - 2.0 * t), if tau > 0.0 && tau < 1.0 { 6.0 * t * (1.0 - t) } else { 0.0 })
}

impl StrainFieldSampled {
    /// Field of bare cores without background; with [`CoreKernel::Volterra`]
    /// this is the superposed Volterra strain.
    pub fn from_config(cfg: &DislocationConfig, tensor: &ElasticityTensor, grid: &DomainGrid, kernel: CoreKernel) -> Self {
        let (lo, hi) = grid.interior_bounds();
        let radius = (hi - lo).norm();
        let cores: Vec<Core> = cfg
            .points
            .iter()
            .zip(&cfg.burgers)
            .map(|(&center, &burgers)| Core { center, burgers, grain: 0, radius })
            .collect();
        let target = RecoveryTarget::single(GrainTarget { mu_density: Vec2::ZERO, strain: Matrix2::ZERO, skew_offset: 0.0 });
        let background = GrainBackground { curl: Vec2::ZERO, offset: 0.0, strain: Matrix2::ZERO };
        Self::assemble(grid.clone(), cfg.scales, kernel, tensor, cores, target, vec![background], Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        grid: DomainGrid,
        scales: ScaleSet,
        kernel: CoreKernel,
        tensor: &ElasticityTensor,
        cores: Vec<Core>,
        target: RecoveryTarget,
        backgrounds: Vec<GrainBackground>,
        placements: Vec<GrainPlacement>,
    ) -> Self {
        let (lo, hi) = grid.interior_bounds();
        let reach = cores.iter().map(|c| c.radius).fold(scales.eps, f64::max);
        let buckets = Buckets::new(&cores, lo, hi, reach);
        let models = cores.iter().map(|c| EdgeDislocation::new(tensor, c.burgers)).collect();
        Self { grid, scales, kernel, cores, models, target, backgrounds, buckets, placements }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn scales(&self) -> ScaleSet {
        self.scales
    }

    pub fn kernel(&self) -> CoreKernel {
        self.kernel
    }

    pub fn placements(&self) -> &[GrainPlacement] {
        &self.placements
    }

    pub fn core_count(&self) -> usize {
        self.cores.len()
    }

    fn background(&self, x: Vec2) -> Matrix2 {
        let g = self.target.grain_of(x);
        let b = &self.backgrounds[g];
        Matrix2::skew_from_scalar(b.offset + b.curl.dot(x)) + b.strain
    }

    fn core_term(&self, k: usize, x: Vec2) -> Matrix2 {
        let core = &self.cores[k];
        let y = x - core.center;
        let s = y.norm();
        let model = &self.models[k];
        if self.kernel == CoreKernel::Volterra {
            return model.strain(y);
        }
        if s >= core.radius || s == 0.0 {
            return Matrix2::ZERO;
        }
        let (eps, rho, r) = (self.scales.eps, self.scales.rho, core.radius);
        let jy = y.perp();
        let inner = if self.kernel == CoreKernel::HardCore && s < rho {
            let (phi, dphi) = smoothstep((s - 0.5 * rho) / (0.5 * rho));
            let grad_phi = y * (dphi / (0.5 * rho) / s);
            model.strain(y) - model.angular_displacement_gradient(y) * phi - Matrix2::outer(model.angular_displacement(y), grad_phi)
        } else {
            Matrix2::outer(core.burgers, jy) * (0.5 / (PI * s * s))
        };
        // Annular compensator: spreads -xi uniformly over the annulus and
        // cancels the background flux through B_eps, so the circulation is
        // exactly xi on the core boundary and zero on the kernel disc boundary.
        let s2 = s * s;
        let f = (s2 - eps * eps) / (2.0 * PI * (r * r - eps * eps) * s2);
        let g = -eps * eps * (r * r - s2) / (2.0 * (r * r - eps * eps) * s2);
        let curl = self.backgrounds[core.grain].curl;
        inner - Matrix2::outer(core.burgers, jy) * f + Matrix2::outer(curl, jy) * g
    }

    /// Field at `x` without core masking.
    pub fn evaluate(&self, x: Vec2) -> Matrix2 {
        let mut m = self.background(x);
        if self.kernel == CoreKernel::Volterra {
            for k in 0..self.cores.len() {
                m += self.core_term(k, x);
            }
        } else {
            for k in self.buckets.near(x) {
                m += self.core_term(k, x);
            }
        }
        m
    }

    /// Cell centre within `eps` of a core.
    pub fn is_core_cell(&self, c: usize) -> bool {
        let x = self.grid.center(c);
        let eps = self.scales.eps;
        if self.kernel == CoreKernel::Volterra && self.buckets.size < eps {
            return self.cores.iter().any(|k| (x - k.center).norm() < eps);
        }
        self.buckets.near(x).any(|k| (x - self.cores[k].center).norm() < eps)
    }

    /// Masked sample at cell `c`.
    pub fn sample(&self, c: usize) -> Matrix2 {
        if !self.grid.is_interior(c) || self.is_core_cell(c) {
            Matrix2::ZERO
        } else {
            self.evaluate(self.grid.center(c))
        }
    }

    /// All masked samples, cell by cell.
    pub fn samples(&self) -> Vec<Matrix2> {
        (0..self.grid.len()).into_par_iter().map(|c| self.sample(c)).collect()
    }

    /// Circulation of the field on `∂B_eps` around every core, with the
    /// assigned Burgers vector.
    pub fn core_circulations(&self) -> Vec<(Vec2, Vec2)> {
        (0..self.cores.len())
            .into_par_iter()
            .map(|k| {
                let core = &self.cores[k];
                let measured = circulation_closed_form(|x| self.evaluate(x), core.center, self.scales.eps, CIRCULATION_NODES)
                    .expect("positive core radius");
                (core.burgers, measured)
            })
            .collect()
    }
}

/// Builds the dislocation array and recovery strain for a grain-wise
/// constant target.
///
/// Per grain, the target density is decomposed into at most two lattice
/// vectors with weights rounded to multiples of `1 / n^2`; sites form a
/// lattice of nominal spacing `2 r`, `r = 1 / (2 sqrt(Lambda N))`, grouped in
/// `n x n` blocks with `z_k` sites of type `k` each. The block grid is sized
/// so the grain holds about `Lambda N |grain|` sites and its pitch is
/// stretched to fill the grain's box; the kernel radius is half the smaller
/// pitch.
pub fn build_recovery(
    tensor: &ElasticityTensor,
    density: &DensityFunction,
    target: &RecoveryTarget,
    scales: ScaleSet,
    omega: &DomainGrid,
    options: RecoveryOptions,
) -> Result<(DislocationConfig, StrainFieldSampled), SemiDiscreteError> {
    target.validate()?;
    let required = 0.5 * scales.eps;
    if omega.h() > required * (1.0 + 1e-12) {
        return Err(SemiDiscreteError::GridTooCoarse { h: omega.h(), required });
    }
    let (lo, hi) = omega.interior_bounds();
    let box_cells = ((hi.x - lo.x) / omega.h()).round() * ((hi.y - lo.y) / omega.h()).round();
    if (box_cells - omega.interior_count() as f64).abs() > 0.5 {
        return Err(SemiDiscreteError::NonRectangular);
    }
    let n_count = scales.count as f64;
    let amplitude = (n_count * scales.log_eps()).sqrt();
    let mut cores = Vec::new();
    let mut backgrounds = Vec::with_capacity(target.grains.len());
    let mut placements = Vec::new();
    for (g, grain) in target.grains.iter().enumerate() {
        backgrounds.push(GrainBackground {
            curl: grain.mu_density * n_count,
            offset: grain.skew_offset * n_count,
            strain: grain.strain * amplitude,
        });
        if grain.mu_density == Vec2::ZERO {
            continue;
        }
        let terms = density.decompose(grain.mu_density)?;
        let (n, rational) = match options.block {
            Some(n) => (n, rationalize_decomposition(&terms, n)?),
            None => auto_block(&terms, grain.mu_density)?,
        };
        let total_weight: f64 = rational.terms.iter().map(|t| t.weight).sum();
        let (glo, ghi) = target.grain_box(g, lo, hi);
        let (width, height) = (ghi.x - glo.x, ghi.y - glo.y);
        if width <= 0.0 || height <= 0.0 {
            continue;
        }
        // Block columns from the nominal pitch 2r, rows from the block count
        // the grain should hold; the pitch is then stretched to fill the box.
        let nominal = 1.0 / (total_weight * n_count).sqrt() * n as f64;
        let wanted = total_weight * n_count * width * height / (n * n) as f64;
        let nbx = (width / nominal).round().max(1.0) as u64;
        let nby = (wanted / nbx as f64).round().max(1.0) as u64;
        let pitch = Vec2::new(width / (nbx * n) as f64, height / (nby * n) as f64);
        let r = 0.5 * pitch.x.min(pitch.y);
        if scales.rho > r {
            return Err(SemiDiscreteError::RhoExceedsSpacing { rho: scales.rho, r });
        }
        let mut slot_type = Vec::with_capacity((n * n) as usize);
        for (k, &z) in rational.counts.iter().enumerate() {
            slot_type.extend(std::iter::repeat_n(k, z as usize));
        }
        let mut sites = vec![0usize; rational.terms.len()];
        for by in 0..nby {
            for bx in 0..nbx {
                let anchor = glo + Vec2::new((bx * n) as f64 * pitch.x, (by * n) as f64 * pitch.y);
                for b in 0..n {
                    for a in 0..n {
                        let k = slot_type[(b * n + a) as usize];
                        let center = anchor + Vec2::new((a as f64 + 0.5) * pitch.x, (b as f64 + 0.5) * pitch.y);
                        cores.push(Core { center, burgers: rational.terms[k].burgers, grain: g, radius: r });
                        sites[k] += 1;
                    }
                }
            }
        }
        placements.push(GrainPlacement {
            grain: g,
            block: n,
            total_weight,
            kernel_radius: r,
            types: rational.terms.iter().zip(&sites).map(|(t, &s)| (t.burgers, t.weight, s)).collect(),
        });
    }
    let cfg = DislocationConfig {
        points: cores.iter().map(|c| c.center).collect(),
        burgers: cores.iter().map(|c| c.burgers).collect(),
        scales,
    };
    let field = StrainFieldSampled::assemble(omega.clone(), scales, options.kernel, tensor, cores, target.clone(), backgrounds, placements);
    Ok((cfg, field))
}

fn auto_block(
    terms: &[crate::relaxation::DecompositionTerm],
    xi: Vec2,
) -> Result<(u64, crate::relaxation::RationalDecomposition), SemiDiscreteError> {
    let mut last = None;
    for n in 1..=16u64 {
        if let Ok(r) = rationalize_decomposition(terms, n) {
            if (r.xi - xi).norm() <= 1e-2 * xi.norm() {
                return Ok((n, r));
            }
            last = Some((n, r));
        }
    }
    match last {
        Some(v) => Ok(v),
        None => Ok((16, rationalize_decomposition(terms, 16)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// `∫ W(beta)` over the interior cells outside the cores.
    pub energy: f64,
    /// `energy / (N |log eps|)`.
    pub scaled: f64,
}

/// Midpoint quadrature of `W` over the drilled domain.
pub fn semi_discrete_energy(tensor: &ElasticityTensor, field: &StrainFieldSampled, cfg: &DislocationConfig) -> EnergyReport {
    let grid = field.grid();
    let h2 = grid.h() * grid.h();
    // Row sums in parallel, accumulated in row order so the result does not
    // depend on the thread count.
    let rows: Vec<f64> = (0..grid.ny())
        .into_par_iter()
        .map(|j| {
            let mut row = 0.0;
            for i in 0..grid.nx() {
                let c = grid.index(i, j);
                if grid.is_interior(c) {
                    row += tensor.energy_density(field.sample(c));
                }
            }
            row * h2
        })
        .collect();
    let energy: f64 = rows.iter().sum();
    let scales = cfg.scales;
    EnergyReport { energy, scaled: energy / (scales.count as f64 * scales.log_eps()) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptions {
    /// `Omega = (0, width) x (0, height)`.
    pub width: f64,
    pub height: f64,
    pub scale_mode: ScaleMode,
    pub recovery: RecoveryOptions,
    /// Cells per core radius; at least 2.
    pub cells_per_eps: f64,
    /// Cells along `x` of the grid used for the limit functional.
    pub limit_cells: usize,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self {
            width: 1.0,
            height: 1.0,
            scale_mode: ScaleMode::Count(16),
            recovery: RecoveryOptions::default(),
            cells_per_eps: 2.0,
            limit_cells: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRow {
    pub eps: f64,
    pub t: f64,
    pub rho: f64,
    pub count: usize,
    pub cores: usize,
    pub energy: f64,
    pub scaled: f64,
    pub limit: f64,
    /// `|F_eps - F| / F`, or `|F_eps - F|` when `F = 0`.
    pub gap: f64,
}

/// Grid with `cells` columns covering `(0, width) x (0, height)`.
pub fn rectangle_grid(width: f64, height: f64, cells: usize) -> Result<DomainGrid, SemiDiscreteError> {
    let h = width / cells as f64;
    let rows = ((height / h).round() as usize).max(1);
    Ok(DomainGrid::rectangle(cells, rows, h, 1)?)
}

/// Limit value `F(mu, S, A)` of a grain-wise constant target.
pub fn limit_value(tensor: &ElasticityTensor, density: &DensityFunction, target: &RecoveryTarget, grid: &DomainGrid) -> Result<f64, SemiDiscreteError> {
    target.validate()?;
    let rotation: Vec<f64> = (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            target.grains[target.grain_of(x)].rotation(x)
        })
        .collect();
    let mut state = LimitState::from_rotation(grid, rotation)?;
    for c in 0..grid.len() {
        let x = grid.center(c);
        state.strain[c] = target.grains[target.grain_of(x)].strain;
    }
    Ok(evaluate_limit_functional(tensor, density, grid, &state, None))
}

/// One row per core radius: recovery energy, its scaled value, the limit
/// and the relative gap.
pub fn gamma_table(
    tensor: &ElasticityTensor,
    density: &DensityFunction,
    target: &RecoveryTarget,
    eps_list: &[f64],
    options: GammaOptions,
) -> Result<Vec<GammaRow>, SemiDiscreteError> {
    if eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(SemiDiscreteError::EpsNotDecreasing);
    }
    let limit_grid = rectangle_grid(options.width, options.height, options.limit_cells)?;
    let limit = limit_value(tensor, density, target, &limit_grid)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let scales = options.scale_mode.scales(eps)?;
        let cells = (options.width * options.cells_per_eps.max(2.0) / eps).ceil() as usize;
        let grid = rectangle_grid(options.width, options.height, cells)?;
        let (cfg, field) = build_recovery(tensor, density, target, scales, &grid, options.recovery)?;
        let report = semi_discrete_energy(tensor, &field, &cfg);
        let diff = (report.scaled - limit).abs();
        rows.push(GammaRow {
            eps,
            t: scales.t,
            rho: scales.rho,
            count: scales.count,
            cores: cfg.len(),
            energy: report.energy,
            scaled: report.scaled,
            limit,
            gap: if limit > 0.0 { diff / limit } else { diff },
        });
    }
    Ok(rows)
}
