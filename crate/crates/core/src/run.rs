//! Subcommand dispatch and artifact writers. Every artifact starts with a
//! `#` line naming the tool version and the config hash.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::config::RunConfig;
use crate::elastostatics::{ElasticityTensor, Vec2};
use crate::polycrystal::{solve_polycrystal, BoundaryDatum, DomainGrid, GrainMap, PerimeterStencil, PolycrystalError};
use crate::relaxation::{build_density, BurgersLattice, DensityFunction, RelaxationError};
use crate::self_energy::{self_energy_report, CgOptions, QuadraticSelfEnergy, SelfEnergyError};
use crate::semi_discrete::{
    build_recovery, gamma_table, limit_value, rectangle_grid, semi_discrete_energy, validate_admissible, GammaOptions, GrainTarget, Partition,
    RecoveryOptions, RecoveryTarget, SemiDiscreteError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SelfEnergy,
    Density,
    Minimize,
    Recover,
    GammaTable,
}

impl Command {
    pub const ALL: [Command; 5] = [Self::SelfEnergy, Self::Density, Self::Minimize, Self::Recover, Self::GammaTable];

    pub fn name(self) -> &'static str {
        match self {
            Self::SelfEnergy => "selfenergy",
            Self::Density => "density",
            Self::Minimize => "minimize",
            Self::Recover => "recover",
            Self::GammaTable => "gamma-table",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("selfenergy: {0}")]
    SelfEnergy(#[from] SelfEnergyError),
    #[error("relaxation: {0}")]
    Relaxation(#[from] RelaxationError),
    #[error("polycrystal: {0}")]
    Polycrystal(#[from] PolycrystalError),
    #[error("semi-discrete: {0}")]
    SemiDiscrete(#[from] SemiDiscreteError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn header(cfg: &RunConfig) -> String {
    format!("# linpoly {VERSION} config {}\n", cfg.hash())
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

struct Writer<'a> {
    dir: &'a Path,
    cfg: &'a RunConfig,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, suffix: &str, body: &str) -> Result<(), RunError> {
        self.raw(suffix, &format!("{}{body}", header(self.cfg)))
    }

    fn raw(&mut self, suffix: &str, content: &str) -> Result<(), RunError> {
        let path = self.dir.join(format!("{}_{suffix}", self.cfg.output.prefix));
        fs::write(&path, content).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }
}

/// Runs one subcommand, writing its artifacts and the effective config into
/// `out_dir`. Returns the paths written.
pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let mut w = Writer { dir: out_dir, cfg, written: Vec::new() };
    w.put("config.toml", &cfg.to_canonical())?;
    let tensor = cfg.tensor();
    match command {
        Command::SelfEnergy => self_energy(&mut w, cfg, &tensor)?,
        Command::Density => density_artifacts(&mut w, cfg, &tensor)?,
        Command::Minimize => minimize(&mut w, cfg, &tensor)?,
        Command::Recover => recover(&mut w, cfg, &tensor)?,
        Command::GammaTable => gamma(&mut w, cfg, &tensor)?,
    }
    Ok(w.written)
}

fn self_energy(w: &mut Writer, cfg: &RunConfig, tensor: &ElasticityTensor) -> Result<(), RunError> {
    let se = &cfg.selfenergy;
    let cg = CgOptions { tolerance: cfg.solver.cg_tol, max_iterations: cfg.solver.cg_max_iter };
    let report = self_energy_report(tensor, se.xi, &se.eps, se.rho, cfg.annulus.radial, cfg.annulus.angular, cg)?;
    let mut s = String::from("xi_x,xi_y,eps,psi_eps,psi_bar,psi_limit\n");
    for (i, (&eps, &psi)) in report.eps_list.iter().zip(&report.psi_eps_values).enumerate() {
        let bar = report.psi_bar_values.as_ref().map(|v| f(v[i])).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{}", f(se.xi.x), f(se.xi.y), f(eps), f(psi), bar, f(report.psi_limit));
    }
    w.put("selfenergy.csv", &s)
}

/// Relaxed density of the configured lattice with the quadratic self-energy
/// of the configured material.
pub fn density_for(cfg: &RunConfig, tensor: &ElasticityTensor) -> Result<DensityFunction, RunError> {
    let psi = QuadraticSelfEnergy::from_tensor(tensor)?;
    let lattice = BurgersLattice::new(cfg.lattice.generators.clone(), cfg.lattice.radius)?;
    Ok(build_density(&lattice, |x| psi.eval(x))?)
}

fn density_artifacts(w: &mut Writer, cfg: &RunConfig, tensor: &ElasticityTensor) -> Result<(), RunError> {
    let d = density_for(cfg, tensor)?;
    w.put("hull.csv", &d.hull_csv())?;
    w.put("hull.gp", &d.gnuplot_polygon())?;
    let mut s = String::new();
    let _ = writeln!(s, "vertices = {}", d.hull_vertices().len());
    let _ = writeln!(s, "certified_radius = {}", f(d.certified_radius()));
    let _ = writeln!(s, "certificate_margin = {}", f(d.truncation_certificate()));
    let _ = writeln!(s, "phi_e1 = {}", f(d.phi_eval(Vec2::E1)));
    let _ = writeln!(s, "phi_e2 = {}", f(d.phi_eval(Vec2::E2)));
    w.put("density.txt", &s)
}

fn minimize(w: &mut Writer, cfg: &RunConfig, tensor: &ElasticityTensor) -> Result<(), RunError> {
    let dom = &cfg.domain;
    let grid = DomainGrid::rectangle(dom.nx, dom.ny, dom.h(), dom.margin)?;
    let datum = BoundaryDatum::with_layout(&grid, cfg.datum.levels.clone(), cfg.datum.layout)?;
    let d = density_for(cfg, tensor)?;
    let stencil = PerimeterStencil::new(&d, grid.h(), cfg.solver.stencil);
    let map = solve_polycrystal(&stencil, &grid, &datum)?;
    w.raw("grains.pgm", &grain_pgm(cfg, &grid, &datum, &map))?;
    let mut csv = String::from("i,j,x,y,level_index,value\n");
    for c in (0..grid.len()).filter(|&c| grid.is_interior(c)) {
        let (i, j) = grid.coords(c);
        let x = grid.center(c);
        let _ = writeln!(csv, "{},{},{},{},{},{}", i - dom.margin, j - dom.margin, f(x.x), f(x.y), map.level_index[c], f(map.values[c]));
    }
    w.put("grains.csv", &csv)?;
    let mut s = String::new();
    let _ = writeln!(s, "energy = {}", f(map.energy));
    let _ = writeln!(s, "stencil = {}", cfg.solver.stencil.size());
    let _ = writeln!(s, "cells = {}", grid.interior_count());
    let _ = writeln!(s, "levels = {}", cfg.datum.levels.len());
    let _ = writeln!(s, "grains = {}", map.grain_count(&grid));
    let _ = writeln!(s, "nested = {}", map.is_nested());
    for (g, st) in map.stats.iter().enumerate() {
        let _ = writeln!(s, "gap.{g}.cut_cost = {}", f(st.cut_cost));
        let _ = writeln!(s, "gap.{g}.perimeter = {}", f(map.perimeters[g]));
        let _ = writeln!(s, "gap.{g}.nodes = {}", st.flow.nodes);
        let _ = writeln!(s, "gap.{g}.arcs = {}", st.flow.arcs);
        let _ = writeln!(s, "gap.{g}.phases = {}", st.flow.phases);
        let _ = writeln!(s, "gap.{g}.augmentations = {}", st.flow.augmentations);
    }
    w.put("report.txt", &s)
}

/// Plain P2 map of the interior, top row first, level `i` at gray
/// `255 i / (k - 1)`.
fn grain_pgm(cfg: &RunConfig, grid: &DomainGrid, datum: &BoundaryDatum, map: &GrainMap) -> String {
    let dom = &cfg.domain;
    let k = datum.level_count();
    let mut s = format!("P2\n{}{} {}\n255\n", header(cfg), dom.nx, dom.ny);
    for j in (0..dom.ny).rev() {
        let row: Vec<String> = (0..dom.nx)
            .map(|i| {
                let idx = map.level_index[grid.index(i + dom.margin, j + dom.margin)];
                (if k > 1 { 255 * idx / (k - 1) } else { 0 }).to_string()
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// The configured grain-wise target.
pub fn target_for(cfg: &RunConfig) -> RecoveryTarget {
    let t = &cfg.target;
    let grains = (0..t.mu.len()).map(|g| GrainTarget { mu_density: t.mu[g], strain: t.strain[g], skew_offset: t.offset[g] }).collect();
    let partition = if t.cuts.is_empty() { Partition::Single } else { Partition::Stripes { axis: t.axis, cuts: t.cuts.clone() } };
    RecoveryTarget { partition, grains }
}

fn gamma_options(cfg: &RunConfig) -> GammaOptions {
    GammaOptions {
        width: cfg.domain.extent,
        height: cfg.domain.height(),
        scale_mode: cfg.scales.mode,
        recovery: RecoveryOptions { kernel: cfg.recover.kernel, block: cfg.recover.block },
        cells_per_eps: cfg.recover.cells_per_eps,
        limit_cells: cfg.recover.limit_cells,
    }
}

fn recover(w: &mut Writer, cfg: &RunConfig, tensor: &ElasticityTensor) -> Result<(), RunError> {
    let d = density_for(cfg, tensor)?;
    let target = target_for(cfg);
    let opts = gamma_options(cfg);
    let eps = cfg.recover.eps.unwrap_or(cfg.scales.eps[0]);
    let scales = opts.scale_mode.scales(eps)?;
    let grid = rectangle_grid(opts.width, opts.height, (opts.width * opts.cells_per_eps / eps).ceil() as usize)?;
    let (config, field) = build_recovery(tensor, &d, &target, scales, &grid, opts.recovery)?;
    let energy = semi_discrete_energy(tensor, &field, &config);
    let limit = limit_value(tensor, &d, &target, &rectangle_grid(opts.width, opts.height, opts.limit_cells)?)?;
    let violations = validate_admissible(&config, &grid);
    let circulations = field.core_circulations();
    let mut csv = String::from("x,y,b_x,b_y,circ_x,circ_y\n");
    let mut worst: f64 = 0.0;
    for ((p, b), (_, got)) in config.points.iter().zip(&config.burgers).zip(&circulations) {
        worst = worst.max((*got - *b).norm() / b.norm());
        let _ = writeln!(csv, "{},{},{},{},{},{}", f(p.x), f(p.y), f(b.x), f(b.y), f(got.x), f(got.y));
    }
    w.put("cores.csv", &csv)?;
    let mut s = String::new();
    let _ = writeln!(s, "kernel = {}", cfg.recover.kernel.name());
    let _ = writeln!(s, "eps = {}", f(eps));
    let _ = writeln!(s, "t = {}", f(scales.t()));
    let _ = writeln!(s, "rho = {}", f(scales.rho()));
    let _ = writeln!(s, "N = {}", scales.count());
    let _ = writeln!(s, "cores = {}", config.len());
    let _ = writeln!(s, "grid_cells = {}", grid.interior_count());
    let _ = writeln!(s, "E_eps = {}", f(energy.energy));
    let _ = writeln!(s, "F_eps = {}", f(energy.scaled));
    let _ = writeln!(s, "F_limit = {}", f(limit));
    let _ = writeln!(s, "max_circulation_error = {}", f(worst));
    let _ = writeln!(s, "admissibility_violations = {}", violations.len());
    for p in field.placements() {
        let _ = writeln!(s, "grain.{}.block = {}", p.grain, p.block);
        let _ = writeln!(s, "grain.{}.kernel_radius = {}", p.grain, f(p.kernel_radius));
        for (k, (b, weight, sites)) in p.types.iter().enumerate() {
            let _ = writeln!(s, "grain.{}.type.{k} = {} {} {} {}", p.grain, f(b.x), f(b.y), f(*weight), sites);
        }
    }
    w.put("recover.txt", &s)
}

fn gamma(w: &mut Writer, cfg: &RunConfig, tensor: &ElasticityTensor) -> Result<(), RunError> {
    let d = density_for(cfg, tensor)?;
    let rows = gamma_table(tensor, &d, &target_for(cfg), &cfg.scales.eps, gamma_options(cfg))?;
    let mut s = String::from("eps,t,rho,N,M_count,E_eps,F_eps,F_limit,gap\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{},{},{}", f(r.eps), f(r.t), f(r.rho), r.count, r.cores, f(r.energy), f(r.scaled), f(r.limit), f(r.gap));
    }
    w.put("gamma.csv", &s)
}
