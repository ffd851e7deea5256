//! Run configuration: flat `section.key = value` text (TOML syntax), fully
//! validated before anything runs, with a canonical echo.
//!
//! ```text
//! material.lambda = 1.0
//! material.mu = 1.0
//! datum.levels = [0.0, 1.0]
//! datum.layout = "left-right"
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Value;

use crate::elastostatics::{ElasticityTensor, Matrix2, Vec2};
use crate::polycrystal::{DatumLayout, StencilKind};
use crate::semi_discrete::{Axis, CoreKernel, ScaleMode};

/// Every problem found in a config text, in key order.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", .issues.join("\n"))]
pub struct ConfigError {
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialConfig {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub generators: Vec<Vec2>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfEnergyConfig {
    pub xi: Vec2,
    pub eps: Vec<f64>,
    /// Hard-core radius; `psi_bar` is computed only when set.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusConfig {
    pub radial: usize,
    pub angular: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub stencil: StencilKind,
    pub cg_tol: f64,
    pub cg_max_iter: Option<usize>,
}

/// `nx x ny` cells of side `extent / nx`, framed by `margin` exterior rings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConfig {
    pub nx: usize,
    pub ny: usize,
    pub extent: f64,
    pub margin: usize,
}

impl DomainConfig {
    pub fn h(&self) -> f64 {
        self.extent / self.nx as f64
    }

    pub fn height(&self) -> f64 {
        self.h() * self.ny as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatumConfig {
    pub levels: Vec<f64>,
    pub layout: DatumLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalesConfig {
    pub mode: ScaleMode,
    /// Strictly decreasing core radii.
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverConfig {
    pub kernel: CoreKernel,
    pub block: Option<u64>,
    pub cells_per_eps: f64,
    pub limit_cells: usize,
    /// Core radius of the `recover` command; defaults to the first of
    /// `scales.eps`.
    pub eps: Option<f64>,
}

/// Grain-wise constant target: `cuts.len() + 1` stripes along `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetConfig {
    pub axis: Axis,
    pub cuts: Vec<f64>,
    pub mu: Vec<Vec2>,
    pub strain: Vec<Matrix2>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: MaterialConfig,
    pub lattice: LatticeConfig,
    pub selfenergy: SelfEnergyConfig,
    pub annulus: AnnulusConfig,
    pub solver: SolverConfig,
    pub domain: DomainConfig,
    pub datum: DatumConfig,
    pub scales: ScalesConfig,
    pub recover: RecoverConfig,
    pub target: TargetConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn tensor(&self) -> ElasticityTensor {
        ElasticityTensor::isotropic(self.material.lambda, self.material.mu).expect("validated at parse time")
    }

    /// Canonical text: every effective key, fixed order, floats in `{:.16e}`.
    /// Parsing it gives back `self`.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("material.lambda", float(self.material.lambda));
        line("material.mu", float(self.material.mu));
        line("lattice.generators", format!("[{}]", self.lattice.generators.iter().map(|&g| vec2(g)).collect::<Vec<_>>().join(", ")));
        line("lattice.radius", float(self.lattice.radius));
        line("selfenergy.xi", vec2(self.selfenergy.xi));
        line("selfenergy.eps", floats(&self.selfenergy.eps));
        if let Some(rho) = self.selfenergy.rho {
            line("selfenergy.rho", float(rho));
        }
        line("annulus.radial", self.annulus.radial.to_string());
        line("annulus.angular", self.annulus.angular.to_string());
        line("solver.stencil", self.solver.stencil.size().to_string());
        line("solver.cg_tol", float(self.solver.cg_tol));
        if let Some(n) = self.solver.cg_max_iter {
            line("solver.cg_max_iter", n.to_string());
        }
        line("domain.nx", self.domain.nx.to_string());
        line("domain.ny", self.domain.ny.to_string());
        line("domain.extent", float(self.domain.extent));
        line("domain.margin", self.domain.margin.to_string());
        line("datum.levels", floats(&self.datum.levels));
        match self.datum.layout {
            DatumLayout::Constant(i) => {
                line("datum.layout", "\"constant\"".into());
                line("datum.index", i.to_string());
            }
            DatumLayout::LeftRight => line("datum.layout", "\"left-right\"".into()),
            DatumLayout::TopBottom => line("datum.layout", "\"top-bottom\"".into()),
            DatumLayout::Sectors(n) => {
                line("datum.layout", "\"sectors\"".into());
                line("datum.sectors", n.to_string());
            }
        }
        match self.scales.mode {
            ScaleMode::Exponent(t) => line("scales.t", float(t)),
            ScaleMode::Count(n) => line("scales.count", n.to_string()),
        }
        line("scales.eps", floats(&self.scales.eps));
        line("recover.kernel", format!("\"{}\"", self.recover.kernel.name()));
        if let Some(b) = self.recover.block {
            line("recover.block", b.to_string());
        }
        line("recover.cells_per_eps", float(self.recover.cells_per_eps));
        line("recover.limit_cells", self.recover.limit_cells.to_string());
        if let Some(e) = self.recover.eps {
            line("recover.eps", float(e));
        }
        line("target.axis", if self.target.axis == Axis::X { "\"x\"" } else { "\"y\"" }.into());
        line("target.cuts", floats(&self.target.cuts));
        line("target.mu", format!("[{}]", self.target.mu.iter().map(|&m| vec2(m)).collect::<Vec<_>>().join(", ")));
        line(
            "target.strain",
            format!("[{}]", self.target.strain.iter().map(|s| floats(&[s.xx, s.xy, s.yy])).collect::<Vec<_>>().join(", ")),
        );
        line("target.offset", floats(&self.target.offset));
        line("output.prefix", Value::String(self.output.prefix.clone()).to_string());
        out
    }

    /// SHA-256 of the canonical text, hex.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_canonical().as_bytes()))
    }
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn floats(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|&x| float(x)).collect::<Vec<_>>().join(", "))
}

fn vec2(v: Vec2) -> String {
    floats(&[v.x, v.y])
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

/// Material keys people reach for that this tool does not take.
const FOREIGN_MATERIAL_KEYS: [&str; 6] = ["poisson", "nu", "young", "youngs_modulus", "e", "poisson_ratio"];

/// Keyed view of the flattened text; records every key asked for so the
/// leftovers can be reported with suggestions.
struct Reader {
    values: BTreeMap<String, Value>,
    known: Vec<&'static str>,
    issues: Vec<String>,
}

impl Reader {
    fn raw(&mut self, key: &'static str) -> Option<Value> {
        self.known.push(key);
        self.values.remove(key)
    }

    fn fail(&mut self, key: &str, what: &str) {
        self.issues.push(format!("{key}: {what}"));
    }

    fn number(&mut self, key: &'static str) -> Option<f64> {
        let v = self.raw(key)?;
        match as_f64(&v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.fail(key, "expected a finite number");
                None
            }
        }
    }

    fn positive_or(&mut self, key: &'static str, default: f64) -> f64 {
        match self.number(key) {
            Some(x) if x > 0.0 => x,
            Some(_) => {
                self.fail(key, "must be positive");
                default
            }
            None => default,
        }
    }

    fn count(&mut self, key: &'static str) -> Option<usize> {
        let v = self.raw(key)?;
        match v.as_integer() {
            Some(n) if n >= 0 => Some(n as usize),
            _ => {
                self.fail(key, "expected a nonnegative integer");
                None
            }
        }
    }

    fn count_at_least(&mut self, key: &'static str, min: usize, default: usize) -> usize {
        match self.count(key) {
            Some(n) if n >= min => n,
            Some(_) => {
                self.fail(key, &format!("must be at least {min}"));
                default
            }
            None => default,
        }
    }

    fn numbers(&mut self, key: &'static str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let parsed = v.as_array().and_then(|a| a.iter().map(|x| as_f64(x).filter(|x| x.is_finite())).collect::<Option<Vec<_>>>());
        if parsed.is_none() {
            self.fail(key, "expected a list of finite numbers");
        }
        parsed
    }

    fn vector(&mut self, key: &'static str) -> Option<Vec2> {
        let v = self.raw(key)?;
        let parsed = pair(&v);
        if parsed.is_none() {
            self.fail(key, "expected [x, y]");
        }
        parsed
    }

    fn vectors(&mut self, key: &'static str) -> Option<Vec<Vec2>> {
        let v = self.raw(key)?;
        let parsed = v.as_array().and_then(|a| a.iter().map(pair).collect::<Option<Vec<_>>>());
        if parsed.is_none() {
            self.fail(key, "expected a list of [x, y] pairs");
        }
        parsed
    }

    fn triples(&mut self, key: &'static str) -> Option<Vec<[f64; 3]>> {
        let v = self.raw(key)?;
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|t| match t.as_array().map(|t| t.iter().map(as_f64).collect::<Option<Vec<_>>>()) {
                    Some(Some(t)) if t.len() == 3 && t.iter().all(|x| x.is_finite()) => Some([t[0], t[1], t[2]]),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
        });
        if parsed.is_none() {
            self.fail(key, "expected a list of [xx, xy, yy] triples");
        }
        parsed
    }

    fn text(&mut self, key: &'static str) -> Option<String> {
        let v = self.raw(key)?;
        match v {
            Value::String(s) => Some(s),
            _ => {
                self.fail(key, "expected a quoted string");
                None
            }
        }
    }

    /// Reports every key nobody asked for.
    fn finish_unknown(&mut self) {
        let leftover: Vec<String> = self.values.keys().cloned().collect();
        for key in leftover {
            let msg = self.unknown_message(&key);
            self.issues.push(msg);
        }
    }

    fn unknown_message(&self, key: &str) -> String {
        if let Some(field) = key.strip_prefix("material.") {
            let lower = field.to_ascii_lowercase();
            if strsim::levenshtein(&lower, "poisson") <= 2 {
                return format!("unknown key {key}: material.poisson is not a key; use lambda/mu");
            }
            if FOREIGN_MATERIAL_KEYS.contains(&lower.as_str()) {
                return format!("unknown key {key}: material.{field} is not a key; use lambda/mu");
            }
        }
        let best = self
            .known
            .iter()
            .map(|k| (strsim::levenshtein(key, k), *k))
            .min()
            .filter(|&(d, k)| d <= (k.len() / 3).max(2));
        match best {
            Some((_, k)) => format!("unknown key {key}: did you mean {k}?"),
            None => format!("unknown key {key}"),
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    }
}

fn pair(v: &Value) -> Option<Vec2> {
    let a = v.as_array()?;
    match a.as_slice() {
        [x, y] => {
            let p = Vec2::new(as_f64(x)?, as_f64(y)?);
            p.is_finite().then_some(p)
        }
        _ => None,
    }
}

/// `a.b.c = v` and `[a] b.c = v` both land on `"a.b.c"`.
fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] > w[1])
}

/// Parses and validates a config text, reporting every problem at once.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError { issues: vec![format!("syntax: {}", e.message())] })?;
    let mut values = BTreeMap::new();
    flatten("", table, &mut values);
    let has_material = values.keys().any(|k| k.starts_with("material."));
    let mut r = Reader { values, known: Vec::new(), issues: Vec::new() };
    if !has_material {
        r.issues.push("missing section material (material.lambda and material.mu are required)".into());
    }

    let lambda = r.number("material.lambda");
    let mu = r.number("material.mu");
    if has_material {
        if lambda.is_none() && !r.issues.iter().any(|i| i.starts_with("material.lambda")) {
            r.issues.push("missing key material.lambda".into());
        }
        if mu.is_none() && !r.issues.iter().any(|i| i.starts_with("material.mu")) {
            r.issues.push("missing key material.mu".into());
        }
    }
    let material = MaterialConfig { lambda: lambda.unwrap_or(1.0), mu: mu.unwrap_or(1.0) };
    if let (Some(l), Some(m)) = (lambda, mu) {
        if let Err(e) = ElasticityTensor::isotropic(l, m) {
            r.issues.push(format!("material: {e}"));
        }
    }

    let generators = r.vectors("lattice.generators").unwrap_or_else(|| vec![Vec2::E1, Vec2::E2]);
    if generators.len() < 2 {
        r.fail("lattice.generators", "need at least two generators");
    }
    let lattice = LatticeConfig { generators, radius: r.positive_or("lattice.radius", 2.0) };

    let selfenergy = SelfEnergyConfig {
        xi: r.vector("selfenergy.xi").unwrap_or(Vec2::E1),
        eps: r.numbers("selfenergy.eps").unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]),
        rho: r.number("selfenergy.rho"),
    };
    if selfenergy.eps.is_empty() || selfenergy.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        r.fail("selfenergy.eps", "core radii must lie in (0, 1)");
    }
    if let Some(rho) = selfenergy.rho {
        if selfenergy.eps.iter().any(|&e| rho <= e) {
            r.fail("selfenergy.rho", "hard-core radius must exceed every core radius");
        }
    }

    let annulus = AnnulusConfig {
        radial: r.count_at_least("annulus.radial", 1, crate::self_energy::DEFAULT_RADIAL_CELLS),
        angular: r.count_at_least("annulus.angular", 3, crate::self_energy::DEFAULT_ANGULAR_CELLS),
    };

    let stencil = match r.count("solver.stencil") {
        None => StencilKind::Four,
        Some(n) => StencilKind::from_size(n).unwrap_or_else(|| {
            r.fail("solver.stencil", "must be 4, 8 or 16");
            StencilKind::Four
        }),
    };
    let solver = SolverConfig {
        stencil,
        cg_tol: r.positive_or("solver.cg_tol", 1e-10),
        cg_max_iter: r.count("solver.cg_max_iter"),
    };

    let nx = r.count_at_least("domain.nx", 1, 64);
    let domain = DomainConfig {
        nx,
        ny: r.count_at_least("domain.ny", 1, nx),
        extent: r.positive_or("domain.extent", 1.0),
        margin: r.count_at_least("domain.margin", 1, 1),
    };

    let levels = r.numbers("datum.levels").unwrap_or_else(|| vec![0.0, 1.0]);
    if levels.is_empty() {
        r.fail("datum.levels", "need at least one level");
    }
    if let Some(i) = levels.windows(2).position(|w| w[0] >= w[1]) {
        r.fail(
            "datum.levels",
            &format!("must be strictly increasing ({} at position {} is not above {})", levels[i + 1], i + 2, levels[i]),
        );
    }
    let layout_name = r.text("datum.layout").unwrap_or_else(|| "left-right".into());
    let index = r.count("datum.index");
    let sectors = r.count("datum.sectors");
    let layout = match layout_name.as_str() {
        "left-right" => DatumLayout::LeftRight,
        "top-bottom" => DatumLayout::TopBottom,
        "constant" => {
            let i = index.unwrap_or(0);
            if i >= levels.len().max(1) {
                r.fail("datum.index", "level index out of range");
            }
            DatumLayout::Constant(i)
        }
        "sectors" => {
            let n = sectors.unwrap_or(levels.len());
            if n == 0 {
                r.fail("datum.sectors", "must be at least 1");
            }
            DatumLayout::Sectors(n)
        }
        other => {
            r.fail("datum.layout", &format!("unknown layout {other:?}; use left-right, top-bottom, constant or sectors"));
            DatumLayout::LeftRight
        }
    };
    if matches!(layout, DatumLayout::LeftRight | DatumLayout::TopBottom) && levels.len() < 2 {
        r.fail("datum.layout", "two-sided layouts need two levels");
    }
    if index.is_some() && !matches!(layout, DatumLayout::Constant(_)) {
        r.fail("datum.index", "only used with datum.layout = \"constant\"");
    }
    if sectors.is_some() && !matches!(layout, DatumLayout::Sectors(_)) {
        r.fail("datum.sectors", "only used with datum.layout = \"sectors\"");
    }
    let datum = DatumConfig { levels, layout };

    let t = r.number("scales.t");
    let count = r.count("scales.count");
    let mode = match (t, count) {
        (Some(_), Some(_)) => {
            r.issues.push("scales: give scales.t or scales.count, not both".into());
            ScaleMode::Count(16)
        }
        (Some(t), None) => {
            if !(t > 0.0 && t < 1.0) {
                r.fail("scales.t", "exponent must lie in (0, 1)");
            }
            ScaleMode::Exponent(t)
        }
        (None, Some(n)) => {
            if n == 0 {
                r.fail("scales.count", "must be at least 1");
            }
            ScaleMode::Count(n)
        }
        (None, None) => ScaleMode::Count(16),
    };
    let eps = r.numbers("scales.eps").unwrap_or_else(|| (6..=10).map(|p| 2f64.powi(-p)).collect());
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        r.fail("scales.eps", "core radii must lie in (0, 1)");
    } else if !strictly_decreasing(&eps) {
        r.fail("scales.eps", "must be strictly decreasing");
    }
    let scales = ScalesConfig { mode, eps };

    let kernel = match r.text("recover.kernel") {
        None => CoreKernel::default(),
        Some(name) => CoreKernel::from_name(&name).unwrap_or_else(|| {
            r.fail("recover.kernel", &format!("unknown kernel {name:?}; use hardcore, diffused or volterra"));
            CoreKernel::default()
        }),
    };
    let block = r.count("recover.block").map(|b| b as u64);
    if block == Some(0) {
        r.fail("recover.block", "must be at least 1");
    }
    let cells_per_eps = r.positive_or("recover.cells_per_eps", 2.0);
    if cells_per_eps < 2.0 {
        r.fail("recover.cells_per_eps", "must be at least 2");
    }
    let recover = RecoverConfig {
        kernel,
        block,
        cells_per_eps,
        limit_cells: r.count_at_least("recover.limit_cells", 1, 1024),
        eps: r.number("recover.eps"),
    };
    if let Some(e) = recover.eps {
        if !(e > 0.0 && e < 1.0) {
            r.fail("recover.eps", "core radius must lie in (0, 1)");
        }
    }

    let axis = match r.text("target.axis").as_deref() {
        None | Some("x") => Axis::X,
        Some("y") => Axis::Y,
        Some(other) => {
            r.fail("target.axis", &format!("unknown axis {other:?}; use x or y"));
            Axis::X
        }
    };
    let cuts = r.numbers("target.cuts").unwrap_or_default();
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        r.fail("target.cuts", "must be strictly increasing");
    }
    let grains = cuts.len() + 1;
    let mu = r.vectors("target.mu").unwrap_or_else(|| vec![Vec2::E1; grains]);
    let strain: Vec<Matrix2> = r
        .triples("target.strain")
        .map(|ts| ts.iter().map(|t| Matrix2::new(t[0], t[1], t[1], t[2])).collect())
        .unwrap_or_else(|| vec![Matrix2::ZERO; grains]);
    let offset = r.numbers("target.offset").unwrap_or_else(|| vec![0.0; grains]);
    for (key, len) in [("target.mu", mu.len()), ("target.strain", strain.len()), ("target.offset", offset.len())] {
        if len != grains {
            r.fail(key, &format!("{len} entries for {grains} grains"));
        }
    }
    let target = TargetConfig { axis, cuts, mu, strain, offset };

    let prefix = r.text("output.prefix").unwrap_or_else(|| "linpoly".into());
    if prefix.is_empty() || prefix.contains(['/', '\\']) {
        r.fail("output.prefix", "must be a nonempty file-name stem");
    }
    let output = OutputConfig { prefix };

    r.finish_unknown();
    if r.issues.is_empty() {
        Ok(RunConfig { material, lattice, selfenergy, annulus, solver, domain, datum, scales, recover, target, output })
    } else {
        Err(ConfigError { issues: r.issues })
    }
}
