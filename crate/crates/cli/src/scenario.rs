//! Scenario files: one TOML document per run.
//!
//! Lengths are in the same unit as 1/k; indices are dimensionless.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use slabguide::estimates::WeightSpec;
use slabguide::{BumpFunction, CoreIndex, Grid2D, MapSpec, Parity, PerturbationMap, RhsVariant, WaveguideProfile};

use crate::error::{CliError, CliResult};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 201;
pub const DEFAULT_WEIGHT_EXPONENT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Modes,
    Green,
    Field,
    Perturb,
    Picard,
    Estimates,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Modes => "modes",
            RunKind::Green => "green",
            RunKind::Field => "field",
            RunKind::Perturb => "perturb",
            RunKind::Picard => "picard",
            RunKind::Estimates => "estimates",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RunKind>,
    /// Quadrature tolerance of the Green's function evaluator.
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenConfig>,
    #[serde(default)]
    pub picard: PicardConfig,
}

/// Step core (`n_co`) or parabolic core (`n_center`, `n_edge`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    /// Free-space wavenumber.
    pub k: f64,
    /// Core half-width.
    pub h: f64,
    pub n_cl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_co: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_edge: Option<f64>,
}

/// μ = scale·(1+x²+z²)^{-a}, or separable (1+x²)^{-a/2}(1+z²)^{-a2/2} when `a2` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default = "default_weight_a")]
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            a: DEFAULT_WEIGHT_EXPONENT,
            a2: None,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "minus_one")]
    pub x_min: f64,
    #[serde(default = "one")]
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub nx: usize,
    #[serde(default = "minus_one")]
    pub z_min: f64,
    #[serde(default = "one")]
    pub z_max: f64,
    #[serde(default = "default_points")]
    pub nz: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: -1.0,
            x_max: 1.0,
            nx: DEFAULT_GRID_POINTS,
            z_min: -1.0,
            z_max: 1.0,
            nz: DEFAULT_GRID_POINTS,
        }
    }
}

/// Gaussian source amplitude·exp(-|p-p0|²/(2 width²)) sampled on `grid`
/// (the observation grid when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default = "default_source_x")]
    pub x0: f64,
    #[serde(default)]
    pub z0: f64,
    #[serde(default = "default_source_width")]
    pub width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            x0: default_source_x(),
            z0: 0.0,
            width: default_source_width(),
            amplitude: 1.0,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
}

/// Product map Γ(s,t) = (s, t + ε S(s) T(t)) and the unperturbed mode it acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// ε as a fraction of the computed ε₀.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0_fraction: Option<f64>,
    /// "s" or "a".
    #[serde(default = "default_parity")]
    pub mode: String,
    /// Index among modes of that parity, ordered by λ.
    #[serde(default)]
    pub mode_index: usize,
    /// "derived" or "swapped".
    #[serde(default = "default_rhs")]
    pub rhs: String,
    pub s: BumpConfig,
    pub t: BumpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenConfig {
    /// Rows of [x, z, ξ, ζ].
    pub pairs: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_min_iter")]
    pub min_iter: usize,
    /// Stop once the weighted H² norm of an increment is below this.
    #[serde(default = "default_picard_tol")]
    pub tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            max_iter: default_max_iter(),
            min_iter: default_min_iter(),
            tol: default_picard_tol(),
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_weight_a() -> f64 {
    DEFAULT_WEIGHT_EXPONENT
}
fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}
fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn default_source_x() -> f64 {
    0.05
}
fn default_source_width() -> f64 {
    0.1
}
fn default_parity() -> String {
    "s".into()
}
fn default_rhs() -> String {
    "derived".into()
}
fn default_max_iter() -> usize {
    50
}
fn default_min_iter() -> usize {
    5
}
fn default_picard_tol() -> f64 {
    1e-10
}

fn check(ok: bool, path: &str, msg: impl std::fmt::Display) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::validation(path, msg))
    }
}

fn at<T>(path: &str, r: slabguide::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::validation(path, e))
}

impl Scenario {
    pub fn parse(text: &str) -> CliResult<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Scenario::parse(&text)
    }

    /// Canonical TOML; `parse(emit())` reproduces the scenario.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    /// Checks every precondition needed by `kind`.
    pub fn validate(&self, kind: RunKind) -> CliResult<()> {
        check(
            self.tol > 1e-12 && self.tol < 1e-2,
            "tol",
            format!("must lie in (1e-12, 1e-2), got {}", self.tol),
        )?;
        self.profile()?;
        self.weight()?;
        let grid = grid_of(&self.grid, "grid")?;
        let s = &self.source;
        check(
            s.width > 0.0 && s.width.is_finite(),
            "source.width",
            format!("must be positive, got {}", s.width),
        )?;
        check(s.x0.is_finite(), "source.x0", "must be finite")?;
        check(s.z0.is_finite(), "source.z0", "must be finite")?;
        check(s.amplitude.is_finite(), "source.amplitude", "must be finite")?;
        if let Some(g) = &s.grid {
            let sg = grid_of(g, "source.grid")?;
            if matches!(kind, RunKind::Picard) && sg != grid {
                return Err(CliError::validation(
                    "source.grid",
                    "picard runs need the source on the observation grid",
                ));
            }
        }
        if let Some(m) = &self.map {
            self.validate_map(m)?;
        }
        match kind {
            RunKind::Perturb | RunKind::Picard if self.map.is_none() => {
                return Err(CliError::validation("map", format!("required for `{}` runs", kind.name())));
            }
            RunKind::Perturb | RunKind::Picard => {
                let m = self.map.as_ref().unwrap();
                check(
                    m.eps.is_some() != m.eps0_fraction.is_some(),
                    "map",
                    "give exactly one of `eps` and `eps0_fraction`",
                )?;
            }
            RunKind::Green => {
                let g = self
                    .green
                    .as_ref()
                    .ok_or_else(|| CliError::validation("green", "required for `green` runs"))?;
                check(!g.pairs.is_empty(), "green.pairs", "must not be empty")?;
                for (i, p) in g.pairs.iter().enumerate() {
                    let path = format!("green.pairs[{i}]");
                    check(p.iter().all(|v| v.is_finite()), &path, "must be finite")?;
                    check(p[0] != p[2] || p[1] != p[3], &path, "source and observation points coincide")?;
                }
            }
            _ => {}
        }
        if matches!(kind, RunKind::Picard) {
            let p = &self.picard;
            check(p.max_iter >= 1, "picard.max_iter", "must be at least 1")?;
            check(p.min_iter <= p.max_iter, "picard.min_iter", "must not exceed max_iter")?;
            check(
                p.tol >= 0.0 && p.tol.is_finite(),
                "picard.tol",
                "must be finite and nonnegative",
            )?;
        }
        Ok(())
    }

    fn validate_map(&self, m: &MapConfig) -> CliResult<()> {
        for (name, b) in [("map.s", &m.s), ("map.t", &m.t)] {
            at(name, BumpFunction::new(b.amplitude, b.center, b.half_width))?;
        }
        if let Some(e) = m.eps {
            check(
                e >= 0.0 && e.is_finite(),
                "map.eps",
                format!("must be finite and nonnegative, got {e}"),
            )?;
            at("map.eps", self.perturbation_map()?.check_invertible(e))?;
        }
        if let Some(f) = m.eps0_fraction {
            check(
                f > 0.0 && f.is_finite(),
                "map.eps0_fraction",
                format!("must be positive, got {f}"),
            )?;
        }
        self.parity()?;
        self.rhs_variant()?;
        Ok(())
    }

    pub fn profile(&self) -> CliResult<WaveguideProfile> {
        let p = &self.profile;
        for (name, v) in [("profile.k", p.k), ("profile.h", p.h), ("profile.n_cl", p.n_cl)] {
            check(v.is_finite() && v > 0.0, name, format!("must be positive, got {v}"))?;
        }
        let core = match (p.n_co, p.n_center, p.n_edge) {
            (Some(n), None, None) => {
                check(n.is_finite() && n > 0.0, "profile.n_co", format!("must be positive, got {n}"))?;
                CoreIndex::Constant(n)
            }
            (None, Some(c), Some(e)) => {
                check(
                    c.is_finite() && c > 0.0,
                    "profile.n_center",
                    format!("must be positive, got {c}"),
                )?;
                check(
                    e.is_finite() && e > 0.0,
                    "profile.n_edge",
                    format!("must be positive, got {e}"),
                )?;
                CoreIndex::Parabolic { center: c, edge: e }
            }
            _ => {
                return Err(CliError::validation(
                    "profile",
                    "give either `n_co` or both `n_center` and `n_edge`",
                ))
            }
        };
        at("profile", WaveguideProfile::new(p.k, p.h, core, p.n_cl))
    }

    pub fn weight(&self) -> CliResult<WeightSpec> {
        let w = &self.weight;
        let spec = match w.a2 {
            None => at("weight.a", WeightSpec::power_law(w.a))?,
            Some(a2) => at("weight", WeightSpec::separable(w.a, a2))?,
        };
        at("weight.scale", spec.with_scale(w.scale))
    }

    pub fn grid(&self) -> CliResult<Grid2D> {
        grid_of(&self.grid, "grid")
    }

    pub fn source_grid(&self) -> CliResult<Grid2D> {
        match &self.source.grid {
            Some(g) => grid_of(g, "source.grid"),
            None => self.grid(),
        }
    }

    /// The configured map, or the identity when there is none.
    pub fn perturbation_map(&self) -> CliResult<PerturbationMap> {
        let spec = match &self.map {
            Some(m) => MapSpec::Product {
                s: at("map.s", BumpFunction::new(m.s.amplitude, m.s.center, m.s.half_width))?,
                t: at("map.t", BumpFunction::new(m.t.amplitude, m.t.center, m.t.half_width))?,
            },
            None => MapSpec::Product {
                s: BumpFunction::zero(),
                t: BumpFunction::zero(),
            },
        };
        let w = self.weight()?;
        at("map", PerturbationMap::new(spec, |x, z| w.value(x, z)))
    }

    pub fn parity(&self) -> CliResult<Parity> {
        match self.map.as_ref().map(|m| m.mode.as_str()) {
            None | Some("s") => Ok(Parity::Symmetric),
            Some("a") => Ok(Parity::Antisymmetric),
            Some(other) => Err(CliError::validation(
                "map.mode",
                format!("expected \"s\" or \"a\", got {other:?}"),
            )),
        }
    }

    pub fn rhs_variant(&self) -> CliResult<RhsVariant> {
        match self.map.as_ref().map(|m| m.rhs.as_str()) {
            None | Some("derived") => Ok(RhsVariant::Derived),
            Some("swapped") => Ok(RhsVariant::Swapped),
            Some(other) => Err(CliError::validation(
                "map.rhs",
                format!("expected \"derived\" or \"swapped\", got {other:?}"),
            )),
        }
    }
}

fn grid_of(g: &GridConfig, path: &str) -> CliResult<Grid2D> {
    check(
        g.nx >= 5,
        &format!("{path}.nx"),
        format!("needs at least 5 points, got {}", g.nx),
    )?;
    check(
        g.nz >= 5,
        &format!("{path}.nz"),
        format!("needs at least 5 points, got {}", g.nz),
    )?;
    at(path, Grid2D::new(g.x_min, g.x_max, g.nx, g.z_min, g.z_max, g.nz))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[profile]\nk = 5.0\nh = 0.2\nn_co = 2.0\nn_cl = 1.0\n";

    #[test]
    fn defaults_fill_in() {
        let sc = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(sc.tol, 1e-6);
        assert_eq!((sc.grid.nx, sc.grid.nz), (201, 201));
        assert_eq!(sc.weight.a, 2.0);
        sc.validate(RunKind::Modes).unwrap();
    }

    #[test]
    fn emit_parse_emit_is_stable() {
        let mut sc = Scenario::parse(MINIMAL).unwrap();
        sc.map = Some(MapConfig {
            eps: None,
            eps0_fraction: Some(0.5),
            mode: "s".into(),
            mode_index: 0,
            rhs: "derived".into(),
            s: BumpConfig {
                amplitude: 1.0,
                center: 0.1,
                half_width: 0.3,
            },
            t: BumpConfig {
                amplitude: 1.0,
                center: 0.0,
                half_width: 0.5,
            },
        });
        sc.green = Some(GreenConfig {
            pairs: vec![[0.1, 0.0, -0.1, 0.3]],
        });
        let once = sc.emit();
        let back = Scenario::parse(&once).unwrap();
        assert_eq!(back, sc);
        assert_eq!(back.emit(), once);
        assert_eq!(back.hash(), sc.hash());
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("h = 0.2", "h = -0.2");
        match Scenario::parse(&bad).unwrap().validate(RunKind::Modes) {
            Err(CliError::Validation { path, .. }) => assert_eq!(path, "profile.h"),
            other => panic!("{other:?}"),
        }
        let sc = Scenario::parse(&format!("tol = 0.5\n{MINIMAL}")).unwrap();
        assert!(matches!(sc.validate(RunKind::Modes), Err(CliError::Validation { path, .. }) if path == "tol"));
        let sc = Scenario::parse(&format!("{MINIMAL}[grid]\nnx = 2\n")).unwrap();
        assert!(matches!(sc.validate(RunKind::Field), Err(CliError::Validation { path, .. }) if path == "grid.nx"));
        let sc = Scenario::parse(&format!("{MINIMAL}[weight]\na = 0.5\n")).unwrap();
        assert!(matches!(sc.validate(RunKind::Estimates), Err(CliError::Validation { path, .. }) if path == "weight.a"));
        let sc = Scenario::parse(MINIMAL).unwrap();
        assert!(matches!(sc.validate(RunKind::Perturb), Err(CliError::Validation { path, .. }) if path == "map"));
        assert!(matches!(sc.validate(RunKind::Green), Err(CliError::Validation { path, .. }) if path == "green"));
        assert!(Scenario::parse(&format!("{MINIMAL}bogus = 1\n")).is_err());
    }

    #[test]
    fn map_preconditions() {
        let base = format!(
            "{MINIMAL}[map]\neps = 1.0\n[map.s]\namplitude = 0.1\ncenter = 0.1\nhalf_width = 0.3\n[map.t]\namplitude = 1.0\ncenter = 0.0\nhalf_width = 0.5\n"
        );
        Scenario::parse(&base).unwrap().validate(RunKind::Perturb).unwrap();
        let both = base.replace("eps = 1.0", "eps = 1.0\neps0_fraction = 0.5");
        assert!(
            matches!(Scenario::parse(&both).unwrap().validate(RunKind::Perturb), Err(CliError::Validation { path, .. }) if path == "map")
        );
        let folded = base.replace("eps = 1.0", "eps = 5.0");
        assert!(
            matches!(Scenario::parse(&folded).unwrap().validate(RunKind::Perturb), Err(CliError::Validation { path, .. }) if path == "map.eps")
        );
        let width = base.replace("half_width = 0.3", "half_width = 0.0");
        assert!(
            matches!(Scenario::parse(&width).unwrap().validate(RunKind::Perturb), Err(CliError::Validation { path, .. }) if path == "map.s")
        );
        let parity = base.replace("eps = 1.0", "eps = 1.0\nmode = \"x\"");
        assert!(
            matches!(Scenario::parse(&parity).unwrap().validate(RunKind::Perturb), Err(CliError::Validation { path, .. }) if path == "map.mode")
        );
    }
}
