use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    embed_in_infinite_well, load_potential_table, EmbeddedPotential, PiecewisePotential, Shape,
};
use crate::tightbinding::GateKind;
use crate::units::{PhysicalUnit, Quantity, UnitKind, UnitSystem};

pub const SCHEMA_VERSION: u32 = 1;

/// Scenario file as written by the user. Every field is optional at parse
/// time; [`ScenarioConfig::resolve`] decides what the selected solver needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<UnitsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSelection>,
    /// Explicit dot intervals in box coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dots: Option<Vec<[Quantity; 2]>>,
    /// One-based dot holding the electron at `t = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_dot: Option<usize>,
    /// One-based detector dots for the final histogram.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<Vec<PulseConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tb: Option<TbConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximations: Option<Vec<ApproxConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Quantity>,
    /// Effective mass in electron masses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_eff: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piecewise: Option<PiecewiseConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<Quantity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Quantity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<Quantity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeConfig {
    Constant,
    Linear,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<Quantity>,
    /// Fills both margins with this height (piecewise sources only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_height: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_basis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_threshold: Option<Quantity>,
    /// Number of lowest energies echoed in the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_report: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverSelection {
    Eigen,
    Som,
    Tb,
    Both,
}

impl SolverSelection {
    pub fn som(self) -> bool {
        matches!(self, SolverSelection::Som | SolverSelection::Both)
    }

    pub fn tb(self) -> bool {
        matches!(self, SolverSelection::Tb | SolverSelection::Both)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// One-based barrier; barrier `k` separates dots `k` and `k + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<usize>,
    /// Barrier height while the pulse is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Quantity>,
    /// Delay after the previous pulse when `start` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_high: Option<f64>,
    /// Gate voltage swing, carried through to the report only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_mv: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub kind: GateKind,
    #[serde(default)]
    pub k: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TbConfig {
    /// Idle hopping per link; calibrated from the potential when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hoppings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Quantity>,
    /// Extra time after the last pulse when `horizon` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_dwell: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_high: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<NoiseSolver>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSolver {
    Som,
    Tb,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ApproxModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Quantity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxModeConfig {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    /// Record `|ψ|²` snapshots for the SOM heatmap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    Json,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "<document>".to_string()
            } else {
                path
            };
            Error::config(field, e.into_inner().to_string())
        })
    }

    /// Reads a scenario file; relative paths inside it resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Dimensionless, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub units: UnitSystem,
    pub solver: SolverSelection,
    pub potential: Option<EmbeddedPotential>,
    pub n_basis: Option<usize>,
    pub bound_threshold: Option<f64>,
    pub n_report: usize,
    pub n_points: Option<usize>,
    pub dots: Option<Vec<(f64, f64)>>,
    pub initial_dot: usize,
    pub targets: Option<Vec<usize>>,
    pub pulses: Vec<PulseSpec>,
    pub tb_hoppings: Option<Vec<f64>>,
    pub time: TimeSpec,
    pub noise: Option<NoiseSpec>,
    pub approximations: Vec<ApproxSpec>,
    pub seed: u64,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseWidth {
    Fixed(f64),
    Gate { kind: GateKind, k: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    /// Zero-based barrier.
    pub barrier: usize,
    pub height: Option<f64>,
    pub start: Option<f64>,
    pub gap: f64,
    pub width: PulseWidth,
    pub t_low: Option<f64>,
    pub t_high: Option<f64>,
    pub amplitude_mv: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub horizon: Option<f64>,
    pub tail: f64,
    pub dt: Option<f64>,
    pub record_every: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Zero-based barrier.
    pub barrier: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub mean_dwell: f64,
    pub n_runs: usize,
    pub start_high: bool,
    pub solver: NoiseSolver,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxSpec {
    pub mode: ApproxModeConfig,
    pub budget: usize,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub csv: bool,
    pub svg: bool,
    pub json: bool,
    pub width: u32,
    pub height: u32,
    pub heatmap: bool,
}

pub const DEFAULT_RECORD_EVERY: f64 = 0.05;

fn required<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::config(field, "required field is missing"))
}

fn quantity(q: &Quantity, units: &UnitSystem, kind: UnitKind, field: &str) -> Result<f64> {
    let v = q
        .resolve(units, kind)
        .map_err(|e| Error::config(field, e.to_string()))?;
    if !v.is_finite() {
        return Err(Error::config(field, "value must be finite"));
    }
    Ok(v)
}

fn positive(v: f64, field: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    /// Validates the configuration and converts it to reduced units.
    pub fn resolve(&self) -> Result<Scenario> {
        let version = *required(&self.schema_version, "schema_version")?;
        if version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
            ));
        }
        let solver = *required(&self.solver, "solver")?;
        let units = self.resolve_units()?;

        let noise_solver = self.noise.as_ref().map(|n| {
            n.solver.unwrap_or(if solver.som() {
                NoiseSolver::Som
            } else {
                NoiseSolver::Tb
            })
        });
        let needs_som = solver.som() || noise_solver == Some(NoiseSolver::Som);
        let needs_tb = solver.tb() || noise_solver == Some(NoiseSolver::Tb);
        let tb_given = self.tb.as_ref().and_then(|t| t.hoppings.as_ref()).is_some();
        let needs_potential =
            solver == SolverSelection::Eigen || needs_som || (needs_tb && !tb_given);

        let (potential, n_basis, bound_threshold, n_report) =
            if needs_potential || self.potential.is_some() {
                let p = self.resolve_potential(&units)?;
                let eigen = required(&self.eigen, "eigen")?;
                let n_basis = *required(&eigen.n_basis, "eigen.n_basis")?;
                if n_basis == 0 {
                    return Err(Error::config("eigen.n_basis", "must be at least 1"));
                }
                let threshold = eigen
                    .bound_threshold
                    .as_ref()
                    .map(|q| quantity(q, &units, UnitKind::Energy, "eigen.bound_threshold"))
                    .transpose()?;
                (
                    Some(p),
                    Some(n_basis),
                    threshold,
                    eigen.n_report.unwrap_or(6),
                )
            } else {
                (None, None, None, 6)
            };

        let n_points = if needs_som {
            let grid = required(&self.grid, "grid")?;
            let n = *required(&grid.n_points, "grid.n_points")?;
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::config(
                    "grid.n_points",
                    format!("{n} is not a power of two >= 8"),
                ));
            }
            Some(n)
        } else {
            None
        };

        let dots = self
            .dots
            .as_ref()
            .map(|d| {
                d.iter()
                    .enumerate()
                    .map(|(i, [a, b])| {
                        let field = format!("dots[{i}]");
                        let a = quantity(a, &units, UnitKind::Length, &field)?;
                        let b = quantity(b, &units, UnitKind::Length, &field)?;
                        if !(b > a) {
                            return Err(Error::config(field, "interval end must exceed its start"));
                        }
                        Ok((a, b))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;

        let initial_dot = self.initial_dot.unwrap_or(1);
        if initial_dot == 0 {
            return Err(Error::config("initial_dot", "dots are numbered from 1"));
        }
        let targets = self
            .targets
            .as_ref()
            .map(|t| {
                if t.is_empty() || t.contains(&0) {
                    Err(Error::config("targets", "give one-based dot numbers"))
                } else {
                    Ok(t.iter().map(|d| d - 1).collect::<Vec<_>>())
                }
            })
            .transpose()?;

        let pulses = self.resolve_pulses(&units, needs_som, needs_tb && potential.is_none())?;
        if !pulses.is_empty() && potential.is_some() && !self.piecewise_constant() {
            return Err(Error::config(
                "pulses",
                "barrier pulses need a constant piecewise potential",
            ));
        }

        let tb_hoppings = self.tb.as_ref().and_then(|t| t.hoppings.clone());
        if let Some(h) = &tb_hoppings {
            if h.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::config(
                    "tb.hoppings",
                    "hoppings must be finite and >= 0",
                ));
            }
        }

        let time = if needs_som || needs_tb {
            self.resolve_time(&units, needs_som, !pulses.is_empty())?
        } else {
            TimeSpec {
                horizon: None,
                tail: 0.0,
                dt: None,
                record_every: DEFAULT_RECORD_EVERY,
            }
        };

        let noise = self
            .noise
            .as_ref()
            .map(|n| self.resolve_noise(n, &units, noise_solver.expect("noise present")))
            .transpose()?;
        if noise.is_some() && !pulses.is_empty() && noise_solver == Some(NoiseSolver::Som) {
            let b = noise.as_ref().map(|n| n.barrier);
            if pulses.iter().any(|p| Some(p.barrier) == b) {
                return Err(Error::config(
                    "noise.barrier",
                    "the noisy barrier cannot also be pulsed",
                ));
            }
        }

        let approximations = self.resolve_approximations(&units)?;
        if !approximations.is_empty()
            && !matches!(
                &self.potential,
                Some(PotentialConfig { table: Some(_), .. })
            )
        {
            return Err(Error::config(
                "approximations",
                "approximations need a table potential",
            ));
        }

        let name = self.name.clone().unwrap_or_else(|| "scenario".into());
        let output = self.resolve_output(&name)?;

        Ok(Scenario {
            name,
            units,
            solver,
            potential,
            n_basis,
            bound_threshold,
            n_report,
            n_points,
            dots,
            initial_dot: initial_dot - 1,
            targets,
            pulses,
            tb_hoppings,
            time,
            noise,
            approximations,
            seed: self.seed.unwrap_or(0),
            output,
        })
    }

    fn piecewise_constant(&self) -> bool {
        matches!(
            &self.potential,
            Some(PotentialConfig {
                piecewise: Some(PiecewiseConfig {
                    shape: None | Some(ShapeConfig::Constant),
                    ..
                }),
                ..
            })
        )
    }

    fn resolve_units(&self) -> Result<UnitSystem> {
        let Some(u) = &self.units else {
            return Ok(UnitSystem::silicon());
        };
        let silicon = UnitSystem::silicon();
        let x0 = match &u.x0 {
            None => silicon.x0,
            Some(q) => match q.unit {
                Some(unit) if unit.kind() == UnitKind::Length && unit != PhysicalUnit::X0 => {
                    silicon.to_dimensionless(q.value, unit) * silicon.x0
                }
                _ => return Err(Error::config("units.x0", "give x0 in nm or m")),
            },
        };
        let m_ratio = u
            .m_eff
            .unwrap_or(silicon.m_eff / crate::units::ELECTRON_MASS);
        UnitSystem::new(
            x0,
            m_ratio * crate::units::ELECTRON_MASS,
            crate::units::ELEMENTARY_CHARGE,
        )
        .map_err(|e| Error::config("units", e.to_string()))
    }

    fn resolve_potential(&self, units: &UnitSystem) -> Result<EmbeddedPotential> {
        let src = required(&self.potential, "potential")?;
        let emb = required(&self.embedding, "embedding")?;
        let length = positive(
            quantity(
                required(&emb.length, "embedding.length")?,
                units,
                UnitKind::Length,
                "embedding.length",
            )?,
            "embedding.length",
        )?;
        let margin = emb
            .margin
            .as_ref()
            .map(|q| quantity(q, units, UnitKind::Length, "embedding.margin"))
            .transpose()?
            .unwrap_or(0.0);
        if margin < 0.0 {
            return Err(Error::config("embedding.margin", "must be non-negative"));
        }
        let wall = emb
            .wall_height
            .as_ref()
            .map(|q| quantity(q, units, UnitKind::Energy, "embedding.wall_height"))
            .transpose()?;

        match (&src.table, &src.piecewise) {
            (Some(table), None) => {
                if wall.is_some() {
                    return Err(Error::config(
                        "embedding.wall_height",
                        "only piecewise sources take a wall height",
                    ));
                }
                let path = self.path(required(&table.path, "potential.table.path")?);
                let file = File::open(&path).map_err(|e| {
                    Error::config("potential.table.path", format!("{}: {e}", path.display()))
                })?;
                let inner = load_potential_table(BufReader::new(file), units).map_err(|e| {
                    Error::config("potential.table.path", format!("{}: {e}", path.display()))
                })?;
                embed_in_infinite_well(inner, margin, length)
                    .map_err(|e| Error::config("embedding", e.to_string()))
            }
            (None, Some(pw)) => {
                let mut bp = required(&pw.breakpoints, "potential.piecewise.breakpoints")?
                    .iter()
                    .enumerate()
                    .map(|(i, q)| {
                        quantity(
                            q,
                            units,
                            UnitKind::Length,
                            &format!("potential.piecewise.breakpoints[{i}]"),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut vals = required(&pw.values, "potential.piecewise.values")?
                    .iter()
                    .enumerate()
                    .map(|(i, q)| {
                        quantity(
                            q,
                            units,
                            UnitKind::Energy,
                            &format!("potential.piecewise.values[{i}]"),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let shape = match pw.shape.unwrap_or(ShapeConfig::Constant) {
                    ShapeConfig::Constant => Shape::Constant,
                    ShapeConfig::Linear => Shape::Linear,
                };
                let smoothing = pw
                    .smoothing
                    .as_ref()
                    .map(|q| quantity(q, units, UnitKind::Length, "potential.piecewise.smoothing"))
                    .transpose()?
                    .unwrap_or(0.0);
                let mut embed_margin = margin;
                if let Some(w) = wall {
                    if shape != Shape::Constant {
                        return Err(Error::config(
                            "embedding.wall_height",
                            "walls need a constant piecewise shape",
                        ));
                    }
                    if !(margin > 0.0) {
                        return Err(Error::config(
                            "embedding.margin",
                            "a wall height needs a positive margin",
                        ));
                    }
                    if bp.is_empty() {
                        return Err(Error::config(
                            "potential.piecewise.breakpoints",
                            "no breakpoints",
                        ));
                    }
                    let (first, last) = (bp[0], bp[bp.len() - 1]);
                    bp.insert(0, first - margin);
                    bp.push(last + margin);
                    vals.insert(0, w);
                    vals.push(w);
                    embed_margin = 0.0;
                }
                let inner = PiecewisePotential::build(bp, vals, shape, smoothing)
                    .map_err(|e| Error::config("potential.piecewise", e.to_string()))?;
                embed_in_infinite_well(inner, embed_margin, length)
                    .map_err(|e| Error::config("embedding", e.to_string()))
            }
            _ => Err(Error::config(
                "potential",
                "give exactly one of `table` or `piecewise`",
            )),
        }
    }

    fn resolve_pulses(
        &self,
        units: &UnitSystem,
        needs_height: bool,
        needs_t_high: bool,
    ) -> Result<Vec<PulseSpec>> {
        let Some(pulses) = &self.pulses else {
            return Ok(Vec::new());
        };
        pulses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let f = |name: &str| format!("pulses[{i}].{name}");
                let barrier = *required(&p.barrier, &f("barrier"))?;
                if barrier == 0 {
                    return Err(Error::config(f("barrier"), "barriers are numbered from 1"));
                }
                let height = p
                    .height
                    .as_ref()
                    .map(|q| quantity(q, units, UnitKind::Energy, &f("height")))
                    .transpose()?;
                if needs_height && height.is_none() {
                    return Err(Error::config(f("height"), "required field is missing"));
                }
                let time = |q: &Option<Quantity>, name: &str| {
                    q.as_ref()
                        .map(|q| quantity(q, units, UnitKind::Time, &f(name)))
                        .transpose()
                };
                let start = time(&p.start, "start")?;
                let gap = time(&p.gap, "gap")?.unwrap_or(0.0);
                if gap < 0.0 {
                    return Err(Error::config(f("gap"), "must be non-negative"));
                }
                let width = match (time(&p.width, "width")?, p.gate) {
                    (Some(w), None) => PulseWidth::Fixed(positive(w, &f("width"))?),
                    (None, Some(g)) => {
                        if g.k < 0 {
                            return Err(Error::config(f("gate"), "k must be >= 0"));
                        }
                        PulseWidth::Gate {
                            kind: g.kind,
                            k: g.k,
                        }
                    }
                    _ => {
                        return Err(Error::config(
                            f("width"),
                            "give exactly one of `width` or `gate`",
                        ))
                    }
                };
                if needs_t_high && p.t_high.is_none() {
                    return Err(Error::config(
                        f("t_high"),
                        "required without a potential to calibrate from",
                    ));
                }
                for (v, name) in [(p.t_low, "t_low"), (p.t_high, "t_high")] {
                    if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                        return Err(Error::config(f(name), "hopping must be finite and >= 0"));
                    }
                }
                Ok(PulseSpec {
                    barrier: barrier - 1,
                    height,
                    start,
                    gap,
                    width,
                    t_low: p.t_low,
                    t_high: p.t_high,
                    amplitude_mv: p.amplitude_mv,
                })
            })
            .collect()
    }

    fn resolve_time(
        &self,
        units: &UnitSystem,
        needs_dt: bool,
        has_pulses: bool,
    ) -> Result<TimeSpec> {
        let t = required(&self.time, "time")?;
        let get = |q: &Option<Quantity>, name: &str| {
            q.as_ref()
                .map(|q| quantity(q, units, UnitKind::Time, &format!("time.{name}")))
                .transpose()
        };
        let horizon = get(&t.horizon, "horizon")?
            .map(|h| positive(h, "time.horizon"))
            .transpose()?;
        if horizon.is_none() && !has_pulses {
            return Err(Error::config(
                "time.horizon",
                "required when no pulses are given",
            ));
        }
        let tail = get(&t.tail, "tail")?.unwrap_or(0.0);
        if tail < 0.0 {
            return Err(Error::config("time.tail", "must be non-negative"));
        }
        let dt = get(&t.dt, "dt")?
            .map(|d| positive(d, "time.dt"))
            .transpose()?;
        if needs_dt && dt.is_none() {
            return Err(Error::config("time.dt", "required field is missing"));
        }
        let record_every = positive(
            get(&t.record_every, "record_every")?.unwrap_or(DEFAULT_RECORD_EVERY),
            "time.record_every",
        )?;
        if let Some(dt) = dt {
            if record_every < dt {
                return Err(Error::config(
                    "time.record_every",
                    "must not be shorter than time.dt",
                ));
            }
        }
        Ok(TimeSpec {
            horizon,
            tail,
            dt,
            record_every,
        })
    }

    fn resolve_noise(
        &self,
        n: &NoiseConfig,
        units: &UnitSystem,
        solver: NoiseSolver,
    ) -> Result<NoiseSpec> {
        let barrier = *required(&n.barrier, "noise.barrier")?;
        if barrier == 0 {
            return Err(Error::config(
                "noise.barrier",
                "barriers are numbered from 1",
            ));
        }
        let energy = |q: &Option<Quantity>, name: &str| {
            let field = format!("noise.{name}");
            quantity(required(q, &field)?, units, UnitKind::Energy, &field)
        };
        let v_min = energy(&n.v_min, "v_min")?;
        let v_max = energy(&n.v_max, "v_max")?;
        if v_max < v_min {
            return Err(Error::config(
                "noise.v_max",
                "must not be below noise.v_min",
            ));
        }
        let mean_dwell = positive(
            quantity(
                required(&n.mean_dwell, "noise.mean_dwell")?,
                units,
                UnitKind::Time,
                "noise.mean_dwell",
            )?,
            "noise.mean_dwell",
        )?;
        let n_runs = *required(&n.n_runs, "noise.n_runs")?;
        if n_runs < 2 {
            return Err(Error::config(
                "noise.n_runs",
                "an ensemble needs at least two runs",
            ));
        }
        Ok(NoiseSpec {
            barrier: barrier - 1,
            v_min,
            v_max,
            mean_dwell,
            n_runs,
            start_high: n.start_high.unwrap_or(false),
            solver,
        })
    }

    fn resolve_approximations(&self, units: &UnitSystem) -> Result<Vec<ApproxSpec>> {
        let Some(list) = &self.approximations else {
            return Ok(Vec::new());
        };
        list.iter()
            .enumerate()
            .map(|(i, a)| {
                let f = |name: &str| format!("approximations[{i}].{name}");
                let mode = *required(&a.mode, &f("mode"))?;
                let budget = *required(&a.budget, &f("budget"))?;
                let tolerance = a
                    .tolerance
                    .as_ref()
                    .map(|q| quantity(q, units, UnitKind::Energy, &f("tolerance")))
                    .transpose()?;
                if mode == ApproxModeConfig::Fine {
                    positive(*required(&tolerance, &f("tolerance"))?, &f("tolerance"))?;
                }
                Ok(ApproxSpec {
                    mode,
                    budget,
                    tolerance,
                })
            })
            .collect()
    }

    fn resolve_output(&self, name: &str) -> Result<OutputSpec> {
        let o = self.output.clone().unwrap_or_default();
        let formats = o.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json]);
        let width = o.width.unwrap_or(800);
        let height = o.height.unwrap_or(480);
        if width < 100 || height < 100 {
            return Err(Error::config(
                "output.width",
                "plots need at least 100x100 pixels",
            ));
        }
        Ok(OutputSpec {
            dir: o.dir.unwrap_or_else(|| PathBuf::from("out").join(name)),
            csv: formats.contains(&Format::Csv),
            svg: formats.contains(&Format::Svg),
            json: formats.contains(&Format::Json),
            width,
            height,
            heatmap: o.heatmap.unwrap_or(true),
        })
    }
}
