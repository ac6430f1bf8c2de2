//! Dimensionless unit system.
//!
//! Lengths are measured in `x0`, energies in `E0 = ħ²/(2 m x0²)` and times in
//! `t0 = 2πħ/E0`. With these choices the Schrödinger equation reads
//! `i (1/2π) ∂ψ/∂τ = [-∂²/∂ξ² + v(ξ, τ)] ψ`, so every propagator in the crate
//! multiplies the Hamiltonian by `1/HBAR_DIMENSIONLESS = 2π`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Free electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.109e-31;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602e-19;

/// Value of ħ in `E0·t0` units. Fixed by the choice `t0 = 2πħ/E0`.
pub const HBAR_DIMENSIONLESS: f64 = 1.0 / (2.0 * PI);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// Length unit, m.
    pub x0: f64,
    /// Energy unit, J.
    pub e0: f64,
    /// Time unit, s.
    pub t0: f64,
    /// Effective mass, kg.
    pub m_eff: f64,
    /// Elementary charge, C.
    pub e_charge: f64,
    pub hbar_dimensionless: f64,
}

impl UnitSystem {
    /// Derives `E0` and `t0` from a length unit and effective mass.
    pub fn new(x0: f64, m_eff: f64, e_charge: f64) -> Result<Self> {
        if !(x0 > 0.0 && m_eff > 0.0 && e_charge > 0.0) {
            return Err(Error::invalid("unit constants must be positive"));
        }
        let e0 = HBAR * HBAR / (2.0 * m_eff * x0 * x0);
        let t0 = 2.0 * PI * HBAR / e0;
        Ok(Self {
            x0,
            e0,
            t0,
            m_eff,
            e_charge,
            hbar_dimensionless: HBAR / (e0 * t0),
        })
    }

    /// Silicon channel parameters: `x0 = 20 nm`, `m* = 1.08 mₑ`.
    pub fn silicon() -> Self {
        Self::new(20e-9, 1.08 * ELECTRON_MASS, ELEMENTARY_CHARGE).expect("constants are positive")
    }

    /// Energy unit in µeV.
    pub fn e0_micro_ev(&self) -> f64 {
        self.e0 / self.e_charge * 1e6
    }

    fn scale(&self, kind: UnitKind) -> f64 {
        match kind {
            UnitKind::Length => self.x0,
            UnitKind::Energy => self.e0,
            UnitKind::Time => self.t0,
        }
    }

    /// Converts between SI and dimensionless values.
    pub fn convert(&self, value: f64, kind: UnitKind, direction: Direction) -> f64 {
        match direction {
            Direction::ToDimensionless => value / self.scale(kind),
            Direction::FromDimensionless => value * self.scale(kind),
        }
    }

    /// Converts a value expressed in a named physical unit to dimensionless form.
    pub fn to_dimensionless(&self, value: f64, unit: PhysicalUnit) -> f64 {
        match unit.si_factor(self) {
            Some(f) => self.convert(value * f, unit.kind(), Direction::ToDimensionless),
            None => value,
        }
    }

    pub fn from_dimensionless(&self, value: f64, unit: PhysicalUnit) -> f64 {
        match unit.si_factor(self) {
            Some(f) => self.convert(value, unit.kind(), Direction::FromDimensionless) / f,
            None => value,
        }
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::silicon()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Length,
    Energy,
    Time,
}

impl FromStr for UnitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "length" => Ok(UnitKind::Length),
            "energy" => Ok(UnitKind::Energy),
            "time" => Ok(UnitKind::Time),
            other => Err(Error::invalid(format!("unknown unit kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToDimensionless,
    FromDimensionless,
}

/// Physical (or reduced) units accepted in tables and scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhysicalUnit {
    Nm,
    Meter,
    X0,
    MeV,
    MicroEv,
    Ev,
    Joule,
    E0,
    Ps,
    Ns,
    Second,
    T0,
}

impl PhysicalUnit {
    pub fn kind(self) -> UnitKind {
        use PhysicalUnit::*;
        match self {
            Nm | Meter | X0 => UnitKind::Length,
            MeV | MicroEv | Ev | Joule | E0 => UnitKind::Energy,
            Ps | Ns | Second | T0 => UnitKind::Time,
        }
    }

    /// Multiplier to SI, or `None` for the reduced units themselves.
    fn si_factor(self, units: &UnitSystem) -> Option<f64> {
        use PhysicalUnit::*;
        match self {
            Nm => Some(1e-9),
            Meter | Joule | Second => Some(1.0),
            MeV => Some(1e-3 * units.e_charge),
            MicroEv => Some(1e-6 * units.e_charge),
            Ev => Some(units.e_charge),
            Ps => Some(1e-12),
            Ns => Some(1e-9),
            X0 | E0 | T0 => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        use PhysicalUnit::*;
        match self {
            Nm => "nm",
            Meter => "m",
            X0 => "x0",
            MeV => "meV",
            MicroEv => "ueV",
            Ev => "eV",
            Joule => "J",
            E0 => "E0",
            Ps => "ps",
            Ns => "ns",
            Second => "s",
            T0 => "t0",
        }
    }
}

impl FromStr for PhysicalUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use PhysicalUnit::*;
        Ok(match s.trim() {
            "nm" => Nm,
            "m" => Meter,
            "x0" => X0,
            "meV" => MeV,
            "ueV" | "µeV" | "μeV" => MicroEv,
            "eV" => Ev,
            "J" => Joule,
            "E0" => E0,
            "ps" => Ps,
            "ns" => Ns,
            "s" => Second,
            "t0" => T0,
            other => return Err(Error::invalid(format!("unknown unit `{other}`"))),
        })
    }
}

impl fmt::Display for PhysicalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A number with an optional unit suffix, e.g. `"0.2 ns"` or `"2 meV"`.
/// A bare number is taken as already dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Option<PhysicalUnit>,
}

impl Quantity {
    pub fn dimensionless(value: f64) -> Self {
        Self { value, unit: None }
    }

    /// Resolves to a dimensionless value, checking the unit has the expected kind.
    pub fn resolve(&self, units: &UnitSystem, expected: UnitKind) -> Result<f64> {
        match self.unit {
            None => Ok(self.value),
            Some(u) if u.kind() == expected => Ok(units.to_dimensionless(self.value, u)),
            Some(u) => Err(Error::invalid(format!(
                "unit `{u}` is not a {expected:?} unit"
            ))),
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_alphabetic() || c == 'µ' || c == 'μ')
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad quantity `{s}`")))?;
        let unit = if unit.trim().is_empty() {
            None
        } else {
            Some(unit.parse()?)
        };
        Ok(Self { value, unit })
    }
}

impl Serialize for Quantity {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.unit {
            None => serializer.serialize_f64(self.value),
            Some(u) => serializer.serialize_str(&format!("{} {}", self.value, u)),
        }
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Quantity::dimensionless(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
