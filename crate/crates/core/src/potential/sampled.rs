use std::io::{BufRead, Write};

use super::spline::CubicSpline;
use crate::error::{Error, Result};
use crate::units::{PhysicalUnit, UnitKind, UnitSystem};

/// Potential energy given as table samples, interpolated by a natural cubic spline.
/// Coordinates are in `x0`, energies in `E0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    spline: CubicSpline,
}

impl SampledPotential {
    pub fn new(xs: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if xs.len() < 4 || xs.len() != vs.len() {
            return Err(Error::invalid(
                "sampled potential needs at least 4 (x, V) pairs of equal length",
            ));
        }
        if vs.iter().chain(&xs).any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "sampled potential contains non-finite values",
            ));
        }
        Ok(Self {
            spline: CubicSpline::new(xs, vs)?,
        })
    }

    /// Samples `f` at `n` evenly spaced points of `[start, end]`.
    pub fn from_fn(start: f64, end: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 4 || !(end > start) {
            return Err(Error::invalid("need n >= 4 and end > start"));
        }
        let xs: Vec<f64> = (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect();
        let vs = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, vs)
    }

    pub fn xs(&self) -> &[f64] {
        self.spline.knots()
    }

    pub fn vs(&self) -> &[f64] {
        self.spline.values()
    }

    pub fn start(&self) -> f64 {
        self.xs()[0]
    }

    pub fn end(&self) -> f64 {
        *self.xs().last().expect("at least 4 knots")
    }

    /// Spline value; the end samples are held constant outside the table.
    pub fn value(&self, x: f64) -> f64 {
        self.spline.eval(x)
    }
}

/// Reads a potential table: `#` comments, a `x_unit,v_unit` header, then `x,V` rows.
///
/// Coordinates are converted to `x0`, energies to `E0`, and the energies are
/// shifted so the smallest sample is zero.
pub fn load_potential_table(source: impl BufRead, units: &UnitSystem) -> Result<SampledPotential> {
    let mut header: Option<(PhysicalUnit, PhysicalUnit)> = None;
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if fields.len() != 2 {
            return Err(parse_err(format!(
                "expected 2 columns, found {}",
                fields.len()
            )));
        }
        match header {
            None => {
                let xu: PhysicalUnit = fields[0]
                    .parse()
                    .map_err(|_| parse_err(format!("missing unit header, got `{line}`")))?;
                let vu: PhysicalUnit = fields[1]
                    .parse()
                    .map_err(|_| parse_err(format!("missing unit header, got `{line}`")))?;
                if !matches!(xu, PhysicalUnit::Nm | PhysicalUnit::X0) {
                    return Err(parse_err(format!("x unit must be nm or x0, got {xu}")));
                }
                if !matches!(
                    vu,
                    PhysicalUnit::MeV | PhysicalUnit::MicroEv | PhysicalUnit::E0
                ) {
                    return Err(parse_err(format!(
                        "V unit must be meV, ueV or E0, got {vu}"
                    )));
                }
                header = Some((xu, vu));
            }
            Some((xu, vu)) => {
                let num = |s: &str| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(format!("bad number `{s}`")))
                };
                let x = units.to_dimensionless(num(fields[0])?, xu);
                let v = units.to_dimensionless(num(fields[1])?, vu);
                if let Some(&prev) = xs.last() {
                    if !(x > prev) {
                        return Err(parse_err("x column is not strictly increasing".into()));
                    }
                }
                xs.push(x);
                vs.push(v);
            }
        }
    }
    if header.is_none() {
        return Err(Error::Parse {
            line: 0,
            message: "missing unit header".into(),
        });
    }
    let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
    vs.iter_mut().for_each(|v| *v -= min);
    SampledPotential::new(xs, vs)
}

/// Writes a table readable by [`load_potential_table`].
pub fn write_potential_table(
    out: &mut impl Write,
    potential: &SampledPotential,
    x_unit: PhysicalUnit,
    v_unit: PhysicalUnit,
    units: &UnitSystem,
) -> std::io::Result<()> {
    debug_assert_eq!(x_unit.kind(), UnitKind::Length);
    writeln!(out, "{},{}", x_unit, v_unit)?;
    for (x, v) in potential.xs().iter().zip(potential.vs()) {
        writeln!(
            out,
            "{},{}",
            units.from_dimensionless(*x, x_unit),
            units.from_dimensionless(*v, v_unit)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_minimum_to_zero() {
        let text = "# test\nnm,meV\n0,1.0\n20,0.35\n40,0.9\n60,1.2\n";
        let u = UnitSystem::silicon();
        let p = load_potential_table(text.as_bytes(), &u).unwrap();
        let min = p.vs().iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.0);
        assert_eq!(p.xs()[1], 1.0);
    }

    #[test]
    fn descending_x_rejected() {
        let text = "nm,meV\n0,1\n20,0\n10,1\n30,2\n";
        let err = load_potential_table(text.as_bytes(), &UnitSystem::silicon()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn missing_header_rejected() {
        let text = "0,1\n20,0\n40,1\n60,2\n";
        assert!(matches!(
            load_potential_table(text.as_bytes(), &UnitSystem::silicon()),
            Err(Error::Parse { .. })
        ));
        assert!(
            load_potential_table("# only comments\n".as_bytes(), &UnitSystem::silicon()).is_err()
        );
    }

    #[test]
    fn table_round_trip() {
        let u = UnitSystem::silicon();
        let p = SampledPotential::from_fn(0.0, 10.0, 50, |x| (x - 5.0).powi(2)).unwrap();
        let mut buf = Vec::new();
        write_potential_table(&mut buf, &p, PhysicalUnit::Nm, PhysicalUnit::MeV, &u).unwrap();
        let q = load_potential_table(buf.as_slice(), &u).unwrap();
        let min = p.vs().iter().copied().fold(f64::INFINITY, f64::min);
        for (a, b) in p.vs().iter().zip(q.vs()) {
            assert!((a - min - b).abs() < 1e-9);
        }
    }
}
