use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::run::{FileRecord, ScenarioOutput};
use crate::eigen::{write_spectrum_csv, write_wavefunction_csv};
use crate::error::{Error, Result};
use crate::noise::write_ensemble_csv;
use crate::plot;
use crate::potential::Potential;
use crate::splitop::{write_dot_probs_csv, write_heatmap_csv};
use crate::tightbinding::{write_amplitudes_csv, write_probabilities_csv};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    // Temp files are created private; results should read like normal files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<FileRecord>,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        self.written.push(path);
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(self.dir.join(name), e))?;
        self.put(name, &buf)
    }
}

fn probs_header(prefix: &str, n: usize) -> String {
    (1..=n).map(|k| format!(",{prefix}_p{k}")).collect()
}

/// Writes every trace in the enabled formats, then `report.json`, which
/// lists the SHA-256 of each file. Returns the paths written.
pub fn emit_outputs(out: &mut ScenarioOutput) -> Result<Vec<PathBuf>> {
    let spec = out.scenario.output.clone();
    fs::create_dir_all(&spec.dir).map_err(|e| Error::io(&spec.dir, e))?;
    let mut w = Writer {
        dir: &spec.dir,
        files: Vec::new(),
        written: Vec::new(),
    };
    let (width, height) = (spec.width, spec.height);

    if spec.csv {
        if let Some(p) = &out.potential {
            let n = 2000;
            let l = p.length();
            w.csv("potential.csv", |b| {
                writeln!(b, "x,V")?;
                for i in 0..=n {
                    let x = l * i as f64 / n as f64;
                    writeln!(b, "{x},{}", p.value(x))?;
                }
                Ok(())
            })?;
        }
        if let Some(sol) = &out.spectrum {
            w.csv("spectrum.csv", |b| write_spectrum_csv(b, sol))?;
        }
        for a in &out.approximations {
            w.csv(&format!("spectrum_{}.csv", a.label), |b| {
                write_spectrum_csv(b, &a.solution)
            })?;
        }
        if let Some(psi) = &out.initial_state {
            w.csv("initial_state.csv", |b| write_wavefunction_csv(b, psi))?;
        }
        if let Some(s) = &out.som {
            w.csv("som_dots.csv", |b| write_dot_probs_csv(b, s))?;
            if s.snapshots.is_some() {
                let mut buf = Vec::new();
                write_heatmap_csv(&mut buf, s)?;
                w.put("som_heatmap.csv", &buf)?;
            }
        }
        if let Some(t) = &out.tb {
            w.csv("tb_amplitudes.csv", |b| write_amplitudes_csv(b, t))?;
            w.csv("tb_probs.csv", |b| write_probabilities_csv(b, t))?;
        }
        if let Some(c) = &out.comparison {
            let n = c.som.first().map_or(0, Vec::len);
            w.csv("compare.csv", |b| {
                writeln!(b, "t{}{}", probs_header("som", n), probs_header("tb", n))?;
                for ((t, s), q) in c.times.iter().zip(&c.som).zip(&c.tb) {
                    write!(b, "{t}")?;
                    for v in s.iter().chain(q) {
                        write!(b, ",{v}")?;
                    }
                    writeln!(b)?;
                }
                Ok(())
            })?;
        }
        if let Some(e) = &out.ensemble {
            w.csv("ensemble.csv", |b| write_ensemble_csv(b, e))?;
        }
        for h in &out.report.histograms {
            w.csv(&format!("histogram_{}.csv", h.solver), |b| {
                writeln!(b, "dot,probability")?;
                for (d, p) in h.dots.iter().zip(&h.probabilities) {
                    writeln!(b, "{d},{p}")?;
                }
                writeln!(b, "residual,{}", h.residual)
            })?;
        }
    }

    if spec.svg {
        let series = |probs: &[Vec<f64>]| -> Vec<(String, Vec<f64>)> {
            let n = probs.first().map_or(0, Vec::len);
            (0..n)
                .map(|d| (format!("p{}", d + 1), probs.iter().map(|p| p[d]).collect()))
                .collect()
        };
        if let Some(s) = &out.som {
            let svg = plot::lines_svg(
                &s.times,
                &series(&s.dot_probs),
                "probability",
                width,
                height,
            );
            w.put("som_dots.svg", svg.as_bytes())?;
            if let Some(snaps) = &s.snapshots {
                let xs: Vec<f64> = s.final_state.grid.xs().collect();
                let svg = plot::heatmap_svg(&s.times, &xs, snaps, width, height, 128);
                w.put("som_heatmap.svg", svg.as_bytes())?;
            }
        }
        if let Some(t) = &out.tb {
            let svg = plot::lines_svg(
                &t.times,
                &series(&t.probabilities()),
                "probability",
                width,
                height,
            );
            w.put("tb_probs.svg", svg.as_bytes())?;
        }
        if let Some(c) = &out.comparison {
            let mut s = series(&c.som);
            s.iter_mut().for_each(|(n, _)| n.insert_str(0, "som "));
            let mut t = series(&c.tb);
            t.iter_mut().for_each(|(n, _)| n.insert_str(0, "tb "));
            s.extend(t);
            let svg = plot::lines_svg(&c.times, &s, "probability", width, height);
            w.put("compare.svg", svg.as_bytes())?;
        }
        if let Some(e) = &out.ensemble {
            let svg = plot::band_svg(
                &e.times,
                &transpose(&e.mean_probs),
                &transpose(&e.ci_half_width),
                width,
                height,
            );
            w.put("ensemble.svg", svg.as_bytes())?;
        }
        for h in &out.report.histograms {
            let mut labels: Vec<String> = h.dots.iter().map(|d| format!("dot {d}")).collect();
            labels.push("residual".into());
            let mut vals = h.probabilities.clone();
            vals.push(h.residual.max(0.0));
            let svg = plot::histogram_svg(&labels, &vals, width, height);
            w.put(&format!("histogram_{}.svg", h.solver), svg.as_bytes())?;
        }
    }

    out.report.files = std::mem::take(&mut w.files);
    if spec.json {
        let text = serde_json::to_string_pretty(&out.report).expect("report serializes");
        let path = spec.dir.join("report.json");
        write_atomic(&path, text.as_bytes())?;
        w.written.push(path);
    }
    Ok(w.written)
}

fn transpose(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    (0..n)
        .map(|d| rows.iter().map(|r| r[d]).collect())
        .collect()
}
