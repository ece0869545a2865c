//! File formats.
//!
//! * Fourier fields as CSV: one row per stored mode, columns
//!   `k1,…,kd,re,im`.
//! * Grid fields in a flat little-endian binary layout:
//!
//!   ```text
//!   offset  size  content
//!   0       8     magic "MLGRID01"
//!   8       4     u32 dimension d
//!   12      4     u32 bandwidth K
//!   16      1     u8 reality flag (1 = real samples only)
//!   17      4     u32 grid size G per axis
//!   21      …     G^d samples, row-major; f64 each if real, (re, im)
//!                 pairs otherwise
//!   ```
//!
//! * Diffusion ensembles as CSV: `#`-prefixed header lines with the grid
//!   (`dim`, `steps`, `horizon`, `seed`) followed by one row per path and
//!   time, columns `path,step,t,y1..yd,db1..dbd` (increments empty at the
//!   final time).
//! * Weighted processes as CSV, columns `path,step,t,dM,V,Z,QV` (`dM`, `V`
//!   empty at the final time).
//! * Projection estimates as CSV, columns `x1..xd,estimate,count,se` with
//!   bin centres and empty cells for missing values.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::diffusion::{DiffusionPath, EnsembleSpec, InitialLaw, PathEnsemble};
use crate::error::{Error, Result};
use crate::martingale::WeightedProcess;
use crate::projection::ProjectionEstimate;
use crate::spectral::{FourierField, SpectralPlan};

const GRID_MAGIC: &[u8; 8] = b"MLGRID01";

pub fn write_field_csv<W: Write>(f: &FourierField, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=f.dim()).map(|a| format!("k{a}")).collect();
    header.push("re".into());
    header.push("im".into());
    out.write_record(&header)?;
    for (k, c) in f.modes() {
        let mut row: Vec<String> = k.iter().map(|v| v.to_string()).collect();
        row.push(format!("{:e}", c.re));
        row.push(format!("{:e}", c.im));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; `K` is the largest `|k_a|`.
pub fn read_field_csv<R: Read>(r: R) -> Result<FourierField> {
    let mut rd = csv::Reader::from_reader(r);
    let dim = rd.headers()?.len().checked_sub(2).filter(|d| *d > 0).ok_or_else(|| Error::Parse("field CSV needs k columns".into()))?;
    let mut modes = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> { rec[i].trim().parse::<f64>().map_err(|e| Error::Parse(format!("{e}: {:?}", &rec[i]))) };
        let k = (0..dim)
            .map(|a| rec[a].trim().parse::<i64>().map_err(|e| Error::Parse(format!("{e}: {:?}", &rec[a]))))
            .collect::<Result<Vec<_>>>()?;
        modes.push((k, Complex64::new(num(dim)?, num(dim + 1)?)));
    }
    let band = modes.iter().flat_map(|(k, _)| k.iter().map(|v| v.unsigned_abs() as usize)).max().unwrap_or(0);
    FourierField::from_modes(dim, band, &modes)
}

pub fn write_grid_binary<W: Write>(f: &FourierField, size: usize, mut w: W) -> Result<()> {
    let values = f.to_complex_grid(size, &SpectralPlan::new(size))?;
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(f.dim() as u32).to_le_bytes())?;
    w.write_all(&(f.bandwidth() as u32).to_le_bytes())?;
    w.write_all(&[f.is_real() as u8])?;
    w.write_all(&(size as u32).to_le_bytes())?;
    for z in values {
        w.write_all(&z.re.to_le_bytes())?;
        if !f.is_real() {
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a grid written by [`write_grid_binary`] back into coefficients.
pub fn read_grid_binary<R: Read>(mut r: R) -> Result<FourierField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(Error::Parse("not a grid file".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<usize> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf) as usize)
    };
    let dim = read_u32(&mut r)?;
    let band = read_u32(&mut r)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let size = read_u32(&mut r)?;
    if dim == 0 || dim > 6 || size < 2 * band + 1 {
        return Err(Error::Parse(format!("bad grid header d={dim} K={band} G={size}")));
    }
    let real = flag[0] == 1;
    let n = size.pow(dim as u32);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut b8 = [0u8; 8];
    for z in buf.iter_mut() {
        r.read_exact(&mut b8)?;
        z.re = f64::from_le_bytes(b8);
        if !real {
            r.read_exact(&mut b8)?;
            z.im = f64::from_le_bytes(b8);
        }
    }
    let plan = SpectralPlan::new(size);
    plan.transform(&mut buf, dim, crate::spectral::Direction::Forward);
    let norm = 1.0 / n as f64;
    let mut modes = Vec::new();
    let side = 2 * band + 1;
    for i in 0..side.pow(dim as u32) {
        let mut k = vec![0i64; dim];
        let mut rem = i;
        for a in (0..dim).rev() {
            k[a] = (rem % side) as i64 - band as i64;
            rem /= side;
        }
        let idx = k.iter().fold(0usize, |acc, ka| acc * size + ka.rem_euclid(size as i64) as usize);
        modes.push((k, buf[idx] * norm));
    }
    FourierField::from_modes(dim, band, &modes)
}

pub fn write_ensemble_csv<W: Write>(e: &PathEnsemble, mut w: W) -> Result<()> {
    let s = &e.spec;
    writeln!(w, "# dim={}", s.dim)?;
    writeln!(w, "# steps={}", s.steps)?;
    writeln!(w, "# horizon={:e}", s.horizon)?;
    writeln!(w, "# seed={}", s.seed)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["path".to_string(), "step".into(), "t".into()];
    header.extend((1..=s.dim).map(|a| format!("y{a}")));
    header.extend((1..=s.dim).map(|a| format!("db{a}")));
    out.write_record(&header)?;
    for (i, p) in e.paths.iter().enumerate() {
        for n in 0..=s.steps {
            let mut row = vec![i.to_string(), n.to_string(), format!("{:e}", s.time(n))];
            row.extend(p.position(n, s.dim).iter().map(|v| format!("{v:e}")));
            if n < s.steps {
                row.extend(p.increment(n, s.dim).iter().map(|v| format!("{v:e}")));
            } else {
                row.extend(std::iter::repeat_n(String::new(), s.dim));
            }
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn header_value<T: std::str::FromStr>(lines: &[String], key: &str) -> Result<T> {
    lines
        .iter()
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix(&format!("{key}=")).map(str::to_owned))
        .ok_or_else(|| Error::Parse(format!("missing header {key}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad header {key}")))
}

/// Reads an ensemble written by [`write_ensemble_csv`]. The initial law is
/// recorded as the stored starting points are; unwrapped displacements are
/// rebuilt from the increments.
pub fn read_ensemble_csv<R: BufRead>(r: R) -> Result<PathEnsemble> {
    let mut header = Vec::new();
    let mut body = String::new();
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') {
            header.push(line);
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let dim: usize = header_value(&header, "dim")?;
    let steps: usize = header_value(&header, "steps")?;
    let horizon: f64 = header_value(&header, "horizon")?;
    let seed: u64 = header_value(&header, "seed")?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let mut paths: Vec<DiffusionPath> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> { rec[i].parse::<f64>().map_err(|e| Error::Parse(format!("{e}: {:?}", &rec[i]))) };
        let path: usize = rec[0].parse().map_err(|_| Error::Parse("bad path index".into()))?;
        if path == paths.len() {
            paths.push(DiffusionPath { y: Vec::new(), db: Vec::new(), displacement: vec![0.0; dim], aborted: false });
        }
        let p = paths.last_mut().ok_or_else(|| Error::Parse("paths out of order".into()))?;
        for a in 0..dim {
            p.y.push(parse(3 + a)?);
        }
        if !rec[3 + dim].is_empty() {
            for a in 0..dim {
                let v = parse(3 + dim + a)?;
                p.db.push(v);
                p.displacement[a] += v;
            }
        }
    }
    if paths.iter().any(|p| p.y.len() != (steps + 1) * dim || p.db.len() != steps * dim) {
        return Err(Error::GridMismatch("ensemble rows do not match the header grid".into()));
    }
    let spec = EnsembleSpec { dim, horizon, steps, n_paths: paths.len(), seed, init: InitialLaw::Uniform };
    Ok(PathEnsemble { spec, paths, aborted: 0 })
}

pub fn write_weighted_csv<W: Write>(ensemble: &[WeightedProcess], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path", "step", "t", "dM", "V", "Z", "QV"])?;
    for (i, p) in ensemble.iter().enumerate() {
        for n in 0..p.z.len() {
            let (dm, v) = if n < p.dm.len() { (format!("{:e}", p.dm[n]), format!("{:e}", p.v[n])) } else { (String::new(), String::new()) };
            out.write_record([
                i.to_string(),
                n.to_string(),
                format!("{:e}", n as f64 * p.dt),
                dm,
                v,
                format!("{:e}", p.z[n]),
                format!("{:e}", p.qv[n]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_projection_csv<W: Write>(est: &ProjectionEstimate, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=est.dim).map(|a| format!("x{a}")).collect();
    header.extend(["estimate".to_string(), "count".into(), "se".into()]);
    out.write_record(&header)?;
    for c in 0..est.counts.len() {
        let mut row: Vec<String> = est.cell_center(c).iter().map(|v| format!("{v}")).collect();
        row.push(est.estimates[c].map(|v| format!("{v:e}")).unwrap_or_default());
        row.push(est.counts[c].to_string());
        row.push(est.se[c].map(|v| format!("{v:e}")).unwrap_or_default());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::brownian_paths;
    use crate::spectral::TrigTerm;

    fn field() -> FourierField {
        FourierField::real_trig(
            2,
            3,
            &[
                TrigTerm::Cos { mode: vec![1, -2], amplitude: 0.8 },
                TrigTerm::Sin { mode: vec![3, 0], amplitude: -0.4 },
                TrigTerm::Constant(0.1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn field_csv_round_trip() {
        let f = field();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let g = read_field_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn grid_binary_round_trip() {
        let f = field();
        let mut buf = Vec::new();
        write_grid_binary(&f, 8, &mut buf).unwrap();
        assert_eq!(buf.len(), 21 + 64 * 8);
        let g = read_grid_binary(buf.as_slice()).unwrap();
        let err = f.coeffs().iter().zip(g.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        assert!(read_grid_binary(&b"NOTAGRID"[..]).is_err());
    }

    #[test]
    fn ensemble_csv_round_trip() {
        let spec = EnsembleSpec { dim: 2, horizon: 0.5, steps: 4, n_paths: 3, seed: 9, init: InitialLaw::Uniform };
        let e = brownian_paths(&spec).unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&e, &mut buf).unwrap();
        let back = read_ensemble_csv(buf.as_slice()).unwrap();
        assert_eq!(back.paths.len(), 3);
        for (a, b) in e.paths.iter().zip(&back.paths) {
            assert_eq!(a.y, b.y);
            assert_eq!(a.db, b.db);
        }
        assert_eq!(back.spec.horizon, 0.5);
    }
}
