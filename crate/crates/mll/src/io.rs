//! Snapshot binary format and CSV writers.

use std::io::{Read, Write};
use std::path::Path;

use crate::algebra::{StateVector, C64};
use crate::evolve::Diagnostics;
use crate::profile::{ProfileGrid, ThetaProfile};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"MLLSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad snapshot header: {0}")]
    Header(String),
}

/// Header: magic, version, P, Ny (u32), Ly, eps, t (f64); payload: (re, im) pairs, p-major, then eta, then component.
pub fn write_snapshot<W: Write>(mut w: W, v: &ThetaProfile, t: f64) -> Result<(), IoError> {
    let g = v.grid;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(g.p_max as u32).to_le_bytes())?;
    w.write_all(&(g.ny as u32).to_le_bytes())?;
    for x in [g.ly, v.eps, t] {
        w.write_all(&x.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(v.coeffs.len() * 9 * 16);
    for s in &v.coeffs {
        for z in s.0 {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(ThetaProfile, f64), IoError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(IoError::Header("magic".into()));
    }
    let mut u = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32, IoError> {
        r.read_exact(&mut u)?;
        Ok(u32::from_le_bytes(u))
    };
    let version = read_u32(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(IoError::Header(format!("version {version}")));
    }
    let p = read_u32(&mut r)? as usize;
    let ny = read_u32(&mut r)? as usize;
    let mut f = [0u8; 8];
    let mut read_f64 = |r: &mut R| -> Result<f64, IoError> {
        r.read_exact(&mut f)?;
        Ok(f64::from_le_bytes(f))
    };
    let ly = read_f64(&mut r)?;
    let eps = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let grid = ProfileGrid::new(p, ny, ly);
    let mut v = ThetaProfile::zeros(grid, eps);
    let mut buf = vec![0u8; grid.len() * 9 * 16];
    r.read_exact(&mut buf)?;
    let mut it = buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    for s in v.coeffs.iter_mut() {
        *s = StateVector(std::array::from_fn(|_| {
            let re = it.next().unwrap();
            let im = it.next().unwrap();
            C64::new(re, im)
        }));
    }
    Ok((v, t))
}

pub fn save_snapshot(path: &Path, v: &ThetaProfile, t: f64) -> Result<(), IoError> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(f, v, t)
}

pub fn load_snapshot(path: &Path) -> Result<(ThetaProfile, f64), IoError> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_diagnostics_csv<W: Write>(w: W, rows: &[Diagnostics]) -> Result<(), IoError> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["t", "L2_total", "Linf_total", "L2_Pi0", "L2_Pis", "Linf_Pi0", "Linf_Pis"])?;
    for d in rows {
        c.write_record(
            [d.t, d.l2_total, d.linf_total, d.l2_pi0, d.l2_pis, d.linf_pi0, d.linf_pis]
                .iter()
                .map(|x| format!("{x:.17e}")),
        )?;
    }
    c.flush()?;
    Ok(())
}

/// Columns y, then Re/Im of each named field.
pub fn write_fields_csv<W: Write>(
    w: W,
    y: &[f64],
    fields: &[(String, Vec<C64>)],
) -> Result<(), IoError> {
    let mut c = csv::Writer::from_writer(w);
    let mut header = vec!["y".to_string()];
    for (name, _) in fields {
        header.push(format!("re_{name}"));
        header.push(format!("im_{name}"));
    }
    c.write_record(&header)?;
    for (i, yi) in y.iter().enumerate() {
        let mut row = vec![format!("{yi:.17e}")];
        for (_, f) in fields {
            row.push(format!("{:.17e}", f[i].re));
            row.push(format!("{:.17e}", f[i].im));
        }
        c.write_record(&row)?;
    }
    c.flush()?;
    Ok(())
}

/// Physical-space samples of the p = +1 harmonic of selected components, as y-fields.
pub fn harmonic_fields(
    fft: &crate::profile::ProfileFft,
    v: &ThetaProfile,
    p: i32,
    components: &[usize],
) -> Vec<(String, Vec<C64>)> {
    const NAMES: [&str; 9] = ["e1", "e2", "e3", "h1", "h2", "h3", "m1", "m2", "m3"];
    components
        .iter()
        .map(|&cidx| {
            let spec: Vec<C64> = v.harmonic(p).iter().map(|s| s.0[cidx]).collect();
            (format!("{}_p{}", NAMES[cidx], p), fft.y_inverse(&spec))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::c;

    #[test]
    fn snapshot_round_trip() {
        let g = ProfileGrid::new(2, 8, 10.0);
        let mut v = ThetaProfile::zeros(g, 0.1);
        for (i, s) in v.coeffs.iter_mut().enumerate() {
            for k in 0..9 {
                s.0[k] = c(i as f64 + 0.5 * k as f64, -(k as f64) / 3.0);
            }
        }
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &v, 1.25).unwrap();
        assert_eq!(&buf[..8], SNAPSHOT_MAGIC);
        assert_eq!(buf.len(), 8 + 12 + 24 + g.len() * 144);
        let (w, t) = read_snapshot(&buf[..]).unwrap();
        assert_eq!(t, 1.25);
        assert_eq!(w, v);
        buf[0] = b'X';
        assert!(read_snapshot(&buf[..]).is_err());
    }
}
