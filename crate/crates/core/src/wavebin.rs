//! Little-endian binary waveform snapshots for cross-tool inspection.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  "DPWV"
//! 4       4     format version (u32, currently 1)
//! 8       4     unit flag (u32): 0 = normalized, 1 = physical
//! 12      4     reserved (u32, zero)
//! 16      8     n_samples (u64)
//! 24      8     dt (f64; ps in physical units)
//! 32      8     t0 (f64; left edge)
//! 40      16n   q1: interleaved (re, im) f64 pairs
//! 40+16n  16n   q2: interleaved (re, im) f64 pairs
//! ```

use crate::error::{Error, Result};
use crate::signal::{DualPolEnvelope, TimeGrid, UnitSystem};
use crate::Complex;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"DPWV";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_envelope<W: Write>(mut w: W, env: &DualPolEnvelope) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let flag: u32 = match env.units {
        UnitSystem::Normalized => 0,
        UnitSystem::Physical => 1,
    };
    w.write_all(&flag.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(env.grid.n_samples() as u64).to_le_bytes())?;
    w.write_all(&env.grid.dt().to_le_bytes())?;
    w.write_all(&env.grid.t0().to_le_bytes())?;
    for comp in [&env.q1, &env.q2] {
        for v in comp {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_envelope<R: Read>(mut r: R) -> Result<DualPolEnvelope> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::WaveFormat("bad magic, not a DPWV waveform".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::WaveFormat(format!("unsupported format version {version}")));
    }
    let flag = read_u32(&mut r)?;
    let units = match flag {
        0 => UnitSystem::Normalized,
        1 => UnitSystem::Physical,
        other => return Err(Error::WaveFormat(format!("unknown unit flag {other}"))),
    };
    let _reserved = read_u32(&mut r)?;
    let n = read_u64(&mut r)? as usize;
    if n == 0 || n > (1 << 28) {
        return Err(Error::WaveFormat(format!("implausible sample count {n}")));
    }
    let dt = read_f64(&mut r)?;
    let t0 = read_f64(&mut r)?;
    let grid = TimeGrid::new(n, dt, t0)?;
    let read_component = |r: &mut R| -> Result<Vec<Complex>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            out.push(Complex::new(re, im));
        }
        Ok(out)
    };
    let q1 = read_component(&mut r)?;
    let q2 = read_component(&mut r)?;
    DualPolEnvelope::new(grid, q1, q2, units)
}

pub fn write_envelope_file<P: AsRef<Path>>(path: P, env: &DualPolEnvelope) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_envelope(std::io::BufWriter::new(f), env)
}

pub fn read_envelope_file<P: AsRef<Path>>(path: P) -> Result<DualPolEnvelope> {
    let f = std::fs::File::open(path)?;
    read_envelope(std::io::BufReader::new(f))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
