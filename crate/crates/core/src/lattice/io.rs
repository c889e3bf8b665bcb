//! Binary checkpoint format.
//!
//! Layout: the 8 magic bytes `LDSTATE1`, a little-endian `u64` header length,
//! a JSON header, then the raw little-endian `f64` arrays: `u` as interleaved
//! real and imaginary parts followed by the three components of `A₀`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::geometry::{LatticeGeometry, ModelParams};
use super::state::LatticeState;
use crate::error::{Error, Result};
use crate::metric::FieldVector;

const MAGIC: &[u8; 8] = b"LDSTATE1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateHeader {
    pub geometry: LatticeGeometry,
    pub params: Option<ModelParams>,
    pub h_bar: FieldVector,
    pub u_len: usize,
    pub a0_len: usize,
}

pub fn write_state(mut w: impl Write, geom: &LatticeGeometry, params: Option<&ModelParams>, state: &LatticeState) -> Result<()> {
    state.check_dims(geom)?;
    let header = StateHeader {
        geometry: *geom,
        params: params.copied(),
        h_bar: state.h_bar,
        u_len: state.u.len(),
        a0_len: state.a0[0].len(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * (2 * state.u.len() + 3 * header.a0_len));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for z in &state.u {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    for a in &state.a0 {
        for v in a {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_state(mut r: impl Read) -> Result<(StateHeader, LatticeState)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a lattice state file".into()));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..).unwrap_or_default();
    if hlen > body.len() {
        return Err(Error::Format("truncated header".into()));
    }
    let header: StateHeader = serde_json::from_slice(&body[..hlen])?;
    header.geometry.validate()?;
    if header.u_len != header.geometry.n_sites() || header.a0_len != header.geometry.n_cells() {
        return Err(Error::Format("array lengths disagree with the geometry".into()));
    }
    let data = &body[hlen..];
    let expected = 8 * (2 * header.u_len + 3 * header.a0_len);
    if data.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes of array data, found {}", data.len())));
    }
    let mut vals = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let u: Vec<Complex64> = (0..header.u_len)
        .map(|_| {
            let re = vals.next().unwrap();
            Complex64::new(re, vals.next().unwrap())
        })
        .collect();
    let mut a0: [Vec<f64>; 3] = Default::default();
    for a in &mut a0 {
        *a = vals.by_ref().take(header.a0_len).collect();
    }
    let state = LatticeState::new(&header.geometry, u, a0, header.h_bar)?;
    Ok((header, state))
}

pub fn save_state(path: &Path, geom: &LatticeGeometry, params: Option<&ModelParams>, state: &LatticeState) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_state(std::io::BufWriter::new(f), geom, params, state)
}

pub fn load_state(path: &Path) -> Result<(StateHeader, LatticeState)> {
    read_state(std::io::BufReader::new(std::fs::File::open(path)?))
}
