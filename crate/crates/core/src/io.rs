//! Flat binary serialization of MPS states for checkpointing.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic   4 bytes  "UMPS"
//! version u8       1
//! L       u32      number of sites
//! d       u32      local dimension
//! chi     u32      bond cap
//! tol     f64      truncation tolerance
//! for cut in 0..=L:  len u32, then len f64 Schmidt values
//! for site in 0..L:  dl u32, d u32, dr u32, then dl·d·dr complex pairs
//!                    (re f64, im f64) in row-major (l, p, r) order —
//!                    the right bond index varies fastest.
//! ```

use crate::error::{Error, Result};
use crate::mps::{MpsState, SiteTensor};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"UMPS";
const VERSION: u8 = 1;

pub fn save_state<W: Write>(state: &MpsState, mut w: W) -> Result<()> {
    let emit = |e: std::io::Error| Error::StateIo(e.to_string());
    w.write_all(MAGIC).map_err(emit)?;
    w.write_all(&[VERSION]).map_err(emit)?;
    w.write_all(&(state.len() as u32).to_le_bytes()).map_err(emit)?;
    w.write_all(&(state.local_dim() as u32).to_le_bytes()).map_err(emit)?;
    w.write_all(&(state.max_bond() as u32).to_le_bytes()).map_err(emit)?;
    w.write_all(&state.trunc_tol().to_le_bytes()).map_err(emit)?;
    for cut in 0..=state.len() {
        let lam = state.lambda(cut);
        w.write_all(&(lam.len() as u32).to_le_bytes()).map_err(emit)?;
        for v in lam.iter() {
            w.write_all(&v.to_le_bytes()).map_err(emit)?;
        }
    }
    for j in 0..state.len() {
        let t = state.site_tensor(j);
        for dim in [t.dl, t.d, t.dr] {
            w.write_all(&(dim as u32).to_le_bytes()).map_err(emit)?;
        }
        for l in 0..t.dl {
            for p in 0..t.d {
                for r in 0..t.dr {
                    let v = t.get(l, p, r);
                    w.write_all(&v.re.to_le_bytes()).map_err(emit)?;
                    w.write_all(&v.im.to_le_bytes()).map_err(emit)?;
                }
            }
        }
    }
    Ok(())
}

pub fn load_state<R: Read>(mut r: R) -> Result<MpsState> {
    let emit = |e: std::io::Error| Error::StateIo(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(emit)?;
    if &magic != MAGIC {
        return Err(Error::StateIo("bad magic".into()));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version).map_err(emit)?;
    if version[0] != VERSION {
        return Err(Error::StateIo(format!("unsupported version {}", version[0])));
    }
    let mut u32buf = [0u8; 4];
    let mut f64buf = [0u8; 8];
    let mut read_u32 = |r: &mut R| -> Result<usize> {
        r.read_exact(&mut u32buf).map_err(emit)?;
        Ok(u32::from_le_bytes(u32buf) as usize)
    };
    let length = read_u32(&mut r)?;
    let d = read_u32(&mut r)?;
    let chi = read_u32(&mut r)?;
    r.read_exact(&mut f64buf).map_err(emit)?;
    let tol = f64::from_le_bytes(f64buf);

    let mut lambdas = Vec::with_capacity(length + 1);
    for _ in 0..=length {
        let n = {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(emit)?;
            u32::from_le_bytes(b) as usize
        };
        let mut lam = DVector::from_element(n, 0.0);
        for i in 0..n {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(emit)?;
            lam[i] = f64::from_le_bytes(b);
        }
        lambdas.push(lam);
    }
    let mut gammas = Vec::with_capacity(length);
    for _ in 0..length {
        let mut dims = [0usize; 3];
        for dim in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(emit)?;
            *dim = u32::from_le_bytes(b) as usize;
        }
        let mut t = SiteTensor::zeros(dims[0], dims[1], dims[2]);
        for l in 0..dims[0] {
            for p in 0..dims[1] {
                for rr in 0..dims[2] {
                    let mut re = [0u8; 8];
                    let mut im = [0u8; 8];
                    r.read_exact(&mut re).map_err(emit)?;
                    r.read_exact(&mut im).map_err(emit)?;
                    t.set(l, p, rr, C64::new(f64::from_le_bytes(re), f64::from_le_bytes(im)));
                }
            }
        }
        gammas.push(t);
    }
    MpsState::from_parts(gammas, lambdas, d, chi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn roundtrip_preserves_state() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let v = dense::random_state(32, &mut rng);
        let psi = MpsState::from_dense(&v, 5, 2, 12, 1e-12).unwrap();
        let mut buf = Vec::new();
        save_state(&psi, &mut buf).unwrap();
        let back = load_state(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back.local_dim(), 2);
        assert_eq!(back.max_bond(), 12);
        assert!((back.to_dense() - psi.to_dense()).norm() < 1e-14);
        for cut in 1..5 {
            assert!((back.lambda(cut) - psi.lambda(cut)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(load_state(&b"NOPE"[..]).is_err());
        let mut buf = Vec::new();
        let psi = MpsState::basis_state(&[0, 1], 2, 4, 0.0).unwrap();
        save_state(&psi, &mut buf).unwrap();
        buf[4] = 99; // unsupported version
        assert!(load_state(buf.as_slice()).is_err());
    }
}
