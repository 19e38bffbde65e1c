//! Binary checkpoints for exact restarts.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "SRKL"  u32 version  u32 dims  u32 n[dims]  f64 lengths[dims]
//! f64 time  f64 h  u8 prev_rejected  u8 fsal_valid  u8 has_density  u8 has_history
//! u64 rng_seed  u128 rng_word_pos  u64 rhs_evals  u64 rejections  u64 accepted_steps
//! state arrays, then the cached FSAL stage if valid, then the AB2 history if present
//! ```
//!
//! Each field set is stored component-major (velocity components, then
//! density) as `(re, im)` pairs over the stored half spectrum.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::physics::{Fields, FlowState};

pub const MAGIC: &[u8; 4] = b"SRKL";
pub const VERSION: u32 = 1;

/// Random number generator position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub grid: GridSpec,
    pub state: FlowState,
    /// Step size the controller would try next (or the fixed step).
    pub h: f64,
    pub prev_rejected: bool,
    /// `f(t, y)` at the stored state when still valid.
    pub fsal_stage: Option<Fields>,
    /// Previous right-hand side for two-step methods.
    pub history: Option<Fields>,
    pub rng: RngState,
    pub rhs_evals: u64,
    pub rejections: u64,
    pub accepted_steps: u64,
}

fn put_fields(buf: &mut Vec<u8>, f: &Fields) {
    for comp in f.components() {
        for v in comp {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.grid.dims();
        let has_density = self.state.fields.density.is_some();
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(dims as u32).to_le_bytes());
        for &n in self.grid.n() {
            b.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for &l in self.grid.lengths() {
            b.extend_from_slice(&l.to_le_bytes());
        }
        b.extend_from_slice(&self.state.time.to_le_bytes());
        b.extend_from_slice(&self.h.to_le_bytes());
        b.push(u8::from(self.prev_rejected));
        b.push(u8::from(self.fsal_stage.is_some()));
        b.push(u8::from(has_density));
        b.push(u8::from(self.history.is_some()));
        b.extend_from_slice(&self.rng.seed.to_le_bytes());
        b.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        b.extend_from_slice(&self.rhs_evals.to_le_bytes());
        b.extend_from_slice(&self.rejections.to_le_bytes());
        b.extend_from_slice(&self.accepted_steps.to_le_bytes());
        put_fields(&mut b, &self.state.fields);
        if let Some(f) = &self.fsal_stage {
            put_fields(&mut b, f);
        }
        if let Some(f) = &self.history {
            put_fields(&mut b, f);
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic bytes; not a checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let dims = r.u32()? as usize;
        if !(2..=3).contains(&dims) {
            return Err(Error::Format(format!("invalid dimension count {dims}")));
        }
        let n: Vec<usize> = (0..dims)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<_>>()?;
        let lengths: Vec<f64> = (0..dims).map(|_| r.f64()).collect::<Result<_>>()?;
        let grid = GridSpec::with_lengths(&n, &lengths)
            .map_err(|e| Error::Format(format!("invalid grid in checkpoint: {e}")))?;
        let time = r.f64()?;
        let h = r.f64()?;
        let prev_rejected = r.flag()?;
        let fsal_valid = r.flag()?;
        let has_density = r.flag()?;
        let has_history = r.flag()?;
        let rng = RngState {
            seed: r.u64()?,
            word_pos: u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes")),
        };
        let rhs_evals = r.u64()?;
        let rejections = r.u64()?;
        let accepted_steps = r.u64()?;
        let fields = r.fields(&grid, has_density)?;
        let fsal_stage = fsal_valid
            .then(|| r.fields(&grid, has_density))
            .transpose()?;
        let history = has_history
            .then(|| r.fields(&grid, has_density))
            .transpose()?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after checkpoint data",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            grid,
            state: FlowState { fields, time },
            h,
            prev_rejected,
            fsal_stage,
            history,
            rng,
            rhs_evals,
            rejections,
            accepted_steps,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated checkpoint: needed {end} bytes, file has {}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Format(format!("invalid flag byte {v}"))),
        }
    }

    fn field(&mut self, grid: &GridSpec, ncomp: usize) -> Result<SpectralField> {
        let len = grid.num_modes();
        let raw = self.take(ncomp * len * 16)?;
        let data = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        SpectralField::from_raw(ncomp, len, data)
    }

    fn fields(&mut self, grid: &GridSpec, has_density: bool) -> Result<Fields> {
        let velocity = self.field(grid, grid.dims())?;
        let density = has_density.then(|| self.field(grid, 1)).transpose()?;
        Ok(Fields { velocity, density })
    }
}

/// Write `ckpt` to `path`, replacing any existing file atomically.
pub fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&ckpt.to_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        rayleigh_taylor_grid, rayleigh_taylor_init, taylor_green_init, RtParams,
    };

    fn sample() -> Checkpoint {
        let grid = GridSpec::new(&[8, 4, 6]).unwrap();
        let mut state = taylor_green_init(&grid);
        state.time = 0.1 + 0.2;
        let mut stage = state.fields.clone();
        stage.velocity.scale(-0.3);
        Checkpoint {
            grid,
            state,
            h: 1.0 / 3.0,
            prev_rejected: true,
            fsal_stage: Some(stage),
            history: None,
            rng: RngState {
                seed: 42,
                word_pos: u128::MAX - 7,
            },
            rhs_evals: 123,
            rejections: 4,
            accepted_steps: 17,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);

        let g = rayleigh_taylor_grid(&[8, 16]).unwrap();
        let s = rayleigh_taylor_init(&g, &RtParams::default()).unwrap();
        let c = Checkpoint {
            grid: g,
            history: Some(s.fields.clone()),
            state: s,
            h: 0.01,
            prev_rejected: false,
            fsal_stage: None,
            rng: RngState::default(),
            rhs_evals: 0,
            rejections: 0,
            accepted_steps: 0,
        };
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        let c = sample();
        write_checkpoint(&c, &path).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), c);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            Checkpoint::from_bytes(&long),
            Err(Error::Format(_))
        ));
    }
}
