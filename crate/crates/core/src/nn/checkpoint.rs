//! Binary parameter container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic         8 bytes  "L2OCKPT\0"
//! version       u32      currently 1
//! config_hash   u64
//! n_antennas    u32
//! n_users       u32
//! variant       u8       0 = eve_sinr_min, 1 = green_power
//! sparsity      f64
//! smooth_delta  f64
//! n_widths      u32
//! widths        u32 * n_widths       [input, hidden.., output]
//! n_params      u64
//! params        f64 * n_params       layer by layer: weights row-major, then biases
//! adam_step     u64
//! beta1, beta2, eps                  f64 * 3
//! m             f64 * n_params
//! v             f64 * n_params
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, ProblemVariant};

use super::{AdamState, MlpParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"L2OCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n_antennas: usize,
    pub n_users: usize,
    pub problem: ProblemSpec,
    pub config_hash: u64,
    pub params: MlpParams,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&self.config_hash.to_le_bytes())?;
        put_u32(&mut out, self.n_antennas)?;
        put_u32(&mut out, self.n_users)?;
        let tag: u8 = match self.problem.variant {
            ProblemVariant::EveSinrMin => 0,
            ProblemVariant::GreenPower => 1,
        };
        out.write_all(&[tag])?;
        put_f64s(&mut out, &[self.problem.sparsity_weight, self.problem.smooth_delta])?;
        put_u32(&mut out, self.params.dims().len())?;
        for &d in self.params.dims() {
            put_u32(&mut out, d)?;
        }
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        put_f64s(&mut out, self.params.as_slice())?;
        out.write_all(&self.adam.step.to_le_bytes())?;
        put_f64s(&mut out, &[self.adam.beta1, self.adam.beta2, self.adam.eps])?;
        put_f64s(&mut out, &self.adam.m)?;
        put_f64s(&mut out, &self.adam.v)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = get_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let config_hash = get_u64(&mut input)?;
        let n_antennas = get_u32(&mut input)? as usize;
        let n_users = get_u32(&mut input)? as usize;
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        let variant = match tag[0] {
            0 => ProblemVariant::EveSinrMin,
            1 => ProblemVariant::GreenPower,
            other => return Err(Error::format("checkpoint", format!("unknown variant {other}"))),
        };
        let problem = ProblemSpec {
            variant,
            sparsity_weight: get_f64(&mut input)?,
            smooth_delta: get_f64(&mut input)?,
        };
        let n_widths = get_u32(&mut input)? as usize;
        if !(2..=64).contains(&n_widths) {
            return Err(Error::format("checkpoint", format!("implausible depth {n_widths}")));
        }
        let dims = (0..n_widths)
            .map(|_| get_u32(&mut input).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n_params = get_u64(&mut input)? as usize;
        let expected = MlpParams::zeros(&dims)?.len();
        if n_params != expected {
            return Err(Error::format(
                "checkpoint",
                format!("{n_params} parameters for widths {dims:?}, expected {expected}"),
            ));
        }
        let params = MlpParams::from_parts(&dims, get_f64s(&mut input, n_params)?)?;
        let step = get_u64(&mut input)?;
        let (beta1, beta2, eps) = (get_f64(&mut input)?, get_f64(&mut input)?, get_f64(&mut input)?);
        let m = get_f64s(&mut input, n_params)?;
        let v = get_f64s(&mut input, n_params)?;
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::format("checkpoint", "trailing bytes"));
        }
        Ok(Self {
            n_antennas,
            n_users,
            problem,
            config_hash,
            params,
            adam: AdamState { m, v, step, beta1, beta2, eps },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn put_u32<W: Write>(out: &mut W, value: usize) -> Result<()> {
    let v = u32::try_from(value).map_err(|_| Error::format("checkpoint", "value exceeds u32"))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn get_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn get_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    // capped reservation: a corrupt count hits EOF before it can exhaust memory
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        out.push(get_f64(input)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::adam_step;
    use crate::numeric::Rng;

    fn sample() -> Checkpoint {
        let mut rng = Rng::new(9);
        let mut params = MlpParams::xavier(&[7, 5, 5, 5, 4], &mut rng).unwrap();
        let mut adam = AdamState::for_params(&params);
        let grads: Vec<f64> = (0..params.len()).map(|_| rng.standard_normal()).collect();
        adam_step(&mut params, &mut adam, &grads, 1e-3).unwrap();
        params.as_mut_slice()[0] = -0.0;
        params.as_mut_slice()[1] = f64::MIN_POSITIVE / 4.0;
        Checkpoint {
            n_antennas: 2,
            n_users: 1,
            problem: ProblemSpec::green_power(0.3),
            config_hash: 0xdead_beef_1234,
            params,
            adam,
        }
    }

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(bits(back.params.as_slice()), bits(ck.params.as_slice()));
        assert_eq!(bits(&back.adam.m), bits(&ck.adam.m));
        assert_eq!(bits(&back.adam.v), bits(&ck.adam.v));
        assert_eq!(back.params.dims(), ck.params.dims());
        assert_eq!(back.adam.step, 1);
        assert_eq!(back.config_hash, ck.config_hash);
        assert_eq!(back.problem, ck.problem);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(Checkpoint::read_from(bad_magic.as_slice()), Err(Error::Format { .. })));
        let mut bad_version = buf.clone();
        bad_version[8] = 99;
        assert!(Checkpoint::read_from(bad_version.as_slice()).is_err());
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(Checkpoint::read_from(trailing.as_slice()).is_err());
    }
}
