//! Channel datasets and their binary container.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic     8 bytes  "L2ODATA\0"
//! version   u32      currently 1
//! K, N      u32, u32
//! count     u64
//! seed      u64
//! sigma2    f64
//! gamma     f64 * N
//! per instance: h(i, j) for i, j in 0..N (row-major), then g(i, k) likewise;
//!               each vector 2K f64 interleaved re/im
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{get_f64, get_f64s, get_u32, get_u64, put_f64s};
use crate::numeric::{cgauss_sample, ComplexVec, Rng};
use crate::problem::ChannelSet;

pub const DATASET_MAGIC: &[u8; 8] = b"L2ODATA\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_antennas: usize,
    pub n_users: usize,
    pub sigma2: f64,
    pub gamma: Vec<f64>,
    pub seed: u64,
    pub instances: Vec<ChannelSet>,
}

impl Dataset {
    /// Checks that every instance carries the dataset's metadata.
    pub fn new(
        n_antennas: usize,
        n_users: usize,
        sigma2: f64,
        gamma: Vec<f64>,
        seed: u64,
        instances: Vec<ChannelSet>,
    ) -> Result<Self> {
        if n_antennas == 0 || n_users == 0 {
            return Err(Error::invalid("dimensions", "K and N must be at least 1"));
        }
        crate::error::check_len(n_users, gamma.len())?;
        for ch in &instances {
            if ch.n_antennas() != n_antennas
                || ch.n_users() != n_users
                || ch.sigma2() != sigma2
                || ch.gamma() != gamma.as_slice()
            {
                return Err(Error::format("dataset", "instances disagree with metadata"));
            }
        }
        Ok(Self {
            n_antennas,
            n_users,
            sigma2,
            gamma,
            seed,
            instances,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// First `round(fraction * len)` instances and the rest.
    pub fn split(&self, fraction: f64) -> (&[ChannelSet], &[ChannelSet]) {
        let cut = ((fraction * self.len() as f64).round() as usize).min(self.len());
        self.instances.split_at(cut)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DATASET_MAGIC)?;
        out.write_all(&DATASET_VERSION.to_le_bytes())?;
        for d in [self.n_antennas, self.n_users] {
            let d = u32::try_from(d).map_err(|_| Error::format("dataset", "dimension exceeds u32"))?;
            out.write_all(&d.to_le_bytes())?;
        }
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        put_f64s(&mut out, &[self.sigma2])?;
        put_f64s(&mut out, &self.gamma)?;
        let n = self.n_users;
        for ch in &self.instances {
            for i in 0..n {
                for j in 0..n {
                    put_f64s(&mut out, ch.h(i, j).as_slice())?;
                }
            }
            for i in 0..n {
                for k in 0..n {
                    put_f64s(&mut out, ch.g(i, k).as_slice())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::format("dataset", "bad magic"));
        }
        let version = get_u32(&mut input)?;
        if version != DATASET_VERSION {
            return Err(Error::format("dataset", format!("unsupported version {version}")));
        }
        let k = get_u32(&mut input)? as usize;
        let n = get_u32(&mut input)? as usize;
        let count = get_u64(&mut input)? as usize;
        let seed = get_u64(&mut input)?;
        let sigma2 = get_f64(&mut input)?;
        let gamma = get_f64s(&mut input, n)?;
        let mut instances = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let mut read_grid = || -> Result<Vec<ComplexVec>> {
                (0..n * n)
                    .map(|_| ComplexVec::from_interleaved(get_f64s(&mut input, 2 * k)?))
                    .collect()
            };
            let h = read_grid()?;
            let g = read_grid()?;
            instances.push(ChannelSet::new(k, n, h, g, sigma2, gamma.clone())?);
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::format("dataset", "trailing bytes"));
        }
        Self::new(k, n, sigma2, gamma, seed, instances)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// `count` independent instances with every `h` and `g` drawn from `CN(0, I)`.
pub fn gen_dataset(
    n_antennas: usize,
    n_users: usize,
    count: usize,
    sigma2: f64,
    gamma: f64,
    seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    let mut rng = Rng::new(seed);
    let grid = n_users * n_users;
    let instances = (0..count)
        .map(|_| {
            let h = (0..grid).map(|_| cgauss_sample(&mut rng, n_antennas)).collect();
            let g = (0..grid).map(|_| cgauss_sample(&mut rng, n_antennas)).collect();
            ChannelSet::new(n_antennas, n_users, h, g, sigma2, vec![gamma; n_users])
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(n_antennas, n_users, sigma2, vec![gamma; n_users], seed, instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes(d: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn generation_is_reproducible() {
        let a = gen_dataset(4, 2, 10, 1.0, 10.0, 5).unwrap();
        let b = gen_dataset(4, 2, 10, 1.0, 10.0, 5).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        let c = gen_dataset(4, 2, 10, 1.0, 10.0, 6).unwrap();
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn smallest_shape() {
        let d = gen_dataset(1, 1, 1, 1.0, 10.0, 1).unwrap();
        assert_eq!(d.len(), 1);
        let ch = &d.instances[0];
        assert_eq!(ch.h(0, 0).dim(), 1);
        assert_eq!(ch.g(0, 0).dim(), 1);
        assert_eq!(ch.features().len(), 2 * 2 + 2);
        assert!(gen_dataset(1, 1, 0, 1.0, 10.0, 1).is_err());
    }

    #[test]
    fn container_round_trip() {
        let d = gen_dataset(3, 2, 4, 0.5, 7.0, 9).unwrap();
        let back = Dataset::read_from(bytes(&d).as_slice()).unwrap();
        assert_eq!(back, d);
        let empty = Dataset::new(3, 2, 1.0, vec![10.0; 2], 0, vec![]).unwrap();
        assert_eq!(Dataset::read_from(bytes(&empty).as_slice()).unwrap(), empty);
    }

    #[test]
    fn corrupt_container_is_rejected() {
        let buf = bytes(&gen_dataset(2, 2, 2, 1.0, 5.0, 3).unwrap());
        let mut bad = buf.clone();
        bad[1] ^= 0xff;
        assert!(matches!(Dataset::read_from(bad.as_slice()), Err(Error::Format { .. })));
        assert!(Dataset::read_from(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn split_is_eighty_twenty() {
        let d = gen_dataset(2, 1, 10, 1.0, 5.0, 3).unwrap();
        let (train, eval) = d.split(0.8);
        assert_eq!((train.len(), eval.len()), (8, 2));
    }
}
