//! On-disk cache of grid-built contact sets.
//!
//! One file per `(arm, point quantized to 1 mm, resolution)`. Layout, all
//! little-endian:
//!
//! ```text
//! magic      8 bytes   "CBFCDF01"
//! arm hash   u64       PlanarArm::fingerprint
//! resolution f64
//! point      2 × f64   quantized point the set was built for
//! dof        u32
//! count      u64
//! configs    count × dof × f64
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{cdf_contact_set, ContactSet};
use crate::kinematics::PlanarArm;
use crate::{Error, JointConfig, Point2, Result};

const MAGIC: &[u8; 8] = b"CBFCDF01";
const QUANTUM: f64 = 1e-3;

impl ContactSet {
    pub fn write_binary<W: Write>(&self, arm: &PlanarArm, mut w: W) -> Result<()> {
        let dof = arm.dof();
        if let Some(bad) = self.configs.iter().find(|c| c.len() != dof) {
            return Err(Error::DimensionMismatch { expected: dof, got: bad.len() });
        }
        w.write_all(MAGIC)?;
        w.write_all(&arm.fingerprint().to_le_bytes())?;
        w.write_all(&self.resolution.to_le_bytes())?;
        w.write_all(&self.point.x.to_le_bytes())?;
        w.write_all(&self.point.y.to_le_bytes())?;
        w.write_all(&(dof as u32).to_le_bytes())?;
        w.write_all(&(self.configs.len() as u64).to_le_bytes())?;
        for c in &self.configs {
            for v in c.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(arm: &PlanarArm, mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let hash = read_u64(&mut r)?;
        if hash != arm.fingerprint() {
            return Err(Error::Cache(format!("arm hash {hash:016x} does not match {:016x}", arm.fingerprint())));
        }
        let resolution = read_f64(&mut r)?;
        let point = Point2::new(read_f64(&mut r)?, read_f64(&mut r)?);
        let mut dof = [0u8; 4];
        r.read_exact(&mut dof)?;
        let dof = u32::from_le_bytes(dof) as usize;
        if dof != arm.dof() {
            return Err(Error::Cache(format!("stored dof {dof} does not match arm dof {}", arm.dof())));
        }
        let count = read_u64(&mut r)? as usize;
        let mut configs = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let c = (0..dof).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            configs.push(JointConfig(c));
        }
        Ok(Self { point, resolution, configs })
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Directory-backed contact-set cache.
#[derive(Debug, Clone)]
pub struct ContactCache {
    dir: PathBuf,
}

impl ContactCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn quantize(point: &Point2) -> (i64, i64) {
        ((point.x / QUANTUM).round() as i64, (point.y / QUANTUM).round() as i64)
    }

    fn path_for(&self, arm: &PlanarArm, key: (i64, i64), resolution: f64) -> PathBuf {
        self.dir.join(format!(
            "contacts_{:016x}_{}_{}_{:016x}.bin",
            arm.fingerprint(),
            key.0,
            key.1,
            resolution.to_bits()
        ))
    }

    /// Load the set for the quantized point, building and storing it on a
    /// miss. The returned set is always built at the quantized point.
    pub fn get_or_build(&self, arm: &PlanarArm, point: &Point2, resolution: f64) -> Result<ContactSet> {
        let key = Self::quantize(point);
        let path = self.path_for(arm, key, resolution);
        if path.exists() {
            return ContactSet::read_binary(arm, fs::File::open(&path)?);
        }
        let snapped = Point2::new(key.0 as f64 * QUANTUM, key.1 as f64 * QUANTUM);
        let set = cdf_contact_set(arm, &snapped, resolution)?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            set.write_binary(arm, &mut f)?;
            f.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(set)
    }
}
