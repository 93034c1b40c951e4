//! Binary checkpoint format for trained Q-networks.
//!
//! Layout (all integers little-endian):
//!   bytes 0..8    magic "PLTNQNET"
//!   u32           format version (currently 1)
//!   u8            algorithm (0 = shared net, 1 = one net per agent)
//!   u32           number of networks
//!   u32 x3        dims: input, hidden, actions
//!   u64           scenario structural hash (see `SimConfig::structural_hash`)
//!   u64           flat parameter count per network
//!   f64 x (nets * count)  parameters in canonical flat order
//!
//! Floats are written bit-for-bit, so save -> load -> save is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::config::Algo;
use crate::error::{Error, Result};
use crate::nn::{QNetDims, QNetParams, Tensor2};

const MAGIC: &[u8; 8] = b"PLTNQNET";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub algo: Algo,
    pub dims: QNetDims,
    pub scenario_hash: u64,
    pub nets: Vec<QNetParams>,
}

impl Checkpoint {
    pub fn new(algo: Algo, scenario_hash: u64, nets: Vec<QNetParams>) -> Result<Checkpoint> {
        if nets.is_empty() {
            return Err(Error::Checkpoint("checkpoint needs at least one network".into()));
        }
        if algo == Algo::Random {
            return Err(Error::Checkpoint("the random baseline has no parameters to save".into()));
        }
        let dims = nets[0].dims;
        if nets.iter().any(|n| n.dims != dims) {
            return Err(Error::Checkpoint("all networks in a checkpoint must share dims".into()));
        }
        Ok(Checkpoint { algo, dims, scenario_hash, nets })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let algo_code: u8 = match self.algo {
            Algo::Vdn => 0,
            Algo::Marl => 1,
            Algo::Random => unreachable!("rejected in new()"),
        };
        w.write_all(&[algo_code])?;
        w.write_all(&(self.nets.len() as u32).to_le_bytes())?;
        for d in [self.dims.input, self.dims.hidden, self.dims.actions] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.scenario_hash.to_le_bytes())?;
        let flat_len = self.nets[0].flat_len() as u64;
        w.write_all(&flat_len.to_le_bytes())?;
        for net in &self.nets {
            net.visit(|s| {
                for &v in s {
                    // BufWriter error surfaces on flush below.
                    let _ = w.write_all(&v.to_le_bytes());
                }
            });
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "{} is not a checkpoint (bad magic)",
                path.display()
            )));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let mut algo_code = [0u8; 1];
        r.read_exact(&mut algo_code)?;
        let algo = match algo_code[0] {
            0 => Algo::Vdn,
            1 => Algo::Marl,
            other => {
                return Err(Error::Checkpoint(format!("unknown algorithm code {other}")));
            }
        };
        let n_nets = read_u32(&mut r)? as usize;
        let dims = QNetDims {
            input: read_u32(&mut r)? as usize,
            hidden: read_u32(&mut r)? as usize,
            actions: read_u32(&mut r)? as usize,
        };
        let scenario_hash = read_u64(&mut r)?;
        let flat_len = read_u64(&mut r)? as usize;

        let template = empty_net(dims);
        if template.flat_len() != flat_len {
            return Err(Error::Checkpoint(format!(
                "parameter count {flat_len} does not match dims {dims:?}"
            )));
        }
        let mut nets = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let mut flat = vec![0.0; flat_len];
            let mut buf = [0u8; 8];
            for v in flat.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            let mut net = template.clone();
            net.set_flat(&flat);
            nets.push(net);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after checkpoint payload".into()));
        }
        Checkpoint::new(algo, scenario_hash, nets)
    }

    /// Fail unless the checkpoint was trained on a structurally identical
    /// scenario.
    pub fn expect_scenario(&self, hash: u64) -> Result<()> {
        if self.scenario_hash != hash {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained on a different scenario \
                 (hash {:#018x}, current {:#018x})",
                self.scenario_hash, hash
            )));
        }
        Ok(())
    }
}

fn empty_net(dims: QNetDims) -> QNetParams {
    let (i, d, a) = (dims.input, dims.hidden, dims.actions);
    QNetParams {
        dims,
        w1: Tensor2::zeros(d, i),
        b1: vec![0.0; d],
        wz: Tensor2::zeros(d, d),
        uz: Tensor2::zeros(d, d),
        bz: vec![0.0; d],
        wr: Tensor2::zeros(d, d),
        ur: Tensor2::zeros(d, d),
        br: vec![0.0; d],
        wh: Tensor2::zeros(d, d),
        uh: Tensor2::zeros(d, d),
        bh: vec![0.0; d],
        w2: Tensor2::zeros(a, d),
        b2: vec![0.0; a],
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, tag};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("pltn-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dims = QNetDims { input: 6, hidden: 5, actions: 8 };
        let nets: Vec<QNetParams> = (0..3)
            .map(|i| QNetParams::init(dims, &mut rng::indexed_stream(7, tag::WEIGHT_INIT, i)))
            .collect();
        let ck = Checkpoint::new(Algo::Marl, 0xDEAD_BEEF, nets.clone()).unwrap();
        let path = tmp("round_trip.bin");
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.algo, Algo::Marl);
        assert_eq!(loaded.scenario_hash, 0xDEAD_BEEF);
        assert_eq!(loaded.dims, dims);
        for (a, b) in loaded.nets.iter().zip(&nets) {
            let (fa, fb) = (a.flat(), b.flat());
            assert!(fa.iter().zip(&fb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        // Save the loaded copy again: files byte-identical.
        let path2 = tmp("round_trip2.bin");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn rejects_garbage_and_wrong_scenario() {
        let path = tmp("garbage.bin");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));

        let dims = QNetDims { input: 2, hidden: 3, actions: 4 };
        let net = QNetParams::init(dims, &mut rng::stream(1, tag::WEIGHT_INIT));
        let ck = Checkpoint::new(Algo::Vdn, 10, vec![net]).unwrap();
        assert!(ck.expect_scenario(10).is_ok());
        assert!(ck.expect_scenario(11).is_err());
    }
}
