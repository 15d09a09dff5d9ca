//! Versioned binary checkpoints. Values are stored bit-exactly so that a
//! resumed run reproduces the uninterrupted one.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use super::StepDiagnostics;
use crate::error::{Error, Result};
use crate::models::{SectorBasis, SiteBasis};
use crate::observables::{RunMetadata, Sample, TrajectoryRecord};
use crate::states::{DenseState, QuantumState};
use crate::symmetry::{Charge, SymmetrySector};
use crate::tensornet::{BlockTensor, Dir, Leg, Mps};

const MAGIC: &[u8; 8] = b"DWMCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub step: u64,
    pub dt: f64,
    pub state: QuantumState,
    pub record: TrajectoryRecord,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(CHECKPOINT_VERSION)?;
        w.write_u64::<LE>(ck.step)?;
        w.write_f64::<LE>(ck.dt)?;
        write_state(&mut w, &ck.state)?;
        write_record(&mut w, &ck.record)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a checkpoint written for chains over `basis`.
pub fn read_checkpoint(path: &Path, basis: &SiteBasis) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| corrupt("file too short"))?;
    if &magic != MAGIC {
        return Err(corrupt("not a checkpoint file"));
    }
    let version = r.read_u32::<LE>()?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let step = r.read_u64::<LE>()?;
    let dt = r.read_f64::<LE>()?;
    let state = read_state(&mut r, basis)?;
    let record = read_record(&mut r)?;
    Ok(Checkpoint { step, dt, state, record })
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_u64::<LE>(s.len() as u64)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let n = read_len(r)?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| corrupt("invalid UTF-8"))
}

fn read_len(r: &mut impl Read) -> Result<usize> {
    let n = r.read_u64::<LE>()?;
    if n > (1 << 40) {
        return Err(corrupt(format!("implausible length {n}")));
    }
    Ok(n as usize)
}

fn write_c64(w: &mut impl Write, x: C64) -> Result<()> {
    w.write_f64::<LE>(x.re)?;
    w.write_f64::<LE>(x.im)?;
    Ok(())
}

fn read_c64(r: &mut impl Read) -> Result<C64> {
    Ok(C64::new(r.read_f64::<LE>()?, r.read_f64::<LE>()?))
}

fn write_basis(w: &mut impl Write, b: &SiteBasis) -> Result<()> {
    write_str(w, &format!("{:?}", b.kind()))?;
    w.write_u64::<LE>(b.n_max() as u64)?;
    Ok(())
}

fn check_basis(r: &mut impl Read, b: &SiteBasis) -> Result<()> {
    let kind = read_str(r)?;
    let n_max = r.read_u64::<LE>()?;
    if kind != format!("{:?}", b.kind()) || n_max != b.n_max() as u64 {
        return Err(corrupt(format!("checkpoint basis {kind}/{n_max} does not match the model")));
    }
    Ok(())
}

fn write_state(w: &mut impl Write, s: &QuantumState) -> Result<()> {
    match s {
        QuantumState::Dense(d) => {
            w.write_u8(0)?;
            write_basis(w, d.sb.basis())?;
            let sec = d.sb.sector();
            w.write_u64::<LE>(d.sb.length() as u64)?;
            w.write_u64::<LE>(sec.n_up as u64)?;
            w.write_u64::<LE>(sec.n_down as u64)?;
            w.write_u64::<LE>(d.amps.len() as u64)?;
            for &x in d.amps.iter() {
                write_c64(w, x)?;
            }
        }
        QuantumState::Mps(m) => {
            w.write_u8(1)?;
            write_basis(w, m.basis())?;
            w.write_u64::<LE>(m.len() as u64)?;
            w.write_i64::<LE>(m.center().map_or(-1, |c| c as i64))?;
            for j in 0..m.len() {
                write_tensor(w, m.tensor(j))?;
            }
        }
    }
    Ok(())
}

fn read_state(r: &mut impl Read, basis: &SiteBasis) -> Result<QuantumState> {
    match r.read_u8()? {
        0 => {
            check_basis(r, basis)?;
            let length = read_len(r)?;
            let n_up = read_len(r)?;
            let n_down = read_len(r)?;
            let sec = SymmetrySector::new(basis, length, n_up, n_down)?;
            let sb = Arc::new(SectorBasis::new(basis, length, sec)?);
            let n = read_len(r)?;
            if n != sb.dim() {
                return Err(corrupt("amplitude count does not match the sector"));
            }
            let amps = (0..n).map(|_| read_c64(r)).collect::<Result<Vec<_>>>()?;
            Ok(QuantumState::Dense(DenseState::new(sb, amps.into())?))
        }
        1 => {
            check_basis(r, basis)?;
            let l = read_len(r)?;
            let center = r.read_i64::<LE>()?;
            let tensors = (0..l).map(|_| read_tensor(r)).collect::<Result<Vec<_>>>()?;
            let mut m = Mps::from_tensors(basis.clone(), tensors)?;
            m.standardize();
            m.set_center(usize::try_from(center).ok());
            Ok(QuantumState::Mps(m))
        }
        t => Err(corrupt(format!("unknown state tag {t}"))),
    }
}

fn write_tensor(w: &mut impl Write, t: &BlockTensor) -> Result<()> {
    w.write_u32::<LE>(t.rank() as u32)?;
    for leg in t.legs() {
        w.write_u8(if leg.dir == Dir::In { 0 } else { 1 })?;
        w.write_u64::<LE>(leg.sectors.len() as u64)?;
        for &(q, d) in &leg.sectors {
            w.write_i32::<LE>(q.up)?;
            w.write_i32::<LE>(q.down)?;
            w.write_u64::<LE>(d as u64)?;
        }
    }
    let blocks: BTreeMap<&Vec<usize>, &ArrayD<C64>> = t.blocks().collect();
    w.write_u64::<LE>(blocks.len() as u64)?;
    for (key, blk) in blocks {
        for &k in key {
            w.write_u64::<LE>(k as u64)?;
        }
        for &x in blk.iter() {
            write_c64(w, x)?;
        }
    }
    Ok(())
}

fn read_tensor(r: &mut impl Read) -> Result<BlockTensor> {
    let rank = r.read_u32::<LE>()? as usize;
    if rank > 8 {
        return Err(corrupt(format!("implausible tensor rank {rank}")));
    }
    let mut legs = Vec::with_capacity(rank);
    for _ in 0..rank {
        let dir = if r.read_u8()? == 0 { Dir::In } else { Dir::Out };
        let n = read_len(r)?;
        let mut sectors = Vec::with_capacity(n);
        for _ in 0..n {
            let q = Charge::new(r.read_i32::<LE>()?, r.read_i32::<LE>()?);
            sectors.push((q, read_len(r)?));
        }
        legs.push(Leg::new(dir, sectors));
    }
    let mut t = BlockTensor::new(legs);
    let nb = read_len(r)?;
    for _ in 0..nb {
        let key = (0..rank).map(|_| read_len(r)).collect::<Result<Vec<_>>>()?;
        for (i, &k) in key.iter().enumerate() {
            if k >= t.leg(i).num_sectors() {
                return Err(corrupt("block key outside its leg"));
            }
        }
        let shape = t.block_shape(&key);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| read_c64(r)).collect::<Result<Vec<_>>>()?;
        let blk = ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| corrupt(e.to_string()))?;
        t.insert(key, blk);
    }
    Ok(t)
}

fn write_record(w: &mut impl Write, rec: &TrajectoryRecord) -> Result<()> {
    let meta = serde_json::to_string(&rec.metadata).map_err(|e| corrupt(e.to_string()))?;
    write_str(w, &meta)?;
    w.write_u64::<LE>(rec.samples.len() as u64)?;
    for s in &rec.samples {
        w.write_f64::<LE>(s.time)?;
        w.write_u64::<LE>(s.values.len() as u64)?;
        for (k, v) in &s.values {
            write_str(w, k)?;
            w.write_u64::<LE>(v.len() as u64)?;
            for &x in v {
                w.write_f64::<LE>(x)?;
            }
        }
    }
    w.write_u64::<LE>(rec.steps.len() as u64)?;
    for d in &rec.steps {
        w.write_f64::<LE>(d.time)?;
        w.write_u64::<LE>(d.krylov_dim as u64)?;
        w.write_f64::<LE>(d.krylov_error)?;
        w.write_f64::<LE>(d.r2_bound)?;
        w.write_f64::<LE>(d.infidelity_bound)?;
        w.write_f64::<LE>(d.discarded_weight)?;
        w.write_f64::<LE>(d.vector_discarded)?;
        w.write_u64::<LE>(d.max_bond as u64)?;
    }
    w.write_u8(rec.complete as u8)?;
    Ok(())
}

fn read_record(r: &mut impl Read) -> Result<TrajectoryRecord> {
    let metadata: RunMetadata = serde_json::from_str(&read_str(r)?).map_err(|e| corrupt(e.to_string()))?;
    let ns = read_len(r)?;
    let mut samples = Vec::with_capacity(ns);
    for _ in 0..ns {
        let time = r.read_f64::<LE>()?;
        let nk = read_len(r)?;
        let mut values = BTreeMap::new();
        for _ in 0..nk {
            let k = read_str(r)?;
            let n = read_len(r)?;
            let v = (0..n).map(|_| r.read_f64::<LE>()).collect::<std::io::Result<Vec<_>>>()?;
            values.insert(k, v);
        }
        samples.push(Sample { time, values });
    }
    let nd = read_len(r)?;
    let mut steps = Vec::with_capacity(nd);
    for _ in 0..nd {
        steps.push(StepDiagnostics {
            time: r.read_f64::<LE>()?,
            krylov_dim: read_len(r)?,
            krylov_error: r.read_f64::<LE>()?,
            r2_bound: r.read_f64::<LE>()?,
            infidelity_bound: r.read_f64::<LE>()?,
            discarded_weight: r.read_f64::<LE>()?,
            vector_discarded: r.read_f64::<LE>()?,
            max_bond: read_len(r)?,
        });
    }
    let complete = r.read_u8()? != 0;
    Ok(TrajectoryRecord { metadata, samples, steps, complete })
}
