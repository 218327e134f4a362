use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::model::{ModelConfig, UapNet};
use super::params::{Group, ParameterStore, Tensor};
use super::NnetError;

const MAGIC: &[u8; 8] = b"UAPCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Which training stage produced a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Init = 0,
    Handoff = 1,
    Inspection = 2,
}

impl Stage {
    fn from_code(c: u8) -> Option<Self> {
        [Stage::Init, Stage::Handoff, Stage::Inspection].get(c as usize).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub stage: Stage,
    pub config: ModelConfig,
    pub store: ParameterStore,
}

impl Checkpoint {
    pub fn from_model(net: &UapNet, stage: Stage) -> Self {
        Self {
            stage,
            config: net.config.clone(),
            store: net.store.clone(),
        }
    }

    pub fn into_model(self) -> Result<UapNet, NnetError> {
        UapNet::with_store(self.config, &self.store)
    }
}

fn bad(m: impl Into<String>) -> NnetError {
    NnetError::Checkpoint(m.into())
}

pub fn write_checkpoint<W: Write>(w: &mut W, ck: &Checkpoint) -> Result<(), NnetError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(CHECKPOINT_VERSION)?;
    w.write_u8(ck.stage as u8)?;
    let json = serde_json::to_vec(&ck.config).map_err(|e| bad(e.to_string()))?;
    w.write_u32::<LE>(json.len() as u32)?;
    w.write_all(&json)?;
    for g in Group::ALL {
        w.write_u8(ck.store.is_frozen(g) as u8)?;
    }
    w.write_u32::<LE>(ck.store.len() as u32)?;
    for (_, p) in ck.store.iter() {
        w.write_u16::<LE>(p.name.len() as u16)?;
        w.write_all(p.name.as_bytes())?;
        w.write_u8(p.group.code())?;
        w.write_u8(p.tensor.shape.len() as u8)?;
        for &d in &p.tensor.shape {
            w.write_u32::<LE>(d as u32)?;
        }
        for &x in &p.tensor.data {
            w.write_f64::<LE>(x)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint, NnetError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = r.read_u32::<LE>()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let stage = Stage::from_code(r.read_u8()?).ok_or_else(|| bad("unknown stage"))?;
    let mut json = vec![0u8; r.read_u32::<LE>()? as usize];
    r.read_exact(&mut json)?;
    let config: ModelConfig = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    let mut store = ParameterStore::new();
    let mut frozen = [false; 5];
    for f in &mut frozen {
        *f = r.read_u8()? != 0;
    }
    let n = r.read_u32::<LE>()?;
    for _ in 0..n {
        let mut name = vec![0u8; r.read_u16::<LE>()? as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let group = Group::from_code(r.read_u8()?).ok_or_else(|| bad("unknown group"))?;
        let ndim = r.read_u8()? as usize;
        let shape = (0..ndim).map(|_| r.read_u32::<LE>().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let mut data = vec![0.0; len];
        r.read_f64_into::<LE>(&mut data)?;
        store.add(&name, group, Tensor::new(shape, data)?)?;
    }
    for (g, f) in Group::ALL.into_iter().zip(frozen) {
        store.set_frozen(g, f);
    }
    Ok(Checkpoint { stage, config, store })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), NnetError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut w, ck)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnetError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(&mut r)
}
