//! Snapshot records and the self-describing binary dataset file.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::percept::VoxelGrid;
use crate::scene::VIEW_COUNT;

pub const MAGIC: [u8; 8] = *b"UAPDSET\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("record {record} disagrees with header: {what}")]
    Inconsistent { record: usize, what: String },
}

/// Normalized and downscaled views of one UAV, `[view][channel][row][col]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ImageTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; VIEW_COUNT * channels * height * width],
        }
    }

    pub fn view_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn view(&self, v: usize) -> &[f32] {
        let n = self.view_len();
        &self.data[v * n..(v + 1) * n]
    }

    pub fn view_mut(&mut self, v: usize) -> &mut [f32] {
        let n = self.view_len();
        &mut self.data[v * n..(v + 1) * n]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleObservation {
    /// False when the LiDAR block is missing; `voxels` is then all zero.
    pub lidar_present: bool,
    pub voxels: VoxelGrid,
    /// UAV indices in slot order.
    pub relays: Vec<usize>,
    /// Achievable rates in canonical link order.
    pub rates: Vec<f64>,
    /// `[slot][k]` backhaul leg rates.
    pub backhaul: Vec<Vec<f64>>,
    /// `[slot]` access leg rates.
    pub access: Vec<f64>,
    /// Oracle best link κ*.
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavObservation {
    /// False when the whole image block is missing.
    pub present: bool,
    pub view_present: [bool; VIEW_COUNT],
    pub images: ImageTensor,
    /// Vehicles per lane inside the footprint.
    pub counts: Vec<u32>,
}

/// Everything observed at one timestep. Each vehicle is one handoff sample
/// and shares the UAV observations of its snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub timestep: u64,
    pub vehicles: Vec<VehicleObservation>,
    pub uavs: Vec<UavObservation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub num_rsus: u32,
    pub num_uavs: u32,
    pub num_vehicles: u32,
    pub num_lanes: u32,
    pub relays: u32,
    pub num_links: u32,
    pub grid_shape: [u32; 3],
    /// views, channels, height, width
    pub image_shape: [u32; 4],
    pub rng_seed: u64,
    pub config_hash: [u8; 32],
    pub num_records: u64,
}

impl DatasetHeader {
    pub fn check(&self, i: usize, r: &SampleRecord) -> Result<(), DatasetError> {
        let bad = |what: String| Err(DatasetError::Inconsistent { record: i, what });
        if r.vehicles.len() != self.num_vehicles as usize {
            return bad(format!("{} vehicles", r.vehicles.len()));
        }
        if r.uavs.len() != self.num_uavs as usize {
            return bad(format!("{} uavs", r.uavs.len()));
        }
        let k = self.num_rsus as usize;
        let grid = self.grid_shape.map(|d| d as usize);
        for v in &r.vehicles {
            if v.rates.len() != self.num_links as usize || v.relays.len() != self.relays as usize {
                return bad(format!("{} links with {} relays", v.rates.len(), v.relays.len()));
            }
            if v.label >= v.rates.len() {
                return bad(format!("label {} out of range", v.label));
            }
            if v.voxels.shape != grid {
                return bad(format!("grid shape {:?}", v.voxels.shape));
            }
            if v.access.len() != v.relays.len() || v.backhaul.len() != v.relays.len() || v.backhaul.iter().any(|b| b.len() != k)
            {
                return bad("leg table shape".into());
            }
        }
        let [_, c, h, w] = self.image_shape.map(|d| d as usize);
        for u in &r.uavs {
            if (u.images.channels, u.images.height, u.images.width) != (c, h, w) {
                return bad("image shape".into());
            }
            if u.counts.len() != self.num_lanes as usize {
                return bad(format!("{} lane counts", u.counts.len()));
            }
        }
        Ok(())
    }
}

fn write_header<W: Write>(w: &mut W, h: &DatasetHeader) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_u32::<LE>(h.version)?;
    for x in [h.num_rsus, h.num_uavs, h.num_vehicles, h.num_lanes, h.relays, h.num_links] {
        w.write_u32::<LE>(x)?;
    }
    for x in h.grid_shape.iter().chain(&h.image_shape) {
        w.write_u32::<LE>(*x)?;
    }
    w.write_u64::<LE>(h.rng_seed)?;
    w.write_all(&h.config_hash)?;
    w.write_u64::<LE>(h.num_records)
}

fn read_header<R: Read>(r: &mut R) -> Result<DatasetHeader, DatasetError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = r.read_u32::<LE>()?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mut u = [0u32; 13];
    for x in u.iter_mut() {
        *x = r.read_u32::<LE>()?;
    }
    let rng_seed = r.read_u64::<LE>()?;
    let mut config_hash = [0u8; 32];
    r.read_exact(&mut config_hash)?;
    Ok(DatasetHeader {
        version,
        num_rsus: u[0],
        num_uavs: u[1],
        num_vehicles: u[2],
        num_lanes: u[3],
        relays: u[4],
        num_links: u[5],
        grid_shape: [u[6], u[7], u[8]],
        image_shape: [u[9], u[10], u[11], u[12]],
        rng_seed,
        config_hash,
        num_records: r.read_u64::<LE>()?,
    })
}

fn write_record<W: Write>(w: &mut W, rec: &SampleRecord) -> std::io::Result<()> {
    w.write_u64::<LE>(rec.timestep)?;
    for v in &rec.vehicles {
        w.write_u8(v.lidar_present as u8)?;
        // sparse voxels: (flat index, value) of every non-zero cell
        let nz: Vec<(usize, i8)> = v.voxels.data.iter().enumerate().filter(|(_, &x)| x != 0).map(|(i, &x)| (i, x)).collect();
        w.write_u32::<LE>(nz.len() as u32)?;
        for (i, x) in nz {
            w.write_u32::<LE>(i as u32)?;
            w.write_i8(x)?;
        }
        for &m in &v.relays {
            w.write_u32::<LE>(m as u32)?;
        }
        for &x in v.rates.iter().chain(v.backhaul.iter().flatten()).chain(&v.access) {
            w.write_f64::<LE>(x)?;
        }
        w.write_u32::<LE>(v.label as u32)?;
    }
    for u in &rec.uavs {
        w.write_u8(u.present as u8)?;
        for &p in &u.view_present {
            w.write_u8(p as u8)?;
        }
        for &x in &u.images.data {
            w.write_f32::<LE>(x)?;
        }
        for &c in &u.counts {
            w.write_u32::<LE>(c)?;
        }
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    (0..n).map(|_| r.read_f64::<LE>()).collect()
}

fn read_record<R: Read>(r: &mut R, h: &DatasetHeader, index: usize) -> Result<SampleRecord, DatasetError> {
    let timestep = r.read_u64::<LE>()?;
    let grid = h.grid_shape.map(|d| d as usize);
    let k = h.num_rsus as usize;
    let slots = h.relays as usize;
    let mut vehicles = Vec::with_capacity(h.num_vehicles as usize);
    for _ in 0..h.num_vehicles {
        let lidar_present = r.read_u8()? != 0;
        let mut voxels = VoxelGrid::zeros(grid);
        let nnz = r.read_u32::<LE>()?;
        for _ in 0..nnz {
            let i = r.read_u32::<LE>()? as usize;
            let x = r.read_i8()?;
            let cell = voxels.data.get_mut(i).ok_or(DatasetError::Inconsistent {
                record: index,
                what: format!("voxel index {i} outside grid"),
            })?;
            *cell = x;
        }
        let relays = (0..slots).map(|_| r.read_u32::<LE>().map(|m| m as usize)).collect::<Result<_, _>>()?;
        let rates = read_f64s(r, h.num_links as usize)?;
        let backhaul = (0..slots).map(|_| read_f64s(r, k)).collect::<Result<_, _>>()?;
        let access = read_f64s(r, slots)?;
        let label = r.read_u32::<LE>()? as usize;
        vehicles.push(VehicleObservation {
            lidar_present,
            voxels,
            relays,
            rates,
            backhaul,
            access,
            label,
        });
    }
    let [_, c, ih, iw] = h.image_shape.map(|d| d as usize);
    let mut uavs = Vec::with_capacity(h.num_uavs as usize);
    for _ in 0..h.num_uavs {
        let present = r.read_u8()? != 0;
        let mut view_present = [false; VIEW_COUNT];
        for p in view_present.iter_mut() {
            *p = r.read_u8()? != 0;
        }
        let mut images = ImageTensor::zeros(c, ih, iw);
        r.read_f32_into::<LE>(&mut images.data)?;
        let counts = (0..h.num_lanes).map(|_| r.read_u32::<LE>()).collect::<Result<_, _>>()?;
        uavs.push(UavObservation {
            present,
            view_present,
            images,
            counts,
        });
    }
    let rec = SampleRecord {
        timestep,
        vehicles,
        uavs,
    };
    h.check(index, &rec)?;
    Ok(rec)
}

/// Writes the header with `records.len()` as its count, then every record.
pub fn write_dataset<W: Write>(w: &mut W, header: &DatasetHeader, records: &[SampleRecord]) -> Result<(), DatasetError> {
    let header = DatasetHeader {
        num_records: records.len() as u64,
        ..header.clone()
    };
    for (i, r) in records.iter().enumerate() {
        header.check(i, r)?;
    }
    write_header(w, &header)?;
    for r in records {
        write_record(w, r)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<(DatasetHeader, Vec<SampleRecord>), DatasetError> {
    let header = read_header(r)?;
    let records = (0..header.num_records as usize)
        .map(|i| read_record(r, &header, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(DatasetError::Inconsistent {
            record: records.len(),
            what: "trailing bytes after the last record".into(),
        });
    }
    Ok((header, records))
}

pub fn read_header_only<R: Read>(r: &mut R) -> Result<DatasetHeader, DatasetError> {
    read_header(r)
}
