use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{AtomicGrid, InputGrid};
use crate::codec::{hex, Reader, Writer};
use crate::error::{Error, Result};
use crate::flow::{ArtifactMeta, FlowModel, DIM};
use crate::primitives::path::for_each_segment_point;
use crate::primitives::{reconstruct, PrimitiveParams};
use crate::vehicle::Obstacle;

pub const CACHE_MAGIC: &[u8; 4] = b"GPMC";
pub const CACHE_VERSION: u16 = 1;

/// Maps prior points to primitives. The cache builder only needs this much of
/// a flow, which lets tests substitute simple stand-ins.
pub trait PrimitiveSource: Sync {
    fn primitive(&self, z: &[f64; DIM]) -> PrimitiveParams;
    fn checksum(&self) -> [u8; 32];
}

impl PrimitiveSource for FlowModel {
    fn primitive(&self, z: &[f64; DIM]) -> PrimitiveParams {
        PrimitiveParams::from_raw(self.forward(z).0)
    }

    fn checksum(&self) -> [u8; 32] {
        FlowModel::checksum(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    /// Collision sampling resolution along each path segment, meters.
    pub ds: f64,
    /// Samples per reconstructed primitive.
    pub n_recon: usize,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            ds: 0.01,
            n_recon: 41,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskCache {
    k: usize,
    grid: AtomicGrid,
    ds: f64,
    n_recon: usize,
    model_checksum: [u8; 32],
    meta: ArtifactMeta,
    words: usize,
    /// `grid.len()` arrays of `words` little-endian 64-bit words each.
    bits: Vec<u64>,
}

/// Union of atomic-map bit arrays: the cells to reject this tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectMask {
    bits: Vec<u64>,
}

impl RejectMask {
    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.bits[cell >> 6] >> (cell & 63) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }
}

/// Every atomic map hit by `path_points` (body frame), via the same strict
/// disc test the world collision check uses.
fn hit_atoms(grid: &AtomicGrid, points: &[(f64, f64)], out: &mut Vec<u32>) {
    let (sx, sy) = grid.spacing();
    let r = grid.r_atom;
    for &(x, y) in points {
        if grid.distance_to_roi(x, y) >= r + 1e-9 {
            continue;
        }
        let Some((x0, x1)) = AtomicGrid::axis_range(x, r, grid.x_min, sx, grid.nx) else {
            continue;
        };
        let Some((y0, y1)) = AtomicGrid::axis_range(y, r, grid.y_min, sy, grid.ny) else {
            continue;
        };
        for ix in x0..=x1 {
            for iy in y0..=y1 {
                let (gx, gy) = grid.point_xy(ix, iy);
                if Obstacle::new(gx, gy, r).contains(x, y) {
                    out.push(grid.index(ix, iy) as u32);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
}

/// Densified body-frame points of a primitive, in collision-check order.
fn path_points(theta: &PrimitiveParams, cfg: &BuildConfig) -> Vec<(f64, f64)> {
    let path = reconstruct(theta, cfg.n_recon).expect("projected parameters are valid");
    let s = path.samples();
    let mut pts = vec![(s[0].x, s[0].y)];
    for w in s.windows(2) {
        for_each_segment_point(&w[0], &w[1], cfg.ds, |x, y| pts.push((x, y)));
    }
    pts
}

/// Builds the per-atomic-map bit arrays for `source` by evaluating every cell
/// centroid. Output does not depend on the worker count.
pub fn build_cache(
    source: &dyn PrimitiveSource,
    igrid: &InputGrid,
    agrid: &AtomicGrid,
    cfg: &BuildConfig,
    meta: ArtifactMeta,
) -> Result<MaskCache> {
    agrid.validate()?;
    if !(cfg.ds > 0.0 && cfg.ds.is_finite()) || cfg.n_recon < 2 {
        return Err(Error::Config("cache: ds must be positive and n_recon >= 2".into()));
    }
    let n_cells = igrid.n_cells();
    let run = || -> Vec<Vec<u32>> {
        (0..n_cells)
            .into_par_iter()
            .with_min_len(64)
            .map(|cell| {
                let theta = source.primitive(&igrid.centroid(cell));
                let mut hits = Vec::new();
                hit_atoms(agrid, &path_points(&theta, cfg), &mut hits);
                hits
            })
            .collect()
    };
    let per_cell = if cfg.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cache: worker pool: {e}")))?
            .install(run)
    };
    let words = n_cells.div_ceil(64);
    let mut bits = vec![0u64; agrid.len() * words];
    for (cell, hits) in per_cell.iter().enumerate() {
        for &a in hits {
            bits[a as usize * words + (cell >> 6)] |= 1 << (cell & 63);
        }
    }
    Ok(MaskCache {
        k: igrid.bins(),
        grid: *agrid,
        ds: cfg.ds,
        n_recon: cfg.n_recon,
        model_checksum: source.checksum(),
        meta,
        words,
        bits,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheSummary {
    pub bins: usize,
    pub cells: usize,
    pub atomic_maps: usize,
    pub grid: AtomicGrid,
    pub ds: f64,
    pub n_recon: usize,
    pub file_bytes: usize,
    pub model_checksum: String,
    pub config_hash: String,
    pub tool_version: String,
    pub total_set: usize,
    pub min_set: usize,
    pub max_set: usize,
    pub mean_set: f64,
    pub empty_maps: usize,
}

impl fmt::Display for CacheSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.grid;
        writeln!(f, "bins per dim      {}", self.bins)?;
        writeln!(f, "cells             {}", self.cells)?;
        writeln!(f, "atomic maps       {} ({} x {})", self.atomic_maps, g.nx, g.ny)?;
        writeln!(f, "roi               x [{}, {}] y [{}, {}]", g.x_min, g.x_max, g.y_min, g.y_max)?;
        writeln!(f, "r_atom            {}", g.r_atom)?;
        writeln!(f, "ds / n_recon      {} / {}", self.ds, self.n_recon)?;
        writeln!(f, "file bytes        {}", self.file_bytes)?;
        writeln!(f, "model checksum    {}", self.model_checksum)?;
        writeln!(f, "config hash       {}", self.config_hash)?;
        writeln!(f, "tool version      {}", self.tool_version)?;
        writeln!(f, "set bits          {}", self.total_set)?;
        writeln!(
            f,
            "per map popcount  min {} mean {:.1} max {}",
            self.min_set, self.mean_set, self.max_set
        )?;
        write!(f, "empty maps        {}", self.empty_maps)
    }
}

impl MaskCache {
    pub fn bins(&self) -> usize {
        self.k
    }

    pub fn n_cells(&self) -> usize {
        self.k.pow(DIM as u32)
    }

    pub fn atomic_grid(&self) -> &AtomicGrid {
        &self.grid
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn n_recon(&self) -> usize {
        self.n_recon
    }

    pub fn model_checksum(&self) -> [u8; 32] {
        self.model_checksum
    }

    pub fn meta(&self) -> &ArtifactMeta {
        &self.meta
    }

    pub fn input_grid(&self) -> InputGrid {
        InputGrid::new(self.k).expect("validated at build/load")
    }

    fn map_words(&self, atom: usize) -> &[u64] {
        &self.bits[atom * self.words..(atom + 1) * self.words]
    }

    pub fn bit(&self, atom: usize, cell: usize) -> bool {
        self.map_words(atom)[cell >> 6] >> (cell & 63) & 1 == 1
    }

    pub fn popcount(&self, atom: usize) -> usize {
        self.map_words(atom).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Errors unless the cache was built for `model`.
    pub fn check_model(&self, model: &dyn PrimitiveSource) -> Result<()> {
        let m = model.checksum();
        if m != self.model_checksum {
            return Err(Error::ChecksumMismatch {
                cache: hex(&self.model_checksum),
                model: hex(&m),
            });
        }
        Ok(())
    }

    /// Bitwise OR of the selected atomic maps.
    pub fn rejected_cells(&self, atoms: &[usize]) -> RejectMask {
        let mut bits = vec![0u64; self.words];
        for &a in atoms {
            for (acc, w) in bits.iter_mut().zip(self.map_words(a)) {
                *acc |= w;
            }
        }
        RejectMask { bits }
    }

    fn map_bytes(&self) -> usize {
        self.n_cells().div_ceil(8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(CACHE_MAGIC);
        w.u16(CACHE_VERSION);
        w.u32(self.k as u32);
        w.u32(DIM as u32);
        w.u32(self.grid.nx as u32);
        w.u32(self.grid.ny as u32);
        w.f64s(&[
            self.grid.x_min,
            self.grid.x_max,
            self.grid.y_min,
            self.grid.y_max,
            self.grid.r_atom,
            self.ds,
        ]);
        w.u32(self.n_recon as u32);
        w.bytes(&self.model_checksum);
        w.bytes(&self.meta.config_hash);
        w.str16(&self.meta.tool_version);
        let nb = self.map_bytes();
        for atom in 0..self.grid.len() {
            let bytes: Vec<u8> = self.map_words(atom).iter().flat_map(|x| x.to_le_bytes()).collect();
            w.bytes(&bytes[..nb]);
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        const WHAT: &str = "mask cache";
        let mut r = Reader::new(WHAT, data);
        r.magic(CACHE_MAGIC)?;
        let version = r.u16()?;
        if version != CACHE_VERSION {
            return Err(Error::Version {
                what: WHAT,
                found: version,
                expected: CACHE_VERSION,
            });
        }
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if dim != DIM {
            return Err(Error::format(WHAT, format!("dimension {dim}, expected {DIM}")));
        }
        InputGrid::new(k).map_err(|e| Error::format(WHAT, e.to_string()))?;
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let f = r.f64s(6)?;
        let grid = AtomicGrid {
            x_min: f[0],
            x_max: f[1],
            y_min: f[2],
            y_max: f[3],
            nx,
            ny,
            r_atom: f[4],
        };
        grid.validate().map_err(|e| Error::format(WHAT, e.to_string()))?;
        let ds = f[5];
        let n_recon = r.u32()? as usize;
        let model_checksum = r.array::<32>()?;
        let config_hash = r.array::<32>()?;
        let tool_version = r.str16()?;
        let n_cells = k.pow(DIM as u32);
        let nb = n_cells.div_ceil(8);
        let words = n_cells.div_ceil(64);
        if r.remaining() != grid.len() * nb {
            return Err(Error::format(
                WHAT,
                format!("expected {} bytes of bit arrays, found {}", grid.len() * nb, r.remaining()),
            ));
        }
        let mut bits = vec![0u64; grid.len() * words];
        for atom in 0..grid.len() {
            let raw = r.bytes(nb)?;
            for (i, chunk) in raw.chunks(8).enumerate() {
                let mut b = [0u8; 8];
                b[..chunk.len()].copy_from_slice(chunk);
                bits[atom * words + i] = u64::from_le_bytes(b);
            }
            // bits past the last cell must be clear
            if !n_cells.is_multiple_of(8) && raw[nb - 1] >> (n_cells % 8) != 0 {
                return Err(Error::format(WHAT, format!("padding bits set in map {atom}")));
            }
        }
        r.finish()?;
        Ok(Self {
            k,
            grid,
            ds,
            n_recon,
            model_checksum,
            meta: ArtifactMeta {
                config_hash,
                tool_version,
            },
            words,
            bits,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&data)
    }

    /// Size of the serialized header.
    pub fn header_bytes(&self) -> usize {
        4 + 2 + 4 * 4 + 6 * 8 + 4 + 32 + 32 + 2 + self.meta.tool_version.len()
    }

    pub fn summary(&self) -> CacheSummary {
        let counts: Vec<usize> = (0..self.grid.len()).map(|a| self.popcount(a)).collect();
        let total: usize = counts.iter().sum();
        CacheSummary {
            bins: self.k,
            cells: self.n_cells(),
            atomic_maps: self.grid.len(),
            grid: self.grid,
            ds: self.ds,
            n_recon: self.n_recon,
            file_bytes: self.header_bytes() + self.grid.len() * self.map_bytes(),
            model_checksum: hex(&self.model_checksum),
            config_hash: hex(&self.meta.config_hash),
            tool_version: self.meta.tool_version.clone(),
            total_set: total,
            min_set: counts.iter().copied().min().unwrap_or(0),
            max_set: counts.iter().copied().max().unwrap_or(0),
            mean_set: total as f64 / counts.len().max(1) as f64,
            empty_maps: counts.iter().filter(|&&c| c == 0).count(),
        }
    }
}
