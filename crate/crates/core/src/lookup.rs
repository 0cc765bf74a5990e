//! Precomputed merge solutions on a regular (m, kappa) grid with bilinear
//! interpolation, plus a little-endian binary file format for caching.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::merge::{solve_merge_gss, wd_normalized, MergeInstance, MergeSolution};

const MAGIC: &[u8; 8] = b"BSVMGRID";
const VERSION: u32 = 1;

/// G x G grid of precomputed merge solutions. Nodes sit at i/(G-1) in both
/// coordinates, endpoints included; the kappa = 0 node is clamped to the
/// smallest positive normal because kappa = 0 never occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupGrid {
    g: usize,
    build_eps: f64,
    /// Row-major, m-index major: h[i*g + j] for node (m_i, kappa_j).
    h_values: Vec<f64>,
    wd_values: Vec<f64>,
}

impl LookupGrid {
    /// Solves every node with golden section search at `build_eps`.
    pub fn build(g: usize, build_eps: f64) -> LookupGrid {
        assert!(g >= 2, "grid needs at least 2 nodes per axis");
        assert!(build_eps > 0.0);
        let mut h_values = vec![0.0; g * g];
        let mut wd_values = vec![0.0; g * g];
        let gm1 = (g - 1) as f64;
        for i in 0..g {
            let m = i as f64 / gm1;
            for j in 0..g {
                let kappa = (j as f64 / gm1).max(f64::MIN_POSITIVE);
                let sol = solve_merge_gss(MergeInstance::new(m, kappa), build_eps);
                h_values[i * g + j] = sol.h;
                wd_values[i * g + j] = sol.wd_norm;
            }
        }
        LookupGrid {
            g,
            build_eps,
            h_values,
            wd_values,
        }
    }

    pub fn size(&self) -> usize {
        self.g
    }

    pub fn build_eps(&self) -> f64 {
        self.build_eps
    }

    /// Stored values at a node (test and dump access).
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.h_values[i * self.g + j], self.wd_values[i * self.g + j])
    }

    /// Node coordinate along either axis.
    pub fn node_coord(&self, i: usize) -> f64 {
        i as f64 / (self.g - 1) as f64
    }

    fn bilerp(&self, values: &[f64], m: f64, kappa: f64) -> f64 {
        let gm1 = (self.g - 1) as f64;
        let x = m * gm1;
        let y = kappa * gm1;
        let i = (x.floor() as usize).min(self.g - 2);
        let j = (y.floor() as usize).min(self.g - 2);
        let tx = x - i as f64;
        let ty = y - j as f64;
        let v00 = values[i * self.g + j];
        let v01 = values[i * self.g + j + 1];
        let v10 = values[(i + 1) * self.g + j];
        let v11 = values[(i + 1) * self.g + j + 1];
        // interpolate in m first, then kappa
        let lo = v00 + tx * (v10 - v00);
        let hi = v01 + tx * (v11 - v01);
        lo + ty * (hi - lo)
    }

    /// Interpolated blend weight, clamped to [0, 1].
    pub fn interp_h(&self, inst: MergeInstance) -> f64 {
        self.bilerp(&self.h_values, inst.m, inst.kappa).clamp(0.0, 1.0)
    }

    /// Interpolated normalized weight degradation, clamped at 0.
    pub fn interp_wd(&self, inst: MergeInstance) -> f64 {
        self.bilerp(&self.wd_values, inst.m, inst.kappa).max(0.0)
    }

    /// Serialized byte image: magic, version, G, build_eps, h matrix, wd matrix.
    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 16 * self.g * self.g);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.g as u32).to_le_bytes());
        out.extend_from_slice(&self.build_eps.to_le_bytes());
        for v in self.h_values.iter().chain(self.wd_values.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<LookupGrid> {
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if bytes.len() < 24 {
            return Err(Error::Grid("file shorter than header".into()));
        }
        if &bytes[0..8] != MAGIC {
            return Err(Error::Grid("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Grid(format!("unsupported version {version}")));
        }
        let g = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        if g < 2 {
            return Err(Error::Grid(format!("grid size {g} too small")));
        }
        let build_eps = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let expected = 24 + 16 * g * g;
        if bytes.len() != expected {
            return Err(Error::Grid(format!(
                "expected {expected} bytes for G={g}, found {}",
                bytes.len()
            )));
        }
        let read_matrix = |offset: usize| {
            bytes[offset..offset + 8 * g * g]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<f64>>()
        };
        let h_values = read_matrix(24);
        let wd_values = read_matrix(24 + 8 * g * g);
        Ok(LookupGrid {
            g,
            build_eps,
            h_values,
            wd_values,
        })
    }
}

/// Lookup solve that trusts the interpolated h: the degradation is then
/// recomputed in closed form at that h.
pub fn solve_merge_lookup_h(grid: &LookupGrid, inst: MergeInstance) -> MergeSolution {
    let h = grid.interp_h(inst);
    MergeSolution {
        h,
        wd_norm: wd_normalized(inst.m, inst.kappa, h),
    }
}

/// Lookup solve that trusts the interpolated degradation; h is interpolated
/// too so the caller can perform the merge.
pub fn solve_merge_lookup_wd(grid: &LookupGrid, inst: MergeInstance) -> MergeSolution {
    MergeSolution {
        h: grid.interp_h(inst),
        wd_norm: grid.interp_wd(inst),
    }
}
