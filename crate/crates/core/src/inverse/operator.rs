//! Matrix-free fidelity operators
//! `(A u)(x) = s (eps0 / 2 pi) sum_y Re G(x - y, omega) u(y) h^3`.
//!
//! The kernel is translation invariant on the uniform grid, so it is
//! tabulated once per offset. [`DirectKernelOperator`] sums the table
//! directly; [`FftKernelOperator`] applies the same table as a zero-padded
//! circular convolution.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{Medium, Vec3, VoxelGrid};
use crate::greens::{convention_sign, re_green_ee};

/// Self-adjoint linear map on flat fields (three scalars per voxel, voxel
/// order of the grid).
pub trait FidelityOperator: Send + Sync {
    fn apply(&self, input: &[f64], output: &mut [f64]);

    /// Number of scalar unknowns.
    fn dim(&self) -> usize;
}

/// Entry order of the six independent components of a symmetric 3x3 block.
const SYM: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[inline]
fn sym_slot(a: usize, b: usize) -> usize {
    match (a.min(b), a.max(b)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

/// Kernel samples for every offset `d` with `|d_a| < n_a`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    dims: [usize; 3],
    /// `[offset][6]`, offsets indexed by `(d + n - 1)` per axis, x fastest.
    values: Vec<[f64; 6]>,
}

impl KernelTable {
    pub fn new(grid: &VoxelGrid, omega: f64, medium: &Medium) -> Result<Self> {
        let dims = grid.dims;
        let ext = dims.map(|n| 2 * n - 1);
        let h = grid.spacing;
        let scale = convention_sign() * medium.epsilon0 / (2.0 * PI) * grid.voxel_volume();
        let mut values = Vec::with_capacity(ext[0] * ext[1] * ext[2]);
        for k in 0..ext[2] {
            for j in 0..ext[1] {
                for i in 0..ext[0] {
                    let d = Vec3::new(
                        (i as f64 - (dims[0] - 1) as f64) * h,
                        (j as f64 - (dims[1] - 1) as f64) * h,
                        (k as f64 - (dims[2] - 1) as f64) * h,
                    );
                    let m = re_green_ee(&d, omega, medium)? * scale;
                    values.push(SYM.map(|(a, b)| m[(a, b)]));
                }
            }
        }
        Ok(Self { dims, values })
    }

    /// Block for offset `d = target - source` (voxel units).
    #[inline]
    pub fn block(&self, d: [isize; 3]) -> &[f64; 6] {
        let ext = self.dims.map(|n| 2 * n - 1);
        let i = (d[0] + self.dims[0] as isize - 1) as usize;
        let j = (d[1] + self.dims[1] as isize - 1) as usize;
        let k = (d[2] + self.dims[2] as isize - 1) as usize;
        &self.values[i + ext[0] * (j + ext[1] * k)]
    }
}

/// Direct O(n^2) summation against the tabulated kernel.
pub struct DirectKernelOperator {
    grid: VoxelGrid,
    table: KernelTable,
}

impl DirectKernelOperator {
    pub fn new(grid: &VoxelGrid, omega: f64, medium: &Medium) -> Result<Self> {
        Ok(Self {
            grid: *grid,
            table: KernelTable::new(grid, omega, medium)?,
        })
    }
}

impl FidelityOperator for DirectKernelOperator {
    fn apply(&self, input: &[f64], output: &mut [f64]) {
        let g = &self.grid;
        let [nx, ny, nz] = g.dims.map(|n| n as isize);
        output.par_chunks_mut(3).enumerate().for_each(|(t, out)| {
            let [ti, tj, tk] = g.ijk(t).map(|v| v as isize);
            let mut acc = [0.0; 3];
            let mut s = 0;
            for sk in 0..nz {
                for sj in 0..ny {
                    for si in 0..nx {
                        let u = &input[3 * s..3 * s + 3];
                        s += 1;
                        if u[0] == 0.0 && u[1] == 0.0 && u[2] == 0.0 {
                            continue;
                        }
                        let m = self.table.block([ti - si, tj - sj, tk - sk]);
                        acc[0] += m[0] * u[0] + m[3] * u[1] + m[4] * u[2];
                        acc[1] += m[3] * u[0] + m[1] * u[1] + m[5] * u[2];
                        acc[2] += m[4] * u[0] + m[5] * u[1] + m[2] * u[2];
                    }
                }
            }
            out.copy_from_slice(&acc);
        });
    }

    fn dim(&self) -> usize {
        3 * self.grid.len()
    }
}

/// In-place 3D FFT over a `px * py * pz` array (x fastest).
struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims,
            fwd: dims.map(|n| planner.plan_fft_forward(n)),
            inv: dims.map(|n| planner.plan_fft_inverse(n)),
        }
    }

    fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let [px, py, pz] = self.dims;
        let plans = if inverse { &self.inv } else { &self.fwd };
        // x lines are contiguous
        plans[0].process(data);
        let mut line = vec![Complex64::new(0.0, 0.0); py.max(pz)];
        for k in 0..pz {
            for i in 0..px {
                let base = i + px * py * k;
                for j in 0..py {
                    line[j] = data[base + px * j];
                }
                plans[1].process(&mut line[..py]);
                for j in 0..py {
                    data[base + px * j] = line[j];
                }
            }
        }
        let plane = px * py;
        for j in 0..py {
            for i in 0..px {
                let base = i + px * j;
                for k in 0..pz {
                    line[k] = data[base + plane * k];
                }
                plans[2].process(&mut line[..pz]);
                for k in 0..pz {
                    data[base + plane * k] = line[k];
                }
            }
        }
    }
}

/// Convolution-theorem application of the tabulated kernel.
pub struct FftKernelOperator {
    grid: VoxelGrid,
    fft: Fft3,
    /// Transformed kernel components, `[6][padded]`.
    spectra: Vec<Vec<Complex64>>,
}

impl FftKernelOperator {
    pub fn new(grid: &VoxelGrid, omega: f64, medium: &Medium) -> Result<Self> {
        let table = KernelTable::new(grid, omega, medium)?;
        Ok(Self::from_table(grid, &table))
    }

    pub fn from_table(grid: &VoxelGrid, table: &KernelTable) -> Self {
        let pad = grid.dims.map(|n| 2 * n);
        let fft = Fft3::new(pad);
        let n = grid.dims.map(|v| v as isize);
        let mut spectra = vec![vec![Complex64::new(0.0, 0.0); fft.len()]; 6];
        for dk in -(n[2] - 1)..n[2] {
            for dj in -(n[1] - 1)..n[1] {
                for di in -(n[0] - 1)..n[0] {
                    let m = table.block([di, dj, dk]);
                    let wrap = |d: isize, p: usize| d.rem_euclid(p as isize) as usize;
                    let idx = wrap(di, pad[0]) + pad[0] * (wrap(dj, pad[1]) + pad[1] * wrap(dk, pad[2]));
                    for c in 0..6 {
                        spectra[c][idx] = Complex64::new(m[c], 0.0);
                    }
                }
            }
        }
        for s in spectra.iter_mut() {
            fft.run(s, false);
        }
        Self {
            grid: *grid,
            fft,
            spectra,
        }
    }
}

impl FidelityOperator for FftKernelOperator {
    fn apply(&self, input: &[f64], output: &mut [f64]) {
        let [nx, ny, nz] = self.grid.dims;
        let [px, py, _] = self.fft.dims;
        let len = self.fft.len();
        let comps: Vec<Vec<Complex64>> = (0..3)
            .into_par_iter()
            .map(|c| {
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                for k in 0..nz {
                    for j in 0..ny {
                        for i in 0..nx {
                            let v = i + nx * (j + ny * k);
                            buf[i + px * (j + py * k)] = Complex64::new(input[3 * v + c], 0.0);
                        }
                    }
                }
                self.fft.run(&mut buf, false);
                buf
            })
            .collect();
        let products: Vec<Vec<Complex64>> = (0..3)
            .into_par_iter()
            .map(|a| {
                let mut out = vec![Complex64::new(0.0, 0.0); len];
                for (b, comp) in comps.iter().enumerate() {
                    let k = &self.spectra[sym_slot(a, b)];
                    for ((o, kv), uv) in out.iter_mut().zip(k).zip(comp) {
                        *o += kv * uv;
                    }
                }
                self.fft.run(&mut out, true);
                out
            })
            .collect();
        let norm = 1.0 / len as f64;
        for (a, buf) in products.iter().enumerate() {
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let v = i + nx * (j + ny * k);
                        output[3 * v + a] = buf[i + px * (j + py * k)].re * norm;
                    }
                }
            }
        }
    }

    fn dim(&self) -> usize {
        3 * self.grid.len()
    }
}

/// Diagonal operator on the flat unknown; used for small test instances.
pub struct DiagonalOperator {
    pub diag: Vec<f64>,
}

impl FidelityOperator for DiagonalOperator {
    fn apply(&self, input: &[f64], output: &mut [f64]) {
        for ((o, d), u) in output.iter_mut().zip(&self.diag).zip(input) {
            *o = d * u;
        }
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }
}

/// Which implementation backs the Green's kernel operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelPath {
    Direct,
    #[default]
    Fft,
}

pub fn green_operator(
    grid: &VoxelGrid,
    omega: f64,
    medium: &Medium,
    path: KernelPath,
) -> Result<Box<dyn FidelityOperator>> {
    if omega == 0.0 {
        return Err(Error::Domain("fidelity operator needs omega != 0".into()));
    }
    Ok(match path {
        KernelPath::Direct => Box::new(DirectKernelOperator::new(grid, omega, medium)?),
        KernelPath::Fft => Box::new(FftKernelOperator::new(grid, omega, medium)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn fft_path_matches_direct() {
        let g = VoxelGrid::centered([0.0; 3], 0.12, [5, 4, 6]).unwrap();
        let m = Medium::default();
        let d = DirectKernelOperator::new(&g, 9.0, &m).unwrap();
        let f = FftKernelOperator::new(&g, 9.0, &m).unwrap();
        let u = random(3 * g.len(), 3);
        let mut a = vec![0.0; u.len()];
        let mut b = vec![0.0; u.len()];
        d.apply(&u, &mut a);
        f.apply(&u, &mut b);
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(num / den < 1e-10, "{}", num / den);
    }

    #[test]
    fn impulse_gives_kernel_column() {
        let g = VoxelGrid::centered([0.0; 3], 0.1, [4, 4, 4]).unwrap();
        let m = Medium::default();
        let w = 6.0;
        let op = DirectKernelOperator::new(&g, w, &m).unwrap();
        let z0 = g.index(1, 2, 1);
        let mut u = vec![0.0; 3 * g.len()];
        u[3 * z0 + 2] = 1.0;
        let mut out = vec![0.0; u.len()];
        op.apply(&u, &mut out);
        let s = convention_sign() * m.epsilon0 / (2.0 * PI) * g.voxel_volume();
        for x in 0..g.len() {
            let k = re_green_ee(&(g.center(x) - g.center(z0)), w, &m).unwrap() * s;
            for a in 0..3 {
                assert!((out[3 * x + a] - k[(a, 2)]).abs() <= 1e-15 * k.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn self_adjoint_on_random_pairs() {
        let g = VoxelGrid::centered([0.0; 3], 0.1, [5, 5, 5]).unwrap();
        let m = Medium::default();
        for path in [KernelPath::Direct, KernelPath::Fft] {
            let op = green_operator(&g, 11.0, &m, path).unwrap();
            for seed in 0..10 {
                let u = random(op.dim(), 2 * seed);
                let v = random(op.dim(), 2 * seed + 1);
                let mut au = vec![0.0; u.len()];
                let mut av = vec![0.0; u.len()];
                op.apply(&u, &mut au);
                op.apply(&v, &mut av);
                let l: f64 = au.iter().zip(&v).map(|(a, b)| a * b).sum();
                let r: f64 = u.iter().zip(&av).map(|(a, b)| a * b).sum();
                assert!((l - r).abs() <= 1e-10 * l.abs().max(r.abs()), "{l} {r}");
            }
        }
    }
}
