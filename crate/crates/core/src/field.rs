//! Real periodic scalars on T² stored as Fourier coefficients.
//!
//! The spectrum of a field is allowed to live on a union of cosets of the
//! lattice `px·Z × py·Z`. Each coset `r + (px·Z × py·Z)` is stored as one
//! `mx × my` block of coefficients, `m = n / p`, so a field advected only by
//! shears whose frequencies are multiples of `p` never leaves its cosets and
//! costs `#cosets · mx · my` storage instead of `nx · ny`. The plain layout
//! (`p = 1`, one coset) is the ordinary FFT grid.
//!
//! Convention: θ(x, y) = Σ c(k) e^{i k·x}, so |θ|²_{L²} = (2π)² Σ |c(k)|².

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};
use crate::program::{Direction, StageSchedule};

/// Normalization tag written into binary dumps (amplitude convention above).
pub const NORMALIZATION_AMPLITUDE: u32 = 1;
const MAGIC: &[u8; 4] = b"SHLB";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub ny: usize,
    pub px: usize,
    pub py: usize,
    /// Coset representatives, each in (−p/2, p/2].
    pub residues: Vec<(i64, i64)>,
}

fn check_pow2(n: usize, what: &str) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "{what} must be a power of two >= 4, got {n}"
        )));
    }
    Ok(())
}

#[inline]
fn residue(k: i64, p: usize) -> i64 {
    let p = p as i64;
    let r = k.rem_euclid(p);
    if 2 * r > p {
        r - p
    } else {
        r
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Layout {
    pub fn plain(nx: usize, ny: usize) -> Result<Self> {
        check_pow2(nx, "nx")?;
        check_pow2(ny, "ny")?;
        Ok(Self {
            nx,
            ny,
            px: 1,
            py: 1,
            residues: vec![(0, 0)],
        })
    }

    pub fn lattice(
        nx: usize,
        ny: usize,
        px: usize,
        py: usize,
        residues: &[(i64, i64)],
    ) -> Result<Self> {
        check_pow2(nx, "nx")?;
        check_pow2(ny, "ny")?;
        if !px.is_power_of_two() || !py.is_power_of_two() || nx / px < 4 || ny / py < 4 {
            return Err(Error::Config(format!(
                "invalid lattice periods ({px},{py}) for {nx}x{ny}"
            )));
        }
        let mut res: Vec<(i64, i64)> = residues
            .iter()
            .map(|&(a, b)| (residue(a, px), residue(b, py)))
            .collect();
        res.sort_unstable();
        res.dedup();
        if res.is_empty() {
            return Err(Error::Config("layout needs at least one coset".into()));
        }
        Ok(Self {
            nx,
            ny,
            px,
            py,
            residues: res,
        })
    }

    /// The smallest storage that holds data with the given modes under the
    /// shears of `schedule`.
    pub fn for_program(
        nx: usize,
        ny: usize,
        schedule: &StageSchedule,
        modes: impl IntoIterator<Item = (i64, i64)>,
    ) -> Result<Self> {
        check_pow2(nx, "nx")?;
        check_pow2(ny, "ny")?;
        let period = |dir: Direction, n: usize| -> usize {
            let g = schedule
                .active_stages()
                .filter(|s| s.direction == dir && s.duration > 0.0)
                .fold(0u64, |g, s| gcd(g, s.frequency));
            if g == 0 {
                // nothing shears along this axis, so its spectrum never spreads
                return (n / 8).max(1);
            }
            // largest power of two dividing g, capped to keep blocks at least 8 wide
            let p = 1u64 << g.trailing_zeros();
            (p as usize).min(n / 8).max(1)
        };
        // vertical stages shift y by a function of x and so spread the x-spectrum
        let px = period(Direction::Vertical, nx);
        let py = period(Direction::Horizontal, ny);
        let modes: Vec<(i64, i64)> = modes.into_iter().collect();
        Self::lattice(nx, ny, px, py, &modes)
    }

    pub fn mx(&self) -> usize {
        self.nx / self.px
    }

    pub fn my(&self) -> usize {
        self.ny / self.py
    }

    pub fn block_len(&self) -> usize {
        self.mx() * self.my()
    }

    pub fn is_plain(&self) -> bool {
        self.px == 1 && self.py == 1
    }

    /// True x-wavenumbers of block `b` in FFT index order.
    pub fn kx_values(&self, b: usize) -> Vec<f64> {
        let (r, _) = self.residues[b];
        let m = self.mx();
        (0..m)
            .map(|i| (r + self.px as i64 * signed_index(i, m)) as f64)
            .collect()
    }

    pub fn ky_values(&self, b: usize) -> Vec<f64> {
        let (_, r) = self.residues[b];
        let m = self.my();
        (0..m)
            .map(|i| (r + self.py as i64 * signed_index(i, m)) as f64)
            .collect()
    }

    /// Block and in-block indices holding wavevector (kx, ky), if representable.
    pub fn locate(&self, kx: i64, ky: i64) -> Option<(usize, usize, usize)> {
        let rx = residue(kx, self.px);
        let ry = residue(ky, self.py);
        let b = self.residues.iter().position(|&r| r == (rx, ry))?;
        let (mx, my) = (self.mx() as i64, self.my() as i64);
        let lx = (kx - rx) / self.px as i64;
        let ly = (ky - ry) / self.py as i64;
        let inband = |l: i64, m: i64| l >= -(m / 2) && l < m - m / 2;
        if !inband(lx, mx) || !inband(ly, my) {
            return None;
        }
        Some((b, lx.rem_euclid(mx) as usize, ly.rem_euclid(my) as usize))
    }

    /// Smallest powers of two separating the cosets by sampling shifts.
    fn projection_orders(&self) -> (usize, usize) {
        let order = |vals: Vec<i64>, p: usize| -> usize {
            let mut r = 1usize;
            while r < p {
                let mut seen: Vec<i64> = vals.iter().map(|v| v.rem_euclid(r as i64)).collect();
                seen.sort_unstable();
                seen.dedup();
                let mut distinct: Vec<i64> = vals.clone();
                distinct.sort_unstable();
                distinct.dedup();
                if seen.len() == distinct.len() {
                    break;
                }
                r *= 2;
            }
            r.min(p)
        };
        let xs = self.residues.iter().map(|r| r.0).collect();
        let ys = self.residues.iter().map(|r| r.1).collect();
        (order(xs, self.px), order(ys, self.py))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    layout: Layout,
    blocks: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Deterministic sum: sequential within chunks, pairwise across chunk sums.
pub(crate) fn pairwise_sum(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    while v.len() > 1 {
        let mut next = Vec::with_capacity(v.len().div_ceil(2));
        for pair in v.chunks(2) {
            next.push(pair.iter().sum());
        }
        v = next;
    }
    v[0]
}

impl SpectralField {
    pub fn zeros(layout: Layout) -> Self {
        let len = layout.block_len();
        let blocks = vec![vec![Complex64::default(); len]; layout.residues.len()];
        Self { layout, blocks }
    }

    pub fn from_modes(layout: Layout, modes: &[(i64, i64, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(layout);
        for &(kx, ky, c) in modes {
            let (b, ix, iy) = f.layout.locate(kx, ky).ok_or_else(|| {
                Error::Config(format!(
                    "mode ({kx},{ky}) is not representable in this layout"
                ))
            })?;
            f.blocks[b][ix * f.layout.my() + iy] += c;
        }
        Ok(f)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn nx(&self) -> usize {
        self.layout.nx
    }

    pub fn ny(&self) -> usize {
        self.layout.ny
    }

    pub fn blocks(&self) -> &[Vec<Complex64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.blocks
    }

    pub fn coeff(&self, kx: i64, ky: i64) -> Complex64 {
        match self.layout.locate(kx, ky) {
            Some((b, ix, iy)) => self.blocks[b][ix * self.layout.my() + iy],
            None => Complex64::default(),
        }
    }

    /// All coefficients with modulus above `tol`, as (kx, ky, c).
    pub fn modes(&self, tol: f64) -> Vec<(i64, i64, Complex64)> {
        let mut out = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            let kx = self.layout.kx_values(b);
            let ky = self.layout.ky_values(b);
            let my = self.layout.my();
            for (idx, c) in block.iter().enumerate() {
                if c.norm() > tol {
                    out.push((kx[idx / my] as i64, ky[idx % my] as i64, *c));
                }
            }
        }
        out
    }

    /// Σ w(|k|²)|c|² with a fixed reduction order.
    pub fn spectral_sum(&self, w: impl Fn(f64) -> f64) -> f64 {
        let my = self.layout.my();
        let mut partial = Vec::with_capacity(self.blocks.len() * self.layout.mx());
        for (b, block) in self.blocks.iter().enumerate() {
            let kx = self.layout.kx_values(b);
            let ky = self.layout.ky_values(b);
            for (ix, row) in block.chunks(my).enumerate() {
                let kx2 = kx[ix] * kx[ix];
                let mut s = 0.0;
                for (iy, c) in row.iter().enumerate() {
                    s += w(kx2 + ky[iy] * ky[iy]) * c.norm_sqr();
                }
                partial.push(s);
            }
        }
        pairwise_sum(partial)
    }

    pub fn mean(&self) -> f64 {
        self.coeff(0, 0).re
    }

    pub fn l2(&self) -> f64 {
        TAU * self.spectral_sum(|_| 1.0).sqrt()
    }

    /// Homogeneous Sobolev norm |θ|_{Ḣ^s}. Negative orders need zero mean.
    pub fn sobolev(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            let scale = self.l2().max(f64::MIN_POSITIVE);
            if self.mean().abs() > 1e-12 * scale {
                return Err(Error::Config(format!(
                    "negative-order norm of a field with mean {}",
                    self.mean()
                )));
            }
        }
        let sum = if s == 1.0 {
            self.spectral_sum(|k2| k2)
        } else if s == 2.0 {
            self.spectral_sum(|k2| k2 * k2)
        } else if s == 0.0 {
            self.spectral_sum(|_| 1.0)
        } else {
            self.spectral_sum(|k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
        };
        Ok(TAU * sum.sqrt())
    }

    /// Inhomogeneous norm with weight (1 + |k|²)^s.
    pub fn sobolev_inhom(&self, s: f64) -> f64 {
        TAU * self.spectral_sum(|k2| (1.0 + k2).powf(s)).sqrt()
    }

    pub fn derivative(&self, axis: Axis) -> Self {
        let mut out = self.clone();
        let my = self.layout.my();
        for (b, block) in out.blocks.iter_mut().enumerate() {
            let kx = self.layout.kx_values(b);
            let ky = self.layout.ky_values(b);
            for (idx, c) in block.iter_mut().enumerate() {
                let k = match axis {
                    Axis::X => kx[idx / my],
                    Axis::Y => ky[idx % my],
                };
                *c *= Complex64::new(0.0, k);
            }
        }
        out
    }

    /// L² norm of ∂_axis θ.
    pub fn directional_h1(&self, axis: Axis) -> f64 {
        let my = self.layout.my();
        let mut partial = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            let kx = self.layout.kx_values(b);
            let ky = self.layout.ky_values(b);
            for (ix, row) in block.chunks(my).enumerate() {
                let mut s = 0.0;
                for (iy, c) in row.iter().enumerate() {
                    let k = match axis {
                        Axis::X => kx[ix],
                        Axis::Y => ky[iy],
                    };
                    s += k * k * c.norm_sqr();
                }
                partial.push(s);
            }
        }
        TAU * pairwise_sum(partial).sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        for block in &mut self.blocks {
            for c in block.iter_mut() {
                *c *= a;
            }
        }
    }

    /// self += a · other (layouts must agree).
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Config("layout mismatch".into()));
        }
        for (x, y) in self.blocks.iter_mut().zip(&other.blocks) {
            for (u, v) in x.iter_mut().zip(y) {
                *u += v * a;
            }
        }
        Ok(())
    }

    pub fn distance_l2(&self, other: &Self) -> Result<f64> {
        let mut d = self.clone();
        d.axpy(-1.0, other)?;
        Ok(d.l2())
    }

    /// Copy the modes representable in `target`, dropping the rest.
    pub fn relayout(&self, target: &Layout) -> Self {
        let mut out = Self::zeros(target.clone());
        let tmy = target.my();
        for (kx, ky, c) in self.modes(0.0) {
            if let Some((b, ix, iy)) = target.locate(kx, ky) {
                out.blocks[b][ix * tmy + iy] = c;
            }
        }
        out
    }

    /// Trigonometric interpolation at an arbitrary point, O(#modes).
    pub fn eval_point(&self, x: f64, y: f64) -> f64 {
        let my = self.layout.my();
        let mut s = 0.0;
        for (b, block) in self.blocks.iter().enumerate() {
            let kx = self.layout.kx_values(b);
            let ky = self.layout.ky_values(b);
            for (idx, c) in block.iter().enumerate() {
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let ph = kx[idx / my] * x + ky[idx % my] * y;
                s += c.re * ph.cos() - c.im * ph.sin();
            }
        }
        s
    }

    /// Project samples f(a, b) at x_a = 2πa/nx, y_b = 2πb/ny onto the layout.
    ///
    /// Only `Rx·Ry` of the `px·py` cell translates are sampled, where the `R`
    /// are the smallest powers of two that still separate the cosets.
    pub fn from_index_sampler(layout: Layout, f: impl Fn(usize, usize) -> f64) -> Self {
        let (rx, ry) = layout.projection_orders();
        let (mx, my) = (layout.mx(), layout.my());
        let sx = (layout.px / rx) * mx;
        let sy = (layout.py / ry) * my;
        let hx = TAU / layout.nx as f64;
        let hy = TAU / layout.ny as f64;
        let nres = layout.residues.len();
        // separable phase tables e^{-i r·x} per coset, shift and cell index
        let ex: Vec<Vec<Complex64>> = layout
            .residues
            .iter()
            .map(|&(r, _)| {
                (0..mx * rx)
                    .map(|i| {
                        Complex64::from_polar(
                            1.0,
                            -(r as f64) * hx * ((i / rx) + (i % rx) * sx) as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        let ey: Vec<Vec<Complex64>> = layout
            .residues
            .iter()
            .map(|&(_, r)| {
                (0..my * ry)
                    .map(|i| {
                        Complex64::from_polar(
                            1.0,
                            -(r as f64) * hy * ((i / ry) + (i % ry) * sy) as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        let mut blocks = vec![vec![Complex64::default(); mx * my]; nres];
        let mut values = vec![0.0; rx * ry];
        let norm = 1.0 / (rx * ry) as f64;
        for a in 0..mx {
            for b in 0..my {
                for s in 0..rx {
                    for t in 0..ry {
                        values[s * ry + t] = f(a + s * sx, b + t * sy);
                    }
                }
                for blk in 0..nres {
                    let exa = &ex[blk][a * rx..(a + 1) * rx];
                    let eyb = &ey[blk][b * ry..(b + 1) * ry];
                    let mut acc = Complex64::default();
                    for s in 0..rx {
                        let mut inner = Complex64::default();
                        for t in 0..ry {
                            inner += eyb[t] * values[s * ry + t];
                        }
                        acc += exa[s] * inner;
                    }
                    blocks[blk][a * my + b] = acc * norm;
                }
            }
        }
        let mut fft = Fft2::new(mx, my);
        for block in &mut blocks {
            fft.forward(block);
        }
        Self { layout, blocks }
    }

    /// Project a full x-major grid (`values[a*ny + b]`).
    pub fn from_grid(layout: Layout, values: &[f64]) -> Result<Self> {
        if values.len() != layout.nx * layout.ny {
            return Err(Error::Config("grid size does not match layout".into()));
        }
        let ny = layout.ny;
        Ok(Self::from_index_sampler(layout, |a, b| values[a * ny + b]))
    }

    pub fn grid_view(&self) -> GridView {
        let (mx, my) = (self.layout.mx(), self.layout.my());
        let mut fft = Fft2::new(mx, my);
        let phys = self
            .blocks
            .iter()
            .map(|b| {
                let mut d = b.clone();
                fft.inverse(&mut d);
                d
            })
            .collect();
        GridView {
            layout: self.layout.clone(),
            phys,
        }
    }

    /// Full grid samples, x-major. Intended for moderate sizes.
    pub fn to_grid(&self) -> Vec<f64> {
        let v = self.grid_view();
        let (nx, ny) = (self.layout.nx, self.layout.ny);
        let mut out = vec![0.0; nx * ny];
        let mut line = vec![0.0; ny];
        for a in 0..nx {
            v.line_y(a, &mut line);
            out[a * ny..(a + 1) * ny].copy_from_slice(&line);
        }
        out
    }

    /// Zero all modes outside the 2/3 band.
    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        let cx = self.layout.nx as f64 / 3.0;
        let cy = self.layout.ny as f64 / 3.0;
        let my = self.layout.my();
        for (b, block) in out.blocks.iter_mut().enumerate() {
            let kx = self.layout.kx_values(b);
            let ky = self.layout.ky_values(b);
            for (idx, c) in block.iter_mut().enumerate() {
                if kx[idx / my].abs() >= cx || ky[idx % my].abs() >= cy {
                    *c = Complex64::default();
                }
            }
        }
        out
    }

    /// Little-endian binary dump:
    /// magic "SHLB", u32 version, u32 normalization tag, u64 nx, ny, px, py,
    /// u64 block count, then per block i64 rx, ry and mx·my (re, im) f64 pairs
    /// in x-major FFT order. A plain field is a single block with residue (0,0).
    pub fn to_bytes(&self) -> Vec<u8> {
        let l = &self.layout;
        let mut out = Vec::with_capacity(64 + self.blocks.len() * (16 + 16 * l.block_len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&NORMALIZATION_AMPLITUDE.to_le_bytes());
        for v in [l.nx, l.ny, l.px, l.py, self.blocks.len()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for (b, block) in self.blocks.iter().enumerate() {
            out.extend_from_slice(&l.residues[b].0.to_le_bytes());
            out.extend_from_slice(&l.residues[b].1.to_le_bytes());
            for c in block {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(Error::Parse("truncated field dump".into()));
            }
            let (a, b) = r.split_at(n);
            r = b;
            Ok(a)
        };
        if take(4)? != MAGIC {
            return Err(Error::Parse("not a field dump (bad magic)".into()));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported dump version {version}")));
        }
        let tag = u32_at(take(4)?);
        if tag != NORMALIZATION_AMPLITUDE {
            return Err(Error::Parse(format!("unknown normalization tag {tag}")));
        }
        let mut hdr = [0usize; 5];
        for h in &mut hdr {
            *h = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        }
        let [nx, ny, px, py, nb] = hdr;
        if nb == 0 || nb > 1 << 20 {
            return Err(Error::Parse("implausible block count".into()));
        }
        let mut residues = Vec::with_capacity(nb);
        let mut raw = Vec::with_capacity(nb);
        let len = (nx / px.max(1)) * (ny / py.max(1));
        for _ in 0..nb {
            let rx = i64::from_le_bytes(take(8)?.try_into().unwrap());
            let ry = i64::from_le_bytes(take(8)?.try_into().unwrap());
            residues.push((rx, ry));
            let mut block = Vec::with_capacity(len);
            for _ in 0..len {
                let re = f64::from_le_bytes(take(8)?.try_into().unwrap());
                let im = f64::from_le_bytes(take(8)?.try_into().unwrap());
                block.push(Complex64::new(re, im));
            }
            raw.push(block);
        }
        let layout = if px == 1 && py == 1 {
            Layout::plain(nx, ny)?
        } else {
            Layout::lattice(nx, ny, px, py, &residues)?
        };
        if layout.residues != residues {
            return Err(Error::Parse("dump residues are not canonical".into()));
        }
        Ok(Self {
            layout,
            blocks: raw,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

/// Physical-space view of a field, built from per-coset cell samples.
pub struct GridView {
    layout: Layout,
    phys: Vec<Vec<Complex64>>,
}

impl GridView {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    #[inline]
    pub fn value(&self, a: usize, b: usize) -> f64 {
        let l = &self.layout;
        let (mx, my) = (l.mx(), l.my());
        let idx = (a % mx) * my + (b % my);
        let x = TAU * a as f64 / l.nx as f64;
        let y = TAU * b as f64 / l.ny as f64;
        let mut s = 0.0;
        for (blk, &(rx, ry)) in l.residues.iter().enumerate() {
            let g = self.phys[blk][idx];
            if rx == 0 && ry == 0 {
                s += g.re;
            } else {
                let ph = rx as f64 * x + ry as f64 * y;
                s += g.re * ph.cos() - g.im * ph.sin();
            }
        }
        s
    }

    /// Samples along y at fixed x index `a` (length ny).
    pub fn line_y(&self, a: usize, out: &mut [f64]) {
        for (b, o) in out.iter_mut().enumerate() {
            *o = self.value(a, b);
        }
    }

    /// Samples along x at fixed y index `b` (length nx).
    pub fn line_x(&self, b: usize, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.value(a, b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinsin(layout: Layout) -> SpectralField {
        let q = Complex64::new(0.25, 0.0);
        SpectralField::from_modes(layout, &[(1, 1, -q), (1, -1, q), (-1, 1, q), (-1, -1, -q)])
            .unwrap()
    }

    #[test]
    fn norms_of_sinsin() {
        let f = sinsin(Layout::plain(16, 16).unwrap());
        let l2 = f.l2();
        assert!((l2 - std::f64::consts::PI).abs() < 1e-14);
        assert!((f.sobolev(1.0).unwrap() - 2f64.sqrt() * l2).abs() < 1e-13);
        assert!((f.sobolev(-1.0).unwrap() - l2 / 2f64.sqrt()).abs() < 1e-13);
        let g = f.to_grid();
        let grid_l2 = (g.iter().map(|v| v * v).sum::<f64>() * TAU * TAU / 256.0).sqrt();
        assert!((grid_l2 - l2).abs() < 1e-12);
    }

    #[test]
    fn coset_layout_matches_plain_samples() {
        let plain = sinsin(Layout::plain(64, 64).unwrap());
        let lat =
            sinsin(Layout::lattice(64, 64, 8, 4, &[(1, 1), (1, -1), (-1, 1), (-1, -1)]).unwrap());
        let a = plain.to_grid();
        let b = lat.to_grid();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
        let back = SpectralField::from_grid(lat.layout().clone(), &a).unwrap();
        assert!(back.distance_l2(&lat).unwrap() < 1e-13);
    }

    #[test]
    fn negative_norm_rejects_mean() {
        let f = SpectralField::from_modes(
            Layout::plain(8, 8).unwrap(),
            &[(0, 0, Complex64::new(1.0, 0.0))],
        )
        .unwrap();
        assert!(f.sobolev(-1.0).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let f =
            sinsin(Layout::lattice(32, 64, 4, 8, &[(1, 1), (1, -1), (-1, 1), (-1, -1)]).unwrap());
        let g = SpectralField::from_bytes(&f.to_bytes()).unwrap();
        assert_eq!(f, g);
        assert!(SpectralField::from_bytes(b"nope").is_err());
    }
}
