//! Slice-level kernels behind the tape ops.

use alloc::vec;
use alloc::vec::Vec;

use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    pub fn cols(&self) -> usize {
        self.ho * self.wo
    }

    /// 1x1, stride 1, no padding: the input plane already is the column matrix.
    pub fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Valid output-column range `[lo, hi)` for kernel column `kj` at stride 1,
/// where the source column is `ox + kj - pad`.
#[inline]
fn valid_cols(g: &ConvGeom, kj: usize) -> (usize, usize) {
    let lo = g.pad.saturating_sub(kj).min(g.wo);
    let hi = (g.w + g.pad).saturating_sub(kj).min(g.wo).max(lo);
    (lo, hi)
}

/// Unfolds one `(C, H, W)` image into a `(C*k*k, Ho*Wo)` column matrix.
pub(crate) fn im2col<T: Real>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (k, s, p) = (g.k, g.stride, g.pad as isize);
    let plane = g.ho * g.wo;
    for ci in 0..g.c {
        let xc = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                let (lo, hi) = valid_cols(g, kj);
                for oy in 0..g.ho {
                    let iy = (oy * s) as isize + ki as isize - p;
                    let out = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    if s == 1 {
                        out[..lo].fill(T::zero());
                        out[hi..].fill(T::zero());
                        let off = lo + kj - g.pad;
                        out[lo..hi].copy_from_slice(&src[off..off + hi - lo]);
                        continue;
                    }
                    for (ox, o) in out.iter_mut().enumerate() {
                        let ix = (ox * s) as isize + kj as isize - p;
                        *o = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back into an image.
pub(crate) fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let (k, s, p) = (g.k, g.stride, g.pad as isize);
    let plane = g.ho * g.wo;
    for ci in 0..g.c {
        let dc = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                let (lo, hi) = valid_cols(g, kj);
                for oy in 0..g.ho {
                    let iy = (oy * s) as isize + ki as isize - p;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut dc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let srow = &src[oy * g.wo..(oy + 1) * g.wo];
                    if s == 1 {
                        let off = lo + kj - g.pad;
                        for (d, &v) in dst[off..off + hi - lo].iter_mut().zip(&srow[lo..hi]) {
                            *d += v;
                        }
                        continue;
                    }
                    for (ox, &v) in srow.iter().enumerate() {
                        let ix = (ox * s) as isize + kj as isize - p;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Zero-padded copy of one `(C, H, W)` image as `C` planes of `Hp x Wp`,
/// with `k - 1` trailing zeros so every shifted view stays in bounds.
fn pad_image<T: Real>(x: &[T], g: &ConvGeom, buf: &mut [T]) {
    let (hp, wp) = (g.h + 2 * g.pad, g.w + 2 * g.pad);
    buf.fill(T::zero());
    for ci in 0..g.c {
        for y in 0..g.h {
            let src = &x[(ci * g.h + y) * g.w..(ci * g.h + y + 1) * g.w];
            let dst = ci * hp * wp + (y + g.pad) * wp + g.pad;
            buf[dst..dst + g.w].copy_from_slice(src);
        }
    }
}

/// Stride-1 convolution as `k*k` GEMMs over shifted views of the padded
/// image. Outputs live on a `Ho x Wp` grid whose trailing `Wp - Wo` columns
/// per row are junk and get dropped, which avoids materializing im2col.
struct Shifted {
    hp: usize,
    wp: usize,
    grid: usize,
}

impl Shifted {
    fn new(g: &ConvGeom) -> Self {
        let (hp, wp) = (g.h + 2 * g.pad, g.w + 2 * g.pad);
        Self {
            hp,
            wp,
            grid: g.ho * wp,
        }
    }

    fn padded_len(&self, g: &ConvGeom) -> usize {
        g.c * self.hp * self.wp + g.k - 1
    }

    fn shift(&self, ki: usize, kj: usize) -> usize {
        ki * self.wp + kj
    }
}

pub(crate) fn conv_forward<T: Real>(x: &[T], n: usize, g: &ConvGeom, w: &[T], b: Option<&[T]>) -> Vec<T> {
    let (in_sz, out_sz) = (g.c * g.h * g.w, g.f * g.cols());
    let mut out = vec![T::zero(); n * out_sz];
    if g.stride == 1 && !g.is_pointwise() {
        let sh = Shifted::new(g);
        let kk = g.k * g.k;
        let mut xpad = vec![T::zero(); sh.padded_len(g)];
        let mut grid = vec![T::zero(); g.f * sh.grid];
        for i in 0..n {
            pad_image(&x[i * in_sz..(i + 1) * in_sz], g, &mut xpad);
            for ki in 0..g.k {
                for kj in 0..g.k {
                    let first = ki == 0 && kj == 0;
                    T::gemm_strided(
                        g.f,
                        g.c,
                        sh.grid,
                        (&w[ki * g.k + kj..], g.c * kk, kk),
                        (&xpad[sh.shift(ki, kj)..], sh.hp * sh.wp, 1),
                        (&mut grid, sh.grid, 1),
                        !first,
                    );
                }
            }
            let oi = &mut out[i * out_sz..(i + 1) * out_sz];
            for f in 0..g.f {
                let bias = b.map_or(T::zero(), |b| b[f]);
                for y in 0..g.ho {
                    let src = &grid[f * sh.grid + y * sh.wp..f * sh.grid + y * sh.wp + g.wo];
                    let dst = &mut oi[(f * g.ho + y) * g.wo..(f * g.ho + y + 1) * g.wo];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d = v + bias;
                    }
                }
            }
        }
        return out;
    }
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); g.rows() * g.cols()]
    };
    for i in 0..n {
        let xi = &x[i * in_sz..(i + 1) * in_sz];
        let oi = &mut out[i * out_sz..(i + 1) * out_sz];
        let colm: &[T] = if g.is_pointwise() {
            xi
        } else {
            im2col(xi, g, &mut cols);
            &cols
        };
        T::gemm(g.f, g.rows(), g.cols(), w, false, colm, false, oi, false);
        if let Some(b) = b {
            for (f, &bf) in b.iter().enumerate() {
                oi[f * g.cols()..(f + 1) * g.cols()].iter_mut().for_each(|v| *v += bf);
            }
        }
    }
    out
}

/// Returns `(dx, dw, db)`; `dx` only when `need_dx`.
pub(crate) fn conv_backward<T: Real>(
    x: &[T],
    n: usize,
    g: &ConvGeom,
    w: &[T],
    dy: &[T],
    with_bias: bool,
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Option<Vec<T>>) {
    let (in_sz, out_sz) = (g.c * g.h * g.w, g.f * g.cols());
    let mut dx = need_dx.then(|| vec![T::zero(); n * in_sz]);
    let mut dw = vec![T::zero(); g.f * g.rows()];
    let mut db = with_bias.then(|| vec![T::zero(); g.f]);
    for i in 0..n {
        let dyi = &dy[i * out_sz..(i + 1) * out_sz];
        if let Some(db) = db.as_mut() {
            for (f, d) in db.iter_mut().enumerate() {
                *d += dyi[f * g.cols()..(f + 1) * g.cols()]
                    .iter()
                    .fold(T::zero(), |a, &v| a + v);
            }
        }
    }
    if g.stride == 1 && !g.is_pointwise() {
        let sh = Shifted::new(g);
        let kk = g.k * g.k;
        let plane = sh.hp * sh.wp;
        let mut xpad = vec![T::zero(); sh.padded_len(g)];
        let mut dxpad = vec![T::zero(); sh.padded_len(g)];
        // dy on the padded output grid, zero in the junk columns.
        let mut dgrid = vec![T::zero(); g.f * sh.grid];
        for i in 0..n {
            pad_image(&x[i * in_sz..(i + 1) * in_sz], g, &mut xpad);
            let dyi = &dy[i * out_sz..(i + 1) * out_sz];
            for f in 0..g.f {
                for y in 0..g.ho {
                    let dst = f * sh.grid + y * sh.wp;
                    dgrid[dst..dst + g.wo].copy_from_slice(&dyi[(f * g.ho + y) * g.wo..(f * g.ho + y + 1) * g.wo]);
                }
            }
            if need_dx {
                dxpad.fill(T::zero());
            }
            for ki in 0..g.k {
                for kj in 0..g.k {
                    let s = sh.shift(ki, kj);
                    let o = ki * g.k + kj;
                    T::gemm_strided(
                        g.f,
                        sh.grid,
                        g.c,
                        (&dgrid, sh.grid, 1),
                        (&xpad[s..], 1, plane),
                        (&mut dw[o..], g.c * kk, kk),
                        true,
                    );
                    if need_dx {
                        T::gemm_strided(
                            g.c,
                            g.f,
                            sh.grid,
                            (&w[o..], kk, g.c * kk),
                            (&dgrid, sh.grid, 1),
                            (&mut dxpad[s..], plane, 1),
                            true,
                        );
                    }
                }
            }
            if let Some(dx) = dx.as_mut() {
                let dxi = &mut dx[i * in_sz..(i + 1) * in_sz];
                for ci in 0..g.c {
                    for y in 0..g.h {
                        let src = ci * plane + (y + g.pad) * sh.wp + g.pad;
                        dxi[(ci * g.h + y) * g.w..(ci * g.h + y + 1) * g.w].copy_from_slice(&dxpad[src..src + g.w]);
                    }
                }
            }
        }
        return (dx, dw, db);
    }
    let pointwise = g.is_pointwise();
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![T::zero(); g.rows() * g.cols()]
    };
    let mut dcols = if pointwise || !need_dx {
        Vec::new()
    } else {
        vec![T::zero(); g.rows() * g.cols()]
    };
    for i in 0..n {
        let xi = &x[i * in_sz..(i + 1) * in_sz];
        let dyi = &dy[i * out_sz..(i + 1) * out_sz];
        let colm: &[T] = if pointwise {
            xi
        } else {
            im2col(xi, g, &mut cols);
            &cols
        };
        T::gemm(g.f, g.cols(), g.rows(), dyi, false, colm, true, &mut dw, true);
        if let Some(dx) = dx.as_mut() {
            let dxi = &mut dx[i * in_sz..(i + 1) * in_sz];
            if pointwise {
                T::gemm(g.rows(), g.f, g.cols(), w, true, dyi, false, dxi, false);
            } else {
                T::gemm(g.rows(), g.f, g.cols(), w, true, dyi, false, &mut dcols, false);
                col2im(&dcols, g, dxi);
            }
        }
    }
    (dx, dw, db)
}

/// 2x2 stride-2 max pooling over `(N*C)` planes. Returns output and the
/// in-plane index of each selected input (first maximum wins ties).
pub(crate) fn maxpool2<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * ho * wo);
    let mut arg = Vec::with_capacity(planes * ho * wo);
    for p in 0..planes {
        let xp = &x[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best_i = (2 * oy) * w + 2 * ox;
                let mut best = xp[best_i];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = (2 * oy + dy) * w + 2 * ox + dx;
                    if xp[i] > best {
                        best = xp[i];
                        best_i = i;
                    }
                }
                out.push(best);
                arg.push(best_i as u32);
            }
        }
    }
    (out, arg)
}

const LANES: usize = 8;

/// `Σ f(x_i)` in `f64` with independent lanes so the loop vectorizes.
#[inline]
pub(crate) fn lane_sum<T: Real>(x: &[T], f: impl Fn(T) -> f64) -> f64 {
    let mut acc = [0.0f64; LANES];
    let chunks = x.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for j in 0..LANES {
            acc[j] += f(c[j]);
        }
    }
    acc.iter().sum::<f64>() + tail.iter().map(|&v| f(v)).sum::<f64>()
}

/// `(Σ a_i, Σ a_i b_i)` in `f64`.
#[inline]
pub(crate) fn lane_sum_dot<T: Real>(a: &[T], b: &[T]) -> (f64, f64) {
    let (mut s, mut d) = ([0.0f64; LANES], [0.0f64; LANES]);
    let n = a.len().min(b.len()) / LANES * LANES;
    for (ca, cb) in a[..n].chunks_exact(LANES).zip(b[..n].chunks_exact(LANES)) {
        for j in 0..LANES {
            let x = ca[j].as_f64();
            s[j] += x;
            d[j] += x * cb[j].as_f64();
        }
    }
    let mut s: f64 = s.iter().sum();
    let mut d: f64 = d.iter().sum();
    for (&x, &y) in a[n..].iter().zip(&b[n..]) {
        s += x.as_f64();
        d += x.as_f64() * y.as_f64();
    }
    (s, d)
}

/// True when no element is NaN or infinite.
pub(crate) fn all_finite<T: Real>(x: &[T]) -> bool {
    let mut acc = [T::zero(); LANES];
    let chunks = x.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for j in 0..LANES {
            // v * 0 is 0 for finite v and NaN otherwise.
            acc[j] += c[j] * T::zero();
        }
    }
    acc.iter().chain(tail).all(|v| v.is_finite())
}

/// Per-channel `(mean, biased variance)` of an `(N, C, H*W)` buffer,
/// accumulated in `f64`.
pub(crate) fn channel_moments<T: Real>(x: &[T], n: usize, c: usize, hw: usize) -> (Vec<f64>, Vec<f64>) {
    let m = (n * hw) as f64;
    let mut mean = vec![0.0f64; c];
    let mut var = vec![0.0f64; c];
    for ch in 0..c {
        let planes = || (0..n).map(move |i| &x[(i * c + ch) * hw..(i * c + ch + 1) * hw]);
        let mu = planes().map(|p| lane_sum(p, T::as_f64)).sum::<f64>() / m;
        let q: f64 = planes()
            .map(|p| {
                lane_sum(p, |v| {
                    let d = v.as_f64() - mu;
                    d * d
                })
            })
            .sum();
        mean[ch] = mu;
        var[ch] = q / m;
    }
    (mean, var)
}
