//! Raw slice kernels behind the graph operations.
//!
//! Images are `H×W×C` row-major, kernels `K×K×Cin×Cout`, which reads directly
//! as a `(K·K·Cin)×Cout` matrix. Convolution is cross-correlation with zero
//! "same" padding of `(K-1)/2`.

/// `c = alpha·a·b + beta·c` over strided views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!((m - 1) * rsa + (k - 1) * csa < a.len(), "gemm: a too short");
        assert!((k - 1) * rsb + (n - 1) * csb < b.len(), "gemm: b too short");
    }
    assert!((m - 1) * rsc + (n - 1) * csc < c.len(), "gemm: c too short");
    // SAFETY: every index touched by sgemm lies inside the slices, as asserted above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Gather every `k×k×c` patch of a zero-padded image into one row per pixel.
pub(crate) fn im2col(image: &[f32], h: usize, w: usize, c: usize, k: usize, cols: &mut [f32]) {
    let pad = (k / 2) as isize;
    let row_len = k * k * c;
    debug_assert_eq!(image.len(), h * w * c);
    debug_assert_eq!(cols.len(), h * w * row_len);
    for y in 0..h {
        for x in 0..w {
            let row = &mut cols[(y * w + x) * row_len..(y * w + x + 1) * row_len];
            // contiguous run of valid kx for this x
            let x0 = x as isize - pad;
            let kx_lo = (-x0).max(0) as usize;
            let kx_hi = ((w as isize - x0).min(k as isize)).max(0) as usize;
            for ky in 0..k {
                let iy = y as isize + ky as isize - pad;
                let dst = &mut row[ky * k * c..(ky + 1) * k * c];
                if iy < 0 || iy >= h as isize || kx_lo >= kx_hi {
                    dst.fill(0.0);
                    continue;
                }
                dst[..kx_lo * c].fill(0.0);
                dst[kx_hi * c..].fill(0.0);
                let src_start = ((iy as usize) * w + (x0 + kx_lo as isize) as usize) * c;
                let span = (kx_hi - kx_lo) * c;
                dst[kx_lo * c..kx_hi * c].copy_from_slice(&image[src_start..src_start + span]);
            }
        }
    }
}

/// Scatter-add patch rows back onto the image they were gathered from.
pub(crate) fn col2im_add(cols: &[f32], h: usize, w: usize, c: usize, k: usize, image: &mut [f32]) {
    let pad = (k / 2) as isize;
    let row_len = k * k * c;
    for y in 0..h {
        for x in 0..w {
            let row = &cols[(y * w + x) * row_len..(y * w + x + 1) * row_len];
            let x0 = x as isize - pad;
            let kx_lo = (-x0).max(0) as usize;
            let kx_hi = ((w as isize - x0).min(k as isize)).max(0) as usize;
            if kx_lo >= kx_hi {
                continue;
            }
            for ky in 0..k {
                let iy = y as isize + ky as isize - pad;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let src = &row[ky * k * c + kx_lo * c..ky * k * c + kx_hi * c];
                let dst_start = ((iy as usize) * w + (x0 + kx_lo as isize) as usize) * c;
                for (d, s) in image[dst_start..dst_start + src.len()].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
    }
}

pub(crate) struct ConvShape {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
}

impl ConvShape {
    fn patch(&self) -> usize {
        self.k * self.k * self.cin
    }
}

pub(crate) fn conv_forward(s: &ConvShape, input: &[f32], kernels: &[f32], bias: &[f32]) -> Vec<f32> {
    let pixels = s.h * s.w;
    let patch = s.patch();
    let mut out = vec![0.0f32; s.batch * pixels * s.cout];
    let mut cols = vec![0.0f32; pixels * patch];
    for n in 0..s.batch {
        let img = &input[n * pixels * s.cin..(n + 1) * pixels * s.cin];
        let dst = &mut out[n * pixels * s.cout..(n + 1) * pixels * s.cout];
        for px in dst.chunks_exact_mut(s.cout) {
            px.copy_from_slice(bias);
        }
        im2col(img, s.h, s.w, s.cin, s.k, &mut cols);
        gemm(
            pixels,
            patch,
            s.cout,
            &cols,
            (patch, 1),
            kernels,
            (s.cout, 1),
            1.0,
            dst,
            (s.cout, 1),
        );
    }
    out
}

pub(crate) struct ConvGrads {
    pub input: Option<Vec<f32>>,
    pub kernels: Option<Vec<f32>>,
    pub bias: Option<Vec<f32>>,
}

pub(crate) fn conv_backward(
    s: &ConvShape,
    input: &[f32],
    kernels: &[f32],
    dout: &[f32],
    want: (bool, bool, bool),
) -> ConvGrads {
    let (want_input, want_kernels, want_bias) = want;
    let pixels = s.h * s.w;
    let patch = s.patch();
    let mut dinput = want_input.then(|| vec![0.0f32; input.len()]);
    let mut dkernels = want_kernels.then(|| vec![0.0f32; kernels.len()]);
    let dbias = want_bias.then(|| {
        let mut acc = vec![0.0f64; s.cout];
        for px in dout.chunks_exact(s.cout) {
            for (a, &g) in acc.iter_mut().zip(px) {
                *a += g as f64;
            }
        }
        acc.into_iter().map(|a| a as f32).collect::<Vec<f32>>()
    });
    if want_input || want_kernels {
        let mut cols = vec![0.0f32; pixels * patch];
        for n in 0..s.batch {
            let dy = &dout[n * pixels * s.cout..(n + 1) * pixels * s.cout];
            if let Some(dk) = dkernels.as_mut() {
                let img = &input[n * pixels * s.cin..(n + 1) * pixels * s.cin];
                im2col(img, s.h, s.w, s.cin, s.k, &mut cols);
                // dK (patch×cout) += colsᵀ (patch×pixels) · dY (pixels×cout)
                gemm(patch, pixels, s.cout, &cols, (1, patch), dy, (s.cout, 1), 1.0, dk, (s.cout, 1));
            }
            if let Some(dx) = dinput.as_mut() {
                // dcols (pixels×patch) = dY (pixels×cout) · Kᵀ (cout×patch)
                gemm(pixels, s.cout, patch, dy, (s.cout, 1), kernels, (1, s.cout), 0.0, &mut cols, (patch, 1));
                let dst = &mut dx[n * pixels * s.cin..(n + 1) * pixels * s.cin];
                col2im_add(&cols, s.h, s.w, s.cin, s.k, dst);
            }
        }
    }
    ConvGrads {
        input: dinput,
        kernels: dkernels,
        bias: dbias,
    }
}
