#![allow(dead_code)]

use std::path::Path;

use opponency::data::{write_batch, Cifar10Set, Split, SIDE, TEST_FILE, TRAIN_FILES};
use opponency::ndnum::{Graph, Rng, Tensor};
use opponency::stimulus::hsl_to_rgb;

pub const IMAGE_LEN: usize = SIDE * SIDE * 3;

/// Images whose class is carried by a dominant hue (36° per class) plus
/// noise and a random bright square, rounded to bytes like real batch files.
pub fn colour_coded_set(n: usize, seed: u64, split: Split) -> Cifar10Set {
    let mut rng = Rng::new(seed);
    let mut pixels = Vec::with_capacity(n * IMAGE_LEN);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 10) as u8;
        let rgb = hsl_to_rgb(36.0 * label as f64, 0.8, 0.5).unwrap();
        let (sx, sy) = (rng.below(24) as usize, rng.below(24) as usize);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let boost = if (sx..sx + 8).contains(&x) && (sy..sy + 8).contains(&y) { 0.2 } else { 0.0 };
                for channel in rgb {
                    let v = channel / 255.0 + boost + 0.15 * (rng.next_f64() - 0.5);
                    pixels.push(((v.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32);
                }
            }
        }
        labels.push(label);
    }
    Cifar10Set {
        images: Tensor::new(&[n, SIDE, SIDE, 3], pixels).unwrap(),
        labels,
        split,
    }
}

/// Uniform noise images with balanced labels unrelated to the content.
pub fn noise_set(n: usize, seed: u64) -> Cifar10Set {
    let mut rng = Rng::new(seed);
    let pixels: Vec<f32> = (0..n * IMAGE_LEN).map(|_| (rng.below(256) as f32) / 255.0).collect();
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    Cifar10Set {
        images: Tensor::new(&[n, SIDE, SIDE, 3], pixels).unwrap(),
        labels,
        split: Split::Test,
    }
}

/// Lay out a dataset directory with the standard file names.
pub fn write_cifar_dir(dir: &Path, train: &Cifar10Set, test: &Cifar10Set) {
    let per = train.len().div_ceil(TRAIN_FILES.len());
    for (f, name) in TRAIN_FILES.iter().enumerate() {
        let start = (f * per).min(train.len());
        let end = ((f + 1) * per).min(train.len());
        let px = &train.images.data()[start * IMAGE_LEN..end * IMAGE_LEN];
        write_batch(&dir.join(name), px, &train.labels[start..end]).unwrap();
    }
    write_batch(&dir.join(TEST_FILE), test.images.data(), &test.labels).unwrap();
}

/// conv(3×3) → ReLU → conv(3×3) → ReLU → dense → softmax cross-entropy on small inputs.
#[derive(Clone, Debug)]
pub struct SmallNet {
    pub n: usize,
    pub side: usize,
    pub cin: usize,
    pub c1: usize,
    pub c2: usize,
    pub classes: usize,
    pub k: usize,
    /// x, k1, b1, k2, b2, w, bw
    pub tensors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl SmallNet {
    pub fn random(seed: u64) -> Self {
        let (n, side, cin, c1, c2, classes, k) = (2, 8, 3, 4, 3, 5, 3);
        let mut rng = Rng::new(seed);
        let mut v = |len: usize, scale: f64| -> Vec<f64> {
            (0..len).map(|_| (rng.next_f64() * 2.0 - 1.0) * scale).collect()
        };
        let tensors = vec![
            v(n * side * side * cin, 1.0),
            v(k * k * cin * c1, 0.4),
            v(c1, 0.1),
            v(k * k * c1 * c2, 0.4),
            v(c2, 0.1),
            v(side * side * c2 * classes, 0.2),
            v(classes, 0.1),
        ];
        Self {
            n,
            side,
            cin,
            c1,
            c2,
            classes,
            k,
            tensors,
            labels: vec![1, 3],
        }
    }

    pub fn dims(&self, which: usize) -> Vec<usize> {
        let (n, s, k) = (self.n, self.side, self.k);
        match which {
            0 => vec![n, s, s, self.cin],
            1 => vec![k, k, self.cin, self.c1],
            2 => vec![self.c1],
            3 => vec![k, k, self.c1, self.c2],
            4 => vec![self.c2],
            5 => vec![s * s * self.c2, self.classes],
            _ => vec![self.classes],
        }
    }

    fn conv(&self, x: &[f64], cin: usize, kern: &[f64], bias: &[f64], cout: usize) -> Vec<f64> {
        let (n, s, k) = (self.n, self.side as i64, self.k as i64);
        let half = k / 2;
        let mut out = vec![0.0; n * (s * s) as usize * cout];
        for b in 0..n {
            for y in 0..s {
                for xx in 0..s {
                    for co in 0..cout {
                        let mut acc = bias[co];
                        for dy in 0..k {
                            for dx in 0..k {
                                let (iy, ix) = (y + dy - half, xx + dx - half);
                                if iy < 0 || ix < 0 || iy >= s || ix >= s {
                                    continue;
                                }
                                for ci in 0..cin {
                                    let xi = ((b as i64 * s + iy) * s + ix) as usize * cin + ci;
                                    let ki = (((dy * k + dx) as usize) * cin + ci) * cout + co;
                                    acc += x[xi] * kern[ki];
                                }
                            }
                        }
                        out[((b as i64 * s + y) * s + xx) as usize * cout + co] = acc;
                    }
                }
            }
        }
        out
    }

    /// Pre-activations of both conv layers and the f64 loss.
    pub fn reference(&self, t: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, f64) {
        let pre1 = self.conv(&t[0], self.cin, &t[1], &t[2], self.c1);
        let a1: Vec<f64> = pre1.iter().map(|v| v.max(0.0)).collect();
        let pre2 = self.conv(&a1, self.c1, &t[3], &t[4], self.c2);
        let a2: Vec<f64> = pre2.iter().map(|v| v.max(0.0)).collect();
        let feat = self.side * self.side * self.c2;
        let mut loss = 0.0;
        for b in 0..self.n {
            let logits: Vec<f64> = (0..self.classes)
                .map(|c| t[6][c] + (0..feat).map(|i| a2[b * feat + i] * t[5][i * self.classes + c]).sum::<f64>())
                .collect();
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            loss += lse - logits[self.labels[b]];
        }
        (pre1, pre2, loss / self.n as f64)
    }

    /// Loss and gradients of every tensor from the engine.
    pub fn engine(&self) -> (f32, Vec<Tensor>) {
        let mut g = Graph::new();
        let ids: Vec<_> = (0..7)
            .map(|i| {
                let t = Tensor::new(&self.dims(i), self.tensors[i].iter().map(|&v| v as f32).collect()).unwrap();
                g.leaf(t, true)
            })
            .collect();
        let h = g.conv2d_same(ids[0], ids[1], ids[2]).unwrap();
        let h = g.relu(h).unwrap();
        let h = g.conv2d_same(h, ids[3], ids[4]).unwrap();
        let h = g.relu(h).unwrap();
        let f = g.flatten(h).unwrap();
        let logits = g.linear(f, ids[5], ids[6]).unwrap();
        let loss = g.softmax_xent(logits, &self.labels).unwrap();
        g.backward(loss).unwrap();
        let value = g.value(loss).data()[0];
        (value, ids.iter().map(|&id| g.grad(id).unwrap()).collect())
    }

    /// Engine gradient of the f32-rounded tensors compared with central
    /// differences of the f64 reference. Returns (checked, failures, worst excess).
    pub fn check_gradients(&self, rel: f64, abs_floor: f64) -> (usize, Vec<String>) {
        let rounded: Vec<Vec<f64>> = self
            .tensors
            .iter()
            .map(|t| t.iter().map(|&v| v as f32 as f64).collect())
            .collect();
        let (_, grads) = self.engine();
        let (base1, base2, _) = self.reference(&rounded);
        let h = 1e-6;
        let mut checked = 0;
        let mut failures = Vec::new();
        for which in 0..7 {
            for i in 0..rounded[which].len() {
                let mut plus = rounded.clone();
                plus[which][i] += h;
                let mut minus = rounded.clone();
                minus[which][i] -= h;
                let (p1, p2, lp) = self.reference(&plus);
                let (m1, m2, lm) = self.reference(&minus);
                // skip coordinates whose perturbation moves a ReLU across its kink
                let crosses = |base: &[f64], a: &[f64], b: &[f64]| {
                    base.iter().zip(a).zip(b).any(|((&o, &x), &y)| (o > 0.0) != (x > 0.0) || (o > 0.0) != (y > 0.0))
                };
                if crosses(&base1, &p1, &m1) || crosses(&base2, &p2, &m2) {
                    continue;
                }
                let fd = (lp - lm) / (2.0 * h);
                let analytic = grads[which].data()[i] as f64;
                checked += 1;
                if (analytic - fd).abs() > (rel * fd.abs()).max(abs_floor) {
                    failures.push(format!("tensor {which}[{i}]: engine {analytic:e} vs fd {fd:e}"));
                }
            }
        }
        (checked, failures)
    }
}
