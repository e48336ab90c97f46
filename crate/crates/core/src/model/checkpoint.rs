//! Binary checkpoint format.
//!
//! ```text
//! "OPNN" | u32 version (1)
//! config: u32 bottleneck | u32 depth | u8 colour space | u8 shuffle | u64 seed
//!         | u32 epochs | f32 lr | f32 weight decay
//! records until EOF: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 payload
//! ```
//! All scalars little-endian. Besides the parameters, a `meta.training`
//! record keeps batch size, optimiser settings and final accuracies.

use std::fs;
use std::path::Path;

use crate::data::ColourSpace;
use crate::error::{Error, Result};
use crate::ndnum::{OptimizerKind, Tensor};

use super::config::ModelConfig;
use super::network::{parameter_layout, ConvParams, DenseParams, TrainingMeta, VisualSystemModel};

pub const MAGIC: &[u8; 4] = b"OPNN";
pub const VERSION: u32 = 1;
const META_NAME: &str = "meta.training";
const MISSING: f32 = -1.0;

fn push_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    out.extend((name.len() as u16).to_le_bytes());
    out.extend(name.as_bytes());
    out.push(t.rank() as u8);
    for &d in t.dims() {
        out.extend((d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend(v.to_le_bytes());
    }
}

fn meta_tensor(model: &VisualSystemModel) -> Tensor {
    let (kind, b1, b2, eps) = match model.config.optimizer {
        OptimizerKind::Sgd => (0.0, 0.0, 0.0, 0.0),
        OptimizerKind::Adam { beta1, beta2, eps } => (1.0, beta1, beta2, eps),
    };
    let m = &model.meta;
    let values = vec![
        model.config.batch_size as f32,
        m.epochs_completed as f32,
        m.train_accuracy.unwrap_or(MISSING),
        m.test_accuracy.unwrap_or(MISSING),
        m.shuffled_test_accuracy.unwrap_or(MISSING),
        kind,
        b1,
        b2,
        eps,
    ];
    Tensor::new(&[values.len()], values).expect("meta tensor")
}

pub fn encode(model: &VisualSystemModel) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend((c.bottleneck as u32).to_le_bytes());
    out.extend((c.ventral_depth as u32).to_le_bytes());
    out.push(c.colour_space.code());
    out.push(c.shuffle_channels as u8);
    out.extend(c.seed.to_le_bytes());
    out.extend((c.epochs as u32).to_le_bytes());
    out.extend(c.lr.to_le_bytes());
    out.extend(c.weight_decay.to_le_bytes());
    let layout = parameter_layout(c);
    for ((name, _), t) in layout.iter().zip(model.parameters()) {
        push_tensor(&mut out, name, t);
    }
    push_tensor(&mut out, META_NAME, &meta_tensor(model));
    out
}

pub fn save_checkpoint(model: &VisualSystemModel, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, encode(model))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.origin.to_path_buf(),
                detail: format!("{what} needs {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<VisualSystemModel> {
    let mut r = Reader { bytes, pos: 0, origin };
    if r.take(4, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format(format!("{}: bad magic, not an OPNN checkpoint", origin.display())));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: checkpoint version {version}, expected {VERSION}",
            origin.display()
        )));
    }
    let mut config = ModelConfig {
        bottleneck: r.u32("bottleneck")? as usize,
        ventral_depth: r.u32("depth")? as usize,
        colour_space: ColourSpace::from_code(r.u8("colour space")?)?,
        shuffle_channels: r.u8("shuffle flag")? != 0,
        seed: r.u64("seed")?,
        epochs: r.u32("epochs")? as usize,
        lr: r.f32("lr")?,
        weight_decay: r.f32("weight decay")?,
        ..ModelConfig::default()
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("{}: {e}", origin.display())))?;

    let layout = parameter_layout(&config);
    let mut tensors: Vec<Option<Tensor>> = vec![None; layout.len()];
    let mut meta: Option<Tensor> = None;
    while !r.done() {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let dims: Vec<usize> = (0..rank)
            .map(|_| r.u32("dimension").map(|d| d as usize))
            .collect::<Result<_>>()?;
        let count = dims.iter().product::<usize>();
        let payload = r.take(count * 4, &format!("payload of {name}"))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if name == META_NAME {
            meta = Some(Tensor::new(&dims, data)?);
            continue;
        }
        let slot = layout
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| Error::Format(format!("unexpected tensor '{name}' for this configuration")))?;
        let expected = &layout[slot].1;
        if &dims != expected {
            return Err(Error::Shape(format!(
                "tensor '{name}' has dims {dims:?}, configuration requires {expected:?}"
            )));
        }
        if tensors[slot].is_some() {
            return Err(Error::Format(format!("duplicate tensor '{name}'")));
        }
        tensors[slot] = Some(Tensor::new(&dims, data)?);
    }
    let mut params = Vec::with_capacity(layout.len());
    for ((name, _), t) in layout.iter().zip(tensors) {
        params.push(t.ok_or_else(|| Error::Format(format!("missing tensor '{name}'")))?);
    }

    let mut training = TrainingMeta::default();
    if let Some(m) = meta {
        let v = m.data();
        if v.len() < 9 {
            return Err(Error::Format("short meta.training record".into()));
        }
        let opt = |x: f32| (x != MISSING).then_some(x);
        config.batch_size = v[0] as usize;
        training.epochs_completed = v[1] as usize;
        training.train_accuracy = opt(v[2]);
        training.test_accuracy = opt(v[3]);
        training.shuffled_test_accuracy = opt(v[4]);
        config.optimizer = if v[5] == 0.0 {
            OptimizerKind::Sgd
        } else {
            OptimizerKind::Adam {
                beta1: v[6],
                beta2: v[7],
                eps: v[8],
            }
        };
    }

    let mut it = params.into_iter();
    let convs = config
        .conv_layers()
        .into_iter()
        .map(|layer| ConvParams {
            layer,
            kernels: it.next().unwrap(),
            bias: it.next().unwrap(),
        })
        .collect();
    let hidden = DenseParams {
        weights: it.next().unwrap(),
        bias: it.next().unwrap(),
    };
    let output = DenseParams {
        weights: it.next().unwrap(),
        bias: it.next().unwrap(),
    };
    Ok(VisualSystemModel {
        config,
        convs,
        hidden,
        output,
        meta: training,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<VisualSystemModel> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode(&fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn small() -> VisualSystemModel {
        let mut c = ModelConfig::new(4, 2);
        c.seed = 3;
        c.colour_space = ColourSpace::Lab;
        c.shuffle_channels = true;
        let mut m = build_model(&c).unwrap();
        m.meta.test_accuracy = Some(0.42);
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = small();
        let bytes = encode(&m);
        let back = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode(&back), bytes);
        assert_eq!(back.config.bottleneck, 4);
        assert_eq!(back.config.ventral_depth, 2);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&small());
        assert_eq!(&bytes[..4], b"OPNN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes[16], 1); // lab
        assert_eq!(bytes[17], 1); // shuffled
        assert_eq!(u64::from_le_bytes(bytes[18..26].try_into().unwrap()), 3);
        // first record name
        let name_len = u16::from_le_bytes(bytes[38..40].try_into().unwrap()) as usize;
        assert_eq!(&bytes[40..40 + name_len], b"retina1.kernels");
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode(&small());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes, Path::new("m")), Err(Error::Format(m)) if m.contains("magic")));
        let mut bytes = encode(&small());
        bytes[4] = 2;
        assert!(matches!(decode(&bytes, Path::new("m")), Err(Error::Format(m)) if m.contains("version")));
    }

    #[test]
    fn corrupted_dimension_is_shape_error() {
        let mut bytes = encode(&small());
        // retina1.kernels dims start after name (15 bytes) and the rank byte
        let dims_at = 40 + 15 + 1;
        bytes[dims_at] = 7; // K 9 → 7
        let err = decode(&bytes, Path::new("m")).unwrap_err();
        assert!(matches!(err, Error::Shape(ref m) if m.contains("retina1.kernels")), "{err}");
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode(&small());
        let err = decode(&bytes[..bytes.len() - 10], Path::new("m")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");
        assert!(matches!(decode(&bytes[..20], Path::new("m")), Err(Error::Truncated { .. })));
    }
}
