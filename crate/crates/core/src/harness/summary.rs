use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LayerId;
use crate::probe::{CellRecord, OpponencyClass};

pub const HUE_BINS: usize = 32;
pub const HUE_BIN_WIDTH: f64 = 360.0 / HUE_BINS as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    Spectral,
    Spatial,
    Double,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Spectral, Modality::Spatial, Modality::Double];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Spectral => "spectral",
            Modality::Spatial => "spatial",
            Modality::Double => "double",
        }
    }

    pub fn class_of(self, record: &CellRecord) -> OpponencyClass {
        match self {
            Modality::Spectral => record.spectral,
            Modality::Spatial => record.spatial,
            Modality::Double => record.double_class(),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown modality '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SummaryKey {
    pub bottleneck: usize,
    pub depth: usize,
    pub layer: LayerId,
    pub modality: Modality,
    pub class: OpponencyClass,
}

/// Mean and population standard deviation of a class fraction across trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl Stat {
    /// Order-independent: values are sorted before summation.
    pub fn from_samples(values: &[f64]) -> Stat {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return Stat {
                mean: 0.0,
                std: 0.0,
                trials: 0,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let var = dev.iter().sum::<f64>() / n as f64;
        Stat {
            mean,
            std: var.sqrt(),
            trials: n,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HueHistogram {
    pub excitatory: Vec<u64>,
    pub inhibitory: Vec<u64>,
}

impl HueHistogram {
    pub fn empty() -> Self {
        Self {
            excitatory: vec![0; HUE_BINS],
            inhibitory: vec![0; HUE_BINS],
        }
    }

    pub fn bin(hue: f64) -> usize {
        ((hue.rem_euclid(360.0) / HUE_BIN_WIDTH) as usize).min(HUE_BINS - 1)
    }

    pub fn add(&mut self, record: &CellRecord) {
        if let Some(h) = record.excitatory_hue {
            self.excitatory[Self::bin(h)] += 1;
        }
        if let Some(h) = record.inhibitory_hue {
            self.inhibitory[Self::bin(h)] += 1;
        }
    }
}

/// Class-fraction statistics for every (bottleneck, depth, layer, modality, class)
/// plus hue histograms per (bottleneck, depth, layer).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PopulationSummary {
    pub rows: BTreeMap<SummaryKey, Stat>,
    pub hues: BTreeMap<(usize, usize, LayerId), HueHistogram>,
}

/// Cell records of one trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCells {
    pub bottleneck: usize,
    pub depth: usize,
    pub trial: usize,
    pub records: Vec<CellRecord>,
}

/// Fraction of a layer's cells in each class for one modality.
pub fn class_fractions(records: &[CellRecord], layer: LayerId, modality: Modality) -> BTreeMap<OpponencyClass, f64> {
    let cells: Vec<&CellRecord> = records.iter().filter(|r| r.layer == layer).collect();
    OpponencyClass::ALL
        .into_iter()
        .map(|c| {
            let n = cells.iter().filter(|r| modality.class_of(r) == c).count();
            (c, if cells.is_empty() { 0.0 } else { n as f64 / cells.len() as f64 })
        })
        .collect()
}

pub fn aggregate(models: &[ModelCells]) -> PopulationSummary {
    let mut groups: BTreeMap<(usize, usize), Vec<&ModelCells>> = BTreeMap::new();
    for m in models {
        groups.entry((m.bottleneck, m.depth)).or_default().push(m);
    }
    let mut summary = PopulationSummary::default();
    for ((b, d), trials) in groups {
        let layers: BTreeSet<LayerId> = trials.iter().flat_map(|m| m.records.iter().map(|r| r.layer)).collect();
        for &layer in &layers {
            let present: Vec<&&ModelCells> = trials.iter().filter(|m| m.records.iter().any(|r| r.layer == layer)).collect();
            for modality in Modality::ALL {
                let fractions: Vec<BTreeMap<OpponencyClass, f64>> = present
                    .iter()
                    .map(|m| class_fractions(&m.records, layer, modality))
                    .collect();
                for class in OpponencyClass::ALL {
                    let samples: Vec<f64> = fractions.iter().map(|f| f[&class]).collect();
                    summary.rows.insert(
                        SummaryKey {
                            bottleneck: b,
                            depth: d,
                            layer,
                            modality,
                            class,
                        },
                        Stat::from_samples(&samples),
                    );
                }
            }
            let hist = summary.hues.entry((b, d, layer)).or_insert_with(HueHistogram::empty);
            for m in &present {
                for r in m.records.iter().filter(|r| r.layer == layer) {
                    hist.add(r);
                }
            }
        }
    }
    summary
}

impl PopulationSummary {
    pub fn get(&self, bottleneck: usize, depth: usize, layer: LayerId, modality: Modality, class: OpponencyClass) -> Option<Stat> {
        self.rows
            .get(&SummaryKey {
                bottleneck,
                depth,
                layer,
                modality,
                class,
            })
            .copied()
    }

    pub fn bottlenecks(&self) -> Vec<usize> {
        self.rows.keys().map(|k| k.bottleneck).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn depths(&self) -> Vec<usize> {
        self.rows.keys().map(|k| k.depth).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn layers(&self, depth: usize) -> Vec<LayerId> {
        self.rows
            .keys()
            .filter(|k| k.depth == depth)
            .map(|k| k.layer)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Per-key signed differences `b − a` with the largest magnitude per (layer, modality).
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionDelta {
    pub deltas: BTreeMap<SummaryKey, f64>,
    pub max_abs: BTreeMap<(LayerId, Modality), f64>,
}

pub fn compare_conditions(a: &PopulationSummary, b: &PopulationSummary) -> Result<ConditionDelta> {
    let ka: BTreeSet<&SummaryKey> = a.rows.keys().collect();
    let kb: BTreeSet<&SummaryKey> = b.rows.keys().collect();
    if let Some(k) = ka.symmetric_difference(&kb).next() {
        let side = if ka.contains(k) { "first" } else { "second" };
        return Err(Error::KeyMismatch(format!(
            "only the {side} summary has bottleneck {} depth {} {} {} {}",
            k.bottleneck, k.depth, k.layer, k.modality, k.class
        )));
    }
    let mut deltas = BTreeMap::new();
    let mut max_abs: BTreeMap<(LayerId, Modality), f64> = BTreeMap::new();
    for (k, sa) in &a.rows {
        let d = b.rows[k].mean - sa.mean;
        deltas.insert(*k, d);
        let m = max_abs.entry((k.layer, k.modality)).or_insert(0.0);
        *m = m.max(d.abs());
    }
    Ok(ConditionDelta { deltas, max_abs })
}
