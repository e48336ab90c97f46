use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ColourSpace;
use crate::error::{Error, Result};
use crate::model::{LayerId, VisualSystemModel};
use crate::stimulus::{
    default_frequencies, default_orientations, default_phases, grating_sweep, hue_sweep, StimulusSweep, DEFAULT_HUES,
};

use super::classify::{classify, extremal_hues, OpponencyClass, ResponseCurve, Tolerances};
use super::response::{centre_responses, rf_approx, sweep_responses, CellId, ReceptiveField};
use super::tuning::{orientation_tuning, OrientationTuning};
use crate::stimulus::zero_stimulus;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSettings {
    pub hues: usize,
    pub orientations: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub tolerances: Tolerances,
    /// Compute gradient receptive fields (one backward pass per cell).
    pub receptive_fields: bool,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            hues: DEFAULT_HUES,
            orientations: default_orientations(),
            frequencies: default_frequencies(),
            phases: default_phases(),
            tolerances: Tolerances::default(),
            receptive_fields: true,
        }
    }
}

/// Hue and grating sweeps rendered in one input space.
#[derive(Clone, Debug)]
pub struct ProbeSweeps {
    pub hues: StimulusSweep,
    pub gratings: StimulusSweep,
}

impl ProbeSettings {
    pub fn sweeps(&self, space: ColourSpace) -> Result<ProbeSweeps> {
        self.tolerances.validate()?;
        Ok(ProbeSweeps {
            hues: hue_sweep(self.hues)?.in_colour_space(space),
            gratings: grating_sweep(&self.orientations, &self.frequencies, &self.phases)?.in_colour_space(space),
        })
    }
}

/// Both modalities must agree for a cell to be double opponent or double unresponsive.
pub fn double_class(spectral: OpponencyClass, spatial: OpponencyClass) -> OpponencyClass {
    match (spectral, spatial) {
        (OpponencyClass::Opponent, OpponencyClass::Opponent) => OpponencyClass::Opponent,
        (OpponencyClass::Unresponsive, OpponencyClass::Unresponsive) => OpponencyClass::Unresponsive,
        _ => OpponencyClass::NonOpponent,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellReport {
    pub cell: CellId,
    pub baseline: f64,
    pub spectral: ResponseCurve,
    pub spatial: ResponseCurve,
    pub spectral_class: OpponencyClass,
    pub spatial_class: OpponencyClass,
    pub double_opponent: bool,
    /// (most excitatory, most inhibitory) hue, for spectrally opponent cells.
    pub extremal_hues: Option<(f64, f64)>,
    pub tuning: OrientationTuning,
    pub receptive_field: Option<ReceptiveField>,
}

impl CellReport {
    pub fn record(&self, model_id: &str) -> CellRecord {
        CellRecord {
            model_id: model_id.to_string(),
            layer: self.cell.layer,
            channel: self.cell.channel,
            spectral: self.spectral_class,
            spatial: self.spatial_class,
            double_opponent: self.double_opponent,
            excitatory_hue: self.extremal_hues.map(|h| h.0),
            inhibitory_hue: self.extremal_hues.map(|h| h.1),
            selectivity: self.tuning.selectivity,
        }
    }
}

fn build_report(
    model: &VisualSystemModel,
    cell: CellId,
    sweeps: &ProbeSweeps,
    baseline: f64,
    hue_responses: Vec<f64>,
    grating_responses: Vec<f64>,
    settings: &ProbeSettings,
) -> Result<CellReport> {
    let tol = &settings.tolerances;
    let spectral = ResponseCurve::new(sweeps.hues.parameters(), hue_responses, baseline)?;
    let spatial = ResponseCurve::new(sweeps.gratings.parameters(), grating_responses, baseline)?;
    let spectral_class = classify(&spectral, tol)?;
    let spatial_class = classify(&spatial, tol)?;
    let extremal = match spectral_class {
        OpponencyClass::Opponent => Some(extremal_hues(&spectral, tol)?),
        _ => None,
    };
    let tuning = orientation_tuning(&sweeps.gratings, &spatial.responses)?;
    let receptive_field = if settings.receptive_fields {
        Some(rf_approx(model, cell)?)
    } else {
        None
    };
    Ok(CellReport {
        cell,
        baseline,
        spectral,
        spatial,
        spectral_class,
        spatial_class,
        double_opponent: spectral_class == OpponencyClass::Opponent && spatial_class == OpponencyClass::Opponent,
        extremal_hues: extremal,
        tuning,
        receptive_field,
    })
}

/// Probe every channel of `layers` with shared forward passes.
pub fn probe_layers(
    model: &VisualSystemModel,
    layers: &[LayerId],
    sweeps: &ProbeSweeps,
    settings: &ProbeSettings,
) -> Result<Vec<CellReport>> {
    let baseline = centre_responses(model, layers, &zero_stimulus().image)?;
    let hues = sweep_responses(model, layers, &sweeps.hues)?;
    let gratings = sweep_responses(model, layers, &sweeps.gratings)?;
    let mut reports = Vec::new();
    for ((b, h), g) in baseline.into_iter().zip(hues).zip(gratings) {
        for (channel, ((base, hr), gr)) in b.by_channel.into_iter().zip(h.by_channel).zip(g.by_channel).enumerate() {
            let cell = CellId { layer: b.layer, channel };
            reports.push(build_report(model, cell, sweeps, base[0], hr, gr, settings)?);
        }
    }
    Ok(reports)
}

/// Probe every channel of `layers`, building sweeps in the model's input space.
pub fn probe_model(model: &VisualSystemModel, layers: &[LayerId], settings: &ProbeSettings) -> Result<Vec<CellReport>> {
    let sweeps = settings.sweeps(model.config.colour_space)?;
    probe_layers(model, layers, &sweeps, settings)
}

pub fn probe_cell(model: &VisualSystemModel, cell: CellId, settings: &ProbeSettings) -> Result<CellReport> {
    let cell = CellId::new(model, cell.layer, cell.channel)?;
    let sweeps = settings.sweeps(model.config.colour_space)?;
    let pick = |r: Vec<super::response::LayerResponses>| r.into_iter().next().unwrap().by_channel.swap_remove(cell.channel);
    let baseline = pick(centre_responses(model, &[cell.layer], &zero_stimulus().image)?)[0];
    let hr = pick(sweep_responses(model, &[cell.layer], &sweeps.hues)?);
    let gr = pick(sweep_responses(model, &[cell.layer], &sweeps.gratings)?);
    build_report(model, cell, &sweeps, baseline, hr, gr, settings)
}

/// One line of a per-model cells file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub model_id: String,
    pub layer: LayerId,
    pub channel: usize,
    pub spectral: OpponencyClass,
    pub spatial: OpponencyClass,
    pub double_opponent: bool,
    pub excitatory_hue: Option<f64>,
    pub inhibitory_hue: Option<f64>,
    pub selectivity: f64,
}

pub const RECORD_HEADER: &str =
    "# model\tlayer\tchannel\tspectral\tspatial\tdouble_opponent\texcitatory_hue\tinhibitory_hue\tselectivity";

impl CellRecord {
    /// Three-way joint class used by the population tables.
    pub fn double_class(&self) -> OpponencyClass {
        double_class(self.spectral, self.spatial)
    }
}

impl fmt::Display for CellRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |h| h.to_string());
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.model_id,
            self.layer,
            self.channel,
            self.spectral,
            self.spatial,
            self.double_opponent,
            opt(self.excitatory_hue),
            opt(self.inhibitory_hue),
            self.selectivity
        )
    }
}

impl FromStr for CellRecord {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!("cell record needs 9 fields, got {}: '{line}'", fields.len())));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad {what} '{s}'")))
        };
        let opt = |s: &str, what: &str| if s == "-" { Ok(None) } else { num(s, what).map(Some) };
        Ok(CellRecord {
            model_id: fields[0].to_string(),
            layer: fields[1].parse().map_err(|e: Error| Error::Format(e.to_string()))?,
            channel: fields[2]
                .parse()
                .map_err(|_| Error::Format(format!("bad channel '{}'", fields[2])))?,
            spectral: fields[3].parse()?,
            spatial: fields[4].parse()?,
            double_opponent: fields[5]
                .parse()
                .map_err(|_| Error::Format(format!("bad double flag '{}'", fields[5])))?,
            excitatory_hue: opt(fields[6], "excitatory hue")?,
            inhibitory_hue: opt(fields[7], "inhibitory hue")?,
            selectivity: num(fields[8], "selectivity")?,
        })
    }
}

pub fn format_records(records: &[CellRecord]) -> String {
    let mut s = String::from(RECORD_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_records(text: &str) -> Result<Vec<CellRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}
