use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::LayerId;
use crate::probe::OpponencyClass;

use super::summary::{HueHistogram, Modality, PopulationSummary, Stat, SummaryKey, HUE_BINS, HUE_BIN_WIDTH};

pub const SUMMARY_HEADER: [&str; 8] = ["bottleneck", "depth", "layer", "modality", "class", "mean", "std", "trials"];
pub const HUE_HEADER: [&str; 4] = ["layer", "bin_start_deg", "excitatory_count", "inhibitory_count"];

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

pub fn summary_csv(summary: &PopulationSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for (k, s) in &summary.rows {
        w.write_record([
            k.bottleneck.to_string(),
            k.depth.to_string(),
            k.layer.to_string(),
            k.modality.to_string(),
            k.class.to_string(),
            format!("{:.6}", s.mean),
            format!("{:.6}", s.std),
            s.trials.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn emit_csv(summary: &PopulationSummary, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, summary_csv(summary)?)?;
    Ok(())
}

/// Read a summary CSV back (hue histograms are not part of it).
pub fn read_summary_csv(path: &Path) -> Result<PopulationSummary> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Format(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut summary = PopulationSummary::default();
    for row in r.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad number '{}'", path.display(), &row[i])))
        };
        let key = SummaryKey {
            bottleneck: num(0)? as usize,
            depth: num(1)? as usize,
            layer: row[2].parse::<LayerId>().map_err(|e| Error::Format(e.to_string()))?,
            modality: row[3].parse()?,
            class: row[4].parse()?,
        };
        summary.rows.insert(
            key,
            Stat {
                mean: num(5)?,
                std: num(6)?,
                trials: num(7)? as usize,
            },
        );
    }
    Ok(summary)
}

pub fn hue_csv(summary: &PopulationSummary, bottleneck: usize, depth: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HUE_HEADER)?;
    for ((b, d, layer), h) in &summary.hues {
        if (*b, *d) != (bottleneck, depth) {
            continue;
        }
        for i in 0..HUE_BINS {
            w.write_record([
                layer.to_string(),
                format!("{}", i as f64 * HUE_BIN_WIDTH),
                h.excitatory[i].to_string(),
                h.inhibitory[i].to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// One `hues_b{b}_d{d}.csv` per configuration; returns the written paths.
pub fn emit_hue_csvs(summary: &PopulationSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let configs: std::collections::BTreeSet<(usize, usize)> = summary.hues.keys().map(|(b, d, _)| (*b, *d)).collect();
    let mut out = Vec::new();
    for (b, d) in configs {
        let path = dir.join(format!("hues_b{b}_d{d}.csv"));
        fs::write(&path, hue_csv(summary, b, d)?)?;
        out.push(path);
    }
    Ok(out)
}

/// Closed outline of a `mean ± std` band: upper edge left to right, then lower edge back.
pub fn band_polygon(xs: &[f64], stats: &[Stat]) -> Vec<(f64, f64)> {
    let upper = xs.iter().zip(stats).map(|(&x, s)| (x, s.mean + s.std));
    let lower = xs.iter().zip(stats).rev().map(|(&x, s)| (x, s.mean - s.std));
    upper.chain(lower).collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

/// Class fractions against bottleneck for one depth and modality, one panel per class.
pub fn fraction_svg(summary: &PopulationSummary, depth: usize, modality: Modality) -> String {
    let bottlenecks = summary.bottlenecks();
    let layers = summary.layers(depth);
    let (pw, ph, left, top) = (260.0, 200.0, 50.0, 40.0);
    let width = left + 3.0 * (pw + 30.0) + 120.0;
    let height = top + ph + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="18" font-size="14">{modality} classes, ventral depth {depth}</text>"#
    );
    let span = (bottlenecks.len().max(2) - 1) as f64;
    for (panel, class) in OpponencyClass::ALL.into_iter().enumerate() {
        let ox = left + panel as f64 * (pw + 30.0);
        let sx = |i: usize| ox + pw * i as f64 / span;
        let sy = |v: f64| top + ph * (1.0 - v.clamp(0.0, 1.0));
        let _ = writeln!(
            s,
            r##"<rect x="{ox}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(s, r#"<text x="{ox}" y="{}">{class}</text>"#, top - 6.0);
        for t in [0.0, 0.5, 1.0] {
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{t}</text>"#, ox - 4.0, sy(t) + 4.0);
        }
        for (i, b) in bottlenecks.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{b}</text>"#,
                sx(i),
                top + ph + 14.0
            );
        }
        for (li, &layer) in layers.iter().enumerate() {
            let colour = PALETTE[li % PALETTE.len()];
            let mut xs = Vec::new();
            let mut stats = Vec::new();
            for (i, &b) in bottlenecks.iter().enumerate() {
                if let Some(st) = summary.get(b, depth, layer, modality, class) {
                    xs.push(i);
                    stats.push(st);
                }
            }
            let band: Vec<(f64, f64)> = band_polygon(&xs.iter().map(|&i| i as f64).collect::<Vec<_>>(), &stats)
                .into_iter()
                .map(|(x, y)| (sx(x as usize), sy(y)))
                .collect();
            let line: Vec<(f64, f64)> = xs.iter().zip(&stats).map(|(&i, st)| (sx(i), sy(st.mean))).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
                points(&band)
            );
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                points(&line)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">bottleneck</text>"#,
        left + 1.5 * (pw + 30.0),
        top + ph + 32.0
    );
    let lx = left + 3.0 * (pw + 30.0);
    for (li, layer) in layers.iter().enumerate() {
        let y = top + 14.0 * li as f64;
        let colour = PALETTE[li % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{lx}" y="{y}" width="10" height="10" fill="{colour}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{layer}</text>"#, lx + 14.0, y + 9.0);
    }
    s.push_str("</svg>\n");
    s
}

fn wedge(cx: f64, cy: f64, r: f64, start_deg: f64, end_deg: f64) -> String {
    // hue 0° at the top, increasing clockwise
    let p = |deg: f64| {
        let a = (deg - 90.0) * PI / 180.0;
        (cx + r * a.cos(), cy + r * a.sin())
    };
    let (x0, y0) = p(start_deg);
    let (x1, y1) = p(end_deg);
    format!("M{cx:.2},{cy:.2} L{x0:.2},{y0:.2} A{r:.2},{r:.2} 0 0 1 {x1:.2},{y1:.2} Z")
}

fn polar(s: &mut String, cx: f64, cy: f64, radius: f64, counts: &[u64], label: &str) {
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let _ = writeln!(
        s,
        r##"<circle cx="{cx}" cy="{cy}" r="{radius}" fill="none" stroke="#ccc"/>"##
    );
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let start = i as f64 * HUE_BIN_WIDTH;
        let r = radius * (c as f64 / max).sqrt();
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="hsl({:.1},100%,50%)" stroke="#333" stroke-width="0.5"/>"##,
            wedge(cx, cy, r, start, start + HUE_BIN_WIDTH),
            start + HUE_BIN_WIDTH / 2.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{cx}" y="{}" text-anchor="middle">{label}</text>"#,
        cy + radius + 14.0
    );
}

/// Polar histograms of most excitatory and most inhibitory hues, one row per layer.
pub fn hue_svg(summary: &PopulationSummary, bottleneck: usize, depth: usize) -> String {
    let rows: Vec<(&LayerId, &HueHistogram)> = summary
        .hues
        .iter()
        .filter(|((b, d, _), _)| (*b, *d) == (bottleneck, depth))
        .map(|((_, _, l), h)| (l, h))
        .collect();
    let radius = 60.0;
    let cell = 2.0 * radius + 40.0;
    let width = 2.0 * cell + 120.0;
    let height = 30.0 + cell * rows.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="18" font-size="14">opponent hues, bottleneck {bottleneck}, ventral depth {depth}</text>"#
    );
    for (row, (layer, h)) in rows.iter().enumerate() {
        let cy = 30.0 + cell * row as f64 + radius + 10.0;
        let _ = writeln!(s, r#"<text x="10" y="{cy}">{layer}</text>"#);
        polar(&mut s, 120.0 + radius, cy, radius, &h.excitatory, "excitatory");
        polar(&mut s, 120.0 + cell + radius, cy, radius, &h.inhibitory, "inhibitory");
    }
    s.push_str("</svg>\n");
    s
}

/// Write `fractions_d{d}_{modality}.svg` and `hues_b{b}_d{d}.svg` files into `dir`.
pub fn emit_svg(summary: &PopulationSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for depth in summary.depths() {
        for modality in Modality::ALL {
            let path = dir.join(format!("fractions_d{depth}_{modality}.svg"));
            fs::write(&path, fraction_svg(summary, depth, modality))?;
            out.push(path);
        }
    }
    let configs: BTreeMap<(usize, usize), ()> = summary.hues.keys().map(|(b, d, _)| ((*b, *d), ())).collect();
    for (b, d) in configs.into_keys() {
        let path = dir.join(format!("hues_b{b}_d{d}.svg"));
        fs::write(&path, hue_svg(summary, b, d))?;
        out.push(path);
    }
    Ok(out)
}
