//! PNG rendering of run artifacts: a θ heatmap per snapshot and one sheet of
//! time-series panels covering every CSV column.

use std::fs;
use std::path::{Path, PathBuf};

use font8x8::legacy::BASIC_LEGACY;

use crate::error::{CliError, Result};
use crate::run::{DIAGNOSTICS_CSV, TRAJECTORY_CSV};
use crate::snapshot::{read_sidecar, read_values};

type Rgb = [u8; 3];

const WHITE: Rgb = [255, 255, 255];
const BLACK: Rgb = [0, 0, 0];
const GREY: Rgb = [200, 200, 200];
const LINE: Rgb = [31, 90, 170];

/// An RGB raster.
struct Canvas {
    w: usize,
    h: usize,
    px: Vec<u8>,
}

impl Canvas {
    fn new(w: usize, h: usize, fill: Rgb) -> Self {
        Self {
            w,
            h,
            px: fill.iter().copied().cycle().take(w * h * 3).collect(),
        }
    }

    fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
            let i = 3 * (y as usize * self.w + x as usize);
            self.px[i..i + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: Rgb) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            self.set((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64, c);
        }
    }

    fn text(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
        for (k, ch) in s.chars().enumerate() {
            let glyph = BASIC_LEGACY[if ch.is_ascii() { ch as usize } else { b'?' as usize }];
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits >> col & 1 == 1 {
                        self.set(x + 8 * k as i64 + col, y + row as i64, c);
                    }
                }
            }
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), self.w as u32, self.h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| CliError::io(path, std::io::Error::other(e));
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&self.px).map_err(png_err)?;
        writer.finish().map_err(png_err)
    }
}

/// Diverging blue-white-red map on `[-1, 1]`.
fn diverging(t: f64) -> Rgb {
    let t = t.clamp(-1.0, 1.0);
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(-t), fade(-t), 255]
    }
}

fn heatmap(bin: &Path, target: &Path) -> Result<()> {
    let meta = read_sidecar(bin)?;
    let values = read_values(bin)?;
    let n = meta.n;
    if values.len() != n * n {
        return Err(CliError::MissingArtifacts(format!(
            "{}: {} values for an n = {n} grid",
            bin.display(),
            values.len()
        )));
    }
    let scale = (512 / n).max(1);
    let size = n * scale;
    let amp = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut canvas = Canvas::new(size, size, WHITE);
    for py in 0..size {
        // y grows upwards
        let iy = n - 1 - py / scale;
        for px in 0..size {
            let v = values[iy * n + px / scale];
            canvas.set(px as i64, py as i64, diverging(if amp > 0.0 { v / amp } else { 0.0 }));
        }
    }
    let l = meta.side_length;
    for z in &meta.vortices {
        let cx = (z.x / l * size as f64).round() as i64;
        let cy = ((1.0 - z.y / l) * size as f64).round() as i64;
        for d in -5..=5 {
            for w in -1..=1 {
                canvas.set(cx + d, cy + w, BLACK);
                canvas.set(cx + w, cy + d, BLACK);
            }
        }
    }
    canvas.text(4, 4, &format!("t = {:.6}", meta.t), BLACK);
    canvas.save(target)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::MissingArtifacts(format!("{}: {e}", path.display())))?;
    let bad = |e: csv::Error| CliError::MissingArtifacts(format!("{}: {e}", path.display()));
    let header: Vec<String> = rdr.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        rows.push(rec.iter().map(|f| f.parse::<f64>().unwrap_or(f64::NAN)).collect());
    }
    Ok(Table { header, rows })
}

const PANEL_W: usize = 260;
const PANEL_H: usize = 150;
const PANELS_PER_ROW: usize = 4;

fn panel(canvas: &mut Canvas, ox: usize, oy: usize, title: &str, ts: &[f64], ys: &[f64]) {
    let (x0, y0) = (ox as f64 + 10.0, oy as f64 + 20.0);
    let (w, h) = ((PANEL_W - 20) as f64, (PANEL_H - 30) as f64);
    canvas.text(ox as i64 + 4, oy as i64 + 4, &title.chars().take(31).collect::<String>(), BLACK);
    canvas.line((x0, y0 + h), (x0 + w, y0 + h), GREY);
    canvas.line((x0, y0), (x0, y0 + h), GREY);
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| t.is_finite() && y.is_finite())
        .map(|(t, y)| (*t, *y))
        .collect();
    if pts.is_empty() {
        return;
    }
    let (tmin, tmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let map = |(t, y): (f64, f64)| {
        let u = if tmax > tmin { (t - tmin) / (tmax - tmin) } else { 0.5 };
        let v = if ymax > ymin { (y - ymin) / (ymax - ymin) } else { 0.5 };
        (x0 + u * w, y0 + (1.0 - v) * h)
    };
    for pair in pts.windows(2) {
        canvas.line(map(pair[0]), map(pair[1]), LINE);
    }
    let (px, py) = map(pts[0]);
    canvas.set(px.round() as i64, py.round() as i64, LINE);
}

fn panel_sheet(table: &Table, target: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(CliError::MissingArtifacts("no samples".into()));
    }
    let columns = table.header.len().saturating_sub(1).max(1);
    let rows = columns.div_ceil(PANELS_PER_ROW);
    let mut canvas = Canvas::new(PANEL_W * PANELS_PER_ROW, PANEL_H * rows, WHITE);
    let ts: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    for (k, name) in table.header.iter().enumerate().skip(1) {
        let ys: Vec<f64> = table.rows.iter().map(|r| r.get(k).copied().unwrap_or(f64::NAN)).collect();
        let slot = k - 1;
        panel(
            &mut canvas,
            (slot % PANELS_PER_ROW) * PANEL_W,
            (slot / PANELS_PER_ROW) * PANEL_H,
            name,
            &ts,
            &ys,
        );
    }
    canvas.save(target)
}

/// Renders `heatmap_<stem>.png` for every snapshot and `panels.png` from the
/// diagnostics (or trajectory) CSV; returns the written paths.
pub fn emit_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let csv_path = [DIAGNOSTICS_CSV, TRAJECTORY_CSV]
        .iter()
        .map(|f| run_dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            CliError::MissingArtifacts(format!(
                "{}: neither {DIAGNOSTICS_CSV} nor {TRAJECTORY_CSV} found",
                run_dir.display()
            ))
        })?;
    let table = read_table(&csv_path)?;
    let mut written = Vec::new();
    let panels = run_dir.join("panels.png");
    panel_sheet(&table, &panels)?;
    written.push(panels);

    let mut bins: Vec<PathBuf> = fs::read_dir(run_dir)
        .map_err(|e| CliError::io(run_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin") && p.with_extension("txt").is_file())
        .collect();
    bins.sort();
    for bin in bins {
        let stem = bin.file_stem().expect("file name").to_string_lossy().into_owned();
        let target = run_dir.join(format!("heatmap_{stem}.png"));
        heatmap(&bin, &target)?;
        written.push(target);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(diverging(0.0), WHITE);
        assert_eq!(diverging(1.0), [255, 0, 0]);
        assert_eq!(diverging(-2.0), [0, 0, 255]);
    }

    #[test]
    fn empty_table_has_no_samples() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(DIAGNOSTICS_CSV), "t [time],mean [theta]\n").unwrap();
        let err = emit_plots(dir.path()).unwrap_err();
        assert_eq!(err.to_string(), "no samples");
    }

    #[test]
    fn missing_csv_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plots(dir.path()), Err(CliError::MissingArtifacts(_))));
    }
}
