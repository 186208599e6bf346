//! Files written for a finished run: JSON report, tables, CSV grids and
//! small SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::driver::{RunMode, RunReport, StageReport};
use crate::error::{AneError, Result};
use crate::partition::{breaklines_csv, merge_small_cells, physical_partition};
use crate::quadrature::{build_mesh, Domain, Point, QuadratureMesh};
use crate::spline_net::SplineNetwork;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per stage in the layout of the paper-style result tables.
pub fn table_csv(report: &RunReport) -> String {
    let label = match report.mode {
        RunMode::Adaptive => "Adaptive 2-layer",
        RunMode::Fixed => "Fixed 2-layer",
    };
    let mut s = String::from("NN,#Parameters,rel_L2,rel_energy,xi_rel\n");
    for st in &report.stages {
        let _ = writeln!(
            s,
            "{label} ({}),{},{},{},{}",
            st.neurons,
            st.params,
            opt(st.errors.map(|e| e.rel_l2)),
            opt(st.errors.map(|e| e.rel_energy)),
            st.indicators.relative
        );
    }
    s
}

/// Samples of `u_𝒯` and the recovered flux on a uniform grid over the
/// domain's bounding box (points outside the domain are skipped).
pub fn solution_grid_csv(domain: &Domain, stage: &StageReport, n: usize) -> Result<String> {
    let net = SplineNetwork::from_snapshot(&stage.network)?;
    let flux = SplineNetwork::from_snapshot(&stage.flux_network)?;
    let pts = plot_points(domain, n);
    let u = net.evaluate(&pts)?;
    let s = flux.evaluate(&pts)?;
    let mut out = String::new();
    if domain.dim() == 1 {
        out.push_str("x,u,sigma\n");
        for ((p, u), s) in pts.iter().zip(&u).zip(&s) {
            let _ = writeln!(out, "{},{},{}", p[0], u[0], s[0]);
        }
    } else {
        out.push_str("x,y,u,sigma_x,sigma_y\n");
        for ((p, u), s) in pts.iter().zip(&u).zip(&s) {
            let _ = writeln!(out, "{},{},{},{},{}", p[0], p[1], u[0], s[0], s[1]);
        }
    }
    Ok(out)
}

fn plot_points(domain: &Domain, n: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = domain.bounding_box();
    let step = |j: usize, a: f64, b: f64| a + (b - a) * j as f64 / (n - 1) as f64;
    if domain.dim() == 1 {
        return (0..n).map(|j| vec![step(j, lo[0], hi[0])]).collect();
    }
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = [step(j, lo[0], hi[0]), step(i, lo[1], hi[1])];
            if domain.contains(&p) {
                pts.push(p.to_vec());
            }
        }
    }
    pts
}

struct Frame {
    lo: Point,
    hi: Point,
    size: f64,
    pad: f64,
}

impl Frame {
    fn new(lo: Point, hi: Point) -> Self {
        let span = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = span(lo[0], hi[0]);
        let (y0, y1) = span(lo[1], hi[1]);
        Frame {
            lo: [x0, y0],
            hi: [x1, y1],
            size: 400.0,
            pad: 30.0,
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        let sx = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]);
        let sy = (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]);
        (self.pad + sx * self.size, self.pad + (1.0 - sy) * self.size)
    }

    fn open(&self, title: &str) -> String {
        let total = self.size + 2.0 * self.pad;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total}\" height=\"{total}\" viewBox=\"0 0 {total} {total}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">{title}</text>\n",
            self.pad
        )
    }
}

/// Line plot of one or more `(x, y)` series.
pub fn svg_lines(title: &str, series: &[(&str, Vec<Point>)]) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (_, pts) in series {
        for p in pts.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
            for j in 0..2 {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
    }
    let frame = Frame::new(lo, hi);
    let mut s = frame.open(title);
    for (color, pts) in series {
        let mut path = String::new();
        for p in pts.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
            let (x, y) = frame.map(*p);
            let _ = write!(path, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.trim_end()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn heat_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Colored dots at `points` with the network's break lines drawn on top.
pub fn svg_heat(title: &str, domain: &Domain, points: &[Point], values: &[f64], net: &SplineNetwork) -> String {
    let (lo, hi) = domain.bounding_box();
    let frame = Frame::new(lo, hi);
    let mut s = frame.open(title);
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if vmax > vmin { vmax - vmin } else { 1.0 };
    for (p, v) in points.iter().zip(values) {
        let (x, y) = frame.map(*p);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.6\" fill=\"{}\"/>",
            heat_color((v - vmin) / scale)
        );
    }
    for (w, b) in net.omegas().iter().zip(net.biases()) {
        if let Some((p, q)) = clip_line(*w, *b, lo, hi) {
            let (x0, y0) = frame.map(p);
            let (x1, y1) = frame.map(q);
            let _ = writeln!(
                s,
                "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"black\" stroke-width=\"0.8\"/>"
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Segment of `ω·x = b` inside the box `[lo, hi]`.
fn clip_line(w: Point, b: f64, lo: Point, hi: Point) -> Option<(Point, Point)> {
    let mut hits: Vec<Point> = Vec::new();
    for &x in &[lo[0], hi[0]] {
        if w[1].abs() > 1e-14 {
            let y = (b - w[0] * x) / w[1];
            if y >= lo[1] && y <= hi[1] {
                hits.push([x, y]);
            }
        }
    }
    for &y in &[lo[1], hi[1]] {
        if w[0].abs() > 1e-14 {
            let x = (b - w[1] * y) / w[0];
            if x >= lo[0] && x <= hi[0] {
                hits.push([x, y]);
            }
        }
    }
    if hits.len() < 2 {
        return None;
    }
    Some((hits[0], hits[hits.len() - 1]))
}

fn write(dir: &Path, name: &str, body: &str, manifest: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| AneError::io(&path, e))?;
    manifest.push(path);
    Ok(())
}

/// Write every artifact of `report` into `out_dir`; returns the written paths.
pub fn emit_artifacts(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.stages.is_empty() {
        return Err(AneError::Precondition("the report has no stages".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| AneError::io(out_dir, e))?;
    let mut manifest = Vec::new();
    let mesh = build_mesh(&report.domain, report.config.resolution)?;
    let mut report = report.clone();
    for st in &mut report.stages {
        let name = format!("net_stage{}.json", st.stage);
        st.network_path = Some(name.clone());
        let net = SplineNetwork::from_snapshot(&st.network)?;
        write(out_dir, &name, &net.to_json()?, &mut manifest)?;
        stage_files(
            &report.domain,
            report.config.plot_grid,
            report.config.min_cell_points,
            &mesh,
            st,
            out_dir,
            &mut manifest,
        )?;
    }
    write(out_dir, "table.csv", &table_csv(&report), &mut manifest)?;
    write(out_dir, "run.json", &serde_json::to_string_pretty(&report)?, &mut manifest)?;
    let listing: Vec<String> = manifest
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    write(out_dir, "manifest.json", &serde_json::to_string_pretty(&listing)?, &mut manifest)?;
    Ok(manifest)
}

fn stage_files(
    domain: &Domain,
    grid: usize,
    min_cell_points: usize,
    mesh: &QuadratureMesh,
    st: &StageReport,
    dir: &Path,
    manifest: &mut Vec<PathBuf>,
) -> Result<()> {
    let s = st.stage;
    let net = SplineNetwork::from_snapshot(&st.network)?;
    write(dir, &format!("breaklines_stage{s}.csv"), &breaklines_csv(&net), manifest)?;
    write(dir, &format!("loss_stage{s}.csv"), &st.train.trace_csv(), manifest)?;
    let grid_csv = solution_grid_csv(domain, st, grid)?;
    write(dir, &format!("solution_grid_stage{s}.csv"), &grid_csv, manifest)?;
    write(dir, &format!("indicators_stage{s}.csv"), &st.indicators.to_csv(), manifest)?;
    let raw = physical_partition(&net, mesh)?;
    let partition = merge_small_cells(&raw, &net, mesh, min_cell_points);
    write(dir, &format!("partition_stage{s}.csv"), &partition.assignment_csv(), manifest)?;
    write(dir, &format!("cells_stage{s}.csv"), &partition.cells_csv(), manifest)?;

    let loss: Vec<Point> = st.train.trace.iter().map(|&(i, l)| [i as f64, l]).collect();
    write(dir, &format!("loss_stage{s}.svg"), &svg_lines(&format!("loss, stage {s}"), &[("steelblue", loss)]), manifest)?;
    if domain.dim() == 1 {
        let pts = plot_points(domain, grid);
        let u = net.evaluate(&pts)?;
        let line: Vec<Point> = pts.iter().zip(&u).map(|(p, u)| [p[0], u[0]]).collect();
        write(
            dir,
            &format!("solution_stage{s}.svg"),
            &svg_lines(&format!("u, stage {s} ({} neurons)", st.neurons), &[("black", line)]),
            manifest,
        )?;
    } else {
        let pts: Vec<Vec<f64>> = mesh.points.iter().map(|p| p.to_vec()).collect();
        let u: Vec<f64> = net.evaluate(&pts)?.into_iter().map(|v| v[0]).collect();
        write(
            dir,
            &format!("solution_stage{s}.svg"),
            &svg_heat(&format!("u, stage {s} ({} neurons)", st.neurons), domain, &mesh.points, &u, &net),
            manifest,
        )?;
        let per_point: Vec<f64> = partition
            .cell_of_point
            .iter()
            .map(|&c| st.indicators.indicators.get(c).copied().unwrap_or(0.0))
            .collect();
        write(
            dir,
            &format!("indicators_stage{s}.svg"),
            &svg_heat(&format!("indicators, stage {s}"), domain, &mesh.points, &per_point, &net),
            manifest,
        )?;
    }
    Ok(())
}
