//! Standalone SVG output: phase portraits and case diagrams.

use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::family::{build_system, landmarks, FoldSaddleParams, Tau};
use crate::field::{NonSmoothSystem, Point};
use crate::integrator::{find_canard_cycles, flow_to_sigma, integrate, Arc};
use crate::sigma::{partition_sigma, SigmaClass};
use crate::Side;

use super::case::{event_thresholds, CaseId};
use super::signature::return_bracket;
use super::sweep::{CaseGrid, LAMBDA_BETA_RANGE};
use super::AtlasConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitOptions {
    /// Side of the square image in pixels.
    pub size: f64,
    /// Half-width of the plotted square.
    pub extent: f64,
    pub ring_seeds: usize,
    pub ring_radius: f64,
    /// Also start a trajectory at every fold.
    pub tangency_exits: bool,
    pub title: Option<String>,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self {
            size: 600.0,
            extent: 1.0,
            ring_seeds: 12,
            ring_radius: 0.6,
            tangency_exits: true,
            title: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramOptions {
    pub size: f64,
    pub title: Option<String>,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        Self {
            size: 600.0,
            title: None,
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps a square `[-extent, extent]^2` onto pixels, `y` pointing up.
struct View {
    size: f64,
    extent: f64,
    margin: f64,
}

impl View {
    fn px(&self, p: Point) -> (f64, f64) {
        let scale = self.size / (2.0 * self.extent);
        (
            self.margin + (p.x + self.extent) * scale,
            self.margin + (self.extent - p.y) * scale,
        )
    }

    fn total(&self) -> f64 {
        self.size + 2.0 * self.margin
    }
}

fn open_svg(out: &mut String, view: &View, extra_width: f64) {
    let (w, h) = (view.total() + extra_width, view.total());
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )
    .unwrap();
}

fn title(out: &mut String, view: &View, text: &Option<String>) {
    if let Some(t) = text {
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="14">{}</text>"#,
            view.margin,
            0.6 * view.margin,
            escape(t)
        )
        .unwrap();
    }
}

fn path_data(view: &View, points: &[Point], close: bool) -> String {
    let mut d = String::new();
    for (k, p) in points.iter().enumerate() {
        let (x, y) = view.px(*p);
        write!(d, "{}{x:.2},{y:.2}", if k == 0 { "M" } else { " L" }).unwrap();
    }
    if close {
        d.push_str(" Z");
    }
    d
}

fn arc_points(arc: &Arc, extent: f64) -> Vec<Point> {
    arc.samples
        .iter()
        .map(|p| Point::new(p.x.clamp(-extent, extent), p.y.clamp(-extent, extent)))
        .collect()
}

fn ring_seeds(options: &PortraitOptions) -> Vec<Point> {
    (0..options.ring_seeds)
        .map(|k| {
            // a half-step offset keeps seeds off the switching line
            let angle = std::f64::consts::TAU * (k as f64 + 0.5) / options.ring_seeds as f64;
            Point::new(
                options.ring_radius * angle.cos(),
                options.ring_radius * angle.sin(),
            )
        })
        .collect()
}

fn sigma_style(class: SigmaClass) -> (&'static str, &'static str) {
    match class {
        SigmaClass::Sliding => ("sliding", r#"stroke="black" stroke-width="4""#),
        SigmaClass::Escaping => (
            "escaping",
            r#"stroke="black" stroke-width="2.5" stroke-dasharray="8 5""#,
        ),
        _ => ("sewing", r#"stroke="black" stroke-width="1""#),
    }
}

fn marker(out: &mut String, view: &View, p: Point, class: &str, name: &str, fill: &str) {
    if p.x.abs() > view.extent || p.y.abs() > view.extent {
        return;
    }
    let (x, y) = view.px(p);
    writeln!(
        out,
        r#"<circle class="{class}" data-name="{name}" cx="{x:.2}" cy="{y:.2}" r="5" fill="{fill}" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{name}</text>"#,
        x + 6.0,
        y - 6.0
    )
    .unwrap();
}

/// The closed path through the upper arc from `anchor` and the lower arc back.
fn cycle_points(system: &NonSmoothSystem, anchor: f64, cfg: &AtlasConfig) -> Option<Vec<Point>> {
    let up = flow_to_sigma(
        &system.upper,
        Point::on_sigma(anchor),
        Side::Upper,
        &cfg.flow,
    )
    .ok()?;
    let down = flow_to_sigma(&system.lower, up.point, Side::Lower, &cfg.flow).ok()?;
    let mut points = up.arc.samples;
    points.extend(down.arc.samples.into_iter().skip(1));
    Some(points)
}

/// Phase portrait of one parameter point.
pub fn render_portrait(
    params: &FoldSaddleParams,
    options: &PortraitOptions,
    cfg: &AtlasConfig,
) -> String {
    let system = build_system(params).expect("validated parameters");
    let view = View {
        size: options.size,
        extent: options.extent,
        margin: 30.0,
    };
    let e = options.extent;
    let mut out = String::new();
    open_svg(&mut out, &view, 0.0);
    writeln!(
        out,
        r#"<rect x="0" y="0" width="{0:.0}" height="{0:.0}" fill="white"/>"#,
        view.total()
    )
    .unwrap();
    title(&mut out, &view, &options.title);

    let partition = partition_sigma(&system, (-e, e), &cfg.flow.sigma);

    out.push_str("<g fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\">\n");
    let mut seeds = ring_seeds(options);
    if options.tangency_exits {
        seeds.extend(partition.tangencies.iter().map(|t| Point::on_sigma(t.x)));
    }
    for seed in seeds {
        let trajectory = integrate(&system, seed, &cfg.flow);
        for arc in &trajectory.arcs {
            let points = arc_points(arc, e);
            if points.len() < 2 {
                continue;
            }
            writeln!(
                out,
                r#"<path class="trajectory" d="{}"/>"#,
                path_data(&view, &points, false)
            )
            .unwrap();
        }
    }
    out.push_str("</g>\n");

    if let Some(bracket) = return_bracket(params) {
        for cycle in find_canard_cycles(&system, bracket, &cfg.flow) {
            if let Some(points) = cycle_points(&system, cycle.anchor, cfg) {
                writeln!(
                    out,
                    r#"<path class="canard-cycle" d="{}" fill="none" stroke="crimson" stroke-width="2"/>"#,
                    path_data(&view, &points, true)
                )
                .unwrap();
            }
        }
    }

    for seg in &partition.segments {
        let (name, style) = sigma_style(seg.class);
        let (x1, y) = view.px(Point::on_sigma(seg.lo));
        let (x2, _) = view.px(Point::on_sigma(seg.hi));
        writeln!(
            out,
            r#"<line class="sigma {name}" x1="{x1:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" {style}/>"#
        )
        .unwrap();
    }

    let marks = landmarks(params);
    marker(&mut out, &view, marks.d, "landmark", "d", "white");
    if let Some(fold) = marks.lower_fold {
        let name = match params.tau {
            Tau::Invisible => "i",
            Tau::Visible => "e",
        };
        marker(&mut out, &view, fold.point, "landmark", name, "white");
    }
    marker(&mut out, &view, marks.h, "landmark", "h", "lightgray");
    marker(&mut out, &view, marks.j, "landmark", "j", "lightgray");
    marker(&mut out, &view, marks.saddle, "landmark", "S", "black");
    for pe in &partition.pseudo_equilibria {
        marker(
            &mut out,
            &view,
            Point::on_sigma(pe.x),
            "pseudo-eq",
            "P",
            "orange",
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Fill colour derived from a hash of the label, stable across runs.
pub(crate) fn case_color(case: CaseId) -> String {
    let digest = Sha256::digest(case.to_string().as_bytes());
    let hue = u16::from_be_bytes([digest[0], digest[1]]) % 360;
    let saturation = 45 + digest[2] % 30;
    let lightness = 55 + digest[3] % 25;
    format!("hsl({hue},{saturation}%,{lightness}%)")
}

/// Rays from the origin along which the case changes, as `(lambda, beta)`
/// end points at the edge of the plotted square.
fn boundary_rays(grid: &CaseGrid, tol_eq: f64) -> Vec<(f64, f64)> {
    let r = LAMBDA_BETA_RANGE;
    let slope_at = |beta: f64| {
        let p = FoldSaddleParams {
            tau: grid.tau,
            lambda: 0.0,
            beta,
            mu: grid.mu,
        };
        if beta > 0.0 {
            event_thresholds(&p, tol_eq)
        } else {
            vec![p.lower_fold_x()]
        }
    };
    let mut rays = vec![(-r, 0.0), (r, 0.0)];
    // every threshold is proportional to beta
    for beta in [r, -r] {
        for lambda in slope_at(beta) {
            let scale = if lambda.abs() > r {
                r / lambda.abs()
            } else {
                1.0
            };
            rays.push((lambda * scale, beta * scale));
        }
    }
    rays
}

/// Case diagram of a sweep: one coloured rectangle per cell, the boundary
/// curves, and a legend with one entry per case label found in the grid.
pub fn render_diagram(grid: &CaseGrid, options: &DiagramOptions) -> String {
    let view = View {
        size: options.size,
        extent: LAMBDA_BETA_RANGE,
        margin: 30.0,
    };
    let legend_width = 120.0;
    let mut out = String::new();
    open_svg(&mut out, &view, legend_width);
    writeln!(
        out,
        r#"<rect x="0" y="0" width="{:.0}" height="{:.0}" fill="white"/>"#,
        view.total() + legend_width,
        view.total()
    )
    .unwrap();
    title(&mut out, &view, &options.title);

    let n_l = grid.lambda_axis.len().max(1) as f64;
    let n_b = grid.beta_axis.len().max(1) as f64;
    let (w, h) = (options.size / n_l, options.size / n_b);
    out.push_str("<g stroke=\"none\">\n");
    for (j, _) in grid.beta_axis.iter().enumerate() {
        for (i, _) in grid.lambda_axis.iter().enumerate() {
            let cell = grid.cell(i, j);
            let x = view.margin + i as f64 * w;
            let y = view.margin + options.size - (j as f64 + 1.0) * h;
            writeln!(
                out,
                r#"<rect class="cell" data-case="{}" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell.case,
                w + 0.05,
                h + 0.05,
                case_color(cell.case)
            )
            .unwrap();
        }
    }
    out.push_str("</g>\n");

    let (ox, oy) = view.px(Point::ORIGIN);
    for (lambda, beta) in boundary_rays(grid, 1e-9) {
        let (x, y) = view.px(Point::new(lambda, beta));
        writeln!(
            out,
            r#"<line class="boundary" x1="{ox:.2}" y1="{oy:.2}" x2="{x:.2}" y2="{y:.2}" stroke="black" stroke-width="1"/>"#
        )
        .unwrap();
    }
    for s in &grid.boundary_samples {
        let (x, y) = view.px(Point::new(s.lambda, s.beta));
        writeln!(
            out,
            r#"<circle class="boundary-sample" data-case="{}" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}" stroke="black" stroke-width="0.5"/>"#,
            s.case,
            case_color(s.case)
        )
        .unwrap();
    }

    let x0 = view.total() + 5.0;
    for (k, case) in grid.distinct_cases().into_iter().enumerate() {
        let y = view.margin + 16.0 * k as f64;
        writeln!(
            out,
            r#"<g class="legend-entry" data-case="{case}"><rect x="{x0:.1}" y="{y:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{case}</text></g>"#,
            case_color(case),
            x0 + 16.0,
            y + 11.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
