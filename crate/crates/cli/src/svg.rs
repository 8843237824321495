//! Native log-log SVG plots: no plotting dependency, CSV stays the ground
//! truth.

use std::fmt::Write;

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct RefSlope {
    pub slope: f64,
    pub label: String,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

struct LogAxis {
    lo: f64,
    hi: f64,
    offset: f64,
    span: f64,
    flip: bool,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, offset: f64, span: f64, flip: bool) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if v > 0.0 && v.is_finite() {
                lo = lo.min(v.log10());
                hi = hi.max(v.log10());
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        let pad = 0.05 * (hi - lo).max(0.5);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            offset,
            span,
            flip,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = (v.log10() - self.lo) / (self.hi - self.lo);
        let t = if self.flip { 1.0 - t } else { t };
        self.offset + t * self.span
    }

    fn decades(&self) -> Vec<i32> {
        (self.lo.ceil() as i32..=self.hi.floor() as i32).collect()
    }
}

/// Renders series on base-10 log-log axes with decade gridlines, a legend
/// and an optional labeled reference-slope line.
pub fn render_loglog(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    reference: Option<RefSlope>,
) -> String {
    let x_axis = LogAxis::new(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
        MARGIN_L,
        WIDTH - MARGIN_L - MARGIN_R,
        false,
    );
    let y_axis = LogAxis::new(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        MARGIN_T,
        HEIGHT - MARGIN_T - MARGIN_B,
        true,
    );

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );

    // frame
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(
        svg,
        r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );

    // decade gridlines and tick labels
    for d in x_axis.decades() {
        let x = x_axis.map(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">1e{d}</text>"#,
            y1 + 16.0
        );
    }
    for d in y_axis.decades() {
        let y = y_axis.map(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">1e{d}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{xlabel}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{ylabel}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    // series
    for s in series {
        let mut path = String::new();
        for (i, (px, py)) in s.points.iter().enumerate() {
            let (mx, my) = (x_axis.map(*px), y_axis.map(*py));
            let _ = write!(path, "{}{mx:.2},{my:.2} ", if i == 0 { "M" } else { "L" });
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.6"/>"#,
            path.trim_end(),
            s.color
        );
        for (px, py) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                x_axis.map(*px),
                y_axis.map(*py),
                s.color
            );
        }
    }

    // reference slope anchored at the lower right of the data
    if let Some(ref_line) = reference {
        if let Some(last) = series
            .iter()
            .filter_map(|s| s.points.last())
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            let x_end = last.0;
            let x_start = x_end / 10f64.powf(0.8);
            let y_end = last.1 / 1.8;
            let y_start = y_end * (x_start / x_end).powf(ref_line.slope) / 1.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6 3"/>"#,
                x_axis.map(x_start),
                y_axis.map(y_start),
                x_axis.map(x_end),
                y_axis.map(y_end)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
                x_axis.map(x_start),
                y_axis.map(y_start) + 14.0,
                ref_line.label
            );
        }
    }

    // legend
    let mut ly = MARGIN_T + 14.0;
    for s in series {
        let lx = WIDTH - MARGIN_R - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 24.0,
            ly - 4.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 30.0,
            s.name
        );
        ly += 16.0;
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_svg() {
        let series = vec![Series {
            name: "eta".into(),
            color: "#1f77b4",
            points: vec![(10.0, 1.0), (100.0, 0.3), (1000.0, 0.1)],
        }];
        let svg = render_loglog(
            "convergence",
            "N",
            "error",
            &series,
            Some(RefSlope {
                slope: -0.5,
                label: "slope -1/2".into(),
            }),
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("slope -1/2"));
        assert!(svg.contains("1e2"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
