//! CSV, summary and SVG writers. Numbers are written with 17 significant
//! digits so files compare exactly across runs.

use std::fmt::Write as _;

use psgleco::{AggregateRecord, RunRecord};

pub const RUN_HEADER: &str = "k,f,d_norm,e,delta_cap,alpha,cg_iters";
pub const AGGREGATE_HEADER: &str = "k,d_norm_mean,d_norm_min,d_norm_max,e_mean,e_min,e_max";

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run_csv(run: &RunRecord) -> String {
    let mut out = String::from(RUN_HEADER);
    out.push('\n');
    for r in &run.rows {
        let f = r.value.map(num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            f,
            num(r.d_norm),
            num(r.e),
            num(r.step_len),
            num(r.alpha),
            r.cg_iters
        );
    }
    out
}

pub fn aggregate_csv(agg: &AggregateRecord) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in &agg.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            num(r.d_norm_mean),
            num(r.d_norm_min),
            num(r.d_norm_max),
            num(r.e_mean),
            num(r.e_min),
            num(r.e_max)
        );
    }
    out
}

/// Minimum of the mean curves (the figure-legend numbers) followed by
/// per-seed minima and any excluded runs.
pub fn summary(strategy: &str, agg: &AggregateRecord) -> String {
    let min_e = agg
        .rows
        .iter()
        .map(|r| r.e_mean)
        .fold(f64::INFINITY, f64::min);
    let mut out = String::new();
    let _ = writeln!(out, "strategy {strategy}");
    let _ = writeln!(out, "runs_completed {}", agg.runs.len());
    let _ = writeln!(out, "runs_failed {}", agg.excluded.len());
    let _ = writeln!(out, "min_d_norm {}", num(agg.min_mean_d_norm()));
    let _ = writeln!(out, "min_e {}", num(min_e));
    for m in &agg.minima {
        let _ = writeln!(
            out,
            "seed {} min_d_norm {} min_e {}",
            m.seed,
            num(m.min_d_norm),
            num(m.min_e)
        );
    }
    for (seed, reason) in &agg.excluded {
        let _ = writeln!(out, "failed seed {seed}: {reason}");
    }
    out
}

/// Line chart of the given series against `k` on a base-10 log axis.
/// Non-positive values are left out.
pub fn curves_svg(title: &str, series: &[(&str, Vec<(usize, f64)>)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];

    let points: Vec<(usize, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter().copied())
        .filter(|&(_, v)| v > 0.0 && v.is_finite())
        .collect();
    let k_max = points.iter().map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let lo = points
        .iter()
        .map(|p| p.1.log10())
        .fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.1.log10())
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if points.is_empty() {
        (0.0, 1.0)
    } else {
        (lo.floor(), hi.ceil().max(lo.floor() + 1.0))
    };
    let px = |k: f64| LEFT + (W - LEFT - RIGHT) * k / k_max;
    let py = |l: f64| TOP + (H - TOP - BOTTOM) * (hi - l) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let mut decade = lo as i32;
    while decade as f64 <= hi {
        let y = py(decade as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
        decade += 1;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="{:.2}">0</text><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        H - BOTTOM + 18.0,
        W - RIGHT,
        H - BOTTOM + 18.0,
        k_max
    );
    for (i, (name, s)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s
            .iter()
            .filter(|&&(_, v)| v > 0.0 && v.is_finite())
            .map(|&(k, v)| format!("{:.2},{:.2}", px(k as f64), py(v.log10())))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.678901234567] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn svg_skips_nonpositive_points() {
        let svg = curves_svg("t", &[("d", vec![(0, 1.0), (1, 0.0), (2, 0.01)])]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("1e-2"));
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }
}
