//! Minimal hand-rolled SVG log-log scatter/line plot for the benchmark
//! output. CSV stays the canonical artifact; the plot is a convenience.

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    /// (n, time_ms)
    pub points: Vec<(f64, f64)>,
}

pub fn log_log_plot(title: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        let (lx, ly) = (x.log10(), y.max(1e-6).log10());
        x0 = x0.min(lx);
        x1 = x1.max(lx);
        y0 = y0.min(ly);
        y1 = y1.max(ly);
    }
    if !x0.is_finite() || x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if !y0.is_finite() || y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let px = |lx: f64| ml + (lx - x0) / (x1 - x0) * (w - ml - mr);
    let py = |ly: f64| h - mb - (ly - y0) / (y1 - y0) * (h - mt - mb);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"15\">{title}</text>\n",
        ml
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    // decade ticks
    for ex in (x0.floor() as i64)..=(x1.ceil() as i64) {
        let x = px(ex as f64);
        if x >= ml - 1.0 && x <= w - mr + 1.0 {
            out.push_str(&format!(
                "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#ccc\"/>\n<text x=\"{x}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">1e{ex}</text>\n",
                mt,
                h - mb,
                h - mb + 18.0
            ));
        }
    }
    for ey in (y0.floor() as i64)..=(y1.ceil() as i64) {
        let y = py(ey as f64);
        if y >= mt - 1.0 && y <= h - mb + 1.0 {
            out.push_str(&format!(
                "<line x1=\"{ml}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ccc\"/>\n<text x=\"{}\" y=\"{y}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">1e{ey}</text>\n",
                w - mr,
                ml - 6.0
            ));
        }
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">n</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" transform=\"rotate(-90 16 {})\">time_ms</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    for s in series {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x.log10()), py(y.max(1e-6).log10())))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            pts.join(" "),
            s.color
        ));
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{}\"/>\n",
                px(x.log10()),
                py(y.max(1e-6).log10()),
                s.color
            ));
        }
    }
    let mut legend_y = mt + 10.0;
    for s in series {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" font-family=\"monospace\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            w - mr - 120.0,
            s.color,
            s.name
        ));
        legend_y += 16.0;
    }
    out.push_str("</svg>\n");
    out
}
