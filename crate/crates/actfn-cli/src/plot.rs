//! Minimal SVG renderings: line plots of CSV columns and a heat map for
//! `x,y,value` grids.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// Parsed numeric CSV: header plus rows of floats.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<Table, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or("empty CSV")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("line {}: `{s}` is not a number", i + 2)))
            .collect::<Result<Vec<f64>, String>>()?;
        if row.len() != header.len() {
            return Err(format!("line {}: {} fields, header has {}", i + 2, row.len(), header.len()));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("CSV has no data rows".into());
    }
    Ok(Table { header, rows })
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(out: &mut String, title: &str, xl: (f64, f64), yl: (f64, f64), xlabel: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>
<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{MARGIN}" y="{}" text-anchor="start">{:.4}</text>
<text x="{}" y="{}" text-anchor="end">{:.4}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="{}" y="{}" text-anchor="end">{:.4}</text>
<text x="{}" y="{}" text-anchor="end">{:.4}</text>
"#,
        W / 2.0,
        escape(title),
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN,
        H - MARGIN + 15.0,
        xl.0,
        W - MARGIN,
        H - MARGIN + 15.0,
        xl.1,
        W / 2.0,
        H - 10.0,
        escape(xlabel),
        MARGIN - 4.0,
        H - MARGIN,
        yl.0,
        MARGIN - 4.0,
        MARGIN + 10.0,
        yl.1,
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn sx(x: f64, xl: (f64, f64)) -> f64 {
    MARGIN + (x - xl.0) / (xl.1 - xl.0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64, yl: (f64, f64)) -> f64 {
    H - MARGIN - (y - yl.0) / (yl.1 - yl.0) * (H - 2.0 * MARGIN)
}

/// One polyline per `y` column against column `x`.
pub fn line_plot(t: &Table, x: usize, ys: &[usize], title: &str) -> String {
    let xl = extent(t.rows.iter().map(|r| r[x]));
    let yl = extent(t.rows.iter().flat_map(|r| ys.iter().map(move |&c| r[c])));
    let mut out = String::new();
    frame(&mut out, title, xl, yl, &t.header[x]);
    for (n, &c) in ys.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let pts: Vec<String> = t
            .rows
            .iter()
            .filter(|r| r[x].is_finite() && r[c].is_finite())
            .map(|r| format!("{:.2},{:.2}", sx(r[x], xl), sy(r[c], yl)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN + 4.0,
            MARGIN + 14.0 * (n as f64 + 1.0),
            escape(&t.header[c])
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of a `x,y,value` table laid out on a regular lattice.
pub fn heat_map(t: &Table, x: usize, y: usize, v: usize, title: &str) -> String {
    let xl = extent(t.rows.iter().map(|r| r[x]));
    let yl = extent(t.rows.iter().map(|r| r[y]));
    let vl = extent(t.rows.iter().map(|r| r[v]));
    let mut xs: Vec<f64> = t.rows.iter().map(|r| r[x]).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    let mut ys: Vec<f64> = t.rows.iter().map(|r| r[y]).collect();
    ys.sort_by(|a, b| a.total_cmp(b));
    ys.dedup();
    let cw = (W - 2.0 * MARGIN) / xs.len().max(1) as f64;
    let ch = (H - 2.0 * MARGIN) / ys.len().max(1) as f64;
    let mut out = String::new();
    frame(&mut out, title, xl, yl, &t.header[x]);
    for r in &t.rows {
        let u = ((r[v] - vl.0) / (vl.1 - vl.0)).clamp(0.0, 1.0);
        let (red, blue) = ((255.0 * u) as u8, (255.0 * (1.0 - u)) as u8);
        let px = MARGIN + (r[x] - xl.0) / (xl.1 - xl.0) * (W - 2.0 * MARGIN - cw);
        let py = H - MARGIN - ch - (r[y] - yl.0) / (yl.1 - yl.0) * (H - 2.0 * MARGIN - ch);
        let _ = writeln!(
            out,
            r##"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="#{red:02x}40{blue:02x}"/>"##,
            cw + 0.3,
            ch + 0.3
        );
    }
    out.push_str("</svg>\n");
    out
}
