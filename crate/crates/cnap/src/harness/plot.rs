//! Static SVG learning-curve plots: one line per variant with a shaded
//! min-max band across seeds.

use std::path::Path;

use super::HarnessError;

/// One plotted variant: per-seed (env_steps, mean_reward) curves.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub seeds: Vec<Vec<(f64, f64)>>,
}

const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 70.0;

/// Parses a harness `curve.csv` into per-seed (env_steps, mean_reward)
/// series.
pub fn read_curve_csv(path: &Path) -> Result<Vec<Vec<(f64, f64)>>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Plot(format!("cannot read {}: {e}", path.display())))?;
    let mut by_seed: std::collections::BTreeMap<u64, Vec<(f64, f64)>> = Default::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(HarnessError::Plot(format!("{}:{}: short row", path.display(), i + 1)));
        }
        let seed: u64 = fields[0]
            .parse()
            .map_err(|_| HarnessError::Plot(format!("{}:{}: bad seed", path.display(), i + 1)))?;
        let steps: f64 = fields[2].parse().map_err(|_| {
            HarnessError::Plot(format!("{}:{}: bad env_steps", path.display(), i + 1))
        })?;
        let reward: f64 = fields[3].parse().map_err(|_| {
            HarnessError::Plot(format!("{}:{}: bad mean reward", path.display(), i + 1))
        })?;
        by_seed.entry(seed).or_default().push((steps, reward));
    }
    Ok(by_seed.into_values().collect())
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-12);
        MARGIN + (v - self.x_min) / span * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-12);
        HEIGHT - MARGIN - (v - self.y_min) / span * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Writes mean curves with pointwise min-max bands across seeds. Errors on
/// empty input; a single curve renders a zero-width band.
pub fn emit_plot(series: &[PlotSeries], path: &Path) -> Result<(), HarnessError> {
    if series.is_empty() || series.iter().all(|s| s.seeds.is_empty()) {
        return Err(HarnessError::Plot("no curves to plot".into()));
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for seed in &s.seeds {
            for &(x, y) in seed {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !x_min.is_finite() {
        return Err(HarnessError::Plot("curves contain no points".into()));
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let frame = Frame { x_min, x_max, y_min, y_max };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.0}</text>\n",
            frame.x(fx),
            HEIGHT - MARGIN + 20.0,
            fx
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.1}</text>\n",
            MARGIN - 8.0,
            frame.y(fy) + 4.0,
            fy
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">env steps</text>\n",
        WIDTH / 2.0,
        HEIGHT - 20.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">mean reward</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let len = s.seeds.iter().map(Vec::len).min().unwrap_or(0);
        if len == 0 {
            continue;
        }
        let mut mean_pts = Vec::with_capacity(len);
        let mut upper = Vec::with_capacity(len);
        let mut lower = Vec::with_capacity(len);
        for t in 0..len {
            let x = s.seeds[0][t].0;
            let ys: Vec<f64> = s.seeds.iter().map(|seed| seed[t].1).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            mean_pts.push((x, mean));
            upper.push((x, hi));
            lower.push((x, lo));
        }

        let mut band = String::new();
        for &(x, y) in &upper {
            band.push_str(&format!("{:.2},{:.2} ", frame.x(x), frame.y(y)));
        }
        for &(x, y) in lower.iter().rev() {
            band.push_str(&format!("{:.2},{:.2} ", frame.x(x), frame.y(y)));
        }
        svg.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{color}\" opacity=\"0.15\" stroke=\"none\"/>\n",
            band.trim_end()
        ));

        let line: String = mean_pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect::<Vec<_>>()
            .join(" ");
        svg.push_str(&format!(
            "<polyline points=\"{line}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n"
        ));

        let ly = MARGIN + 18.0 * idx as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            MARGIN + 10.0,
            MARGIN + 40.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            MARGIN + 48.0,
            ly + 4.0,
            s.label
        ));
    }
    svg.push_str("</svg>\n");

    debug_assert!(validate_svg(&svg), "generated SVG failed structural check");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}

/// Structural well-formedness check: tags balance and the root is `<svg>`.
pub fn validate_svg(text: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut saw_svg = false;
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let Some(close_rel) = rest[open..].find('>') else {
            return false;
        };
        let tag = &rest[open + 1..open + close_rel];
        rest = &rest[open + close_rel + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(top) if top == name.trim() => {}
                _ => return false,
            }
        } else if !tag.ends_with('/') {
            let name = tag.split_whitespace().next().unwrap_or("");
            if name == "svg" {
                saw_svg = true;
            }
            stack.push(name.to_string());
        }
    }
    saw_svg && stack.is_empty()
}
