// SPDX-License-Identifier: Apache-2.0

//! Minimal standalone SVG charts. Jitter comes from a seeded generator, so
//! identical inputs give byte-identical files.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attribution::{global_importance, AttributionSet};
use crate::consensus::Quadrant;
use crate::evaluate::ExpansionReport;

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 170.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
             <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            W / 2.0,
            esc(title)
        );
        Canvas { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dash: bool) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\"{}/>",
            if dash { " stroke-dasharray=\"4 3\"" } else { "" }
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r}\" fill=\"{fill}\" fill-opacity=\"0.6\"/>"
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\">{}</text>",
            esc(s)
        );
    }

    fn axes(&mut self, xlabel: &str) {
        self.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "black", false);
        self.line(LEFT, TOP, LEFT, H - BOTTOM, "black", false);
        self.text((LEFT + W - RIGHT) / 2.0, H - 12.0, "middle", xlabel);
    }

    fn x_ticks(&mut self, lo: f64, hi: f64, n: usize) {
        for i in 0..=n {
            let v = lo + (hi - lo) * i as f64 / n as f64;
            let x = LEFT + (W - LEFT - RIGHT) * i as f64 / n as f64;
            self.line(x, H - BOTTOM, x, H - BOTTOM + 4.0, "black", false);
            self.text(x, H - BOTTOM + 16.0, "middle", &format!("{v:.2}"));
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    let span = if hi > lo { hi - lo } else { 1.0 };
    LEFT + (W - LEFT - RIGHT) * (v - lo) / span
}

/// One row per feature (largest mean |contribution| on top), one dot per
/// instance. `None` for an empty set.
pub fn beeswarm(set: &AttributionSet, top: usize, seed: u64) -> Option<String> {
    if set.attributions.is_empty() || set.feature_names.is_empty() {
        return None;
    }
    let ranked = global_importance(set);
    let shown: Vec<usize> = ranked
        .iter()
        .take(top.max(1))
        .filter_map(|imp| set.feature_names.iter().position(|f| *f == imp.feature))
        .collect();
    let values = || shown.iter().flat_map(|&j| set.attributions.iter().map(move |a| a.contributions[j]));
    let lo = values().fold(0.0f64, f64::min);
    let hi = values().fold(0.0f64, f64::max);
    let mut c = Canvas::new("Feature contributions (log-odds)");
    c.axes("contribution to raw score");
    c.x_ticks(lo, hi, 4);
    let band = (H - TOP - BOTTOM) / shown.len() as f64;
    let zero = scale(0.0, lo, hi);
    c.line(zero, TOP, zero, H - BOTTOM, "#888", true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (row, &j) in shown.iter().enumerate() {
        let yc = TOP + band * (row as f64 + 0.5);
        c.text(LEFT - 6.0, yc + 4.0, "end", &set.feature_names[j]);
        for a in &set.attributions {
            let v = a.contributions[j];
            let y = yc + rng.gen_range(-0.35..0.35) * band;
            c.circle(scale(v, lo, hi), y, 1.6, if v >= 0.0 { "#c0392b" } else { "#2471a3" });
        }
    }
    Some(c.finish())
}

fn quadrant_colour(q: Quadrant) -> &'static str {
    match q {
        Quadrant::CS => "#c0392b",
        Quadrant::CA => "#7f8c8d",
        Quadrant::RO => "#e67e22",
        Quadrant::MO => "#2471a3",
    }
}

/// Classifier probability against the rule decision.
pub fn quadrant_scatter(points: &[(Quadrant, f64)], threshold: f64, seed: u64) -> Option<String> {
    if points.is_empty() {
        return None;
    }
    let mut c = Canvas::new("Rule decision vs classifier probability");
    c.axes("classifier probability");
    c.x_ticks(0.0, 1.0, 5);
    let lanes = [("rule: mainstream", false), ("rule: candidate", true)];
    let band = (H - TOP - BOTTOM) / 2.0;
    let tx = scale(threshold, 0.0, 1.0);
    c.line(tx, TOP, tx, H - BOTTOM, "#333", true);
    for (i, (label, _)) in lanes.iter().enumerate() {
        c.text(LEFT - 6.0, TOP + band * (i as f64 + 0.5) + 4.0, "end", label);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &(q, p) in points {
        let lane = usize::from(matches!(q, Quadrant::CS | Quadrant::RO));
        let y = TOP + band * (lane as f64 + 0.5) + rng.gen_range(-0.4..0.4) * band;
        c.circle(scale(p, 0.0, 1.0), y, 2.0, quadrant_colour(q));
    }
    for (i, q) in Quadrant::ALL.iter().enumerate() {
        let n = points.iter().filter(|(x, _)| x == q).count();
        let x = W - RIGHT - 90.0;
        let y = TOP + 14.0 * i as f64;
        c.rect(x, y - 8.0, 8.0, 8.0, quadrant_colour(*q));
        c.text(x + 12.0, y, "start", &format!("{q} ({n})"));
    }
    Some(c.finish())
}

/// Histogram of the null statistics with the observed value marked.
pub fn null_histogram(null: &[f64], observed: f64, bins: usize) -> Option<String> {
    if null.is_empty() || bins == 0 {
        return None;
    }
    let lo = null.iter().copied().fold(observed, f64::min);
    let hi = null.iter().copied().fold(observed, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in null {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let peak = *counts.iter().max().unwrap_or(&1) as f64;
    let mut c = Canvas::new("Permutation null distribution");
    c.axes("mean normalized edit distance");
    c.x_ticks(lo, hi, 4);
    let plot_h = H - TOP - BOTTOM;
    for (b, &n) in counts.iter().enumerate() {
        let x0 = scale(lo + width * b as f64, lo, hi);
        let x1 = scale(lo + width * (b + 1) as f64, lo, hi);
        let h = plot_h * n as f64 / peak;
        c.rect(x0, H - BOTTOM - h, (x1 - x0 - 1.0).max(0.5), h, "#95a5a6");
    }
    let ox = scale(observed, lo, hi);
    c.line(ox, TOP, ox, H - BOTTOM, "#c0392b", false);
    c.text(ox + 4.0, TOP + 12.0, "start", &format!("observed {observed:.3}"));
    c.text(LEFT - 6.0, TOP + 4.0, "end", &format!("{peak:.0}"));
    Some(c.finish())
}

/// Rule-positive vs predicted share per expansion language.
pub fn expansion_bars(report: &ExpansionReport) -> Option<String> {
    if report.languages.is_empty() {
        return None;
    }
    let hi = report
        .languages
        .iter()
        .map(|l| l.rule_positive_pct.max(l.predicted_pct))
        .fold(1.0f64, f64::max);
    let mut c = Canvas::new("Expansion languages: rule vs classifier share (%)");
    c.axes("percent of forms");
    c.x_ticks(0.0, hi, 4);
    let band = (H - TOP - BOTTOM) / report.languages.len() as f64;
    for (i, l) in report.languages.iter().enumerate() {
        let y = TOP + band * i as f64;
        c.text(LEFT - 6.0, y + band * 0.5 + 4.0, "end", &format!("{} [{}]", l.language_id, l.group));
        c.rect(LEFT, y + band * 0.15, scale(l.rule_positive_pct, 0.0, hi) - LEFT, band * 0.3, "#e67e22");
        c.rect(LEFT, y + band * 0.5, scale(l.predicted_pct, 0.0, hi) - LEFT, band * 0.3, "#2471a3");
    }
    let x = W - RIGHT - 110.0;
    c.rect(x, TOP - 8.0, 8.0, 8.0, "#e67e22");
    c.text(x + 12.0, TOP, "start", "rule residual");
    c.rect(x, TOP + 6.0, 8.0, 8.0, "#2471a3");
    c.text(x + 12.0, TOP + 14.0, "start", "predicted");
    Some(c.finish())
}
