//! Output artifacts: `summary.csv`, `bounds_<name>.json`, `traj_<name>.csv`
//! and `fig_<name>.svg`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bounds::{BoundReport, TransformInfo};
use crate::config::Mode;
use crate::error::Result;
use crate::metric::RobustnessResult;
use crate::run::{RunSummary, ScenarioResult, SummaryRow};
use crate::systems::{fmt_f64, Trajectory};

pub const SUMMARY_HEADER: [&str; 16] = [
    "scenario",
    "param",
    "theta_star",
    "mu",
    "N",
    "dA_norm",
    "bu_inf",
    "gt_energy_ode",
    "gt_energy_fd",
    "thm1",
    "thm2",
    "baseline",
    "R_gt",
    "R_thm1",
    "R_baseline",
    "flags",
];

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn record(row: &SummaryRow) -> [String; 16] {
    [
        row.scenario.clone(),
        row.param.clone(),
        fmt_f64(row.theta_star),
        fmt_f64(row.mu),
        fmt_f64(row.horizon),
        fmt_f64(row.da_norm),
        fmt_f64(row.bu_inf),
        fmt_f64(row.gt_energy_ode),
        fmt_f64(row.gt_energy_fd),
        opt(row.thm1),
        opt(row.thm2),
        opt(row.baseline),
        opt(row.r_gt),
        opt(row.r_thm1),
        opt(row.r_baseline),
        row.flags.join(";"),
    ]
}

pub fn write_summary_csv<'a, W: Write>(w: W, rows: impl IntoIterator<Item = &'a SummaryRow>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for row in rows {
        out.write_record(record(row))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ScenarioJson<'a> {
    scenario: &'a str,
    mode: Mode,
    theta_star: &'a [f64],
    mu: f64,
    horizon: f64,
    dt: f64,
    error_norm: f64,
    transform: Option<TransformInfo>,
    reports: &'a [BoundReport],
    metrics: &'a [RobustnessResult],
}

pub fn scenario_json(r: &ScenarioResult) -> Result<String> {
    let doc = ScenarioJson {
        scenario: &r.name,
        mode: r.mode,
        theta_star: &r.theta_star,
        mu: r.mu,
        horizon: r.horizon,
        dt: r.dt,
        error_norm: r.error_norm,
        transform: r.transform,
        reports: &r.reports,
        metrics: &r.metrics,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Columns `t, x1.., y1.., ds_<param>_1..` sharing one time grid.
pub fn write_trajectories_csv<W: Write>(mut w: W, r: &ScenarioResult) -> Result<()> {
    let mut series: Vec<(String, &Trajectory)> = vec![("x".into(), &r.states), ("y".into(), &r.output)];
    for (name, traj) in &r.sensitivities {
        series.push((format!("ds_{name}_"), traj));
    }
    write!(w, "t")?;
    for (prefix, traj) in &series {
        for j in 1..=traj.dim() {
            write!(w, ",{prefix}{j}")?;
        }
    }
    writeln!(w)?;
    for (k, t) in r.states.times().iter().enumerate() {
        write!(w, "{}", fmt_f64(*t))?;
        for (_, traj) in &series {
            for x in traj.values()[k].iter() {
                write!(w, ",{}", fmt_f64(*x))?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

const SERIES: [(&str, &str, &str); 4] = [
    ("ground_truth", "ground truth", "#333333"),
    ("theorem1", "dynamics bound", "#1f77b4"),
    ("theorem2", "initial-state bound", "#2ca02c"),
    ("gramian_baseline", "Gramian baseline", "#d62728"),
];

fn series_values(rep: &BoundReport) -> [Option<f64>; 4] {
    [
        Some(rep.ground_truth_energy),
        rep.theorem1,
        rep.theorem2,
        rep.gramian_baseline,
    ]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar chart of energies per parameter on a log₁₀ axis.
pub fn scenario_svg(r: &ScenarioResult) -> String {
    let present: Vec<usize> = (0..SERIES.len())
        .filter(|&k| r.reports.iter().any(|rep| series_values(rep)[k].is_some()))
        .collect();
    let positive: Vec<f64> = r
        .reports
        .iter()
        .flat_map(|rep| series_values(rep).into_iter().flatten())
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    let (mut lo, mut hi) = positive
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v.log10()), b.max(v.log10())));
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 0.0);
    }
    lo = lo.floor() - 1.0;
    hi = hi.ceil().max(lo + 1.0);

    let (width, height) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let y_of = |v: f64| top + plot_h * (hi - v.log10()) / (hi - lo);
    let base_y = top + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(&format!("Sensitivity energies: {}", r.name)));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        escape(&r.name)
    );
    let _ = writeln!(s, r#"<g id="axes" stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base_y}"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{base_y}" x2="{}" y2="{base_y}"/>"#, left + plot_w);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="y-ticks" font-family="sans-serif" font-size="11" text-anchor="end">"#);
    let mut e = lo as i64;
    while e as f64 <= hi {
        let y = y_of(10f64.powi(e as i32));
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}">1e{e}</text>"##,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
        e += 1;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">energy (log scale)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    let groups = r.reports.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = (group_w * 0.8) / present.len().max(1) as f64;
    for &k in &present {
        let (key, label, color) = SERIES[k];
        let _ = writeln!(s, r#"<g id="series-{key}" class="series" data-series="{key}" fill="{color}">"#);
        let _ = writeln!(s, "<desc>{}</desc>", escape(label));
        for (g, rep) in r.reports.iter().enumerate() {
            let Some(v) = series_values(rep)[k] else { continue };
            let slot = present.iter().position(|&p| p == k).unwrap_or(0) as f64;
            let x = left + g as f64 * group_w + group_w * 0.1 + slot * bar_w;
            let (y, h) = if v > 0.0 && v.is_finite() {
                let y = y_of(v).max(top);
                (y, base_y - y)
            } else {
                (base_y, 0.0)
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" data-param="{}" data-value="{}"><title>{}</title></rect>"#,
                bar_w * 0.95,
                escape(&rep.param_name),
                fmt_f64(v),
                escape(&format!("{label}, {}: {}", rep.param_name, fmt_f64(v)))
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g id="x-labels" font-family="sans-serif" font-size="12" text-anchor="middle">"#);
    for (g, rep) in r.reports.iter().enumerate() {
        let x = left + (g as f64 + 0.5) * group_w;
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}">{}</text>"#, base_y + 20.0, escape(&rep.param_name));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    for (row, &k) in present.iter().enumerate() {
        let (key, label, color) = SERIES[k];
        let y = top + 10.0 + row as f64 * 20.0;
        let x = width - right + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{color}" data-series="{key}"/><text x="{}" y="{}">{}</text>"#,
            y - 10.0,
            x + 18.0,
            y,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_all(out_dir: &Path, summary: &RunSummary, trajectories: bool) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("summary.csv"), |w| write_summary_csv(w, summary.rows()))?;
    for r in &summary.results {
        fs::write(out_dir.join(format!("bounds_{}.json", r.name)), scenario_json(r)? + "\n")?;
        fs::write(out_dir.join(format!("fig_{}.svg", r.name)), scenario_svg(r))?;
        if trajectories {
            write_file(&out_dir.join(format!("traj_{}.csv", r.name)), |w| write_trajectories_csv(w, r))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{analyze_scenario, AnalysisOptions};
    use crate::scenarios::preset_scenario;

    fn result() -> ScenarioResult {
        let opts = AnalysisOptions {
            dt: Some(0.004),
            ..AnalysisOptions::default()
        };
        analyze_scenario(&preset_scenario("two_param").unwrap(), &opts).unwrap()
    }

    #[test]
    fn summary_has_fixed_columns() {
        let r = result();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &r.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "scenario,param,theta_star,mu,N,dA_norm,bu_inf,gt_energy_ode,gt_energy_fd,thm1,thm2,baseline,R_gt,R_thm1,R_baseline,flags"
        );
        assert_eq!(lines.len(), 3);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 16);
        }
        assert!(lines[1].starts_with("two_param,theta1,5.0000000000000000e-1,"));
    }

    #[test]
    fn trajectories_csv_layout() {
        let r = result();
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "t,x1,x2,x3,x4,y1,ds_theta1_1,ds_theta2_1");
        assert_eq!(text.lines().count(), r.states.len() + 1);
    }

    #[test]
    fn json_has_reports() {
        let r = result();
        let v: serde_json::Value = serde_json::from_str(&scenario_json(&r).unwrap()).unwrap();
        assert_eq!(v["reports"].as_array().unwrap().len(), 2);
        assert_eq!(v["mode"], "precond");
        assert!(v["reports"][0]["constants"]["N"].as_f64().is_some());
    }

    #[test]
    fn svg_mentions_each_series() {
        let r = result();
        let svg = scenario_svg(&r);
        for key in ["ground_truth", "theorem1", "gramian_baseline"] {
            assert!(svg.contains(&format!("id=\"series-{key}\"")));
        }
        assert!(!svg.contains("series-theorem2"));
    }
}
