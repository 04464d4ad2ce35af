//! Run artifacts: trajectory CSV, key-value analysis report, plot data.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value parses back to the identical double.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{AnalysisReport, DecayFit, PEReport};
use crate::simulation::Trajectory;

pub const PLOT_DISTANCE: &str = "distance.dat";
pub const PLOT_ERROR: &str = "xtilde.dat";
pub const PLOT_PATH: &str = "path.dat";

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["y", "xhat", "x"] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.extend(["D_true", "D_measured", "D_hat", "xtilde_norm", "L"].map(String::from));
    cols.join(",")
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let n = traj.config.dimension;
    writeln!(w, "{}", csv_header(n))?;
    for s in &traj.samples {
        let mut row = vec![s.t];
        row.extend(s.y.iter());
        row.extend(s.x_hat.iter());
        row.extend(s.source.iter());
        row.extend([s.d_true, s.d_measured, s.d_hat, s.xtilde_norm, s.lyapunov]);
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

fn push(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(&value.to_string());
    out.push('\n');
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"))
}

fn push_fit(out: &mut String, key: &str, fit: &Option<DecayFit>) {
    push(out, &format!("{key}.rate"), opt(fit.map(|f| f.rate)));
    push(out, &format!("{key}.r_squared"), opt(fit.map(|f| f.r_squared)));
    push(out, &format!("{key}.points"), fit.map_or(0, |f| f.points));
}

fn push_pe(out: &mut String, key: &str, pe: &Option<PEReport>) {
    match pe {
        Some(r) => {
            push(out, &format!("{key}.window"), format!("{:?}", r.window));
            push(out, &format!("{key}.windows"), r.windows.len());
            push(out, &format!("{key}.alpha_lo"), format!("{:?}", r.alpha_lo));
            push(out, &format!("{key}.alpha_hi"), format!("{:?}", r.alpha_hi));
            push(out, &format!("{key}.floor"), format!("{:?}", r.floor));
            push(out, &format!("{key}.passed"), r.passed);
        }
        None => push(out, &format!("{key}.passed"), "none"),
    }
}

/// Key-value rendering of the analysis, prefixed by the run's identity.
pub fn report_text(traj: &Trajectory, r: &AnalysisReport) -> String {
    let cfg = &traj.config;
    let last = traj.last();
    let mut out = String::new();
    push(&mut out, "scenario", &cfg.name);
    push(&mut out, "seed", cfg.seed());
    push(&mut out, "samples", traj.samples.len());
    push(&mut out, "t_final", format!("{:?}", last.t));
    push(
        &mut out,
        "lyapunov_max_increase",
        format!("{:?}", r.lyapunov_max_increase),
    );
    push_fit(&mut out, "residual_decay", &r.residual_decay);
    push_fit(&mut out, "xtilde_decay", &r.xtilde_decay);
    push_fit(&mut out, "dhat_decay", &r.dhat_decay);
    push_fit(&mut out, "dist_decay", &r.dist_decay);
    push(&mut out, "dhat_sq_min", format!("{:?}", r.dhat_sq_min));
    push(&mut out, "dhat_floor", format!("{:?}", r.dhat_floor));
    push(&mut out, "dhat_floor_ok", r.dhat_floor_ok);
    push(&mut out, "transient_end", opt(r.transient_end));
    push_pe(&mut out, "pe_y", &r.pe_y);
    push_pe(&mut out, "pe_v", &r.pe_v);
    push(&mut out, "final_dist_error", format!("{:?}", r.final_dist_error));
    push(&mut out, "final_xtilde", format!("{:?}", r.final_xtilde));
    push(
        &mut out,
        "max_rel_dist_error_tail",
        format!("{:?}", r.max_rel_dist_error_tail),
    );
    push(&mut out, "mean_dist_tail", format!("{:?}", r.mean_dist_tail));
    let (a, b, c) = r.invariant_residual;
    push(&mut out, "invariant_residual", format!("{a:?},{b:?},{c:?}"));
    push(&mut out, "orbit_tracking_error", opt(r.orbit_tracking_error));
    push(&mut out, "motion_bound", format!("{:?}", r.motion_bound));
    push(&mut out, "mean_agent_speed", format!("{:?}", r.mean_agent_speed));
    push(&mut out, "source_speed", format!("{:?}", r.source_speed));
    let bounded = r.max_rel_dist_error_tail < crate::verify::DRIFT_REL_TOL;
    push(&mut out, "distance_error_bounded", bounded);
    out
}

fn write_columns(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()
}

/// Whitespace-separated columns for gnuplot and similar tools: `t D D_hat`,
/// `t |x_tilde|`, and the path as `y x x_hat` coordinates. Returns the
/// written paths.
pub fn write_plot_data(traj: &Trajectory, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let s = &traj.samples;
    let n = traj.config.dimension;
    let paths = [PLOT_DISTANCE, PLOT_ERROR, PLOT_PATH].map(|f| dir.join(f));
    write_columns(
        &paths[0],
        "t D_true D_hat",
        s.iter().map(|x| vec![x.t, x.d_true, x.d_hat]),
    )?;
    write_columns(&paths[1], "t xtilde_norm", s.iter().map(|x| vec![x.t, x.xtilde_norm]))?;
    let header = if n > 2 {
        "y_1 y_2 y_3 x_1 x_2 x_3 xhat_1 xhat_2 xhat_3"
    } else {
        "y_1 y_2 x_1 x_2 xhat_1 xhat_2"
    };
    write_columns(
        &paths[2],
        header,
        s.iter().map(|x| {
            x.y.iter()
                .chain(x.source.iter())
                .chain(x.x_hat.iter())
                .copied()
                .collect()
        }),
    )?;
    Ok(paths.to_vec())
}
