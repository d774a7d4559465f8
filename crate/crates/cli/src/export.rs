//! Trajectory CSV export.

use std::fmt::Write as _;

use lowthrust_core::control::{optimal_throttle, primer_direction, switching_function};
use lowthrust_core::{ExtendedState, Homotopy, SpacecraftParams, TrajectorySolution};

pub const CSV_HEADER: &str = "t,rx,ry,rz,vx,vy,vz,m,lr1,lr2,lr3,lv1,lv2,lv3,lm,S,u,ax,ay,az";

/// `n` equally spaced epochs covering `[t0, tf]`, endpoints included.
pub fn sample_grid(t0: f64, tf: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![tf],
        _ => (0..n).map(|k| if k + 1 == n { tf } else { t0 + (tf - t0) * k as f64 / (n - 1) as f64 }).collect(),
    }
}

struct Row {
    t: f64,
    state: ExtendedState,
    u: f64,
}

/// Renders the dense samples and every switch node, in time order, one row
/// each. At a switch node the throttle shown is the one that takes over.
pub fn trajectory_csv(traj: &TrajectorySolution, eps: Homotopy, sc: &SpacecraftParams) -> String {
    let mut rows: Vec<Row> = traj
        .samples
        .iter()
        .map(|(t, y)| Row { t: *t, state: *y, u: optimal_throttle(switching_function(y, sc.c_nd), eps) })
        .collect();
    for &k in &traj.switch_nodes {
        let y = traj.states[k];
        let s = switching_function(&y, sc.c_nd);
        rows.push(Row { t: traj.times[k], state: y, u: traj.regimes[k].throttle(s, eps) });
    }
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut out = String::with_capacity(rows.len() * 400);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &rows {
        let y = &row.state;
        let s = switching_function(y, sc.c_nd);
        let mut fields: Vec<f64> = vec![row.t];
        fields.extend(y.r.iter());
        fields.extend(y.v.iter());
        fields.push(y.m);
        fields.extend(y.lam_r.iter());
        fields.extend(y.lam_v.iter());
        fields.push(y.lam_m);
        fields.push(s);
        fields.push(row.u);
        let line: Vec<String> = fields.iter().map(|v| fmt_full(*v)).collect();
        out.push_str(&line.join(","));
        match primer_direction(&y.lam_v) {
            Ok(a) if row.u > 0.0 => {
                for c in a.iter() {
                    let _ = write!(out, ",{}", fmt_full(*c));
                }
            }
            _ => out.push_str(",,,"),
        }
        out.push('\n');
    }
    out
}

/// 17 significant digits.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}
