//! Files each subcommand leaves in its output directory.
//!
//! | file | columns |
//! |---|---|
//! | `weights_per_iter.csv` | `iteration, change, condition, ridged`, then `wc_<term>`, `wa<ch>_<term>`, `wd<ch>_<term>` |
//! | `trajectory.csv` | `phase, t_s, x1..xn` |
//! | `inputs.csv` | `phase, t_s, u1..um, w1..wq` |
//! | `attenuation.csv` | `t_s, attenuation` |
//! | `trajectories.csv` | `t_s`, missile and target positions in m, range in m, LOS angle and rate, headings in rad |
//! | `accel.csv` | `t_s`, missile and target lateral acceleration in m/s² and g |
//! | `actor_weights.csv` | `cycle, t_s, adopted, wa_<term>` |
//! | `iterations.csv` | `cycle, t_s, iterations, converged, adopted, final_change, condition, error` |
//! | `summary.csv` | miss distance in m, intercept time in s, termination, cycle counts |
//! | `oracle_deltas.csv` | `block, channel, term, oracle, learned, error` |
//! | `dataset.txt` | see [`crate::data`] |
//!
//! Terms are exponent lists joined by `_`, so `wc_2_0` is the weight of `x₁²`.

use std::path::Path;

use hinf_core::basis::{Bases, BasisSet};
use hinf_core::learner::SolveReport;
use hinf_core::missile::{EngagementResult, Termination};
use hinf_core::offpolicy::{DataSet, StackedWeights};
use hinf_core::G0;

use crate::config::{BasesSection, ExperimentConfig, MissileConfig};
use crate::data;
use crate::error::{Error, Result};
use crate::experiments::{missile_bases, term_label, ExampleAOutcome, OracleOutcome};
use crate::output::{floats, num, run_record, write_manifest, Table};

pub const MANIFEST: &str = "manifest.toml";
pub const DATASET: &str = "dataset.txt";

pub fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))
}

fn weight_labels(prefix: &str, basis: &BasisSet, channels: usize) -> Vec<String> {
    let mut out = Vec::new();
    for ch in 0..channels {
        let tag = if channels == 1 { String::new() } else { (ch + 1).to_string() };
        out.extend(basis.terms().iter().map(|t| format!("{prefix}{tag}_{}", term_label(t))));
    }
    out
}

fn weights_row(w: &StackedWeights) -> Vec<String> {
    w.stack().iter().map(|v| num(*v)).collect()
}

fn weights_table(bases: &Bases, w0: &StackedWeights, report: &SolveReport<StackedWeights>) -> Table {
    let mut header: Vec<String> = ["iteration", "change", "condition", "ridged"].map(String::from).to_vec();
    header.extend(bases.critic.terms().iter().map(|t| format!("wc_{}", term_label(t))));
    header.extend(weight_labels("wa", &bases.actor, w0.actor.ncols()));
    header.extend(weight_labels("wd", &bases.disturbance, w0.disturbance.ncols()));
    let mut table = Table::new(header);
    let mut first = vec!["0".to_string(), String::new(), String::new(), String::new()];
    first.extend(weights_row(w0));
    table.push(first);
    for (i, it) in report.history.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), num(it.change), num(it.condition), it.ridged.to_string()];
        row.extend(weights_row(&it.weights));
        table.push(row);
    }
    table
}

fn weights_record(run: &mut toml::Table, w: &StackedWeights) {
    run.insert("critic_weights".into(), floats(w.critic.iter().copied()));
    run.insert("actor_weights".into(), floats(w.actor.iter().copied()));
    run.insert("disturbance_weights".into(), floats(w.disturbance.iter().copied()));
}

fn solve_record(run: &mut toml::Table, report: &SolveReport<StackedWeights>) {
    run.insert("converged".into(), report.converged.into());
    run.insert("iterations".into(), (report.iterations() as i64).into());
    weights_record(run, &report.weights);
}

fn collection_tables(data: &DataSet, traj: &mut Table, inputs: &mut Table) {
    for (k, win) in data.windows.iter().enumerate() {
        let h = win.dt / win.substeps() as f64;
        let skip = usize::from(k > 0);
        for (j, x) in win.substep_states.iter().enumerate().skip(skip) {
            let mut row = vec!["collect".to_string(), num(win.t_start + j as f64 * h)];
            row.extend(x.iter().map(|v| num(*v)));
            traj.push(row);
        }
        let mut row = vec!["collect".to_string(), num(win.t_start)];
        row.extend(win.behavior_control.iter().chain(win.behavior_disturbance.iter()).map(|v| num(*v)));
        inputs.push(row);
    }
}

fn indexed(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

pub fn write_example_a(dir: &Path, cfg: &ExperimentConfig, out: &ExampleAOutcome) -> Result<()> {
    prepare(dir)?;
    let bases = cfg.bases()?;
    let fp = &out.data.fingerprint;
    let w0 = StackedWeights::zeros(&bases, fp.control_dim, fp.disturbance_dim);
    weights_table(&bases, &w0, &out.report).write(&dir.join("weights_per_iter.csv"))?;

    let mut traj = Table::new(["phase".to_string(), "t_s".to_string()].into_iter().chain(indexed("x", fp.state_dim)));
    let mut inputs = Table::new(
        ["phase".to_string(), "t_s".to_string()]
            .into_iter()
            .chain(indexed("u", fp.control_dim))
            .chain(indexed("w", fp.disturbance_dim)),
    );
    collection_tables(&out.data, &mut traj, &mut inputs);
    let rp = &out.replay;
    let mut att = Table::new(["t_s", "attenuation"]);
    for k in 0..rp.t.len() {
        let t = num(rp.t[k]);
        let mut row = vec!["replay".to_string(), t.clone()];
        row.extend(rp.x[k].iter().map(|v| num(*v)));
        traj.push(row);
        let mut row = vec!["replay".to_string(), t.clone()];
        row.extend(rp.u[k].iter().chain(rp.w[k].iter()).map(|v| num(*v)));
        inputs.push(row);
        if let Some(a) = rp.attenuation[k] {
            att.push(vec![t, num(a)]);
        }
    }
    traj.write(&dir.join("trajectory.csv"))?;
    inputs.write(&dir.join("inputs.csv"))?;
    att.write(&dir.join("attenuation.csv"))?;

    let mut run = run_record("example-a");
    solve_record(&mut run, &out.report);
    if let Some(a) = rp.final_attenuation() {
        run.insert("final_attenuation".into(), a.into());
    }
    write_manifest(&dir.join(MANIFEST), cfg, run)
}

pub fn write_collect(dir: &Path, cfg: &ExperimentConfig, data: &DataSet) -> Result<()> {
    prepare(dir)?;
    data::write(&dir.join(DATASET), data)?;
    let mut run = run_record("collect");
    run.insert("windows".into(), (data.len() as i64).into());
    write_manifest(&dir.join(MANIFEST), cfg, run)
}

pub fn write_solve(
    dir: &Path,
    cfg: &ExperimentConfig,
    data_path: &Path,
    data: &DataSet,
    report: &SolveReport<StackedWeights>,
) -> Result<()> {
    prepare(dir)?;
    let bases = cfg.bases()?;
    let fp = &data.fingerprint;
    let w0 = StackedWeights::zeros(&bases, fp.control_dim, fp.disturbance_dim);
    weights_table(&bases, &w0, report).write(&dir.join("weights_per_iter.csv"))?;
    let mut run = run_record("solve");
    run.insert("data".into(), data_path.display().to_string().into());
    run.insert("data_seed".into(), (data.seed as i64).into());
    solve_record(&mut run, report);
    write_manifest(&dir.join(MANIFEST), cfg, run)
}

pub fn write_oracle(dir: &Path, cfg: &ExperimentConfig, out: &OracleOutcome) -> Result<()> {
    prepare(dir)?;
    let mut table = Table::new(["block", "channel", "term", "oracle", "learned", "error"]);
    for d in &out.deltas {
        table.push(vec![
            d.block.to_string(),
            (d.channel + 1).to_string(),
            term_label(&d.term),
            num(d.oracle),
            num(d.learned),
            num(d.error()),
        ]);
    }
    table.write(&dir.join("oracle_deltas.csv"))?;
    let fp_bases = cfg.bases()?;
    let w0 = StackedWeights::zeros(&fp_bases, out.report.weights.actor.ncols(), out.report.weights.disturbance.ncols());
    weights_table(&fp_bases, &w0, &out.report).write(&dir.join("weights_per_iter.csv"))?;

    let mut run = run_record("oracle");
    run.insert("p".into(), floats(out.gare.p.transpose().iter().copied()));
    run.insert("max_critic_error".into(), out.max_error("critic").into());
    solve_record(&mut run, &out.report);
    write_manifest(&dir.join(MANIFEST), cfg, run)
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Receding => "receding",
        Termination::Guard => "guard",
        Termination::Timeout => "timeout",
    }
}

pub fn write_missile(dir: &Path, cfg: &MissileConfig, res: &EngagementResult) -> Result<()> {
    prepare(dir)?;
    let mut traj = Table::new([
        "t_s",
        "missile_x_m",
        "missile_z_m",
        "target_x_m",
        "target_z_m",
        "range_m",
        "los_rad",
        "los_rate_rad_s",
        "missile_heading_rad",
        "target_heading_rad",
    ]);
    let mut accel = Table::new(["t_s", "missile_accel_m_s2", "target_accel_m_s2", "missile_accel_g", "target_accel_g"]);
    for s in &res.samples {
        let st = &s.state;
        traj.push(
            [
                s.t,
                st.missile_pos[0],
                st.missile_pos[1],
                st.target_pos[0],
                st.target_pos[1],
                st.r,
                st.theta,
                st.theta_dot,
                st.eta,
                st.beta,
            ]
            .map(num)
            .to_vec(),
        );
        accel.push([s.t, s.a_m, s.a_t, s.a_m / G0, s.a_t / G0].map(num).to_vec());
    }
    traj.write(&dir.join("trajectories.csv"))?;
    accel.write(&dir.join("accel.csv"))?;

    let bases = missile_bases();
    let mut weights = Table::new(
        ["cycle", "t_s", "adopted"]
            .map(String::from)
            .into_iter()
            .chain(weight_labels("wa", &bases.actor, 1)),
    );
    let mut iters = Table::new([
        "cycle",
        "t_s",
        "iterations",
        "converged",
        "adopted",
        "final_change",
        "condition",
        "error",
    ]);
    for (k, c) in res.cycles.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), num(c.t), c.adopted.to_string()];
        row.extend(c.weights.actor.iter().map(|v| num(*v)));
        weights.push(row);
        iters.push(vec![
            (k + 1).to_string(),
            num(c.t),
            c.iterations.to_string(),
            c.converged.to_string(),
            c.adopted.to_string(),
            c.final_change.map_or(String::new(), num),
            c.condition.map_or(String::new(), num),
            c.error.as_ref().map_or(String::new(), ToString::to_string),
        ]);
    }
    weights.write(&dir.join("actor_weights.csv"))?;
    iters.write(&dir.join("iterations.csv"))?;

    let unconverged = res.cycles.iter().filter(|c| !c.converged).count();
    let mut summary = Table::new([
        "miss_distance_m",
        "intercept_time_s",
        "termination",
        "cycles",
        "max_iterations",
        "unconverged_cycles",
    ]);
    summary.push(vec![
        num(res.miss_distance),
        num(res.intercept_time),
        termination_name(res.termination).to_string(),
        res.cycles.len().to_string(),
        res.max_iterations().to_string(),
        unconverged.to_string(),
    ]);
    summary.write(&dir.join("summary.csv"))?;

    let mut run = run_record("missile");
    let terms = BasesSection::from_bases(&bases);
    let mut b = toml::Table::new();
    b.insert("critic".into(), terms.critic.into());
    b.insert("actor".into(), terms.actor.into());
    b.insert("disturbance".into(), terms.disturbance.into());
    run.insert("bases".into(), toml::Value::Table(b));
    run.insert("miss_distance_m".into(), res.miss_distance.into());
    run.insert("intercept_time_s".into(), res.intercept_time.into());
    run.insert("max_iterations".into(), (res.max_iterations() as i64).into());
    run.insert("unconverged_cycles".into(), (unconverged as i64).into());
    write_manifest(&dir.join(MANIFEST), cfg, run)
}
