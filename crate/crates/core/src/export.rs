//! CSV and JSON writers. Floats are written with 17 significant digits so
//! that every value parses back to the same bits.

use std::io::Write;

use nalgebra::{DVector, SymmetricEigen};
use serde::Serialize;

use crate::geometry::MetricField;
use crate::scenario::Scenario;
use crate::se2::Pose;
use crate::solver::{cost_series, Solution, Status, TransitionProblem, Variant};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row<W: Write>(w: &mut csv::Writer<W>, fields: &[String]) -> csv::Result<()> {
    w.write_record(fields)
}

/// Names of the free initial rates.
pub fn rate_names(variant: Variant, n: usize) -> Vec<String> {
    let blocks: &[&str] = match variant {
        Variant::Path => &["dr"],
        Variant::Acceleration => &["a", "j"],
        Variant::Torque => &["E", "P"],
    };
    blocks
        .iter()
        .flat_map(|b| (1..=n).map(move |i| format!("{b}{i}")))
        .collect()
}

/// `t, r.., dr.., [a.. j.. | E.. P..], cost_accum`, one row per shot sample.
pub fn write_trajectory<W: Write>(
    out: W,
    problem: &TransitionProblem,
    solution: &Solution,
) -> csv::Result<()> {
    let n = problem.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("r{i}")));
    header.extend((1..=n).map(|i| format!("dr{i}")));
    if solution.variant != Variant::Path {
        header.extend(rate_names(solution.variant, n));
    }
    header.push("cost_accum".into());
    row(&mut w, &header)?;
    if let Some(traj) = &solution.trajectory {
        let cost = cost_series(problem, traj);
        for (i, t) in traj.times.iter().enumerate() {
            let mut fields = vec![fmt_f64(*t)];
            fields.extend(traj.states[i].iter().map(|x| fmt_f64(*x)));
            fields.push(fmt_f64(cost[i]));
            row(&mut w, &fields)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SolutionRecord<'a> {
    variant: Variant,
    status: Status,
    source: &'a str,
    target: &'a str,
    departure_phase: f64,
    arrival_phase: f64,
    duration: f64,
    rates: Vec<(String, f64)>,
    residual: Option<f64>,
    residual_vector: Vec<Option<f64>>,
    cost: Option<f64>,
    steps: usize,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Decision variables, residual, cost and status as pretty JSON.
pub fn solution_json(problem: &TransitionProblem, solution: &Solution) -> String {
    let names = rate_names(solution.variant, problem.dim());
    let record = SolutionRecord {
        variant: solution.variant,
        status: solution.status,
        source: problem.source.label(),
        target: problem.target.label(),
        departure_phase: solution.departure_phase,
        arrival_phase: solution.decision.arrival_phase,
        duration: solution.decision.duration,
        rates: names
            .into_iter()
            .zip(solution.decision.rates.iter().copied())
            .collect(),
        residual: finite(solution.residual),
        residual_vector: solution.residual_vector.iter().map(|x| finite(*x)).collect(),
        cost: finite(solution.cost),
        steps: problem.settings.steps,
    };
    serde_json::to_string_pretty(&record).expect("plain data serializes") + "\n"
}

/// One sweep item.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub index: usize,
    pub solution: Solution,
    /// Net body displacement of the assembled scenario, when one exists.
    pub net: Option<Pose>,
}

/// `phase_index, t0, status, T, t_f, cost, net_x, net_y, net_theta`.
pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    row(
        &mut w,
        &["phase_index", "t0", "status", "T", "t_f", "cost", "net_x", "net_y", "net_theta"]
            .map(String::from),
    )?;
    for r in rows {
        let s = &r.solution;
        let mut fields = vec![
            r.index.to_string(),
            fmt_f64(s.departure_phase),
            s.status.as_str().to_string(),
            fmt_f64(s.decision.duration),
            fmt_f64(s.decision.arrival_phase),
            fmt_f64(s.cost),
        ];
        match r.net {
            Some(p) => fields.extend([p.x, p.y, p.theta].map(fmt_f64)),
            None => fields.extend(["", "", ""].map(String::from)),
        }
        row(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, r1, r2, x, y, theta, fwd_disp, turn_disp, cost_accum, segment`.
pub fn write_scenario<W: Write>(out: W, scenario: &Scenario) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    row(
        &mut w,
        &[
            "t", "r1", "r2", "x", "y", "theta", "fwd_disp", "turn_disp", "cost_accum", "segment",
        ]
        .map(String::from),
    )?;
    for i in 0..scenario.len() {
        let p = scenario.poses[i];
        let r = &scenario.shape[i].position;
        let mut fields: Vec<String> = [
            scenario.times[i],
            r[0],
            r[1],
            p.x,
            p.y,
            p.wrapped_heading(),
            scenario.forward[i],
            scenario.turning[i],
            scenario.cost[i],
        ]
        .iter()
        .map(|x| fmt_f64(*x))
        .collect();
        fields.push(scenario.segments[i].as_str().into());
        row(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

/// `n × n` grid over `range²` of a two-dimensional metric field with its
/// eigen-decomposition (ascending eigenvalues, unit eigenvectors with a
/// non-negative leading component).
pub fn write_metric_grid<W: Write>(
    out: W,
    field: &dyn MetricField,
    n: usize,
    range: [f64; 2],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    row(
        &mut w,
        &[
            "r1", "r2", "g11", "g12", "g22", "lambda_min", "lambda_max", "v_min_1", "v_min_2",
            "v_max_1", "v_max_2",
        ]
        .map(String::from),
    )?;
    for (r1, r2) in grid_points(n, range) {
        let g = field.metric_matrix(&DVector::from_column_slice(&[r1, r2]));
        let (values, vectors) = sorted_eigen(&g);
        let fields = [
            r1,
            r2,
            g[(0, 0)],
            g[(0, 1)],
            g[(1, 1)],
            values[0],
            values[1],
            vectors[0][0],
            vectors[0][1],
            vectors[1][0],
            vectors[1][1],
        ]
        .map(fmt_f64);
        row(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Row-major grid: `r1` varies slowest.
pub fn grid_points(n: usize, range: [f64; 2]) -> Vec<(f64, f64)> {
    let axis: Vec<f64> = if n == 1 {
        vec![0.5 * (range[0] + range[1])]
    } else {
        (0..n)
            .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
            .collect()
    };
    axis.iter()
        .flat_map(|a| axis.iter().map(move |b| (*a, *b)))
        .collect()
}

fn sorted_eigen(g: &nalgebra::DMatrix<f64>) -> ([f64; 2], [[f64; 2]; 2]) {
    let sym = 0.5 * (g + g.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order = [0usize, 1];
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let vec = |k: usize| {
        let v = eig.eigenvectors.column(k);
        let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
        [s * v[0], s * v[1]]
    };
    (
        [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
        [vec(order[0]), vec(order[1])],
    )
}
