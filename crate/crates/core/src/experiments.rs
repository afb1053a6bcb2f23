//! Matched discrete and continuous runs, their comparison, and file output.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::discrete::{run_discrete, AdamVariant, OptimizerConfig, OptimizerKind, Trajectory, TrajectoryEntry};
use crate::error::{Error, Result};
use crate::ide::{memory_on_grid, solve, IdeProblem, SolveReport, SolverConfig};
use crate::kernels::SampledPath;
use crate::models::build_continuous;
use crate::objectives::{Objective, ParamVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Discrete,
    Continuous,
    Both,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Discrete => "discrete",
            Self::Continuous => "continuous",
            Self::Both => "both",
        }
    }

    fn runs_discrete(self) -> bool {
        self != Self::Continuous
    }

    fn runs_continuous(self) -> bool {
        self != Self::Discrete
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(Self::Discrete),
            "continuous" => Ok(Self::Continuous),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec<T> {
    pub objective: Objective<T>,
    pub optimizer: OptimizerKind,
    /// Hyper-parameters; `steps` is the horizon and `record_stride` the output stride.
    pub config: OptimizerConfig<T>,
    pub theta0: ParamVector<T>,
    pub mode: Mode,
    pub solver: SolverConfig<T>,
    /// Directory for CSV (and SVG) output; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
}

impl<T: Scalar> ExperimentSpec<T> {
    pub fn new(objective: Objective<T>, optimizer: OptimizerKind, config: OptimizerConfig<T>, mode: Mode) -> Self {
        let theta0 = ParamVector::zeros(objective.dim());
        Self {
            objective,
            optimizer,
            config,
            theta0,
            mode,
            solver: SolverConfig::default(),
            out_dir: None,
            svg: false,
        }
    }

    pub fn horizon(&self) -> usize {
        self.config.steps
    }

    /// Every violated invariant, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.config.violations();
        if self.theta0.len() != self.objective.dim() {
            v.push(format!(
                "theta0: has {} components, objective needs {}",
                self.theta0.len(),
                self.objective.dim()
            ));
        }
        if self.mode.runs_continuous() {
            v.extend(self.solver.violations());
            if matches!(self.optimizer, OptimizerKind::Adam(AdamVariant::W | AdamVariant::L2)) {
                v.push(format!("optimizer: no continuous model for {}", self.optimizer));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }
}

/// `{optimizer}_{mode}_a{alpha}[_b{beta…}]`.
pub fn file_stem<T: Scalar>(kind: OptimizerKind, mode: Mode, cfg: &OptimizerConfig<T>) -> String {
    let mut s = format!("{kind}_{mode}_a{}", cfg.alpha);
    match kind {
        OptimizerKind::RmsProp => s.push_str(&format!("_b{}", cfg.beta)),
        OptimizerKind::Adam(_) => s.push_str(&format!("_b{}_{}", cfg.beta1, cfg.beta2)),
        _ => {}
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRun<T> {
    pub solve: SolveReport<T>,
    /// The solved path with memory values and loss, sampled like the discrete run.
    pub trajectory: Trajectory<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome<T> {
    pub discrete: Option<Trajectory<T>>,
    pub continuous: Option<ContinuousRun<T>>,
    pub comparison: Option<ComparisonReport>,
    pub files: Vec<PathBuf>,
}

/// The solved path as a [`Trajectory`] whose auxiliary series are the memory
/// values at the grid times, recorded every `stride` steps and at the end.
pub fn continuous_trajectory<T: Scalar>(
    problem: &IdeProblem<T>,
    path: &SampledPath<T>,
    solver: &SolverConfig<T>,
    stride: usize,
) -> Result<Trajectory<T>> {
    let stride = stride.max(1);
    let mem = memory_on_grid(problem, path, solver)?;
    let keys = problem.memory().iter().map(|m| m.name.clone()).collect();
    let mut traj = Trajectory::new(problem.alpha(), keys);
    let n = path.steps();
    for (j, theta) in path.values().iter().enumerate() {
        if j % stride != 0 && j != n {
            continue;
        }
        let aux = mem.iter().map(|m| m[j].clone()).collect();
        traj.push(j, theta.clone(), aux, problem.objective().eval(theta)?);
    }
    Ok(traj)
}

pub fn run_experiment<T: Scalar>(spec: &ExperimentSpec<T>) -> Result<ExperimentOutcome<T>> {
    spec.validate()?;
    let cfg = &spec.config;
    let discrete = if spec.mode.runs_discrete() {
        Some(run_discrete(spec.optimizer, &spec.objective, &spec.theta0, cfg)?)
    } else {
        None
    };
    let continuous = if spec.mode.runs_continuous() {
        let problem = build_continuous(spec.optimizer, spec.objective.clone(), spec.theta0.clone(), cfg)?;
        let report = solve(&problem, &spec.solver)?;
        let trajectory = continuous_trajectory(&problem, &report.trajectory, &spec.solver, cfg.record_stride)?;
        Some(ContinuousRun {
            solve: report,
            trajectory,
        })
    } else {
        None
    };
    let comparison = match (&discrete, &continuous) {
        (Some(d), Some(c)) => Some(compare(d, &c.trajectory)?),
        _ => None,
    };

    let mut files = Vec::new();
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        let mut overlay = Vec::new();
        if let Some(d) = &discrete {
            let stem = file_stem(spec.optimizer, Mode::Discrete, cfg);
            files.push(write_to(dir, &format!("{stem}.csv"), |p| write_csv(d, p))?);
            overlay.extend(theta_series(d, "discrete"));
        }
        if let Some(c) = &continuous {
            let stem = file_stem(spec.optimizer, Mode::Continuous, cfg);
            files.push(write_to(dir, &format!("{stem}.csv"), |p| write_csv(&c.trajectory, p))?);
            files.push(write_to(dir, &format!("{stem}_solver.csv"), |p| {
                write_solver_summary(&c.solve, p)
            })?);
            overlay.extend(theta_series(&c.trajectory, "continuous"));
        }
        let stem = file_stem(spec.optimizer, spec.mode, cfg);
        if let Some(r) = &comparison {
            files.push(write_to(dir, &format!("{stem}_report.csv"), |p| write_report(r, p))?);
        }
        if spec.svg {
            let title = format!("{} θ, α = {}", spec.optimizer, cfg.alpha);
            files.push(write_to(dir, &format!("{stem}.svg"), |p| {
                write_svg(p, &title, "k", "θ", &overlay)
            })?);
        }
    }

    Ok(ExperimentOutcome {
        discrete,
        continuous,
        comparison,
        files,
    })
}

fn write_to(dir: &Path, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    write(&path)?;
    Ok(path)
}

fn theta_series<T: Scalar>(traj: &Trajectory<T>, label: &str) -> Vec<Series> {
    let dim = traj.entries.first().map_or(0, |e| e.theta.len());
    (0..dim)
        .map(|i| Series {
            label: if dim == 1 {
                label.to_string()
            } else {
                format!("{label} θ_{i}")
            },
            points: traj.entries.iter().map(|e| (e.k as f64, e.theta[i].as_f64())).collect(),
        })
        .collect()
}

/// Discrepancy statistics for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub name: String,
    pub max_abs_diff: f64,
    pub rmse: f64,
    pub argmax_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub horizon_k: usize,
    /// Number of compared indices.
    pub points: usize,
    pub series: Vec<SeriesStats>,
}

impl ComparisonReport {
    pub fn get(&self, name: &str) -> Option<&SeriesStats> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Only the first moment is a per-component series; `G` and `v` are scalars.
fn is_vector_key(key: &str) -> bool {
    key == "m"
}

fn aux_column(key: &str, component: usize) -> String {
    if is_vector_key(key) {
        format!("{key}_{component}")
    } else {
        key.to_string()
    }
}

/// Index-aligned discrepancies at every `k` recorded by `disc`.
pub fn compare<T: Scalar>(disc: &Trajectory<T>, cont: &Trajectory<T>) -> Result<ComparisonReport> {
    if disc.alpha != cont.alpha {
        return Err(Error::GridMismatch(format!(
            "discrete alpha {} vs continuous alpha {}",
            disc.alpha, cont.alpha
        )));
    }
    let available = cont.last().map_or(0, |e| e.k);
    let horizon = disc.last().map_or(0, |e| e.k);
    if horizon > available || disc.entries.is_empty() || cont.entries.is_empty() {
        return Err(Error::InsufficientHorizon {
            needed: horizon,
            available,
        });
    }

    /// Where a series lives: a θ component, or (discrete key, continuous key, component).
    enum Slot {
        Theta(usize),
        Aux(usize, usize, usize),
    }
    let read = |e: &TrajectoryEntry<T>, slot: &Slot, cont_side: bool| match *slot {
        Slot::Theta(i) => e.theta[i],
        Slot::Aux(d, c, i) => e.aux[if cont_side { c } else { d }][i],
    };
    let first = &disc.entries[0];
    let mut slots: Vec<(String, Slot)> = (0..first.theta.len())
        .map(|i| (format!("theta_{i}"), Slot::Theta(i)))
        .collect();
    for (d, key) in disc.aux_keys.iter().enumerate() {
        if let Some(c) = cont.aux_index(key) {
            for i in 0..first.aux[d].len() {
                slots.push((aux_column(key, i), Slot::Aux(d, c, i)));
            }
        }
    }

    let mut max = vec![0.0f64; slots.len()];
    let mut sum_sq = vec![0.0f64; slots.len()];
    let mut argmax = vec![0usize; slots.len()];
    let mut points = 0;
    for d in &disc.entries {
        let c = cont
            .at(d.k)
            .ok_or(Error::InsufficientHorizon { needed: d.k, available })?;
        points += 1;
        for (s, (_, slot)) in slots.iter().enumerate() {
            let diff = (read(d, slot, false) - read(c, slot, true)).abs().as_f64();
            sum_sq[s] += diff * diff;
            if diff > max[s] {
                max[s] = diff;
                argmax[s] = d.k;
            }
        }
    }
    let n = points.max(1) as f64;
    Ok(ComparisonReport {
        alpha: disc.alpha.as_f64(),
        horizon_k: horizon,
        points,
        series: slots
            .into_iter()
            .enumerate()
            .map(|(s, (name, _))| SeriesStats {
                name,
                max_abs_diff: max[s],
                rmse: (sum_sq[s] / n).sqrt(),
                argmax_k: argmax[s],
            })
            .collect(),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn fmt_float<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| {
        let reason = e.to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => Error::Csv {
                path: path.to_path_buf(),
                reason,
            },
        }
    }
}

/// Writes `k,t,theta_0..,loss[,G][,v][,m_0..]` with 17 significant digits.
pub fn write_csv<T: Scalar>(traj: &Trajectory<T>, path: &Path) -> Result<()> {
    let dim = traj.entries.first().map_or(1, |e| e.theta.len());
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((0..dim).map(|i| format!("theta_{i}")));
    header.push("loss".into());
    for key in &traj.aux_keys {
        if is_vector_key(key) {
            header.extend((0..dim).map(|i| aux_column(key, i)));
        } else {
            header.push(key.clone());
        }
    }
    let err = csv_err(path);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(&header).map_err(&err)?;
    for e in &traj.entries {
        let mut row = vec![e.k.to_string(), fmt_float(e.t)];
        row.extend(e.theta.iter().map(|&x| fmt_float(x)));
        row.push(fmt_float(e.loss));
        for a in &e.aux {
            row.extend(a.iter().map(|&x| fmt_float(x)));
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a file written by [`write_csv`].
pub fn read_csv<T: Scalar>(path: &Path) -> Result<Trajectory<T>> {
    let bad = |line: u64, reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let cols: Vec<String> = reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if cols.len() < 4 || cols[0] != "k" || cols[1] != "t" {
        return Err(bad(1, format!("unexpected header '{}'", cols.join(","))));
    }
    let dim = cols[2..].iter().take_while(|c| c.starts_with("theta_")).count();
    if dim == 0 || cols.get(2 + dim).map(String::as_str) != Some("loss") {
        return Err(bad(1, "expected theta_0.. followed by loss".into()));
    }
    let mut keys: Vec<String> = Vec::new();
    let mut widths: Vec<usize> = Vec::new();
    for c in &cols[3 + dim..] {
        let key = match c.rsplit_once('_') {
            Some((k, i)) if i.parse::<usize>().is_ok() => k,
            _ => c,
        };
        if keys.last().map(String::as_str) == Some(key) {
            *widths.last_mut().unwrap() += 1;
        } else {
            keys.push(key.to_string());
            widths.push(1);
        }
    }

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let line_no = record.position().map_or(0, |p| p.line());
        let k = record[0]
            .parse::<usize>()
            .map_err(|e| bad(line_no, format!("k: {e}")))?;
        let mut vals = Vec::with_capacity(record.len() - 1);
        for (c, f) in cols[1..].iter().zip(record.iter().skip(1)) {
            let x: f64 = f.parse().map_err(|e| bad(line_no, format!("{c}: {e}")))?;
            vals.push(T::lit(x));
        }
        let theta = ParamVector::new(vals[1..1 + dim].to_vec()).map_err(|e| bad(line_no, e.to_string()))?;
        let mut rest = &vals[2 + dim..];
        let mut aux = Vec::with_capacity(keys.len());
        for &w in &widths {
            aux.push(rest[..w].to_vec());
            rest = &rest[w..];
        }
        entries.push(TrajectoryEntry {
            k,
            t: vals[0],
            theta,
            aux,
            loss: vals[1 + dim],
        });
    }
    let alpha = entries
        .iter()
        .find(|e| e.k > 0)
        .map_or(T::zero(), |e| e.t / T::from_index(e.k));
    Ok(Trajectory {
        alpha,
        aux_keys: keys,
        entries,
    })
}

pub fn write_report(report: &ComparisonReport, path: &Path) -> Result<()> {
    let mut body = String::from("series,max_abs_diff,rmse,argmax_k,points,alpha\n");
    for s in &report.series {
        body.push_str(&format!(
            "{},{:.16e},{:.16e},{},{},{}\n",
            s.name, s.max_abs_diff, s.rmse, s.argmax_k, report.points, report.alpha
        ));
    }
    let mut w = create(path)?;
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

pub fn write_solver_summary<T: Scalar>(report: &SolveReport<T>, path: &Path) -> Result<()> {
    let body = format!(
        "converged,outer_iterations,final_error,final_smoothing\n{},{},{},{}\n",
        report.converged,
        report.outer_iterations,
        fmt_float(report.final_error),
        fmt_float(report.final_smoothing)
    );
    let mut w = create(path)?;
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

/// One polyline of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const MAX_POINTS: usize = 4000;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A standalone SVG 1.1 line chart: axes, tick labels, legend, one polyline
/// per series, extents fitted to the data.
pub fn write_svg(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 200.0, 40.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= f64::EPSILON * x0.abs().max(1.0) {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= f64::EPSILON * y0.abs().max(1.0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        left + pw / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            px(xv),
            top + ph + 18.0,
            tick(xv)
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            left - 6.0,
            py(yv) + 4.0,
            tick(yv)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        left + pw / 2.0,
        h - 16.0,
        escape(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    ));

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let step = ser.points.len().div_ceil(MAX_POINTS).max(1);
        let last = ser.points.len().saturating_sub(1);
        let pts: Vec<String> = ser
            .points
            .iter()
            .enumerate()
            .filter(|&(j, (x, y))| (j % step == 0 || j == last) && x.is_finite() && y.is_finite())
            .map(|(_, &(x, y))| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        s.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 20.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        ));
    }
    s.push_str("</svg>\n");

    let mut f = create(path)?;
    f.write_all(s.as_bytes()).and_then(|_| f.flush()).map_err(io_err(path))
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    }
}

/// What a figure plots against `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Theta,
    Aux(&'static str),
    Loss,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Self::Theta => "theta",
            Self::Aux(k) => k,
            Self::Loss => "loss",
        }
    }

    fn values<T: Scalar>(self, traj: &Trajectory<T>) -> Option<Vec<f64>> {
        let v = match self {
            Self::Theta => traj.theta_series(0),
            Self::Aux(k) => traj.aux_series(k, 0)?,
            Self::Loss => traj.entries.iter().map(|e| e.loss).collect(),
        };
        Some(v.into_iter().map(Scalar::as_f64).collect())
    }
}

/// Runs and plotted quantities for one figure.
#[derive(Debug, Clone)]
pub struct FigurePlan {
    pub number: u8,
    pub title: &'static str,
    pub quantities: Vec<Quantity>,
    pub runs: Vec<ExperimentSpec<f64>>,
}

fn quadratic() -> Objective<f64> {
    Objective::ShiftedQuadratic { center: 4.0, dim: 1 }
}

fn mse() -> Objective<f64> {
    Objective::LinearRegressionMse {
        inputs: vec![1.0],
        target_slope: 2.0,
    }
}

fn spec(obj: Objective<f64>, kind: OptimizerKind, cfg: OptimizerConfig<f64>, mode: Mode) -> ExperimentSpec<f64> {
    ExperimentSpec::new(obj, kind, cfg, mode)
}

const ADAM: OptimizerKind = OptimizerKind::Adam(AdamVariant::Plain);

fn adagrad_runs(mode: Mode, horizons: [usize; 2], stride: [usize; 2]) -> Vec<ExperimentSpec<f64>> {
    [(0.1, 0), (0.01, 1)]
        .into_iter()
        .map(|(a, i)| {
            let cfg = OptimizerConfig::new(a, horizons[i]).with_stride(stride[i]);
            spec(quadratic(), OptimizerKind::AdaGrad, cfg, mode)
        })
        .collect()
}

fn rmsprop_runs(mode: Mode, horizons: [usize; 2]) -> Vec<ExperimentSpec<f64>> {
    let mut out = Vec::new();
    for (a, n) in [(0.1, horizons[0]), (0.01, horizons[1])] {
        for beta in [0.0, 0.9, 0.99] {
            let cfg = OptimizerConfig::new(a, n).with_beta(beta);
            out.push(spec(quadratic(), OptimizerKind::RmsProp, cfg, mode));
        }
    }
    out
}

fn adam_runs(mode: Mode, horizons: [usize; 2]) -> Vec<ExperimentSpec<f64>> {
    let mut out = Vec::new();
    for (a, n) in [(0.1, horizons[0]), (0.01, horizons[1])] {
        for (b1, b2) in [(0.0, 0.99), (0.0, 0.999), (0.9, 0.99), (0.9, 0.999)] {
            let cfg = OptimizerConfig::new(a, n).with_betas(b1, b2);
            out.push(spec(quadratic(), ADAM, cfg, mode));
        }
    }
    out
}

fn loss_runs(beta: f64, betas: (f64, f64), caps: [usize; 2]) -> Vec<ExperimentSpec<f64>> {
    let mut out = Vec::new();
    for (a, n) in [(0.1, caps[0]), (0.01, caps[1])] {
        let base = OptimizerConfig::new(a, n);
        out.push(spec(mse(), OptimizerKind::AdaGrad, base.clone(), Mode::Both));
        out.push(spec(
            mse(),
            OptimizerKind::RmsProp,
            base.clone().with_beta(beta),
            Mode::Both,
        ));
        out.push(spec(mse(), ADAM, base.with_betas(betas.0, betas.1), Mode::Both));
    }
    out
}

/// Desk-scale configuration of figure `n` (1–14).
pub fn figure_plan(n: u8) -> Result<FigurePlan> {
    use Quantity::{Aux, Loss, Theta};
    let (title, quantities, runs) = match n {
        1 => (
            "Discrete AdaGrad",
            vec![Theta],
            adagrad_runs(Mode::Discrete, [5000, 160_000], [1, 10]),
        ),
        2 => (
            "Discrete AdaGrad accumulator",
            vec![Aux("G")],
            adagrad_runs(Mode::Discrete, [5000, 160_000], [1, 10]),
        ),
        3 => (
            "Discrete RMSProp",
            vec![Theta],
            rmsprop_runs(Mode::Discrete, [2000, 20_000]),
        ),
        4 => (
            "Discrete RMSProp second moment",
            vec![Aux("v")],
            rmsprop_runs(Mode::Discrete, [2000, 20_000]),
        ),
        5 => ("Discrete Adam", vec![Theta], adam_runs(Mode::Discrete, [2000, 20_000])),
        6 => (
            "Discrete Adam moments",
            vec![Aux("m"), Aux("v")],
            adam_runs(Mode::Discrete, [2000, 20_000]),
        ),
        7 => (
            "Nonlocal AdaGrad",
            vec![Theta],
            adagrad_runs(Mode::Both, [2000, 20_000], [1, 10]),
        ),
        8 => (
            "Nonlocal AdaGrad accumulator",
            vec![Aux("G")],
            adagrad_runs(Mode::Both, [2000, 20_000], [1, 10]),
        ),
        9 => ("Nonlocal RMSProp", vec![Theta], rmsprop_runs(Mode::Both, [1000, 5000])),
        10 => (
            "Nonlocal RMSProp second moment",
            vec![Aux("v")],
            rmsprop_runs(Mode::Both, [1000, 5000]),
        ),
        11 => ("Nonlocal Adam", vec![Theta], adam_runs(Mode::Both, [1000, 3000])),
        12 => (
            "Nonlocal Adam moments",
            vec![Aux("m"), Aux("v")],
            adam_runs(Mode::Both, [1000, 3000]),
        ),
        13 => (
            "MSE loss, RMSProp β = 0.9, Adam (0.9, 0.99)",
            vec![Loss],
            loss_runs(0.9, (0.9, 0.99), [60, 300]),
        ),
        14 => (
            "MSE loss, RMSProp β = 0.99, Adam (0.99, 0.999)",
            vec![Loss],
            loss_runs(0.99, (0.99, 0.999), [80, 500]),
        ),
        other => return Err(Error::InvalidConfig(format!("figure must be 1-14, got {other}"))),
    };
    Ok(FigurePlan {
        number: n,
        title,
        quantities,
        runs,
    })
}

#[derive(Debug, Clone)]
pub struct FigureOutcome {
    pub outcomes: Vec<ExperimentOutcome<f64>>,
    pub svgs: Vec<PathBuf>,
    /// Continuous solves that stopped without reaching the tolerance.
    pub unconverged: usize,
}

fn run_label(s: &ExperimentSpec<f64>) -> String {
    let c = &s.config;
    let mut l = format!("{} α={}", s.optimizer, c.alpha);
    match s.optimizer {
        OptimizerKind::RmsProp => l.push_str(&format!(" β={}", c.beta)),
        OptimizerKind::Adam(_) => l.push_str(&format!(" β1={} β2={}", c.beta1, c.beta2)),
        _ => {}
    }
    l
}

/// Runs every configuration of figure `n` in parallel, writing run files
/// under `out_dir/figure{n}` and one overlay SVG per plotted quantity.
pub fn reproduce_figure(n: u8, out_dir: &Path, solver: &SolverConfig<f64>) -> Result<FigureOutcome> {
    let plan = figure_plan(n)?;
    let dir = out_dir.join(format!("figure{n}"));
    let runs: Vec<ExperimentSpec<f64>> = plan
        .runs
        .into_iter()
        .map(|mut s| {
            s.solver = *solver;
            s.out_dir = Some(dir.clone());
            s
        })
        .collect();
    let outcomes = runs.par_iter().map(run_experiment).collect::<Result<Vec<_>>>()?;

    let mut svgs = Vec::new();
    for q in &plan.quantities {
        let mut series = Vec::new();
        for (spec, out) in runs.iter().zip(&outcomes) {
            let label = run_label(spec);
            let mut add = |traj: &Trajectory<f64>, tag: &str| {
                if let Some(v) = q.values(traj) {
                    series.push(Series {
                        label: format!("{label} {tag}"),
                        points: traj.entries.iter().zip(v).map(|(e, y)| (e.k as f64, y)).collect(),
                    });
                }
            };
            if let Some(d) = &out.discrete {
                add(d, "discrete");
            }
            if let Some(c) = &out.continuous {
                add(&c.trajectory, "continuous");
            }
        }
        let path = dir.join(format!("figure{n}_{}.svg", q.name()));
        write_svg(&path, plan.title, "k", q.name(), &series)?;
        svgs.push(path);
    }
    let unconverged = outcomes
        .iter()
        .filter(|o| o.continuous.as_ref().is_some_and(|c| !c.solve.converged))
        .count();
    Ok(FigureOutcome {
        outcomes,
        svgs,
        unconverged,
    })
}
