//! Run configuration, command implementations and result records.
//!
//! A configuration is a flat `key = value` text with `[section]` headers:
//!
//! ```text
//! [model]
//! N = 200
//! beta = 1.5
//! field = two_valued(0.2,0.45)
//! sampling = stratified      # random | stratified | file
//! field_file =
//! seed = 1
//!
//! [partition]
//! blocks = 2
//! ```
//!
//! Unknown keys are rejected. Every command returns a [`ResultRecord`] that echoes
//! the configuration; all numbers in it carry a method tag. Wall-clock time is
//! kept out of the records so that repeated runs give identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::glauber::{self, MicroSystem, SimSpec, Source, Start};
use crate::kramers::{self, ExpectationMode};
use crate::landscape::{BarrierSpec, Landscape1D};
use crate::meso::{build_partition, lumped_chain, meso_saddle, LevelSets, LumpedChain, Partition};
use crate::model::{sample_field, stratified_field, FieldDistribution, RandomField, SystemParams};
use crate::potential::{self, BkMode, PotentialSolution, SolveOptions};
use crate::saddleflow::{self, FlowOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Random,
    Stratified,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimSource {
    Lumped,
    Microscopic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// Last-exit law on `A`, computed exactly on the lumped chain.
    Nu,
    /// Gibbs measure restricted to `A`.
    Gibbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub beta: f64,
    pub field: FieldDistribution,
    pub sampling: Sampling,
    pub field_file: Option<PathBuf>,
    pub seed: u64,
    pub blocks: usize,
    pub expectation: ExpectationMode,
    pub tol: f64,
    pub dense_limit: usize,
    pub slab_width: f64,
    pub bk_paths: usize,
    pub source: SimSource,
    pub start: StartKind,
    pub replicas: usize,
    pub max_steps: u64,
    /// System sizes swept by `report`.
    pub sizes: Vec<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 200,
            beta: 1.5,
            field: FieldDistribution::TwoValued { eps: 0.2, p: 0.45 },
            sampling: Sampling::Stratified,
            field_file: None,
            seed: 1,
            blocks: 1,
            expectation: ExpectationMode::Empirical,
            tol: 1e-10,
            dense_limit: 2000,
            slab_width: FlowOptions::default().slab_width,
            bk_paths: 20_000,
            source: SimSource::Lumped,
            start: StartKind::Nu,
            replicas: 1000,
            max_steps: glauber::DEFAULT_MAX_STEPS,
            sizes: vec![100, 200, 400, 800],
            out: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad value '{v}' for {key}")))
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, v: &str) -> Result<T> {
    serde_json::from_value(Value::String(v.to_string())).map_err(|_| Error::Parse(format!("bad value '{v}' for {key}")))
}

fn enum_name<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let key = format!("{section}.{k}");
            match key.as_str() {
                "model.N" => c.n = parse_num(&key, v)?,
                "model.beta" => c.beta = parse_num(&key, v)?,
                "model.field" => c.field = v.parse()?,
                "model.sampling" => c.sampling = parse_enum(&key, v)?,
                "model.field_file" => c.field_file = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
                "model.seed" => c.seed = parse_num(&key, v)?,
                "partition.blocks" => c.blocks = parse_num(&key, v)?,
                "predict.expectation" => c.expectation = parse_enum(&key, v)?,
                "solver.tol" => c.tol = parse_num(&key, v)?,
                "solver.dense_limit" => c.dense_limit = parse_num(&key, v)?,
                "bounds.slab_width" => c.slab_width = parse_num(&key, v)?,
                "bounds.bk_paths" => c.bk_paths = parse_num(&key, v)?,
                "simulate.source" => c.source = parse_enum(&key, v)?,
                "simulate.start" => c.start = parse_enum(&key, v)?,
                "simulate.replicas" => c.replicas = parse_num(&key, v)?,
                "simulate.max_steps" => c.max_steps = parse_num(&key, v)?,
                "report.sizes" => {
                    c.sizes = v.split(',').map(|s| parse_num(&key, s.trim())).collect::<Result<Vec<usize>>>()?;
                }
                "output.dir" => c.out = PathBuf::from(v),
                _ => return Err(Error::Parse(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sizes: Vec<String> = self.sizes.iter().map(|n| n.to_string()).collect();
        let file = self.field_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = write!(
            s,
            "[model]\nN = {}\nbeta = {:?}\nfield = {}\nsampling = {}\nfield_file = {}\nseed = {}\n\n\
             [partition]\nblocks = {}\n\n[predict]\nexpectation = {}\n\n\
             [solver]\ntol = {:?}\ndense_limit = {}\n\n[bounds]\nslab_width = {:?}\nbk_paths = {}\n\n\
             [simulate]\nsource = {}\nstart = {}\nreplicas = {}\nmax_steps = {}\n\n\
             [report]\nsizes = {}\n\n[output]\ndir = {}\n",
            self.n,
            self.beta,
            self.field,
            enum_name(&self.sampling),
            file,
            self.seed,
            self.blocks,
            enum_name(&self.expectation),
            self.tol,
            self.dense_limit,
            self.slab_width,
            self.bk_paths,
            enum_name(&self.source),
            enum_name(&self.start),
            self.replicas,
            self.max_steps,
            sizes.join(","),
            self.out.display()
        );
        s
    }

    pub fn check(&self) -> Result<()> {
        SystemParams::new(self.n, self.beta)?;
        self.field.validate()?;
        if self.blocks == 0 {
            return Err(Error::InvalidParameter("at least one block is required".into()));
        }
        if self.sampling == Sampling::File && self.field_file.is_none() {
            return Err(Error::InvalidParameter("sampling = file needs field_file".into()));
        }
        if !(self.tol > 0.0) || !(self.slab_width > 0.0) || self.replicas == 0 || self.bk_paths == 0 {
            return Err(Error::InvalidParameter("tolerances, widths and counts must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.n, self.beta)
    }

    /// The disorder realization described by the configuration.
    pub fn realize_field(&self) -> Result<RandomField> {
        match self.sampling {
            Sampling::Random => sample_field(&self.field, self.n, self.seed),
            Sampling::Stratified => stratified_field(&self.field, self.n),
            Sampling::File => {
                let path = self.field_file.as_ref().ok_or_else(|| Error::InvalidParameter("no field file".into()))?;
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
                let (field, _) = RandomField::read_from(std::io::BufReader::new(f))?;
                if field.n() != self.n {
                    return Err(Error::InvalidParameter(format!("field file has N = {}, config has {}", field.n(), self.n)));
                }
                Ok(field)
            }
        }
    }

    fn solve_options(&self, side: Vec<bool>) -> SolveOptions {
        SolveOptions { tol: self.tol, dense_limit: self.dense_limit, ..SolveOptions::with_side(side) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Formula,
    BoundLower,
    BoundUpper,
    MonteCarlo,
}

/// A number with the method that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged {
    pub value: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

pub fn tag(value: f64, method: Method) -> Tagged {
    Tagged { value, method, stderr: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Landscape,
    Predict,
    Exact,
    Bounds,
    Simulate,
    Validate,
    Report,
}

impl Command {
    pub fn name(self) -> String {
        enum_name(&self)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: Command,
    pub version: String,
    pub config: RunConfig,
    pub payload: Value,
}

/// A record plus auxiliary tables, not yet written anywhere.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub record: ResultRecord,
    /// `(file name, contents)` pairs, e.g. CSV tables.
    pub files: Vec<(String, Vec<u8>)>,
}

/// Everything derived from the configuration that commands share.
pub struct Problem {
    pub field: RandomField,
    pub params: SystemParams,
    pub land: Landscape1D,
    pub barrier: BarrierSpec,
    pub partition: Partition,
}

impl Problem {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let field = cfg.realize_field()?;
        let params = cfg.params()?;
        let land = Landscape1D::new(&field, params);
        let barrier = land.well_to_well()?;
        let partition = build_partition(&field, cfg.blocks)?;
        Ok(Problem { field, params, land, barrier, partition })
    }
}

/// Exact capacity and mean hitting time on the lumped chain.
pub struct ExactSolution {
    pub lumped: LumpedChain,
    pub sets: LevelSets,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub solution: PotentialSolution,
    pub time: potential::HittingTimeResult,
}

pub fn exact_solution(cfg: &RunConfig, p: &Problem) -> Result<ExactSolution> {
    let lumped = lumped_chain(&p.partition, &p.params)?;
    let sets = LevelSets::from_barrier(&p.barrier, p.params.n)?;
    let (a, b, side) = sets.split(&lumped.levels());
    let solution = potential::solve_potential_with(&lumped.chain, &a, &b, &cfg.solve_options(side))?;
    let time = potential::mean_hitting_time(&lumped.chain, &solution);
    Ok(ExactSolution { lumped, sets, a, b, solution, time })
}

fn record(cmd: Command, cfg: &RunConfig, payload: Value) -> ResultRecord {
    ResultRecord { command: cmd, version: env!("CARGO_PKG_VERSION").to_string(), config: cfg.clone(), payload }
}

fn cmd_landscape(cfg: &RunConfig) -> Result<Outcome> {
    let field = cfg.realize_field()?;
    let land = Landscape1D::new(&field, cfg.params()?);
    let pts = land.critical_points()?;
    let barrier = match land.well_to_well() {
        Ok(b) => Some(b),
        Err(e) if e.is_domain() => None,
        Err(e) => return Err(e),
    };
    let grid: Vec<f64> = (1..cfg.n).map(|k| crate::landscape::grid_value(k, cfg.n)).collect();
    let mut csv = Vec::new();
    land.write_csv(&grid, &mut csv)?;
    let points: Vec<Value> = pts
        .iter()
        .map(|p| {
            json!({
                "m_star": tag(p.m_star, Method::Exact),
                "kind": p.kind,
                "F": tag(p.f_value, Method::Exact),
                "a": tag(p.curvature_a, Method::Exact),
            })
        })
        .collect();
    let barrier = barrier.map(|b| {
        json!({
            "start": tag(b.start.m_star, Method::Exact),
            "saddle": tag(b.saddle.m_star, Method::Exact),
            "deeper": b.deeper_set.iter().map(|p| tag(p.m_star, Method::Exact)).collect::<Vec<_>>(),
            "deltaF": tag(b.delta_f, Method::Exact),
        })
    });
    let payload = json!({ "critical_points": points, "barrier": barrier });
    Ok(Outcome { record: record(Command::Landscape, cfg, payload), files: vec![("landscape.csv".into(), csv)] })
}

fn prediction_json(pred: &kramers::SharpPrediction) -> Value {
    let f = |x: f64| tag(x, Method::Formula);
    json!({
        "N": pred.n,
        "beta": pred.beta,
        "m0": f(pred.m0),
        "zstar": f(pred.zstar),
        "M": pred.deeper.iter().map(|&x| f(x)).collect::<Vec<_>>(),
        "deltaF": f(pred.delta_f),
        "a_m0": f(pred.a_m0),
        "a_zstar": f(pred.a_zstar),
        "gamma_bar1": f(pred.gamma_bar1),
        "log_ZQ_saddle": f(pred.log_zq_saddle),
        "log_Zcap": f(pred.log_zcap),
        "log_mean_time": f(pred.log_mean_time),
        "log_naive_mean_time": f(pred.log_naive_mean_time),
        "expectation": pred.mode,
    })
}

fn predict_for(cfg: &RunConfig, p: &Problem) -> Result<kramers::SharpPrediction> {
    match cfg.expectation {
        ExpectationMode::Empirical => kramers::predict(&p.land, &p.barrier, cfg.expectation),
        ExpectationMode::Analytic => {
            let land = Landscape1D::analytic(&cfg.field, p.params);
            let barrier = land.well_to_well()?;
            kramers::predict(&land, &barrier, cfg.expectation)
        }
    }
}

fn cmd_predict(cfg: &RunConfig) -> Result<Outcome> {
    let p = Problem::new(cfg)?;
    let pred = predict_for(cfg, &p)?;
    Ok(Outcome { record: record(Command::Predict, cfg, prediction_json(&pred)), files: vec![] })
}

fn exact_json(ex: &ExactSolution) -> Value {
    json!({
        "states": ex.lumped.n_states(),
        "blocks": ex.lumped.dim(),
        "lumping_exact": ex.lumped.exact,
        "solver": format!("{:?}", ex.solution.method),
        "solver_residual": ex.solution.residual,
        "log_Zcap": tag(ex.solution.log_cap, Method::Exact),
        "log_mean_time": tag(ex.time.log_mean, Method::Exact),
        "mean_time": tag(ex.time.mean, Method::Exact),
    })
}

fn cmd_exact(cfg: &RunConfig) -> Result<Outcome> {
    let p = Problem::new(cfg)?;
    let ex = exact_solution(cfg, &p)?;
    let mut files = Vec::new();
    if ex.lumped.n_states() <= 100_000 {
        let mut edges = Vec::new();
        ex.lumped.write_edges(&mut edges)?;
        files.push(("lumped_edges.csv".into(), edges));
    }
    Ok(Outcome { record: record(Command::Exact, cfg, exact_json(&ex)), files })
}

/// Exact mean hitting time of the chain projected onto the total magnetization.
pub fn naive_chain_time(cfg: &RunConfig, ex: &ExactSolution) -> Result<potential::HittingTimeResult> {
    let naive = kramers::project_naive_chain(&ex.lumped)?;
    let n = ex.lumped.n_sites;
    let a: Vec<usize> = (0..=n).filter(|&k| ex.sets.in_a(k)).collect();
    let b: Vec<usize> = (0..=n).filter(|&k| ex.sets.in_b(k)).collect();
    let side: Vec<bool> = (0..=n).map(|k| ex.sets.a_side(k)).collect();
    let sol = potential::solve_potential_with(&naive, &a, &b, &cfg.solve_options(side))?;
    Ok(potential::mean_hitting_time(&naive, &sol))
}

/// Sandwich `BK <= cap <= Phi(g~)` for the configured system.
pub fn bounds_json(cfg: &RunConfig, p: &Problem, ex: &ExactSolution) -> Result<Value> {
    let saddle = meso_saddle(p.barrier.saddle.m_star, &p.partition, p.params.beta)?;
    let flow = saddleflow::build_saddle_flow(&saddle, &ex.lumped, &ex.sets, &FlowOptions { slab_width: cfg.slab_width })?;
    potential::validate_flow(&ex.lumped.chain, &flow.flow, &ex.a, &ex.b)
        .map_err(|v| Error::InvalidFlow(format!("{v:?}")))?;
    let bk = potential::bk_lower_bound(
        &ex.lumped.chain,
        &flow.flow,
        &ex.a,
        &ex.b,
        BkMode::MonteCarlo { paths: cfg.bk_paths, seed: cfg.seed },
    )?;
    let up = saddleflow::upper_bound_via_g(&saddle, &ex.lumped, &ex.sets, &p.land, None)?;
    let cap = ex.solution.log_cap;
    Ok(json!({
        "log_Zcap": tag(cap, Method::Exact),
        "log_bk_lower": Tagged { value: bk.log_value, method: Method::BoundLower, stderr: bk.rel_stderr },
        "log_phi_upper": tag(up.log_phi, Method::BoundUpper),
        "log_closed_form": tag(up.log_closed_form, Method::Formula),
        "upper_over_lower": tag((up.log_phi - bk.log_value).exp(), Method::BoundUpper),
        "sandwich_holds": bk.log_value <= cap && cap <= up.log_phi,
        "flow_clipped_mass": flow.clipped_mass,
        "flow_slab_states": flow.slab_states,
        "gamma_hat1": tag(saddle.gamma1(), Method::Exact),
    }))
}

fn cmd_bounds(cfg: &RunConfig) -> Result<Outcome> {
    let p = Problem::new(cfg)?;
    let ex = exact_solution(cfg, &p)?;
    let payload = bounds_json(cfg, &p, &ex)?;
    Ok(Outcome { record: record(Command::Bounds, cfg, payload), files: vec![] })
}

/// Simulation spec for the configured source and start, targeting `B`.
pub fn sim_spec(cfg: &RunConfig, p: &Problem, ex: &ExactSolution) -> Result<SimSpec> {
    let start = match cfg.start {
        StartKind::Nu => Start::Law(ex.time.nu.clone()),
        StartKind::Gibbs => Start::GibbsRestricted(ex.a.clone()),
    };
    let mut target = vec![false; ex.lumped.n_states()];
    for &x in &ex.b {
        target[x] = true;
    }
    let source = match cfg.source {
        SimSource::Lumped => Source::Lumped(ex.lumped.chain.clone()),
        SimSource::Microscopic => Source::Microscopic(MicroSystem::new(p.field.clone(), p.params, &p.partition)?),
    };
    Ok(SimSpec { source, start, target, replicas: cfg.replicas, seed: cfg.seed, max_steps: cfg.max_steps })
}

fn mc_json(est: &glauber::McEstimate) -> Value {
    json!({
        "mean_time": Tagged { value: est.mean, method: Method::MonteCarlo, stderr: Some(est.stderr) },
        "R": est.replicas,
        "truncated": est.truncated,
        "usable": est.usable,
    })
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let p = Problem::new(cfg)?;
    let ex = exact_solution(cfg, &p)?;
    let spec = sim_spec(cfg, &p, &ex)?;
    let runs = glauber::run_replicas(&spec)?;
    let est = glauber::summarize(&runs)?;
    let mut csv = Vec::new();
    glauber::write_replicas_csv(&runs, &mut csv)?;
    let mut summary = Vec::new();
    est.write_json(&mut summary)?;
    let payload = json!({ "estimate": mc_json(&est), "exact_mean_time": tag(ex.time.mean, Method::Exact) });
    Ok(Outcome {
        record: record(Command::Simulate, cfg, payload),
        files: vec![("replicas.csv".into(), csv), ("mc_summary.json".into(), summary)],
    })
}

fn cmd_validate(cfg: &RunConfig) -> Result<Outcome> {
    let p = Problem::new(cfg)?;
    let ex = exact_solution(cfg, &p)?;
    let pred = predict_for(cfg, &p)?;
    let bounds = bounds_json(cfg, &p, &ex)?;
    let est = glauber::estimate_mean_time(&sim_spec(cfg, &p, &ex)?)?;
    let naive_time = naive_chain_time(cfg, &ex)?;
    let ka = ex.sets.ka;
    let payload = json!({
        "capacity": {
            "exact": tag(ex.solution.log_cap, Method::Exact),
            "formula": tag(pred.log_zcap, Method::Formula),
            "bounds": bounds,
            "exact_over_formula": tag((ex.solution.log_cap - pred.log_zcap).exp(), Method::Exact),
        },
        "mean_time": {
            "exact": tag(ex.time.mean, Method::Exact),
            "monte_carlo": mc_json(&est),
            "log_formula": tag(pred.log_mean_time, Method::Formula),
            "log_naive_formula": tag(pred.log_naive_mean_time, Method::Formula),
            "naive_chain_exact": tag(naive_time.mean, Method::Exact),
            "exact_over_formula": tag((ex.time.log_mean - pred.log_mean_time).exp(), Method::Exact),
            "exact_over_naive_chain": tag(ex.time.mean / naive_time.mean, Method::Exact),
            "start_level": ka,
        },
    });
    Ok(Outcome { record: record(Command::Validate, cfg, payload), files: vec![] })
}

/// One row of a convergence sweep: exact lumped values against the formulas.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub log_zcap_exact: f64,
    pub log_zcap_formula: f64,
    /// Exact over formula capacity.
    pub kappa: f64,
    pub log_time_exact: f64,
    pub log_time_formula: f64,
    /// Exact over formula mean time.
    pub kappa_time: f64,
}

pub fn sweep_row(cfg: &RunConfig) -> Result<SweepRow> {
    let p = Problem::new(cfg)?;
    let ex = exact_solution(cfg, &p)?;
    let pred = kramers::predict(&p.land, &p.barrier, ExpectationMode::Empirical)?;
    Ok(SweepRow {
        n: cfg.n,
        log_zcap_exact: ex.solution.log_cap,
        log_zcap_formula: pred.log_zcap,
        kappa: (ex.solution.log_cap - pred.log_zcap).exp(),
        log_time_exact: ex.time.log_mean,
        log_time_formula: pred.log_mean_time,
        kappa_time: (ex.time.log_mean - pred.log_mean_time).exp(),
    })
}

/// Aitken extrapolation of the last three terms of a sequence.
pub fn aitken(x: &[f64]) -> Option<f64> {
    let [a, b, c] = x.get(x.len().checked_sub(3)?..)? else { return None };
    let d = (c - b) - (b - a);
    if d.abs() < 1e-300 {
        return Some(*c);
    }
    Some(c - (c - b) * (c - b) / d)
}

fn cmd_report(cfg: &RunConfig) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let c = RunConfig { n, ..cfg.clone() };
        rows.push(sweep_row(&c)?);
    }
    let mut csv = String::from("N,log_Zcap_exact,log_Zcap_formula,kappa,log_time_exact,log_time_formula,kappa_time\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{:.15e},{:.15e},{:.12},{:.15e},{:.15e},{:.12}",
            r.n, r.log_zcap_exact, r.log_zcap_formula, r.kappa, r.log_time_exact, r.log_time_formula, r.kappa_time
        );
    }
    let kappas: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
    let kt: Vec<f64> = rows.iter().map(|r| r.kappa_time).collect();
    let table: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "N": r.n,
                "log_Zcap_exact": tag(r.log_zcap_exact, Method::Exact),
                "log_Zcap_formula": tag(r.log_zcap_formula, Method::Formula),
                "kappa": tag(r.kappa, Method::Exact),
                "log_time_exact": tag(r.log_time_exact, Method::Exact),
                "log_time_formula": tag(r.log_time_formula, Method::Formula),
                "kappa_time": tag(r.kappa_time, Method::Exact),
            })
        })
        .collect();
    let payload = json!({
        "rows": table,
        "kappa_limit": aitken(&kappas).map(|x| tag(x, Method::Exact)),
        "kappa_time_limit": aitken(&kt).map(|x| tag(x, Method::Exact)),
    });
    Ok(Outcome { record: record(Command::Report, cfg, payload), files: vec![("report.csv".into(), csv.into_bytes())] })
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.check()?;
    match cmd {
        Command::Landscape => cmd_landscape(cfg),
        Command::Predict => cmd_predict(cfg),
        Command::Exact => cmd_exact(cfg),
        Command::Bounds => cmd_bounds(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Validate => cmd_validate(cfg),
        Command::Report => cmd_report(cfg),
    }
}

/// Writes `<command>.json`, the auxiliary files and `timing.json` into `dir`.
pub fn write_outcome(dir: &Path, outcome: &Outcome, seconds: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = outcome.record.command.name();
    let mut text = serde_json::to_string_pretty(&outcome.record)?;
    text.push('\n');
    std::fs::write(dir.join(format!("{name}.json")), text)?;
    for (file, bytes) in &outcome.files {
        std::fs::write(dir.join(file), bytes)?;
    }
    let mut timing: BTreeMap<String, f64> = std::fs::read_to_string(dir.join("timing.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    timing.insert(name, seconds);
    std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)?)?;
    Ok(())
}
