use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use depmeter::dependence::{self, Stratum, Verdict};
use depmeter::discrete::{self, FactoredModel, XorModel, XorVariant};
use depmeter::gaussian::{self, LinearSem};
use depmeter::ipm::{self, EmpiricalDistribution, KernelSpec, MetricSpace};
use depmeter::simgen::{self, InterventionSpec, NodeClamp};
use depmeter::structure::{self, Experiment};
use depmeter::Dataset;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{append_csv, read_text, write_atomic};
use crate::{ClampKind, Command, Query, XorArg};

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { model, n, do_x3, clamps, split, m, p, sem, file } => {
            simulate(cfg, model, *n, *do_x3, clamps, *split, *m, p.as_deref(), sem.as_deref(), file.as_deref())
        }
        Command::Estimate { input, i, j, k } => estimate(cfg, input, i, j, k),
        Command::GroupScan { input, y, x, c, sweep } => group_scan(cfg, input, y, x, c, sweep),
        Command::Learn { input, interventional } => learn(cfg, input, interventional),
        Command::Discrete { model, xor, xor_b, xor_eps, query, from, to, given } => {
            discrete_query(model.as_deref(), *xor, *xor_b, *xor_eps, *query, from, to, given)
        }
        Command::Transport { input, a, b } => transport(input, a, b),
    }
}

fn echo_config(cfg: &RunConfig) -> Result<(), CliError> {
    write_atomic(&cfg.out.join("config.json"), cfg.to_json().as_bytes())
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Dataset::read_csv(f)?)
}

/// Column by name, falling back to a 0-based index.
fn column(ds: &Dataset, key: &str) -> Result<usize, CliError> {
    match ds.column_index(key) {
        Ok(c) => Ok(c),
        Err(e) => match key.parse::<usize>() {
            Ok(c) => {
                ds.check_column(c)?;
                Ok(c)
            }
            Err(_) => Err(e.into()),
        },
    }
}

fn columns(ds: &Dataset, keys: &[String]) -> Result<Vec<usize>, CliError> {
    keys.iter().filter(|k| !k.is_empty()).map(|k| column(ds, k)).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SemFile {
    a: Vec<Vec<f64>>,
    noise_var: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &RunConfig,
    model: &str,
    n: usize,
    do_x3: Option<ClampKind>,
    clamps: &[String],
    split: f64,
    m: usize,
    p: Option<&[f64]>,
    sem: Option<&Path>,
    file: Option<&str>,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::BadParams("--n must be at least 1".into()));
    }
    let only_nonlinear = |flag: &str| CliError::BadParams(format!("{flag} applies only to nonlinear-eq12"));
    if model != "nonlinear-eq12" && (do_x3.is_some() || !clamps.is_empty()) {
        return Err(only_nonlinear(if do_x3.is_some() { "--do-x3" } else { "--do" }));
    }
    let ds = match model {
        "linear-sem" => {
            let path = sem.ok_or_else(|| CliError::BadParams("linear-sem needs --sem <file.json>".into()))?;
            let spec: SemFile =
                serde_json::from_str(&read_text(path)?).map_err(|e| CliError::BadParams(format!("{}: {e}", path.display())))?;
            let sem = LinearSem::new(spec.a, spec.noise_var)?;
            simgen::sample_linear_sem(&sem, n, cfg.seed)?
        }
        "nonlinear-eq12" => {
            let mut spec = match do_x3 {
                Some(ClampKind::Natural) => InterventionSpec::x3_natural(),
                Some(ClampKind::NonNatural) => InterventionSpec::x3_non_natural(),
                None => InterventionSpec::default(),
            };
            for c in clamps {
                let (node, value) = parse_clamp(c)?;
                if node == 2 && do_x3.is_some() {
                    return Err(CliError::BadParams("X3 is clamped twice".into()));
                }
                spec.clamps.retain(|k| k.node != node);
                spec.clamps.push(NodeClamp { node, value, natural: false });
            }
            simgen::sample_nonlinear_system(n, cfg.seed, Some(&spec))?
        }
        "group" => simgen::sample_group_model(n, cfg.seed, split)?,
        "ratio" => {
            let uniform = vec![1.0 / m.max(1) as f64; m];
            simgen::sample_ratio_model(n, cfg.seed, m, p.unwrap_or(&uniform))?
        }
        other => return Err(CliError::UnknownModel(other.to_string())),
    };
    let name = file.map(str::to_string).unwrap_or_else(|| format!("{model}.csv"));
    let path = cfg.out.join(name);
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    write_atomic(&path, &buf)?;
    echo_config(cfg)?;
    println!("wrote {} rows x {} columns to {}", ds.n_rows(), ds.n_cols(), path.display());
    Ok(())
}

/// `X5=0` or `5=0` (1-based) → (0-based node, value).
fn parse_clamp(s: &str) -> Result<(usize, f64), CliError> {
    let bad = || CliError::BadParams(format!("expected NODE=VALUE, got {s:?}"));
    let (node, value) = s.split_once('=').ok_or_else(bad)?;
    let node = node.trim();
    let idx: usize = node.strip_prefix('X').unwrap_or(node).parse().map_err(|_| bad())?;
    if !(1..=5).contains(&idx) {
        return Err(CliError::BadParams(format!("node {node} outside X1..X5")));
    }
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    if !value.is_finite() {
        return Err(bad());
    }
    Ok((idx - 1, value))
}

const RESULTS_HEADER: &str = "i,j,K,estimator,value,tau,verdict,n_cells\n";

fn estimate(cfg: &RunConfig, input: &Path, i: &str, j: &str, k: &[String]) -> Result<(), CliError> {
    let ds = load_dataset(input)?;
    let (i, j, k) = (column(&ds, i)?, column(&ds, j)?, columns(&ds, k)?);
    let est = dependence::estimate_coefficient(&ds, i, j, &k, &cfg.estimator_config())?;
    let rec = est.record(ds.columns());
    println!("value {}", est.value);
    println!("tau {}", est.tau);
    println!("verdict {}", if est.verdict == Verdict::Dependent { "dependent" } else { "independent" });
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(&rec).map_err(|e| CliError::BadParams(e.to_string()))?;
    let row = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    append_csv(&cfg.out.join("results.csv"), RESULTS_HEADER, &row)?;
    echo_config(cfg)
}

/// Gaussian CMI of X and Y inside one stratum, in nats.
fn stratum_cmi(ds: &Dataset, x: usize, y: usize, c: usize, value: f64) -> Result<f64, CliError> {
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.get(r, c) == value).collect();
    let xs: Vec<f64> = rows.iter().map(|&r| ds.get(r, x)).collect();
    let ys: Vec<f64> = rows.iter().map(|&r| ds.get(r, y)).collect();
    let pair = Dataset::from_columns(vec!["x".into(), "y".into()], &[xs, ys])?;
    let model = gaussian::estimate_covariance(&pair)?;
    Ok(gaussian::gaussian_cmi(&model, 0, 1, &[])?.to_nats())
}

fn label(ds: &Dataset, c: usize, value: f64) -> String {
    ds.level_label(c, value).map(str::to_string).unwrap_or_else(|| format!("{value}"))
}

fn group_scan(cfg: &RunConfig, input: &Path, y: &str, x: &str, c: &str, sweep: &[usize]) -> Result<(), CliError> {
    let ds = load_dataset(input)?;
    let (y, x, c) = (column(&ds, y)?, column(&ds, x)?, column(&ds, c)?);
    let ecfg = cfg.estimator_config();
    let scan = dependence::group_scan(&ds, y, x, c, &ecfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::BadParams(e.to_string());
    w.write_record(["rank", "stratum", "label", "n_rows", "coefficient", "tau", "verdict", "cmi_nats"]).map_err(csv_err)?;
    println!("{:>4}  {:>12}  {:>8}  {:>12}  {:>12}", "rank", "stratum", "n", "coefficient", "cmi_nats");
    for (rank, s) in scan.ranked.iter().enumerate() {
        let cmi = stratum_cmi(&ds, x, y, c, s.value)?;
        let lab = label(&ds, c, s.value);
        let verdict = if s.estimate.is_dependent() { "dependent" } else { "independent" };
        w.write_record([
            (rank + 1).to_string(),
            format!("{}", s.value),
            lab.clone(),
            s.n_rows.to_string(),
            s.estimate.value.to_string(),
            s.estimate.tau.to_string(),
            verdict.to_string(),
            cmi.to_string(),
        ])
        .map_err(csv_err)?;
        println!("{:>4}  {:>12}  {:>8}  {:>12.4}  {:>12.4}", rank + 1, lab, s.n_rows, s.estimate.value, cmi);
    }
    write_atomic(&cfg.out.join("group_scan.csv"), &w.into_inner().expect("in-memory flush"))?;
    if !sweep.is_empty() {
        let text = group_sweep(&ds, y, x, c, sweep, cfg)?;
        write_atomic(&cfg.out.join("group_scan_sweep.csv"), text.as_bytes())?;
    }
    echo_config(cfg)
}

/// One row per N, columns `coef[label]` and `cmi[label]` for every stratum.
fn group_sweep(ds: &Dataset, y: usize, x: usize, c: usize, sizes: &[usize], cfg: &RunConfig) -> Result<String, CliError> {
    let all: Vec<f64> = dependence::strata(ds, c).into_iter().map(|(v, _)| v).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::BadParams(e.to_string());
    let mut header = vec!["N".to_string()];
    for &v in &all {
        header.push(format!("coef[{}]", label(ds, c, v)));
    }
    for &v in &all {
        header.push(format!("cmi[{}]", label(ds, c, v)));
    }
    w.write_record(&header).map_err(csv_err)?;
    let ecfg = cfg.estimator_config();
    for &n in sizes {
        if n == 0 || n > ds.n_rows() {
            return Err(CliError::BadParams(format!("sweep size {n} outside 1..={}", ds.n_rows())));
        }
        let sub = ds.select_rows(&(0..n).collect::<Vec<_>>())?;
        // strata too small to estimate at this N are left blank
        let coefs: BTreeMap<u64, f64> = all
            .iter()
            .filter_map(|&v| {
                dependence::group_coefficient(&sub, y, x, c, Stratum::Value(v), &ecfg).ok().map(|e| (v.to_bits(), e.value))
            })
            .collect();
        let mut row = vec![n.to_string()];
        for &v in &all {
            row.push(coefs.get(&v.to_bits()).map(f64::to_string).unwrap_or_default());
        }
        for &v in &all {
            let rows_in = (0..sub.n_rows()).filter(|&r| sub.get(r, c) == v).count();
            row.push(if rows_in >= 3 { stratum_cmi(&sub, x, y, c, v).map(|m| m.to_string()).unwrap_or_default() } else { String::new() });
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"))
}

fn learn(cfg: &RunConfig, input: &Path, interventional: &[std::path::PathBuf]) -> Result<(), CliError> {
    let obs = load_dataset(input)?;
    let mut experiments = Vec::new();
    for path in interventional {
        let data = load_dataset(path)?;
        if data.columns() != obs.columns() {
            return Err(CliError::BadParams(format!("{}: columns differ from the observational file", path.display())));
        }
        let clamped = data.clamped_columns()?;
        if clamped.len() != 1 {
            return Err(CliError::BadParams(format!(
                "{}: expected exactly one clamped column in the header, found {}",
                path.display(),
                clamped.len()
            )));
        }
        experiments.push(Experiment { clamped: clamped[0].0, data });
    }
    let pdag = structure::learn_structure(&obs, &experiments, &cfg.learn_config())?;
    write_atomic(&cfg.out.join("graph.dot"), pdag.to_dot().as_bytes())?;
    write_atomic(&cfg.out.join("edges.csv"), pdag.to_edge_csv().as_bytes())?;
    echo_config(cfg)?;
    let (d, u) = (pdag.directed_edges().len(), pdag.undirected_edges().len());
    println!("{} edges ({d} directed, {u} undirected), {} conflicts", d + u, pdag.conflicts().len());
    for e in pdag.edges() {
        let arrow = if e.directed { "->" } else { "--" };
        println!("{} {arrow} {} [{}]", pdag.names()[e.from], pdag.names()[e.to], e.provenance.as_str());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn discrete_query(
    model: Option<&Path>,
    xor: Option<XorArg>,
    xor_b: f64,
    xor_eps: f64,
    query: Query,
    from: &[String],
    to: &[String],
    given: &[String],
) -> Result<(), CliError> {
    let model = match (model, xor) {
        (Some(path), _) => FactoredModel::from_json(&read_text(path)?)?,
        (None, Some(v)) => {
            let variant = if v == XorArg::A { XorVariant::A } else { XorVariant::B };
            XorModel::new(variant, xor_b, xor_eps)?.to_model()
        }
        (None, None) => return Err(CliError::BadParams("give --model <file.json> or --xor a|b".into())),
    };
    let nodes = |names: &[String]| -> Result<Vec<usize>, CliError> {
        names.iter().filter(|s| !s.is_empty()).map(|s| Ok(model.node_index(s)?)).collect()
    };
    let (a, b, k) = (nodes(from)?, nodes(to)?, nodes(given)?);
    let single = |v: &[usize], flag: &str| -> Result<usize, CliError> {
        match v {
            [x] => Ok(*x),
            _ => Err(CliError::BadParams(format!("{flag} takes exactly one node for this query"))),
        }
    };
    match query {
        Query::Flow => println!("{}", discrete::information_flow(&model, &a, &b, &k)?),
        Query::Cmi => println!("{}", discrete::cmi_discrete(&model, single(&b, "--to")?, single(&a, "--from")?, &k)?),
        Query::Coefficient => println!("{}", discrete::exact_coefficient(&model, single(&b, "--to")?, single(&a, "--from")?, &k)?),
        Query::DoCoefficient => println!("{}", discrete::do_coefficient(&model, single(&b, "--to")?, single(&a, "--from")?, &k)?),
    }
    Ok(())
}

fn transport(input: &Path, a: &str, b: &str) -> Result<(), CliError> {
    let ds = load_dataset(input)?;
    let (ca, cb) = (column(&ds, a)?, column(&ds, b)?);
    let da = EmpiricalDistribution::from_scalars(&ds.column(ca))?;
    let db = EmpiricalDistribution::from_scalars(&ds.column(cb))?;
    let exact = ipm::wasserstein_1d_exact(&da, &db)?;
    match ipm::wasserstein_lp(&da, &db, &MetricSpace::euclidean(1)) {
        Ok(w) => println!("wasserstein_lp {w}"),
        Err(ipm::IpmError::SizeCapExceeded { total, cap }) => {
            println!("wasserstein_lp skipped ({total} atoms exceed the cap of {cap})")
        }
        Err(e) => return Err(e.into()),
    }
    println!("wasserstein_1d {exact}");
    let kernel = KernelSpec::median_heuristic(&da, &db)?;
    let mmd = ipm::mmd_squared(&da, &db, &kernel)?;
    println!("mmd_squared {} (bandwidth {})", mmd.value, kernel.bandwidth());
    let (lo, hi) = ipm::sandwich_bounds(&da, &db, None)?;
    println!("sandwich {lo} {hi}");
    Ok(())
}
