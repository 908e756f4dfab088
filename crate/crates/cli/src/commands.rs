use crate::output::{json_report, render, sig6, table_report, to_value, Outcome};
use crate::{
    Cli, Command, DataArgs, EngineArg, FnfpArgs, Format, FpTableArgs, GraphArgs, Loss, Method, OuterLawArg,
    RegionArgs, Scenario, SelectArgs, SelectionArgs, SimulateArgs, SubsetsArgs,
};
use covsel::data::{self, LagSpec, Loaded, RandomGraphSpec, SimDesign, Table};
use covsel::extensions::{logistic_stepwise, m_stepwise, HuberLoss};
use covsel::fp_sim::{self, Engine, FpTable, NullSimulation};
use covsel::graph::{build_graph, export_graph, GraphConfig, GraphFormat, GraphMethod};
use covsel::inference::{interval, region};
use covsel::pvalues::OuterLaw;
use covsel::rng::fresh_seed;
use covsel::selection::{f1st, f2st, f3st, fasb, SelectionConfig, SelectionTrace, SubsetApproximation, Termination};
use covsel::sim;
use covsel::{Dataset, Error, Exec, Result};
use serde_json::json;
use std::fmt::Write as _;
use std::time::Instant;

pub fn run(cli: &Cli) -> Result<String> {
    let graph_format = matches!(cli.format, Format::Dot | Format::EdgeList);
    if graph_format && !matches!(cli.command, Command::Graph(_)) {
        return Err(Error::Domain("--format dot/edge-list applies to `graph` only".into()));
    }
    let t0 = Instant::now();
    let out = match &cli.command {
        Command::Select(a) => select(a)?,
        Command::Subsets(a) => subsets(a)?,
        Command::Region(a) => region_cmd(a)?,
        Command::Fnfp(a) => fnfp(a)?,
        Command::FpTable(a) => return fp_table(a),
        Command::Graph(a) => graph(a, cli.format)?,
        Command::Simulate(a) => simulate(a)?,
    };
    let timing = cli.timing.then(|| t0.elapsed().as_secs_f64());
    let args: Vec<String> = std::env::args().collect();
    Ok(match cli.format {
        Format::Json => json_report(&out, &args, timing),
        Format::Table => table_report(&out, &args, timing),
        Format::Dot | Format::EdgeList => out.graph_text.unwrap_or_default(),
    })
}

fn selection_config(a: &SelectionArgs) -> SelectionConfig {
    SelectionConfig {
        alpha: a.alpha,
        nu: a.nu,
        kmn: a.kmn,
        kmx: a.kmx,
        final_pass: !a.no_final_pass,
        final_pass_limit: a.final_pass_limit,
        outer_law: match a.outer_law {
            OuterLawArg::Pool => OuterLaw::Pool,
            OuterLawArg::PoolPlusOne => OuterLaw::PoolPlusOne,
        },
        ..SelectionConfig::default()
    }
}

/// Load the response and covariates; `center` adds the intercept by centring.
fn load(a: &DataArgs, center: bool) -> Result<Loaded> {
    let table = Table::read(&a.file)?;
    let mut loaded = match a.lags {
        Some(max_lag) => data::make_lags(
            &table,
            &LagSpec {
                max_lag,
                series: a.lag_series.clone(),
                target: a.y.clone(),
            },
            center,
        )?,
        None => data::dataset_from_table(&table, &a.y, center, a.strict)?,
    };
    if a.standardize {
        let (d, _) = data::standardize(&loaded.dataset)?;
        loaded.dataset = d;
    }
    Ok(loaded)
}

fn one_based(cols: &[usize]) -> Vec<usize> {
    cols.iter().map(|c| c + 1).collect()
}

fn trace_json(t: &SelectionTrace, data: &Dataset) -> serde_json::Value {
    json!({
        "selected": one_based(&t.chosen),
        "names": t.chosen.iter().map(|&c| data.x().name(c)).collect::<Vec<_>>(),
        "pvalues": t.final_pvalues,
        "coefficients": t.coeffs,
        "intercept": t.intercept,
        "rss": t.rss,
        "steps": t.steps.iter().map(|s| json!({
            "column": s.index + 1,
            "pvalue": s.pvalue,
            "rss": s.rss,
            "forced": s.forced,
        })).collect::<Vec<_>>(),
        "termination": to_value(&t.termination),
        "final_pass_applied": t.final_pass_applied,
        "asymptotic": t.asymptotic,
    })
}

fn trace_table(t: &SelectionTrace, data: &Dataset) -> String {
    let mut s = String::new();
    if t.chosen.is_empty() {
        let _ = writeln!(s, "no covariates selected");
    } else {
        let rows: Vec<Vec<String>> = t
            .chosen
            .iter()
            .zip(&t.final_pvalues)
            .zip(&t.coeffs)
            .map(|((&c, &p), &b)| vec![(c + 1).to_string(), data.x().name(c).to_string(), sig6(p), sig6(b)])
            .collect();
        s.push_str(&render(&["index", "name", "pvalue", "coefficient"], &rows));
        let _ = writeln!(s, "rss {}", sig6(t.rss));
    }
    let steps: Vec<Vec<String>> = t
        .steps
        .iter()
        .enumerate()
        .map(|(i, st)| {
            vec![
                (i + 1).to_string(),
                (st.index + 1).to_string(),
                data.x().name(st.index).to_string(),
                sig6(st.pvalue),
                sig6(st.rss),
                if st.forced { "forced".into() } else { String::new() },
            ]
        })
        .collect();
    if !steps.is_empty() {
        let _ = writeln!(s, "\nstepwise path");
        s.push_str(&render(&["step", "index", "name", "pvalue", "rss", ""], &steps));
    }
    let _ = writeln!(s, "termination: {}", termination_text(&t.termination, data));
    s
}

fn termination_text(t: &Termination, data: &Dataset) -> String {
    match *t {
        Termination::PvalueAboveAlpha { index, pvalue } => format!(
            "best remaining candidate {} ({}) has P-value {} above alpha",
            index + 1,
            data.x().name(index),
            sig6(pvalue)
        ),
        Termination::NoAdmissibleCandidate => "no admissible candidate left".into(),
        Termination::MaxSize => "size cap reached".into(),
        Termination::PerfectFit => "perfect fit".into(),
        Termination::PoolExhausted => "candidate pool exhausted".into(),
        Termination::NoQualifyingSubset => "no subset of the stepwise selection passed the final pass".into(),
    }
}

fn approximations_json(list: &[SubsetApproximation], data: &Dataset) -> serde_json::Value {
    json!(list
        .iter()
        .map(|a| json!({
            "subset": one_based(&a.indices),
            "names": a.indices.iter().map(|&c| data.x().name(c)).collect::<Vec<_>>(),
            "rss": a.rss,
            "pvalues": a.pvalues,
            "coefficients": a.coeffs,
        }))
        .collect::<Vec<_>>())
}

fn approximations_table(list: &[SubsetApproximation]) -> String {
    if list.is_empty() {
        return "no qualifying subset\n".into();
    }
    let rows: Vec<Vec<String>> = list
        .iter()
        .enumerate()
        .map(|(i, a)| {
            vec![
                (i + 1).to_string(),
                sig6(a.rss),
                one_based(&a.indices).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
                a.pvalues.iter().map(|&p| sig6(p)).collect::<Vec<_>>().join(","),
            ]
        })
        .collect();
    render(&["rank", "rss", "subset", "pvalues"], &rows)
}

fn select(a: &SelectArgs) -> Result<Outcome> {
    let mut cfg = selection_config(&a.selection);
    cfg.m = a.m;
    let intercept = !a.data.no_intercept;
    if a.loss != Loss::Ls && a.method != Method::F1st {
        return Err(Error::Domain("robust and logistic losses support --method f1st only".into()));
    }
    let config = json!({
        "file": a.data.file,
        "y": a.data.y,
        "method": format!("{:?}", a.method).to_lowercase(),
        "loss": format!("{:?}", a.loss).to_lowercase(),
        "intercept": intercept,
        "standardize": a.data.standardize,
        "lags": a.data.lags,
        "huber_c": (a.loss == Loss::Huber).then_some(a.huber_c),
        "selection": to_value(&cfg),
    });
    // Robust and logistic fits handle the intercept themselves.
    let loaded = load(&a.data, intercept && a.loss == Loss::Ls)?;
    let data = &loaded.dataset;
    let mut out = match (a.method, a.loss) {
        (Method::F1st, loss) => {
            let t = match loss {
                Loss::Ls => f1st(data, &cfg)?,
                Loss::Huber => m_stepwise(data.x(), data.y(), intercept, &cfg, &HuberLoss::new(a.huber_c)?)?,
                Loss::Logistic => logistic_stepwise(data.x(), data.y(), &cfg)?,
            };
            let mut o = Outcome::new(config, trace_json(&t, data), trace_table(&t, data));
            o.warnings.extend(t.warnings.iter().cloned());
            o
        }
        (Method::F2st, _) => {
            let traces = f2st(data, &cfg)?;
            let mut table = String::new();
            for (i, t) in traces.iter().enumerate() {
                let _ = writeln!(table, "== repetition {} ==", i + 1);
                table.push_str(&trace_table(t, data));
            }
            let results: Vec<_> = traces.iter().map(|t| trace_json(t, data)).collect();
            Outcome::new(config, results, table)
        }
        (Method::F3st, _) => {
            let list = f3st(data, &cfg)?;
            Outcome::new(config, approximations_json(&list, data), approximations_table(&list))
        }
    };
    out.warnings.splice(0..0, loaded.warnings);
    Ok(out)
}

fn subsets(a: &SubsetsArgs) -> Result<Outcome> {
    let loaded = load(&a.data, !a.data.no_intercept)?;
    let data = &loaded.dataset;
    let cfg = SelectionConfig {
        alpha: a.alpha,
        ..SelectionConfig::default()
    };
    let universe: Option<Vec<usize>> = match (&a.universe, a.pool) {
        (Some(u), _) => Some(zero_based(u, data.q())?),
        (None, Some(k)) => {
            let step_cfg = SelectionConfig {
                kmn: k,
                kmx: Some(k),
                final_pass: false,
                ..cfg.clone()
            };
            Some(f1st(data, &step_cfg)?.steps.iter().map(|s| s.index).collect())
        }
        (None, None) => None,
    };
    let list = fasb(data, &cfg, universe.as_deref())?;
    let config = json!({
        "file": a.data.file,
        "y": a.data.y,
        "alpha": a.alpha,
        "universe": universe.as_deref().map(one_based),
    });
    let mut out = Outcome::new(config, approximations_json(&list, data), approximations_table(&list));
    out.warnings = loaded.warnings;
    Ok(out)
}

fn zero_based(cols: &[usize], q: usize) -> Result<Vec<usize>> {
    cols.iter()
        .map(|&c| {
            if c == 0 || c > q {
                Err(Error::Domain(format!("column {c} out of range 1..={q}")))
            } else {
                Ok(c - 1)
            }
        })
        .collect()
}

fn region_cmd(a: &RegionArgs) -> Result<Outcome> {
    let loaded = load(&a.data, !a.data.no_intercept)?;
    let data = &loaded.dataset;
    let subset = zero_based(&a.subset, data.q())?;
    let r = region(data, &subset, a.alpha)?;
    let intervals = subset
        .iter()
        .map(|&c| interval(data, &subset, c, a.alpha))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = intervals
        .iter()
        .map(|iv| {
            vec![
                (iv.column + 1).to_string(),
                data.x().name(iv.column).to_string(),
                sig6(iv.center),
                sig6(iv.lower()),
                sig6(iv.upper()),
            ]
        })
        .collect();
    let mut table = format!("rss_ls {}  radius {}\n", sig6(r.rss_ls), sig6(r.radius_rss));
    table.push_str(&render(&["index", "name", "estimate", "lower", "upper"], &rows));
    let results = json!({
        "subset": one_based(&subset),
        "center": r.center,
        "rss_ls": r.rss_ls,
        "radius_rss": r.radius_rss,
        "intervals": intervals.iter().map(|iv| json!({
            "column": iv.column + 1,
            "estimate": iv.center,
            "lower": iv.lower(),
            "upper": iv.upper(),
            "half_width": iv.half_width,
        })).collect::<Vec<_>>(),
    });
    let config = json!({ "file": a.data.file, "y": a.data.y, "alpha": a.alpha, "subset": a.subset });
    let mut out = Outcome::new(config, results, table);
    out.warnings = loaded.warnings;
    Ok(out)
}

fn seed_or_fresh(seed: Option<u64>) -> (u64, bool) {
    match seed {
        Some(s) => (s, false),
        None => (fresh_seed(), true),
    }
}

fn fnfp(a: &FnfpArgs) -> Result<Outcome> {
    if a.lookup {
        let table = fp_sim::embedded_table()?;
        let means = a
            .nu
            .iter()
            .map(|&nu| table.lookup(a.n as f64, a.q as f64, a.alpha, nu as f64))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<String>> = a.nu.iter().zip(&means).map(|(nu, m)| vec![nu.to_string(), sig6(*m)]).collect();
        let results: Vec<_> = a.nu.iter().zip(&means).map(|(nu, m)| json!({ "nu": nu, "mean_fp": m })).collect();
        let config = json!({ "n": a.n, "q": a.q, "alpha": a.alpha, "nu": a.nu, "lookup": true });
        let table = format!("interpolated mean false positives, n={} q={} alpha={}\n", a.n, a.q, a.alpha)
            + &render(&["nu", "mean_fp"], &rows);
        return Ok(Outcome::new(config, results, table));
    }
    let (seed, generated) = seed_or_fresh(a.seed);
    let mut sim = NullSimulation::new(a.n, a.q, a.nsim, seed);
    sim.engine = match a.engine {
        EngineArg::Reduced => Engine::Reduced,
        EngineArg::Direct => Engine::Direct,
    };
    let configs: Vec<(f64, usize)> = a.nu.iter().map(|&nu| (a.alpha, nu)).collect();
    let hists = sim.run(&configs)?;
    let mut table = String::new();
    for h in &hists {
        table.push_str(&h.to_table());
        if a.per_covariate {
            let _ = writeln!(table, "per covariate {}", sig6(h.per_covariate));
        }
        table.push('\n');
    }
    let config = json!({
        "n": a.n, "q": a.q, "alpha": a.alpha, "nu": a.nu, "nsim": a.nsim,
        "engine": to_value(sim.engine),
    });
    let mut out = Outcome::new(config, &hists, table);
    out.seed = Some((seed, generated));
    Ok(out)
}

fn fp_table(a: &FpTableArgs) -> Result<String> {
    let (alphas, ns, qs, nus) = FpTable::default_grid();
    let t0 = Instant::now();
    let table = FpTable::build(alphas, ns, qs, nus, |_| a.reps, a.seed, Exec::Parallel, |n, q| {
        log::info!("n={n} q={q} {:.1}s", t0.elapsed().as_secs_f64());
    })?;
    let text = table.to_text();
    match &a.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        None => Ok(text),
    }
}

fn graph_method(m: Method) -> GraphMethod {
    match m {
        Method::F1st => GraphMethod::F1st,
        Method::F2st => GraphMethod::F2st,
        Method::F3st => GraphMethod::F3st,
    }
}

fn graph(a: &GraphArgs, format: Format) -> Result<Outcome> {
    let table = Table::read(&a.file)?;
    let intercept = !a.no_intercept;
    let (x, dropped) = data::design_from_table(&table, intercept, a.strict)?;
    let n_eff = x.n() - usize::from(intercept);
    let cfg = GraphConfig {
        alpha: a.alpha,
        method: graph_method(a.method),
        bonferroni: !a.no_bonferroni,
        ..GraphConfig::default()
    };
    let g = build_graph(&x, n_eff, &cfg)?;
    let directed = !a.undirected;
    let edge_list = export_graph(&g, GraphFormat::EdgeList, directed);
    let config = json!({
        "file": a.file,
        "alpha": a.alpha,
        "method": format!("{:?}", a.method).to_lowercase(),
        "bonferroni": cfg.bonferroni,
        "intercept": intercept,
        "directed": directed,
    });
    let results = json!({
        "nodes": g.nodes,
        "directed_edges": g.directed_edges.iter().map(|e| json!({
            "source": e.source + 1, "target": e.target + 1, "pvalue": e.pvalue,
        })).collect::<Vec<_>>(),
        "undirected_edges": g.undirected_edges.iter().map(|&(s, t)| [s + 1, t + 1]).collect::<Vec<_>>(),
        "failed_nodes": one_based(&g.failed_nodes),
    });
    let summary = format!(
        "{} nodes, {} directed edges, {} undirected edges\n",
        g.nodes.len(),
        g.directed_edges.len(),
        g.undirected_edges.len()
    );
    let mut out = Outcome::new(config, results, summary + &edge_list);
    if dropped > 0 {
        out.warnings.push(format!("dropped {dropped} row(s) with missing values"));
    }
    out.warnings.extend(g.warnings.iter().cloned());
    out.graph_text = match format {
        Format::Dot => Some(export_graph(&g, GraphFormat::Dot, directed)),
        Format::EdgeList => Some(edge_list),
        _ => None,
    };
    Ok(out)
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let (seed, generated) = seed_or_fresh(a.seed);
    let default_kmn = if a.scenario == Scenario::Tutorial1 { 10 } else { 0 };
    let cfg = SelectionConfig {
        alpha: a.alpha,
        nu: a.nu,
        kmn: a.kmn.unwrap_or(default_kmn),
        ..SelectionConfig::default()
    };
    let mut config = json!({
        "scenario": format!("{:?}", a.scenario).to_lowercase(),
        "reps": a.reps,
        "selection": to_value(&cfg),
    });
    let (results, table) = match a.scenario {
        Scenario::Tutorial1 => {
            let (n, q) = (a.n.unwrap_or(1000), a.q.unwrap_or(1000));
            config["n"] = json!(n);
            config["q"] = json!(q);
            let s = sim::design_study(&SimDesign::tutorial(n, q, seed), &cfg, a.reps, seed)?;
            let rows: Vec<Vec<String>> = s
                .runs
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    vec![(i + 1).to_string(), r.selected.to_string(), r.fp.to_string(), r.fn_.to_string(), format!("{:.3}", r.seconds)]
                })
                .collect();
            let mut t = render(&["rep", "selected", "fp", "fn", "seconds"], &rows);
            let _ = writeln!(
                t,
                "mean fp {}  fn {}  selected {}  seconds {:.3}",
                sig6(s.mean_fp),
                sig6(s.mean_fn),
                sig6(s.mean_selected),
                s.mean_seconds
            );
            (to_value(&s), t)
        }
        Scenario::Null => {
            let (n, q) = (a.n.unwrap_or(500), a.q.unwrap_or(500));
            config["n"] = json!(n);
            config["q"] = json!(q);
            config["orthonormal"] = json!(a.orthonormal);
            let s = if a.orthonormal {
                sim::orthonormal_null_study(n, q, &cfg, a.reps, seed)?
            } else {
                sim::null_study(n, q, &cfg, a.reps, seed)?
            };
            let t = format!(
                "nonempty {} of {}  rate {}  bound {}  se {}\n",
                s.nonempty,
                s.reps,
                sig6(s.rate),
                sig6(s.bound),
                sig6(s.se_at_bound)
            );
            (to_value(&s), t)
        }
        Scenario::Consistency => {
            let (n, q) = (a.n.unwrap_or(2000), a.q.unwrap_or(200));
            config["n"] = json!(n);
            config["q"] = json!(q);
            config["kstar"] = json!(a.kstar);
            config["tau"] = json!(a.tau);
            // Always orthonormal; --orthonormal is accepted for symmetry.
            let s = sim::consistency_study(n, q, a.kstar, a.tau, &cfg, a.reps, seed)?;
            let t = format!(
                "beta {}  contains {}  exact {}  strict superset {}\n",
                sig6(s.beta),
                sig6(s.contains),
                sig6(s.exact),
                sig6(s.strict_superset)
            );
            (to_value(&s), t)
        }
        Scenario::Randomgraph => {
            let (n, q) = (a.n.unwrap_or(400), a.q.unwrap_or(100));
            config["n"] = json!(n);
            config["q"] = json!(q);
            config["edge_scale"] = json!(RandomGraphSpec::new(n, q, seed).scale);
            let gcfg = GraphConfig {
                alpha: a.alpha,
                selection: cfg.clone(),
                ..GraphConfig::default()
            };
            let s = sim::graph_study(n, q, &gcfg, a.reps, seed)?;
            let rows: Vec<Vec<String>> = s
                .runs
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    vec![
                        (i + 1).to_string(),
                        r.true_edges.to_string(),
                        r.found.to_string(),
                        r.fp.to_string(),
                        r.fn_.to_string(),
                        format!("{:.3}", r.seconds),
                    ]
                })
                .collect();
            let mut t = render(&["rep", "true", "found", "fp", "fn", "seconds"], &rows);
            let _ = writeln!(
                t,
                "mean true {}  found {}  fp {}  fn {}  recall {}",
                sig6(s.mean_true_edges),
                sig6(s.mean_found),
                sig6(s.mean_fp),
                sig6(s.mean_fn),
                sig6(s.recall)
            );
            (to_value(&s), t)
        }
    };
    let mut out = Outcome::new(config, results, table);
    out.seed = Some((seed, generated));
    Ok(out)
}
