use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use riemheat::admissible::{
    check_lipschitz, check_slow_variation, radius_field, uniform_lower_bound, GridSpec, RadiusField,
};
use riemheat::covering::{build_admissible_covering, certify_dilated_overlap};
use riemheat::exponents::{bootstrap_table, to_f64, weight_spec};
use riemheat::heatflow::{
    check_threshold_contraction, global_estimate_experiment, local_estimate_experiment, solve_parabolic, ProblemSpec,
};
use riemheat::linalg::point;
use riemheat::suites::{run_suite_with, suite_criteria, SCHEMA_VERSION};
use riemheat::{Error, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// All files go under one directory.
struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&self, name: &str, v: &Value) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, v)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }
}

fn grid_json(g: &GridSpec<f64>) -> Value {
    json!({ "lo": &g.lo[..g.n], "hi": &g.hi[..g.n], "counts": &g.counts[..g.n] })
}

fn build_field(cfg: &RunConfig) -> Result<(Value, RadiusField<f64>)> {
    let spec = cfg.model_spec()?;
    let grid = cfg.grid_spec(&spec)?;
    let gj = grid_json(&grid);
    let field = radius_field(spec.build()?, grid, cfg.params()?)?;
    Ok((json!({ "model": spec, "grid": gj, "params": field.params }), field))
}

pub fn radius(cfg: &RunConfig) -> Result<bool> {
    let (head, field) = build_field(cfg)?;
    let out = Out::new(cfg)?;
    let mut csv = out.create("radius_field.csv")?;
    field.write_csv(&mut csv)?;
    csv.flush()?;
    let lip = check_lipschitz(&field);
    let slow = check_slow_variation(&field);
    let r: Vec<f64> = field.samples.iter().map(|s| s.r_eps).collect();
    let lower = uniform_lower_bound(&field);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "radius",
        "setup": head,
        "samples": field.samples.len(),
        "truncated": field.samples.iter().filter(|s| s.truncated).count(),
        "degenerate": field.samples.iter().filter(|s| s.degenerate).count(),
        "min_r_eps": r.iter().cloned().fold(f64::INFINITY, f64::min),
        "max_r_eps": r.iter().cloned().fold(0.0, f64::max),
        "uniform_lower_bound": lower,
        "lipschitz": lip,
        "slow_variation": slow,
    });
    out.json("radius_summary.json", &summary)?;
    let passed = lip.passed() && slow.passed();
    println!(
        "{} samples, R_eps in [{}, {}], uniform lower bound {}",
        field.samples.len(),
        summary["min_r_eps"],
        summary["max_r_eps"],
        lower.map_or("none".into(), |v| v.to_string())
    );
    println!(
        "lipschitz: {} violations / {} pairs; slow variation: {} / {}",
        lip.violations.len(),
        lip.pairs_checked,
        slow.violations.len(),
        slow.pairs_checked
    );
    println!("wrote {} and {}", out.path("radius_field.csv"), out.path("radius_summary.json"));
    Ok(passed)
}

pub fn cover(cfg: &RunConfig) -> Result<bool> {
    let (head, field) = build_field(cfg)?;
    let k = cfg.k.unwrap_or(0);
    let cov = build_admissible_covering(&field, k)?;
    let dil = certify_dilated_overlap(&cov, &field)?;
    let passed = cov.passed() && dil.passed();
    let out = Out::new(cfg)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "cover",
        "setup": head,
        "covering": cov.to_json(),
        "certificate": {
            "disjoint": cov.disjoint,
            "probes": cov.probes.len(),
            "overlap": cov.overlap,
            "mean_overlap": cov.mean_overlap,
            "T_bound": cov.t_bound,
            "passed": cov.passed(),
        },
        "dilated": dil,
        "passed": passed,
    });
    out.json("covering.json", &doc)?;
    println!(
        "k = {k}: {} balls, overlap {} <= T = {} ({}), dilated overlap {} <= {} ({})",
        cov.len(),
        cov.overlap,
        cov.t_bound,
        verdict(cov.passed()),
        dil.overlap,
        dil.bound,
        verdict(dil.passed())
    );
    println!("wrote {}", out.path("covering.json"));
    Ok(passed)
}

pub fn exponents(cfg: &RunConfig) -> Result<bool> {
    let (m, n, r, variant) = cfg.exponent_inputs()?;
    let table = bootstrap_table(m, n, r, variant)?;
    let weights = weight_spec(&table, r);
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "exponents",
        "table": table,
        "weights": weights,
    });
    print!("{}", table.to_text());
    println!("w1 = R^{}, w2 = R^{}, w3 = R^{}", weights.w1_exp, weights.w2_exp, weights.w3_exp);
    println!("{}", serde_json::to_string_pretty(&doc)?);
    if cfg.out.is_some() {
        Out::new(cfg)?.json("exponents.json", &doc)?;
    }
    Ok(true)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn plot(out: &Out, name: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut w = out.create(name)?;
    for (x, y) in xs.iter().zip(ys) {
        writeln!(w, "{x} {y}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> Result<bool> {
    let spec: ProblemSpec = cfg.problem_spec()?;
    let problem = spec.build::<f64>()?;
    let sol = solve_parabolic(&problem)?;
    let rep = check_threshold_contraction(&sol);
    let out = Out::new(cfg)?;

    let mut lines: Vec<Value> = vec![json!({
        "schema_version": SCHEMA_VERSION,
        "record": "problem",
        "problem": spec,
        "nodes": problem.geometry.len(),
        "dofs": sol.laplacian.dofs(),
    })];
    for j in 0..rep.times.len() {
        lines.push(json!({
            "record": "step",
            "t": rep.times[j],
            "norm_u": rep.u_norms[j],
            "norm_omega": sol.forcing_norms[j],
            "int_norm_omega": rep.bound[j],
            "cg_iterations": j.checked_sub(1).and_then(|i| sol.steps.get(i)).map_or(0, |s| s.iterations),
        }));
    }
    lines.push(json!({
        "record": "contraction",
        "holds": rep.holds,
        "holds_trapezoid": rep.holds_trapezoid,
        "worst_ratio": rep.worst_ratio,
    }));
    if cfg.estimates == Some(true) {
        lines.extend(estimates(cfg, &spec, &sol, &problem)?);
    }
    let mut w = out.create("solve.jsonl")?;
    for l in &lines {
        serde_json::to_writer(&mut w, l)?;
        writeln!(w)?;
    }
    w.flush()?;
    let mut csv = out.create("contraction.csv")?;
    rep.write_csv(&mut csv)?;
    csv.flush()?;
    plot(&out, "norm_u.dat", &rep.times, &rep.u_norms)?;
    plot(&out, "int_norm_omega.dat", &rep.times, &rep.bound)?;

    let last = rep.times.len() - 1;
    println!(
        "{} steps to t = {}: |u| = {}, int |omega| = {}, contraction {} (worst ratio {})",
        sol.steps.len(),
        rep.times[last],
        rep.u_norms[last],
        rep.bound[last],
        verdict(rep.holds),
        rep.worst_ratio
    );
    println!("wrote {}", out.dir.display());
    Ok(rep.holds)
}

fn estimates(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    sol: &riemheat::heatflow::ParabolicSolution<f64>,
    problem: &riemheat::heatflow::ParabolicProblem<f64>,
) -> Result<Vec<Value>> {
    let (mut lo, mut hi) = spec.model.resolved_box()?;
    if let (Some(a), Some(b)) = (&spec.lo, &spec.hi) {
        (lo, hi) = (a.clone(), b.clone());
    } else if spec.lo.is_some() || spec.hi.is_some() {
        return Err(Error::Config("estimates need both `solve_lo` and `solve_hi`".into()));
    } else if !spec.model.periodic && spec.model.model != "flat-torus" {
        return Err(Error::Config(
            "estimates need R at every solver node: set `solve_lo`/`solve_hi` strictly inside the working box".into(),
        ));
    }
    let n = lo.len();
    let center = cfg.center.clone().unwrap_or_else(|| lo.iter().zip(&hi).map(|(a, b)| (a + b) / 2.0).collect());
    if center.len() != n {
        return Err(Error::Config(format!("center needs {n} coordinates")));
    }
    // the global weights need R at every solver node, so the field spans the box
    let counts = match &cfg.grid {
        Some(g) => crate::config::parse_counts(g, n)?,
        None => vec![5; n],
    };
    let grid = GridSpec::new(cfg.grid_lo.as_deref().unwrap_or(&lo), cfg.grid_hi.as_deref().unwrap_or(&hi), &counts);
    let field = radius_field(spec.model.build()?, grid, cfg.params()?)?;
    let radius = match cfg.radius {
        Some(r) => r,
        None => field
            .interpolate(&point(&center))
            .ok_or_else(|| Error::Domain("estimate center lies outside the radius field".into()))?,
    };
    let (m, _, r, variant) = cfg.exponent_inputs()?;
    let table = bootstrap_table(m, n as u32, r, variant)?;
    let rf = to_f64(&r);
    let local = local_estimate_experiment(sol, problem, &point(&center), radius, m as usize, rf, cfg.s.unwrap_or(rf))?;
    let global = global_estimate_experiment(sol, problem, &field, &table)?;
    Ok(vec![
        json!({ "record": "local", "center": center, "m": m, "r": rf, "report": local }),
        json!({ "record": "global", "weights": weight_spec(&table, r), "report": global }),
    ])
}

pub fn verify(cfg: &RunConfig) -> Result<bool> {
    let suite = cfg.suite.as_deref().unwrap_or("all");
    suite_criteria(suite)?;
    println!("{:>4}  {:<6}  criterion", "id", "result");
    let report = run_suite_with(suite, |o| println!("{:>4}  {:<6}  {}", o.id, verdict(o.passed), o.name))?;
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    if cfg.out.is_some() {
        let out = Out::new(cfg)?;
        let name = format!("verify_{suite}.json");
        out.json(&name, &serde_json::to_value(&report)?)?;
        println!("wrote {}", out.path(&name));
    }
    Ok(report.passed)
}
