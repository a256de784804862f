use std::path::Path;

use serde_json::{json, Map, Value};

use super::*;
use crate::autodiff::{self, forward_jvp, reverse_grad};
use crate::genmod::{self, Schedule};
use crate::nn::{mlp_init, Activation, MlpSpec, Wrapper};
use crate::objectives::{self, Dataset, GraphObjective, Objective};
use crate::odeflow::{self, GraphDrift, SolverConfig};
use crate::optim::{self, LineSearchConfig, NewtonCgConfig, Trace};
use crate::report::{self, num};
use crate::rl::{self, Mdp};
use crate::statutil::{self, Covariance, GaussianParams, UniformBox};
use crate::stochastic::{self, Hyper};

type Outcome = Result<String, CliError>;

pub(super) fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::AutodiffDemo(a) => autodiff_demo(cli, a),
        Command::Uat(a) => uat(cli, a),
        Command::Optimize(a) => optimize(cli, a),
        Command::SgdBench(a) => sgd_bench(cli, a),
        Command::Rl(a) => rl(cli, a),
        Command::Node(a) => node(cli, a),
        Command::Densctl(a) => densctl(cli, a),
        Command::Gen(a) => gen(cli, a),
        Command::Stat(a) => stat(cli, a),
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn write(cli: &Cli, name: &str, contents: &str) -> Result<(), CliError> {
    Ok(report::write(&cli.out, name, contents)?)
}

fn write_json(cli: &Cli, name: &str, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(crate::Error::from)?;
    text.push('\n');
    write(cli, name, &text)
}

fn write_points(cli: &Cli, name: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let d = rows.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write(cli, name, &report::csv(&header, rows.iter().cloned()))
}

/// Rows of a headed CSV in which every column is a coordinate.
fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| CliError::Usage(format!("{}: row {} is not numeric", path.display(), i + 2)))?;
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return usage(format!("{} has no data rows", path.display()));
    }
    Ok(rows)
}

fn means(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

fn last_loss(trace: &Trace) -> f64 {
    trace.rows.last().map_or(f64::NAN, |r| r.f)
}

fn hyper(args: &HyperArgs, method: &str, alpha: f64) -> Result<Hyper, CliError> {
    let mut obj = match &args.hyper {
        Some(text) => match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(m)) => m,
            _ => return usage("--hyper must be a JSON object"),
        },
        None => Map::new(),
    };
    if let Some(m) = &args.method {
        obj.insert("method".into(), json!(m));
    }
    obj.entry("method").or_insert_with(|| json!(method));
    if let Some(a) = args.alpha {
        obj.insert("alpha".into(), json!(a));
    }
    obj.entry("alpha").or_insert_with(|| json!(alpha));
    if let Some(k0) = args.k0 {
        obj.insert("k0".into(), json!(k0));
    }
    Hyper::from_json(&Value::Object(obj).to_string()).map_err(|e| CliError::Usage(e.to_string()))
}

fn autodiff_demo(cli: &Cli, a: &AutodiffArgs) -> Outcome {
    let g = autodiff::parse(&a.expr).map_err(|e| CliError::Usage(e.to_string()))?;
    let n = g.input_count();
    if a.at.len() != n || a.dir.len() != n {
        return usage(format!("--at and --dir need {n} components"));
    }
    let (f, grad) = reverse_grad(&g, &a.at)?;
    let (_, dv) = forward_jvp(&g, &a.at, &a.dir)?;
    write_json(cli, "autodiff.json", &json!({ "f": f, "grad": grad, "dir": a.dir, "directional": dv }))?;
    Ok(format!("f={} grad=({}) dvf={}", num(f), join(&grad), num(dv)))
}

fn uat(cli: &Cli, a: &UatArgs) -> Outcome {
    if a.grid == 0 {
        return usage("--grid must be positive");
    }
    let mut rows = Vec::with_capacity(a.grid + 1);
    let mut worst: f64 = 0.0;
    for i in 0..=a.grid {
        let x = i as f64 / a.grid as f64;
        let fm = crate::uat::square_approx(a.m, x)?;
        let err = (fm - x * x).abs();
        worst = worst.max(err);
        rows.push(vec![x, fm, x * x, err]);
    }
    write(cli, "uat.csv", &report::csv(&["x", "f_m", "x2", "error"], rows))?;
    Ok(format!("m={} max_error={} bound={}", a.m, num(worst), num(crate::uat::square_error_bound(a.m))))
}

fn optimize(cli: &Cli, a: &OptimizeArgs) -> Outcome {
    let dataset = || -> Result<Dataset, CliError> {
        match &a.data {
            Some(p) => Ok(Dataset::from_csv_path(p)?),
            None => usage("--data is required for this problem"),
        }
    };
    let obj: Box<dyn Objective> = match a.problem {
        Problem::Rosenbrock => Box::new(objectives::rosenbrock()),
        Problem::Expr => match &a.expr {
            Some(e) => Box::new(GraphObjective::parse(e).map_err(|e| CliError::Usage(e.to_string()))?),
            None => return usage("--problem expr needs --expr"),
        },
        Problem::LeastSquares => Box::new(objectives::least_squares(&dataset()?)?),
        Problem::Logistic => Box::new(objectives::logistic_nll(&dataset()?)?),
    };
    let n = obj.dim();
    let x0 = match &a.x0 {
        Some(x) if x.len() == n => x.clone(),
        Some(_) => return usage(format!("--x0 needs {n} components")),
        None if a.problem == Problem::Rosenbrock => vec![-1.2, 1.0],
        None => vec![0.0; n],
    };
    let search = LineSearchConfig {
        alpha_bar: a.alpha_bar,
        rho: a.rho,
        c: a.c,
        eps_tol: a.tol,
        max_iter: a.max_iter,
        ..LineSearchConfig::default()
    };
    search.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = match a.method {
        OptMethod::Gd => optim::gd_backtracking(obj.as_ref(), &x0, &search)?,
        OptMethod::Bfgs => optim::bfgs(obj.as_ref(), &x0, &search)?,
        OptMethod::NewtonCg => optim::newton_cg(obj.as_ref(), &x0, &NewtonCgConfig { search, ..NewtonCgConfig::default() })?,
    };
    write(cli, "trace.csv", &out.trace.to_csv(cli.timing))?;
    write_json(
        cli,
        "result.json",
        &json!({
            "x": out.x,
            "f": out.f,
            "grad_norm": out.grad_norm,
            "iterations": out.iterations,
            "converged": out.converged,
        }),
    )?;
    Ok(format!(
        "f={} grad_norm={} iterations={} converged={}",
        num(out.f),
        num(out.grad_norm),
        out.iterations,
        out.converged
    ))
}

fn sgd_bench(cli: &Cli, a: &SgdArgs) -> Outcome {
    let fam = objectives::sg_family(a.n).map_err(|e| CliError::Usage(e.to_string()))?;
    let h = hyper(&a.hyper, "sgd", 0.05)?;
    let path = stochastic::sg_trajectory(&fam, a.x0, &h, a.iters, cli.seed)?;
    let rows = path.iter().enumerate().map(|(k, &x)| vec![k as f64, x, x * x + fam.offset()]);
    write(cli, "sgd.csv", &report::csv(&["iter", "x", "f"], rows))?;
    let tail = &path[path.len().saturating_sub(1000)..];
    let mut mags: Vec<f64> = tail.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let band = mags[((0.9 * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1];
    Ok(format!("final_x={} band90={}", num(path[path.len() - 1]), num(band)))
}

fn rl(cli: &Cli, a: &RlArgs) -> Outcome {
    let mdp = match &a.mdp {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Mdp::from_json(&text)?
        }
        None => Mdp::gridworld(a.grid, a.gamma)?,
    };
    let (name, actions, v, iterations, q) = match a.solver {
        Solver::Vi => {
            let out = rl::value_iteration(&mdp, &vec![0.0; mdp.n_states], a.tol, a.max_iter)?;
            ("vi", out.policy.actions(), out.v, out.iterations, None)
        }
        Solver::Pi => {
            let out = rl::policy_iteration(&mdp)?;
            ("pi", out.policy.actions(), out.v, out.iterations, None)
        }
        Solver::Q | Solver::Sarsa => {
            let cfg = rl::LearnConfig {
                epsilon: a.epsilon,
                steps: a.steps,
                horizon: a.horizon,
                seed: cli.seed,
                ..rl::LearnConfig::default()
            };
            let (name, out) = if a.solver == Solver::Q {
                ("q", rl::q_learning(&mdp, &cfg, None)?)
            } else {
                ("sarsa", rl::sarsa(&mdp, &cfg, None)?)
            };
            let v: Vec<f64> = out.q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            (name, out.greedy_actions(), v, out.episodes, Some(out.q))
        }
    };
    let mut doc = json!({ "solver": name, "policy": actions, "v": v, "iterations": iterations });
    if let Some(q) = q {
        doc["q"] = json!(q);
    }
    write_json(cli, "policy.json", &doc)?;
    let policy: Vec<String> = actions.iter().map(usize::to_string).collect();
    Ok(format!("solver={name} iterations={iterations} v0={} policy={}", num(v[0]), policy.join("")))
}

fn ode_method(m: OdeMethod) -> odeflow::Method {
    match m {
        OdeMethod::Euler => odeflow::Method::Euler,
        OdeMethod::Midpoint => odeflow::Method::Midpoint,
        OdeMethod::Rk4 => odeflow::Method::Rk4,
    }
}

fn node(cli: &Cli, a: &NodeArgs) -> Outcome {
    let cfg = SolverConfig::new(ode_method(a.solver), a.h, a.horizon);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (drift, theta, x0, reward) = match a.demo {
        NodeDemo::ConstantDrift => (
            GraphDrift::parse(&["(add (scale 0 x1) x2)"], 1, false)?,
            vec![0.7],
            vec![1.0],
            GraphObjective::parse("(scale 1 x1)")?,
        ),
        NodeDemo::Mlp => {
            let spec = MlpSpec::new(vec![1, a.hidden, 1], Activation::Tanh, Wrapper::None)?;
            (GraphDrift::mlp(&spec, false)?, mlp_init(&spec, cli.seed).0, vec![0.5], GraphObjective::parse("(pow 2 x1)")?)
        }
    };
    let out = odeflow::node_grad(&drift, &theta, &x0, &reward, &cfg)?;
    let traj = odeflow::ode_solve(&drift, &theta, &x0, &cfg)?;
    let rows = traj.times.iter().zip(&traj.states).map(|(t, x)| {
        let mut r = vec![*t];
        r.extend(x);
        r
    });
    write(cli, "trajectory.csv", &report::csv(&["t", "x1"], rows))?;
    let mut doc = json!({ "value": out.value, "grad": out.grad, "p_x": out.p_x, "p_tau": out.p_tau, "terminal": out.terminal });
    let mut summary = format!("J={} grad=({})", num(out.value), join(&out.grad));
    if a.demo == NodeDemo::Mlp {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            let at = |s: f64| -> crate::Result<f64> {
                let mut t = theta.clone();
                t[i] += s;
                reward.value(odeflow::ode_solve(&drift, &t, &x0, &cfg)?.last())
            };
            let fd = (at(h)? - at(-h)?) / (2.0 * h);
            worst = worst.max((out.grad[i] - fd).abs() / fd.abs().max(1e-8));
        }
        doc["fd_max_rel_err"] = json!(worst);
        summary = format!("J={} fd_max_rel_err={}", num(out.value), num(worst));
    }
    write_json(cli, "grad.json", &doc)?;
    Ok(summary)
}

fn densctl(cli: &Cli, a: &DensctlArgs) -> Outcome {
    let samples = read_points(&a.data)?;
    let d = samples[0].len();
    if samples.iter().any(|r| r.len() != d) {
        return usage("ragged data rows");
    }
    let cfg = SolverConfig::new(odeflow::Method::Rk4, a.h, a.horizon);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = MlpSpec::new(vec![d + 1, a.hidden, d], Activation::Tanh, Wrapper::None)?;
    let drift = GraphDrift::mlp(&spec, true)?;
    let h = hyper(&a.hyper, "adam", 1e-3)?;
    let out = odeflow::train_density_control(&drift, &mlp_init(&spec, cli.seed).0, &samples, &cfg, &h, a.steps)?;
    write(cli, "trace.csv", &out.trace.to_csv(cli.timing))?;
    write_points(cli, "terminal.csv", &out.terminal)?;
    Ok(format!("loss={} terminal_mean=({})", num(last_loss(&out.trace)), join(&means(&out.terminal))))
}

fn gen(cli: &Cli, a: &GenArgs) -> Outcome {
    let data = read_points(&a.data)?;
    let d = data[0].len();
    if data.iter().any(|r| r.len() != d) {
        return usage("ragged data rows");
    }
    if a.batch == 0 {
        return usage("--batch must be positive");
    }
    let h = hyper(&a.hyper, "adam", 1e-3)?;
    let seed = cli.seed;
    let (name, trace, samples) = match a.model {
        GenModel::Diffusion => {
            let sched = match a.schedule {
                NoiseSchedule::Ou => Schedule::ou(1.0, a.t_end),
                NoiseSchedule::Vp => Schedule::vp(0.1, 20.0, a.t_end),
            }
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let spec = MlpSpec::new(vec![d + 1, a.hidden, a.hidden, d], Activation::Tanh, Wrapper::None)?;
            let fit = genmod::train_denoiser(&spec, &mlp_init(&spec, seed).0, &data, &sched, &h, a.steps, a.batch, seed)?;
            let mode = match a.sampler {
                Sampler::Em => genmod::SampleMode::Em,
                Sampler::PfOde => genmod::SampleMode::PfOde,
            };
            let score = genmod::eps_net_score(&spec, &fit.theta, &sched);
            let s = genmod::diffusion_sample(score, &sched, mode, d, a.samples, a.sample_steps, seed)?;
            ("diffusion", fit.trace, s)
        }
        GenModel::Fm => {
            let spec = MlpSpec::new(vec![d + 1, a.hidden, a.hidden, d], Activation::Tanh, Wrapper::None)?;
            let fit = genmod::train_fm(&spec, &mlp_init(&spec, seed).0, &data, &h, a.steps, a.batch, seed)?;
            let s = genmod::fm_sample(&spec, &fit.theta, a.samples, a.sample_steps, seed)?;
            ("fm", fit.trace, s)
        }
        GenModel::Vae => {
            let m = a.latent;
            let enc = MlpSpec::new(vec![d, a.hidden, m + 1], Activation::Tanh, Wrapper::None)?;
            let dec = MlpSpec::new(vec![m, a.hidden, d + 1], Activation::Tanh, Wrapper::None)?;
            let nets = genmod::VaeNets::new(enc.clone(), dec.clone())?;
            let (eta0, theta0) = (mlp_init(&enc, seed).0, mlp_init(&dec, seed.wrapping_add(1)).0);
            let (_, theta, fit) = genmod::train_vae(&nets, &eta0, &theta0, &data, &h, a.steps, a.batch, seed)?;
            let s = genmod::vae_sample(&nets, &theta, a.samples, seed)?;
            ("vae", fit.trace, s)
        }
    };
    write(cli, "trace.csv", &trace.to_csv(cli.timing))?;
    write_points(cli, "samples.csv", &samples)?;
    Ok(format!("model={name} loss={} sample_mean=({})", num(last_loss(&trace)), join(&means(&samples))))
}

fn stat(cli: &Cli, a: &StatArgs) -> Outcome {
    match a.demo {
        StatDemo::Ito => {
            if !(a.h > 0.0) || a.paths == 0 {
                return usage("--h and --paths must be positive");
            }
            let mut rows = Vec::new();
            for k in 0..=a.halvings {
                let h = a.h / f64::from(1u32 << k.min(30));
                rows.push(vec![h, statutil::ito_deviation(a.horizon, h, a.paths, cli.seed)?]);
            }
            let decreasing = rows.windows(2).all(|w| w[1][1] < w[0][1]);
            let (first, last) = (rows[0][1], rows[rows.len() - 1][1]);
            write(cli, "ito.csv", &report::csv(&["h", "mean_abs_dev"], rows))?;
            Ok(format!("ito mean_abs_dev {} -> {} decreasing={decreasing}", num(first), num(last)))
        }
        StatDemo::Importance => {
            let u = UniformBox { lo: vec![0.0], hi: vec![1.0] };
            let ind = |x: &[f64]| if x[0] <= 0.5 { 1.0 } else { 0.0 };
            let mut rows = Vec::new();
            for n in [100, 1_000, 10_000, 100_000] {
                let (est, se) = statutil::importance_estimate(ind, &u, n, cli.seed)?;
                rows.push(vec![n as f64, est, se]);
            }
            let (est, se) = (rows[3][1], rows[3][2]);
            write(cli, "importance.csv", &report::csv(&["n", "estimate", "se"], rows))?;
            Ok(format!("estimate={} se={} within_3se={}", num(est), num(se), (est - 0.5).abs() < 3.0 * se))
        }
        StatDemo::Divergence => {
            let g = |m: f64| GaussianParams::new(vec![m], Covariance::Scalar(1.0));
            let (n0, n1, n3) = (g(0.0)?, g(1.0)?, g(3.0)?);
            let doc = json!({
                "kl_n01_n11": statutil::kl_gauss(&n0, &n1)?,
                "entropy_n01": statutil::entropy_gauss(&n0)?,
                "kl_poisson_2_3": statutil::kl_poisson(2.0, 3.0)?,
                "js_disjoint": statutil::js_discrete(&[1.0, 0.0], &[0.0, 1.0])?,
                "w2_n01_n31": statutil::w2_gauss(&n0, &n3)?,
            });
            write_json(cli, "divergence.json", &doc)?;
            Ok(format!(
                "kl={} js={} w2={}",
                num(doc["kl_n01_n11"].as_f64().unwrap_or(f64::NAN)),
                num(doc["js_disjoint"].as_f64().unwrap_or(f64::NAN)),
                num(doc["w2_n01_n31"].as_f64().unwrap_or(f64::NAN))
            ))
        }
    }
}
