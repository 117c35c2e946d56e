//! Subcommand implementations. Each validates the whole configuration first,
//! computes, and returns the files to publish.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use isoblock::block::{
    build_block, classify_boundary_point, verify_block, BlockParams, BlockResult, VerificationReport, VerifyOptions,
};
use isoblock::inclusion::{integrate, step_residual, strategy_menu, SelectionStrategy, StrategyKind};
use isoblock::rd::{
    check_comparison, check_energy_ordering, default_alphas, lyapunov_e, nondegeneracy_of_equilibrium, random_profile,
    shoot_equilibrium, HeavisideRd, RdConfig,
};
use isoblock::semiflow::{check_axioms, Generator};
use isoblock::suite::{
    comparison_suite, filippov_suite, k5_suite, lyapunov_suite, BlockSetup, RdBlockSetup, SaddleSetup,
};
use isoblock::trajectory::fmt_f64;
use isoblock::zoo::{PlanarLipschitzInclusion, SaddleFlow, SqrtOde};
use isoblock::{Error as CoreError, Exec, StateVec, Trajectory};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_list, parse_strategy, ConfigError, RawConfig};
use crate::output::Outputs;

/// Failure classes, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Block(String),
    Suite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Block(_) => 4,
            CliError::Suite(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Block(m) | CliError::Suite(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

/// Library errors raised after validation.
fn numeric(e: CoreError) -> CliError {
    match e {
        CoreError::Config(m) | CoreError::InvalidInput(m) => CliError::Config(m),
        other => CliError::Numeric(other.to_string()),
    }
}

fn block_err(e: CoreError) -> CliError {
    match e {
        CoreError::NeighborhoodTooTight(_) | CoreError::EpsilonTooLarge(_) | CoreError::Precondition(_) => {
            CliError::Block(e.to_string())
        }
        other => numeric(other),
    }
}

fn suite_err(e: CoreError) -> CliError {
    match e {
        CoreError::Precondition(_) | CoreError::DegenerateProfile(_) => CliError::Suite(e.to_string()),
        other => numeric(other),
    }
}

pub struct Outcome {
    pub outputs: Outputs,
    pub pass: bool,
    pub summary: String,
}

pub struct Context {
    pub raw: RawConfig,
    pub seed: u64,
    pub deterministic: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    model: &'a str,
    seed: u64,
    config: BTreeMap<&'a str, &'a str>,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<u64>,
    result: T,
}

impl Context {
    fn envelope<'a, T: Serialize>(&'a self, command: &'a str, model: &'a Model, pass: bool, result: T) -> Envelope<'a, T> {
        let config = self.raw.entries().iter().filter(|(k, _)| k.as_str() != "out").map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let generated_at = (!self.deterministic).then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
        });
        Envelope { command, model: model.id(), seed: self.seed, config, pass, generated_at, result }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Saddle { a: f64, b: f64 },
    Sqrt,
    Planar { c: f64 },
    Rd(RdConfig),
}

impl Model {
    pub fn id(&self) -> &'static str {
        match self {
            Model::Saddle { .. } => "saddle",
            Model::Sqrt => "sqrt-ode",
            Model::Planar { .. } => "planar",
            Model::Rd(_) => "rd",
        }
    }

    fn dim(&self) -> usize {
        match self {
            Model::Sqrt => 1,
            Model::Rd(cfg) => cfg.n,
            _ => 2,
        }
    }
}

fn positive(raw: &RawConfig, key: &str, default: f64) -> Result<f64, CliError> {
    let v = raw.f64_or(key, default)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{key}` must be positive, got {v}")))
    }
}

/// Model plus `(dt, t_end)`; `block_defaults` selects the coarser RD setup.
pub fn parse_model(raw: &RawConfig, block_defaults: bool) -> Result<(Model, f64, f64), CliError> {
    let Some(id) = raw.str("model") else {
        return Err(CliError::Config("missing `model` (saddle | sqrt-ode | planar | rd)".into()));
    };
    let (model, dt0, t0) = match id {
        "saddle" => (Model::Saddle { a: positive(raw, "a", 1.0)?, b: positive(raw, "b", 1.0)? }, 0.01, 10.0),
        "sqrt-ode" => (Model::Sqrt, 1e-3, 2.0),
        "planar" => (Model::Planar { c: positive(raw, "c", 0.5)? }, 1e-3, 2.0),
        "rd" => {
            let n = raw.usize_or("n", if block_defaults { 31 } else { 63 })?;
            let mut cfg = RdConfig::new(n, raw.f64_or("omega", 0.0)?);
            cfg.epsilon_reg = raw.f64_or("epsilon_reg", 0.0)?;
            (Model::Rd(cfg), if block_defaults { 0.01 } else { 1e-3 }, 5.0)
        }
        other => return Err(CliError::Config(format!("unknown model `{other}`"))),
    };
    let dt = positive(raw, "dt", dt0)?;
    let t_end = raw.f64_or("t_end", t0)?;
    if !(t_end >= 0.0) || t_end / dt > 1e8 {
        return Err(CliError::Config(format!("t_end = {t_end} with dt = {dt} is out of range")));
    }
    let model = match model {
        Model::Rd(mut cfg) => {
            cfg.dt = dt;
            cfg.t_end = t_end;
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            HeavisideRd::new(cfg).map_err(|e| CliError::Config(e.to_string()))?;
            Model::Rd(cfg)
        }
        m => m,
    };
    Ok((model, dt, t_end))
}

fn rd_state(cfg: &RdConfig, raw: &RawConfig, key: &str, default: &str, seed: u64) -> Result<StateVec, CliError> {
    let spec = raw.str(key).unwrap_or(default);
    let k = raw.usize_or("k", 1)?;
    let sign = raw.sign_or("sign", 1)?;
    match spec {
        "zero" => Ok(cfg.state(vec![0.0; cfg.n]).map_err(numeric)?),
        "random" => Ok(random_profile(cfg, 6, 0.3, seed)),
        "equilibrium" | "equilibrium-bump" => {
            if k == 0 || k > cfg.k_max() {
                return Err(CliError::Config(format!("k = {k} must lie in 1..={}", cfg.k_max())));
            }
            let v = shoot_equilibrium(k, sign, cfg).map_err(numeric)?.profile;
            if spec == "equilibrium" {
                return Ok(v);
            }
            let bump = cfg.from_fn(|x| (std::f64::consts::PI * x).sin());
            Ok(v.with_coords(v.coords().iter().zip(bump.coords()).map(|(a, b)| a - 0.01 * b).collect()))
        }
        list => {
            let c = parse_list(key, list)?;
            if c.len() != cfg.n {
                return Err(CliError::Config(format!("`{key}` needs {} values, got {}", cfg.n, c.len())));
            }
            cfg.state(c).map_err(numeric)
        }
    }
}

fn point(raw: &RawConfig, key: &str, dim: usize, default: &[f64]) -> Result<StateVec, CliError> {
    let c = raw.vec_opt(key)?.unwrap_or_else(|| default.to_vec());
    if c.len() != dim {
        return Err(CliError::Config(format!("`{key}` needs {dim} values, got {}", c.len())));
    }
    Ok(StateVec::euclidean(c))
}

fn strategy(raw: &RawConfig) -> Result<StrategyKind, CliError> {
    let s = parse_strategy(raw.str("strategy").unwrap_or("maximal"))?;
    SelectionStrategy::new(s, 0).validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(s)
}

fn trajectory_csv(traj: &Trajectory, energy: Option<&[f64]>) -> Vec<u8> {
    let mut s = String::from("t");
    for i in 1..=traj.dim() {
        let _ = write!(s, ",x_{i}");
    }
    if energy.is_some() {
        s.push_str(",E");
    }
    s.push('\n');
    for (j, x) in traj.states().iter().enumerate() {
        s.push_str(&fmt_f64(traj.time(j)));
        for v in x.coords() {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        if let Some(e) = energy {
            s.push(',');
            s.push_str(&fmt_f64(e[j]));
        }
        s.push('\n');
    }
    s.into_bytes()
}

pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let raw = &ctx.raw;
    let (model, dt, t_end) = parse_model(raw, false)?;
    let kind = strategy(raw)?;
    let strat = SelectionStrategy::new(kind, ctx.seed);
    let (traj, residual, tol, energy) = match &model {
        Model::Saddle { a, b } => {
            let x0 = point(raw, "x0", 2, &[0.5, 0.5])?;
            let gen = SaddleFlow::new(*a, *b, dt).map_err(numeric)?;
            let t = gen.bundle(&x0, t_end, ctx.seed).map_err(numeric)?.members.swap_remove(0);
            let r = gen.residual(&t);
            (t, r, gen.residual_tol(), None)
        }
        Model::Sqrt => {
            let x0 = point(raw, "x0", 1, &[1.0])?;
            let gen = SqrtOde::new(dt);
            let t = gen.integrate(x0.coords()[0], kind, ctx.seed, t_end).map_err(numeric)?;
            let r = gen.residual(&t);
            (t, r, gen.residual_tol(), None)
        }
        Model::Planar { c } => {
            let x0 = point(raw, "x0", 2, &[0.3, -0.2])?;
            let m = PlanarLipschitzInclusion::new(*c).map_err(numeric)?;
            let t = integrate(&m, &x0, strat, t_end, dt).map_err(numeric)?;
            let r = step_residual(&m, &t);
            (t, r, 1e-7, None)
        }
        Model::Rd(cfg) => {
            let x0 = rd_state(cfg, raw, "x0", "equilibrium", ctx.seed)?;
            let m = HeavisideRd::new(*cfg).map_err(numeric)?;
            let t = integrate(&m, &x0, strat, t_end, dt).map_err(numeric)?;
            let r = step_residual(&m, &t);
            let e: Vec<f64> = t.states().iter().map(|s| lyapunov_e(s, cfg)).collect();
            (t, r, 1e-7, Some(e))
        }
    };
    if !traj.last().is_finite() {
        return Err(CliError::Numeric("trajectory produced non-finite values".into()));
    }
    let pass = residual <= tol;
    let energy_json = energy.as_ref().map(|e| {
        let stride = (e.len() / 1000).max(1);
        let trace: Vec<(f64, f64)> = (0..e.len()).step_by(stride).map(|j| (traj.time(j), e[j])).collect();
        json!({
            "first": e[0],
            "last": e[e.len() - 1],
            "max_uphill": e.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max),
            "trace": trace,
        })
    });
    let result = json!({
        "strategy": kind,
        "dt": dt,
        "t_end": t_end,
        "steps": traj.steps(),
        "x0": traj.first().coords(),
        "endpoint": traj.last().coords(),
        "residual_max": residual,
        "residual_tol": tol,
        "energy": energy_json,
    });
    let mut out = Outputs::default();
    out.add("trajectory.csv", trajectory_csv(&traj, energy.as_deref()));
    out.add_json("simulate.json", &ctx.envelope("simulate", &model, pass, result)).map_err(|e| CliError::Numeric(e.to_string()))?;
    let end = traj.last().coords();
    let summary = if end.len() <= 4 {
        format!("endpoint {:?}, residual {residual:.3e}", end)
    } else {
        format!("endpoint ‖x‖ = {:.6e}, residual {residual:.3e}", traj.last().norm())
    };
    Ok(Outcome { outputs: out, pass, summary })
}

pub fn equilibria(ctx: &Context) -> Result<Outcome, CliError> {
    let raw = &ctx.raw;
    let (model, _, _) = parse_model(raw, false)?;
    let mut out = Outputs::default();
    let (result, pass, summary) = match &model {
        Model::Rd(cfg) => {
            let k_max = raw.usize_or("k_max", 3.min(cfg.k_max()))?;
            if k_max == 0 || k_max > cfg.k_max() {
                return Err(CliError::Config(format!("k_max must lie in 1..={}", cfg.k_max())));
            }
            let mut list = Vec::new();
            let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
            let mut ok = true;
            for k in 1..=k_max {
                for s in [1i8, -1] {
                    let e = shoot_equilibrium(k, s, cfg).map_err(numeric)?;
                    let nd = nondegeneracy_of_equilibrium(&e, cfg, &default_alphas(1e-2)).map_err(numeric)?;
                    ok &= e.residual <= 1e-8 && e.zeros.len() == k - 1;
                    let name = format!("v{k}{}", if s > 0 { '+' } else { '-' });
                    columns.push((name.clone(), e.profile.coords().to_vec()));
                    list.push(json!({
                        "name": name,
                        "k": k,
                        "sign": s,
                        "energy": e.energy,
                        "residual": e.residual,
                        "zeros": e.zeros,
                        "gamma0": e.gamma0,
                        "nondegeneracy_c": nd.c,
                        "nondegeneracy_pass": nd.pass,
                        "profile": e.profile.coords(),
                    }));
                }
            }
            let ordering = check_energy_ordering(cfg, k_max).map_err(numeric)?;
            ok &= ordering.pass;
            let mut csv = String::from("x");
            for (n, _) in &columns {
                let _ = write!(csv, ",{n}");
            }
            csv.push('\n');
            for (i, x) in cfg.nodes().iter().enumerate() {
                csv.push_str(&fmt_f64(*x));
                for (_, c) in &columns {
                    csv.push(',');
                    csv.push_str(&fmt_f64(c[i]));
                }
                csv.push('\n');
            }
            out.add("equilibria.csv", csv.into_bytes());
            let summary = format!("{} equilibria, ordering {}", list.len(), if ordering.pass { "ok" } else { "violated" });
            (json!({"zero": {"energy": 0.0}, "equilibria": list, "ordering": ordering}), ok, summary)
        }
        Model::Saddle { .. } => (json!({"equilibria": [[0.0, 0.0]]}), true, "1 equilibrium".into()),
        Model::Sqrt => (json!({"equilibria": [[0.0]]}), true, "1 equilibrium".into()),
        Model::Planar { .. } => (json!({"equilibria": []}), true, "no catalogued equilibria".into()),
    };
    out.add_json("equilibria.json", &ctx.envelope("equilibria", &model, pass, result)).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(Outcome { outputs: out, pass, summary })
}

fn block_setup(ctx: &Context, model: &Model, dt: f64, t_end: f64) -> Result<BlockSetup, CliError> {
    let raw = &ctx.raw;
    let mut params = BlockParams { seed: ctx.seed, exec: Exec::Parallel, ..BlockParams::default() };
    params.eps0 = positive(raw, "eps0", params.eps0)?;
    params.eps_steps = raw.usize_or("eps_steps", params.eps_steps)?;
    params.delta = raw.f64_opt("delta")?;
    params.band = raw.f64_opt("band")?;
    if let Some(d) = params.delta {
        if !(d > 0.0) {
            return Err(CliError::Config("`delta` must be positive".into()));
        }
    }
    if let Some(b) = params.band {
        if !(b > 0.0) {
            return Err(CliError::Config("`band` must be positive".into()));
        }
    }
    params.probe_horizon = positive(raw, "probe_horizon", params.probe_horizon)?;
    match model {
        Model::Saddle { a, b } => {
            params.horizon = positive(raw, "horizon", t_end)?;
            let s = SaddleSetup {
                a: *a,
                b: *b,
                dt,
                grid_n: raw.usize_or("grid_n", 101)?,
                n_radius: positive(raw, "region_radius", 1.0)?,
                o_radius: positive(raw, "o_radius", 1.5)?,
            };
            if s.grid_n < 5 || s.grid_n > 1001 {
                return Err(CliError::Config("`grid_n` must lie in 5..=1001".into()));
            }
            if s.o_radius < s.n_radius {
                return Err(CliError::Config("`o_radius` must be at least `region_radius`".into()));
            }
            s.build(params).map_err(block_err)
        }
        Model::Rd(cfg) => {
            params.horizon = positive(raw, "horizon", t_end)?;
            let k = raw.usize_or("k", 1)?;
            if k == 0 || k > cfg.k_max() {
                return Err(CliError::Config(format!("k = {k} must lie in 1..={}", cfg.k_max())));
            }
            let bundle = raw.usize_or("bundle", 8)?;
            if bundle == 0 {
                return Err(CliError::Config("`bundle` must be positive".into()));
            }
            let s = RdBlockSetup {
                cfg: *cfg,
                k,
                sign: raw.sign_or("sign", 1)?,
                radius: positive(raw, "region_radius", 0.05)?,
                rays: raw.usize_or("rays", 100)?,
                levels: raw.usize_or("levels", 20)?,
                strategies: strategy_menu(bundle),
            };
            if s.levels < 2 {
                return Err(CliError::Config("`levels` must be at least 2".into()));
            }
            s.build(params).map_err(block_err)
        }
        _ => Err(CliError::Config(format!("block construction supports saddle and rd, not {}", model.id()))),
    }
}

fn build(ctx: &Context) -> Result<(Model, BlockSetup, BlockResult, VerificationReport), CliError> {
    let (model, dt, t_end) = parse_model(&ctx.raw, true)?;
    let setup = block_setup(ctx, &model, dt, t_end)?;
    let block = build_block(setup.generator.as_ref(), &setup.functionals, setup.grid.clone(), &setup.params).map_err(block_err)?;
    let opts = VerifyOptions { seed: ctx.seed ^ 0x5EED, ..VerifyOptions::default() };
    let report = verify_block(&block, setup.generator.as_ref(), &opts).map_err(numeric)?;
    Ok((model, setup, block, report))
}

pub fn block(ctx: &Context) -> Result<Outcome, CliError> {
    let (model, _setup, block, report) = build(ctx)?;
    let mut csv = Vec::new();
    block.write_csv(&mut csv).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut out = Outputs::default();
    out.add("block.csv", csv);
    let summary = format!(
        "ε = {}, δ = {}, {} interior, egress {}, ingress {}, bounce-off {}, verification {}",
        block.epsilon,
        block.delta,
        block.interior_samples.len(),
        report.egress,
        report.ingress,
        report.bounce_off,
        if report.pass { "passed" } else { "FAILED" }
    );
    let pass = report.pass;
    out.add_json("block.json", &ctx.envelope("block", &model, pass, json!({"block": block, "verification": report})))
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(Outcome { outputs: out, pass, summary })
}

pub fn classify(ctx: &Context) -> Result<Outcome, CliError> {
    let Some(spec) = ctx.raw.str("points") else {
        return Err(CliError::Config("classify needs `points = x1,x2; y1,y2; ...`".into()));
    };
    let (model, _, _) = parse_model(&ctx.raw, true)?;
    let pts = spec
        .split(';')
        .map(|p| {
            let c = parse_list("points", p)?;
            if c.len() != model.dim() {
                return Err(ConfigError(format!("each point needs {} coordinates", model.dim())));
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let (model, setup, block, _) = build(ctx)?;
    let w = setup.generator.weights();
    let mut results = Vec::new();
    let mut ok = 0usize;
    for (i, c) in pts.into_iter().enumerate() {
        let x = StateVec::new(c.clone(), w.clone()).map_err(numeric)?;
        match classify_boundary_point(&x, setup.generator.as_ref(), &block, block.probe_horizon, ctx.seed ^ i as u64) {
            Ok(p) => {
                ok += usize::from(!p.flagged);
                results.push(json!({"x": c, "label": p.label, "g_plus": p.g_plus, "g_minus": p.g_minus, "flagged": p.flagged, "probe": p.probe}));
            }
            Err(e) => results.push(json!({"x": c, "error": e.to_string()})),
        }
    }
    let pass = ok == results.len();
    let summary = format!("{ok}/{} points labeled without flags", results.len());
    let mut out = Outputs::default();
    let result = json!({"epsilon": block.epsilon, "delta": block.delta, "band": block.band, "points": results});
    out.add_json("classify.json", &ctx.envelope("classify", &model, pass, result)).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(Outcome { outputs: out, pass, summary })
}

const SUITES: &[&str] = &["axioms", "k5", "lyapunov", "comparison", "ordering", "nondegeneracy", "filippov"];

fn axiom_samples(model: &Model, count: usize, seed: u64) -> Vec<StateVec> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| match model {
            Model::Rd(cfg) => random_profile(cfg, 6, 0.3, seed.wrapping_add(i as u64)),
            Model::Sqrt => StateVec::euclidean(vec![if i == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }]),
            _ => StateVec::euclidean(vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]),
        })
        .collect()
}

fn suite_value(ctx: &Context, model: &Model, suite: &str, dt: f64, t_end: f64) -> Result<(Value, bool), CliError> {
    let raw = &ctx.raw;
    let seed = ctx.seed;
    let exec = Exec::Parallel;
    let mismatch = || CliError::Suite(format!("suite `{suite}` does not apply to model `{}`", model.id()));
    match (suite, model) {
        ("axioms", _) => {
            let samples = axiom_samples(model, raw.usize_or("samples", 8)?.max(1), seed);
            let horizon = t_end.max(dt);
            let r = match model {
                Model::Saddle { a, b } => check_axioms(&SaddleFlow::new(*a, *b, dt).map_err(numeric)?, &samples, horizon, seed, exec),
                Model::Sqrt => check_axioms(&SqrtOde::new(dt), &samples, horizon, seed, exec),
                Model::Planar { c } => {
                    let m = PlanarLipschitzInclusion::new(*c).map_err(numeric)?;
                    let g = isoblock::inclusion::InclusionGenerator::new(m, isoblock::inclusion::default_strategies(), dt);
                    check_axioms(&g, &samples, horizon, seed, exec)
                }
                Model::Rd(cfg) => {
                    let g = HeavisideRd::new(*cfg).map_err(numeric)?.generator(isoblock::inclusion::default_strategies());
                    check_axioms(&g, &samples, horizon, seed, exec)
                }
            }
            .map_err(suite_err)?;
            let pass = r.all_pass();
            Ok((val(&r), pass))
        }
        ("k5", Model::Sqrt) => {
            let r = k5_suite(dt, t_end, raw.usize_or("approach", 50)?.max(1), seed, exec).map_err(suite_err)?;
            Ok((val(&r), r.pass))
        }
        ("lyapunov", Model::Rd(cfg)) => {
            let r = lyapunov_suite(cfg, raw.usize_or("samples", 20)?.max(1), 1e-2, seed, exec).map_err(suite_err)?;
            Ok((val(&r), r.pass))
        }
        ("comparison", Model::Rd(cfg)) => {
            if raw.str("u0").is_some() || raw.str("v0").is_some() {
                let u0 = rd_state(cfg, raw, "u0", "equilibrium-bump", seed)?;
                let v0 = rd_state(cfg, raw, "v0", "equilibrium", seed)?;
                let r = check_comparison(&u0, &v0, cfg, &isoblock::inclusion::default_strategies(), seed, exec).map_err(suite_err)?;
                Ok((val(&r), r.pass))
            } else {
                let r = comparison_suite(cfg, raw.usize_or("pairs", 10)?.max(1), seed, exec).map_err(suite_err)?;
                Ok((val(&r), r.pass))
            }
        }
        ("ordering", Model::Rd(cfg)) => {
            let k_max = raw.usize_or("k_max", 3)?;
            if k_max == 0 || k_max > cfg.k_max() {
                return Err(CliError::Config(format!("k_max must lie in 1..={}", cfg.k_max())));
            }
            let r = check_energy_ordering(cfg, k_max).map_err(suite_err)?;
            Ok((val(&r), r.pass))
        }
        ("nondegeneracy", Model::Rd(cfg)) => {
            let k = raw.usize_or("k", 1)?;
            if k == 0 || k > cfg.k_max() {
                return Err(CliError::Config(format!("k = {k} must lie in 1..={}", cfg.k_max())));
            }
            let e = shoot_equilibrium(k, raw.sign_or("sign", 1)?, cfg).map_err(suite_err)?;
            let r = nondegeneracy_of_equilibrium(&e, cfg, &default_alphas(1e-2)).map_err(suite_err)?;
            Ok((val(&r), r.pass))
        }
        ("filippov", Model::Planar { c }) => {
            let r = filippov_suite(*c, raw.usize_or("pairs", 100)?.max(1), t_end, dt, seed, exec).map_err(suite_err)?;
            Ok((val(&r), r.pass))
        }
        _ => Err(mismatch()),
    }
}

fn val<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn verify(ctx: &Context, suite_flag: Option<&str>) -> Result<Outcome, CliError> {
    let raw = &ctx.raw;
    let Some(suite) = suite_flag.or(raw.str("suite")) else {
        return Err(CliError::Config(format!("missing suite (one of {})", SUITES.join(", "))));
    };
    if !SUITES.contains(&suite) {
        return Err(CliError::Config(format!("unknown suite `{suite}` (one of {})", SUITES.join(", "))));
    }
    let expect_fail = raw.bool_or("expect_fail", false)?;
    let (model, dt, t_end) = parse_model(raw, false)?;
    let (result, check_pass, error) = match suite_value(ctx, &model, suite, dt, t_end) {
        Ok((v, p)) => (v, p, None),
        Err(CliError::Suite(m)) if expect_fail && !m.contains("does not apply") => (Value::Null, false, Some(m)),
        Err(e) => return Err(e),
    };
    let pass = if expect_fail { !check_pass } else { check_pass };
    let body = json!({
        "suite": suite,
        "check_passed": check_pass,
        "expect_fail": expect_fail,
        "expected_failure": expect_fail && !check_pass,
        "error": error,
        "report": result,
    });
    let mut out = Outputs::default();
    out.add_json(&format!("verify-{suite}.json"), &ctx.envelope("verify", &model, pass, body)).map_err(|e| CliError::Numeric(e.to_string()))?;
    let summary = match (expect_fail, check_pass) {
        (false, true) => format!("{suite}: PASS"),
        (false, false) => format!("{suite}: FAIL"),
        (true, false) => format!("{suite}: FAIL (expected)"),
        (true, true) => format!("{suite}: PASS although a failure was expected"),
    };
    Ok(Outcome { outputs: out, pass, summary })
}
