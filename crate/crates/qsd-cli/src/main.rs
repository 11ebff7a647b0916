//! Command-line frontend. Exit codes: 0 success, 1 usage error, 2
//! verification failure (a checked claim does not hold).

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qsd_lab::birth_death::{
    adaptive_truncation, bd_condition_bb2, bd_condition_bb2_truncated, bd_condition_bb3,
    bd_condition_bb3_truncated, cavender_family, gamma, qsd_recursion_solve, BdConditionReport,
    BirthDeathSpec,
};
use qsd_lab::dist::Distribution;
use qsd_lab::gibbs::{gibbs_coupled_run, GibbsOptions};
use qsd_lab::holley::{check_condition_a, check_condition_b, check_condition_c, Counterexample};
use qsd_lab::io::{ChainSpecJson, DistributionJson};
use qsd_lab::kernel::{AbsorbedKernel, TruncationMode};
use qsd_lab::order::{DominanceWitness, PosetView};
use qsd_lab::periodic::{assemble_nu_star, cyclic_classes, periodic_yaglom, pq_walk_kernel};
use qsd_lab::semigroup::{yaglom_iterate, YaglomOptions};
use qsd_lab::trajectory::{KernelFamily, TrajectoryMeasure, EXACT_TABLE_CAP};
use qsd_lab::QsdError;

#[derive(Parser)]
#[command(name = "qsd", version, about = "Conditioned evolutions of absorbed Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural invariants of a chain spec
    Validate(ValidateArgs),
    /// Iterate the conditioned semigroup toward its limit
    Yaglom(YaglomArgs),
    /// Emit a member of the constant-rate quasi-stationary family
    Qsd(QsdArgs),
    /// Check the pairwise conditional domination conditions
    HolleyCheck(HolleyArgs),
    /// Run the coupled single-site trajectory sampler
    Couple(CoupleArgs),
    /// Check the reduced per-site birth-death inequalities
    BdCheck(BdCheckArgs),
    /// Per-residue limits and their reassembly for the periodic walk
    Periodic(PeriodicArgs),
    /// Distance of delayed discrete walks to the continuous-time law
    CtLimit(CtLimitArgs),
    /// Report-only exploration of the open pq > r^2 regime
    ExplorePqGtR2(ExploreArgs),
}

/// One chain source: a spec file, inline JSON, or a named preset.
#[derive(Args)]
struct ChainArgs {
    /// Chain-spec JSON file
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Chain-spec JSON inline
    #[arg(long)]
    chain_json: Option<String>,
    /// Named preset: delayed-walk | pq-walk
    #[arg(long)]
    preset: Option<String>,
    /// Up-step probability (presets)
    #[arg(long)]
    p: Option<f64>,
    /// Hold probability (delayed-walk preset)
    #[arg(long)]
    r: Option<f64>,
    /// Down-step probability (presets)
    #[arg(long)]
    q: Option<f64>,
    /// Truncation size (presets)
    #[arg(long = "N", default_value_t = 400)]
    n: usize,
    /// Overflow handling at the truncation boundary: absorb | hold
    #[arg(long, default_value = "absorb")]
    truncation: String,
}

impl ChainArgs {
    fn mode(&self) -> Result<TruncationMode> {
        match self.truncation.as_str() {
            "absorb" => Ok(TruncationMode::OverflowToAbsorption),
            "hold" => Ok(TruncationMode::OverflowToHold),
            other => bail!("unknown truncation {other:?}, expected absorb or hold"),
        }
    }

    /// Builds the kernel and the resolved-source description for provenance.
    fn build(&self) -> Result<(AbsorbedKernel, Value)> {
        let mode = self.mode()?;
        let sources =
            self.chain.is_some() as u8 + self.chain_json.is_some() as u8 + self.preset.is_some() as u8;
        if sources != 1 {
            bail!("exactly one of --chain, --chain-json, --preset is required");
        }
        if let Some(path) = &self.chain {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let spec = ChainSpecJson::from_json(&text)?;
            let k = spec.to_kernel(mode)?;
            return Ok((
                k,
                json!({"chain": path.display().to_string(), "truncation": self.truncation}),
            ));
        }
        if let Some(text) = &self.chain_json {
            let spec = ChainSpecJson::from_json(text)?;
            let k = spec.to_kernel(mode)?;
            return Ok((k, json!({"chain_json": text, "truncation": self.truncation})));
        }
        let preset = self.preset.as_deref().unwrap();
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| anyhow!("preset {preset} requires --{name}"))
        };
        match preset {
            "delayed-walk" => {
                let (p, r, q) = (need(self.p, "p")?, need(self.r, "r")?, need(self.q, "q")?);
                let k = BirthDeathSpec::constant(p, r, q, self.n)?.build_kernel(mode);
                Ok((
                    k,
                    json!({"preset": preset, "p": p, "r": r, "q": q, "N": self.n,
                           "truncation": self.truncation}),
                ))
            }
            "pq-walk" => {
                let (p, q) = (need(self.p, "p")?, need(self.q, "q")?);
                let k = pq_walk_kernel(p, q, self.n, mode)?;
                Ok((
                    k,
                    json!({"preset": preset, "p": p, "q": q, "N": self.n,
                           "truncation": self.truncation}),
                ))
            }
            other => bail!("unknown preset {other:?}, expected delayed-walk or pq-walk"),
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

impl OutputArgs {
    fn write(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("writing {}", path.display())),
            None => {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                // a downstream pager closing the pipe is not an error
                match writeln!(out, "{text}") {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                    other => other.context("writing stdout"),
                }
            }
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("QSD_LAB_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn dist_value(d: &Distribution) -> Value {
    json!(DistributionJson::from_distribution(d).weights)
}

fn witness_value(w: &DominanceWitness) -> Value {
    match w {
        DominanceWitness::Threshold(x) => json!({"threshold": x}),
        DominanceWitness::UpperSet(s) => json!({"upper_set": s}),
    }
}

fn counterexample_value(c: &Counterexample) -> Value {
    match c {
        Counterexample::ConditionA { z, z_prime, witness } => {
            json!({"condition": "a", "z": z, "z_prime": z_prime,
                   "witness": witness_value(witness), "display": c.to_string()})
        }
        Counterexample::ConditionB { x, x_prime, z, z_prime, witness } => {
            json!({"condition": "b", "x": x, "x_prime": x_prime, "z": z, "z_prime": z_prime,
                   "witness": witness_value(witness), "display": c.to_string()})
        }
        Counterexample::ConditionC { x, x_prime, witness } => {
            json!({"condition": "c", "x": x, "x_prime": x_prime,
                   "witness": witness_value(witness), "display": c.to_string()})
        }
        Counterexample::PerStep { k, inner } => {
            json!({"condition": "b-per-step", "step": k,
                   "inner": counterexample_value(inner), "display": c.to_string()})
        }
    }
}

fn bd_report_value(rep: &BdConditionReport) -> Value {
    json!({"holds": rep.holds, "first_failing_y": rep.first_failing_y})
}

// validate

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_validate(a: &ValidateArgs) -> Result<i32> {
    let (k, source) = a.chain.build()?;
    let violations: Vec<String> = k.validate().iter().map(|v| v.to_string()).collect();
    let valid = violations.is_empty();
    let doc = json!({
        "schema": "qsd-lab/validate/v1",
        "config": source,
        "valid": valid,
        "violations": violations,
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(if valid { 0 } else { 2 })
}

// yaglom

#[derive(Args)]
struct YaglomArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Initial state (point mass)
    #[arg(long, default_value_t = 1)]
    start: usize,
    /// Consecutive-iterate TV stopping tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_n: usize,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_yaglom(a: &YaglomArgs) -> Result<i32> {
    let (k, source) = a.chain.build()?;
    let config = json!({"source": source, "start": a.start, "tol": a.tol, "max_n": a.max_n});
    let rep = match yaglom_iterate(
        &Distribution::delta(a.start),
        &k,
        &YaglomOptions {
            max_n: a.max_n,
            tol: a.tol,
            record_history: false,
        },
    ) {
        Ok(rep) => rep,
        Err(e @ QsdError::SurvivalUnderflow { .. }) => {
            eprintln!("verification failure: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "schema": "qsd-lab/yaglom/v1",
        "config": config,
        "converged": rep.converged,
        "steps": rep.steps,
        "last_step_tv": rep.last_step_tv,
        "residual": rep.residual,
        "oscillation_detected": rep.oscillation_detected,
        "limit": dist_value(&rep.limit),
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(0)
}

// qsd

#[derive(Args)]
struct QsdArgs {
    /// Drift ratio p/q of the constant-rate walk
    #[arg(long)]
    lambda: f64,
    /// First weight of the family member, in (0, gamma]
    #[arg(long)]
    nu1: f64,
    /// Truncation; defaults to the adaptive choice for tail mass 1e-12
    #[arg(long = "N")]
    n: Option<usize>,
    /// Evaluate the closed form (default)
    #[arg(long, conflicts_with = "recursion")]
    closed_form: bool,
    /// Evaluate the three-term recursion instead
    #[arg(long)]
    recursion: bool,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_qsd(a: &QsdArgs) -> Result<i32> {
    if !(a.lambda > 0.0 && a.lambda < 1.0) {
        bail!("--lambda must lie in (0, 1), got {}", a.lambda);
    }
    let n = a.n.unwrap_or_else(|| adaptive_truncation(a.lambda, a.nu1, 1e-12));
    let method = if a.recursion { "recursion" } else { "closed-form" };
    let config = json!({"lambda": a.lambda, "nu1": a.nu1, "N": n, "method": method});
    let built = if a.recursion {
        qsd_recursion_solve(a.lambda, a.nu1, n).and_then(|raw| {
            let w = raw.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
            Ok((Distribution::normalized(w)?, f64::NAN))
        })
    } else {
        cavender_family(a.lambda, a.nu1, n).map(|m| (m.weights, m.c))
    };
    let (weights, c) = match built {
        Ok(v) => v,
        Err(e @ (QsdError::OutOfFamily { .. } | QsdError::NegativeWeight(_))) => {
            eprintln!("verification failure: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "schema": "qsd-lab/qsd/v1",
        "config": config,
        "gamma": gamma(a.lambda),
        "c": if c.is_nan() { Value::Null } else { json!(c) },
        "weights": dist_value(&weights),
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(0)
}

// holley-check

#[derive(Args)]
struct HolleyArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Distribution JSON file for the first-site condition (optional)
    #[arg(long)]
    nu: Option<PathBuf>,
    /// Distribution JSON file for the primed side of the first-site condition
    #[arg(long, requires = "nu")]
    nu_prime: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

fn read_distribution(path: &PathBuf) -> Result<Distribution> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(DistributionJson::from_json(&text)?.to_distribution()?)
}

fn cmd_holley(a: &HolleyArgs) -> Result<i32> {
    let (k, source) = a.chain.build()?;
    let view = PosetView::new(k.space().clone());
    let irreducible = cyclic_classes(&k).is_ok();
    let mut counterexamples = Vec::new();
    let cond_a = match (&a.nu, &a.nu_prime) {
        (Some(nu), Some(nup)) => {
            let (nu, nup) = (read_distribution(nu)?, read_distribution(nup)?);
            let check = check_condition_a(&nu, &nup, &k, &k, &view)?;
            if let Some(c) = &check.counterexample {
                counterexamples.push(counterexample_value(c));
            }
            json!(check.holds)
        }
        _ => Value::Null,
    };
    let b = check_condition_b(&k, &k, &view, None)?;
    if let Some(c) = &b.counterexample {
        counterexamples.push(counterexample_value(c));
    }
    let c = check_condition_c(&k, &k, &view, None)?;
    if let Some(cx) = &c.counterexample {
        counterexamples.push(counterexample_value(cx));
    }
    let pass = cond_a != json!(false) && b.holds && c.holds;
    let doc = json!({
        "schema": "qsd-lab/holley-check/v1",
        "config": source,
        "condition_a": cond_a,
        "condition_b": b.holds,
        "condition_c": c.holds,
        "irreducible": irreducible,
        "counterexamples": counterexamples,
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(if pass { 0 } else { 2 })
}

// couple

#[derive(Args)]
struct CoupleArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Window length in transitions
    #[arg(long, default_value_t = 4)]
    steps: usize,
    /// Initial state of the dominated trajectory
    #[arg(long, default_value_t = 1)]
    start: usize,
    /// Initial state of the dominating trajectory
    #[arg(long, default_value_t = 3)]
    start_prime: usize,
    #[arg(long, default_value_t = 100_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 1_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1_000)]
    record_every: usize,
    /// Falls back to QSD_LAB_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_couple(a: &CoupleArgs) -> Result<i32> {
    let (k, source) = a.chain.build()?;
    let seed = resolve_seed(a.seed);
    let config = json!({
        "source": source, "steps": a.steps, "start": a.start, "start_prime": a.start_prime,
        "sweeps": a.sweeps, "burn_in": a.burn_in, "record_every": a.record_every, "seed": seed,
    });
    let measure = |s: usize| {
        TrajectoryMeasure::new(
            Distribution::delta(s),
            KernelFamily::Homogeneous(k.clone()),
            a.steps,
        )
        .with_exact_table(EXACT_TABLE_CAP)
    };
    let (tm, tm_p) = (measure(a.start)?, measure(a.start_prime)?);
    let rep = match gibbs_coupled_run(
        &tm,
        &tm_p,
        &GibbsOptions {
            sweeps: a.sweeps,
            burn_in: a.burn_in,
            seed,
            record_every: a.record_every,
        },
    ) {
        Ok(rep) => rep,
        Err(e @ (QsdError::OrderViolation { .. } | QsdError::NotDominated(_))) => {
            eprintln!("verification failure: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    };
    let mut csv = String::new();
    csv.push_str(&format!("# config: {}\n", serde_json::to_string(&config)?));
    csv.push_str("sweep,tv_to_exact,violations\n");
    for &(sweep, tv) in &rep.tv_trace {
        csv.push_str(&format!("{sweep},{tv},0\n"));
    }
    if rep.tv_trace.last().map(|&(s, _)| s) != Some(rep.sweeps) {
        if let Some(tv) = rep.tv_trajectory {
            csv.push_str(&format!("{},{tv},0\n", rep.sweeps));
        }
    }
    a.out.write(csv.trim_end())?;
    Ok(0)
}

// bd-check

#[derive(Args)]
struct BdCheckArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    q: f64,
    /// Evaluate on the effective rates of this truncation instead of the
    /// infinite chain
    #[arg(long = "N")]
    n: Option<usize>,
    /// absorb | hold (with --N)
    #[arg(long, default_value = "hold")]
    truncation: String,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_bd_check(a: &BdCheckArgs) -> Result<i32> {
    let spec = BirthDeathSpec::constant(a.p, a.r, a.q, a.n.unwrap_or(10))?;
    let (bb2, bb3) = match a.n {
        None => (bd_condition_bb2(&spec), bd_condition_bb3(&spec)),
        Some(_) => {
            let mode = match a.truncation.as_str() {
                "absorb" => TruncationMode::OverflowToAbsorption,
                "hold" => TruncationMode::OverflowToHold,
                other => bail!("unknown truncation {other:?}"),
            };
            (
                bd_condition_bb2_truncated(&spec, mode),
                bd_condition_bb3_truncated(&spec, mode),
            )
        }
    };
    let pass = bb2.holds && bb3.holds;
    let doc = json!({
        "schema": "qsd-lab/bd-check/v1",
        "config": {"p": a.p, "r": a.r, "q": a.q, "N": a.n, "truncation": a.truncation},
        "interior": bd_report_value(&bb2),
        "last_site": bd_report_value(&bb3),
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(if pass { 0 } else { 2 })
}

// periodic

#[derive(Args)]
struct PeriodicArgs {
    /// Drift ratio p/q; the walk uses p = lambda/(1+lambda), q = 1/(1+lambda)
    #[arg(long)]
    lambda: f64,
    #[arg(long = "N", default_value_t = 401)]
    n: usize,
    /// Per-residue iteration cap
    #[arg(long, default_value_t = 100_000)]
    max_k: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_periodic(a: &PeriodicArgs) -> Result<i32> {
    if !(a.lambda > 0.0 && a.lambda < 1.0) {
        bail!("--lambda must lie in (0, 1), got {}", a.lambda);
    }
    let p = a.lambda / (1.0 + a.lambda);
    let q = 1.0 / (1.0 + a.lambda);
    let config = json!({"lambda": a.lambda, "p": p, "q": q, "N": a.n,
                        "max_k": a.max_k, "tol": a.tol});
    let run = || -> qsd_lab::Result<Value> {
        let k = pq_walk_kernel(p, q, a.n, TruncationMode::OverflowToAbsorption)?;
        let dec = cyclic_classes(&k)?;
        let limits = periodic_yaglom(&k, &dec, a.max_k, a.tol)?;
        let asm = assemble_nu_star(&limits, &k, 1e-6)?;
        Ok(json!({
            "d": dec.d,
            "classes": dec.classes,
            "per_class_limits": limits.iter().map(dist_value).collect::<Vec<_>>(),
            "m": asm.m,
            "alpha": asm.alpha,
            "nu_star": dist_value(&asm.nu_star),
            "residual": asm.residual,
        }))
    };
    let payload = match run() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("verification failure: {e}");
            return Ok(2);
        }
    };
    let doc = json!({
        "schema": "qsd-lab/periodic/v1",
        "config": config,
        "result": payload,
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(0)
}

// ct-limit

#[derive(Args)]
struct CtLimitArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    /// Continuous time horizon
    #[arg(long)]
    t: f64,
    /// Comma-separated delays in [0, 1)
    #[arg(long)]
    r_list: String,
    #[arg(long = "N", default_value_t = 200)]
    n: usize,
    /// Worker threads across delay values
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_ct_limit(a: &CtLimitArgs) -> Result<i32> {
    let rs: Vec<f64> = a
        .r_list
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow!("bad delay {s:?} in --r-list")))
        .collect::<Result<_>>()?;
    if rs.iter().any(|&r| !(0.0..1.0).contains(&r)) {
        bail!("delays must lie in [0, 1)");
    }
    let config = json!({"p": a.p, "q": a.q, "t": a.t, "r_list": rs, "N": a.n, "jobs": a.jobs});
    let nu = Distribution::delta(1);
    let jobs = a.jobs.max(1);
    let chunk_len = rs.len().div_ceil(jobs);
    // fan delay values across workers; results land at their index, so the
    // merge order never depends on scheduling
    let mut rows: Vec<Option<(f64, usize, f64)>> = vec![None; rs.len()];
    std::thread::scope(|scope| -> qsd_lab::Result<()> {
        let mut handles = Vec::new();
        for (chunk_idx, chunk) in rs.chunks(chunk_len).enumerate() {
            let nu = &nu;
            let (p, q, t, n) = (a.p, a.q, a.t, a.n);
            handles.push((
                chunk_idx * chunk_len,
                scope.spawn(move || -> qsd_lab::Result<Vec<(f64, usize, f64)>> {
                    chunk
                        .iter()
                        .map(|&r| {
                            let rep = qsd_lab::ctrw::discrete_to_continuous_limit_check(
                                nu, p, q, t, &[r], n,
                            )?;
                            let row = &rep.rows[0];
                            Ok((row.r, row.steps, row.tv_to_ct))
                        })
                        .collect()
                }),
            ));
        }
        for (offset, h) in handles {
            for (i, row) in h.join().expect("worker panicked")?.into_iter().enumerate() {
                rows[offset + i] = Some(row);
            }
        }
        Ok(())
    })?;
    let mut csv = String::new();
    csv.push_str(&format!("# config: {}\n", serde_json::to_string(&config)?));
    csv.push_str("r,steps,tv_to_ct\n");
    for row in rows {
        let (r, steps, tv) = row.expect("all delays computed");
        csv.push_str(&format!("{r},{steps},{tv}\n"));
    }
    a.out.write(csv.trim_end())?;
    Ok(0)
}

// explore-pq-gt-r2

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    q: f64,
    #[arg(long = "N", default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    max_n: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_explore(a: &ExploreArgs) -> Result<i32> {
    let spec = BirthDeathSpec::constant(a.p, a.r, a.q, a.n)?;
    let bb2 = bd_condition_bb2(&spec);
    let k = spec.build_kernel(TruncationMode::OverflowToHold);
    let rep = yaglom_iterate(
        &Distribution::delta(1),
        &k,
        &YaglomOptions {
            max_n: a.max_n,
            tol: a.tol,
            record_history: false,
        },
    )?;
    let doc = json!({
        "schema": "qsd-lab/explore-pq-gt-r2/v1",
        "config": {"p": a.p, "r": a.r, "q": a.q, "N": a.n, "max_n": a.max_n, "tol": a.tol},
        "interior_condition": bd_report_value(&bb2),
        "iteration": {
            "converged": rep.converged,
            "steps": rep.steps,
            "last_step_tv": rep.last_step_tv,
            "residual": rep.residual,
            "oscillation_detected": rep.oscillation_detected,
            "limit": dist_value(&rep.limit),
        },
        "note": "report only: convergence in this regime is an open question, \
                 so nothing here is asserted",
    });
    a.out.write(&serde_json::to_string_pretty(&doc)?)?;
    Ok(0)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Yaglom(a) => cmd_yaglom(a),
        Command::Qsd(a) => cmd_qsd(a),
        Command::HolleyCheck(a) => cmd_holley(a),
        Command::Couple(a) => cmd_couple(a),
        Command::BdCheck(a) => cmd_bd_check(a),
        Command::Periodic(a) => cmd_periodic(a),
        Command::CtLimit(a) => cmd_ct_limit(a),
        Command::ExplorePqGtR2(a) => cmd_explore(a),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
