use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};
use twosat_core::acceptance::Scale;
use twosat_core::analysis::{
    atom_lower_bounds, compare_distributions, detect_atoms, histogram_csv, mixture_decomposition,
    ExactAtoms, MixtureOptions,
};
use twosat_core::densityev::{fixpoint, fixpoint_de, FixpointResult};
use twosat_core::distance::wasserstein2;
use twosat_core::formula::{
    count_solutions, exact_marginals, CountLimits, Formula, Marginals, DEFAULT_ENUMERATION_CAP,
    DEFAULT_WIDTH_CAP,
};
use twosat_core::gwsim::{
    extinct_odds, extinction_probability, survival_thetas, truncated_thetas, GwSampler,
    HybridOptions, DEFAULT_EXTINCTION_TOL, DEFAULT_NODE_BUDGET,
};
use twosat_core::population::Population;
use twosat_core::rng::{domain, par_map_streams};
use twosat_core::transform::{psi_open, psi_rounds_to_boundary};
use twosat_core::treebp::{construct_rational_tree, TreeFormula};
use twosat_core::{Error, Result};

use crate::Status;

#[derive(Subcommand, Debug)]
pub(crate) enum Command {
    /// Draw a random 2-SAT formula.
    Gen(GenArgs),
    /// Count satisfying assignments by enumeration.
    Count(CountArgs),
    /// Exact per-variable marginals.
    Marginals(MarginalsArgs),
    /// Root marginal of a tree formula by belief propagation.
    TreeBp(TreeBpArgs),
    /// Build a tree formula whose root marginal is a given fraction.
    ConstructTree(ConstructArgs),
    /// Sample root marginals of the Galton-Watson tree.
    GwSample(GwArgs),
    /// Iterate population dynamics to a fixed point.
    DensityEvolution(DensityArgs),
    /// Atom masses of the finite-tree part against constructed-tree bounds.
    Atoms(AtomsArgs),
    /// Split the limiting law into its finite-tree and infinite-tree parts.
    Mixture(MixtureArgs),
    /// Distances between two population files.
    Compare(CompareArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Fills in an absent seed from the system's random hasher state.
fn resolve_seed(seed: &mut Option<u64>) -> u64 {
    use std::hash::{BuildHasher, Hasher};
    *seed.get_or_insert_with(|| {
        std::collections::hash_map::RandomState::new()
            .build_hasher()
            .finish()
    })
}

fn config<T: Serialize>(subcommand: &str, args: &T) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    v["subcommand"] = json!(subcommand);
    v
}

fn config_line(cfg: &Value) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

fn emit_json(out: &mut Vec<u8>, mut v: Value, cfg: Value) -> Result<()> {
    v["config"] = cfg;
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&v).expect("report serializes")
    )?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn read_formula(path: &Path) -> Result<Formula> {
    Formula::from_reader(BufReader::new(File::open(path)?))
}

fn read_population(path: &Path) -> Result<Population> {
    Population::from_reader(BufReader::new(File::open(path)?))
}

fn check_density(d: f64) -> Result<()> {
    if d > 0.0 && d < 2.0 {
        Ok(())
    } else {
        Err(usage(format!("d must lie in (0, 2), got {d}")))
    }
}

pub(crate) fn execute(cmd: Command, out: &mut Vec<u8>) -> Result<Status> {
    let done = match cmd {
        Command::Gen(a) => gen(a, out),
        Command::Count(a) => count(a, out),
        Command::Marginals(a) => marginals(a, out),
        Command::TreeBp(a) => tree_bp(a, out),
        Command::ConstructTree(a) => construct(a, out),
        Command::GwSample(a) => gw_sample(a, out),
        Command::DensityEvolution(a) => density(a, out),
        Command::Atoms(a) => atoms(a, out),
        Command::Mixture(a) => mixture(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Verify(a) => return verify(a, out),
    };
    done.map(|()| Status::Ok)
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct GenArgs {
    #[arg(long)]
    n: usize,
    /// Mean number of clauses per variable times two (clauses ~ Po(d n / 2)).
    #[arg(long)]
    d: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; the formula goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn gen(mut a: GenArgs, out: &mut Vec<u8>) -> Result<()> {
    let seed = resolve_seed(&mut a.seed);
    let f = Formula::generate(a.n, a.d, seed)?;
    let cfg = config("gen", &a);
    let text = format!("{}c config {}\n", f.to_text(), config_line(&cfg));
    match &a.out {
        Some(p) => {
            write_file(p, &text)?;
            emit_json(out, json!({"n": f.n(), "m": f.num_clauses()}), cfg)
        }
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct CountArgs {
    /// Formula file.
    #[arg(long)]
    input: PathBuf,
    /// Largest number of variables to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
}

fn count(a: CountArgs, out: &mut Vec<u8>) -> Result<()> {
    let f = read_formula(&a.input)?;
    let s = count_solutions(&f, a.cap)?;
    let report = json!({
        "n": f.n(),
        "m": f.num_clauses(),
        "count": s.count.to_string(),
        "satisfiable": s.count != 0u32.into(),
    });
    emit_json(out, report, config("count", &a))
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct MarginalsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Components up to this many variables are enumerated.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    enumeration_cap: usize,
    /// Largest elimination width for bigger components.
    #[arg(long, default_value_t = DEFAULT_WIDTH_CAP)]
    width_cap: usize,
    /// Enumerate only; larger components are a resource-limit error.
    #[arg(long)]
    no_elimination: bool,
}

fn marginals(a: MarginalsArgs, out: &mut Vec<u8>) -> Result<()> {
    let f = read_formula(&a.input)?;
    let limits = CountLimits {
        enumeration_cap: a.enumeration_cap,
        width_cap: (!a.no_elimination).then_some(a.width_cap),
    };
    let report = match exact_marginals(&f, limits)? {
        Marginals::Unsat => json!({"n": f.n(), "satisfiable": false, "marginals": null}),
        Marginals::Sat(v) => {
            let rows: Vec<Value> = v
                .iter()
                .enumerate()
                .map(|(i, q)| json!({"var": i + 1, "num": q.numer().to_string(), "den": q.denom().to_string()}))
                .collect();
            json!({"n": f.n(), "satisfiable": true, "marginals": rows})
        }
    };
    emit_json(out, report, config("marginals", &a))
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct TreeBpArgs {
    /// Tree in the parenthesized format, e.g. `(v [-+](v))`.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    tree: Option<String>,
    /// File holding one tree.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn tree_bp(a: TreeBpArgs, out: &mut Vec<u8>) -> Result<()> {
    let text = match (&a.tree, &a.input) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => std::fs::read_to_string(p)?,
        (None, None) => return Err(usage("give --tree or --input")),
    };
    let t: TreeFormula = text.trim().parse()?;
    let m = t.root_marginal();
    let report = json!({
        "marginal": m.to_string(),
        "num": m.numer().to_string(),
        "den": m.denom().to_string(),
        "log_likelihood": t.log_likelihood(),
        "expanded_variables": t.expanded_size().to_string(),
        "height": t.height(),
    });
    emit_json(out, report, config("tree-bp", &a))
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct ConstructArgs {
    /// Target marginal `a/b` with 0 < a < b.
    fraction: String,
}

fn parse_fraction(s: &str) -> Result<(u64, u64)> {
    let bad = || usage(format!("expected a fraction a/b, got `{s}`"));
    let (a, b) = s.split_once('/').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn construct(a: ConstructArgs, out: &mut Vec<u8>) -> Result<()> {
    let (num, den) = parse_fraction(&a.fraction)?;
    let t = construct_rational_tree(num, den)?;
    writeln!(out, "{t}")?;
    writeln!(out, "marginal={}", t.root_marginal())?;
    writeln!(
        out,
        "# config {}",
        config_line(&config("construct-tree", &a))
    )?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Conditioned {
    None,
    Extinct,
    Survive,
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct GwArgs {
    #[arg(long)]
    d: f64,
    /// Truncation depth (ignored for extinct trees, which are complete).
    #[arg(long, default_value_t = 10)]
    depth: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Conditioned::None)]
    conditioned: Conditioned,
    /// Node budget per extinct tree; larger trees are reported unresolved.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: usize,
    /// Generations sampled node by node before switching to subtree pools.
    #[arg(long, default_value_t = HybridOptions::default().exact_levels)]
    exact_levels: usize,
    #[arg(long, default_value_t = HybridOptions::default().pool_size)]
    pool_size: usize,
    /// Marginals file, one value per line.
    #[arg(long)]
    out: PathBuf,
    /// Also write the sampled trees, one per line.
    #[arg(long)]
    dump_trees: Option<PathBuf>,
}

fn gw_sample(mut a: GwArgs, out: &mut Vec<u8>) -> Result<()> {
    check_density(a.d)?;
    let seed = resolve_seed(&mut a.seed);
    let opts = HybridOptions {
        exact_levels: a.exact_levels,
        pool_size: a.pool_size,
    };
    let info = extinction_probability(a.d, DEFAULT_EXTINCTION_TOL)?;
    let (values, unresolved, rounded) = match a.conditioned {
        Conditioned::Extinct => {
            let odds = extinct_odds(a.d, a.n, seed, a.budget)?;
            let unresolved = odds.iter().filter(|o| o.is_none()).count();
            let v: Vec<f64> = odds
                .iter()
                .flatten()
                .map(|o| o.marginal().to_f64().expect("marginal converts to f64"))
                .collect();
            (v, unresolved, 0)
        }
        Conditioned::None | Conditioned::Survive => {
            let th = if a.conditioned == Conditioned::None {
                truncated_thetas(a.d, a.depth, a.n, seed, opts)?
            } else {
                survival_thetas(a.d, a.depth, a.n, seed, opts)?
            };
            let rounded = th.iter().filter(|&&t| psi_rounds_to_boundary(t)).count();
            (th.iter().map(|&t| psi_open(t)).collect(), 0, rounded)
        }
    };
    let cfg = config("gw-sample", &a);
    let mut text = format!("# config {}\n", config_line(&cfg));
    for v in &values {
        text.push_str(&format!("{v:.16e}\n"));
    }
    write_file(&a.out, &text)?;
    if let Some(p) = &a.dump_trees {
        write_file(p, &dump_trees(&a, seed)?)?;
    }
    let report = json!({
        "eta": info.eta,
        "zeta": info.zeta,
        "samples": values.len(),
        "unresolved": unresolved,
        "depth": (a.conditioned != Conditioned::Extinct).then_some(a.depth),
        "conditioned": a.conditioned,
        "rounded_to_boundary": rounded,
    });
    emit_json(out, report, cfg)
}

/// Re-draws the sampled trees on the same streams. Only available where
/// every generation is sampled node by node.
fn dump_trees(a: &GwArgs, seed: u64) -> Result<String> {
    let s = GwSampler::new(a.d)?;
    let exact = a.d <= 1.0 || a.depth <= a.exact_levels;
    let trees: Vec<Option<String>> = match a.conditioned {
        Conditioned::Extinct => par_map_streams(a.n, seed, domain::EXTINCT, |_, rng| {
            s.sample_extinct(a.budget, rng)
                .map(|t| t.to_tree_formula().to_string())
        }),
        Conditioned::None if exact => par_map_streams(a.n, seed, domain::TRUNCATED, |_, rng| {
            Some(
                s.sample_truncated(a.depth, rng)
                    .to_tree_formula()
                    .to_string(),
            )
        }),
        Conditioned::Survive if exact => par_map_streams(a.n, seed, domain::SURVIVING, |_, rng| {
            s.sample_surviving(a.depth, rng)
                .ok()
                .map(|t| t.to_tree_formula().to_string())
        }),
        _ => return Err(usage("--dump-trees needs --depth <= --exact-levels")),
    };
    let mut text = String::new();
    for t in trees.into_iter().flatten() {
        text.push_str(&t);
        text.push('\n');
    }
    Ok(text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Mode {
    /// Log-likelihood coordinates, started from all zeros.
    Ll,
    /// Marginal coordinates, started from all one half.
    De,
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct DensityArgs {
    #[arg(long)]
    d: f64,
    #[arg(long)]
    size: usize,
    /// Maximum number of iterations.
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Stop once a step is within `tol` of the sampling noise floor.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Mode::Ll)]
    mode: Mode,
    /// CSV with columns `iter,w2_step,mass_at_half`.
    #[arg(long)]
    emit_trace: Option<PathBuf>,
    /// Final population file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn with_config_line(pop_text: String, cfg: &Value) -> String {
    let (header, body) = pop_text
        .split_once('\n')
        .expect("population text has a header");
    format!("{header}\n# config {}\n{body}", config_line(cfg))
}

fn density(mut a: DensityArgs, out: &mut Vec<u8>) -> Result<()> {
    check_density(a.d)?;
    let seed = resolve_seed(&mut a.seed);
    let FixpointResult {
        population,
        trace,
        converged,
    } = match a.mode {
        Mode::Ll => fixpoint(a.d, a.size, a.iters, a.tol, seed)?,
        Mode::De => fixpoint_de(a.d, a.size, a.iters, a.tol, seed)?,
    };
    let cfg = config("density-evolution", &a);
    if let Some(p) = &a.emit_trace {
        let mut csv = String::from("iter,w2_step,mass_at_half\n");
        for r in &trace {
            csv.push_str(&format!("{},{},{}\n", r.iter, r.w2_step, r.mass_at_half));
        }
        csv.push_str(&format!("# config {}\n", config_line(&cfg)));
        write_file(p, &csv)?;
    }
    if let Some(p) = &a.out {
        write_file(p, &with_config_line(population.to_text(), &cfg))?;
    }
    let rows: Vec<Value> = trace
        .iter()
        .map(|r| json!({"iter": r.iter, "w2_step": r.w2_step, "mass_at_half": r.mass_at_half, "noise_floor": r.noise_floor}))
        .collect();
    let report = json!({
        "kind": population.kind().to_string(),
        "converged": converged,
        "iterations": trace.len(),
        "trace": rows,
    });
    emit_json(out, report, cfg)
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct AtomsArgs {
    #[arg(long)]
    d: f64,
    /// Number of extinction-conditioned trees.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest denominator in the table.
    #[arg(long, default_value_t = 6)]
    max_den: u64,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: usize,
}

fn atoms(mut a: AtomsArgs, out: &mut Vec<u8>) -> Result<()> {
    check_density(a.d)?;
    let seed = resolve_seed(&mut a.seed);
    let exact = ExactAtoms::from_odds(extinct_odds(a.d, a.n, seed, a.budget)?);
    let rows = atom_lower_bounds(a.d, &exact, a.max_den)?;
    let eta = extinction_probability(a.d, DEFAULT_EXTINCTION_TOL)?.eta;
    writeln!(
        out,
        "{:<8} {:>10} {:>10} {:>12} {:>10} result",
        "fraction", "mass", "eta_mass", "lower_bound", "std_err"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:<8} {:>10.6} {:>10.6} {:>12.6e} {:>10.2e} {}",
            r.value.to_string(),
            r.mass,
            r.eta_mass,
            r.lower_bound,
            r.std_err,
            if r.pass { "pass" } else { "fail" }
        )?;
    }
    writeln!(
        out,
        "# eta={eta} samples={} unresolved={}",
        exact.total(),
        exact.unresolved()
    )?;
    writeln!(out, "# config {}", config_line(&config("atoms", &a)))?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct MixtureArgs {
    #[arg(long)]
    d: f64,
    #[arg(long)]
    n_discrete: usize,
    #[arg(long)]
    n_continuous: usize,
    /// Truncation depth of the survival-conditioned samples.
    #[arg(long, default_value_t = 30)]
    depth: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Window of the cluster statistic and of atom detection.
    #[arg(long, default_value_t = 1e-6)]
    window: f64,
    /// Largest denominator tried when snapping clusters to fractions.
    #[arg(long, default_value_t = 1000)]
    max_den: u64,
    /// Number of heaviest discrete atoms listed.
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[arg(long, default_value_t = HybridOptions::default().exact_levels)]
    exact_levels: usize,
    #[arg(long, default_value_t = HybridOptions::default().pool_size)]
    pool_size: usize,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: usize,
    /// Also sample two generations deeper and report the W1 drift.
    #[arg(long)]
    drift: bool,
    /// Histogram CSV of the continuous part over [0, 1].
    #[arg(long)]
    histogram: Option<PathBuf>,
}

fn mixture(mut a: MixtureArgs, out: &mut Vec<u8>) -> Result<()> {
    check_density(a.d)?;
    let seed = resolve_seed(&mut a.seed);
    let opts = MixtureOptions {
        hybrid: HybridOptions {
            exact_levels: a.exact_levels,
            pool_size: a.pool_size,
        },
        window: a.window,
        bins: a.bins,
        node_budget: a.budget,
        drift: a.drift,
    };
    let r = mixture_decomposition(a.d, a.n_discrete, a.n_continuous, a.depth, seed, &opts)?;
    let cfg = config("mixture", &a);
    let mut heavy: Vec<(String, usize)> = r
        .discrete
        .distinct()
        .map(|(q, c)| (q.to_string(), c))
        .collect();
    heavy.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let resolved = (r.discrete.total() - r.discrete.unresolved()).max(1) as f64;
    let top: Vec<Value> = heavy
        .iter()
        .take(a.top)
        .map(|(q, c)| {
            let m = *c as f64 / resolved;
            json!({"value": q, "mass": m, "weighted_mass": r.eta * m})
        })
        .collect();
    let discrete = json!({
        "samples": r.discrete.total(),
        "unresolved": r.discrete.unresolved(),
        "distinct": heavy.len(),
        "top_atoms": top,
    });
    let continuous = match &r.continuous {
        None => Value::Null,
        Some(c) => {
            if let Some(p) = &a.histogram {
                let csv = histogram_csv(&c.histogram, 0.0, 1.0);
                write_file(p, &format!("{csv}# config {}\n", config_line(&cfg)))?;
            }
            let detected = detect_atoms(&c.marginals, a.window, a.max_den, 2)?;
            json!({
                "levels": c.levels,
                "samples": c.marginals.len(),
                "max_cluster_mass": c.max_cluster_mass,
                "window": c.window,
                "coverage": {"nonempty": c.coverage.nonempty, "total": c.coverage.total},
                "histogram": c.histogram,
                "drift_w1": c.drift_w1,
                "nonfinite": c.nonfinite,
                "rounded_to_boundary": c.rounded_to_boundary,
                "detected_atoms": detected.atoms.iter().map(|x| json!({"value": x.value.to_string(), "mass": x.mass})).collect::<Vec<_>>(),
                "residual_mass": detected.residual_mass,
            })
        }
    };
    let report = json!({"d": r.d, "eta": r.eta, "discrete": discrete, "continuous": continuous});
    emit_json(out, report, cfg)
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct CompareArgs {
    /// First population file.
    #[arg(long)]
    a: PathBuf,
    /// Second population file.
    #[arg(long)]
    b: PathBuf,
}

fn compare(a: CompareArgs, out: &mut Vec<u8>) -> Result<()> {
    let (p, q) = (read_population(&a.a)?, read_population(&a.b)?);
    if p.kind() != q.kind() {
        return Err(usage(format!(
            "populations differ in kind: {} vs {}",
            p.kind(),
            q.kind()
        )));
    }
    let c = compare_distributions(p.samples(), q.samples())?;
    let w2 = if p.len() == q.len() {
        Some(wasserstein2(p.samples(), q.samples())?)
    } else {
        None
    };
    let report = json!({
        "kind": p.kind().to_string(),
        "sizes": [p.len(), q.len()],
        "w1": c.w1,
        "w2": w2,
        "ks": c.ks,
    });
    emit_json(out, report, config("compare", &a))
}

#[derive(Args, Debug, Serialize)]
pub(crate) struct VerifyArgs {
    /// Reduced sample sizes, same tolerances.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn verify(mut a: VerifyArgs, out: &mut Vec<u8>) -> Result<Status> {
    let seed = resolve_seed(&mut a.seed);
    let scale = if a.quick { Scale::Quick } else { Scale::Full };
    let outcomes = crate::verify_outcomes(scale, seed)?;
    for o in &outcomes {
        writeln!(out, "{o}")?;
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    writeln!(out, "passed {passed}/{}", outcomes.len())?;
    writeln!(out, "# config {}", config_line(&config("verify", &a)))?;
    Ok(if passed == outcomes.len() {
        Status::Ok
    } else {
        Status::AcceptanceFailed
    })
}
