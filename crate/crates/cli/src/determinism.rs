//! Worker-count independence: every subcommand is run with 1 and with 8
//! workers and its stdout and output files are compared byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use twosat_core::acceptance::{run_suite, CriterionOutcome, Scale};
use twosat_core::{Error, Result};

const WORKER_COUNTS: [usize; 2] = [1, 8];

/// Stdout, exit code and the files written under the output directory.
#[derive(PartialEq, Eq)]
struct Snapshot {
    code: i32,
    stdout: Vec<u8>,
    files: BTreeMap<String, Vec<u8>>,
}

fn invoke(args: &[String], workers: usize) -> (i32, Vec<u8>) {
    let mut argv = vec![
        "twosat".to_string(),
        "--workers".to_string(),
        workers.to_string(),
    ];
    argv.extend(args.iter().cloned());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = crate::run(argv, &mut out, &mut err);
    (code, out)
}

fn snapshot(args: &[String], workers: usize, out_dir: &Path) -> Result<Snapshot> {
    if out_dir.exists() {
        fs::remove_dir_all(out_dir)?;
    }
    fs::create_dir_all(out_dir)?;
    let (code, stdout) = invoke(args, workers);
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(out_dir)? {
        let entry = entry?;
        files.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path())?,
        );
    }
    Ok(Snapshot {
        code,
        stdout,
        files,
    })
}

/// Argument lists for every subcommand except `verify`, with `{in}` and
/// `{out}` standing for the input and output directories.
fn cases(seed: u64) -> Vec<(&'static str, String)> {
    let s = seed.to_string();
    vec![
        ("gen", format!("gen --n 3000 --d 1.0 --seed {s} --out {{out}}/f.txt")),
        ("count", "count --input {in}/small.txt".to_string()),
        ("marginals", "marginals --input {in}/f.txt".to_string()),
        ("tree-bp", "tree-bp --input {in}/tree.txt".to_string()),
        ("construct-tree", "construct-tree 37/101".to_string()),
        (
            "gw-sample",
            format!("gw-sample --d 1.5 --depth 8 --n 3000 --seed {s} --out {{out}}/mu.txt --dump-trees {{out}}/trees.txt"),
        ),
        (
            "gw-sample",
            format!("gw-sample --d 1.5 --depth 16 --n 3000 --seed {s} --conditioned survive --exact-levels 6 --pool-size 3000 --out {{out}}/mu.txt"),
        ),
        (
            "gw-sample",
            format!("gw-sample --d 0.8 --n 3000 --seed {s} --conditioned extinct --out {{out}}/mu.txt --dump-trees {{out}}/trees.txt"),
        ),
        (
            "density-evolution",
            format!("density-evolution --d 1.5 --size 5000 --iters 6 --seed {s} --emit-trace {{out}}/trace.csv --out {{out}}/pop.txt"),
        ),
        (
            "density-evolution",
            format!("density-evolution --d 1.5 --size 5000 --iters 6 --seed {s} --mode de --out {{out}}/pop.txt"),
        ),
        ("atoms", format!("atoms --d 1.0 --n 5000 --seed {s}")),
        (
            "mixture",
            format!("mixture --d 1.5 --n-discrete 3000 --n-continuous 3000 --depth 14 --exact-levels 6 --pool-size 3000 --drift --seed {s} --histogram {{out}}/hist.csv"),
        ),
        ("compare", "compare --a {in}/p1.txt --b {in}/p2.txt".to_string()),
    ]
}

fn expand(template: &str, input: &Path, output: &Path) -> Vec<String> {
    template
        .split_whitespace()
        .map(|t| {
            t.replace("{in}", &input.to_string_lossy())
                .replace("{out}", &output.to_string_lossy())
        })
        .collect()
}

/// Writes the input files the cases read.
fn prepare_inputs(dir: &Path, seed: u64) -> Result<()> {
    let d = dir.to_string_lossy();
    let setup = [
        format!("gen --n 3000 --d 1.0 --seed {seed} --out {d}/f.txt"),
        format!("gen --n 14 --d 1.2 --seed {seed} --out {d}/small.txt"),
        format!("density-evolution --d 1.0 --size 4000 --iters 4 --seed {seed} --out {d}/p1.txt"),
        format!(
            "density-evolution --d 1.0 --size 3000 --iters 4 --seed {} --out {d}/p2.txt",
            seed ^ 1
        ),
    ];
    for args in setup {
        let argv: Vec<String> = args.split_whitespace().map(str::to_string).collect();
        let (code, _) = invoke(&argv, 1);
        if code != 0 {
            return Err(Error::InvalidArgument(format!("setup run failed: {args}")));
        }
    }
    fs::write(
        dir.join("tree.txt"),
        "(v [-+](v [++](v)) [+-](v [--](v) [-+](v)))\n",
    )?;
    Ok(())
}

/// Criterion 12: identical output at 1 and 8 workers for every subcommand.
/// `verify` is covered by comparing the quick suite's verdict lines.
pub fn determinism_criterion(seed: u64) -> Result<CriterionOutcome> {
    let tmp = tempfile::tempdir()?;
    let input = tmp.path().join("in");
    let output = tmp.path().join("out");
    fs::create_dir_all(&input)?;
    prepare_inputs(&input, seed)?;
    let mut names = Vec::new();
    let mut problems = Vec::new();
    for (name, template) in cases(seed) {
        let args = expand(&template, &input, &output);
        let snaps = WORKER_COUNTS
            .iter()
            .map(|&w| snapshot(&args, w, &output))
            .collect::<Result<Vec<_>>>()?;
        if snaps.iter().any(|s| s.code != 0) {
            problems.push(format!(
                "{name} exited with {:?}",
                snaps.iter().map(|s| s.code).collect::<Vec<_>>()
            ));
        } else if snaps[0] != snaps[1] {
            problems.push(format!("{name} differs"));
        }
        names.push(name);
    }
    let suite_lines = |workers: usize| -> Result<Vec<String>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let outcomes = pool.install(|| run_suite(Scale::Quick, seed))?;
        Ok(outcomes.iter().map(|o| o.to_string()).collect())
    };
    if suite_lines(WORKER_COUNTS[0])? != suite_lines(WORKER_COUNTS[1])? {
        problems.push("verify differs".to_string());
    }
    names.push("verify");
    names.dedup();
    Ok(CriterionOutcome {
        id: 12,
        name: "determinism",
        passed: problems.is_empty(),
        detail: format!(
            "{} subcommands in {} cases, each run at {:?} workers; {}",
            names.len(),
            cases(seed).len() + 1,
            WORKER_COUNTS,
            if problems.is_empty() {
                "all outputs byte-identical".to_string()
            } else {
                problems.join(", ")
            }
        ),
    })
}
