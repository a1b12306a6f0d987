//! Command-line front end: builders, verifiers, analyzers, bound calculators,
//! DOT export, and the random-circuit property sweep. Every command prints a
//! machine-readable JSON report; `export dot` prints the raw DOT text.
//!
//! Exit codes: 0 = pass, 1 = a checked property is violated, 2 = usage or
//! input error.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use modcirc_core::analysis::{
    block_period, gate_period_reports, nested_size_lower_bound, random_symmetric_circuit,
    root_period_check, size_lower_bound, weight_table, RandomCircuitParams,
    DEFAULT_PERIOD_SUPPORT_CAP,
};
use modcirc_core::circuit::{
    evaluate, truth_table, Assignment, Circuit, OpenCircuit, DEFAULT_EXHAUSTIVE_CAP,
};
use modcirc_core::construct::{
    and_depth2_size, build_and_depth2_with_info, build_and_nested, build_tq_with_info,
};
use modcirc_core::groups::{sym_generators, tree_aut_generators, BlockTree, Permutation};
use modcirc_core::symmetry::{
    extend_to_automorphism, gate_orbit, is_rigid, is_symmetric, minimal_support, rigidify,
    SupportAnalyzer,
};
use modcirc_core::{Error, Result};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "modcirc", version, about = "symmetric MOD_m circuit toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a circuit or expression artifact.
    Build {
        #[command(subcommand)]
        kind: BuildKind,
    },
    /// Check a circuit against a function oracle.
    Verify {
        #[command(subcommand)]
        what: VerifyKind,
    },
    /// Structural and periodicity analyses.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeKind,
    },
    /// Size lower bounds (and measured sizes when a circuit is given).
    Bounds {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: Option<u64>,
        /// Branching factors k1,k2,...,kh (level-1-first: k1 = leaf block size).
        #[arg(long)]
        blocks: Option<String>,
        #[arg(long)]
        circuit: Option<PathBuf>,
    },
    /// Export a circuit.
    Export {
        #[command(subcommand)]
        format: ExportKind,
    },
    /// Random-circuit property sweep (rigidification, periods, equivariance).
    Sweep {
        #[arg(long, default_value_t = 20)]
        count: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        m: u64,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
    },
}

#[derive(Subcommand)]
enum BuildKind {
    /// Fully symmetric depth-2 AND_n circuit.
    And2 {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Nested block-symmetric AND circuit of depth 2h.
    AndNested {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        blocks: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// t_{q^nu} as a Z_pq expression.
    Tq {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        n: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyKind {
    /// Does the circuit compute AND_n?
    And {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, value_enum, default_value_t = VerifyMode::Exhaustive)]
        mode: VerifyMode,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Exhaustive,
    Weight,
    Sample,
}

#[derive(Subcommand)]
enum AnalyzeKind {
    Symmetry {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        blocks: Option<String>,
    },
    Rigidity {
        #[arg(long)]
        circuit: PathBuf,
    },
    Supports {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        blocks: Option<String>,
    },
    Period {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        gate: Option<u32>,
        #[arg(long)]
        blocks: Option<String>,
    },
    Orbits {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        blocks: Option<String>,
    },
}

#[derive(Subcommand)]
enum ExportKind {
    Dot {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct RunReport {
    command: String,
    parameters: Value,
    results: Value,
    elapsed_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    version: &'static str,
}

fn emit(command: &str, parameters: Value, results: Value, started: Instant, seed: Option<u64>) {
    let report = RunReport {
        command: command.to_string(),
        parameters,
        results,
        elapsed_ms: started.elapsed().as_millis(),
        seed,
        version: env!("CARGO_PKG_VERSION"),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serialization")
    );
}

fn exhaustive_cap() -> usize {
    std::env::var("MODCIRC_MAX_N")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_EXHAUSTIVE_CAP)
}

fn parse_blocks(spec: &str) -> Result<BlockTree> {
    let branching: Vec<usize> = spec
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad branching factor {part:?}")))
        })
        .collect::<Result<_>>()?;
    BlockTree::new(&branching)
}

fn load_circuit(path: &PathBuf) -> Result<Circuit> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let c = Circuit::from_json(&text)?;
    c.validate()?;
    Ok(c)
}

fn write_file(path: &PathBuf, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn circuit_summary(c: &Circuit) -> Result<Value> {
    Ok(json!({
        "arity": c.arity,
        "modulus": c.modulus,
        "gate_count": c.gate_count(),
        "size_raw": c.size(),
        "size_normalized": c.normalize_multiplicities().size(),
        "depth": c.depth()?,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every checked property held.
fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    match cli.cmd {
        Cmd::Build { kind } => run_build(kind, started),
        Cmd::Verify { what } => run_verify(what, started),
        Cmd::Analyze { what } => run_analyze(what, started),
        Cmd::Bounds {
            m,
            n,
            blocks,
            circuit,
        } => run_bounds(m, n, blocks, circuit, started),
        Cmd::Export { format } => run_export(format),
        Cmd::Sweep {
            count,
            seed,
            m,
            max_n,
        } => run_sweep(count, seed, m, max_n, started),
    }
}

fn run_build(kind: BuildKind, started: Instant) -> Result<bool> {
    match kind {
        BuildKind::And2 { m, n, output } => {
            let (c, info) = build_and_depth2_with_info(m, n)?;
            write_file(&output, &c.to_json())?;
            let mut results = circuit_summary(&c)?;
            results["construction"] = serde_json::to_value(&info).expect("info");
            results["output"] = json!(output.display().to_string());
            emit(
                "build and2",
                json!({"m": m, "n": n}),
                results,
                started,
                None,
            );
            Ok(true)
        }
        BuildKind::AndNested { m, blocks, output } => {
            let tree = parse_blocks(&blocks)?;
            let c = build_and_nested(m, &tree)?;
            write_file(&output, &c.to_json())?;
            let mut results = circuit_summary(&c)?;
            results["blocks"] = json!(tree.branching());
            results["output"] = json!(output.display().to_string());
            emit(
                "build and-nested",
                json!({"m": m, "blocks": blocks}),
                results,
                started,
                None,
            );
            Ok(true)
        }
        BuildKind::Tq {
            p,
            q,
            nu,
            n,
            output,
        } => {
            let (e, info) = build_tq_with_info(p, q, nu, n)?;
            write_file(&output, &e.to_json())?;
            let results = json!({
                "term_count": info.term_count,
                "max_weight": info.max_weight,
                "strict": info.strict,
                "symmetric_scheme": e.has_symmetric_scheme(),
                "output": output.display().to_string(),
            });
            emit(
                "build tq",
                json!({"p": p, "q": q, "nu": nu, "n": n}),
                results,
                started,
                None,
            );
            Ok(true)
        }
    }
}

fn run_verify(what: VerifyKind, started: Instant) -> Result<bool> {
    let VerifyKind::And {
        circuit,
        mode,
        seed,
        samples,
    } = what;
    let c = load_circuit(&circuit)?;
    let n = c.arity;
    let (pass, detail) = match mode {
        VerifyMode::Exhaustive => {
            let table = truth_table(&c, exhaustive_cap())?;
            let pass = table
                .iter()
                .enumerate()
                .all(|(idx, &v)| v == (idx as u64 == (1u64 << n) - 1));
            (
                pass,
                json!({"mode": "exhaustive", "assignments": table.len()}),
            )
        }
        VerifyMode::Weight => {
            let wt = weight_table(&c)?;
            (wt.is_and(), json!({"mode": "weight", "table": wt.values}))
        }
        VerifyMode::Sample => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pass = evaluate(&c, &Assignment::all_ones(n))?;
            let mut tested = 1;
            for _ in 0..samples.saturating_mul(50) {
                if !pass || tested > samples {
                    break;
                }
                let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                if bits.iter().all(|&b| b) {
                    continue;
                }
                pass &= !evaluate(&c, &Assignment::new(bits))?;
                tested += 1;
            }
            (
                pass,
                json!({"mode": "sample", "samples": tested, "exhaustive": false}),
            )
        }
    };
    let mut results = detail;
    results["pass"] = json!(pass);
    emit(
        "verify and",
        json!({"circuit": circuit.display().to_string()}),
        results,
        started,
        (mode == VerifyMode::Sample).then_some(seed),
    );
    Ok(pass)
}

/// Rigidifies when needed so the group action on gates is well defined; the
/// report flags it and all gate ids then refer to the rigidified circuit.
fn rigid_for_analysis(c: Circuit) -> Result<(Circuit, bool)> {
    if is_rigid(&c)? {
        Ok((c, false))
    } else {
        eprintln!("note: circuit is not rigid; analyzing its rigidification");
        Ok((rigidify(&c)?, true))
    }
}

fn run_analyze(what: AnalyzeKind, started: Instant) -> Result<bool> {
    match what {
        AnalyzeKind::Symmetry { circuit, blocks } => {
            let c = load_circuit(&circuit)?;
            let (gens, group) = match &blocks {
                Some(spec) => (
                    tree_aut_generators(&parse_blocks(spec)?),
                    "tree automorphisms",
                ),
                None => (sym_generators(c.arity), "full symmetric"),
            };
            let symmetric = is_symmetric(&c, &gens)?;
            emit(
                "analyze symmetry",
                json!({"circuit": circuit.display().to_string(), "blocks": blocks}),
                json!({"group": group, "symmetric": symmetric}),
                started,
                None,
            );
            Ok(symmetric)
        }
        AnalyzeKind::Rigidity { circuit } => {
            let c = load_circuit(&circuit)?;
            let rigid = is_rigid(&c)?;
            emit(
                "analyze rigidity",
                json!({"circuit": circuit.display().to_string()}),
                json!({"rigid": rigid}),
                started,
                None,
            );
            Ok(rigid)
        }
        AnalyzeKind::Supports { circuit, blocks } => {
            let c = load_circuit(&circuit)?;
            let (c, rigidified) = rigid_for_analysis(c)?;
            let analyzer = SupportAnalyzer::new(&c)?;
            let mut results = json!({"rigidified": rigidified});
            match &blocks {
                None => {
                    let reports = analyzer.all_supports()?;
                    let max_sup = reports
                        .iter()
                        .filter_map(|r| r.support.as_ref().map(BTreeSet::len))
                        .max();
                    let undefined = reports.iter().filter(|r| r.support.is_none()).count();
                    results["supports"] = serde_json::to_value(&reports).expect("reports");
                    results["max_support"] = json!(max_sup);
                    results["undefined_supports"] = json!(undefined);
                }
                Some(spec) => {
                    let tree = parse_blocks(spec)?;
                    if tree.leaf_count() != c.arity {
                        return Err(Error::InvalidArgument(
                            "tree leaf count differs from circuit arity".into(),
                        ));
                    }
                    let mut per_block = Vec::new();
                    for block in tree.blocks() {
                        let mut reports = Vec::new();
                        for g in &c.gates {
                            reports.push(analyzer.blockwise_support(g.id, &block, &tree)?);
                        }
                        let max_sup = reports
                            .iter()
                            .filter_map(|r| r.support.as_ref().map(BTreeSet::len))
                            .max();
                        per_block.push(json!({
                            "block_parent": block.parent.0,
                            "max_block_support": max_sup,
                            "supports": serde_json::to_value(&reports).expect("reports"),
                        }));
                    }
                    results["blocks"] = json!(per_block);
                }
            }
            emit(
                "analyze supports",
                json!({"circuit": circuit.display().to_string(), "blocks": blocks}),
                results,
                started,
                None,
            );
            Ok(true)
        }
        AnalyzeKind::Period {
            circuit,
            gate,
            blocks,
        } => {
            let c = load_circuit(&circuit)?;
            let mut all_satisfied = true;
            let results = match &blocks {
                None => {
                    let root = root_period_check(&c)?;
                    all_satisfied &= root.satisfied;
                    let mut out = json!({
                        "root": serde_json::to_value(&root).expect("report"),
                    });
                    let analysis = gate_period_reports(&c, DEFAULT_PERIOD_SUPPORT_CAP)?;
                    let gates: Vec<_> = match gate {
                        Some(id) => analysis
                            .reports
                            .into_iter()
                            .filter(|r| r.gate.0 == id)
                            .collect(),
                        None => analysis.reports,
                    };
                    all_satisfied &= gates.iter().all(|r| r.satisfied);
                    out["max_support"] = json!(analysis.max_support);
                    out["bound"] = json!(analysis.bound);
                    out["gates"] = serde_json::to_value(&gates).expect("reports");
                    out
                }
                Some(spec) => {
                    let tree = parse_blocks(spec)?;
                    let mut reports = Vec::new();
                    for block in tree.blocks() {
                        let report = block_period(&c, &block, &tree)?;
                        all_satisfied &= report.satisfied;
                        reports.push(report);
                    }
                    json!({"blocks": serde_json::to_value(&reports).expect("reports")})
                }
            };
            emit(
                "analyze period",
                json!({"circuit": circuit.display().to_string(), "gate": gate, "blocks": blocks}),
                results,
                started,
                None,
            );
            Ok(all_satisfied)
        }
        AnalyzeKind::Orbits { circuit, blocks } => {
            let c = load_circuit(&circuit)?;
            let (c, rigidified) = rigid_for_analysis(c)?;
            let gens = match &blocks {
                Some(spec) => tree_aut_generators(&parse_blocks(spec)?),
                None => sym_generators(c.arity),
            };
            let mut orbits = Vec::new();
            let mut max_orb = 0usize;
            for g in &c.gates {
                let orbit = gate_orbit(&c, g.id, &gens)?;
                max_orb = max_orb.max(orbit.len());
                orbits.push(json!({"gate": g.id.0, "orbit_size": orbit.len()}));
            }
            emit(
                "analyze orbits",
                json!({"circuit": circuit.display().to_string(), "blocks": blocks}),
                json!({"rigidified": rigidified, "max_orbit": max_orb, "orbits": orbits}),
                started,
                None,
            );
            Ok(true)
        }
    }
}

fn run_bounds(
    m: u64,
    n: Option<u64>,
    blocks: Option<String>,
    circuit: Option<PathBuf>,
    started: Instant,
) -> Result<bool> {
    let mut results = json!({});
    match (&blocks, n) {
        (Some(spec), _) => {
            let tree = parse_blocks(spec)?;
            let bound = nested_size_lower_bound(&tree, m)?;
            results["nested"] = serde_json::to_value(&bound).expect("bound");
        }
        (None, Some(n)) => {
            let bound = size_lower_bound(n, m)?;
            results["flat"] = serde_json::to_value(&bound).expect("bound");
            if let Ok((size, info)) = and_depth2_size(m, n as usize) {
                results["construction_size"] = json!(size.to_string());
                results["construction"] = serde_json::to_value(&info).expect("info");
            }
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "bounds needs --n or --blocks".into(),
            ));
        }
    }
    if let Some(path) = &circuit {
        let c = load_circuit(path)?;
        results["measured"] = circuit_summary(&c)?;
    }
    emit(
        "bounds",
        json!({"m": m, "n": n, "blocks": blocks, "circuit": circuit.map(|p| p.display().to_string())}),
        results,
        started,
        None,
    );
    Ok(true)
}

fn run_export(format: ExportKind) -> Result<bool> {
    let ExportKind::Dot { circuit, output } = format;
    let text = std::fs::read_to_string(&circuit)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", circuit.display())))?;
    let dot = match Circuit::from_json(&text) {
        Ok(c) => {
            c.validate()?;
            c.to_dot()
        }
        Err(_) => {
            let oc = OpenCircuit::from_json(&text)?;
            oc.validate()?;
            oc.to_dot()
        }
    };
    match output {
        Some(path) => write_file(&path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(true)
}

fn run_sweep(count: u64, seed: u64, m: u64, max_n: usize, started: Instant) -> Result<bool> {
    let mut failures: Vec<Value> = Vec::new();
    for i in 0..count {
        let circuit_seed = seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(circuit_seed ^ 0x5eed);
        let params = RandomCircuitParams {
            modulus: m,
            arity: 4 + (circuit_seed as usize % (max_n.saturating_sub(3).max(1))),
            layers: 1 + (circuit_seed as usize % 3),
            ..Default::default()
        };
        let c = random_symmetric_circuit(&params, circuit_seed)?;
        let n = c.arity;
        let mut problems = Vec::new();

        // rigidification contract
        let r = rigidify(&c)?;
        if !is_rigid(&r)? {
            problems.push("rigidify output not rigid");
        }
        if r.size() > c.size() {
            problems.push("rigidify grew the circuit");
        }
        if truth_table(&r, exhaustive_cap())? != truth_table(&c, exhaustive_cap())? {
            problems.push("rigidify changed the function");
        }

        // root period bound
        let report = root_period_check(&c)?;
        if !report.satisfied {
            problems.push("root period exceeds bound");
        }
        // AND forces large supports
        if weight_table(&c)?.is_and() {
            let k = size_lower_bound(n as u64, m)?.k;
            let analyzer = SupportAnalyzer::new(&c)?;
            if analyzer.max_support()?.is_none_or(|s| (s as u64) < k) {
                problems.push("AND circuit with supports below the bound");
            }
        }

        // semantics equivariance on a random permutation and assignment
        let pi = random_permutation(&mut rng, n);
        if let Some(sigma) = extend_to_automorphism(&c, &pi)? {
            let ev = modcirc_core::circuit::Evaluator::new(&c)?;
            let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let delta = Assignment::new(bits);
            let mut moved = Assignment::all_zeros(n);
            for v in 1..=n {
                moved.set(v, delta.get(pi.inverse().apply(v)));
            }
            for g in &c.gates {
                let lhs = ev.value_at(&delta, g.id)?;
                let rhs = ev.value_at(&moved, sigma.apply(g.id))?;
                if lhs != rhs {
                    problems.push("equivariance violated");
                    break;
                }
            }
            // support movement on one sampled gate
            let g = c.gates[rng.gen_range(0..c.gates.len())].id;
            let sup = minimal_support(&c, g)?.support;
            let sup_moved = minimal_support(&c, sigma.apply(g))?.support;
            match (sup, sup_moved) {
                (Some(s), Some(sm)) => {
                    let mapped: BTreeSet<usize> = s.iter().map(|&v| pi.apply(v)).collect();
                    if mapped != sm {
                        problems.push("support movement violated");
                    }
                }
                _ => problems.push("support undefined in sweep"),
            }
        } else {
            problems.push("random symmetric circuit missing an extension");
        }

        if !problems.is_empty() {
            failures.push(json!({"seed": circuit_seed, "problems": problems}));
        }
    }
    let pass = failures.is_empty();
    emit(
        "sweep",
        json!({"count": count, "m": m, "max_n": max_n}),
        json!({"pass": pass, "failures": failures}),
        started,
        Some(seed),
    );
    Ok(pass)
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Permutation {
    let mut images: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        images.swap(i, j);
    }
    Permutation::from_images(images).expect("shuffle is a permutation")
}
