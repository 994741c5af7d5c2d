mod samplefile;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use diffsat::benchgen::{gen_coins, gen_random_graph, gen_smokers, SmokersConfig, DEFAULT_DENSITY};
use diffsat::diffbranch::CostSpec;
use diffsat::engine::EngineConfig;
use diffsat::frontend::{parse, CostExpr, Format, Mode, Program};
use diffsat::infer::{conditional_cost, map_model, marginal, program_cost};
use diffsat::model::{Atom, AtomKind, Model};
use diffsat::oracle::{enumerate_models, exact_feasibility};
use diffsat::reify::{encode_equation, encode_minimize};
use diffsat::sampler::{enumerate_all, run_portfolio, run_sampling, SamplerConfig, TerminationReason};
use diffsat::transform::{compile, CompiledInstance};

use samplefile::{trailer, SampleFile};

const EXIT_OK: u8 = 0;
const EXIT_SAT: u8 = 10;
const EXIT_UNSAT: u8 = 20;
const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "diffsat", version, about = "Gradient-guided model sampling for SAT and answer set programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Cnf,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    /// `#minimize` over squared count differences.
    Min,
    /// Count bounds within a tolerance.
    Eq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Coins,
    Smokers,
    Graph,
}

#[derive(Subcommand)]
enum Command {
    /// Sample models until the cost falls to the threshold.
    Sample {
        file: PathBuf,
        /// Accuracy threshold.
        #[arg(long, default_value_t = 0.01)]
        psi: f64,
        /// Minimum number of models before convergence counts.
        #[arg(long, default_value_t = 0)]
        n: u64,
        #[arg(long, default_value_t = diffsat::diffbranch::DEFAULT_NOISE)]
        noise: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_trials: u64,
        /// Stop when the best cost improves by less than EPS per WINDOW models.
        #[arg(long, value_name = "WINDOW:EPS", value_parser = parse_stagnation)]
        stagnation: Option<(u64, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Engines racing for the first model.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Closed-form MSE partials.
        #[arg(long)]
        mse: bool,
        /// Recompute the branching ranking at every decision.
        #[arg(long)]
        lookahead: bool,
        /// Add a conditional-probability cost term Pr(P | Q) = TARGET.
        #[arg(long, value_name = "P:Q:TARGET")]
        cond: Option<String>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Write the sample to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find one model (or all with --all).
    Solve {
        file: PathBuf,
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Marginals or the MAP model of a saved sample.
    Query {
        sample: PathBuf,
        /// Atoms to query; defaults to the sample's query atoms.
        #[arg(long = "atom")]
        atoms: Vec<String>,
        /// Print the most frequent model projected onto the query atoms.
        #[arg(long)]
        map: bool,
    },
    /// Reify a weighted program for an external ASP solver.
    Encode {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "eq")]
        variant: Variant,
        #[arg(long, default_value_t = 400)]
        nmodels: u64,
        #[arg(long, default_value_t = 3)]
        tol: u64,
        #[arg(long, default_value_t = 100)]
        multiplier: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark program.
    Gen {
        #[arg(value_enum)]
        family: Family,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Friend or edge density.
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        density: f64,
        /// Density of known smokers.
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        smoker_density: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick end-to-end checks against brute force.
    Selftest,
    /// Brute-force models and exact feasibility of a small program.
    #[command(hide = true)]
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
}

fn parse_stagnation(s: &str) -> Result<(u64, f64), String> {
    let (w, e) = s.split_once(':').ok_or("expected WINDOW:EPS")?;
    let w: u64 = w.parse().map_err(|e| format!("window: {e}"))?;
    let e: f64 = e.parse().map_err(|e| format!("eps: {e}"))?;
    if w == 0 || e.is_nan() || e < 0.0 {
        return Err("window must be positive and eps non-negative".into());
    }
    Ok((w, e))
}

/// An error with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("diffsat: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Sample {
            file,
            psi,
            n,
            noise,
            max_trials,
            stagnation,
            seed,
            threads,
            mse,
            lookahead,
            cond,
            format,
            out,
        } => {
            let (mut program, explicit) = load(&file, format)?;
            let explicit = match cond {
                Some(spec) => Some(add_condition(&mut program, explicit, &spec)?),
                None => explicit,
            };
            let config = SamplerConfig {
                psi,
                min_models: n,
                noise,
                max_trials,
                stagnation,
                seed,
                portfolio_width: threads,
                fast_mse: mse,
                lookahead,
                engine: EngineConfig {
                    seed,
                    ..EngineConfig::default()
                },
            };
            sample(&program, explicit.as_ref(), &config, out.as_deref())
        }
        Command::Solve { file, all, seed, format } => {
            let (program, _) = load(&file, format)?;
            solve(&program, all, seed)
        }
        Command::Query { sample, atoms, map } => query(&sample, atoms, map),
        Command::Encode {
            file,
            variant,
            nmodels,
            tol,
            multiplier,
            out,
        } => {
            let (program, explicit) = load(&file, Some(FormatArg::Lp))?;
            if explicit.is_some() {
                return Err(anyhow!("only weight-derived costs can be encoded")).code(EXIT_INPUT);
            }
            let weights = program.weighted_params();
            let text = match variant {
                Variant::Min => encode_minimize(&program, &weights, nmodels),
                Variant::Eq => encode_equation(&program, &weights, nmodels, tol, multiplier),
            }
            .code(EXIT_INPUT)?;
            emit(&text, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Gen {
            family,
            size,
            seed,
            density,
            smoker_density,
            out,
        } => {
            let text = match family {
                Family::Coins => gen_coins(size, seed),
                Family::Smokers => gen_smokers(
                    size,
                    seed,
                    SmokersConfig {
                        friend_density: density,
                        smoker_density,
                    },
                ),
                Family::Graph => gen_random_graph(size, seed, density),
            }
            .code(EXIT_USAGE)?;
            emit(&text, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Selftest => selftest(),
        Command::Oracle { file, format } => {
            let (program, _) = load(&file, format)?;
            oracle(&program)
        }
    }
}

fn load(path: &Path, format: Option<FormatArg>) -> Result<(Program, Option<CostExpr>), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .code(EXIT_INPUT)?;
    let format = match format {
        Some(FormatArg::Cnf) => Format::Cnf,
        Some(FormatArg::Lp) => Format::Lp,
        None => Format::detect(&text),
    };
    parse(&text, format)
        .with_context(|| format!("{}", path.display()))
        .code(EXIT_INPUT)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))
            .code(EXIT_INPUT),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `P:Q:TARGET` and adds the conditional term to the explicit cost.
fn add_condition(program: &mut Program, explicit: Option<CostExpr>, spec: &str) -> Result<CostExpr, Failure> {
    let parts: Vec<&str> = spec.rsplitn(3, ':').collect();
    let [target, q, p] = parts[..] else {
        return Err(anyhow!("--cond expects P:Q:TARGET")).code(EXIT_USAGE);
    };
    let target: f64 = target.parse().context("--cond target").code(EXIT_USAGE)?;
    let lookup = |name: &str| {
        program
            .symbols
            .lookup(name)
            .ok_or_else(|| anyhow!("unknown atom `{name}` in --cond"))
            .code(EXIT_INPUT)
    };
    let (p, q) = (lookup(p)?, lookup(q)?);
    let (term, _) = conditional_cost(program, p, q, target).code(EXIT_INPUT)?;
    Ok(match explicit {
        Some(e) => CostExpr::add(e, term),
        None => term,
    })
}

/// Names of the atoms of a model as printed: weighted-rule auxiliaries
/// stay hidden.
fn shown(instance: &CompiledInstance, model: &Model) -> Vec<String> {
    model
        .atoms()
        .iter()
        .filter(|&&a| instance.kind(a) == AtomKind::Original)
        .map(|&a| instance.symbols.name(a).to_string())
        .collect()
}

fn sample(program: &Program, explicit: Option<&CostExpr>, config: &SamplerConfig, out: Option<&Path>) -> Result<u8, Failure> {
    let cost: Option<CostSpec> = program_cost(program, explicit);
    if explicit.is_some() && cost.is_none() {
        return Err(anyhow!("cost refers to atoms that are not parameters")).code(EXIT_INPUT);
    }
    let instance = compile(program);
    let result = run_portfolio(&instance, cost.as_ref(), config).code(EXIT_INPUT)?;
    let models = result.sample.models();
    let queries: Vec<Atom> = if program.queries.is_empty() {
        program.params.clone()
    } else {
        program.queries.clone()
    };
    let mut text = String::new();
    for &q in &queries {
        let m = marginal(models, q).unwrap_or(0.0);
        let _ = writeln!(text, "{} {m:.6}", program.name(q));
    }
    text.push_str(&trailer(result.final_cost, models.len(), &result.reason.to_string()));
    print!("{text}");
    if let Some(path) = out {
        let file = SampleFile {
            theta: instance.params.iter().map(|&a| instance.symbols.name(a).to_string()).collect(),
            seed: config.seed,
            psi: config.psi,
            queries: queries.iter().map(|&a| program.name(a).to_string()).collect(),
            // Auxiliaries stay in the file so that every parameter can be re-queried.
            models: models
                .iter()
                .map(|m| m.atoms().iter().map(|&a| instance.symbols.name(a).to_string()).collect())
                .collect(),
            cost: result.final_cost,
            reason: result.reason.to_string(),
        };
        emit(&file.render(), Some(path))?;
    }
    Ok(match result.reason {
        TerminationReason::Converged => EXIT_SAT,
        TerminationReason::Unsat => EXIT_UNSAT,
        TerminationReason::Stagnated | TerminationReason::TrialsExhausted => EXIT_NOT_CONVERGED,
    })
}

fn print_model(instance: &CompiledInstance, model: &Model) {
    if instance.mode == Mode::Sat {
        let mut line = String::from("v");
        for slot in 0..instance.num_atoms() {
            let a = Atom::from_slot(slot);
            if instance.kind(a) == AtomKind::Original {
                let sign = if model.contains(a) { "" } else { "-" };
                let _ = write!(line, " {sign}{}", instance.symbols.name(a));
            }
        }
        println!("{line} 0");
    } else {
        println!("{}", shown(instance, model).join(" "));
    }
}

fn solve(program: &Program, all: bool, seed: u64) -> Result<u8, Failure> {
    let instance = compile(program);
    let config = EngineConfig {
        seed,
        ..EngineConfig::default()
    };
    let models = if all {
        enumerate_all(&instance, &config)
    } else {
        first_model(&instance, config).into_iter().collect()
    };
    if models.is_empty() {
        println!("s UNSATISFIABLE");
        return Ok(EXIT_UNSAT);
    }
    println!("s SATISFIABLE");
    for m in &models {
        print_model(&instance, m);
    }
    if all {
        println!("c models {}", models.len());
    }
    Ok(EXIT_SAT)
}

/// One model; in ASP mode a stable one.
fn first_model(instance: &CompiledInstance, config: EngineConfig) -> Option<Model> {
    let sampler = SamplerConfig {
        seed: config.seed,
        engine: config,
        ..SamplerConfig::default()
    };
    let result = run_sampling(instance, None, &sampler).ok()?;
    result.sample.models().first().cloned()
}

fn query(path: &Path, atoms: Vec<String>, map: bool) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .code(EXIT_INPUT)?;
    let file = SampleFile::parse(&text).code(EXIT_INPUT)?;
    let names = if atoms.is_empty() { file.queries.clone() } else { atoms };
    let mut symbols = diffsat::frontend::SymbolTable::new();
    let models: Vec<Model> = file
        .models
        .iter()
        .map(|m| m.iter().map(|name| symbols.intern(name)).collect())
        .collect();
    let query_atoms: Vec<Atom> = names.iter().map(|n| symbols.intern(n)).collect();
    if map {
        let best = map_model(&models, &query_atoms).code(EXIT_INPUT)?;
        let shown: Vec<&str> = best.atoms().iter().map(|&a| symbols.name(a)).collect();
        println!("MAP {}", shown.join(" "));
    } else {
        for (name, &a) in names.iter().zip(&query_atoms) {
            let m = marginal(&models, a).code(EXIT_INPUT)?;
            println!("{name} {m:.6}");
        }
    }
    Ok(EXIT_OK)
}

fn oracle(program: &Program) -> Result<u8, Failure> {
    let models = enumerate_models(program).code(EXIT_INPUT)?;
    for m in &models {
        let names: Vec<&str> = m.atoms().iter().map(|&a| program.name(a)).collect();
        println!("{}", names.join(" "));
    }
    println!("c models {}", models.len());
    let weights = program.weighted_params();
    if !weights.is_empty() && !models.is_empty() {
        let f = exact_feasibility(&models, &weights).code(EXIT_INPUT)?;
        println!("c feasible {} residual {:.3e} min_mse {:.6}", f.feasible, f.residual, f.min_mse);
    }
    Ok(if models.is_empty() { EXIT_UNSAT } else { EXIT_SAT })
}

fn selftest() -> Result<u8, Failure> {
    let check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        ok
    };
    let mut all = true;

    let (p, _) = parse("{a}. {b}. 0.2 :: a. 0.6 :: b. :- a, b.", Format::Lp).code(EXIT_INPUT)?;
    let instance = compile(&p);
    let config = SamplerConfig {
        psi: 0.001,
        ..SamplerConfig::default()
    };
    let result = run_portfolio(&instance, program_cost(&p, None).as_ref(), &config).code(EXIT_INPUT)?;
    let beta = result.sample.beta();
    all &= check(
        "worked example converges",
        result.reason == TerminationReason::Converged && (beta[0] - 0.2).abs() < 0.045 && (beta[1] - 0.6).abs() < 0.045,
    );

    let (p, _) = parse("p :- q. q :- p. p :- not r. r :- not p.", Format::Lp).code(EXIT_INPUT)?;
    let brute = enumerate_models(&p).code(EXIT_INPUT)?;
    let found = enumerate_all(&compile(&p), &EngineConfig::default());
    all &= check("non-tight enumeration matches brute force", brute == found);

    let (p, _) = parse("p cnf 2 4\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n", Format::Cnf).code(EXIT_INPUT)?;
    all &= check("unsatisfiable CNF", first_model(&compile(&p), EngineConfig::default()).is_none());

    if all {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_NOT_CONVERGED,
            error: anyhow!("self test failed"),
        })
    }
}
