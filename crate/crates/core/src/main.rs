use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use concept_core::analogy::acquire_similar_set;
use concept_core::conceptualizer::{conceptualize, AbstractQuestion, ConcreteQuestion};
use concept_core::fraction::Fraction;
use concept_core::gateway::{cache, Gateway, Llm, Mode};
use concept_core::harness::{
    build_gateways, convert_mcq_to_binary, emit_report, load_dataset, load_report_csv, markdown_table, run_to_dir,
    sample_records, ConfigFile, DatasetRecord, Engine, EvaluationReport, IsolationMode, ReportFormat, RunMode,
};
use concept_core::program::sandbox::worker_main;

#[derive(Parser)]
#[command(name = "concept", version, about = "Answer yes/no questions with conceptualized programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Abstract questions into templates with typed parameters.
    Conceptualize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, conflicts_with = "dataset")]
        question: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Generate and validate similar questions for an abstract question.
    GenSimilar {
        #[arg(long)]
        config: PathBuf,
        /// JSON file holding an abstract question.
        #[arg(long = "abstract")]
        abstract_q: PathBuf,
    },
    /// Evaluate a dataset in the configured mode.
    Run(RunArgs),
    /// Evaluate with similar-question selection.
    Select(RunArgs),
    /// Evaluate with selection and self-refinement.
    Refine(RunArgs),
    /// Render one or more saved reports.
    Report {
        /// report.json or report.csv files.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: ReportFormat,
    },
    /// Summarize or dump a response cache.
    CacheInspect {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        template: Option<String>,
        /// Print matching records as JSON lines.
        #[arg(long)]
        dump: bool,
    },
    /// Turn multiple-choice items into yes/no questions with gold yes.
    ConvertMcq {
        #[arg(long)]
        config: PathBuf,
        /// JSONL with id, question, and the text of the correct choice in "answer".
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    #[command(hide = true)]
    SandboxWorker,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<RunMode>,
    /// Evaluate a seeded random subset of this many records per dataset.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k_samples: Option<u32>,
    #[arg(long)]
    agreement_threshold: Option<Fraction>,
    #[arg(long)]
    top_t: Option<usize>,
    #[arg(long)]
    max_cases: Option<usize>,
    #[arg(long)]
    similar_target: Option<usize>,
    #[arg(long)]
    similar_minimum: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    max_llm_calls: Option<u32>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    in_process: bool,
    /// Override the backend mode: live, record, or replay.
    #[arg(long, value_parser = parse_mode)]
    backend_mode: Option<Mode>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "live" => Ok(Mode::Live),
        "record" => Ok(Mode::Record),
        "replay" => Ok(Mode::Replay),
        _ => Err(format!("unknown backend mode {s:?}")),
    }
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    ConfigFile::load(path).with_context(|| format!("loading {}", path.display()))
}

fn gateways(cfg: &ConfigFile) -> Result<(Gateway, Option<Gateway>)> {
    Ok(build_gateways(cfg)?)
}

fn run_command(args: RunArgs, forced: Option<RunMode>) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    let run = &mut cfg.run;
    if let Some(m) = forced.or(args.mode) {
        run.mode = m;
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { run.$f = v; })* };
    }
    set!(k_samples, agreement_threshold, top_t, max_cases, similar_target, similar_minimum, timeout_secs, max_llm_calls, workers);
    if args.in_process {
        run.isolation = IsolationMode::InProcess;
    }
    if let Some(m) = args.backend_mode {
        cfg.backend.mode = m;
    }
    cfg.run.validate()?;

    let mut records: Vec<DatasetRecord> = Vec::new();
    for path in &args.dataset {
        let all = load_dataset(path, true)?;
        records.extend(match args.sample {
            Some(n) => sample_records(&all, n, args.seed),
            None => all,
        });
    }
    let (main, concept) = gateways(&cfg)?;
    let worker = std::env::current_exe().ok();
    let engine = Engine {
        llm: &main,
        conceptualizer: concept.as_ref().map_or(&main as &dyn Llm, |g| g as &dyn Llm),
        policy: cfg.run.policy(worker.as_deref()),
        config: cfg.run.clone(),
    };
    std::fs::create_dir_all(&args.out)?;
    let out = run_to_dir(&engine, &records, &args.out)?;
    print!("{}", emit_report(&out.report, ReportFormat::Markdown));
    Ok(())
}

fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "csv") {
        Ok(load_report_csv(&text)?)
    } else {
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::SandboxWorker => worker_main()?,
        Command::Conceptualize {
            config,
            question,
            dataset,
        } => {
            let cfg = load_config(&config)?;
            let (main, concept) = gateways(&cfg)?;
            let llm: &dyn Llm = concept.as_ref().unwrap_or(&main);
            let questions: Vec<ConcreteQuestion> = match (question, dataset) {
                (Some(text), _) => vec![ConcreteQuestion {
                    id: "q".into(),
                    text,
                    gold: None,
                }],
                (None, Some(path)) => load_dataset(&path, false)?
                    .into_iter()
                    .map(|r| ConcreteQuestion {
                        id: r.id,
                        text: r.question,
                        gold: r.gold,
                    })
                    .collect(),
                (None, None) => bail!("pass --question or --dataset"),
            };
            for q in &questions {
                match conceptualize(llm, q) {
                    Ok(aq) => println!("{}", serde_json::to_string(&aq)?),
                    Err(e) => eprintln!("{}: {e}", q.id),
                }
            }
        }
        Command::GenSimilar { config, abstract_q } => {
            let cfg = load_config(&config)?;
            let (main, _) = gateways(&cfg)?;
            let aq: AbstractQuestion = serde_json::from_str(&std::fs::read_to_string(&abstract_q)?)?;
            let set = match acquire_similar_set(&main, &aq, &cfg.run.analogy()) {
                Ok(s) => s,
                Err(concept_core::analogy::AnalogyError::InsufficientSimilarQuestions { partial, minimum }) => {
                    eprintln!("warning: fewer than {minimum} similar questions survived");
                    partial
                }
                Err(e) => return Err(e.into()),
            };
            println!("{}", serde_json::to_string_pretty(&set)?);
        }
        Command::Run(args) => run_command(args, None)?,
        Command::Select(args) => run_command(args, Some(RunMode::Selection))?,
        Command::Refine(args) => run_command(args, Some(RunMode::Refine))?,
        Command::Report {
            runs,
            baseline,
            format,
        } => {
            let base = baseline.as_deref().map(read_report).transpose()?;
            let mut reports = Vec::new();
            for path in &runs {
                let r = read_report(path)?;
                reports.push(match &base {
                    Some(b) => r.with_baseline(b)?,
                    None => r,
                });
            }
            match format {
                ReportFormat::Markdown => print!("{}", markdown_table(&reports.iter().collect::<Vec<_>>())),
                other => {
                    for r in &reports {
                        print!("{}", emit_report(r, other));
                    }
                }
            }
        }
        Command::CacheInspect { cache, template, dump } => {
            let records = cache::load_records(&cache)?;
            let selected: Vec<_> = records
                .iter()
                .filter(|r| template.as_ref().is_none_or(|t| &r.template == t))
                .collect();
            if dump {
                for r in selected {
                    println!("{}", serde_json::to_string(r)?);
                }
            } else {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for r in &selected {
                    *counts.entry(r.template.as_str()).or_default() += 1;
                }
                println!("{} records in {}", selected.len(), cache.display());
                for (t, n) in counts {
                    println!("{t:>16}  {n}");
                }
            }
        }
        Command::ConvertMcq { config, input, output } => {
            let cfg = load_config(&config)?;
            let (main, _) = gateways(&cfg)?;
            let origin = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let mut lines = Vec::new();
            for (i, line) in std::fs::read_to_string(&input)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let v: serde_json::Value =
                    serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
                let get = |k: &str| v.get(k).and_then(|x| x.as_str()).map(str::to_string);
                let (Some(id), Some(q), Some(a)) = (get("id"), get("question"), get("answer")) else {
                    bail!("line {}: expected id, question, and answer", i + 1);
                };
                match convert_mcq_to_binary(&main, &id, &q, &a, &origin) {
                    Ok(r) => lines.push(serde_json::to_string(&serde_json::json!({
                        "id": r.id,
                        "question": r.question,
                        "answer": "yes",
                        "origin": r.origin,
                    }))?),
                    Err(e) => eprintln!("{e}"),
                }
            }
            std::fs::write(&output, lines.join("\n") + "\n")?;
        }
    }
    Ok(())
}
