use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use curio_core::lab::{aggregate, parse_events, relative_improvement, simulate, Arm, EventWriter, SimConfig, Table};
use curio_core::semantic::{build_index, match_semantic, CuriosityIndex, SemanticConfig};
use curio_core::session::{Phase, UserIntent};
use curio_core::store::{generate_national_day, length_stats_present, validate, CuriosityCollection, NationalDayTemplate};
use curio_core::task::{matching_text, MatchPhase};
use curio_core::text::TextMatcher;
use curio_core::{Domain, ExecMode};
use curio_cli::resources::{task, Sources};
use curio_cli::server::{self, AppState, ServerOptions};

#[derive(Parser)]
#[command(name = "curio", version, about = "Task guidance with curiosities")]
struct Cli {
    #[command(flatten)]
    sources: Sources,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Curiosity dataset tools.
    #[command(subcommand)]
    Data(DataCmd),
    /// Task fixture tools.
    #[command(subcommand)]
    Task(TaskCmd),
    /// Rank curiosities against a task.
    #[command(subcommand, name = "match")]
    Match(MatchCmd),
    /// Interactive dialogue on stdin/stdout.
    Chat {
        #[arg(long)]
        task: String,
        #[arg(long, default_value = "A")]
        arm: Arm,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Append experiment events here.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Session journal for crash recovery.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Static chat client served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Experiment logs.
    #[command(subcommand)]
    Lab(LabCmd),
}

#[derive(Subcommand)]
enum DataCmd {
    /// Check every curiosity; exits non-zero on findings.
    Validate {
        #[arg(long, default_value_t = 40)]
        max_words: usize,
    },
    /// Per-domain length histogram.
    Stats {
        #[arg(long)]
        csv: bool,
    },
    /// Generate national-day curiosities from a calendar (TOML) as JSONL.
    NationalDays {
        calendar: PathBuf,
        #[arg(long, default_value = "cooking")]
        domain: Domain,
    },
}

#[derive(Subcommand)]
enum TaskCmd {
    /// List loaded tasks.
    List,
    /// Print the text a matcher sees.
    Show {
        id: String,
        /// 1-based step; whole task when absent.
        #[arg(long)]
        step: Option<usize>,
    },
}

#[derive(Subcommand)]
enum MatchCmd {
    /// Bag-of-words cosine against one step.
    Text {
        #[arg(long)]
        task: String,
        #[arg(long)]
        step: usize,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Two-stage embedding match against the whole task.
    Semantic {
        #[arg(long)]
        task: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Reuse (or create) a cached index at this path.
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LabCmd {
    /// Aggregate an event log into a report table.
    Aggregate {
        log: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
        table: u8,
        #[arg(long)]
        csv: bool,
    },
    /// Simulate scripted users; writes JSONL events.
    Simulate {
        /// User-behaviour model (TOML). Defaults when absent.
        #[arg(long = "sim-config")]
        sim_config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Relative improvement of one mean over another, in percent.
    Improvement { treatment: f64, baseline: f64 },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let src = &cli.sources;
    match cli.cmd {
        Cmd::Data(c) => data(src, c),
        Cmd::Task(c) => tasks(src, c),
        Cmd::Match(c) => matching(src, c),
        Cmd::Chat { task: id, arm, seed } => chat(src, &id, arm, seed),
        Cmd::Serve { addr, events, journal, ui } => {
            let opts = ServerOptions {
                events,
                journal,
                ui_dir: ui.clone(),
            };
            let app = AppState::new(src.engine()?, src.tasks()?, &opts)?;
            tokio::runtime::Runtime::new()?.block_on(server::serve(app, &addr, ui.as_deref()))
        }
        Cmd::Lab(c) => lab(src, c),
    }
}

fn data(src: &Sources, c: DataCmd) -> Result<()> {
    match c {
        DataCmd::Validate { max_words } => {
            let report = validate(&src.collection()?, max_words);
            for f in &report.findings {
                println!("{f}");
            }
            println!("checked {} curiosities, {} findings", report.checked, report.findings.len());
            if !report.is_clean() {
                std::process::exit(1);
            }
        }
        DataCmd::Stats { csv } => {
            let c = src.collection()?;
            let stats = length_stats_present(&c)?;
            if csv {
                print!("{}", stats.to_csv());
            } else {
                println!("{} curiosities", c.len());
                for (d, l) in &stats.domains {
                    println!("{d:<8} {:>5} items  mean {:.2} words", l.count, l.mean);
                }
            }
        }
        DataCmd::NationalDays { calendar, domain } => {
            let text = std::fs::read_to_string(&calendar).with_context(|| format!("reading {}", calendar.display()))?;
            let t: NationalDayTemplate = toml::from_str(&text)?;
            let items = generate_national_day(&t, domain)?;
            print!("{}", CuriosityCollection::new(items)?.to_jsonl());
        }
    }
    Ok(())
}

fn tasks(src: &Sources, c: TaskCmd) -> Result<()> {
    let tasks = src.tasks()?;
    match c {
        TaskCmd::List => {
            for t in tasks.values() {
                println!("{:<24} {:<7} {:>2} steps  {}", t.id, t.domain, t.n_steps, t.title);
            }
        }
        TaskCmd::Show { id, step } => {
            let t = task(&tasks, &id)?;
            let phase = step.map_or(MatchPhase::TaskLevel, MatchPhase::StepLevel);
            println!("{}", matching_text(t, phase)?);
        }
    }
    Ok(())
}

fn matching(src: &Sources, c: MatchCmd) -> Result<()> {
    let tasks = src.tasks()?;
    let collection = src.collection()?;
    match c {
        MatchCmd::Text { task: id, step, top } => {
            let t = task(&tasks, &id)?;
            let text = t.step(step)?;
            let m = TextMatcher::new(src.lexicon()?, &collection, ExecMode::default());
            println!("step {step}: {text}");
            for r in m.rank(text, t.domain, top)? {
                println!("{:.4}  {}", r.score, r.curiosity_id);
            }
        }
        MatchCmd::Semantic { task: id, n, m, index } => {
            let t = task(&tasks, &id)?;
            let base = src.config()?.semantic;
            let cfg = SemanticConfig {
                n: n.unwrap_or(base.n),
                m: m.unwrap_or(base.m),
            };
            let provider = src.provider()?;
            let idx = match &index {
                Some(p) if p.exists() => CuriosityIndex::load(p)?,
                _ => {
                    let idx = build_index(&collection, t.domain, provider.as_ref())?;
                    if let Some(p) = &index {
                        idx.save(p)?;
                    }
                    idx
                }
            };
            for r in match_semantic(t, &idx, &collection, cfg, provider.as_ref())? {
                let s = r.stage_scores.expect("semantic results carry stage scores");
                println!("{:.4}  (bi {:.4})  {}", s.cross, s.bi, r.curiosity_id);
            }
        }
    }
    Ok(())
}

fn chat(src: &Sources, id: &str, arm: Arm, seed: u64) -> Result<()> {
    let engine = src.engine()?;
    let tasks = src.tasks()?;
    let t = task(&tasks, id)?.clone();
    let mut s = engine.create_session(format!("chat-{seed}"), t, arm, seed)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{}", engine.greeting(&s))?;
    for line in io::stdin().lock().lines() {
        let line = line?;
        match engine.handle(&mut s, UserIntent::parse(&line)) {
            Ok(turn) => writeln!(out, "{}", turn.response)?,
            Err(e) => writeln!(out, "({e})")?,
        }
        if s.phase == Phase::Rated {
            break;
        }
    }
    Ok(())
}

fn lab(src: &Sources, c: LabCmd) -> Result<()> {
    match c {
        LabCmd::Aggregate { log, table, csv } => {
            let text = std::fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let report = aggregate(&parse_events(&text)?)?;
            let t = Table::from_number(table).expect("range checked by clap");
            if csv {
                print!("{}", report.to_csv(t));
            } else {
                println!(
                    "{} sessions: {} qualifying, {} unrated, {} short",
                    report.sessions, report.qualifying, report.unrated, report.short
                );
                print!("{}", report.to_text(t));
            }
        }
        LabCmd::Simulate { sim_config, n, seed, out, sequential } => {
            let cfg = match &sim_config {
                Some(p) => SimConfig::from_toml(&std::fs::read_to_string(p)?)?,
                None => SimConfig::default(),
            };
            let engine = src.engine()?;
            let tasks: Vec<_> = src.tasks()?.into_values().collect();
            let mode = if sequential { ExecMode::Sequential } else { ExecMode::default() };
            let events = simulate(&engine, &tasks, &cfg, n, seed, mode)?;
            match out {
                Some(p) => {
                    let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    let mut w = EventWriter::new(io::BufWriter::new(f));
                    w.append_all(&events)?;
                    eprintln!("wrote {} events to {}", w.written(), p.display());
                }
                None => EventWriter::new(io::stdout().lock()).append_all(&events)?,
            }
        }
        LabCmd::Improvement { treatment, baseline } => {
            println!("{:.1}%", relative_improvement(treatment, baseline)?);
        }
    }
    Ok(())
}
