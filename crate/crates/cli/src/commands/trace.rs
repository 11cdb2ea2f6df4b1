use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, ValueEnum};
use idtrace_core::{
    run_random_baseline, run_titf, Bits, ObservationSet, Session, Status, Strategy, TargetFound,
    TraceError, TraceOptions, TracePolicy, TraceResult, Universe,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{attribute_name, load_universe, object_index, parse_known, value_name};
use crate::error::CliError;
use crate::output::{emit, fmt_bits, opt_bits, text_table, Format, Render};

/// Candidate lists longer than this are left out of the report.
const MAX_LISTED: usize = 50;
/// Attributes shown per interactive prompt.
const SHOWN_RANKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Titf,
    Random,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    dataset: PathBuf,
    /// Object to trace; its stored values answer each acquisition.
    #[arg(long, required_unless_present = "interactive")]
    object: Option<String>,
    /// Values known before tracing, as `attribute=value` pairs.
    #[arg(long, value_delimiter = ',')]
    known: Vec<String>,
    #[arg(long, value_enum, default_value = "titf")]
    strategy: StrategyArg,
    /// Seed for the random strategy.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep acquiring after the remaining attributes stop separating the candidates.
    #[arg(long)]
    literal: bool,
    /// Read each observed value from stdin instead of the table.
    #[arg(long)]
    interactive: bool,
}

#[derive(Debug, Serialize)]
pub struct TraceStep {
    pub attribute: String,
    pub value: String,
    /// Absent when the step left no candidates.
    pub entropy_after: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct TraceReport {
    pub object: Option<String>,
    pub strategy: Strategy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub status: Status,
    pub acquisitions: usize,
    pub path: Vec<TraceStep>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unavailable: Vec<String>,
    pub entropy_history: Vec<f64>,
    pub candidates: usize,
    pub identified: Option<String>,
    /// Remaining candidate ids when there are at most 50.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survivors: Option<Vec<String>>,
    pub elapsed_seconds: f64,
}

impl Render for TraceReport {
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["step", "attribute", "value", "entropy"]
            .map(String::from)
            .to_vec();
        let mut rows = vec![vec![
            "0".into(),
            String::new(),
            String::new(),
            self.entropy_history
                .first()
                .map_or_else(String::new, |b| fmt_bits(*b)),
        ]];
        rows.extend(self.path.iter().enumerate().map(|(i, s)| {
            vec![
                (i + 1).to_string(),
                s.attribute.clone(),
                s.value.clone(),
                opt_bits(s.entropy_after),
            ]
        }));
        (header, rows)
    }

    fn text(&self) -> String {
        let mut out = format!(
            "{} after {} acquisition(s), {} candidate(s)",
            self.status, self.acquisitions, self.candidates
        );
        if let Some(id) = &self.identified {
            out.push_str(&format!(": {id}"));
        }
        out.push_str("\n\n");
        out.push_str(&text_table(
            &["step", "attribute", "value", "entropy"],
            &self.csv().1,
        ));
        out
    }
}

fn candidate_ids(
    universe: &Universe,
    session_candidates: impl Iterator<Item = usize>,
    count: usize,
) -> Option<Vec<String>> {
    (count <= MAX_LISTED).then(|| {
        session_candidates
            .map(|o| universe.object_id(o).to_string())
            .collect()
    })
}

fn report_from_result(
    universe: &Universe,
    object: &str,
    seed: Option<u64>,
    result: TraceResult,
) -> TraceReport {
    let path = result
        .path
        .iter()
        .enumerate()
        .map(|(i, o)| TraceStep {
            attribute: attribute_name(universe, o.attribute),
            value: value_name(universe, o.attribute, o.value),
            entropy_after: result.entropy_history.get(i + 1).map(|b| b.value()),
        })
        .collect();
    let (identified, candidates, survivors) = match &result.target_found {
        TargetFound::Identified { object } => {
            (Some(universe.object_id(*object).to_string()), 1, None)
        }
        TargetFound::Survivors { objects } => (
            None,
            objects.len(),
            candidate_ids(universe, objects.iter().copied(), objects.len()),
        ),
    };
    TraceReport {
        object: Some(object.to_string()),
        strategy: result.strategy,
        seed,
        status: result.status,
        acquisitions: result.acquisitions,
        path,
        unavailable: Vec::new(),
        entropy_history: result.entropy_history.iter().map(|b| b.value()).collect(),
        candidates,
        identified,
        survivors,
        elapsed_seconds: result.elapsed.as_secs_f64(),
    }
}

fn report_from_session(
    session: &Session,
    strategy: Strategy,
    seed: Option<u64>,
    start: Instant,
) -> TraceReport {
    let universe = session.universe();
    let history = session.entropy_history();
    let count = session.candidates().len();
    TraceReport {
        object: None,
        strategy,
        seed,
        status: session.status(),
        acquisitions: session.path().len(),
        path: session
            .path()
            .iter()
            .enumerate()
            .map(|(i, o)| TraceStep {
                attribute: attribute_name(universe, o.attribute),
                value: value_name(universe, o.attribute, o.value),
                entropy_after: history.get(i + 1).map(|b| b.value()),
            })
            .collect(),
        unavailable: session
            .unavailable()
            .iter()
            .map(|&a| attribute_name(universe, a))
            .collect(),
        entropy_history: history.iter().map(|b| b.value()).collect(),
        candidates: count,
        identified: (session.status() == Status::Identified).then(|| {
            universe
                .object_id(session.candidates().iter().next().expect("one candidate"))
                .to_string()
        }),
        survivors: candidate_ids(universe, session.candidates().iter(), count),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run(args: &TraceArgs, format: Format) -> Result<(), CliError> {
    let universe = Arc::new(load_universe(&args.dataset)?);
    let known = parse_known(&universe, &args.known)?;
    let options = TraceOptions {
        policy: TracePolicy {
            stop_on_zero_information: !args.literal,
        },
        ..Default::default()
    };
    let seed = match args.strategy {
        StrategyArg::Random => {
            let seed = args.seed.unwrap_or(crate::DEFAULT_SEED);
            eprintln!("seed: {seed}");
            Some(seed)
        }
        StrategyArg::Titf => None,
    };
    let report = if args.interactive {
        let stdin = io::stdin();
        interactive(
            universe,
            known,
            options.policy,
            seed,
            &mut stdin.lock(),
            &mut io::stderr(),
        )?
    } else {
        let object = args.object.as_deref().expect("clap requires --object");
        let target = object_index(&universe, object)?;
        let result = match seed {
            Some(seed) => run_random_baseline(&universe, target, known, seed, &options)?,
            None => run_titf(&universe, target, known, &options)?,
        };
        report_from_result(&universe, object, seed, result)
    };
    emit(format, &report, &mut io::stdout().lock())
}

enum Reply {
    Quit,
    Unavailable(usize),
    Observe(String, String),
}

fn parse_reply(universe: &Universe, suggested: usize, line: &str) -> Option<Reply> {
    let line = line.trim();
    match line {
        "" => None,
        "q" | "quit" => Some(Reply::Quit),
        "?" => Some(Reply::Unavailable(suggested)),
        _ => Some(match line.split_once('=') {
            Some((a, v)) if v.trim() == "?" => match universe.schema().by_name(a.trim()) {
                Some(attr) => Reply::Unavailable(attr.id),
                None => Reply::Observe(a.trim().to_string(), "?".to_string()),
            },
            Some((a, v)) => Reply::Observe(a.trim().to_string(), v.trim().to_string()),
            None => Reply::Observe(attribute_name(universe, suggested), line.to_string()),
        }),
    }
}

fn show_ranking(session: &Session, suggested: usize, err: &mut impl Write) -> Result<(), CliError> {
    let universe = session.universe();
    let rec = session.recommend_next()?;
    writeln!(
        err,
        "\n{} candidates, entropy {} bits",
        session.candidates().len(),
        session
            .entropy()
            .map_or_else(|| "na".into(), |b: Bits| fmt_bits(b.value()))
    )?;
    for (i, r) in rec.ranking.iter().take(SHOWN_RANKS).enumerate() {
        let mut outcomes = session.whatif(r.attribute)?;
        outcomes.sort_by(|a, b| b.count.cmp(&a.count).then(a.value.cmp(&b.value)));
        let preview = outcomes
            .iter()
            .map(|w| format!("{}:{}", value_name(universe, r.attribute, w.value), w.count))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            err,
            "  {}. {:<16} {} bits  [{preview}]",
            i + 1,
            attribute_name(universe, r.attribute),
            fmt_bits(r.bits.value())
        )?;
    }
    write!(
        err,
        "value of {} (`attribute=value` for another, `?` if unavailable, `q` to stop): ",
        attribute_name(universe, suggested)
    )?;
    err.flush()?;
    Ok(())
}

/// Runs a session whose observations come from `input`, one line per
/// acquisition, with prompts on `err`.
pub fn interactive(
    universe: Arc<Universe>,
    known: ObservationSet,
    policy: TracePolicy,
    seed: Option<u64>,
    input: &mut impl BufRead,
    err: &mut impl Write,
) -> Result<TraceReport, CliError> {
    let start = Instant::now();
    let mut session = Session::with_policy(universe.clone(), known, policy)?;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let strategy = if seed.is_some() {
        Strategy::Random
    } else {
        Strategy::Titf
    };
    let mut line = String::new();
    'acquire: while session.status() == Status::Active {
        let suggested = match session.recommend_next() {
            Ok(rec) => match rng.as_mut() {
                Some(rng) => *session
                    .remaining()
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .unwrap_or(&rec.chosen),
                None => rec.chosen,
            },
            Err(TraceError::Exhausted) => break,
            Err(e) => return Err(e.into()),
        };
        loop {
            show_ranking(&session, suggested, err)?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                writeln!(err)?;
                break 'acquire;
            }
            let outcome = match parse_reply(&universe, suggested, &line) {
                None => continue,
                Some(Reply::Quit) => break 'acquire,
                Some(Reply::Unavailable(attr)) => {
                    session.mark_unavailable(attr).map_err(CliError::from)
                }
                Some(Reply::Observe(a, v)) => universe
                    .observation(&a, &v)
                    .map_err(CliError::from)
                    .and_then(|obs| session.observe(obs).map_err(CliError::from)),
            };
            match outcome {
                Ok(_) => break,
                Err(e) => writeln!(err, "{e}")?,
            }
        }
    }
    writeln!(err, "{}", session.status())?;
    Ok(report_from_session(&session, strategy, seed, start))
}
