use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use idtrace_bench::generator::DEFAULT_CARDINALITIES;
use idtrace_bench::runner::dataset_digest;
use idtrace_bench::{generate_universe, GeneratorConfig, Skew};
use idtrace_core::{category_entropy, identity_entropy, Universe};
use serde::Serialize;

use super::{load_universe, parse_known};
use crate::error::CliError;
use crate::output::{emit, opt_bits, text_table, Format, Render};

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub path: String,
    pub n_objects: usize,
    pub n_attributes: usize,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Render for DatasetSummary {
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["path", "n_objects", "n_attributes", "sha256", "seed"]
            .map(String::from)
            .to_vec();
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        let row = vec![
            self.path.clone(),
            self.n_objects.to_string(),
            self.n_attributes.to_string(),
            self.sha256.clone(),
            seed,
        ];
        (header, vec![row])
    }

    fn text(&self) -> String {
        format!(
            "{}: {} objects, {} attributes, sha256 {}\n",
            self.path, self.n_objects, self.n_attributes, self.sha256
        )
    }
}

pub fn ingest(csv: &Path, out: &Path, format: Format) -> Result<(), CliError> {
    let universe = Universe::load_csv(csv).map_err(|e| CliError::from(e).context(csv.display()))?;
    let mut w =
        BufWriter::new(File::create(out).map_err(|e| CliError::from(e).context(out.display()))?);
    universe.write_index(&mut w)?;
    w.flush()?;
    let summary = DatasetSummary {
        path: out.display().to_string(),
        n_objects: universe.n_objects(),
        n_attributes: universe.n_attributes(),
        sha256: dataset_digest(&universe),
        seed: None,
    };
    emit(format, &summary, &mut io::stdout().lock())
}

#[derive(Debug, Serialize)]
pub struct AttributeStats {
    pub name: String,
    /// Distinct values declared by the table.
    pub cardinality: usize,
    /// Candidates with no value.
    pub missing: usize,
    /// Entropy of the value distribution over the candidates; absent when
    /// every candidate lacks a value.
    pub entropy: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub n_objects: usize,
    pub n_attributes: usize,
    /// Objects consistent with the known values.
    pub candidates: usize,
    pub identity_entropy: Option<f64>,
    pub attributes: Vec<AttributeStats>,
}

impl Render for StatsReport {
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["attribute", "cardinality", "missing", "entropy"]
            .map(String::from)
            .to_vec();
        let rows = self
            .attributes
            .iter()
            .map(|a| {
                vec![
                    a.name.clone(),
                    a.cardinality.to_string(),
                    a.missing.to_string(),
                    opt_bits(a.entropy),
                ]
            })
            .collect();
        (header, rows)
    }

    fn text(&self) -> String {
        let mut out = format!(
            "N = {}  M = {}  candidates = {}  H = {} bits\n\n",
            self.n_objects,
            self.n_attributes,
            self.candidates,
            opt_bits(self.identity_entropy)
        );
        out.push_str(&text_table(
            &["attribute", "k", "missing", "entropy"],
            &self.csv().1,
        ));
        out
    }
}

pub fn stats(
    dataset: &Path,
    attrs: &[String],
    known: &[String],
    format: Format,
) -> Result<(), CliError> {
    let universe = load_universe(dataset)?;
    let known = parse_known(&universe, known)?;
    let cand = universe.filter_all(&universe.all(), known.iter());
    let selected: Vec<usize> = if attrs.is_empty() {
        (0..universe.n_attributes()).collect()
    } else {
        attrs
            .iter()
            .map(|name| {
                universe
                    .schema()
                    .by_name(name)
                    .map(|a| a.id)
                    .ok_or_else(|| CliError::Data(format!("unknown attribute `{name}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let attributes = selected
        .into_iter()
        .map(|a| {
            let attr = universe.schema().attribute(a).expect("attribute in range");
            AttributeStats {
                name: attr.name.clone(),
                cardinality: attr.cardinality(),
                missing: universe.value_counts(&cand, a).missing,
                entropy: category_entropy(&universe, &cand, a)
                    .ok()
                    .map(|b| b.value()),
            }
        })
        .collect();
    let report = StatsReport {
        n_objects: universe.n_objects(),
        n_attributes: universe.n_attributes(),
        candidates: cand.len(),
        identity_entropy: identity_entropy(cand.len()).ok().map(|b| b.value()),
        attributes,
    };
    emit(format, &report, &mut io::stdout().lock())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkewKind {
    Uniform,
    Zipf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 5000)]
    objects: usize,
    /// Number of attributes; cardinalities cycle through `--cardinalities`.
    #[arg(long)]
    attributes: Option<usize>,
    /// Values per attribute.
    #[arg(long, value_delimiter = ',')]
    cardinalities: Vec<usize>,
    #[arg(long, value_enum, default_value = "zipf")]
    skew: SkewKind,
    /// Zipf exponent.
    #[arg(long, default_value_t = 1.1)]
    exponent: f64,
    #[arg(long, default_value_t = crate::DEFAULT_SEED)]
    seed: u64,
    /// Allow repeated rows.
    #[arg(long)]
    allow_duplicates: bool,
    /// Destination file; the CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl GenerateArgs {
    fn config(&self) -> GeneratorConfig {
        let base = if self.cardinalities.is_empty() {
            DEFAULT_CARDINALITIES.to_vec()
        } else {
            self.cardinalities.clone()
        };
        let m = self.attributes.unwrap_or(base.len());
        GeneratorConfig {
            n_objects: self.objects,
            n_attributes: m,
            cardinalities: base.iter().copied().cycle().take(m).collect(),
            skew: match self.skew {
                SkewKind::Uniform => Skew::Uniform,
                SkewKind::Zipf => Skew::Zipf {
                    exponent: self.exponent,
                },
            },
            seed: self.seed,
            unique: !self.allow_duplicates,
        }
    }
}

pub fn generate(args: &GenerateArgs, format: Format) -> Result<(), CliError> {
    let config = args.config();
    if config.n_attributes == 0 {
        return Err(CliError::Usage("need at least one attribute".into()));
    }
    eprintln!("seed: {}", config.seed);
    let universe = generate_universe(&config).map_err(|e| CliError::Data(e.to_string()))?;
    match &args.out {
        Some(path) => {
            universe
                .save_csv(path)
                .map_err(|e| CliError::from(e).context(path.display()))?;
            let summary = DatasetSummary {
                path: path.display().to_string(),
                n_objects: universe.n_objects(),
                n_attributes: universe.n_attributes(),
                sha256: dataset_digest(&universe),
                seed: Some(config.seed),
            };
            emit(format, &summary, &mut io::stdout().lock())
        }
        None => {
            universe.write_csv(io::stdout().lock())?;
            Ok(())
        }
    }
}
