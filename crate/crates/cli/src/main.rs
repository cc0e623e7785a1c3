mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use reda::bridge::{apply_keep_mask, decode_r2f, parse_keep_masks, parse_r2f_inputs, r2f_to_score, ReplayPredictor};
use reda::config::PipelineConfig;
use reda::dataset::{build_nr_dataset, build_pretrain_dataset, build_r2f_dataset, Manifest, TokenSequence};
use reda::dbm::{build_accomp_db, reduce_dbm, AccompanimentDB};
use reda::metrics::{
    one_sample_ttest, parse_responses, parse_survey_csv, survey_means, tonal_similarity, SimilarityReport,
};
use reda::postprocess::postprocess;
use reda::score::{
    dequantize, filter_corpus, merge_to_single_channel, quantize, CorpusFile, Role, Score, Track, OUTPUT_PPQ,
};
use reda::skyline::{select_melody_track, skyline_bottom, skyline_top};
use reda::tokenizer::{
    detokenize, detokenize_lossy, parse_token_records, tokenize, vocab_spec, write_token_records, TokenRecord,
};

use io::{collect_midi, load_pieces, piece_id, read_midi, read_text, write_midi_file, write_text, Piece};

#[derive(Parser)]
#[command(name = "reda", version, about = "Orchestra-to-piano reduction toolkit")]
struct Cli {
    /// TOML file with pipeline settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for multi-file commands.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the track-count rules and print `<path>\t<reason>` per rejection.
    Filter(FilterArgs),
    /// Quantize and tokenize MIDI files into token JSON lines.
    Tokenize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Turn token JSON lines back into one MIDI file per record.
    Detokenize {
        input: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
        /// Drop malformed tokens instead of failing.
        #[arg(long)]
        lossy: bool,
    },
    /// Build training datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Extract the top (or bottom) skyline as a single-track MIDI file.
    Skyline {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        bottom: bool,
        /// Only use the selected melody track instead of all tracks.
        #[arg(long)]
        melody_track: bool,
    },
    /// Accompaniment database commands.
    #[command(subcommand)]
    Accompdb(AccompdbCommand),
    /// Reduce an orchestra file to two hands.
    #[command(subcommand)]
    Reduce(ReduceCommand),
    /// Cluster, simplify and transpose a piano score until stable.
    Postprocess(PostprocessArgs),
    /// Evaluation metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Apply model predictions.
    #[command(subcommand)]
    Apply(ApplyCommand),
    /// Reduce, post-process and evaluate in one go.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Args)]
struct FilterArgs {
    /// Directory or file of piano MIDI.
    #[arg(long)]
    piano: Vec<PathBuf>,
    /// Directory or file of orchestra MIDI.
    #[arg(long)]
    orchestra: Vec<PathBuf>,
    /// Write the rejection report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Masked-token pre-training windows.
    Pretrain {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: DatasetArgs,
        #[arg(long)]
        mask_prob: Option<f64>,
    },
    /// Orchestra windows with keep labels from paired piano files (matched by file name).
    Nr {
        #[arg(long)]
        orchestra: PathBuf,
        #[arg(long)]
        piano: PathBuf,
        #[command(flatten)]
        common: DatasetArgs,
    },
    /// Melody+bass to full-piano pairs.
    R2f {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: DatasetArgs,
    },
}

#[derive(Args)]
struct DatasetArgs {
    /// Output directory for the JSON lines and manifest.json.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum AccompdbCommand {
    /// Mine left-hand bars from hand-separated piano files.
    Build {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum ReduceCommand {
    /// Melody skyline plus database accompaniment.
    Dbm {
        input: PathBuf,
        #[arg(long)]
        accomp_db: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct PostprocessArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    tuning: PostprocessTuning,
}

#[derive(Args, Clone, Default)]
struct PostprocessTuning {
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    far_threshold: Option<u8>,
    #[arg(long)]
    kde_bandwidth: Option<f64>,
    #[arg(long)]
    kde_decay: Option<f64>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Windowed pitch-class similarity between two MIDI files.
    Similarity {
        original: PathBuf,
        reduced: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// One-sample t-test over 0/1 responses, one per line.
    Ttest {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        null_mean: f64,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Mean rating per criterion.
    Survey {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum ApplyCommand {
    /// Keep the orchestra notes whose predicted keep probability reaches the cutoff.
    Nr(ApplyNrArgs),
    /// Replay generated reduced-to-full tokens into a score.
    R2f(ApplyR2fArgs),
}

#[derive(Args)]
struct ApplyNrArgs {
    input: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    cutoff: Option<f64>,
    /// Piece id used when the windows were built; defaults to the file stem.
    #[arg(long)]
    id: Option<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ApplyR2fArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum PipelineCommand {
    Dbm {
        input: PathBuf,
        #[arg(long)]
        accomp_db: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        tuning: PostprocessTuning,
        #[arg(long)]
        json: bool,
    },
    Nr {
        #[command(flatten)]
        apply: ApplyNrArgs,
        #[command(flatten)]
        tuning: PostprocessTuning,
        #[arg(long)]
        json: bool,
    },
    R2f {
        #[command(flatten)]
        apply: ApplyR2fArgs,
        /// Score to compare the result against.
        #[arg(long)]
        original: Option<PathBuf>,
        #[command(flatten)]
        tuning: PostprocessTuning,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("starting worker pool")?;
    }
    let config = match &cli.config {
        Some(path) => PipelineConfig::from_toml_str(&read_text(path)?).with_context(|| path.display().to_string())?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Filter(args) => filter(args),
        Command::Tokenize { inputs, output } => tokenize_files(&inputs, &output),
        Command::Detokenize { input, output, lossy } => detokenize_file(&input, &output, lossy),
        Command::Dataset(cmd) => dataset(cmd, &config),
        Command::Skyline {
            input,
            output,
            bottom,
            melody_track,
        } => skyline(&input, &output, bottom, melody_track, &config),
        Command::Accompdb(AccompdbCommand::Build { input, output }) => accompdb_build(&input, &output),
        Command::Reduce(ReduceCommand::Dbm {
            input,
            accomp_db,
            output,
        }) => {
            let reduced = reduce_file(&input, &accomp_db, &config)?;
            write_midi_file(&output, &reduced)
        }
        Command::Postprocess(args) => {
            let score = read_midi(&args.input)?;
            let out = run_postprocess(&score, &args.tuning, config)?;
            write_midi_file(&args.output, &out)
        }
        Command::Eval(cmd) => eval(cmd, &config),
        Command::Apply(ApplyCommand::Nr(args)) => {
            let (_, reduced) = apply_nr(&args, &config)?;
            write_midi_file(&args.output, &reduced)
        }
        Command::Apply(ApplyCommand::R2f(args)) => {
            let reduced = apply_r2f(&args, &config)?;
            write_midi_file(&args.output, &reduced)
        }
        Command::Pipeline(cmd) => pipeline(cmd, config),
    }
}

fn filter(args: FilterArgs) -> Result<()> {
    if args.piano.is_empty() && args.orchestra.is_empty() {
        bail!("give at least one --piano or --orchestra input");
    }
    let mut paths = Vec::new();
    for (role, inputs) in [(Role::Piano, &args.piano), (Role::Orchestra, &args.orchestra)] {
        for input in inputs {
            paths.extend(collect_midi(input)?.into_iter().map(|p| (role, p)));
        }
    }
    let parsed: Vec<(Role, PathBuf, Result<Score>)> = paths
        .into_par_iter()
        .map(|(role, path)| {
            let score = read_midi(&path);
            (role, path, score)
        })
        .collect();
    let mut report = String::new();
    let mut files = Vec::new();
    for (role, path, score) in parsed {
        match score {
            Ok(score) => files.push(CorpusFile {
                path: path.display().to_string(),
                role,
                score,
            }),
            Err(e) => report.push_str(&format!("{}\tunreadable: {e:#}\n", path.display())),
        }
    }
    let outcome = filter_corpus(files);
    report.push_str(&outcome.report());
    for file in &outcome.kept {
        eprintln!("kept\t{}", file.path);
    }
    match args.report {
        Some(path) => write_text(&path, &report)?,
        None => print!("{report}"),
    }
    Ok(())
}

fn tokenize_files(inputs: &[PathBuf], output: &Path) -> Result<()> {
    let pieces = load_pieces(inputs)?;
    let mut records = Vec::new();
    for piece in &pieces {
        match quantize(&merge_to_single_channel(&piece.score)) {
            Ok(q) => records.push(TokenRecord {
                id: piece.id.clone(),
                tokens: tokenize(&q).into_inner(),
            }),
            Err(e) => eprintln!("skipped\t{}\t{e}", piece.path.display()),
        }
    }
    write_text(output, &write_token_records(&records))
}

fn detokenize_file(input: &Path, output: &Path, lossy: bool) -> Result<()> {
    let records = parse_token_records(&read_text(input)?).with_context(|| input.display().to_string())?;
    std::fs::create_dir_all(output).with_context(|| output.display().to_string())?;
    for record in records {
        let q = if lossy {
            let (q, dropped) = detokenize_lossy(&record.tokens);
            if dropped > 0 {
                eprintln!("{}: dropped {dropped} malformed tokens", record.id);
            }
            q
        } else {
            detokenize(&record.tokens).with_context(|| record.id.clone())?
        };
        write_midi_file(&output.join(format!("{}.mid", record.id)), &dequantize(&q, OUTPUT_PPQ))?;
    }
    Ok(())
}

fn require_seed(flag: Option<u64>, config: &PipelineConfig) -> Result<u64> {
    flag.or(config.seed)
        .context("a seed is required for dataset preparation (--seed or `seed` in the config)")
}

fn write_dataset(dir: &Path, name: &str, lines: &[String], manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_text(&dir.join(name), &body)?;
    let manifest = serde_json::to_string_pretty(manifest)? + "\n";
    write_text(&dir.join("manifest.json"), &manifest)
}

/// Splits pieces into those that quantize and those that do not.
fn quantizable(pieces: Vec<Piece>) -> (Vec<Piece>, usize) {
    let (ok, bad): (Vec<Piece>, Vec<Piece>) = pieces
        .into_iter()
        .partition(|p| quantize(&merge_to_single_channel(&p.score)).is_ok());
    for piece in &bad {
        eprintln!("skipped\t{}\tnot in 4/4", piece.path.display());
    }
    (ok, bad.len())
}

fn dataset(cmd: DatasetCommand, config: &PipelineConfig) -> Result<()> {
    let vocab = vocab_spec().fingerprint();
    match cmd {
        DatasetCommand::Pretrain {
            inputs,
            common,
            mask_prob,
        } => {
            let seed = require_seed(common.seed, config)?;
            let mask_prob = mask_prob.unwrap_or(config.mask_prob);
            let (pieces, skipped) = quantizable(load_pieces(&inputs)?);
            let streams: Vec<(String, Vec<_>)> = pieces
                .par_iter()
                .map(|p| {
                    let q = quantize(&merge_to_single_channel(&p.score)).expect("checked above");
                    (p.id.clone(), tokenize(&q).into_inner())
                })
                .collect();
            let records = build_pretrain_dataset(
                streams.iter().map(|(id, t)| (id.as_str(), t.as_slice())),
                mask_prob,
                seed,
            )?;
            let lines: Vec<String> = records.iter().map(|r| r.to_json_line()).collect();
            let manifest = Manifest {
                kind: "pretrain".into(),
                seed: Some(seed),
                mask_prob: Some(mask_prob),
                pieces: pieces.len(),
                records: lines.len(),
                discarded: BTreeMap::from([("not_common_time".into(), skipped)]),
                vocab,
            };
            write_dataset(&common.output, "pretrain.jsonl", &lines, &manifest)
        }
        DatasetCommand::Nr {
            orchestra,
            piano,
            common,
        } => {
            let seed = require_seed(common.seed, config)?;
            let (orchestras, skipped) = quantizable(load_pieces(&[orchestra])?);
            let pianos: BTreeMap<String, Piece> =
                load_pieces(&[piano])?.into_iter().map(|p| (p.id.clone(), p)).collect();
            let mut unpaired = 0;
            let mut pairs = Vec::new();
            for o in &orchestras {
                match pianos.get(&o.id) {
                    Some(p) => pairs.push((o.id.as_str(), &o.score, &p.score)),
                    None => {
                        eprintln!("skipped\t{}\tno piano file with the same name", o.path.display());
                        unpaired += 1;
                    }
                }
            }
            let records = build_nr_dataset(pairs.iter().copied())?;
            let lines: Vec<String> = records.iter().map(|r| r.to_json_line()).collect();
            let manifest = Manifest {
                kind: "nr".into(),
                seed: Some(seed),
                mask_prob: None,
                pieces: pairs.len(),
                records: lines.len(),
                discarded: BTreeMap::from([("not_common_time".into(), skipped), ("unpaired".into(), unpaired)]),
                vocab,
            };
            write_dataset(&common.output, "nr.jsonl", &lines, &manifest)
        }
        DatasetCommand::R2f { inputs, common } => {
            let seed = require_seed(common.seed, config)?;
            let (pieces, skipped) = quantizable(load_pieces(&inputs)?);
            let data = build_r2f_dataset(pieces.iter().map(|p| (p.id.as_str(), &p.score)), config.r2f)?;
            let lines: Vec<String> = data.records.iter().map(|r| r.to_json_line()).collect();
            let manifest = Manifest {
                kind: "r2f".into(),
                seed: Some(seed),
                mask_prob: None,
                pieces: pieces.len(),
                records: lines.len(),
                discarded: BTreeMap::from([
                    ("not_common_time".into(), skipped),
                    ("long_output".into(), data.discarded_long_output),
                    ("oversized_bar".into(), data.discarded_oversized_bar),
                    ("empty_input".into(), data.skipped_empty),
                ]),
                vocab,
            };
            write_dataset(&common.output, "r2f.jsonl", &lines, &manifest)
        }
    }
}

fn skyline(input: &Path, output: &Path, bottom: bool, melody_track: bool, config: &PipelineConfig) -> Result<()> {
    let score = read_midi(input)?;
    let notes: Vec<_> = if melody_track {
        let index = select_melody_track(&score, &config.melody)?;
        score.tracks()[index].notes.clone()
    } else {
        merge_to_single_channel(&score).notes().copied().collect()
    };
    let line = if bottom {
        skyline_bottom(&notes)
    } else {
        skyline_top(&notes)
    };
    let out = Score::from_tracks(score.ppq(), vec![Track::named("Skyline", line.into_notes())])
        .with_time_signatures(score.time_signatures().to_vec());
    write_midi_file(output, &out)
}

fn accompdb_build(input: &Path, output: &Path) -> Result<()> {
    let pieces = load_pieces(&[input.to_path_buf()])?;
    let sources: Vec<String> = pieces.iter().map(|p| p.id.clone()).collect();
    let (db, skipped) = build_accomp_db(sources.iter().map(String::as_str).zip(pieces.iter().map(|p| &p.score)));
    for skip in &skipped {
        eprintln!("skipped\t{}\t{}", skip.source, skip.reason);
    }
    eprintln!("{} entries from {} files", db.len(), pieces.len() - skipped.len());
    write_text(output, &(db.to_json() + "\n"))
}

fn reduce_file(input: &Path, db_path: &Path, config: &PipelineConfig) -> Result<Score> {
    let db = AccompanimentDB::from_json(&read_text(db_path)?).with_context(|| db_path.display().to_string())?;
    let orchestra = read_midi(input)?;
    Ok(reduce_dbm(&orchestra, &db, &config.dbm())?)
}

fn run_postprocess(score: &Score, tuning: &PostprocessTuning, mut config: PipelineConfig) -> Result<Score> {
    if let Some(v) = tuning.max_iters {
        config.max_iters = v;
    }
    if let Some(v) = tuning.far_threshold {
        config.far_threshold = v;
    }
    if let Some(v) = tuning.kde_bandwidth {
        config.kde.initial_bandwidth = v;
    }
    if let Some(v) = tuning.kde_decay {
        config.kde.decay = v;
    }
    config.validate()?;
    let outcome = postprocess(score, &config.postprocess());
    print!("{}", outcome.report());
    if !outcome.fixpoint {
        eprintln!(
            "stopped after {} passes without reaching a fixpoint",
            outcome.iterations()
        );
    }
    Ok(outcome.score)
}

fn print_similarity(report: &SimilarityReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string(report)?);
    } else {
        println!(
            "similarity {:.4} over {} windows ({} silent skipped)",
            report.mean,
            report.windows.len(),
            report.skipped
        );
    }
    Ok(())
}

fn eval(cmd: EvalCommand, config: &PipelineConfig) -> Result<()> {
    match cmd {
        EvalCommand::Similarity {
            original,
            reduced,
            json,
        } => {
            let report = tonal_similarity(&read_midi(&original)?, &read_midi(&reduced)?)?;
            print_similarity(&report, json)
        }
        EvalCommand::Ttest {
            responses,
            null_mean,
            threshold,
            json,
        } => {
            let samples = parse_responses(&read_text(&responses)?).with_context(|| responses.display().to_string())?;
            let result = one_sample_ttest(&samples, null_mean, threshold.unwrap_or(config.ttest_threshold))?;
            if json {
                println!("{}", serde_json::to_string(&result)?);
            } else {
                println!(
                    "n={} mean={:.4} sd={:.4} t={:.4} df={} threshold={} {}",
                    result.n,
                    result.mean,
                    result.sd,
                    result.t_value,
                    result.df,
                    result.threshold,
                    if result.rejected { "rejected" } else { "not rejected" }
                );
            }
            Ok(())
        }
        EvalCommand::Survey { csv, json } => {
            let table = parse_survey_csv(&read_text(&csv)?).with_context(|| csv.display().to_string())?;
            let means = survey_means(&table.rows)?;
            if json {
                let map: BTreeMap<&str, f64> = table
                    .criteria
                    .iter()
                    .map(String::as_str)
                    .zip(means.iter().copied())
                    .collect();
                println!("{}", serde_json::to_string(&map)?);
            } else {
                for (name, mean) in table.criteria.iter().zip(&means) {
                    println!("{name}\t{mean:.3}");
                }
            }
            Ok(())
        }
    }
}

fn apply_nr(args: &ApplyNrArgs, config: &PipelineConfig) -> Result<(Score, Score)> {
    let orchestra = read_midi(&args.input)?;
    let masks =
        parse_keep_masks(&read_text(&args.predictions)?).with_context(|| args.predictions.display().to_string())?;
    let id = match &args.id {
        Some(id) => id.clone(),
        None => piece_id(&args.input)?,
    };
    let kept = apply_keep_mask(&orchestra, &id, &masks, args.cutoff.unwrap_or(config.cutoff))?;
    Ok((orchestra, dequantize(&kept, OUTPUT_PPQ)))
}

fn apply_r2f(args: &ApplyR2fArgs, config: &PipelineConfig) -> Result<Score> {
    let inputs = parse_r2f_inputs(&read_text(&args.input)?).with_context(|| args.input.display().to_string())?;
    let predictions =
        parse_token_records(&read_text(&args.predictions)?).with_context(|| args.predictions.display().to_string())?;
    let mut by_id = BTreeMap::new();
    for record in predictions {
        let id = record.id.clone();
        if by_id.insert(id.clone(), record).is_some() {
            bail!("prediction {id} appears twice");
        }
    }
    let streams = inputs
        .par_iter()
        .map(|input| {
            let prediction = by_id
                .get(&input.id)
                .with_context(|| format!("no prediction for input {}", input.id))?;
            let sequence = TokenSequence::from_content(&input.tokens)?;
            let predictor = ReplayPredictor {
                tokens: prediction.tokens.clone(),
            };
            decode_r2f(&sequence, &predictor, &config.r2f).with_context(|| input.id.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let tokens: Vec<_> = streams.into_iter().flat_map(|s| s.into_inner()).collect();
    let (score, dropped) = r2f_to_score(&tokens);
    if dropped > 0 {
        eprintln!("dropped {dropped} malformed tokens");
    }
    Ok(score)
}

fn pipeline(cmd: PipelineCommand, config: PipelineConfig) -> Result<()> {
    let (original, reduced, output, tuning, json) = match cmd {
        PipelineCommand::Dbm {
            input,
            accomp_db,
            output,
            tuning,
            json,
        } => {
            let reduced = reduce_file(&input, &accomp_db, &config)?;
            (Some(read_midi(&input)?), reduced, output, tuning, json)
        }
        PipelineCommand::Nr { apply, tuning, json } => {
            let (orchestra, reduced) = apply_nr(&apply, &config)?;
            (Some(orchestra), reduced, apply.output, tuning, json)
        }
        PipelineCommand::R2f {
            apply,
            original,
            tuning,
            json,
        } => {
            let reduced = apply_r2f(&apply, &config)?;
            let original = original.as_deref().map(read_midi).transpose()?;
            (original, reduced, apply.output, tuning, json)
        }
    };
    let out = run_postprocess(&reduced, &tuning, config)?;
    write_midi_file(&output, &out)?;
    if let Some(original) = original {
        print_similarity(&tonal_similarity(&original, &out)?, json)?;
    }
    Ok(())
}
