use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use serde_json::json;

use charsurp::codec::{train_bpe, write_merges, write_vocab, Codec};
use charsurp::ingestion::{self, write_surprisal, SurprisalRecord};
use charsurp::lm::{perplexity, ExternalLm, ExternalLmConfig, NGramLm, TokenLm, ENDPOINT_ENV};
use charsurp::marginal::oracle::{beam_prefix_logprob, oracle_check, OracleConfig, ViolationKind};
use charsurp::marginal::{surprisal_corpus, CharLm, SurprisalCell};
use charsurp::regression::{run_regression, CvConfig, ReportConfig};
use charsurp::text::{focal_area, segment_rois, Convention, FocalSpec, Stimulus};

use crate::args::{BpeTrainArgs, LmTrainArgs, ModelArgs, OracleArgs, RegressArgs, SegmentArgs, SurprisalArgs};
use crate::output::OutDir;

/// Failures that did not stop the run.
pub type Partial = Vec<String>;

pub const FOCAL_TABLE: &str = "focal_table.csv";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const MERGES_FILE: &str = "merges.txt";
pub const LM_FILE: &str = "lm.json";
pub const LM_SUMMARY: &str = "lm_summary.json";
pub const SURPRISAL_FILE: &str = "surprisal.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const PLOT_CSV: &str = "plot.csv";
pub const ORACLE_FILE: &str = "oracle.json";

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn load_stimuli(path: &Path) -> Result<Vec<Stimulus>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(ingestion::read_stimuli(&path.display().to_string(), file)?)
}

/// Non-empty lines of a text file, without their line terminators.
fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
}

fn load_codec(vocab: &Path, merges: &Path) -> Result<Codec> {
    Codec::load(open(vocab)?, open(merges)?)
        .with_context(|| format!("loading codec from {} and {}", vocab.display(), merges.display()))
}

fn load_model(model: &ModelArgs) -> Result<(Codec, Box<dyn TokenLm>)> {
    let codec = load_codec(&model.vocab, &model.merges)?;
    let lm: Box<dyn TokenLm> = if model.lm == "external" {
        let cfg = ExternalLmConfig::from_env().ok_or_else(|| anyhow!("--lm external needs {ENDPOINT_ENV} set to host:port"))?;
        info!("using external model at {}", cfg.endpoint);
        Box::new(ExternalLm::new(cfg, codec.vocab_size()))
    } else {
        let path = Path::new(&model.lm);
        Box::new(NGramLm::load(open(path)?).with_context(|| format!("loading model {}", path.display()))?)
    };
    Ok((codec, lm))
}

pub fn segment(args: &SegmentArgs) -> Result<Partial> {
    let stimuli = match (&args.text, &args.stimuli) {
        (Some(text), _) => vec![Stimulus::new("stimulus", text.as_str())?],
        (None, Some(path)) => load_stimuli(path)?,
        (None, None) => bail!("one of --text or --stimuli is required"),
    };
    let conventions = args.convention.conventions();
    let mut rows = Vec::new();
    for stimulus in &stimuli {
        for &conv in &conventions {
            let rois = segment_rois(stimulus, conv).with_context(|| format!("segmenting `{}`", stimulus.id()))?;
            if rois.len() < 2 {
                warn!("stimulus `{}` has a single region; the first region is skipped, nothing to tabulate", stimulus.id());
            }
            for &spec in &args.specs {
                for k in 2..=rois.len() {
                    let area = focal_area(&rois, k, spec)?;
                    let (status, text) = match area {
                        Some(a) => ("ok", stimulus.slice(a.interval)),
                        None => ("missing", String::new()),
                    };
                    rows.push([stimulus.id().to_string(), conv.to_string(), spec.to_string(), k.to_string(), status.into(), text]);
                }
            }
        }
    }
    let out = OutDir::create(&args.out)?;
    let path = out.write(FOCAL_TABLE, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["stimulus_id", "convention", "focal_spec", "roi_index", "status", "yield"])?;
        for r in &rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    println!("{} focal yields written to {}", rows.len(), path.display());
    Ok(Vec::new())
}

pub fn bpe_train(args: &BpeTrainArgs) -> Result<Partial> {
    let corpus = read_lines(&args.corpus)?;
    let codec = train_bpe(&corpus, args.vocab_size).context("training BPE")?;
    let out = OutDir::create(&args.out)?;
    out.write(VOCAB_FILE, |w| Ok(write_vocab(&codec, w)?))?;
    out.write(MERGES_FILE, |w| Ok(write_merges(&codec, w)?))?;
    println!("vocabulary size: {} ({} merges)", codec.vocab_size(), codec.merges().len());
    Ok(Vec::new())
}

fn encode_lines(codec: &Codec, lines: &[String], source: &Path) -> Result<Vec<Vec<u32>>> {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| codec.encode(l).with_context(|| format!("{} line {}", source.display(), i + 1)))
        .collect()
}

pub fn lm_train(args: &LmTrainArgs) -> Result<Partial> {
    let codec = load_codec(&args.vocab, &args.merges)?;
    let lines = read_lines(&args.corpus)?;
    let (train, heldout): (Vec<String>, Vec<String>) = match &args.heldout {
        Some(path) => (lines, read_lines(path)?),
        None => {
            let (h, t): (Vec<_>, Vec<_>) = lines.into_iter().enumerate().partition(|(i, _)| i % 10 == 9);
            (t.into_iter().map(|p| p.1).collect(), h.into_iter().map(|p| p.1).collect())
        }
    };
    let train_ids = encode_lines(&codec, &train, &args.corpus)?;
    let lm = NGramLm::train(&train_ids, codec.vocab_size(), args.order, args.smoothing)?;
    let heldout_ids = encode_lines(&codec, &heldout, args.heldout.as_deref().unwrap_or(&args.corpus))?;
    let ppl = if heldout_ids.is_empty() {
        warn!("no held-out strings; perplexity not computed");
        None
    } else {
        Some(perplexity(&lm, &heldout_ids)?)
    };
    let out = OutDir::create(&args.out)?;
    out.write(LM_FILE, |w| Ok(lm.save(w)?))?;
    out.write_json(
        LM_SUMMARY,
        &json!({
            "vocab_size": codec.vocab_size(),
            "order": args.order,
            "smoothing": args.smoothing,
            "training_strings": train_ids.len(),
            "heldout_strings": heldout_ids.len(),
            "heldout_perplexity": ppl,
        }),
    )?;
    println!("vocabulary size: {}", codec.vocab_size());
    match ppl {
        Some(p) => println!("held-out perplexity: {p:.4} over {} strings", heldout_ids.len()),
        None => println!("held-out perplexity: n/a"),
    }
    Ok(Vec::new())
}

pub fn surprisal(args: &SurprisalArgs) -> Result<Partial> {
    let method = args.method().map_err(|e| anyhow!(e))?;
    let stimuli = load_stimuli(&args.stimuli)?;
    let (codec, lm) = load_model(&args.model)?;
    let charlm = CharLm::new(&codec, lm.as_ref(), method)?.with_log_base(args.log_base.value());
    let conventions = args.convention.conventions();
    info!("scoring {} stimuli with {method}", stimuli.len());
    let tables = surprisal_corpus(&charlm, &stimuli, &conventions, &args.specs, args.append_eos)?;

    let mut errors = Vec::new();
    let mut records: Vec<SurprisalRecord> = Vec::new();
    for t in &tables {
        if let (true, Some(SurprisalCell::Error(e))) = (t.specs.contains(&FocalSpec::FullRoi), t.roi_surprisal.first()) {
            errors.push(format!("{} region 1 {} full: {e}", t.stimulus().id(), t.convention()));
        }
        for row in &t.rows {
            for (spec, cell) in t.specs.iter().zip(&row.cells) {
                if let SurprisalCell::Error(e) = cell {
                    errors.push(format!("{} region {} {} {spec}: {e}", t.stimulus().id(), row.roi_index, t.convention()));
                }
            }
        }
        records.extend(t.records());
    }
    let out = OutDir::create(&args.out)?;
    let path = out.write(SURPRISAL_FILE, |w| Ok(write_surprisal(w, &records)?))?;
    let count = |s: &str| records.iter().filter(|r| r.status == s).count();
    println!(
        "{} rows written to {}: {} ok, {} missing, {} error",
        records.len(),
        path.display(),
        count("ok"),
        count("missing"),
        count("error")
    );
    Ok(errors)
}

pub fn regress(args: &RegressArgs) -> Result<Partial> {
    let records = ingestion::load_surprisal(&args.surprisal)?;
    let conventions: Vec<Convention> = match args.convention {
        Some(c) => c.conventions(),
        None => records.iter().map(|r| r.convention).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let specs = match &args.specs {
        Some(s) => s.clone(),
        None => records.iter().map(|r| r.focal_spec).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    if conventions.is_empty() || specs.is_empty() {
        bail!("{} has no surprisal rows", args.surprisal.display());
    }
    let bundle = ingestion::load_dataset(&args.stimuli, &args.measurements, &conventions)?;
    let freq = ingestion::load_frequencies(&args.frequencies)?;
    let inputs = BTreeMap::from([
        ("surprisal".to_string(), args.surprisal.display().to_string()),
        ("stimuli".to_string(), args.stimuli.display().to_string()),
        ("measurements".to_string(), args.measurements.display().to_string()),
        ("frequencies".to_string(), args.frequencies.display().to_string()),
    ]);
    let config = ReportConfig {
        cv: CvConfig {
            folds: args.folds,
            seeds: args.seeds,
            permutations: args.permutations,
            seed: args.seed,
            variance: args.variance.into(),
            ..CvConfig::default()
        },
        measures: args.measures.clone(),
        conventions,
        specs,
        inputs,
    };
    let report = run_regression(&bundle, &records, &freq, config)?;

    let out = OutDir::create(&args.out)?;
    out.write_json(REPORT_JSON, &report.to_json())?;
    out.write(REPORT_CSV, |w| Ok(report.write_csv(w)?))?;
    out.write(PLOT_CSV, |w| Ok(report.write_plot_csv(w)?))?;

    let mut stdout = std::io::stdout().lock();
    for r in &report.results {
        match (r.delta_r2, r.p_value) {
            (Some(s), Some(p)) => writeln!(
                stdout,
                "{:<22} {:<8} {:<14} rank {:>2}  ΔR² {:+.5} [{:+.5}, {:+.5}]  p {:.4}",
                r.measure.name(),
                r.convention.name(),
                r.spec.to_string(),
                r.rank.unwrap_or(0),
                s.mean,
                s.ci_low,
                s.ci_high,
                p
            )?,
            _ => writeln!(stdout, "{:<22} {:<8} {:<14} failed", r.measure.name(), r.convention.name(), r.spec.to_string())?,
        }
    }
    writeln!(stdout, "report written to {}", out.path(REPORT_JSON).display())?;
    Ok(report.errors().map(str::to_string).collect())
}

fn kind_name(k: ViolationKind) -> &'static str {
    match k {
        ViolationKind::Unbounded => "unbounded_differs_from_exact",
        ViolationKind::ExceedsExact => "exceeds_exact",
        ViolationKind::NotMonotone => "not_monotone",
    }
}

pub fn oracle(args: &OracleArgs) -> Result<Partial> {
    let (codec, lm) = load_model(&args.model)?;
    if args.trials == 0 {
        warn!("zero trials: the check passes vacuously");
    }
    let cfg = OracleConfig { trials: args.trials, max_len: args.max_len, max_width: args.max_width, seed: args.seed, ..OracleConfig::default() };
    let offset = args.test_beam_offset;
    let beam = move |c: &Codec, l: &(dyn TokenLm + 'static), text: &str, width: usize| beam_prefix_logprob(c, l, text, width).map(|v| v + offset);
    let report = oracle_check(&codec, lm.as_ref(), &cfg, &beam)?;

    let violations: Vec<_> = report
        .violations
        .iter()
        .map(|v| json!({ "query": v.query, "kind": kind_name(v.kind), "detail": v.detail }))
        .collect();
    let out = OutDir::create(&args.out)?;
    out.write_json(
        ORACLE_FILE,
        &json!({
            "trials": report.trials,
            "skipped": report.skipped,
            "max_len": args.max_len,
            "max_width": args.max_width,
            "seed": args.seed,
            "passed": report.passed(),
            "violations": violations,
        }),
    )?;
    if report.skipped > 0 {
        warn!("{} queries skipped: exact enumeration exceeded its state cap", report.skipped);
    }
    let errors: Vec<String> =
        report.violations.iter().map(|v| format!("query {:?}: {}: {}", v.query, kind_name(v.kind), v.detail)).collect();
    for e in &errors {
        println!("violation: {e}");
    }
    println!(
        "{}: {} trials, {} skipped, {} violations",
        if report.passed() { "pass" } else { "FAIL" },
        report.trials,
        report.skipped,
        report.violations.len()
    );
    Ok(errors)
}
