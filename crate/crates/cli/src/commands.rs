use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use dbd_core::anneal::{
    initial_sequence, optimize, optimize_restarts, AnnealConfig, AnnealResult, Cooling, Temperature,
};
use dbd_core::designs::DesignSpec;
use dbd_core::evaluate::monte_carlo;
use dbd_core::population::{compute_phi, ingest, standardize, IngestOptions};
use dbd_core::synthetic::uniform_population;
use dbd_core::Population;
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{BenchArgs, Cli, Command, DataArgs, EvalArgs, OptimizeArgs, SampleArgs};
use crate::error::{CliError, CliResult};
use crate::sequence_file::SequenceFile;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Sample(args) => cmd_sample(&args, &mut io::stdout().lock()),
        Command::Eval(args) => cmd_eval(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

/// Sample size flag: one size, or one per stratum label.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSize {
    Single(usize),
    PerStratum(BTreeMap<i64, usize>),
}

pub fn parse_sample_size(text: &str) -> CliResult<SampleSize> {
    let bad = || {
        CliError::Usage(format!(
            "--n expects an integer or `label:n,...`, got `{text}`"
        ))
    };
    if !text.contains(':') {
        return text
            .trim()
            .parse()
            .map(SampleSize::Single)
            .map_err(|_| bad());
    }
    let mut map = BTreeMap::new();
    for part in text.split(',') {
        let (label, n) = part.split_once(':').ok_or_else(bad)?;
        let label: i64 = label.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if map.insert(label, n).is_some() {
            return Err(CliError::Usage(format!(
                "stratum {label} given twice in --n"
            )));
        }
    }
    Ok(SampleSize::PerStratum(map))
}

pub fn parse_delimiter(text: &str) -> CliResult<u8> {
    match text {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        s => Err(CliError::Usage(format!("unsupported delimiter `{s}`"))),
    }
}

fn parse_auto(flag: &str, text: &str) -> CliResult<Option<f64>> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| CliError::Usage(format!("--{flag} expects a number or `auto`, got `{text}`")))
}

pub fn load_population(data: &DataArgs) -> CliResult<Population> {
    let input = data
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    if data.aux.is_empty() {
        return Err(CliError::Usage("--aux needs at least one column".into()));
    }
    let options = IngestOptions {
        aux_columns: data.aux.clone(),
        target_columns: data.targets.clone(),
        strata_column: data.strata.clone(),
        id_column: data.id.clone(),
        delimiter: parse_delimiter(&data.delimiter)?,
    };
    let pop = ingest(input, &options)?;
    info!(
        "read {} units with {} auxiliaries from {}",
        pop.len(),
        pop.dim(),
        input.display()
    );
    if data.raw {
        Ok(pop)
    } else {
        Ok(standardize(&pop)?)
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_trace(path: &Path, result: &AnnealResult) -> CliResult<()> {
    let mut out = create_file(path)?;
    let io_err = |e| CliError::io(path, e);
    writeln!(out, "iteration,best_expected_energy").map_err(io_err)?;
    for p in &result.trace {
        writeln!(out, "{},{}", p.iteration, p.best).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn anneal_config(args: &OptimizeArgs) -> CliResult<AnnealConfig> {
    let mut cfg = AnnealConfig::default()
        .with_iterations(args.iters)
        .with_seed(args.seed);
    if let Some(t) = parse_auto("t0", &args.t0)? {
        cfg.t0 = Temperature::Fixed(t);
    }
    if let Some(a) = parse_auto("alpha", &args.alpha)? {
        cfg.alpha = Cooling::Fixed(a);
    }
    cfg.report_every = args.report_every;
    cfg.validate()?;
    Ok(cfg)
}

struct Optimized {
    file: SequenceFile,
    result: AnnealResult,
}

fn optimize_one(
    pop: &Population,
    n: usize,
    cfg: &AnnealConfig,
    restarts: usize,
) -> CliResult<Optimized> {
    let started = Instant::now();
    let cache = compute_phi(pop);
    let result = optimize_restarts(pop, &cache, n, cfg, restarts)?;
    let file = SequenceFile::from_result(
        pop,
        &result,
        restarts,
        cfg.iterations,
        started.elapsed().as_secs_f64(),
    );
    Ok(Optimized { file, result })
}

pub fn cmd_optimize(args: &OptimizeArgs) -> CliResult<()> {
    let cfg = anneal_config(args)?;
    if args.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    let size = parse_sample_size(&args.n)?;
    let zero = match &size {
        SampleSize::Single(n) => *n == 0,
        SampleSize::PerStratum(map) => map.values().any(|&n| n == 0),
    };
    if zero {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let pop = load_population(&args.data)?;
    create_dir(&args.out)?;

    let Some(labels) = pop.strata() else {
        let SampleSize::Single(n) = size else {
            return Err(CliError::Usage("per-stratum --n needs --strata".into()));
        };
        let run = optimize_one(&pop, n, &cfg, args.restarts)?;
        let path = args.out.join("sequence.json");
        run.file.write(&path)?;
        write_trace(&args.out.join("trace.csv"), &run.result)?;
        println!("{}\t{}", path.display(), run.file.expected_energy);
        return Ok(());
    };

    let mut members: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (unit, &h) in labels.iter().enumerate() {
        members.entry(h).or_default().push(unit);
    }
    let sizes: BTreeMap<i64, usize> = match size {
        SampleSize::Single(n) => members.keys().map(|&h| (h, n)).collect(),
        SampleSize::PerStratum(map) => {
            let given: BTreeSet<_> = map.keys().collect();
            let present: BTreeSet<_> = members.keys().collect();
            if given != present {
                return Err(CliError::Usage(format!(
                    "--n names strata {given:?} but the data has {present:?}"
                )));
            }
            map
        }
    };
    for (label, units) in &members {
        let n = sizes[label];
        if n > units.len() {
            return Err(dbd_core::DbdError::StratumTooSmall {
                label: *label,
                n,
                size: units.len(),
            }
            .into());
        }
        let sub = pop.subset(units)?;
        let mut run = optimize_one(&sub, n, &cfg, args.restarts)?;
        run.file.stratum = Some(*label);
        let path = args.out.join(format!("sequence_{label}.json"));
        run.file.write(&path)?;
        write_trace(&args.out.join(format!("trace_{label}.csv")), &run.result)?;
        println!("{}\t{}", path.display(), run.file.expected_energy);
    }
    Ok(())
}

/// Writes one line per sample, `j,id_1,...,id_n`.
pub fn cmd_sample<W: Write>(args: &SampleArgs, out: &mut W) -> CliResult<()> {
    let file = SequenceFile::read(&args.sequence)?;
    let seq = file.local_sequence()?;
    let len = seq.len();
    let starts: Vec<usize> = if args.enumerate {
        (1..=len).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        (0..args.count).map(|_| rng.random_range(1..=len)).collect()
    };
    let io_err = |e| CliError::io("<stdout>", e);
    for j in starts {
        let sample = seq.window(j)?;
        write!(out, "{j}").map_err(io_err)?;
        for u in sample.units {
            write!(out, ",{}", file.ids[u]).map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    if args.data.strata.is_some() {
        return Err(CliError::Usage(
            "eval works on a single population; drop --strata".into(),
        ));
    }
    let sequence = args
        .sequence
        .as_deref()
        .map(SequenceFile::read)
        .transpose()?;
    let pop = load_population(&args.data)?;
    let n = args
        .n
        .or(sequence.as_ref().map(|s| s.block_size))
        .ok_or_else(|| CliError::Usage("--n or --sequence is required".into()))?;

    let mut specs = Vec::new();
    for name in &args.designs {
        specs.push(match name.trim() {
            "dbd" => {
                let file = sequence
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("design dbd needs --sequence".into()))?;
                DesignSpec::dbd(file.resolve(&pop)?, args.seed)
            }
            "lpm" => DesignSpec::lpm(n, args.seed),
            "srs" => DesignSpec::srs(n, args.seed),
            other => return Err(CliError::Usage(format!("unknown design `{other}`"))),
        });
    }
    if specs.is_empty() {
        return Err(CliError::Usage("--designs is empty".into()));
    }

    let cache = compute_phi(&pop);
    let report = monte_carlo(&pop, &cache, &specs, args.reps, &args.data.targets, args.k)?;
    create_dir(&args.out)?;
    let per_sample = args.out.join("per_sample.csv");
    report.write_per_sample(create_file(&per_sample)?, b',')?;
    let summary = args.out.join("summary.csv");
    report.write_summary(create_file(&summary)?, b',')?;
    println!("{}\n{}", per_sample.display(), summary.display());
    Ok(())
}

fn parse_synthetic(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("--synthetic expects `N,p`, got `{text}`"));
    let (len, dim) = text.split_once(',').ok_or_else(bad)?;
    let len = len.trim().parse().map_err(|_| bad())?;
    let dim = dim.trim().parse().map_err(|_| bad())?;
    Ok((len, dim))
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let pop = match (&args.synthetic, &args.data.input) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("give either --synthetic or --input".into()))
        }
        (Some(spec), None) => {
            let (len, dim) = parse_synthetic(spec)?;
            uniform_population(len, dim, args.seed)?
        }
        (None, _) => load_population(&args.data)?,
    };
    let cache = compute_phi(&pop);
    let cfg = AnnealConfig::default()
        .with_iterations(args.iters)
        .with_seed(args.seed);
    let initial = initial_sequence(pop.len(), args.n, args.seed)?;
    let run = optimize(&pop, &cache, initial, &cfg)?;
    let specs = [
        DesignSpec::dbd(run.best_sequence.clone(), args.seed),
        DesignSpec::lpm(args.n, args.seed),
        DesignSpec::srs(args.n, args.seed),
    ];
    let report = monte_carlo(&pop, &cache, &specs, args.reps, &[], 2)?;

    create_dir(&args.out)?;
    let path = args.out.join("bench.csv");
    let io_err = |e| CliError::io(&path, e);
    let mut out = create_file(&path)?;
    let header = "design,N,p,n,mean_energy,mean_sb,mean_lb,mean_bd";
    writeln!(out, "{header}").map_err(io_err)?;
    println!("{header}");
    for d in &report.summary {
        let line = format!(
            "{},{},{},{},{},{},{},{}",
            d.design,
            pop.len(),
            pop.dim(),
            args.n,
            d.energy.mean,
            d.sb.mean,
            d.lb.mean,
            d.bd.mean
        );
        writeln!(out, "{line}").map_err(io_err)?;
        println!("{line}");
    }
    out.flush().map_err(io_err)?;
    write_trace(&args.out.join("trace.csv"), &run)
}
