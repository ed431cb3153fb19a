//! Library side of the `scenemem` binary, so integration tests can drive
//! commands in-process.

pub mod args;
pub mod commands;
pub mod config;

use anyhow::{anyhow, Result};

use args::{Cli, Command};
use config::{Extractor, KernelChoice, RunConfig};

/// Loads the config file (if any) and layers the flags over it.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if g.out.is_some() {
        cfg.out = g.out.clone();
    }
    if g.corpus.is_some() {
        cfg.corpus = g.corpus.clone();
    }
    fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *slot = v.clone();
        }
    }
    fn set_opt<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
        if v.is_some() {
            *slot = v.clone();
        }
    }
    match &cli.command {
        Command::Ingest { images, manifest } => {
            set_opt(&mut cfg.ingest.images, images);
            set_opt(&mut cfg.ingest.manifest, manifest);
        }
        Command::Annotate { taxonomy, votes } => {
            set_opt(&mut cfg.annotate.taxonomy, taxonomy);
            if !votes.is_empty() {
                cfg.annotate.votes = votes.clone();
            }
        }
        Command::Plan { count } => set(&mut cfg.plan.count, count),
        Command::Serve { bind, log, images } => {
            set(&mut cfg.serve.bind, bind);
            set_opt(&mut cfg.serve.log, log);
            set_opt(&mut cfg.serve.images, images);
        }
        Command::Score { logs, horizon } => {
            if !logs.is_empty() {
                cfg.logs = logs.clone();
            }
            set(&mut cfg.scoring.horizon, horizon);
        }
        Command::Consistency { logs, splits, filter_len } => {
            if !logs.is_empty() {
                cfg.logs = logs.clone();
            }
            set(&mut cfg.consistency.splits, splits);
            set(&mut cfg.consistency.filter_len, filter_len);
        }
        Command::Features { images, extractors, export_maps } => {
            set_opt(&mut cfg.features.images, images);
            if !extractors.is_empty() {
                let mut parsed = Vec::new();
                let mut bad = Vec::new();
                for e in extractors {
                    match Extractor::parse(e) {
                        Some(x) => parsed.push(x),
                        None => bad.push(e.as_str()),
                    }
                }
                if !bad.is_empty() {
                    return Err(anyhow!(
                        "unknown extractor(s) {}; expected hsv, glcm, saliency or category",
                        bad.join(", ")
                    ));
                }
                cfg.features.extractors = parsed;
            }
            cfg.features.export_maps |= export_maps;
        }
        Command::Fit { features, kernel, folds, scores } => {
            if !features.is_empty() {
                cfg.fit.features = features.clone();
            }
            if let Some(k) = kernel {
                cfg.fit.kernel =
                    KernelChoice::parse(k).ok_or_else(|| anyhow!("unknown kernel `{k}`; expected hik, rbf or sum"))?;
            }
            set(&mut cfg.fit.folds, folds);
            set_opt(&mut cfg.fit.scores, scores);
        }
        Command::Eval { predictions, truth, permutations } => {
            set_opt(&mut cfg.eval.predictions, predictions);
            set_opt(&mut cfg.eval.truth, truth);
            set(&mut cfg.eval.permutations, permutations);
        }
        Command::Report { eval, glcm, scores, frequencies } => {
            set_opt(&mut cfg.report.eval, eval);
            set_opt(&mut cfg.report.glcm, glcm);
            set_opt(&mut cfg.report.scores, scores);
            set_opt(&mut cfg.report.frequencies, frequencies);
        }
        Command::Simulate { subjects, sessions } => {
            set(&mut cfg.simulate.n_subjects, subjects);
            set(&mut cfg.simulate.sessions_per_subject, sessions);
        }
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    match cli.command {
        Command::Ingest { .. } => commands::ingest(&cfg),
        Command::Annotate { .. } => commands::annotate(&cfg),
        Command::Plan { .. } => commands::plan(&cfg),
        Command::Serve { .. } => commands::serve(&cfg),
        Command::Score { .. } => commands::score(&cfg),
        Command::Consistency { .. } => commands::consistency(&cfg),
        Command::Features { .. } => commands::features(&cfg),
        Command::Fit { .. } => commands::fit(&cfg),
        Command::Eval { .. } => commands::eval(&cfg),
        Command::Report { .. } => commands::report(&cfg),
        Command::Simulate { .. } => commands::simulate(&cfg),
    }
}
