use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use scenemem_core::consistency::{consistency_curve, mean_curve, split_half_srcc, split_scores, top_k_cross_mean};
use scenemem_core::corpus::{
    category_vector, ingest_images, load_votes, merge_annotations, AnnotationTask, CorpusIndex, ImageId, Taxonomy,
};
use scenemem_core::delimited::write_table;
use scenemem_core::evaluation::{
    category_memorability, default_frequency_bands, default_group_bounds, evaluate_predictor, load_frequency_table,
    load_predictions, rank_error_groups, word_frequency_report, write_predictions, EvalReport, PermutationMode,
};
use scenemem_core::features::{
    glcm, grid_sample, hsv_stats, load_external_vectors, pqft_saliency, write_feature_file, FeatureSet,
    GlcmStats,
};
use scenemem_core::game::{load_sessions, records_for_sessions, write_records, GameEngine, Pools, SessionLog};
use scenemem_core::regressor::{
    cv_grid_search, default_gammas, default_lambdas, fit_named, CvResult, KernelSpec, SumMember,
};
use scenemem_core::scoring::{collect_observations, filter_sessions, load_score_table, score_table, Observation};
use scenemem_core::seed;
use scenemem_core::sequencer::{plan_level, validate_plan};
use scenemem_core::simulate::{simulate_sessions, synthetic_pools, Behavior, PlantedModel, SimConfig, TargetBehavior};
use serde::Serialize;

use crate::config::{Extractor, KernelChoice, Problems, RunConfig};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    Ok(out)
}

fn need_seed(cfg: &RunConfig, p: &mut Problems) -> u64 {
    p.required("seed", &cfg.seed).copied().unwrap_or(0)
}

fn load_corpus(path: &Path) -> Result<CorpusIndex> {
    CorpusIndex::load(path).map_err(|e| anyhow!("corpus {}: {e}", path.display()))
}

fn load_all_sessions(paths: &[PathBuf]) -> Result<Vec<SessionLog>> {
    let mut all = Vec::new();
    let mut ids = BTreeSet::new();
    for p in paths {
        for s in load_sessions(p).map_err(|e| anyhow!("log {}: {e}", p.display()))? {
            if !ids.insert(s.session_id.clone()) {
                bail!("session `{}` appears in more than one log", s.session_id);
            }
            all.push(s);
        }
    }
    Ok(all)
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let images = p.required("ingest.images", &cfg.ingest.images).cloned();
    let manifest = p.required("ingest.manifest", &cfg.ingest.manifest).cloned();
    if let Some(d) = &images {
        p.dir("ingest.images", d);
    }
    if let Some(m) = &manifest {
        p.file("ingest.manifest", m);
    }
    p.finish()?;
    let (images, manifest) = (images.unwrap(), manifest.unwrap());

    let corpus = ingest_images(&images, &manifest).map_err(|e| anyhow!("{e}"))?;
    prepare_out(cfg)?;
    let dest = cfg.out_path("corpus.json");
    corpus.save(&dest).map_err(|e| anyhow!("{e}"))?;
    println!("indexed {} images -> {}", corpus.len(), dest.display());
    Ok(())
}

pub fn annotate(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let taxonomy = p.required("annotate.taxonomy", &cfg.annotate.taxonomy).cloned();
    if let Some(t) = &taxonomy {
        p.file("annotate.taxonomy", t);
    }
    p.check(!cfg.annotate.votes.is_empty(), || "annotate.votes is required".into());
    for v in &cfg.annotate.votes {
        p.file("annotate.votes", v);
    }
    let corpus_path = cfg.corpus_path();
    p.file("corpus", &corpus_path);
    p.finish()?;

    let taxonomy = Taxonomy::load(&taxonomy.unwrap()).map_err(|e| anyhow!("{e}"))?;
    let mut corpus = load_corpus(&corpus_path)?;
    let mut task1 = Vec::new();
    let mut task2 = Vec::new();
    for path in &cfg.annotate.votes {
        for v in load_votes(path).map_err(|e| anyhow!("{e}"))? {
            match v.task {
                AnnotationTask::Classification => task1.push(v),
                AnnotationTask::Verification => task2.push(v),
            }
        }
    }
    let merged = merge_annotations(&task1, &task2, &taxonomy, &corpus.image_ids()).map_err(|e| anyhow!("{e}"))?;
    corpus.apply_categories(taxonomy, &merged).map_err(|e| anyhow!("{e}"))?;
    prepare_out(cfg)?;
    let dest = cfg.out_path("corpus.json");
    corpus.save(&dest).map_err(|e| anyhow!("{e}"))?;
    let labelled = corpus.images.iter().filter(|r| !r.categories.is_empty()).count();
    println!("{labelled} of {} images carry categories -> {}", corpus.len(), dest.display());
    Ok(())
}

pub fn plan(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let master = need_seed(cfg, &mut p);
    let corpus_path = cfg.corpus_path();
    p.file("corpus", &corpus_path);
    p.check(cfg.plan.count >= 1, || "plan.count must be at least 1".into());
    if let Err(e) = cfg.sequencer.validate() {
        p.push(e.to_string());
    }
    p.finish()?;

    let pools = Pools::from_corpus(&load_corpus(&corpus_path)?);
    let dir = prepare_out(cfg)?.join("plans");
    std::fs::create_dir_all(&dir)?;
    for i in 0..cfg.plan.count {
        let sc = cfg.sequencer.with_seed(seed::derive(master, i as u64));
        let plan = plan_level(&pools.targets, &pools.fillers, &pools.vigilance, &sc).map_err(|e| anyhow!("{e}"))?;
        let violations = validate_plan(&plan, &sc);
        if let Some(v) = violations.first() {
            bail!("plan {i} failed validation with {} violations, first: {v}", violations.len());
        }
        let mut text = plan.to_json();
        text.push('\n');
        std::fs::write(dir.join(format!("plan-{i:04}.json")), text)?;
    }
    println!("{} valid plans of {} slots -> {}", cfg.plan.count, cfg.sequencer.level_length(), dir.display());
    Ok(())
}

pub fn serve(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let master = need_seed(cfg, &mut p);
    let corpus_path = cfg.corpus_path();
    p.file("corpus", &corpus_path);
    let images = cfg.image_root(&cfg.serve.images);
    if let Some(d) = &images {
        p.dir("serve.images", d);
    }
    if let Err(e) = cfg.sequencer.validate() {
        p.push(e.to_string());
    }
    p.check(cfg.serve.sweep_interval_ms > 0, || "serve.sweep_interval_ms must be positive".into());
    p.check(cfg.game.display_duration_ms > 0 && cfg.game.isi_ms > 0, || {
        "game.display_duration_ms and game.isi_ms must be positive".into()
    });
    p.finish()?;

    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let corpus = load_corpus(&corpus_path)?;
    let mut game = cfg.game.clone();
    game.sequencer = cfg.sequencer;
    game.master_seed = master;
    prepare_out(cfg)?;
    let log = cfg.serve.log.clone().unwrap_or_else(|| cfg.out_path("events.jsonl"));
    let engine = GameEngine::open(game, Pools::from_corpus(&corpus), &log).map_err(|e| anyhow!("{e}"))?;
    let mut state = scenemem_server::AppState::new(engine);
    if let Some(root) = &images {
        state = state.with_images(&corpus, root);
    }

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.serve.bind)
            .await
            .with_context(|| format!("cannot bind {}", cfg.serve.bind))?;
        eprintln!("listening on {} (log {})", listener.local_addr()?, log.display());
        scenemem_server::spawn_sweeper(state.clone(), Duration::from_millis(cfg.serve.sweep_interval_ms));
        scenemem_server::serve(listener, state, async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
        Ok(())
    })
}

fn check_logs(cfg: &RunConfig, p: &mut Problems) -> Vec<PathBuf> {
    let logs = cfg.log_paths();
    for l in &logs {
        p.file("log", l);
    }
    p.check(cfg.scoring.horizon > 0.0 && cfg.scoring.horizon.is_finite(), || {
        format!("scoring.horizon must be positive, got {}", cfg.scoring.horizon)
    });
    p.probability("scoring.thresholds.vigilance_min", cfg.scoring.thresholds.vigilance_min);
    p.probability("scoring.thresholds.false_alarm_max", cfg.scoring.thresholds.false_alarm_max);
    logs
}

pub fn score(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let logs = check_logs(cfg, &mut p);
    p.finish()?;

    let sessions = load_all_sessions(&logs)?;
    let table = score_table(&sessions, &cfg.scoring).map_err(|e| anyhow!("{e}"))?;
    prepare_out(cfg)?;
    table.write_tsv(&cfg.out_path("scores.tsv")).map_err(|e| anyhow!("{e}"))?;
    write_json(&cfg.out_path("scores.json"), &table)?;
    println!(
        "{} images from {} of {} sessions; decay beta {:.4}; mean hit rate {:.4} -> {}",
        table.images.len(),
        table.n_valid_sessions,
        table.n_sessions,
        table.decay.beta,
        table.mean_hit_rate,
        cfg.out_path("scores.tsv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ConsistencyOut {
    report: scenemem_core::consistency::SplitReport,
    top_k: Vec<(usize, f64)>,
}

pub fn consistency(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let master = need_seed(cfg, &mut p);
    let logs = check_logs(cfg, &mut p);
    let c = &cfg.consistency;
    p.check(c.splits >= 1, || "consistency.splits must be at least 1".into());
    p.check(c.filter_len >= 1, || "consistency.filter_len must be at least 1".into());
    p.check(c.top_k.iter().all(|&k| k > 0), || "consistency.top_k entries must be positive".into());
    p.finish()?;

    let sessions = load_all_sessions(&logs)?;
    let valid = filter_sessions(&sessions, &cfg.scoring.thresholds);
    let observations: Vec<Observation> = collect_observations(valid.iter().copied())
        .map_err(|e| anyhow!("{e}"))?
        .into_values()
        .flatten()
        .collect();
    let horizon = cfg.scoring.horizon;
    let report = split_half_srcc(&observations, c.splits, master, horizon).map_err(|e| anyhow!("{e}"))?;

    let mut curves = Vec::with_capacity(c.splits);
    let mut top_sums = vec![0.0; c.top_k.len()];
    for split in 0..c.splits {
        let halves = split_scores(&observations, split, master, horizon).map_err(|e| anyhow!("{e}"))?;
        let shuffle_seed = seed::derive(seed::derive(master, 1 << 32), split as u64);
        curves.push(
            consistency_curve(&halves.group1, &halves.group2, c.filter_len, c.mode, shuffle_seed)
                .map_err(|e| anyhow!("{e}"))?,
        );
        for (sum, &k) in top_sums.iter_mut().zip(&c.top_k) {
            *sum += top_k_cross_mean(&halves.group1, &halves.group2, k).map_err(|e| anyhow!("{e}"))?;
        }
    }
    let curve = mean_curve(&curves);
    let top_k = c
        .top_k
        .iter()
        .zip(&top_sums)
        .map(|(&k, s)| (k, s / c.splits as f64))
        .collect();

    prepare_out(cfg)?;
    write_json(&cfg.out_path("consistency.json"), &ConsistencyOut { report: report.clone(), top_k })?;
    write_table(
        &cfg.out_path("consistency_curve.tsv"),
        &["rank", "group1", "group2", "chance"],
        curve
            .iter()
            .map(|pt| vec![pt.rank.to_string(), pt.group1.to_string(), pt.group2.to_string(), pt.chance.to_string()]),
    )?;
    println!(
        "mean split-half rho {:.4} over {} splits of {} subjects -> {}",
        report.mean_rho,
        report.n_splits,
        report.n_subjects,
        cfg.out_path("consistency.json").display()
    );
    Ok(())
}

fn open_rgb(root: &Path, rel: &Path) -> std::result::Result<image::RgbImage, String> {
    image::open(root.join(rel)).map(|i| i.to_rgb8()).map_err(|e| e.to_string())
}

pub fn features(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let f = &cfg.features;
    let corpus_path = cfg.corpus_path();
    p.file("corpus", &corpus_path);
    let root = cfg.image_root(&f.images);
    let needs_images = f.extractors.iter().any(|e| *e != Extractor::Category);
    if needs_images {
        match &root {
            Some(d) => p.dir("features.images", d),
            None => p.push("features.images (or ingest.images) is required"),
        }
    }
    p.check(f.grid > 0 && f.pqft.output_size % f.grid == 0, || {
        format!("features.grid {} must divide pqft.output_size {}", f.grid, f.pqft.output_size)
    });
    p.check(f.glcm.levels >= 2, || "features.glcm.levels must be at least 2".into());
    p.check(f.pqft.working_size >= 1 && f.pqft.sigma > 0.0, || {
        "features.pqft needs working_size >= 1 and sigma > 0".into()
    });
    for e in &f.external {
        p.file("features.external.path", &e.path);
    }
    p.check(!f.extractors.is_empty() || !f.external.is_empty(), || "no extractors selected".into());
    p.finish()?;

    let corpus = load_corpus(&corpus_path)?;
    let out = prepare_out(cfg)?;
    let dir = out.join("features");
    std::fs::create_dir_all(&dir)?;
    let root = root.unwrap_or_default();
    if f.export_maps && f.extractors.contains(&Extractor::Saliency) {
        std::fs::create_dir_all(out.join("saliency"))?;
    }

    for &ex in &f.extractors {
        let set = match ex {
            Extractor::Category => {
                let tax = corpus
                    .taxonomy
                    .as_ref()
                    .ok_or_else(|| anyhow!("category features need an annotated corpus"))?;
                let mut set = FeatureSet::new("category", tax.len());
                for r in &corpus.images {
                    set.insert(r.image_id.clone(), category_vector(r, tax)).map_err(|e| anyhow!("{e}"))?;
                }
                set
            }
            _ => {
                let rows: Vec<(ImageId, std::result::Result<Vec<f64>, String>)> = corpus
                    .images
                    .par_iter()
                    .map(|r| {
                        let v = open_rgb(&root, &r.path).and_then(|img| extract(ex, cfg, &out, &r.image_id, &img));
                        (r.image_id.clone(), v)
                    })
                    .collect();
                let failed: Vec<String> = rows
                    .iter()
                    .filter_map(|(id, v)| v.as_ref().err().map(|e| format!("{id} ({e})")))
                    .collect();
                if !failed.is_empty() {
                    let shown: Vec<&str> = failed.iter().take(5).map(String::as_str).collect();
                    bail!("{} failed on {} images: {}", ex.name(), failed.len(), shown.join(", "));
                }
                let dim = rows.first().map_or(0, |(_, v)| v.as_ref().map_or(0, Vec::len));
                let mut set = FeatureSet::new(ex.name(), dim);
                for (id, v) in rows {
                    set.insert(id, v.unwrap()).map_err(|e| anyhow!("{e}"))?;
                }
                set
            }
        };
        let dest = dir.join(format!("{}.tsv", set.name));
        write_feature_file(&dest, &set).map_err(|e| anyhow!("{e}"))?;
        println!("{}: {} vectors of dim {} -> {}", set.name, set.len(), set.dim, dest.display());
    }

    let known = corpus.image_ids();
    for e in &f.external {
        let set = load_external_vectors(&e.path, e.dim, Some(&known)).map_err(|err| anyhow!("{}: {err}", e.path.display()))?;
        let dest = dir.join(format!("{}.tsv", set.name));
        write_feature_file(&dest, &set).map_err(|e| anyhow!("{e}"))?;
        println!("{}: {} external vectors of dim {} -> {}", set.name, set.len(), set.dim, dest.display());
    }
    Ok(())
}

fn extract(ex: Extractor, cfg: &RunConfig, out: &Path, id: &str, img: &image::RgbImage) -> std::result::Result<Vec<f64>, String> {
    let f = &cfg.features;
    match ex {
        Extractor::Hsv => hsv_stats(img).map(|v| v.values).map_err(|e| e.to_string()),
        Extractor::Glcm => glcm(img, &f.glcm).map(|s| s.to_vec()).map_err(|e| e.to_string()),
        Extractor::Saliency => {
            let map = pqft_saliency(img, &f.pqft).map_err(|e| e.to_string())?;
            if f.export_maps {
                map.write_pgm(&out.join("saliency").join(format!("{id}.pgm")))
                    .map_err(|e| e.to_string())?;
            }
            grid_sample(&map, f.grid).map(|v| v.values).map_err(|e| e.to_string())
        }
        Extractor::Category => unreachable!("category vectors come from the corpus"),
    }
}

fn feature_path(cfg: &RunConfig, name: &str) -> PathBuf {
    let as_path = Path::new(name);
    if as_path.extension().is_some() || as_path.components().count() > 1 {
        as_path.to_owned()
    } else {
        cfg.out_path("features").join(format!("{name}.tsv"))
    }
}

fn kernel_grid(cfg: &RunConfig, blocks: &[(usize, usize)]) -> Vec<KernelSpec> {
    let f = &cfg.fit;
    let dim = blocks.last().map_or(0, |b| b.1);
    let gammas_for = |d: usize| f.gammas.clone().unwrap_or_else(|| default_gammas(d));
    match f.kernel {
        KernelChoice::Hik => vec![KernelSpec::HistogramIntersection],
        KernelChoice::Rbf => gammas_for(dim).into_iter().map(|gamma| KernelSpec::Rbf { gamma }).collect(),
        KernelChoice::Sum => {
            let member = |k: usize, (lo, hi): (usize, usize)| SumMember {
                kernel: match f.member_kernel {
                    KernelChoice::Rbf => KernelSpec::Rbf {
                        gamma: gammas_for(hi - lo)[k],
                    },
                    _ => KernelSpec::HistogramIntersection,
                },
                columns: Some((lo, hi)),
            };
            let n = if f.member_kernel == KernelChoice::Rbf { gammas_for(1).len() } else { 1 };
            (0..n)
                .map(|k| KernelSpec::Sum {
                    members: blocks.iter().map(|&b| member(k, b)).collect(),
                })
                .collect()
        }
    }
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let master = need_seed(cfg, &mut p);
    let f = &cfg.fit;
    let scores_path = f.scores.clone().unwrap_or_else(|| cfg.out_path("scores.tsv"));
    p.file("fit.scores", &scores_path);
    p.check(!f.features.is_empty(), || "fit.features is empty".into());
    for name in &f.features {
        p.file("feature file", &feature_path(cfg, name));
    }
    p.check(f.kernel != KernelChoice::Sum || f.member_kernel != KernelChoice::Sum, || {
        "fit.member_kernel must be hik or rbf".into()
    });
    p.check(f.folds >= 2, || format!("fit.folds must be at least 2, got {}", f.folds));
    p.check(f.test_fraction > 0.0 && f.test_fraction < 1.0, || {
        format!("fit.test_fraction must lie in (0, 1), got {}", f.test_fraction)
    });
    if let Some(l) = &f.lambdas {
        p.check(!l.is_empty() && l.iter().all(|v| *v > 0.0 && v.is_finite()), || {
            "fit.lambdas must be non-empty and positive".into()
        });
    }
    if let Some(g) = &f.gammas {
        p.check(!g.is_empty() && g.iter().all(|v| *v > 0.0 && v.is_finite()), || {
            "fit.gammas must be non-empty and positive".into()
        });
    }
    p.finish()?;

    let scores = load_score_table(&scores_path).map_err(|e| anyhow!("{e}"))?;
    let mut sets = Vec::new();
    for name in &f.features {
        let path = feature_path(cfg, name);
        sets.push(load_external_vectors(&path, None, None).map_err(|e| anyhow!("{}: {e}", path.display()))?);
    }
    let mut blocks = Vec::new();
    let mut lo = 0;
    for s in &sets {
        blocks.push((lo, lo + s.dim));
        lo += s.dim;
    }
    let ids: Vec<ImageId> = scores
        .keys()
        .filter(|id| sets.iter().all(|s| s.get(id).is_some()))
        .cloned()
        .collect();
    let mut order = ids.clone();
    order.shuffle(&mut seed::rng(seed::derive(master, 1)));
    let n_test = ((ids.len() as f64) * f.test_fraction).round().max(1.0) as usize;
    if ids.len() < n_test + 2 * f.folds {
        bail!(
            "{} images have both scores and features; need at least {} for {} folds and {} test images",
            ids.len(),
            n_test + 2 * f.folds,
            f.folds,
            n_test
        );
    }
    let test: BTreeSet<&ImageId> = order[..n_test].iter().collect();
    let row = |id: &ImageId| -> Vec<f64> { sets.iter().flat_map(|s| s.get(id).unwrap().iter().copied()).collect() };
    let (train_ids, test_ids): (Vec<&ImageId>, Vec<&ImageId>) = ids.iter().partition(|id| !test.contains(id));
    let train_x: Vec<Vec<f64>> = train_ids.iter().map(|id| row(id)).collect();
    let train_y: Vec<f64> = train_ids.iter().map(|id| scores[*id].score).collect();

    let specs = kernel_grid(cfg, &blocks);
    let lambdas = f.lambdas.clone().unwrap_or_else(default_lambdas);
    let cv = cv_grid_search(&train_x, &train_y, &specs, &lambdas, f.folds, seed::derive(master, 2))
        .map_err(|e| anyhow!("{e}"))?;
    let model = fit_named(
        train_ids.iter().map(|s| (*s).clone()).collect(),
        &train_x,
        &train_y,
        &cv.best.spec,
        cv.best.lambda,
    )
    .map_err(|e| anyhow!("{e}"))?;

    let mut predictions = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for id in &test_ids {
        let pred = model.predict(&row(id)).map_err(|e| anyhow!("{id}: {e}"))?;
        predictions.insert((*id).clone(), pred.clamped);
        truth.insert((*id).clone(), scores[*id].score);
    }

    prepare_out(cfg)?;
    model.save(&cfg.out_path("model.json")).map_err(|e| anyhow!("{e}"))?;
    write_cv(&cfg.out_path("cv.tsv"), &cv)?;
    write_predictions(&cfg.out_path("predictions.tsv"), &predictions)?;
    write_predictions(&cfg.out_path("truth_test.tsv"), &truth)?;
    write_table(
        &cfg.out_path("split.tsv"),
        &["image_id", "set"],
        ids.iter().map(|id| vec![id.clone(), if test.contains(id) { "test" } else { "train" }.to_owned()]),
    )?;
    println!(
        "best {} lambda {} (cv srcc {:.4}); {} train, {} test -> {}",
        cv.best.spec.label(),
        cv.best.lambda,
        cv.best.mean_srcc.unwrap_or(f64::NAN),
        train_ids.len(),
        test_ids.len(),
        cfg.out_path("model.json").display()
    );
    Ok(())
}

fn write_cv(path: &Path, cv: &CvResult) -> Result<()> {
    write_table(
        path,
        &["spec_index", "kernel", "lambda", "mean_srcc", "fold_srcc", "skipped"],
        cv.cells.iter().map(|c| {
            vec![
                c.spec_index.to_string(),
                c.spec.label(),
                c.lambda.to_string(),
                c.mean_srcc.map(|v| v.to_string()).unwrap_or_default(),
                c.fold_srcc.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
                c.skipped.clone().unwrap_or_default(),
            ]
        }),
    )?;
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let master = need_seed(cfg, &mut p);
    let e = &cfg.eval;
    let pred = e.predictions.clone().unwrap_or_else(|| cfg.out_path("predictions.tsv"));
    let truth = e.truth.clone().unwrap_or_else(|| cfg.out_path("truth_test.tsv"));
    p.file("predictions", &pred);
    p.file("truth", &truth);
    p.check(e.permutations >= 100, || format!("eval.permutations must be at least 100, got {}", e.permutations));
    p.finish()?;

    let predictions = load_predictions(&pred).map_err(|err| anyhow!("{}: {err}", pred.display()))?;
    let truth_scores = load_predictions(&truth).map_err(|err| anyhow!("{}: {err}", truth.display()))?;
    let mode = PermutationMode::MonteCarlo {
        permutations: e.permutations,
        seed: seed::derive(master, 3),
    };
    let report = evaluate_predictor(&predictions, &truth_scores, mode).map_err(|err| anyhow!("{err}"))?;
    prepare_out(cfg)?;
    write_json(&cfg.out_path("eval.json"), &report)?;
    write_table(
        &cfg.out_path("rank_errors.tsv"),
        &["image_id", "truth", "predicted", "rank_truth", "rank_predicted", "rank_error"],
        report.rank_errors.iter().map(|r| {
            vec![
                r.image_id.clone(),
                r.truth.to_string(),
                r.predicted.to_string(),
                r.rank_truth.to_string(),
                r.rank_predicted.to_string(),
                r.rank_error.to_string(),
            ]
        }),
    )?;
    println!(
        "n {} rho {:.4} p {:.4} mae {:.4} mse {:.4} -> {}",
        report.n,
        report.rho,
        report.p_value,
        report.mae,
        report.mse,
        cfg.out_path("eval.json").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Report {
    rank_error_groups: Option<Vec<scenemem_core::evaluation::GlcmGroup>>,
    categories: Vec<scenemem_core::evaluation::CategoryStats>,
    frequency_bands: Option<Vec<scenemem_core::evaluation::FrequencyBand>>,
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let r = &cfg.report;
    let eval_path = r.eval.clone().unwrap_or_else(|| cfg.out_path("eval.json"));
    let glcm_path = r.glcm.clone().unwrap_or_else(|| cfg.out_path("features").join("glcm.tsv"));
    let scores_path = r.scores.clone().unwrap_or_else(|| cfg.out_path("scores.tsv"));
    let corpus_path = cfg.corpus_path();
    p.file("report.eval", &eval_path);
    p.file("report.glcm", &glcm_path);
    p.file("report.scores", &scores_path);
    p.file("corpus", &corpus_path);
    if let Some(fpath) = &r.frequencies {
        p.file("report.frequencies", fpath);
    }
    p.finish()?;

    let eval: EvalReport = serde_json::from_str(&std::fs::read_to_string(&eval_path)?)
        .map_err(|e| anyhow!("{}: {e}", eval_path.display()))?;
    let glcm_set = load_external_vectors(&glcm_path, Some(3), None).map_err(|e| anyhow!("{}: {e}", glcm_path.display()))?;
    let glcm_table: BTreeMap<ImageId, GlcmStats> = glcm_set
        .vectors
        .iter()
        .map(|(id, v)| {
            (
                id.clone(),
                GlcmStats {
                    contrast: v[0],
                    homogeneity: v[1],
                    correlation: v[2],
                },
            )
        })
        .collect();
    let bounds = r.group_bounds.clone().unwrap_or_else(|| default_group_bounds(eval.rank_errors.len()));
    let groups = rank_error_groups(&eval, &glcm_table, &bounds).map_err(|e| anyhow!("{e}"))?;

    let scores: BTreeMap<ImageId, f64> = load_score_table(&scores_path)
        .map_err(|e| anyhow!("{e}"))?
        .into_iter()
        .map(|(id, row)| (id, row.score))
        .collect();
    let corpus = load_corpus(&corpus_path)?;
    let categories = category_memorability(&corpus, &scores);

    let frequency_bands = match &r.frequencies {
        Some(fpath) => {
            let table = load_frequency_table(fpath).map_err(|e| anyhow!("{e}"))?;
            let means: BTreeMap<String, f64> = categories.iter().map(|c| (c.category_id.clone(), c.mean)).collect();
            let bands = r.bands.clone().unwrap_or_else(|| default_frequency_bands(means.len()));
            Some(word_frequency_report(&means, &table, &bands).map_err(|e| anyhow!("{e}"))?)
        }
        None => None,
    };

    prepare_out(cfg)?;
    write_table(
        &cfg.out_path("report_glcm_groups.tsv"),
        &["first", "last", "contrast", "homogeneity", "correlation"],
        groups.iter().map(|g| {
            vec![
                g.first.to_string(),
                g.last.to_string(),
                g.contrast.to_string(),
                g.homogeneity.to_string(),
                g.correlation.to_string(),
            ]
        }),
    )?;
    write_table(
        &cfg.out_path("report_categories.tsv"),
        &["category_id", "n_images", "mean", "sd"],
        categories
            .iter()
            .map(|c| vec![c.category_id.clone(), c.n_images.to_string(), c.mean.to_string(), c.sd.to_string()]),
    )?;
    if let Some(bands) = &frequency_bands {
        write_table(
            &cfg.out_path("report_frequency.tsv"),
            &["first", "last", "mean_frequency", "categories"],
            bands.iter().map(|b| {
                vec![b.first.to_string(), b.last.to_string(), b.mean_frequency.to_string(), b.categories.join(",")]
            }),
        )?;
    }
    write_json(
        &cfg.out_path("report.json"),
        &Report {
            rank_error_groups: Some(groups),
            categories,
            frequency_bands,
        },
    )?;
    println!("report -> {}", cfg.out_path("report.json").display());
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let mut p = Problems::default();
    let master = need_seed(cfg, &mut p);
    let s = &cfg.simulate;
    let corpus_path = cfg.corpus_path();
    if s.pools.is_none() {
        p.file("corpus", &corpus_path);
    }
    p.check(s.n_subjects >= 1 && s.sessions_per_subject >= 1, || {
        "simulate needs at least one subject and one session".into()
    });
    p.check(s.horizon > 0.0 && s.horizon.is_finite(), || "simulate.horizon must be positive".into());
    p.check(s.spread >= 0.0, || "simulate.spread must be non-negative".into());
    p.probability("simulate.vigilance_hit", s.vigilance_hit);
    p.probability("simulate.false_alarm", s.false_alarm);
    if let Err(e) = cfg.sequencer.validate() {
        p.push(e.to_string());
    }
    p.finish()?;

    let pools = match s.pools {
        Some([t, f, v]) => synthetic_pools(t, f, v),
        None => Pools::from_corpus(&load_corpus(&corpus_path)?),
    };
    let planted = PlantedModel::uniform(&pools.targets, s.alpha, s.beta, s.horizon, s.spread, seed::derive(master, 4));
    let behavior = Behavior {
        targets: TargetBehavior::Planted(planted.clone()),
        vigilance_hit: s.vigilance_hit,
        false_alarm: s.false_alarm,
    };
    let mut game = cfg.game.clone();
    game.sequencer = cfg.sequencer;
    let sim = SimConfig {
        n_subjects: s.n_subjects,
        sessions_per_subject: s.sessions_per_subject,
        seed: seed::derive(master, 5),
        game,
    };
    let sessions = simulate_sessions(&sim, pools, &behavior).map_err(|e| anyhow!("{e}"))?;
    prepare_out(cfg)?;
    let log = cfg.out_path("simulated_events.jsonl");
    write_records(&log, &records_for_sessions(&sessions)).map_err(|e| anyhow!("{e}"))?;
    write_table(
        &cfg.out_path("planted.tsv"),
        &["image_id", "probability_at_horizon"],
        planted.probabilities.iter().map(|(id, v)| vec![id.clone(), v.to_string()]),
    )?;
    println!("{} sessions -> {}", sessions.len(), log.display());
    Ok(())
}
