use std::fs;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::prepare_order;
use super::{collect_runs, parallel_map, read_json, write_csv, write_json};
use crate::cl::{finetune_run, mtl_run, weaver_run, write_atomic, Checkpoint, GradientTrainer, WeaverOptions};
use crate::data::generate_suite;
use crate::error::{Error, Result};
use crate::eval::fmt_num;
use crate::model::{embed_tokens, FreezeMask, Hyperparams, ModelConfig, ParameterSet};
use crate::viz::{centroid_distance, export_projection, pca_project, ProjectionRecord};

pub const TAG_INDEPENDENT: &str = "independent";
pub const TAG_JOINT: &str = "joint";
pub const TAG_WEAVER: &str = "weaver";

/// Distance between the two corpora's centroids in each model's projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapDistances {
    pub independent: f64,
    pub joint: f64,
    pub weaver: f64,
}

impl OverlapDistances {
    /// WEAVER separates the corpora less than independent models do, and its
    /// geometry is closer to joint training than independent training is.
    pub fn weaver_resembles_joint(&self) -> bool {
        self.weaver < self.independent && (self.weaver - self.joint).abs() < self.independent - self.joint
    }
}

/// Projects the training-token representations of the first two corpora of
/// the first order under independent models, a joint model and WEAVER.
pub fn embedding_projection(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<ProjectionRecord>, OverlapDistances)> {
    cfg.validate()?;
    if cfg.suite.num_corpora < 2 {
        return Err(Error::Config("embedding projection needs at least two corpora".into()));
    }
    let suite = generate_suite(&cfg.suite)?;
    let order = cfg.resolved_orders()[0][..2].to_vec();
    let data = prepare_order(&suite, &order, &cfg.model, cfg.vocab_cap())?;
    let model = ModelConfig { seed, ..data.model.clone() };
    let trainer = GradientTrainer::new(Hyperparams { seed, ..cfg.hyper.clone() });
    let mask = FreezeMask::none();
    let base = Checkpoint::base(&model)?;

    let single = |i: usize| -> Result<ParameterSet> {
        Ok(finetune_run(std::slice::from_ref(&data.train[i]), &base, &trainer, &mask)?.remove(0).params)
    };
    let independent = [single(0)?, single(1)?];
    let joint = mtl_run(&data.train, &base, &trainer, &mask)?.params;
    let weaver = weaver_run(&data.train, &base, &trainer, &mask, &WeaverOptions::default())?
        .pop()
        .expect("one checkpoint per corpus")
        .params;

    let mut records = Vec::new();
    let mut project = |tag: &str, models: [&ParameterSet; 2]| -> Result<f64> {
        let mut vectors = Vec::new();
        let mut meta = Vec::new();
        for (slot, &corpus_index) in order.iter().enumerate() {
            let corpus = &suite.tasks[corpus_index].train;
            for sentence in corpus.sentences().iter().filter(|s| !s.is_empty()) {
                let ids = data.encoding.encode_tokens(&sentence.tokens);
                for (token, v) in sentence.tokens.iter().zip(embed_tokens(&model, models[slot], &ids)?) {
                    vectors.push(v);
                    meta.push((token.clone(), slot));
                }
            }
        }
        let points = pca_project(&vectors)?;
        let mut split: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
        for ((token, slot), p) in meta.into_iter().zip(points) {
            split[slot].push(p);
            records.push(ProjectionRecord {
                token,
                corpus: data.train[slot].name.clone(),
                model_tag: tag.to_string(),
                x: p.0,
                y: p.1,
            });
        }
        Ok(centroid_distance(&split[0], &split[1]))
    };
    let distances = OverlapDistances {
        independent: project(TAG_INDEPENDENT, [&independent[0], &independent[1]])?,
        joint: project(TAG_JOINT, [&joint, &joint])?,
        weaver: project(TAG_WEAVER, [&weaver, &weaver])?,
    };
    Ok((records, distances))
}

/// [`embedding_projection`] for every seed, written to
/// `output_dir/embeddings/seed*/` with a per-seed distance table.
pub fn run_project_embeddings(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<OverlapDistances>> {
    cfg.validate()?;
    let root = cfg.output_dir.join("embeddings");
    fs::create_dir_all(&root)?;
    let labels: Vec<String> = cfg.seeds.iter().map(|s| format!("embeddings/seed{s}")).collect();
    let results = parallel_map(jobs, cfg.seeds.len(), |i| {
        let seed = cfg.seeds[i];
        let (records, distances) = embedding_projection(cfg, seed)?;
        let dir = root.join(format!("seed{seed}"));
        fs::create_dir_all(&dir)?;
        let mut csv = Vec::new();
        export_projection(&records, &mut csv)?;
        write_atomic(&dir.join("projection.csv"), &csv)?;
        write_json(&dir.join("distances.json"), &distances)
    });
    collect_runs(&root, &labels, results)?;

    let all: Vec<OverlapDistances> = cfg
        .seeds
        .iter()
        .map(|s| read_json(&root.join(format!("seed{s}")).join("distances.json")))
        .collect::<Result<_>>()?;
    let tables = cfg.output_dir.join("tables");
    fs::create_dir_all(&tables)?;
    let header: Vec<String> =
        ["seed", TAG_INDEPENDENT, TAG_JOINT, TAG_WEAVER, "weaver_resembles_joint"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = cfg
        .seeds
        .iter()
        .zip(&all)
        .map(|(s, d)| {
            vec![
                s.to_string(),
                fmt_num(d.independent),
                fmt_num(d.joint),
                fmt_num(d.weaver),
                d.weaver_resembles_joint().to_string(),
            ]
        })
        .collect();
    write_csv(&tables.join("embedding_overlap.csv"), &header, &rows)?;
    Ok(all)
}
