//! Continual-learning strategies on stub and real trainers.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weaver_core::cl::{
    ewc_run, finetune_run, fisher_diag, mtl_run, replay_run, weaver_run, Checkpoint, EwcOptions, GradientTrainer,
    ReplayBuffer, ReplayOptions, TrainingObjective, WeaverOptions,
};
use weaver_core::data::EncodedCorpus;
use weaver_core::model::{init_params, loss, train, Example, FreezeMask, Hyperparams, ModelConfig};

fn all_equal_to(ckpt: &Checkpoint, expected: f64, tol: f64) {
    for v in ckpt.params.values() {
        assert!((v - expected).abs() <= tol, "{v} vs {expected}");
    }
}

#[test]
fn weaver_matches_closed_form_with_stub_trainer() {
    let sizes = [4725, 3230, 3043, 2944, 1885];
    let values = [1.0, -2.0, 0.5, 3.0, 10.0];
    let trainer = StubTrainer::new(values.to_vec());
    let stages = weaver_run(&stub_corpora(&sizes), &stub_base(), &trainer, &FreezeMask::none(), &WeaverOptions::default())
        .unwrap();
    assert_eq!(stages.len(), 5);
    for k in 1..=5 {
        all_equal_to(&stages[k - 1], closed_form(&sizes[..k], &values[..k]), 1e-12);
    }
    assert_eq!(stages[4].cumulative_examples, sizes.iter().sum::<usize>());
    assert_eq!(stages[4].history.len(), 5);
}

#[test]
fn each_stage_sees_only_its_own_corpus() {
    let trainer = StubTrainer::new(vec![0.0; 4]);
    let corpora = stub_corpora(&[5, 6, 7, 8]);
    let mask = FreezeMask::none();
    weaver_run(&corpora, &stub_base(), &trainer, &mask, &WeaverOptions::default()).unwrap();
    assert_eq!(*trainer.calls.borrow(), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    trainer.calls.borrow_mut().clear();
    finetune_run(&corpora, &stub_base(), &trainer, &mask).unwrap();
    assert_eq!(*trainer.calls.borrow(), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
}

#[test]
fn finetune_keeps_only_the_last_stage() {
    let trainer = StubTrainer::new(vec![1.0, 2.0, 3.0]);
    let stages = finetune_run(&stub_corpora(&[10, 10, 10]), &stub_base(), &trainer, &FreezeMask::none()).unwrap();
    all_equal_to(&stages[2], 3.0, 0.0);
}

#[test]
fn weaver_options() {
    let sizes = [10, 30];
    let values = [1.0, 5.0];
    let trainer = StubTrainer::new(values.to_vec());
    let base = stub_base();
    let head = base.model_config.head_layer();
    let opts = WeaverOptions { average_head: false, ..WeaverOptions::default() };
    let stages = weaver_run(&stub_corpora(&sizes), &base, &trainer, &FreezeMask::none(), &opts).unwrap();
    for t in stages[1].params.tensors() {
        let expected = if t.layer == head { 5.0 } else { 4.0 };
        assert!(t.data.iter().all(|&v| (v - expected).abs() < 1e-12), "{}", t.name);
    }
}

#[test]
fn empty_corpus_list_and_trained_base_rejected() {
    let trainer = StubTrainer::new(vec![1.0]);
    let none: Vec<StubCorpus> = Vec::new();
    let base = stub_base();
    assert!(weaver_run(&none, &base, &trainer, &FreezeMask::none(), &WeaverOptions::default()).is_err());
    let trained = base.advanced(base.params.clone(), "x", 3);
    assert!(finetune_run(&stub_corpora(&[1]), &trained, &trainer, &FreezeMask::none()).is_err());
}

fn real_corpora(config: &ModelConfig) -> Vec<EncodedCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    (0..2)
        .map(|c| {
            let examples = (0..12)
                .map(|_| {
                    let n = rng.random_range(2..6);
                    let tokens: Vec<u32> = (0..n).map(|_| rng.random_range(2..config.vocab_size as u32)).collect();
                    let labels = tokens.iter().map(|&t| if (t + c) % 3 == 0 { 1 } else { 0 }).collect();
                    Example { tokens, labels }
                })
                .collect();
            EncodedCorpus { name: format!("c{c}"), declared_size: 12, examples }
        })
        .collect()
}

fn gradient_trainer() -> GradientTrainer {
    GradientTrainer::new(Hyperparams { epochs: 2, batch_size: 4, learning_rate: 0.02, ..Hyperparams::default() })
}

#[test]
fn ewc_without_penalty_is_finetuning() {
    let config = tiny_config();
    let corpora = real_corpora(&config);
    let base = Checkpoint::base(&config).unwrap();
    let trainer = gradient_trainer();
    let mask = FreezeMask::none();
    let ft = finetune_run(&corpora, &base, &trainer, &mask).unwrap();
    let ewc = ewc_run(&corpora, &base, &trainer, &mask, &EwcOptions { lambda: 0.0, ..EwcOptions::default() }).unwrap();
    for (a, b) in ft.iter().zip(&ewc) {
        assert!(a.params.max_abs_diff(&b.params).unwrap() < 1e-12);
    }
    let strong = ewc_run(&corpora, &base, &trainer, &mask, &EwcOptions { lambda: 1e4, ..EwcOptions::default() }).unwrap();
    // a strong pull keeps the second stage nearer the first
    let drift = |s: &[Checkpoint]| s[1].params.max_abs_diff(&s[0].params).unwrap();
    assert!(drift(&strong) < drift(&ft));
    assert!(ewc_run(&corpora, &base, &trainer, &mask, &EwcOptions { lambda: -1.0, ..EwcOptions::default() }).is_err());
}

#[test]
fn replay_buffer_tracks_a_fraction_of_seen_data() {
    let mut buf = ReplayBuffer::new(0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let corpus = |tag: u32| -> Vec<Example> {
        (0..50).map(|i| Example { tokens: vec![tag, i], labels: vec![0, 0] }).collect()
    };
    buf.update(&corpus(0), &mut rng);
    assert_eq!(buf.sentences.len(), 5);
    buf.update(&corpus(1), &mut rng);
    assert_eq!(buf.sentences.len(), 10);
    assert_eq!(buf.seen, 100);
    let from_first = buf.sentences.iter().filter(|e| e.tokens[0] == 0).count();
    assert_eq!(from_first, 5);
    assert_eq!(buf.target_size(7), 1);
    assert!(ReplayBuffer::new(0.0).is_err());
    assert!(ReplayBuffer::new(1.5).is_err());
}

#[test]
fn replay_adds_an_epoch_over_the_buffer() {
    let config = tiny_config();
    let corpora = real_corpora(&config);
    let base = Checkpoint::base(&config).unwrap();
    let trainer = gradient_trainer();
    let mask = FreezeMask::none();
    let ft = finetune_run(&corpora, &base, &trainer, &mask).unwrap();
    let rp = replay_run(&corpora, &base, &trainer, &mask, &ReplayOptions::default()).unwrap();
    assert_eq!(ft[0].params, rp[0].params);
    assert_ne!(ft[1].params, rp[1].params);
}

#[test]
fn mtl_is_training_on_the_concatenation() {
    let config = tiny_config();
    let corpora = real_corpora(&config);
    let base = Checkpoint::base(&config).unwrap();
    let trainer = gradient_trainer();
    let joint = mtl_run(&corpora, &base, &trainer, &FreezeMask::none()).unwrap();
    let all: Vec<Example> = corpora.iter().flat_map(|c| c.examples.clone()).collect();
    let direct =
        train(&config, &base.params, &all, &trainer.hyper, &TrainingObjective::plain(), &FreezeMask::none()).unwrap();
    assert_eq!(joint.params, direct);
    assert_eq!(joint.cumulative_examples, 24);
}

#[test]
fn fisher_matches_finite_difference_scores() {
    let config = tiny_config();
    let examples = real_corpora(&config)[0].examples[..4].to_vec();
    let params = init_params(&config).unwrap();
    let fisher = fisher_diag(&config, &params, &examples, None, 0).unwrap();
    let plain = TrainingObjective::plain();
    let h = 1e-5;
    let mut probe = params.clone();
    for ti in 0..params.tensors().len() {
        for j in 0..params.tensors()[ti].data.len() {
            let orig = params.tensors()[ti].data[j];
            let mut expected = 0.0;
            for ex in &examples {
                let n = ex.tokens.len() as f64;
                let batch = std::slice::from_ref(ex);
                probe.tensors_mut()[ti].data[j] = orig + h;
                let up = loss(&config, &probe, batch, &plain).unwrap() * n;
                probe.tensors_mut()[ti].data[j] = orig - h;
                let down = loss(&config, &probe, batch, &plain).unwrap() * n;
                probe.tensors_mut()[ti].data[j] = orig;
                let score = (up - down) / (2.0 * h);
                expected += score * score / examples.len() as f64;
            }
            let got = fisher.tensors()[ti].data[j];
            assert!((got - expected).abs() <= 1e-6 * expected.abs().max(1e-3), "{got} vs {expected}");
        }
    }
    assert!(fisher.values().all(|v| v >= 0.0));
    let sampled = fisher_diag(&config, &params, &examples, Some(2), 1).unwrap();
    assert_ne!(sampled, fisher);
}
