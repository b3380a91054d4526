//! FineTune against WEAVER on a three-corpus synthetic suite.
//!
//! cargo run --release -p weaver-core --example forgetting

use weaver_core::cl::{finetune_run, weaver_run, Checkpoint, GradientTrainer, WeaverOptions};
use weaver_core::data::{generate_suite, SuiteConfig};
use weaver_core::eval::{backward_transfer, result_matrix};
use weaver_core::experiment::prepare_order;
use weaver_core::model::{Context, FreezeMask, Hyperparams, ModelConfig};

fn main() -> weaver_core::Result<()> {
    let suite = generate_suite(&SuiteConfig::small(3, 200, 0.3, 7))?;
    let model = ModelConfig {
        vocab_size: 5000,
        embed_dim: 16,
        num_layers: 1,
        hidden_dim: 32,
        num_labels: 3,
        context: Context::Full,
        seed: 0,
    };
    let data = prepare_order(&suite, &[0, 1, 2], &model, 4998)?;
    let base = Checkpoint::base(&data.model)?;
    let trainer = GradientTrainer::new(Hyperparams { learning_rate: 0.05, grad_clip: Some(1.0), ..Hyperparams::default() });
    let mask = FreezeMask::none();

    let runs = [
        ("finetune", finetune_run(&data.train, &base, &trainer, &mask)?),
        ("weaver", weaver_run(&data.train, &base, &trainer, &mask, &WeaverOptions::default())?),
    ];
    for (name, stages) in runs {
        let m = result_matrix(&stages, &data.tests, &base, &data.encoding)?;
        println!("{name}: rows = after stage, columns = test set");
        for row in &m.r {
            println!("  {}", row.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("  "));
        }
        println!("  final average {:.3}, BWT {:.3}", m.final_average(), backward_transfer(&m)?);
    }
    Ok(())
}
