//! Baseline behaviour on real digits. Skipped with a note when the MNIST files
//! are not present.

use interference::baseline::{evaluate_baseline, forward_loss_grad, input_attention, train_baseline, BaselineConfig};
use interference::codec::Preprocess;
use interference::mnist::Mnist;
use interference::trainer::{plan, FewShotSpec, Schedule};

fn mnist() -> Option<Mnist> {
    match Mnist::load(Mnist::default_dir()) {
        Ok(m) => Some(m),
        Err(e) => {
            eprintln!("skipping: {e}");
            None
        }
    }
}

const LABELS: [u8; 4] = [0, 1, 2, 4];

#[test]
fn training_loss_falls_over_epochs() {
    let Some(mnist) = mnist() else { return };
    let pre = Preprocess::default();
    for seed in 0..3 {
        let spec = FewShotSpec::new(LABELS.to_vec(), 5, 10, Schedule::Mixed, seed).unwrap();
        let (model, _) = train_baseline(&spec, &mnist.train, &pre, BaselineConfig::default()).unwrap();
        let first = FewShotSpec {
            epochs: 1,
            ..spec.clone()
        };
        let (early, _) = train_baseline(&first, &mnist.train, &pre, BaselineConfig::default()).unwrap();
        let pool_loss = |m| {
            plan(&first, &mnist.train)
                .unwrap()
                .iter()
                .map(|s| {
                    let x = input_attention(&pre.signals(&mnist.train[s.image]));
                    forward_loss_grad(m, &x, LABELS.iter().position(|&l| l == s.label).unwrap()).0
                })
                .sum::<f64>()
        };
        assert!(pool_loss(&model) < pool_loss(&early), "seed {seed}");
        assert!(model.is_finite());
    }
}

/// Sequential training should leave the first-trained class worse off than
/// mixed training does.
#[test]
fn sequential_training_hurts_the_first_class() {
    let Some(mnist) = mnist() else { return };
    let pre = Preprocess::default();
    let test: Vec<_> = mnist
        .test
        .iter()
        .filter(|i| LABELS.contains(&i.label))
        .cloned()
        .collect();
    let (mut seq, mut mix) = (0.0, 0.0);
    for seed in 0..5 {
        for (schedule, slot) in [(Schedule::Sequential, &mut seq), (Schedule::Mixed, &mut mix)] {
            let spec = FewShotSpec::new(LABELS.to_vec(), 5, 1, schedule, seed).unwrap();
            let (model, _) = train_baseline(&spec, &mnist.train, &pre, BaselineConfig::default()).unwrap();
            *slot += evaluate_baseline(&model, &LABELS, &test, &pre).class_accuracy(0) / 5.0;
        }
    }
    println!("first-class accuracy: sequential {seq:.4}, mixed {mix:.4}");
    assert!(seq < mix, "sequential {seq:.4} is not below mixed {mix:.4}");
}
