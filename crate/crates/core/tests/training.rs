mod common;

use gazeatt::data::{Domain, PreparedSample};
use gazeatt::losses::LossConfig;
use gazeatt::model::Model;
use gazeatt::nn::Group;
use gazeatt::optim::AdamConfig;
use gazeatt::train::{fit, Task, TrainConfig, Trainer};

#[test]
fn each_task_alone_leaves_the_rest_of_the_network_untouched() {
    for task in Task::ORDER {
        let (leaked, moved) = common::freeze_check(task, 10, 5);
        assert!(leaked.is_empty(), "{task} changed {leaked:?}");
        let mut want: Vec<Group> = task.mask().groups.iter().collect();
        want.sort();
        let mut moved = moved;
        moved.sort();
        assert_eq!(moved, want, "{task}");
    }
}

#[test]
fn small_corpus_is_memorized() {
    let cfg = common::model_config(64);
    let mut data = common::corpus(Domain::GazeFollowLike, 20, 11, Some(1.0), &cfg);
    data.extend(common::corpus(Domain::GazeFollowLike, 10, 12, Some(0.0), &cfg));
    data.extend(common::corpus(Domain::EyediapLike, 10, 13, None, &cfg));
    data.extend(common::corpus(Domain::SynHeadLike, 10, 14, None, &cfg));
    let all: Vec<&PreparedSample> = data.iter().collect();
    let mut t = Trainer::new(
        Model::new(cfg.clone(), 1).unwrap(),
        AdamConfig { learning_rate: 3e-3, ..AdamConfig::default() },
        LossConfig::default(),
    );
    let before: Vec<f64> = Task::ORDER.iter().map(|&k| common::task_loss(&t, k, &all, false)).collect();
    for step in 0..300 {
        t.training_step(&all, step).unwrap();
    }
    for (k, b) in Task::ORDER.iter().zip(before) {
        let after = common::task_loss(&t, *k, &all, false);
        assert!(after <= 0.5 * b, "{k}: {b} -> {after}");
    }
}

#[test]
fn fixation_loss_falls_over_two_epochs() {
    let model = common::model_config(64);
    let data = common::corpus(Domain::GazeFollowLike, 200, 21, None, &model);
    let cfg = TrainConfig {
        epochs: 2,
        model,
        ..TrainConfig::default()
    };
    let all: Vec<&PreparedSample> = data.iter().collect();
    let mut t = Trainer::from_config(&cfg).unwrap();
    let first = common::task_loss(&t, Task::Fixation, &all, false);
    fit(&mut t, &data, &cfg, None).unwrap();
    let last = common::task_loss(&t, Task::Fixation, &all, false);
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn training_log_is_reproducible() {
    let model = common::model_config(48);
    let mut data = common::corpus(Domain::GazeFollowLike, 40, 31, None, &model);
    data.extend(common::corpus(Domain::EyediapLike, 20, 32, None, &model));
    let cfg = TrainConfig {
        epochs: 1,
        model,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let mut t = Trainer::from_config(&cfg).unwrap();
        let out = fit(&mut t, &data, &cfg, None).unwrap();
        serde_json::to_string(&out.history).unwrap()
    };
    assert_eq!(run(), run());
}
