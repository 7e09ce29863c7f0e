mod common;

use proptest::prelude::*;
use sentinel_core::labeler::{label_walk, EpisodeCategory, LabelerConfig, PhaseLabel};
use sentinel_core::{ActionKind, Pose};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_the_oracle(seed in any::<u64>(), p in 1usize..6) {
        let walk = common::random_walk(&mut common::rng(seed));
        let got = label_walk(&walk.poses, &walk.actions, &walk.path, &LabelerConfig { patience: p }).unwrap();
        let want = common::label_oracle(&walk.poses, &walk.actions, &walk.path, p);
        prop_assert_eq!(&got.labels, &want.labels);
        prop_assert_eq!(&got.target_indices, &want.targets);
        prop_assert_eq!(got.truncated_at, want.truncated_at);
        prop_assert_eq!(&got.delta_distances, &want.deltas);
    }

    #[test]
    fn category_agrees_with_labels(seed in any::<u64>(), p in 1usize..6) {
        let walk = common::random_walk(&mut common::rng(seed));
        let got = label_walk(&walk.poses, &walk.actions, &walk.path, &LabelerConfig { patience: p }).unwrap();
        let expected = match (got.labels.first(), got.onset()) {
            (_, None) => EpisodeCategory::OnlyN,
            (Some(PhaseLabel::Anomaly), _) => EpisodeCategory::OnlyA,
            _ => EpisodeCategory::NtoA,
        };
        prop_assert_eq!(got.category, expected);
        if let Some(t) = got.truncated_at {
            prop_assert_eq!(got.labels.len(), t + 1);
        }
    }
}

#[test]
fn advancing_a_waypoint_resets_the_delta() {
    let path = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
    let poses = [Pose::new(0.0, 0.0, 0.0, 0.0), Pose::new(1.0, 0.3, 0.0, 0.0), Pose::new(1.0, 0.9, 0.0, 0.0)];
    let actions = [ActionKind::Forward(0.25); 3];
    let got = label_walk(&poses, &actions, &path, &LabelerConfig::default()).unwrap();
    assert_eq!(got.target_indices, vec![0, 1, 1]);
    assert_eq!(got.delta_distances[1], 0.0);
    assert!(got.delta_distances[2] > 0.0);
}

#[test]
fn straight_walk_off_the_path_latches_from_the_first_bad_step() {
    let path: Vec<[f64; 2]> = (0..10).map(|i| [0.25 * i as f64, 0.0]).collect();
    let mut poses: Vec<Pose> = (0..4).map(|i| Pose::new(0.25 * i as f32, 0.0, 0.0, 0.0)).collect();
    poses.extend((1..=6).map(|j| Pose::new(0.75, 0.25 * j as f32, 0.0, 0.0)));
    let actions = vec![ActionKind::Forward(0.25); poses.len()];
    let got = label_walk(&poses, &actions, &path, &LabelerConfig { patience: 3 }).unwrap();
    assert_eq!(got.onset(), Some(3));
    assert_eq!(got.category, EpisodeCategory::NtoA);
    assert_eq!(got.truncated_at, None);
}
