//! Episode-level invariants over randomized configurations.

use proptest::prelude::*;

use roamtell::harness::{AgentKind, Episode, EpisodeConfig, WorldSource};
use roamtell::metrics::{assignment_iou, ed_s, SimilarityTable};
use roamtell::rewards::RewardKind;
use roamtell::speaker::default_synonyms;
use roamtell::world::WorldParams;

const REWARDS: [RewardKind; 5] =
    [RewardKind::Curiosity, RewardKind::Coverage, RewardKind::Anticipation, RewardKind::ImpactGrid, RewardKind::ImpactDme];

fn config(world: u64, seed: u64, reward: usize, random: bool) -> EpisodeConfig {
    EpisodeConfig {
        world: WorldSource::Generated { seed: world, params: WorldParams::new(8.0, 2, 4) },
        seed,
        steps: 60,
        map_size: 321,
        reward: REWARDS[reward],
        agent: if random { AgentKind::Random } else { AgentKind::Navigator },
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episodes_respect_step_invariants(world in 0u64..1000, seed in 0u64..1000, reward in 0usize..5, random: bool) {
        let mut ep = Episode::new(&config(world, seed, reward, random)).unwrap();
        let mut explored = ep.map().explored_count();
        while ep.step().unwrap() {
            let now = ep.map().explored_count();
            prop_assert!(now >= explored, "explored shrank {explored} -> {now}");
            explored = now;
            // Noiseless odometry, no scan matching: the estimate is the truth
            // once moved from the episode frame into the world frame.
            let rec = ep.records().last().unwrap();
            prop_assert!(ep.spawn().compose(&rec.est_pose).distance_to(&rec.true_pose) <= 1e-9);
            let r = &rec.rewards;
            prop_assert!(r.coverage >= 0.0 && r.curiosity >= 0.0 && r.impact >= 0.0);
        }
        let log = ep.finish();
        prop_assert!(log.steps.len() as u64 <= 60);
        let rep = &log.footer.report;
        for v in [rep.map_iou, rep.pct_area_seen, rep.loquacity / 100.0, rep.align_mean, rep.assignment_iou, rep.ed_s] {
            prop_assert!(v.is_finite() && (0.0..=1.0).contains(&v), "{v}");
        }
        prop_assert!(rep.map_acc.is_finite() && rep.area_seen >= rep.map_acc);
    }

    #[test]
    fn matched_pair_never_lowers_iou(
        nouns in prop::collection::vec(0usize..8, 0..6),
        objects in prop::collection::vec(0usize..8, 0..6),
        extra in 0usize..8,
    ) {
        let words = ["chair", "table", "couch", "sofa", "bed", "tv", "sink", "oven"];
        let to_words = |v: &[usize]| v.iter().map(|&k| words[k].to_string()).collect::<Vec<_>>();
        let sim = SimilarityTable::new(Vec::new(), default_synonyms());
        let (mut n, mut o) = (to_words(&nouns), to_words(&objects));
        let before = assignment_iou(&n, &o, &sim);
        prop_assert_eq!(before, assignment_iou(&o, &n, &sim));
        n.push(words[extra].to_string());
        o.push(words[extra].to_string());
        prop_assert!(assignment_iou(&n, &o, &sim) >= before);
    }

    #[test]
    fn eds_is_zero_when_any_factor_is(a in 0.0f64..=1.0, b in 0.0f64..=1.0, zero in 0usize..3) {
        let mut f = [a, b, 1.0];
        f[zero] = 0.0;
        prop_assert_eq!(ed_s(f[0], f[1], f[2]), 0.0);
        prop_assert!((0.0..=1.0).contains(&ed_s(a, b, 1.0)));
    }
}
