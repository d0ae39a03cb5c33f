//! Invariants over generated inputs.

mod common;

use common::brute_visibility;
use guidebot_core::harness::{canonical, run, ClientMessage, Command, Look, Scenario, Transcript};
use guidebot_core::social_state::{fuse, p_distance, p_head_pose, FusionConfig};
use guidebot_core::svp::{compute_visibility_grid, Landmark};
use guidebot_core::{Cell, OccupancyGrid, Point2, Polygon};
use proptest::prelude::*;
use serde_json::json;

fn grid_strategy() -> impl Strategy<Value = (OccupancyGrid, Vec<Point2>)> {
    (2usize..12, 2usize..12, prop_oneof![Just(0.5), Just(1.0)]).prop_flat_map(|(w, h, res)| {
        (
            proptest::collection::vec(proptest::bool::weighted(0.2), w * h),
            proptest::collection::vec((-1.0f64..(w as f64 * res + 1.0), -1.0f64..(h as f64 * res + 1.0)), 1..6),
        )
            .prop_map(move |(blocked, pts)| {
                let mut g = OccupancyGrid::new(Point2::new(0.0, 0.0), res, w, h);
                for (i, b) in blocked.into_iter().enumerate() {
                    g.set_blocked(Cell { col: i % w, row: i / w }, b);
                }
                (g, pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
            })
    })
}

proptest! {
    #[test]
    fn visibility_counts_are_bounded_and_exact((grid, samples) in grid_strategy()) {
        let lm = Landmark { id: "x".into(), aim: samples[0], samples: samples.clone() };
        let v = compute_visibility_grid(&grid, &lm).unwrap();
        prop_assert_eq!(&v.visible, &brute_visibility(&grid, &samples));
        for cell in grid.cells() {
            let n = v.visible[cell.row * grid.width + cell.col];
            prop_assert!(n as usize <= samples.len());
            if grid.is_blocked(cell) {
                prop_assert_eq!(n, 0);
            }
        }
    }

    #[test]
    fn attention_components_stay_in_unit_range(
        yaw in -10.0f64..10.0, pitch in -3.0f64..3.0, d in -5.0f64..50.0,
        c in proptest::array::uniform4(0.0f64..=1.0), w in proptest::array::uniform4(0.0f64..1.0),
    ) {
        let cfg = FusionConfig::default();
        prop_assert!((0.0..=1.0).contains(&p_head_pose(yaw, pitch, &cfg)));
        prop_assert!((0.0..=1.0).contains(&p_distance(d, &cfg)));
        let s: f64 = w.iter().sum();
        prop_assume!(s > 1e-6);
        let w = w.map(|x| x / s);
        prop_assert!((0.0..=1.0).contains(&fuse(c, w)));
    }

    #[test]
    fn canonical_is_idempotent(a in -1e5f64..1e5, b in any::<i64>(), key in "[a-z]{1,6}") {
        let v = json!({key.clone(): a, "z": [a, b], "a": {"n": a}});
        let once = canonical(v);
        prop_assert_eq!(canonical(once.clone()), once);
    }

    #[test]
    fn scenario_documents_round_trip(seed in any::<u64>(), ticks in 1u64..1000) {
        let s = Scenario::from_json(&format!(r#"{{"name": "p", "seed": {seed}, "max_ticks": {ticks}}}"#)).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(Scenario::from_json(&text).unwrap(), s);
    }

    #[test]
    fn polygon_centroid_of_rect_is_inside(x in -20.0f64..20.0, y in -20.0f64..20.0, w in 0.01f64..10.0, h in 0.01f64..10.0) {
        let r = Polygon::rect(Point2::new(x, y), Point2::new(x + w, y + h));
        prop_assert!(r.contains(&r.centroid()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fuzzed_transcripts_parse_back(seed in 0u64..100_000) {
        let s = common::fuzz_scenario(seed);
        let text = run(&s).unwrap().to_jsonl();
        prop_assert_eq!(Transcript::from_jsonl(&text).unwrap().to_jsonl(), text);
    }
}

fn point() -> impl Strategy<Value = Point2> {
    (-50.0f64..50.0, -50.0f64..50.0).prop_map(|(x, y)| Point2::new(x, y))
}

fn command() -> impl Strategy<Value = Command> {
    let id = "[a-z][a-z0-9]{0,5}";
    let look = prop_oneof![
        Just(Look::Robot),
        Just(Look::Screen),
        Just(Look::Away),
        (-3.0f64..3.0).prop_map(Look::Yaw),
        point().prop_map(Look::At),
    ];
    prop_oneof![
        (id, point(), proptest::option::of("[a-z ]{0,12}")).prop_map(|(person, at, label)| Command::Spawn { person, at, label }),
        (id, point()).prop_map(|(person, to)| Command::Move { person, to }),
        (id, look, -1.0f64..1.0).prop_map(|(person, look, pitch)| Command::Head { person, look, pitch }),
        (id, ".{0,30}").prop_map(|(person, text)| Command::Utter { person, text }),
        (id, any::<bool>()).prop_map(|(person, on)| Command::Speaking { person, on }),
        Just(Command::Pause),
        Just(Command::Resume),
        (id, "[a-z_]{1,10}").prop_map(|(person, place)| Command::Goal { person, goal: json!({"kind": "guidance", "place": place}) }),
    ]
}

proptest! {
    #[test]
    fn commands_round_trip_through_the_wire(cmd in command()) {
        let msg = ClientMessage::Command(cmd);
        let line = serde_json::to_string(&msg).unwrap();
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(ClientMessage::parse(&line).unwrap(), msg);
    }
}
