mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use mappop_core::bus::{Bus, Mode};
use mappop_core::coordinator::{solve, SolveConfig};
use mappop_core::frontend::load_dir;
use mappop_core::harness::{parse_plan, random_shared_task, random_task, rebuild_plan, write_plan, Band};
use mappop_core::pop::{refine, refinement_plans, PartialPlan, RefineConfig, GOAL_STEP, INIT_STEP};
use mappop_core::rpg::{build_dis_rpg, build_initial_rpg};
use mappop_core::task::{ActionId, Effect, Formula, MapTask, TaskBuilder};
use mappop_core::validator::{coupling_level, metrics, validate};
use proptest::prelude::*;

use common::{brute_force_skeletons, canonical, central_costs, micro_task, End, Skeleton};

const CORPUS: [&str; 6] = ["logistics-1", "logistics-2", "rovers-2", "rovers-3", "satellite-2", "satellite-3"];

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn skeleton_of(plan: &PartialPlan) -> Skeleton {
    let steps: Vec<_> = plan.action_steps().collect();
    let end = |s| match s {
        INIT_STEP => End::Init,
        GOAL_STEP => End::Goal,
        s => End::Step(steps.iter().position(|&(id, _, _)| id == s).unwrap()),
    };
    let links: Vec<_> = plan.links.iter().map(|l| (end(l.producer), end(l.consumer), l.formula)).collect();
    let actions: Vec<_> = steps.iter().map(|&(_, a, _)| a).collect();
    canonical(&actions, &links)
}

fn search_skeletons(task: &MapTask, max_steps: usize) -> BTreeSet<Skeleton> {
    let cfg = RefineConfig {
        max_expansions: 1_000_000,
        max_plans: usize::MAX,
        max_new_steps: Some(max_steps),
        ..RefineConfig::default()
    };
    let agent = task.agent_ids().next().unwrap();
    let base = PartialPlan::initial(task);
    let goal = *base.open_goals.iter().next().unwrap();
    let steps = refine(task, &base, goal, agent, &build_initial_rpg(agent, task), &cfg);
    refinement_plans(task, &base, &steps).iter().map(skeleton_of).collect()
}

#[test]
fn single_move_has_one_skeleton() {
    let mut b = TaskBuilder::new("one-move");
    let a = b.agent("solo");
    let x = b.variable("x");
    let [p, q, r] = ["p", "q", "r"].map(|n| b.object(n));
    b.grant(a, x, [p, q, r]);
    b.init(a, x, p);
    b.action(a, "go", vec![], vec![Formula::pos(x, p)], vec![Effect::assign(x, q)]);
    b.action(a, "stray", vec![], vec![Formula::pos(x, q)], vec![Effect::assign(x, r)]);
    b.goal(a, Formula::pos(x, q));
    let t = b.build().unwrap();
    let go = ActionId::from(t.actions().iter().position(|a| a.name == "go").unwrap());
    let only: Skeleton =
        (vec![go], vec![(End::Init, End::Step(0), Formula::pos(x, p)), (End::Step(0), End::Goal, Formula::pos(x, q))]);
    assert_eq!(brute_force_skeletons(&t, 3), BTreeSet::from([only.clone()]));
    assert_eq!(search_skeletons(&t, 3), BTreeSet::from([only]));
}

#[test]
fn plan_files_round_trip() {
    for name in CORPUS {
        let t = load_dir(&corpus(name)).unwrap();
        let report = solve(&t, &SolveConfig::default()).unwrap();
        let plan = report.plan().unwrap();
        let text = write_plan(&t, plan, name);
        let file = parse_plan(&text).unwrap();
        assert_eq!(file.claimed, Some(metrics(plan, &t)), "{name}");
        let rebuilt = rebuild_plan(&t, &file).unwrap();
        let r = validate(&rebuilt, &t);
        assert!(r.is_valid(), "{name}: {r}");
        assert_eq!(r.metrics, metrics(plan, &t), "{name}");
        assert_eq!(write_plan(&t, &rebuilt, name), text, "{name}");
    }
}

#[test]
fn parallel_agents_find_the_same_plans() {
    let seq = SolveConfig::default();
    let par = SolveConfig { mode: Mode::Parallel, ..SolveConfig::default() };
    let mut tasks: Vec<(String, MapTask)> = CORPUS.iter().map(|n| (n.to_string(), load_dir(&corpus(n)).unwrap())).collect();
    tasks.extend((0..6).map(|s| (format!("random {s}"), random_task(s, Band::ALL[s as usize % 3]))));
    for (name, t) in tasks {
        let a = solve(&t, &seq).unwrap();
        let b = solve(&t, &par).unwrap();
        assert_eq!(a.plan().map(|p| write_plan(&t, p, "x")), b.plan().map(|p| write_plan(&t, p, "x")), "{name}");
        assert_eq!(a.trace.export(&t), b.trace.export(&t), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributed_graph_matches_the_centralized_one(seed in 0u64..10_000, parallel in any::<bool>()) {
        let t = random_shared_task(seed);
        let expected = central_costs(&t);
        let mode = if parallel { Mode::Parallel } else { Mode::Sequential };
        let mut bus = Bus::with_mode(&t, mode);
        let dis = build_dis_rpg(&t, &mut bus).unwrap();
        for a in t.agent_ids() {
            prop_assert_eq!(dis.graph(a).cost_map(), expected.clone());
        }
    }

    #[test]
    fn refinement_search_enumerates_every_small_plan(seed in 1_000u64..100_000) {
        let t = micro_task(seed);
        prop_assert_eq!(search_skeletons(&t, 3), brute_force_skeletons(&t, 3));
    }

    #[test]
    fn random_tasks_land_in_their_band(seed in 0u64..10_000, band in 0usize..3) {
        let band = Band::ALL[band];
        let t = random_task(seed, band);
        prop_assert_eq!(Band::of(coupling_level(&t)), band);
        prop_assert!(!t.goals().is_empty());
    }
}
