//! Reference implementations used as test oracles. They only read the task
//! tables and never call into the planner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mappop_core::task::{ActionId, Effect, Formula, MapTask, TaskBuilder, Truth};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn relaxed(task: &MapTask, eff: &[Effect]) -> Vec<Formula> {
    let mut out = Vec::new();
    for e in eff {
        if e.assign {
            out.push(Formula::pos(e.var, e.value));
            for &d in task.symbols().domain(e.var) {
                if d != e.value {
                    out.push(Formula::neg(e.var, d));
                }
            }
        } else {
            out.push(Formula::neg(e.var, e.value));
        }
    }
    out
}

/// Level-by-level relaxed graph of the whole task, as one agent owning
/// every action would build it. Maps each reached formula to its first
/// level.
pub fn central_costs(task: &MapTask) -> BTreeMap<Formula, u32> {
    let mut cost: BTreeMap<Formula, u32> = task.init().iter().filter_map(|f| f.as_formula()).map(|f| (f, 0)).collect();
    for level in 0.. {
        let mut next = Vec::new();
        for a in task.actions() {
            if a.pre.iter().all(|p| cost.get(p).is_some_and(|&c| c <= level)) {
                next.extend(relaxed(task, &a.eff));
            }
        }
        let before = cost.len();
        for f in next {
            cost.entry(f).or_insert(level + 1);
        }
        if cost.len() == before {
            break;
        }
    }
    cost
}

/// A single-agent task with at most three ground actions, each with one
/// assignment and up to two positive preconditions, and one positive goal.
pub fn micro_task(seed: u64) -> MapTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TaskBuilder::new(&format!("micro-{seed}"));
    let a = b.agent("solo");
    let objs: Vec<_> = ["p", "q", "r"].iter().map(|n| b.object(n)).collect();
    let nvars = rng.gen_range(1..=2);
    let vars: Vec<_> = (0..nvars).map(|k| b.variable(&format!("x{k}"))).collect();
    for &v in &vars {
        b.grant(a, v, objs.iter().copied());
        b.init(a, v, *objs.choose(&mut rng).unwrap());
    }
    let nactions = rng.gen_range(1..=3);
    for k in 0..nactions {
        let npre = rng.gen_range(0..=nvars);
        let pre: Vec<Formula> =
            vars.choose_multiple(&mut rng, npre).map(|&v| Formula::pos(v, *objs.choose(&mut rng).unwrap())).collect();
        let eff = vec![Effect::assign(*vars.choose(&mut rng).unwrap(), *objs.choose(&mut rng).unwrap())];
        b.action(a, &format!("act{k}"), Vec::new(), pre, eff);
    }
    b.goal(a, Formula::pos(*vars.choose(&mut rng).unwrap(), *objs.choose(&mut rng).unwrap()));
    b.build().expect("micro task is well formed")
}

/// Producer and consumer of a causal link in a skeleton. Action steps are
/// numbered from zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum End {
    Init,
    Step(usize),
    Goal,
}

/// Actions of a plan plus its causal links, with steps renamed so that the
/// representation is the smallest over all renamings.
pub type Skeleton = (Vec<ActionId>, Vec<(End, End, Formula)>);

pub fn canonical(actions: &[ActionId], links: &[(End, End, Formula)]) -> Skeleton {
    let n = actions.len();
    let mut best: Option<Skeleton> = None;
    for perm in permutations(n) {
        let map = |e: End| match e {
            End::Step(i) => End::Step(perm[i]),
            other => other,
        };
        let mut acts = vec![ActionId(0); n];
        for (i, &a) in actions.iter().enumerate() {
            acts[perm[i]] = a;
        }
        let mut ls: Vec<_> = links.iter().map(|&(p, c, f)| (map(p), map(c), f)).collect();
        ls.sort();
        let cand = (acts, ls);
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    }
    best.expect("at least the identity permutation")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

fn entails(eff: &[Effect], f: &Formula) -> bool {
    eff.iter().any(|e| e.var == f.var && e.assign && e.value == f.value && f.positive)
}

fn clobbers(eff: &[Effect], f: &Formula) -> bool {
    eff.iter().any(|e| e.var == f.var && (e.assign != (e.value == f.value)))
}

/// Every solution plan of a micro task with at most `max_steps` action
/// steps, found by enumerating step multisets and producer choices. A
/// candidate counts when every step feeds some link and some total order
/// runs producers before consumers with no clobbering step in between.
pub fn brute_force_skeletons(task: &MapTask, max_steps: usize) -> BTreeSet<Skeleton> {
    assert_eq!(task.num_agents(), 1, "micro tasks have one agent");
    let ids: Vec<ActionId> = (0..task.actions().len()).map(ActionId::from).collect();
    let mut out = BTreeSet::new();
    for size in 0..=max_steps {
        for combo in multisets(&ids, size) {
            enumerate_links(task, &combo, &mut out);
        }
    }
    out
}

fn multisets(ids: &[ActionId], size: usize) -> Vec<Vec<ActionId>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for mut rest in multisets(&ids[i..], size - 1) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

fn enumerate_links(task: &MapTask, steps: &[ActionId], out: &mut BTreeSet<Skeleton>) {
    // every (consumer, formula) that needs a producer
    let mut needs: Vec<(End, Formula)> = Vec::new();
    for (i, &a) in steps.iter().enumerate() {
        needs.extend(task.action(a).pre.iter().map(|&f| (End::Step(i), f)));
    }
    needs.extend(task.goals().iter().map(|&f| (End::Goal, f)));
    let options: Vec<Vec<End>> = needs
        .iter()
        .map(|&(c, f)| {
            let mut o = Vec::new();
            if task.init().evaluate(&f) == Truth::True {
                o.push(End::Init);
            }
            for (j, &a) in steps.iter().enumerate() {
                if End::Step(j) != c && entails(&task.action(a).eff, &f) {
                    o.push(End::Step(j));
                }
            }
            o
        })
        .collect();
    let mut choice = vec![0; needs.len()];
    if options.iter().any(|o| o.is_empty()) {
        return;
    }
    loop {
        let links: Vec<(End, End, Formula)> =
            needs.iter().zip(&choice).enumerate().map(|(k, (&(c, f), &x))| (options[k][x], c, f)).collect();
        let useful = (0..steps.len()).all(|i| links.iter().any(|l| l.0 == End::Step(i)));
        if useful && has_safe_order(task, steps, &links) {
            out.insert(canonical(steps, &links));
        }
        // odometer over producer choices
        let mut k = 0;
        loop {
            if k == choice.len() {
                return;
            }
            choice[k] += 1;
            if choice[k] < options[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn has_safe_order(task: &MapTask, steps: &[ActionId], links: &[(End, End, Formula)]) -> bool {
    permutations(steps.len()).into_iter().any(|order| {
        // order[i] = position of step i
        let pos = |e: End| match e {
            End::Init => -1,
            End::Step(i) => order[i] as i64,
            End::Goal => steps.len() as i64,
        };
        links.iter().all(|&(p, c, f)| {
            pos(p) < pos(c)
                && (0..steps.len()).all(|t| {
                    let at = order[t] as i64;
                    !(pos(p) < at && at < pos(c)) || !clobbers(&task.action(steps[t]).eff, &f)
                })
        })
    })
}
