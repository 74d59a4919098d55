//! Deterministic corpus of small simple tasks: no negation, at most three
//! rules, predicates of arity at most two, constants from {a, b, c}, depth
//! 1 to 3, ground queries, variant res.

use abductor::pipeline::{load, Overrides};
use abductor_core::oracle::{build_universe, candidate_space, DEFAULT_CANDIDATE_CAP, DEFAULT_UNIVERSE_CAP};
use abductor_core::validate::classify_simple;
use abductor_core::TaskSpec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x0005_eeda_bd0c;
pub const MIN_TASKS: usize = 50;

const PREDS: [&str; 4] = ["p", "q", "r", "s"];
const VARS: [&str; 3] = ["X", "Y", "Z"];
const CONSTS: [&str; 3] = ["a", "b", "c"];

#[derive(Clone, Debug)]
pub struct CorpusTask {
    pub name: String,
    pub rules: String,
    pub json: String,
    pub task: TaskSpec,
}

fn atom(pred: &str, args: &[&str]) -> String {
    if args.is_empty() {
        pred.to_string()
    } else {
        format!("{pred}({})", args.join(","))
    }
}

fn rule(rng: &mut ChaCha8Rng, arities: &[usize; 4], head: usize) -> Option<String> {
    let n_body = rng.gen_range(1..=2);
    let mut body = Vec::new();
    let mut body_vars: Vec<&str> = Vec::new();
    for _ in 0..n_body {
        let p = rng.gen_range(1..4);
        let args: Vec<&str> = (0..arities[p])
            .map(|_| if rng.gen_bool(0.8) { *VARS.choose(rng).unwrap() } else { *CONSTS.choose(rng).unwrap() })
            .collect();
        for v in args.iter().filter(|a| VARS.contains(a)) {
            if !body_vars.contains(v) {
                body_vars.push(v);
            }
        }
        body.push(atom(PREDS[p], &args));
    }
    if body_vars.len() < arities[head] {
        return None;
    }
    Some(format!("{}:-{}.", atom(PREDS[head], &body_vars[..arities[head]]), body.join(",")))
}

fn candidate(rng: &mut ChaCha8Rng, i: usize) -> Option<CorpusTask> {
    let arities = [rng.gen_range(1..=2), rng.gen_range(0..=2), rng.gen_range(0..=2), rng.gen_range(0..=2)];
    let n_rules = rng.gen_range(1..=3);
    let mut rules = Vec::new();
    for k in 0..n_rules {
        let head = if k == 0 { 0 } else { rng.gen_range(0..3) };
        rules.push(rule(rng, &arities, head)?);
    }
    let query_args: Vec<&str> = (0..arities[0]).map(|_| *CONSTS.choose(rng).unwrap()).collect();
    let mut block = Vec::new();
    if rng.gen_bool(0.8) {
        block.push(atom("p", &vec!["_"; arities[0]]));
    }
    if rng.gen_bool(0.3) {
        let p = rng.gen_range(1..4);
        block.push(atom(PREDS[p], &vec!["_"; arities[p]]));
    }
    let mut facts = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let p = rng.gen_range(1..4);
        let args: Vec<&str> = (0..arities[p]).map(|_| *CONSTS.choose(rng).unwrap()).collect();
        let f = atom(PREDS[p], &args);
        if !facts.contains(&f) {
            facts.push(f);
        }
    }
    let depth = rng.gen_range(1..=3);
    let quote = |v: &[String]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(",");
    let json = format!(
        r#"{{"query":"{}","depth":{depth},"variant":"res","block":[{}],"facts":[{}]}}"#,
        atom("p", &query_args),
        quote(&block),
        quote(&facts)
    );
    let rules = rules.join("\n");
    let task = load("corpus.lp", &rules, "corpus.json", &json, &Overrides::default()).ok()?.task;
    if !classify_simple(&task).is_simple {
        return None;
    }
    let universe = build_universe(&task, DEFAULT_UNIVERSE_CAP).ok()?;
    if candidate_space(&task, &universe).len() > DEFAULT_CANDIDATE_CAP {
        return None;
    }
    Some(CorpusTask { name: format!("corpus-{i:03}"), rules, json, task })
}

/// The first `count` accepted tasks from the fixed seed.
pub fn tasks(count: usize) -> Vec<CorpusTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < count {
        if let Some(t) = candidate(&mut rng, i) {
            out.push(t);
        }
        i += 1;
        assert!(i < 100_000, "corpus generator accepts too few tasks");
    }
    out
}

#[test]
fn corpus_is_deterministic_and_in_range() {
    let a = tasks(MIN_TASKS);
    let b = tasks(MIN_TASKS);
    assert_eq!(a.iter().map(|t| &t.json).collect::<Vec<_>>(), b.iter().map(|t| &t.json).collect::<Vec<_>>());
    for t in &a {
        assert!(t.task.rules.rules.len() <= 3);
        assert!((1..=3).contains(&t.task.depth));
        assert!(t.task.constants().len() <= 3, "{}", t.name);
    }
}
