//! Generalizing extVar solutions by repeatedly instantiating extVar with
//! fresh constants and re-solving, until no extVar remains.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::extract::AbductiveSolution;
use crate::term::{Atom, TaskSpec, Term, Variant};

pub const DEFAULT_MAX_ITERS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GeneralizeError<E> {
    #[error("generalization needs the semiRes variant, task uses {0}")]
    VariantMismatch(Variant),
    #[error("solver failed: {0}")]
    Solve(E),
    #[error("no abductive solution after adding {added} fact(s)")]
    NoSolution { added: usize },
    #[error("extVar remains after {0} iterations")]
    CapReached(usize, GeneralizedSolution),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralizeOptions {
    pub max_iters: usize,
    /// Atom to instantiate when it occurs in the followed solution.
    pub pick: Option<Atom>,
}

impl Default for GeneralizeOptions {
    fn default() -> Self {
        GeneralizeOptions { max_iters: DEFAULT_MAX_ITERS, pick: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    /// Fact added before this solve; `None` for the initial solve.
    pub added: Option<String>,
    /// All optimal abduced sets, in solver order.
    pub optima: Vec<Vec<String>>,
    /// Index into `optima` of the branch followed.
    pub followed: usize,
    /// The extVar atom chosen for instantiation, if any.
    pub selected: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeneralizedSolution {
    /// Added facts plus the final solution, over fresh constants.
    pub abduced: Vec<String>,
    /// `abduced` with fresh constants replaced by variables.
    pub generalized: Vec<String>,
    pub var_map: BTreeMap<String, String>,
    pub trace: Vec<TraceStep>,
    pub exhausted: bool,
}

/// Variable name for the k-th fresh constant (1-based): Y, Z, then V3, V4...
pub fn var_name(k: usize) -> String {
    match k {
        1 => "Y".into(),
        2 => "Z".into(),
        _ => format!("V{k}"),
    }
}

fn rename(atom: &Atom, map: &BTreeMap<Term, Term>) -> Atom {
    Atom::new(atom.predicate.clone(), atom.args.iter().map(|t| map.get(t).cloned().unwrap_or_else(|| t.clone())).collect())
}

/// Runs the loop. `solve` returns the optimal solutions of a task in solver
/// order; the first one is followed.
pub fn generalize<E>(
    task: &TaskSpec,
    opts: &GeneralizeOptions,
    mut solve: impl FnMut(&TaskSpec) -> Result<Vec<AbductiveSolution>, E>,
) -> Result<GeneralizedSolution, GeneralizeError<E>> {
    if task.variant != Variant::SemiRes {
        return Err(GeneralizeError::VariantMismatch(task.variant));
    }
    let mut taken: BTreeSet<String> = task.constants();
    // Placeholders of an un-ground query share the v{i} namespace.
    for i in 1..=task.query.atom().variables().len() {
        taken.insert(format!("v{i}"));
    }
    let mut next_k = 1usize;
    let mut fresh: Vec<String> = Vec::new();

    let mut current = task.clone();
    let mut added: Vec<Atom> = Vec::new();
    let mut trace: Vec<TraceStep> = Vec::new();
    loop {
        let optima = solve(&current).map_err(GeneralizeError::Solve)?;
        let Some(first) = optima.first() else {
            return Err(GeneralizeError::NoSolution { added: added.len() });
        };
        let followed = first.clone();
        let target = opts
            .pick
            .as_ref()
            .filter(|p| p.contains_ext_var() && followed.abduced.contains(*p))
            .or_else(|| followed.abduced.iter().filter(|a| a.contains_ext_var()).min_by_key(|a| a.to_string()));
        trace.push(TraceStep {
            added: added.last().map(ToString::to_string),
            optima: optima.iter().map(AbductiveSolution::rendered).collect(),
            followed: 0,
            selected: target.map(ToString::to_string),
        });
        let Some(target) = target.cloned() else {
            return Ok(finish(&added, &followed, &fresh, trace, true));
        };
        if trace.len() > opts.max_iters {
            let partial = finish(&added, &followed, &fresh, trace, false);
            return Err(GeneralizeError::CapReached(opts.max_iters, partial));
        }
        let args = target
            .args
            .iter()
            .map(|t| {
                if *t != Term::ExtVar {
                    return t.clone();
                }
                let name = loop {
                    let name = format!("v{next_k}");
                    next_k += 1;
                    if !taken.contains(&name) {
                        break name;
                    }
                };
                fresh.push(name.clone());
                Term::constant(name)
            })
            .collect();
        let fact = Atom::new(target.predicate.clone(), args);
        current.user_facts.push(fact.clone());
        added.push(fact);
    }
}

fn finish(
    added: &[Atom],
    last: &AbductiveSolution,
    fresh: &[String],
    trace: Vec<TraceStep>,
    exhausted: bool,
) -> GeneralizedSolution {
    let all: BTreeSet<&Atom> = added.iter().chain(last.abduced.iter()).collect();
    let map: BTreeMap<Term, Term> =
        fresh.iter().enumerate().map(|(i, c)| (Term::constant(c.clone()), Term::var(var_name(i + 1)))).collect();
    let mut generalized: Vec<String> = all.iter().map(|a| rename(a, &map).to_string()).collect();
    generalized.sort();
    GeneralizedSolution {
        abduced: all.iter().map(ToString::to_string).collect(),
        generalized,
        var_map: fresh.iter().enumerate().map(|(i, c)| (c.clone(), var_name(i + 1))).collect(),
        trace,
        exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_ground_atom, parse_rules, parse_task};
    use alloc::vec;

    fn sol(atoms: &[&str]) -> AbductiveSolution {
        AbductiveSolution { abduced: atoms.iter().map(|a| parse_ground_atom(a).unwrap()).collect(), holds: BTreeSet::new() }
    }

    fn task(variant: &str) -> TaskSpec {
        let rules = parse_rules("r", "relA(X):-relB(X,Y),relC(X,Y).").unwrap().value;
        let text = format!("{{\"query\":\"relA(john)\",\"depth\":4,\"variant\":\"{variant}\"}}");
        parse_task("t", &text, &rules).unwrap().value
    }

    /// Plays back a fixed answer per number of user facts.
    fn scripted(steps: Vec<Vec<AbductiveSolution>>) -> impl FnMut(&TaskSpec) -> Result<Vec<AbductiveSolution>, ()> {
        move |t: &TaskSpec| Ok(steps[t.user_facts.len()].clone())
    }

    #[test]
    fn walks_until_no_ext_var() {
        let steps = vec![
            vec![sol(&["relB(john,extVar)", "relC(john,extVar)"])],
            vec![sol(&["relC(john,v1)"])],
        ];
        let g = generalize(&task("semiRes"), &GeneralizeOptions::default(), scripted(steps)).unwrap();
        assert!(g.exhausted);
        assert_eq!(g.trace.len(), 2);
        assert_eq!(g.trace[0].added, None);
        assert_eq!(g.trace[0].selected.as_deref(), Some("relB(john,extVar)"));
        assert_eq!(g.trace[1].added.as_deref(), Some("relB(john,v1)"));
        assert_eq!(g.abduced, ["relB(john,v1)", "relC(john,v1)"]);
        assert_eq!(g.generalized, ["relB(john,Y)", "relC(john,Y)"]);
        assert_eq!(g.var_map.get("v1").map(String::as_str), Some("Y"));
    }

    #[test]
    fn pick_overrides_selection() {
        let steps = vec![vec![sol(&["relB(john,extVar)", "relC(john,extVar)"])], vec![sol(&["relB(john,v1)"])]];
        let opts = GeneralizeOptions { pick: Some(parse_ground_atom("relC(john,extVar)").unwrap()), ..Default::default() };
        let g = generalize(&task("semiRes"), &opts, scripted(steps)).unwrap();
        assert_eq!(g.trace[1].added.as_deref(), Some("relC(john,v1)"));
    }

    #[test]
    fn immediate_exhaustion_and_errors() {
        let g = generalize(&task("semiRes"), &GeneralizeOptions::default(), scripted(vec![vec![sol(&["relB(john,mary)"])]]))
            .unwrap();
        assert!(g.exhausted && g.var_map.is_empty() && g.trace.len() == 1);

        let err = generalize(&task("res"), &GeneralizeOptions::default(), scripted(vec![])).unwrap_err();
        assert_eq!(err, GeneralizeError::VariantMismatch(Variant::Res));

        let err = generalize(&task("semiRes"), &GeneralizeOptions::default(), scripted(vec![vec![]])).unwrap_err();
        assert_eq!(err, GeneralizeError::NoSolution { added: 0 });

        // Never loses its extVar: stops at the cap with a partial result.
        let stuck = |_: &TaskSpec| Ok::<_, ()>(vec![sol(&["relB(john,extVar)"])]);
        let opts = GeneralizeOptions { max_iters: 3, pick: None };
        match generalize(&task("semiRes"), &opts, stuck).unwrap_err() {
            GeneralizeError::CapReached(3, partial) => {
                assert!(!partial.exhausted);
                assert_eq!(partial.trace.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fresh_constants_skip_task_constants() {
        let rules = parse_rules("r", "relA(X):-relB(X,Y),relC(v1).").unwrap().value;
        let t = parse_task("t", "{\"query\":\"relA(john)\",\"depth\":2,\"variant\":\"semiRes\"}", &rules).unwrap().value;
        let steps = vec![vec![sol(&["relB(john,extVar)"])], vec![sol(&[])]];
        let g = generalize(&t, &GeneralizeOptions::default(), scripted(steps)).unwrap();
        assert_eq!(g.trace[1].added.as_deref(), Some("relB(john,v2)"));
        assert_eq!(g.var_map.get("v2").map(String::as_str), Some("Y"));
    }
}
