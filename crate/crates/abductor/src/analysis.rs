//! Solver-backed checks: assisted solution checking, solver-vs-oracle
//! comparison, the term-substitution check and the abstract-graph
//! cross-check against the solver.

use std::collections::BTreeSet;

use abductor_core::encoder::{emit_ag1, emit_ag3, skolemize};
use abductor_core::extract::{extract_solution, AbductiveSolution};
use abductor_core::generalize::{generalize, GeneralizeError, GeneralizeOptions, GeneralizedSolution};
use abductor_core::oracle::{
    brute_force_abduce, build_universe, check_general_solution, ConditionResult, Entailment, OracleError,
    SolutionCheck, DEFAULT_UNIVERSE_CAP,
};
use abductor_core::proof_graph::{
    build_abstract, concrete_atoms, derived_subst, minimize, termsub_program, AddedFact, QueryNode, Substitution,
};
use abductor_core::{Atom, RuleSet, SolveStatus, TaskSpec, Variant};
use serde::Serialize;

use crate::pipeline::{compile_task, optimal_solutions, solve_task, AppError};
use crate::solver::{solve_with, Mode, SolverConfig};

/// Candidate cap used by the command-line oracle; larger than the library
/// default so the worked proof-graph task fits.
pub const CLI_CANDIDATE_CAP: usize = 256;

fn sat(program: &str, cfg: &SolverConfig) -> Result<Option<AbductiveSolution>, AppError> {
    let r = solve_with(program, cfg, Mode::AnyModel);
    match r.status {
        SolveStatus::Unsatisfiable => Ok(None),
        SolveStatus::Satisfiable | SolveStatus::OptimumFound => {
            let m = r.models.last().ok_or_else(|| AppError::Solver("satisfiable without a model".into()))?;
            // Cost is not optimized here, so do not compare it.
            let mut m = m.clone();
            m.cost = None;
            Ok(Some(extract_solution(&m).map_err(|e| AppError::Solver(e.to_string()))?))
        }
        _ => Err(AppError::Solver(r.error.unwrap_or_else(|| format!("solver status {}", r.status.as_str())))),
    }
}

/// Whether the query holds in some answer set once `f` is given as facts and
/// nothing may be abduced.
pub fn assisted_entailment(task: &TaskSpec, f: &BTreeSet<Atom>, cfg: &SolverConfig) -> Result<bool, AppError> {
    let mut t = task.clone();
    for a in f {
        if !t.user_facts.contains(a) {
            t.user_facts.push(a.clone());
        }
    }
    let program = compile_task(&t, false)?;
    let text = format!("{}\n% no abduction\n:-abducedFact(X).\n", program.text);
    Ok(sat(&text, cfg)?.is_some())
}

/// The oracle's general-solution check, with entailment settled by the
/// solver when the task is not simple.
pub fn check_solution(
    f: &BTreeSet<Atom>,
    task: &TaskSpec,
    cfg: &SolverConfig,
) -> Result<(SolutionCheck, bool), AppError> {
    let universe = build_universe(task, DEFAULT_UNIVERSE_CAP).map_err(|e| AppError::Validation(e.to_string()))?;
    let mut check = check_general_solution(f, task, &universe);
    let mut assisted = false;
    if check.entailment == Entailment::NeedsSolver {
        assisted = true;
        let ok = assisted_entailment(task, f, cfg)?;
        for c in check.conditions.iter_mut().filter(|c| c.condition == 1) {
            *c = ConditionResult {
                condition: 1,
                passed: Some(ok),
                reason: format!("solver-assisted: query {} in some answer set", if ok { "holds" } else { "fails" }),
            };
        }
    }
    Ok((check, assisted))
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub solver_status: SolveStatus,
    pub solver_cost: Option<usize>,
    pub oracle_min: Option<usize>,
    pub solver_solutions: Vec<Vec<String>>,
    pub oracle_solutions: Vec<Vec<String>>,
    /// Conditions failed by each solver solution (empty means valid).
    pub solution_checks: Vec<Vec<u8>>,
    pub assisted: bool,
    /// Why the brute force did not run, when it did not.
    pub declined: Option<String>,
    pub agree: bool,
    pub summary: String,
}

pub fn compare_with_oracle(task: &TaskSpec, cap: usize, cfg: &SolverConfig) -> Result<OracleReport, AppError> {
    let solved = solve_task(task, false, cfg)?;
    let solver_cost = (!solved.optima.is_empty()).then(|| solved.best().cost());
    let mut solution_checks = Vec::new();
    let mut assisted = false;
    for s in &solved.optima {
        let (c, a) = check_solution(&s.abduced, task, cfg)?;
        assisted |= a;
        solution_checks.push(c.failed());
    }
    let all_valid = solution_checks.iter().all(Vec::is_empty);

    let oracle: Result<_, OracleError> =
        build_universe(task, DEFAULT_UNIVERSE_CAP).and_then(|u| brute_force_abduce(task, &u, cap));
    let render = |v: &BTreeSet<Atom>| v.iter().map(ToString::to_string).collect::<Vec<_>>();
    let solver_solutions: Vec<Vec<String>> = solved.optima.iter().map(AbductiveSolution::rendered).collect();
    let fmt_cost = |c: Option<usize>| c.map_or("none".to_string(), |c| c.to_string());

    let (oracle_min, oracle_solutions, declined, agree, summary) = match oracle {
        Ok(res) => {
            let min = res.min_cost();
            let agree = min == solver_cost && all_valid;
            let rel = if min == solver_cost { "==" } else { "!=" };
            let summary = format!("solver cost {} {rel} oracle minimum {}", fmt_cost(solver_cost), fmt_cost(min));
            (min, res.solutions.iter().map(render).collect(), None, agree, summary)
        }
        Err(e) => {
            let summary = format!("oracle declined: {e}; solver cost {}", fmt_cost(solver_cost));
            (None, Vec::new(), Some(e.to_string()), all_valid, summary)
        }
    };
    Ok(OracleReport {
        solver_status: solved.status(),
        solver_cost,
        oracle_min,
        solver_solutions,
        oracle_solutions,
        solution_checks,
        assisted,
        declined,
        agree,
        summary,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TermsubVerdict {
    /// Some answer set of the unextended program contains the graph and
    /// instances under the original substitution.
    pub base_holds: bool,
    /// Same for the extended program under the derived substitution.
    pub holds: bool,
    pub phi: Vec<String>,
    pub required: Vec<String>,
    /// Abduced atoms of the witnessing answer set.
    pub witness: Option<Vec<String>>,
    /// First required atom absent from an optimal answer set, when `holds` is false.
    pub missing: Option<String>,
}

/// Checks the term-substitution property on one instance. The task is
/// compiled with the extVar encoding whatever its declared variant.
pub fn check_theorem_termsub(
    task: &TaskSpec,
    theta: &Substitution,
    q_c: &QueryNode,
    q_o: &QueryNode,
    q_f: &QueryNode,
    added: AddedFact,
    cfg: &SolverConfig,
) -> Result<TermsubVerdict, AppError> {
    let mut task = task.clone();
    task.variant = Variant::SemiRes;
    let predicate = task.query.atom().predicate.clone();
    let (g, inst) =
        build_abstract(&task.rules, &predicate, task.depth).map_err(|e| AppError::Validation(e.to_string()))?;
    let m = minimize(&g);
    let phi = derived_subst(theta, q_c, q_o, q_f).map_err(|e| AppError::Validation(e.to_string()))?;
    let base = compile_task(&task, false)?;

    let required_theta = concrete_atoms(&m, &inst, theta);
    let base_holds = sat(&termsub_program(&base.text, &required_theta, None), cfg)?.is_some();

    let required = concrete_atoms(&m, &inst, &phi);
    let extended = termsub_program(&base.text, &required, Some((added, q_f)));
    let witness = sat(&extended, cfg)?;
    let missing = match witness {
        Some(_) => None,
        None => {
            let plain = termsub_program(&base.text, &BTreeSet::new(), Some((added, q_f)));
            let r = solve_with(&plain, cfg, Mode::Optimum);
            let best = r.optimal_models().first().map(|m| m.render()).unwrap_or_default();
            let have: BTreeSet<&str> = best.split(' ').collect();
            required.iter().find(|a| !have.contains(a.as_str())).cloned()
        }
    };
    Ok(TermsubVerdict {
        base_holds,
        holds: witness.is_some(),
        phi: phi.restricted(&m.terms()).rendered(),
        required: required.into_iter().collect(),
        witness: witness.map(|w| w.rendered()),
        missing,
    })
}

/// The query and createSub atoms the solver derives from rule instantiation
/// and query propagation alone, seeded like `build_abstract`.
pub fn solver_abstract(
    rules: &RuleSet,
    predicate: &str,
    n: u32,
    cfg: &SolverConfig,
) -> Result<(BTreeSet<String>, BTreeSet<String>), AppError> {
    let (g, _) = build_abstract(rules, predicate, 0).map_err(|e| AppError::Validation(e.to_string()))?;
    let seed = &g.nodes[0];
    let mut text = format!("max_ab_lvl({}).\n{seed}.\n", n + 1);
    for r in rules.by_id() {
        let sk = skolemize(r, Variant::Res).map_err(|e| AppError::Validation(e.to_string()))?;
        text.push_str(&emit_ag1(r, &sk));
    }
    text.push_str(&emit_ag3(Variant::Res));
    let r = solve_with(&text, cfg, Mode::AnyModel);
    let model = match r.status {
        SolveStatus::Satisfiable | SolveStatus::OptimumFound if !r.models.is_empty() => r.models[r.models.len() - 1].clone(),
        _ => return Err(AppError::Solver(r.error.unwrap_or_else(|| r.status.as_str().into()))),
    };
    let mut queries = BTreeSet::new();
    let mut subs = BTreeSet::new();
    for s in &model.atoms {
        if s.is("query", 2) {
            queries.insert(s.to_string());
        } else if s.is("createSub", 2) {
            subs.insert(s.to_string());
        }
    }
    Ok((queries, subs))
}

pub fn run_generalize(
    task: &TaskSpec,
    opts: &GeneralizeOptions,
    cfg: &SolverConfig,
) -> Result<GeneralizedSolution, GeneralizeError<AppError>> {
    generalize(task, opts, |t| optimal_solutions(t, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{load, Overrides};
    use crate::solver::solver_available;

    #[test]
    fn assisted_entailment_respects_constraints() {
        if !solver_available() {
            return;
        }
        let rules = "p(X,Y):-q(X,Y),s(Y).\np(X,Y):-g(X,Y).\nd(X,Y):-g(X,Y).";
        let task = r#"{"query":"p(john,james)","depth":2,"block":["p(_,_)"],"deny_model":[":- d(X,Y)"]}"#;
        let t = load("r.lp", rules, "t.json", task, &Overrides::default()).unwrap().task;
        let cfg = SolverConfig::default();
        let g: BTreeSet<Atom> = [crate::pipeline::parse_fact("g(john,james)").unwrap()].into();
        assert!(!assisted_entailment(&t, &g, &cfg).unwrap());
        let (check, assisted) = check_solution(&g, &t, &cfg).unwrap();
        assert!(assisted && !check.is_valid());
        let qs: BTreeSet<Atom> =
            ["q(john,james)", "s(james)"].iter().map(|a| crate::pipeline::parse_fact(a).unwrap()).collect();
        assert!(assisted_entailment(&t, &qs, &cfg).unwrap());
    }
}
