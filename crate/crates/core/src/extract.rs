//! Projection of solver models onto abductive solutions and justification
//! graphs, plus their DOT and JSON renderings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::answer::{Model, SolveStatus};
use crate::symbol::{Symbol, SymbolError};
use crate::term::{Atom, Sign};

pub const USER_FACT: &str = "userFact";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("`{0}` has the wrong arity")]
    WrongArity(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("solver reported cost {reported} but the model abduces {counted} atoms")]
    CostMismatch { reported: i64, counted: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AbductiveSolution {
    pub abduced: BTreeSet<Atom>,
    pub holds: BTreeSet<Atom>,
}

impl AbductiveSolution {
    pub fn cost(&self) -> usize {
        self.abduced.len()
    }

    pub fn rendered(&self) -> Vec<String> {
        self.abduced.iter().map(ToString::to_string).collect()
    }
}

fn unwrap_unary(sym: &Symbol, name: &str) -> Result<Option<Atom>, ExtractError> {
    if sym.name() != Some(name) {
        return Ok(None);
    }
    match sym.args() {
        [inner] => Ok(Some(inner.to_atom()?)),
        _ => Err(ExtractError::WrongArity(sym.to_string())),
    }
}

pub fn extract_solution(model: &Model) -> Result<AbductiveSolution, ExtractError> {
    let mut sol = AbductiveSolution::default();
    for sym in &model.atoms {
        if let Some(a) = unwrap_unary(sym, "abducedFact")? {
            sol.abduced.insert(a);
        } else if let Some(a) = unwrap_unary(sym, "holds")? {
            sol.holds.insert(a);
        }
    }
    if let Some(reported) = model.cost {
        if reported != sol.cost() as i64 {
            return Err(ExtractError::CostMismatch { reported, counted: sol.cost() });
        }
    }
    Ok(sol)
}

/// Source of a justification edge.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeSource {
    UserFact,
    Atom(Atom),
}

impl fmt::Display for EdgeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeSource::UserFact => f.write_str(USER_FACT),
            EdgeSource::Atom(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub sign: Sign,
    pub from: EdgeSource,
    pub to: Atom,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JustificationGraph {
    pub edges: BTreeSet<Edge>,
    pub roots: BTreeSet<Atom>,
}

pub fn extract_graph(model: &Model) -> Result<JustificationGraph, ExtractError> {
    let mut g = JustificationGraph::default();
    for sym in &model.atoms {
        if sym.name() == Some("directedEdge") {
            let [sign, from, to] = sym.args() else {
                return Err(ExtractError::WrongArity(sym.to_string()));
            };
            let sign = match sign.name() {
                Some("pos") => Sign::Pos,
                Some("neg") => Sign::Neg,
                _ => return Err(ExtractError::WrongArity(sym.to_string())),
            };
            let from = if from.is(USER_FACT, 0) { EdgeSource::UserFact } else { EdgeSource::Atom(from.to_atom()?) };
            g.edges.insert(Edge { sign, from, to: to.to_atom()? });
        } else if let Some(root) = unwrap_unary(sym, "gen_graph")? {
            g.roots.insert(root);
        }
    }
    Ok(g)
}

impl JustificationGraph {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Number of edges on the longest simple path ending at a root.
    pub fn depth(&self) -> usize {
        let mut incoming: BTreeMap<&Atom, Vec<&Atom>> = BTreeMap::new();
        for e in &self.edges {
            if let EdgeSource::Atom(a) = &e.from {
                incoming.entry(&e.to).or_default().push(a);
            }
        }
        fn walk<'a>(node: &'a Atom, inc: &BTreeMap<&'a Atom, Vec<&'a Atom>>, path: &mut Vec<&'a Atom>) -> usize {
            let mut best = 0;
            for &child in inc.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                if path.contains(&child) {
                    continue;
                }
                path.push(child);
                best = best.max(1 + walk(child, inc, path));
                path.pop();
            }
            best
        }
        self.roots.iter().map(|r| walk(r, &incoming, &mut alloc::vec![r])).max().unwrap_or(0)
    }

    pub fn to_dot(&self) -> String {
        if self.edges.is_empty() && self.roots.is_empty() {
            return "digraph justification {}\n".into();
        }
        let mut lines: Vec<String> = Vec::new();
        if self.edges.iter().any(|e| e.from == EdgeSource::UserFact) {
            lines.push(format!("  {} [shape=box,style=filled,fillcolor=lightgrey];", quote(USER_FACT)));
        }
        for r in &self.roots {
            lines.push(format!("  {} [peripheries=2];", quote(&r.to_string())));
        }
        let mut edges: Vec<(String, String, Sign)> =
            self.edges.iter().map(|e| (e.from.to_string(), e.to.to_string(), e.sign)).collect();
        edges.sort();
        for (from, to, sign) in edges {
            let style = match sign {
                Sign::Pos => "",
                Sign::Neg => " [style=dashed,label=\"not\"]",
            };
            lines.push(format!("  {} -> {}{style};", quote(&from), quote(&to)));
        }
        format!("digraph justification {{\n{}\n}}\n", lines.join("\n"))
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeJson {
    pub sign: Sign,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphJson {
    pub roots: Vec<String>,
    pub edges: Vec<EdgeJson>,
}

impl From<&JustificationGraph> for GraphJson {
    fn from(g: &JustificationGraph) -> Self {
        GraphJson {
            roots: g.roots.iter().map(ToString::to_string).collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeJson { sign: e.sign, from: e.from.to_string(), to: e.to.to_string() })
                .collect(),
        }
    }
}

/// The machine-readable solve report. Field order is the serialized key order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolutionJson {
    pub status: SolveStatus,
    pub cost: usize,
    pub abduced: Vec<String>,
    pub holds: Vec<String>,
    pub graph: GraphJson,
    pub all_optimal: Vec<Vec<String>>,
}

impl SolutionJson {
    pub fn new(
        status: SolveStatus,
        solution: &AbductiveSolution,
        graph: &JustificationGraph,
        all_optimal: &[AbductiveSolution],
    ) -> Self {
        SolutionJson {
            status,
            cost: solution.cost(),
            abduced: solution.rendered(),
            holds: solution.holds.iter().map(ToString::to_string).collect(),
            graph: graph.into(),
            all_optimal: all_optimal.iter().map(AbductiveSolution::rendered).collect(),
        }
    }
}

pub fn to_json(
    status: SolveStatus,
    solution: &AbductiveSolution,
    graph: &JustificationGraph,
    all_optimal: &[AbductiveSolution],
) -> String {
    serde_json::to_string(&SolutionJson::new(status, solution, graph, all_optimal)).expect("plain data serializes")
}
