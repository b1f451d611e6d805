//! Absolute scores from k-wise rankings.
//!
//! Every annotation ranks k items best-first and expands to its k(k−1)/2
//! ordered pairs. Free per-item scores then minimize
//! `reg·‖s‖² + Σ max(0, 1 − (s_w − s_l))` and are rescaled to `[0, 10]`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{projected_subgradient, StepRule};
use crate::{SCORE_MAX, SCORE_MIN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KWiseAnnotation {
    pub annotator: String,
    /// Best first.
    pub items: Vec<String>,
}

impl KWiseAnnotation {
    pub fn validate(&self) -> Result<()> {
        if self.items.len() < 2 {
            return Err(Error::Validation(format!(
                "annotation by {:?} ranks {} item(s); at least 2 are needed",
                self.annotator,
                self.items.len()
            )));
        }
        let mut seen = HashSet::new();
        for id in &self.items {
            if !seen.insert(id) {
                return Err(Error::Validation(format!(
                    "annotation by {:?} lists {id:?} twice",
                    self.annotator
                )));
            }
        }
        Ok(())
    }
}

/// (winner, loser)
pub type Pair = (String, String);

pub fn expand_pairs(annotations: &[KWiseAnnotation]) -> Result<Vec<Pair>> {
    let mut pairs = Vec::new();
    for a in annotations {
        a.validate()?;
        for (i, w) in a.items.iter().enumerate() {
            for l in &a.items[i + 1..] {
                pairs.push((w.clone(), l.clone()));
            }
        }
    }
    Ok(pairs)
}

/// Reads one annotation per non-blank line.
pub fn load_annotations(path: &Path) -> Result<Vec<KWiseAnnotation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (no, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let a: KWiseAnnotation =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), no + 1)))?;
        a.validate()
            .map_err(|e| Error::Validation(format!("{}:{}: {e}", path.display(), no + 1)))?;
        out.push(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankConfig {
    pub reg: f64,
    pub steps: usize,
    pub step_rule: StepRule,
}

impl Default for RankConfig {
    fn default() -> Self {
        // η_t = 1 / (2·reg·(t + 500)): the strongly convex schedule
        RankConfig {
            reg: 0.01,
            steps: 5000,
            step_rule: StepRule::Decaying { eta0: 0.1, tau: 500.0 },
        }
    }
}

impl RankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reg must be positive, got {}",
                self.reg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostics {
    pub items: usize,
    pub pairs: usize,
    /// Pairs whose winner does not score strictly above the loser.
    pub violated_pairs: usize,
    pub violations: Vec<Pair>,
    /// Connected components of the comparison graph; above 1 the
    /// components share one scale without any comparison linking them.
    pub components: usize,
    /// Objective at `effective_reg`.
    pub objective: f64,
    /// Regularization weight actually used; below the configured one when
    /// the configured minimizer left consistent pairs unsatisfied.
    pub effective_reg: f64,
    pub reg_reductions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    /// Rescaled to `[0, 10]`.
    pub scores: BTreeMap<String, f64>,
    /// Minimizer before rescaling.
    pub raw_scores: BTreeMap<String, f64>,
    pub diagnostics: RankDiagnostics,
    pub config: RankConfig,
}

/// Smallest regularization weight tried by the continuation.
const MIN_REG: f64 = 1e-6;

/// `reg·‖s‖² + Σ max(0, 1 − (s_w − s_l))` by projected subgradient from `init`.
fn minimize(
    edges: &[(usize, usize)],
    n: usize,
    reg: f64,
    steps: usize,
    rule: StepRule,
    init: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let objective = |s: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut value = reg * s.iter().map(|v| v * v).sum::<f64>();
        let mut grad: Vec<f64> = s.iter().map(|v| 2.0 * reg * v).collect();
        for &(w, l) in edges {
            let slack = 1.0 - (s[w] - s[l]);
            if slack > 0.0 {
                value += slack;
                grad[w] -= 1.0;
                grad[l] += 1.0;
            }
        }
        Ok((value, grad))
    };
    debug_assert_eq!(init.len(), n);
    let out = projected_subgradient(objective, init, |_| {}, steps, rule)?;
    Ok((out.best, out.best_value))
}

/// Kahn's algorithm on the winner → loser graph.
fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(w, l) in edges {
        out[w].push(l);
        indegree[l] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = queue.pop() {
        seen += 1;
        for &j in &out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push(j);
            }
        }
    }
    seen == n
}

fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut count = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            count -= 1;
        }
    }
    count
}

pub fn recover_scores(pairs: &[Pair], config: &RankConfig) -> Result<RankResult> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no comparison pairs".into()));
    }
    // index by first appearance so relabeling items leaves the arithmetic unchanged
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut edges = Vec::with_capacity(pairs.len());
    for (w, l) in pairs {
        if w == l {
            return Err(Error::Validation(format!("item {w:?} compared with itself")));
        }
        let mut ends = [0usize; 2];
        for (slot, s) in ends.iter_mut().zip([w, l]) {
            *slot = *index.entry(s.as_str()).or_insert_with(|| {
                ids.push(s.clone());
                ids.len() - 1
            });
        }
        edges.push((ends[0], ends[1]));
    }
    let n = ids.len();

    // warm start: wins minus losses
    let mut raw = vec![0.0; n];
    for &(w, l) in &edges {
        raw[w] += 1.0;
        raw[l] -= 1.0;
    }
    // With a large reg the exact minimizer can tie items whose hinges stay
    // active, even when the pairs admit a strict order. On acyclic pair sets
    // reg is then shrunk tenfold until every pair holds; as reg → 0 the
    // minimizer approaches the hard-margin solution, which satisfies all pairs.
    let acyclic = is_acyclic(n, &edges);
    let mut reg = config.reg;
    let mut rule = config.step_rule;
    let mut rounds = 0;
    let objective_value = loop {
        let (s, value) = minimize(&edges, n, reg, config.steps, rule, &raw)?;
        raw = s;
        let holds = edges.iter().all(|&(w, l)| raw[w] > raw[l]);
        if holds || !acyclic || reg / 10.0 < MIN_REG {
            break value;
        }
        reg /= 10.0;
        rounds += 1;
        if let StepRule::Decaying { eta0, tau } = rule {
            // keeps η_t = 1 / (2·reg·(t + τ)) when that was the schedule
            rule = StepRule::Decaying { eta0: eta0 * 10.0, tau };
        }
    };

    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let scaled: Vec<f64> = if hi > lo {
        raw.iter()
            .map(|v| {
                if *v == lo {
                    SCORE_MIN
                } else if *v == hi {
                    SCORE_MAX
                } else {
                    (SCORE_MIN + (v - lo) / (hi - lo) * (SCORE_MAX - SCORE_MIN)).clamp(SCORE_MIN, SCORE_MAX)
                }
            })
            .collect()
    } else {
        vec![0.5 * (SCORE_MIN + SCORE_MAX); n]
    };

    let violations: Vec<Pair> = edges
        .iter()
        .filter(|(w, l)| scaled[*w] <= scaled[*l])
        .map(|(w, l)| (ids[*w].clone(), ids[*l].clone()))
        .collect();
    let diagnostics = RankDiagnostics {
        items: n,
        pairs: pairs.len(),
        violated_pairs: violations.len(),
        violations,
        components: components(n, &edges),
        objective: objective_value,
        effective_reg: reg,
        reg_reductions: rounds,
    };
    Ok(RankResult {
        scores: ids.iter().cloned().zip(scaled).collect(),
        raw_scores: ids.into_iter().zip(raw).collect(),
        diagnostics,
        config: *config,
    })
}

/// Kendall's tau-a between two score assignments over the same items.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
        }
    }
    s / (n * (n - 1) / 2) as f64
}
