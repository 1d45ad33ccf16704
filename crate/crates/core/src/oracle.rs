//! Ground MDPs built from a first-order model and an instance, with exact
//! value iteration, enumerated ALP/API and seeded rollouts.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cases::eval_case_with;
use crate::error::{Error, Result};
use crate::fomdp::{FomdpModel, Instance, LinearValueFunction};
use crate::folp::{solve_lp, Cmp, LPModel, LinearConstraint};
use crate::logic::{Binding, GroundAction, GroundAtom, GroundState, Sym};
use crate::sitcalc::apply;

pub const DEFAULT_STATE_CAP: usize = 200_000;
/// Q-values closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct InstantiateOptions {
    /// Enumerate every fluent assignment instead of only reachable ones.
    pub full: bool,
    pub state_cap: usize,
}

impl Default for InstantiateOptions {
    fn default() -> Self {
        InstantiateOptions {
            full: false,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundMDP {
    pub states: Vec<GroundState>,
    index: HashMap<BTreeSet<GroundAtom>, usize>,
    /// Template-level ground actions in lexicographic order.
    pub actions: Vec<GroundAction>,
    /// `transitions[s][a]` lists `(successor, probability)` sorted by successor.
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    pub rewards: Vec<Vec<f64>>,
    pub discount: f64,
    pub init: usize,
}

impl GroundMDP {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_index(&self, s: &GroundState) -> Option<usize> {
        self.index.get(&s.atoms).copied()
    }

    pub fn action_index(&self, a: &GroundAction) -> Option<usize> {
        self.actions.binary_search(a).ok()
    }

    /// γ Σ_t T(s,a,t) v(t).
    pub fn backup(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.discount * self.transitions[s][a].iter().map(|(t, p)| p * v[*t]).sum::<f64>()
    }

    pub fn q(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.rewards[s][a] + self.backup(s, a, v)
    }

    pub fn q_values(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.num_states())
            .into_par_iter()
            .map(|s| (0..self.num_actions()).map(|a| self.q(s, a, v)).collect())
            .collect()
    }

    /// Greedy action per state; ties go to the lowest action index.
    pub fn greedy(&self, v: &[f64]) -> Vec<usize> {
        self.q_values(v).iter().map(|q| argmax(q)).collect()
    }
}

/// First index whose value is within `TIE_TOL` of the maximum.
pub fn argmax(q: &[f64]) -> usize {
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    q.iter().position(|x| *x >= m - TIE_TOL).unwrap_or(0)
}

/// Every template instantiated over the typed objects, sorted.
pub fn ground_actions(model: &FomdpModel, inst: &Instance) -> Result<Vec<GroundAction>> {
    let mut out = Vec::new();
    for t in &model.templates {
        let mut domains = Vec::with_capacity(t.params.len());
        for p in &t.params {
            let objs = inst.init.objects(&p.ty);
            if objs.is_empty() {
                return Err(Error::Model(format!(
                    "no objects of type `{}` for action {}",
                    p.ty, t.name
                )));
            }
            domains.push(objs.to_vec());
        }
        for args in tuples(&domains) {
            out.push(GroundAction {
                name: t.name.clone(),
                args,
            });
        }
    }
    out.sort();
    Ok(out)
}

fn tuples(domains: &[Vec<Sym>]) -> Vec<Vec<Sym>> {
    let mut out = vec![Vec::new()];
    for d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Every fluent atom over the instance objects.
pub fn fluent_atoms(model: &FomdpModel, inst: &Instance) -> Vec<GroundAtom> {
    let mut out = Vec::new();
    for d in model.theory.signature.fluents() {
        let domains: Vec<Vec<Sym>> = d
            .arg_types
            .iter()
            .map(|ty| inst.init.objects(ty).to_vec())
            .collect();
        for args in tuples(&domains) {
            out.push(GroundAtom {
                pred: d.name.clone(),
                args,
            });
        }
    }
    out
}

/// Every fluent assignment, sharing the static atoms of the initial state.
pub fn all_states(model: &FomdpModel, inst: &Instance, cap: usize) -> Result<Vec<GroundState>> {
    let atoms = fluent_atoms(model, inst);
    if atoms.len() >= usize::BITS as usize - 1 || (1usize << atoms.len()) > cap {
        return Err(Error::StateCap(cap));
    }
    let statics: BTreeSet<GroundAtom> = static_atoms(model, &inst.init);
    Ok((0..1usize << atoms.len())
        .map(|mask| {
            let mut set = statics.clone();
            for (i, a) in atoms.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    set.insert(a.clone());
                }
            }
            GroundState::new(set, inst.universe.clone())
        })
        .collect())
}

fn static_atoms(model: &FomdpModel, s: &GroundState) -> BTreeSet<GroundAtom> {
    s.atoms
        .iter()
        .filter(|a| {
            model
                .theory
                .signature
                .predicate(&a.pred)
                .is_some_and(|d| d.is_static)
        })
        .cloned()
        .collect()
}

/// Binding of a template's parameters to a ground action's arguments.
pub fn action_binding(model: &FomdpModel, a: &GroundAction) -> Result<Binding> {
    let t = model
        .template(&a.name)
        .ok_or_else(|| Error::Model(format!("unknown action {}", a.name)))?;
    if t.params.len() != a.args.len() {
        return Err(Error::Arity {
            name: a.name.to_string(),
            expected: t.params.len(),
            found: a.args.len(),
        });
    }
    Ok(t.params.iter().cloned().zip(a.args.iter().cloned()).collect())
}

/// R(s, a): the sum of every reward component of the template.
pub fn ground_reward(model: &FomdpModel, a: &GroundAction, s: &GroundState) -> Result<f64> {
    let b = action_binding(model, a)?;
    let mut r = 0.0;
    for c in model.reward_components(&a.name) {
        r += eval_case_with(&c, s, &b)?;
    }
    Ok(r)
}

/// Outcome distribution of a ground stochastic action, merged by state.
pub fn outcomes(model: &FomdpModel, a: &GroundAction, s: &GroundState) -> Result<Vec<(GroundState, f64)>> {
    let t = model
        .template(&a.name)
        .ok_or_else(|| Error::Model(format!("unknown action {}", a.name)))?;
    let b = action_binding(model, a)?;
    let mut out: Vec<(GroundState, f64)> = Vec::new();
    for c in &t.choices {
        let p = eval_case_with(&c.prob, s, &b)?;
        if p <= 0.0 {
            continue;
        }
        let next = apply(
            &model.theory,
            &GroundAction {
                name: c.name.clone(),
                args: a.args.clone(),
            },
            s,
        )?;
        match out.iter_mut().find(|(t, _)| t.atoms == next.atoms) {
            Some(e) => e.1 += p,
            None => out.push((next, p)),
        }
    }
    let total: f64 = out.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Probability(format!("{a} in {s}: outcome mass {total}")));
    }
    Ok(out)
}

struct Expanded {
    rewards: Vec<f64>,
    outcomes: Vec<Vec<(GroundState, f64)>>,
}

fn expand(model: &FomdpModel, actions: &[GroundAction], s: &GroundState) -> Result<Expanded> {
    let mut rewards = Vec::with_capacity(actions.len());
    let mut outs = Vec::with_capacity(actions.len());
    for a in actions {
        rewards.push(ground_reward(model, a, s)?);
        outs.push(outcomes(model, a, s)?);
    }
    Ok(Expanded {
        rewards,
        outcomes: outs,
    })
}

/// Builds the ground MDP reachable from the instance's initial state, or
/// over all fluent assignments when `opts.full` is set.
pub fn instantiate(model: &FomdpModel, inst: &Instance, opts: InstantiateOptions) -> Result<GroundMDP> {
    if !(0.0..1.0).contains(&model.discount) {
        return Err(Error::Model(format!("discount {} outside [0,1)", model.discount)));
    }
    let actions = ground_actions(model, inst)?;
    let mut states: Vec<GroundState> = Vec::new();
    let mut index: HashMap<BTreeSet<GroundAtom>, usize> = HashMap::new();
    let mut intern = |s: GroundState, states: &mut Vec<GroundState>| -> Result<(usize, bool)> {
        if let Some(i) = index.get(&s.atoms) {
            return Ok((*i, false));
        }
        if states.len() >= opts.state_cap {
            return Err(Error::StateCap(opts.state_cap));
        }
        index.insert(s.atoms.clone(), states.len());
        states.push(s);
        Ok((states.len() - 1, true))
    };

    let init_state = GroundState::new(inst.init.atoms.clone(), inst.universe.clone());
    let mut queue: VecDeque<usize> = VecDeque::new();
    if opts.full {
        for s in all_states(model, inst, opts.state_cap)? {
            let (i, _) = intern(s, &mut states)?;
            queue.push_back(i);
        }
    }
    let (init, fresh) = intern(init_state, &mut states)?;
    if fresh {
        queue.push_back(init);
    }

    let mut transitions: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::new(); states.len()];
    let mut rewards: Vec<Vec<f64>> = vec![Vec::new(); states.len()];
    // Layer by layer: expansions run in parallel, indices are assigned in
    // queue order so numbering is deterministic.
    while !queue.is_empty() {
        let layer: Vec<usize> = queue.drain(..).collect();
        let expanded = layer
            .par_iter()
            .map(|&i| expand(model, &actions, &states[i]))
            .collect::<Result<Vec<_>>>()?;
        for (&i, ex) in layer.iter().zip(expanded) {
            let mut row = Vec::with_capacity(actions.len());
            for outs in ex.outcomes {
                let mut dist = Vec::with_capacity(outs.len());
                for (t, p) in outs {
                    let (j, fresh) = intern(t, &mut states)?;
                    if fresh {
                        queue.push_back(j);
                    }
                    dist.push((j, p));
                }
                dist.sort_by_key(|e| e.0);
                row.push(dist);
            }
            if transitions.len() < states.len() {
                transitions.resize(states.len(), Vec::new());
                rewards.resize(states.len(), Vec::new());
            }
            transitions[i] = row;
            rewards[i] = ex.rewards;
        }
    }
    transitions.resize(states.len(), Vec::new());
    rewards.resize(states.len(), Vec::new());
    Ok(GroundMDP {
        states,
        index,
        actions,
        transitions,
        rewards,
        discount: model.discount,
        init,
    })
}

#[derive(Clone, Debug)]
pub struct GroundValue {
    pub values: Vec<f64>,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    pub residuals: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub policy: Vec<usize>,
}

/// Jacobi value iteration until the sweep residual is at most `eps`.
pub fn value_iteration(m: &GroundMDP, eps: f64) -> GroundValue {
    let mut v = vec![0.0; m.num_states()];
    let mut residuals = Vec::new();
    loop {
        let next: Vec<f64> = (0..m.num_states())
            .into_par_iter()
            .map(|s| {
                (0..m.num_actions())
                    .map(|a| m.q(s, a, &v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let res = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        residuals.push(res);
        if res <= eps || m.discount == 0.0 {
            break;
        }
    }
    let q = m.q_values(&v);
    let policy = q.iter().map(|r| argmax(r)).collect();
    GroundValue {
        residual: *residuals.last().unwrap_or(&0.0),
        values: v,
        residuals,
        q,
        policy,
    }
}

/// Exact value of a fixed policy by iterating its Bellman operator.
pub fn policy_values(m: &GroundMDP, policy: &[usize], eps: f64) -> Vec<f64> {
    let mut v = vec![0.0; m.num_states()];
    loop {
        let next: Vec<f64> = (0..m.num_states())
            .into_par_iter()
            .map(|s| m.q(s, policy[s], &v))
            .collect();
        let res = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if res <= eps || m.discount == 0.0 {
            return v;
        }
    }
}

/// `basis[j][s]`: each basis of the value function evaluated on each state.
pub fn ground_basis(lvf: &LinearValueFunction, m: &GroundMDP) -> Result<Vec<Vec<f64>>> {
    lvf.bases
        .iter()
        .map(|b| {
            m.states
                .iter()
                .map(|s| crate::cases::eval_case(&b.case, s))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Σ_j w_j basis[j][s].
pub fn combine_basis(basis: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = basis.first().map_or(0, |b| b.len());
    (0..n)
        .map(|s| basis.iter().zip(w).map(|(b, w)| w * b[s]).sum())
        .collect()
}

/// Row `b_j(s) - γ Σ_t T(s,a,t) b_j(t)` for every j.
fn residual_row(m: &GroundMDP, basis: &[Vec<f64>], s: usize, a: usize) -> Vec<f64> {
    basis.iter().map(|b| b[s] - m.backup(s, a, b)).collect()
}

/// Enumerated ALP: min Σ_s Σ_j w_j b_j(s) s.t. V ≥ R + γ T V for all (s,a).
pub fn ground_alp(m: &GroundMDP, basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = basis.len();
    let mut lp = LPModel::new(k);
    lp.objective = basis.iter().map(|b| b.iter().sum()).collect();
    for s in 0..m.num_states() {
        for a in 0..m.num_actions() {
            lp.add(LinearConstraint::new(residual_row(m, basis, s, a), Cmp::Ge, m.rewards[s][a]));
        }
    }
    Ok(solve_lp(&lp)?.x)
}

#[derive(Clone, Debug)]
pub struct GroundApiReport {
    pub weights: Vec<Vec<f64>>,
    pub phis: Vec<f64>,
    pub policies: Vec<Vec<usize>>,
    pub converged: bool,
}

impl GroundApiReport {
    pub fn final_weights(&self) -> &[f64] {
        self.weights.last().map(|w| w.as_slice()).unwrap_or(&[])
    }

    pub fn final_phi(&self) -> f64 {
        *self.phis.last().unwrap_or(&f64::INFINITY)
    }
}

/// Bellman-error-minimizing weights for a fixed policy.
pub fn ground_policy_lp(m: &GroundMDP, basis: &[Vec<f64>], policy: &[usize]) -> Result<(Vec<f64>, f64)> {
    let k = basis.len();
    let mut lp = LPModel::new(k + 1);
    lp.objective[k] = 1.0;
    lp.lower[k] = Some(0.0);
    for (s, &a) in policy.iter().enumerate() {
        // e = R + Σ_j w_j (γ T b_j - b_j); |e| ≤ φ.
        let row = residual_row(m, basis, s, a);
        let mut le: Vec<f64> = row.iter().map(|x| -x).collect();
        le.push(-1.0);
        lp.add(LinearConstraint::new(le, Cmp::Le, -m.rewards[s][a]));
        let mut ge = row;
        ge.push(-1.0);
        lp.add(LinearConstraint::new(ge, Cmp::Le, m.rewards[s][a]));
    }
    let sol = solve_lp(&lp)?;
    let phi = sol.x[k].max(0.0);
    Ok((sol.x[..k].to_vec(), phi))
}

/// Approximate policy iteration with enumerated constraints.
pub fn ground_api(m: &GroundMDP, basis: &[Vec<f64>], max_iters: usize) -> Result<GroundApiReport> {
    let k = basis.len();
    let mut policy = m.greedy(&combine_basis(basis, &vec![0.0; k]));
    let mut report = GroundApiReport {
        weights: Vec::new(),
        phis: Vec::new(),
        policies: vec![policy.clone()],
        converged: false,
    };
    for _ in 0..max_iters.max(1) {
        let (w, phi) = ground_policy_lp(m, basis, &policy)?;
        let next = m.greedy(&combine_basis(basis, &w));
        report.weights.push(w);
        report.phis.push(phi);
        report.policies.push(next.clone());
        if next == policy {
            report.converged = true;
            break;
        }
        policy = next;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutStats {
    pub mean: f64,
    pub stderr: f64,
    pub episodes: usize,
}

/// Mean discounted return of a state-indexed policy from the initial state.
/// Episode `e` draws from stream `e` of a ChaCha8 generator seeded by `seed`.
pub fn rollout(m: &GroundMDP, policy: &[usize], horizon: usize, episodes: usize, seed: u64) -> RolloutStats {
    let returns: Vec<f64> = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(e as u64);
            let mut s = m.init;
            let mut g = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                let a = policy[s];
                g += disc * m.rewards[s][a];
                disc *= m.discount;
                s = sample(&m.transitions[s][a], rng.gen::<f64>());
            }
            g
        })
        .collect();
    if episodes == 0 {
        return RolloutStats {
            mean: 0.0,
            stderr: 0.0,
            episodes,
        };
    }
    let n = episodes as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if episodes > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    RolloutStats {
        mean,
        stderr: (var / n).sqrt(),
        episodes,
    }
}

fn sample(dist: &[(usize, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    for (t, p) in dist {
        acc += p;
        if u < acc {
            return *t;
        }
    }
    dist.last().map(|e| e.0).expect("empty outcome distribution")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// max_s |Ṽ(s) - max_a Q_Ṽ(s,a)|.
    pub bellman_error: f64,
    /// max_{s,a} of R + γTṼ - Ṽ, clipped at 0.
    pub constraint_violation: f64,
    /// Share of states where the given policy attains max_a Q_Ṽ.
    pub policy_agreement: Option<f64>,
}

impl Comparison {
    pub fn csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let _ = writeln!(out, "max_abs_error,{}", self.max_abs_error);
        let _ = writeln!(out, "mean_abs_error,{}", self.mean_abs_error);
        let _ = writeln!(out, "bellman_error,{}", self.bellman_error);
        let _ = writeln!(out, "constraint_violation,{}", self.constraint_violation);
        if let Some(a) = self.policy_agreement {
            let _ = writeln!(out, "policy_agreement,{a}");
        }
        out
    }
}

/// Ground comparison of an approximate value function against V*.
/// Partition violations name the offending state.
pub fn compare(
    lvf: &LinearValueFunction,
    m: &GroundMDP,
    vstar: &GroundValue,
    policy: Option<&[usize]>,
) -> Result<Comparison> {
    let mut v = Vec::with_capacity(m.num_states());
    for s in &m.states {
        v.push(lvf.eval(s).map_err(|e| match e {
            Error::PartitionViolation(msg) => Error::PartitionViolation(format!("at state {s}: {msg}")),
            other => other,
        })?);
    }
    let n = m.num_states().max(1) as f64;
    let errs: Vec<f64> = v.iter().zip(&vstar.values).map(|(a, b)| (a - b).abs()).collect();
    let q = m.q_values(&v);
    let mut bellman: f64 = 0.0;
    let mut violation: f64 = 0.0;
    for (s, row) in q.iter().enumerate() {
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        bellman = bellman.max((v[s] - best).abs());
        violation = violation.max(best - v[s]);
    }
    let agreement = policy.map(|p| {
        let hits = q
            .iter()
            .zip(p)
            .filter(|(row, a)| {
                let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                row[**a] >= best - TIE_TOL
            })
            .count();
        hits as f64 / n
    });
    Ok(Comparison {
        max_abs_error: errs.iter().cloned().fold(0.0, f64::max),
        mean_abs_error: errs.iter().sum::<f64>() / n,
        bellman_error: bellman,
        constraint_violation: violation.max(0.0),
        policy_agreement: agreement,
    })
}
