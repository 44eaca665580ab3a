//! The separated Cantor construction: greedy selection of well-separated
//! sub-cylinders with near-maximal partition weight, the leveled tree of
//! selection blocks capped by recurrence witnesses, the natural measure
//! that spreads mass by local Bowen roots, and the Holder check backing
//! the mass-distribution lower bound.
//!
//! The asymptotic regime needs the block depth m to be enormous; at desk
//! scale the four m-conditions and the per-generation growth conditions
//! are recorded as flags instead of being enforced. Structural facts
//! (separation, witness inclusion, return-depth caps, measure
//! consistency) are enforced strictly.

use crate::error::{Error, Result};
use crate::exact::{exact_map, interval_gap, rational_from_f64, rational_to_f64, ExactMap};
use crate::ifs::{cylinder_record, enumerate_cylinders, IfsSystem, SystemKind, Word};
use crate::numeric::{bisect_decreasing, KahanSum};
use crate::potential::{birkhoff_oscillation_bound, Potential};
use crate::recurrence::witness_cylinder;
use crate::thermo::{bowen_root, bowen_extrapolate, ThermoOptions};
use num::rational::BigRational;
use num::{One, Zero};
use serde::Serialize;

/// One admitted child of a separated selection.
#[derive(Clone, Debug, Serialize)]
pub struct GammaChild {
    /// The depth-m block word (without the parent prefix).
    pub word: Word,
    /// `ln(D_w e^{-S_m f([w])})` for the standalone block.
    pub log_weight: f64,
    /// Interval of the child cylinder `I_{t+m}(v w)`.
    pub lo: f64,
    pub hi: f64,
}

/// A separated subfamily of depth-m extensions of a parent word.
#[derive(Clone, Debug, Serialize)]
pub struct GammaSelection {
    pub parent: Word,
    pub block_depth: u32,
    /// Exponent used to weigh candidates (the global depth-m root).
    pub s_target: f64,
    /// Minimal admissible gap between admitted cylinders.
    pub separation_floor: f64,
    pub selected: Vec<GammaChild>,
    /// `sum over selected of exp(s_target * log_weight)`.
    pub achieved_sum: f64,
    /// Guaranteed floor `1/(33K)` (dimension one).
    pub selection_floor: f64,
}

/// Standalone depth-m block data shared by every selection of a build.
pub(crate) struct BlockTable {
    m: u32,
    words: Vec<Word>,
    log_weights: Vec<f64>,
    /// Exact block-cylinder endpoints when the system supports them.
    exact_endpoints: Option<Vec<(BigRational, BigRational)>>,
    approx_endpoints: Vec<(f64, f64)>,
    eta_m: f64,
    eta_m_exact: Option<BigRational>,
    max_log_weight: f64,
}

impl BlockTable {
    pub(crate) fn new(
        sys: &IfsSystem,
        pot: &Potential,
        m: u32,
        budget: u64,
    ) -> Result<BlockTable> {
        pot.validate(sys)?;
        let mut words = Vec::new();
        let mut log_weights = Vec::new();
        let mut approx = Vec::new();
        for rec in enumerate_cylinders(sys, m, budget)? {
            let s_m_f = pot.birkhoff_given(sys, rec.word.symbols(), rec.rep, rec.log_deriv);
            words.push(rec.word.clone());
            log_weights.push(rec.log_deriv - s_m_f);
            approx.push((rec.lo, rec.hi));
        }
        let exact_endpoints = if sys.kind() == SystemKind::General {
            None
        } else {
            let mut v = Vec::with_capacity(words.len());
            for w in &words {
                v.push(exact_map(sys, w.symbols())?.endpoints());
            }
            Some(v)
        };
        let eta_m = sys.min_cylinder_diameter(m, budget)?;
        let eta_m_exact = exact_endpoints.as_ref().map(|eps| {
            eps.iter()
                .map(|(lo, hi)| hi - lo)
                .min()
                .expect("at least two branches")
        });
        let max_log_weight = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(BlockTable {
            m,
            words,
            log_weights,
            exact_endpoints,
            approx_endpoints: approx,
            eta_m,
            eta_m_exact,
            max_log_weight,
        })
    }
}

/// Greedy separated selection below the parent word `v`: candidates are
/// ordered by weight `exp(s_target * g_w)` (ties to the lexicographically
/// smaller word) and admitted when their cylinder is strictly farther
/// than `eta_m |I(v)|` from every cylinder already admitted.
pub fn select_gamma(
    sys: &IfsSystem,
    pot: &Potential,
    m: u32,
    parent: &Word,
    s_target: f64,
    budget: u64,
) -> Result<GammaSelection> {
    let table = BlockTable::new(sys, pot, m, budget)?;
    select_gamma_with(sys, &table, parent, s_target)
}

pub(crate) fn select_gamma_with(
    sys: &IfsSystem,
    table: &BlockTable,
    parent: &Word,
    s_target: f64,
) -> Result<GammaSelection> {
    if s_target < 0.0 {
        return Err(Error::InvalidArgument("selection exponent must be >= 0".into()));
    }
    let m = table.m;

    // candidate order: weight descending, lexicographic on ties
    let mut order: Vec<usize> = (0..table.words.len()).collect();
    order.sort_by(|&i, &j| {
        let wi = s_target * table.log_weights[i];
        let wj = s_target * table.log_weights[j];
        wj.partial_cmp(&wi)
            .unwrap()
            .then_with(|| table.words[i].cmp(&table.words[j]))
    });

    let mut selected: Vec<GammaChild> = Vec::new();
    let mut sum = KahanSum::new();

    match (&table.exact_endpoints, sys.kind()) {
        (Some(block_eps), _) => {
            let parent_map = if parent.is_empty() {
                None
            } else {
                Some(exact_map(sys, parent.symbols())?)
            };
            let parent_interval = match &parent_map {
                Some(pm) => pm.endpoints(),
                None => (BigRational::zero(), BigRational::one()),
            };
            let parent_diam = &parent_interval.1 - &parent_interval.0;
            let floor_exact = table.eta_m_exact.clone().unwrap() * &parent_diam;
            let child_interval = |i: usize| -> (BigRational, BigRational) {
                let (blo, bhi) = &block_eps[i];
                match &parent_map {
                    None => (blo.clone(), bhi.clone()),
                    Some(pm) => {
                        let a = pm.apply(blo);
                        let b = pm.apply(bhi);
                        if a <= b {
                            (a, b)
                        } else {
                            (b, a)
                        }
                    }
                }
            };
            let mut admitted: Vec<(BigRational, BigRational)> = Vec::new();
            for &i in &order {
                let cand = child_interval(i);
                let ok = admitted
                    .iter()
                    .all(|adm| interval_gap(adm, &cand) > floor_exact);
                if ok {
                    sum.add((s_target * table.log_weights[i]).exp());
                    selected.push(GammaChild {
                        word: table.words[i].clone(),
                        log_weight: table.log_weights[i],
                        lo: rational_to_f64(&cand.0),
                        hi: rational_to_f64(&cand.1),
                    });
                    admitted.push(cand);
                }
            }
        }
        (None, _) => {
            let parent_rec = if parent.is_empty() {
                None
            } else {
                Some(cylinder_record(sys, parent)?)
            };
            let (plo, phi) = parent_rec
                .as_ref()
                .map(|r| (r.lo, r.hi))
                .unwrap_or((0.0, 1.0));
            let floor = table.eta_m * (phi - plo);
            let mut admitted: Vec<(f64, f64)> = Vec::new();
            for &i in &order {
                let child_word = parent.concat(&table.words[i]);
                let rec = cylinder_record(sys, &child_word)?;
                let cand = (rec.lo, rec.hi);
                let gap = |a: &(f64, f64), b: &(f64, f64)| -> f64 {
                    if a.1 < b.0 {
                        b.0 - a.1
                    } else if b.1 < a.0 {
                        a.0 - b.1
                    } else {
                        0.0
                    }
                };
                if admitted.iter().all(|adm| gap(adm, &cand) > floor) {
                    sum.add((s_target * table.log_weights[i]).exp());
                    selected.push(GammaChild {
                        word: table.words[i].clone(),
                        log_weight: table.log_weights[i],
                        lo: cand.0,
                        hi: cand.1,
                    });
                    admitted.push(cand);
                }
            }
        }
    }

    let parent_diam_f = if parent.is_empty() {
        1.0
    } else {
        cylinder_record(sys, parent)?.diameter
    };
    let selection_floor = 1.0 / (33.0 * sys.distortion());
    let achieved_sum = sum.value();
    if achieved_sum < selection_floor - 1e-12 {
        return Err(Error::Invariant(format!(
            "greedy selection below {parent} reached only {achieved_sum}, \
             floor is {selection_floor}"
        )));
    }
    Ok(GammaSelection {
        parent: parent.clone(),
        block_depth: m,
        s_target,
        separation_floor: table.eta_m * parent_diam_f,
        selected,
        achieved_sum,
        selection_floor,
    })
}

/// Local Bowen root of a selection: the `s` with
/// `sum over selected of exp(s g_w) = 1`. Always at most the global
/// depth-m root, since the selection is a subfamily.
pub fn local_root(selection: &GammaSelection) -> Result<f64> {
    if selection.selected.is_empty() {
        return Err(Error::InvalidArgument("empty selection has no root".into()));
    }
    let logs: Vec<f64> = selection.selected.iter().map(|c| c.log_weight).collect();
    if logs.len() == 1 {
        // a single term alpha^s with alpha < 1 only reaches 1 at s = 0
        return Ok(0.0);
    }
    let residual = |s: f64| -> f64 {
        let mut acc = KahanSum::new();
        for &g in &logs {
            acc.add((s * g).exp());
        }
        acc.value() - 1.0
    };
    let mut hi = selection.s_target.max(1.0);
    let mut expansions = 0;
    while residual(hi) > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 16 {
            return Err(Error::BracketFailure(
                "selection weights do not decay; no local root".into(),
            ));
        }
    }
    bisect_decreasing(residual, 0.0, hi, 1e-13, 256)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Flag {
    Holds,
    Fails,
    Unchecked,
}

impl Flag {
    fn of(b: bool) -> Flag {
        if b {
            Flag::Holds
        } else {
            Flag::Fails
        }
    }
}

/// Desk-scale record of the four block-depth conditions the asymptotic
/// argument imposes on m. Failures are recorded, not fatal.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MConditions {
    /// osc(S_m f) <= eps * m over m-cylinders (certified bound).
    pub birkhoff_oscillation: Flag,
    /// |s_m - s(f)| < eps, with s(f) estimated by doubling to 2m.
    pub root_convergence: Flag,
    /// max_w (D_w e^{-S_m f})^{4 eps / -ln rho} <= K^{-2} e^{-3 m eps}.
    pub weight_decay: Flag,
    /// e^{m eps} >= K^2.
    pub distortion_scale: Flag,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GenerationInfo {
    pub k: u32,
    pub ell: u32,
    pub m_k: u32,
    /// Max leaf depth of the previous generation (or the startup value
    /// for k = 1).
    pub prev_depth: u32,
    /// m_k / k >= prev_depth.
    pub depth_ratio_ok: Flag,
    /// prev_depth (1 + sup|f|) <= m_k eps.
    pub eps_budget_ok: Flag,
    pub t_min: u32,
    pub t_max: u32,
    pub leaf_count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub enum NodeKind {
    Root,
    /// One admitted block extension; `sel_exponent` is the local root of
    /// the selection that admitted it, `log_weight` its block weight.
    Block {
        generation: u32,
        log_weight: f64,
        sel_exponent: f64,
    },
    /// Witness-capped end of a generation.
    Leaf {
        generation: u32,
        return_depth: u32,
        radius: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct CantorNode {
    pub word: Word,
    pub depth: u32,
    pub lo: f64,
    pub hi: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct CantorParams {
    pub m: u32,
    pub eps: f64,
    /// Blocks per generation, k = 1..=len.
    pub ell_schedule: Vec<u32>,
    pub budget: u64,
    pub node_budget: u64,
    pub tol: f64,
}

impl Default for CantorParams {
    fn default() -> Self {
        CantorParams {
            m: 2,
            eps: 0.05,
            ell_schedule: vec![2],
            budget: crate::DEFAULT_BUDGET,
            node_budget: 1_000_000,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CantorTree {
    pub system: String,
    pub potential: String,
    pub params: CantorParams,
    /// Global depth-m Bowen root used as the selection target.
    pub s_m: f64,
    pub m_conditions: MConditions,
    pub generations: Vec<GenerationInfo>,
    pub nodes: Vec<CantorNode>,
}

impl CantorTree {
    pub fn root(&self) -> usize {
        0
    }

    /// Indices of the deepest generation's leaves (or of the chain
    /// frontier for suffix-free trees).
    pub fn frontier(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.children.is_empty())
            .map(|(i, _)| i)
            .collect()
    }

    /// Sum of block log-weights along the ancestry of `node`.
    pub fn ancestor_block_log_sum(&self, node: usize) -> f64 {
        let mut acc = 0.0;
        let mut cur = Some(node);
        while let Some(i) = cur {
            if let NodeKind::Block { log_weight, .. } = self.nodes[i].kind {
                acc += log_weight;
            }
            cur = self.nodes[i].parent;
        }
        acc
    }
}

fn check_strictly_positive(sys: &IfsSystem, pot: &Potential) -> Result<()> {
    let ok = match pot {
        Potential::LogDeriv { t } => *t > 0.0,
        _ => pot.inf_value(sys) > 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "the leveled construction needs a strictly positive potential \
             (or a log-derivative potential with t > 0)"
                .into(),
        ))
    }
}

/// Hard cap on witness return depths inside the tree:
/// `t <= step (N sup|f| + ln K) / (-ln rho) + step` for a word of
/// length N, where `step` is the contraction step of the system.
fn return_depth_cap(sys: &IfsSystem, pot: &Potential, word_len: u32) -> f64 {
    let step = sys.rho_depth() as f64;
    let log_exp = -sys.rho().ln(); // per `step` composition steps
    let n_sup = word_len as f64 * pot.sup_norm(sys);
    step * (n_sup + sys.distortion().ln()) / log_exp + step
}

fn m_conditions(
    sys: &IfsSystem,
    pot: &Potential,
    table: &BlockTable,
    s_m: f64,
    params: &CantorParams,
) -> Result<MConditions> {
    let m = params.m;
    let eps = params.eps;

    let osc = birkhoff_oscillation_bound(sys, pot, m, params.budget)?;
    let birkhoff_oscillation = if osc.certified {
        Flag::of(osc.bound <= eps * m as f64)
    } else {
        Flag::Unchecked
    };

    let topts = ThermoOptions {
        budget: params.budget,
        tol: params.tol,
        ..ThermoOptions::default()
    };
    let doubled = (sys.alphabet_len() as u128).checked_pow(2 * m);
    let root_convergence = match doubled {
        Some(c) if c <= params.budget as u128 => {
            let s_2m = bowen_root(sys, pot, 2 * m, &topts)?.s_n;
            let est = bowen_extrapolate(&[(m, s_m), (2 * m, s_2m), (2 * m + 1, s_2m)])
                .map(|e| e.estimate)
                .unwrap_or(2.0 * s_2m - s_m);
            Flag::of((s_m - est).abs() < eps)
        }
        _ => Flag::Unchecked,
    };

    let q = 4.0 * eps / -sys.log_contraction_per_step();
    let k = sys.distortion();
    let weight_decay = Flag::of(q * table.max_log_weight <= -2.0 * k.ln() - 3.0 * m as f64 * eps);
    let distortion_scale = Flag::of(m as f64 * eps >= 2.0 * k.ln());

    Ok(MConditions {
        birkhoff_oscillation,
        root_convergence,
        weight_decay,
        distortion_scale,
    })
}

/// Builds the leveled tree: per generation, `ell_k` chained separated
/// selections of depth-m blocks below each previous leaf, each completed
/// word then capped by its recurrence witness suffix.
pub fn build_levels(sys: &IfsSystem, pot: &Potential, params: &CantorParams) -> Result<CantorTree> {
    if params.m == 0 {
        return Err(Error::InvalidArgument("block depth m must be >= 1".into()));
    }
    if !(params.eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    check_strictly_positive(sys, pot)?;
    if params.ell_schedule.iter().any(|&l| l == 0) {
        return Err(Error::InvalidArgument("every generation needs ell >= 1".into()));
    }

    let topts = ThermoOptions {
        budget: params.budget,
        tol: params.tol,
        ..ThermoOptions::default()
    };
    let s_m = bowen_root(sys, pot, params.m, &topts)?.s_n;
    let table = BlockTable::new(sys, pot, params.m, params.budget)?;
    let m_conds = m_conditions(sys, pot, &table, s_m, params)?;

    let mut nodes = vec![CantorNode {
        word: Word::empty(),
        depth: 0,
        lo: 0.0,
        hi: 1.0,
        parent: None,
        children: Vec::new(),
        kind: NodeKind::Root,
    }];
    let mut frontier: Vec<usize> = vec![0];
    let mut generations = Vec::new();
    let sup_f = pot.sup_norm(sys);

    for (gi, &ell) in params.ell_schedule.iter().enumerate() {
        let k = gi as u32 + 1;
        let m_k = ell * params.m;
        let prev_depth = if k == 1 {
            // startup sizes: the smallest depth at which the inverse
            // expansion dominates the constant 2K, plus one witness step
            let n0 = ((4.0 * sys.distortion()).ln() / (1.0 / sys.eta()).ln()).ceil() as u32;
            n0 + 1
        } else {
            frontier.iter().map(|&i| nodes[i].depth).max().unwrap()
        };
        let depth_ratio_ok = Flag::of(m_k as f64 / k as f64 >= prev_depth as f64);
        let eps_budget_ok = if k == 1 {
            // n0 + t0 sup|f| <= m_1 eps with t0 = 1
            Flag::of((prev_depth - 1) as f64 + sup_f <= m_k as f64 * params.eps)
        } else {
            Flag::of(prev_depth as f64 * (1.0 + sup_f) <= m_k as f64 * params.eps)
        };

        // chain ell separated selections below every frontier word
        let mut level: Vec<usize> = frontier.clone();
        for _ in 0..ell {
            let mut next_level = Vec::new();
            for &parent_idx in &level {
                let parent_word = nodes[parent_idx].word.clone();
                let selection = select_gamma_with(sys, &table, &parent_word, s_m)?;
                let s_local = local_root(&selection)?;
                if s_local > s_m + 1e-10 {
                    return Err(Error::Invariant(format!(
                        "local root {s_local} above the global root {s_m}"
                    )));
                }
                for child in &selection.selected {
                    let word = parent_word.concat(&child.word);
                    let idx = nodes.len();
                    if idx as u64 > params.node_budget {
                        return Err(Error::BudgetExceeded {
                            needed: idx as u128,
                            budget: params.node_budget,
                        });
                    }
                    nodes.push(CantorNode {
                        depth: word.len() as u32,
                        word,
                        lo: child.lo,
                        hi: child.hi,
                        parent: Some(parent_idx),
                        children: Vec::new(),
                        kind: NodeKind::Block {
                            generation: k,
                            log_weight: child.log_weight,
                            sel_exponent: s_local,
                        },
                    });
                    nodes[parent_idx].children.push(idx);
                    next_level.push(idx);
                }
            }
            level = next_level;
        }

        // cap every completed word with its recurrence witness suffix
        let mut t_min = u32::MAX;
        let mut t_max = 0u32;
        let mut new_frontier = Vec::new();
        for &block_idx in &level {
            let word = nodes[block_idx].word.clone();
            let witness = witness_cylinder(sys, pot, &word)?;
            let cap = return_depth_cap(sys, pot, word.len() as u32);
            if (witness.return_depth as f64) > cap + 1e-9 {
                return Err(Error::Invariant(format!(
                    "return depth {} above the cap {cap} for word length {}",
                    witness.return_depth,
                    word.len()
                )));
            }
            t_min = t_min.min(witness.return_depth);
            t_max = t_max.max(witness.return_depth);
            let idx = nodes.len();
            if idx as u64 > params.node_budget {
                return Err(Error::BudgetExceeded {
                    needed: idx as u128,
                    budget: params.node_budget,
                });
            }
            nodes.push(CantorNode {
                word: witness.witness.word.clone(),
                depth: witness.witness.word.len() as u32,
                lo: witness.witness.lo,
                hi: witness.witness.hi,
                parent: Some(block_idx),
                children: Vec::new(),
                kind: NodeKind::Leaf {
                    generation: k,
                    return_depth: witness.return_depth,
                    radius: witness.radius,
                },
            });
            nodes[block_idx].children.push(idx);
            new_frontier.push(idx);
        }
        generations.push(GenerationInfo {
            k,
            ell,
            m_k,
            prev_depth,
            depth_ratio_ok,
            eps_budget_ok,
            t_min,
            t_max,
            leaf_count: new_frontier.len(),
        });
        frontier = new_frontier;
    }

    Ok(CantorTree {
        system: sys.descriptor().to_string(),
        potential: pot.describe(),
        params: params.clone(),
        s_m,
        m_conditions: m_conds,
        generations,
        nodes,
    })
}

/// Suffix-free diagnostic tree: a single chain of `ell_total` separated
/// selections with no witness caps. Unlike the leveled construction this
/// accepts the zero potential, which makes it the reference fixture for
/// the measure and Holder machinery.
pub fn build_chain(
    sys: &IfsSystem,
    pot: &Potential,
    m: u32,
    ell_total: u32,
    params: &CantorParams,
) -> Result<CantorTree> {
    if m == 0 || ell_total == 0 {
        return Err(Error::InvalidArgument("need m >= 1 and ell >= 1".into()));
    }
    let topts = ThermoOptions {
        budget: params.budget,
        tol: params.tol,
        ..ThermoOptions::default()
    };
    let s_m = bowen_root(sys, pot, m, &topts)?.s_n;
    let table = BlockTable::new(sys, pot, m, params.budget)?;
    let chain_params = CantorParams {
        m,
        ell_schedule: vec![ell_total],
        ..params.clone()
    };
    let m_conds = m_conditions(sys, pot, &table, s_m, &chain_params)?;

    let mut nodes = vec![CantorNode {
        word: Word::empty(),
        depth: 0,
        lo: 0.0,
        hi: 1.0,
        parent: None,
        children: Vec::new(),
        kind: NodeKind::Root,
    }];
    let mut level: Vec<usize> = vec![0];
    for _ in 0..ell_total {
        let mut next = Vec::new();
        for &parent_idx in &level {
            let parent_word = nodes[parent_idx].word.clone();
            let selection = select_gamma_with(sys, &table, &parent_word, s_m)?;
            let s_local = local_root(&selection)?;
            for child in &selection.selected {
                let word = parent_word.concat(&child.word);
                let idx = nodes.len();
                if idx as u64 > params.node_budget {
                    return Err(Error::BudgetExceeded {
                        needed: idx as u128,
                        budget: params.node_budget,
                    });
                }
                nodes.push(CantorNode {
                    depth: word.len() as u32,
                    word,
                    lo: child.lo,
                    hi: child.hi,
                    parent: Some(parent_idx),
                    children: Vec::new(),
                    kind: NodeKind::Block {
                        generation: 1,
                        log_weight: child.log_weight,
                        sel_exponent: s_local,
                    },
                });
                nodes[parent_idx].children.push(idx);
                next.push(idx);
            }
        }
        level = next;
    }

    Ok(CantorTree {
        system: sys.descriptor().to_string(),
        potential: pot.describe(),
        params: chain_params,
        s_m,
        m_conditions: m_conds,
        generations: vec![GenerationInfo {
            k: 1,
            ell: ell_total,
            m_k: ell_total * m,
            prev_depth: 0,
            depth_ratio_ok: Flag::Unchecked,
            eps_budget_ok: Flag::Unchecked,
            t_min: 0,
            t_max: 0,
            leaf_count: level.len(),
        }],
        nodes,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasureNode {
    pub node: usize,
    pub mass: f64,
}

/// Spreads unit mass down the tree: each admitted block gets
/// `parent mass * weight^{s_local}` from its selection's local root;
/// witness suffixes carry the mass unchanged. Consistency (children sum
/// to the parent) is enforced to 1e-12.
pub fn assign_measure(tree: &CantorTree) -> Result<Vec<MeasureNode>> {
    let n = tree.nodes.len();
    let mut mass = vec![0.0f64; n];
    mass[0] = 1.0;
    for i in 1..n {
        let node = &tree.nodes[i];
        let p = node.parent.expect("non-root nodes have parents");
        mass[i] = match &node.kind {
            NodeKind::Root => unreachable!("single root"),
            NodeKind::Block {
                log_weight,
                sel_exponent,
                ..
            } => mass[p] * (sel_exponent * log_weight).exp(),
            NodeKind::Leaf { .. } => mass[p],
        };
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.children.is_empty() {
            continue;
        }
        let child_sum: f64 = node.children.iter().map(|&c| mass[c]).sum();
        if (child_sum - mass[i]).abs() > 1e-12 {
            return Err(Error::Invariant(format!(
                "measure inconsistency at node {i}: children sum {child_sum}, parent {}",
                mass[i]
            )));
        }
    }
    Ok(mass
        .iter()
        .enumerate()
        .map(|(node, &mass)| MeasureNode { node, mass })
        .collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolderRow {
    pub depth: u32,
    pub diameter: f64,
    pub mass: f64,
    pub local_exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub s_eps: f64,
    pub start_depth: u32,
    pub rows: Vec<HolderRow>,
    /// Smallest M with mass <= M * diameter^{s_eps} over all nodes.
    pub holder_constant: f64,
    /// Minimum local exponent over nodes at depth >= start_depth.
    pub min_exponent: f64,
    /// Conservative ball version of the constant, sampled at frontier
    /// midpoints (masses of partially covered nodes are counted fully).
    pub ball_constant: f64,
    pub passes: bool,
}

impl HolderReport {
    /// CSV rows `depth,diameter,mass,local_exponent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,diameter,mass,local_exponent\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.depth, r.diameter, r.mass, r.local_exponent
            ));
        }
        out
    }
}

/// Mass-distribution check: over every constructed node (and a sample of
/// balls around frontier points), how close does `mass <= M diam^{s_eps}`
/// come to holding with a uniform M, and does the local exponent stay
/// above `s_eps` past `start_depth`?
pub fn holder_check(
    tree: &CantorTree,
    measures: &[MeasureNode],
    s_eps: f64,
    start_depth: u32,
) -> Result<HolderReport> {
    if !(s_eps > 0.0) {
        return Err(Error::InvalidArgument("s_eps must be positive".into()));
    }
    if measures.len() != tree.nodes.len() {
        return Err(Error::InvalidArgument(
            "measure list does not match the tree".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut holder_constant = 0.0f64;
    let mut min_exponent = f64::INFINITY;
    for (node, m) in tree.nodes.iter().zip(measures) {
        if node.depth == 0 {
            continue;
        }
        let diam = node.hi - node.lo;
        if !(diam > 0.0 && diam < 1.0) || m.mass <= 0.0 {
            continue;
        }
        let local_exponent = m.mass.ln() / diam.ln();
        rows.push(HolderRow {
            depth: node.depth,
            diameter: diam,
            mass: m.mass,
            local_exponent,
        });
        holder_constant = holder_constant.max(m.mass / diam.powf(s_eps));
        if node.depth >= start_depth {
            min_exponent = min_exponent.min(local_exponent);
        }
    }

    // ball sampling around frontier midpoints
    let frontier = tree.frontier();
    let mut ball_constant = 0.0f64;
    let stride = (frontier.len() / 64).max(1);
    for &leaf in frontier.iter().step_by(stride) {
        let node = &tree.nodes[leaf];
        let x = 0.5 * (node.lo + node.hi);
        let mut r = (node.hi - node.lo).max(1e-300);
        while r < 1.0 {
            let mut mu = 0.0;
            for &other in &frontier {
                let o = &tree.nodes[other];
                if o.lo <= x + r && o.hi >= x - r {
                    mu += measures[other].mass;
                }
            }
            ball_constant = ball_constant.max(mu / (2.0 * r).powf(s_eps));
            r *= 4.0;
        }
    }

    let passes = min_exponent >= s_eps && holder_constant.is_finite();
    Ok(HolderReport {
        s_eps,
        start_depth,
        rows,
        holder_constant,
        min_exponent,
        ball_constant,
        passes,
    })
}

/// Serializable node view joining structure and mass, for report dumps.
#[derive(Clone, Debug, Serialize)]
pub struct NodeDump {
    pub word: Word,
    pub depth: u32,
    pub lo: f64,
    pub hi: f64,
    pub mass: Option<f64>,
    pub s_local: Option<f64>,
    pub kind: String,
    pub generation: Option<u32>,
}

pub fn dump_nodes(tree: &CantorTree, measures: Option<&[MeasureNode]>) -> Vec<NodeDump> {
    tree.nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let (kind, generation, s_local) = match &n.kind {
                NodeKind::Root => ("root".to_string(), None, None),
                NodeKind::Block {
                    generation,
                    sel_exponent,
                    ..
                } => ("block".to_string(), Some(*generation), Some(*sel_exponent)),
                NodeKind::Leaf { generation, .. } => {
                    ("leaf".to_string(), Some(*generation), None)
                }
            };
            NodeDump {
                word: n.word.clone(),
                depth: n.depth,
                lo: n.lo,
                hi: n.hi,
                mass: measures.map(|m| m[i].mass),
                s_local,
                kind,
                generation,
            }
        })
        .collect()
}
