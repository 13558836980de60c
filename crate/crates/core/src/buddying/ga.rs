//! Genetic-algorithm buddying.
//!
//! A chromosome holds, per customer, a position in that customer's
//! group-restricted candidate list, plus a real-valued scaling gene for each
//! non-domestic customer. Because genes index group candidate lists, every
//! individual satisfies the group constraint by construction.
//!
//! The initial population contains the nearest-demand solution, so the best
//! cost found never exceeds that solution's cost. Elitism keeps the best-cost
//! trace non-increasing. Fitness evaluation runs on the rayon pool, while all
//! random draws come from one sequential stream; results do not depend on the
//! number of worker threads.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{CostBreakdown, CostModel};
use super::simple::simple_buddy;
use crate::error::{Error, Result};
use crate::model::{Buddy, BuddyAssignment, Feeder, MonitoredPool, ALPHA_MAX, ALPHA_MIN};
use crate::rng;
use crate::series::Window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Weight of the mean-daily-demand term, in `[0, 1]`.
    pub w: f64,
    pub population_size: usize,
    pub max_generations: usize,
    /// Stop after this many generations without improvement.
    pub stall_generations: usize,
    pub tournament_size: usize,
    /// Per-gene probability of taking the second parent's gene.
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1/M`.
    pub mutation_rate: Option<f64>,
    /// Standard deviation of the Gaussian alpha step, for the default 0.8..1.2 range.
    pub alpha_mutation_std: f64,
    pub elitism: usize,
    pub seed: u64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Pin every alpha at 1.
    pub fix_alpha: bool,
    /// Finish with a coordinate-descent pass over genes and alphas.
    pub local_search: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            w: 0.0,
            population_size: 100,
            max_generations: 500,
            stall_generations: 50,
            tournament_size: 3,
            crossover_rate: 0.5,
            mutation_rate: None,
            alpha_mutation_std: 0.05,
            elitism: 2,
            seed: 0,
            alpha_min: ALPHA_MIN,
            alpha_max: ALPHA_MAX,
            fix_alpha: false,
            local_search: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("w", self.w)?;
        unit("crossover_rate", self.crossover_rate)?;
        if let Some(m) = self.mutation_rate {
            unit("mutation_rate", m)?;
        }
        if self.population_size < 2 {
            return Err(Error::config("population_size must be at least 2"));
        }
        if self.tournament_size < 1 {
            return Err(Error::config("tournament_size must be at least 1"));
        }
        if self.elitism >= self.population_size {
            return Err(Error::config("elitism must be smaller than population_size"));
        }
        if !(self.alpha_mutation_std.is_finite() && self.alpha_mutation_std >= 0.0) {
            return Err(Error::config("alpha_mutation_std must be finite and non-negative"));
        }
        if !(self.alpha_min.is_finite()
            && self.alpha_max.is_finite()
            && 0.0 <= self.alpha_min
            && self.alpha_min <= self.alpha_max)
        {
            return Err(Error::config(format!(
                "alpha range [{}, {}] is invalid",
                self.alpha_min, self.alpha_max
            )));
        }
        Ok(())
    }
}

/// Result of a GA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub assignment: BuddyAssignment,
    pub cost: CostBreakdown,
    /// Best cost after initialisation and after each generation; the last
    /// entry includes the local-search pass.
    pub trace: Vec<f64>,
    pub generations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<usize>,
    alphas: Vec<f64>,
    cost: f64,
}

struct Search<'a> {
    model: CostModel<'a>,
    candidates: Vec<&'a [usize]>,
    cfg: &'a GaConfig,
    mutation_rate: f64,
    alpha_step: Option<Normal<f64>>,
}

impl Search<'_> {
    fn profiles(&self, ind: &Individual) -> Vec<usize> {
        ind.genes
            .iter()
            .zip(&self.candidates)
            .map(|(&g, c)| c[g])
            .collect()
    }

    fn breakdown(&self, ind: &Individual) -> CostBreakdown {
        self.model.evaluate_parts(&self.profiles(ind), &ind.alphas)
    }

    fn evaluate(&self, pop: &mut [Individual]) -> usize {
        let pending: Vec<&mut Individual> = pop.iter_mut().filter(|i| i.cost.is_nan()).collect();
        let n = pending.len();
        pending
            .into_par_iter()
            .for_each(|ind| ind.cost = self.breakdown(ind).total);
        n
    }

    fn random_individual<R: Rng>(&self, rng: &mut R) -> Individual {
        let genes = self
            .candidates
            .iter()
            .map(|c| rng.random_range(0..c.len()))
            .collect();
        let alphas = (0..self.candidates.len())
            .map(|j| {
                if self.cfg.fix_alpha || self.model.is_domestic(j) {
                    1.0
                } else {
                    rng.random_range(self.cfg.alpha_min..=self.cfg.alpha_max)
                }
            })
            .collect();
        Individual {
            genes,
            alphas,
            cost: f64::NAN,
        }
    }

    fn tournament<R: Rng>(&self, pop: &[Individual], rng: &mut R) -> usize {
        let mut best = rng.random_range(0..pop.len());
        for _ in 1..self.cfg.tournament_size {
            let k = rng.random_range(0..pop.len());
            if (pop[k].cost, k) < (pop[best].cost, best) {
                best = k;
            }
        }
        best
    }

    fn offspring<R: Rng>(&self, a: &Individual, b: &Individual, rng: &mut R) -> Individual {
        let mut child = a.clone();
        child.cost = f64::NAN;
        for j in 0..child.genes.len() {
            if rng.random::<f64>() < self.cfg.crossover_rate {
                child.genes[j] = b.genes[j];
                child.alphas[j] = b.alphas[j];
            }
        }
        for j in 0..child.genes.len() {
            let n = self.candidates[j].len();
            if n > 1 && rng.random::<f64>() < self.mutation_rate {
                child.genes[j] = rng.random_range(0..n);
            }
            if let Some(step) = &self.alpha_step {
                if !self.model.is_domestic(j) && rng.random::<f64>() < self.mutation_rate {
                    child.alphas[j] = (child.alphas[j] + step.sample(rng))
                        .clamp(self.cfg.alpha_min, self.cfg.alpha_max);
                }
            }
        }
        child
    }

    /// Coordinate descent: best single-gene swap, then the exact best alpha, per customer,
    /// until a full sweep changes nothing.
    fn local_search(&self, ind: &Individual) -> Individual {
        let mut cur = ind.clone();
        let mut profiles = self.profiles(&cur);
        let sub = self.model.substation();
        let mut agg = self.aggregate(&profiles, &cur.alphas);
        let s_total = self.model.substation_total().unwrap_or(1.0);
        let w = self.model.w();
        let sub_abs = |agg: &[f64]| -> f64 {
            sub.map_or(0.0, |s| agg.iter().zip(s).map(|(a, s)| (a - s).abs()).sum::<f64>() / s_total)
        };
        let total_of = |sub_term: f64, profiles: &[usize], alphas: &[f64]| -> f64 {
            let (d, n) = self.model.demand_terms(profiles, alphas);
            self.model.combine(sub_term, d, n).total
        };
        let mut cur_total = total_of(sub_abs(&agg), &profiles, &cur.alphas);
        let improves = |new: f64, old: f64| new < old - 1e-13 * old.abs().max(1e-300);

        for _sweep in 0..1000 {
            let mut changed = false;
            for j in 0..profiles.len() {
                let weight = self.model.series_weight(j, cur.alphas[j]);
                // gene swaps
                let old_k = profiles[j];
                let mut best: Option<(usize, f64)> = None;
                for (g, &k) in self.candidates[j].iter().enumerate() {
                    if k == old_k {
                        continue;
                    }
                    let sub_term = match sub {
                        Some(s) => {
                            let (old_v, new_v) = (self.model.view(old_k), self.model.view(k));
                            let mut acc = 0.0;
                            for h in 0..s.len() {
                                acc += (agg[h] + weight * (new_v[h] - old_v[h]) - s[h]).abs();
                            }
                            acc / s_total
                        }
                        None => 0.0,
                    };
                    profiles[j] = k;
                    let t = total_of(sub_term, &profiles, &cur.alphas);
                    profiles[j] = old_k;
                    if improves(t, best.map_or(cur_total, |b| b.1)) {
                        best = Some((g, t));
                    }
                }
                if let Some((g, t)) = best {
                    let k = self.candidates[j][g];
                    let (old_v, new_v) = (self.model.view(old_k), self.model.view(k));
                    for h in 0..agg.len() {
                        agg[h] += weight * (new_v[h] - old_v[h]);
                    }
                    profiles[j] = k;
                    cur.genes[j] = g;
                    cur_total = t;
                    changed = true;
                }
                // alpha line search
                if !self.model.is_domestic(j) && !self.cfg.fix_alpha {
                    let alpha = self.best_alpha(j, profiles[j], cur.alphas[j], &agg, w, s_total);
                    if alpha != cur.alphas[j] {
                        let mut alphas = cur.alphas.clone();
                        alphas[j] = alpha;
                        let u = self.model.mean_daily(j);
                        let delta = (alpha - cur.alphas[j]) * u;
                        let mut trial = agg.clone();
                        let v = self.model.view(profiles[j]);
                        for h in 0..trial.len() {
                            trial[h] += delta * v[h];
                        }
                        let t = total_of(sub_abs(&trial), &profiles, &alphas);
                        if improves(t, cur_total) {
                            agg = trial;
                            cur.alphas = alphas;
                            cur_total = t;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        cur.cost = self.breakdown(&cur).total;
        cur
    }

    fn aggregate(&self, profiles: &[usize], alphas: &[f64]) -> Vec<f64> {
        let n = self.model.window().slots();
        let mut agg = vec![0.0; n];
        for (j, (&k, &a)) in profiles.iter().zip(alphas).enumerate() {
            let weight = self.model.series_weight(j, a);
            for (x, p) in agg.iter_mut().zip(self.model.view(k)) {
                *x += weight * p;
            }
        }
        agg
    }

    /// Minimiser over the alpha range of the cost as a function of customer `j`'s alpha alone.
    /// The cost is convex and piecewise linear in alpha, so the minimiser is a weighted median.
    fn best_alpha(&self, j: usize, profile: usize, alpha: f64, agg: &[f64], w: f64, s_total: f64) -> f64 {
        let u = self.model.mean_daily(j);
        let mut points: Vec<(f64, f64)> = Vec::new();
        if let Some(s) = self.model.substation() {
            let v = self.model.view(profile);
            for h in 0..s.len() {
                let c = u * v[h];
                if c != 0.0 {
                    let rest = s[h] - (agg[h] - alpha * c);
                    points.push((rest / c, (1.0 - w) * c.abs() / s_total));
                }
            }
        }
        if w > 0.0 {
            points.push((1.0, w * u / self.model.demand_total()));
        }
        weighted_median(&mut points)
            .unwrap_or(alpha)
            .clamp(self.cfg.alpha_min, self.cfg.alpha_max)
    }
}

/// Lower weighted median of `(value, weight)` pairs with positive weights.
pub(crate) fn weighted_median(points: &mut Vec<(f64, f64)>) -> Option<f64> {
    points.retain(|p| p.1 > 0.0 && p.0.is_finite());
    if points.is_empty() {
        return None;
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = points.iter().map(|p| p.1).sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for p in points.iter() {
        acc += p.1;
        if acc >= half {
            return Some(p.0);
        }
    }
    points.last().map(|p| p.0)
}

/// Runs the genetic algorithm over the training `window`.
pub fn ga_buddy(feeder: &Feeder, pool: &MonitoredPool, window: Window, cfg: &GaConfig) -> Result<GaOutcome> {
    cfg.validate()?;
    let model = CostModel::new(feeder, pool, cfg.w, window)?;
    let candidates = feeder
        .customers
        .iter()
        .map(|c| pool.candidates(&c.group_key()))
        .collect::<Result<Vec<_>>>()?;
    let m = feeder.len();
    let alpha_step = if cfg.fix_alpha || cfg.alpha_mutation_std == 0.0 {
        None
    } else {
        let scale = (cfg.alpha_max - cfg.alpha_min) / (ALPHA_MAX - ALPHA_MIN);
        Some(
            Normal::new(0.0, cfg.alpha_mutation_std * scale)
                .map_err(|e| Error::config(format!("alpha mutation: {e}")))?,
        )
    };
    let search = Search {
        model,
        candidates,
        cfg,
        mutation_rate: cfg.mutation_rate.unwrap_or(1.0 / m as f64),
        alpha_step,
    };
    let mut rng = rng::stream(cfg.seed, 0);

    // initial population: nearest-demand solution plus random individuals
    let simple = simple_buddy(feeder, pool)?;
    let seeded = Individual {
        genes: simple
            .buddies
            .iter()
            .zip(&search.candidates)
            .map(|(b, c)| c.iter().position(|&k| k == b.profile).expect("candidate of own group"))
            .collect(),
        alphas: simple
            .buddies
            .iter()
            .map(|b| b.alpha.unwrap_or(1.0).clamp(cfg.alpha_min, cfg.alpha_max))
            .collect(),
        cost: f64::NAN,
    };
    let mut pop = vec![seeded];
    while pop.len() < cfg.population_size {
        pop.push(search.random_individual(&mut rng));
    }
    let mut evaluations = search.evaluate(&mut pop);
    let mut best = best_of(&pop).clone();
    let mut trace = vec![best.cost];
    let mut stall = 0;
    let mut generations = 0;

    while generations < cfg.max_generations && stall < cfg.stall_generations {
        generations += 1;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[a].cost.total_cmp(&pop[b].cost).then(a.cmp(&b)));
        let mut next: Vec<Individual> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population_size {
            let a = search.tournament(&pop, &mut rng);
            let b = search.tournament(&pop, &mut rng);
            next.push(search.offspring(&pop[a], &pop[b], &mut rng));
        }
        pop = next;
        evaluations += search.evaluate(&mut pop);
        let gen_best = best_of(&pop);
        if gen_best.cost < best.cost {
            best = gen_best.clone();
            stall = 0;
        } else {
            stall += 1;
        }
        trace.push(best.cost);
    }

    if cfg.local_search {
        let polished = search.local_search(&best);
        if polished.cost < best.cost {
            best = polished;
        }
        trace.push(best.cost);
    }

    let profiles = search.profiles(&best);
    let assignment = BuddyAssignment::new(
        profiles
            .iter()
            .enumerate()
            .map(|(j, &k)| Buddy {
                profile: k,
                alpha: (!search.model.is_domestic(j)).then_some(best.alphas[j]),
            })
            .collect(),
    );
    assignment.validate_with_bounds(feeder, pool, cfg.alpha_min, cfg.alpha_max)?;
    let cost = search.model.evaluate(&assignment);
    Ok(GaOutcome {
        assignment,
        cost,
        trace,
        generations,
        evaluations,
    })
}

fn best_of(pop: &[Individual]) -> &Individual {
    pop.iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.cost.total_cmp(&b.cost).then(i.cmp(j)))
        .map(|(_, ind)| ind)
        .expect("non-empty population")
}
