//! Generational GA over patch genomes.
//!
//! Tournament selection, one-point crossover with independent cut points in
//! each parent, per-gene mutation plus one optional structural edit, and
//! elitism. Fitness is minimized. All randomness comes from a single
//! [`SearchRng`] seeded from [`GAConfig::rng_seed`], consumed on the calling
//! thread, so a deterministic fitness function gives a deterministic run.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::catalog::{PassCatalog, PassSequence};
use crate::fitness::FitnessValue;
use crate::patch::{apply_individual, Individual, Patch, PatchType};
use crate::SearchRng;

/// Half-width of the uniform position perturbation used by mutation.
pub const POSITION_PERTURBATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid GA configuration: {0}")]
    Invalid(&'static str),
}

/// Every knob of the search. Defaults are this crate's own choices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GAConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Probability that a genome is touched by mutation at all.
    pub mutation_rate: f64,
    pub per_gene_mutation_rate: f64,
    pub tournament_size: usize,
    pub elitism_count: usize,
    pub init_genome_len_min: usize,
    pub init_genome_len_max: usize,
    pub max_genome_len: usize,
    pub rng_seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig {
            population_size: 50,
            generations: 25,
            crossover_rate: 0.9,
            mutation_rate: 0.3,
            per_gene_mutation_rate: 0.2,
            tournament_size: 2,
            elitism_count: 1,
            init_genome_len_min: 1,
            init_genome_len_max: 8,
            max_genome_len: 32,
            rng_seed: 1,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.population_size == 0 {
            return Err(ConfigError::Invalid("population_size must be positive"));
        }
        if self.generations == 0 {
            return Err(ConfigError::Invalid("generations must be positive"));
        }
        if !unit(self.crossover_rate) || !unit(self.mutation_rate) || !unit(self.per_gene_mutation_rate) {
            return Err(ConfigError::Invalid("rates must lie in [0, 1]"));
        }
        if self.tournament_size < 2 {
            return Err(ConfigError::Invalid("tournament_size must be at least 2"));
        }
        // A population of one with one elite is allowed: it just re-evaluates.
        if self.elitism_count > self.population_size
            || (self.elitism_count == self.population_size && self.population_size > 1)
        {
            return Err(ConfigError::Invalid("elitism_count must be below population_size"));
        }
        if self.init_genome_len_min == 0 || self.max_genome_len == 0 {
            return Err(ConfigError::Invalid("genome lengths must be positive"));
        }
        if self.init_genome_len_min > self.init_genome_len_max || self.init_genome_len_max > self.max_genome_len {
            return Err(ConfigError::Invalid(
                "need init_genome_len_min <= init_genome_len_max <= max_genome_len",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best fitness within this generation.
    pub best_fitness: FitnessValue,
    /// Mean over measured (non-penalty) fitnesses; `Penalty` if none measured.
    pub mean_fitness: FitnessValue,
    pub best_individual: Individual,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionHistory {
    pub generations: Vec<GenerationRecord>,
}

impl EvolutionHistory {
    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    /// Running minimum of the per-generation best.
    pub fn best_so_far(&self) -> Vec<FitnessValue> {
        let mut acc: Option<FitnessValue> = None;
        self.generations
            .iter()
            .map(|g| {
                let next = match acc {
                    Some(a) if a <= g.best_fitness => a,
                    _ => g.best_fitness,
                };
                acc = Some(next);
                next
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome {
    pub best: Individual,
    pub best_fitness: FitnessValue,
    pub history: EvolutionHistory,
}

/// A patch with type, position, and (if needed) value drawn uniformly.
pub fn random_patch<R: Rng + ?Sized>(catalog: &PassCatalog, rng: &mut R) -> Patch {
    let ptype = PatchType::ALL[rng.gen_range(0..3)];
    let position = rng.gen_range(0.0..=1.0);
    let value = ptype.needs_value().then(|| random_pass(catalog, rng));
    Patch::from_parts(ptype, position, value)
}

fn random_pass<R: Rng + ?Sized>(catalog: &PassCatalog, rng: &mut R) -> crate::catalog::PassName {
    catalog.passes()[rng.gen_range(0..catalog.len())].clone()
}

pub fn init_population<R: Rng + ?Sized>(cfg: &GAConfig, catalog: &PassCatalog, rng: &mut R) -> Vec<Individual> {
    (0..cfg.population_size)
        .map(|_| {
            let len = rng.gen_range(cfg.init_genome_len_min..=cfg.init_genome_len_max);
            Individual::new((0..len).map(|_| random_patch(catalog, rng)).collect())
        })
        .collect()
}

/// Index of the tournament winner: `k` uniform draws with replacement, the
/// lowest fitness wins, ties go to the earliest draw.
pub(crate) fn tournament_index<R: Rng + ?Sized>(fitnesses: &[FitnessValue], k: usize, rng: &mut R) -> usize {
    assert!(!fitnesses.is_empty(), "tournament over an empty population");
    let mut best = rng.gen_range(0..fitnesses.len());
    for _ in 1..k {
        let c = rng.gen_range(0..fitnesses.len());
        if fitnesses[c] < fitnesses[best] {
            best = c;
        }
    }
    best
}

pub fn tournament_select<'a, R: Rng + ?Sized>(
    population: &'a [Individual],
    fitnesses: &[FitnessValue],
    k: usize,
    rng: &mut R,
) -> &'a Individual {
    assert_eq!(population.len(), fitnesses.len());
    &population[tournament_index(fitnesses, k, rng)]
}

/// Splices `a[..cut_a] + b[cut_b..]` and `b[..cut_b] + a[cut_a..]`, each
/// truncated to `max_len`.
pub fn crossover_at(a: &Individual, b: &Individual, cut_a: usize, cut_b: usize, max_len: usize) -> (Individual, Individual) {
    let splice = |head: &[Patch], tail: &[Patch]| {
        let mut v: Vec<Patch> = head.iter().chain(tail).cloned().collect();
        v.truncate(max_len);
        Individual::new(v)
    };
    (
        splice(&a.patches[..cut_a], &b.patches[cut_b..]),
        splice(&b.patches[..cut_b], &a.patches[cut_a..]),
    )
}

/// One-point crossover with cut points uniform in `[0, |a|]` and `[0, |b|]`.
pub fn crossover<R: Rng + ?Sized>(a: &Individual, b: &Individual, max_len: usize, rng: &mut R) -> (Individual, Individual) {
    let ca = rng.gen_range(0..=a.len());
    let cb = rng.gen_range(0..=b.len());
    crossover_at(a, b, ca, cb, max_len)
}

pub fn mutate<R: Rng + ?Sized>(ind: &Individual, catalog: &PassCatalog, cfg: &GAConfig, rng: &mut R) -> Individual {
    let mut out = ind.clone();
    if !rng.gen_bool(cfg.mutation_rate) {
        return out;
    }
    for gene in out.patches.iter_mut() {
        if !rng.gen_bool(cfg.per_gene_mutation_rate) {
            continue;
        }
        match rng.gen_range(0..3) {
            0 => {
                let ptype = PatchType::ALL[rng.gen_range(0..3)];
                let value = match (ptype.needs_value(), gene.value()) {
                    (false, _) => None,
                    (true, Some(v)) => Some(v.clone()),
                    (true, None) => Some(random_pass(catalog, rng)),
                };
                *gene = Patch::from_parts(ptype, gene.position(), value);
            }
            1 => {
                let delta = rng.gen_range(-POSITION_PERTURBATION..=POSITION_PERTURBATION);
                gene.set_position(gene.position() + delta);
            }
            _ => {
                if gene.value().is_some() {
                    gene.set_value(random_pass(catalog, rng));
                }
            }
        }
    }
    if rng.gen_bool(cfg.per_gene_mutation_rate) {
        let can_grow = out.len() < cfg.max_genome_len;
        let can_shrink = !out.is_empty();
        let grow = match (can_grow, can_shrink) {
            (true, true) => rng.gen_bool(0.5),
            (g, _) => g,
        };
        if grow && can_grow {
            out.patches.push(random_patch(catalog, rng));
        } else if can_shrink {
            let i = rng.gen_range(0..out.len());
            out.patches.remove(i);
        }
    }
    out
}

/// Runs the GA with a per-sequence fitness function.
pub fn evolve<F>(cfg: &GAConfig, baseline: &PassSequence, catalog: &PassCatalog, mut fitness_fn: F) -> EvolutionOutcome
where
    F: FnMut(&PassSequence) -> FitnessValue,
{
    evolve_batched(cfg, baseline, catalog, |seqs: &[PassSequence]| seqs.iter().map(&mut fitness_fn).collect())
}

/// Runs the GA, handing each generation's candidate sequences to `eval_batch`
/// at once. The returned fitnesses must be positional.
///
/// Panics if `cfg` is invalid or `eval_batch` returns the wrong count.
pub fn evolve_batched<F>(cfg: &GAConfig, baseline: &PassSequence, catalog: &PassCatalog, mut eval_batch: F) -> EvolutionOutcome
where
    F: FnMut(&[PassSequence]) -> Vec<FitnessValue>,
{
    cfg.validate().expect("invalid GA configuration");
    let mut rng = SearchRng::seed_from_u64(cfg.rng_seed);
    let mut population = init_population(cfg, catalog, &mut rng);
    let mut history = EvolutionHistory::default();
    let mut best: Option<(Individual, FitnessValue)> = None;

    for generation in 0..cfg.generations {
        let seqs: Vec<PassSequence> = population.iter().map(|ind| apply_individual(baseline, ind)).collect();
        let fitnesses = eval_batch(&seqs);
        assert_eq!(fitnesses.len(), population.len(), "fitness batch size mismatch");

        // stable sort keeps earlier individuals ahead on ties
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&i, &j| fitnesses[i].cmp(&fitnesses[j]));
        let gen_best = order[0];

        let measured: Vec<f64> = fitnesses.iter().filter_map(FitnessValue::seconds).collect();
        let mean_fitness = if measured.is_empty() {
            FitnessValue::Penalty
        } else {
            FitnessValue::Measured(measured.iter().sum::<f64>() / measured.len() as f64)
        };
        history.generations.push(GenerationRecord {
            generation,
            best_fitness: fitnesses[gen_best],
            mean_fitness,
            best_individual: population[gen_best].clone(),
        });
        if best.as_ref().map_or(true, |(_, f)| fitnesses[gen_best] < *f) {
            best = Some((population[gen_best].clone(), fitnesses[gen_best]));
        }

        if generation + 1 == cfg.generations {
            break;
        }

        let mut next: Vec<Individual> = order[..cfg.elitism_count].iter().map(|&i| population[i].clone()).collect();
        while next.len() < cfg.population_size {
            let pa = &population[tournament_index(&fitnesses, cfg.tournament_size, &mut rng)];
            let pb = &population[tournament_index(&fitnesses, cfg.tournament_size, &mut rng)];
            let (ca, cb) = if rng.gen_bool(cfg.crossover_rate) {
                crossover(pa, pb, cfg.max_genome_len, &mut rng)
            } else {
                (pa.clone(), pb.clone())
            };
            next.push(mutate(&ca, catalog, cfg, &mut rng));
            if next.len() < cfg.population_size {
                next.push(mutate(&cb, catalog, cfg, &mut rng));
            }
        }
        population = next;
    }

    let (best, best_fitness) = best.expect("at least one generation runs");
    EvolutionOutcome { best, best_fitness, history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{load_catalog, PassName};
    use crate::fitness::{simulated_fitness, SimModel};
    use alloc::vec;

    fn catalog() -> PassCatalog {
        load_catalog("a\nb\nc\nd\ne\nf\n").unwrap()
    }

    fn rng(seed: u64) -> SearchRng {
        SearchRng::seed_from_u64(seed)
    }

    fn seq(items: &[&str]) -> PassSequence {
        PassSequence::new(items.iter().map(|s| PassName::new(*s).unwrap()).collect(), "")
    }

    #[test]
    fn random_patch_single_pass_catalog() {
        let cat = load_catalog("a\n").unwrap();
        let mut r = rng(3);
        for _ in 0..200 {
            let p = random_patch(&cat, &mut r);
            assert!(p.is_valid_for(&cat));
            if p.ptype() != PatchType::Deletion {
                assert_eq!(p.value().unwrap().as_str(), "a");
            }
        }
    }

    #[test]
    fn random_patch_replays() {
        let cat = catalog();
        let a: Vec<_> = (0..10).map({ let mut r = rng(9); move |_| random_patch(&cat, &mut r) }).collect();
        let cat = catalog();
        let b: Vec<_> = (0..10).map({ let mut r = rng(9); move |_| random_patch(&cat, &mut r) }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn random_patch_covers_all_types() {
        let cat = catalog();
        let mut r = rng(0);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            let p = random_patch(&cat, &mut r);
            counts[PatchType::ALL.iter().position(|t| *t == p.ptype()).unwrap()] += 1;
        }
        for c in counts {
            assert!((800..1200).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn init_population_shapes() {
        let cfg = GAConfig { population_size: 3, init_genome_len_min: 1, init_genome_len_max: 1, ..GAConfig::default() };
        let pop = init_population(&cfg, &catalog(), &mut rng(1));
        assert_eq!(pop.len(), 3);
        assert!(pop.iter().all(|i| i.len() == 1));

        let cfg = GAConfig::default();
        let a = init_population(&cfg, &catalog(), &mut rng(5));
        let b = init_population(&cfg, &catalog(), &mut rng(5));
        assert_eq!(a, b);
        assert!(a.iter().all(|i| (1..=8).contains(&i.len())));
    }

    #[test]
    fn tournament_single() {
        let pop = vec![Individual::default()];
        let f = vec![FitnessValue::Penalty];
        assert_eq!(tournament_select(&pop, &f, 2, &mut rng(0)), &pop[0]);
    }

    #[test]
    fn tournament_returns_best_of_sampled() {
        // Oracle: replay the same draws and take the min directly.
        let f: Vec<_> = [5.0, 3.0, 4.0, 1.0, 2.0].iter().map(|&x| FitnessValue::measured(x)).collect();
        for seed in 0..200 {
            let mut r1 = rng(seed);
            let got = tournament_index(&f, 5, &mut r1);
            let mut r2 = rng(seed);
            let draws: Vec<usize> = (0..5).map(|_| r2.gen_range(0..5)).collect();
            let expected = *draws.iter().min_by(|&&a, &&b| f[a].cmp(&f[b])).unwrap();
            assert_eq!(got, expected);
            // once all five are drawn the winner is the global best
            let mut sorted = draws.clone();
            sorted.sort();
            if sorted == [0, 1, 2, 3, 4] {
                assert_eq!(got, 3);
            }
        }
    }

    #[test]
    fn tournament_tie_goes_to_first_draw() {
        let f = vec![FitnessValue::measured(1.0); 4];
        for seed in 0..50 {
            let mut r1 = rng(seed);
            let got = tournament_index(&f, 3, &mut r1);
            let mut r2 = rng(seed);
            assert_eq!(got, r2.gen_range(0..4));
        }
    }

    #[test]
    fn crossover_splice() {
        let cat = catalog();
        let mut r = rng(2);
        let p = random_patch(&cat, &mut r);
        let q = random_patch(&cat, &mut r);
        let s = random_patch(&cat, &mut r);
        let a = Individual::new(vec![p.clone(), q.clone()]);
        let b = Individual::new(vec![s.clone()]);
        let (c1, c2) = crossover_at(&a, &b, 1, 0, 32);
        assert_eq!(c1.patches, vec![p, s]);
        assert_eq!(c2.patches, vec![q]);

        let (e1, e2) = crossover(&Individual::default(), &Individual::default(), 32, &mut r);
        assert!(e1.is_empty() && e2.is_empty());
    }

    #[test]
    fn crossover_conserves_genes() {
        let cat = catalog();
        let cfg = GAConfig::default();
        let mut r = rng(11);
        let pop = init_population(&cfg, &cat, &mut r);
        for w in pop.windows(2) {
            let (c1, c2) = crossover(&w[0], &w[1], usize::MAX, &mut r);
            assert_eq!(c1.len() + c2.len(), w[0].len() + w[1].len());
        }
        let (c1, c2) = crossover_at(&pop[0], &pop[1], pop[0].len(), 0, 2);
        assert!(c1.len() <= 2 && c2.len() <= 2);
    }

    #[test]
    fn mutate_rate_zero_is_identity() {
        let cat = catalog();
        let cfg = GAConfig { mutation_rate: 0.0, ..GAConfig::default() };
        let mut r = rng(4);
        for ind in init_population(&GAConfig::default(), &cat, &mut r.clone()) {
            assert_eq!(mutate(&ind, &cat, &cfg, &mut r), ind);
        }
    }

    #[test]
    fn mutate_keeps_invariants() {
        let cat = catalog();
        let cfg = GAConfig { mutation_rate: 1.0, per_gene_mutation_rate: 1.0, max_genome_len: 4, init_genome_len_max: 4, ..GAConfig::default() };
        let mut r = rng(8);
        let mut ind = init_population(&cfg, &cat, &mut r).remove(0);
        for _ in 0..2000 {
            ind = mutate(&ind, &cat, &cfg, &mut r);
            assert!(ind.len() <= 4);
            assert!(ind.patches.iter().all(|p| p.is_valid_for(&cat)));
        }
    }

    #[test]
    fn mutate_is_deterministic() {
        let cat = catalog();
        let cfg = GAConfig { mutation_rate: 1.0, ..GAConfig::default() };
        let ind = init_population(&cfg, &cat, &mut rng(1)).remove(0);
        assert_eq!(mutate(&ind, &cat, &cfg, &mut rng(77)), mutate(&ind, &cat, &cfg, &mut rng(77)));
    }

    #[test]
    fn degenerate_loop_returns_initial() {
        let cat = catalog();
        let cfg = GAConfig { population_size: 1, generations: 1, elitism_count: 1, ..GAConfig::default() };
        let initial = init_population(&cfg, &cat, &mut rng(cfg.rng_seed)).remove(0);
        let out = evolve(&cfg, &seq(&["a"]), &cat, |_| FitnessValue::measured(1.0));
        assert_eq!(out.best, initial);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn evolve_counts_and_monotone() {
        let cat = catalog();
        let model = SimModel { target: seq(&["a", "c", "e", "b"]), base_runtime: 1.0 };
        let cfg = GAConfig { population_size: 20, generations: 15, rng_seed: 3, ..GAConfig::default() };
        let mut calls = 0usize;
        let out = evolve(&cfg, &seq(&["a", "b", "c", "d"]), &cat, |s| {
            calls += 1;
            simulated_fitness(s, &model)
        });
        assert_eq!(calls, 20 * 15);
        assert_eq!(out.history.len(), 15);
        let gen_best: Vec<_> = out.history.generations.iter().map(|g| g.best_fitness).collect();
        assert!(gen_best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.best_fitness, *gen_best.last().unwrap());
    }

    #[test]
    fn validate_rejects_bad_configs() {
        assert!(GAConfig::default().validate().is_ok());
        assert!(GAConfig { tournament_size: 1, ..GAConfig::default() }.validate().is_err());
        assert!(GAConfig { elitism_count: 50, ..GAConfig::default() }.validate().is_err());
        assert!(GAConfig { init_genome_len_min: 9, ..GAConfig::default() }.validate().is_err());
        assert!(GAConfig { crossover_rate: 1.5, ..GAConfig::default() }.validate().is_err());
        assert!(GAConfig { population_size: 1, elitism_count: 1, ..GAConfig::default() }.validate().is_ok());
    }
}
