//! The genetic search: population initialization, tournament selection,
//! uniform crossover with a dedicated one-point operator for index-set
//! genes, single-gene mutation, repair, elitism, patience restarts and
//! budgeted, parallel fitness evaluation.
//!
//! Fitness evaluation seeds derive from the genome content and the run
//! seed, so results are independent of evaluation order and worker count,
//! and re-evaluating an elite reproduces its fitness exactly.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyzer::{Blueprint, StepSpec};
use crate::dataset::Dataset;
use crate::error::SearchError;
use crate::learners::sample_model_gene;
use crate::metrics::{self, dr_mode, DrMode};
use crate::pipeline::{fit_pipeline, min_is_size, ConfiguredStep, Genome};

/// Genetic algorithm parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GAConfig {
    pub population_size: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    /// Generations without strict best-fitness improvement before a restart.
    pub patience: usize,
    /// Largest fraction of an index gene's full range one mutation may touch.
    pub max_change_fraction: f64,
    pub time_budget_seconds: f64,
    /// Alternative stop criterion; makes runs reproducible.
    pub max_evaluations: Option<usize>,
    /// Allow mutation to add and delete the data-reduction genes.
    pub auto_dr: bool,
    /// Probability that a freshly sampled genome carries each DR gene.
    pub p_dr_gene_init: f64,
    /// Worker count for fitness evaluation. A runtime knob, not an
    /// experiment parameter: results are worker-independent, so it stays
    /// out of serialized reports.
    #[serde(skip_serializing)]
    pub parallel_jobs: usize,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            p_crossover: 0.7,
            p_mutation: 0.3,
            tournament_size: 3,
            elitism: 1,
            patience: 5,
            max_change_fraction: 0.10,
            time_budget_seconds: 900.0,
            max_evaluations: None,
            auto_dr: true,
            p_dr_gene_init: 0.5,
            parallel_jobs: 5,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        for (name, p) in [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
            ("p_dr_gene_init", self.p_dr_gene_init),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SearchError::InvalidConfig(format!(
                    "{name}={p} outside [0, 1]"
                )));
            }
        }
        if self.population_size == 0 || self.population_size <= self.elitism {
            return Err(SearchError::InvalidConfig(
                "population_size must exceed elitism".into(),
            ));
        }
        if self.tournament_size == 0 {
            return Err(SearchError::InvalidConfig(
                "tournament_size must be at least 1".into(),
            ));
        }
        if !(self.max_change_fraction > 0.0 && self.max_change_fraction <= 1.0) {
            return Err(SearchError::InvalidConfig(
                "max_change_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.parallel_jobs == 0 {
            return Err(SearchError::InvalidConfig(
                "parallel_jobs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A genome together with its evaluated fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedIndividual {
    pub genome: Genome,
    /// Search fitness in `[0, 1]`, zero best; 1.0 for failed pipelines.
    pub fitness: f64,
    pub failure: bool,
    /// Order of evaluation; breaks fitness ties.
    pub eval_index: usize,
    /// Seed the evaluation ran under; refitting with it reproduces the
    /// pipeline bit for bit.
    pub eval_seed: u64,
}

/// Per-generation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Cumulative restarts up to and including this generation.
    pub restarts: usize,
    /// Cumulative evaluations after this generation.
    pub evaluations: usize,
}

/// Outcome of a search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: EvaluatedIndividual,
    pub history: Vec<GenerationStat>,
    pub total_evaluations: usize,
    pub restarts: usize,
    pub wall_time_seconds: f64,
    pub dr_mode: DrMode,
}

fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x0100_0000_01b3);
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Deterministic evaluation seed for a genome under a run seed.
pub fn genome_eval_seed(run_seed: u64, genome: &Genome) -> u64 {
    let bytes = serde_json::to_vec(genome).expect("genome serializes");
    fnv1a64(&bytes, run_seed)
}

// ---------------------------------------------------------------------------
// Sampling and initialization.
// ---------------------------------------------------------------------------

fn sample_configured_step<R: Rng + ?Sized>(spec: &StepSpec, rng: &mut R) -> ConfiguredStep {
    let option = &spec.options[rng.random_range(0..spec.options.len())];
    ConfiguredStep {
        step_id: spec.step_id,
        method: option.method.clone(),
        params: option.sample_params(rng),
    }
}

/// Random index set: size uniform between 10% of the range and the full
/// range (never under `min_size`), indices sampled without replacement.
fn sample_index_set<R: Rng + ?Sized>(max: usize, min_size: usize, rng: &mut R) -> Vec<usize> {
    let lo = ((0.10 * max as f64).ceil() as usize)
        .max(min_size)
        .clamp(1, max);
    let size = rng.random_range(lo..=max);
    let mut set: Vec<usize> = index_sample(rng, max, size).into_iter().collect();
    set.sort_unstable();
    set
}

/// Random instance-selection gene covering every class present in training.
fn sample_is_gene<R: Rng + ?Sized>(blueprint: &Blueprint, rng: &mut R) -> Vec<usize> {
    let max = blueprint.max_instances;
    let min_size = min_is_size(blueprint);
    let lo = ((0.10 * max as f64).ceil() as usize)
        .max(min_size)
        .clamp(1, max);
    let size = rng.random_range(lo..=max);

    let mut chosen = BTreeSet::new();
    for cls in blueprint.present_classes() {
        let members: Vec<usize> = (0..max)
            .filter(|&i| blueprint.instance_classes[i] == cls)
            .collect();
        chosen.insert(members[rng.random_range(0..members.len())]);
    }
    let pool: Vec<usize> = (0..max).filter(|i| !chosen.contains(i)).collect();
    let need = size.saturating_sub(chosen.len()).min(pool.len());
    for idx in index_sample(rng, pool.len(), need) {
        chosen.insert(pool[idx]);
    }
    chosen.into_iter().collect()
}

fn sample_fs_gene<R: Rng + ?Sized>(blueprint: &Blueprint, rng: &mut R) -> Vec<usize> {
    sample_index_set(blueprint.max_features, 1, rng)
}

/// Draw one genome from the blueprint's search space.
pub fn sample_genome<R: Rng + ?Sized>(
    blueprint: &Blueprint,
    cfg: &GAConfig,
    rng: &mut R,
) -> Genome {
    let is_gene =
        (rng.random_range(0.0..1.0) < cfg.p_dr_gene_init).then(|| sample_is_gene(blueprint, rng));
    let fs_gene =
        (rng.random_range(0.0..1.0) < cfg.p_dr_gene_init).then(|| sample_fs_gene(blueprint, rng));
    let prep_genes = blueprint
        .prep_steps()
        .iter()
        .map(|spec| sample_configured_step(spec, rng))
        .collect();
    let model_gene = sample_model_gene(&blueprint.model_step().options, rng);
    Genome {
        is_gene,
        fs_gene,
        prep_genes,
        model_gene,
    }
}

/// Initial population of valid genomes.
pub fn init_population<R: Rng + ?Sized>(
    blueprint: &Blueprint,
    cfg: &GAConfig,
    rng: &mut R,
) -> Result<Vec<Genome>, SearchError> {
    if blueprint.max_features == 0 {
        return Err(SearchError::InvalidConfig(
            "blueprint has no usable features".into(),
        ));
    }
    Ok((0..cfg.population_size)
        .map(|_| repair(sample_genome(blueprint, cfg, rng), blueprint, rng))
        .collect())
}

// ---------------------------------------------------------------------------
// Selection.
// ---------------------------------------------------------------------------

/// Minimum-fitness member of a uniformly drawn subset; fitness ties resolve
/// to the earlier-evaluated individual.
pub fn tournament_select<'a, R: Rng + ?Sized>(
    population: &'a [EvaluatedIndividual],
    size: usize,
    rng: &mut R,
) -> &'a EvaluatedIndividual {
    assert!(!population.is_empty(), "empty population");
    let take = size.clamp(1, population.len());
    let mut best: Option<&EvaluatedIndividual> = None;
    for idx in index_sample(rng, population.len(), take) {
        let candidate = &population[idx];
        best = Some(match best {
            None => candidate,
            Some(current) => {
                if (candidate.fitness, candidate.eval_index) < (current.fitness, current.eval_index)
                {
                    candidate
                } else {
                    current
                }
            }
        });
    }
    best.expect("tournament draws at least one member")
}

// ---------------------------------------------------------------------------
// Crossover.
// ---------------------------------------------------------------------------

fn dedupe_sorted(mut indices: Vec<usize>) -> Vec<usize> {
    indices.sort_unstable();
    indices.dedup();
    indices
}

/// One-point crossover on two sorted index sets: cut both at the same
/// position and swap tails, deduplicating so unique values are preserved.
pub fn one_point_index_crossover(a: &[usize], b: &[usize], cut: usize) -> (Vec<usize>, Vec<usize>) {
    let cut = cut.min(a.len()).min(b.len());
    let child1 = dedupe_sorted(a[..cut].iter().chain(b[cut..].iter()).copied().collect());
    let child2 = dedupe_sorted(b[..cut].iter().chain(a[cut..].iter()).copied().collect());
    (child1, child2)
}

fn crossover_dr_slot<R: Rng + ?Sized>(
    a: &Option<Vec<usize>>,
    b: &Option<Vec<usize>>,
    rng: &mut R,
) -> (Option<Vec<usize>>, Option<Vec<usize>>) {
    match (a, b) {
        (Some(ga), Some(gb)) => {
            let cut = rng.random_range(0..=ga.len().min(gb.len()));
            let (c1, c2) = one_point_index_crossover(ga, gb, cut);
            (Some(c1), Some(c2))
        }
        // Present in one parent at most: each offspring inherits the gene of
        // its own parent.
        _ => (a.clone(), b.clone()),
    }
}

/// Produce two offspring: uniform crossover on the non-DR genes, one-point
/// index crossover per DR slot when both parents carry the gene.
pub fn crossover<R: Rng + ?Sized>(p1: &Genome, p2: &Genome, rng: &mut R) -> (Genome, Genome) {
    let (is1, is2) = crossover_dr_slot(&p1.is_gene, &p2.is_gene, rng);
    let (fs1, fs2) = crossover_dr_slot(&p1.fs_gene, &p2.fs_gene, rng);

    let mut prep1 = p1.prep_genes.clone();
    let mut prep2 = p2.prep_genes.clone();
    for (g1, g2) in prep1.iter_mut().zip(prep2.iter_mut()) {
        if rng.random_range(0.0..1.0) < 0.5 {
            std::mem::swap(g1, g2);
        }
    }
    let (mut model1, mut model2) = (p1.model_gene.clone(), p2.model_gene.clone());
    if rng.random_range(0.0..1.0) < 0.5 {
        std::mem::swap(&mut model1, &mut model2);
    }

    (
        Genome {
            is_gene: is1,
            fs_gene: fs1,
            prep_genes: prep1,
            model_gene: model1,
        },
        Genome {
            is_gene: is2,
            fs_gene: fs2,
            prep_genes: prep2,
            model_gene: model2,
        },
    )
}

// ---------------------------------------------------------------------------
// Mutation.
// ---------------------------------------------------------------------------

/// Replace `count` gene members with indices not currently in the gene.
pub fn dr_replace_indices<R: Rng + ?Sized>(
    gene: &[usize],
    count: usize,
    max: usize,
    rng: &mut R,
) -> Vec<usize> {
    let in_gene: BTreeSet<usize> = gene.iter().copied().collect();
    let pool: Vec<usize> = (0..max).filter(|i| !in_gene.contains(i)).collect();
    let k = count.min(gene.len()).min(pool.len());
    let mut kept: Vec<usize> = gene.to_vec();
    for idx in index_sample(rng, gene.len(), count.min(gene.len()))
        .into_iter()
        .take(k)
    {
        // Mark removed members; retain pass below drops them.
        kept[idx] = usize::MAX;
    }
    kept.retain(|&i| i != usize::MAX);
    for idx in index_sample(rng, pool.len(), k) {
        kept.push(pool[idx]);
    }
    dedupe_sorted(kept)
}

/// Add `count` unused indices; saturates at the full range.
pub fn dr_add_indices<R: Rng + ?Sized>(
    gene: &[usize],
    count: usize,
    max: usize,
    rng: &mut R,
) -> Vec<usize> {
    let in_gene: BTreeSet<usize> = gene.iter().copied().collect();
    let pool: Vec<usize> = (0..max).filter(|i| !in_gene.contains(i)).collect();
    let mut out = gene.to_vec();
    for idx in index_sample(rng, pool.len(), count.min(pool.len())) {
        out.push(pool[idx]);
    }
    dedupe_sorted(out)
}

/// Remove `count` random members.
pub fn dr_remove_indices<R: Rng + ?Sized>(gene: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    let k = count.min(gene.len());
    let mut out = gene.to_vec();
    let mut to_remove: Vec<usize> = index_sample(rng, gene.len(), k).into_iter().collect();
    to_remove.sort_unstable_by(|a, b| b.cmp(a));
    for idx in to_remove {
        out.swap_remove(idx);
    }
    dedupe_sorted(out)
}

fn mutate_dr_gene<R: Rng + ?Sized>(
    gene: &[usize],
    max: usize,
    theta_max: f64,
    rng: &mut R,
) -> Vec<usize> {
    // theta uniform in (0, theta_max]; the change size is a fraction of the
    // full index range, not of the current gene.
    let theta = theta_max * (1.0 - rng.random_range(0.0..1.0));
    let count = (theta * max as f64).ceil() as usize;
    match rng.random_range(0..3) {
        0 => dr_replace_indices(gene, count, max, rng),
        1 => dr_add_indices(gene, count, max, rng),
        _ => dr_remove_indices(gene, count, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MutationSlot {
    Is,
    Fs,
    Prep(usize),
    Model,
}

fn mutation_slots(genome: &Genome, cfg: &GAConfig) -> Vec<MutationSlot> {
    let mut slots = Vec::with_capacity(genome.prep_genes.len() + 3);
    if cfg.auto_dr {
        slots.push(MutationSlot::Is);
        slots.push(MutationSlot::Fs);
    }
    for i in 0..genome.prep_genes.len() {
        slots.push(MutationSlot::Prep(i));
    }
    slots.push(MutationSlot::Model);
    slots
}

fn mutate_configured_step<R: Rng + ?Sized>(
    gene: &ConfiguredStep,
    spec: &StepSpec,
    rng: &mut R,
) -> ConfiguredStep {
    if rng.random_range(0.0..1.0) < 0.5 {
        // New method (possibly the same one) with fresh hyperparameters.
        sample_configured_step(spec, rng)
    } else {
        // Keep the method, resample its hyperparameters.
        match spec.options.iter().find(|o| o.method == gene.method) {
            Some(option) => ConfiguredStep {
                step_id: gene.step_id,
                method: gene.method.clone(),
                params: option.sample_params(rng),
            },
            None => sample_configured_step(spec, rng),
        }
    }
}

/// Mutate exactly one gene slot of the genome.
///
/// A present DR gene is deleted with probability 0.5, otherwise modified by
/// one of three equiprobable index operations; an absent DR gene is added,
/// sampled as at initialization. Non-DR genes either change method plus
/// hyperparameters or hyperparameters only, with equal likelihood.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    blueprint: &Blueprint,
    cfg: &GAConfig,
    rng: &mut R,
) -> Genome {
    let mut out = genome.clone();
    let slots = mutation_slots(genome, cfg);
    match slots[rng.random_range(0..slots.len())] {
        MutationSlot::Is => {
            out.is_gene = match &genome.is_gene {
                Some(gene) => {
                    if rng.random_range(0.0..1.0) < 0.5 {
                        None
                    } else {
                        Some(mutate_dr_gene(
                            gene,
                            blueprint.max_instances,
                            cfg.max_change_fraction,
                            rng,
                        ))
                    }
                }
                None => Some(sample_is_gene(blueprint, rng)),
            };
        }
        MutationSlot::Fs => {
            out.fs_gene = match &genome.fs_gene {
                Some(gene) => {
                    if rng.random_range(0.0..1.0) < 0.5 {
                        None
                    } else {
                        Some(mutate_dr_gene(
                            gene,
                            blueprint.max_features,
                            cfg.max_change_fraction,
                            rng,
                        ))
                    }
                }
                None => Some(sample_fs_gene(blueprint, rng)),
            };
        }
        MutationSlot::Prep(i) => {
            out.prep_genes[i] =
                mutate_configured_step(&genome.prep_genes[i], &blueprint.prep_steps()[i], rng);
        }
        MutationSlot::Model => {
            out.model_gene =
                mutate_configured_step(&genome.model_gene, blueprint.model_step(), rng);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Repair.
// ---------------------------------------------------------------------------

fn repair_configured_step<R: Rng + ?Sized>(
    gene: &ConfiguredStep,
    spec: &StepSpec,
    rng: &mut R,
) -> ConfiguredStep {
    let option = match spec.options.iter().find(|o| o.method == gene.method) {
        Some(option) => option,
        None => return sample_configured_step(spec, rng),
    };
    let params = option
        .params
        .iter()
        .map(|(name, space)| {
            let value = match gene.params.get(name) {
                Some(v) => space.clamp(v, rng),
                None => space.sample(rng),
            };
            (name.clone(), value)
        })
        .collect();
    ConfiguredStep {
        step_id: spec.step_id,
        method: gene.method.clone(),
        params,
    }
}

/// Enforce every genome invariant, minimally adjusting the genome: indices
/// are deduplicated and clamped into range, the instance gene regains class
/// coverage and its minimum size, an emptied feature gene receives one
/// random feature, and hyperparameters are clamped into their spaces. Valid
/// genomes pass through unchanged.
pub fn repair<R: Rng + ?Sized>(mut genome: Genome, blueprint: &Blueprint, rng: &mut R) -> Genome {
    if let Some(gene) = genome.is_gene.take() {
        let mut set: BTreeSet<usize> = gene
            .into_iter()
            .filter(|&i| i < blueprint.max_instances)
            .collect();
        // Every class present in training must keep at least one instance.
        let mut covered = vec![false; blueprint.class_count];
        for &i in &set {
            covered[blueprint.instance_classes[i]] = true;
        }
        for cls in blueprint.present_classes() {
            if !covered[cls] {
                let members: Vec<usize> = (0..blueprint.max_instances)
                    .filter(|&i| blueprint.instance_classes[i] == cls)
                    .collect();
                set.insert(members[rng.random_range(0..members.len())]);
            }
        }
        let min_size = min_is_size(blueprint);
        if set.len() < min_size {
            let pool: Vec<usize> = (0..blueprint.max_instances)
                .filter(|i| !set.contains(i))
                .collect();
            let need = (min_size - set.len()).min(pool.len());
            for idx in index_sample(rng, pool.len(), need) {
                set.insert(pool[idx]);
            }
        }
        genome.is_gene = Some(set.into_iter().collect());
    }
    if let Some(gene) = genome.fs_gene.take() {
        let mut set: Vec<usize> = dedupe_sorted(
            gene.into_iter()
                .filter(|&i| i < blueprint.max_features)
                .collect(),
        );
        if set.is_empty() {
            set.push(rng.random_range(0..blueprint.max_features));
        }
        genome.fs_gene = Some(set);
    }
    genome.prep_genes = genome
        .prep_genes
        .iter()
        .zip(blueprint.prep_steps())
        .map(|(gene, spec)| repair_configured_step(gene, spec, rng))
        .collect();
    genome.model_gene = repair_configured_step(&genome.model_gene, blueprint.model_step(), rng);
    genome
}

// ---------------------------------------------------------------------------
// The generational loop.
// ---------------------------------------------------------------------------

fn thread_pool(cfg: &GAConfig) -> Result<rayon::ThreadPool, SearchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel_jobs.max(1))
        .build()
        .map_err(|e| SearchError::InvalidConfig(format!("thread pool: {e}")))
}

fn evaluate_generation<F>(
    genomes: &[Genome],
    run_seed: u64,
    base_index: usize,
    pool: &rayon::ThreadPool,
    evaluate: &F,
) -> Vec<EvaluatedIndividual>
where
    F: Fn(&Genome, u64) -> (f64, bool) + Sync,
{
    let results: Vec<(f64, bool, u64)> = pool.install(|| {
        genomes
            .par_iter()
            .map(|genome| {
                let seed = genome_eval_seed(run_seed, genome);
                let (fitness, failure) = evaluate(genome, seed);
                (fitness, failure, seed)
            })
            .collect()
    });
    genomes
        .iter()
        .zip(results)
        .enumerate()
        .map(
            |(slot, (genome, (fitness, failure, eval_seed)))| EvaluatedIndividual {
                genome: genome.clone(),
                fitness: if failure { 1.0 } else { fitness },
                failure,
                eval_index: base_index + slot,
                eval_seed,
            },
        )
        .collect()
}

fn best_of(population: &[EvaluatedIndividual]) -> &EvaluatedIndividual {
    population
        .iter()
        .min_by(|a, b| {
            (a.fitness, a.eval_index)
                .partial_cmp(&(b.fitness, b.eval_index))
                .expect("fitness is never NaN")
        })
        .expect("population is non-empty")
}

fn elites(population: &[EvaluatedIndividual], count: usize) -> Vec<Genome> {
    let mut sorted: Vec<&EvaluatedIndividual> = population.iter().collect();
    sorted.sort_by(|a, b| {
        (a.fitness, a.eval_index)
            .partial_cmp(&(b.fitness, b.eval_index))
            .expect("fitness is never NaN")
    });
    sorted
        .into_iter()
        .take(count)
        .map(|e| e.genome.clone())
        .collect()
}

fn generation_stat(
    generation: usize,
    population: &[EvaluatedIndividual],
    restarts: usize,
    evaluations: usize,
) -> GenerationStat {
    let mean = population.iter().map(|e| e.fitness).sum::<f64>() / population.len() as f64;
    GenerationStat {
        generation,
        best_fitness: best_of(population).fitness,
        mean_fitness: mean,
        restarts,
        evaluations,
    }
}

/// Run the genetic search against an arbitrary fitness function. The
/// function receives the genome and its derived evaluation seed and returns
/// `(fitness, failure)`.
pub fn evolve_with<F>(
    blueprint: &Blueprint,
    cfg: &GAConfig,
    evaluate: F,
) -> Result<SearchResult, SearchError>
where
    F: Fn(&Genome, u64) -> (f64, bool) + Sync,
{
    cfg.validate()?;
    let pool = thread_pool(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();

    let genomes = init_population(blueprint, cfg, &mut rng)?;
    let mut population = evaluate_generation(&genomes, cfg.seed, 0, &pool, &evaluate);
    let mut total_evaluations = population.len();
    let mut best = best_of(&population).clone();
    let mut history = vec![generation_stat(0, &population, 0, total_evaluations)];
    let mut stagnation = 0usize;
    let mut restarts = 0usize;
    let mut generation = 0usize;

    loop {
        if let Some(max) = cfg.max_evaluations {
            if total_evaluations >= max {
                break;
            }
        }
        if start.elapsed().as_secs_f64() >= cfg.time_budget_seconds {
            break;
        }
        generation += 1;

        let elite_genomes = elites(&population, cfg.elitism);
        let need = cfg.population_size - elite_genomes.len();
        let mut next = elite_genomes;
        if stagnation >= cfg.patience && cfg.patience > 0 {
            // Restart: fresh individuals substitute the population, elites
            // survive.
            restarts += 1;
            stagnation = 0;
            for _ in 0..need {
                next.push(repair(
                    sample_genome(blueprint, cfg, &mut rng),
                    blueprint,
                    &mut rng,
                ));
            }
        } else {
            while next.len() < cfg.population_size {
                let parent1 = tournament_select(&population, cfg.tournament_size, &mut rng);
                let parent2 = tournament_select(&population, cfg.tournament_size, &mut rng);
                let (c1, c2) = if rng.random_range(0.0..1.0) < cfg.p_crossover {
                    crossover(&parent1.genome, &parent2.genome, &mut rng)
                } else {
                    (parent1.genome.clone(), parent2.genome.clone())
                };
                for child in [c1, c2] {
                    if next.len() >= cfg.population_size {
                        break;
                    }
                    let child = if rng.random_range(0.0..1.0) < cfg.p_mutation {
                        mutate(&child, blueprint, cfg, &mut rng)
                    } else {
                        child
                    };
                    next.push(repair(child, blueprint, &mut rng));
                }
            }
        }

        population = evaluate_generation(&next, cfg.seed, total_evaluations, &pool, &evaluate);
        total_evaluations += population.len();
        let gen_best_fitness = best_of(&population).fitness;
        if best.fitness - gen_best_fitness > 1e-12 {
            stagnation = 0;
        } else {
            stagnation += 1;
        }
        if gen_best_fitness < best.fitness {
            best = best_of(&population).clone();
        }
        history.push(generation_stat(
            generation,
            &population,
            restarts,
            total_evaluations,
        ));
    }

    if total_evaluations == 0 {
        return Err(SearchError::NoEvaluations);
    }
    Ok(SearchResult {
        dr_mode: dr_mode(&best.genome),
        best,
        history,
        total_evaluations,
        restarts,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fitness of one genome: fit on `train`, score MCC on `val`, map onto
/// `[0, 1]`. Pipeline failures yield worst fitness.
pub fn pipeline_fitness(
    genome: &Genome,
    blueprint: &Blueprint,
    train: &Dataset,
    val: &Dataset,
    seed: u64,
) -> (f64, bool) {
    let result = fit_pipeline(genome, blueprint, train, seed).and_then(|fp| fp.predict(val));
    match result {
        Ok(preds) => {
            let cm = metrics::ConfusionMatrix::from_labels(&val.target, &preds, val.class_count());
            (metrics::fitness_from_mcc(metrics::mcc(&cm)), false)
        }
        Err(_) => (1.0, true),
    }
}

/// Evolve pipelines for the blueprint, scoring candidates on the validation
/// data.
pub fn evolve(
    blueprint: &Blueprint,
    train: &Dataset,
    val: &Dataset,
    cfg: &GAConfig,
) -> Result<SearchResult, SearchError> {
    evolve_with(blueprint, cfg, |genome, seed| {
        pipeline_fitness(genome, blueprint, train, val, seed)
    })
}

/// Random-search baseline under the same evaluation contract and budget
/// semantics: genomes drawn i.i.d. as at initialization, best kept.
pub fn random_search_with<F>(
    blueprint: &Blueprint,
    cfg: &GAConfig,
    evaluate: F,
) -> Result<SearchResult, SearchError>
where
    F: Fn(&Genome, u64) -> (f64, bool) + Sync,
{
    cfg.validate()?;
    let pool = thread_pool(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();

    let mut history = Vec::new();
    let mut total_evaluations = 0usize;
    let mut best: Option<EvaluatedIndividual> = None;
    let mut generation = 0usize;

    loop {
        let batch_size = match cfg.max_evaluations {
            Some(max) => cfg
                .population_size
                .min(max.saturating_sub(total_evaluations)),
            None => cfg.population_size,
        };
        if batch_size == 0 {
            break;
        }
        let genomes: Vec<Genome> = (0..batch_size)
            .map(|_| repair(sample_genome(blueprint, cfg, &mut rng), blueprint, &mut rng))
            .collect();
        let evaluated =
            evaluate_generation(&genomes, cfg.seed, total_evaluations, &pool, &evaluate);
        total_evaluations += evaluated.len();
        let batch_best = best_of(&evaluated);
        if best.as_ref().is_none_or(|b| batch_best.fitness < b.fitness) {
            best = Some(batch_best.clone());
        }
        let running_best = best.as_ref().expect("batch evaluated").fitness;
        let mean = evaluated.iter().map(|e| e.fitness).sum::<f64>() / evaluated.len() as f64;
        history.push(GenerationStat {
            generation,
            best_fitness: running_best,
            mean_fitness: mean,
            restarts: 0,
            evaluations: total_evaluations,
        });
        generation += 1;

        if let Some(max) = cfg.max_evaluations {
            if total_evaluations >= max {
                break;
            }
        }
        if start.elapsed().as_secs_f64() >= cfg.time_budget_seconds {
            break;
        }
    }

    let best = best.ok_or(SearchError::NoEvaluations)?;
    Ok(SearchResult {
        dr_mode: dr_mode(&best.genome),
        best,
        history,
        total_evaluations,
        restarts: 0,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Random-search baseline on real pipelines.
pub fn random_search(
    blueprint: &Blueprint,
    train: &Dataset,
    val: &Dataset,
    cfg: &GAConfig,
) -> Result<SearchResult, SearchError> {
    random_search_with(blueprint, cfg, |genome, seed| {
        pipeline_fitness(genome, blueprint, train, val, seed)
    })
}
