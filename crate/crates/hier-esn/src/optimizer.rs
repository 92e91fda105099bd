//! Microbial genetic algorithm over per-sub-reservoir hyperparameters.
//!
//! Steady-state GA: each generation samples two distinct genomes, evaluates
//! both on validation NRMSE, and overwrites the loser in place with a
//! crossover from the winner followed by mutation. Fitness is cached per
//! exact gene content so unchanged genomes are never re-evaluated.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::readout::{nrmse, predict_sequence, train_readout_rows, FeatureSpec};
use crate::reservoir::{HyperParams, Topology, WeightTemplate};
use crate::tasks::DatasetSplit;

/// A hyperparameter genome: `3 * N_L` genes in `(0, 1]`, laid out as
/// `(IS, SR, alpha)` per sub-reservoir, first sub-reservoir first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    genes: Vec<f64>,
}

impl Genome {
    pub fn new(genes: Vec<f64>) -> Result<Self> {
        if genes.is_empty() || !genes.len().is_multiple_of(3) {
            return Err(Error::InvalidArgument(format!(
                "genome length must be a positive multiple of 3, got {}",
                genes.len()
            )));
        }
        if let Some(bad) = genes.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "genes must lie in (0, 1], got {bad}"
            )));
        }
        Ok(Self { genes })
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    /// Interpret the genome as one `(IS, SR, alpha)` triple per
    /// sub-reservoir.
    pub fn to_hyper_params(&self) -> Result<Vec<HyperParams>> {
        self.genes
            .chunks_exact(3)
            .map(|c| HyperParams::new(c[0], c[1], c[2]))
            .collect()
    }

    /// Exact-bits cache key; any resampled gene changes it.
    fn cache_key(&self) -> Vec<u64> {
        self.genes.iter().map(|g| g.to_bits()).collect()
    }
}

/// GA parameters. The stock settings are 1000 generations, population 15,
/// crossover and mutation rates 0.33 each, one duel per generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub generations: usize,
    pub population_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    #[serde(default = "default_duels")]
    pub duels_per_generation: usize,
    #[serde(default)]
    pub fitness_seed: u64,
    #[serde(default)]
    pub ga_seed: u64,
}

fn default_duels() -> usize {
    1
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 1000,
            population_size: 15,
            crossover_rate: 0.33,
            mutation_rate: 0.33,
            duels_per_generation: 1,
            fitness_seed: 0,
            ga_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::InvalidArgument("generations must be >= 1".into()));
        }
        if self.population_size < 2 {
            return Err(Error::InvalidArgument(
                "population size must be >= 2".into(),
            ));
        }
        if self.duels_per_generation == 0 {
            return Err(Error::InvalidArgument(
                "duels_per_generation must be >= 1".into(),
            ));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {rate}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a GA run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaResult {
    pub best_genome: Genome,
    pub best_nrmse: f64,
    /// Best-ever fitness after each generation; length equals `generations`.
    pub history: Vec<f64>,
    /// Number of fitness evaluations actually performed (cache misses).
    pub evaluations: usize,
}

impl GaResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `generation,best_nrmse` rows.
    pub fn write_history_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "generation,best_nrmse")?;
        for (g, v) in self.history.iter().enumerate() {
            writeln!(w, "{},{}", g + 1, v)?;
        }
        Ok(())
    }
}

/// Draw `n` genomes with every gene uniform over `(0, 1]`.
pub fn random_population(n: usize, genome_len: usize, rng: &mut SeededRng) -> Vec<Genome> {
    (0..n)
        .map(|_| Genome {
            genes: (0..genome_len).map(|_| rng.unit_open_closed()).collect(),
        })
        .collect()
}

/// Gene-wise crossover: each loser gene is replaced by the winner's gene
/// with probability `rate`.
pub fn crossover_into_loser(
    winner: &Genome,
    loser: &Genome,
    rate: f64,
    rng: &mut SeededRng,
) -> Genome {
    debug_assert_eq!(winner.len(), loser.len());
    let genes = loser
        .genes
        .iter()
        .zip(winner.genes.iter())
        .map(|(&l, &w)| if rng.unit() < rate { w } else { l })
        .collect();
    Genome { genes }
}

/// Gene-wise mutation: each gene is resampled uniform over `(0, 1]` with
/// probability `rate`.
pub fn mutate(genome: &Genome, rate: f64, rng: &mut SeededRng) -> Genome {
    let genes = genome
        .genes
        .iter()
        .map(|&g| {
            if rng.unit() < rate {
                rng.unit_open_closed()
            } else {
                g
            }
        })
        .collect();
    Genome { genes }
}

/// What happened in one duel.
#[derive(Debug, Clone, Copy)]
pub struct DuelReport {
    pub winner_index: usize,
    pub loser_index: usize,
    pub winner_fitness: f64,
    pub loser_fitness: f64,
}

/// Run one duel: sample two distinct genomes, evaluate both, and overwrite
/// the loser (higher NRMSE; ties keep the first-sampled genome as winner)
/// with `mutate(crossover_into_loser(winner, loser))`.
///
/// Randomness is consumed in a fixed order — first index, second index,
/// crossover decisions, mutation decisions — so a run replays exactly from
/// its seed.
pub fn duel(
    population: &mut [Genome],
    rng: &mut SeededRng,
    crossover_rate: f64,
    mutation_rate: f64,
    evaluate: &mut dyn FnMut(&Genome) -> f64,
) -> DuelReport {
    let n = population.len();
    assert!(n >= 2, "duel needs a population of at least 2");
    let first = rng.index(n);
    let mut second = rng.index(n - 1);
    if second >= first {
        second += 1;
    }

    let fit_first = sanitize(evaluate(&population[first]));
    let fit_second = sanitize(evaluate(&population[second]));

    // Loser must be strictly worse; the first-sampled genome wins ties.
    let (winner, loser, winner_fit, loser_fit) = if fit_second < fit_first {
        (second, first, fit_second, fit_first)
    } else {
        (first, second, fit_first, fit_second)
    };

    let crossed =
        crossover_into_loser(&population[winner], &population[loser], crossover_rate, rng);
    population[loser] = mutate(&crossed, mutation_rate, rng);

    DuelReport {
        winner_index: winner,
        loser_index: loser,
        winner_fitness: winner_fit,
        loser_fitness: loser_fit,
    }
}

fn sanitize(fitness: f64) -> f64 {
    if fitness.is_nan() {
        f64::INFINITY
    } else {
        fitness
    }
}

/// Generic microbial GA driver over an arbitrary fitness function. Lower is
/// better. Deterministic in `(config, evaluate)`.
pub fn optimize_with(
    config: &GaConfig,
    genome_len: usize,
    mut evaluate: impl FnMut(&Genome) -> f64,
) -> Result<GaResult> {
    config.validate()?;
    if genome_len == 0 || !genome_len.is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "genome length must be a positive multiple of 3, got {genome_len}"
        )));
    }

    let mut rng = SeededRng::new(config.ga_seed);
    let mut population = random_population(config.population_size, genome_len, &mut rng);

    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut evaluations = 0usize;
    let mut best: Option<(Genome, f64)> = None;
    let mut history = Vec::with_capacity(config.generations);

    for _generation in 0..config.generations {
        for _ in 0..config.duels_per_generation {
            let mut cached_eval = |g: &Genome| -> f64 {
                let key = g.cache_key();
                if let Some(&v) = cache.get(&key) {
                    return v;
                }
                let v = sanitize(evaluate(g));
                evaluations += 1;
                cache.insert(key, v);
                v
            };
            let report = duel(
                &mut population,
                &mut rng,
                config.crossover_rate,
                config.mutation_rate,
                &mut cached_eval,
            );
            // The winner slot is untouched by the duel and its fitness is
            // the minimum of the two evaluated this round.
            if best
                .as_ref()
                .is_none_or(|(_, b)| report.winner_fitness < *b)
            {
                best = Some((
                    population[report.winner_index].clone(),
                    report.winner_fitness,
                ));
            }
        }
        history.push(best.as_ref().map_or(f64::INFINITY, |(_, b)| *b));
    }

    let (best_genome, best_nrmse) = best.expect("at least one duel ran");
    Ok(GaResult {
        best_genome,
        best_nrmse,
        history,
        evaluations,
    })
}

/// Fitness of one genome on a task: build the network with the given seed,
/// drive it through the validation segment, train the readout on the train
/// rows and return the validation NRMSE. Build or training failures are
/// mapped to `+inf` so the genome loses its duels.
pub fn evaluate_fitness(
    genome: &Genome,
    topology: &Topology,
    task: &DatasetSplit,
    fitness_seed: u64,
    spec: FeatureSpec,
    lambda: f64,
) -> f64 {
    match WeightTemplate::generate(topology, fitness_seed) {
        Ok(template) => fitness_on_template(genome, &template, task, spec, lambda),
        Err(e) => {
            log::warn!("fitness evaluation failed to build template: {e}");
            f64::INFINITY
        }
    }
}

/// Same as [`evaluate_fitness`] but reusing pre-drawn raw weights.
pub fn fitness_on_template(
    genome: &Genome,
    template: &WeightTemplate,
    task: &DatasetSplit,
    spec: FeatureSpec,
    lambda: f64,
) -> f64 {
    match validation_nrmse(genome, template, task, spec, lambda) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("fitness evaluation failed: {e}");
            f64::INFINITY
        }
    }
}

fn validation_nrmse(
    genome: &Genome,
    template: &WeightTemplate,
    task: &DatasetSplit,
    spec: FeatureSpec,
    lambda: f64,
) -> Result<f64> {
    let hyper = genome.to_hyper_params()?;
    let mut net = template.instantiate(&hyper)?;

    let upto = task.through_validation();
    let inputs = task.input_matrix();
    let targets = task.target_matrix();
    let inputs = inputs.slice(ndarray::s![..upto, ..]);
    let targets = targets.slice(ndarray::s![..upto, ..]);

    let trace = net.run_sequence(inputs, true)?;
    let readout = train_readout_rows(&trace, inputs, targets, task.train_range(), spec, lambda)?;
    let predictions = predict_sequence(&readout, &trace, inputs)?;

    let val = task.validation_range();
    nrmse(
        predictions.slice(ndarray::s![val.clone(), 0]),
        targets.slice(ndarray::s![val, 0]),
    )
}

/// Optimize hyperparameters for a topology on a task. The weight template is
/// drawn once from `config.fitness_seed` and shared across all evaluations,
/// so fitness differences reflect hyperparameters rather than weight-draw
/// luck.
pub fn optimize(
    config: &GaConfig,
    topology: &Topology,
    task: &DatasetSplit,
    spec: FeatureSpec,
    lambda: f64,
) -> Result<GaResult> {
    config.validate()?;
    let template = WeightTemplate::generate(topology, config.fitness_seed)
        .map_err(|e| Error::Build(format!("fitness template: {e}")))?;
    let genome_len = 3 * topology.n_subs();
    optimize_with(config, genome_len, |g| {
        fitness_on_template(g, &template, task, spec, lambda)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_fitness(g: &Genome) -> f64 {
        g.genes().iter().sum()
    }

    #[test]
    fn population_genes_lie_in_range() {
        let mut rng = SeededRng::new(1);
        let pop = random_population(15, 9, &mut rng);
        assert_eq!(pop.len(), 15);
        for g in &pop {
            assert_eq!(g.len(), 9);
            for &v in g.genes() {
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn population_is_deterministic() {
        let mut a = SeededRng::new(3);
        let mut b = SeededRng::new(3);
        assert_eq!(
            random_population(5, 6, &mut a),
            random_population(5, 6, &mut b)
        );
    }

    #[test]
    fn crossover_extremes() {
        let mut rng = SeededRng::new(5);
        let winner = Genome::new(vec![0.9; 6]).unwrap();
        let loser = Genome::new(vec![0.1; 6]).unwrap();
        let unchanged = crossover_into_loser(&winner, &loser, 0.0, &mut rng);
        assert_eq!(unchanged, loser);
        let copied = crossover_into_loser(&winner, &loser, 1.0, &mut rng);
        assert_eq!(copied, winner);
    }

    #[test]
    fn mutation_extremes() {
        let mut rng = SeededRng::new(6);
        let g = Genome::new(vec![0.4; 6]).unwrap();
        let unchanged = mutate(&g, 0.0, &mut rng);
        assert_eq!(unchanged, g);
        let fresh = mutate(&g, 1.0, &mut rng);
        for (&new, &old) in fresh.genes().iter().zip(g.genes()) {
            assert!(new > 0.0 && new <= 1.0);
            assert_ne!(new, old);
        }
    }

    #[test]
    fn crossover_replacement_count_matches_binomial_mean() {
        let mut rng = SeededRng::new(7);
        let winner = Genome::new(vec![1.0; 9]).unwrap();
        let loser = Genome::new(vec![0.5; 9]).unwrap();
        let trials = 10_000;
        let mut replaced = 0usize;
        for _ in 0..trials {
            let child = crossover_into_loser(&winner, &loser, 0.33, &mut rng);
            replaced += child.genes().iter().filter(|&&g| g == 1.0).count();
        }
        let mean = replaced as f64 / trials as f64;
        assert!((mean - 2.97).abs() < 0.1, "mean replaced = {mean}");
    }

    #[test]
    fn mutation_count_matches_binomial_mean() {
        let mut rng = SeededRng::new(8);
        let g = Genome::new(vec![0.5; 9]).unwrap();
        let trials = 10_000;
        let mut mutated = 0usize;
        for _ in 0..trials {
            let child = mutate(&g, 0.33, &mut rng);
            mutated += child.genes().iter().filter(|&&v| v != 0.5).count();
        }
        let mean = mutated as f64 / trials as f64;
        assert!((mean - 2.97).abs() < 0.1, "mean mutated = {mean}");
    }

    #[test]
    fn duel_overwrites_only_the_loser() {
        let mut rng = SeededRng::new(9);
        let mut pop = vec![
            Genome::new(vec![0.2, 0.2, 0.2]).unwrap(),
            Genome::new(vec![0.8, 0.8, 0.8]).unwrap(),
        ];
        let report = duel(&mut pop, &mut rng, 0.33, 0.33, &mut sum_fitness);
        // Lower sum wins.
        assert_eq!(report.winner_index, 0);
        assert_eq!(report.loser_index, 1);
        assert_eq!(pop[0].genes(), &[0.2, 0.2, 0.2]);
    }

    #[test]
    fn duel_with_full_crossover_copies_winner() {
        let mut rng = SeededRng::new(10);
        let mut pop = vec![
            Genome::new(vec![0.3, 0.4, 0.5]).unwrap(),
            Genome::new(vec![0.9, 0.9, 0.9]).unwrap(),
        ];
        duel(&mut pop, &mut rng, 1.0, 0.0, &mut sum_fitness);
        assert_eq!(pop[1].genes(), &[0.3, 0.4, 0.5]);
    }

    #[test]
    fn optimize_single_generation_evaluates_twice() {
        let config = GaConfig {
            generations: 1,
            population_size: 4,
            ga_seed: 11,
            ..GaConfig::default()
        };
        let result = optimize_with(&config, 3, sum_fitness).unwrap();
        assert_eq!(result.evaluations, 2);
        assert_eq!(result.history.len(), 1);
    }

    #[test]
    fn zero_generations_is_rejected() {
        let config = GaConfig {
            generations: 0,
            ..GaConfig::default()
        };
        assert!(optimize_with(&config, 3, sum_fitness).is_err());
    }

    #[test]
    fn best_ever_history_is_monotone() {
        let config = GaConfig {
            generations: 200,
            population_size: 8,
            ga_seed: 12,
            ..GaConfig::default()
        };
        let result = optimize_with(&config, 6, sum_fitness).unwrap();
        assert_eq!(result.history.len(), 200);
        for w in result.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(result.best_nrmse, *result.history.last().unwrap());
    }

    #[test]
    fn genes_stay_in_range_under_evolution() {
        let config = GaConfig {
            generations: 500,
            population_size: 6,
            ga_seed: 13,
            ..GaConfig::default()
        };
        // Track gene ranges through the fitness callback.
        let result = optimize_with(&config, 9, |g| {
            for &v in g.genes() {
                assert!(v > 0.0 && v <= 1.0);
            }
            sum_fitness(g)
        })
        .unwrap();
        for &v in result.best_genome.genes() {
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn optimize_is_deterministic() {
        let config = GaConfig {
            generations: 100,
            population_size: 6,
            ga_seed: 14,
            ..GaConfig::default()
        };
        let a = optimize_with(&config, 6, sum_fitness).unwrap();
        let b = optimize_with(&config, 6, sum_fitness).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn selection_pressure_converges_population() {
        // With crossover 1 and mutation 0 the population collapses to
        // copies of a single genome.
        let config = GaConfig {
            generations: 80, // population 8 -> at most 8 * 10 duels
            population_size: 8,
            crossover_rate: 1.0,
            mutation_rate: 0.0,
            ga_seed: 15,
            ..GaConfig::default()
        };
        let mut rng = SeededRng::new(config.ga_seed);
        let mut pop = random_population(config.population_size, 6, &mut rng);
        for _ in 0..config.generations {
            duel(&mut pop, &mut rng, 1.0, 0.0, &mut sum_fitness);
        }
        let first = pop[0].clone();
        assert!(
            pop.iter().all(|g| *g == first),
            "population did not converge"
        );
    }

    #[test]
    fn failed_evaluation_becomes_infinite_fitness() {
        use crate::tasks::{gen_mso12, split_dataset, SplitLengths};

        let series = gen_mso12(400);
        let split =
            split_dataset(&series, &series, SplitLengths::new(20, 200, 50, 100), 1).unwrap();
        let hp = crate::reservoir::HyperParams::new(0.5, 0.5, 0.5).unwrap();
        let topo = crate::reservoir::Topology::shallow(10, 1, hp).unwrap();
        // Genome sized for two sub-reservoirs cannot drive a shallow net.
        let mismatched = Genome::new(vec![0.5; 6]).unwrap();
        let fit = evaluate_fitness(
            &mismatched,
            &topo,
            &split,
            1,
            crate::readout::FeatureSpec::default(),
            1e-8,
        );
        assert!(fit.is_infinite());

        let ok = Genome::new(vec![0.5; 3]).unwrap();
        let fit = evaluate_fitness(
            &ok,
            &topo,
            &split,
            1,
            crate::readout::FeatureSpec::default(),
            1e-8,
        );
        assert!(fit.is_finite() && fit > 0.0);
    }

    #[test]
    fn cache_avoids_reevaluating_unchanged_genomes() {
        let config = GaConfig {
            generations: 50,
            population_size: 4,
            crossover_rate: 0.0,
            mutation_rate: 0.0, // genomes never change
            ga_seed: 16,
            ..GaConfig::default()
        };
        let result = optimize_with(&config, 3, sum_fitness).unwrap();
        assert!(
            result.evaluations <= 4,
            "evaluations = {}",
            result.evaluations
        );
    }
}
