#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdlab/env.hpp"
#include "qdlab/repertoire.hpp"

namespace qdlab {

struct EvalResult {
    double fitness = 0.0;             // mean over episodes
    BehaviorDescriptor bd;            // modal-cell representative
    std::optional<double> spread;     // present iff E >= 2
    std::vector<BehaviorDescriptor> episode_bds;
    std::vector<Trajectory> trajectories;
};

// Runs E rollouts with seeds base_seed .. base_seed+E-1.
// fitness = mean episode fitness. bd = component-wise mean of the episode
// BDs landing in the most frequent cell (ties to lowest cell index).
EvalResult evaluate_solution(const Genotype& g, const EnvSpec& env, const Centroids& centroids,
                             int episodes, std::uint64_t base_seed);

struct QdMetricsRow {
    long long env_interactions = 0;
    double coverage = 0.0;
    double max_fitness = 0.0;
    double qd_score = 0.0;
};

struct QdMetrics {
    std::vector<QdMetricsRow> rows;
};

void save_metrics_csv(const QdMetrics& m, const std::string& path);

struct EvolutionConfig {
    std::string env = "point-omni";
    std::string variant = "me-ls";  // me | me-ls | me-sampling
    int episode_len = 100;
    double init_noise_sigma = -1.0;  // <0: environment default
    int n_cells = 256;
    int batch_size = 64;
    int total_iterations = 300;
    int init_solutions = 128;       // G
    int episodes_per_eval = 10;     // E; forced to 1 for plain ME
    std::vector<int> hidden = {32, 32};
    double iso_sigma = 0.005;
    double line_sigma = 0.05;
    double fitness_offset = 150.0;
    std::uint64_t seed = 0;
    std::uint64_t cvt_seed = 42;

    void validate() const;
    int effective_episodes() const { return variant == "me" ? 1 : episodes_per_eval; }
};

struct EvolutionResult {
    Repertoire repertoire;
    QdMetrics metrics;
};

EvolutionResult run_evolution(const EvolutionConfig& config);
EvolutionResult run_evolution(const EvolutionConfig& config, const Centroids& centroids);

struct ReassessResult {
    Repertoire repertoire;  // rebuilt from recalculated (fitness, BD)
    // rows: {initial, recalculated}
    struct Summary {
        double coverage = 0.0;
        double max_fitness = 0.0;
        double qd_score = 0.0;
    } initial, recalculated;
};

// Re-evaluates every stored elite over E fresh episodes and rebuilds a
// fresh repertoire via the plain fitness criterion.
ReassessResult reassess(const Repertoire& rep, const EnvSpec& env, int episodes,
                        std::uint64_t seed, double fitness_offset);

// Mean post-hoc spread of the repertoire's elites, each measured over
// `episodes` fresh rollouts.
double mean_elite_spread(const Repertoire& rep, const EnvSpec& env, int episodes,
                         std::uint64_t seed);

}  // namespace qdlab
