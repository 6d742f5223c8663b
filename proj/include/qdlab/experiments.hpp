#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qdlab/dataset.hpp"
#include "qdlab/evolution.hpp"
#include "qdlab/qdt/evaluator.hpp"
#include "qdlab/qdt/model.hpp"
#include "qdlab/qdt/trainer.hpp"

namespace qdlab {

struct ExperimentConfig {
    std::string env = "point-omni";
    std::string run_dir = "runs/experiment";
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int n_goals = 64;              // CVT goal count for evaluate_grid
    int n_episodes_per_goal = 10;
    int eval_goal_subsample = 16;  // cheaper intermediate-eval goal count
    int eval_episodes = 3;         // episodes per goal during training evals

    EvolutionConfig evolution;     // variant/seed overridden per arm
    int dataset_size = 1024;
    int n_zones = 64;
    int n_probe_eps = 5;

    qdt::QdtConfig qdt;
    int epochs = 24;
    int eval_every = 4;

    void validate() const;
};

// Evaluation goals: CVT centroids over the environment's BD space.
Centroids build_goal_set(const EnvSpec& env, int n_goals, std::uint64_t seed);

// One trained model plus its training curve and final full grid evaluation.
struct TrainedQdt {
    qdt::QdtModel model;
    std::vector<qdt::TrainCurvePoint> curve;
    qdt::GridEvalResult final_eval;
};

// Full stage-3 pipeline on an existing dataset: train with periodic cheap
// evals (subsampled goals), keep the best-eval weights, then run the full
// grid evaluation.
TrainedQdt train_and_eval_qdt(const TrajectoryDataset& ds, const EnvSpec& env,
                              const Centroids& goals, const ExperimentConfig& cfg,
                              std::uint64_t seed);

// Stage-2 pipeline: zone selection + dataset generation from a repertoire.
TrajectoryDataset make_dataset(const Repertoire& rep, const EnvSpec& env,
                               const ExperimentConfig& cfg, std::uint64_t seed);

// ---- experiment reports -------------------------------------------------

struct MethodAccuracy {
    std::string method;
    std::vector<double> per_seed_distance;  // overall mean distance per seed
    std::vector<double> per_seed_spread;    // mean achieved spread per seed
    double mean_distance = 0.0;
    double std_distance = 0.0;
    double mean_spread = 0.0;
    double std_spread = 0.0;
};

struct AccuracyReport {
    std::vector<MethodAccuracy> methods;
    const MethodAccuracy& method(const std::string& name) const;
};

// Methods: ME, ME-LS, ME-Sampling (nearest stored elite to each goal) and
// QDT(ME), QDT(ME-LS), QDT(Naive) (condition on the goal directly).
AccuracyReport run_accuracy(const ExperimentConfig& cfg);

struct GeneralizationArm {
    std::string name;  // full | density_0.5 | density_0.3 | density_0.1 | tiles | upper_part
    std::size_t dataset_size = 0;
    double overall_mean_distance = 0.0;
    // Populated for the upper_part arm and the full baseline: mean distance
    // restricted to goals inside / outside the removed region.
    double removed_region_distance = 0.0;
    double retained_region_distance = 0.0;
};

struct GeneralizationReport {
    std::vector<GeneralizationArm> arms;
    const GeneralizationArm& arm(const std::string& name) const;
};

GeneralizationReport run_generalization(const ExperimentConfig& cfg);

struct ReassessmentRow {
    std::string method;
    std::uint64_t seed = 0;
    ReassessResult::Summary initial, recalculated;
};

struct ReassessmentReport {
    std::vector<ReassessmentRow> rows;
};

ReassessmentReport run_reassessment(const ExperimentConfig& cfg);

struct TrainingCurve {
    std::string variant;  // me | me-ls | naive
    std::vector<int> epochs;
    std::vector<double> mean_distance;  // mean over seeds at each eval phase
    std::vector<double> std_distance;
    double final_mean_distance = 0.0;
};

struct TrainingCurvesReport {
    std::vector<TrainingCurve> curves;
    const TrainingCurve& curve(const std::string& variant) const;
};

TrainingCurvesReport run_training_curves(const ExperimentConfig& cfg);

struct FitnessEvalReport {
    std::vector<int> epochs;
    std::vector<double> max_fitness;  // max over goals of per-goal mean fitness
    double repertoire_recalc_max_fitness = 0.0;
    double final_max_fitness = 0.0;
};

FitnessEvalReport run_fitness_eval(const ExperimentConfig& cfg);

// Dispatch by name: accuracy | generalization | reassessment |
// training-curves | fitness-eval. Throws on unknown names.
void run_experiment(const std::string& name, const ExperimentConfig& cfg);

}  // namespace qdlab
