#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdlab/env.hpp"
#include "qdlab/qdt/model.hpp"

namespace qdlab::qdt {

struct GoalEvalResult {
    BehaviorDescriptor goal;
    double mean_distance = 0.0;
    double mean_fitness = 0.0;
    double achieved_spread = 0.0;  // mean pairwise distance of achieved BDs
    int n_episodes = 0;
    std::vector<BehaviorDescriptor> achieved_bds;
};

// Autoregressive behavior-conditioned rollout: at each step the model sees
// the goal, all observations so far and all previously generated actions,
// and the action is read at the current observation-token position.
GoalEvalResult evaluate_goal(const QdtModel& model, const EnvSpec& env,
                             const BehaviorDescriptor& target_bd, int n_episodes,
                             std::uint64_t seed);

struct GridEvalResult {
    std::vector<GoalEvalResult> per_goal;
    double overall_mean_distance = 0.0;
    double max_mean_fitness = 0.0;  // max over goals of per-goal mean fitness
};

GridEvalResult evaluate_grid(const QdtModel& model, const EnvSpec& env, const Centroids& goals,
                             int n_episodes, std::uint64_t seed);

// goal_x,goal_y,mean_distance,mean_fitness,spread,n_episodes
std::string grid_eval_csv(const GridEvalResult& r);

}  // namespace qdlab::qdt
