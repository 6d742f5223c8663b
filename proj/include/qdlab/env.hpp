#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "qdlab/geometry.hpp"
#include "qdlab/policy.hpp"

namespace qdlab {

/// Deterministic episodic environments. The only stochasticity is the
/// Gaussian perturbation of the initial state; two rollouts with the same
/// (policy, seed) are bit-identical.
struct EnvSpec {
    std::string name;
    int obs_dim = 0;
    int act_dim = 0;
    int episode_len = 100;
    double init_noise_sigma = 0.0;
    BdSpace bd_space;
    double dt = 0.05;
};

// "point-omni": (x, y, vx, vy) double integrator, 2-D acceleration actions,
//   reward_t = -|a_t|, bd = final (x, y), bd_space [-15, 15]^2.
// "dutycycle-uni": (x, v, phase1, phase2); two contact indicators
//   c_i = 1 iff action channel i > 0; reward_t = forward velocity - |a_t|;
//   bd = per-channel contact duty cycle, bd_space [0, 1]^2.
EnvSpec make_env(const std::string& name, int episode_len = 100);
EnvSpec make_env(const std::string& name, int episode_len, double init_noise_sigma);

using State = std::vector<double>;

struct Trajectory {
    std::vector<double> observations;  // row-major [T x obs_dim]
    std::vector<double> actions;       // row-major [T x act_dim]
    std::vector<double> rewards;       // [T]
    double fitness = 0.0;              // sum of rewards
    BehaviorDescriptor bd;
    std::uint64_t seed = 0;
};

State reset(const EnvSpec& spec, std::uint64_t seed);

State step(const EnvSpec& spec, const State& s, const std::vector<double>& action,
           double& reward_out);

// Extraction of the behavior descriptor from stored trajectory arrays.
BehaviorDescriptor extract_bd(const EnvSpec& spec, const Trajectory& traj, const State& final_state);

Trajectory rollout(const EnvSpec& spec, const Genotype& policy, std::uint64_t seed);

// Rollout driven by an arbitrary controller (used by the transformer at
// evaluation time).
template <typename ActFn>
Trajectory rollout_with(const EnvSpec& spec, ActFn&& act, std::uint64_t seed) {
    Trajectory traj;
    traj.seed = seed;
    const int T = spec.episode_len;
    traj.observations.reserve(static_cast<std::size_t>(T) * spec.obs_dim);
    traj.actions.reserve(static_cast<std::size_t>(T) * spec.act_dim);
    traj.rewards.reserve(T);
    State s = reset(spec, seed);
    for (int t = 0; t < T; ++t) {
        traj.observations.insert(traj.observations.end(), s.begin(), s.end());
        std::vector<double> a = act(s, t);
        for (auto& ai : a) ai = std::clamp(ai, -1.0, 1.0);
        traj.actions.insert(traj.actions.end(), a.begin(), a.end());
        double r = 0.0;
        s = step(spec, s, a, r);
        traj.rewards.push_back(r);
        traj.fitness += r;
    }
    traj.bd = extract_bd(spec, traj, s);
    return traj;
}

}  // namespace qdlab
