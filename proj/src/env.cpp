#include "qdlab/env.hpp"

#include <cmath>
#include <stdexcept>

#include "qdlab/rng.hpp"

namespace qdlab {

namespace {

constexpr double kVelClamp = 2.0;

bool is_point_omni(const EnvSpec& s) { return s.name == "point-omni"; }

double wrap01(double x) { return x - std::floor(x); }

// Forward speed of the duty-cycle walker: rewards anti-phase actuation.
double forward_speed(const std::vector<double>& a) {
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    double mean_abs = (std::abs(a[0]) + std::abs(a[1])) / 2.0;
    return 0.5 * std::abs(sgn(a[0]) - sgn(a[1])) * mean_abs;
}

}  // namespace

EnvSpec make_env(const std::string& name, int episode_len) {
    double sigma = name == "point-omni" ? 0.3 : 0.05;
    return make_env(name, episode_len, sigma);
}

EnvSpec make_env(const std::string& name, int episode_len, double init_noise_sigma) {
    EnvSpec spec;
    spec.name = name;
    spec.episode_len = episode_len;
    spec.init_noise_sigma = init_noise_sigma;
    spec.obs_dim = 4;
    spec.act_dim = 2;
    if (name == "point-omni") {
        spec.bd_space = BdSpace({-15.0, -15.0}, {15.0, 15.0});
    } else if (name == "dutycycle-uni") {
        spec.bd_space = BdSpace({0.0, 0.0}, {1.0, 1.0});
    } else {
        throw std::invalid_argument("unknown environment: " + name);
    }
    return spec;
}

State reset(const EnvSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    if (is_point_omni(spec)) {
        // (x, y, vx, vy); noise on positions only
        State s(4, 0.0);
        s[0] = rng.normal(0.0, spec.init_noise_sigma);
        s[1] = rng.normal(0.0, spec.init_noise_sigma);
        return s;
    }
    // (x, v, phase1, phase2); nominal phases anti-phase, jitter on phases
    State s{0.0, 0.0, 0.0, 0.0};
    s[2] = wrap01(0.25 + rng.normal(0.0, spec.init_noise_sigma));
    s[3] = wrap01(0.75 + rng.normal(0.0, spec.init_noise_sigma));
    return s;
}

State step(const EnvSpec& spec, const State& s, const std::vector<double>& action,
           double& reward_out) {
    if (static_cast<int>(action.size()) != spec.act_dim)
        throw std::invalid_argument("env step: action dimension mismatch");
    const double dt = spec.dt;
    State n = s;
    if (is_point_omni(spec)) {
        n[2] = std::clamp(s[2] + action[0] * dt, -kVelClamp, kVelClamp);
        n[3] = std::clamp(s[3] + action[1] * dt, -kVelClamp, kVelClamp);
        n[0] = s[0] + n[2] * dt;
        n[1] = s[1] + n[3] * dt;
        reward_out = -std::sqrt(action[0] * action[0] + action[1] * action[1]);
        return n;
    }
    double v = std::clamp(forward_speed(action), -kVelClamp, kVelClamp);
    n[1] = v;
    n[0] = s[0] + v * dt;
    n[2] = wrap01(s[2] + dt * (0.5 + 0.5 * action[0]));
    n[3] = wrap01(s[3] + dt * (0.5 + 0.5 * action[1]));
    reward_out = v - std::sqrt(action[0] * action[0] + action[1] * action[1]);
    return n;
}

BehaviorDescriptor extract_bd(const EnvSpec& spec, const Trajectory& traj,
                              const State& final_state) {
    if (is_point_omni(spec)) return {final_state[0], final_state[1]};
    const int T = spec.episode_len;
    double c1 = 0.0, c2 = 0.0;
    for (int t = 0; t < T; ++t) {
        if (traj.actions[static_cast<std::size_t>(t) * spec.act_dim + 0] > 0.0) c1 += 1.0;
        if (traj.actions[static_cast<std::size_t>(t) * spec.act_dim + 1] > 0.0) c2 += 1.0;
    }
    return {c1 / T, c2 / T};
}

Trajectory rollout(const EnvSpec& spec, const Genotype& policy, std::uint64_t seed) {
    if (policy.arch.obs_dim != spec.obs_dim || policy.arch.act_dim != spec.act_dim)
        throw std::invalid_argument("rollout: policy dimensions do not match environment");
    return rollout_with(spec, [&](const State& s, int) { return forward(policy, s); }, seed);
}

}  // namespace qdlab
