#include "qdlab/qdt/evaluator.hpp"

#include <sstream>

#include "qdlab/geometry.hpp"
#include "qdlab/rng.hpp"

namespace qdlab::qdt {

GoalEvalResult evaluate_goal(const QdtModel& model, const EnvSpec& env,
                             const BehaviorDescriptor& target_bd, int n_episodes,
                             std::uint64_t seed) {
    GoalEvalResult res;
    res.goal = target_bd;
    res.n_episodes = n_episodes;
    std::vector<float> goal_f(target_bd.begin(), target_bd.end());

    nn::NoGradGuard no_grad;
    QdtDecoder decoder(model, goal_f);
    double dist_sum = 0.0, fit_sum = 0.0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        decoder.reset();
        std::vector<float> obs_f(env.obs_dim), prev_act(env.act_dim, 0.0f);
        auto act_fn = [&](const State& s, int t) {
            for (int i = 0; i < env.obs_dim; ++i) obs_f[i] = static_cast<float>(s[i]);
            std::vector<float> pred = decoder.step(obs_f.data(), t > 0 ? prev_act.data() : nullptr);
            std::vector<double> a(env.act_dim);
            for (int i = 0; i < env.act_dim; ++i) {
                a[i] = std::clamp(static_cast<double>(pred[i]), -1.0, 1.0);
                prev_act[i] = static_cast<float>(a[i]);
            }
            return a;
        };
        Trajectory traj = rollout_with(env, act_fn, seed + static_cast<std::uint64_t>(ep));
        res.achieved_bds.push_back(traj.bd);
        dist_sum += euclidean(traj.bd, target_bd);
        fit_sum += traj.fitness;
    }
    res.mean_distance = dist_sum / n_episodes;
    res.mean_fitness = fit_sum / n_episodes;
    res.achieved_spread = n_episodes >= 2 ? spread(res.achieved_bds) : 0.0;
    return res;
}

GridEvalResult evaluate_grid(const QdtModel& model, const EnvSpec& env, const Centroids& goals,
                             int n_episodes, std::uint64_t seed) {
    GridEvalResult res;
    res.per_goal.resize(goals.n_cells);
    for (int g = 0; g < goals.n_cells; ++g) {
        BehaviorDescriptor goal(goals.cell(g), goals.cell(g) + goals.dim);
        res.per_goal[g] = evaluate_goal(model, env, goal, n_episodes,
                                        mix_seed(seed, static_cast<std::uint64_t>(g)));
    }
    double dist_sum = 0.0;
    double max_fit = -1e300;
    for (const auto& pg : res.per_goal) {
        dist_sum += pg.mean_distance;
        max_fit = std::max(max_fit, pg.mean_fitness);
    }
    res.overall_mean_distance = dist_sum / goals.n_cells;
    res.max_mean_fitness = max_fit;
    return res;
}

std::string grid_eval_csv(const GridEvalResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << "goal_x,goal_y,mean_distance,mean_fitness,spread,n_episodes\n";
    for (const auto& pg : r.per_goal) {
        out << pg.goal[0] << ',' << (pg.goal.size() > 1 ? pg.goal[1] : 0.0) << ','
            << pg.mean_distance << ',' << pg.mean_fitness << ',' << pg.achieved_spread << ','
            << pg.n_episodes << '\n';
    }
    return out.str();
}

}  // namespace qdlab::qdt
