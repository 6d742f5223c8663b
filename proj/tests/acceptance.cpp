// Acceptance suite: one binary, eleven sequential criteria, shared
// artifacts. Exact-oracle checks run first; the stochastic pipeline checks
// reuse the evolution/dataset/training artifacts so the whole suite fits a
// desk-scale budget. Each criterion prints one PASS/FAIL line with the
// measured quantities; the exit code is the number of failed criteria.
//
// Usage: acceptance [criterion ...]   (default: all of 1..11)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "acceptance_thresholds.hpp"
#include "qdlab/dataset.hpp"
#include "qdlab/evolution.hpp"
#include "qdlab/experiments.hpp"
#include "qdlab/geometry.hpp"
#include "qdlab/manifest.hpp"
#include "qdlab/nn/optim.hpp"
#include "qdlab/qdt/evaluator.hpp"
#include "qdlab/qdt/model.hpp"
#include "qdlab/qdt/trainer.hpp"
#include "qdlab/rng.hpp"

namespace fs = std::filesystem;
using namespace qdlab;
using nn::Tensor;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

int g_failures = 0;

void report(int criterion, const std::string& what, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", pass ? "PASS" : "FAIL", criterion,
                what.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string fmt_per_seed(const std::vector<double>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "}";
}

// Desk-scale experiment settings shared by criteria 3, 4, 8 and 9.
ExperimentConfig desk_config(const std::string& variant) {
    ExperimentConfig cfg;
    cfg.env = "point-omni";
    cfg.evolution.variant = variant;
    cfg.evolution.n_cells = accept::kEvolutionCells;
    cfg.evolution.batch_size = accept::kEvolutionBatch;
    cfg.evolution.total_iterations = accept::kEvolutionIterations;
    cfg.evolution.episodes_per_eval = accept::kEpisodesPerEval;
    cfg.evolution.iso_sigma = accept::kIsoSigma;
    cfg.evolution.line_sigma = accept::kLineSigma;
    cfg.evolution.init_noise_sigma = accept::kInitNoiseSigma;
    cfg.dataset_size = accept::kDatasetSize;
    cfg.epochs = accept::kTrainEpochs;
    cfg.eval_every = 4;
    cfg.n_goals = accept::kEvalGoals;
    cfg.n_episodes_per_goal = accept::kEvalEpisodesPerGoal;
    return cfg;
}

// Criteria 8 and 9 use longer evolution, heavier dataset/evaluation reset
// noise, and a compact model (see the thresholds header for why).
ExperimentConfig qdt_config(const std::string& variant) {
    ExperimentConfig cfg = desk_config(variant);
    cfg.evolution.total_iterations = accept::kQdtEvolutionIterations;
    cfg.qdt.n_layers = accept::kQdtLayers;
    cfg.qdt.n_heads = accept::kQdtHeads;
    cfg.qdt.emb_dim = accept::kQdtEmbDim;
    cfg.eval_goal_subsample = accept::kEvalSubsampleGoals;
    cfg.eval_episodes = accept::kEvalSubsampleEpisodes;
    return cfg;
}

// Shared artifacts, built lazily so a criterion subset only pays for what
// it uses.
struct Context {
    std::map<std::pair<std::string, std::uint64_t>, Repertoire> repertoires;
    std::map<std::pair<std::string, std::uint64_t>, qdt::GridEvalResult> qdt_evals;
    std::optional<TrajectoryDataset> mels_dataset_seed1;
    std::optional<qdt::GridEvalResult> full_eval_seed1;

    const Repertoire& repertoire(const std::string& variant, std::uint64_t seed) {
        auto key = std::make_pair(variant, seed);
        auto it = repertoires.find(key);
        if (it == repertoires.end()) {
            ExperimentConfig cfg = desk_config(variant);
            EvolutionConfig ec = cfg.evolution;
            ec.env = cfg.env;
            ec.seed = seed;
            it = repertoires.emplace(key, run_evolution(ec).repertoire).first;
        }
        return it->second;
    }

    // Distill + train + full grid eval for one (variant, seed) arm.
    const qdt::GridEvalResult& qdt_eval(const std::string& variant, std::uint64_t seed) {
        auto key = std::make_pair(variant, seed);
        auto it = qdt_evals.find(key);
        if (it == qdt_evals.end()) {
            ExperimentConfig cfg = qdt_config(variant);
            const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len, accept::kQdtDatasetNoiseSigma);
            EvolutionConfig ec = cfg.evolution;
            ec.env = cfg.env;
            ec.seed = seed;
            const Repertoire rep = run_evolution(ec).repertoire;
            TrajectoryDataset ds = make_dataset(rep, env, cfg, seed);
            if (variant == "me-ls" && seed == 1) mels_dataset_seed1 = ds;
            const Centroids goals = build_goal_set(env, cfg.n_goals, seed);
            TrainedQdt trained = train_and_eval_qdt(ds, env, goals, cfg, seed);
            it = qdt_evals.emplace(key, std::move(trained.final_eval)).first;
            if (variant == "me-ls" && seed == 1) full_eval_seed1 = it->second;
        }
        return it->second;
    }
};

// ---- criterion 1 ----------------------------------------------------------

void criterion_1() {
    Timer t;
    bool ok = true;
    double worst = 0.0;
    Rng rng(hash_tag("accept-spread"));
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(63));
        const int dim = 1 + static_cast<int>(rng.below(4));
        std::vector<BehaviorDescriptor> bds(k, BehaviorDescriptor(dim));
        for (auto& bd : bds)
            for (auto& x : bd) x = rng.uniform(-100.0, 100.0);
        double acc = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) acc += euclidean(bds[i], bds[j]);
        const double brute = acc / (k * (k - 1) / 2.0);
        const double diff = std::abs(spread(bds) - brute);
        worst = std::max(worst, diff);
        if (diff >= 1e-12) ok = false;
    }
    ok = ok && spread({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}) == 0.0;
    ok = ok && spread({{0.0, 0.0}, {3.0, 4.0}}) == 5.0;
    ok = ok && std::abs(spread({{0.0, 0.0}, {3.0, 4.0}, {0.0, 0.0}}) - 10.0 / 3.0) < 1e-15;
    report(1, "spread oracle", ok, "1000 random inputs, worst |diff| = " + fmt(worst), t.seconds());
}

// ---- criterion 2 ----------------------------------------------------------

void criterion_2() {
    Timer t;
    bool ok = true;
    Centroids c;
    c.dim = 1;
    c.n_cells = 1;
    c.points = {0.0};
    auto fresh = [&](double f, std::optional<double> s) {
        Repertoire rep;
        rep.centroids = c;
        CellRecord incumbent;
        incumbent.fitness = f;
        incumbent.bd = {0.0};
        incumbent.spread = s;
        rep.cells[0] = incumbent;
        return rep;
    };
    auto cand = [](double f, std::optional<double> s) {
        CellRecord r;
        r.fitness = f;
        r.bd = {0.0};
        r.spread = s;
        return r;
    };

    // empty cell: all three insert unconditionally
    for (auto insert : {me_insert, me_ls_insert, me_sampling_insert}) {
        Repertoire rep;
        rep.centroids = c;
        ok = ok && insert(rep, cand(-5.0, 1.0)) && rep.cells.count(0) == 1;
    }
    // me / me-sampling: strictly-higher fitness only
    const double deltas[] = {1.0, 0.0, -1.0};
    for (auto insert : {me_insert, me_sampling_insert}) {
        for (double df : deltas) {
            Repertoire rep = fresh(0.0, std::nullopt);
            const bool accepted = insert(rep, cand(df, std::nullopt));
            ok = ok && accepted == (df > 0.0);
            ok = ok && rep.cells.at(0).fitness == (accepted ? df : 0.0);
        }
    }
    // me-ls: full 3x3 truth table, accept iff higher fitness AND lower spread
    for (double df : deltas) {
        for (double ds : deltas) {
            Repertoire rep = fresh(0.0, 1.0);
            const bool accepted = me_ls_insert(rep, cand(df, 1.0 + ds));
            ok = ok && accepted == (df > 0.0 && ds < 0.0);
        }
    }
    // me-ls rejects spread-less candidates outright
    {
        Repertoire rep = fresh(0.0, 1.0);
        bool threw = false;
        try {
            me_ls_insert(rep, cand(5.0, std::nullopt));
        } catch (const std::invalid_argument&) {
            threw = true;
        }
        ok = ok && threw;
    }
    report(2, "insertion semantics", ok, "me / me-ls / me-sampling truth tables", t.seconds());
}

// ---- criterion 3 ----------------------------------------------------------

void criterion_3(Context& ctx) {
    Timer t;
    const EnvSpec env = make_env("point-omni", 100, accept::kInitNoiseSigma);
    std::vector<double> me_spread, mels_spread, reductions;
    bool lower_every_seed = true;
    for (std::uint64_t seed : accept::kSeeds) {
        const std::uint64_t probe = mix_seed(seed, hash_tag("accept-posthoc"));
        const double s_me = mean_elite_spread(ctx.repertoire("me", seed), env, 10, probe);
        const double s_ls = mean_elite_spread(ctx.repertoire("me-ls", seed), env, 10, probe);
        me_spread.push_back(s_me);
        mels_spread.push_back(s_ls);
        reductions.push_back(1.0 - s_ls / s_me);
        if (!(s_ls < s_me)) lower_every_seed = false;
    }
    std::sort(reductions.begin(), reductions.end());
    const double median_reduction = reductions[reductions.size() / 2];
    const bool ok = lower_every_seed && median_reduction >= accept::kSpreadMedianReductionMin;
    report(3, "ME-LS lowers post-hoc elite spread", ok,
           "ME " + fmt_per_seed(me_spread) + " vs ME-LS " + fmt_per_seed(mels_spread) +
               ", median reduction " + fmt(100.0 * median_reduction) + "% (need >= " +
               fmt(100.0 * accept::kSpreadMedianReductionMin) + "%)",
           t.seconds());
}

// ---- criterion 4 ----------------------------------------------------------

void criterion_4(Context& ctx) {
    Timer t;
    const EnvSpec env = make_env("point-omni", 100, accept::kInitNoiseSigma);
    std::vector<double> me_drop;
    int mels_wins = 0;
    std::vector<double> me_recalc, mels_recalc;
    for (std::uint64_t seed : accept::kSeeds) {
        const std::uint64_t rs = mix_seed(seed, hash_tag("accept-reassess"));
        auto rr_me = reassess(ctx.repertoire("me", seed), env, 10, rs, 150.0);
        auto rr_ls = reassess(ctx.repertoire("me-ls", seed), env, 10, rs, 150.0);
        me_drop.push_back(100.0 * (rr_me.initial.coverage - rr_me.recalculated.coverage));
        me_recalc.push_back(rr_me.recalculated.coverage);
        mels_recalc.push_back(rr_ls.recalculated.coverage);
        if (rr_ls.recalculated.coverage > rr_me.recalculated.coverage) ++mels_wins;
    }
    const bool drop_ok =
        std::all_of(me_drop.begin(), me_drop.end(),
                    [](double d) { return d >= 100.0 * accept::kMeCoverageDropMinPp; });
    const bool ok = drop_ok && mels_wins >= accept::kMeLsBeatsMeMinSeeds;
    report(4, "reassessment coverage direction", ok,
           "ME coverage drop " + fmt_per_seed(me_drop) + " pp (need >= " +
               fmt(100.0 * accept::kMeCoverageDropMinPp) + " pp); ME-LS recalc " +
               fmt_per_seed(mels_recalc) + " > ME recalc " + fmt_per_seed(me_recalc) + " in " +
               std::to_string(mels_wins) + "/3 seeds",
           t.seconds());
}

// ---- criterion 5 ----------------------------------------------------------

Tensor small_rand(std::vector<int> shape, Rng& rng, bool requires_grad = true) {
    std::size_t n = 1;
    for (int d : shape) n *= d;
    std::vector<float> data(n);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    return Tensor::from(std::move(data), std::move(shape), requires_grad);
}

// Central finite differences at h = kGradH on kGradCoordsPerOp random
// coordinates spread across the inputs; returns the worst relative error.
double fd_check(const std::vector<Tensor>& inputs, const std::function<Tensor()>& loss_fn,
                Rng& rng, double denom_floor) {
    for (const auto& input : inputs) {
        Tensor in = input;
        in.node().ensure_grad();
        std::fill(in.grad().begin(), in.grad().end(), 0.0f);
    }
    nn::backward(loss_fn());
    double worst = 0.0;
    const int per_input = std::max(1, accept::kGradCoordsPerOp / static_cast<int>(inputs.size()));
    for (const auto& input : inputs) {
        Tensor in = input;
        for (int c = 0; c < per_input; ++c) {
            const std::size_t idx = rng.below(in.value().size());
            const float saved = in.value()[idx];
            const double h = accept::kGradH;
            in.value()[idx] = saved + static_cast<float>(h);
            const double up = loss_fn().scalar();
            in.value()[idx] = saved - static_cast<float>(h);
            const double down = loss_fn().scalar();
            in.value()[idx] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = in.grad()[idx];
            const double rel =
                std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), denom_floor});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

void criterion_5() {
    Timer t;
    Rng rng(hash_tag("accept-grad"));
    double worst = 0.0;
    std::string worst_op;
    auto run = [&](const std::string& name, const std::vector<Tensor>& inputs,
                   const std::function<Tensor()>& loss_fn,
                   double denom_floor = accept::kGradDenomFloor) {
        const double rel = fd_check(inputs, loss_fn, rng, denom_floor);
        if (rel > worst) {
            worst = rel;
            worst_op = name;
        }
    };

    {
        Tensor a = small_rand({6, 5}, rng), b = small_rand({5, 4}, rng);
        run("matmul", {a, b}, [&] { return nn::mean_all(nn::matmul(a, b)); });
        Tensor at = small_rand({5, 6}, rng);
        run("matmul_tA", {at, b}, [&] { return nn::mean_all(nn::matmul(at, b, true, false)); });
        Tensor bt = small_rand({4, 5}, rng);
        run("matmul_tB", {a, bt}, [&] { return nn::mean_all(nn::matmul(a, bt, false, true)); });
    }
    {
        Tensor a = small_rand({5, 6}, rng), b = small_rand({5, 6}, rng);
        Tensor w = small_rand({5, 6}, rng, false);
        run("add", {a, b}, [&] { return nn::mean_all(nn::mul(nn::add(a, b), w)); });
        run("sub", {a, b}, [&] { return nn::mean_all(nn::mul(nn::sub(a, b), w)); });
        run("mul", {a, b}, [&] { return nn::mean_all(nn::mul(a, b)); });
        run("scale", {a}, [&] { return nn::mean_all(nn::scale(a, 1.3f)); });
        run("gelu", {a}, [&] { return nn::mean_all(nn::gelu(a)); });
        run("tanh", {a}, [&] { return nn::mean_all(nn::tanh_op(a)); });
        run("transpose", {a}, [&] { return nn::mean_all(nn::transpose(a)); });
        run("sum_all", {a}, [&] { return nn::scale(nn::sum_all(a), 0.05f); });
    }
    {
        // relu: sample away from the kink so fd is well defined
        std::vector<float> vals(30);
        for (auto& v : vals)
            v = static_cast<float>(rng.uniform(0.1, 0.5) * (rng.below(2) ? 1 : -1));
        Tensor a = Tensor::from(vals, {5, 6}, true);
        run("relu", {a}, [&] { return nn::mean_all(nn::relu(a)); });
    }
    {
        Tensor x = small_rand({5, 8}, rng);
        Tensor bias = small_rand({8}, rng);
        Tensor g = small_rand({8}, rng), b = small_rand({8}, rng);
        Tensor w = small_rand({5, 8}, rng, false);
        run("add_bias", {x, bias}, [&] { return nn::mean_all(nn::mul(nn::add_bias(x, bias), w)); });
        run("layer_norm", {x, g, b},
            [&] { return nn::mean_all(nn::mul(nn::layer_norm(x, g, b), w)); });
        run("softmax", {x}, [&] { return nn::mean_all(nn::mul(nn::softmax_last_dim(x), w)); });
    }
    {
        Tensor x = small_rand({4, 8}, rng);
        Tensor w1 = small_rand({4, 4}, rng, false);
        run("slice_cols", {x}, [&] { return nn::mean_all(nn::mul(nn::slice_cols(x, 2, 4), w1)); });
        Tensor y = small_rand({4, 3}, rng);
        Tensor w2 = small_rand({4, 11}, rng, false);
        run("concat_cols", {x, y},
            [&] { return nn::mean_all(nn::mul(nn::concat_cols({x, y}), w2)); });
        std::vector<int> idx{1, 3, 0, 1};
        Tensor w3 = small_rand({4, 8}, rng, false);
        run("gather_rows", {x},
            [&] { return nn::mean_all(nn::mul(nn::gather_rows(x, idx), w3)); });
        std::vector<std::pair<int, int>> pattern{{0, 2}, {1, 0}, {0, 0}, {1, 1}};
        Tensor y2 = small_rand({2, 8}, rng);
        run("assemble_rows", {x, y2},
            [&] { return nn::mean_all(nn::mul(nn::assemble_rows({x, y2}, pattern), w3)); });
    }
    {
        Tensor q = small_rand({6, 8}, rng), k = small_rand({6, 8}, rng), v = small_rand({6, 8}, rng);
        Tensor w = small_rand({6, 8}, rng, false);
        run("causal_self_attention", {q, k, v}, [&] {
            return nn::mean_all(nn::mul(nn::causal_self_attention(q, k, v, 2, 0.5f), w));
        });
    }
    {
        Tensor pred = small_rand({6, 3}, rng);
        std::vector<float> target(18);
        for (auto& x : target) x = static_cast<float>(rng.uniform(-0.5, 0.5));
        run("mse_loss", {pred}, [&] { return nn::mse_loss(pred, target); });
    }
    {
        // assembled QDT: fd over its parameters against an MSE objective
        qdt::QdtConfig cfg;
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.emb_dim = 16;
        cfg.dropout = 0.0f;
        cfg.max_T = 4;
        qdt::QdtModel model(cfg, 3, 2, 2, hash_tag("accept-grad-qdt"));
        std::vector<float> bd{0.3f, -0.2f};
        std::vector<float> obs(4 * 3), act(4 * 2), target(4 * 2);
        for (auto& x : obs) x = static_cast<float>(rng.uniform(-0.5, 0.5));
        for (auto& x : act) x = static_cast<float>(rng.uniform(-0.5, 0.5));
        for (auto& x : target) x = static_cast<float>(rng.uniform(-0.5, 0.5));
        auto loss_fn = [&] {
            return nn::mse_loss(model.forward(bd, obs.data(), 4, act.data(), 4), target);
        };
        run("qdt_model", model.params(), loss_fn, accept::kGradDenomFloorModel);
    }

    const bool ok = worst < accept::kGradRelTol;
    report(5, "finite-difference gradient checks", ok,
           "worst relative error " + fmt(worst) + " (" + worst_op + "), tol " +
               fmt(accept::kGradRelTol),
           t.seconds());
}

// ---- criterion 6 ----------------------------------------------------------

void criterion_6() {
    Timer t;
    Rng rng(hash_tag("accept-causal"));
    qdt::QdtConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.emb_dim = 32;
    cfg.dropout = 0.0f;
    cfg.max_T = 12;
    qdt::QdtModel model(cfg, 4, 2, 2, hash_tag("accept-causal-init"));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int T = 4 + static_cast<int>(rng.below(9));  // 4..12
        std::vector<float> bd(2), obs(T * 4), act(T * 2);
        for (auto& x : bd) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (auto& x : obs) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (auto& x : act) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        const int pos = static_cast<int>(rng.below(T - 1));  // perturb after pos
        Tensor base = model.forward(bd, obs.data(), T, act.data(), T);
        std::vector<float> obs2 = obs, act2 = act;
        act2[pos * 2 + static_cast<int>(rng.below(2))] += 2.0f;  // A_pos: after O_pos
        for (int tt = pos + 1; tt < T; ++tt) {
            for (int c = 0; c < 4; ++c)
                obs2[tt * 4 + c] += static_cast<float>(rng.uniform(-2.0, 2.0));
            for (int c = 0; c < 2; ++c)
                act2[tt * 2 + c] += static_cast<float>(rng.uniform(-2.0, 2.0));
        }
        Tensor pert = model.forward(bd, obs2.data(), T, act2.data(), T);
        for (int tt = 0; tt <= pos; ++tt)
            for (int c = 0; c < 2; ++c)
                worst = std::max(worst, static_cast<double>(std::abs(
                                            base.value()[tt * 2 + c] - pert.value()[tt * 2 + c])));
    }
    report(6, "causality of the assembled model", worst <= 1e-5,
           "20 random (sequence, position) pairs, worst drift " + fmt(worst), t.seconds());
}

// ---- criterion 7 ----------------------------------------------------------

void criterion_7() {
    Timer t;
    const EnvSpec env = make_env("point-omni", 100);
    Genotype g = init_random({env.obs_dim, {32, 32}, env.act_dim}, hash_tag("accept-memo"));
    Trajectory traj = rollout(env, g, 7);
    TrajectoryDataset ds;
    ds.env_name = env.name;
    ds.obs_dim = env.obs_dim;
    ds.act_dim = env.act_dim;
    ds.episode_len = env.episode_len;
    ds.bd_dim = 2;
    TrajectoryRecord rec;
    rec.seed = 7;
    rec.fitness = static_cast<float>(traj.fitness);
    for (double v : traj.bd) rec.achieved_bd.push_back(static_cast<float>(v));
    rec.conditioning_bd = rec.achieved_bd;
    for (double v : traj.observations) rec.observations.push_back(static_cast<float>(v));
    for (double v : traj.actions) rec.actions.push_back(static_cast<float>(v));
    ds.records.push_back(std::move(rec));

    qdt::QdtConfig cfg;
    cfg.n_layers = 2;
    cfg.emb_dim = 64;
    cfg.n_heads = 4;
    cfg.dropout = 0.0f;
    cfg.max_T = env.episode_len;
    cfg.batch_size = 1;
    qdt::QdtModel model(cfg, env.obs_dim, env.act_dim, 2, hash_tag("accept-memo-init"));
    nn::Adam opt(model.params(), {.lr = cfg.lr});
    double loss = 1.0;
    int epoch = 0;
    for (; epoch < 500 && loss >= 1e-3; ++epoch)
        loss = qdt::train_epoch(model, opt, ds, mix_seed(hash_tag("accept-memo-train"), epoch));
    report(7, "single-trajectory memorization", loss < 1e-3,
           "MSE " + fmt(loss) + " after " + std::to_string(epoch) + " epochs", t.seconds());
}

// ---- criterion 8 ----------------------------------------------------------

void criterion_8(Context& ctx) {
    Timer t;
    std::vector<double> d_mels, d_me;
    bool beats_every_seed = true;
    for (std::uint64_t seed : accept::kSeeds) {
        const double ls = ctx.qdt_eval("me-ls", seed).overall_mean_distance;
        const double me = ctx.qdt_eval("me", seed).overall_mean_distance;
        d_mels.push_back(ls);
        d_me.push_back(me);
        if (!(ls < me)) beats_every_seed = false;
    }
    const bool below = std::all_of(d_mels.begin(), d_mels.end(), [](double d) {
        return d <= accept::kQdtMeLsDistanceMax;
    });
    report(8, "behavior conditioning", below && beats_every_seed,
           "QDT(ME-LS) " + fmt_per_seed(d_mels) + " (need <= " +
               fmt(accept::kQdtMeLsDistanceMax) + "), QDT(ME) " + fmt_per_seed(d_me) +
               (beats_every_seed ? ", ME-LS lower in 3/3 seeds" : ", direction violated"),
           t.seconds());
}

// ---- criterion 9 ----------------------------------------------------------

void criterion_9(Context& ctx) {
    Timer t;
    const std::uint64_t seed = 1;
    ExperimentConfig cfg = qdt_config("me-ls");
    const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len, accept::kQdtDatasetNoiseSigma);
    const Centroids goals = build_goal_set(env, cfg.n_goals, seed);

    ctx.qdt_eval("me-ls", seed);  // ensures the dataset + full baseline exist
    const TrajectoryDataset& full_ds = *ctx.mels_dataset_seed1;
    const qdt::GridEvalResult& full_eval = *ctx.full_eval_seed1;

    TrajectoryDataset half =
        prune_dataset(full_ds, PruneDensity{0.5, mix_seed(seed, hash_tag("accept-prune"))});
    TrainedQdt density_model = train_and_eval_qdt(half, env, goals, cfg, seed);
    const double ratio =
        density_model.final_eval.overall_mean_distance / full_eval.overall_mean_distance;

    const double mid_y = 0.5 * (env.bd_space.lower[1] + env.bd_space.upper[1]);
    TrajectoryDataset lower = prune_dataset(full_ds, PruneUpperPart{1, mid_y});
    TrainedQdt upper_model = train_and_eval_qdt(lower, env, goals, cfg, seed);
    double removed = 0.0, retained = 0.0;
    int n_removed = 0, n_retained = 0;
    for (const auto& pg : upper_model.final_eval.per_goal) {
        if (pg.goal[1] > mid_y) {
            removed += pg.mean_distance;
            ++n_removed;
        } else {
            retained += pg.mean_distance;
            ++n_retained;
        }
    }
    removed /= std::max(1, n_removed);
    retained /= std::max(1, n_retained);
    const double gap = removed - retained;

    const bool ok = ratio <= accept::kDensityDistanceRatioMax &&
                    gap >= accept::kUpperPartRemovedRetainedGapMin;
    report(9, "generalization under pruning", ok,
           "density(0.5)/full distance ratio " + fmt(ratio) + " (need <= " +
               fmt(accept::kDensityDistanceRatioMax) + "); upper_part removed " + fmt(removed) +
               " vs retained " + fmt(retained) + ", gap " + fmt(gap) + " (need >= " +
               fmt(accept::kUpperPartRemovedRetainedGapMin) + ")",
           t.seconds());
}

// ---- criterion 10 ---------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void criterion_10() {
    Timer t;
    Rng rng(hash_tag("accept-roundtrip"));
    const fs::path dir = fs::temp_directory_path() / "qdlab_accept_rt";
    fs::create_directories(dir);
    bool ok = true;
    for (int trial = 0; trial < 50 && ok; ++trial) {
        TrajectoryDataset ds;
        ds.env_name = trial % 2 ? "point-omni" : "dutycycle-uni";
        ds.obs_dim = 2 + static_cast<int>(rng.below(5));
        ds.act_dim = 1 + static_cast<int>(rng.below(3));
        ds.episode_len = 1 + static_cast<int>(rng.below(20));
        ds.bd_dim = 2;
        const int n = 1 + static_cast<int>(rng.below(12));
        for (int i = 0; i < n; ++i) {
            TrajectoryRecord r;
            r.seed = rng.next_u64();
            r.fitness = static_cast<float>(rng.uniform(-100.0, 0.0));
            for (int c = 0; c < 2; ++c) {
                r.achieved_bd.push_back(static_cast<float>(rng.uniform(-15.0, 15.0)));
                r.conditioning_bd.push_back(static_cast<float>(rng.uniform(-15.0, 15.0)));
            }
            for (int k = 0; k < ds.episode_len * ds.obs_dim; ++k)
                r.observations.push_back(static_cast<float>(rng.uniform(-5.0, 5.0)));
            for (int k = 0; k < ds.episode_len * ds.act_dim; ++k)
                r.actions.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
            ds.records.push_back(std::move(r));
        }
        save_dataset(ds, (dir / "a.qdt1").string());
        save_dataset(load_dataset((dir / "a.qdt1").string()), (dir / "b.qdt1").string());
        if (slurp(dir / "a.qdt1") != slurp(dir / "b.qdt1")) ok = false;

        nn::NamedParams params;
        const int n_tensors = 1 + static_cast<int>(rng.below(5));
        for (int k = 0; k < n_tensors; ++k) {
            const int rows = 1 + static_cast<int>(rng.below(8));
            const int cols = 1 + static_cast<int>(rng.below(8));
            std::vector<float> vals(static_cast<std::size_t>(rows) * cols);
            for (auto& v : vals) v = static_cast<float>(rng.uniform(-2.0, 2.0));
            params.emplace_back("t" + std::to_string(k),
                                Tensor::from(std::move(vals), {rows, cols}, true));
        }
        nn::save_checkpoint(params, (dir / "a.qdtw").string());
        nn::NamedParams fresh;
        for (const auto& [name, tensor] : params)
            fresh.emplace_back(name, Tensor::zeros(tensor.shape(), true));
        nn::load_checkpoint(fresh, (dir / "a.qdtw").string());
        nn::save_checkpoint(fresh, (dir / "b.qdtw").string());
        if (slurp(dir / "a.qdtw") != slurp(dir / "b.qdtw")) ok = false;
    }
    fs::remove_all(dir);
    report(10, "QDT1 / QDTW round trips", ok, "50 randomized instances each, byte identical",
           t.seconds());
}

// ---- criterion 11 ---------------------------------------------------------

void criterion_11() {
    Timer t;
    auto pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        ExperimentConfig cfg = desk_config("me-ls");
        cfg.evolution.n_cells = 32;
        cfg.evolution.batch_size = 16;
        cfg.evolution.total_iterations = 20;
        cfg.evolution.init_solutions = 32;
        cfg.evolution.episodes_per_eval = 3;
        cfg.evolution.hidden = {8};
        cfg.evolution.episode_len = 20;
        cfg.qdt.n_layers = 1;
        cfg.qdt.n_heads = 2;
        cfg.qdt.emb_dim = 16;
        cfg.qdt.max_T = 20;
        cfg.dataset_size = 24;
        cfg.n_zones = 8;
        cfg.n_probe_eps = 2;
        cfg.epochs = 2;
        cfg.eval_every = 0;
        cfg.n_goals = 4;
        cfg.n_episodes_per_goal = 2;
        const std::uint64_t seed = 1;
        const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len, accept::kInitNoiseSigma);
        EvolutionConfig ec = cfg.evolution;
        ec.env = cfg.env;
        ec.seed = seed;
        Repertoire rep = run_evolution(ec).repertoire;
        save_repertoire(rep, (dir / "repertoire.json").string(), "centroids.json");
        save_centroids(rep.centroids, (dir / "centroids.json").string());
        TrajectoryDataset ds = make_dataset(rep, env, cfg, seed);
        save_dataset(ds, (dir / "dataset.qdt1").string());
        const Centroids goals = build_goal_set(env, cfg.n_goals, seed);
        TrainedQdt trained = train_and_eval_qdt(ds, env, goals, cfg, seed);
        trained.model.save((dir / "qdt.qdtw").string());
        std::ofstream(dir / "eval_grid.csv") << qdt::grid_eval_csv(trained.final_eval);
    };
    const fs::path base = fs::temp_directory_path() / "qdlab_accept_e2e";
    fs::remove_all(base);
    pipeline(base / "a");
    pipeline(base / "b");
    bool ok = true;
    std::string mismatch;
    for (const char* f : {"repertoire.json", "centroids.json", "dataset.qdt1", "qdt.qdtw",
                          "eval_grid.csv"}) {
        const auto ha = fnv1a_file((base / "a" / f).string());
        const auto hb = fnv1a_file((base / "b" / f).string());
        if (ha != hb) {
            ok = false;
            mismatch += std::string(" ") + f;
        }
    }
    fs::remove_all(base);
    report(11, "end-to-end determinism", ok,
           ok ? "two identically-seeded pipelines, identical artifact hashes"
              : "hash mismatch in:" + mismatch,
           t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int c) { return wanted.empty() || wanted.count(c); };

    Context ctx;
    if (want(1)) criterion_1();
    if (want(2)) criterion_2();
    if (want(3)) criterion_3(ctx);
    if (want(4)) criterion_4(ctx);
    if (want(5)) criterion_5();
    if (want(6)) criterion_6();
    if (want(7)) criterion_7();
    if (want(8)) criterion_8(ctx);
    if (want(9)) criterion_9(ctx);
    if (want(10)) criterion_10();
    if (want(11)) criterion_11();

    if (g_failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criteria FAILED\n", g_failures);
    return g_failures;
}
