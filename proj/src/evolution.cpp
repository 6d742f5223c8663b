#include "qdlab/evolution.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include <omp.h>

#include "qdlab/rng.hpp"

namespace qdlab {

EvalResult evaluate_solution(const Genotype& g, const EnvSpec& env, const Centroids& centroids,
                             int episodes, std::uint64_t base_seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate_solution: episodes must be >= 1");
    EvalResult res;
    res.trajectories.reserve(episodes);
    res.episode_bds.reserve(episodes);
    double fit_sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Trajectory t = rollout(env, g, base_seed + static_cast<std::uint64_t>(e));
        fit_sum += t.fitness;
        res.episode_bds.push_back(t.bd);
        res.trajectories.push_back(std::move(t));
    }
    res.fitness = fit_sum / episodes;

    if (episodes == 1) {
        res.bd = res.episode_bds[0];
        return res;
    }

    // modal cell: most frequent, ties to lowest cell index
    std::map<int, std::vector<int>> by_cell;
    for (int e = 0; e < episodes; ++e)
        by_cell[nearest_cell(centroids, res.episode_bds[e])].push_back(e);
    int modal = -1;
    std::size_t best_count = 0;
    for (const auto& [cell, eps] : by_cell) {
        if (eps.size() > best_count) {  // map iteration is ascending, so ties keep the lowest
            best_count = eps.size();
            modal = cell;
        }
    }
    const auto& members = by_cell[modal];
    BehaviorDescriptor bd(centroids.dim, 0.0);
    for (int e : members)
        for (int d = 0; d < centroids.dim; ++d) bd[d] += res.episode_bds[e][d];
    for (int d = 0; d < centroids.dim; ++d) bd[d] /= static_cast<double>(members.size());
    res.bd = bd;
    res.spread = spread(res.episode_bds);
    return res;
}

void save_metrics_csv(const QdMetrics& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "env_interactions,coverage,max_fitness,qd_score\n";
    out.precision(17);
    for (const auto& r : m.rows)
        out << r.env_interactions << ',' << r.coverage << ',' << r.max_fitness << ','
            << r.qd_score << '\n';
}

void EvolutionConfig::validate() const {
    if (variant != "me" && variant != "me-ls" && variant != "me-sampling")
        throw std::invalid_argument("evolution config: unknown variant '" + variant + "'");
    if (batch_size < 1) throw std::invalid_argument("evolution config: batch_size must be >= 1");
    if (total_iterations < 0)
        throw std::invalid_argument("evolution config: total_iterations must be >= 0");
    if (init_solutions < 1)
        throw std::invalid_argument("evolution config: init_solutions must be >= 1");
    if (episodes_per_eval < 1)
        throw std::invalid_argument("evolution config: episodes_per_eval must be >= 1");
    if (variant != "me" && episodes_per_eval < 2)
        throw std::invalid_argument("evolution config: " + variant + " needs episodes_per_eval >= 2");
    if (n_cells < 1) throw std::invalid_argument("evolution config: n_cells must be >= 1");
}

EvolutionResult run_evolution(const EvolutionConfig& config) {
    EnvSpec env = config.init_noise_sigma >= 0.0
                      ? make_env(config.env, config.episode_len, config.init_noise_sigma)
                      : make_env(config.env, config.episode_len);
    Centroids centroids = build_cvt(env.bd_space, config.n_cells, config.cvt_seed);
    return run_evolution(config, centroids);
}

EvolutionResult run_evolution(const EvolutionConfig& config, const Centroids& centroids) {
    config.validate();
    EnvSpec env = config.init_noise_sigma >= 0.0
                      ? make_env(config.env, config.episode_len, config.init_noise_sigma)
                      : make_env(config.env, config.episode_len);

    MlpArch arch{env.obs_dim, config.hidden, env.act_dim};
    const int E = config.effective_episodes();
    const int B = config.batch_size;

    EvolutionResult result;
    Repertoire& rep = result.repertoire;
    rep.centroids = centroids;
    rep.env = config.env;
    rep.algo = config.variant;
    rep.rng_seed = config.seed;

    Rng select_rng(mix_seed(config.seed, hash_tag("select")));
    long long interactions = 0;
    long long candidate_counter = 0;

    for (int iter = 0; iter < config.total_iterations; ++iter) {
        // emit the batch sequentially (selection draws are ordered), then
        // evaluate in parallel with pre-assigned seeds
        std::vector<Genotype> batch(B);
        for (int b = 0; b < B; ++b) {
            const std::uint64_t cand_id = candidate_counter++;
            if (cand_id < static_cast<std::uint64_t>(config.init_solutions) || rep.cells.empty()) {
                batch[b] = init_random(arch, mix_seed(config.seed, mix_seed(hash_tag("init"), cand_id)));
            } else {
                // two distinct random parents among occupied cells
                std::vector<const CellRecord*> elites;
                elites.reserve(rep.cells.size());
                for (const auto& [idx, rec] : rep.cells) elites.push_back(&rec);
                std::size_t i = select_rng.below(elites.size());
                std::size_t j = elites.size() > 1 ? select_rng.below(elites.size() - 1) : 0;
                if (elites.size() > 1 && j >= i) ++j;
                batch[b] = isoline_variation(elites[i]->genotype, elites[j]->genotype, config.iso_sigma,
                                             config.line_sigma,
                                             mix_seed(config.seed, mix_seed(hash_tag("var"), cand_id)));
            }
        }

        std::vector<EvalResult> evals(B);
        const std::uint64_t first_id = candidate_counter - B;
#pragma omp parallel for schedule(dynamic)
        for (int b = 0; b < B; ++b) {
            std::uint64_t base =
                mix_seed(config.seed, mix_seed(hash_tag("eval"), first_id + b));
            evals[b] = evaluate_solution(batch[b], env, centroids, E, base);
        }

        // single-writer insertion in candidate index order
        for (int b = 0; b < B; ++b) {
            CellRecord rec;
            rec.genotype = std::move(batch[b]);
            rec.fitness = evals[b].fitness;
            rec.spread = evals[b].spread;
            rec.n_evals = E;
            if (config.variant == "me") {
                rec.bd = evals[b].bd;
                me_insert(rep, rec);
            } else if (config.variant == "me-ls") {
                rec.bd = evals[b].bd;
                me_ls_insert(rep, rec);
            } else {
                rec.bd = geometric_median(evals[b].episode_bds);
                me_sampling_insert(rep, rec);
            }
        }

        interactions += static_cast<long long>(B) * E * env.episode_len;
        QdMetricsRow row;
        row.env_interactions = interactions;
        row.coverage = rep.coverage();
        row.max_fitness = rep.cells.empty() ? 0.0 : rep.max_fitness();
        row.qd_score = qd_score(rep, config.fitness_offset);
        result.metrics.rows.push_back(row);
    }
    return result;
}

ReassessResult reassess(const Repertoire& rep, const EnvSpec& env, int episodes,
                        std::uint64_t seed, double fitness_offset) {
    if (rep.cells.empty()) throw std::invalid_argument("reassess: repertoire is empty");
    ReassessResult res;
    res.repertoire.centroids = rep.centroids;
    res.repertoire.env = rep.env;
    res.repertoire.algo = rep.algo + "+reassess";
    res.repertoire.rng_seed = seed;

    std::vector<std::pair<int, const CellRecord*>> elites;
    elites.reserve(rep.cells.size());
    for (const auto& [idx, rec] : rep.cells) elites.emplace_back(idx, &rec);

    std::vector<EvalResult> evals(elites.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < elites.size(); ++i) {
        std::uint64_t base = mix_seed(seed, mix_seed(hash_tag("reassess"),
                                                     static_cast<std::uint64_t>(elites[i].first)));
        evals[i] = evaluate_solution(elites[i].second->genotype, env, rep.centroids,
                                     episodes, base);
    }
    for (std::size_t i = 0; i < elites.size(); ++i) {
        CellRecord rec = *elites[i].second;
        rec.fitness = evals[i].fitness;
        rec.bd = evals[i].bd;
        rec.spread = evals[i].spread;
        rec.n_evals = episodes;
        me_insert(res.repertoire, rec);
    }

    res.initial = {rep.coverage(), rep.max_fitness(), qd_score(rep, fitness_offset)};
    res.recalculated = {res.repertoire.coverage(), res.repertoire.max_fitness(),
                        qd_score(res.repertoire, fitness_offset)};
    return res;
}

double mean_elite_spread(const Repertoire& rep, const EnvSpec& env, int episodes,
                         std::uint64_t seed) {
    if (rep.cells.empty()) throw std::invalid_argument("mean_elite_spread: repertoire is empty");
    std::vector<std::pair<int, const Genotype*>> elites;
    for (const auto& [idx, rec] : rep.cells) elites.emplace_back(idx, &rec.genotype);
    std::vector<double> spreads(elites.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < elites.size(); ++i) {
        std::uint64_t base = mix_seed(seed, mix_seed(hash_tag("posthoc"),
                                                     static_cast<std::uint64_t>(elites[i].first)));
        std::vector<BehaviorDescriptor> bds;
        bds.reserve(episodes);
        for (int e = 0; e < episodes; ++e)
            bds.push_back(rollout(env, *elites[i].second, base + e).bd);
        spreads[i] = spread(bds);
    }
    double sum = 0.0;
    for (double s : spreads) sum += s;
    return sum / static_cast<double>(spreads.size());
}

}  // namespace qdlab
