#include <doctest.h>

#include <filesystem>

#include "qdlab/evolution.hpp"
#include "qdlab/repertoire.hpp"

using namespace qdlab;

namespace {

Repertoire tiny_repertoire() {
    Repertoire rep;
    rep.centroids.dim = 2;
    rep.centroids.n_cells = 4;
    rep.centroids.points = {0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75};
    return rep;
}

CellRecord record(double fitness, std::optional<double> spread_v,
                  BehaviorDescriptor bd = {0.2, 0.2}) {
    CellRecord r;
    r.genotype = Genotype{{1, {}, 1}, {0.0f, 0.0f}};
    r.fitness = fitness;
    r.bd = std::move(bd);
    r.spread = spread_v;
    r.n_evals = 1;
    return r;
}

}  // namespace

TEST_SUITE("qd") {

TEST_CASE("me_insert: empty cell accepts, replacement on strictly higher fitness") {
    Repertoire rep = tiny_repertoire();
    CHECK(me_insert(rep, record(1.0, std::nullopt)));  // empty -> accept
    CHECK_FALSE(me_insert(rep, record(0.5, std::nullopt)));  // lower
    CHECK_FALSE(me_insert(rep, record(1.0, std::nullopt)));  // equal
    CHECK(me_insert(rep, record(1.5, std::nullopt)));        // higher
    CHECK(rep.cells.at(0).fitness == 1.5);
    CHECK(rep.cells.size() == 1);
}

TEST_CASE("me_ls_insert: higher fitness AND lower spread, both strict") {
    Repertoire rep = tiny_repertoire();
    CHECK(me_ls_insert(rep, record(1.0, 0.5)));

    // full truth table over {lower, equal, higher} x {lower, equal, higher}
    const double f[3] = {0.5, 1.0, 1.5};
    const double s[3] = {0.2, 0.5, 0.8};
    for (int fi = 0; fi < 3; ++fi)
        for (int si = 0; si < 3; ++si) {
            Repertoire r2 = tiny_repertoire();
            REQUIRE(me_ls_insert(r2, record(1.0, 0.5)));
            const bool expect = fi == 2 && si == 0;  // strictly higher AND strictly lower
            CHECK(me_ls_insert(r2, record(f[fi], s[si])) == expect);
        }
}

TEST_CASE("me_ls_insert rejects candidates without spread") {
    Repertoire rep = tiny_repertoire();
    CHECK_THROWS_AS(me_ls_insert(rep, record(1.0, std::nullopt)), std::invalid_argument);
}

TEST_CASE("me_sampling_insert uses the plain fitness criterion") {
    Repertoire rep = tiny_repertoire();
    CHECK(me_sampling_insert(rep, record(1.0, 0.9)));
    CHECK(me_sampling_insert(rep, record(1.5, 0.99)));  // higher fitness, worse spread: accepted
    CHECK_FALSE(me_sampling_insert(rep, record(1.2, 0.01)));
}

TEST_CASE("inserts land in the cell of the candidate BD") {
    Repertoire rep = tiny_repertoire();
    CHECK(me_insert(rep, record(1.0, std::nullopt, {0.8, 0.8})));
    CHECK(rep.cells.count(3) == 1);
    CHECK(me_insert(rep, record(2.0, std::nullopt, {0.2, 0.8})));
    CHECK(rep.cells.count(1) == 1);
    CHECK(rep.cells.size() == 2);
    CHECK(rep.coverage() == doctest::Approx(0.5));
    CHECK(rep.max_fitness() == 2.0);
}

TEST_CASE("qd_score sums offset fitness over occupied cells") {
    Repertoire rep = tiny_repertoire();
    me_insert(rep, record(-5.0, std::nullopt, {0.2, 0.2}));
    me_insert(rep, record(-3.0, std::nullopt, {0.8, 0.8}));
    CHECK(qd_score(rep, 150.0) == doctest::Approx(145.0 + 147.0));
}

TEST_CASE("base64 round trip") {
    for (std::size_t len : {0u, 1u, 2u, 3u, 4u, 17u, 255u}) {
        std::vector<unsigned char> data(len);
        for (std::size_t i = 0; i < len; ++i) data[i] = static_cast<unsigned char>(i * 37 + 5);
        auto text = base64_encode(data.data(), data.size());
        CHECK(base64_decode(text) == data);
    }
    // 'A' maps to value 0: a buffer of zeros must survive
    std::vector<unsigned char> zeros(9, 0);
    CHECK(base64_decode(base64_encode(zeros.data(), zeros.size())) == zeros);
}

TEST_CASE("repertoire save/load round trip") {
    EvolutionConfig cfg;
    cfg.env = "point-omni";
    cfg.variant = "me-ls";
    cfg.n_cells = 16;
    cfg.batch_size = 8;
    cfg.total_iterations = 3;
    cfg.init_solutions = 16;
    cfg.episodes_per_eval = 3;
    cfg.hidden = {8};
    cfg.episode_len = 20;
    cfg.seed = 5;
    EvolutionResult res = run_evolution(cfg);
    REQUIRE(res.repertoire.cells.size() > 0);

    auto dir = std::filesystem::temp_directory_path() / "qdlab_test_rep";
    std::filesystem::create_directories(dir);
    save_centroids(res.repertoire.centroids, (dir / "c.json").string());
    save_repertoire(res.repertoire, (dir / "r.json").string(), "c.json");
    Repertoire back = load_repertoire((dir / "r.json").string());

    CHECK(back.env == res.repertoire.env);
    CHECK(back.algo == "me-ls");
    CHECK(back.centroids.points == res.repertoire.centroids.points);
    REQUIRE(back.cells.size() == res.repertoire.cells.size());
    for (const auto& [idx, rec] : res.repertoire.cells) {
        REQUIRE(back.cells.count(idx) == 1);
        const CellRecord& b = back.cells.at(idx);
        CHECK(b.genotype.params == rec.genotype.params);  // exact f32 round trip
        CHECK(b.fitness == rec.fitness);
        CHECK(b.bd == rec.bd);
        CHECK(b.spread.has_value() == rec.spread.has_value());
        if (rec.spread) CHECK(*b.spread == *rec.spread);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("evaluate_solution: modal-cell BD and mean fitness") {
    EnvSpec env = make_env("point-omni", 20);
    Centroids c = build_cvt(env.bd_space, 16, 1);
    Genotype g = init_random({4, {8}, 2}, 2);
    EvalResult r = evaluate_solution(g, env, c, 5, 1000);
    REQUIRE(r.episode_bds.size() == 5);
    REQUIRE(r.trajectories.size() == 5);
    REQUIRE(r.spread.has_value());

    // fitness is the episode mean
    double fsum = 0.0;
    for (const auto& t : r.trajectories) fsum += t.fitness;
    CHECK(r.fitness == doctest::Approx(fsum / 5.0).epsilon(1e-12));

    // the BD is the mean of the episode BDs landing in the modal cell
    std::map<int, std::vector<BehaviorDescriptor>> by_cell;
    for (const auto& bd : r.episode_bds) by_cell[nearest_cell(c, bd)].push_back(bd);
    std::size_t best_n = 0;
    for (auto& [idx, bds] : by_cell) best_n = std::max(best_n, bds.size());
    const auto& modal = by_cell.at(nearest_cell(c, r.bd));
    CHECK(modal.size() == best_n);
    BehaviorDescriptor mean(2, 0.0);
    for (const auto& bd : modal) {
        mean[0] += bd[0] / modal.size();
        mean[1] += bd[1] / modal.size();
    }
    CHECK(r.bd[0] == doctest::Approx(mean[0]).epsilon(1e-12));
    CHECK(r.bd[1] == doctest::Approx(mean[1]).epsilon(1e-12));

    // spread matches the standalone function
    CHECK(*r.spread == doctest::Approx(spread(r.episode_bds)).epsilon(1e-12));
}

TEST_CASE("run_evolution is deterministic and variant-sensitive") {
    EvolutionConfig cfg;
    cfg.env = "point-omni";
    cfg.variant = "me-ls";
    cfg.n_cells = 16;
    cfg.batch_size = 8;
    cfg.total_iterations = 4;
    cfg.init_solutions = 8;
    cfg.episodes_per_eval = 3;
    cfg.hidden = {8};
    cfg.episode_len = 20;
    cfg.seed = 3;
    EvolutionResult a = run_evolution(cfg);
    EvolutionResult b = run_evolution(cfg);
    CHECK(repertoire_to_json(a.repertoire) == repertoire_to_json(b.repertoire));
    REQUIRE(a.metrics.rows.size() == b.metrics.rows.size());
    CHECK(a.metrics.rows.back().qd_score == b.metrics.rows.back().qd_score);

    cfg.variant = "me";
    EvolutionResult c = run_evolution(cfg);
    CHECK(repertoire_to_json(a.repertoire) != repertoire_to_json(c.repertoire));
    // plain ME evaluates one episode per candidate: no spread stored
    for (const auto& [idx, rec] : c.repertoire.cells) CHECK_FALSE(rec.spread.has_value());
    for (const auto& [idx, rec] : a.repertoire.cells) CHECK(rec.spread.has_value());
}

TEST_CASE("metrics are monotone in env interactions and coverage") {
    EvolutionConfig cfg;
    cfg.env = "point-omni";
    cfg.variant = "me";
    cfg.n_cells = 16;
    cfg.batch_size = 8;
    cfg.total_iterations = 6;
    cfg.init_solutions = 8;
    cfg.hidden = {8};
    cfg.episode_len = 20;
    cfg.seed = 4;
    EvolutionResult res = run_evolution(cfg);
    for (std::size_t i = 1; i < res.metrics.rows.size(); ++i) {
        CHECK(res.metrics.rows[i].env_interactions > res.metrics.rows[i - 1].env_interactions);
        CHECK(res.metrics.rows[i].coverage >= res.metrics.rows[i - 1].coverage);
        CHECK(res.metrics.rows[i].max_fitness >= res.metrics.rows[i - 1].max_fitness);
    }
}

TEST_CASE("reassess with zero init noise reproduces the archive") {
    EvolutionConfig cfg;
    cfg.env = "point-omni";
    cfg.variant = "me-ls";
    cfg.n_cells = 16;
    cfg.batch_size = 8;
    cfg.total_iterations = 4;
    cfg.init_solutions = 8;
    cfg.episodes_per_eval = 3;
    cfg.hidden = {8};
    cfg.episode_len = 20;
    cfg.init_noise_sigma = 0.0;
    cfg.seed = 6;
    EvolutionResult res = run_evolution(cfg);
    EnvSpec env = make_env("point-omni", 20, 0.0);
    ReassessResult rr = reassess(res.repertoire, env, 3, 123, 150.0);
    CHECK(rr.initial.coverage == doctest::Approx(rr.recalculated.coverage));
    CHECK(rr.initial.max_fitness == doctest::Approx(rr.recalculated.max_fitness).epsilon(1e-9));
    CHECK(rr.initial.qd_score == doctest::Approx(rr.recalculated.qd_score).epsilon(1e-9));
}

TEST_CASE("reassess never raises coverage") {
    EvolutionConfig cfg;
    cfg.env = "point-omni";
    cfg.variant = "me";
    cfg.n_cells = 16;
    cfg.batch_size = 8;
    cfg.total_iterations = 6;
    cfg.init_solutions = 8;
    cfg.hidden = {8};
    cfg.episode_len = 20;
    cfg.seed = 7;
    EvolutionResult res = run_evolution(cfg);
    EnvSpec env = make_env("point-omni", 20);
    ReassessResult rr = reassess(res.repertoire, env, 5, 123, 150.0);
    CHECK(rr.recalculated.coverage <= rr.initial.coverage);
}

TEST_CASE("config validation") {
    EvolutionConfig cfg;
    cfg.variant = "not-a-variant";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    EvolutionConfig cfg2;
    cfg2.n_cells = 0;
    CHECK_THROWS_AS(cfg2.validate(), std::invalid_argument);
    EvolutionConfig ok;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.effective_episodes() == 10);
    ok.variant = "me";
    CHECK(ok.effective_episodes() == 1);
}

}  // TEST_SUITE
