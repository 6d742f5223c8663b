// qdlab command-line entry point: drives the evolve -> dataset -> train ->
// eval pipeline and the experiment reproductions from declarative JSON
// configs. Flags are reserved for seeds, paths, and parallelism; everything
// else lives in the config so runs stay diffable.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdlab/experiments.hpp"
#include "qdlab/manifest.hpp"
#include "qdlab/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qdlab;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where,
                std::vector<std::string>& errors) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) errors.push_back(where + "." + key);
}

// Full run configuration: ExperimentConfig plus CLI-only plumbing.
struct RunConfig {
    ExperimentConfig exp;
    std::string dataset_source = "zones";  // zones | naive
    json prune = {{"scheme", "density"}, {"p", 0.5}, {"prune_seed", 0}};
    json resolved;  // fully-resolved document echoed into the run dir
};

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig parse_config(const json& j) {
    std::vector<std::string> errors;
    check_keys(j,
               {"env", "episode_len", "seed", "seeds", "run_dir", "evolution", "dataset", "qdt",
                "train", "eval", "prune"},
               "config", errors);

    RunConfig rc;
    ExperimentConfig& c = rc.exp;
    read_into(j, "env", c.env);
    if (j.contains("episode_len")) c.evolution.episode_len = j.at("episode_len").get<int>();
    if (j.contains("seed")) c.seeds = {j.at("seed").get<std::uint64_t>()};
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    read_into(j, "run_dir", c.run_dir);

    if (j.contains("evolution")) {
        const json& e = j.at("evolution");
        check_keys(e,
                   {"variant", "n_cells", "batch_size", "total_iterations", "init_solutions",
                    "episodes_per_eval", "hidden", "iso_sigma", "line_sigma", "fitness_offset",
                    "cvt_seed", "init_noise_sigma"},
                   "config.evolution", errors);
        read_into(e, "variant", c.evolution.variant);
        read_into(e, "n_cells", c.evolution.n_cells);
        read_into(e, "batch_size", c.evolution.batch_size);
        read_into(e, "total_iterations", c.evolution.total_iterations);
        read_into(e, "init_solutions", c.evolution.init_solutions);
        read_into(e, "episodes_per_eval", c.evolution.episodes_per_eval);
        read_into(e, "hidden", c.evolution.hidden);
        read_into(e, "iso_sigma", c.evolution.iso_sigma);
        read_into(e, "line_sigma", c.evolution.line_sigma);
        read_into(e, "fitness_offset", c.evolution.fitness_offset);
        read_into(e, "cvt_seed", c.evolution.cvt_seed);
        read_into(e, "init_noise_sigma", c.evolution.init_noise_sigma);
    }
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, {"size", "n_zones", "n_probe_eps", "source"}, "config.dataset", errors);
        read_into(d, "size", c.dataset_size);
        read_into(d, "n_zones", c.n_zones);
        read_into(d, "n_probe_eps", c.n_probe_eps);
        read_into(d, "source", rc.dataset_source);
    }
    if (j.contains("qdt")) {
        const json& q = j.at("qdt");
        check_keys(q, {"n_layers", "n_heads", "emb_dim", "dropout", "lr", "batch_size"},
                   "config.qdt", errors);
        read_into(q, "n_layers", c.qdt.n_layers);
        read_into(q, "n_heads", c.qdt.n_heads);
        read_into(q, "emb_dim", c.qdt.emb_dim);
        read_into(q, "dropout", c.qdt.dropout);
        read_into(q, "lr", c.qdt.lr);
        read_into(q, "batch_size", c.qdt.batch_size);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, {"epochs", "eval_every", "eval_goal_subsample", "eval_episodes"},
                   "config.train", errors);
        read_into(t, "epochs", c.epochs);
        read_into(t, "eval_every", c.eval_every);
        read_into(t, "eval_goal_subsample", c.eval_goal_subsample);
        read_into(t, "eval_episodes", c.eval_episodes);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"n_goals", "n_episodes_per_goal"}, "config.eval", errors);
        read_into(e, "n_goals", c.n_goals);
        read_into(e, "n_episodes_per_goal", c.n_episodes_per_goal);
    }
    if (j.contains("prune")) {
        const json& p = j.at("prune");
        check_keys(p, {"scheme", "p", "prune_seed", "grid_n", "keep_parity", "axis", "threshold"},
                   "config.prune", errors);
        rc.prune = p;
    }
    if (!errors.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& e : errors) msg += " " + e;
        throw ConfigError(msg);
    }
    c.qdt.max_T = c.evolution.episode_len;
    rc.resolved = j;
    return rc;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                      const std::string& run_dir_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    if (seed_override) {
        j["seed"] = *seed_override;
        j.erase("seeds");
    }
    if (const char* env_dir = std::getenv("QDLAB_RUN_DIR")) j["run_dir"] = env_dir;
    if (!run_dir_override.empty()) j["run_dir"] = run_dir_override;
    RunConfig rc = parse_config(j);
    rc.exp.validate();
    return rc;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError("missing " + what + ": " + path);
}

// Echoes the resolved config and writes the stage manifest.
void finish_stage(const RunConfig& rc, const std::string& command,
                  const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                  double wall_seconds) {
    const fs::path dir(rc.exp.run_dir);
    fs::create_directories(dir);
    const std::string config_text = rc.resolved.dump(2) + "\n";
    {
        std::ofstream out(dir / "config.json");
        out << config_text;
    }
    RunManifest m;
    m.command = command;
    m.version = qdlab_version();
    m.config_hash = hash_hex(fnv1a_bytes(config_text.data(), config_text.size()));
    m.seed = rc.exp.seeds.front();
    m.wall_seconds = wall_seconds;
    m.inputs = inputs;
    m.outputs = outputs;
    save_manifest(m, (dir / ("manifest_" + command + ".json")).string());
}

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

qdt::QdtModel load_model(const RunConfig& rc, const EnvSpec& env, const std::string& checkpoint) {
    require_file(checkpoint, "checkpoint");
    qdt::QdtModel model(rc.exp.qdt, env.obs_dim, env.act_dim, env.bd_space.dim, /*init_seed=*/0);
    model.load(checkpoint);
    return model;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdlab: quality-diversity repertoires distilled into a "
                 "behavior-conditioned transformer"};
    app.require_subcommand(1);

    std::string config_path;
    std::string run_dir_override;
    std::optional<std::uint64_t> seed_override;
    int jobs = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "Path to the JSON run configuration")
        ->required();
    app.add_option("--seed", seed_override, "Override the config seed");
    app.add_option("--jobs", jobs, "Bound intra-stage parallelism (0 = library default)");
    app.add_option("--run-dir", run_dir_override, "Override the output run directory");
    app.add_flag("-v,--verbose", verbose, "Verbose progress output");

    std::string repertoire_path, dataset_path, checkpoint_path, csv_path, experiment_name;

    auto* cmd_cvt = app.add_subcommand("cvt", "Build and save the CVT centroids");
    auto* cmd_evolve = app.add_subcommand("evolve", "Run quality-diversity evolution");
    auto* cmd_reassess = app.add_subcommand("reassess", "Re-evaluate a repertoire's elites");
    cmd_reassess->add_option("--repertoire", repertoire_path, "Repertoire JSON file")->required();
    auto* cmd_dmake = app.add_subcommand("dataset-make", "Distill a repertoire into a dataset");
    cmd_dmake->add_option("--repertoire", repertoire_path, "Repertoire JSON file")->required();
    auto* cmd_dprune = app.add_subcommand("dataset-prune", "Apply a pruning scheme to a dataset");
    cmd_dprune->add_option("--dataset", dataset_path, "QDT1 dataset file")->required();
    auto* cmd_dinspect = app.add_subcommand("dataset-inspect", "Print dataset header and BD histogram");
    cmd_dinspect->add_option("--dataset", dataset_path, "QDT1 dataset file")->required();
    auto* cmd_train = app.add_subcommand("train", "Train the transformer on a dataset");
    cmd_train->add_option("--dataset", dataset_path, "QDT1 dataset file")->required();
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint on CVT goals");
    cmd_eval->add_option("--checkpoint", checkpoint_path, "QDTW checkpoint file")->required();
    auto* cmd_exp = app.add_subcommand("experiment", "Run a named experiment reproduction");
    cmd_exp->add_option("name", experiment_name,
                        "accuracy | generalization | reassessment | training-curves | fitness-eval")
        ->required();
    auto* cmd_report = app.add_subcommand("report", "Re-render the SVG heatmap of a grid CSV");
    cmd_report->add_option("--csv", csv_path, "Grid evaluation CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (jobs > 0) omp_set_num_threads(jobs);
        RunConfig rc = load_config(config_path, seed_override, run_dir_override);
        const ExperimentConfig& cfg = rc.exp;
        const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len);
        const std::uint64_t seed = cfg.seeds.front();
        const fs::path dir(cfg.run_dir);
        fs::create_directories(dir);
        StageTimer timer;
        auto log = [&](const std::string& msg) {
            if (verbose) std::cerr << "[qdlab] " << msg << '\n';
        };

        if (*cmd_cvt) {
            Centroids c = build_cvt(env.bd_space, cfg.evolution.n_cells, cfg.evolution.cvt_seed);
            const std::string out = (dir / "centroids.json").string();
            save_centroids(c, out);
            finish_stage(rc, "cvt", {}, {out}, timer.seconds());
        } else if (*cmd_evolve) {
            EvolutionConfig ec = cfg.evolution;
            ec.env = cfg.env;
            ec.seed = seed;
            log("evolving " + ec.variant + " on " + ec.env);
            EvolutionResult res = run_evolution(ec);
            const std::string cpath = (dir / "centroids.json").string();
            const std::string rpath = (dir / "repertoire.json").string();
            const std::string mpath = (dir / "metrics.csv").string();
            save_centroids(res.repertoire.centroids, cpath);
            save_repertoire(res.repertoire, rpath, "centroids.json");
            save_metrics_csv(res.metrics, mpath);
            finish_stage(rc, "evolve", {}, {cpath, rpath, mpath}, timer.seconds());
        } else if (*cmd_reassess) {
            require_file(repertoire_path, "repertoire");
            Repertoire rep = load_repertoire(repertoire_path);
            auto rr = reassess(rep, env, cfg.evolution.episodes_per_eval,
                               mix_seed(seed, hash_tag("reassess")), cfg.evolution.fitness_offset);
            std::ostringstream csv;
            csv.precision(17);
            csv << "phase,coverage,max_fitness,qd_score\n";
            csv << "initial," << rr.initial.coverage << ',' << rr.initial.max_fitness << ','
                << rr.initial.qd_score << '\n';
            csv << "recalculated," << rr.recalculated.coverage << ','
                << rr.recalculated.max_fitness << ',' << rr.recalculated.qd_score << '\n';
            const std::string out_csv = (dir / "reassessment.csv").string();
            std::ofstream(out_csv) << csv.str();
            const std::string out_rep = (dir / "repertoire_reassessed.json").string();
            save_centroids(rr.repertoire.centroids, (dir / "centroids.json").string());
            save_repertoire(rr.repertoire, out_rep, "centroids.json");
            finish_stage(rc, "reassess", {repertoire_path}, {out_csv, out_rep}, timer.seconds());
        } else if (*cmd_dmake) {
            require_file(repertoire_path, "repertoire");
            Repertoire rep = load_repertoire(repertoire_path);
            TrajectoryDataset ds =
                rc.dataset_source == "naive"
                    ? generate_dataset_naive(rep, env, cfg.dataset_size,
                                             mix_seed(seed, hash_tag("gen")))
                    : make_dataset(rep, env, cfg, seed);
            const std::string out = (dir / "dataset.qdt1").string();
            save_dataset(ds, out);
            finish_stage(rc, "dataset-make", {repertoire_path}, {out}, timer.seconds());
        } else if (*cmd_dprune) {
            require_file(dataset_path, "dataset");
            TrajectoryDataset ds = load_dataset(dataset_path);
            const std::string scheme = rc.prune.value("scheme", "density");
            PruneScheme ps;
            if (scheme == "density")
                ps = PruneDensity{rc.prune.value("p", 0.5),
                                  rc.prune.value("prune_seed", std::uint64_t{0})};
            else if (scheme == "tiles")
                ps = PruneTiles{rc.prune.value("grid_n", 4), rc.prune.value("keep_parity", 0),
                                env.bd_space};
            else if (scheme == "upper_part")
                ps = PruneUpperPart{rc.prune.value("axis", 1), rc.prune.value("threshold", 0.0)};
            else
                throw ConfigError("unknown prune scheme: " + scheme);
            TrajectoryDataset pruned = prune_dataset(ds, ps);
            const std::string out = (dir / ("dataset_" + scheme + ".qdt1")).string();
            save_dataset(pruned, out);
            finish_stage(rc, "dataset-prune", {dataset_path}, {out}, timer.seconds());
        } else if (*cmd_dinspect) {
            require_file(dataset_path, "dataset");
            TrajectoryDataset ds = load_dataset(dataset_path);
            std::cout << inspect_dataset(ds, env.bd_space);
        } else if (*cmd_train) {
            require_file(dataset_path, "dataset");
            TrajectoryDataset ds = load_dataset(dataset_path);
            const Centroids goals = build_goal_set(env, cfg.n_goals, seed);
            log("training on " + std::to_string(ds.records.size()) + " trajectories");
            TrainedQdt trained = train_and_eval_qdt(ds, env, goals, cfg, seed);
            const std::string ckpt = (dir / "qdt.qdtw").string();
            trained.model.save(ckpt);
            std::ostringstream curve;
            curve.precision(17);
            curve << "epoch,train_loss,eval_mean_distance,eval_max_fitness\n";
            for (const auto& pt : trained.curve)
                curve << pt.epoch << ',' << pt.train_loss << ',' << pt.eval_mean_distance << ','
                      << pt.eval_max_fitness << '\n';
            const std::string curve_path = (dir / "train_curve.csv").string();
            std::ofstream(curve_path) << curve.str();
            const std::string grid_path = (dir / "eval_grid.csv").string();
            std::ofstream(grid_path) << qdt::grid_eval_csv(trained.final_eval);
            finish_stage(rc, "train", {dataset_path}, {ckpt, curve_path, grid_path},
                         timer.seconds());
        } else if (*cmd_eval) {
            qdt::QdtModel model = load_model(rc, env, checkpoint_path);
            const Centroids goals = build_goal_set(env, cfg.n_goals, seed);
            auto res = qdt::evaluate_grid(model, env, goals, cfg.n_episodes_per_goal,
                                          mix_seed(seed, hash_tag("eval-final")));
            const std::string grid_path = (dir / "eval_grid.csv").string();
            std::ofstream(grid_path) << qdt::grid_eval_csv(res);
            std::vector<HeatmapPoint> pts;
            for (const auto& pg : res.per_goal)
                pts.push_back({pg.goal[0], pg.goal.size() > 1 ? pg.goal[1] : 0.0,
                               pg.mean_distance});
            HeatmapStyle style;
            style.title = "mean distance to goal";
            const std::string svg_path = (dir / "eval_grid.svg").string();
            std::ofstream(svg_path) << heatmap_svg(pts, env.bd_space, style);
            std::cout << "overall_mean_distance," << res.overall_mean_distance << '\n';
            finish_stage(rc, "eval", {checkpoint_path}, {grid_path, svg_path}, timer.seconds());
        } else if (*cmd_exp) {
            run_experiment(experiment_name, cfg);
            finish_stage(rc, "experiment-" + experiment_name, {}, {}, timer.seconds());
        } else if (*cmd_report) {
            require_file(csv_path, "csv");
            std::ifstream in(csv_path);
            std::string line;
            std::getline(in, line);  // header
            std::vector<HeatmapPoint> pts;
            while (std::getline(in, line)) {
                std::istringstream row(line);
                std::string fx, fy, fd;
                if (!std::getline(row, fx, ',') || !std::getline(row, fy, ',') ||
                    !std::getline(row, fd, ','))
                    continue;
                try {
                    pts.push_back({std::stod(fx), std::stod(fy), std::stod(fd)});
                } catch (const std::exception&) {
                    continue;  // summary rows with non-numeric fields
                }
            }
            HeatmapStyle style;
            style.title = fs::path(csv_path).stem().string();
            const std::string out = (dir / (fs::path(csv_path).stem().string() + ".svg")).string();
            std::ofstream(out) << heatmap_svg(pts, env.bd_space, style);
            finish_stage(rc, "report", {csv_path}, {out}, timer.seconds());
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    }
}
