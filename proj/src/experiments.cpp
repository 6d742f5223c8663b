#include "qdlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qdlab/rng.hpp"
#include "qdlab/svg.hpp"

namespace qdlab {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw std::invalid_argument("experiment: seed list must be non-empty");
    if (n_goals < 1) throw std::invalid_argument("experiment: n_goals must be >= 1");
    if (n_episodes_per_goal < 1)
        throw std::invalid_argument("experiment: n_episodes_per_goal must be >= 1");
    if (dataset_size < 1) throw std::invalid_argument("experiment: dataset_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("experiment: epochs must be >= 1");
    evolution.validate();
}

Centroids build_goal_set(const EnvSpec& env, int n_goals, std::uint64_t seed) {
    return build_cvt(env.bd_space, n_goals, mix_seed(seed, hash_tag("goals")));
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

EvolutionConfig arm_evolution_config(const ExperimentConfig& cfg, const std::string& variant,
                                     std::uint64_t seed) {
    EvolutionConfig ec = cfg.evolution;
    ec.env = cfg.env;
    ec.variant = variant;
    ec.seed = seed;
    return ec;
}

// Per-goal summary shared by repertoire-served and QDT-served methods.
struct GoalRow {
    BehaviorDescriptor goal;
    double mean_distance = 0.0;
    double mean_fitness = 0.0;
    double achieved_spread = 0.0;
};

struct GridSummary {
    std::vector<GoalRow> rows;
    double overall_mean_distance = 0.0;
    double mean_spread = 0.0;
    double max_mean_fitness = 0.0;
};

// Serve each goal with the stored elite whose recorded BD is nearest to the
// goal (lowest cell index on ties), then roll that elite out fresh.
GridSummary evaluate_repertoire_on_goals(const Repertoire& rep, const EnvSpec& env,
                                         const Centroids& goals, int n_episodes,
                                         std::uint64_t seed) {
    if (rep.cells.empty()) throw std::runtime_error("evaluate_repertoire_on_goals: empty repertoire");
    GridSummary out;
    out.rows.resize(goals.n_cells);
    double dist_sum = 0.0, spread_sum = 0.0;
    double max_fit = -1e300;
    for (int g = 0; g < goals.n_cells; ++g) {
        BehaviorDescriptor goal(goals.cell(g), goals.cell(g) + goals.dim);
        const CellRecord* best = nullptr;
        double best_d = 0.0;
        for (const auto& [idx, rec] : rep.cells) {
            const double d = euclidean(rec.bd, goal);
            if (!best || d < best_d) {
                best = &rec;
                best_d = d;
            }
        }
        GoalRow& row = out.rows[g];
        row.goal = goal;
        std::vector<BehaviorDescriptor> bds;
        double dsum = 0.0, fsum = 0.0;
        for (int ep = 0; ep < n_episodes; ++ep) {
            Trajectory traj = rollout(env, best->genotype,
                                      mix_seed(mix_seed(seed, static_cast<std::uint64_t>(g)),
                                               static_cast<std::uint64_t>(ep)));
            bds.push_back(traj.bd);
            dsum += euclidean(traj.bd, goal);
            fsum += traj.fitness;
        }
        row.mean_distance = dsum / n_episodes;
        row.mean_fitness = fsum / n_episodes;
        row.achieved_spread = n_episodes >= 2 ? spread(bds) : 0.0;
        dist_sum += row.mean_distance;
        spread_sum += row.achieved_spread;
        max_fit = std::max(max_fit, row.mean_fitness);
    }
    out.overall_mean_distance = dist_sum / goals.n_cells;
    out.mean_spread = spread_sum / goals.n_cells;
    out.max_mean_fitness = max_fit;
    return out;
}

GridSummary summarize_grid(const qdt::GridEvalResult& r) {
    GridSummary out;
    out.rows.reserve(r.per_goal.size());
    double spread_sum = 0.0;
    for (const auto& pg : r.per_goal) {
        out.rows.push_back({pg.goal, pg.mean_distance, pg.mean_fitness, pg.achieved_spread});
        spread_sum += pg.achieved_spread;
    }
    out.overall_mean_distance = r.overall_mean_distance;
    out.mean_spread = r.per_goal.empty() ? 0.0 : spread_sum / r.per_goal.size();
    out.max_mean_fitness = r.max_mean_fitness;
    return out;
}

std::string grid_summary_csv(const GridSummary& s) {
    std::ostringstream out;
    out.precision(17);
    out << "goal_x,goal_y,mean_distance,mean_fitness,spread\n";
    for (const auto& row : s.rows)
        out << row.goal[0] << ',' << (row.goal.size() > 1 ? row.goal[1] : 0.0) << ','
            << row.mean_distance << ',' << row.mean_fitness << ',' << row.achieved_spread << '\n';
    return out.str();
}

void write_distance_heatmap(const fs::path& path, const GridSummary& s, const BdSpace& space,
                            const std::string& title) {
    std::vector<HeatmapPoint> pts;
    pts.reserve(s.rows.size());
    for (const auto& row : s.rows)
        pts.push_back({row.goal[0], row.goal.size() > 1 ? row.goal[1] : 0.0, row.mean_distance});
    HeatmapStyle style;
    style.title = title;
    write_text(path, heatmap_svg(pts, space, style));
}

void write_density_map(const fs::path& path, const TrajectoryDataset& ds, const BdSpace& space,
                       const std::string& title, int grid_n = 16) {
    std::vector<double> counts(static_cast<std::size_t>(grid_n) * grid_n, 0.0);
    auto bucket = [&](double v, int axis) {
        const double lo = space.lower[axis], hi = space.upper[axis];
        int b = static_cast<int>((v - lo) / (hi - lo) * grid_n);
        return std::clamp(b, 0, grid_n - 1);
    };
    for (const auto& rec : ds.records)
        counts[static_cast<std::size_t>(bucket(rec.achieved_bd[0], 0)) * grid_n +
               bucket(rec.achieved_bd.size() > 1 ? rec.achieved_bd[1] : space.lower[1], 1)] += 1.0;
    std::vector<HeatmapPoint> pts;
    for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j) {
            const double x =
                space.lower[0] + (i + 0.5) / grid_n * (space.upper[0] - space.lower[0]);
            const double y =
                space.lower[1] + (j + 0.5) / grid_n * (space.upper[1] - space.lower[1]);
            pts.push_back({x, y, counts[static_cast<std::size_t>(i) * grid_n + j]});
        }
    HeatmapStyle style;
    style.title = title;
    style.lighter_is_smaller = false;  // darker = denser
    style.cell_radius_px = 12.0;
    write_text(path, heatmap_svg(pts, space, style));
}

}  // namespace

TrajectoryDataset make_dataset(const Repertoire& rep, const EnvSpec& env,
                               const ExperimentConfig& cfg, std::uint64_t seed) {
    auto selected = select_zone_policies(rep, env, cfg.n_zones, cfg.n_probe_eps,
                                         mix_seed(seed, hash_tag("select")));
    return generate_dataset(selected, env, cfg.dataset_size, mix_seed(seed, hash_tag("gen")));
}

TrainedQdt train_and_eval_qdt(const TrajectoryDataset& ds, const EnvSpec& env,
                              const Centroids& goals, const ExperimentConfig& cfg,
                              std::uint64_t seed) {
    qdt::QdtModel model(cfg.qdt, ds.obs_dim, ds.act_dim, ds.bd_dim,
                        mix_seed(seed, hash_tag("model")));
    const Centroids eval_goals =
        build_cvt(env.bd_space, cfg.eval_goal_subsample, mix_seed(seed, hash_tag("eval-goals")));
    auto eval_fn = [&](const qdt::QdtModel& m) {
        auto r = qdt::evaluate_grid(m, env, eval_goals, cfg.eval_episodes,
                                    mix_seed(seed, hash_tag("eval-mid")));
        return std::make_pair(r.overall_mean_distance, r.max_mean_fitness);
    };
    qdt::TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.eval_every = cfg.eval_every;
    opts.seed = mix_seed(seed, hash_tag("train"));
    auto curve = qdt::train(model, ds, opts, eval_fn);
    auto final_eval = qdt::evaluate_grid(model, env, goals, cfg.n_episodes_per_goal,
                                         mix_seed(seed, hash_tag("eval-final")));
    return {std::move(model), std::move(curve), std::move(final_eval)};
}

// ---- accuracy ------------------------------------------------------------

const MethodAccuracy& AccuracyReport::method(const std::string& name) const {
    for (const auto& m : methods)
        if (m.method == name) return m;
    throw std::out_of_range("accuracy report: unknown method " + name);
}

AccuracyReport run_accuracy(const ExperimentConfig& cfg) {
    cfg.validate();
    const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len);
    const Centroids goals = build_goal_set(env, cfg.n_goals, cfg.seeds.front());
    const fs::path dir(cfg.run_dir);

    const std::vector<std::string> method_names = {"ME",      "ME-LS",      "ME-Sampling",
                                                   "QDT(ME)", "QDT(ME-LS)", "QDT(Naive)"};
    AccuracyReport report;
    for (const auto& name : method_names) {
        MethodAccuracy ma;
        ma.method = name;
        report.methods.push_back(ma);
    }

    std::ostringstream rows_csv;
    rows_csv.precision(17);
    rows_csv << "method,seed,overall_mean_distance,mean_spread\n";

    for (std::uint64_t seed : cfg.seeds) {
        auto me = run_evolution(arm_evolution_config(cfg, "me", seed));
        auto mels = run_evolution(arm_evolution_config(cfg, "me-ls", seed));
        auto mesa = run_evolution(arm_evolution_config(cfg, "me-sampling", seed));

        auto ds_me = make_dataset(me.repertoire, env, cfg, mix_seed(seed, hash_tag("ds-me")));
        auto ds_mels =
            make_dataset(mels.repertoire, env, cfg, mix_seed(seed, hash_tag("ds-mels")));
        auto ds_naive = generate_dataset_naive(mels.repertoire, env, cfg.dataset_size,
                                               mix_seed(seed, hash_tag("ds-naive")));

        std::map<std::string, GridSummary> per_method;
        const std::uint64_t eval_seed = mix_seed(seed, hash_tag("rep-eval"));
        per_method["ME"] = evaluate_repertoire_on_goals(me.repertoire, env, goals,
                                                        cfg.n_episodes_per_goal, eval_seed);
        per_method["ME-LS"] = evaluate_repertoire_on_goals(mels.repertoire, env, goals,
                                                           cfg.n_episodes_per_goal, eval_seed);
        per_method["ME-Sampling"] = evaluate_repertoire_on_goals(
            mesa.repertoire, env, goals, cfg.n_episodes_per_goal, eval_seed);
        per_method["QDT(ME)"] =
            summarize_grid(train_and_eval_qdt(ds_me, env, goals, cfg,
                                              mix_seed(seed, hash_tag("qdt-me")))
                               .final_eval);
        per_method["QDT(ME-LS)"] =
            summarize_grid(train_and_eval_qdt(ds_mels, env, goals, cfg,
                                              mix_seed(seed, hash_tag("qdt-mels")))
                               .final_eval);
        per_method["QDT(Naive)"] =
            summarize_grid(train_and_eval_qdt(ds_naive, env, goals, cfg,
                                              mix_seed(seed, hash_tag("qdt-naive")))
                               .final_eval);

        for (auto& m : report.methods) {
            const GridSummary& s = per_method.at(m.method);
            m.per_seed_distance.push_back(s.overall_mean_distance);
            m.per_seed_spread.push_back(s.mean_spread);
            rows_csv << m.method << ',' << seed << ',' << s.overall_mean_distance << ','
                     << s.mean_spread << '\n';
            if (seed == cfg.seeds.front()) {
                std::string slug = m.method;
                for (char& c : slug)
                    if (c == '(' || c == ')') c = '_';
                write_text(dir / ("accuracy_" + slug + ".csv"), grid_summary_csv(s));
                write_distance_heatmap(dir / ("accuracy_" + slug + ".svg"), s, env.bd_space,
                                       m.method + " mean distance");
            }
        }
    }

    std::ostringstream summary_csv;
    summary_csv.precision(17);
    summary_csv << "method,mean_distance,std_distance,mean_spread,std_spread\n";
    for (auto& m : report.methods) {
        m.mean_distance = mean_of(m.per_seed_distance);
        m.std_distance = std_of(m.per_seed_distance);
        m.mean_spread = mean_of(m.per_seed_spread);
        m.std_spread = std_of(m.per_seed_spread);
        summary_csv << m.method << ',' << m.mean_distance << ',' << m.std_distance << ','
                    << m.mean_spread << ',' << m.std_spread << '\n';
    }
    write_text(dir / "accuracy_per_seed.csv", rows_csv.str());
    write_text(dir / "accuracy_summary.csv", summary_csv.str());
    return report;
}

// ---- generalization --------------------------------------------------------

const GeneralizationArm& GeneralizationReport::arm(const std::string& name) const {
    for (const auto& a : arms)
        if (a.name == name) return a;
    throw std::out_of_range("generalization report: unknown arm " + name);
}

GeneralizationReport run_generalization(const ExperimentConfig& cfg) {
    cfg.validate();
    const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len);
    const std::uint64_t seed = cfg.seeds.front();
    const Centroids goals = build_goal_set(env, cfg.n_goals, seed);
    const fs::path dir(cfg.run_dir);

    auto mels = run_evolution(arm_evolution_config(cfg, "me-ls", seed));
    TrajectoryDataset full = make_dataset(mels.repertoire, env, cfg, mix_seed(seed, hash_tag("ds")));

    const double mid_y = 0.5 * (env.bd_space.lower[1] + env.bd_space.upper[1]);
    const int removed_axis = 1;
    std::vector<std::pair<std::string, TrajectoryDataset>> arms;
    arms.emplace_back("full", full);
    arms.emplace_back("density_0.5",
                      prune_dataset(full, PruneDensity{0.5, mix_seed(seed, hash_tag("p5"))}));
    arms.emplace_back("density_0.3",
                      prune_dataset(full, PruneDensity{0.3, mix_seed(seed, hash_tag("p3"))}));
    arms.emplace_back("density_0.1",
                      prune_dataset(full, PruneDensity{0.1, mix_seed(seed, hash_tag("p1"))}));
    arms.emplace_back("tiles", prune_dataset(full, PruneTiles{4, 0, env.bd_space}));
    arms.emplace_back("upper_part", prune_dataset(full, PruneUpperPart{removed_axis, mid_y}));

    auto region_split = [&](const GridSummary& s, double& removed, double& retained) {
        double rs = 0.0, ts = 0.0;
        int rn = 0, tn = 0;
        for (const auto& row : s.rows) {
            if (row.goal[removed_axis] > mid_y) {
                rs += row.mean_distance;
                ++rn;
            } else {
                ts += row.mean_distance;
                ++tn;
            }
        }
        removed = rn ? rs / rn : 0.0;
        retained = tn ? ts / tn : 0.0;
    };

    GeneralizationReport report;
    std::ostringstream csv;
    csv.precision(17);
    csv << "arm,dataset_size,overall_mean_distance,removed_region_distance,"
           "retained_region_distance\n";
    for (const auto& [name, ds] : arms) {
        write_density_map(dir / ("dataset_" + name + ".svg"), ds, env.bd_space,
                          "dataset density: " + name);
        auto trained = train_and_eval_qdt(ds, env, goals, cfg, mix_seed(seed, hash_tag("qdt")));
        GridSummary s = summarize_grid(trained.final_eval);
        GeneralizationArm arm;
        arm.name = name;
        arm.dataset_size = ds.records.size();
        arm.overall_mean_distance = s.overall_mean_distance;
        region_split(s, arm.removed_region_distance, arm.retained_region_distance);
        report.arms.push_back(arm);
        write_text(dir / ("distance_" + name + ".csv"), grid_summary_csv(s));
        write_distance_heatmap(dir / ("distance_" + name + ".svg"), s, env.bd_space,
                               "mean distance: " + name);
        csv << name << ',' << arm.dataset_size << ',' << arm.overall_mean_distance << ','
            << arm.removed_region_distance << ',' << arm.retained_region_distance << '\n';
    }
    write_text(dir / "generalization_summary.csv", csv.str());
    return report;
}

// ---- reassessment ----------------------------------------------------------

ReassessmentReport run_reassessment(const ExperimentConfig& cfg) {
    cfg.validate();
    const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len);
    const fs::path dir(cfg.run_dir);

    ReassessmentReport report;
    std::ostringstream csv;
    csv.precision(17);
    csv << "method,seed,initial_coverage,initial_max_fitness,initial_qd_score,"
           "recalc_coverage,recalc_max_fitness,recalc_qd_score\n";
    for (std::uint64_t seed : cfg.seeds) {
        for (const std::string variant : {"me", "me-ls"}) {
            auto evo = run_evolution(arm_evolution_config(cfg, variant, seed));
            auto rr = reassess(evo.repertoire, env, cfg.evolution.episodes_per_eval,
                               mix_seed(seed, hash_tag("reassess")), cfg.evolution.fitness_offset);
            ReassessmentRow row;
            row.method = variant;
            row.seed = seed;
            row.initial = rr.initial;
            row.recalculated = rr.recalculated;
            report.rows.push_back(row);
            csv << variant << ',' << seed << ',' << rr.initial.coverage << ','
                << rr.initial.max_fitness << ',' << rr.initial.qd_score << ','
                << rr.recalculated.coverage << ',' << rr.recalculated.max_fitness << ','
                << rr.recalculated.qd_score << '\n';
        }
    }
    write_text(dir / "reassessment.csv", csv.str());
    return report;
}

// ---- training curves ---------------------------------------------------------

const TrainingCurve& TrainingCurvesReport::curve(const std::string& variant) const {
    for (const auto& c : curves)
        if (c.variant == variant) return c;
    throw std::out_of_range("training-curves report: unknown variant " + variant);
}

TrainingCurvesReport run_training_curves(const ExperimentConfig& cfg) {
    cfg.validate();
    const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len);
    const Centroids goals = build_goal_set(env, cfg.n_goals, cfg.seeds.front());
    const fs::path dir(cfg.run_dir);

    TrainingCurvesReport report;
    std::ostringstream csv;
    csv.precision(17);
    csv << "variant,seed,epoch,train_loss,eval_mean_distance\n";
    std::vector<LineSeries> chart;
    const std::vector<std::pair<std::string, std::string>> palette = {
        {"me", "#c23b22"}, {"me-ls", "#1f6fb2"}, {"naive", "#6a9a3b"}};

    for (const auto& [variant, color] : palette) {
        // per eval-phase epoch -> distances over seeds
        std::map<int, std::vector<double>> by_epoch;
        for (std::uint64_t seed : cfg.seeds) {
            auto mels = run_evolution(arm_evolution_config(
                cfg, variant == "naive" ? "me-ls" : variant, seed));
            TrajectoryDataset ds =
                variant == "naive"
                    ? generate_dataset_naive(mels.repertoire, env, cfg.dataset_size,
                                             mix_seed(seed, hash_tag("ds-naive")))
                    : make_dataset(mels.repertoire, env, cfg, mix_seed(seed, hash_tag("ds")));
            auto trained = train_and_eval_qdt(ds, env, goals, cfg,
                                              mix_seed(seed, hash_tag(("qdt-" + variant).c_str())));
            for (const auto& pt : trained.curve) {
                csv << variant << ',' << seed << ',' << pt.epoch << ',' << pt.train_loss << ','
                    << pt.eval_mean_distance << '\n';
                if (!std::isnan(pt.eval_mean_distance))
                    by_epoch[pt.epoch].push_back(pt.eval_mean_distance);
            }
        }
        TrainingCurve curve;
        curve.variant = variant;
        LineSeries series;
        series.label = "QDT(" + variant + ")";
        series.color = color;
        for (const auto& [epoch, dists] : by_epoch) {
            curve.epochs.push_back(epoch);
            curve.mean_distance.push_back(mean_of(dists));
            curve.std_distance.push_back(std_of(dists));
            series.x.push_back(epoch);
            series.y.push_back(mean_of(dists));
            series.y_err.push_back(std_of(dists));
        }
        curve.final_mean_distance = curve.mean_distance.empty() ? 0.0 : curve.mean_distance.back();
        report.curves.push_back(curve);
        chart.push_back(series);
    }

    std::ostringstream summary;
    summary.precision(17);
    summary << "variant,epoch,mean_distance,std_distance\n";
    for (const auto& c : report.curves)
        for (std::size_t i = 0; i < c.epochs.size(); ++i)
            summary << c.variant << ',' << c.epochs[i] << ',' << c.mean_distance[i] << ','
                    << c.std_distance[i] << '\n';
    write_text(dir / "training_curves_per_seed.csv", csv.str());
    write_text(dir / "training_curves_summary.csv", summary.str());
    LineChartStyle style;
    style.title = "evaluation distance during training";
    style.x_label = "epoch";
    style.y_label = "overall mean distance";
    write_text(dir / "training_curves.svg", line_chart_svg(chart, style));
    return report;
}

// ---- fitness eval ------------------------------------------------------------

FitnessEvalReport run_fitness_eval(const ExperimentConfig& cfg) {
    cfg.validate();
    const EnvSpec env = make_env(cfg.env, cfg.evolution.episode_len);
    const std::uint64_t seed = cfg.seeds.front();
    const Centroids goals = build_goal_set(env, cfg.n_goals, seed);
    const fs::path dir(cfg.run_dir);

    auto mels = run_evolution(arm_evolution_config(cfg, "me-ls", seed));
    auto rr = reassess(mels.repertoire, env, cfg.evolution.episodes_per_eval,
                       mix_seed(seed, hash_tag("reassess")), cfg.evolution.fitness_offset);
    TrajectoryDataset ds = make_dataset(mels.repertoire, env, cfg, mix_seed(seed, hash_tag("ds")));
    auto trained = train_and_eval_qdt(ds, env, goals, cfg, mix_seed(seed, hash_tag("qdt")));

    FitnessEvalReport report;
    std::ostringstream csv;
    csv.precision(17);
    csv << "epoch,eval_max_fitness\n";
    for (const auto& pt : trained.curve) {
        if (std::isnan(pt.eval_max_fitness)) continue;
        report.epochs.push_back(pt.epoch);
        report.max_fitness.push_back(pt.eval_max_fitness);
        csv << pt.epoch << ',' << pt.eval_max_fitness << '\n';
    }
    report.repertoire_recalc_max_fitness = rr.recalculated.max_fitness;
    report.final_max_fitness = trained.final_eval.max_mean_fitness;
    csv << "final," << report.final_max_fitness << '\n';
    csv << "repertoire_recalc," << report.repertoire_recalc_max_fitness << '\n';
    write_text(dir / "fitness_eval.csv", csv.str());
    write_text(dir / "fitness_grid.csv", qdt::grid_eval_csv(trained.final_eval));
    return report;
}

void run_experiment(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "accuracy")
        run_accuracy(cfg);
    else if (name == "generalization")
        run_generalization(cfg);
    else if (name == "reassessment")
        run_reassessment(cfg);
    else if (name == "training-curves")
        run_training_curves(cfg);
    else if (name == "fitness-eval")
        run_fitness_eval(cfg);
    else
        throw std::invalid_argument("unknown experiment: " + name);
}

}  // namespace qdlab
