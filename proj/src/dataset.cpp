#include "qdlab/dataset.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <omp.h>

#include "qdlab/rng.hpp"

namespace qdlab {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}
void write_f32(std::ostream& out, const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
void read_f32(std::istream& in, std::vector<float>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 4));
}

void check_record(const TrajectoryDataset& ds, const TrajectoryRecord& r) {
    const std::size_t T = ds.episode_len;
    if (r.achieved_bd.size() != static_cast<std::size_t>(ds.bd_dim) ||
        r.conditioning_bd.size() != static_cast<std::size_t>(ds.bd_dim) ||
        r.observations.size() != T * ds.obs_dim || r.actions.size() != T * ds.act_dim)
        throw std::runtime_error("dataset: record shapes do not match header");
}

}  // namespace

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("QDT1", 4);
    write_u32(out, 1);  // version
    write_u32(out, static_cast<std::uint32_t>(ds.obs_dim));
    write_u32(out, static_cast<std::uint32_t>(ds.act_dim));
    write_u32(out, static_cast<std::uint32_t>(ds.episode_len));
    write_u32(out, static_cast<std::uint32_t>(ds.bd_dim));
    write_u32(out, static_cast<std::uint32_t>(ds.records.size()));
    write_u32(out, static_cast<std::uint32_t>(ds.env_name.size()));
    out.write(ds.env_name.data(), static_cast<std::streamsize>(ds.env_name.size()));
    for (const auto& r : ds.records) {
        check_record(ds, r);
        write_u64(out, r.seed);
        out.write(reinterpret_cast<const char*>(&r.fitness), 4);
        write_f32(out, r.achieved_bd);
        write_f32(out, r.conditioning_bd);
        write_f32(out, r.observations);
        write_f32(out, r.actions);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

TrajectoryDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "QDT1", 4) != 0)
        throw std::runtime_error("not a QDT1 dataset: " + path);
    std::uint32_t version = read_u32(in);
    if (version != 1) throw std::runtime_error("unsupported QDT1 version");
    TrajectoryDataset ds;
    ds.obs_dim = static_cast<int>(read_u32(in));
    ds.act_dim = static_cast<int>(read_u32(in));
    ds.episode_len = static_cast<int>(read_u32(in));
    ds.bd_dim = static_cast<int>(read_u32(in));
    std::uint32_t n = read_u32(in);
    std::uint32_t name_len = read_u32(in);
    ds.env_name.resize(name_len);
    in.read(ds.env_name.data(), name_len);
    ds.records.resize(n);
    const std::size_t T = ds.episode_len;
    for (auto& r : ds.records) {
        r.seed = read_u64(in);
        in.read(reinterpret_cast<char*>(&r.fitness), 4);
        read_f32(in, r.achieved_bd, ds.bd_dim);
        read_f32(in, r.conditioning_bd, ds.bd_dim);
        read_f32(in, r.observations, T * ds.obs_dim);
        read_f32(in, r.actions, T * ds.act_dim);
    }
    if (!in) throw std::runtime_error("truncated dataset file: " + path);
    return ds;
}

std::vector<ZoneSelection> select_zone_policies(const Repertoire& rep, const EnvSpec& env,
                                                int n_zones, int n_probe_eps,
                                                std::uint64_t seed) {
    if (n_zones < 1) throw std::invalid_argument("select_zone_policies: n_zones must be >= 1");
    if (rep.cells.empty()) throw std::invalid_argument("select_zone_policies: repertoire is empty");

    Centroids zones = build_cvt(env.bd_space, n_zones, mix_seed(seed, hash_tag("zones")));

    struct Candidate {
        int cell_index;
        const CellRecord* rec;
        int hits = 0;
    };
    std::map<int, std::vector<Candidate>> per_zone;
    for (const auto& [idx, rec] : rep.cells)
        per_zone[nearest_cell(zones, rec.bd)].push_back({idx, &rec, 0});

    // probe episodes, counting landings in the candidate's own zone
    std::vector<std::pair<int, Candidate*>> flat;
    for (auto& [zone, cands] : per_zone)
        for (auto& c : cands) flat.emplace_back(zone, &c);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < flat.size(); ++i) {
        auto [zone, cand] = flat[i];
        std::uint64_t base = mix_seed(seed, mix_seed(hash_tag("probe"),
                                                     static_cast<std::uint64_t>(cand->cell_index)));
        int hits = 0;
        for (int e = 0; e < n_probe_eps; ++e) {
            Trajectory t = rollout(env, cand->rec->genotype, base + e);
            if (nearest_cell(zones, t.bd) == zone) ++hits;
        }
        cand->hits = hits;
    }

    std::vector<ZoneSelection> out;
    for (auto& [zone, cands] : per_zone) {
        const Candidate* best = &cands[0];
        for (const auto& c : cands) {
            if (c.hits > best->hits ||
                (c.hits == best->hits && (c.rec->fitness > best->rec->fitness ||
                                          (c.rec->fitness == best->rec->fitness &&
                                           c.cell_index < best->cell_index))))
                best = &c;
        }
        out.push_back({zone, best->cell_index, best->rec->genotype});
    }
    return out;
}

namespace {

TrajectoryDataset generate_from_policies(const std::vector<const Genotype*>& policies,
                                         const EnvSpec& env, int n_traj_total,
                                         std::uint64_t seed) {
    if (policies.empty()) throw std::invalid_argument("generate_dataset: no policies selected");
    TrajectoryDataset ds;
    ds.env_name = env.name;
    ds.obs_dim = env.obs_dim;
    ds.act_dim = env.act_dim;
    ds.episode_len = env.episode_len;
    ds.bd_dim = env.bd_space.dim;
    ds.records.resize(n_traj_total);

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_traj_total; ++i) {
        const Genotype& g = *policies[i % policies.size()];
        std::uint64_t ep_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        Trajectory t = rollout(env, g, ep_seed);
        TrajectoryRecord& r = ds.records[i];
        r.seed = ep_seed;
        r.fitness = static_cast<float>(t.fitness);
        r.achieved_bd.assign(t.bd.begin(), t.bd.end());
        r.conditioning_bd = r.achieved_bd;
        r.observations.assign(t.observations.begin(), t.observations.end());
        r.actions.assign(t.actions.begin(), t.actions.end());
    }
    return ds;
}

}  // namespace

TrajectoryDataset generate_dataset(const std::vector<ZoneSelection>& selected, const EnvSpec& env,
                                   int n_traj_total, std::uint64_t seed) {
    std::vector<const Genotype*> policies;
    policies.reserve(selected.size());
    for (const auto& s : selected) policies.push_back(&s.genotype);
    return generate_from_policies(policies, env, n_traj_total, seed);
}

TrajectoryDataset generate_dataset_naive(const Repertoire& rep, const EnvSpec& env,
                                         int n_traj_total, std::uint64_t seed) {
    std::vector<const Genotype*> policies;
    policies.reserve(rep.cells.size());
    for (const auto& [idx, rec] : rep.cells) policies.push_back(&rec.genotype);
    return generate_from_policies(policies, env, n_traj_total, seed);
}

TrajectoryDataset prune_dataset(const TrajectoryDataset& ds, const PruneScheme& scheme) {
    TrajectoryDataset out = ds;
    out.records.clear();
    if (const auto* d = std::get_if<PruneDensity>(&scheme)) {
        Rng rng(d->seed);
        for (const auto& r : ds.records)
            if (rng.uniform() < d->p) out.records.push_back(r);
    } else if (const auto* t = std::get_if<PruneTiles>(&scheme)) {
        if (t->space.dim < 2) throw std::invalid_argument("prune tiles: needs a 2-D BD space");
        for (const auto& r : ds.records) {
            int ix = 0, iy = 0;
            auto tile = [&](int axis, double v) {
                double lo = t->space.lower[axis], hi = t->space.upper[axis];
                int i = static_cast<int>((v - lo) / (hi - lo) * t->grid_n);
                return std::clamp(i, 0, t->grid_n - 1);
            };
            ix = tile(0, r.achieved_bd[0]);
            iy = tile(1, r.achieved_bd[1]);
            if ((ix + iy) % 2 == t->keep_parity) out.records.push_back(r);
        }
    } else if (const auto* u = std::get_if<PruneUpperPart>(&scheme)) {
        for (const auto& r : ds.records)
            if (!(r.achieved_bd[u->axis] > u->threshold)) out.records.push_back(r);
    } else {
        throw std::invalid_argument("prune_dataset: unknown scheme");
    }
    return out;
}

std::string inspect_dataset(const TrajectoryDataset& ds, const BdSpace& space, int grid_n) {
    std::ostringstream out;
    out << "key,value\n";
    out << "env," << ds.env_name << '\n';
    out << "obs_dim," << ds.obs_dim << '\n';
    out << "act_dim," << ds.act_dim << '\n';
    out << "episode_len," << ds.episode_len << '\n';
    out << "bd_dim," << ds.bd_dim << '\n';
    out << "n_trajectories," << ds.records.size() << '\n';
    out << "\nbin_x,bin_y,count\n";
    std::vector<int> hist(static_cast<std::size_t>(grid_n) * grid_n, 0);
    for (const auto& r : ds.records) {
        auto bin = [&](int axis, double v) {
            double lo = space.lower[axis], hi = space.upper[axis];
            int i = static_cast<int>((v - lo) / (hi - lo) * grid_n);
            return std::clamp(i, 0, grid_n - 1);
        };
        hist[static_cast<std::size_t>(bin(0, r.achieved_bd[0])) * grid_n +
             bin(1, r.achieved_bd[std::min(1, ds.bd_dim - 1)])]++;
    }
    for (int x = 0; x < grid_n; ++x)
        for (int y = 0; y < grid_n; ++y)
            out << x << ',' << y << ',' << hist[static_cast<std::size_t>(x) * grid_n + y] << '\n';
    return out.str();
}

}  // namespace qdlab
