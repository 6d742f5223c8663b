#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qdlab/env.hpp"
#include "qdlab/repertoire.hpp"

namespace qdlab {

/// One stored trajectory. All tensors f32, row-major, shapes fixed by the
/// dataset header.
struct TrajectoryRecord {
    std::uint64_t seed = 0;
    float fitness = 0.0f;
    std::vector<float> achieved_bd;      // [bd_dim]
    std::vector<float> conditioning_bd;  // [bd_dim]; equals achieved_bd at generation time
    std::vector<float> observations;     // [T x obs_dim]
    std::vector<float> actions;          // [T x act_dim]
};

struct TrajectoryDataset {
    std::string env_name;
    int obs_dim = 0;
    int act_dim = 0;
    int episode_len = 0;
    int bd_dim = 0;
    std::vector<TrajectoryRecord> records;
};

// "QDT1" binary format: magic, LE u32 {version=1, obs_dim, act_dim, T,
// bd_dim, n_trajectories}, length-prefixed env name, fixed-size records.
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

struct ZoneSelection {
    int zone_index = 0;
    int cell_index = 0;  // repertoire cell the policy came from
    Genotype genotype;
};

// Coarse CVT of n_zones over the BD space; per zone, the candidate elite
// whose probe episodes most often land in the zone wins (ties: higher
// stored fitness, then lower cell index). Empty zones are skipped.
std::vector<ZoneSelection> select_zone_policies(const Repertoire& rep, const EnvSpec& env,
                                                int n_zones, int n_probe_eps,
                                                std::uint64_t seed);

// Trajectories allocated round-robin across the selected policies;
// conditioning_bd = achieved_bd. Deterministic per seed.
TrajectoryDataset generate_dataset(const std::vector<ZoneSelection>& selected, const EnvSpec& env,
                                   int n_traj_total, std::uint64_t seed);

// Naive variant: every repertoire elite contributes, no zone selection.
TrajectoryDataset generate_dataset_naive(const Repertoire& rep, const EnvSpec& env,
                                         int n_traj_total, std::uint64_t seed);

struct PruneDensity {
    double p = 0.5;
    std::uint64_t seed = 0;
};
struct PruneTiles {
    int grid_n = 4;
    int keep_parity = 0;  // 0 or 1, checkerboard
    BdSpace space;
};
struct PruneUpperPart {
    int axis = 1;
    double threshold = 0.0;  // drop records with achieved_bd[axis] > threshold
};
using PruneScheme = std::variant<PruneDensity, PruneTiles, PruneUpperPart>;

TrajectoryDataset prune_dataset(const TrajectoryDataset& ds, const PruneScheme& scheme);

// Header plus a BD density histogram over a grid, as CSV text.
std::string inspect_dataset(const TrajectoryDataset& ds, const BdSpace& space, int grid_n = 8);

}  // namespace qdlab
