#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "qdlab/geometry.hpp"
#include "qdlab/policy.hpp"

namespace qdlab {

struct CellRecord {
    Genotype genotype;
    double fitness = 0.0;
    BehaviorDescriptor bd;
    std::optional<double> spread;  // present iff evaluated over K >= 2 episodes
    int n_evals = 0;
};

struct Repertoire {
    Centroids centroids;
    std::map<int, CellRecord> cells;
    std::string env;
    std::string algo;  // "me" | "me-ls" | "me-sampling"
    std::uint64_t rng_seed = 0;
    std::string centroids_ref;  // path recorded at save time

    double coverage() const {
        return static_cast<double>(cells.size()) / centroids.n_cells;
    }
    double max_fitness() const;
};

// Replacement on strictly higher fitness; empty cells always accept.
bool me_insert(Repertoire& rep, const CellRecord& candidate);

// Replacement requires strictly higher fitness AND strictly lower spread.
// Candidates without a spread are rejected with an exception.
bool me_ls_insert(Repertoire& rep, const CellRecord& candidate);

// Fitness-only criterion on (mean fitness, geometric-median BD); the BD is
// computed by the caller, so the rule itself is me_insert's.
bool me_sampling_insert(Repertoire& rep, const CellRecord& candidate);

// Sum of (fitness + offset) over occupied cells.
double qd_score(const Repertoire& rep, double fitness_offset);

std::string repertoire_to_json(const Repertoire& rep);
void save_repertoire(Repertoire& rep, const std::string& path,
                     const std::string& centroids_ref);
// centroids_ref in the file is resolved relative to the repertoire's directory
// unless absolute.
Repertoire load_repertoire(const std::string& path);

std::string base64_encode(const unsigned char* data, std::size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace qdlab
