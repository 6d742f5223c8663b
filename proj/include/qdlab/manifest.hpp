#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qdlab {

// FNV-1a 64-bit hash of a file's bytes; throws on I/O failure.
std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t len);
std::string hash_hex(std::uint64_t h);

// Machine-readable record of one pipeline stage: what went in, what came
// out, the resolved config, and how long it took.
struct RunManifest {
    std::string command;
    std::string version;      // build version string
    std::string config_hash;  // hex FNV-1a of the resolved config text
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::vector<std::string> inputs;   // paths; hashed at write time
    std::vector<std::string> outputs;  // paths; hashed at write time
};

// Writes JSON {command, version, config_hash, seed, wall_seconds,
// inputs: [{path, fnv1a}], outputs: [{path, fnv1a}]}.
void save_manifest(const RunManifest& m, const std::string& path);

// Version string baked into artifacts for provenance.
std::string qdlab_version();

}  // namespace qdlab
