#include "qdlab/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qdlab {

std::uint64_t fnv1a_bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a_file: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

void save_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["command"] = m.command;
    j["version"] = m.version.empty() ? qdlab_version() : m.version;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["wall_seconds"] = m.wall_seconds;
    auto dump_paths = [](const std::vector<std::string>& paths) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : paths)
            arr.push_back({{"path", p}, {"fnv1a", hash_hex(fnv1a_file(p))}});
        return arr;
    };
    j["inputs"] = dump_paths(m.inputs);
    j["outputs"] = dump_paths(m.outputs);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_manifest: cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string qdlab_version() { return "qdlab-0.1.0"; }

}  // namespace qdlab
