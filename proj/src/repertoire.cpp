#include "qdlab/repertoire.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qdlab {

double Repertoire::max_fitness() const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [idx, rec] : cells) best = std::max(best, rec.fitness);
    return best;
}

bool me_insert(Repertoire& rep, const CellRecord& candidate) {
    int cell = nearest_cell(rep.centroids, candidate.bd);
    auto it = rep.cells.find(cell);
    if (it == rep.cells.end() || candidate.fitness > it->second.fitness) {
        rep.cells[cell] = candidate;
        return true;
    }
    return false;
}

bool me_ls_insert(Repertoire& rep, const CellRecord& candidate) {
    if (!candidate.spread.has_value())
        throw std::invalid_argument("me_ls_insert: candidate has no spread");
    int cell = nearest_cell(rep.centroids, candidate.bd);
    auto it = rep.cells.find(cell);
    if (it == rep.cells.end()) {
        rep.cells[cell] = candidate;
        return true;
    }
    const CellRecord& inc = it->second;
    if (candidate.fitness > inc.fitness && inc.spread.has_value() &&
        *candidate.spread < *inc.spread) {
        rep.cells[cell] = candidate;
        return true;
    }
    return false;
}

bool me_sampling_insert(Repertoire& rep, const CellRecord& candidate) {
    return me_insert(rep, candidate);
}

double qd_score(const Repertoire& rep, double fitness_offset) {
    double total = 0.0;
    for (const auto& [idx, rec] : rep.cells) total += rec.fitness + fitness_offset;
    return total;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        unsigned int v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw std::invalid_argument("base64_decode: invalid character");
    };
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i + 3 < text.size(); i += 4) {
        int a = val(text[i]), b = val(text[i + 1]), c = val(text[i + 2]), d = val(text[i + 3]);
        unsigned int v = (a << 18) | (b << 12) | (c >= 0 ? c << 6 : 0) | (d >= 0 ? d : 0);
        out.push_back((v >> 16) & 0xff);
        if (c >= 0) out.push_back((v >> 8) & 0xff);
        if (d >= 0) out.push_back(v & 0xff);
    }
    return out;
}

namespace {

// Params travel as base64 little-endian f32. Host is little-endian x86;
// asserted at build time.
static_assert(std::endian::native == std::endian::little);

std::string encode_params(const std::vector<float>& p) {
    return base64_encode(reinterpret_cast<const unsigned char*>(p.data()),
                         p.size() * sizeof(float));
}

std::vector<float> decode_params(const std::string& text) {
    auto bytes = base64_decode(text);
    if (bytes.size() % sizeof(float) != 0)
        throw std::runtime_error("repertoire: params blob is not a whole number of f32");
    std::vector<float> out(bytes.size() / sizeof(float));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace

std::string repertoire_to_json(const Repertoire& rep) {
    nlohmann::json j;
    j["env"] = rep.env;
    j["algo"] = rep.algo;
    j["centroids_ref"] = rep.centroids_ref;
    j["rng_seed"] = rep.rng_seed;
    nlohmann::json arch;
    // all cells share one architecture; record it once
    if (!rep.cells.empty()) {
        const MlpArch& a = rep.cells.begin()->second.genotype.arch;
        arch = {{"obs_dim", a.obs_dim}, {"hidden", a.hidden}, {"act_dim", a.act_dim}};
    }
    j["arch"] = arch;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [idx, rec] : rep.cells) {
        nlohmann::json c;
        c["cell_index"] = idx;
        c["fitness"] = rec.fitness;
        if (rec.spread) c["spread"] = *rec.spread;
        c["bd"] = rec.bd;
        c["n_evals"] = rec.n_evals;
        c["params"] = encode_params(rec.genotype.params);
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);
    return j.dump();
}

void save_repertoire(Repertoire& rep, const std::string& path,
                     const std::string& centroids_ref) {
    rep.centroids_ref = centroids_ref;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << repertoire_to_json(rep);
}

Repertoire load_repertoire(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open repertoire file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(ss.str());

    Repertoire rep;
    rep.env = j.at("env").get<std::string>();
    rep.algo = j.at("algo").get<std::string>();
    rep.centroids_ref = j.at("centroids_ref").get<std::string>();
    rep.rng_seed = j.at("rng_seed").get<std::uint64_t>();

    std::filesystem::path ref(rep.centroids_ref);
    if (ref.is_relative()) ref = std::filesystem::path(path).parent_path() / ref;
    rep.centroids = load_centroids(ref.string());

    MlpArch arch;
    if (!j.at("arch").is_null() && !j.at("arch").empty()) {
        arch.obs_dim = j["arch"].at("obs_dim").get<int>();
        arch.hidden = j["arch"].at("hidden").get<std::vector<int>>();
        arch.act_dim = j["arch"].at("act_dim").get<int>();
    }
    for (const auto& c : j.at("cells")) {
        CellRecord rec;
        rec.fitness = c.at("fitness").get<double>();
        if (c.contains("spread")) rec.spread = c.at("spread").get<double>();
        rec.bd = c.at("bd").get<std::vector<double>>();
        rec.n_evals = c.at("n_evals").get<int>();
        rec.genotype.arch = arch;
        rec.genotype.params = decode_params(c.at("params").get<std::string>());
        rep.cells[c.at("cell_index").get<int>()] = std::move(rec);
    }
    return rep;
}

}  // namespace qdlab
