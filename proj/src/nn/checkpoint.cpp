#include "qdlab/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace qdlab::nn {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
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

}  // namespace

void save_checkpoint(const NamedParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("QDTW", 4);
    write_u32(out, 1);  // version
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, t] : params) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
        for (int d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
        write_u64(out, offset);
        offset += t.node().numel() * sizeof(float);
    }
    for (const auto& [name, t] : params)
        out.write(reinterpret_cast<const char*>(t.value().data()),
                  static_cast<std::streamsize>(t.node().numel() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

void load_checkpoint(const NamedParams& params, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "QDTW", 4) != 0)
        throw std::runtime_error("not a QDTW checkpoint: " + path);
    if (read_u32(in) != 1) throw std::runtime_error("unsupported QDTW version");
    const std::uint32_t count = read_u32(in);

    struct Entry {
        std::vector<int> shape;
        std::uint64_t offset;
    };
    std::map<std::string, Entry> manifest;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint32_t ndims = read_u32(in);
        Entry e;
        e.shape.resize(ndims);
        for (auto& d : e.shape) d = static_cast<int>(read_u32(in));
        e.offset = read_u64(in);
        manifest[name] = std::move(e);
    }
    const std::streampos data_start = in.tellg();
    for (const auto& [name, t] : params) {
        auto it = manifest.find(name);
        if (it == manifest.end())
            throw std::runtime_error("checkpoint is missing parameter '" + name + "'");
        if (it->second.shape != t.shape())
            throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
        in.seekg(data_start + static_cast<std::streamoff>(it->second.offset));
        Tensor handle = t;
        in.read(reinterpret_cast<char*>(handle.value().data()),
                static_cast<std::streamsize>(handle.node().numel() * sizeof(float)));
    }
    if (!in) throw std::runtime_error("truncated checkpoint file: " + path);
}

}  // namespace qdlab::nn
