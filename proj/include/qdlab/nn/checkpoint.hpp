#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qdlab/nn/tensor.hpp"

namespace qdlab::nn {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// "QDTW" checkpoint: magic, version u32, manifest of (name, shape, offset),
// then raw f32 LE buffers. Writing the same parameters twice produces
// byte-identical files.
void save_checkpoint(const NamedParams& params, const std::string& path);

// Loads values into the given parameters; every name must be present with
// a matching shape.
void load_checkpoint(const NamedParams& params, const std::string& path);

}  // namespace qdlab::nn
