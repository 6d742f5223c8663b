#pragma once

#include <cstdint>
#include <string>

#include "qdlab/nn/checkpoint.hpp"
#include "qdlab/nn/tensor.hpp"

namespace qdlab::qdt {

struct QdtConfig {
    int n_layers = 2;
    int n_heads = 4;
    int emb_dim = 64;
    float dropout = 0.1f;
    float lr = 7e-4f;
    int batch_size = 32;
    int max_T = 100;
};

/// Behavior-conditioned causal transformer. Input sequences interleave
/// (BD, O_t, A_t) token triples; the head is read at observation-token
/// positions and predicts A_t.
class QdtModel {
public:
    QdtModel(QdtConfig cfg, int obs_dim, int act_dim, int bd_dim, std::uint64_t init_seed);

    // Predictions at observation-token positions: [n_obs x act_dim].
    // n_act must be n_obs (training) or n_obs - 1 (autoregressive step).
    // dropout_rng must be non-null when train_mode is set.
    nn::Tensor forward(const std::vector<float>& conditioning_bd, const float* obs, int n_obs,
                       const float* act, int n_act, bool train_mode = false,
                       Rng* dropout_rng = nullptr) const;

    nn::NamedParams named_params() const;
    std::vector<nn::Tensor> params() const;

    const QdtConfig& config() const { return cfg_; }
    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    int bd_dim() const { return bd_dim_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    QdtConfig cfg_;
    int obs_dim_, act_dim_, bd_dim_;

    struct Proj {
        nn::Tensor w, b, ln_g, ln_b;
    };
    struct Block {
        nn::Tensor ln1_g, ln1_b;
        nn::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        nn::Tensor ln2_g, ln2_b;
        nn::Tensor fc1_w, fc1_b, fc2_w, fc2_b;
    };

    Proj e_bd_, e_obs_, e_act_;
    nn::Tensor timestep_table_;  // [max_T x emb_dim]
    std::vector<Block> blocks_;
    nn::Tensor lnf_g_, lnf_b_;
    nn::Tensor head_w_, head_b_;

    nn::Tensor embed(const Proj& p, const nn::Tensor& raw) const;
    nn::Tensor attention(const Block& blk, const nn::Tensor& x, int L, bool train_mode,
                         Rng* rng) const;

    friend class QdtDecoder;
};

/// Graph-free autoregressive decoding with a per-layer key/value cache.
/// Computes the same floating-point operations in the same order as
/// QdtModel::forward in inference mode, so the step-t prediction matches
/// the full forward pass bit for bit at a fraction of the cost.
class QdtDecoder {
public:
    QdtDecoder(const QdtModel& model, std::vector<float> conditioning_bd);

    // Feeds (A_{t-1} if t > 0, BD, O_t) and returns the prediction at the
    // new observation-token position. prev_act is ignored at t = 0.
    std::vector<float> step(const float* obs, const float* prev_act);

    void reset();
    int timestep() const { return t_; }

private:
    // Runs one token through all blocks, appending its K/V to the caches.
    // x is the token's [emb_dim] embedding and is updated in place to the
    // final residual-stream value.
    void process_token(std::vector<float>& x);

    const QdtModel* m_;
    std::vector<float> bd_;
    std::vector<float> bd_emb_;  // modality embedding without the timestep term
    int t_ = 0;
    std::vector<std::vector<float>> kcache_, vcache_;  // per block, [n_tokens x emb_dim]
};

}  // namespace qdlab::qdt
