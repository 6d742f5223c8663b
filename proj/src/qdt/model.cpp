#include "qdlab/qdt/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdlab::qdt {

using nn::Tensor;

namespace {

constexpr float kInitStd = 0.02f;

Tensor dense_init(int in, int out, Rng& rng) { return Tensor::randn({in, out}, kInitStd, rng); }
Tensor zeros_param(std::vector<int> shape) { return Tensor::zeros(std::move(shape), true); }
Tensor ones_param(int n) {
    return Tensor::from(std::vector<float>(n, 1.0f), {n}, true);
}

}  // namespace

QdtModel::QdtModel(QdtConfig cfg, int obs_dim, int act_dim, int bd_dim, std::uint64_t init_seed)
    : cfg_(cfg), obs_dim_(obs_dim), act_dim_(act_dim), bd_dim_(bd_dim) {
    if (cfg_.emb_dim % cfg_.n_heads != 0)
        throw std::invalid_argument("QdtModel: emb_dim must be divisible by n_heads");
    Rng rng(init_seed);
    const int d = cfg_.emb_dim;

    auto make_proj = [&](int in) {
        return Proj{dense_init(in, d, rng), zeros_param({d}), ones_param(d), zeros_param({d})};
    };
    e_bd_ = make_proj(bd_dim_);
    e_obs_ = make_proj(obs_dim_);
    e_act_ = make_proj(act_dim_);
    timestep_table_ = Tensor::randn({cfg_.max_T, d}, kInitStd, rng);

    blocks_.reserve(cfg_.n_layers);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        Block b;
        b.ln1_g = ones_param(d);
        b.ln1_b = zeros_param({d});
        b.wq = dense_init(d, d, rng);
        b.bq = zeros_param({d});
        b.wk = dense_init(d, d, rng);
        b.bk = zeros_param({d});
        b.wv = dense_init(d, d, rng);
        b.bv = zeros_param({d});
        b.wo = dense_init(d, d, rng);
        b.bo = zeros_param({d});
        b.ln2_g = ones_param(d);
        b.ln2_b = zeros_param({d});
        b.fc1_w = dense_init(d, 4 * d, rng);
        b.fc1_b = zeros_param({4 * d});
        b.fc2_w = dense_init(4 * d, d, rng);
        b.fc2_b = zeros_param({d});
        blocks_.push_back(std::move(b));
    }
    lnf_g_ = ones_param(d);
    lnf_b_ = zeros_param({d});
    head_w_ = dense_init(d, act_dim_, rng);
    head_b_ = zeros_param({act_dim_});
}

Tensor QdtModel::embed(const Proj& p, const Tensor& raw) const {
    return nn::layer_norm(nn::add_bias(nn::matmul(raw, p.w), p.b), p.ln_g, p.ln_b);
}

Tensor QdtModel::attention(const Block& blk, const Tensor& x, int L, bool train_mode,
                           Rng* rng) const {
    (void)L;
    const int d = cfg_.emb_dim;
    const int dh = d / cfg_.n_heads;
    const float scale_f = 1.0f / std::sqrt(static_cast<float>(dh));

    Tensor q = nn::add_bias(nn::matmul(x, blk.wq), blk.bq);
    Tensor k = nn::add_bias(nn::matmul(x, blk.wk), blk.bk);
    Tensor v = nn::add_bias(nn::matmul(x, blk.wv), blk.bv);

    const float attn_drop = train_mode ? cfg_.dropout : 0.0f;
    Tensor cat = nn::causal_self_attention(q, k, v, cfg_.n_heads, scale_f, attn_drop, rng);
    Tensor out = nn::add_bias(nn::matmul(cat, blk.wo), blk.bo);
    if (train_mode && cfg_.dropout > 0.0f) out = nn::dropout(out, cfg_.dropout, *rng);
    return out;
}

Tensor QdtModel::forward(const std::vector<float>& conditioning_bd, const float* obs, int n_obs,
                         const float* act, int n_act, bool train_mode, Rng* dropout_rng) const {
    if (static_cast<int>(conditioning_bd.size()) != bd_dim_)
        throw std::invalid_argument("QdtModel::forward: conditioning BD dimension mismatch");
    if (n_obs > cfg_.max_T)
        throw std::invalid_argument("QdtModel::forward: sequence exceeds max_T");
    if (n_act != n_obs && n_act != n_obs - 1)
        throw std::invalid_argument("QdtModel::forward: n_act must be n_obs or n_obs - 1");
    if (train_mode && cfg_.dropout > 0.0f && dropout_rng == nullptr)
        throw std::invalid_argument("QdtModel::forward: training mode needs a dropout rng");

    Tensor bd_raw = Tensor::from(conditioning_bd, {1, bd_dim_});
    Tensor obs_raw = Tensor::from(std::vector<float>(obs, obs + static_cast<std::size_t>(n_obs) * obs_dim_),
                                  {n_obs, obs_dim_});
    Tensor bd_emb = embed(e_bd_, bd_raw);
    Tensor obs_emb = embed(e_obs_, obs_raw);

    std::vector<Tensor> sources{bd_emb, obs_emb};
    if (n_act > 0) {
        Tensor act_raw = Tensor::from(
            std::vector<float>(act, act + static_cast<std::size_t>(n_act) * act_dim_),
            {n_act, act_dim_});
        sources.push_back(embed(e_act_, act_raw));
    }

    // (BD, O_0, A_0, BD, O_1, A_1, ..., BD, O_t [, A_t])
    std::vector<std::pair<int, int>> pattern;
    std::vector<int> tstep;
    std::vector<int> obs_positions;
    for (int t = 0; t < n_obs; ++t) {
        pattern.emplace_back(0, 0);  // the same conditioning BD at every timestep
        tstep.push_back(t);
        obs_positions.push_back(static_cast<int>(pattern.size()));
        pattern.emplace_back(1, t);
        tstep.push_back(t);
        if (t < n_act) {
            pattern.emplace_back(2, t);
            tstep.push_back(t);
        }
    }
    const int L = static_cast<int>(pattern.size());

    Tensor x = nn::add(nn::assemble_rows(sources, pattern), nn::gather_rows(timestep_table_, tstep));
    if (train_mode && cfg_.dropout > 0.0f) x = nn::dropout(x, cfg_.dropout, *dropout_rng);

    for (const Block& blk : blocks_) {
        Tensor normed = nn::layer_norm(x, blk.ln1_g, blk.ln1_b);
        x = nn::add(x, attention(blk, normed, L, train_mode, dropout_rng));
        Tensor normed2 = nn::layer_norm(x, blk.ln2_g, blk.ln2_b);
        Tensor h = nn::relu(nn::add_bias(nn::matmul(normed2, blk.fc1_w), blk.fc1_b));
        Tensor m = nn::add_bias(nn::matmul(h, blk.fc2_w), blk.fc2_b);
        if (train_mode && cfg_.dropout > 0.0f) m = nn::dropout(m, cfg_.dropout, *dropout_rng);
        x = nn::add(x, m);
    }
    Tensor yn = nn::layer_norm(x, lnf_g_, lnf_b_);
    Tensor preds = nn::add_bias(nn::matmul(yn, head_w_), head_b_);
    return nn::gather_rows(preds, obs_positions);
}

nn::NamedParams QdtModel::named_params() const {
    nn::NamedParams out;
    auto add_proj = [&](const std::string& prefix, const Proj& p) {
        out.emplace_back(prefix + ".w", p.w);
        out.emplace_back(prefix + ".b", p.b);
        out.emplace_back(prefix + ".ln_g", p.ln_g);
        out.emplace_back(prefix + ".ln_b", p.ln_b);
    };
    add_proj("embed.bd", e_bd_);
    add_proj("embed.obs", e_obs_);
    add_proj("embed.act", e_act_);
    out.emplace_back("embed.timestep", timestep_table_);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const Block& b = blocks_[l];
        const std::string p = "block" + std::to_string(l);
        out.emplace_back(p + ".ln1_g", b.ln1_g);
        out.emplace_back(p + ".ln1_b", b.ln1_b);
        out.emplace_back(p + ".wq", b.wq);
        out.emplace_back(p + ".bq", b.bq);
        out.emplace_back(p + ".wk", b.wk);
        out.emplace_back(p + ".bk", b.bk);
        out.emplace_back(p + ".wv", b.wv);
        out.emplace_back(p + ".bv", b.bv);
        out.emplace_back(p + ".wo", b.wo);
        out.emplace_back(p + ".bo", b.bo);
        out.emplace_back(p + ".ln2_g", b.ln2_g);
        out.emplace_back(p + ".ln2_b", b.ln2_b);
        out.emplace_back(p + ".fc1_w", b.fc1_w);
        out.emplace_back(p + ".fc1_b", b.fc1_b);
        out.emplace_back(p + ".fc2_w", b.fc2_w);
        out.emplace_back(p + ".fc2_b", b.fc2_b);
    }
    out.emplace_back("final.ln_g", lnf_g_);
    out.emplace_back("final.ln_b", lnf_b_);
    out.emplace_back("head.w", head_w_);
    out.emplace_back("head.b", head_b_);
    return out;
}

std::vector<Tensor> QdtModel::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

void QdtModel::save(const std::string& path) const { nn::save_checkpoint(named_params(), path); }
void QdtModel::load(const std::string& path) { nn::load_checkpoint(named_params(), path); }

// ---- incremental decoder ---------------------------------------------------
//
// The float-op ordering below deliberately mirrors the graph ops used by
// QdtModel::forward (k-outer gemm accumulation starting from zero, bias
// added afterwards, layer-norm with eps 1e-5, max-subtracted softmax) so
// decoded actions equal the full forward pass exactly. The causal mask in
// the full pass adds -1e9 before softmax, which underflows to an exact 0
// after exp, so prefix-only attention is not an approximation.

namespace {

// out = x . W + b with the same accumulation order as gemm_row(!tA, !tB).
void dense_vec(const float* x, int in, const std::vector<float>& w, const std::vector<float>& b,
               int out_dim, float* out) {
    for (int j = 0; j < out_dim; ++j) out[j] = 0.0f;
    for (int k = 0; k < in; ++k) {
        const float xv = x[k];
        const float* wr = w.data() + static_cast<std::size_t>(k) * out_dim;
        for (int j = 0; j < out_dim; ++j) out[j] += xv * wr[j];
    }
    for (int j = 0; j < out_dim; ++j) out[j] += b[j];
}

void layer_norm_vec(const float* x, int n, const std::vector<float>& g,
                    const std::vector<float>& b, float* out) {
    float mean = 0.0f;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    float var = 0.0f;
    for (int i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= n;
    const float is = 1.0f / std::sqrt(var + 1e-5f);
    for (int i = 0; i < n; ++i) {
        const float xh = (x[i] - mean) * is;
        out[i] = xh * g[i] + b[i];
    }
}

}  // namespace

QdtDecoder::QdtDecoder(const QdtModel& model, std::vector<float> conditioning_bd)
    : m_(&model), bd_(std::move(conditioning_bd)) {
    if (static_cast<int>(bd_.size()) != m_->bd_dim_)
        throw std::invalid_argument("QdtDecoder: conditioning BD dimension mismatch");
    const int d = m_->cfg_.emb_dim;
    bd_emb_.resize(d);
    std::vector<float> pre(d);
    dense_vec(bd_.data(), m_->bd_dim_, m_->e_bd_.w.value(), m_->e_bd_.b.value(), d, pre.data());
    layer_norm_vec(pre.data(), d, m_->e_bd_.ln_g.value(), m_->e_bd_.ln_b.value(), bd_emb_.data());
    kcache_.resize(m_->blocks_.size());
    vcache_.resize(m_->blocks_.size());
}

void QdtDecoder::reset() {
    t_ = 0;
    for (auto& c : kcache_) c.clear();
    for (auto& c : vcache_) c.clear();
}

void QdtDecoder::process_token(std::vector<float>& x) {
    const int d = m_->cfg_.emb_dim;
    const int n_heads = m_->cfg_.n_heads;
    const int dh = d / n_heads;
    const float scale_f = 1.0f / std::sqrt(static_cast<float>(dh));

    std::vector<float> normed(d), q(d), kv(d), attn(d), h4(4 * d), m_out(d);
    for (std::size_t l = 0; l < m_->blocks_.size(); ++l) {
        const auto& blk = m_->blocks_[l];
        layer_norm_vec(x.data(), d, blk.ln1_g.value(), blk.ln1_b.value(), normed.data());
        dense_vec(normed.data(), d, blk.wq.value(), blk.bq.value(), d, q.data());
        dense_vec(normed.data(), d, blk.wk.value(), blk.bk.value(), d, kv.data());
        kcache_[l].insert(kcache_[l].end(), kv.begin(), kv.end());
        dense_vec(normed.data(), d, blk.wv.value(), blk.bv.value(), d, kv.data());
        vcache_[l].insert(vcache_[l].end(), kv.begin(), kv.end());

        const int L = static_cast<int>(kcache_[l].size()) / d;
        std::vector<float> cat(d);
        std::vector<float> scores(L);
        for (int h = 0; h < n_heads; ++h) {
            const float* qh = q.data() + h * dh;
            float mx = -std::numeric_limits<float>::infinity();
            for (int j = 0; j < L; ++j) {
                const float* kh = kcache_[l].data() + static_cast<std::size_t>(j) * d + h * dh;
                float acc = 0.0f;
                for (int k = 0; k < dh; ++k) acc += qh[k] * kh[k];
                scores[j] = acc * scale_f;
                mx = std::max(mx, scores[j]);
            }
            float sum = 0.0f;
            for (int j = 0; j < L; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                sum += scores[j];
            }
            for (int j = 0; j < L; ++j) scores[j] /= sum;
            float* out_h = cat.data() + h * dh;
            for (int k = 0; k < dh; ++k) out_h[k] = 0.0f;
            for (int j = 0; j < L; ++j) {
                const float wj = scores[j];
                const float* vh = vcache_[l].data() + static_cast<std::size_t>(j) * d + h * dh;
                for (int k = 0; k < dh; ++k) out_h[k] += wj * vh[k];
            }
        }
        dense_vec(cat.data(), d, blk.wo.value(), blk.bo.value(), d, attn.data());
        for (int i = 0; i < d; ++i) x[i] += attn[i];

        layer_norm_vec(x.data(), d, blk.ln2_g.value(), blk.ln2_b.value(), normed.data());
        dense_vec(normed.data(), d, blk.fc1_w.value(), blk.fc1_b.value(), 4 * d, h4.data());
        for (int i = 0; i < 4 * d; ++i) h4[i] = std::max(h4[i], 0.0f);
        dense_vec(h4.data(), 4 * d, blk.fc2_w.value(), blk.fc2_b.value(), d, m_out.data());
        for (int i = 0; i < d; ++i) x[i] += m_out[i];
    }
}

std::vector<float> QdtDecoder::step(const float* obs, const float* prev_act) {
    if (t_ >= m_->cfg_.max_T)
        throw std::invalid_argument("QdtDecoder::step: sequence exceeds max_T");
    const int d = m_->cfg_.emb_dim;
    const float* tt = m_->timestep_table_.value().data();
    std::vector<float> pre(d), x(d);

    if (t_ > 0) {
        if (prev_act == nullptr)
            throw std::invalid_argument("QdtDecoder::step: prev_act required for t > 0");
        dense_vec(prev_act, m_->act_dim_, m_->e_act_.w.value(), m_->e_act_.b.value(), d,
                  pre.data());
        layer_norm_vec(pre.data(), d, m_->e_act_.ln_g.value(), m_->e_act_.ln_b.value(), x.data());
        const float* row = tt + static_cast<std::size_t>(t_ - 1) * d;
        for (int i = 0; i < d; ++i) x[i] += row[i];
        process_token(x);
    }

    const float* trow = tt + static_cast<std::size_t>(t_) * d;
    for (int i = 0; i < d; ++i) x[i] = bd_emb_[i] + trow[i];
    process_token(x);

    dense_vec(obs, m_->obs_dim_, m_->e_obs_.w.value(), m_->e_obs_.b.value(), d, pre.data());
    layer_norm_vec(pre.data(), d, m_->e_obs_.ln_g.value(), m_->e_obs_.ln_b.value(), x.data());
    for (int i = 0; i < d; ++i) x[i] += trow[i];
    process_token(x);

    std::vector<float> yn(d), action(m_->act_dim_);
    layer_norm_vec(x.data(), d, m_->lnf_g_.value(), m_->lnf_b_.value(), yn.data());
    dense_vec(yn.data(), d, m_->head_w_.value(), m_->head_b_.value(), m_->act_dim_, action.data());
    ++t_;
    return action;
}

}  // namespace qdlab::qdt
