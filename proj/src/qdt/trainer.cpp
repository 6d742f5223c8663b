#include "qdlab/qdt/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qdlab::qdt {

using nn::Tensor;

double train_epoch(QdtModel& model, nn::Adam& optimizer, const TrajectoryDataset& dataset,
                   std::uint64_t epoch_seed) {
    if (dataset.records.empty()) throw std::invalid_argument("train_epoch: empty dataset");
    const int B = model.config().batch_size;
    Rng shuffle_rng(mix_seed(epoch_seed, hash_tag("shuffle")));
    Rng dropout_rng(mix_seed(epoch_seed, hash_tag("dropout")));

    std::vector<std::size_t> order(dataset.records.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += B) {
        const std::size_t end = std::min(order.size(), start + B);
        optimizer.zero_grad();
        Tensor batch_loss;
        for (std::size_t i = start; i < end; ++i) {
            const TrajectoryRecord& rec = dataset.records[order[i]];
            Tensor preds = model.forward(rec.conditioning_bd, rec.observations.data(),
                                         dataset.episode_len, rec.actions.data(),
                                         dataset.episode_len, /*train_mode=*/true, &dropout_rng);
            Tensor l = nn::mse_loss(preds, rec.actions);
            batch_loss = batch_loss.valid() ? nn::add(batch_loss, l) : l;
        }
        batch_loss = nn::scale(batch_loss, 1.0f / static_cast<float>(end - start));
        nn::backward(batch_loss);
        nn::clip_grad_norm(optimizer.params(), 1.0);
        optimizer.step();
        loss_sum += batch_loss.scalar();
        ++n_batches;
    }
    return loss_sum / static_cast<double>(n_batches);
}

std::vector<TrainCurvePoint> train(
    QdtModel& model, const TrajectoryDataset& dataset, const TrainOptions& opts,
    const std::function<std::pair<double, double>(const QdtModel&)>& eval_fn) {
    nn::Adam optimizer(model.params(), {.lr = model.config().lr});

    std::vector<TrainCurvePoint> curve;
    double best_distance = std::numeric_limits<double>::infinity();
    std::vector<std::vector<float>> best_weights;

    auto snapshot = [&]() {
        best_weights.clear();
        for (const auto& p : model.params()) best_weights.push_back(p.value());
    };
    auto restore = [&]() {
        auto ps = model.params();
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value() = best_weights[i];
    };

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        double loss = train_epoch(model, optimizer, dataset,
                                  mix_seed(opts.seed, static_cast<std::uint64_t>(epoch)));
        TrainCurvePoint pt;
        pt.epoch = epoch;
        pt.train_loss = loss;
        pt.eval_mean_distance = std::numeric_limits<double>::quiet_NaN();
        pt.eval_max_fitness = std::numeric_limits<double>::quiet_NaN();
        const bool do_eval =
            eval_fn && opts.eval_every > 0 && (epoch % opts.eval_every == 0 || epoch == opts.epochs);
        if (do_eval) {
            auto [dist, max_fit] = eval_fn(model);
            pt.eval_mean_distance = dist;
            pt.eval_max_fitness = max_fit;
            if (dist < best_distance) {
                best_distance = dist;
                snapshot();
            }
        }
        curve.push_back(pt);
    }
    if (!best_weights.empty()) restore();
    return curve;
}

}  // namespace qdlab::qdt
