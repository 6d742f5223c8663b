#pragma once

#include <cstdint>
#include <functional>

#include "qdlab/dataset.hpp"
#include "qdlab/nn/optim.hpp"
#include "qdlab/qdt/model.hpp"

namespace qdlab::qdt {

// One pass over the dataset in shuffled minibatches of full trajectories;
// MSE on action predictions at observation-token positions, global grad
// norm clipped at 1.0, one Adam step per minibatch. Returns the epoch
// mean loss.
double train_epoch(QdtModel& model, nn::Adam& optimizer, const TrajectoryDataset& dataset,
                   std::uint64_t epoch_seed);

struct TrainCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double eval_mean_distance = 0.0;  // NaN when no evaluation ran that epoch
    double eval_max_fitness = 0.0;
};

struct TrainOptions {
    int epochs = 40;
    int eval_every = 4;  // 0 disables periodic evaluation
    std::uint64_t seed = 0;
};

// eval_fn returns (overall mean distance, max over goals of mean fitness).
// The model is left holding the weights of its best evaluation phase.
std::vector<TrainCurvePoint> train(
    QdtModel& model, const TrajectoryDataset& dataset, const TrainOptions& opts,
    const std::function<std::pair<double, double>(const QdtModel&)>& eval_fn = nullptr);

}  // namespace qdlab::qdt
