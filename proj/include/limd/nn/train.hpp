#pragma once

#include <string>
#include <vector>

#include "limd/dataset.hpp"
#include "limd/nn/net.hpp"

namespace limd::nn {

struct TrainConfig {
    std::string variant = "dlimd-l";
    int epochs = 30;
    int batchSize = 1024;
    double lr0 = 1e-4;
    double lrDecay = 0.999;  // per-epoch multiplier exponent base
    uint64_t seed = 1;
    int valPerLabel = 40;
    int jobs = 0;  // 0 = hardware concurrency
    int checkpointEvery = 10;
    std::string outCheckpoint;
    std::string logPath;
};

struct TrainResult {
    std::vector<double> epochLoss;
    std::vector<double> valAccuracy;  // P(delta = 0), percent
    double finalValAccuracy = 0;
};

// Adam-based training loop; deterministic for a fixed (seed, jobs) pair.
// Throws TrainingDiverged on non-finite loss or gradients and
// CorruptDataset on out-of-range labels.
TrainResult train(const std::vector<SampleRecord>& records, const TrainConfig& cfg);

// Single Adam step shared with the unit tests.
struct AdamState {
    std::vector<std::vector<float>> m, v;
    int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

AdamState make_adam(Network<float>& net);

// Applies grads (conv weight grads in their transposed layout) to the
// network parameters.
void adam_step(Network<float>& net, Gradients<float>& grads, AdamState& st, double lr);

}  // namespace limd::nn
