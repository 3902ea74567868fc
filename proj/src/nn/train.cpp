#include "limd/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "limd/nn/checkpoint.hpp"
#include "limd/nn/parallel.hpp"

namespace limd::nn {

AdamState make_adam(Network<float>& net) {
    AdamState st;
    net.for_each_param([&](const std::string&, std::vector<float>& t, bool, int, int, int) {
        st.m.emplace_back(t.size(), 0.0f);
        st.v.emplace_back(t.size(), 0.0f);
    });
    return st;
}

void adam_step(Network<float>& net, Gradients<float>& grads, AdamState& st, double lr) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
    size_t idx = 0;
    net.for_each_param([&](const std::string&, std::vector<float>& p, bool isConvW, int cin, int k,
                           int cout) {
        std::vector<float>& g = grads.tensors[idx];
        std::vector<float>& m = st.m[idx];
        std::vector<float>& v = st.v[idx];
        auto update = [&](size_t pi, size_t gi) {
            const float gv = g[gi];
            if (!std::isfinite(gv)) throw TrainingDiverged("non-finite gradient");
            m[gi] = float(st.beta1) * m[gi] + float(1.0 - st.beta1) * gv;
            v[gi] = float(st.beta2) * v[gi] + float(1.0 - st.beta2) * gv * gv;
            const double mhat = m[gi] / bc1;
            const double vhat = v[gi] / bc2;
            p[pi] -= float(lr * mhat / (std::sqrt(vhat) + st.eps));
        };
        if (isConvW) {
            // gradient layout [ci][k*k][co], parameter layout [co][ci][k*k]
            const int kk = k * k;
            for (int co = 0; co < cout; ++co)
                for (int ci = 0; ci < cin; ++ci)
                    for (int t = 0; t < kk; ++t)
                        update((size_t(co) * cin + ci) * kk + t, (size_t(ci) * kk + t) * cout + co);
        } else {
            for (size_t i = 0; i < p.size(); ++i) update(i, i);
        }
        ++idx;
    });
    net.refresh_transposed();
}

namespace {

int argmax67(const float* p) {
    int best = 0;
    for (int j = 1; j < kNumClasses; ++j)
        if (p[j] > p[best]) best = j;
    return best;
}

}  // namespace

TrainResult train(const std::vector<SampleRecord>& records, const TrainConfig& cfg) {
    for (const SampleRecord& r : records)
        if (r.label >= kNumClasses) throw CorruptDataset("label out of range");
    if (records.empty()) throw EmptyInput("empty training set");

    auto [trainSet, valSet] = split_validation(records, size_t(cfg.valPerLabel), cfg.seed);
    if (trainSet.empty()) throw EmptyInput("no training records after validation split");

    Network<float> net{VariantConfig::named(cfg.variant)};
    net.init_weights(cfg.seed);
    AdamState adam = make_adam(net);

    // Samples are distributed across threads with a fixed stride and thread
    // gradients reduced in thread order, so runs replay bit-identically for
    // a given (seed, jobs) pair.
    const int jobs = cfg.jobs > 0 ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    const size_t nJobs = size_t(jobs);
    std::vector<Workspace<float>> ws(nJobs);
    std::vector<Gradients<float>> threadGrads;
    for (size_t t = 0; t < nJobs; ++t) {
        net.make_workspace(ws[t]);
        threadGrads.push_back(net.make_gradients());
    }

    std::ofstream log;
    if (!cfg.logPath.empty()) {
        log.open(cfg.logPath);
        if (!log) throw Error("cannot write training log " + cfg.logPath);
        log << "# epoch loss valAccuracyPercent lr\n";
    }

    std::vector<size_t> order(trainSet.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::mt19937_64 shuffleRng(mix64(cfg.seed, 0xd5));

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr0 * std::pow(cfg.lrDecay, double(epoch));
        std::shuffle(order.begin(), order.end(), shuffleRng);

        double epochLoss = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += size_t(cfg.batchSize)) {
            const size_t b1 = std::min(order.size(), b0 + size_t(cfg.batchSize));
            const float scale = 1.0f / float(b1 - b0);
            std::vector<double> threadLoss(nJobs, 0.0);

            auto work = [&](int tid) {
                Gradients<float>& g = threadGrads[size_t(tid)];
                g.zero();
                Workspace<float>& w = ws[size_t(tid)];
                for (size_t i = b0 + size_t(tid); i < b1; i += nJobs) {
                    const SampleRecord& r = trainSet[order[i]];
                    DropoutPlan drop{true, mix64(cfg.seed, uint64_t(epoch) << 32 | order[i])};
                    net.forward(r.canvas.data(), r.f0.data(), w, drop);
                    threadLoss[size_t(tid)] += cross_entropy(w.fcOut[4].data(), kNumClasses, r.label);
                    net.backward(r.label, scale, w, g);
                }
            };
            if (jobs == 1) {
                work(0);
            } else {
                std::vector<std::thread> pool;
                for (int t = 0; t < jobs; ++t) pool.emplace_back(work, t);
                for (auto& th : pool) th.join();
            }

            Gradients<float>& grads = threadGrads[0];
            for (size_t t = 1; t < nJobs; ++t) grads.add_scaled(threadGrads[t], 1.0f);
            adam_step(net, grads, adam, lr);
            for (double l : threadLoss) epochLoss += l;
        }
        epochLoss /= double(trainSet.size());
        if (!std::isfinite(epochLoss)) throw TrainingDiverged("non-finite training loss");

        // validation accuracy at delta = 0
        std::vector<size_t> correct(nJobs, 0);
        auto evalWork = [&](int tid) {
            Workspace<float>& w = ws[size_t(tid)];
            for (size_t i = size_t(tid); i < valSet.size(); i += nJobs) {
                const SampleRecord& r = valSet[i];
                net.forward(r.canvas.data(), r.f0.data(), w, DropoutPlan{});
                correct[size_t(tid)] += argmax67(w.fcOut[4].data()) == int(r.label) ? 1 : 0;
            }
        };
        if (jobs == 1) {
            evalWork(0);
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < jobs; ++t) pool.emplace_back(evalWork, t);
            for (auto& th : pool) th.join();
        }
        size_t hits = 0;
        for (size_t c : correct) hits += c;
        const double valAcc = valSet.empty() ? 0.0 : 100.0 * double(hits) / double(valSet.size());

        result.epochLoss.push_back(epochLoss);
        result.valAccuracy.push_back(valAcc);
        if (log) log << epoch << ' ' << epochLoss << ' ' << valAcc << ' ' << lr << '\n' << std::flush;

        const bool last = epoch + 1 == cfg.epochs;
        if (!cfg.outCheckpoint.empty() &&
            (last || (cfg.checkpointEvery > 0 && (epoch + 1) % cfg.checkpointEvery == 0)))
            save_checkpoint(cfg.outCheckpoint, net);
    }
    result.finalValAccuracy = result.valAccuracy.empty() ? 0.0 : result.valAccuracy.back();
    return result;
}

}  // namespace limd::nn
