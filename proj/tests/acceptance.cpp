// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line each. Usage: acceptance <path-to-cli> [criterion numbers...]
//
// The training criterion builds a synthetic balanced dataset, trains the
// reduced network for 30 epochs and leaves the checkpoint for the codec
// criteria, so a full run takes roughly half an hour on a small machine.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "limd/codec/codec.hpp"
#include "limd/dataset.hpp"
#include "limd/metrics.hpp"
#include "limd/nn/checkpoint.hpp"
#include "limd/nn/flops.hpp"
#include "limd/nn/train.hpp"
#include "limd/signaling.hpp"
#include "oracle_intra.hpp"
#include "synth_data.hpp"

using namespace limd;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string g_cliPath;
const char* kCheckpointPath = "/tmp/limd_acceptance_ckpt.bin";

// ----- criterion 1: per-layer flop table through the CLI -----
void criterion_flops() {
    const double t0 = now_s();
    const std::string cmd = g_cliPath + " flops --variant dlimd";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        report(1, false, "could not launch the CLI");
        return;
    }
    std::vector<double> values;
    char line[256];
    while (fgets(line, sizeof line, pipe)) {
        // last whitespace-separated token of a data row is the flop count
        std::string s(line);
        const size_t end = s.find_last_not_of(" \n\t");
        if (end == std::string::npos) continue;
        const size_t begin = s.find_last_of(" \t", end);
        const std::string tok = s.substr(begin + 1, end - begin);
        char* parseEnd = nullptr;
        const double v = std::strtod(tok.c_str(), &parseEnd);
        if (parseEnd && *parseEnd == '\0' && v > 0 && s.find("layer") == std::string::npos)
            values.push_back(v);
    }
    pclose(pipe);
    const double elapsed = now_s() - t0;

    const double expect[13] = {1.3e5, 6.7e5, 8.7e6, 7.7e7, 8.7e6, 7.7e7, 7.7e7, 3.9e7,
                               1.3e8, 8.6e6, 8.6e6, 8.6e6, 2.8e5};
    bool ok = values.size() == 13 && elapsed < 1.0;
    for (size_t i = 0; ok && i < 13; ++i) {
        const double ulp = std::pow(10.0, std::floor(std::log10(expect[i])) - 1);
        if (std::abs(values[i] - expect[i]) > ulp + 1e-9) ok = false;
    }
    if (ok && (values[0] != 135168 || values[3] != 77924352 || values[8] != 138708992)) ok = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, "13 layer flop values within 2 significant digits (%zu rows, %.2f s)",
                  values.size(), elapsed);
    report(1, ok, buf);
}

// ----- criterion 2: bit-saving identities -----
void criterion_eta() {
    bool ok = bit_saving_eta(3.35, 0.0828, 1.0) == 0.0828;
    ok = ok && bit_saving_eta(3.35, 0.0828, 0.0) == 0.0;
    const double eta = bit_saving_eta(3.35, 0.0828, 0.5);
    const double hand = (3.35 - (-0.5 * std::log2(0.5) + 0.5 * (3.35 - std::log2(0.5)))) / 3.35 * 0.0828;
    ok = ok && std::abs(eta - hand) <= 1e-12;
    ok = ok && std::abs(eta - 0.016683582089552239) <= 1e-12;
    report(2, ok, "saving identities at take-up 0/1 and the mid-point evaluation");
}

// ----- criterion 3: bits-per-mode saving cross-check -----
void criterion_eta_prime() {
    const double v = eta_prime(2.18, 1.02);
    report(3, std::abs(v - 53.2) <= 0.1, "saving(2.18 -> 1.02) = " + std::to_string(v) + "%");
}

// ----- criterion 4: code-length histogram -----
void criterion_bit_model() {
    std::mt19937 rng(11);
    std::vector<int> rest(66);
    for (int i = 0; i < 66; ++i) rest[size_t(i)] = i + 1;
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        std::shuffle(rest.begin(), rest.end(), rng);
        const MpmList l = {0, rest[0], rest[1], rest[2], rest[3], rest[4]};
        std::map<int, int> histo;
        for (int m = 0; m < 67; ++m) histo[mode_bits(m, l)] += 1;
        ok = histo == std::map<int, int>{{2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 5}, {7, 58}};
    }
    report(4, ok, "1000 random lists all give histogram {2:1,3:1,4:1,5:1,6:5,7:58}");
}

// ----- criterion 5: prediction oracle -----
void criterion_prediction() {
    std::mt19937 rng(21);
    std::uniform_int_distribution<int> modeDist(0, 66), byteDist(0, 255), sizeDist(0, 4);
    const int sizes[5] = {4, 8, 16, 32, 64};
    bool ok = true;
    for (int trial = 0; trial < 10000 && ok; ++trial) {
        const int w = sizes[sizeDist(rng)];
        const int h = sizes[sizeDist(rng)];
        const int mode = modeDist(rng);
        ReferenceLines refs(w, h);
        for (int x = -1; x <= 2 * w - 1; ++x) refs.set_top(1, x, uint8_t(byteDist(rng)), true);
        for (int y = -1; y <= 2 * h - 1; ++y) refs.set_left(1, y, uint8_t(byteDist(rng)), true);
        refs.set_left(1, -1, refs.top(1, -1), true);
        ok = predict(mode, refs, w, h) == oracle::predict_reference(mode, refs, w, h);
    }
    for (int w : sizes)
        for (int h : sizes) {
            ReferenceLines refs(w, h);
            for (int x = -1; x <= 2 * w - 1; ++x) refs.set_top(1, x, 77, true);
            for (int y = -1; y <= 2 * h - 1; ++y) refs.set_left(1, y, 77, true);
            for (int mode = 0; mode < 67 && ok; ++mode)
                for (uint8_t v : predict(mode, refs, w, h)) ok = ok && v == 77;
        }
    report(5, ok, "10^4 random cases match the scalar reference; flat field is a fixpoint");
}

// ----- criterion 6: gradient check -----
void criterion_gradients() {
    const double t0 = now_s();
    nn::Network<double> net{nn::VariantConfig::named("dlimd-l")};
    net.init_weights(23);
    nn::Workspace<double> ws;
    net.make_workspace(ws);
    nn::Gradients<double> grads = net.make_gradients();

    std::mt19937 rng(23);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    std::vector<float> canvas(528), f0(73);
    for (auto& v : canvas) v = d(rng);
    for (auto& v : f0) v = d(rng);
    const int label = 31;

    net.forward(canvas.data(), f0.data(), ws, nn::DropoutPlan{});
    net.backward(label, 1.0, ws, grads);

    auto pattern = [&]() {
        uint64_t h = 1469598103934665603ull;
        auto mix = [&](bool b) { h = (h ^ (b ? 1 : 0)) * 1099511628211ull; };
        for (const auto& plane : ws.act)
            for (double v : plane.data) mix(v > 0);
        for (int i = 0; i < 4; ++i)
            for (double v : ws.fcOut[size_t(i)]) mix(v > 0);
        return h;
    };

    struct Info {
        std::vector<double>* p;
        bool convW;
        int cin, k, cout;
    };
    std::vector<Info> info;
    net.for_each_param([&](const std::string&, std::vector<double>& t, bool cw, int ci, int k, int co) {
        info.push_back({&t, cw, ci, k, co});
    });

    std::uniform_int_distribution<size_t> tensorDist(0, info.size() - 1);
    const double eps = 1e-3;
    int checked = 0, redrawn = 0;
    double worst = 0;
    bool ok = true;
    while (checked < 50 && ok) {
        if (redrawn > 500) {
            ok = false;
            break;
        }
        const size_t ti = tensorDist(rng);
        Info& t = info[ti];
        if (t.p->empty()) continue;
        const size_t pi = std::uniform_int_distribution<size_t>(0, t.p->size() - 1)(rng);
        size_t gi = pi;
        if (t.convW) {
            const int kk = t.k * t.k;
            const int co = int(pi / (size_t(t.cin) * kk));
            const int ci = int(pi / kk % size_t(t.cin));
            const int tap = int(pi % kk);
            gi = (size_t(ci) * kk + tap) * size_t(t.cout) + co;
        }
        const double analytic = grads.tensors[ti][gi];
        double& p = (*t.p)[pi];
        const double keep = p;
        p = keep + eps;
        net.refresh_transposed();
        net.forward(canvas.data(), f0.data(), ws, nn::DropoutPlan{});
        const uint64_t patPlus = pattern();
        const double lp = nn::cross_entropy(ws.fcOut[4].data(), 67, label);
        p = keep - eps;
        net.refresh_transposed();
        net.forward(canvas.data(), f0.data(), ws, nn::DropoutPlan{});
        const uint64_t patMinus = pattern();
        const double lm = nn::cross_entropy(ws.fcOut[4].data(), 67, label);
        p = keep;
        net.refresh_transposed();
        if (patPlus != patMinus) {
            ++redrawn;  // perturbation crossed an activation kink
            continue;
        }
        const double numeric = (lp - lm) / (2 * eps);
        const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, err);
        ok = err <= 1e-4;
        ++checked;
    }
    const double elapsed = now_s() - t0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "50 parameters, worst relative error %.2e (%.1f s, %d kink redraws)",
                  worst, elapsed, redrawn);
    report(6, ok && elapsed < 120.0, buf);
}

// ----- criterion 7: training run -----
void criterion_training() {
    // balanced desk-scale set: 50 per (label, qp) x 4 qps = 200 per label
    const auto pool = synth::make_pool(50, 8, 4242);
    const auto balanced = balance(pool, 50, 99);

    nn::TrainConfig tc;
    tc.variant = "dlimd-l";
    tc.epochs = 30;
    tc.batchSize = 256;  // desk-scale recipe: smaller batches so 30 epochs see enough steps
    tc.lr0 = 5e-4;
    tc.seed = 7;
    tc.valPerLabel = 80;  // 40% of each label, the reference recipe's ratio
    tc.outCheckpoint = kCheckpointPath;
    tc.checkpointEvery = 0;
    tc.logPath = "/tmp/limd_acceptance_train.log";

    const double t0 = now_s();
    const nn::TrainResult res = nn::train(balanced, tc);
    const double minutes = (now_s() - t0) / 60.0;

    bool lossOk = res.epochLoss.size() == 30;
    auto smooth = [&](size_t i) {
        double s = 0;
        for (size_t j = i; j < i + 5; ++j) s += res.epochLoss[j];
        return s / 5;
    };
    for (size_t i = 0; lossOk && i + 6 <= res.epochLoss.size(); ++i) lossOk = smooth(i + 1) < smooth(i);

    const bool accOk = res.finalValAccuracy > 13.0;
    const bool timeOk = minutes < 30.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "validation P(0) = %.1f%% (> 13%%: %s), smoothed loss decreasing: %s, %.1f min (< 30: %s)",
                  res.finalValAccuracy, accOk ? "yes" : "NO", lossOk ? "yes" : "NO", minutes,
                  timeOk ? "yes" : "NO");
    report(7, accOk && lossOk && timeOk, buf);
}

Frame test_frame_for(int idx, std::mt19937& rng) {
    Frame f;
    f.width = 64;
    f.height = 64;
    f.samples.resize(64 * 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            uint8_t v;
            switch ((idx + (x >= 32) + 2 * (y >= 32)) % 4) {
                case 0: v = uint8_t(90 + idx); break;                  // flat
                case 1: v = uint8_t((x * 4 + idx * 7) & 0xff); break;  // vertical structure
                case 2: v = uint8_t((y * 4 + idx * 3) & 0xff); break;  // horizontal structure
                default: v = uint8_t(rng() & 0xff); break;             // noise
            }
            f.at(x, y) = v;
        }
    return f;
}

// ----- criteria 8 and 9: codec mirror and RD dominance -----
void criterion_codec(const nn::NetworkF* net) {
    std::mt19937 rng(31);
    bool mirrorOk = net != nullptr;
    bool modesOk = net != nullptr;
    bool domOk = net != nullptr;
    size_t dlimdBlocks = 0, blocks = 0;
    for (int fidx = 0; fidx < 20 && mirrorOk; ++fidx) {
        const Frame f = test_frame_for(fidx, rng);
        for (int qp : {22, 27, 32, 37}) {
            RdConfig cfg;
            cfg.qp = qp;
            cfg.partition = {PartitionConfig::Mode::Fixed, 16};
            cfg.dlimdEnabled = true;
            const EncodeResult enc = encode_frame(f, cfg, net);
            const DecodeResult dec = decode_frame(enc.bitstream, net);
            mirrorOk = mirrorOk && dec.frame.samples == enc.recon.samples;
            if (dec.trace.size() != enc.trace.size()) {
                modesOk = false;
            } else {
                for (size_t i = 0; i < enc.trace.size(); ++i) {
                    modesOk = modesOk && dec.trace[i].usedDlimd == enc.trace[i].usedDlimd &&
                              dec.trace[i].mode == enc.trace[i].mode;
                    dlimdBlocks += enc.trace[i].usedDlimd ? 1 : 0;
                    ++blocks;
                }
            }

            RdConfig forced = cfg;
            forced.forceTraditional = true;
            const EncodeResult trad = encode_frame(f, forced, net);
            domOk = domOk && enc.totalRdCost <= trad.totalRdCost + 1e-9;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "20 frames x 4 QPs bit-identical, derived modes agree (%zu of %zu blocks derived)",
                  dlimdBlocks, blocks);
    report(8, mirrorOk && modesOk && dlimdBlocks > 0, buf);
    report(9, domOk, "frame RD cost with derivation enabled never exceeds the explicit-only cost");
}

// ----- criterion 10: metrics -----
void criterion_metrics(const nn::NetworkF* net) {
    bool ok = true;
    if (net) {
        std::mt19937_64 rng(91);
        nn::Workspace<float> ws;
        net->make_workspace(ws);
        std::vector<int> pred, truth;
        for (int i = 0; i < 2000; ++i) {
            const SampleRecord r = synth::sample_for_label(int(rng() % 67), 22 + 5 * int(rng() % 4), rng);
            net->forward(r.canvas.data(), r.f0.data(), ws, nn::DropoutPlan{});
            int best = 0;
            for (int j = 1; j < 67; ++j)
                if (ws.fcOut[4][size_t(j)] > ws.fcOut[4][size_t(best)]) best = j;
            pred.push_back(best);
            truth.push_back(r.label);
        }
        const AccuracyReport rep = accuracy_report(pred, truth);
        for (size_t i = 1; i < rep.p.size(); ++i) ok = ok && rep.p[i] >= rep.p[i - 1];
    } else {
        ok = false;
    }

    std::vector<RdPoint> a = {{91000, 31.2}, {52000, 28.9}, {30500, 26.8}, {18000, 24.9}};
    ok = ok && std::abs(bd_rate(a, a)) < 1e-9;
    std::vector<RdPoint> shifted;
    for (const RdPoint& p : a) shifted.push_back({p.rate * 0.9, p.psnr});
    const double bd = bd_rate(a, shifted);
    ok = ok && std::abs(bd - (-10.0)) <= 0.05;
    char buf[120];
    std::snprintf(buf, sizeof buf, "P(delta) monotone; self bd-rate 0; uniform -10%% shift -> %.3f%%", bd);
    report(10, ok, buf);
}

// ----- criterion 11: dataset pipeline -----
void criterion_dataset() {
    const auto pool = synth::make_pool(12, 5, 777);
    const auto balancedA = balance(pool, 12, 31);
    const auto balancedB = balance(pool, 12, 31);

    std::map<std::pair<int, int>, size_t> cells;
    for (const SampleRecord& r : balancedA) cells[{r.label, r.qp}] += 1;
    bool flat = cells.size() == 67 * 4;
    for (const auto& [cell, n] : cells) flat = flat && n == 12;

    write_dataset("/tmp/limd_acc_dsA.bin", balancedA);
    write_dataset("/tmp/limd_acc_dsB.bin", balancedB);
    const uint64_t da = nn::file_digest("/tmp/limd_acc_dsA.bin");
    const uint64_t db = nn::file_digest("/tmp/limd_acc_dsB.bin");
    const auto balancedC = balance(pool, 12, 32);
    write_dataset("/tmp/limd_acc_dsC.bin", balancedC);
    const uint64_t dc = nn::file_digest("/tmp/limd_acc_dsC.bin");

    report(11, flat && da == db && da != dc,
           "balanced file exactly flat per (label, qp); fixed-seed replay digests identical");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-cli> [criterion numbers...]\n");
        return 2;
    }
    g_cliPath = argv[1];
    std::set<int> only;
    for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto want = [&](int n) { return only.empty() || only.count(n) > 0; };

    try {
        if (want(1)) criterion_flops();
        if (want(2)) criterion_eta();
        if (want(3)) criterion_eta_prime();
        if (want(4)) criterion_bit_model();
        if (want(5)) criterion_prediction();
        if (want(6)) criterion_gradients();
        if (want(7)) criterion_training();

        std::unique_ptr<nn::NetworkF> net;
        if (want(8) || want(9) || want(10)) {
            try {
                net = std::make_unique<nn::NetworkF>(nn::load_checkpoint(kCheckpointPath));
            } catch (const std::exception& e) {
                std::fprintf(stderr, "note: no trained checkpoint (%s); run criterion 7 first\n",
                             e.what());
            }
        }
        if (want(8) || want(9)) criterion_codec(net.get());
        if (want(10)) criterion_metrics(net.get());
        if (want(11)) criterion_dataset();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
        return 2;
    }

    std::printf("%s\n", g_failures == 0 ? "all criteria passed" : "FAILURES present");
    return g_failures == 0 ? 0 : 1;
}
