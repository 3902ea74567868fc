// limd: desk-scale intra-only video coding laboratory with learned mode
// derivation. See README.md for the workflows.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "limd/codec/codec.hpp"
#include "limd/dataset.hpp"
#include "limd/metrics.hpp"
#include "limd/nn/checkpoint.hpp"
#include "limd/nn/flops.hpp"
#include "limd/nn/train.hpp"
#include "limd/signaling.hpp"

namespace {

using namespace limd;

PartitionConfig parse_partition(const std::string& s) {
    PartitionConfig p;
    if (s == "rdquad") {
        p.mode = PartitionConfig::Mode::RdQuad;
        return p;
    }
    if (s.rfind("fixed:", 0) == 0) {
        p.mode = PartitionConfig::Mode::Fixed;
        p.fixedSize = std::stoi(s.substr(6));
        if (!is_legal_block_dim(p.fixedSize)) throw InvalidArgument("fixed size must be in {4,8,16,32,64}");
        return p;
    }
    throw InvalidArgument("partition must be fixed:<N> or rdquad");
}

Frame load_input(const std::string& path, int width, int height, const std::string& format) {
    if (format == "ppm" || format == "pnm")
        return load_frame(path, 0, 0, FrameFormat::PortablePixmap);
    if (format == "raw") {
        if (width <= 0 || height <= 0) throw InvalidArgument("raw input needs --width/--height");
        return load_frame(path, width, height, FrameFormat::Raw420Luma);
    }
    throw InvalidArgument("format must be raw or ppm");
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

std::vector<uint8_t> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw TruncatedInput("cannot open " + path);
    std::vector<uint8_t> buf(size_t(f.tellg()));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    return buf;
}

void write_pgm(const std::string& path, const Frame& frame) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(frame.samples.data()), std::streamsize(frame.samples.size()));
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct CodingRun {
    EncodeResult enc;
    double encodeSeconds = 0;
    double decodeSeconds = 0;
    double psnrDb = 0;
};

CodingRun run_coding(const Frame& frame, RdConfig cfg, const nn::NetworkF* net) {
    CodingRun run;
    double t0 = now_seconds();
    run.enc = encode_frame(frame, cfg, net);
    run.encodeSeconds = now_seconds() - t0;
    t0 = now_seconds();
    const DecodeResult dec = decode_frame(run.enc.bitstream, net);
    run.decodeSeconds = now_seconds() - t0;
    if (dec.frame.samples != run.enc.recon.samples) throw Error("encode/decode reconstruction mismatch");
    run.psnrDb = psnr(frame, dec.frame);
    return run;
}

int cmd_flops(const std::string& variant) {
    const auto specs = nn::layer_specs(nn::VariantConfig::named(variant));
    std::printf("%-8s %-6s %-22s %14s\n", "layer", "type", "shape", "flops");
    for (const auto& s : specs) {
        char shape[64];
        if (s.kind == nn::LayerSpec::Kind::Conv)
            std::snprintf(shape, sizeof shape, "%dx%d k%d %d->%d", s.h, s.w, s.k, s.cin, s.cout);
        else
            std::snprintf(shape, sizeof shape, "%d->%d", s.in, s.out);
        std::printf("%-8s %-6s %-22s %14llu\n", s.name.c_str(),
                    s.kind == nn::LayerSpec::Kind::Conv ? "conv" : "full", shape,
                    static_cast<unsigned long long>(nn::flops(s)));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"intra coding laboratory with learned mode derivation"};
    app.require_subcommand(1);

    // ---- encode ----
    auto* enc = app.add_subcommand("encode", "encode one frame to a bitstream");
    std::string inPath, outPath, tracePath, format = "raw", partition = "fixed:16", ckptPath, reconPath;
    int width = 0, height = 0, qp = 32;
    bool dlimd = false, forceTrad = false;
    enc->add_option("--input", inPath)->required();
    enc->add_option("--output", outPath)->required();
    enc->add_option("--trace", tracePath);
    enc->add_option("--recon-out", reconPath)->description("write reconstruction as pgm");
    enc->add_option("--format", format)->description("raw (4:2:0 luma) or ppm");
    enc->add_option("--width", width);
    enc->add_option("--height", height);
    enc->add_option("--qp", qp)->check(CLI::Range(0, 51));
    enc->add_option("--partition", partition);
    enc->add_flag("--dlimd", dlimd)->description("enable learned mode derivation");
    enc->add_flag("--force-traditional", forceTrad);
    enc->add_option("--checkpoint", ckptPath);

    // ---- decode ----
    auto* dec = app.add_subcommand("decode", "decode a bitstream to a pgm frame");
    std::string decIn, decOut, decCkpt;
    dec->add_option("--input", decIn)->required();
    dec->add_option("--output", decOut)->required();
    dec->add_option("--checkpoint", decCkpt);

    // ---- extract ----
    auto* ext = app.add_subcommand("extract", "collect training samples from coding runs");
    ExtractConfig exCfg;
    std::string exPartition = "fixed:16", exFormat = "raw", refSource = "recon";
    ext->add_option("--input", exCfg.inputs)->required();
    ext->add_option("--out", exCfg.out)->required();
    ext->add_option("--width", exCfg.width);
    ext->add_option("--height", exCfg.height);
    ext->add_option("--format", exFormat);
    ext->add_option("--qps", exCfg.qps);
    ext->add_option("--partition", exPartition);
    ext->add_option("--ref-source", refSource)->description("recon or source");

    // ---- balance ----
    auto* bal = app.add_subcommand("balance", "per-(label,qp) uniform subsample");
    std::string balIn, balOut;
    size_t perLabelPerQp = 200;
    uint64_t balSeed = 1;
    bal->add_option("--input", balIn)->required();
    bal->add_option("--out", balOut)->required();
    bal->add_option("--per-label-per-qp", perLabelPerQp);
    bal->add_option("--seed", balSeed);

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train a mode-derivation network");
    nn::TrainConfig tc;
    std::string trData;
    tr->add_option("--dataset", trData)->required();
    tr->add_option("--variant", tc.variant);
    tr->add_option("--epochs", tc.epochs);
    tr->add_option("--batch", tc.batchSize);
    tr->add_option("--lr", tc.lr0);
    tr->add_option("--seed", tc.seed);
    tr->add_option("--val-per-label", tc.valPerLabel);
    tr->add_option("--jobs", tc.jobs);
    tr->add_option("--checkpoint-every", tc.checkpointEvery);
    tr->add_option("--out", tc.outCheckpoint)->required();
    tr->add_option("--log", tc.logPath);

    // ---- eval-accuracy ----
    auto* ea = app.add_subcommand("eval-accuracy", "classification accuracy of a checkpoint");
    std::string eaCkpt, eaData, eaConfusion;
    ea->add_option("--checkpoint", eaCkpt)->required();
    ea->add_option("--dataset", eaData)->required();
    ea->add_option("--confusion-out", eaConfusion);

    // ---- eval-coding ----
    auto* ec = app.add_subcommand("eval-coding", "anchor vs derivation coding comparison");
    std::string ecIn, ecFormat = "raw", ecPartition = "fixed:16", ecCkpt, ecReport;
    int ecW = 0, ecH = 0;
    std::vector<int> ecQps = {22, 27, 32, 37};
    ec->add_option("--input", ecIn)->required();
    ec->add_option("--format", ecFormat);
    ec->add_option("--width", ecW);
    ec->add_option("--height", ecH);
    ec->add_option("--qps", ecQps);
    ec->add_option("--partition", ecPartition);
    ec->add_option("--checkpoint", ecCkpt)->required();
    ec->add_option("--report", ecReport)->description("machine-readable report path");

    // ---- flops ----
    auto* fl = app.add_subcommand("flops", "per-layer flop table for a variant");
    std::string flVariant = "dlimd";
    fl->add_option("--variant", flVariant);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*enc) {
            const Frame frame = load_input(inPath, width, height, format);
            RdConfig cfg;
            cfg.qp = qp;
            cfg.partition = parse_partition(partition);
            cfg.dlimdEnabled = dlimd;
            cfg.forceTraditional = forceTrad;
            std::unique_ptr<nn::NetworkF> net;
            if (!ckptPath.empty()) net = std::make_unique<nn::NetworkF>(nn::load_checkpoint(ckptPath));
            if (dlimd && !forceTrad && !net) throw InvalidArgument("--dlimd requires --checkpoint");
            const EncodeResult res = encode_frame(frame, cfg, net.get());
            write_bytes(outPath, res.bitstream);
            if (!tracePath.empty()) write_trace(tracePath, res.trace);
            if (!reconPath.empty()) write_pgm(reconPath, res.recon);
            const TraceStats stats = bpm_stats(res.trace);
            std::printf("blocks %zu bits %llu bpm %.3f gamma %.3f rd-cost %.1f\n", stats.blocks,
                        static_cast<unsigned long long>(res.payloadBits), stats.alphaPrime, stats.gamma,
                        res.totalRdCost);
        } else if (*dec) {
            std::unique_ptr<nn::NetworkF> net;
            if (!decCkpt.empty()) net = std::make_unique<nn::NetworkF>(nn::load_checkpoint(decCkpt));
            const DecodeResult res = decode_frame(read_bytes(decIn), net.get());
            write_pgm(decOut, res.frame);
            std::printf("decoded %dx%d, %zu derived blocks\n", res.frame.width, res.frame.height,
                        res.netInvocations);
        } else if (*ext) {
            exCfg.partition = parse_partition(exPartition);
            exCfg.pnm = exFormat != "raw";
            exCfg.refSourcePixels = refSource == "source";
            if (refSource != "source" && refSource != "recon")
                throw InvalidArgument("--ref-source must be recon or source");
            const ExtractSummary s = extract_samples(exCfg);
            std::printf("records %zu\n", s.records);
            for (int m = 0; m < 67; ++m)
                if (s.perLabel[size_t(m)]) std::printf("label %d: %zu\n", m, s.perLabel[size_t(m)]);
        } else if (*bal) {
            const auto in = read_dataset(balIn);
            const auto out = balance(in, perLabelPerQp, balSeed);
            write_dataset(balOut, out);
            std::printf("balanced %zu -> %zu records\n", in.size(), out.size());
        } else if (*tr) {
            const auto records = read_dataset(trData);
            const nn::TrainResult res = nn::train(records, tc);
            std::printf("final validation accuracy %.2f%% over %d epochs\n", res.finalValAccuracy,
                        tc.epochs);
        } else if (*ea) {
            nn::NetworkF net = nn::load_checkpoint(eaCkpt);
            const auto records = read_dataset(eaData);
            if (records.empty()) throw EmptyInput("empty dataset");
            nn::Workspace<float> ws;
            net.make_workspace(ws);
            std::vector<int> pred, truth;
            for (const SampleRecord& r : records) {
                net.forward(r.canvas.data(), r.f0.data(), ws, nn::DropoutPlan{});
                int best = 0;
                for (int j = 1; j < 67; ++j)
                    if (ws.fcOut[4][size_t(j)] > ws.fcOut[4][size_t(best)]) best = j;
                pred.push_back(best);
                truth.push_back(r.label);
            }
            const AccuracyReport rep = accuracy_report(pred, truth);
            for (size_t i = 0; i < rep.deltas.size(); ++i)
                std::printf("P(delta=%d) = %.2f%%\n", rep.deltas[i], rep.p[i]);
            if (!eaConfusion.empty()) {
                std::ofstream cf(eaConfusion);
                for (const auto& row : rep.confusion) {
                    for (size_t j = 0; j < row.size(); ++j) cf << row[j] << (j + 1 < row.size() ? ' ' : '\n');
                }
            }
        } else if (*ec) {
            const Frame frame = load_input(ecIn, ecW, ecH, ecFormat);
            nn::NetworkF net = nn::load_checkpoint(ecCkpt);
            RdConfig base;
            base.partition = parse_partition(ecPartition);

            std::vector<RdPoint> anchorCurve, testCurve;
            std::vector<double> anchorEnc, testEnc, anchorDec, testDec;
            std::ofstream report;
            if (!ecReport.empty()) {
                report.open(ecReport);
                report << "# qp alpha alphaPrime beta gamma etaPredicted etaPrime omega rateAnchor "
                          "rateDlimd psnrAnchor psnrDlimd\n";
            }
            std::printf("%4s %7s %7s %7s %7s %8s %8s %8s\n", "qp", "alpha", "alpha'", "beta", "gamma",
                        "eta", "eta'", "omega");
            for (int qp : ecQps) {
                RdConfig a = base;
                a.qp = qp;
                const CodingRun anchor = run_coding(frame, a, nullptr);
                RdConfig d = base;
                d.qp = qp;
                d.dlimdEnabled = true;
                const CodingRun test = run_coding(frame, d, &net);

                const TraceStats sa = bpm_stats(anchor.enc.trace);
                const TraceStats stt = bpm_stats(test.enc.trace);
                const double etaPred = bit_saving_eta(sa.alphaPrime, sa.beta, stt.gamma);
                const double etaP = eta_prime(sa.alphaPrime, stt.alphaPrime);
                const double om = omega(test.enc.trace);
                std::printf("%4d %7.3f %7.3f %7.4f %7.3f %7.2f%% %7.2f%% %7.2f%%\n", qp, sa.alphaPrime,
                            stt.alphaPrime, sa.beta, stt.gamma, etaPred * 100.0, etaP, om);
                if (report)
                    report << qp << ' ' << sa.alphaPrime << ' ' << stt.alphaPrime << ' ' << sa.beta << ' '
                           << stt.gamma << ' ' << etaPred * 100.0 << ' ' << etaP << ' ' << om << ' '
                           << anchor.enc.payloadBits << ' ' << test.enc.payloadBits << ' '
                           << anchor.psnrDb << ' ' << test.psnrDb << '\n';

                anchorCurve.push_back({double(anchor.enc.payloadBits), anchor.psnrDb});
                testCurve.push_back({double(test.enc.payloadBits), test.psnrDb});
                anchorEnc.push_back(anchor.encodeSeconds);
                testEnc.push_back(test.encodeSeconds);
                anchorDec.push_back(std::max(anchor.decodeSeconds, 1e-9));
                testDec.push_back(std::max(test.decodeSeconds, 1e-9));
            }
            if (ecQps.size() >= 4) {
                const double bd = bd_rate(anchorCurve, testCurve);
                const double dtEnc = complexity_ratio(anchorEnc, testEnc);
                const double dtDec = complexity_ratio(anchorDec, testDec);
                std::printf("bd-rate %.2f%%  dT-encode %.2fx  dT-decode %.2fx\n", bd, dtEnc, dtDec);
                if (report) report << "# bd-rate " << bd << " dT-encode " << dtEnc << " dT-decode " << dtDec << '\n';
            }
        } else if (*fl) {
            return cmd_flops(flVariant);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
