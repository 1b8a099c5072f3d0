// mdra: generators, sliding-window ingestion, training, reporting and MDS
// embeddings for the multi-decoder recurrent autoencoder.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mdra/analysis.hpp"
#include "mdra/serialize.hpp"
#include "mdra/signals.hpp"
#include "mdra/training.hpp"

namespace fs = std::filesystem;
using namespace mdra;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

const char* kPresetFooter =
    "Presets (hyperparameters per experiment family):\n"
    "  periodic          L=4 cap=8 fft cpx=off K=5  theta0=0.5  nu0=1.0 lambda0=0.01\n"
    "  complex-periodic  L=4 cap=8 fft cpx=off K=5  theta0=1.0  nu0=1.0 lambda0=0.01\n"
    "  route             L=4 cap=8 fft cpx=off K=10 theta0=10.0 nu0=1.0 lambda0=5.0\n";

TrainConfig preset_config(const std::string& name) {
    TrainConfig cfg;  // periodic preset is the baseline
    cfg.hyper = {0.5, 1.0, 0.01, 5};
    cfg.arch = {4, 8, true, false};
    if (name == "periodic") {
        // baseline
    } else if (name == "complex-periodic") {
        cfg.hyper.theta0 = 1.0;
    } else if (name == "route") {
        cfg.hyper.K = 10;
        cfg.hyper.theta0 = 10.0;
        cfg.hyper.lambda0 = 5.0;
    } else {
        throw ConfigError("unknown preset: " + name +
                          " (expected periodic, complex-periodic or route)");
    }
    return cfg;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
    if (path == "-") return std::cout;
    file.open(path);
    if (!file) throw DataError("cannot write " + path);
    return file;
}

struct GenOptions {
    std::string kind;
    std::string out = "-";
    PeriodicSpec periodic;
    ComplexPeriodicSpec cpx;
    std::uint64_t seed = 0;
};

int run_gen(const GenOptions& opt) {
    Dataset ds;
    if (opt.kind == "periodic") {
        PeriodicSpec spec = opt.periodic;
        spec.seed = opt.seed;
        ds = gen_periodic(spec);
    } else if (opt.kind == "complex-periodic") {
        ComplexPeriodicSpec spec = opt.cpx;
        spec.seed = opt.seed;
        ds = gen_complex_periodic(spec);
    } else {
        throw ConfigError("unknown generator kind: " + opt.kind);
    }
    std::ofstream file;
    write_dataset_jsonl(open_output(opt.out, file), ds);
    return kExitOk;
}

struct IngestOptions {
    std::string csv;
    std::string out = "-";
    WindowSpec spec;
};

int run_ingest(const IngestOptions& opt) {
    const Mat raw = load_csv_signal(opt.csv);
    const Dataset ds = sliding_window(raw, opt.spec);
    std::ofstream file;
    write_dataset_jsonl(open_output(opt.out, file), ds);
    return kExitOk;
}

struct TrainOptions {
    std::string dataset;
    std::string outdir;
    std::string preset;
    std::string config_file;
    TrainConfig cfg;                 // resolved: preset <- config file <- flags
    CLI::App* cmd = nullptr;         // to query which flags were passed
};

void overlay_config_file(TrainConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read config file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string("bad config JSON: ") + e.what());
    }
    // Partial configs are allowed: only the keys present are applied.
    json full = to_json(cfg);
    full.merge_patch(j);
    cfg = trainconfig_from_json(full);
}

int run_train(TrainOptions& opt) {
    const Dataset ds = load_dataset_jsonl(opt.dataset);
    fs::create_directories(opt.outdir);

    TrainedModel trained = train(ds, opt.cfg);

    Checkpoint ckpt{std::move(trained), opt.cfg};
    save_checkpoint(fs::path(opt.outdir) / "checkpoint.json", ckpt);
    std::ofstream trace(fs::path(opt.outdir) / "trace.tsv");
    if (!trace) throw DataError("cannot write trace.tsv");
    write_trace_tsv(trace, ckpt.trained.trace);
    return kExitOk;
}

struct ReportOptions {
    std::string checkpoint;
    std::string dataset;
    std::string outdir;
    std::size_t embed_dim = 2;
};

int run_report(const ReportOptions& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    const Dataset ds = load_dataset_jsonl(opt.dataset);
    if (ds.size() != ckpt.trained.vb.R.rows)
        throw DataError("dataset has " + std::to_string(ds.size()) +
                        " signals but the checkpoint was trained on " +
                        std::to_string(ckpt.trained.vb.R.rows));

    std::vector<std::string> labels;
    bool labeled = true;
    for (const TimeSeries& ts : ds) labeled = labeled && !ts.label.empty();
    if (labeled)
        for (const TimeSeries& ts : ds) labels.push_back(ts.label);

    const ClusterReport report = build_report(ckpt.trained.vb.R, labels, opt.embed_dim);

    fs::create_directories(opt.outdir);
    write_text_file(fs::path(opt.outdir) / "report.json", to_json(report).dump() + "\n");
    std::ofstream masses(fs::path(opt.outdir) / "masses.tsv");
    write_masses_tsv(masses, report.masses);
    std::ofstream embedding(fs::path(opt.outdir) / "embedding.tsv");
    write_embedding_tsv(embedding, ds, *report.embedding, &report.assignments);
    return kExitOk;
}

struct MdsOptions {
    std::string checkpoint;
    std::string dataset;
    std::string out = "-";
    std::string features = "r";
    std::size_t dim = 3;
};

int run_mds(const MdsOptions& opt) {
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    const Dataset ds = load_dataset_jsonl(opt.dataset);
    const Features feats =
        extract(ckpt.trained.model, ckpt.trained.vb, ds, ckpt.config.threads);
    if (feats.R.rows != ds.size())
        throw DataError("dataset size does not match the checkpoint");

    Mat points;
    if (opt.features == "r")
        points = feats.R;
    else if (opt.features == "h")
        points = complex_rows_to_real(feats.H);
    else
        throw ConfigError("--features must be r or h");

    const MdsResult mds = classical_mds(points, opt.dim);
    if (mds.positive_axes < opt.dim)
        std::cerr << "warning: only " << mds.positive_axes << " of " << opt.dim
                  << " axes have positive eigenvalues; remaining axes are zero\n";

    std::ofstream file;
    std::ostream& os = open_output(opt.out, file);
    if (opt.dim == 3)
        write_rgb_embedding_tsv(os, ds, mds.coords);
    else
        write_embedding_tsv(os, ds, mds.coords, nullptr);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-decoder RNN autoencoder: norm-preserving recurrent autoencoding with\n"
                 "variational-Bayes decoder allocation for time-series clustering."};
    app.require_subcommand(1);
    app.footer(kPresetFooter);

    // gen
    GenOptions gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic labeled dataset (JSON lines)");
    gen_cmd->footer(kPresetFooter);
    gen_cmd->add_option("kind", gen.kind, "Generator: periodic | complex-periodic")->required();
    gen_cmd->add_option("-o,--out", gen.out, "Output path (- for stdout)");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--n-per-class", gen.periodic.n_per_class,
                        "periodic: signals per period class");
    gen_cmd->add_option("--base-length", gen.periodic.base_length, "periodic: maximum length");
    gen_cmd->add_option("--periods", gen.periodic.periods,
                        "periodic: period counts per class (default 2 4 8)");
    gen_cmd->add_option("--max-phase-shift", gen.periodic.max_phase_shift,
                        "periodic: phase shift bound, fraction of one period");
    gen_cmd->add_option("--amp-min", gen.periodic.amplitude_lo, "periodic: min amplitude");
    gen_cmd->add_option("--amp-max", gen.periodic.amplitude_hi, "periodic: max amplitude");
    gen_cmd->add_option("--noise", gen.periodic.noise_level,
                        "periodic: uniform noise level (fraction of max amplitude)");
    gen_cmd->add_option("--max-shortening", gen.periodic.max_length_shortening,
                        "periodic: max length shortening, fraction of base length");
    gen_cmd->add_option("--n-per-type", gen.cpx.n_per_type, "complex-periodic: signals per type");
    gen_cmd->add_option("--length", gen.cpx.length, "complex-periodic: signal length");
    gen_cmd->add_option("--omega-a1", gen.cpx.omega_a1, "complex-periodic: type A omega_1");
    gen_cmd->add_option("--omega-a2", gen.cpx.omega_a2, "complex-periodic: type A omega_2");
    gen_cmd->add_option("--omega-b1", gen.cpx.omega_b1, "complex-periodic: type B omega_1");
    gen_cmd->add_option("--omega-b2", gen.cpx.omega_b2, "complex-periodic: type B omega_2");

    // ingest
    IngestOptions ingest;
    CLI::App* ingest_cmd =
        app.add_subcommand("ingest", "Difference and window a CSV time series into a dataset");
    ingest_cmd->footer(kPresetFooter);
    ingest_cmd->add_option("--csv", ingest.csv, "Input CSV (header row; first column = timestamp)")
        ->required();
    ingest_cmd->add_option("-o,--out", ingest.out, "Output path (- for stdout)");
    ingest_cmd->add_option("--window", ingest.spec.window, "Window length (rows)");
    ingest_cmd->add_option("--slide", ingest.spec.slide, "Slide between windows (rows)");
    ingest_cmd->add_option("--pitch", ingest.spec.sampling_pitch, "Sampling pitch, seconds (metadata)");
    ingest_cmd->add_option("--threshold", ingest.spec.activity_threshold,
                           "Keep windows whose max |difference| in the activity channel reaches this");
    ingest_cmd->add_option("--channel", ingest.spec.activity_channel, "Activity channel index");

    // train
    TrainOptions tr;
    tr.cfg = preset_config("periodic");
    CLI::App* train_cmd = app.add_subcommand("train", "Train the model on a dataset");
    train_cmd->footer(kPresetFooter);
    tr.cmd = train_cmd;
    train_cmd->add_option("-d,--dataset", tr.dataset, "Dataset (JSON lines)")->required();
    train_cmd->add_option("-o,--out", tr.outdir, "Output directory")->required();
    train_cmd->add_option("--preset", tr.preset, "Preset: periodic | complex-periodic | route");
    train_cmd->add_option("--config", tr.config_file, "JSON config file (overrides the preset)");
    auto* oK = train_cmd->add_option("-K,--clusters", tr.cfg.hyper.K, "Number of decoders");
    auto* oT0 = train_cmd->add_option("--theta0", tr.cfg.hyper.theta0, "Dirichlet concentration");
    auto* oN0 = train_cmd->add_option("--nu0", tr.cfg.hyper.nu0, "Gamma shape prior");
    auto* oL0 = train_cmd->add_option("--lambda0", tr.cfg.hyper.lambda0, "Gamma rate prior");
    auto* oL = train_cmd->add_option("-L,--hidden", tr.cfg.arch.L, "Hidden dimension");
    auto* oCap = train_cmd->add_option("--capacity", tr.cfg.arch.capacity,
                                       "Rotation layers (ignored with --fft)");
    auto* oFft = train_cmd->add_flag("--fft,!--no-fft", tr.cfg.arch.fft_style,
                                     "Hierarchical pairing with ceil(log2 L) layers");
    auto* oCpx = train_cmd->add_flag("--cpx,!--no-cpx", tr.cfg.arch.cpx,
                                     "Extra phase inside each rotation block");
    auto* oLr = train_cmd->add_option("--lr", tr.cfg.optimizer.learning_rate, "Learning rate");
    std::string method = "adam";
    auto* oMethod = train_cmd->add_option("--optimizer", method, "adam | sgd");
    auto* oEpochs = train_cmd->add_option("--epochs-per-outer", tr.cfg.optimizer.epochs_per_outer,
                                          "Gradient epochs per outer iteration");
    auto* oBatch = train_cmd->add_option("--batch-size", tr.cfg.optimizer.batch_size, "Batch size");
    auto* oVb = train_cmd->add_option("--vb-iters", tr.cfg.vb_iters, "VB E/M passes per outer iteration");
    auto* oThr = train_cmd->add_option("--threshold", tr.cfg.free_energy_threshold,
                                       "Relative free-energy stopping threshold");
    auto* oMax = train_cmd->add_option("--max-outer-iters", tr.cfg.max_outer_iters,
                                       "Maximum outer iterations");
    auto* oSeed = train_cmd->add_option("--seed", tr.cfg.rng_seed, "RNG seed");
    auto* oThreads = train_cmd->add_option("--threads", tr.cfg.threads, "Worker threads");

    // report
    ReportOptions rep;
    CLI::App* report_cmd =
        app.add_subcommand("report", "Cluster report and embeddings from a checkpoint");
    report_cmd->footer(kPresetFooter);
    report_cmd->add_option("-c,--checkpoint", rep.checkpoint, "checkpoint.json")->required();
    report_cmd->add_option("-d,--dataset", rep.dataset, "Dataset the model was trained on")
        ->required();
    report_cmd->add_option("-o,--out", rep.outdir, "Output directory")->required();
    report_cmd->add_option("--embed-dim", rep.embed_dim, "MDS dimension for report embedding");

    // mds
    MdsOptions mds;
    CLI::App* mds_cmd = app.add_subcommand("mds", "MDS embedding of trained features");
    mds_cmd->footer(kPresetFooter);
    mds_cmd->add_option("-c,--checkpoint", mds.checkpoint, "checkpoint.json")->required();
    mds_cmd->add_option("-d,--dataset", mds.dataset, "Dataset")->required();
    mds_cmd->add_option("-o,--out", mds.out, "Output path (- for stdout)");
    mds_cmd->add_option("--features", mds.features, "r (allocation weights) or h (encoded state)");
    mds_cmd->add_option("--dim", mds.dim, "Target dimension (3 adds RGB columns)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*ingest_cmd) return run_ingest(ingest);
        if (*train_cmd) {
            // Precedence: flags > config file > preset > defaults. Re-apply
            // flag values on top of whatever the preset/config resolved to.
            TrainConfig resolved =
                tr.preset.empty() ? preset_config("periodic") : preset_config(tr.preset);
            if (!tr.config_file.empty()) overlay_config_file(resolved, tr.config_file);
            if (*oK) resolved.hyper.K = tr.cfg.hyper.K;
            if (*oT0) resolved.hyper.theta0 = tr.cfg.hyper.theta0;
            if (*oN0) resolved.hyper.nu0 = tr.cfg.hyper.nu0;
            if (*oL0) resolved.hyper.lambda0 = tr.cfg.hyper.lambda0;
            if (*oL) resolved.arch.L = tr.cfg.arch.L;
            if (*oCap) resolved.arch.capacity = tr.cfg.arch.capacity;
            if (*oFft) resolved.arch.fft_style = tr.cfg.arch.fft_style;
            if (*oCpx) resolved.arch.cpx = tr.cfg.arch.cpx;
            if (*oLr) resolved.optimizer.learning_rate = tr.cfg.optimizer.learning_rate;
            if (*oMethod) {
                if (method == "adam")
                    resolved.optimizer.method = OptMethod::Adam;
                else if (method == "sgd")
                    resolved.optimizer.method = OptMethod::Sgd;
                else
                    throw ConfigError("--optimizer must be adam or sgd");
            }
            if (*oEpochs) resolved.optimizer.epochs_per_outer = tr.cfg.optimizer.epochs_per_outer;
            if (*oBatch) resolved.optimizer.batch_size = tr.cfg.optimizer.batch_size;
            if (*oVb) resolved.vb_iters = tr.cfg.vb_iters;
            if (*oThr) resolved.free_energy_threshold = tr.cfg.free_energy_threshold;
            if (*oMax) resolved.max_outer_iters = tr.cfg.max_outer_iters;
            if (*oSeed) resolved.rng_seed = tr.cfg.rng_seed;
            if (*oThreads) resolved.threads = tr.cfg.threads;
            tr.cfg = resolved;
            return run_train(tr);
        }
        if (*report_cmd) return run_report(rep);
        if (*mds_cmd) return run_mds(mds);
    } catch (const DivergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
