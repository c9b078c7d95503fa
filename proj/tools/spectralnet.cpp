// spectralnet: factor-analysis band reduction, wavelet-CNN training, and
// evaluation for hyperspectral cubes, staged as four file-based commands:
//
//   preprocess  NPY cube + labels -> reduced cube + patch cache
//   train       patch cache -> checkpoint + history CSV
//   evaluate    cache + checkpoint -> metrics JSON/text/CSV
//   decompose   image/patch -> per-level Haar subband dumps
//
// Exit codes: 0 ok, 2 input error, 3 numeric non-convergence, 4 training
// divergence, 5 artifact mismatch.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectralnet/checkpoint.hpp"
#include "spectralnet/errors.hpp"
#include "spectralnet/haar.hpp"
#include "spectralnet/hash.hpp"
#include "spectralnet/hsidata.hpp"
#include "spectralnet/metrics.hpp"
#include "spectralnet/model.hpp"
#include "spectralnet/npy.hpp"
#include "spectralnet/pgm.hpp"
#include "spectralnet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spectralnet;

namespace {

// One command per output directory at a time. The lock file is created
// exclusively and removed on scope exit.
class DirLock {
  public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".spectralnet.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw InputError("output directory " + dir.string() +
                             " is locked by another command (remove " + path_.string() +
                             " if stale)");
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    fs::path path_;
    int fd_ = -1;
};

// Messages go to stdout and, timestamped, to run.log. Timestamps never
// appear in run.json or numeric outputs, which must be run-to-run stable.
class RunLog {
  public:
    explicit RunLog(const fs::path& dir) : out_(dir / "run.log", std::ios::app) {}
    void line(const std::string& msg) {
        std::cout << msg << "\n";
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
        out_ << stamp << " " << msg << "\n";
    }

  private:
    std::ofstream out_;
};

void write_file(const fs::path& path, const std::string& text) { detail::spit(path, text); }

void write_run_json(const fs::path& dir, const std::string& command, const json& config,
                    const json& input_hashes) {
    json run;
    run["command"] = command;
    run["config"] = config;
    run["inputs"] = input_hashes;
    write_file(dir / "run.json", run.dump(2) + "\n");
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(detail::slurp(path));
    } catch (const json::exception& e) {
        throw InputError(path + ": unparseable config file: " + e.what());
    }
}

// CLI flags win over config-file values, which win over defaults.
template <typename T>
void merge_option(const CLI::Option* opt, const json& file_cfg, const char* key, T& value) {
    if (opt->count() == 0 && file_cfg.contains(key)) {
        try {
            value = file_cfg.at(key).get<T>();
        } catch (const json::exception& e) {
            throw InputError(std::string("config file key '") + key + "': " + e.what());
        }
    }
}

std::vector<std::size_t> parse_channel_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw InputError("bad stage channel list '" + csv + "'");
        }
    }
    if (out.empty()) throw InputError("empty stage channel list");
    return out;
}

// -------------------------------------------------------------- preprocess

struct PreprocessArgs {
    std::string data, labels, out, config;
    std::size_t bands = 3;
    std::size_t patch = 64;
};

int cmd_preprocess(const PreprocessArgs& a) {
    if (!fs::exists(a.data)) throw InputError(a.data + ": no such file");
    if (!fs::exists(a.labels)) throw InputError(a.labels + ": no such file");
    fs::create_directories(a.out);
    DirLock lock(a.out);
    RunLog log(a.out);

    const std::string data_hash = hash_hex(hash_file(a.data));
    const std::string labels_hash = hash_hex(hash_file(a.labels));

    const fs::path sidecar = fs::path(a.out) / "cache.json";
    if (fs::exists(sidecar)) {
        try {
            json old = json::parse(detail::slurp(sidecar));
            if (old.value("data_hash", "") == data_hash &&
                old.value("labels_hash", "") == labels_hash &&
                old.value("bands", std::size_t{0}) == a.bands &&
                old.value("patch", std::size_t{0}) == a.patch) {
                log.line("cache hit: " + sidecar.string() + " already matches inputs");
                return 0;
            }
        } catch (const json::exception&) {
            log.line("existing cache.json unreadable; recomputing");
        }
    }

    HSICube cube = load_cube(a.data, a.labels);
    log.line("loaded cube " + std::to_string(cube.rows) + "x" + std::to_string(cube.cols) + "x" +
             std::to_string(cube.bands) + ", " + std::to_string(cube.class_count) + " classes");

    ReducedCube reduced = reduce_bands(cube, a.bands);
    log.line("factor analysis: " + std::to_string(reduced.iterations) +
             " iterations, final delta " + std::to_string(reduced.final_delta) +
             (reduced.heywood_count
                  ? ", " + std::to_string(reduced.heywood_count) + " Heywood communalities clamped"
                  : ""));

    PatchSet ps = extract_patches(reduced, cube.labels, a.patch);
    log.line("extracted " + std::to_string(ps.count()) + " patches of " +
             std::to_string(a.patch) + "x" + std::to_string(a.patch) + "x" +
             std::to_string(a.bands));

    const fs::path out(a.out);
    const std::size_t R = cube.bands;
    npy::save_f64((out / "reduced.npy").string(), {reduced.rows, reduced.cols, reduced.bands},
                  reduced.data.data());
    npy::save_f64((out / "loadings.npy").string(), {R, a.bands}, reduced.loadings.data());
    npy::save_f64((out / "uniquenesses.npy").string(), {R}, reduced.uniquenesses.data());
    npy::save_f64((out / "band_means.npy").string(), {R}, reduced.band_means.data());
    npy::save_f64((out / "band_stds.npy").string(), {R}, reduced.band_stds.data());
    npy::save_f64((out / "patches.npy").string(),
                  {ps.count(), ps.patch_size, ps.patch_size, ps.bands}, ps.patches.data());
    {
        std::vector<std::int32_t> lbl(ps.labels.begin(), ps.labels.end());
        npy::save_i32((out / "patch_labels.npy").string(), {ps.count()}, lbl.data());
        std::vector<std::int32_t> coords;
        coords.reserve(2 * ps.count());
        for (auto [r, c] : ps.coords) {
            coords.push_back(r);
            coords.push_back(c);
        }
        npy::save_i32((out / "patch_coords.npy").string(), {ps.count(), 2}, coords.data());
    }

    json side;
    side["format"] = "spectralnet-cache-v1";
    side["data_hash"] = data_hash;
    side["labels_hash"] = labels_hash;
    side["bands"] = a.bands;
    side["patch"] = a.patch;
    side["rows"] = cube.rows;
    side["cols"] = cube.cols;
    side["source_bands"] = R;
    side["class_count"] = cube.class_count;
    side["patch_count"] = ps.count();
    side["fa_iterations"] = reduced.iterations;
    side["fa_final_delta"] = reduced.final_delta;
    side["fa_heywood_count"] = reduced.heywood_count;
    write_file(sidecar, side.dump(2) + "\n");

    json cfg{{"data", a.data}, {"labels", a.labels}, {"bands", a.bands}, {"patch", a.patch}};
    write_run_json(out, "preprocess", cfg, json{{a.data, data_hash}, {a.labels, labels_hash}});
    log.line("cache written to " + a.out);
    return 0;
}

// Rebuilds the PatchSet a preprocess run cached in `dir`.
PatchSet load_patch_cache(const std::string& dir, json& sidecar_out) {
    const fs::path root(dir);
    if (!fs::exists(root / "cache.json"))
        throw InputError("no preprocess cache at " + dir + " (run `spectralnet preprocess`)");
    json side;
    try {
        side = json::parse(detail::slurp(root / "cache.json"));
    } catch (const json::exception& e) {
        throw InputError(dir + "/cache.json: " + e.what());
    }
    if (side.value("format", "") != "spectralnet-cache-v1")
        throw InputError(dir + "/cache.json: unknown cache format");

    npy::NpyArray patches = npy::load((root / "patches.npy").string());
    npy::NpyArray labels = npy::load((root / "patch_labels.npy").string());
    npy::NpyArray coords = npy::load((root / "patch_coords.npy").string());
    if (patches.shape.size() != 4) throw InputError(dir + "/patches.npy: expected rank 4");

    PatchSet ps;
    ps.patch_size = patches.shape[1];
    ps.bands = patches.shape[3];
    ps.class_count = side.at("class_count").get<int>();
    ps.patches = std::move(patches.values);
    ps.labels.reserve(labels.count());
    for (double v : labels.values) ps.labels.push_back(static_cast<int>(v));
    for (std::size_t i = 0; i + 1 < coords.values.size(); i += 2)
        ps.coords.emplace_back(static_cast<int>(coords.values[i]),
                               static_cast<int>(coords.values[i + 1]));
    ps.split.assign(ps.labels.size(), Split::kTrain);
    if (ps.labels.size() != patches.shape[0])
        throw InputError(dir + ": patch/label count mismatch in cache");
    sidecar_out = side;
    return ps;
}

json cache_input_hashes(const std::string& dir) {
    json inputs;
    for (const char* f : {"cache.json", "patches.npy", "patch_labels.npy"}) {
        const std::string p = (fs::path(dir) / f).string();
        inputs[p] = hash_hex(hash_file(p));
    }
    return inputs;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string cache, out, config;
    double fraction = 0.3;
    std::uint64_t seed = 0;
    int epochs = 150;
    double lr = 0.01;
    double momentum = 0.9;
    int batch_size = 32;
    std::string fusion = "concat";
    int levels = -1;
    std::string stages = "64,128,256,256";
};

int cmd_train(const TrainArgs& a) {
    fs::create_directories(a.out);
    DirLock lock(a.out);
    RunLog log(a.out);

    json side;
    PatchSet ps = load_patch_cache(a.cache, side);
    stratified_split(ps, a.fraction, a.seed);
    const std::size_t n_train = ps.indices_of(Split::kTrain).size();
    log.line("split: " + std::to_string(n_train) + " train / " +
             std::to_string(ps.count() - n_train) + " test (fraction " +
             std::to_string(a.fraction) + ", seed " + std::to_string(a.seed) + ")");

    ModelConfig mc;
    mc.patch_size = ps.patch_size;
    mc.input_bands = ps.bands;
    mc.class_count = ps.class_count;
    mc.stage_channels = parse_channel_list(a.stages);
    mc.wavelet_levels = a.levels;
    mc.fusion = parse_fusion(a.fusion);

    Rng init_rng(a.seed);
    Network net = build_model(mc, init_rng);
    log.line("model: " + std::to_string(count_parameters(net)) + " parameters, " +
             std::to_string(net.levels) + " wavelet levels, fusion " + fusion_name(mc.fusion));

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.learning_rate = a.lr;
    tc.momentum = a.momentum;
    tc.batch_size = a.batch_size;
    tc.seed = a.seed;

    TrainingHistory history = fit(net, ps, tc);
    const fs::path out(a.out);
    write_file(out / "history.csv", history_to_csv(history));

    CheckpointMeta meta;
    meta.config = mc;
    meta.train_seed = tc.seed;
    meta.epoch = tc.epochs;
    meta.split_fraction = a.fraction;
    meta.split_seed = a.seed;
    save_checkpoint((out / "checkpoint").string(), net, meta);

    json cfg{{"cache", a.cache},       {"fraction", a.fraction},
             {"seed", a.seed},         {"epochs", a.epochs},
             {"lr", a.lr},             {"momentum", a.momentum},
             {"batch_size", a.batch_size}, {"fusion", a.fusion},
             {"levels", a.levels},     {"stages", a.stages}};
    write_run_json(out, "train", cfg, cache_input_hashes(a.cache));

    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", history.back().train_accuracy);
    log.line("final train accuracy: " + std::string(buf));
    log.line("checkpoint written to " + (out / "checkpoint").string());
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string cache, checkpoint, out, config;
};

int cmd_evaluate(const EvaluateArgs& a) {
    fs::create_directories(a.out);
    DirLock lock(a.out);
    RunLog log(a.out);

    json side;
    PatchSet ps = load_patch_cache(a.cache, side);
    CheckpointMeta meta;
    Network net = load_checkpoint(a.checkpoint, &meta);

    if (meta.config.class_count != ps.class_count)
        throw ArtifactMismatchError("checkpoint class count " +
                                    std::to_string(meta.config.class_count) +
                                    " does not match dataset class count " +
                                    std::to_string(ps.class_count));
    if (meta.config.patch_size != ps.patch_size)
        throw ArtifactMismatchError("checkpoint patch size " +
                                    std::to_string(meta.config.patch_size) +
                                    " does not match cached patch size " +
                                    std::to_string(ps.patch_size));
    if (meta.config.input_bands != ps.bands)
        throw ArtifactMismatchError("checkpoint band count " +
                                    std::to_string(meta.config.input_bands) +
                                    " does not match cached band count " +
                                    std::to_string(ps.bands));

    // the checkpoint records how the train/test split was drawn
    stratified_split(ps, meta.split_fraction, meta.split_seed);
    net.set_mode(Mode::kEval);
    EvalResult ev = evaluate(net, ps, ps.indices_of(Split::kTest));
    MetricsReport rep = confusion_to_metrics(ev.confusion, ev.loss);

    const fs::path out(a.out);
    const std::vector<std::string> names = default_class_names(ps.class_count);
    write_file(out / "metrics.json", report_to_json(rep).dump(2) + "\n");
    write_file(out / "report.txt", render_report(rep, names));
    write_file(out / "confusion.csv", confusion_to_csv(ev.confusion, names));

    json cfg{{"cache", a.cache}, {"checkpoint", a.checkpoint},
             {"fraction", meta.split_fraction}, {"seed", meta.split_seed}};
    json inputs = cache_input_hashes(a.cache);
    const std::string manifest = (fs::path(a.checkpoint) / "manifest.json").string();
    inputs[manifest] = hash_hex(hash_file(manifest));
    write_run_json(out, "evaluate", cfg, inputs);

    char buf[96];
    std::snprintf(buf, sizeof(buf), "Overall accuracy: %.4f", rep.overall_accuracy);
    log.line(buf);
    std::snprintf(buf, sizeof(buf), "Average accuracy: %.4f", rep.average_accuracy);
    log.line(buf);
    std::snprintf(buf, sizeof(buf), "Kappa: %.4f", rep.kappa);
    log.line(buf);
    std::snprintf(buf, sizeof(buf), "Test loss: %.6f", rep.test_loss);
    log.line(buf);
    return 0;
}

// --------------------------------------------------------------- decompose

struct DecomposeArgs {
    std::string input, out, config;
    int levels = 0;  // 0: min(4, maximal legal)
};

int cmd_decompose(const DecomposeArgs& a) {
    fs::create_directories(a.out);
    DirLock lock(a.out);
    RunLog log(a.out);

    npy::NpyArray arr = npy::load(a.input);
    std::size_t C = 1, H = 0, W = 0;
    if (arr.shape.size() == 2) {
        H = arr.shape[0];
        W = arr.shape[1];
    } else if (arr.shape.size() == 3) {
        C = arr.shape[0];
        H = arr.shape[1];
        W = arr.shape[2];
    } else {
        throw InputError(a.input + ": expected a 2-d image or 3-d [C,H,W] array, got rank " +
                         std::to_string(arr.shape.size()));
    }

    const int max_levels = max_haar_levels(H, W);
    const int levels = a.levels == 0 ? std::min(4, max_levels) : a.levels;
    if (levels < 1 || levels > max_levels)
        throw InputError(std::to_string(H) + "x" + std::to_string(W) + " input supports at most " +
                         std::to_string(max_levels) + " decomposition levels, requested " +
                         std::to_string(levels));

    Tensor image = Tensor::from_data({C, H, W}, std::move(arr.values));
    const fs::path out(a.out);
    static const char* band_names[4] = {"ll", "lh", "hl", "hh"};

    Tensor current = image;
    for (int t = 1; t <= levels; ++t) {
        HaarSubbands sb = haar_forward(current);
        for (int k = 0; k < 4; ++k) {
            const std::string stem = "level" + std::to_string(t) + "_" + band_names[k];
            npy::save_tensor((out / (stem + ".npy")).string(), sb[k]);
            // PGM shows the first channel, min-max scaled
            write_pgm((out / (stem + ".pgm")).string(), sb[k].data(), sb[k].dim(1),
                      sb[k].dim(2));
        }
        current = sb.ll;
    }

    json cfg{{"input", a.input}, {"levels", levels}};
    write_run_json(out, "decompose", cfg, json{{a.input, hash_hex(hash_file(a.input))}});
    log.line("wrote " + std::to_string(4 * levels) + " subbands (" +
             std::to_string(8 * levels) + " files) to " + a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SpectralNET wavelet-CNN pipeline for hyperspectral classification"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    CLI::App* sub_pre = app.add_subcommand(
        "preprocess", "Reduce bands by factor analysis and cache patches");
    CLI::Option* pre_data = sub_pre->add_option("--data", pre.data, "HSI cube NPY (M,N,R)");
    CLI::Option* pre_labels =
        sub_pre->add_option("--labels", pre.labels, "label map NPY (M,N), 0 = background");
    CLI::Option* pre_bands =
        sub_pre->add_option("--bands", pre.bands, "factor count B (default 3)");
    CLI::Option* pre_patch =
        sub_pre->add_option("--patch", pre.patch, "patch size S (default 64)");
    sub_pre->add_option("--out", pre.out, "output directory")->required();
    sub_pre->add_option("--config", pre.config, "JSON config file");

    TrainArgs tr;
    CLI::App* sub_tr = app.add_subcommand("train", "Train the wavelet CNN on cached patches");
    CLI::Option* tr_cache =
        sub_tr->add_option("--cache", tr.cache, "preprocess output directory");
    CLI::Option* tr_fraction =
        sub_tr->add_option("--fraction", tr.fraction, "train fraction per class (default 0.3)");
    CLI::Option* tr_seed = sub_tr->add_option("--seed", tr.seed, "RNG seed (default 0)");
    CLI::Option* tr_epochs = sub_tr->add_option("--epochs", tr.epochs, "epochs (default 150)");
    CLI::Option* tr_lr = sub_tr->add_option("--lr", tr.lr, "learning rate (default 0.01)");
    CLI::Option* tr_mom =
        sub_tr->add_option("--momentum", tr.momentum, "SGD momentum (default 0.9)");
    CLI::Option* tr_batch =
        sub_tr->add_option("--batch-size", tr.batch_size, "mini-batch size (default 32)");
    CLI::Option* tr_fusion = sub_tr->add_option("--fusion", tr.fusion,
                                                "wavelet fusion: concat or add (default concat)");
    CLI::Option* tr_levels = sub_tr->add_option(
        "--levels", tr.levels, "wavelet levels (default: min(4, stages, patch allows))");
    CLI::Option* tr_stages = sub_tr->add_option(
        "--stages", tr.stages, "per-stage channels, comma-separated (default 64,128,256,256)");
    sub_tr->add_option("--out", tr.out, "output directory")->required();
    sub_tr->add_option("--config", tr.config, "JSON config file");

    EvaluateArgs ev;
    CLI::App* sub_ev =
        app.add_subcommand("evaluate", "Evaluate a checkpoint on the held-out split");
    CLI::Option* ev_cache =
        sub_ev->add_option("--cache", ev.cache, "preprocess output directory");
    CLI::Option* ev_ckpt =
        sub_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint directory");
    sub_ev->add_option("--out", ev.out, "output directory")->required();
    sub_ev->add_option("--config", ev.config, "JSON config file");

    DecomposeArgs de;
    CLI::App* sub_de =
        app.add_subcommand("decompose", "Dump the Haar pyramid of an image or patch");
    CLI::Option* de_input =
        sub_de->add_option("--input", de.input, "NPY image [H,W] or [C,H,W]");
    CLI::Option* de_levels =
        sub_de->add_option("--levels", de.levels, "levels (default: min(4, maximal legal))");
    sub_de->add_option("--out", de.out, "output directory")->required();
    sub_de->add_option("--config", de.config, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(sub_pre)) {
            const json file_cfg = load_config_file(pre.config);
            merge_option(pre_data, file_cfg, "data", pre.data);
            merge_option(pre_labels, file_cfg, "labels", pre.labels);
            merge_option(pre_bands, file_cfg, "bands", pre.bands);
            merge_option(pre_patch, file_cfg, "patch", pre.patch);
            if (pre.data.empty() || pre.labels.empty())
                throw InputError("preprocess needs --data and --labels (flag or config file)");
            return cmd_preprocess(pre);
        }
        if (app.got_subcommand(sub_tr)) {
            const json file_cfg = load_config_file(tr.config);
            merge_option(tr_cache, file_cfg, "cache", tr.cache);
            merge_option(tr_fraction, file_cfg, "fraction", tr.fraction);
            merge_option(tr_seed, file_cfg, "seed", tr.seed);
            merge_option(tr_epochs, file_cfg, "epochs", tr.epochs);
            merge_option(tr_lr, file_cfg, "lr", tr.lr);
            merge_option(tr_mom, file_cfg, "momentum", tr.momentum);
            merge_option(tr_batch, file_cfg, "batch_size", tr.batch_size);
            merge_option(tr_fusion, file_cfg, "fusion", tr.fusion);
            merge_option(tr_levels, file_cfg, "levels", tr.levels);
            merge_option(tr_stages, file_cfg, "stages", tr.stages);
            if (tr.cache.empty()) throw InputError("train needs --cache (flag or config file)");
            return cmd_train(tr);
        }
        if (app.got_subcommand(sub_ev)) {
            const json file_cfg = load_config_file(ev.config);
            merge_option(ev_cache, file_cfg, "cache", ev.cache);
            merge_option(ev_ckpt, file_cfg, "checkpoint", ev.checkpoint);
            if (ev.cache.empty() || ev.checkpoint.empty())
                throw InputError("evaluate needs --cache and --checkpoint (flag or config file)");
            return cmd_evaluate(ev);
        }
        const json file_cfg = load_config_file(de.config);
        merge_option(de_input, file_cfg, "input", de.input);
        merge_option(de_levels, file_cfg, "levels", de.levels);
        if (de.input.empty()) throw InputError("decompose needs --input (flag or config file)");
        return cmd_decompose(de);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingDivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ArtifactMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
