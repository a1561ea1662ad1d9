// Command-line interface: synthetic data generation, training,
// encoding, evaluation, gradient verification and the reconstructive
// baseline. Exit codes: 0 success, 1 validation error, 2 numerical
// failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <omp.h>

#include "jsdl/config.hpp"
#include "jsdl/data.hpp"
#include "jsdl/io.hpp"
#include "jsdl/oracle.hpp"
#include "jsdl/train.hpp"

namespace fs = std::filesystem;
using namespace jsdl;

namespace {

struct GlobalFlags {
    int threads = 0;
    bool parallel() const { return threads != 1; }
};

Dataset obtain_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset_path) return load_dataset(*cfg.dataset_path);
    return generate_synthetic(*cfg.synth, cfg.synth_seed).data;
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file);
    if (!os) throw ValidationError("cannot write " + file.string());
    os << text;
}

int run_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out) {
    const SynthResult result = generate_synthetic(spec, seed);
    save_dataset(result.data, out);
    std::printf("wrote %lld samples (%d classes, %d modalities) to %s\n",
                static_cast<long long>(result.data.size()), result.data.classes,
                result.data.modalities(), out.c_str());
    return 0;
}

int run_train(const std::string& config_path, const GlobalFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    cfg.validate();
    Dataset data = obtain_dataset(cfg);
    data.validate();
    const SampleSet train = data.subset(Split::Train);
    if (train.size() == 0) throw ValidationError("dataset has no training split");

    FitOptions fopts;
    fopts.parallel = flags.parallel();

    const Index d = static_cast<Index>(cfg.atoms_per_class) * data.classes;
    TrainState state = init_model(train, cfg.hp, cfg.head, cfg.prior,
                                  static_cast<Index>(data.classes), d, fopts);

    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    save_model(Model{state.dict, state.bank, cfg.prior, cfg.hp}, out / "init_model");

    state = supervised_fit(train, cfg.hp, std::move(state), fopts);
    save_model(Model{state.dict, state.bank, cfg.prior, cfg.hp}, out / "model");

    std::ostringstream log;
    log << "epoch,step,objective,mean_kkt,mean_active\n";
    for (const TrainRecord& rec : state.log) {
        char line[160];
        std::snprintf(line, sizeof(line), "%d,%ld,%.17g,%.17g,%.17g\n", rec.epoch, rec.step,
                      rec.objective, rec.mean_kkt, rec.mean_active);
        log << line;
    }
    write_text(out / "train_log.csv", log.str());
    for (const TrainRecord& rec : state.log) {
        std::printf("epoch %3d  step %5ld  objective %.6f  kkt %.2e  active %.1f\n", rec.epoch,
                    rec.step, rec.objective, rec.mean_kkt, rec.mean_active);
    }
    std::printf("model written to %s\n", (out / "model").string().c_str());
    return 0;
}

int run_eval(const std::string& model_dir, const std::string& data_dir, const std::string& out_dir,
             const std::string& split_name, const GlobalFlags& flags) {
    const Model model = load_model(model_dir);
    Dataset data = load_dataset(data_dir);
    data.validate();
    const Split split = split_name == "train" ? Split::Train
                      : split_name == "val"   ? Split::Val
                                              : Split::Test;
    const SampleSet subset = data.subset(split);
    if (subset.size() == 0) throw ValidationError("requested split is empty");

    const PriorSpec prior = prior_from_hyperparams(model.prior, model.hp);
    const Metrics metrics = evaluate(model.dict, model.bank, prior, subset,
                                     encode_options(model.hp), flags.parallel());
    std::printf("%s", metrics.to_string().c_str());
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text(fs::path(out_dir) / "metrics.csv", metrics.to_csv());
        std::printf("metrics written to %s\n", (fs::path(out_dir) / "metrics.csv").string().c_str());
    }
    return 0;
}

int run_encode(const std::string& model_dir, const std::string& data_dir,
               const std::string& out_dir, const std::string& split_name,
               const GlobalFlags& flags) {
    const Model model = load_model(model_dir);
    Dataset data = load_dataset(data_dir);
    data.validate();
    const Split split = split_name == "train" ? Split::Train
                      : split_name == "val"   ? Split::Val
                                              : Split::Test;
    const SampleSet subset = data.subset(split);
    if (subset.size() == 0) throw ValidationError("requested split is empty");

    const PriorSpec prior = prior_from_hyperparams(model.prior, model.hp);
    EncoderContext ctx(model.dict, prior.lambda2);
    std::vector<Index> all(static_cast<std::size_t>(subset.size()));
    for (Index i = 0; i < subset.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    const std::vector<EncodeResult> encs =
        batch_encode(ctx, subset, all, prior, encode_options(model.hp), flags.parallel());

    std::vector<Mat> codes;
    codes.reserve(encs.size());
    for (const EncodeResult& e : encs) codes.push_back(e.codes);
    save_codes(codes, out_dir);
    std::printf("encoded %zu samples to %s\n", codes.size(), out_dir.c_str());
    return 0;
}

int run_gradcheck(int instances, std::uint64_t seed, double tolerance, const GlobalFlags& flags) {
    oracle::GradCheckOptions opts;
    opts.instances = instances;
    opts.seed = seed;
    opts.tolerance = tolerance;
    opts.parallel = flags.parallel();
    const oracle::OracleReport report = oracle::gradcheck(opts);
    std::printf("%s", report.to_string().c_str());
    if (!report.pass()) throw NumericalError("gradcheck failed");
    return 0;
}

int run_baseline(const std::string& data_dir, const std::string& mode, int atoms_per_class,
                 double lambda1, std::uint64_t seed, const GlobalFlags& flags) {
    Dataset data = load_dataset(data_dir);
    data.validate();
    const SampleSet train = data.subset(Split::Train);
    const SampleSet test = data.subset(Split::Test);
    if (train.size() == 0 || test.size() == 0) {
        throw ValidationError("baseline requires nonempty train and test splits");
    }

    ClassDictionary cd;
    if (mode == "jsrc") {
        cd = baseline_from_samples(train, atoms_per_class, data.classes, seed);
    } else if (mode == "jsrc-udl") {
        Hyperparams hp;
        hp.lambda1 = lambda1;
        hp.seed = seed;
        FitOptions fopts;
        fopts.parallel = flags.parallel();
        cd = baseline_from_unsupervised(train, atoms_per_class, data.classes, hp, Prior::L12,
                                        fopts);
    } else {
        throw ValidationError("baseline mode must be jsrc or jsrc-udl");
    }
    const Metrics metrics =
        evaluate_baseline(cd, lambda1, test, data.classes, EncodeOptions{}, flags.parallel());
    std::printf("%s", metrics.to_string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal task-driven dictionary learning"};
    app.require_subcommand(1);
    GlobalFlags flags;
    app.add_option("--threads", flags.threads, "worker threads (1 = serial, 0 = default)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
    SynthSpec spec;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    std::vector<int> dims = {20, 20, 20};
    synth->add_option("--classes", spec.classes, "number of classes");
    synth->add_option("--modalities", spec.modalities, "number of modalities");
    synth->add_option("--dims", dims, "feature length per modality")->delimiter(',');
    synth->add_option("--atoms-per-class", spec.atoms_per_class, "planted atoms per class");
    synth->add_option("--train-per-class", spec.train_per_class, "training samples per class");
    synth->add_option("--test-per-class", spec.test_per_class, "test samples per class");
    synth->add_option("--noise", spec.noise, "additive noise level");
    synth->add_flag("--correlated", spec.correlated, "duplicate codes across modalities");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train a model from a config file");
    std::string config_path;
    train->add_option("--config", config_path, "experiment config file")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a model on a dataset split");
    std::string model_dir, data_dir, out_dir, split_name = "test";
    eval->add_option("--model", model_dir, "model directory")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--split", split_name, "train, val or test");
    eval->add_option("--out", out_dir, "directory for metrics CSV");

    // encode
    auto* encode = app.add_subcommand("encode", "encode a dataset split with a model");
    std::string enc_model, enc_data, enc_out, enc_split = "test";
    encode->add_option("--model", enc_model, "model directory")->required();
    encode->add_option("--data", enc_data, "dataset directory")->required();
    encode->add_option("--split", enc_split, "train, val or test");
    encode->add_option("--out", enc_out, "output directory")->required();

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "verify implicit gradients numerically");
    int instances = 100;
    std::uint64_t gc_seed = 7;
    double gc_tol = 1e-4;
    gradcheck->add_option("--instances", instances, "number of random instances");
    gradcheck->add_option("--seed", gc_seed, "instance seed");
    gradcheck->add_option("--tolerance", gc_tol, "max relative error gate");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "reconstructive residual classification");
    std::string bl_data, bl_mode = "jsrc-udl";
    int bl_apc = 3;
    double bl_lambda1 = 0.01;
    std::uint64_t bl_seed = 0;
    baseline->add_option("--data", bl_data, "dataset directory")->required();
    baseline->add_option("--mode", bl_mode, "jsrc (raw samples) or jsrc-udl (learned)");
    baseline->add_option("--atoms-per-class", bl_apc, "dictionary atoms per class");
    baseline->add_option("--lambda1", bl_lambda1, "encoding penalty");
    baseline->add_option("--seed", bl_seed, "atom selection seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    if (flags.threads > 0) omp_set_num_threads(flags.threads);

    try {
        if (*synth) {
            spec.dims = dims;
            if (static_cast<int>(spec.dims.size()) == 1 && spec.modalities > 1) {
                spec.dims.assign(static_cast<std::size_t>(spec.modalities), spec.dims[0]);
            }
            return run_synth(spec, synth_seed, synth_out);
        }
        if (*train) return run_train(config_path, flags);
        if (*eval) return run_eval(model_dir, data_dir, out_dir, split_name, flags);
        if (*encode) return run_encode(enc_model, enc_data, enc_out, enc_split, flags);
        if (*gradcheck) return run_gradcheck(instances, gc_seed, gc_tol, flags);
        if (*baseline) return run_baseline(bl_data, bl_mode, bl_apc, bl_lambda1, bl_seed, flags);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
