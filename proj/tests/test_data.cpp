#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "jsdl/config.hpp"
#include "jsdl/data.hpp"
#include "jsdl/io.hpp"
#include "jsdl/rng.hpp"

using namespace jsdl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

SynthSpec demo_spec() {
    SynthSpec spec;
    spec.classes = 3;
    spec.modalities = 2;
    spec.dims = {8, 6};
    spec.atoms_per_class = 2;
    spec.train_per_class = 6;
    spec.test_per_class = 3;
    spec.noise = 0.2;
    return spec;
}

std::vector<char> slurp(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    REQUIRE(is);
    return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("matrix files round-trip bit-exactly") {
    TempDir tmp("jsdl_test_mat");
    Rng rng(3);
    Mat m(7, 5);
    for (Index j = 0; j < 5; ++j)
        for (Index i = 0; i < 7; ++i) m(i, j) = rng.normal();
    m(0, 0) = -0.0;
    m(1, 1) = 1e-300;
    save_matrix(tmp.path / "m.bin", m);
    const Mat back = load_matrix(tmp.path / "m.bin");
    REQUIRE(back.rows() == 7);
    REQUIRE(back.cols() == 5);
    CHECK(std::memcmp(m.data(), back.data(), sizeof(double) * 35) == 0);
}

TEST_CASE("matrix loader rejects corrupt files") {
    TempDir tmp("jsdl_test_corrupt");
    Mat m = Mat::Ones(4, 3);
    save_matrix(tmp.path / "m.bin", m);

    // bad magic
    {
        std::vector<char> bytes = slurp(tmp.path / "m.bin");
        bytes[0] = 'X';
        std::ofstream os(tmp.path / "bad.bin", std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_matrix(tmp.path / "bad.bin"), BadMagic);

    // truncated payload
    {
        std::vector<char> bytes = slurp(tmp.path / "m.bin");
        bytes.resize(bytes.size() - 5);
        std::ofstream os(tmp.path / "short.bin", std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_matrix(tmp.path / "short.bin"), TruncatedFile);

    // trailing garbage
    {
        std::vector<char> bytes = slurp(tmp.path / "m.bin");
        bytes.push_back('z');
        std::ofstream os(tmp.path / "long.bin", std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_matrix(tmp.path / "long.bin"), TruncatedFile);
}

TEST_CASE("datasets round-trip and rewrite byte-identically") {
    TempDir tmp("jsdl_test_ds");
    const SynthResult synth = generate_synthetic(demo_spec(), 5);
    const fs::path first = tmp.path / "a";
    const fs::path second = tmp.path / "b";
    save_dataset(synth.data, first);
    const Dataset loaded = load_dataset(first);
    CHECK_NOTHROW(loaded.validate());
    save_dataset(loaded, second);

    for (const char* name :
         {"manifest.txt", "features.1.bin", "features.2.bin", "labels.bin", "splits.bin"}) {
        CHECK(slurp(first / name) == slurp(second / name));
    }
    for (int s = 0; s < 2; ++s) {
        CHECK((loaded.features[static_cast<std::size_t>(s)] -
               synth.data.features[static_cast<std::size_t>(s)])
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
    CHECK(loaded.labels == synth.data.labels);
}

TEST_CASE("dataset loader rejects modality count mismatches") {
    TempDir tmp("jsdl_test_extra");
    const SynthResult synth = generate_synthetic(demo_spec(), 7);
    save_dataset(synth.data, tmp.path / "ds");
    // an extra feature file contradicts the manifest
    save_matrix(tmp.path / "ds" / "features.3.bin", Mat::Ones(2, 2));
    CHECK_THROWS_AS(load_dataset(tmp.path / "ds"), DimensionMismatch);
}

TEST_CASE("generator is deterministic per seed and seed-sensitive") {
    const SynthResult a = generate_synthetic(demo_spec(), 11);
    const SynthResult b = generate_synthetic(demo_spec(), 11);
    const SynthResult c = generate_synthetic(demo_spec(), 12);
    CHECK((a.data.features[0] - b.data.features[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.data.features[0] - c.data.features[0]).cwiseAbs().maxCoeff() > 0.0);

    CHECK_NOTHROW(a.data.validate());
    const SampleSet train = a.data.subset(Split::Train);
    const SampleSet test = a.data.subset(Split::Test);
    CHECK(train.size() == 18);
    CHECK(test.size() == 9);
}

TEST_CASE("generator rejects malformed specs") {
    SynthSpec spec = demo_spec();
    spec.dims = {8};
    CHECK_THROWS_AS(generate_synthetic(spec, 1), InvalidSpec);
    spec = demo_spec();
    spec.noise = -1;
    CHECK_THROWS_AS(generate_synthetic(spec, 1), InvalidSpec);
}

TEST_CASE("noise-free one-atom classes are perfectly separable by residual") {
    SynthSpec spec = demo_spec();
    spec.atoms_per_class = 1;
    spec.noise = 0.0;
    const SynthResult synth = generate_synthetic(spec, 13);
    const SampleSet train = synth.data.subset(Split::Train);
    const SampleSet test = synth.data.subset(Split::Test);

    const ClassDictionary cd = baseline_from_samples(train, 1, 3, 99);
    const Metrics metrics = evaluate_baseline(cd, 0.05, test, 3);
    CHECK(metrics.accuracy == doctest::Approx(1.0));
}

TEST_CASE("correlated mode duplicates coefficients across modalities") {
    SynthSpec spec = demo_spec();
    spec.correlated = true;
    spec.noise = 0.0;
    const SynthResult synth = generate_synthetic(spec, 17);
    // with duplicated codes and no noise, per-modality reconstructions use
    // identical coefficients: verify through the planted dictionaries
    const Mat& F0 = synth.data.features[0];
    const Mat& F1 = synth.data.features[1];
    CHECK(F0.cols() == F1.cols());
    // sanity: normalized columns
    for (Index i = 0; i < F0.cols(); ++i) {
        CHECK(F0.col(i).norm() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("residual classifier ties break toward class 1") {
    // sample orthogonal to every atom: alpha = 0, all residuals equal
    ClassDictionary cd;
    Mat D(4, 2);
    D.setZero();
    D(0, 0) = 1.0;
    D(1, 1) = 1.0;
    cd.dict.dicts = {D};
    cd.atom_class = {1, 2};
    Vec x(4);
    x << 0, 0, 1, -1;
    CHECK(residual_classify({x}, cd, 0.1) == 1);
}

TEST_CASE("metrics bookkeeping") {
    // a perfect predictor scores 1.0
    std::vector<int> truth{1, 2, 3, 1, 2, 3};
    Metrics perfect = metrics_from_predictions(truth, truth, 3);
    CHECK(perfect.accuracy == doctest::Approx(1.0));

    // confusion rows sum to the per-class counts
    std::vector<int> pred{1, 3, 3, 2, 2, 1};
    Metrics m = metrics_from_predictions(pred, truth, 3);
    for (int k = 0; k < 3; ++k) {
        int count = 0;
        for (int t : truth) count += (t == k + 1);
        CHECK(m.confusion.row(k).sum() == count);
    }
    CHECK(m.confusion.sum() == 6);

    // balanced random binary predictions hover near one half
    Rng rng(2027);
    const int n = 4000;
    std::vector<int> rtruth(n), rpred(n);
    for (int i = 0; i < n; ++i) {
        rtruth[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.below(2));
        rpred[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.below(2));
    }
    const Metrics coin = metrics_from_predictions(rpred, rtruth, 2);
    // three-sigma binomial band around 0.5
    CHECK(coin.accuracy > 0.5 - 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    CHECK(coin.accuracy < 0.5 + 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));

    const std::string csv = m.to_csv();
    CHECK(csv.find("accuracy,") == 0);
    CHECK(csv.find("confusion_row_1") != std::string::npos);
}

TEST_CASE("models round-trip through their directory format") {
    TempDir tmp("jsdl_test_model");
    Rng rng(19);
    Model model;
    for (int s = 0; s < 2; ++s) {
        Mat D(6, 4);
        for (Index j = 0; j < 4; ++j) {
            for (Index i = 0; i < 6; ++i) D(i, j) = rng.normal();
            D.col(j).normalize();
        }
        model.dict.dicts.push_back(D);
        Mat W(3, 4);
        for (Index i = 0; i < 3; ++i)
            for (Index j = 0; j < 4; ++j) W(i, j) = rng.normal();
        model.bank.weights.push_back(W);
    }
    model.bank.head = Head::Softmax;
    model.prior = Prior::Mixed;
    model.hp.lambda1 = 0.0123;
    model.hp.lambda1p = 0.00045;
    model.hp.nu = 1e-7;

    save_model(model, tmp.path / "m");
    const Model back = load_model(tmp.path / "m");
    CHECK(back.bank.head == Head::Softmax);
    CHECK(back.prior == Prior::Mixed);
    CHECK(back.hp.lambda1 == model.hp.lambda1);
    CHECK(back.hp.lambda1p == model.hp.lambda1p);
    for (int s = 0; s < 2; ++s) {
        const std::size_t su = static_cast<std::size_t>(s);
        CHECK((back.dict.dicts[su] - model.dict.dicts[su]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.bank.weights[su] - model.bank.weights[su]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("codes directory stores the stacked layout") {
    TempDir tmp("jsdl_test_codes");
    Mat c0(3, 2), c1(3, 2);
    c0 << 1, 4, 2, 5, 3, 6;
    c1 = 10 * c0;
    save_codes({c0, c1}, tmp.path / "codes");
    const Mat stacked = load_matrix(tmp.path / "codes" / "codes.bin");
    REQUIRE(stacked.rows() == 6);
    REQUIRE(stacked.cols() == 2);
    // column 0 = [alpha^1; alpha^2] of sample 0
    CHECK(stacked(0, 0) == 1);
    CHECK(stacked(2, 0) == 3);
    CHECK(stacked(3, 0) == 4);
    CHECK(stacked(5, 0) == 6);
    CHECK(stacked(0, 1) == 10);
}

TEST_CASE("config parsing accepts the documented schema") {
    const std::string text = R"(
# comment
[synth]
classes = 4
modalities = 2
dims = 10, 12
atoms_per_class = 2
train_per_class = 8
test_per_class = 4
noise = 0.3
correlated = true
seed = 5

[model]
head = quadratic
prior = mixed
atoms_per_class = 3

[hyperparams]
lambda1 = 0.02
lambda1p = 0.001
rho = 0.15
epochs = 6
batch_size = 20
seed = 42

[output]
dir = /tmp/out
)";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK_NOTHROW(cfg.validate());
    REQUIRE(cfg.synth.has_value());
    CHECK(cfg.synth->classes == 4);
    CHECK(cfg.synth->dims == std::vector<int>{10, 12});
    CHECK(cfg.synth->correlated);
    CHECK(cfg.synth_seed == 5);
    CHECK(cfg.head == Head::Quadratic);
    CHECK(cfg.prior == Prior::Mixed);
    CHECK(cfg.atoms_per_class == 3);
    CHECK(cfg.hp.lambda1 == doctest::Approx(0.02));
    CHECK(cfg.hp.lambda1p == doctest::Approx(0.001));
    CHECK(cfg.hp.epochs == 6);
    CHECK(cfg.hp.seed == 42);
    CHECK(cfg.output_dir == "/tmp/out");
}

TEST_CASE("config parsing rejects unknown keys and sections") {
    CHECK_THROWS_AS(parse_config_text("[model]\nheads = quadratic\n"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("[training]\nrho = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("rho = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("[hyperparams]\nrho = fast\n"), ValidationError);
    // both data and synth is ambiguous
    ExperimentConfig cfg = parse_config_text("[data]\npath = /x\n[output]\ndir = /y\n");
    cfg.synth = SynthSpec{};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    // neither is too little
    ExperimentConfig none = parse_config_text("[output]\ndir = /y\n");
    CHECK_THROWS_AS(none.validate(), ValidationError);
}

TEST_CASE("dataset validation catches denormalized features") {
    SynthResult synth = generate_synthetic(demo_spec(), 23);
    synth.data.features[0](0, 0) += 0.1;
    CHECK_THROWS_AS(synth.data.validate(), ValidationError);
}
