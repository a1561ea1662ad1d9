// End-to-end checks of the command-line tool: exit codes, the rho = 0
// train/init identity, and the noise-free evaluation path. Prints one
// line per check; the exit code is the number of failures.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int failures = 0;
std::string cli;
fs::path root;

void check(bool ok, const std::string& name) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAILED", name.c_str());
    if (!ok) ++failures;
}

int run(const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > " + (root / "stdout.txt").string() +
                            " 2> " + (root / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_stdout() {
    std::ifstream is(root / "stdout.txt");
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

std::vector<char> slurp(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    const auto ba = slurp(a), bb = slurp(b);
    return !ba.empty() && ba == bb;
}

void write_config(const fs::path& file, const fs::path& data_dir, const fs::path& out_dir,
                  double rho) {
    std::ofstream os(file);
    os << "[data]\npath = " << data_dir.string() << "\n\n"
       << "[model]\nhead = quadratic\nprior = l12\natoms_per_class = 1\n\n"
       << "[hyperparams]\nlambda1 = 0.05\nrho = " << rho
       << "\nepochs = 3\nbatch_size = 10\nseed = 4\n\n"
       << "[output]\ndir = " << out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-cli>\n");
        return 64;
    }
    cli = argv[1];
    root = fs::temp_directory_path() / "jsdl_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);

    // noise-free one-atom dataset: every sample is a scaled atom
    const fs::path data = root / "data";
    check(run("synth --classes 3 --modalities 2 --dims 12,10 --atoms-per-class 1 "
              "--train-per-class 8 --test-per-class 4 --noise 0 --seed 2 --out \"" +
              data.string() + "\"") == 0,
          "synth succeeds");

    // rho = 0: the trained model equals the init model file for file
    const fs::path out0 = root / "rho0";
    write_config(root / "rho0.ini", data, out0, 0.0);
    check(run("--threads 1 train --config \"" + (root / "rho0.ini").string() + "\"") == 0,
          "train (rho = 0) succeeds");
    bool identical = true;
    for (const char* name : {"manifest.txt", "dict.1.bin", "dict.2.bin", "weights.1.bin",
                             "weights.2.bin"}) {
        identical = identical && same_bytes(out0 / "model" / name, out0 / "init_model" / name);
    }
    check(identical, "rho = 0 leaves the saved model equal to the init model");

    // a real train run, then eval reaches accuracy 1.0 on noise-free data
    const fs::path out1 = root / "trained";
    write_config(root / "train.ini", data, out1, 0.2);
    check(run("train --config \"" + (root / "train.ini").string() + "\"") == 0, "train succeeds");
    check(run("eval --model \"" + (out1 / "model").string() + "\" --data \"" + data.string() +
              "\" --split test --out \"" + (out1 / "metrics").string() + "\"") == 0,
          "eval succeeds");
    check(last_stdout().find("accuracy 1.0000") != std::string::npos,
          "noise-free evaluation reaches accuracy 1.0");
    {
        std::ifstream metrics(out1 / "metrics" / "metrics.csv");
        std::string first;
        std::getline(metrics, first);
        check(first.rfind("accuracy,1", 0) == 0, "metrics CSV records the accuracy");
    }

    // encode writes a codes directory with the documented shape
    check(run("encode --model \"" + (out1 / "model").string() + "\" --data \"" + data.string() +
              "\" --split test --out \"" + (out1 / "codes").string() + "\"") == 0,
          "encode succeeds");
    check(fs::exists(out1 / "codes" / "codes.bin") && fs::exists(out1 / "codes" / "manifest.txt"),
          "encode emits codes.bin and a manifest");

    // baseline on the noise-free task is exact as well
    check(run("baseline --data \"" + data.string() + "\" --mode jsrc --atoms-per-class 1 "
              "--lambda1 0.05 --seed 1") == 0,
          "baseline succeeds");
    check(last_stdout().find("accuracy 1.0000") != std::string::npos,
          "jsrc baseline is exact on the noise-free task");

    // a tiny gradcheck passes with exit code 0
    check(run("gradcheck --instances 6 --seed 7") == 0, "gradcheck exits 0 when the gate holds");

    // validation failures exit 1
    check(run("train --config \"" + (root / "missing.ini").string() + "\"") == 1,
          "missing config exits 1");
    {
        std::ofstream bad(root / "bad.ini");
        bad << "[hyperparams]\nwarp = 9\n";
    }
    check(run("train --config \"" + (root / "bad.ini").string() + "\"") == 1,
          "unknown config key exits 1");
    check(run("eval --model \"" + (root / "nothing").string() + "\" --data \"" + data.string() +
              "\"") == 1,
          "missing model exits 1");

    // numerical failure exits 2: an unreachable gradcheck tolerance
    check(run("gradcheck --instances 4 --seed 7 --tolerance 1e-18") == 2,
          "failed gradcheck exits 2");

    fs::remove_all(root);
    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
