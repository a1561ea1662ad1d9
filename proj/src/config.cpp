#include "jsdl/config.hpp"

#include <fstream>
#include <sstream>

namespace jsdl {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("config: bad number for " + key + ": " + v);
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("config: bad integer for " + key + ": " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config: bad boolean for " + key + ": " + v);
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(to_long(key, trim(item))));
    }
    if (out.empty()) throw ValidationError("config: empty list for " + key);
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset_path.has_value() == synth.has_value()) {
        throw ValidationError("config requires exactly one of [data] path or a [synth] block");
    }
    if (synth) synth->validate();
    if (atoms_per_class < 1) throw ValidationError("config: atoms_per_class must be >= 1");
    if (output_dir.empty()) throw ValidationError("config: [output] dir is required");
    hp.validate(prior);
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    bool saw_synth = false;

    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ValidationError("config line " + std::to_string(lineno) +
                                      ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "data" && section != "synth" && section != "model" &&
                section != "hyperparams" && section != "output") {
                throw ValidationError("config: unknown section [" + section + "]");
            }
            if (section == "synth") {
                cfg.synth = SynthSpec{};
                saw_synth = true;
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw ValidationError("config: key " + key + " outside any section");
        }

        if (section == "data") {
            if (key == "path") cfg.dataset_path = value;
            else throw ValidationError("config: unknown key [data] " + key);
        } else if (section == "synth") {
            SynthSpec& sp = *cfg.synth;
            if (key == "classes") sp.classes = static_cast<int>(to_long(key, value));
            else if (key == "modalities") sp.modalities = static_cast<int>(to_long(key, value));
            else if (key == "dims") sp.dims = to_int_list(key, value);
            else if (key == "atoms_per_class") sp.atoms_per_class = static_cast<int>(to_long(key, value));
            else if (key == "train_per_class") sp.train_per_class = static_cast<int>(to_long(key, value));
            else if (key == "test_per_class") sp.test_per_class = static_cast<int>(to_long(key, value));
            else if (key == "noise") sp.noise = to_double(key, value);
            else if (key == "correlated") sp.correlated = to_bool(key, value);
            else if (key == "seed") cfg.synth_seed = static_cast<std::uint64_t>(to_long(key, value));
            else throw ValidationError("config: unknown key [synth] " + key);
        } else if (section == "model") {
            if (key == "head") cfg.head = head_from_string(value);
            else if (key == "prior") cfg.prior = prior_from_string(value);
            else if (key == "atoms_per_class") cfg.atoms_per_class = static_cast<int>(to_long(key, value));
            else throw ValidationError("config: unknown key [model] " + key);
        } else if (section == "hyperparams") {
            Hyperparams& hp = cfg.hp;
            if (key == "lambda1") hp.lambda1 = to_double(key, value);
            else if (key == "lambda1p") hp.lambda1p = to_double(key, value);
            else if (key == "lambda2") hp.lambda2 = to_double(key, value);
            else if (key == "nu") hp.nu = to_double(key, value);
            else if (key == "rho") hp.rho = to_double(key, value);
            else if (key == "t0") hp.t0 = to_long(key, value);
            else if (key == "epochs") hp.epochs = static_cast<int>(to_long(key, value));
            else if (key == "batch_size") hp.batch_size = static_cast<int>(to_long(key, value));
            else if (key == "active_tol") hp.active_tol = to_double(key, value);
            else if (key == "admm_tol") hp.admm_tol = to_double(key, value);
            else if (key == "admm_max_iter") hp.admm_max_iter = static_cast<int>(to_long(key, value));
            else if (key == "seed") hp.seed = static_cast<std::uint64_t>(to_long(key, value));
            else throw ValidationError("config: unknown key [hyperparams] " + key);
        } else if (section == "output") {
            if (key == "dir") cfg.output_dir = value;
            else throw ValidationError("config: unknown key [output] " + key);
        }
    }
    if (saw_synth && cfg.dataset_path) {
        throw ValidationError("config: [data] and [synth] are mutually exclusive");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ValidationError("cannot read config " + file.string());
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_config_text(buffer.str());
}

}  // namespace jsdl
