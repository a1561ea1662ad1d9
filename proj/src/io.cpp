#include "jsdl/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are not supported");

namespace jsdl {

namespace {

constexpr char kMagic[4] = {'J', 'S', 'D', 'L'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ValidationError("trailing characters in number: " + s);
        return v;
    } catch (const std::invalid_argument&) {
        throw ValidationError("not a number: " + s);
    } catch (const std::out_of_range&) {
        throw ValidationError("number out of range: " + s);
    }
}

long parse_long(const std::string& s) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw ValidationError("trailing characters in integer: " + s);
        return v;
    } catch (const std::invalid_argument&) {
        throw ValidationError("not an integer: " + s);
    } catch (const std::out_of_range&) {
        throw ValidationError("integer out of range: " + s);
    }
}

// ordered key=value file
class Manifest {
public:
    void set(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
    }
    void set(const std::string& key, long v) { set(key, std::to_string(v)); }
    void set(const std::string& key, double v) { set(key, format_double(v)); }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : entries_) {
            if (k == key) return v;
        }
        throw ValidationError("manifest key missing: " + key);
    }
    long get_long(const std::string& key) const { return parse_long(get(key)); }
    double get_double(const std::string& key) const { return parse_double(get(key)); }

    void save(const std::filesystem::path& file) const {
        std::ofstream os(file);
        if (!os) throw ValidationError("cannot write " + file.string());
        for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
    }

    static Manifest load(const std::filesystem::path& file) {
        std::ifstream is(file);
        if (!is) throw ValidationError("cannot read " + file.string());
        Manifest m;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw ValidationError("malformed manifest line: " + line);
            }
            m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        }
        return m;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace

void save_matrix(const std::filesystem::path& file, const Mat& m) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + file.string());
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(m.rows()));
    write_u32(os, static_cast<std::uint32_t>(m.cols()));
    write_u32(os, 0);  // reserved
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            os.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    if (!os) throw ValidationError("short write to " + file.string());
}

Mat load_matrix(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ValidationError("cannot read " + file.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw BadMagic("bad magic in " + file.string());
    }
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    read_u32(is);  // reserved
    if (!is) throw TruncatedFile("truncated header in " + file.string());
    if (rows > (1u << 30) || cols > (1u << 30)) {
        throw ValidationError("implausible matrix shape in " + file.string());
    }
    Mat m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double v;
            is.read(reinterpret_cast<char*>(&v), 8);
            if (!is) throw TruncatedFile("truncated payload in " + file.string());
            m(static_cast<Index>(r), static_cast<Index>(c)) = v;
        }
    }
    char extra;
    if (is.read(&extra, 1)) {
        throw TruncatedFile("trailing bytes in " + file.string());
    }
    return m;
}

void save_u32(const std::filesystem::path& file, const std::vector<std::uint32_t>& values) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + file.string());
    for (std::uint32_t v : values) write_u32(os, v);
    if (!os) throw ValidationError("short write to " + file.string());
}

std::vector<std::uint32_t> load_u32(const std::filesystem::path& file, std::size_t count) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ValidationError("cannot read " + file.string());
    std::vector<std::uint32_t> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = read_u32(is);
        if (!is) throw TruncatedFile("truncated file " + file.string());
    }
    char extra;
    if (is.read(&extra, 1)) throw TruncatedFile("trailing bytes in " + file.string());
    return values;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Manifest m;
    m.set("format", "jsdl-dataset");
    m.set("version", 1L);
    m.set("precision", "float64");
    m.set("S", static_cast<long>(data.modalities()));
    m.set("K", static_cast<long>(data.classes));
    m.set("N", static_cast<long>(data.size()));
    for (int s = 0; s < data.modalities(); ++s) {
        const std::string prefix = "modality." + std::to_string(s + 1);
        m.set(prefix + ".name", data.modality_names[static_cast<std::size_t>(s)]);
        m.set(prefix + ".dim",
              static_cast<long>(data.features[static_cast<std::size_t>(s)].rows()));
        save_matrix(dir / ("features." + std::to_string(s + 1) + ".bin"),
                    data.features[static_cast<std::size_t>(s)]);
    }
    std::vector<std::uint32_t> labels, splits;
    for (int y : data.labels) labels.push_back(static_cast<std::uint32_t>(y));
    for (Split sp : data.split) splits.push_back(static_cast<std::uint32_t>(sp));
    save_u32(dir / "labels.bin", labels);
    save_u32(dir / "splits.bin", splits);
    m.save(dir / "manifest.txt");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const Manifest m = Manifest::load(dir / "manifest.txt");
    if (m.get("format") != "jsdl-dataset") throw ValidationError("not a dataset directory");
    Dataset data;
    const long S = m.get_long("S");
    data.classes = static_cast<int>(m.get_long("K"));
    const long N = m.get_long("N");

    // modality count must match the files on disk
    long files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("features.", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".bin") {
            ++files;
        }
    }
    if (files != S) {
        throw DimensionMismatch("manifest declares " + std::to_string(S) + " modalities but " +
                                std::to_string(files) + " feature files are present");
    }

    for (long s = 1; s <= S; ++s) {
        const std::string prefix = "modality." + std::to_string(s);
        data.modality_names.push_back(m.get(prefix + ".name"));
        Mat F = load_matrix(dir / ("features." + std::to_string(s) + ".bin"));
        if (F.rows() != m.get_long(prefix + ".dim") || F.cols() != N) {
            throw DimensionMismatch("feature matrix " + std::to_string(s) +
                                    " does not match the manifest shape");
        }
        data.features.push_back(std::move(F));
    }
    for (std::uint32_t v : load_u32(dir / "labels.bin", static_cast<std::size_t>(N))) {
        data.labels.push_back(static_cast<int>(v));
    }
    for (std::uint32_t v : load_u32(dir / "splits.bin", static_cast<std::size_t>(N))) {
        if (v > 2) throw ValidationError("split tag out of range");
        data.split.push_back(static_cast<Split>(v));
    }
    return data;
}

void save_model(const Model& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Manifest m;
    m.set("format", "jsdl-model");
    m.set("version", 1L);
    m.set("S", static_cast<long>(model.dict.modalities()));
    m.set("d", static_cast<long>(model.dict.atoms()));
    m.set("K", static_cast<long>(model.bank.classes()));
    m.set("head", to_string(model.bank.head));
    m.set("prior", to_string(model.prior));
    m.set("lambda1", model.hp.lambda1);
    m.set("lambda1p", model.hp.lambda1p);
    m.set("lambda2", model.hp.lambda2);
    m.set("nu", model.hp.nu);
    m.set("active_tol", model.hp.active_tol);
    m.set("admm_tol", model.hp.admm_tol);
    m.set("admm_max_iter", static_cast<long>(model.hp.admm_max_iter));
    for (int s = 0; s < model.dict.modalities(); ++s) {
        save_matrix(dir / ("dict." + std::to_string(s + 1) + ".bin"),
                    model.dict.dicts[static_cast<std::size_t>(s)]);
        save_matrix(dir / ("weights." + std::to_string(s + 1) + ".bin"),
                    model.bank.weights[static_cast<std::size_t>(s)]);
    }
    m.save(dir / "manifest.txt");
}

Model load_model(const std::filesystem::path& dir) {
    const Manifest m = Manifest::load(dir / "manifest.txt");
    if (m.get("format") != "jsdl-model") throw ValidationError("not a model directory");
    Model model;
    const long S = m.get_long("S");
    model.prior = prior_from_string(m.get("prior"));
    model.bank.head = head_from_string(m.get("head"));
    model.hp.lambda1 = m.get_double("lambda1");
    model.hp.lambda1p = m.get_double("lambda1p");
    model.hp.lambda2 = m.get_double("lambda2");
    model.hp.nu = m.get_double("nu");
    model.bank.nu = model.hp.nu;
    model.hp.active_tol = m.get_double("active_tol");
    model.hp.admm_tol = m.get_double("admm_tol");
    model.hp.admm_max_iter = static_cast<int>(m.get_long("admm_max_iter"));
    for (long s = 1; s <= S; ++s) {
        model.dict.dicts.push_back(load_matrix(dir / ("dict." + std::to_string(s) + ".bin")));
        model.bank.weights.push_back(load_matrix(dir / ("weights." + std::to_string(s) + ".bin")));
    }
    const long d = m.get_long("d");
    if (model.dict.atoms() != d) throw DimensionMismatch("dictionary atom count mismatch");
    return model;
}

void save_codes(const std::vector<Mat>& codes, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    if (codes.empty()) throw ValidationError("no codes to save");
    const Index d = codes.front().rows();
    const Index S = codes.front().cols();
    Mat stacked(d * S, static_cast<Index>(codes.size()));
    for (std::size_t i = 0; i < codes.size(); ++i) {
        for (Index s = 0; s < S; ++s) {
            stacked.block(s * d, static_cast<Index>(i), d, 1) = codes[i].col(s);
        }
    }
    Manifest m;
    m.set("format", "jsdl-codes");
    m.set("version", 1L);
    m.set("d", static_cast<long>(d));
    m.set("S", static_cast<long>(S));
    m.set("N", static_cast<long>(codes.size()));
    m.set("layout", "column i stacks sample i codes, alpha^1 first (d*S rows)");
    m.save(dir / "manifest.txt");
    save_matrix(dir / "codes.bin", stacked);
}

}  // namespace jsdl
