#include "afrclip/tensor_store.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "afrclip/errors.hpp"

namespace fs = std::filesystem;

namespace afrclip {

static_assert(std::endian::native == std::endian::little, "tensor store assumes little-endian host");

Mat Tensor::as_mat() const {
    if (shape.size() == 1) return Mat::from_rows(1, shape[0], values);
    if (shape.size() == 2) return Mat::from_rows(shape[0], shape[1], values);
    throw ShapeError("Tensor::as_mat: rank " + std::to_string(shape.size()) + " tensor");
}

Tensor Tensor::from_mat(const Mat& m) { return Tensor{{m.rows, m.cols}, m.data}; }

void TensorStore::put(const std::string& name, Tensor t) {
    if (t.numel() != t.values.size())
        throw ShapeError("TensorStore::put(" + name + "): shape/value count mismatch");
    tensors_[name] = std::move(t);
}

const Tensor& TensorStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw IoError("TensorStore: missing tensor '" + name + "'");
    return it->second;
}

namespace {

std::string shape_str(const std::vector<int>& shape) {
    std::string s;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

std::vector<int> parse_shape(const std::string& s) {
    std::vector<int> shape;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) shape.push_back(std::stoi(part));
    return shape;
}

}  // namespace

void TensorStore::save(const std::string& dir, bool as_f64) const {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    std::ofstream blob(fs::path(dir) / "data.bin", std::ios::binary);
    if (!manifest || !blob) throw IoError("TensorStore::save: cannot write to " + dir);

    uint64_t offset = 0;
    for (const auto& [name, t] : tensors_) {  // std::map: stable name order
        manifest << name << ' ' << (as_f64 ? "f64" : "f32") << ' ' << shape_str(t.shape) << ' ' << offset
                 << '\n';
        if (as_f64) {
            blob.write(reinterpret_cast<const char*>(t.values.data()),
                       static_cast<std::streamsize>(t.values.size() * sizeof(double)));
            offset += t.values.size() * sizeof(double);
        } else {
            std::vector<float> buf(t.values.size());
            for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t.values[i]);
            blob.write(reinterpret_cast<const char*>(buf.data()),
                       static_cast<std::streamsize>(buf.size() * sizeof(float)));
            offset += buf.size() * sizeof(float);
        }
    }
    if (!meta_.empty()) {
        std::ofstream meta(fs::path(dir) / "meta.txt");
        for (const auto& [k, v] : meta_) meta << k << " = " << v << '\n';
    }
}

TensorStore TensorStore::load(const std::string& dir) {
    fs::path mpath = fs::path(dir) / "manifest.txt";
    fs::path bpath = fs::path(dir) / "data.bin";
    std::ifstream manifest(mpath);
    if (!manifest) throw IoError("TensorStore::load: cannot open " + mpath.string());
    std::ifstream blob(bpath, std::ios::binary);
    if (!blob) throw IoError("TensorStore::load: cannot open " + bpath.string());

    TensorStore store;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string name, dtype, shape_s;
        uint64_t offset = 0;
        if (!(ss >> name >> dtype >> shape_s >> offset))
            throw IoError("TensorStore::load: malformed manifest line: " + line);
        Tensor t;
        t.shape = parse_shape(shape_s);
        size_t n = t.numel();
        t.values.resize(n);
        if (dtype == "f32") {
            std::vector<float> buf(n);
            blob.seekg(static_cast<std::streamoff>(offset));
            blob.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
            if (!blob) throw IoError("TensorStore::load: truncated blob reading '" + name + "'");
            for (size_t i = 0; i < n; ++i) t.values[i] = buf[i];
        } else if (dtype == "f64") {
            blob.seekg(static_cast<std::streamoff>(offset));
            blob.read(reinterpret_cast<char*>(t.values.data()),
                      static_cast<std::streamsize>(n * sizeof(double)));
            if (!blob) throw IoError("TensorStore::load: truncated blob reading '" + name + "'");
        } else {
            throw IoError("TensorStore::load: unsupported dtype '" + dtype + "' for '" + name + "'");
        }
        store.tensors_[name] = std::move(t);
    }

    fs::path metap = fs::path(dir) / "meta.txt";
    if (fs::exists(metap)) {
        std::ifstream meta(metap);
        while (std::getline(meta, line)) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                size_t a = s.find_first_not_of(" \t");
                size_t b = s.find_last_not_of(" \t");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            store.meta_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
    }
    return store;
}

}  // namespace afrclip
