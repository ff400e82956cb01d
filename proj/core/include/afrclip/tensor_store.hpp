#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "afrclip/mat.hpp"

namespace afrclip {

// Named tensor blobs with a plain-text manifest. On disk a store is a
// directory holding
//   manifest.txt   one tensor per line: "<name> <dtype> <shape> <offset>"
//                  e.g. "cmfr.stage1.conv1.weight f32 16x8 1024"
//   data.bin       the concatenated blobs, little-endian IEEE-754
//   meta.txt       optional "key = value" lines (training metadata)
//
// Values are float32 on the wire (dtype f32); f64 is accepted on read for
// externally produced blobs. Save order is name-sorted so identical tensors
// always serialize to identical bytes.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;

    size_t numel() const {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        return n;
    }
    Mat as_mat() const;
    static Tensor from_mat(const Mat& m);
};

class TensorStore {
public:
    void put(const std::string& name, Tensor t);
    void put(const std::string& name, const Mat& m) { put(name, Tensor::from_mat(m)); }
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    std::map<std::string, std::string>& meta() { return meta_; }
    const std::map<std::string, std::string>& meta() const { return meta_; }

    // float32 wire format by default; as_f64 keeps full precision (used for
    // caches that must round-trip bit-exactly)
    void save(const std::string& dir, bool as_f64 = false) const;
    static TensorStore load(const std::string& dir);

private:
    std::map<std::string, Tensor> tensors_;
    std::map<std::string, std::string> meta_;
};

}  // namespace afrclip
