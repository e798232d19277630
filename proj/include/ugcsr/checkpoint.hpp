#pragma once

#include <map>
#include <string>

#include "ugcsr/nn.hpp"
#include "ugcsr/tensor.hpp"

namespace ugcsr {

// Named-tensor archive, the one weight format used across models. Binary
// little-endian: magic, format version, entry count, then per entry a name,
// a shape, and raw doubles.
struct Checkpoint {
    std::map<std::string, Tensor> tensors;

    void put(const std::string& name, Tensor t) { tensors[name] = std::move(t); }
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    double scalar(const std::string& name) const;  // 1-element tensor
    void put_scalar(const std::string& name, double v);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// Parameter sets are stored positionally under prefix/0, prefix/1, ...;
// collection order is fixed by each model, so indices are stable.
void pack_params(Checkpoint& ck, const std::string& prefix, const nn::ParamRefs& params);
void unpack_params(const Checkpoint& ck, const std::string& prefix, const nn::ParamRefs& params);

}  // namespace ugcsr
