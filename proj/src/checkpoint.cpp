#include "ugcsr/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace ugcsr {

namespace {

constexpr uint64_t kMagic = 0x55474353524b5031ull;  // "UGCSRKP1"
constexpr uint32_t kVersion = 1;

template <typename T>
void put_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint: missing entry " + name);
    return it->second;
}

double Checkpoint::scalar(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.size() != 1) throw std::runtime_error("checkpoint: " + name + " is not a scalar");
    return t[0];
}

void Checkpoint::put_scalar(const std::string& name, double v) {
    Tensor t({1});
    t[0] = v;
    put(name, std::move(t));
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    put_raw(f, kMagic);
    put_raw(f, kVersion);
    put_raw(f, static_cast<uint64_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_raw(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_raw(f, static_cast<uint32_t>(t.ndim()));
        for (size_t i = 0; i < t.ndim(); ++i) put_raw(f, static_cast<uint64_t>(t.dim(i)));
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
    if (get_raw<uint64_t>(f) != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (get_raw<uint32_t>(f) != kVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    uint64_t count = get_raw<uint64_t>(f);
    Checkpoint ck;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = get_raw<uint32_t>(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        uint32_t ndim = get_raw<uint32_t>(f);
        std::vector<size_t> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<size_t>(get_raw<uint64_t>(f));
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    return ck;
}

void pack_params(Checkpoint& ck, const std::string& prefix, const nn::ParamRefs& params) {
    for (size_t i = 0; i < params.size(); ++i)
        ck.put(prefix + "/" + std::to_string(i), params[i]->value);
}

void unpack_params(const Checkpoint& ck, const std::string& prefix,
                   const nn::ParamRefs& params) {
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& t = ck.get(prefix + "/" + std::to_string(i));
        if (!t.same_shape(params[i]->value))
            throw std::runtime_error("checkpoint: shape mismatch at " + prefix + "/" +
                                     std::to_string(i));
        params[i]->value = t;
    }
}

}  // namespace ugcsr
