#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "transmamba/rng.hpp"
#include "transmamba/tensor.hpp"

namespace transmamba {

enum class Init {
    kaiming_uniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = prod(shape[1:])
    zeros,
    ones,
    spectral_real,    // 1 + N(0, 0.02^2)
    spectral_imag,    // N(0, 0.02^2)
    ssm_a_log,        // log(1..N) along the last axis
    ssm_delta_bias,   // softplus^-1 of a log-uniform step in [1e-3, 1e-1]
};

/// Named, ordered collection of learnable tensors.
struct ModelState {
    std::map<std::string, Tensor> params;

    std::size_t parameter_count() const;
    const Tensor& at(const std::string& name) const;
    void zero_grad();
};

/// Where module parameter structs get their tensors from. One builder
/// function per module describes its parameters; the source decides whether
/// that means allocating, looking up, or just recording the layout.
class ParamSource {
public:
    virtual ~ParamSource() = default;
    virtual Tensor get(const std::string& name, const Shape& shape, Init init) = 0;
};

/// Records (name, shape) pairs without allocating.
class LayoutRecorder final : public ParamSource {
public:
    struct Entry {
        std::string name;
        Shape shape;
        Init init;
    };
    Tensor get(const std::string& name, const Shape& shape, Init init) override;
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t parameter_count() const;

private:
    std::vector<Entry> entries_;
};

/// Creates fresh tensors in `state`, drawing values in request order.
/// Values are rounded to binary32 so checkpoints store them exactly.
class ParamInitializer final : public ParamSource {
public:
    ParamInitializer(ModelState& state, std::uint64_t seed) : state_(state), rng_(seed) {}
    Tensor get(const std::string& name, const Shape& shape, Init init) override;

private:
    ModelState& state_;
    Rng rng_;
};

/// Looks tensors up in an existing state and validates their shapes.
class ParamBinder final : public ParamSource {
public:
    explicit ParamBinder(const ModelState& state) : state_(state) {}
    Tensor get(const std::string& name, const Shape& shape, Init init) override;

private:
    const ModelState& state_;
};

/// Rounds through binary32.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace transmamba
