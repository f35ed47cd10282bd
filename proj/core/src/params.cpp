#include "transmamba/params.hpp"

#include <cmath>
#include <stdexcept>

namespace transmamba {

std::size_t ModelState::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
}

const Tensor& ModelState::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

void ModelState::zero_grad() {
    for (auto& [name, t] : params) t.zero_grad();
}

Tensor LayoutRecorder::get(const std::string& name, const Shape& shape, Init init) {
    entries_.push_back({name, shape, init});
    return Tensor();
}

std::size_t LayoutRecorder::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += shape_numel(e.shape);
    return n;
}

Tensor ParamInitializer::get(const std::string& name, const Shape& shape, Init init) {
    if (state_.params.count(name)) throw std::logic_error("duplicate parameter name '" + name + "'");
    const std::size_t n = shape_numel(shape);
    std::vector<double> v(n);
    switch (init) {
        case Init::kaiming_uniform: {
            std::size_t fan_in = 1;
            for (std::size_t k = 1; k < shape.size(); ++k) fan_in *= shape[k];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& x : v) x = rng_.uniform(-bound, bound);
            break;
        }
        case Init::zeros: break;
        case Init::ones:
            for (auto& x : v) x = 1.0;
            break;
        case Init::spectral_real:
            for (auto& x : v) x = 1.0 + 0.02 * rng_.normal();
            break;
        case Init::spectral_imag:
            for (auto& x : v) x = 0.02 * rng_.normal();
            break;
        case Init::ssm_a_log: {
            const std::size_t states = shape.empty() ? 1 : shape.back();
            for (std::size_t i = 0; i < n; ++i) v[i] = std::log(static_cast<double>(i % states + 1));
            break;
        }
        case Init::ssm_delta_bias:
            for (auto& x : v) {
                const double dt = std::exp(rng_.uniform(std::log(1e-3), std::log(1e-1)));
                x = dt + std::log(-std::expm1(-dt));  // inverse softplus
            }
            break;
    }
    for (auto& x : v) x = to_f32(x);
    Tensor t = Tensor::from(shape, std::move(v), true);
    state_.params.emplace(name, t);
    return t;
}

Tensor ParamBinder::get(const std::string& name, const Shape& shape, Init) {
    auto it = state_.params.find(name);
    if (it == state_.params.end()) throw std::out_of_range("model state is missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
        throw std::invalid_argument("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                                    ", expected " + shape_str(shape));
    }
    return it->second;
}

}  // namespace transmamba
