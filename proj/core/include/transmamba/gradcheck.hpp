#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transmamba/network.hpp"

namespace transmamba {

struct TensorCheck {
    std::string name;
    std::size_t entries = 0;
    /// ||analytic - numeric|| / (||analytic|| + ||numeric||) over the sampled entries.
    double rel_error = 0;
    double analytic_norm = 0;
    double numeric_norm = 0;
};

struct GradcheckReport {
    std::string component;
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0;
    double tolerance = 0;
    double seconds = 0;
    bool passed() const { return max_rel_error < tolerance; }
};

/// sdtb, seff, sbsa, cbsm, ssm, losses, full.
const std::vector<std::string>& gradcheck_components();
bool is_gradcheck_component(const std::string& name);

/// Central-difference verification of one component at micro sizes. Band
/// count, ratio, flip axis, direction order and scale mode come from `cfg`.
/// Throws std::invalid_argument for an unknown component.
GradcheckReport gradcheck(const ModelConfig& cfg, const std::string& component, std::uint64_t seed = 7);

}  // namespace transmamba
