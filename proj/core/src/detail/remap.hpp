#pragma once

#include <vector>

#include "transmamba/tensor.hpp"

namespace transmamba::detail {

// out[i] = x[source[i]]; the gradient scatters back through the same map.
Tensor remap(const Tensor& x, Shape out_shape, std::vector<std::size_t> source, const char* op);

}  // namespace transmamba::detail
