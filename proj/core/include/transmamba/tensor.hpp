#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace transmamba {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One value in the define-by-run graph. Interior nodes carry the closure that
// pushes their gradient into `inputs`; leaves carry none.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
    const char* op = "leaf";

    std::vector<double>& grad_buffer();
};

// Gradient buffer of input `i` when that input wants one, else nullptr.
inline std::vector<double>* input_grad(Node& self, std::size_t i) {
    Node* in = self.inputs[i].get();
    return (in && in->requires_grad) ? &in->grad_buffer() : nullptr;
}

}  // namespace detail

/// Dense row-major array of doubles with an optional differentiation record.
///
/// A Tensor is a cheap handle; copies share storage. Values are treated as
/// immutable once an operation has consumed them, the only exception being
/// in-place parameter updates through `mutable_data()` on leaves.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim() const { return shape().size(); }
    std::size_t size(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    /// Reverse-mode sweep from this scalar. Every leaf with requires_grad
    /// accumulates d(this)/d(leaf).
    void backward() const;

    /// Value copy with no history.
    Tensor detach() const;

    const char* op_name() const;
    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

namespace detail {

using BackwardFn = std::function<void(Node&)>;

bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

// Wraps a freshly computed value; attaches history only when recording.
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   BackwardFn fn, const char* op);

}  // namespace detail

}  // namespace transmamba
