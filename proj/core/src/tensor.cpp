#include "transmamba/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace transmamba {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) + " needs " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(data.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    if (!node_) throw std::logic_error("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::span<const double> Tensor::data() const {
    if (!node_) throw std::logic_error("use of undefined tensor");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw std::logic_error("use of undefined tensor");
    return node_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw std::out_of_range("at(): rank mismatch for " + shape_str(s));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= s[axis]) throw std::out_of_range("at(): index out of range for " + shape_str(s));
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!node_) throw std::logic_error("use of undefined tensor");
    node_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!node_) throw std::logic_error("use of undefined tensor");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
    return from(shape(), std::vector<double>(node_->data), false);
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

void Tensor::backward() const {
    if (!node_) throw std::logic_error("backward() on undefined tensor");
    if (node_->data.size() != 1) {
        throw std::invalid_argument("backward() needs a scalar loss, got shape " + shape_str(node_->shape));
    }
    // Iterative post-order DFS gives a topological order without recursion.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!t_grad_enabled) return false;
    for (const Tensor* t : inputs) {
        if (t && t->requires_grad()) return true;
    }
    return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
    if (!t_grad_enabled) return false;
    for (const auto& t : inputs) {
        if (t.requires_grad()) return true;
    }
    return false;
}

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs, BackwardFn fn,
                   const char* op) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    if (should_record(inputs)) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.node_ptr());
        node->backward = std::move(fn);
    }
    return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace transmamba
