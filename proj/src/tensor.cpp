#include "weca/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "weca/error.hpp"

namespace weca {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
    if (grad.empty() && !data.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

}  // namespace detail

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> data, bool param) {
    if (shape_size(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = param;
    node->is_parameter = param;
    return node;
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::zeros(Shape shape) {
    const auto n = shape_size(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
    return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

const Shape& Tensor::shape() const {
    if (!node_) throw Error("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    }
    return s[axis];
}

std::span<const double> Tensor::data() const {
    if (!node_) throw Error("use of undefined tensor");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw Error("use of undefined tensor");
    if (!node_->is_parameter) throw Error("only parameter tensors are mutable");
    return node_->data;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_parameter() const { return node_ && node_->is_parameter; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!node_) throw Error("use of undefined tensor");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

void Tape::record(std::shared_ptr<detail::Node> node) {
    if (consumed_) throw Error("tape already consumed by backward; reset before recording");
    nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw Error("backward called twice without reset");
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    const auto& target = loss.node();
    const auto it = std::find(nodes_.begin(), nodes_.end(), target);
    if (it == nodes_.end()) throw Error("backward: loss is not on this tape");

    consumed_ = true;
    target->ensure_grad()[0] += 1.0;
    // Nodes recorded after the loss cannot contribute to it.
    for (auto rit = std::make_reverse_iterator(it + 1); rit != nodes_.rend(); ++rit) {
        auto& node = **rit;
        if (node.grad.empty() || !node.backward) continue;
        node.backward(node);
    }
}

void Tape::reset() {
    nodes_.clear();
    consumed_ = false;
}

Tape* Tape::active() noexcept { return g_active_tape; }

Recording::Recording(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

Recording::~Recording() { g_active_tape = previous_; }

}  // namespace weca
