#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace weca {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    bool is_parameter = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this->grad and accumulates into inputs' grads.
    std::function<void(Node&)> backward;

    std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Shape-tagged array of doubles. Copies share the underlying buffer.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor zeros(Shape shape);
    static Tensor scalar(double value);
    /// A leaf that receives a gradient buffer during backward.
    static Tensor parameter(Shape shape, std::vector<double> data);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const { return data().size(); }

    std::span<const double> data() const;
    /// Only parameters may be mutated in place (optimizer updates, checkpoint loads).
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t flat_index) const { return data()[flat_index]; }

    bool requires_grad() const;
    bool is_parameter() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    // Internal: used by ops to wire nodes.
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Define-by-run record of executed ops. Ops executed while a Recording
/// guard is alive on this thread are appended in execution order.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::shared_ptr<detail::Node> node);
    /// Populates grads of every parameter reachable from `loss`.
    /// Throws if loss is not a scalar, not on this tape, or the tape was
    /// already consumed by an earlier backward.
    void backward(const Tensor& loss);
    void reset();

    std::size_t size() const noexcept { return nodes_.size(); }
    bool consumed() const noexcept { return consumed_; }

    /// The tape ops record onto, or nullptr when recording is off.
    static Tape* active() noexcept;

private:
    friend class Recording;
    std::vector<std::shared_ptr<detail::Node>> nodes_;
    bool consumed_ = false;
};

/// RAII guard that makes `tape` the active tape for this thread.
class Recording {
public:
    explicit Recording(Tape& tape);
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

private:
    Tape* previous_;
};

}  // namespace weca
