#include "weca/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "weca/error.hpp"

namespace weca::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMatrix>;
using CMapM = Eigen::Map<const RowMatrix>;

using Node = detail::Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

[[noreturn]] void bad_shape(const char* op, const Tensor& a, const char* expected) {
    throw ShapeError(std::string(op) + ": expected " + expected + ", got " + shape_str(a.shape()));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_mismatch(op, a, b);
}

void check_finite(const char* op, const std::vector<double>& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw NumericError(std::string(op) + ": non-finite output at element " +
                               std::to_string(i));
        }
    }
}

// Builds the output node. `make_backward` is only invoked when the result
// is recorded, so closures capturing saved buffers cost nothing in
// inference mode.
template <typename MakeBackward>
Tensor finish(const char* op, Shape shape, std::vector<double> data,
              std::initializer_list<const Tensor*> inputs, MakeBackward&& make_backward) {
    check_finite(op, data);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    Tape* tape = Tape::active();
    bool needs = false;
    for (const Tensor* in : inputs) needs = needs || (in->defined() && in->requires_grad());
    if (tape && needs) {
        node->requires_grad = true;
        for (const Tensor* in : inputs) {
            if (in->defined()) node->inputs.push_back(in->node());
        }
        node->backward = make_backward();
        tape->record(node);
    }
    return Tensor(std::move(node));
}

// Gradient sink for input `k` of a node, or nullptr if it needs none.
std::vector<double>* sink(Node& self, std::size_t k) {
    if (k >= self.inputs.size()) return nullptr;
    auto& in = *self.inputs[k];
    return in.requires_grad ? &in.ensure_grad() : nullptr;
}

// Last-axis helpers: (rows, width) view of a rank >= 1 tensor.
std::size_t last_dim(const Tensor& a, const char* op) {
    if (a.rank() == 0) bad_shape(op, a, "rank >= 1");
    return a.shape().back();
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    return finish("add", a.shape(), std::move(out), {&a, &b}, [] {
        return BackwardFn([](Node& self) {
            for (std::size_t k = 0; k < 2; ++k) {
                if (auto* g = sink(self, k)) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
                }
            }
        });
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
    return finish("sub", a.shape(), std::move(out), {&a, &b}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
            }
            if (auto* g = sink(self, 1)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
            }
        });
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
    return finish("mul", a.shape(), std::move(out), {&a, &b}, [] {
        return BackwardFn([](Node& self) {
            const auto& x = self.inputs[0]->data;
            const auto& y = self.inputs[1]->data;
            if (auto* g = sink(self, 0)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * y[i];
            }
            if (auto* g = sink(self, 1)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * x[i];
            }
        });
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
    return finish("scale", a.shape(), std::move(out), {&a}, [factor] {
        return BackwardFn([factor](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * factor;
            }
        });
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) > 0.0 ? a.at(i) : 0.0;
    return finish("relu", a.shape(), std::move(out), {&a}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                const auto& x = self.inputs[0]->data;
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    if (x[i] > 0.0) (*g)[i] += self.grad[i];
                }
            }
        });
    });
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.at(i));
    return finish("exp", a.shape(), std::move(out), {&a}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * self.data[i];
            }
        });
    });
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.at(i));
    return finish("log", a.shape(), std::move(out), {&a}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                const auto& x = self.inputs[0]->data;
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] / x[i];
            }
        });
    });
}

Tensor abs(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a.at(i));
    return finish("abs", a.shape(), std::move(out), {&a}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                const auto& x = self.inputs[0]->data;
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
                    (*g)[i] += self.grad[i] * s;
                }
            }
        });
    });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    return finish("sum", {}, {total}, {&a}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (double& v : *g) v += self.grad[0];
            }
        });
    });
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) bad_shape("mean", a, "non-empty tensor");
    double total = 0.0;
    for (double v : a.data()) total += v;
    const double n = static_cast<double>(a.size());
    return finish("mean", {}, {total / n}, {&a}, [n] {
        return BackwardFn([n](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (double& v : *g) v += self.grad[0] / n;
            }
        });
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_mismatch("matmul", a, b);
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    std::vector<double> out(static_cast<std::size_t>(m * n));
    MapM(out.data(), m, n).noalias() = CMapM(a.data().data(), m, k) * CMapM(b.data().data(), k, n);
    return finish("matmul", {a.dim(0), b.dim(1)}, std::move(out), {&a, &b}, [m, k, n] {
        return BackwardFn([m, k, n](Node& self) {
            CMapM dout(self.grad.data(), m, n);
            if (auto* g = sink(self, 0)) {
                MapM(g->data(), m, k).noalias() += dout * CMapM(self.inputs[1]->data.data(), k, n).transpose();
            }
            if (auto* g = sink(self, 1)) {
                MapM(g->data(), k, n).noalias() += CMapM(self.inputs[0]->data.data(), m, k).transpose() * dout;
            }
        });
    });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    const auto width = last_dim(a, "add_bias");
    if (bias.rank() != 1 || bias.dim(0) != width) shape_mismatch("add_bias", a, bias);
    std::vector<double> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias.at(i % width);
    return finish("add_bias", a.shape(), std::move(out), {&a, &bias}, [width] {
        return BackwardFn([width](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
            }
            if (auto* g = sink(self, 1)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i % width] += self.grad[i];
            }
        });
    });
}

Tensor causal_dilated_conv1d(const Tensor& x, const Tensor& kernel, std::size_t dilation,
                             const Tensor& bias) {
    if (dilation < 1) throw ShapeError("causal_dilated_conv1d: dilation must be >= 1");
    if (x.rank() != 2 && x.rank() != 3) bad_shape("causal_dilated_conv1d", x, "(B,T,C) or (T,C)");
    if (kernel.rank() != 3) bad_shape("causal_dilated_conv1d", kernel, "kernel (K,Cin,Cout)");
    const bool batched = x.rank() == 3;
    const std::size_t batch = batched ? x.dim(0) : 1;
    const std::size_t steps = x.dim(batched ? 1 : 0);
    const std::size_t cin = x.dim(batched ? 2 : 1);
    const std::size_t taps = kernel.dim(0);
    const std::size_t cout = kernel.dim(2);
    if (kernel.dim(1) != cin) shape_mismatch("causal_dilated_conv1d", x, kernel);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
        shape_mismatch("causal_dilated_conv1d", kernel, bias);
    }

    // im2col: row (b,t) holds x[b, t - (K-1-k)*dilation, :] for each tap k.
    const std::size_t rows = batch * steps;
    const std::size_t width = taps * cin;
    auto cols = std::make_shared<std::vector<double>>(rows * width, 0.0);
    const auto xs = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            double* row = cols->data() + (b * steps + t) * width;
            for (std::size_t k = 0; k < taps; ++k) {
                const std::size_t shift = (taps - 1 - k) * dilation;
                if (shift > t) continue;
                const double* src = xs.data() + (b * steps + t - shift) * cin;
                std::copy(src, src + cin, row + k * cin);
            }
        }
    }

    const auto er = static_cast<Eigen::Index>(rows);
    const auto ew = static_cast<Eigen::Index>(width);
    const auto eo = static_cast<Eigen::Index>(cout);
    std::vector<double> out(rows * cout);
    MapM(out.data(), er, eo).noalias() = CMapM(cols->data(), er, ew) * CMapM(kernel.data().data(), ew, eo);
    if (bias.defined()) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cout; ++c) out[r * cout + c] += bias.at(c);
        }
    }

    Shape shape = batched ? Shape{batch, steps, cout} : Shape{steps, cout};
    return finish("causal_dilated_conv1d", std::move(shape), std::move(out), {&x, &kernel, &bias},
                  [=] {
                      return BackwardFn([=](Node& self) {
                          CMapM dout(self.grad.data(), er, eo);
                          if (auto* g = sink(self, 1)) {
                              MapM(g->data(), ew, eo).noalias() += CMapM(cols->data(), er, ew).transpose() * dout;
                          }
                          if (self.inputs.size() > 2) {
                              if (auto* g = sink(self, 2)) {
                                  for (std::size_t r = 0; r < rows; ++r) {
                                      for (std::size_t c = 0; c < cout; ++c) (*g)[c] += self.grad[r * cout + c];
                                  }
                              }
                          }
                          if (auto* g = sink(self, 0)) {
                              RowMatrix dcols = dout * CMapM(self.inputs[1]->data.data(), ew, eo).transpose();
                              for (std::size_t b = 0; b < batch; ++b) {
                                  for (std::size_t t = 0; t < steps; ++t) {
                                      const double* row = dcols.data() + (b * steps + t) * width;
                                      for (std::size_t k = 0; k < taps; ++k) {
                                          const std::size_t shift = (taps - 1 - k) * dilation;
                                          if (shift > t) continue;
                                          double* dst = g->data() + (b * steps + t - shift) * cin;
                                          for (std::size_t c = 0; c < cin; ++c) dst[c] += row[k * cin + c];
                                      }
                                  }
                              }
                          }
                      });
                  });
}

Tensor dot_rows(const Tensor& a, const Tensor& b) {
    require_same("dot_rows", a, b);
    const auto width = last_dim(a, "dot_rows");
    const auto rows = width == 0 ? shape_size(drop_last(a.shape())) : a.size() / width;
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t d = 0; d < width; ++d) acc += a.at(r * width + d) * b.at(r * width + d);
        out[r] = acc;
    }
    return finish("dot_rows", drop_last(a.shape()), std::move(out), {&a, &b}, [rows, width] {
        return BackwardFn([rows, width](Node& self) {
            const auto& x = self.inputs[0]->data;
            const auto& y = self.inputs[1]->data;
            if (auto* g = sink(self, 0)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t d = 0; d < width; ++d) (*g)[r * width + d] += self.grad[r] * y[r * width + d];
            }
            if (auto* g = sink(self, 1)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t d = 0; d < width; ++d) (*g)[r * width + d] += self.grad[r] * x[r * width + d];
            }
        });
    });
}

Tensor l2_normalize_rows(const Tensor& a) {
    constexpr double kFloor = 1e-12;
    const auto width = last_dim(a, "l2_normalize_rows");
    const auto rows = width == 0 ? 0 : a.size() / width;
    auto norms = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (std::size_t d = 0; d < width; ++d) sq += a.at(r * width + d) * a.at(r * width + d);
        const double n = std::max(std::sqrt(sq), kFloor);
        (*norms)[r] = n;
        for (std::size_t d = 0; d < width; ++d) out[r * width + d] = a.at(r * width + d) / n;
    }
    return finish("l2_normalize_rows", a.shape(), std::move(out), {&a}, [=] {
        return BackwardFn([=](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const double n = (*norms)[r];
                const double* y = self.data.data() + r * width;
                const double* dy = self.grad.data() + r * width;
                if (n <= kFloor) {
                    for (std::size_t d = 0; d < width; ++d) (*g)[r * width + d] += dy[d] / n;
                    continue;
                }
                double proj = 0.0;
                for (std::size_t d = 0; d < width; ++d) proj += y[d] * dy[d];
                for (std::size_t d = 0; d < width; ++d) (*g)[r * width + d] += (dy[d] - y[d] * proj) / n;
            }
        });
    });
}

Tensor logsumexp_rows(const Tensor& a) {
    const auto width = last_dim(a, "logsumexp_rows");
    if (width == 0) bad_shape("logsumexp_rows", a, "non-empty last axis");
    const auto rows = a.size() / width;
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * width;
        const double m = *std::max_element(x, x + width);
        double acc = 0.0;
        for (std::size_t d = 0; d < width; ++d) acc += std::exp(x[d] - m);
        out[r] = m + std::log(acc);
    }
    return finish("logsumexp_rows", drop_last(a.shape()), std::move(out), {&a}, [rows, width] {
        return BackwardFn([rows, width](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            const auto& x = self.inputs[0]->data;
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t d = 0; d < width; ++d) {
                    (*g)[r * width + d] += self.grad[r] * std::exp(x[r * width + d] - self.data[r]);
                }
            }
        });
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return finish("reshape", std::move(shape), std::move(out), {&a}, [] {
        return BackwardFn([](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
            }
        });
    });
}

Tensor swap_axes01(const Tensor& a) {
    if (a.rank() != 3) bad_shape("swap_axes01", a, "rank 3");
    const std::size_t n0 = a.dim(0), n1 = a.dim(1), d = a.dim(2);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n1; ++j)
            for (std::size_t k = 0; k < d; ++k) out[(j * n0 + i) * d + k] = a.at((i * n1 + j) * d + k);
    return finish("swap_axes01", {n1, n0, d}, std::move(out), {&a}, [n0, n1, d] {
        return BackwardFn([n0, n1, d](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            for (std::size_t i = 0; i < n0; ++i)
                for (std::size_t j = 0; j < n1; ++j)
                    for (std::size_t k = 0; k < d; ++k) (*g)[(i * n1 + j) * d + k] += self.grad[(j * n0 + i) * d + k];
        });
    });
}

Tensor batched_gram(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
        shape_mismatch("batched_gram", a, b);
    }
    const std::size_t groups = a.dim(0);
    const auto m = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    const auto d = static_cast<Eigen::Index>(a.dim(2));
    std::vector<double> out(groups * static_cast<std::size_t>(m * n));
    for (std::size_t g = 0; g < groups; ++g) {
        MapM(out.data() + g * m * n, m, n).noalias() =
            CMapM(a.data().data() + g * m * d, m, d) * CMapM(b.data().data() + g * n * d, n, d).transpose();
    }
    return finish("batched_gram", {groups, a.dim(1), b.dim(1)}, std::move(out), {&a, &b}, [=] {
        return BackwardFn([=](Node& self) {
            const auto& x = self.inputs[0]->data;
            const auto& y = self.inputs[1]->data;
            auto* ga = sink(self, 0);
            auto* gb = sink(self, 1);
            for (std::size_t g = 0; g < groups; ++g) {
                CMapM dout(self.grad.data() + g * m * n, m, n);
                if (ga) MapM(ga->data() + g * m * d, m, d).noalias() += dout * CMapM(y.data() + g * n * d, n, d);
                if (gb) MapM(gb->data() + g * n * d, n, d).noalias() += dout.transpose() * CMapM(x.data() + g * m * d, m, d);
            }
        });
    });
}

Tensor diagonal(const Tensor& a) {
    if (a.rank() != 3 || a.dim(1) != a.dim(2)) bad_shape("diagonal", a, "(G,N,N)");
    const std::size_t groups = a.dim(0), n = a.dim(1);
    std::vector<double> out(groups * n);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t i = 0; i < n; ++i) out[g * n + i] = a.at((g * n + i) * n + i);
    return finish("diagonal", {groups, n}, std::move(out), {&a}, [groups, n] {
        return BackwardFn([groups, n](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            for (std::size_t k = 0; k < groups; ++k)
                for (std::size_t i = 0; i < n; ++i) (*g)[(k * n + i) * n + i] += self.grad[k * n + i];
        });
    });
}

Tensor off_diagonal(const Tensor& a) {
    if (a.rank() != 3 || a.dim(1) != a.dim(2)) bad_shape("off_diagonal", a, "(G,N,N)");
    const std::size_t groups = a.dim(0), n = a.dim(1);
    const std::size_t w = n == 0 ? 0 : n - 1;
    std::vector<double> out(groups * n * w);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0, c = 0; j < n; ++j)
                if (j != i) out[(g * n + i) * w + c++] = a.at((g * n + i) * n + j);
    return finish("off_diagonal", {groups, n, w}, std::move(out), {&a}, [groups, n, w] {
        return BackwardFn([groups, n, w](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            for (std::size_t k = 0; k < groups; ++k)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0, c = 0; j < n; ++j)
                        if (j != i) (*g)[(k * n + i) * n + j] += self.grad[(k * n + i) * w + c++];
        });
    });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    const auto wa = last_dim(a, "concat_last");
    const auto wb = last_dim(b, "concat_last");
    if (drop_last(a.shape()) != drop_last(b.shape())) shape_mismatch("concat_last", a, b);
    const auto rows = shape_size(drop_last(a.shape()));
    const auto w = wa + wb;
    std::vector<double> out(rows * w);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t d = 0; d < wa; ++d) out[r * w + d] = a.at(r * wa + d);
        for (std::size_t d = 0; d < wb; ++d) out[r * w + wa + d] = b.at(r * wb + d);
    }
    Shape shape = drop_last(a.shape());
    shape.push_back(w);
    return finish("concat_last", std::move(shape), std::move(out), {&a, &b}, [rows, wa, wb, w] {
        return BackwardFn([rows, wa, wb, w](Node& self) {
            if (auto* g = sink(self, 0)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t d = 0; d < wa; ++d) (*g)[r * wa + d] += self.grad[r * w + d];
            }
            if (auto* g = sink(self, 1)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t d = 0; d < wb; ++d) (*g)[r * wb + d] += self.grad[r * w + wa + d];
            }
        });
    });
}

Tensor select_time(const Tensor& a, std::size_t t) {
    if (a.rank() != 3) bad_shape("select_time", a, "(B,T,D)");
    const std::size_t batch = a.dim(0), steps = a.dim(1), d = a.dim(2);
    if (t >= steps) throw ShapeError("select_time: index " + std::to_string(t) + " out of range for " + shape_str(a.shape()));
    std::vector<double> out(batch * d);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < d; ++k) out[b * d + k] = a.at((b * steps + t) * d + k);
    return finish("select_time", {batch, d}, std::move(out), {&a}, [batch, steps, d, t] {
        return BackwardFn([batch, steps, d, t](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t k = 0; k < d; ++k) (*g)[(b * steps + t) * d + k] += self.grad[b * d + k];
        });
    });
}

Tensor mean_time(const Tensor& a) {
    if (a.rank() != 3 || a.dim(1) == 0) bad_shape("mean_time", a, "(B,T,D) with T >= 1");
    const std::size_t batch = a.dim(0), steps = a.dim(1), d = a.dim(2);
    const double inv = 1.0 / static_cast<double>(steps);
    std::vector<double> out(batch * d, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t k = 0; k < d; ++k) out[b * d + k] += a.at((b * steps + t) * d + k);
    for (double& v : out) v *= inv;
    return finish("mean_time", {batch, d}, std::move(out), {&a}, [batch, steps, d, inv] {
        return BackwardFn([batch, steps, d, inv](Node& self) {
            auto* g = sink(self, 0);
            if (!g) return;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t t = 0; t < steps; ++t)
                    for (std::size_t k = 0; k < d; ++k) (*g)[(b * steps + t) * d + k] += self.grad[b * d + k] * inv;
        });
    });
}

}  // namespace weca::ops
