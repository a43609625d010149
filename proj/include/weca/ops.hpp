#pragma once

#include <cstddef>

#include "weca/tensor.hpp"

// Differentiable ops. Every op checks operand shapes (ShapeError naming
// both shapes) and rejects non-finite results (NumericError). When a tape
// is active and any operand requires a gradient, the result is recorded.
namespace weca::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// Subgradient at 0 is 0.
Tensor abs(const Tensor& a);

// Reductions to a scalar (shape {}).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// (M,K) x (K,N) -> (M,N).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Adds bias (N) to every row of a (...,N).
Tensor add_bias(const Tensor& a, const Tensor& bias);

/// x (B,T,Cin) or (T,Cin), kernel (K,Cin,Cout), optional bias (Cout).
/// Zero left-padding of (K-1)*dilation keeps the output length at T and
/// output[t] a function of input[<= t] only. Kernel tap k reads x[t - (K-1-k)*dilation].
Tensor causal_dilated_conv1d(const Tensor& x, const Tensor& kernel, std::size_t dilation,
                             const Tensor& bias = Tensor{});

// Row ops act along the last axis; leading axes are flattened.
/// (...,D) x (...,D) -> (...)
Tensor dot_rows(const Tensor& a, const Tensor& b);
/// Rows scaled to unit Euclidean norm; rows with norm below 1e-12 are
/// divided by 1e-12 instead.
Tensor l2_normalize_rows(const Tensor& a);
/// (...,K) -> (...), max-shifted. K == 0 is a ShapeError.
Tensor logsumexp_rows(const Tensor& a);

// Layout ops.
Tensor reshape(const Tensor& a, Shape shape);
/// (A,B,D) -> (B,A,D)
Tensor swap_axes01(const Tensor& a);
/// (G,M,D) x (G,N,D) -> (G,M,N) with out[g,m,n] = a[g,m] . b[g,n].
Tensor batched_gram(const Tensor& a, const Tensor& b);
/// (G,N,N) -> (G,N)
Tensor diagonal(const Tensor& a);
/// (G,N,N) -> (G,N,N-1), dropping column n == m from row m.
Tensor off_diagonal(const Tensor& a);
/// Concatenates along the last axis; leading shapes must match.
Tensor concat_last(const Tensor& a, const Tensor& b);
/// (B,T,D) -> (B,D) at time index t.
Tensor select_time(const Tensor& a, std::size_t t);
/// (B,T,D) -> (B,D), mean over T.
Tensor mean_time(const Tensor& a);

}  // namespace weca::ops
