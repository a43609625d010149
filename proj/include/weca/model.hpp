#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "weca/tensor.hpp"

namespace weca {

struct ConvLayerSpec {
    std::size_t kernel = 3;
    std::size_t dilation = 1;
};

struct EncoderConfig {
    std::size_t input_channels = 1;
    std::size_t latent_dim = 64;
    std::vector<ConvLayerSpec> layers{{3, 1}, {3, 2}, {3, 4}, {3, 8}};
};

struct DecoderConfig {
    std::size_t horizon = 14;
    std::size_t output_channels = 1;
};

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;
    void validate() const;
};

/// Named parameter tensors in a fixed order.
class ModelParams {
public:
    void add(std::string name, Tensor tensor);
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);
    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return tensors_.size(); }
    std::size_t parameter_count() const;

    /// Deep copy with fresh parameter buffers.
    ModelParams clone() const;
    /// Copies values from `other`, which must have identical names and shapes.
    void assign(const ModelParams& other);
    bool bit_equal(const ModelParams& other) const;
    void zero_grad();

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

/// Glorot-uniform kernels, zero biases.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Expected shape of every parameter for `config`, in parameter order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config);

/// x (B,T,C) or (T,C) -> z with the same leading shape and D latent
/// channels. ReLU between conv layers, none after the last.
Tensor encode(const Tensor& x, const ModelParams& params, const ModelConfig& config);

/// z (B,T,D) or (T,D) -> forecast (B,H,C) or (H,C). Linear map of the last
/// latent concatenated with the time-averaged latent.
Tensor decode(const Tensor& z, const ModelParams& params, const ModelConfig& config);

Tensor forecast(const Tensor& x, const ModelParams& params, const ModelConfig& config);

/// Text checkpoint of named tensors; values use shortest round-trip
/// formatting, so loading reproduces every double bit for bit.
void save_checkpoint(const ModelParams& params, std::ostream& out,
                     const std::map<std::string, std::string>& metadata = {});
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata = {});
ModelParams load_checkpoint(std::istream& in, std::map<std::string, std::string>* metadata = nullptr);
ModelParams load_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string>* metadata = nullptr);

}  // namespace weca
