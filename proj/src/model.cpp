#include "weca/model.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "weca/error.hpp"
#include "weca/ops.hpp"
#include "weca/rng.hpp"

namespace weca {

namespace {

constexpr const char* kCheckpointMagic = "weca-checkpoint v1";

std::string conv_name(std::size_t layer, const char* part) {
    return "encoder.conv" + std::to_string(layer) + "." + part;
}

}  // namespace

void ModelConfig::validate() const {
    if (encoder.input_channels < 1) throw ConfigError("encoder input_channels must be >= 1");
    if (encoder.latent_dim < 1) throw ConfigError("encoder latent_dim must be >= 1");
    if (encoder.layers.empty()) throw ConfigError("encoder needs at least one conv layer");
    for (const auto& l : encoder.layers) {
        if (l.kernel < 1 || l.dilation < 1) throw ConfigError("conv kernel and dilation must be >= 1");
    }
    if (decoder.horizon < 1) throw ConfigError("decoder horizon must be >= 1");
    if (decoder.output_channels < 1) throw ConfigError("decoder output_channels must be >= 1");
}

void ModelParams::add(std::string name, Tensor tensor) {
    for (const auto& n : names_) {
        if (n == name) throw ConfigError("duplicate parameter '" + name + "'");
    }
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(tensor));
}

const Tensor& ModelParams::get(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return tensors_[i];
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

Tensor& ModelParams::get(const std::string& name) {
    return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

ModelParams ModelParams::clone() const {
    ModelParams out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        const auto values = tensors_[i].data();
        out.add(names_[i], Tensor::parameter(tensors_[i].shape(), std::vector<double>(values.begin(), values.end())));
    }
    return out;
}

void ModelParams::assign(const ModelParams& other) {
    if (other.names_ != names_) throw ConfigError("assign: parameter names differ");
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (other.tensors_[i].shape() != tensors_[i].shape()) {
            throw ShapeError("assign: shape mismatch for '" + names_[i] + "': " +
                             shape_str(tensors_[i].shape()) + " vs " + shape_str(other.tensors_[i].shape()));
        }
        const auto src = other.tensors_[i].data();
        std::copy(src.begin(), src.end(), tensors_[i].mutable_data().begin());
    }
}

bool ModelParams::bit_equal(const ModelParams& other) const {
    if (other.names_ != names_) return false;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (other.tensors_[i].shape() != tensors_[i].shape()) return false;
        const auto a = tensors_[i].data();
        const auto b = other.tensors_[i].data();
        if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

void ModelParams::zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config) {
    config.validate();
    std::vector<std::pair<std::string, Shape>> shapes;
    std::size_t in = config.encoder.input_channels;
    const std::size_t d = config.encoder.latent_dim;
    for (std::size_t l = 0; l < config.encoder.layers.size(); ++l) {
        shapes.emplace_back(conv_name(l, "kernel"), Shape{config.encoder.layers[l].kernel, in, d});
        shapes.emplace_back(conv_name(l, "bias"), Shape{d});
        in = d;
    }
    const std::size_t out = config.decoder.horizon * config.decoder.output_channels;
    shapes.emplace_back("decoder.weight", Shape{2 * d, out});
    shapes.emplace_back("decoder.bias", Shape{out});
    return shapes;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x1417}));
    ModelParams params;
    for (auto& [name, shape] : parameter_shapes(config)) {
        std::vector<double> values(shape_size(shape), 0.0);
        if (shape.size() >= 2) {
            // Conv kernels (K, Cin, Cout) count the receptive field in both fans.
            const std::size_t field = shape.size() == 3 ? shape[0] : 1;
            const double fan_in = static_cast<double>(field * shape[shape.size() - 2]);
            const double fan_out = static_cast<double>(field * shape.back());
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : values) v = dist(rng);
        }
        params.add(name, Tensor::parameter(shape, std::move(values)));
    }
    return params;
}

Tensor encode(const Tensor& x, const ModelParams& params, const ModelConfig& config) {
    const std::size_t channels_axis = x.rank() == 3 ? 2 : 1;
    if ((x.rank() != 2 && x.rank() != 3) || x.dim(channels_axis) != config.encoder.input_channels) {
        throw ShapeError("encode: expected (B,T," + std::to_string(config.encoder.input_channels) + ") or (T," +
                         std::to_string(config.encoder.input_channels) + "), got " + shape_str(x.shape()));
    }
    Tensor h = x;
    const std::size_t n = config.encoder.layers.size();
    for (std::size_t l = 0; l < n; ++l) {
        h = ops::causal_dilated_conv1d(h, params.get(conv_name(l, "kernel")), config.encoder.layers[l].dilation,
                                       params.get(conv_name(l, "bias")));
        if (l + 1 < n) h = ops::relu(h);
    }
    return h;
}

Tensor decode(const Tensor& z, const ModelParams& params, const ModelConfig& config) {
    const std::size_t d = config.encoder.latent_dim;
    const bool batched = z.rank() == 3;
    if ((z.rank() != 2 && z.rank() != 3) || z.shape().back() != d || z.dim(batched ? 1 : 0) == 0) {
        throw ShapeError("decode: expected (B,T'," + std::to_string(d) + ") or (T'," + std::to_string(d) +
                         "), got " + shape_str(z.shape()));
    }
    const Tensor zb = batched ? z : ops::reshape(z, {1, z.dim(0), d});
    const std::size_t batch = zb.dim(0);
    const Tensor features = ops::concat_last(ops::select_time(zb, zb.dim(1) - 1), ops::mean_time(zb));
    const Tensor flat = ops::add_bias(ops::matmul(features, params.get("decoder.weight")), params.get("decoder.bias"));
    const std::size_t h = config.decoder.horizon;
    const std::size_t c = config.decoder.output_channels;
    return batched ? ops::reshape(flat, {batch, h, c}) : ops::reshape(flat, {h, c});
}

Tensor forecast(const Tensor& x, const ModelParams& params, const ModelConfig& config) {
    return decode(encode(x, params, config), params, config);
}

void save_checkpoint(const ModelParams& params, std::ostream& out,
                     const std::map<std::string, std::string>& metadata) {
    out << kCheckpointMagic << '\n';
    for (const auto& [key, value] : metadata) {
        if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
            throw ConfigError("checkpoint metadata must be single-line with space-free keys");
        }
        out << "meta " << key << ' ' << value << '\n';
    }
    char buf[64];
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params.tensors()[i];
        out << "tensor " << params.names()[i] << ' ' << t.rank();
        for (auto d : t.shape()) out << ' ' << d;
        out << '\n';
        bool first = true;
        for (double v : t.data()) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            (void)ec;
            if (!first) out << ' ';
            out.write(buf, ptr - buf);
            first = false;
        }
        out << '\n';
    }
    out << "end\n";
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
    save_checkpoint(params, out, metadata);
    if (!out) throw DataError("checkpoint write failed for '" + path.string() + "'");
}

ModelParams load_checkpoint(std::istream& in, std::map<std::string, std::string>* metadata) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) {
        throw DataError("not a weca checkpoint (bad header)");
    }
    ModelParams params;
    while (std::getline(in, line)) {
        if (line == "end") return params;
        std::istringstream head(line);
        std::string kind;
        head >> kind;
        if (kind == "meta") {
            std::string key;
            head >> key;
            std::string value;
            std::getline(head >> std::ws, value);
            if (metadata) (*metadata)[key] = value;
            continue;
        }
        if (kind != "tensor") throw DataError("checkpoint: unexpected line '" + line + "'");
        std::string name;
        std::size_t rank = 0;
        head >> name >> rank;
        Shape shape(rank);
        for (auto& d : shape) head >> d;
        if (!head) throw DataError("checkpoint: malformed tensor header '" + line + "'");
        std::string body;
        if (!std::getline(in, body)) throw DataError("checkpoint: missing values for '" + name + "'");
        std::vector<double> values;
        values.reserve(shape_size(shape));
        const char* p = body.data();
        const char* end = body.data() + body.size();
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) throw DataError("checkpoint: bad value in '" + name + "'");
            values.push_back(v);
            p = next;
        }
        if (values.size() != shape_size(shape)) {
            throw DataError("checkpoint: '" + name + "' has " + std::to_string(values.size()) +
                            " values for shape " + shape_str(shape));
        }
        params.add(name, Tensor::parameter(shape, std::move(values)));
    }
    throw DataError("checkpoint: truncated (missing end marker)");
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string>* metadata) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    return load_checkpoint(in, metadata);
}

}  // namespace weca
