#include "pdiff/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "pdiff/error.hpp"
#include "pdiff/kernels.hpp"
#include "pdiff/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace pdiff {

namespace {
constexpr std::uint64_t kStreamInit = 501;
constexpr const char* kCheckpointFormat = "mlp-checkpoint-v1";
}  // namespace

NetworkParams init_network(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2)
        fail(ErrorCategory::argument, "network needs at least input and output dims");
    for (std::size_t d : layer_dims)
        if (d < 1) fail(ErrorCategory::argument, "layer dims must be >= 1");

    NetworkParams p;
    p.layer_dims = layer_dims;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l];
        const std::size_t fan_out = layer_dims[l + 1];
        Matrix w(fan_out, fan_in);
        Rng rng(derive_seed(seed, kStreamInit, l));
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.data) v = scale * rng.gaussian();
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

ForwardCache forward(const NetworkParams& params, const Matrix& features) {
    if (features.cols != params.input_dim())
        fail(ErrorCategory::shape, "feature dim " + std::to_string(features.cols) +
                                       " does not match network input " +
                                       std::to_string(params.input_dim()));
    if (features.rows == 0) fail(ErrorCategory::shape, "empty batch");

    const auto& k = kernels::ops();
    const std::size_t L = params.num_layers();
    ForwardCache cache;
    cache.activations.reserve(L);
    cache.activations.push_back(features);

    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& in = cache.activations.back();
        Matrix out(features.rows, params.layer_dims[l + 1]);
        k.dense_forward(in.data.data(), params.weights[l].data.data(),
                        params.biases[l].data(), out.data.data(), in.rows, in.cols, out.cols);
        if (l + 1 < L) {
            k.relu_forward(out.data.data(), out.size());
            cache.activations.push_back(std::move(out));
        } else {
            cache.logits = std::move(out);
        }
    }
    return cache;
}

void softmax(const double* logits, double* probs, std::size_t c) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c; ++i) {
        if (!std::isfinite(logits[i]))
            fail(ErrorCategory::numeric, "non-finite logit in softmax");
        hi = std::max(hi, logits[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        probs[i] = std::exp(logits[i] - hi);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < c; ++i) probs[i] /= sum;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> probs(logits.size());
    softmax(logits.data(), probs.data(), logits.size());
    return probs;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r)
        softmax(logits.row(r), probs.row(r), logits.cols);
    return probs;
}

double weighted_ce_loss(const double* probs, std::size_t c, int y, double omega) {
    if (y < 0 || static_cast<std::size_t>(y) >= c)
        fail(ErrorCategory::argument, "label " + std::to_string(y) + " out of range");
    if (omega == 0.0) return 0.0;
    return -omega * std::log(std::max(probs[y], 1e-12));
}

double weighted_ce_loss(const std::vector<double>& probs, int y, double omega) {
    return weighted_ce_loss(probs.data(), probs.size(), y, omega);
}

const char* grad_reduction_name(GradReduction r) {
    return r == GradReduction::mean ? "mean" : "sum";
}

GradReduction parse_grad_reduction(const std::string& s) {
    if (s == "mean") return GradReduction::mean;
    if (s == "sum") return GradReduction::sum;
    fail(ErrorCategory::config, "unknown grad_reduction '" + s + "' (expected mean or sum)");
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache, const Matrix& probs,
                   const std::vector<int>& labels, const std::vector<double>& omegas,
                   GradReduction reduction) {
    const std::size_t L = params.num_layers();
    const std::size_t s_batch = cache.batch_rows();
    const std::size_t c = params.num_classes();
    probs.require_shape(s_batch, c, "probs");
    if (labels.size() != s_batch || omegas.size() != s_batch)
        fail(ErrorCategory::shape, "labels/omegas length does not match batch");
    if (cache.activations.size() != L)
        fail(ErrorCategory::shape, "forward cache does not match network depth");

    Gradients g;
    for (std::size_t l = 0; l < L; ++l) {
        g.weights.emplace_back(params.layer_dims[l + 1], params.layer_dims[l]);
        g.biases.emplace_back(params.layer_dims[l + 1], 0.0);
    }

    // Keep only selected rows: dropped samples must not influence a single bit.
    std::vector<std::size_t> sel;
    sel.reserve(s_batch);
    for (std::size_t s = 0; s < s_batch; ++s) {
        if (omegas[s] != 0.0 && omegas[s] != 1.0)
            fail(ErrorCategory::argument, "sample weight must be 0 or 1");
        if (omegas[s] != 0.0) sel.push_back(s);
    }
    if (sel.empty()) return g;

    const std::size_t n = sel.size();
    const double scale =
        reduction == GradReduction::mean ? 1.0 / static_cast<double>(s_batch) : 1.0;

    Matrix d(n, c);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t s = sel[j];
        const int y = labels[s];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            fail(ErrorCategory::argument, "label " + std::to_string(y) + " out of range");
        const double* p = probs.row(s);
        double* out = d.row(j);
        for (std::size_t m = 0; m < c; ++m)
            out[m] = (p[m] - (static_cast<std::size_t>(y) == m ? 1.0 : 0.0)) * scale;
    }

    std::vector<Matrix> acts(L);
    for (std::size_t l = 0; l < L; ++l) {
        acts[l] = Matrix(n, cache.activations[l].cols);
        for (std::size_t j = 0; j < n; ++j)
            std::copy_n(cache.activations[l].row(sel[j]), acts[l].cols, acts[l].row(j));
    }

    const auto& k = kernels::ops();
    for (std::size_t l = L; l-- > 0;) {
        k.dense_backward_weights(d.data.data(), acts[l].data.data(), g.weights[l].data.data(), n,
                                 acts[l].cols, d.cols);
        k.bias_backward(d.data.data(), g.biases[l].data(), n, d.cols);
        if (l > 0) {
            Matrix dx(n, acts[l].cols);
            k.dense_backward_data(d.data.data(), params.weights[l].data.data(), dx.data.data(),
                                  n, dx.cols, d.cols);
            k.relu_backward(acts[l].data.data(), dx.data.data(), dx.size());
            d = std::move(dx);
        }
    }
    return g;
}

OptimizerState make_optimizer(const NetworkParams& params, double learning_rate,
                              double momentum) {
    if (!(learning_rate > 0.0)) fail(ErrorCategory::argument, "learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        fail(ErrorCategory::argument, "momentum must be in [0,1)");
    OptimizerState st;
    st.learning_rate = learning_rate;
    st.momentum = momentum;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        st.velocity_w.emplace_back(params.weights[l].rows, params.weights[l].cols);
        st.velocity_b.emplace_back(params.biases[l].size(), 0.0);
    }
    return st;
}

void sgd_momentum_step(NetworkParams& params, const Gradients& grads, OptimizerState& state) {
    const std::size_t L = params.num_layers();
    if (grads.weights.size() != L || state.velocity_w.size() != L)
        fail(ErrorCategory::shape, "gradient/optimizer depth mismatch");
    const auto& k = kernels::ops();
    for (std::size_t l = 0; l < L; ++l) {
        grads.weights[l].require_shape(params.weights[l].rows, params.weights[l].cols,
                                       "weight gradient");
        if (grads.biases[l].size() != params.biases[l].size())
            fail(ErrorCategory::shape, "bias gradient shape mismatch");
        k.sgd_momentum(params.weights[l].data.data(), state.velocity_w[l].data.data(),
                       grads.weights[l].data.data(), state.learning_rate, state.momentum,
                       params.weights[l].size());
        k.sgd_momentum(params.biases[l].data(), state.velocity_b[l].data(),
                       grads.biases[l].data(), state.learning_rate, state.momentum,
                       params.biases[l].size());
    }
}

double evaluate(const NetworkParams& params, const LabeledDataset& ds) {
    if (ds.size() == 0) fail(ErrorCategory::argument, "cannot evaluate on an empty dataset");
    constexpr std::size_t kChunk = 1024;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < ds.size(); start += kChunk) {
        const std::size_t rows = std::min(kChunk, ds.size() - start);
        Matrix chunk(rows, ds.dim());
        std::copy_n(ds.features.row(start), rows * ds.dim(), chunk.data.data());
        const ForwardCache fc = forward(params, chunk);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* z = fc.logits.row(r);
            std::size_t best = 0;
            for (std::size_t m = 1; m < fc.logits.cols; ++m)
                if (z[m] > z[best]) best = m;
            if (static_cast<int>(best) == ds.true_labels[start + r]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

void save_checkpoint(const NetworkParams& params, const std::string& path_prefix) {
    const std::string bin_path = path_prefix + ".bin";
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) fail(ErrorCategory::io, "cannot write " + bin_path);

    std::size_t count = 0;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        bin.write(reinterpret_cast<const char*>(params.weights[l].data.data()),
                  static_cast<std::streamsize>(params.weights[l].size() * sizeof(double)));
        bin.write(reinterpret_cast<const char*>(params.biases[l].data()),
                  static_cast<std::streamsize>(params.biases[l].size() * sizeof(double)));
        count += params.weights[l].size() + params.biases[l].size();
    }
    if (!bin) fail(ErrorCategory::io, "write failed: " + bin_path);

    nlohmann::json manifest;
    manifest["format"] = kCheckpointFormat;
    manifest["dtype"] = "float64-le";
    manifest["layer_dims"] = params.layer_dims;
    manifest["tensor_order"] = "w0,b0,w1,b1,...";
    manifest["value_count"] = count;
    const std::string json_path = path_prefix + ".json";
    std::ofstream js(json_path, std::ios::binary);
    if (!js) fail(ErrorCategory::io, "cannot write " + json_path);
    js << manifest.dump(2) << '\n';
    if (!js) fail(ErrorCategory::io, "write failed: " + json_path);
}

NetworkParams load_checkpoint(const std::string& path_prefix) {
    const std::string json_path = path_prefix + ".json";
    std::ifstream js(json_path, std::ios::binary);
    if (!js) fail(ErrorCategory::io, "cannot open " + json_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(js);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCategory::parse, json_path + ": " + e.what());
    }

    if (!manifest.contains("format") || manifest["format"] != kCheckpointFormat)
        fail(ErrorCategory::format, json_path + ": unsupported checkpoint format");
    if (!manifest.contains("layer_dims") || !manifest["layer_dims"].is_array())
        fail(ErrorCategory::format, json_path + ": missing layer_dims");
    std::vector<std::size_t> dims = manifest["layer_dims"].get<std::vector<std::size_t>>();
    if (dims.size() < 2) fail(ErrorCategory::format, json_path + ": layer_dims too short");

    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) count += dims[l + 1] * dims[l] + dims[l + 1];
    if (manifest.contains("value_count") &&
        manifest["value_count"].get<std::size_t>() != count)
        fail(ErrorCategory::consistency, json_path + ": value_count does not match layer_dims");

    const std::string bin_path = path_prefix + ".bin";
    std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
    if (!bin) fail(ErrorCategory::io, "cannot open " + bin_path);
    const auto bytes = static_cast<std::size_t>(bin.tellg());
    if (bytes != count * sizeof(double))
        fail(ErrorCategory::consistency, bin_path + ": size " + std::to_string(bytes) +
                                             " does not match manifest (" +
                                             std::to_string(count * sizeof(double)) + ")");
    bin.seekg(0);

    NetworkParams p;
    p.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l + 1], dims[l]);
        bin.read(reinterpret_cast<char*>(w.data.data()),
                 static_cast<std::streamsize>(w.size() * sizeof(double)));
        std::vector<double> b(dims[l + 1]);
        bin.read(reinterpret_cast<char*>(b.data()),
                 static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!bin) fail(ErrorCategory::io, "truncated file: " + bin_path);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    for (const auto& w : p.weights)
        for (double v : w.data)
            if (!std::isfinite(v)) fail(ErrorCategory::numeric, bin_path + ": non-finite weight");
    for (const auto& b : p.biases)
        for (double v : b)
            if (!std::isfinite(v)) fail(ErrorCategory::numeric, bin_path + ": non-finite bias");
    return p;
}

}  // namespace pdiff
