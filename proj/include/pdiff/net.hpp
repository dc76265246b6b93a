#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdiff/dataset.hpp"
#include "pdiff/matrix.hpp"

namespace pdiff {

// Fully-connected classifier: dense layers with ReLU between them, raw logits
// out of the last layer. weights[l] is dims[l+1] x dims[l] (row = output unit).
struct NetworkParams {
    std::vector<std::size_t> layer_dims;  // [D, h_1, ..., C]
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t num_classes() const { return layer_dims.back(); }
};

// Gaussian weights scaled by 1/sqrt(fan_in), zero biases. Deterministic per seed.
NetworkParams init_network(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

struct ForwardCache {
    // activations[0] = batch input, activations[l] = post-ReLU output of layer
    // l-1; the final layer's output lives in `logits` only.
    std::vector<Matrix> activations;
    Matrix logits;

    std::size_t batch_rows() const { return logits.rows; }
};

ForwardCache forward(const NetworkParams& params, const Matrix& features);

// Numerically stable softmax (max subtraction). `logits` and `probs` may alias.
void softmax(const double* logits, double* probs, std::size_t c);
std::vector<double> softmax(const std::vector<double>& logits);
Matrix softmax_rows(const Matrix& logits);

// -omega * log(max(p_y, 1e-12)); omega is binary.
double weighted_ce_loss(const std::vector<double>& probs, int y, double omega);
double weighted_ce_loss(const double* probs, std::size_t c, int y, double omega);

enum class GradReduction { mean, sum };

const char* grad_reduction_name(GradReduction r);
GradReduction parse_grad_reduction(const std::string& s);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

// Gradient of the (mean or sum) weighted CE loss over the batch. Only samples
// with omega != 0 are touched, so a dropped sample's data cannot perturb the
// result even in the last bit. With mean reduction the divisor is the full
// batch size, dropped samples included.
Gradients backward(const NetworkParams& params, const ForwardCache& cache, const Matrix& probs,
                   const std::vector<int>& labels, const std::vector<double>& omegas,
                   GradReduction reduction);

struct OptimizerState {
    std::vector<Matrix> velocity_w;
    std::vector<std::vector<double>> velocity_b;
    double learning_rate = 0.001;
    double momentum = 0.9;
};

OptimizerState make_optimizer(const NetworkParams& params, double learning_rate, double momentum);

// v' = momentum * v + g; w' = w - lr * v'
void sgd_momentum_step(NetworkParams& params, const Gradients& grads, OptimizerState& state);

// Fraction of samples whose argmax logit matches the true label; argmax ties
// break toward the smallest class index.
double evaluate(const NetworkParams& params, const LabeledDataset& ds);

// Checkpoint = <prefix>.bin (flat float64 little-endian tensors, order
// w0,b0,w1,b1,...) + <prefix>.json shape manifest.
void save_checkpoint(const NetworkParams& params, const std::string& path_prefix);
NetworkParams load_checkpoint(const std::string& path_prefix);

}  // namespace pdiff
