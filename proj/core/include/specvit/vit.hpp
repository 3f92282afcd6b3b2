#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specvit/imaging.hpp"

namespace specvit {

/// Shape of a minimal pre-norm Vision Transformer. Token count is
/// (image_size / patch_size)^2 + 1 for the class token.
struct VitConfig {
  std::size_t image_size = 224;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 192;
  std::size_t num_layers = 4;
  std::size_t num_heads = 3;
  std::size_t mlp_dim = 384;
  std::size_t num_classes = 14;
  double ln_eps = 1e-6;

  void validate() const;
  std::size_t grid() const noexcept { return image_size / patch_size; }
  std::size_t num_patches() const noexcept { return grid() * grid(); }
  std::size_t num_tokens() const noexcept { return num_patches() + 1; }
  std::size_t head_dim() const noexcept { return embed_dim / num_heads; }
  std::size_t patch_dim() const noexcept { return patch_size * patch_size * 3; }

  friend bool operator==(const VitConfig&, const VitConfig&) = default;
};

/// Weights are stored (out x in); token matrices are (tokens x features), so a
/// linear layer is Y = X W^T + b^T.
struct EncoderLayerParams {
  Eigen::VectorXd ln1_gain, ln1_bias;
  Eigen::MatrixXd w_q, w_k, w_v, w_o;
  Eigen::VectorXd b_q, b_k, b_v, b_o;
  Eigen::VectorXd ln2_gain, ln2_bias;
  Eigen::MatrixXd w_ff1;  // mlp x d
  Eigen::VectorXd b_ff1;
  Eigen::MatrixXd w_ff2;  // d x mlp
  Eigen::VectorXd b_ff2;
};

struct VitParams {
  Eigen::MatrixXd patch_embed;  // d x (P*P*3)
  Eigen::VectorXd patch_bias;
  Eigen::MatrixXd pos_embed;    // (N+1) x d
  Eigen::VectorXd class_token;
  std::vector<EncoderLayerParams> layers;
  Eigen::MatrixXd head_weight;  // classes x d
  Eigen::VectorXd head_bias;
};

/// Named flat view of one parameter tensor.
struct TensorView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows * cols); }
  std::span<double> values() const noexcept { return {data, size()}; }
};

/// Every tensor in a fixed order; names are stable ("layer0.w_q", ...).
std::vector<TensorView> tensor_views(VitParams& p);
std::vector<TensorView> tensor_views(const VitParams& p);  // data must not be written

VitParams zero_params(const VitConfig& cfg);
double global_norm(const VitParams& p);
std::size_t parameter_count(const VitParams& p);

struct VitModel {
  VitConfig config;
  VitParams params;
};

/// Truncated-normal (std 0.02, cut at 2 std) projections and embeddings,
/// zero biases, unit layer-norm gains.
VitModel init_model(const VitConfig& cfg, std::uint64_t seed);

/// Non-overlapping patches, one row each, flattened in (row, col, channel) order.
Eigen::MatrixXd extract_patches(const Image& img, std::size_t patch_size);

/// Class token followed by projected patches, positional embeddings added.
Eigen::MatrixXd embed_patches(const Image& img, const VitModel& model);

/// Row-wise layer normalisation with learned gain and bias.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, double eps);

/// Row-wise softmax of Q K^T / sqrt(d_k).
Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k);
Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v);

Eigen::MatrixXd encoder_layer(const Eigen::MatrixXd& tokens, const EncoderLayerParams& layer,
                              const VitConfig& cfg);

double gelu(double x);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct Prediction {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  int predicted = 0;  // argmax, lowest index on ties
};

/// Throws NumericError naming the layer if activations turn non-finite.
Prediction forward(const Image& img, const VitModel& model);

/// -sum_c y~_c log p_c with y~ = (1 - alpha) onehot + alpha / C.
double loss_smoothed_ce(const Eigen::VectorXd& probs, int label, double alpha);
/// Same loss computed stably from logits.
double loss_from_logits(const Eigen::VectorXd& logits, int label, double alpha);

struct Gradients {
  VitParams grads;
  double mean_loss = 0.0;
  std::vector<int> predicted;
};

/// Analytic gradients of the mean smoothed cross-entropy over the batch.
Gradients backward(const VitModel& model, std::span<const Image> images, std::span<const int> labels,
                   double alpha);

}  // namespace specvit
