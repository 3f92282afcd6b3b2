#include "specvit/vit.hpp"

#include <cmath>
#include <numbers>

#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInitStd = 0.02;

Index idx(std::size_t v) { return static_cast<Index>(v); }

MatrixXd linear(const MatrixXd& x, const MatrixXd& w, const VectorXd& b) {
  MatrixXd y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void check_finite(const MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + where);
}

/// Softmax of each row, with max subtraction.
MatrixXd softmax_rows(MatrixXd s) {
  for (Index i = 0; i < s.rows(); ++i) {
    s.row(i).array() -= s.row(i).maxCoeff();
    s.row(i) = s.row(i).array().exp();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

struct LayerNormCache {
  MatrixXd xhat;
  VectorXd rstd;
};

MatrixXd layer_norm_cached(const MatrixXd& x, const VectorXd& gain, const VectorXd& bias, double eps,
                           LayerNormCache* cache) {
  const auto d = static_cast<double>(x.cols());
  MatrixXd xhat(x.rows(), x.cols());
  VectorXd rstd(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mean).matrix();
    const double var = centered.squaredNorm() / d;
    rstd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = centered * rstd(i);
  }
  MatrixXd y = (xhat.array().rowwise() * gain.transpose().array()).matrix();
  y.rowwise() += bias.transpose();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const LayerNormCache& c, const VectorXd& gain,
                             VectorXd& dgain, VectorXd& dbias) {
  dgain += (dy.array() * c.xhat.array()).colwise().sum().transpose().matrix();
  dbias += dy.colwise().sum().transpose();
  const MatrixXd dxhat = (dy.array().rowwise() * gain.transpose().array()).matrix();
  const auto d = static_cast<double>(dy.cols());
  MatrixXd dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / d;
    const double m2 = dxhat.row(i).dot(c.xhat.row(i)) / d;
    dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

struct LayerCache {
  MatrixXd input;
  LayerNormCache ln1;
  MatrixXd y1, q, k, v;
  std::vector<MatrixXd> attn;  // per head, tokens x tokens
  MatrixXd concat;
  MatrixXd mid;
  LayerNormCache ln2;
  MatrixXd y2, pre_act, act;
};

MatrixXd encoder_forward(const MatrixXd& z, const EncoderLayerParams& p, const VitConfig& cfg,
                         LayerCache* cache) {
  LayerNormCache ln1;
  const MatrixXd y1 = layer_norm_cached(z, p.ln1_gain, p.ln1_bias, cfg.ln_eps, &ln1);
  const MatrixXd q = linear(y1, p.w_q, p.b_q);
  const MatrixXd k = linear(y1, p.w_k, p.b_k);
  const MatrixXd v = linear(y1, p.w_v, p.b_v);

  const Index dk = idx(cfg.head_dim());
  MatrixXd concat(z.rows(), z.cols());
  std::vector<MatrixXd> weights;
  weights.reserve(cfg.num_heads);
  for (Index h = 0; h < idx(cfg.num_heads); ++h) {
    MatrixXd a = attention_weights(q.middleCols(h * dk, dk), k.middleCols(h * dk, dk));
    concat.middleCols(h * dk, dk) = a * v.middleCols(h * dk, dk);
    weights.push_back(std::move(a));
  }
  const MatrixXd mid = z + linear(concat, p.w_o, p.b_o);

  LayerNormCache ln2;
  const MatrixXd y2 = layer_norm_cached(mid, p.ln2_gain, p.ln2_bias, cfg.ln_eps, &ln2);
  const MatrixXd pre = linear(y2, p.w_ff1, p.b_ff1);
  const MatrixXd act = pre.unaryExpr([](double x) { return gelu(x); });
  MatrixXd out = mid + linear(act, p.w_ff2, p.b_ff2);

  if (cache) {
    cache->input = z;
    cache->ln1 = std::move(ln1);
    cache->y1 = y1;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->attn = std::move(weights);
    cache->concat = std::move(concat);
    cache->mid = mid;
    cache->ln2 = std::move(ln2);
    cache->y2 = y2;
    cache->pre_act = pre;
    cache->act = act;
  }
  return out;
}

/// Returns the gradient w.r.t. the layer input, accumulating parameter grads.
MatrixXd encoder_backward(const MatrixXd& dout, const LayerCache& c, const EncoderLayerParams& p,
                          EncoderLayerParams& g, const VitConfig& cfg) {
  // Feed-forward branch.
  const MatrixXd& df = dout;
  g.w_ff2 += df.transpose() * c.act;
  g.b_ff2 += df.colwise().sum().transpose();
  const MatrixXd dact = df * p.w_ff2;
  const MatrixXd dpre = dact.array() * c.pre_act.unaryExpr([](double x) { return gelu_grad(x); }).array();
  g.w_ff1 += dpre.transpose() * c.y2;
  g.b_ff1 += dpre.colwise().sum().transpose();
  const MatrixXd dy2 = dpre * p.w_ff1;
  MatrixXd dmid = dout + layer_norm_backward(dy2, c.ln2, p.ln2_gain, g.ln2_gain, g.ln2_bias);

  // Attention branch.
  g.w_o += dmid.transpose() * c.concat;
  g.b_o += dmid.colwise().sum().transpose();
  const MatrixXd dconcat = dmid * p.w_o;

  const Index dk = idx(cfg.head_dim());
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  MatrixXd dq(c.q.rows(), c.q.cols()), dk_all(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (Index h = 0; h < idx(cfg.num_heads); ++h) {
    const MatrixXd& a = c.attn[static_cast<std::size_t>(h)];
    const auto dout_h = dconcat.middleCols(h * dk, dk);
    dv.middleCols(h * dk, dk) = a.transpose() * dout_h;
    const MatrixXd da = dout_h * c.v.middleCols(h * dk, dk).transpose();
    const VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
    const MatrixXd ds = (a.array() * (da.colwise() - row_dot).array()).matrix() * inv_sqrt;
    dq.middleCols(h * dk, dk) = ds * c.k.middleCols(h * dk, dk);
    dk_all.middleCols(h * dk, dk) = ds.transpose() * c.q.middleCols(h * dk, dk);
  }
  g.w_q += dq.transpose() * c.y1;
  g.w_k += dk_all.transpose() * c.y1;
  g.w_v += dv.transpose() * c.y1;
  g.b_q += dq.colwise().sum().transpose();
  g.b_k += dk_all.colwise().sum().transpose();
  g.b_v += dv.colwise().sum().transpose();
  const MatrixXd dy1 = dq * p.w_q + dk_all * p.w_k + dv * p.w_v;
  return dmid + layer_norm_backward(dy1, c.ln1, p.ln1_gain, g.ln1_gain, g.ln1_bias);
}

void require_image(const Image& img, const VitConfig& cfg) {
  if (img.height != cfg.image_size || img.width != cfg.image_size ||
      img.pixels.size() != img.height * img.width * 3)
    throw ValidationError("image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                          ", model expects " + std::to_string(cfg.image_size) + "x" +
                          std::to_string(cfg.image_size));
}

int argmax(const VectorXd& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

VectorXd smoothed_target(Index classes, int label, double alpha) {
  VectorXd t = VectorXd::Constant(classes, alpha / static_cast<double>(classes));
  t(label) += 1.0 - alpha;
  return t;
}

void check_label(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes)
    throw ValidationError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
}

template <class P, class F>
void visit_tensors(P& p, F&& f) {
  f("patch_embed", p.patch_embed);
  f("patch_bias", p.patch_bias);
  f("pos_embed", p.pos_embed);
  f("class_token", p.class_token);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    f(pre + "ln1_gain", L.ln1_gain);
    f(pre + "ln1_bias", L.ln1_bias);
    f(pre + "w_q", L.w_q);
    f(pre + "b_q", L.b_q);
    f(pre + "w_k", L.w_k);
    f(pre + "b_k", L.b_k);
    f(pre + "w_v", L.w_v);
    f(pre + "b_v", L.b_v);
    f(pre + "w_o", L.w_o);
    f(pre + "b_o", L.b_o);
    f(pre + "ln2_gain", L.ln2_gain);
    f(pre + "ln2_bias", L.ln2_bias);
    f(pre + "w_ff1", L.w_ff1);
    f(pre + "b_ff1", L.b_ff1);
    f(pre + "w_ff2", L.w_ff2);
    f(pre + "b_ff2", L.b_ff2);
  }
  f("head_weight", p.head_weight);
  f("head_bias", p.head_bias);
}

}  // namespace

void VitConfig::validate() const {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0)
    throw ValidationError("image_size must be a positive multiple of patch_size");
  if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0)
    throw ValidationError("embed_dim must be a positive multiple of num_heads");
  if (mlp_dim == 0) throw ValidationError("mlp_dim must be > 0");
  if (num_classes < 2) throw ValidationError("need at least two classes");
  if (!(ln_eps >= 0.0)) throw ValidationError("ln_eps must be >= 0");
}

std::vector<TensorView> tensor_views(VitParams& p) {
  std::vector<TensorView> out;
  visit_tensors(p, [&](const std::string& name, auto& t) {
    out.push_back({name, t.data(), t.rows(), t.cols()});
  });
  return out;
}

std::vector<TensorView> tensor_views(const VitParams& p) {
  return tensor_views(const_cast<VitParams&>(p));
}

VitParams zero_params(const VitConfig& cfg) {
  cfg.validate();
  const Index d = idx(cfg.embed_dim), m = idx(cfg.mlp_dim);
  VitParams p;
  p.patch_embed = MatrixXd::Zero(d, idx(cfg.patch_dim()));
  p.patch_bias = VectorXd::Zero(d);
  p.pos_embed = MatrixXd::Zero(idx(cfg.num_tokens()), d);
  p.class_token = VectorXd::Zero(d);
  p.layers.resize(cfg.num_layers);
  for (auto& L : p.layers) {
    L.ln1_gain = VectorXd::Zero(d);
    L.ln1_bias = VectorXd::Zero(d);
    L.ln2_gain = VectorXd::Zero(d);
    L.ln2_bias = VectorXd::Zero(d);
    L.w_q = L.w_k = L.w_v = L.w_o = MatrixXd::Zero(d, d);
    L.b_q = L.b_k = L.b_v = L.b_o = VectorXd::Zero(d);
    L.w_ff1 = MatrixXd::Zero(m, d);
    L.b_ff1 = VectorXd::Zero(m);
    L.w_ff2 = MatrixXd::Zero(d, m);
    L.b_ff2 = VectorXd::Zero(d);
  }
  p.head_weight = MatrixXd::Zero(idx(cfg.num_classes), d);
  p.head_bias = VectorXd::Zero(idx(cfg.num_classes));
  return p;
}

double global_norm(const VitParams& p) {
  double ss = 0.0;
  for (const auto& t : tensor_views(p))
    for (double v : t.values()) ss += v * v;
  return std::sqrt(ss);
}

std::size_t parameter_count(const VitParams& p) {
  std::size_t n = 0;
  for (const auto& t : tensor_views(p)) n += t.size();
  return n;
}

VitModel init_model(const VitConfig& cfg, std::uint64_t seed) {
  VitModel model{cfg, zero_params(cfg)};
  Rng rng(seed);
  const auto trunc_normal = [&](auto& t) {
    for (Index i = 0; i < t.size(); ++i) {
      double z;
      do {
        z = rng.normal();
      } while (std::abs(z) > 2.0);
      t.data()[i] = kInitStd * z;
    }
  };
  auto& p = model.params;
  trunc_normal(p.patch_embed);
  trunc_normal(p.pos_embed);
  trunc_normal(p.class_token);
  for (auto& L : p.layers) {
    L.ln1_gain.setOnes();
    L.ln2_gain.setOnes();
    trunc_normal(L.w_q);
    trunc_normal(L.w_k);
    trunc_normal(L.w_v);
    trunc_normal(L.w_o);
    trunc_normal(L.w_ff1);
    trunc_normal(L.w_ff2);
  }
  trunc_normal(p.head_weight);
  return model;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

VectorXd softmax(const VectorXd& logits) {
  VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::MatrixXd extract_patches(const Image& img, std::size_t patch_size) {
  if (patch_size == 0 || img.height % patch_size != 0 || img.width % patch_size != 0)
    throw ValidationError("image dimensions are not divisible by the patch size");
  const std::size_t gh = img.height / patch_size, gw = img.width / patch_size;
  MatrixXd out(idx(gh * gw), idx(patch_size * patch_size * 3));
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      const Index row = idx(py * gw + px);
      Index col = 0;
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          for (std::size_t c = 0; c < 3; ++c)
            out(row, col++) = img.at(py * patch_size + y, px * patch_size + x, c);
    }
  return out;
}

Eigen::MatrixXd embed_patches(const Image& img, const VitModel& model) {
  require_image(img, model.config);
  const auto& p = model.params;
  const MatrixXd patches = extract_patches(img, model.config.patch_size);
  MatrixXd z(patches.rows() + 1, p.patch_embed.rows());
  z.row(0) = p.class_token.transpose();
  z.bottomRows(patches.rows()) = linear(patches, p.patch_embed, p.patch_bias);
  z += p.pos_embed;
  return z;
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, double eps) {
  return layer_norm_cached(x, gain, bias, eps, nullptr);
}

Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k) {
  if (q.cols() != k.cols() || q.cols() < 1) throw ValidationError("attention: Q/K width mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return softmax_rows(q * k.transpose() * scale);
}

Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v) {
  if (k.rows() != v.rows()) throw ValidationError("attention: K/V length mismatch");
  return attention_weights(q, k) * v;
}

Eigen::MatrixXd encoder_layer(const Eigen::MatrixXd& tokens, const EncoderLayerParams& layer,
                              const VitConfig& cfg) {
  if (tokens.cols() != idx(cfg.embed_dim)) throw ValidationError("encoder_layer: token width mismatch");
  return encoder_forward(tokens, layer, cfg, nullptr);
}

Prediction forward(const Image& img, const VitModel& model) {
  MatrixXd z = embed_patches(img, model);
  check_finite(z, "patch embedding");
  for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
    z = encoder_forward(z, model.params.layers[l], model.config, nullptr);
    check_finite(z, "encoder layer " + std::to_string(l));
  }
  Prediction out;
  out.logits = model.params.head_weight * z.row(0).transpose() + model.params.head_bias;
  check_finite(out.logits, "classification head");
  out.probs = softmax(out.logits);
  out.predicted = argmax(out.probs);
  return out;
}

double loss_smoothed_ce(const Eigen::VectorXd& probs, int label, double alpha) {
  check_label(label, static_cast<std::size_t>(probs.size()));
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("label smoothing must lie in [0, 1)");
  const VectorXd t = smoothed_target(probs.size(), label, alpha);
  double loss = 0.0;
  for (Index c = 0; c < probs.size(); ++c)
    if (t(c) > 0.0) loss -= t(c) * std::log(probs(c));
  return loss;
}

double loss_from_logits(const Eigen::VectorXd& logits, int label, double alpha) {
  check_label(label, static_cast<std::size_t>(logits.size()));
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("label smoothing must lie in [0, 1)");
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  const VectorXd t = smoothed_target(logits.size(), label, alpha);
  return -(t.array() * (logits.array() - lse)).sum();
}

Gradients backward(const VitModel& model, std::span<const Image> images, std::span<const int> labels,
                   double alpha) {
  if (images.empty()) throw ValidationError("backward: empty batch");
  if (images.size() != labels.size()) throw ValidationError("backward: images/labels size mismatch");
  const auto& cfg = model.config;
  const auto& p = model.params;
  Gradients out{zero_params(cfg), 0.0, {}};
  auto& g = out.grads;
  const double inv_batch = 1.0 / static_cast<double>(images.size());
  std::vector<LayerCache> caches(p.layers.size());

  for (std::size_t b = 0; b < images.size(); ++b) {
    check_label(labels[b], cfg.num_classes);
    require_image(images[b], cfg);
    const MatrixXd patches = extract_patches(images[b], cfg.patch_size);
    MatrixXd z(patches.rows() + 1, idx(cfg.embed_dim));
    z.row(0) = p.class_token.transpose();
    z.bottomRows(patches.rows()) = linear(patches, p.patch_embed, p.patch_bias);
    z += p.pos_embed;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      z = encoder_forward(z, p.layers[l], cfg, &caches[l]);
      check_finite(z, "encoder layer " + std::to_string(l));
    }
    const VectorXd cls = z.row(0).transpose();
    const VectorXd logits = p.head_weight * cls + p.head_bias;
    check_finite(logits, "classification head");
    const VectorXd probs = softmax(logits);
    out.mean_loss += loss_from_logits(logits, labels[b], alpha) * inv_batch;
    out.predicted.push_back(argmax(probs));

    const VectorXd dlogits = (probs - smoothed_target(logits.size(), labels[b], alpha)) * inv_batch;
    g.head_weight += dlogits * cls.transpose();
    g.head_bias += dlogits;
    MatrixXd dz = MatrixXd::Zero(z.rows(), z.cols());
    dz.row(0) = (p.head_weight.transpose() * dlogits).transpose();
    for (std::size_t l = p.layers.size(); l-- > 0;)
      dz = encoder_backward(dz, caches[l], p.layers[l], g.layers[l], cfg);

    g.pos_embed += dz;
    g.class_token += dz.row(0).transpose();
    const auto dpatch = dz.bottomRows(patches.rows());
    g.patch_embed += dpatch.transpose() * patches;
    g.patch_bias += dpatch.colwise().sum().transpose();
  }

  for (const auto& t : tensor_views(g))
    for (double v : t.values())
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + t.name);
  return out;
}

}  // namespace specvit
