#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cml/rng.hpp"
#include "cml/types.hpp"

namespace cml {

/// Random matrix with orthonormal rows/columns (QR of a Gaussian draw,
/// sign-fixed by the R diagonal), scaled by `gain`.
inline MatX orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  const bool transpose = rows < cols;
  const int r = std::max(rows, cols), c = std::min(rows, cols);
  MatX a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<MatX> qr(a);
  MatX q = qr.householderQ() * MatX::Identity(r, c);
  const MatX rm = qr.matrixQR().topRows(c);
  for (int j = 0; j < c; ++j)
    if (rm(j, j) < 0.0) q.col(j) *= -1.0;
  MatX w = transpose ? MatX(q.transpose()) : q;
  return gain * w;
}

struct Layer {
  MatX w;
  VecX b;

  static Layer make(int out, int in, double gain, Rng& rng) {
    Layer l;
    l.w = orthogonal_init(out, in, gain, rng);
    l.b = VecX::Zero(out);
    return l;
  }
};

struct LayerGrad {
  MatX w;
  VecX b;

  static LayerGrad zeros_like(const Layer& l) {
    return LayerGrad{MatX::Zero(l.w.rows(), l.w.cols()),
                     VecX::Zero(l.b.size())};
  }
};

inline constexpr int kActionDim = 6;
inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;

/// Separate actor and critic trunks, two hidden ReLU layers of
/// `hidden` units each. Actor head is tanh-squashed; exploration noise
/// is state-independent via log_std.
struct PolicyParams {
  Layer a1, a2, a3;  // actor
  Layer c1, c2, c3;  // critic
  VecX log_std;

  int obs_dim() const { return static_cast<int>(a1.w.cols()); }
  int hidden_dim() const { return static_cast<int>(a1.w.rows()); }

  static PolicyParams init(int obs_dim, std::uint64_t seed, int hidden = 128) {
    Rng rng(seed ^ 0x5bf03635f0935ad1ULL);
    PolicyParams p;
    const double g = std::sqrt(2.0);
    p.a1 = Layer::make(hidden, obs_dim, g, rng);
    p.a2 = Layer::make(hidden, hidden, g, rng);
    p.a3 = Layer::make(kActionDim, hidden, 0.01, rng);
    p.c1 = Layer::make(hidden, obs_dim, g, rng);
    p.c2 = Layer::make(hidden, hidden, g, rng);
    p.c3 = Layer::make(1, hidden, 1.0, rng);
    p.log_std = VecX::Constant(kActionDim, -1.0);
    return p;
  }

  void clamp_log_std() {
    log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  }
};

struct PolicyGrads {
  LayerGrad a1, a2, a3, c1, c2, c3;
  VecX log_std;

  static PolicyGrads zeros_like(const PolicyParams& p) {
    return PolicyGrads{LayerGrad::zeros_like(p.a1),
                       LayerGrad::zeros_like(p.a2),
                       LayerGrad::zeros_like(p.a3),
                       LayerGrad::zeros_like(p.c1),
                       LayerGrad::zeros_like(p.c2),
                       LayerGrad::zeros_like(p.c3),
                       VecX::Zero(p.log_std.size())};
  }
};

/// Batched activations; observations enter as columns (dim x batch).
struct ForwardCache {
  MatX obs;            // D x B
  MatX ah1, ah2, mean; // actor activations
  MatX ch1, ch2;       // critic activations
  VecX value;          // B
};

inline void policy_forward(const PolicyParams& p, const MatX& obs_cols,
                           ForwardCache& cache) {
  if (obs_cols.rows() != p.obs_dim())
    throw std::invalid_argument("observation dimension mismatch");
  cache.obs = obs_cols;
  cache.ah1 =
      ((p.a1.w * obs_cols).colwise() + p.a1.b).cwiseMax(0.0);
  cache.ah2 = ((p.a2.w * cache.ah1).colwise() + p.a2.b).cwiseMax(0.0);
  cache.mean =
      ((p.a3.w * cache.ah2).colwise() + p.a3.b).array().tanh().matrix();
  cache.ch1 =
      ((p.c1.w * obs_cols).colwise() + p.c1.b).cwiseMax(0.0);
  cache.ch2 = ((p.c2.w * cache.ch1).colwise() + p.c2.b).cwiseMax(0.0);
  cache.value =
      ((p.c3.w * cache.ch2).colwise() + p.c3.b).row(0).transpose();
}

/// Single-observation convenience wrapper.
inline std::pair<VecX, double> policy_forward(const PolicyParams& p,
                                              const VecX& obs) {
  ForwardCache cache;
  policy_forward(p, obs, cache);
  return {cache.mean.col(0), cache.value(0)};
}

struct SampleResult {
  VecX action;    // kActionDim
  double log_prob = 0.0;
};

inline double gaussian_log_prob(const VecX& action, const VecX& mean,
                                const VecX& log_std) {
  double lp = 0.0;
  for (int i = 0; i < action.size(); ++i) {
    const double z = (action(i) - mean(i)) * std::exp(-log_std(i));
    lp += -0.5 * z * z - log_std(i) - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

inline SampleResult sample_action(const PolicyParams& p, const VecX& mean,
                                  Rng& rng) {
  SampleResult out;
  out.action.resize(mean.size());
  for (int i = 0; i < mean.size(); ++i)
    out.action(i) = mean(i) + std::exp(p.log_std(i)) * rng.normal();
  out.log_prob = gaussian_log_prob(out.action, mean, p.log_std);
  return out;
}

/// Entropy of the diagonal Gaussian (independent of the state).
inline double policy_entropy(const PolicyParams& p) {
  return p.log_std.sum() +
         0.5 * p.log_std.size() * std::log(2.0 * M_PI * std::exp(1.0));
}

/// Exact backprop. Upstream head gradients enter per sample as columns:
/// d_mean (act x B), d_value (B). Gradients are summed over the batch;
/// the caller owns any 1/B scaling. Accumulates into `grads`.
inline void policy_backward(const PolicyParams& p, const ForwardCache& cache,
                            const MatX& d_mean, const VecX& d_value,
                            PolicyGrads& grads) {
  // actor head: mean = tanh(z3)
  const MatX dz3 =
      d_mean.cwiseProduct((1.0 - cache.mean.array().square()).matrix());
  grads.a3.w.noalias() += dz3 * cache.ah2.transpose();
  grads.a3.b.noalias() += dz3.rowwise().sum();
  MatX dh2 = p.a3.w.transpose() * dz3;
  MatX dz2 = dh2.cwiseProduct(
      (cache.ah2.array() > 0.0).cast<double>().matrix());
  grads.a2.w.noalias() += dz2 * cache.ah1.transpose();
  grads.a2.b.noalias() += dz2.rowwise().sum();
  MatX dh1 = p.a2.w.transpose() * dz2;
  MatX dz1 = dh1.cwiseProduct(
      (cache.ah1.array() > 0.0).cast<double>().matrix());
  grads.a1.w.noalias() += dz1 * cache.obs.transpose();
  grads.a1.b.noalias() += dz1.rowwise().sum();

  // critic head: value is linear
  const MatX dzv = d_value.transpose();  // 1 x B
  grads.c3.w.noalias() += dzv * cache.ch2.transpose();
  grads.c3.b.noalias() += dzv.rowwise().sum();
  MatX dch2 = p.c3.w.transpose() * dzv;
  MatX dcz2 = dch2.cwiseProduct(
      (cache.ch2.array() > 0.0).cast<double>().matrix());
  grads.c2.w.noalias() += dcz2 * cache.ch1.transpose();
  grads.c2.b.noalias() += dcz2.rowwise().sum();
  MatX dch1 = p.c2.w.transpose() * dcz2;
  MatX dcz1 = dch1.cwiseProduct(
      (cache.ch1.array() > 0.0).cast<double>().matrix());
  grads.c1.w.noalias() += dcz1 * cache.obs.transpose();
  grads.c1.b.noalias() += dcz1.rowwise().sum();
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  PolicyGrads m, v;
  std::int64_t t = 0;

  static AdamState zeros_like(const PolicyParams& p) {
    return AdamState{PolicyGrads::zeros_like(p), PolicyGrads::zeros_like(p),
                     0};
  }
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

namespace detail {

inline void adam_tensor(MatX& param, const MatX& grad, MatX& m, MatX& v,
                        const AdamConfig& cfg, double bc1, double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v.array().matrix() +
      (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -= cfg.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.eps);
}

inline void adam_tensor(VecX& param, const VecX& grad, VecX& m, VecX& v,
                        const AdamConfig& cfg, double bc1, double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -= cfg.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.eps);
}

inline void adam_layer(Layer& l, const LayerGrad& g, LayerGrad& m,
                       LayerGrad& v, const AdamConfig& cfg, double bc1,
                       double bc2) {
  adam_tensor(l.w, g.w, m.w, v.w, cfg, bc1, bc2);
  adam_tensor(l.b, g.b, m.b, v.b, cfg, bc1, bc2);
}

}  // namespace detail

inline void adam_step(PolicyParams& p, const PolicyGrads& g, AdamState& st,
                      const AdamConfig& cfg) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  detail::adam_layer(p.a1, g.a1, st.m.a1, st.v.a1, cfg, bc1, bc2);
  detail::adam_layer(p.a2, g.a2, st.m.a2, st.v.a2, cfg, bc1, bc2);
  detail::adam_layer(p.a3, g.a3, st.m.a3, st.v.a3, cfg, bc1, bc2);
  detail::adam_layer(p.c1, g.c1, st.m.c1, st.v.c1, cfg, bc1, bc2);
  detail::adam_layer(p.c2, g.c2, st.m.c2, st.v.c2, cfg, bc1, bc2);
  detail::adam_layer(p.c3, g.c3, st.m.c3, st.v.c3, cfg, bc1, bc2);
  detail::adam_tensor(p.log_std, g.log_std, st.m.log_std, st.v.log_std, cfg,
                      bc1, bc2);
  p.clamp_log_std();
}

// ---------------------------------------------------------------------------
// Checkpoint container (versioned JSON)

namespace detail {

inline nlohmann::json matrix_to_json(const MatX& m) {
  std::vector<double> data(m.size());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      data[static_cast<std::size_t>(r) * m.cols() + c] = m(r, c);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline MatX matrix_from_json(const nlohmann::json& j) {
  const int rows = j.at("rows"), cols = j.at("cols");
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<int>(data.size()) != rows * cols)
    throw std::runtime_error("checkpoint matrix size mismatch");
  MatX m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = data[static_cast<std::size_t>(r) * cols + c];
  return m;
}

inline nlohmann::json layer_to_json(const Layer& l) {
  return {{"w", matrix_to_json(l.w)},
          {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}};
}

inline Layer layer_from_json(const nlohmann::json& j) {
  Layer l;
  l.w = matrix_from_json(j.at("w"));
  const auto b = j.at("b").get<std::vector<double>>();
  l.b = Eigen::Map<const VecX>(b.data(), static_cast<int>(b.size()));
  return l;
}

inline nlohmann::json grads_to_json(const PolicyGrads& g);
inline PolicyGrads grads_from_json(const nlohmann::json& j);

inline nlohmann::json grads_to_json(const PolicyGrads& g) {
  return {{"a1w", matrix_to_json(g.a1.w)},
          {"a1b", std::vector<double>(g.a1.b.data(), g.a1.b.data() + g.a1.b.size())},
          {"a2w", matrix_to_json(g.a2.w)},
          {"a2b", std::vector<double>(g.a2.b.data(), g.a2.b.data() + g.a2.b.size())},
          {"a3w", matrix_to_json(g.a3.w)},
          {"a3b", std::vector<double>(g.a3.b.data(), g.a3.b.data() + g.a3.b.size())},
          {"c1w", matrix_to_json(g.c1.w)},
          {"c1b", std::vector<double>(g.c1.b.data(), g.c1.b.data() + g.c1.b.size())},
          {"c2w", matrix_to_json(g.c2.w)},
          {"c2b", std::vector<double>(g.c2.b.data(), g.c2.b.data() + g.c2.b.size())},
          {"c3w", matrix_to_json(g.c3.w)},
          {"c3b", std::vector<double>(g.c3.b.data(), g.c3.b.data() + g.c3.b.size())},
          {"log_std", std::vector<double>(g.log_std.data(),
                                          g.log_std.data() + g.log_std.size())}};
}

inline VecX vecx_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VecX>(v.data(), static_cast<int>(v.size()));
}

inline PolicyGrads grads_from_json(const nlohmann::json& j) {
  PolicyGrads g;
  g.a1.w = matrix_from_json(j.at("a1w"));
  g.a1.b = vecx_from_json(j.at("a1b"));
  g.a2.w = matrix_from_json(j.at("a2w"));
  g.a2.b = vecx_from_json(j.at("a2b"));
  g.a3.w = matrix_from_json(j.at("a3w"));
  g.a3.b = vecx_from_json(j.at("a3b"));
  g.c1.w = matrix_from_json(j.at("c1w"));
  g.c1.b = vecx_from_json(j.at("c1b"));
  g.c2.w = matrix_from_json(j.at("c2w"));
  g.c2.b = vecx_from_json(j.at("c2b"));
  g.c3.w = matrix_from_json(j.at("c3w"));
  g.c3.b = vecx_from_json(j.at("c3b"));
  g.log_std = vecx_from_json(j.at("log_std"));
  return g;
}

}  // namespace detail

struct Checkpoint {
  PolicyParams params;
  std::optional<AdamState> adam;
  nlohmann::json meta;  // task/robot echo for compatibility checks
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = "cml-policy";
  j["version"] = 1;
  j["obs_dim"] = ck.params.obs_dim();
  j["act_dim"] = kActionDim;
  j["hidden"] = ck.params.hidden_dim();
  j["actor"] = {detail::layer_to_json(ck.params.a1),
                detail::layer_to_json(ck.params.a2),
                detail::layer_to_json(ck.params.a3)};
  j["critic"] = {detail::layer_to_json(ck.params.c1),
                 detail::layer_to_json(ck.params.c2),
                 detail::layer_to_json(ck.params.c3)};
  j["log_std"] = std::vector<double>(
      ck.params.log_std.data(),
      ck.params.log_std.data() + ck.params.log_std.size());
  if (ck.adam) {
    j["adam"] = {{"t", ck.adam->t},
                 {"m", detail::grads_to_json(ck.adam->m)},
                 {"v", detail::grads_to_json(ck.adam->v)}};
  }
  j["meta"] = ck.meta;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.at("format") != "cml-policy")
    throw std::runtime_error("not a policy checkpoint");
  if (j.at("version") != 1)
    throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ck;
  ck.params.a1 = detail::layer_from_json(j.at("actor")[0]);
  ck.params.a2 = detail::layer_from_json(j.at("actor")[1]);
  ck.params.a3 = detail::layer_from_json(j.at("actor")[2]);
  ck.params.c1 = detail::layer_from_json(j.at("critic")[0]);
  ck.params.c2 = detail::layer_from_json(j.at("critic")[1]);
  ck.params.c3 = detail::layer_from_json(j.at("critic")[2]);
  ck.params.log_std = detail::vecx_from_json(j.at("log_std"));
  if (j.contains("adam")) {
    AdamState st;
    st.t = j["adam"].at("t");
    st.m = detail::grads_from_json(j["adam"].at("m"));
    st.v = detail::grads_from_json(j["adam"].at("v"));
    ck.adam = std::move(st);
  }
  if (j.contains("meta")) ck.meta = j.at("meta");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(ck).dump();
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace cml
