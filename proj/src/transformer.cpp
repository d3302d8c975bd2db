#include "framelens/transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "framelens/text.hpp"

namespace framelens::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr char kMagic[] = "FLW1";

MatrixXd layer_norm(const MatrixXd& x, const MatrixXd& gamma, const MatrixXd& beta, auto& cache) {
  const auto d = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / d;
    const double var = (x.row(r).array() - mean).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_std[r] = inv;
    cache.xhat.row(r) = (x.row(r).array() - mean) * inv;
    y.row(r) = cache.xhat.row(r).array() * gamma.row(0).array() + beta.row(0).array();
  }
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const auto& cache, const MatrixXd& gamma, MatrixXd& dgamma,
                             MatrixXd& dbeta, double weight) {
  dgamma.row(0) += weight * (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += weight * dy.colwise().sum();
  MatrixXd dx(dy.rows(), dy.cols());
  const auto d = static_cast<double>(dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Eigen::RowVectorXd dxhat = dy.row(r).array() * gamma.row(0).array();
    const double mean_dxhat = dxhat.sum() / d;
    const double mean_dxhat_xhat = (dxhat.array() * cache.xhat.row(r).array()).sum() / d;
    dx.row(r) = cache.inv_std[r] * (dxhat.array() - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat);
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

void softmax_rows(MatrixXd& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

nlohmann::ordered_json EncoderConfig::to_json() const {
  return {{"d_model", d_model}, {"heads", heads}, {"ff", ff}, {"layers", layers}, {"max_len", max_len}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.ff = j.value("ff", c.ff);
  c.layers = j.value("layers", c.layers);
  c.max_len = j.value("max_len", c.max_len);
  if (c.d_model <= 0 || c.heads <= 0 || c.d_model % c.heads != 0 || c.ff <= 0 || c.layers <= 0 || c.max_len < 2) {
    throw ConfigurationError("invalid encoder dimensions");
  }
  return c;
}

Vocabulary::Vocabulary() { assign({}); }

void Vocabulary::assign(std::vector<std::string> tokens) {
  static const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[MASK]"};
  tokens_ = kSpecials;
  for (auto& t : tokens) {
    if (std::find(kSpecials.begin(), kSpecials.end(), t) == kSpecials.end()) tokens_.push_back(std::move(t));
  }
  index_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.assign(std::move(tokens));
  return v;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs, std::size_t max_size,
                             std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : docs) {
    for (const auto& t : doc) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> items;
  for (auto& [t, c] : counts) {
    if (c >= min_count) items.emplace_back(t, c);
  }
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [t, c] : items) {
    if (tokens.size() + kSpecial >= max_size) break;
    tokens.push_back(t);
  }
  return from_tokens(std::move(tokens));
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens, std::size_t max_len) const {
  std::vector<int> ids{kCls};
  for (const auto& t : tokens) {
    if (ids.size() >= max_len) break;
    ids.push_back(id(t));
  }
  return ids;
}

TransformerModel::TransformerModel(EncoderConfig config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  Rng rng(seed);
  const int d = config_.d_model;
  add_param("tok_emb", vocab_.size(), d, &rng);
  add_param("pos_emb", config_.max_len, d, &rng);
  add_param("emb_ln.g", 1, d, nullptr, 1.0);
  add_param("emb_ln.b", 1, d, nullptr);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      add_param(p + w, d, d, &rng);
      add_param(p + "b" + std::string(w + 1), 1, d, nullptr);
    }
    add_param(p + "ln1.g", 1, d, nullptr, 1.0);
    add_param(p + "ln1.b", 1, d, nullptr);
    add_param(p + "w1", d, config_.ff, &rng);
    add_param(p + "b1", 1, config_.ff, nullptr);
    add_param(p + "w2", config_.ff, d, &rng);
    add_param(p + "b2", 1, d, nullptr);
    add_param(p + "ln2.g", 1, d, nullptr, 1.0);
    add_param(p + "ln2.b", 1, d, nullptr);
  }
  add_param("mlm.w", d, vocab_.size(), &rng);
  add_param("mlm.b", 1, vocab_.size(), nullptr);
  bind_indices();
}

std::size_t TransformerModel::add_param(const std::string& name, int rows, int cols, Rng* rng, double fill) {
  Param p;
  p.name = name;
  p.value = MatrixXd::Constant(rows, cols, fill);
  if (rng) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng->normal(0.0, 0.02);
  }
  p.grad = MatrixXd::Zero(rows, cols);
  p.m = MatrixXd::Zero(rows, cols);
  p.v = MatrixXd::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t TransformerModel::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ConfigurationError("weights file lacks parameter " + name);
}

void TransformerModel::bind_indices() {
  tok_emb_ = index_of("tok_emb");
  pos_emb_ = index_of("pos_emb");
  emb_lng_ = index_of("emb_ln.g");
  emb_lnb_ = index_of("emb_ln.b");
  mlm_w_ = index_of("mlm.w");
  mlm_b_ = index_of("mlm.b");
  layer_idx_.clear();
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    layer_idx_.push_back({index_of(p + "wq"), index_of(p + "bq"), index_of(p + "wk"), index_of(p + "bk"),
                          index_of(p + "wv"), index_of(p + "bv"), index_of(p + "wo"), index_of(p + "bo"),
                          index_of(p + "ln1.g"), index_of(p + "ln1.b"), index_of(p + "w1"), index_of(p + "b1"),
                          index_of(p + "w2"), index_of(p + "b2"), index_of(p + "ln2.g"), index_of(p + "ln2.b")});
  }
  n_labels_ = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == "cls.wc") n_labels_ = static_cast<int>(params_[i].value.cols());
  }
  if (n_labels_ > 0) {
    cls_wp_ = index_of("cls.wp");
    cls_bp_ = index_of("cls.bp");
    cls_wc_ = index_of("cls.wc");
    cls_bc_ = index_of("cls.bc");
  }
}

void TransformerModel::add_classifier_head(int n_labels, std::uint64_t seed) {
  drop_classifier_head();
  Rng rng(seed);
  const int d = config_.d_model;
  add_param("cls.wp", d, d, &rng);
  add_param("cls.bp", 1, d, nullptr);
  add_param("cls.wc", d, n_labels, &rng);
  add_param("cls.bc", 1, n_labels, nullptr);
  bind_indices();
}

void TransformerModel::drop_classifier_head() {
  std::erase_if(params_, [](const Param& p) { return p.name.starts_with("cls."); });
  bind_indices();
}

std::vector<int> TransformerModel::encode_text(std::string_view text) const {
  return encode_text(text, static_cast<std::size_t>(config_.max_len));
}

std::vector<int> TransformerModel::encode_text(std::string_view text, std::size_t max_len) const {
  return vocab_.encode(text::normalize_text(text), std::min(max_len, static_cast<std::size_t>(config_.max_len)));
}

MatrixXd TransformerModel::forward(const std::vector<int>& ids, Cache& cache) const {
  const auto T = static_cast<Eigen::Index>(ids.size());
  const int d = config_.d_model;
  const int dh = d / config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.ids = ids;

  MatrixXd x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    x.row(t) = params_[tok_emb_].value.row(ids[t]) + params_[pos_emb_].value.row(t);
  }
  x = layer_norm(x, params_[emb_lng_].value, params_[emb_lnb_].value, cache.emb_ln);

  cache.layers.resize(layer_idx_.size());
  for (std::size_t l = 0; l < layer_idx_.size(); ++l) {
    const auto& I = layer_idx_[l];
    auto& c = cache.layers[l];
    c.x_in = x;
    c.q = (x * params_[I.wq].value).rowwise() + params_[I.bq].value.row(0);
    c.k = (x * params_[I.wk].value).rowwise() + params_[I.bk].value.row(0);
    c.v = (x * params_[I.wv].value).rowwise() + params_[I.bv].value.row(0);
    c.o.resize(T, d);
    c.attn.resize(static_cast<std::size_t>(config_.heads));
    for (int h = 0; h < config_.heads; ++h) {
      MatrixXd s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(s);
      c.o.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
      c.attn[static_cast<std::size_t>(h)] = std::move(s);
    }
    MatrixXd attn_out = (c.o * params_[I.wo].value).rowwise() + params_[I.bo].value.row(0);
    c.x1 = layer_norm(x + attn_out, params_[I.ln1g].value, params_[I.ln1b].value, c.ln1);
    c.h_pre = (c.x1 * params_[I.w1].value).rowwise() + params_[I.b1].value.row(0);
    c.h = c.h_pre.unaryExpr([](double v) { return gelu(v); });
    MatrixXd f = (c.h * params_[I.w2].value).rowwise() + params_[I.b2].value.row(0);
    x = layer_norm(c.x1 + f, params_[I.ln2g].value, params_[I.ln2b].value, c.ln2);
  }
  cache.out = x;
  return x;
}

void TransformerModel::backward(const MatrixXd& d_out, const Cache& cache, double weight) {
  const int d = config_.d_model;
  const int dh = d / config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  // `dx` carries the unweighted gradient; parameter grads are scaled by `weight`.
  MatrixXd dx = d_out;
  for (std::size_t l = layer_idx_.size(); l-- > 0;) {
    const auto& I = layer_idx_[l];
    const auto& c = cache.layers[l];
    MatrixXd d_sum2 = layer_norm_backward(dx, c.ln2, params_[I.ln2g].value, params_[I.ln2g].grad,
                                          params_[I.ln2b].grad, weight);
    // x = LN(x1 + f)
    MatrixXd d_x1 = d_sum2;
    const MatrixXd& d_f = d_sum2;
    params_[I.w2].grad.noalias() += weight * c.h.transpose() * d_f;
    params_[I.b2].grad.row(0) += weight * d_f.colwise().sum();
    MatrixXd d_h = d_f * params_[I.w2].value.transpose();
    MatrixXd d_hpre = d_h.array() * c.h_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    params_[I.w1].grad.noalias() += weight * c.x1.transpose() * d_hpre;
    params_[I.b1].grad.row(0) += weight * d_hpre.colwise().sum();
    d_x1.noalias() += d_hpre * params_[I.w1].value.transpose();

    MatrixXd d_sum1 = layer_norm_backward(d_x1, c.ln1, params_[I.ln1g].value, params_[I.ln1g].grad,
                                          params_[I.ln1b].grad, weight);
    // x1 = LN(x_in + attn_out)
    MatrixXd d_xin = d_sum1;
    const MatrixXd& d_attn = d_sum1;
    params_[I.wo].grad.noalias() += weight * c.o.transpose() * d_attn;
    params_[I.bo].grad.row(0) += weight * d_attn.colwise().sum();
    MatrixXd d_o = d_attn * params_[I.wo].value.transpose();
    MatrixXd d_q(d_o.rows(), d), d_k(d_o.rows(), d), d_v(d_o.rows(), d);
    for (int h = 0; h < config_.heads; ++h) {
      const MatrixXd& a = c.attn[static_cast<std::size_t>(h)];
      const auto d_oh = d_o.middleCols(h * dh, dh);
      d_v.middleCols(h * dh, dh) = a.transpose() * d_oh;
      MatrixXd d_a = d_oh * c.v.middleCols(h * dh, dh).transpose();
      const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
      MatrixXd d_s = (a.array() * (d_a.array().colwise() - row_dot.array())).matrix() * scale;
      d_q.middleCols(h * dh, dh) = d_s * c.k.middleCols(h * dh, dh);
      d_k.middleCols(h * dh, dh) = d_s.transpose() * c.q.middleCols(h * dh, dh);
    }
    for (auto [w, b, g] : {std::tuple{I.wq, I.bq, &d_q}, std::tuple{I.wk, I.bk, &d_k}, std::tuple{I.wv, I.bv, &d_v}}) {
      params_[w].grad.noalias() += weight * c.x_in.transpose() * (*g);
      params_[b].grad.row(0) += weight * g->colwise().sum();
      d_xin.noalias() += (*g) * params_[w].value.transpose();
    }
    dx = std::move(d_xin);
  }
  MatrixXd d_emb = layer_norm_backward(dx, cache.emb_ln, params_[emb_lng_].value, params_[emb_lng_].grad,
                                       params_[emb_lnb_].grad, weight);
  for (std::size_t t = 0; t < cache.ids.size(); ++t) {
    params_[tok_emb_].grad.row(cache.ids[t]) += weight * d_emb.row(static_cast<Eigen::Index>(t));
    params_[pos_emb_].grad.row(static_cast<Eigen::Index>(t)) += weight * d_emb.row(static_cast<Eigen::Index>(t));
  }
}

VectorXd TransformerModel::predict_scores(const std::vector<int>& ids) const {
  if (n_labels_ == 0) throw ConfigurationError("model has no classifier head");
  Cache cache;
  const MatrixXd out = forward(ids, cache);
  const Eigen::RowVectorXd pooled =
      ((out.row(0) * params_[cls_wp_].value) + params_[cls_bp_].value.row(0)).array().tanh().matrix();
  const Eigen::RowVectorXd logits = pooled * params_[cls_wc_].value + params_[cls_bc_].value.row(0);
  VectorXd scores(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) scores[i] = sigmoid(logits[i]);
  return scores;
}

double TransformerModel::classification_step(const std::vector<int>& ids, const std::vector<std::uint8_t>& labels,
                                             double weight, bool accumulate) {
  if (n_labels_ == 0) throw ConfigurationError("model has no classifier head");
  if (static_cast<int>(labels.size()) != n_labels_) throw ValidationError("label count does not match head");
  Cache cache;
  const MatrixXd out = forward(ids, cache);
  const Eigen::RowVectorXd cls = out.row(0);
  const Eigen::RowVectorXd pooled =
      ((cls * params_[cls_wp_].value) + params_[cls_bp_].value.row(0)).array().tanh().matrix();
  const Eigen::RowVectorXd logits = pooled * params_[cls_wc_].value + params_[cls_bc_].value.row(0);
  double loss = 0.0;
  Eigen::RowVectorXd d_logits(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    loss += softplus(logits[i]) - y * logits[i];
    d_logits[i] = sigmoid(logits[i]) - y;
  }
  if (!accumulate) return loss;

  params_[cls_wc_].grad.noalias() += weight * pooled.transpose() * d_logits;
  params_[cls_bc_].grad.row(0) += weight * d_logits;
  const Eigen::RowVectorXd d_pooled = d_logits * params_[cls_wc_].value.transpose();
  const Eigen::RowVectorXd d_pre = d_pooled.array() * (1.0 - pooled.array().square());
  params_[cls_wp_].grad.noalias() += weight * cls.transpose() * d_pre;
  params_[cls_bp_].grad.row(0) += weight * d_pre;
  MatrixXd d_out = MatrixXd::Zero(out.rows(), out.cols());
  d_out.row(0) = d_pre * params_[cls_wp_].value.transpose();
  backward(d_out, cache, weight);
  return loss;
}

std::pair<std::vector<int>, std::vector<std::size_t>> TransformerModel::mask_tokens(const std::vector<int>& ids,
                                                                                  Rng& rng,
                                                                                  double mask_probability) const {
  std::vector<int> input = ids;
  std::vector<std::size_t> positions;
  for (std::size_t t = 1; t < ids.size(); ++t) {
    if (rng.uniform() < mask_probability) positions.push_back(t);
  }
  if (positions.empty() && ids.size() > 1) positions.push_back(1 + rng.below(ids.size() - 1));
  const int regular = vocab_.size() - Vocabulary::kSpecial;
  for (auto t : positions) {
    const double u = rng.uniform();
    if (u < 0.8) {
      input[t] = Vocabulary::kMask;
    } else if (u < 0.9 && regular > 0) {
      input[t] = Vocabulary::kSpecial + static_cast<int>(rng.below(static_cast<std::uint64_t>(regular)));
    }
  }
  return {std::move(input), std::move(positions)};
}

double TransformerModel::mlm_eval(const std::vector<int>& ids, Rng& rng, double mask_probability,
                                  std::size_t* masked) const {
  const auto [input, positions] = mask_tokens(ids, rng, mask_probability);
  if (masked) *masked = positions.size();
  if (positions.empty()) return 0.0;
  Cache cache;
  const MatrixXd out = forward(input, cache);
  double loss = 0.0;
  for (auto t : positions) {
    const Eigen::RowVectorXd logits =
        out.row(static_cast<Eigen::Index>(t)) * params_[mlm_w_].value + params_[mlm_b_].value.row(0);
    const double mx = logits.maxCoeff();
    loss -= logits[ids[t]] - mx - std::log((logits.array() - mx).exp().sum());
  }
  return loss / static_cast<double>(positions.size());
}

double TransformerModel::mlm_step(const std::vector<int>& ids, Rng& rng, double mask_probability, double weight,
                                  std::size_t* masked) {
  const auto [input, positions] = mask_tokens(ids, rng, mask_probability);
  if (masked) *masked = positions.size();
  if (positions.empty()) return 0.0;

  Cache cache;
  const MatrixXd out = forward(input, cache);
  const double inv = 1.0 / static_cast<double>(positions.size());
  MatrixXd d_out = MatrixXd::Zero(out.rows(), out.cols());
  double loss = 0.0;
  for (auto t : positions) {
    const auto row = static_cast<Eigen::Index>(t);
    const Eigen::RowVectorXd logits = out.row(row) * params_[mlm_w_].value + params_[mlm_b_].value.row(0);
    const double mx = logits.maxCoeff();
    Eigen::RowVectorXd p = (logits.array() - mx).exp();
    const double z = p.sum();
    loss -= (logits[ids[t]] - mx - std::log(z)) * inv;
    p /= z;
    p[ids[t]] -= 1.0;
    p *= inv;
    params_[mlm_w_].grad.noalias() += weight * out.row(row).transpose() * p;
    params_[mlm_b_].grad.row(0) += weight * p;
    d_out.row(row) += p * params_[mlm_w_].value.transpose();
  }
  backward(d_out, cache, weight);
  return loss;
}

void TransformerModel::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void TransformerModel::adam_step(const AdamOptions& o) {
  double norm2 = 0.0;
  for (const auto& p : params_) norm2 += p.grad.squaredNorm();
  const double norm = std::sqrt(norm2);
  const double clip = (o.clip_norm > 0.0 && norm > o.clip_norm) ? o.clip_norm / norm : 1.0;
  ++adam_steps_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(adam_steps_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(adam_steps_));
  for (auto& p : params_) {
    p.m = o.beta1 * p.m + (1.0 - o.beta1) * clip * p.grad;
    p.v = o.beta2 * p.v + (1.0 - o.beta2) * (clip * p.grad).array().square().matrix();
    p.value.array() -= o.learning_rate * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + o.epsilon);
  }
}

std::vector<MatrixXd> TransformerModel::snapshot() const {
  std::vector<MatrixXd> out;
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void TransformerModel::restore(const std::vector<MatrixXd>& values) {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = values[i];
}

bool TransformerModel::same_weights(const TransformerModel& other) const {
  if (!(config_ == other.config_) || adapted_epochs_ != other.adapted_epochs_ || vocab_.tokens() != other.vocab_.tokens() ||
      params_.size() != other.params_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].value != other.params_[i].value) return false;
  }
  return true;
}

void TransformerModel::save(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little, "weights format is little-endian");
  nlohmann::ordered_json header;
  header["format"] = "framelens-weights";
  header["version"] = 1;
  header["config"] = config_.to_json();
  header["adapted_epochs"] = adapted_epochs_;
  header["vocab"] = vocab_.tokens();
  auto& plist = header["params"] = nlohmann::ordered_json::array();
  for (const auto& p : params_) plist.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  const std::string h = header.dump();
  std::string blob(kMagic, 4);
  const std::uint64_t len = h.size();
  blob.append(reinterpret_cast<const char*>(&len), sizeof len);
  blob += h;
  for (const auto& p : params_) {
    // Column-major raw doubles.
    blob.append(reinterpret_cast<const char*>(p.value.data()), static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  io::write_file_atomic(path, blob);
}

TransformerModel TransformerModel::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigurationError("encoder reference not found: " + path.string());
  const std::string blob = io::read_file(path);
  if (blob.size() < 12 || blob.compare(0, 4, kMagic) != 0) {
    throw ConfigurationError(path.string() + " is not a framelens weights file");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + 4, sizeof len);
  if (12 + len > blob.size()) throw ConfigurationError(path.string() + ": truncated header");
  const auto header = nlohmann::json::parse(blob.substr(12, len));
  TransformerModel m;
  m.config_ = EncoderConfig::from_json(header.at("config"));
  m.adapted_epochs_ = header.value("adapted_epochs", 0);
  m.vocab_ = Vocabulary::from_tokens(
      std::vector<std::string>(header.at("vocab").begin() + Vocabulary::kSpecial, header.at("vocab").end()));
  std::size_t offset = 12 + len;
  for (const auto& pj : header.at("params")) {
    const auto rows = pj.at("rows").get<int>();
    const auto cols = pj.at("cols").get<int>();
    const std::size_t bytes = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
    if (offset + bytes > blob.size()) throw ConfigurationError(path.string() + ": truncated weights");
    const std::size_t idx = m.add_param(pj.at("name").get<std::string>(), rows, cols, nullptr);
    std::memcpy(m.params_[idx].value.data(), blob.data() + offset, bytes);
    offset += bytes;
  }
  m.bind_indices();
  return m;
}

AdaptResult domain_adapt(const TransformerModel& base, const std::vector<std::string>& texts,
                         const AdaptOptions& options) {
  if (texts.empty()) throw ConfigurationError("domain adaptation needs a nonempty corpus");
  AdaptResult out{base, {}};
  if (options.epochs <= 0) return out;
  auto& model = out.model;
  std::vector<std::vector<int>> encoded;
  encoded.reserve(texts.size());
  for (const auto& t : texts) encoded.push_back(model.encode_text(t));

  Rng rng(options.seed);
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      model.zero_grad();
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        std::size_t masked = 0;
        const double loss = model.mlm_step(encoded[order[i]], rng, options.mask_probability, w, &masked);
        if (masked) {
          total += loss;
          ++count;
        }
      }
      model.adam_step(options.adam);
    }
    out.epoch_losses.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  model.set_adapted_epochs(base.adapted_epochs() + options.epochs);
  return out;
}

double heldout_mlm_loss(const TransformerModel& model, const std::vector<std::string>& texts, std::uint64_t seed,
                        double mask_probability) {
  Rng rng(seed);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : texts) {
    std::size_t masked = 0;
    const double loss = model.mlm_eval(model.encode_text(t), rng, mask_probability, &masked);
    if (masked) {
      total += loss;
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

TransformerModel resolve_encoder(const std::string& reference, const EncoderConfig& config,
                                 const std::vector<std::string>& vocab_texts, std::size_t max_vocab) {
  if (reference.starts_with("init:")) {
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(reference.substr(5));
    } catch (const std::exception&) {
      throw ConfigurationError("bad encoder reference '" + reference + "' (expected init:<seed>)");
    }
    std::vector<std::vector<std::string>> docs;
    docs.reserve(vocab_texts.size());
    for (const auto& t : vocab_texts) docs.push_back(text::normalize_text(t));
    return TransformerModel(config, Vocabulary::build(docs, max_vocab), seed);
  }
  return TransformerModel::load(reference);
}

}  // namespace framelens::nn
