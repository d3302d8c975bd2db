#pragma once

// A miniature post-LayerNorm transformer encoder with hand-written
// backpropagation: token + position embeddings, multi-head self-attention
// and GELU feed-forward blocks. Two heads sit on top of it: a masked-token
// prediction head used for in-domain adaptation, and a sigmoid multilabel
// head over the first ([CLS]) position used for frame detection.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "framelens/rng.hpp"
#include "json.hpp"

namespace framelens::nn {

struct EncoderConfig {
  int d_model = 32;
  int heads = 2;
  int ff = 64;
  int layers = 2;
  int max_len = 128;

  nlohmann::ordered_json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kMask = 3;
  static constexpr int kSpecial = 4;

  Vocabulary();
  /// Most frequent tokens first (ties alphabetical), capped at `max_size` including specials.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs, std::size_t max_size,
                          std::size_t min_count = 1);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// [CLS] followed by token ids, truncated to `max_len` positions in total.
  std::vector<int> encode(const std::vector<std::string>& tokens, std::size_t max_len) const;

 private:
  void assign(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

struct AdamOptions {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;
};

class TransformerModel {
 public:
  TransformerModel() = default;
  /// Fresh encoder (and masked-token head) with N(0, 0.02) weights.
  TransformerModel(EncoderConfig config, Vocabulary vocab, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  int n_labels() const { return n_labels_; }
  /// Masked-token epochs this encoder has been trained for.
  int adapted_epochs() const { return adapted_epochs_; }
  void set_adapted_epochs(int epochs) { adapted_epochs_ = epochs; }

  /// Adds (or replaces) a multilabel head with `n_labels` outputs.
  void add_classifier_head(int n_labels, std::uint64_t seed);
  /// Drops the classifier head, keeping encoder and masked-token head.
  void drop_classifier_head();

  std::vector<int> encode_text(std::string_view text) const;
  /// Truncated to min(max_len, config max_len).
  std::vector<int> encode_text(std::string_view text, std::size_t max_len) const;

  // Classification: per-label sigmoid scores.
  Eigen::VectorXd predict_scores(const std::vector<int>& ids) const;
  /// Sum of per-label binary cross-entropy; accumulates `weight` x gradient when `accumulate`.
  double classification_step(const std::vector<int>& ids, const std::vector<std::uint8_t>& labels, double weight,
                             bool accumulate);

  /// Masked-token cross-entropy (mean over masked positions) with gradient
  /// accumulation. Reports the number of masked positions through `masked`.
  double mlm_step(const std::vector<int>& ids, Rng& rng, double mask_probability, double weight,
                  std::size_t* masked = nullptr);
  /// Same loss without touching gradients.
  double mlm_eval(const std::vector<int>& ids, Rng& rng, double mask_probability,
                  std::size_t* masked = nullptr) const;

  void zero_grad();
  void adam_step(const AdamOptions& options);

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  /// Parameter values only, for checkpoints.
  std::vector<Eigen::MatrixXd> snapshot() const;
  void restore(const std::vector<Eigen::MatrixXd>& values);

  void save(const std::filesystem::path& path) const;
  static TransformerModel load(const std::filesystem::path& path);

  /// True when every parameter value and the vocabulary match.
  bool same_weights(const TransformerModel& other) const;

 private:
  struct LayerIdx {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1g, ln1b, w1, b1, w2, b2, ln2g, ln2b;
  };
  struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd inv_std;
  };
  struct LayerCache {
    Eigen::MatrixXd x_in, q, k, v, o, x1, h_pre, h;
    std::vector<Eigen::MatrixXd> attn;
    LnCache ln1, ln2;
  };
  struct Cache {
    std::vector<int> ids;
    LnCache emb_ln;
    std::vector<LayerCache> layers;
    Eigen::MatrixXd out;
  };

  std::pair<std::vector<int>, std::vector<std::size_t>> mask_tokens(const std::vector<int>& ids, Rng& rng,
                                                                   double mask_probability) const;
  std::size_t add_param(const std::string& name, int rows, int cols, Rng* rng, double fill = 0.0);
  std::size_t index_of(const std::string& name) const;
  void bind_indices();

  Eigen::MatrixXd forward(const std::vector<int>& ids, Cache& cache) const;
  void backward(const Eigen::MatrixXd& d_out, const Cache& cache, double weight);

  EncoderConfig config_;
  Vocabulary vocab_;
  std::vector<Param> params_;
  int n_labels_ = 0;
  int adapted_epochs_ = 0;
  std::int64_t adam_steps_ = 0;

  std::size_t tok_emb_ = 0, pos_emb_ = 0, emb_lng_ = 0, emb_lnb_ = 0, mlm_w_ = 0, mlm_b_ = 0;
  std::size_t cls_wp_ = 0, cls_bp_ = 0, cls_wc_ = 0, cls_bc_ = 0;
  std::vector<LayerIdx> layer_idx_;
};

struct AdaptOptions {
  int epochs = 60;
  std::uint64_t seed = 0;
  int batch_size = 32;
  double mask_probability = 0.15;
  AdamOptions adam{};
};

struct AdaptResult {
  TransformerModel model;
  std::vector<double> epoch_losses;
};

/// Continues masked-token training on `texts`. The input model is copied;
/// `epochs == 0` returns an unchanged copy.
AdaptResult domain_adapt(const TransformerModel& base, const std::vector<std::string>& texts,
                         const AdaptOptions& options);

/// Mean masked-token loss on `texts` with masking drawn from `seed`.
double heldout_mlm_loss(const TransformerModel& model, const std::vector<std::string>& texts, std::uint64_t seed,
                        double mask_probability = 0.15);

/// Resolves an encoder reference: a weights file path, or "init:<seed>" for
/// a fresh encoder whose vocabulary is built from `vocab_texts`.
TransformerModel resolve_encoder(const std::string& reference, const EncoderConfig& config,
                                 const std::vector<std::string>& vocab_texts, std::size_t max_vocab);

}  // namespace framelens::nn
