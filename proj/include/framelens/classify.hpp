#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "framelens/matrix.hpp"
#include "framelens/schema.hpp"
#include "framelens/score_matrix.hpp"
#include "framelens/transformer.hpp"
#include "json.hpp"

namespace framelens {

enum class ClassifierKind { Random, NgramLogreg, Transformer };

std::string_view kind_name(ClassifierKind k);
/// "random", "ngram_logreg" or "transformer"; throws ConfigurationError otherwise.
ClassifierKind parse_kind(std::string_view name);

struct TransformerOptions {
  bool domain_adapted = false;
  int max_epochs = 60;
  int patience = 10;
  double learning_rate = 5e-3;
  int batch_size = 16;
  int max_sequence_length = 128;
  std::string encoder = "init:0";  // weights file or init:<seed>
  int adaptation_epochs = 60;
  std::size_t max_vocab = 20000;
  nn::EncoderConfig encoder_config{};
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::NgramLogreg;
  Typology typology = Typology::IssueGenericPolicy;
  /// Train one model over all 27 frames instead of a single typology.
  bool joint = false;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double l2 = 1.0;             // ngram: penalty on weights (intercept unpenalized)
  std::size_t min_count = 1;   // ngram: minimum feature count in training
  TransformerOptions transformer{};

  nlohmann::ordered_json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);
};

/// Frame ids in label-column order for the spec (one typology or all 27).
std::vector<std::string> label_frames(const ClassifierSpec& spec);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_macro_f1 = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
  bool stopped_on_loss = false;
  std::vector<std::string> constant_frames;  // single-class training data
  std::vector<std::string> warnings;
  /// SHA-256 of the binary predictions on the training texts.
  std::string train_prediction_hash;

  std::string to_csv() const;
};

struct NgramModel {
  std::vector<std::string> features;  // sorted unigram / "a b" bigram keys
  std::vector<std::vector<double>> weights;  // per label, one weight per feature
  std::vector<double> bias;
  std::vector<std::uint8_t> constant;  // 1 when the label had a single class in training
};

struct ModelArtifact {
  ClassifierSpec spec;
  std::vector<std::string> frame_ids;
  std::vector<double> prevalence;            // random
  NgramModel ngram;                          // ngram_logreg
  std::shared_ptr<nn::TransformerModel> net; // transformer
  TrainingReport report;

  void save(const std::filesystem::path& dir) const;
  static ModelArtifact load(const std::filesystem::path& dir);
};

/// Training inputs: texts with an aligned label matrix (columns per label_frames).
struct LabeledTexts {
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  BinaryMatrix labels;
};

ModelArtifact train_random_baseline(const BinaryMatrix& train_labels, const ClassifierSpec& spec);
ModelArtifact train_ngram_logreg(const LabeledTexts& train, const ClassifierSpec& spec);
/// Fine-tunes the resolved encoder with a sigmoid head, early stopping on dev
/// macro-F1 (dev loss when dev has no positive for any label), and returns
/// the best-dev checkpoint.
ModelArtifact train_transformer(const LabeledTexts& train, const LabeledTexts& dev, const ClassifierSpec& spec,
                                const nn::TransformerModel& encoder);

/// Dispatch on spec.kind. Transformer training resolves spec.transformer.encoder
/// (and runs domain adaptation over `adaptation_texts` when requested).
ModelArtifact train_model(const LabeledTexts& train, const LabeledTexts& dev, const ClassifierSpec& spec,
                          const std::vector<std::string>& adaptation_texts = {});

/// Scores in [0,1]; labels are `score >= threshold`, except for the random
/// baseline whose labels are seeded Bernoulli draws at the stored prevalence.
ScoreMatrix predict(const ModelArtifact& model, const std::vector<std::string>& texts,
                    std::vector<std::string> row_ids = {});
/// Joint models: one score matrix per typology.
std::map<Typology, ScoreMatrix> predict_by_typology(const ModelArtifact& model, const std::vector<std::string>& texts,
                                                    std::vector<std::string> row_ids = {});

/// Highest dev macro-F1; ties go to the lowest seed. Returns the index into `artifacts`.
std::size_t select_best_seed(const std::vector<ModelArtifact>& artifacts, const LabeledTexts& dev);

/// Unigram + bigram counts over normalized tokens.
std::map<std::string, double> ngram_features(const std::string& text);

}  // namespace framelens
