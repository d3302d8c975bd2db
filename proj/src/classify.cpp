#include "framelens/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "framelens/metrics.hpp"
#include "framelens/optim.hpp"
#include "framelens/rng.hpp"
#include "framelens/text.hpp"

namespace framelens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view kind_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Random:
      return "random";
    case ClassifierKind::NgramLogreg:
      return "ngram_logreg";
    case ClassifierKind::Transformer:
      return "transformer";
  }
  return "";
}

ClassifierKind parse_kind(std::string_view name) {
  if (name == "random") return ClassifierKind::Random;
  if (name == "ngram_logreg") return ClassifierKind::NgramLogreg;
  if (name == "transformer") return ClassifierKind::Transformer;
  throw ConfigurationError("unknown classifier kind '" + std::string(name) +
                           "' (expected random, ngram_logreg or transformer)");
}

ordered_json ClassifierSpec::to_json() const {
  ordered_json j;
  j["kind"] = kind_name(kind);
  j["typology"] = joint ? std::string("joint") : std::string(typology_slug(typology));
  j["seed"] = seed;
  j["threshold"] = threshold;
  j["l2"] = l2;
  j["min_count"] = min_count;
  if (kind == ClassifierKind::Transformer) {
    const auto& t = transformer;
    j["transformer"] = {{"domain_adapted", t.domain_adapted},
                        {"max_epochs", t.max_epochs},
                        {"patience", t.patience},
                        {"learning_rate", t.learning_rate},
                        {"batch_size", t.batch_size},
                        {"max_sequence_length", t.max_sequence_length},
                        {"encoder", t.encoder},
                        {"adaptation_epochs", t.adaptation_epochs},
                        {"max_vocab", t.max_vocab},
                        {"encoder_config", t.encoder_config.to_json()}};
  }
  return j;
}

ClassifierSpec ClassifierSpec::from_json(const json& j) {
  ClassifierSpec s;
  s.kind = parse_kind(j.at("kind").get<std::string>());
  const auto typ = j.at("typology").get<std::string>();
  s.joint = typ == "joint";
  if (!s.joint) s.typology = parse_typology(typ);
  s.seed = j.value("seed", std::uint64_t{0});
  s.threshold = j.value("threshold", 0.5);
  s.l2 = j.value("l2", 1.0);
  s.min_count = j.value("min_count", std::size_t{1});
  if (!(s.threshold > 0.0 && s.threshold < 1.0)) throw ConfigurationError("threshold must lie in (0, 1)");
  if (auto it = j.find("transformer"); it != j.end()) {
    auto& t = s.transformer;
    t.domain_adapted = it->value("domain_adapted", t.domain_adapted);
    t.max_epochs = it->value("max_epochs", t.max_epochs);
    t.patience = it->value("patience", t.patience);
    t.learning_rate = it->value("learning_rate", t.learning_rate);
    t.batch_size = it->value("batch_size", t.batch_size);
    t.max_sequence_length = it->value("max_sequence_length", t.max_sequence_length);
    t.encoder = it->value("encoder", t.encoder);
    t.adaptation_epochs = it->value("adaptation_epochs", t.adaptation_epochs);
    t.max_vocab = it->value("max_vocab", t.max_vocab);
    if (auto c = it->find("encoder_config"); c != it->end()) t.encoder_config = nn::EncoderConfig::from_json(*c);
  }
  return s;
}

std::vector<std::string> label_frames(const ClassifierSpec& spec) {
  const auto& schema = load_schema();
  if (!spec.joint) return schema.ids(spec.typology);
  std::vector<std::string> out;
  for (const auto& f : schema.all()) out.push_back(f.id);
  return out;
}

std::string TrainingReport::to_csv() const {
  std::string out = "epoch,train_loss,dev_loss,dev_macro_f1,best\n";
  for (const auto& e : epochs) {
    out += io::csv_row({std::to_string(e.epoch), io::fixed(e.train_loss, 6), io::fixed(e.dev_loss, 6),
                        io::fixed(e.dev_macro_f1, 6), e.epoch == best_epoch ? "1" : "0"});
  }
  return out;
}

namespace {

double macro_f1(const BinaryMatrix& pred, const BinaryMatrix& gold) {
  if (gold.cols == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t c = 0; c < gold.cols; ++c) sum += prf1(pred.column(c), gold.column(c)).f1;
  return sum / static_cast<double>(gold.cols);
}

std::string hash_labels(const BinaryMatrix& labels) {
  std::string bytes(labels.data.begin(), labels.data.end());
  bytes += ":" + std::to_string(labels.rows) + "x" + std::to_string(labels.cols);
  return io::sha256_hex(bytes);
}

void check_labels(const BinaryMatrix& labels, const ClassifierSpec& spec) {
  if (labels.cols != label_frames(spec).size()) {
    throw SchemaMismatchError("training labels have " + std::to_string(labels.cols) + " columns, expected " +
                              std::to_string(label_frames(spec).size()));
  }
}

// Row-compressed n-gram count matrix over a fixed feature index.
struct SparseRows {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> values;
  std::size_t rows() const { return offsets.size() - 1; }
};

SparseRows vectorize(const std::vector<std::string>& texts, const std::vector<std::string>& features) {
  SparseRows m;
  for (const auto& t : texts) {
    for (const auto& [key, count] : ngram_features(t)) {
      auto it = std::lower_bound(features.begin(), features.end(), key);
      if (it != features.end() && *it == key) {
        m.cols.push_back(static_cast<std::size_t>(it - features.begin()));
        m.values.push_back(count);
      }
    }
    m.offsets.push_back(m.cols.size());
  }
  return m;
}

RealMatrix ngram_scores(const NgramModel& model, const std::vector<std::string>& texts) {
  const SparseRows x = vectorize(texts, model.features);
  RealMatrix scores(x.rows(), model.bias.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t l = 0; l < model.bias.size(); ++l) {
      if (model.constant[l]) {
        scores(r, l) = model.bias[l] > 0 ? 1.0 : 0.0;
        continue;
      }
      double z = model.bias[l];
      for (std::size_t k = x.offsets[r]; k < x.offsets[r + 1]; ++k) z += model.weights[l][x.cols[k]] * x.values[k];
      scores(r, l) = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
  }
  return scores;
}

RealMatrix transformer_scores(const ModelArtifact& model, const std::vector<std::string>& texts) {
  RealMatrix scores(texts.size(), model.frame_ids.size());
  const auto max_len = static_cast<std::size_t>(model.spec.transformer.max_sequence_length);
  for (std::size_t r = 0; r < texts.size(); ++r) {
    const auto s = model.net->predict_scores(model.net->encode_text(texts[r], max_len));
    for (std::size_t c = 0; c < scores.cols; ++c) scores(r, c) = s[static_cast<Eigen::Index>(c)];
  }
  return scores;
}

// Scores plus labels for any label space (single typology or joint).
std::pair<RealMatrix, BinaryMatrix> score_and_label(const ModelArtifact& model, const std::vector<std::string>& texts) {
  RealMatrix scores;
  BinaryMatrix labels;
  switch (model.spec.kind) {
    case ClassifierKind::Random: {
      scores = RealMatrix(texts.size(), model.prevalence.size());
      labels = BinaryMatrix(texts.size(), model.prevalence.size());
      Rng rng(model.spec.seed);
      for (std::size_t r = 0; r < texts.size(); ++r) {
        for (std::size_t c = 0; c < model.prevalence.size(); ++c) {
          scores(r, c) = model.prevalence[c];
          labels(r, c) = rng.bernoulli(model.prevalence[c]);
        }
      }
      return {scores, labels};
    }
    case ClassifierKind::NgramLogreg:
      scores = ngram_scores(model.ngram, texts);
      break;
    case ClassifierKind::Transformer:
      scores = transformer_scores(model, texts);
      break;
  }
  labels = BinaryMatrix(scores.rows, scores.cols);
  for (std::size_t i = 0; i < scores.data.size(); ++i) labels.data[i] = scores.data[i] >= model.spec.threshold;
  return {scores, labels};
}

}  // namespace

std::map<std::string, double> ngram_features(const std::string& input) {
  const auto tokens = text::normalize_text(input);
  std::map<std::string, double> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    counts[tokens[i]] += 1.0;
    if (i + 1 < tokens.size()) counts[tokens[i] + " " + tokens[i + 1]] += 1.0;
  }
  return counts;
}

ModelArtifact train_random_baseline(const BinaryMatrix& train_labels, const ClassifierSpec& spec) {
  check_labels(train_labels, spec);
  if (train_labels.rows == 0) throw TrainingError("random baseline needs nonempty training labels");
  ModelArtifact a;
  a.spec = spec;
  a.spec.kind = ClassifierKind::Random;
  a.frame_ids = label_frames(spec);
  a.prevalence.assign(train_labels.cols, 0.0);
  for (std::size_t c = 0; c < train_labels.cols; ++c) {
    const auto col = train_labels.column(c);
    a.prevalence[c] = static_cast<double>(std::count(col.begin(), col.end(), 1)) / static_cast<double>(train_labels.rows);
    if (a.prevalence[c] == 0.0 || a.prevalence[c] == 1.0) a.report.constant_frames.push_back(a.frame_ids[c]);
  }
  const auto [scores, labels] = score_and_label(a, std::vector<std::string>(train_labels.rows));
  a.report.train_prediction_hash = hash_labels(labels);
  a.report.epochs.push_back({1, 0.0, 0.0, macro_f1(labels, train_labels)});
  a.report.best_epoch = a.report.stopped_epoch = 1;
  return a;
}

ModelArtifact train_ngram_logreg(const LabeledTexts& train, const ClassifierSpec& spec) {
  check_labels(train.labels, spec);
  if (train.texts.size() != train.labels.rows) throw ValidationError("texts and labels differ in length");

  std::map<std::string, std::size_t> totals;
  for (const auto& t : train.texts) {
    for (const auto& [key, count] : ngram_features(t)) totals[key] += static_cast<std::size_t>(count);
  }
  ModelArtifact a;
  a.spec = spec;
  a.spec.kind = ClassifierKind::NgramLogreg;
  a.frame_ids = label_frames(spec);
  for (const auto& [key, count] : totals) {
    if (count >= spec.min_count) a.ngram.features.push_back(key);
  }
  if (a.ngram.features.empty()) throw TrainingError("n-gram vocabulary is empty");

  const SparseRows x = vectorize(train.texts, a.ngram.features);
  const auto n_features = static_cast<Eigen::Index>(a.ngram.features.size());
  const std::size_t n = x.rows();
  bool any_trainable = false;
  for (std::size_t l = 0; l < train.labels.cols; ++l) {
    const auto y = train.labels.column(l);
    const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (positives == 0 || positives == n) {
      a.ngram.weights.emplace_back(a.ngram.features.size(), 0.0);
      a.ngram.bias.push_back(positives == 0 ? -1.0 : 1.0);
      a.ngram.constant.push_back(1);
      a.report.constant_frames.push_back(a.frame_ids[l]);
      continue;
    }
    any_trainable = true;
    const double l2 = spec.l2;
    // Parameters: feature weights then the intercept.
    auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
      grad.setZero(w.size());
      double f = 0.5 * l2 * w.head(n_features).squaredNorm();
      grad.head(n_features) = l2 * w.head(n_features);
      for (std::size_t r = 0; r < n; ++r) {
        double z = w[n_features];
        for (std::size_t k = x.offsets[r]; k < x.offsets[r + 1]; ++k) z += w[static_cast<Eigen::Index>(x.cols[k])] * x.values[k];
        const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        f += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[r] * z;
        const double d = p - y[r];
        for (std::size_t k = x.offsets[r]; k < x.offsets[r + 1]; ++k) grad[static_cast<Eigen::Index>(x.cols[k])] += d * x.values[k];
        grad[n_features] += d;
      }
      return f;
    };
    optim::LbfgsOptions opts;
    opts.max_iterations = 1000;
    opts.gradient_tolerance = 1e-5;
    const auto res = optim::lbfgs(objective, Eigen::VectorXd::Zero(n_features + 1), opts);
    if (!res.converged) a.report.warnings.push_back("L-BFGS did not converge for frame " + a.frame_ids[l]);
    a.ngram.weights.emplace_back(res.x.data(), res.x.data() + n_features);
    a.ngram.bias.push_back(res.x[n_features]);
    a.ngram.constant.push_back(0);
  }
  if (!any_trainable) throw TrainingError("every frame has single-class training data");

  const auto [scores, labels] = score_and_label(a, train.texts);
  a.report.train_prediction_hash = hash_labels(labels);
  a.report.epochs.push_back({1, 0.0, 0.0, macro_f1(labels, train.labels)});
  a.report.best_epoch = a.report.stopped_epoch = 1;
  return a;
}

ModelArtifact train_transformer(const LabeledTexts& train, const LabeledTexts& dev, const ClassifierSpec& spec,
                                const nn::TransformerModel& encoder) {
  check_labels(train.labels, spec);
  check_labels(dev.labels, spec);
  if (train.texts.empty() || dev.texts.empty()) throw TrainingError("transformer training needs train and dev data");
  const auto& opts = spec.transformer;

  ModelArtifact a;
  a.spec = spec;
  a.spec.kind = ClassifierKind::Transformer;
  a.frame_ids = label_frames(spec);
  Rng rng(spec.seed);
  a.net = std::make_shared<nn::TransformerModel>(encoder);
  a.net->add_classifier_head(static_cast<int>(a.frame_ids.size()), rng.fork());
  auto& net = *a.net;

  const auto max_len = static_cast<std::size_t>(opts.max_sequence_length);
  auto encode_all = [&](const std::vector<std::string>& texts) {
    std::vector<std::vector<int>> out;
    for (const auto& t : texts) out.push_back(net.encode_text(t, max_len));
    return out;
  };
  const auto train_ids = encode_all(train.texts);
  const auto dev_ids = encode_all(dev.texts);
  auto row_labels = [](const BinaryMatrix& m, std::size_t r) {
    return std::vector<std::uint8_t>(m.row(r).begin(), m.row(r).end());
  };

  const bool dev_has_positive = std::find(dev.labels.data.begin(), dev.labels.data.end(), 1) != dev.labels.data.end();
  if (!dev_has_positive) {
    a.report.warnings.push_back("dev set has no positive label; early stopping uses dev loss");
    a.report.stopped_on_loss = true;
  }

  nn::AdamOptions adam;
  adam.learning_rate = opts.learning_rate;
  const auto batch = static_cast<std::size_t>(std::max(1, opts.batch_size));
  std::vector<std::size_t> order(train_ids.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batches_per_epoch = (order.size() + batch - 1) / batch;
  const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(std::max(1, opts.max_epochs));
  const std::size_t warmup = std::max<std::size_t>(1, total_steps * 6 / 100);
  std::size_t step = 0;
  double best_metric = -std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_weights = net.snapshot();
  int since_best = 0;
  for (int epoch = 1; epoch <= std::max(1, opts.max_epochs); ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      net.zero_grad();
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        train_loss += net.classification_step(train_ids[order[i]], row_labels(train.labels, order[i]), w, true);
      }
      // Linear warmup over the first 6% of steps, then linear decay to zero at max_epochs.
      ++step;
      const double warm = static_cast<double>(step) / static_cast<double>(warmup);
      const double decay = static_cast<double>(total_steps - step + 1) / static_cast<double>(total_steps - warmup + 1);
      adam.learning_rate = opts.learning_rate * std::clamp(std::min(warm, decay), 0.0, 1.0);
      net.adam_step(adam);
    }

    RealMatrix dev_scores(dev_ids.size(), a.frame_ids.size());
    double dev_loss = 0.0;
    for (std::size_t r = 0; r < dev_ids.size(); ++r) {
      const auto s = net.predict_scores(dev_ids[r]);
      for (std::size_t c = 0; c < dev_scores.cols; ++c) {
        const double p = std::clamp(s[static_cast<Eigen::Index>(c)], 1e-12, 1.0 - 1e-12);
        dev_scores(r, c) = s[static_cast<Eigen::Index>(c)];
        dev_loss -= dev.labels(r, c) ? std::log(p) : std::log(1.0 - p);
      }
    }
    dev_loss /= static_cast<double>(dev_ids.size());
    BinaryMatrix dev_pred(dev_scores.rows, dev_scores.cols);
    for (std::size_t i = 0; i < dev_scores.data.size(); ++i) dev_pred.data[i] = dev_scores.data[i] >= spec.threshold;
    const double f1 = macro_f1(dev_pred, dev.labels);
    a.report.epochs.push_back({epoch, train_loss / static_cast<double>(train_ids.size()), dev_loss, f1});

    // Macro-F1 first, dev loss breaking ties; loss alone when dev has no positives.
    const double metric = a.report.stopped_on_loss ? -dev_loss : f1;
    if (metric > best_metric || (metric == best_metric && dev_loss < best_loss)) {
      best_metric = metric;
      best_loss = dev_loss;
      best_weights = net.snapshot();
      a.report.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    a.report.stopped_epoch = epoch;
    if (since_best >= opts.patience) break;
  }
  net.restore(best_weights);

  const auto [scores, labels] = score_and_label(a, train.texts);
  a.report.train_prediction_hash = hash_labels(labels);
  return a;
}

ModelArtifact train_model(const LabeledTexts& train, const LabeledTexts& dev, const ClassifierSpec& spec,
                          const std::vector<std::string>& adaptation_texts) {
  switch (spec.kind) {
    case ClassifierKind::Random:
      return train_random_baseline(train.labels, spec);
    case ClassifierKind::NgramLogreg:
      return train_ngram_logreg(train, spec);
    case ClassifierKind::Transformer:
      break;
  }
  const auto& opts = spec.transformer;
  const auto& vocab_texts = adaptation_texts.empty() ? train.texts : adaptation_texts;
  auto encoder = nn::resolve_encoder(opts.encoder, opts.encoder_config, vocab_texts, opts.max_vocab);
  if (opts.domain_adapted && encoder.adapted_epochs() == 0) {
    nn::AdaptOptions adapt;
    adapt.epochs = opts.adaptation_epochs;
    adapt.seed = spec.seed;
    encoder = nn::domain_adapt(encoder, vocab_texts, adapt).model;
  }
  return train_transformer(train, dev, spec, encoder);
}

ScoreMatrix predict(const ModelArtifact& model, const std::vector<std::string>& texts,
                    std::vector<std::string> row_ids) {
  if (model.spec.joint) throw ConfigurationError("joint model: use predict_by_typology");
  auto by_typology = predict_by_typology(model, texts, std::move(row_ids));
  return std::move(by_typology.at(model.spec.typology));
}

std::map<Typology, ScoreMatrix> predict_by_typology(const ModelArtifact& model, const std::vector<std::string>& texts,
                                                    std::vector<std::string> row_ids) {
  if (row_ids.empty()) {
    for (std::size_t i = 0; i < texts.size(); ++i) row_ids.push_back(std::to_string(i));
  }
  if (row_ids.size() != texts.size()) throw ValidationError("row ids and texts differ in length");
  auto [scores, labels] = score_and_label(model, texts);
  std::map<Typology, ScoreMatrix> out;
  const auto& schema = load_schema();
  std::size_t offset = 0;
  for (Typology t : kTypologies) {
    if (!model.spec.joint && t != model.spec.typology) continue;
    const std::size_t k = schema.count(t);
    ScoreMatrix m;
    m.typology = t;
    m.row_ids = row_ids;
    m.threshold = model.spec.threshold;
    m.scores = RealMatrix(texts.size(), k);
    m.labels = BinaryMatrix(texts.size(), k);
    for (std::size_t r = 0; r < texts.size(); ++r) {
      for (std::size_t c = 0; c < k; ++c) {
        m.scores(r, c) = scores(r, offset + c);
        m.labels(r, c) = labels(r, offset + c);
      }
    }
    offset += k;
    out.emplace(t, std::move(m));
  }
  return out;
}

std::size_t select_best_seed(const std::vector<ModelArtifact>& artifacts, const LabeledTexts& dev) {
  if (artifacts.empty()) throw ValidationError("select_best_seed needs at least one artifact");
  for (const auto& a : artifacts) {
    if (a.spec.joint != artifacts.front().spec.joint || a.spec.typology != artifacts.front().spec.typology) {
      throw ValidationError("select_best_seed: artifacts cover different typologies");
    }
  }
  std::size_t best = 0;
  double best_f1 = -1.0;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    const auto [scores, labels] = score_and_label(artifacts[i], dev.texts);
    const double f1 = macro_f1(labels, dev.labels);
    if (f1 > best_f1 || (f1 == best_f1 && artifacts[i].spec.seed < artifacts[best].spec.seed)) {
      best = i;
      best_f1 = f1;
    }
  }
  return best;
}

void ModelArtifact::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  ordered_json meta = spec.to_json();
  meta["frame_ids"] = frame_ids;
  meta["report"] = {{"best_epoch", report.best_epoch},
                    {"stopped_epoch", report.stopped_epoch},
                    {"stopped_on_loss", report.stopped_on_loss},
                    {"constant_frames", report.constant_frames},
                    {"warnings", report.warnings},
                    {"train_prediction_hash", report.train_prediction_hash}};
  io::write_file_atomic(dir / "spec.json", meta.dump(2) + "\n");
  io::write_file_atomic(dir / "training_report.csv", report.to_csv());
  if (spec.kind == ClassifierKind::Transformer) {
    net->save(dir / "weights.bin");
    return;
  }
  ordered_json w;
  if (spec.kind == ClassifierKind::Random) {
    w["prevalence"] = prevalence;
  } else {
    w["features"] = ngram.features;
    auto& labels = w["labels"] = ordered_json::array();
    for (std::size_t l = 0; l < frame_ids.size(); ++l) {
      labels.push_back({{"frame", frame_ids[l]},
                        {"constant", ngram.constant[l] != 0},
                        {"bias", ngram.bias[l]},
                        {"weights", ngram.weights[l]}});
    }
  }
  io::write_file_atomic(dir / "weights.json", w.dump() + "\n");
}

ModelArtifact ModelArtifact::load(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "spec.json")) {
    throw ConfigurationError("missing model artifact: " + (dir / "spec.json").string());
  }
  ModelArtifact a;
  const auto meta = json::parse(io::read_file(dir / "spec.json"));
  a.spec = ClassifierSpec::from_json(meta);
  a.frame_ids = meta.at("frame_ids").get<std::vector<std::string>>();
  const auto& rep = meta.at("report");
  a.report.best_epoch = rep.value("best_epoch", 0);
  a.report.stopped_epoch = rep.value("stopped_epoch", 0);
  a.report.stopped_on_loss = rep.value("stopped_on_loss", false);
  a.report.constant_frames = rep.value("constant_frames", std::vector<std::string>{});
  a.report.warnings = rep.value("warnings", std::vector<std::string>{});
  a.report.train_prediction_hash = rep.value("train_prediction_hash", std::string{});
  if (std::filesystem::exists(dir / "training_report.csv")) {
    bool header = true;
    io::for_each_line(dir / "training_report.csv", [&](std::size_t, std::string_view line) {
      if (header) {
        header = false;
        return;
      }
      const auto f = io::parse_csv_row(line);
      a.report.epochs.push_back({std::stoi(f.at(0)), std::stod(f.at(1)), std::stod(f.at(2)), std::stod(f.at(3))});
    });
  }
  if (a.frame_ids != label_frames(a.spec)) throw SchemaMismatchError("artifact frame list does not match schema");
  if (a.spec.kind == ClassifierKind::Transformer) {
    a.net = std::make_shared<nn::TransformerModel>(nn::TransformerModel::load(dir / "weights.bin"));
    return a;
  }
  const auto w = json::parse(io::read_file(dir / "weights.json"));
  if (a.spec.kind == ClassifierKind::Random) {
    a.prevalence = w.at("prevalence").get<std::vector<double>>();
  } else {
    a.ngram.features = w.at("features").get<std::vector<std::string>>();
    for (const auto& l : w.at("labels")) {
      a.ngram.constant.push_back(l.at("constant").get<bool>());
      a.ngram.bias.push_back(l.at("bias").get<double>());
      a.ngram.weights.push_back(l.at("weights").get<std::vector<double>>());
    }
  }
  return a;
}

}  // namespace framelens
