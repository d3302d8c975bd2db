// framelens: ingest -> attach-labels -> train -> predict -> evaluate -> agree -> regress -> report.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "framelens/annotation.hpp"
#include "framelens/classify.hpp"
#include "framelens/corpus.hpp"
#include "framelens/design.hpp"
#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "framelens/metrics.hpp"
#include "framelens/report.hpp"
#include "framelens/stats.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace framelens;

namespace {

// Reads a JSON config file into CLI11 items. Nested objects name subcommands,
// e.g. {"train": {"kind": "ngram_logreg", "seeds": [1, 2]}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      std::string name = key;
      std::replace(name.begin(), name.end(), '_', '-');
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        flatten(value, next, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = name;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Run bookkeeping

ordered_json effective_config(const CLI::App& sub) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (results.size() == 1 && opt->get_expected_max() <= 1) {
        j[name] = results.front();
      } else {
        j[name] = results;
      }
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return ordered_json{{sub.get_name(), j}};
}

void hash_tree(const fs::path& root, const fs::path& path, ordered_json& out, bool skip_run_files) {
  if (fs::is_regular_file(path)) {
    out[path.string()] = io::sha256_file(path);
    return;
  }
  if (!fs::is_directory(path)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (skip_run_files && (name.starts_with("run_manifest.") || name.starts_with("config."))) continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out[fs::relative(f, root).generic_string()] = io::sha256_file(f);
}

struct Run {
  std::string command;
  fs::path out;
  std::vector<fs::path> inputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  // The frozen config sits beside the outputs; the manifest hashes it, the
  // inputs and every output file. Config and manifest files are skipped on
  // both sides so wall times never leak into downstream hashes.
  void finish(const CLI::App& sub) const {
    const std::string config = effective_config(sub).dump(2) + "\n";
    io::write_file_atomic(out / ("config." + command + ".json"), config);
    ordered_json m;
    m["command"] = command;
    m["tool_version"] = FRAMELENS_VERSION;
    m["config_hash"] = io::sha256_hex(config);
    ordered_json in = ordered_json::object();
    for (const auto& p : inputs) {
      ordered_json files = ordered_json::object();
      hash_tree(p, p, files, true);
      in[p.string()] = files;
    }
    m["inputs"] = in;
    ordered_json outputs = ordered_json::object();
    hash_tree(out, out, outputs, true);
    m["outputs"] = outputs;
    m["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_file_atomic(out / ("run_manifest." + command + ".json"), m.dump(2) + "\n");
  }
};

std::vector<Typology> typologies_for(const std::string& name) {
  if (name == "all") return {kTypologies.begin(), kTypologies.end()};
  return {parse_typology(name)};
}

std::string fmt(double v, int digits = 3) { return io::fixed(v, digits); }

// ---------------------------------------------------------------------------
// Dataset helpers

struct LabeledSplit {
  LabeledTexts data;
  std::vector<const PostRecord*> records;
};

// Rows of `split` (or every split when nullopt) with gold labels for the
// spec's label space, in record order.
LabeledSplit labeled_rows(const Dataset& ds, const GoldLabels& gold, const ClassifierSpec& spec,
                          std::optional<Split> split) {
  std::vector<Typology> needed;
  if (spec.joint) {
    needed.assign(kTypologies.begin(), kTypologies.end());
  } else {
    needed.push_back(spec.typology);
  }
  const auto width = label_frames(spec).size();
  LabeledSplit out;
  std::vector<std::uint8_t> bits;
  for (const auto& r : ds.records) {
    if (split && r.split != split) continue;
    auto it = gold.find(r.post_id);
    if (it == gold.end()) continue;
    const bool complete = std::all_of(needed.begin(), needed.end(), [&](Typology t) { return it->second.contains(t); });
    if (!complete) continue;
    out.data.ids.push_back(r.post_id);
    out.data.texts.push_back(r.text);
    out.records.push_back(&r);
    for (Typology t : needed) {
      const auto& b = it->second.at(t).bits;
      bits.insert(bits.end(), b.begin(), b.end());
    }
  }
  out.data.labels = BinaryMatrix(out.data.ids.size(), width);
  out.data.labels.data = std::move(bits);
  return out;
}

std::string spec_label(const ClassifierSpec& spec) {
  return spec.joint ? std::string("joint") : std::string(typology_slug(spec.typology));
}

fs::path resolve_model_dir(const fs::path& p) {
  if (fs::exists(p / "spec.json")) return p;
  if (fs::exists(p / "best.json")) {
    const auto best = json::parse(io::read_file(p / "best.json"));
    return p / best.at("artifact").get<std::string>();
  }
  throw ConfigurationError("missing model artifact: expected " + (p / "spec.json").string() + " or " +
                           (p / "best.json").string());
}

double dev_macro_f1(const ModelArtifact& a, const LabeledTexts& dev) {
  const auto by_t = predict_by_typology(a, dev.texts, dev.ids);
  double sum = 0.0;
  std::size_t frames = 0, offset = 0;
  for (const auto& [t, m] : by_t) {
    for (std::size_t c = 0; c < m.labels.cols; ++c) {
      std::vector<std::uint8_t> g(dev.labels.rows);
      for (std::size_t r = 0; r < g.size(); ++r) g[r] = dev.labels(r, offset + c);
      sum += prf1(m.labels.column(c), g).f1;
      ++frames;
    }
    offset += m.labels.cols;
  }
  return frames ? sum / static_cast<double>(frames) : 0.0;
}

// ---------------------------------------------------------------------------
// Commands

struct IngestArgs {
  std::string input, out, lexicon;
};

int cmd_ingest(const IngestArgs& a, const CLI::App& sub) {
  if (!fs::is_regular_file(a.input)) throw ValidationError("cannot read input file: " + a.input);
  Run run{"ingest", a.out, {a.input}};
  Lexicon lexicon = default_lexicon();
  if (!a.lexicon.empty()) {
    const auto j = json::parse(io::read_file(a.lexicon));
    lexicon.version = j.at("version").get<std::string>();
    lexicon.terms = j.at("terms").get<std::vector<std::string>>();
    run.inputs.emplace_back(a.lexicon);
  }
  const auto m = ingest(a.input, a.out, lexicon);
  const auto& d = m.dropped;
  std::cout << "kept " << m.record_count << ", dropped " << d.total() << " (retweet " << d.retweet << ", no_region "
            << d.no_region << ", no_keyword " << d.no_keyword << ", malformed " << d.malformed << ", duplicate "
            << d.duplicate << ")\n";
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  run.finish(sub);
  if (m.record_count == 0) throw ValidationError("no records retained from " + a.input);
  return 0;
}

struct AttachArgs {
  std::string dataset, annotations, adjudications, out;
  std::uint64_t seed = 0;
};

int cmd_attach(const AttachArgs& a, const CLI::App& sub) {
  Run run{"attach-labels", a.out, {a.dataset, a.annotations}};
  const Dataset ds = load_dataset(a.dataset);
  const auto annotations = load_annotations(a.annotations);
  std::vector<Adjudication> adjudications;
  if (!a.adjudications.empty()) {
    adjudications = load_adjudications(a.adjudications);
    run.inputs.emplace_back(a.adjudications);
  }
  auto merged = consensus_merge(annotations, adjudications);

  std::map<std::string, const PostRecord*> by_id;
  for (const auto& r : ds.records) by_id[r.post_id] = &r;
  std::vector<ConsensusRecord> kept;
  std::size_t unknown = 0;
  for (auto& c : merged.records) {
    if (by_id.contains(c.post_id)) {
      kept.push_back(std::move(c));
    } else {
      ++unknown;
    }
  }
  if (unknown) std::cerr << "warning: " << unknown << " labeled posts are not in the dataset and were skipped\n";
  if (kept.empty()) throw ValidationError("no labeled posts match the dataset");

  fs::create_directories(a.out);
  if (fs::weakly_canonical(a.out) != fs::weakly_canonical(a.dataset)) {
    io::write_file_atomic(fs::path(a.out) / "records.jsonl", io::read_file(fs::path(a.dataset) / "records.jsonl"));
    io::write_file_atomic(fs::path(a.out) / "manifest.json", io::read_file(fs::path(a.dataset) / "manifest.json"));
  }
  io::write_file_atomic(fs::path(a.out) / "labels.jsonl", consensus_jsonl(kept));
  std::string pending = io::csv_row({"post_id", "frame_id", "annotators"});
  for (const auto& p : merged.pending) {
    std::string coders;
    for (const auto& c : p.annotators) coders += (coders.empty() ? "" : ";") + c;
    pending += io::csv_row({p.post_id, p.frame_id, coders});
  }
  io::write_file_atomic(fs::path(a.out) / "pending.csv", pending);

  std::vector<std::pair<std::string, Region>> ids;
  for (const auto& c : kept) ids.emplace_back(c.post_id, by_id.at(c.post_id)->region);
  const auto splits = split_dataset(ids, a.seed);
  write_splits(a.out, splits);
  std::map<Split, std::size_t> counts;
  for (const auto& [id, s] : splits) ++counts[s];
  std::set<std::string> pending_posts;
  for (const auto& p : merged.pending) pending_posts.insert(p.post_id);
  std::cout << "labeled " << kept.size() << " posts (" << pending_posts.size() << " pending adjudication); split train/dev/test = "
            << counts[Split::Train] << "/" << counts[Split::Dev] << "/" << counts[Split::Test] << "\n";
  run.finish(sub);
  return 0;
}

struct AgreeArgs {
  std::string annotations, out;
  std::vector<std::string> predictions;
};

int cmd_agree(const AgreeArgs& a, const CLI::App& sub) {
  Run run{"agree", a.out, {a.annotations}};
  const auto annotations = load_annotations(a.annotations);
  std::string per_frame = io::csv_row({"frame_id", "typology", "alpha", "n_units", "defined"});
  std::string summary = io::csv_row({"typology", "mean_alpha", "pooled_alpha", "defined_frames", "undefined_frames"});
  std::optional<std::string> first_error;
  std::size_t ok = 0;
  for (Typology t : kTypologies) {
    if (!annotations.has(t)) continue;
    try {
      const auto agreement = typology_alpha(annotations, t);
      for (const auto& f : agreement.frames) {
        per_frame += io::csv_row({f.frame_id, std::string(typology_slug(t)),
                                  f.result.alpha ? fmt(*f.result.alpha, 6) : "", std::to_string(f.result.n_units),
                                  f.result.defined() ? "1" : "0"});
      }
      summary += io::csv_row({std::string(typology_slug(t)), agreement.mean_alpha ? fmt(*agreement.mean_alpha, 6) : "",
                              agreement.pooled.alpha ? fmt(*agreement.pooled.alpha, 6) : "",
                              std::to_string(agreement.frames.size() - agreement.undefined_count),
                              std::to_string(agreement.undefined_count)});
      std::cout << typology_slug(t) << ": mean alpha " << (agreement.mean_alpha ? fmt(*agreement.mean_alpha) : "undefined")
                << ", pooled alpha " << (agreement.pooled.alpha ? fmt(*agreement.pooled.alpha) : "undefined") << " ("
                << agreement.undefined_count << " undefined frames)\n";
      ++ok;
    } catch (const Error& e) {
      std::cerr << typology_slug(t) << ": " << e.what() << "\n";
      if (!first_error) first_error = e.what();
    }
  }
  if (ok == 0) {
    if (first_error && first_error->find("no overlapping units") != std::string::npos) throw ValidationError(*first_error);
    throw UndefinedAgreementError(first_error.value_or("no annotations"));
  }
  fs::create_directories(a.out);
  io::write_file_atomic(fs::path(a.out) / "agreement.csv", per_frame);
  io::write_file_atomic(fs::path(a.out) / "agreement_summary.csv", summary);

  if (!a.predictions.empty()) {
    std::string hm = io::csv_row({"typology", "annotator", "alpha", "n_posts"});
    for (const auto& p : a.predictions) {
      run.inputs.emplace_back(p);
      const auto m = read_predictions_csv(p);
      std::map<std::string, LabelVector> preds;
      for (std::size_t r = 0; r < m.row_ids.size(); ++r) {
        const auto row = m.labels.row(r);
        preds[m.row_ids[r]] = LabelVector{m.typology, {row.begin(), row.end()}};
      }
      const auto res = human_machine_alpha(preds, annotations, m.typology);
      for (const auto& [coder, alpha] : res.per_annotator) {
        hm += io::csv_row({std::string(typology_slug(m.typology)), coder, fmt(alpha, 6), std::to_string(res.n_posts)});
      }
      hm += io::csv_row({std::string(typology_slug(m.typology)), "mean", fmt(res.mean_alpha, 6), std::to_string(res.n_posts)});
      std::cout << typology_slug(m.typology) << ": human-machine alpha " << fmt(res.mean_alpha) << "\n";
    }
    io::write_file_atomic(fs::path(a.out) / "human_machine.csv", hm);
  }
  run.finish(sub);
  return 0;
}

struct TrainArgs {
  std::string dataset, out, kind = "ngram_logreg", typology = "all";
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  bool joint = false;
  double threshold = 0.5, l2 = 1.0;
  std::size_t min_count = 1;
  TransformerOptions transformer;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
  Run run{"train", a.out, {a.dataset}};
  const Dataset ds = load_dataset(a.dataset);
  const auto gold = load_gold_labels(fs::path(a.dataset) / "labels.jsonl");
  const auto kind = parse_kind(a.kind);
  const auto seeds = a.seeds.empty() ? std::vector<std::uint64_t>{a.seed} : a.seeds;

  std::vector<ClassifierSpec> specs;
  if (a.joint) {
    ClassifierSpec s;
    s.joint = true;
    specs.push_back(s);
  } else {
    for (Typology t : typologies_for(a.typology)) {
      ClassifierSpec s;
      s.typology = t;
      specs.push_back(s);
    }
  }
  for (auto& s : specs) {
    s.kind = kind;
    s.threshold = a.threshold;
    s.l2 = a.l2;
    s.min_count = a.min_count;
    s.transformer = a.transformer;
  }

  std::vector<std::string> all_texts;
  for (const auto& r : ds.records) all_texts.push_back(r.text);
  if (kind == ClassifierKind::Transformer && a.transformer.domain_adapted) {
    // Adapt once per invocation and share the encoder across seeds and typologies.
    auto encoder = nn::resolve_encoder(a.transformer.encoder, a.transformer.encoder_config, all_texts,
                                       a.transformer.max_vocab);
    if (encoder.adapted_epochs() == 0) {
      nn::AdaptOptions adapt;
      adapt.epochs = a.transformer.adaptation_epochs;
      adapt.seed = seeds.front();
      const auto adapted = nn::domain_adapt(encoder, all_texts, adapt);
      const auto path = fs::path(a.out) / "adapted_encoder.bin";
      fs::create_directories(a.out);
      adapted.model.save(path);
      std::cout << "domain adaptation: " << adapt.epochs << " epochs, final masked-token loss "
                << (adapted.epoch_losses.empty() ? std::string("n/a") : fmt(adapted.epoch_losses.back(), 4)) << "\n";
      for (auto& s : specs) s.transformer.encoder = path.string();
    }
  }

  for (const auto& base : specs) {
    const auto train = labeled_rows(ds, gold, base, Split::Train);
    const auto dev = labeled_rows(ds, gold, base, Split::Dev);
    if (train.data.ids.empty()) {
      throw ConfigurationError("no gold labels for typology " + spec_label(base) + " in the train split of " +
                               a.dataset + "; run attach-labels with annotations for it");
    }
    if (dev.data.ids.empty()) throw ConfigurationError("no dev rows with gold labels for typology " + spec_label(base));
    const auto dir = fs::path(a.out) / std::string(kind_name(kind)) / spec_label(base);
    std::vector<ModelArtifact> artifacts;
    for (auto seed : seeds) {
      auto spec = base;
      spec.seed = seed;
      auto artifact = train_model(train.data, dev.data, spec, all_texts);
      artifact.save(dir / ("seed-" + std::to_string(seed)));
      std::cout << kind_name(kind) << " " << spec_label(base) << " seed " << seed << ": dev macro-F1 "
                << fmt(dev_macro_f1(artifact, dev.data)) << "\n";
      artifacts.push_back(std::move(artifact));
    }
    const auto best = select_best_seed(artifacts, dev.data);
    ordered_json marker{{"seed", artifacts[best].spec.seed},
                        {"artifact", "seed-" + std::to_string(artifacts[best].spec.seed)},
                        {"dev_macro_f1", dev_macro_f1(artifacts[best], dev.data)}};
    io::write_file_atomic(dir / "best.json", marker.dump(2) + "\n");
    std::cout << kind_name(kind) << " " << spec_label(base) << ": best seed " << artifacts[best].spec.seed << "\n";
  }
  run.finish(sub);
  return 0;
}

struct PredictArgs {
  std::string model, dataset, out, split = "all";
};

int cmd_predict(const PredictArgs& a, const CLI::App& sub) {
  const auto dir = resolve_model_dir(a.model);
  Run run{"predict", a.out, {dir, a.dataset}};
  const auto model = ModelArtifact::load(dir);
  const Dataset ds = load_dataset(a.dataset);
  std::optional<Split> split;
  if (a.split != "all") split = parse_split(a.split);
  std::vector<std::string> ids, texts;
  for (const auto& r : ds.records) {
    if (split && r.split != split) continue;
    ids.push_back(r.post_id);
    texts.push_back(r.text);
  }
  fs::create_directories(a.out);
  for (const auto& [t, m] : predict_by_typology(model, texts, ids)) {
    const auto path = fs::path(a.out) / ("predictions_" + std::string(typology_slug(t)) + ".csv");
    io::write_file_atomic(path, predictions_csv(m));
    std::cout << "wrote " << m.row_ids.size() << " rows to " << path.string() << "\n";
  }
  run.finish(sub);
  return 0;
}

struct EvaluateArgs {
  std::string dataset, out, split = "test", subgroup, pairing = "decision";
  std::vector<std::string> models;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& a, const CLI::App& sub) {
  Run run{"evaluate", a.out, {a.dataset}};
  const Dataset ds = load_dataset(a.dataset);
  const auto gold = load_gold_labels(fs::path(a.dataset) / "labels.jsonl");
  const Split split = parse_split(a.split);
  const auto unit = a.pairing == "instance" ? PairingUnit::Instance : PairingUnit::Decision;
  if (a.pairing != "instance" && a.pairing != "decision") throw UsageError("--pairing must be decision or instance");
  std::optional<SubgroupDimension> dimension;
  if (a.subgroup == "region") dimension = SubgroupDimension::Region;
  if (a.subgroup == "ideology") dimension = SubgroupDimension::IdeologyBin;
  if (!a.subgroup.empty() && !dimension) throw UsageError("--subgroup must be region or ideology");

  struct Evaluated {
    std::string name;
    std::string kind;
    Typology typology;
    BinaryMatrix predicted;
    BinaryMatrix gold;
  };
  std::vector<Evaluated> evaluated;
  std::string comparison = io::csv_row({"model", "kind", "typology", "macro_precision", "macro_recall", "macro_f1",
                                        "macro_f1_mean", "macro_f1_ci_low", "macro_f1_ci_high", "lrap"});
  std::set<std::string> names;
  fs::create_directories(a.out);
  for (const auto& path : a.models) {
    const auto dir = resolve_model_dir(path);
    run.inputs.push_back(dir);
    const auto model = ModelArtifact::load(dir);
    std::string base = std::string(kind_name(model.spec.kind)) + "_" + spec_label(model.spec) + "_seed" +
                       std::to_string(model.spec.seed);
    std::string name = base;
    for (int k = 2; names.contains(name); ++k) name = base + "_" + std::to_string(k);
    names.insert(name);

    for (Typology t : kTypologies) {
      if (!model.spec.joint && t != model.spec.typology) continue;
      ClassifierSpec single = model.spec;
      single.joint = false;
      single.typology = t;
      const auto rows = labeled_rows(ds, gold, single, split);
      if (rows.data.ids.empty()) {
        throw ConfigurationError("no gold labels for typology " + std::string(typology_slug(t)) + " in the " + a.split +
                                 " split");
      }
      const auto scores = predict_by_typology(model, rows.data.texts, rows.data.ids).at(t);
      auto rep = macro_report(scores, rows.data.labels);
      add_bootstrap(rep, scores.scores, scores.labels, rows.data.labels, a.bootstrap, a.seed);
      rep.metadata["model"] = name;
      rep.metadata["spec"] = model.spec.to_json();
      rep.metadata["split"] = a.split;
      const std::string stem = model.spec.joint ? name + "_" + std::string(typology_slug(t)) : name;
      io::write_file_atomic(fs::path(a.out) / (stem + ".json"), rep.to_json().dump(2) + "\n");
      io::write_file_atomic(fs::path(a.out) / (stem + ".csv"), rep.to_csv());
      const auto& bs = rep.bootstrap.at("macro_f1");
      comparison += io::csv_row({name, std::string(kind_name(model.spec.kind)), std::string(typology_slug(t)),
                                 fmt(rep.macro_precision), fmt(rep.macro_recall), fmt(rep.macro_f1), fmt(bs.mean),
                                 fmt(bs.ci_low), fmt(bs.ci_high), rep.lrap ? fmt(rep.lrap->value) : ""});
      std::cout << name << " " << typology_slug(t) << ": macro-F1 " << fmt(rep.macro_f1) << " [" << fmt(bs.ci_low)
                << ", " << fmt(bs.ci_high) << "]\n";

      if (dimension) {
        if (*dimension == SubgroupDimension::IdeologyBin &&
            std::none_of(rows.records.begin(), rows.records.end(),
                         [](const PostRecord* r) { return r->author.ideology.has_value(); })) {
          throw ValidationError("--subgroup ideology: field 'ideology' is missing on every evaluated record");
        }
        const auto groups = subgroup_eval(scores, rows.data.labels, rows.records, *dimension);
        std::string csv = "dimension,value," + std::string(kEvalCsvHeader) + "\n";
        for (const auto& [key, report] : groups.reports) {
          const std::string body = report.to_csv(false);
          std::size_t start = 0;
          while (start < body.size()) {
            const auto end = body.find('\n', start);
            csv += a.subgroup + "," + key.value + "," + body.substr(start, end - start) + "\n";
            start = end + 1;
          }
        }
        io::write_file_atomic(fs::path(a.out) / ("subgroup_" + a.subgroup + "_" + stem + ".csv"), csv);
        for (const auto& note : groups.notes) std::cerr << "note: " << note << "\n";
      }
      evaluated.push_back({name, std::string(kind_name(model.spec.kind)), t, scores.labels, rows.data.labels});
    }
  }
  io::write_file_atomic(fs::path(a.out) / "comparison.csv", comparison);

  std::string tests = io::csv_row({"model_a", "model_b", "typology", "unit", "b", "c", "p_value", "exact"});
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    for (std::size_t j = i + 1; j < evaluated.size(); ++j) {
      const auto& x = evaluated[i];
      const auto& y = evaluated[j];
      if (x.typology != y.typology || x.gold.rows != y.gold.rows) continue;
      const auto res = mcnemar(correctness(x.predicted, x.gold, unit), correctness(y.predicted, y.gold, unit));
      tests += io::csv_row({x.name, y.name, std::string(typology_slug(x.typology)), a.pairing, std::to_string(res.b),
                            std::to_string(res.c), io::fixed(res.p_value, 6), res.exact ? "1" : "0"});
    }
  }
  io::write_file_atomic(fs::path(a.out) / "mcnemar.csv", tests);
  run.finish(sub);
  return 0;
}

struct RegressArgs {
  std::string dataset, out, predictor, outcome, estimator = "laplace_random_intercepts", legend;
  std::vector<std::string> predictions, frames, eval_csv;
  bool building = false, setting = false;
  double alpha = -1.0, min_f1 = -1.0;
};

stats::FitResult fit_with_fallback(const stats::DesignMatrix& d, stats::Family family, stats::Estimator estimator) {
  if (estimator == stats::Estimator::LaplaceRandomIntercepts) {
    if (d.groups.empty()) {
      auto r = stats::fit(d, family, stats::Estimator::FixedOnly);
      r.warnings.push_back("no random-intercept level has 2 or more groups; fitted fixed effects only");
      return r;
    }
    try {
      return stats::fit_random_intercepts(d, family);
    } catch (const NonConvergenceError& e) {
      auto r = stats::fit(d, family, stats::Estimator::FixedOnly);
      r.warnings.push_back(std::string("downgraded to fixed effects only: ") + e.what());
      return r;
    }
  }
  return stats::fit(d, family, estimator);
}

std::vector<std::string> frames_above_f1(const std::vector<std::string>& eval_csvs, double min_f1) {
  const auto& schema = load_schema();
  std::map<std::string, std::string> by_display;
  for (const auto& f : schema.all()) by_display[f.display_name] = f.id;
  std::vector<std::string> out;
  for (const auto& path : eval_csvs) {
    bool header = true;
    io::for_each_line(path, [&](std::size_t, std::string_view line) {
      if (header) {
        header = false;
        return;
      }
      const auto f = io::parse_csv_row(line);
      if (f.size() < 5) throw ValidationError(path + ": not an evaluation CSV");
      auto it = by_display.find(f[1]);
      if (it == by_display.end()) throw SchemaMismatchError(path + ": unknown frame " + f[1]);
      if (std::stod(f[4]) > min_f1) out.push_back(it->second);
    });
  }
  return out;
}

int cmd_regress(const RegressArgs& a, const CLI::App& sub) {
  if (a.building == a.setting) throw UsageError("choose exactly one of --building or --setting");
  if (a.building && a.predictor.empty()) throw UsageError("--building needs --predictor region|ideology");
  if (a.setting && a.outcome.empty()) throw UsageError("--setting needs --outcome favorites|retweets");
  Run run{"regress", a.out, {a.dataset}};
  const Dataset ds = load_dataset(a.dataset);
  const auto estimator = stats::parse_estimator(a.estimator);
  const double alpha = a.alpha > 0 ? a.alpha : (a.building ? 0.01 : 0.005);
  const auto legend = report::parse_legend(a.legend.empty() ? (a.building ? "standard" : "strict") : a.legend);
  const auto& schema = load_schema();

  stats::FrameCalls calls;
  std::set<std::string> covered;
  for (const auto& p : a.predictions) {
    run.inputs.emplace_back(p);
    const auto m = read_predictions_csv(p);
    const auto ids = schema.ids(m.typology);
    covered.insert(ids.begin(), ids.end());
    for (std::size_t r = 0; r < m.row_ids.size(); ++r) {
      auto& set = calls[m.row_ids[r]];
      for (std::size_t c = 0; c < ids.size(); ++c) {
        if (m.labels(r, c)) set.insert(ids[c]);
      }
    }
  }
  std::vector<std::string> frames = a.frames;
  if (a.min_f1 >= 0) {
    if (a.eval_csv.empty()) throw UsageError("--min-f1 needs --eval-csv");
    frames = frames_above_f1(a.eval_csv, a.min_f1);
  }
  if (frames.empty()) {
    for (const auto& f : schema.all()) {
      if (covered.contains(f.id)) frames.push_back(f.id);
    }
  }
  for (const auto& f : frames) {
    if (!covered.contains(f)) throw ConfigurationError("no predictions supplied for frame " + f);
  }

  fs::create_directories(fs::path(a.out) / "tables");
  std::string notes;
  ordered_json fits = ordered_json::object();
  struct Focal {
    std::string frame, coefficient;
    stats::Coefficient value;
  };
  std::vector<Focal> focal;
  std::map<std::string, stats::FitResult> results;

  if (a.building) {
    const auto predictor = stats::parse_predictor(a.predictor);
    const std::vector<std::string> wanted = predictor == stats::Predictor::Region
                                                ? std::vector<std::string>{"countryEU", "countryGB"}
                                                : std::vector<std::string>{"ideology"};
    for (const auto& frame : frames) {
      try {
        const auto design = stats::build_frame_building_design(ds.records, calls, predictor, frame);
        auto fit = fit_with_fallback(design, stats::Family::Logistic, estimator);
        for (const auto& n : design.report.notes) notes += frame + ": " + n + "\n";
        for (const auto& w : fit.warnings) notes += frame + ": " + w + "\n";
        for (const auto& c : wanted) {
          if (fit.has(c)) focal.push_back({frame, c, fit.coefficient(c)});
        }
        fits[frame] = {{"fit", fit.to_json()}, {"design_notes", design.report.notes}};
        results.emplace(frame, std::move(fit));
      } catch (const Error& e) {
        notes += "skipped " + frame + ": " + e.what() + "\n";
        std::cerr << "skipped " << frame << ": " << e.what() << "\n";
      }
    }
  } else {
    const auto outcome = stats::parse_outcome(a.outcome);
    const auto design = stats::build_frame_setting_design(ds.records, calls, outcome, frames);
    auto fit = fit_with_fallback(design, stats::Family::Linear, estimator);
    for (const auto& n : design.report.notes) notes += n + "\n";
    for (const auto& w : fit.warnings) notes += w + "\n";
    for (const auto& frame : frames) {
      if (fit.has(frame + "1")) {
        focal.push_back({frame, frame + "1", fit.coefficient(frame + "1")});
      } else {
        notes += "frame " + frame + " has no coefficient (dropped from the design)\n";
      }
    }
    fits[design.outcome] = {{"fit", fit.to_json()}, {"design_notes", design.report.notes}};
    results.emplace(design.outcome, std::move(fit));
  }

  std::vector<double> p;
  std::vector<std::string> labels;
  for (const auto& f : focal) {
    p.push_back(f.value.p_value);
    labels.push_back(f.frame + ":" + f.coefficient);
  }
  const auto holm = stats::holm_bonferroni(p, alpha, labels);

  std::vector<report::ResultRow> rows;
  std::map<std::string, report::PlotPanel> panels;
  for (std::size_t i = 0; i < focal.size(); ++i) {
    const auto& f = focal[i];
    rows.push_back({f.frame, f.coefficient, f.value.estimate, f.value.se, holm.raw[i], holm.adjusted[i], holm.reject[i]});
    const std::string panel_key = a.building ? f.coefficient : "frames";
    auto& panel = panels[panel_key];
    if (panel.title.empty()) {
      if (f.coefficient == "countryEU") panel.title = "Effect of author being from the EU";
      else if (f.coefficient == "countryGB") panel.title = "Effect of author being from the UK";
      else if (f.coefficient == "ideology") panel.title = "Effect of conservative ideology";
      else panel.title = "Effect of frame on log " + a.outcome;
    }
    if (holm.reject[i]) panel.points.push_back({schema.find(f.frame)->display_name, f.value.estimate, f.value.se});
  }
  for (const auto& [name, fit] : results) {
    stats::CorrectedResults subset;
    subset.alpha = alpha;
    for (std::size_t i = 0; i < focal.size(); ++i) {
      if (a.setting || focal[i].frame == name) {
        subset.labels.push_back(focal[i].coefficient);
        subset.raw.push_back(holm.raw[i]);
        subset.adjusted.push_back(holm.adjusted[i]);
        subset.reject.push_back(holm.reject[i]);
      }
    }
    const std::string title = a.building ? schema.find(name)->display_name : "Audience response: " + a.outcome;
    io::write_file_atomic(fs::path(a.out) / "tables" / (name + ".txt"),
                          report::format_result_table(fit, subset, legend, title));
  }
  std::vector<report::PlotPanel> ordered;
  for (const char* key : {"countryEU", "countryGB", "ideology", "frames"}) {
    if (panels.contains(key)) ordered.push_back(panels.at(key));
  }
  io::write_file_atomic(fs::path(a.out) / "results.csv", report::results_csv(rows));
  io::write_file_atomic(fs::path(a.out) / "plot.svg", report::dot_plot_svg(ordered, "Coefficient (95% CI)"));
  ordered_json family{{"analysis", a.building ? "frame_building" : "frame_setting"},
                      {"predictor_or_outcome", a.building ? a.predictor : a.outcome},
                      {"estimator", a.estimator},
                      {"alpha", alpha},
                      {"legend", report::legend_name(legend)},
                      {"holm_family", labels}};
  fits["_analysis"] = family;
  io::write_file_atomic(fs::path(a.out) / "fits.json", fits.dump(2) + "\n");
  io::write_file_atomic(fs::path(a.out) / "notes.txt", notes);
  std::size_t survivors = std::count(holm.reject.begin(), holm.reject.end(), true);
  std::cout << "fitted " << results.size() << " model(s); " << survivors << " of " << focal.size()
            << " coefficients survive Holm at alpha " << alpha << "\n";
  run.finish(sub);
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_report(const ReportArgs& a, const CLI::App& sub) {
  Run run{"report", a.out, {}};
  std::string md = "# framelens report\n";
  const auto& schema = load_schema();
  fs::create_directories(a.out);
  std::size_t plots = 0;
  for (const auto& in : a.inputs) {
    run.inputs.emplace_back(in);
    const fs::path dir(in);
    bool used = false;
    if (fs::exists(dir / "comparison.csv")) {
      used = true;
      md += "\n## Model comparison (" + dir.filename().string() + ")\n\n";
      md += "| model | typology | macro-F1 | 95% CI | LRAP |\n|---|---|---|---|---|\n";
      bool header = true;
      io::for_each_line(dir / "comparison.csv", [&](std::size_t, std::string_view line) {
        if (header) {
          header = false;
          return;
        }
        const auto f = io::parse_csv_row(line);
        md += "| " + f.at(0) + " | " + f.at(2) + " | " + f.at(5) + " | [" + f.at(7) + ", " + f.at(8) + "] | " + f.at(9) +
              " |\n";
      });
    }
    if (fs::exists(dir / "results.csv")) {
      used = true;
      md += "\n## Coefficients surviving Holm correction (" + dir.filename().string() + ")\n\n";
      md += "| frame | coefficient | estimate | se | Holm p |\n|---|---|---|---|---|\n";
      std::map<std::string, report::PlotPanel> panels;
      bool header = true;
      io::for_each_line(dir / "results.csv", [&](std::size_t, std::string_view line) {
        if (header) {
          header = false;
          return;
        }
        const auto f = io::parse_csv_row(line);
        if (f.at(6) != "1") return;
        md += "| " + f[0] + " | " + f[1] + " | " + fmt(std::stod(f[2])) + " | " + fmt(std::stod(f[3])) + " | " +
              io::fixed(std::stod(f[5]), 4) + " |\n";
        const Frame* frame = schema.find(f[0]);
        auto& panel = panels[f[1].ends_with("1") ? "frames" : f[1]];
        if (panel.title.empty()) panel.title = f[1].ends_with("1") ? "Frame coefficients" : f[1];
        panel.points.push_back({frame ? frame->display_name : f[0], std::stod(f[2]), std::stod(f[3])});
      });
      std::vector<report::PlotPanel> ordered;
      for (auto& [k, v] : panels) ordered.push_back(v);
      const std::string svg = "plot_" + std::to_string(++plots) + ".svg";
      io::write_file_atomic(fs::path(a.out) / svg, report::dot_plot_svg(ordered, "Coefficient (95% CI)"));
      md += "\n![coefficients](" + svg + ")\n";
    }
    if (!used) throw ConfigurationError("no comparison.csv or results.csv in " + in);
  }
  io::write_file_atomic(fs::path(a.out) / "report.md", md);
  std::cout << "wrote " << (fs::path(a.out) / "report.md").string() << "\n";
  run.finish(sub);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"framelens: frame detection and framing analysis for social media posts"};
  app.set_version_flag("--version", FRAMELENS_VERSION);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  auto seed_option = [](CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "Random seed")->envname("FRAMELENS_SEED")->capture_default_str();
  };

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Filter raw JSONL posts into a dataset directory");
  ingest->add_option("--input", ingest_args.input, "Raw posts, one JSON object per line")->required();
  ingest->add_option("--out", ingest_args.out, "Dataset directory")->required();
  ingest->add_option("--lexicon", ingest_args.lexicon, "JSON {version, terms} replacing the built-in term list");

  AttachArgs attach_args;
  auto* attach = app.add_subcommand("attach-labels", "Merge annotations into gold labels and split the labeled posts");
  attach->add_option("--dataset", attach_args.dataset, "Dataset directory")->required();
  attach->add_option("--annotations", attach_args.annotations, "Annotation JSONL")->required();
  attach->add_option("--adjudications", attach_args.adjudications, "Adjudication JSON list");
  attach->add_option("--out", attach_args.out, "Labeled dataset directory")->required();
  seed_option(attach, attach_args.seed);

  AgreeArgs agree_args;
  auto* agree = app.add_subcommand("agree", "Inter-annotator and human-machine agreement");
  agree->add_option("--annotations", agree_args.annotations, "Annotation JSONL")->required();
  agree->add_option("--predictions", agree_args.predictions, "Prediction CSVs for human-machine agreement");
  agree->add_option("--out", agree_args.out, "Output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train frame classifiers for each seed and mark the best");
  train->add_option("--dataset", train_args.dataset, "Labeled dataset directory")->required();
  train->add_option("--out", train_args.out, "Model directory")->required();
  train->add_option("--kind", train_args.kind, "random, ngram_logreg or transformer")
      ->check(CLI::IsMember({"random", "ngram_logreg", "transformer"}))
      ->capture_default_str();
  train->add_option("--typology", train_args.typology, "issue_generic, issue_specific, narrative or all")
      ->check(CLI::IsMember({"issue_generic", "issue_specific", "narrative", "all"}))
      ->capture_default_str();
  train->add_flag("--joint", train_args.joint, "One model over all 27 frames");
  seed_option(train, train_args.seed);
  train->add_option("--seeds", train_args.seeds, "Seeds to train (default: --seed)")->delimiter(',');
  train->add_option("--threshold", train_args.threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  train->add_option("--l2", train_args.l2, "N-gram model L2 penalty")->capture_default_str();
  train->add_option("--min-count", train_args.min_count, "N-gram minimum training count")->capture_default_str();
  auto& t = train_args.transformer;
  train->add_flag("--domain-adapted", t.domain_adapted, "Run masked-token adaptation before fine-tuning");
  train->add_option("--encoder", t.encoder, "Encoder weights file or init:<seed>")->capture_default_str();
  train->add_option("--max-epochs", t.max_epochs)->capture_default_str();
  train->add_option("--patience", t.patience, "Epochs without dev improvement before stopping")->capture_default_str();
  train->add_option("--learning-rate", t.learning_rate)->capture_default_str();
  train->add_option("--batch-size", t.batch_size)->capture_default_str();
  train->add_option("--max-seq-len", t.max_sequence_length)->capture_default_str();
  train->add_option("--adaptation-epochs", t.adaptation_epochs)->capture_default_str();
  train->add_option("--max-vocab", t.max_vocab)->capture_default_str();
  train->add_option("--d-model", t.encoder_config.d_model)->capture_default_str();
  train->add_option("--heads", t.encoder_config.heads)->capture_default_str();
  train->add_option("--ff", t.encoder_config.ff)->capture_default_str();
  train->add_option("--layers", t.encoder_config.layers)->capture_default_str();

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Score dataset posts with a trained model");
  predict_cmd->add_option("--model", predict_args.model, "Artifact directory or a directory with best.json")->required();
  predict_cmd->add_option("--dataset", predict_args.dataset, "Dataset directory")->required();
  predict_cmd->add_option("--split", predict_args.split, "all, train, dev or test")
      ->check(CLI::IsMember({"all", "train", "dev", "test"}))
      ->capture_default_str();
  predict_cmd->add_option("--out", predict_args.out, "Output directory")->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Per-frame metrics, bootstrap intervals and McNemar tests");
  evaluate->add_option("--dataset", eval_args.dataset, "Labeled dataset directory")->required();
  evaluate->add_option("--model", eval_args.models, "Artifact directories (repeatable)")->required();
  evaluate->add_option("--split", eval_args.split)->check(CLI::IsMember({"train", "dev", "test"}))->capture_default_str();
  evaluate->add_option("--bootstrap", eval_args.bootstrap, "Bootstrap resamples")->capture_default_str();
  evaluate->add_option("--subgroup", eval_args.subgroup, "region or ideology");
  evaluate->add_option("--pairing", eval_args.pairing, "McNemar unit: decision or instance")->capture_default_str();
  evaluate->add_option("--out", eval_args.out, "Output directory")->required();
  seed_option(evaluate, eval_args.seed);

  RegressArgs reg_args;
  auto* regress = app.add_subcommand("regress", "Frame-building or frame-setting regressions with Holm correction");
  regress->add_option("--dataset", reg_args.dataset, "Dataset directory")->required();
  regress->add_option("--predictions", reg_args.predictions, "Prediction CSVs over the corpus")->required();
  regress->add_flag("--building", reg_args.building, "Frames as outcomes of author attributes");
  regress->add_flag("--setting", reg_args.setting, "Engagement as the outcome of frames");
  regress->add_option("--predictor", reg_args.predictor, "region or ideology")->check(CLI::IsMember({"region", "ideology"}));
  regress->add_option("--outcome", reg_args.outcome, "favorites or retweets")->check(CLI::IsMember({"favorites", "retweets"}));
  regress->add_option("--alpha", reg_args.alpha, "Holm level (default 0.01 building, 0.005 setting)")
      ->check(CLI::Range(0.0, 1.0));
  regress->add_option("--estimator", reg_args.estimator, "laplace_random_intercepts or fixed_only")
      ->check(CLI::IsMember({"laplace_random_intercepts", "fixed_only"}))
      ->capture_default_str();
  regress->add_option("--legend", reg_args.legend, "standard or strict significance stars")
      ->check(CLI::IsMember({"standard", "strict"}));
  regress->add_option("--frames", reg_args.frames, "Restrict to these frame ids")->delimiter(',');
  regress->add_option("--min-f1", reg_args.min_f1, "Keep frames whose F1 in --eval-csv exceeds this");
  regress->add_option("--eval-csv", reg_args.eval_csv, "Evaluation CSVs used by --min-f1");
  regress->add_option("--out", reg_args.out, "Output directory")->required();

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Collect evaluation and regression outputs into report.md");
  report_cmd->add_option("--inputs", report_args.inputs, "evaluate or regress output directories")->required();
  report_cmd->add_option("--out", report_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_args, *ingest);
    if (*attach) return cmd_attach(attach_args, *attach);
    if (*agree) return cmd_agree(agree_args, *agree);
    if (*train) return cmd_train(train_args, *train);
    if (*predict_cmd) return cmd_predict(predict_args, *predict_cmd);
    if (*evaluate) return cmd_evaluate(eval_args, *evaluate);
    if (*regress) return cmd_regress(reg_args, *regress);
    if (*report_cmd) return cmd_report(report_args, *report_cmd);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
