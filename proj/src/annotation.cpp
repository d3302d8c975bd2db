#include "framelens/annotation.hpp"

#include <algorithm>
#include <numeric>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "json.hpp"

namespace framelens {

using nlohmann::json;

void AnnotationSet::add(const std::string& post_id, const std::string& annotator_id, const LabelVector& labels) {
  decode_labels(labels);  // length check
  auto& by_annotator = entries_[labels.typology][post_id];
  if (!by_annotator.emplace(annotator_id, labels).second) {
    throw ValidationError("duplicate annotation for post " + post_id + ", annotator " + annotator_id +
                          ", typology " + std::string(typology_slug(labels.typology)));
  }
}

const std::map<std::string, LabelVector>& AnnotationSet::labels(Typology t, const std::string& post_id) const {
  static const std::map<std::string, LabelVector> kEmpty;
  auto it = entries_.find(t);
  if (it == entries_.end()) return kEmpty;
  auto jt = it->second.find(post_id);
  return jt == it->second.end() ? kEmpty : jt->second;
}

std::vector<std::string> AnnotationSet::posts(Typology t) const {
  std::vector<std::string> out;
  if (auto it = entries_.find(t); it != entries_.end()) {
    for (const auto& [post, _] : it->second) out.push_back(post);
  }
  return out;
}

std::set<std::string> AnnotationSet::posts() const {
  std::set<std::string> out;
  for (const auto& [t, by_post] : entries_) {
    for (const auto& [post, _] : by_post) out.insert(post);
  }
  return out;
}

std::set<std::string> AnnotationSet::annotators() const {
  std::set<std::string> out;
  for (const auto& [t, by_post] : entries_) {
    for (const auto& [post, by_annotator] : by_post) {
      for (const auto& [a, _] : by_annotator) out.insert(a);
    }
  }
  return out;
}

std::map<std::string, std::set<std::string>> AnnotationSet::coverage() const {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [t, by_post] : entries_) {
    for (const auto& [post, by_annotator] : by_post) {
      for (const auto& [a, _] : by_annotator) out[a].insert(post);
    }
  }
  return out;
}

bool AnnotationSet::has(Typology t) const { return entries_.contains(t); }

std::size_t AnnotationSet::size() const {
  std::size_t n = 0;
  for (const auto& [t, by_post] : entries_) {
    for (const auto& [post, by_annotator] : by_post) n += by_annotator.size();
  }
  return n;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  AnnotationSet set;
  io::for_each_line(path, [&](std::size_t n, std::string_view line) {
    try {
      const auto j = json::parse(line);
      const auto t = parse_typology(j.at("typology").get<std::string>());
      std::set<std::string> frames;
      for (const auto& f : j.at("frames")) frames.insert(f.get<std::string>());
      set.add(j.at("post_id").get<std::string>(), j.at("annotator_id").get<std::string>(),
              encode_labels(frames, t));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    } catch (const Error& e) {
      throw ValidationError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  });
  return set;
}

AlphaResult krippendorff_alpha(const std::vector<std::vector<int>>& units) {
  // Category index for the coincidence matrix.
  std::vector<int> categories;
  for (const auto& u : units) {
    if (u.size() >= 2) categories.insert(categories.end(), u.begin(), u.end());
  }
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
  const std::size_t k = categories.size();
  auto index = [&](int v) {
    return static_cast<std::size_t>(std::lower_bound(categories.begin(), categories.end(), v) - categories.begin());
  };

  std::vector<double> coincidence(k * k, 0.0);
  std::vector<double> counts(k);
  AlphaResult result;
  for (const auto& u : units) {
    const std::size_t m = u.size();
    if (m < 2) continue;
    ++result.n_units;
    result.n_values += m;
    std::fill(counts.begin(), counts.end(), 0.0);
    for (int v : u) counts[index(v)] += 1.0;
    const double scale = 1.0 / static_cast<double>(m - 1);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t d = 0; d < k; ++d) {
        const double pairs = c == d ? counts[c] * (counts[c] - 1.0) : counts[c] * counts[d];
        coincidence[c * k + d] += pairs * scale;
      }
    }
  }

  std::vector<double> marginal(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginal[c] += coincidence[c * k + d];
  }
  const double n = std::accumulate(marginal.begin(), marginal.end(), 0.0);
  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      if (c == d) continue;
      observed += coincidence[c * k + d];
      expected += marginal[c] * marginal[d];
    }
  }
  if (n <= 1.0 || expected <= 0.0) return result;
  result.alpha = 1.0 - (n - 1.0) * observed / expected;
  return result;
}

TypologyAgreement typology_alpha(const AnnotationSet& annotations, Typology t) {
  const auto frames = load_schema().frames(t);
  const auto posts = annotations.posts(t);
  if (posts.empty()) {
    throw ValidationError("no annotations for typology " + std::string(typology_slug(t)));
  }

  TypologyAgreement out;
  out.typology = t;
  std::vector<std::vector<int>> pooled_units;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<std::vector<int>> units;
    for (const auto& post : posts) {
      std::vector<int> ratings;
      for (const auto& [annotator, labels] : annotations.labels(t, post)) ratings.push_back(labels.bits[f]);
      units.push_back(ratings);
      pooled_units.push_back(std::move(ratings));
    }
    FrameAlpha fa{frames[f].id, krippendorff_alpha(units)};
    if (fa.result.n_units == 0) {
      throw ValidationError("no overlapping units: no post in " + std::string(typology_slug(t)) +
                            " has two or more annotators");
    }
    if (fa.result.alpha) {
      sum += *fa.result.alpha;
      ++defined;
    } else {
      ++out.undefined_count;
    }
    out.frames.push_back(std::move(fa));
  }
  out.pooled = krippendorff_alpha(pooled_units);
  if (defined == 0) {
    throw UndefinedAgreementError("agreement undefined for every frame of " + std::string(typology_slug(t)));
  }
  out.mean_alpha = sum / static_cast<double>(defined);
  return out;
}

std::vector<Adjudication> load_adjudications(const std::filesystem::path& path) {
  std::vector<Adjudication> out;
  try {
    const auto j = json::parse(io::read_file(path));
    if (!j.is_array()) throw ValidationError("adjudication file must be a JSON list");
    for (const auto& e : j) {
      const auto& v = e.at("value");
      bool value = v.is_boolean() ? v.get<bool>() : v.get<int>() != 0;
      out.push_back({e.at("post_id").get<std::string>(), e.at("frame_id").get<std::string>(), value});
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return out;
}

ConsensusResult consensus_merge(const AnnotationSet& annotations, const std::vector<Adjudication>& adjudications) {
  const auto& schema = load_schema();
  const auto all_posts = annotations.posts();

  std::map<std::pair<std::string, std::string>, bool> overrides;
  for (const auto& a : adjudications) {
    if (!all_posts.contains(a.post_id)) {
      throw ValidationError("adjudication references unknown post " + a.post_id);
    }
    if (!schema.find(a.frame_id)) {
      throw ValidationError("adjudication references unknown frame " + a.frame_id);
    }
    overrides[{a.post_id, a.frame_id}] = a.value;
  }

  ConsensusResult out;
  for (const auto& post : all_posts) {
    ConsensusRecord record{post, {}, Provenance::Single, {}};
    std::set<std::string> coders;
    bool resolved = true;
    for (Typology t : kTypologies) {
      const auto& by_annotator = annotations.labels(t, post);
      if (by_annotator.empty()) continue;
      const auto frames = schema.frames(t);
      LabelVector merged = empty_labels(t);
      std::vector<std::string> names;
      for (const auto& [a, _] : by_annotator) {
        names.push_back(a);
        coders.insert(a);
      }
      for (std::size_t f = 0; f < frames.size(); ++f) {
        std::size_t positives = 0;
        for (const auto& [a, labels] : by_annotator) positives += labels.bits[f];
        const bool unanimous = positives == 0 || positives == by_annotator.size();
        auto adj = overrides.find({post, frames[f].id});
        if (adj != overrides.end()) {
          merged.bits[f] = adj->second;
        } else if (unanimous) {
          merged.bits[f] = positives > 0;
        } else {
          resolved = false;
          out.pending.push_back({post, frames[f].id, names});
        }
      }
      record.labels.emplace(t, std::move(merged));
    }
    if (!resolved) continue;
    record.annotators.assign(coders.begin(), coders.end());
    record.provenance = coders.size() >= 2 ? Provenance::PairConsensus : Provenance::Single;
    out.records.push_back(std::move(record));
  }
  return out;
}

HumanMachineAgreement human_machine_alpha(const std::map<std::string, LabelVector>& predictions,
                                          const AnnotationSet& annotations, Typology t) {
  const std::size_t n_frames = load_schema().count(t);
  std::map<std::string, std::vector<std::pair<const LabelVector*, const LabelVector*>>> pairs;
  std::set<std::string> overlap;
  for (const auto& post : annotations.posts(t)) {
    auto pred = predictions.find(post);
    if (pred == predictions.end()) continue;
    if (pred->second.typology != t || pred->second.bits.size() != n_frames) {
      throw SchemaMismatchError("machine labels for post " + post + " do not match typology " +
                                std::string(typology_slug(t)));
    }
    overlap.insert(post);
    for (const auto& [annotator, labels] : annotations.labels(t, post)) {
      pairs[annotator].emplace_back(&pred->second, &labels);
    }
  }
  if (overlap.empty()) throw ValidationError("predictions do not overlap the annotated posts");

  HumanMachineAgreement out;
  out.n_posts = overlap.size();
  double total = 0.0;
  for (const auto& [annotator, items] : pairs) {
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t f = 0; f < n_frames; ++f) {
      std::vector<std::vector<int>> units;
      for (const auto& [machine, human] : items) units.push_back({machine->bits[f], human->bits[f]});
      if (auto r = krippendorff_alpha(units); r.alpha) {
        sum += *r.alpha;
        ++defined;
      }
    }
    if (defined == 0) continue;
    out.per_annotator[annotator] = sum / static_cast<double>(defined);
    total += out.per_annotator[annotator];
  }
  if (out.per_annotator.empty()) {
    throw UndefinedAgreementError("human-machine agreement undefined for every frame");
  }
  out.mean_alpha = total / static_cast<double>(out.per_annotator.size());
  return out;
}

std::string consensus_jsonl(const std::vector<ConsensusRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["post_id"] = r.post_id;
    j["provenance"] = r.provenance == Provenance::Single ? "single" : "pair_consensus";
    j["annotators"] = r.annotators;
    auto& labels = j["labels"] = nlohmann::ordered_json::object();
    for (const auto& [t, v] : r.labels) {
      std::vector<std::string> ids;
      const auto all = load_schema().ids(t);
      for (std::size_t i = 0; i < v.bits.size(); ++i) {
        if (v.bits[i]) ids.push_back(all[i]);
      }
      labels[std::string(typology_slug(t))] = ids;
    }
    out += j.dump() + "\n";
  }
  return out;
}

GoldLabels load_gold_labels(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigurationError("missing gold labels: " + path.string() + " (run attach-labels first)");
  }
  GoldLabels gold;
  io::for_each_line(path, [&](std::size_t n, std::string_view line) {
    try {
      const auto j = nlohmann::json::parse(line);
      auto& entry = gold[j.at("post_id").get<std::string>()];
      for (const auto& [slug, ids] : j.at("labels").items()) {
        const Typology t = parse_typology(slug);
        entry[t] = encode_labels(ids.get<std::set<std::string>>(), t);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  });
  return gold;
}

}  // namespace framelens
