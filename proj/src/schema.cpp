#include "framelens/schema.hpp"

#include <algorithm>

#include "framelens/errors.hpp"

namespace framelens {

namespace {

struct FrameRow {
  const char* id;
  const char* name;
  const char* description;
};

constexpr FrameRow kIssueGeneric[] = {
    {"economic", "Economic", "Financial implications of an issue"},
    {"capacity_resources", "Capacity & Resources",
     "The availability or lack of time, physical, human, or financial resources"},
    {"morality_ethics", "Morality & Ethics",
     "Perspectives compelled by religion or secular sense of ethics or social responsibility"},
    {"fairness_equality", "Fairness & Equality",
     "The (in)equality with which laws, punishments, rewards, resources are distributed"},
    {"legality_constitutionality_jurisdiction", "Legality, Constitutionality & Jurisdiction",
     "Court cases and existing laws that regulate policies; constitutional interpretation; "
     "legal processes such as seeking asylum or obtaining citizenship; jurisdiction"},
    {"crime_punishment", "Crime & Punishment",
     "The violation of policies in practice and the consequences of those violations"},
    {"security_defense", "Security & Defense",
     "Any threat to a person, group, or nation and defenses taken to avoid that threat"},
    {"health_safety", "Health & Safety",
     "Health and safety outcomes of a policy issue, discussions of health care"},
    {"quality_of_life", "Quality of Life",
     "Effects on people's wealth, mobility, daily routines, community life, happiness, etc."},
    {"cultural_identity", "Cultural Identity",
     "Social norms, trends, values, and customs; integration/assimilation efforts"},
    {"public_sentiment", "Public Sentiment",
     "General social attitudes, protests, polling, interest groups, public passage of laws"},
    {"political_factors_implications", "Political Factors & Implications",
     "Focus on politicians, political parties, governing bodies, political campaigns and "
     "debates; discussions of elections and voting"},
    {"policy_prescription_evaluation", "Policy Prescription & Evaluation",
     "Discussions of existing or proposed policies and their effectiveness"},
    {"external_regulation_reputation", "External Regulation & Reputation",
     "Relations between nations or states/provinces; agreements between governments; "
     "perceptions of one nation/state by another"},
};

constexpr FrameRow kImmigrationSpecific[] = {
    {"victim_global_economy", "Victim: Global Economy",
     "Immigrants are victims of global poverty, underdevelopment and inequality"},
    {"victim_humanitarian", "Victim: Humanitarian",
     "Immigrants experience economic, social, and political suffering and hardships"},
    {"victim_war", "Victim: War", "Focus on war and violent conflict as reason for immigration"},
    {"victim_discrimination", "Victim: Discrimination",
     "Immigrants are victims of racism, xenophobia, and religion-based discrimination"},
    {"hero_cultural_diversity", "Hero: Cultural Diversity",
     "Highlights positive aspects of differences that immigrants bring to society"},
    {"hero_integration", "Hero: Integration",
     "Immigrants successfully adapt and fit into their host society"},
    {"hero_worker", "Hero: Worker",
     "Immigrants contribute to economic prosperity and are an important source of labor"},
    {"threat_jobs", "Threat: Jobs", "Immigrants take nonimmigrants' jobs or lower their wages"},
    {"threat_public_order", "Threat: Public Order",
     "Immigrants threaten public safety by being breaking the law or spreading disease"},
    {"threat_fiscal", "Threat: Fiscal",
     "Immigrants abuse social service programs and are a burden on resources"},
    {"threat_national_cohesion", "Threat: National Cohesion",
     "Immigrants' cultural differences are a threat to national unity and social harmony"},
};

constexpr FrameRow kNarrative[] = {
    {"episodic", "Episodic",
     "Message provides concrete information about on specific people, places, or events"},
    {"thematic", "Thematic",
     "Message is more abstract, placing stories in broader political and social contexts"},
};

constexpr std::size_t kExpectedCounts[] = {14, 11, 2};

std::size_t ordinal(Typology t) { return static_cast<std::size_t>(t); }

}  // namespace

std::string_view typology_slug(Typology t) {
  switch (t) {
    case Typology::IssueGenericPolicy:
      return "issue_generic";
    case Typology::ImmigrationSpecific:
      return "issue_specific";
    case Typology::Narrative:
      return "narrative";
  }
  return "";
}

std::string_view typology_display(Typology t) {
  switch (t) {
    case Typology::IssueGenericPolicy:
      return "Issue-Generic Policy";
    case Typology::ImmigrationSpecific:
      return "Issue-Specific";
    case Typology::Narrative:
      return "Narrative";
  }
  return "";
}

Typology parse_typology(std::string_view slug) {
  for (Typology t : kTypologies) {
    if (typology_slug(t) == slug) return t;
  }
  throw SchemaMismatchError("unknown typology '" + std::string(slug) +
                            "' (expected issue_generic, issue_specific or narrative)");
}

FrameSchema::FrameSchema() {
  auto append = [this](Typology t, std::span<const FrameRow> rows) {
    offsets_[ordinal(t)] = frames_.size();
    for (const auto& row : rows) {
      frames_.push_back(Frame{row.id, t, row.name, row.description});
    }
  };
  append(Typology::IssueGenericPolicy, kIssueGeneric);
  append(Typology::ImmigrationSpecific, kImmigrationSpecific);
  append(Typology::Narrative, kNarrative);
  offsets_[3] = frames_.size();

  for (Typology t : kTypologies) {
    if (count(t) != kExpectedCounts[ordinal(t)]) {
      throw SchemaMismatchError("schema typology " + std::string(typology_slug(t)) + " has " +
                                std::to_string(count(t)) + " frames");
    }
  }
  std::vector<std::string_view> ids;
  for (const auto& f : frames_) ids.push_back(f.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw SchemaMismatchError("duplicate frame id in schema");
  }
}

std::span<const Frame> FrameSchema::frames(Typology t) const {
  const auto i = ordinal(t);
  return std::span<const Frame>(frames_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

const Frame* FrameSchema::find(std::string_view id) const {
  for (const auto& f : frames_) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

std::size_t FrameSchema::index_of(std::string_view id, Typology t) const {
  const auto fs = frames(t);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (fs[i].id == id) return i;
  }
  if (const Frame* other = find(id)) {
    throw SchemaMismatchError("frame '" + std::string(id) + "' belongs to typology " +
                              std::string(typology_slug(other->typology)) + ", not " +
                              std::string(typology_slug(t)));
  }
  throw SchemaMismatchError("unknown frame id '" + std::string(id) + "'");
}

std::vector<std::string> FrameSchema::ids(Typology t) const {
  std::vector<std::string> out;
  for (const auto& f : frames(t)) out.push_back(f.id);
  return out;
}

nlohmann::ordered_json FrameSchema::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& f : frames_) {
    doc.push_back({{"id", f.id},
                   {"typology", typology_slug(f.typology)},
                   {"name", f.display_name},
                   {"description", f.description}});
  }
  return doc;
}

bool FrameSchema::operator==(const FrameSchema& other) const {
  if (frames_.size() != other.frames_.size() || offsets_ != other.offsets_) return false;
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const auto& a = frames_[i];
    const auto& b = other.frames_[i];
    if (a.id != b.id || a.typology != b.typology || a.display_name != b.display_name ||
        a.description != b.description) {
      return false;
    }
  }
  return true;
}

const FrameSchema& load_schema() {
  static const FrameSchema schema;
  return schema;
}

LabelVector encode_labels(const std::set<std::string>& frame_ids, Typology t) {
  const auto& schema = load_schema();
  LabelVector v = empty_labels(t);
  for (const auto& id : frame_ids) v.bits[schema.index_of(id, t)] = 1;
  return v;
}

std::set<std::string> decode_labels(const LabelVector& v) {
  const auto fs = load_schema().frames(v.typology);
  if (v.bits.size() != fs.size()) {
    throw SchemaMismatchError("label vector for " + std::string(typology_slug(v.typology)) +
                              " has length " + std::to_string(v.bits.size()) + ", expected " +
                              std::to_string(fs.size()));
  }
  std::set<std::string> out;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (v.bits[i]) out.insert(fs[i].id);
  }
  return out;
}

LabelVector empty_labels(Typology t) {
  return LabelVector{t, std::vector<std::uint8_t>(load_schema().count(t), 0)};
}

}  // namespace framelens
