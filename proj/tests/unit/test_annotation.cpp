#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "framelens/annotation.hpp"
#include "framelens/errors.hpp"
#include "framelens/rng.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace framelens;

namespace {

std::string line(const std::string& post, const std::string& coder, const std::string& typology,
                 const std::vector<std::string>& frames) {
  return nlohmann::json{{"post_id", post}, {"annotator_id", coder}, {"typology", typology}, {"frames", frames}}
             .dump() +
         "\n";
}

}  // namespace

TEST_CASE("two coders over four units give 1 - 0.25 / (30/56)") {
  const auto r = krippendorff_alpha({{1, 1}, {0, 0}, {1, 0}, {0, 0}});
  REQUIRE(r.defined());
  CHECK(*r.alpha == doctest::Approx(1.0 - 0.25 / (30.0 / 56.0)).epsilon(1e-12));
  CHECK(std::abs(*r.alpha - 0.5333333) < 1e-6);
  CHECK(r.n_units == 4);
  CHECK(r.n_values == 8);
}

TEST_CASE("perfect agreement is 1 and constant data is undefined") {
  CHECK(*krippendorff_alpha({{1, 1}, {0, 0}, {1, 1}, {0, 0}}).alpha == doctest::Approx(1.0));
  CHECK_FALSE(krippendorff_alpha({{0, 0}, {0, 0}, {0, 0}}).defined());
}

TEST_CASE("units with fewer than two ratings are ignored") {
  const auto a = krippendorff_alpha({{1, 1}, {0, 0}, {1, 0}, {0, 0}});
  const auto b = krippendorff_alpha({{1, 1}, {0, 0}, {1, 0}, {0, 0}, {1}, {}});
  CHECK(*a.alpha == doctest::Approx(*b.alpha));
  CHECK(b.n_units == 4);
}

TEST_CASE("alpha matches the pairwise oracle on random data with missing ratings") {
  Rng rng(17);
  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n_units = 2 + rng.below(15);
    const auto n_coders = 2 + rng.below(4);
    const int n_values = 2 + static_cast<int>(rng.below(3));
    std::vector<std::vector<int>> units(n_units);
    for (auto& u : units)
      for (std::uint64_t c = 0; c < n_coders; ++c)
        if (rng.bernoulli(0.8)) u.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n_values))));
    const auto got = krippendorff_alpha(units);
    const auto want = testing::oracle_alpha(units);
    REQUIRE(got.defined() == want.has_value());
    if (!want) continue;
    ++compared;
    CHECK(*got.alpha == doctest::Approx(*want).epsilon(1e-10));
    CHECK(*got.alpha <= 1.0 + 1e-12);
  }
  CHECK(compared > 400);
}

TEST_CASE("typology agreement averages defined frames and counts undefined ones") {
  testing::ScratchDir dir("alpha");
  std::string s;
  s += line("p1", "a", "narrative", {"episodic"});
  s += line("p1", "b", "narrative", {"episodic"});
  s += line("p2", "a", "narrative", {});
  s += line("p2", "b", "narrative", {});
  const auto set = load_annotations(dir.write("ann.jsonl", s));
  const auto agr = typology_alpha(set, Typology::Narrative);
  CHECK(agr.mean_alpha == doctest::Approx(1.0));
  CHECK(agr.undefined_count == 1);
  REQUIRE(agr.frames.size() == 2);
  CHECK_FALSE(agr.frames[1].result.defined());
}

TEST_CASE("typology agreement signals when nothing is defined or paired") {
  testing::ScratchDir dir("alpha2");
  std::string s = line("p1", "a", "narrative", {}) + line("p1", "b", "narrative", {});
  CHECK_THROWS_AS(typology_alpha(load_annotations(dir.write("a.jsonl", s)), Typology::Narrative),
                  UndefinedAgreementError);
  std::string single = line("p1", "a", "narrative", {"episodic"}) + line("p2", "a", "narrative", {});
  CHECK_THROWS_AS(typology_alpha(load_annotations(dir.write("b.jsonl", single)), Typology::Narrative),
                  ValidationError);
}

TEST_CASE("annotation keys are unique and labels validated") {
  AnnotationSet set;
  set.add("p", "a", encode_labels({"episodic"}, Typology::Narrative));
  CHECK_THROWS_AS(set.add("p", "a", empty_labels(Typology::Narrative)), ValidationError);
  CHECK_THROWS_AS(set.add("q", "a", LabelVector{Typology::Narrative, {1, 0, 0}}), SchemaMismatchError);
}

TEST_CASE("consensus: unanimous, adjudicated and pending") {
  AnnotationSet set;
  set.add("one", "a", encode_labels({"economic"}, Typology::IssueGenericPolicy));
  set.add("two", "a", encode_labels({"economic"}, Typology::IssueGenericPolicy));
  set.add("two", "b", encode_labels({"economic"}, Typology::IssueGenericPolicy));
  set.add("three", "a", encode_labels({"episodic"}, Typology::Narrative));
  set.add("three", "b", encode_labels({}, Typology::Narrative));
  set.add("four", "a", encode_labels({"thematic"}, Typology::Narrative));
  set.add("four", "b", encode_labels({}, Typology::Narrative));

  const auto merged = consensus_merge(set, {{"three", "episodic", true}});
  std::map<std::string, const ConsensusRecord*> by_id;
  for (const auto& r : merged.records) by_id[r.post_id] = &r;
  REQUIRE(by_id.count("one"));
  CHECK(by_id["one"]->provenance == Provenance::Single);
  REQUIRE(by_id.count("two"));
  CHECK(by_id["two"]->provenance == Provenance::PairConsensus);
  CHECK(by_id["two"]->annotators.size() >= 2);
  CHECK(decode_labels(by_id["two"]->labels.at(Typology::IssueGenericPolicy)) == std::set<std::string>{"economic"});
  REQUIRE(by_id.count("three"));
  CHECK(decode_labels(by_id["three"]->labels.at(Typology::Narrative)) == std::set<std::string>{"episodic"});
  CHECK_FALSE(by_id.count("four"));
  REQUIRE(merged.pending.size() == 1);
  CHECK(merged.pending[0].post_id == "four");
  CHECK(merged.pending[0].frame_id == "thematic");

  CHECK_THROWS_AS(consensus_merge(set, {{"nope", "episodic", true}}), ValidationError);
  CHECK_THROWS_AS(consensus_merge(set, {{"three", "no_frame", true}}), ValidationError);
}

TEST_CASE("consensus JSONL names the provenance") {
  AnnotationSet set;
  set.add("p", "a", encode_labels({"thematic"}, Typology::Narrative));
  const auto text = consensus_jsonl(consensus_merge(set).records);
  const auto j = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(j["provenance"] == "single");
  CHECK(j["labels"]["narrative"] == nlohmann::json::array({"thematic"}));
}

TEST_CASE("human-machine agreement treats the machine as a coder") {
  AnnotationSet set;
  std::map<std::string, LabelVector> machine;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "p" + std::to_string(i);
    const auto labels = encode_labels(i % 2 ? std::set<std::string>{"episodic"} : std::set<std::string>{"thematic"},
                                      Typology::Narrative);
    set.add(id, "h1", labels);
    set.add(id, "h2", labels);
    machine[id] = labels;
  }
  const auto hm = human_machine_alpha(machine, set, Typology::Narrative);
  CHECK(hm.mean_alpha == doctest::Approx(1.0));
  CHECK(hm.per_annotator.size() == 2);
  CHECK(hm.n_posts == 6);
  CHECK_THROWS_AS(human_machine_alpha({}, set, Typology::Narrative), ValidationError);
}
