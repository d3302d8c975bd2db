#include <set>
#include <string>

#include "doctest.h"
#include "framelens/errors.hpp"
#include "framelens/schema.hpp"

using namespace framelens;

TEST_CASE("codebook sizes per typology") {
  const auto& s = load_schema();
  CHECK(s.count(Typology::IssueGenericPolicy) == 14);
  CHECK(s.count(Typology::ImmigrationSpecific) == 11);
  CHECK(s.count(Typology::Narrative) == 2);
  CHECK(s.size() == 27);
}

TEST_CASE("frame ids are unique and typology-ordered") {
  const auto& s = load_schema();
  std::set<std::string> seen;
  std::size_t pos = 0;
  for (Typology t : kTypologies) {
    for (const auto& f : s.frames(t)) {
      CHECK(f.typology == t);
      CHECK(seen.insert(f.id).second);
      CHECK(s.all()[pos].id == f.id);
      ++pos;
    }
  }
  CHECK(s.ids(Typology::Narrative) == std::vector<std::string>{"episodic", "thematic"});
  CHECK(s.ids(Typology::IssueGenericPolicy).front() == "economic");
}

TEST_CASE("index_of rejects unknown and cross-typology ids") {
  const auto& s = load_schema();
  CHECK(s.index_of("thematic", Typology::Narrative) == 1);
  CHECK_THROWS_AS(s.index_of("thematic", Typology::IssueGenericPolicy), SchemaMismatchError);
  CHECK_THROWS_AS(s.index_of("no_such_frame", Typology::Narrative), SchemaMismatchError);
  CHECK(s.find("no_such_frame") == nullptr);
}

TEST_CASE("typology slugs round-trip") {
  for (Typology t : kTypologies) CHECK(parse_typology(typology_slug(t)) == t);
  CHECK_THROWS_AS(parse_typology("policy"), SchemaMismatchError);
}

TEST_CASE("label vectors round-trip through frame id sets") {
  const std::set<std::string> ids{"victim_war", "threat_jobs"};
  const LabelVector v = encode_labels(ids, Typology::ImmigrationSpecific);
  CHECK(v.bits.size() == 11);
  CHECK(decode_labels(v) == ids);
  CHECK_THROWS_AS(encode_labels({"economic"}, Typology::ImmigrationSpecific), SchemaMismatchError);
  CHECK(decode_labels(empty_labels(Typology::Narrative)).empty());
}

TEST_CASE("schema JSON lists all frames in order") {
  const auto j = load_schema().to_json();
  REQUIRE(j.is_array());
  CHECK(j.size() == 27);
  CHECK(j[26]["id"] == "thematic");
  CHECK(FrameSchema() == load_schema());
}
