#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "framelens/corpus.hpp"
#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "framelens/rng.hpp"
#include "framelens/text.hpp"
#include "scratch.hpp"
#include "synthetic.hpp"

using namespace framelens;

namespace {

// Oracle: split into words (ASCII alnum, '_', any non-ASCII byte), lowercase,
// then look for each term's word sequence as a contiguous run.
std::vector<std::string> oracle_words(const std::string& s) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : s) {
    const bool word = std::isalnum(c) || c == '_' || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

std::set<std::string> oracle_match(const std::string& text, const Lexicon& lex) {
  const auto words = oracle_words(text);
  std::set<std::string> out;
  for (const auto& term : lex.terms) {
    const auto tw = oracle_words(term);
    for (std::size_t i = 0; i + tw.size() <= words.size(); ++i) {
      if (std::equal(tw.begin(), tw.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
        out.insert(term);
        break;
      }
    }
  }
  return out;
}

std::string raw_line(const std::string& id, const std::string& text, const char* region, bool retweet = false) {
  nlohmann::json j{{"id", id},
                   {"text", text},
                   {"created_at", "2018-05-01T10:00:00Z"},
                   {"is_retweet", retweet},
                   {"is_reply", false},
                   {"is_quote", false},
                   {"followers", 10},
                   {"following", 5},
                   {"statuses", 100},
                   {"verified", false},
                   {"favorites", 3},
                   {"retweets", 1}};
  j["region"] = region ? nlohmann::json(region) : nlohmann::json(nullptr);
  return j.dump();
}

}  // namespace

TEST_CASE("keyword_match agrees with a word-sequence oracle on random text") {
  const Lexicon lex{"t", {"border", "wall", "border wall", "migrant", "illegal alien", "visa"}};
  const std::vector<std::string> words{"border", "Border", "WALL", "wall", "walls", "migrant", "migrants",
                                       "illegal", "alien", "visa", "visas", "the", "é", "bordering", "x"};
  const std::vector<std::string> gaps{" ", "  ", "-", ", ", "#", "@", "\n", "'", "...", "é"};
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const auto n = 1 + rng.below(10);
    for (std::uint64_t i = 0; i < n; ++i) {
      if (i > 0 || rng.bernoulli(0.3)) text += gaps[rng.below(gaps.size())];
      text += words[rng.below(words.size())];
    }
    if (rng.bernoulli(0.3)) text += gaps[rng.below(gaps.size())];
    INFO(text);
    CHECK(keyword_match(text, lex) == oracle_match(text, lex));
  }
}

TEST_CASE("keyword_match respects word boundaries") {
  CHECK(keyword_match("Immigration reform now").count("immigration") == 1);
  CHECK(keyword_match("nonimmigrant status").empty());
  CHECK(keyword_match("an ILLEGAL-alien claim").count("illegal alien") == 1);
  CHECK(keyword_match("#immigrants welcome").count("immigrants") == 1);
}

TEST_CASE("normalize_text maps links, mentions and hashtags") {
  const auto toks = text::normalize_text("Hello @Bob see https://t.co/x #Border Wall!");
  CHECK(toks == std::vector<std::string>{"hello", "<user>", "see", "<url>", "#border", "wall"});
  CHECK(text::looks_like_url("bit.ly/abc"));
  CHECK_FALSE(text::looks_like_url("hello"));
}

TEST_CASE("codepoints decode and invalid bytes count once") {
  CHECK(text::codepoint_count("caf\xc3\xa9") == 4);
  CHECK(text::codepoint_count("\xff\xfe") == 2);
}

TEST_CASE("timestamps parse only in UTC forms") {
  CHECK(parse_utc_timestamp("2018-06-19T12:00:00Z") == CivilDate{2018, 6, 19});
  CHECK(parse_utc_timestamp("2018-06-19T12:00:00.123+00:00").has_value());
  CHECK_FALSE(parse_utc_timestamp("2018-13-01T00:00:00Z").has_value());
  CHECK_FALSE(parse_utc_timestamp("yesterday").has_value());
}

TEST_CASE("control features") {
  RawPost p;
  p.text = "#tag @user www.example.com text";
  p.author.followers = 99;
  const auto f = derive_features(p);
  CHECK(f.has_hashtag);
  CHECK(f.has_mention);
  CHECK(f.has_url);
  CHECK(f.log_followers == doctest::Approx(std::log(100.0)));
  CHECK(f.log_chars == doctest::Approx(std::log(1.0 + 31.0)));
}

TEST_CASE("builder filters retweets, regionless, off-topic and malformed lines") {
  CorpusBuilder b;
  b.add_line(raw_line("1", "immigration debate", "US"));
  b.add_line(raw_line("2", "immigration debate", "US", true));
  b.add_line(raw_line("3", "immigration debate", nullptr));
  b.add_line(raw_line("4", "weather report", "GB"));
  b.add_line("{not json");
  b.add_line(raw_line("5", "migrants arrive", "EU"));
  const auto m = b.manifest();
  CHECK(m.input_count == 6);
  CHECK(m.record_count == 2);
  CHECK(m.dropped.retweet == 1);
  CHECK(m.dropped.no_region == 1);
  CHECK(m.dropped.no_keyword == 1);
  CHECK(m.dropped.malformed == 1);
  CHECK(m.input_count == m.record_count + m.dropped.total());
}

TEST_CASE("a later duplicate replaces the earlier record") {
  CorpusBuilder b;
  b.add_line(raw_line("1", "immigration first", "US"));
  b.add_line(raw_line("1", "immigration second", "GB"));
  const auto recs = b.records();
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].text == "immigration second");
  CHECK(recs[0].region == Region::GB);
  const auto m = b.manifest();
  CHECK(m.dropped.duplicate == 1);
  CHECK(m.input_count == m.record_count + m.dropped.total());
}

TEST_CASE("records survive a JSON round trip") {
  CorpusBuilder b;
  b.add_line(raw_line("7", "illegal aliens and immigrants", "US"));
  const auto r = b.records().at(0);
  const auto back = record_from_json(record_to_json(r));
  CHECK(record_to_json(back) == record_to_json(r));
  CHECK(back.matched_terms == std::set<std::string>{"illegal aliens", "immigrants"});
}

TEST_CASE("split of 30 ids is 24/3/3 and seed-stable") {
  std::vector<std::pair<std::string, Region>> ids;
  for (int i = 0; i < 30; ++i) ids.emplace_back("p" + std::to_string(i), Region::US);
  const auto a = split_dataset(ids, 3);
  std::map<Split, int> counts;
  for (const auto& [id, s] : a) ++counts[s];
  CHECK(counts[Split::Train] == 24);
  CHECK(counts[Split::Dev] == 3);
  CHECK(counts[Split::Test] == 3);
  CHECK(split_dataset(ids, 3) == a);
  CHECK(split_dataset(ids, 4) != a);
}

TEST_CASE("split stratifies by region and rejects tiny regions") {
  std::vector<std::pair<std::string, Region>> ids;
  for (int i = 0; i < 20; ++i) ids.emplace_back("u" + std::to_string(i), Region::US);
  for (int i = 0; i < 10; ++i) ids.emplace_back("g" + std::to_string(i), Region::GB);
  const auto a = split_dataset(ids, 1);
  int gb_dev = 0;
  for (const auto& [id, s] : a) gb_dev += id[0] == 'g' && s == Split::Dev;
  CHECK(gb_dev == 1);
  ids.emplace_back("e0", Region::EU);
  CHECK_THROWS_AS(split_dataset(ids, 1), ValidationError);
}

TEST_CASE("ingest writes a reloadable dataset with identical hashes across runs") {
  testing::ScratchDir dir("ingest");
  testing::SyntheticOptions opts;
  opts.posts = 200;
  const auto input = dir.write("raw.jsonl", testing::raw_jsonl(testing::synthetic_posts(opts)));
  const auto m1 = ingest(input, dir / "a");
  const auto m2 = ingest(input, dir / "b");
  CHECK(m1.record_count == 200);
  CHECK(m1.content_hash == m2.content_hash);
  CHECK(io::read_file(dir / "a" / "records.jsonl") == io::read_file(dir / "b" / "records.jsonl"));
  const auto ds = load_dataset(dir / "a");
  CHECK(ds.records.size() == 200);
  CHECK(ds.manifest.to_json() == m1.to_json());
}
