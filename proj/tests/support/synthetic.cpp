#include "synthetic.hpp"

#include <cstdio>
#include <map>

#include "framelens/rng.hpp"
#include "framelens/schema.hpp"
#include "json.hpp"

namespace framelens::testing {

namespace {

const std::vector<std::string> kCues = {
    "tariff",    "shelters",  "conscience", "equality",  "courtroom", "prison",    "border",
    "clinic",    "housing",   "heritage",   "poll",      "senate",    "proposal",  "embassy",
    "recession", "refugee",   "warzone",    "racism",    "festival",   "classroom", "farmhand",
    "layoffs",   "gangs",     "taxpayer",   "tradition",  "yesterday", "systemic"};

const std::vector<std::string> kFiller = {
    "the",   "a",      "people", "today",  "news",   "city",   "family", "said",  "new",    "report",
    "we",    "they",   "about",  "story",  "week",   "talk",   "local",  "plan",  "change", "time",
    "long",  "still",  "more",   "other",  "group",  "public", "state",  "party", "vote",   "year",
    "work",  "school", "life",   "open",   "watch",  "read",   "share",  "think", "follow", "home",
    "world", "much",   "very",   "always", "never",  "maybe",  "right",  "left",  "center", "every",
    "night", "early",  "late",   "small",  "big",    "green",  "blue",   "river", "street", "market"};

const std::vector<std::string> kTerms = {"immigration", "immigrants", "migrants", "illegal aliens", "undocumented"};

}  // namespace

const std::string& cue_word(const std::string& frame_id) {
  static const std::map<std::string, std::string> cues = [] {
    std::map<std::string, std::string> m;
    const auto& frames = load_schema().all();
    for (std::size_t i = 0; i < frames.size(); ++i) m[frames[i].id] = kCues.at(i);
    return m;
  }();
  return cues.at(frame_id);
}

std::vector<SyntheticPost> synthetic_posts(const SyntheticOptions& options) {
  Rng rng(options.seed);
  const auto& frames = load_schema().all();
  std::vector<SyntheticPost> out;
  for (std::size_t i = 0; i < options.posts; ++i) {
    SyntheticPost s;
    auto& p = s.post;
    p.post_id = "p" + std::to_string(100000 + i);
    std::vector<std::string> words;
    const auto n_filler = 6 + rng.below(8);
    for (std::uint64_t k = 0; k < n_filler; ++k) words.push_back(kFiller[rng.below(kFiller.size())]);
    words.insert(words.begin() + static_cast<long>(rng.below(words.size() + 1)), kTerms[rng.below(kTerms.size())]);
    for (const auto& f : frames) {
      if (rng.bernoulli(options.cue_rate)) {
        s.frames.insert(f.id);
        words.insert(words.begin() + static_cast<long>(rng.below(words.size() + 1)), cue_word(f.id));
      }
    }
    if (rng.bernoulli(0.3)) words.push_back("#news");
    if (rng.bernoulli(0.3)) words.insert(words.begin(), "@someone");
    if (rng.bernoulli(0.3)) words.push_back("https://example.org/" + std::to_string(i));
    for (std::size_t k = 0; k < words.size(); ++k) p.text += (k ? " " : "") + words[k];

    const int month = 1 + static_cast<int>(rng.below(12));
    const int day = 1 + static_cast<int>(rng.below(28));
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%d-%02d-%02dT%02d:00:00Z", 2018 + static_cast<int>(rng.below(2)), month, day,
                  static_cast<int>(rng.below(24)));
    p.created_at = stamp;
    p.is_reply = rng.bernoulli(0.2);
    p.is_quote = rng.bernoulli(0.15);
    const double u = rng.uniform();
    p.region = u < 0.6 ? Region::US : (u < 0.8 ? Region::GB : Region::EU);
    p.author.followers = rng.below(5000);
    p.author.following = rng.below(2000);
    p.author.statuses = rng.below(20000);
    p.author.verified = rng.bernoulli(0.05);
    if (p.region == Region::US && rng.bernoulli(options.ideology_rate)) p.author.ideology = rng.normal(0.0, 1.0);
    p.favorites = rng.below(50);
    p.retweets = rng.below(20);
    out.push_back(std::move(s));
  }
  return out;
}

std::string raw_jsonl(const std::vector<SyntheticPost>& posts) {
  std::string out;
  for (const auto& s : posts) {
    const auto& p = s.post;
    nlohmann::ordered_json j;
    j["id"] = p.post_id;
    j["text"] = p.text;
    j["created_at"] = p.created_at;
    j["is_retweet"] = p.is_retweet;
    j["is_reply"] = p.is_reply;
    j["is_quote"] = p.is_quote;
    j["region"] = p.region ? nlohmann::ordered_json(std::string(region_code(*p.region))) : nlohmann::ordered_json();
    j["followers"] = p.author.followers;
    j["following"] = p.author.following;
    j["statuses"] = p.author.statuses;
    j["verified"] = p.author.verified;
    j["ideology"] = p.author.ideology ? nlohmann::ordered_json(*p.author.ideology) : nlohmann::ordered_json();
    j["favorites"] = p.favorites;
    j["retweets"] = p.retweets;
    out += j.dump() + "\n";
  }
  return out;
}

std::string annotations_jsonl(const std::vector<SyntheticPost>& posts, const SyntheticOptions& options) {
  std::string out;
  const auto& schema = load_schema();
  for (std::size_t i = 0; i < posts.size(); ++i) {
    std::vector<std::string> coders{"a1"};
    if (options.second_annotator && i % 5 == 0) coders.push_back("a2");
    for (const auto& coder : coders) {
      for (Typology t : kTypologies) {
        std::vector<std::string> ids;
        for (const auto& id : schema.ids(t)) {
          if (posts[i].frames.contains(id)) ids.push_back(id);
        }
        nlohmann::ordered_json j{{"post_id", posts[i].post.post_id},
                                 {"annotator_id", coder},
                                 {"typology", typology_slug(t)},
                                 {"frames", ids}};
        out += j.dump() + "\n";
      }
    }
  }
  return out;
}

}  // namespace framelens::testing
