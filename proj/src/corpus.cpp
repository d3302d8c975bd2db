#include "framelens/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "framelens/rng.hpp"
#include "framelens/text.hpp"

namespace framelens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view region_code(Region r) {
  switch (r) {
    case Region::US:
      return "US";
    case Region::GB:
      return "GB";
    case Region::EU:
      return "EU";
  }
  return "";
}

std::optional<Region> parse_region(std::string_view code) {
  if (code == "US") return Region::US;
  if (code == "GB") return Region::GB;
  if (code == "EU") return Region::EU;
  return std::nullopt;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Dev:
      return "dev";
    case Split::Test:
      return "test";
  }
  return "";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

namespace {

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int days_in_month(int year, int month) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return month == 2 && leap ? 29 : kDays[month - 1];
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

bool get_bool(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_boolean()) throw ValidationError(std::string("field '") + key + "' must be boolean");
  return v.get<bool>();
}

std::uint64_t get_count(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ValidationError(std::string("field '") + key + "' must be a nonnegative integer");
}

std::string get_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<double> get_ideology(const json& j) {
  auto it = j.find("ideology");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ValidationError("field 'ideology' must be a number or null");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ValidationError("field 'ideology' must be finite");
  return v;
}

double log1p_count(std::uint64_t n) { return std::log(1.0 + static_cast<double>(n)); }

}  // namespace

std::optional<CivilDate> parse_utc_timestamp(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  const std::string_view parts[] = {s.substr(0, 4), s.substr(5, 2),  s.substr(8, 2),
                                    s.substr(11, 2), s.substr(14, 2), s.substr(17, 2)};
  int v[6];
  for (int i = 0; i < 6; ++i) {
    if (!all_digits(parts[i]) || !parse_int(parts[i], v[i])) return std::nullopt;
  }
  if (v[1] < 1 || v[1] > 12 || v[2] < 1 || v[2] > days_in_month(v[0], v[1]) || v[3] > 23 || v[4] > 59 ||
      v[5] > 60) {
    return std::nullopt;
  }
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    std::size_t n = 0;
    while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
    if (n == 0) return std::nullopt;
    rest.remove_prefix(n);
  }
  if (!(rest.empty() || rest == "Z" || rest == "+00:00" || rest == "+0000")) return std::nullopt;
  return CivilDate{v[0], v[1], v[2]};
}

RawPost parse_raw_post(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  RawPost p;
  p.post_id = get_string(j, "id");
  if (p.post_id.empty()) throw ValidationError("field 'id' is empty");
  p.text = get_string(j, "text");
  p.created_at = get_string(j, "created_at");
  if (!parse_utc_timestamp(p.created_at)) throw ValidationError("field 'created_at' is not ISO-8601 UTC");
  p.is_retweet = get_bool(j, "is_retweet");
  p.is_reply = get_bool(j, "is_reply");
  p.is_quote = get_bool(j, "is_quote");
  if (auto it = j.find("region"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("field 'region' must be a string or null");
    p.region = parse_region(it->get<std::string>());
  }
  p.author.followers = get_count(j, "followers");
  p.author.following = get_count(j, "following");
  p.author.statuses = get_count(j, "statuses");
  p.author.verified = get_bool(j, "verified");
  p.author.ideology = get_ideology(j);
  p.favorites = get_count(j, "favorites");
  p.retweets = get_count(j, "retweets");
  return p;
}

ControlFeatures derive_features(const RawPost& post) {
  ControlFeatures f;
  std::size_t i = 0;
  const std::string_view t = post.text;
  while (i < t.size()) {
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    const std::size_t start = i;
    while (i < t.size() && !std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    if (i == start) break;
    const auto token = t.substr(start, i - start);
    if (token.front() == '#') f.has_hashtag = true;
    if (token.front() == '@') f.has_mention = true;
    if (text::looks_like_url(token)) f.has_url = true;
  }
  f.log_chars = log1p_count(text::codepoint_count(post.text));
  f.log_followers = log1p_count(post.author.followers);
  f.log_following = log1p_count(post.author.following);
  f.log_statuses = log1p_count(post.author.statuses);
  return f;
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon{
      "immigration-2018-v1",
      {"immigration", "immigrant", "immigrants", "emigration", "emigrant", "emigrants", "migration",
       "migrant", "migrants", "illegal alien", "illegal aliens", "illegals", "undocumented"}};
  return lexicon;
}

std::set<std::string> keyword_match(std::string_view input, const Lexicon& lexicon) {
  // Collapse every non-word run to one space so multiword entries and
  // boundaries reduce to a padded substring search.
  std::string folded = " ";
  bool in_gap = true;
  for (std::size_t pos = 0; pos < input.size();) {
    const std::size_t start = pos;
    const char32_t c = text::next_codepoint(input, pos);
    if (text::is_word_codepoint(c)) {
      folded.append(input.substr(start, pos - start));
      in_gap = false;
    } else if (!in_gap) {
      folded.push_back(' ');
      in_gap = true;
    }
  }
  if (!in_gap) folded.push_back(' ');
  folded = text::ascii_lower(folded);

  std::set<std::string> hits;
  for (const auto& term : lexicon.terms) {
    if (folded.find(" " + text::ascii_lower(term) + " ") != std::string::npos) hits.insert(term);
  }
  return hits;
}

ordered_json record_to_json(const PostRecord& r) {
  ordered_json j;
  j["id"] = r.post_id;
  j["text"] = r.text;
  j["created_at"] = r.created_at;
  j["is_retweet"] = false;
  j["is_reply"] = r.is_reply;
  j["is_quote"] = r.is_quote;
  j["region"] = region_code(r.region);
  j["followers"] = r.author.followers;
  j["following"] = r.author.following;
  j["statuses"] = r.author.statuses;
  j["verified"] = r.author.verified;
  j["ideology"] = r.author.ideology ? ordered_json(*r.author.ideology) : ordered_json(nullptr);
  j["favorites"] = r.favorites;
  j["retweets"] = r.retweets;
  j["has_hashtag"] = r.controls.has_hashtag;
  j["has_mention"] = r.controls.has_mention;
  j["has_url"] = r.controls.has_url;
  j["log_chars"] = r.controls.log_chars;
  j["log_followers"] = r.controls.log_followers;
  j["log_following"] = r.controls.log_following;
  j["log_statuses"] = r.controls.log_statuses;
  j["matched_terms"] = r.matched_terms;
  return j;
}

PostRecord record_from_json(const json& j) {
  const RawPost raw = parse_raw_post(j);
  if (!raw.region) throw ValidationError("stored record " + raw.post_id + " has no region");
  PostRecord r;
  r.post_id = raw.post_id;
  r.text = raw.text;
  r.created_at = raw.created_at;
  r.date = *parse_utc_timestamp(raw.created_at);
  r.is_reply = raw.is_reply;
  r.is_quote = raw.is_quote;
  r.region = *raw.region;
  r.author = raw.author;
  r.favorites = raw.favorites;
  r.retweets = raw.retweets;
  // Controls are recomputed rather than trusted from the file.
  r.controls = derive_features(raw);
  for (const auto& t : require(j, "matched_terms")) r.matched_terms.insert(t.get<std::string>());
  return r;
}

ordered_json CorpusManifest::to_json() const {
  ordered_json j;
  j["input_count"] = input_count;
  j["record_count"] = record_count;
  j["by_region"] = by_region;
  j["by_split"] = by_split;
  j["lexicon_version"] = lexicon_version;
  j["dropped"] = {{"retweet", dropped.retweet},
                  {"no_region", dropped.no_region},
                  {"no_keyword", dropped.no_keyword},
                  {"malformed", dropped.malformed},
                  {"duplicate", dropped.duplicate}};
  j["warnings"] = warnings;
  j["content_hash"] = content_hash;
  return j;
}

CorpusManifest CorpusManifest::from_json(const json& j) {
  CorpusManifest m;
  m.input_count = j.at("input_count").get<std::uint64_t>();
  m.record_count = j.at("record_count").get<std::uint64_t>();
  m.by_region = j.at("by_region").get<std::map<std::string, std::uint64_t>>();
  m.by_split = j.at("by_split").get<std::map<std::string, std::uint64_t>>();
  m.lexicon_version = j.at("lexicon_version").get<std::string>();
  const auto& d = j.at("dropped");
  m.dropped = DropCounts{d.at("retweet").get<std::uint64_t>(), d.at("no_region").get<std::uint64_t>(),
                         d.at("no_keyword").get<std::uint64_t>(), d.at("malformed").get<std::uint64_t>(),
                         d.at("duplicate").get<std::uint64_t>()};
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  m.content_hash = j.at("content_hash").get<std::string>();
  return m;
}

CorpusBuilder::CorpusBuilder(const Lexicon& lexicon) : lexicon_(lexicon) {}

void CorpusBuilder::count(Fate fate, int delta) {
  auto bump = [delta](std::uint64_t& c) { c = static_cast<std::uint64_t>(static_cast<std::int64_t>(c) + delta); };
  switch (fate) {
    case Fate::Stored:
      break;
    case Fate::Retweet:
      bump(dropped_.retweet);
      break;
    case Fate::NoRegion:
      bump(dropped_.no_region);
      break;
    case Fate::NoKeyword:
      bump(dropped_.no_keyword);
      break;
    case Fate::Malformed:
      bump(dropped_.malformed);
      break;
  }
}

void CorpusBuilder::add(const RawPost& post) {
  ++input_count_;
  Fate fate = Fate::Stored;
  std::set<std::string> hits;
  if (post.is_retweet) {
    fate = Fate::Retweet;
  } else if (!post.region) {
    fate = Fate::NoRegion;
  } else {
    hits = keyword_match(post.text, lexicon_);
    if (hits.empty()) fate = Fate::NoKeyword;
  }

  std::optional<PostRecord> record;
  if (fate == Fate::Stored) {
    PostRecord r;
    r.post_id = post.post_id;
    r.text = post.text;
    r.created_at = post.created_at;
    r.date = parse_utc_timestamp(post.created_at).value_or(CivilDate{});
    r.is_reply = post.is_reply;
    r.is_quote = post.is_quote;
    r.region = *post.region;
    r.author = post.author;
    r.favorites = post.favorites;
    r.retweets = post.retweets;
    r.controls = derive_features(post);
    r.matched_terms = std::move(hits);
    record = std::move(r);
  }

  auto it = by_id_.find(post.post_id);
  if (it == by_id_.end()) {
    by_id_.emplace(post.post_id, std::make_pair(slots_.size(), fate));
    slots_.push_back(std::move(record));
  } else {
    auto& [slot, previous] = it->second;
    count(previous, -1);
    ++dropped_.duplicate;
    warnings_.push_back("duplicate post id " + post.post_id + ": later record replaces earlier");
    slots_[slot] = std::move(record);
    previous = fate;
  }
  count(fate, +1);
}

void CorpusBuilder::add_line(std::string_view line) {
  RawPost post;
  try {
    post = parse_raw_post(json::parse(line));
  } catch (const std::exception&) {
    ++input_count_;
    ++dropped_.malformed;
    return;
  }
  add(post);
}

std::vector<PostRecord> CorpusBuilder::records() const {
  std::vector<PostRecord> out;
  for (const auto& slot : slots_) {
    if (slot) out.push_back(*slot);
  }
  return out;
}

std::string records_jsonl(const std::vector<PostRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

CorpusManifest CorpusBuilder::manifest() const {
  CorpusManifest m;
  m.input_count = input_count_;
  m.lexicon_version = lexicon_.version;
  m.dropped = dropped_;
  m.warnings = warnings_;
  const auto recs = records();
  m.record_count = recs.size();
  for (Region r : {Region::US, Region::GB, Region::EU}) m.by_region[std::string(region_code(r))] = 0;
  for (const auto& r : recs) ++m.by_region[std::string(region_code(r.region))];
  m.content_hash = io::sha256_hex(records_jsonl(recs));
  return m;
}

CorpusManifest ingest(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                      const Lexicon& lexicon) {
  CorpusBuilder builder(lexicon);
  io::for_each_line(input, [&](std::size_t, std::string_view line) { builder.add_line(line); });
  const auto records = builder.records();
  const auto manifest = builder.manifest();
  std::filesystem::create_directories(out_dir);
  io::write_file_atomic(out_dir / "records.jsonl", records_jsonl(records));
  io::write_file_atomic(out_dir / "splits.json", "{}\n");
  io::write_file_atomic(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = CorpusManifest::from_json(json::parse(io::read_file(dir / "manifest.json")));
  io::for_each_line(dir / "records.jsonl", [&](std::size_t n, std::string_view line) {
    try {
      ds.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError("records.jsonl line " + std::to_string(n) + ": " + e.what());
    }
  });
  if (std::filesystem::exists(dir / "splits.json")) {
    const auto splits = json::parse(io::read_file(dir / "splits.json"));
    for (auto& r : ds.records) {
      if (auto it = splits.find(r.post_id); it != splits.end()) r.split = parse_split(it->get<std::string>());
    }
  }
  return ds;
}

void write_splits(const std::filesystem::path& dir, const std::map<std::string, Split>& splits) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, s] : splits) j[id] = split_name(s);
  io::write_file_atomic(dir / "splits.json", j.dump(2) + "\n");

  auto manifest = CorpusManifest::from_json(json::parse(io::read_file(dir / "manifest.json")));
  manifest.by_split = {{"train", 0}, {"dev", 0}, {"test", 0}};
  for (const auto& [id, s] : splits) ++manifest.by_split[std::string(split_name(s))];
  io::write_file_atomic(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

std::map<std::string, Split> split_dataset(const std::vector<std::pair<std::string, Region>>& ids,
                                           std::uint64_t seed) {
  std::map<Region, std::vector<std::string>> by_region;
  for (const auto& [id, region] : ids) by_region[region].push_back(id);

  Rng rng(seed);
  std::map<std::string, Split> out;
  for (auto& [region, members] : by_region) {
    if (members.size() < 10) {
      throw ValidationError("region " + std::string(region_code(region)) + " has " +
                            std::to_string(members.size()) + " records; stratified split needs at least 10");
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    rng.shuffle(std::span<std::string>(members));
    const std::size_t tenth = members.size() / 10;
    for (std::size_t i = 0; i < members.size(); ++i) {
      out[members[i]] = i < tenth ? Split::Dev : i < 2 * tenth ? Split::Test : Split::Train;
    }
  }
  return out;
}

}  // namespace framelens
