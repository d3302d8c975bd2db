#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace framelens {

enum class Region { US, GB, EU };

std::string_view region_code(Region r);
std::optional<Region> parse_region(std::string_view code);

enum class Split { Train, Dev, Test };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const CivilDate&) const = default;
};

/// Parses "YYYY-MM-DDTHH:MM:SS[.fff](Z|+00:00)?" in UTC. Returns nullopt on malformed input.
std::optional<CivilDate> parse_utc_timestamp(std::string_view iso);

struct AuthorMeta {
  std::uint64_t followers = 0;
  std::uint64_t following = 0;
  std::uint64_t statuses = 0;
  bool verified = false;
  std::optional<double> ideology;
};

struct RawPost {
  std::string post_id;
  std::string text;
  std::string created_at;
  bool is_retweet = false;
  bool is_reply = false;
  bool is_quote = false;
  std::optional<Region> region;
  AuthorMeta author;
  std::uint64_t favorites = 0;
  std::uint64_t retweets = 0;
};

/// Parses one input line. Throws ValidationError describing the first problem.
RawPost parse_raw_post(const nlohmann::json& line);

struct ControlFeatures {
  bool has_hashtag = false;
  bool has_mention = false;
  bool has_url = false;
  double log_chars = 0.0;
  double log_followers = 0.0;
  double log_following = 0.0;
  double log_statuses = 0.0;

  bool operator==(const ControlFeatures&) const = default;
};

ControlFeatures derive_features(const RawPost& post);

struct PostRecord {
  std::string post_id;
  std::string text;
  std::string created_at;
  CivilDate date;
  bool is_reply = false;
  bool is_quote = false;
  Region region = Region::US;
  AuthorMeta author;
  std::uint64_t favorites = 0;
  std::uint64_t retweets = 0;
  ControlFeatures controls;
  std::set<std::string> matched_terms;
  std::optional<Split> split;
};

nlohmann::ordered_json record_to_json(const PostRecord& r);
PostRecord record_from_json(const nlohmann::json& j);

struct Lexicon {
  std::string version;
  std::vector<std::string> terms;
};

/// The immigration term list used for corpus collection.
const Lexicon& default_lexicon();

/// Every lexicon entry occurring case-insensitively at word boundaries.
/// Multiword entries match contiguous words separated by any non-word run.
std::set<std::string> keyword_match(std::string_view text, const Lexicon& lexicon = default_lexicon());

struct DropCounts {
  std::uint64_t retweet = 0;
  std::uint64_t no_region = 0;
  std::uint64_t no_keyword = 0;
  std::uint64_t malformed = 0;
  std::uint64_t duplicate = 0;

  std::uint64_t total() const { return retweet + no_region + no_keyword + malformed + duplicate; }
};

struct CorpusManifest {
  std::uint64_t input_count = 0;
  std::uint64_t record_count = 0;
  std::map<std::string, std::uint64_t> by_region;
  std::map<std::string, std::uint64_t> by_split;
  std::string lexicon_version;
  DropCounts dropped;
  std::vector<std::string> warnings;
  std::string content_hash;

  nlohmann::ordered_json to_json() const;
  static CorpusManifest from_json(const nlohmann::json& j);
};

/// Streaming filter over raw posts. Retains a post iff it is not a retweet,
/// carries a region, and matches the lexicon. A later post with an existing
/// id replaces the earlier one (the earlier is counted as a duplicate drop).
class CorpusBuilder {
 public:
  explicit CorpusBuilder(const Lexicon& lexicon = default_lexicon());

  void add(const RawPost& post);
  /// Feed one raw JSON line; malformed lines are counted, never thrown.
  void add_line(std::string_view line);

  std::vector<PostRecord> records() const;
  CorpusManifest manifest() const;

 private:
  enum class Fate { Stored, Retweet, NoRegion, NoKeyword, Malformed };

  void count(Fate fate, int delta);

  Lexicon lexicon_;
  std::vector<std::optional<PostRecord>> slots_;
  std::map<std::string, std::pair<std::size_t, Fate>> by_id_;  // id -> (slot, fate)
  std::uint64_t input_count_ = 0;
  DropCounts dropped_;
  std::vector<std::string> warnings_;
};

/// Serialized records.jsonl content for a record list.
std::string records_jsonl(const std::vector<PostRecord>& records);

struct Dataset {
  std::vector<PostRecord> records;
  CorpusManifest manifest;
};

/// Reads a raw JSONL file into a dataset directory {records.jsonl, manifest.json, splits.json}.
CorpusManifest ingest(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                      const Lexicon& lexicon = default_lexicon());

Dataset load_dataset(const std::filesystem::path& dir);

/// Rewrites splits.json and the manifest split counts.
void write_splits(const std::filesystem::path& dir, const std::map<std::string, Split>& splits);

/// Stratified 80/10/10 split: within each region, ids are sorted, shuffled
/// under `seed`, then the first floor(n/10) go to dev and the next floor(n/10)
/// to test. Throws ValidationError when a present region has fewer than 10 ids.
std::map<std::string, Split> split_dataset(const std::vector<std::pair<std::string, Region>>& ids,
                                           std::uint64_t seed);

}  // namespace framelens
