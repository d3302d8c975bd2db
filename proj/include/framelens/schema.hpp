#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace framelens {

enum class Typology { IssueGenericPolicy, ImmigrationSpecific, Narrative };

inline constexpr std::array<Typology, 3> kTypologies = {
    Typology::IssueGenericPolicy, Typology::ImmigrationSpecific, Typology::Narrative};

/// Machine slug: "issue_generic", "issue_specific", "narrative".
std::string_view typology_slug(Typology t);
std::string_view typology_display(Typology t);
/// Accepts the slug; throws SchemaMismatchError otherwise.
Typology parse_typology(std::string_view slug);

struct Frame {
  std::string id;
  Typology typology;
  std::string display_name;
  std::string description;
};

/// The codebook: 14 issue-generic policy frames, 11 immigration-specific
/// frames and 2 narrative frames, in codebook order within each typology.
/// Immutable after construction.
class FrameSchema {
 public:
  /// Builds and validates the compiled-in registry.
  FrameSchema();

  std::span<const Frame> all() const { return frames_; }
  std::span<const Frame> frames(Typology t) const;
  std::size_t count(Typology t) const { return frames(t).size(); }
  std::size_t size() const { return frames_.size(); }

  const Frame* find(std::string_view id) const;
  /// Position of `id` within its typology. Throws SchemaMismatchError when the
  /// id is unknown or belongs to another typology.
  std::size_t index_of(std::string_view id, Typology t) const;
  std::vector<std::string> ids(Typology t) const;

  nlohmann::ordered_json to_json() const;

  bool operator==(const FrameSchema& other) const;

 private:
  std::vector<Frame> frames_;
  std::array<std::size_t, 4> offsets_{};
};

/// Shared process-wide schema instance.
const FrameSchema& load_schema();

struct LabelVector {
  Typology typology;
  std::vector<std::uint8_t> bits;

  bool operator==(const LabelVector&) const = default;
};

LabelVector encode_labels(const std::set<std::string>& frame_ids, Typology t);
std::set<std::string> decode_labels(const LabelVector& v);
LabelVector empty_labels(Typology t);

}  // namespace framelens
