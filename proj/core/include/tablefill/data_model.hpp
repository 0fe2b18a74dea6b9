#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tablefill {

// Word indices are 0-based and end-exclusive everywhere in this library.
struct EntityAnnotation {
  int start = 0;
  int end = 0;
  std::string etype;

  int length() const { return end - start; }
  bool operator==(const EntityAnnotation&) const = default;
};

// head/tail index into Sentence::entities (head is arg0, tail is arg1).
struct RelationAnnotation {
  int head = 0;
  int tail = 0;
  std::string rtype;

  bool operator==(const RelationAnnotation&) const = default;
};

struct Sentence {
  std::vector<std::string> words;
  std::vector<EntityAnnotation> entities;
  std::vector<RelationAnnotation> relations;

  int size() const { return static_cast<int>(words.size()); }
  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;

  bool operator==(const Document&) const = default;
};

using Corpus = std::vector<Document>;

class CorpusError : public std::runtime_error {
 public:
  enum class Kind {
    kParse,
    kIllFormedSpan,
    kOverlappingEntities,
    kDanglingRelation,
    kSelfRelation,
    kUnknownType,
    kEmptySentence,
    kDuplicateDocument,
    kEmptyCorpus,
    kIo,
  };

  CorpusError(Kind kind, std::size_t line, const std::string& what);

  Kind kind() const { return kind_; }
  // 1-based line of the offending document; 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

enum class Bilou { kBegin = 0, kInside = 1, kLast = 2, kUnit = 3 };
enum class Direction { kForward, kBackward };

// Entity label set: O plus {B,I,L,U} x entity types.
// Relation label set: the negative label plus {->r, <-r} for every relation type.
// Ids are positional: O = 0, B/I/L/U-t = 1 + 4t + tag; NONE = 0, ->r = 1 + 2r, <-r = 2 + 2r.
class LabelSchema {
 public:
  static constexpr int kOutside = 0;
  static constexpr int kNoRelation = 0;
  static constexpr std::string_view kNoRelationName = "NONE";

  LabelSchema() = default;
  LabelSchema(std::vector<std::string> entity_types, std::vector<std::string> relation_types);

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& relation_types() const { return relation_types_; }

  int num_entity_labels() const { return 4 * static_cast<int>(entity_types_.size()) + 1; }
  int num_relation_labels() const { return 2 * static_cast<int>(relation_types_.size()) + 1; }

  std::optional<int> entity_type_id(std::string_view name) const;
  std::optional<int> relation_type_id(std::string_view name) const;

  int entity_label(Bilou tag, int type) const;
  // Tag and type of a non-O label; nullopt for O.
  std::optional<Bilou> tag_of(int label) const;
  int type_of(int label) const;

  int relation_label(int rtype, Direction dir) const;
  // Relation type and direction of a non-negative label; nullopt for NONE.
  std::optional<std::pair<int, Direction>> relation_of(int label) const;

  std::string entity_label_name(int label) const;
  std::string relation_label_name(int label) const;
  int entity_label_id(std::string_view name) const;
  int relation_label_id(std::string_view name) const;

  nlohmann::json to_json() const;
  static LabelSchema from_json(const nlohmann::json& j);

  bool operator==(const LabelSchema&) const = default;

 private:
  std::vector<std::string> entity_types_;
  std::vector<std::string> relation_types_;
};

// Validates one sentence against the structural invariants (and the schema, when given).
// Throws CorpusError tagged with `line`.
void validate_sentence(const Sentence& sentence, const LabelSchema* schema, std::size_t line = 0);

Document document_from_json(const nlohmann::json& j, const LabelSchema* schema, std::size_t line = 0);
nlohmann::json document_to_json(const Document& doc);

Corpus read_corpus(std::istream& in, const LabelSchema* schema = nullptr);
Corpus load_corpus(const std::filesystem::path& path, const LabelSchema* schema = nullptr);
inline Corpus load_corpus(const std::filesystem::path& path, const LabelSchema& schema) {
  return load_corpus(path, &schema);
}

// One canonical JSON line per document (sorted keys, compact separators).
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Sorted sets of observed entity and relation types.
LabelSchema schema_from_corpus(const Corpus& corpus);

}  // namespace tablefill
