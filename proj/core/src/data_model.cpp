#include "tablefill/data_model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace tablefill {

namespace {

std::string at_line(std::size_t line) {
  return line == 0 ? std::string() : "line " + std::to_string(line) + ": ";
}

void require_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw std::invalid_argument(std::string("empty ") + what + " name");
    if (!seen.insert(n).second) throw std::invalid_argument(std::string("duplicate ") + what + ": " + n);
  }
}

constexpr std::string_view kTagLetters = "BILU";

}  // namespace

CorpusError::CorpusError(Kind kind, std::size_t line, const std::string& what)
    : std::runtime_error(at_line(line) + what), kind_(kind), line_(line) {}

LabelSchema::LabelSchema(std::vector<std::string> entity_types, std::vector<std::string> relation_types)
    : entity_types_(std::move(entity_types)), relation_types_(std::move(relation_types)) {
  require_unique(entity_types_, "entity type");
  require_unique(relation_types_, "relation type");
}

std::optional<int> LabelSchema::entity_type_id(std::string_view name) const {
  auto it = std::find(entity_types_.begin(), entity_types_.end(), name);
  if (it == entity_types_.end()) return std::nullopt;
  return static_cast<int>(it - entity_types_.begin());
}

std::optional<int> LabelSchema::relation_type_id(std::string_view name) const {
  auto it = std::find(relation_types_.begin(), relation_types_.end(), name);
  if (it == relation_types_.end()) return std::nullopt;
  return static_cast<int>(it - relation_types_.begin());
}

int LabelSchema::entity_label(Bilou tag, int type) const {
  if (type < 0 || type >= static_cast<int>(entity_types_.size())) {
    throw std::out_of_range("entity type id out of range: " + std::to_string(type));
  }
  return 1 + 4 * type + static_cast<int>(tag);
}

std::optional<Bilou> LabelSchema::tag_of(int label) const {
  if (label < 0 || label >= num_entity_labels()) {
    throw std::out_of_range("entity label id out of range: " + std::to_string(label));
  }
  if (label == kOutside) return std::nullopt;
  return static_cast<Bilou>((label - 1) % 4);
}

int LabelSchema::type_of(int label) const {
  if (label <= 0 || label >= num_entity_labels()) {
    throw std::out_of_range("label has no entity type: " + std::to_string(label));
  }
  return (label - 1) / 4;
}

int LabelSchema::relation_label(int rtype, Direction dir) const {
  if (rtype < 0 || rtype >= static_cast<int>(relation_types_.size())) {
    throw std::out_of_range("relation type id out of range: " + std::to_string(rtype));
  }
  return 1 + 2 * rtype + (dir == Direction::kBackward ? 1 : 0);
}

std::optional<std::pair<int, Direction>> LabelSchema::relation_of(int label) const {
  if (label < 0 || label >= num_relation_labels()) {
    throw std::out_of_range("relation label id out of range: " + std::to_string(label));
  }
  if (label == kNoRelation) return std::nullopt;
  return std::make_pair((label - 1) / 2, (label - 1) % 2 == 0 ? Direction::kForward : Direction::kBackward);
}

std::string LabelSchema::entity_label_name(int label) const {
  auto tag = tag_of(label);
  if (!tag) return "O";
  return std::string(1, kTagLetters[static_cast<int>(*tag)]) + "-" + entity_types_[type_of(label)];
}

std::string LabelSchema::relation_label_name(int label) const {
  auto rel = relation_of(label);
  if (!rel) return std::string(kNoRelationName);
  return (rel->second == Direction::kForward ? "->" : "<-") + relation_types_[rel->first];
}

int LabelSchema::entity_label_id(std::string_view name) const {
  if (name == "O") return kOutside;
  if (name.size() > 2 && name[1] == '-') {
    auto tag = kTagLetters.find(name[0]);
    auto type = entity_type_id(name.substr(2));
    if (tag != std::string_view::npos && type) return entity_label(static_cast<Bilou>(tag), *type);
  }
  throw std::invalid_argument("unknown entity label: " + std::string(name));
}

int LabelSchema::relation_label_id(std::string_view name) const {
  if (name == kNoRelationName) return kNoRelation;
  if (name.size() > 2) {
    auto prefix = name.substr(0, 2);
    auto type = relation_type_id(name.substr(2));
    if (type && prefix == "->") return relation_label(*type, Direction::kForward);
    if (type && prefix == "<-") return relation_label(*type, Direction::kBackward);
  }
  throw std::invalid_argument("unknown relation label: " + std::string(name));
}

nlohmann::json LabelSchema::to_json() const {
  return {{"entity_types", entity_types_}, {"relation_types", relation_types_}};
}

LabelSchema LabelSchema::from_json(const nlohmann::json& j) {
  return LabelSchema(j.at("entity_types").get<std::vector<std::string>>(),
                     j.at("relation_types").get<std::vector<std::string>>());
}

void validate_sentence(const Sentence& s, const LabelSchema* schema, std::size_t line) {
  using K = CorpusError::Kind;
  const int n = s.size();
  if (n == 0) throw CorpusError(K::kEmptySentence, line, "sentence has no words");
  for (const auto& w : s.words) {
    if (w.empty()) throw CorpusError(K::kEmptySentence, line, "empty word string");
  }

  std::vector<int> order(s.entities.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& e = s.entities[k];
    if (!(0 <= e.start && e.start < e.end && e.end <= n)) {
      throw CorpusError(K::kIllFormedSpan, line,
                        "ill-formed entity span (" + std::to_string(e.start) + "," + std::to_string(e.end) +
                            ") for sentence of " + std::to_string(n) + " words");
    }
    if (schema && !schema->entity_type_id(e.etype)) {
      throw CorpusError(K::kUnknownType, line, "unknown entity type: " + e.etype);
    }
    order[k] = static_cast<int>(k);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) { return s.entities[a].start < s.entities[b].start; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = s.entities[order[k - 1]];
    const auto& cur = s.entities[order[k]];
    if (cur.start < prev.end) {
      throw CorpusError(K::kOverlappingEntities, line,
                        "overlapping entities (" + std::to_string(prev.start) + "," + std::to_string(prev.end) +
                            ") and (" + std::to_string(cur.start) + "," + std::to_string(cur.end) + ")");
    }
  }

  const int m = static_cast<int>(s.entities.size());
  for (const auto& r : s.relations) {
    if (r.head < 0 || r.head >= m || r.tail < 0 || r.tail >= m) {
      throw CorpusError(K::kDanglingRelation, line,
                        "relation references missing entity (" + std::to_string(r.head) + "," +
                            std::to_string(r.tail) + ")");
    }
    if (r.head == r.tail) throw CorpusError(K::kSelfRelation, line, "relation from an entity to itself");
    if (schema && !schema->relation_type_id(r.rtype)) {
      throw CorpusError(K::kUnknownType, line, "unknown relation type: " + r.rtype);
    }
  }
}

Document document_from_json(const nlohmann::json& j, const LabelSchema* schema, std::size_t line) {
  Document doc;
  try {
    doc.id = j.at("id").get<std::string>();
    for (const auto& js : j.at("sentences")) {
      Sentence s;
      s.words = js.at("words").get<std::vector<std::string>>();
      if (auto it = js.find("entities"); it != js.end()) {
        for (const auto& je : *it) {
          s.entities.push_back({je.at("start").get<int>(), je.at("end").get<int>(), je.at("type").get<std::string>()});
        }
      }
      if (auto it = js.find("relations"); it != js.end()) {
        for (const auto& jr : *it) {
          s.relations.push_back({jr.at("head").get<int>(), jr.at("tail").get<int>(), jr.at("type").get<std::string>()});
        }
      }
      doc.sentences.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(CorpusError::Kind::kParse, line, std::string("malformed document: ") + e.what());
  }
  for (const auto& s : doc.sentences) validate_sentence(s, schema, line);
  return doc;
}

nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json sentences = nlohmann::json::array();
  for (const auto& s : doc.sentences) {
    nlohmann::json ents = nlohmann::json::array();
    for (const auto& e : s.entities) ents.push_back({{"start", e.start}, {"end", e.end}, {"type", e.etype}});
    nlohmann::json rels = nlohmann::json::array();
    for (const auto& r : s.relations) rels.push_back({{"head", r.head}, {"tail", r.tail}, {"type", r.rtype}});
    sentences.push_back({{"words", s.words}, {"entities", ents}, {"relations", rels}});
  }
  return {{"id", doc.id}, {"sentences", sentences}};
}

Corpus read_corpus(std::istream& in, const LabelSchema* schema) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(CorpusError::Kind::kParse, line, std::string("invalid JSON: ") + e.what());
    }
    Document doc = document_from_json(j, schema, line);
    if (!ids.insert(doc.id).second) {
      throw CorpusError(CorpusError::Kind::kDuplicateDocument, line, "duplicate document id: " + doc.id);
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const LabelSchema* schema) {
  std::ifstream in(path);
  if (!in) throw CorpusError(CorpusError::Kind::kIo, 0, "cannot open corpus file: " + path.string());
  return read_corpus(in, schema);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus) out << document_to_json(doc).dump() << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw CorpusError(CorpusError::Kind::kIo, 0, "cannot write corpus file: " + path.string());
  write_corpus(out, corpus);
}

LabelSchema schema_from_corpus(const Corpus& corpus) {
  if (corpus.empty()) throw CorpusError(CorpusError::Kind::kEmptyCorpus, 0, "cannot derive a schema from an empty corpus");
  std::set<std::string> etypes;
  std::set<std::string> rtypes;
  for (const auto& doc : corpus) {
    for (const auto& s : doc.sentences) {
      for (const auto& e : s.entities) etypes.insert(e.etype);
      for (const auto& r : s.relations) rtypes.insert(r.rtype);
    }
  }
  return LabelSchema({etypes.begin(), etypes.end()}, {rtypes.begin(), rtypes.end()});
}

}  // namespace tablefill
