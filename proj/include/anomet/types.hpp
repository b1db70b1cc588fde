#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace anomet {

enum class Split { train, dev, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  throw std::invalid_argument("unknown split");
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s +
                              "' (expected train, dev or test)");
}

enum class PaiType { print, replay, mask };

inline const char* to_string(PaiType t) {
  switch (t) {
    case PaiType::print: return "print";
    case PaiType::replay: return "replay";
    case PaiType::mask: return "mask";
  }
  throw std::invalid_argument("unknown pai_type");
}

inline PaiType pai_type_from_string(const std::string& s) {
  if (s == "print") return PaiType::print;
  if (s == "replay") return PaiType::replay;
  if (s == "mask") return PaiType::mask;
  throw std::invalid_argument("unknown pai_type '" + s +
                              "' (expected print, replay or mask)");
}

// Attack taxonomy: each presentation-attack type carries a closed set of
// subtypes. print and replay grade by fidelity; mask by material.
inline const std::vector<std::string>& pai_subtypes(PaiType t) {
  static const std::vector<std::string> graded = {"low", "medium", "high"};
  static const std::vector<std::string> materials = {"paper", "rigid",
                                                     "silicone"};
  switch (t) {
    case PaiType::print:
    case PaiType::replay:
      return graded;
    case PaiType::mask:
      return materials;
  }
  throw std::invalid_argument("unknown pai_type");
}

inline bool valid_pai_subtype(PaiType t, const std::string& subtype) {
  for (const auto& s : pai_subtypes(t)) {
    if (s == subtype) return true;
  }
  return false;
}

enum class LabelKind { genuine, attack };

struct Label {
  LabelKind kind = LabelKind::genuine;
  std::optional<PaiType> pai_type;
  std::optional<std::string> pai_subtype;

  static Label make_genuine() { return Label{}; }

  static Label make_attack(PaiType type, std::string subtype) {
    Label l;
    l.kind = LabelKind::attack;
    l.pai_type = type;
    l.pai_subtype = std::move(subtype);
    return l;
  }

  bool is_genuine() const { return kind == LabelKind::genuine; }
  bool is_attack() const { return kind == LabelKind::attack; }
};

inline void validate_label(const Label& label) {
  if (label.kind == LabelKind::genuine) {
    if (label.pai_type || label.pai_subtype) {
      throw std::invalid_argument(
          "genuine label must not carry pai_type or pai_subtype");
    }
    return;
  }
  if (!label.pai_type || !label.pai_subtype) {
    throw std::invalid_argument(
        "attack label requires both pai_type and pai_subtype");
  }
  if (!valid_pai_subtype(*label.pai_type, *label.pai_subtype)) {
    std::string allowed;
    for (const auto& s : pai_subtypes(*label.pai_type)) {
      if (!allowed.empty()) allowed += ", ";
      allowed += s;
    }
    throw std::invalid_argument("invalid pai_subtype '" + *label.pai_subtype +
                                "' for pai_type '" +
                                to_string(*label.pai_type) + "' (allowed: " +
                                allowed + ")");
  }
}

// Class identity used by classwise training: genuine samples form one
// class, attacks one class per (type, subtype) leaf.
inline std::string class_key(const Label& label) {
  if (label.is_genuine()) return "genuine";
  return std::string(to_string(*label.pai_type)) + "/" + *label.pai_subtype;
}

struct Sample {
  std::string id;
  std::vector<double> features;
  Label label;
  std::string domain_tag;
  Split split = Split::train;
};

inline void validate_sample(const Sample& s, std::size_t expected_dim) {
  if (s.id.empty()) throw std::invalid_argument("sample id must be non-empty");
  if (s.features.size() != expected_dim) {
    throw std::invalid_argument(
        "sample '" + s.id + "' has " + std::to_string(s.features.size()) +
        " features, expected " + std::to_string(expected_dim));
  }
  validate_label(s.label);
}

// Indices into some sample/embedding array.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

}  // namespace anomet
