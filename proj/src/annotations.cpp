#include "aerovision/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aerovision/error.hpp"
#include "aerovision/imaging.hpp"
#include "aerovision/rng.hpp"

namespace aerovision {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, (pointer.empty() ? "/" : pointer) + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& pointer) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(pointer, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& value, const std::string& pointer) {
  if (!value.is_string()) schema_error(pointer, "expected string");
  return value.get<std::string>();
}

std::size_t require_index(const json& value, const std::string& pointer) {
  if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
    schema_error(pointer, "expected non-negative integer");
  }
  return value.get<std::size_t>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

std::string relativize(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (base.empty()) return p.generic_string();
  auto rel = p.lexically_relative(base);
  if (rel.empty() || rel.native().starts_with("..")) return p.generic_string();
  return rel.generic_string();
}

LabeledBox parse_box(const json& value, const std::string& pointer) {
  if (!value.is_array() || value.size() != 5) {
    schema_error(pointer, "box must be [x_min, y_min, x_max, y_max, class_id]");
  }
  LabeledBox out;
  double coords[4];
  for (int i = 0; i < 4; ++i) {
    if (!value[i].is_number()) schema_error(pointer + "/" + std::to_string(i), "expected number");
    coords[i] = value[i].get<double>();
  }
  out.box = {coords[0], coords[1], coords[2], coords[3]};
  out.class_id = require_index(value[4], pointer + "/4");
  return out;
}

bool path_exists(const std::filesystem::path& p) {
  std::error_code ec;
  return std::filesystem::is_regular_file(p, ec);
}

}  // namespace

std::string_view to_string(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::Detection: return "detection";
    case AnnotationKind::Mask: return "mask";
    case AnnotationKind::Action: return "action";
  }
  return "?";
}

std::string_view to_string(ValidationIssue::Kind kind) {
  switch (kind) {
    case ValidationIssue::Kind::MissingFile: return "MissingFile";
    case ValidationIssue::Kind::InvalidBox: return "InvalidBox";
    case ValidationIssue::Kind::ClassOverflow: return "ClassOverflow";
    case ValidationIssue::Kind::EmptyFrameRange: return "EmptyFrameRange";
    case ValidationIssue::Kind::MaskMismatch: return "MaskMismatch";
  }
  return "?";
}

const Sample* DatasetIndex::find(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

DatasetIndex parse_manifest(std::string_view document, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    schema_error("", std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) schema_error("", "manifest must be an object");

  DatasetIndex index;
  const auto& vocab = require(root, "vocabulary", "");
  if (!vocab.is_array()) schema_error("/vocabulary", "expected array");
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    index.vocabulary.push_back(require_string(vocab[i], "/vocabulary/" + std::to_string(i)));
  }

  const auto& samples = require(root, "samples", "");
  if (!samples.is_array()) schema_error("/samples", "expected array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string ptr = "/samples/" + std::to_string(i);
    const auto& entry = samples[i];
    if (!entry.is_object()) schema_error(ptr, "expected object");

    Sample sample;
    sample.id = require_string(require(entry, "id", ptr), ptr + "/id");
    if (!seen.insert(sample.id).second) {
      throw Error(ErrorCode::DuplicateSampleId, "sample id '" + sample.id + "' at " + ptr);
    }
    const auto kind = require_string(require(entry, "kind", ptr), ptr + "/kind");
    if (entry.contains("frame")) {
      sample.frame = resolve(base_dir, require_string(entry["frame"], ptr + "/frame"));
    }

    if (kind == "detection") {
      sample.kind = AnnotationKind::Detection;
      if (sample.frame.empty()) schema_error(ptr, "missing field 'frame'");
      if (entry.contains("boxes")) {
        const auto& boxes = entry["boxes"];
        if (!boxes.is_array()) schema_error(ptr + "/boxes", "expected array");
        for (std::size_t b = 0; b < boxes.size(); ++b) {
          sample.boxes.push_back(parse_box(boxes[b], ptr + "/boxes/" + std::to_string(b)));
        }
      }
    } else if (kind == "mask") {
      sample.kind = AnnotationKind::Mask;
      if (sample.frame.empty()) schema_error(ptr, "missing field 'frame'");
      sample.mask = resolve(base_dir, require_string(require(entry, "mask", ptr), ptr + "/mask"));
    } else if (kind == "action") {
      sample.kind = AnnotationKind::Action;
      const auto& action = require(entry, "action", ptr);
      if (!action.is_object()) schema_error(ptr + "/action", "expected object");
      sample.action_class = require_index(require(action, "class_id", ptr + "/action"), ptr + "/action/class_id");
      const auto& frames = require(action, "frames", ptr + "/action");
      if (!frames.is_array()) schema_error(ptr + "/action/frames", "expected array");
      for (std::size_t f = 0; f < frames.size(); ++f) {
        sample.action_frames.push_back(
            resolve(base_dir, require_string(frames[f], ptr + "/action/frames/" + std::to_string(f))));
      }
    } else {
      schema_error(ptr + "/kind", "unknown kind '" + kind + "'");
    }
    index.samples.push_back(std::move(sample));
  }
  return index;
}

DatasetIndex load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

std::string write_manifest(const DatasetIndex& index, const std::filesystem::path& base_dir) {
  json root;
  root["vocabulary"] = index.vocabulary;
  root["samples"] = json::array();
  for (const auto& s : index.samples) {
    json entry;
    entry["id"] = s.id;
    entry["kind"] = std::string(to_string(s.kind));
    if (!s.frame.empty()) entry["frame"] = relativize(base_dir, s.frame);
    switch (s.kind) {
      case AnnotationKind::Detection: {
        json boxes = json::array();
        for (const auto& b : s.boxes) {
          boxes.push_back({b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max, b.class_id});
        }
        entry["boxes"] = std::move(boxes);
        break;
      }
      case AnnotationKind::Mask:
        entry["mask"] = relativize(base_dir, s.mask);
        break;
      case AnnotationKind::Action: {
        json frames = json::array();
        for (const auto& f : s.action_frames) frames.push_back(relativize(base_dir, f));
        entry["action"] = {{"class_id", s.action_class}, {"frames", std::move(frames)}};
        break;
      }
    }
    root["samples"].push_back(std::move(entry));
  }
  return root.dump(2);
}

std::vector<ValidationIssue> validate(const DatasetIndex& index) {
  using Kind = ValidationIssue::Kind;
  std::vector<ValidationIssue> report;
  const std::size_t vocab = index.vocabulary.size();
  auto add = [&](Kind kind, const Sample& s, std::string detail) {
    report.push_back({kind, s.id, std::move(detail)});
  };

  for (const auto& s : index.samples) {
    if (!s.frame.empty() && !path_exists(s.frame)) add(Kind::MissingFile, s, s.frame.string());
    switch (s.kind) {
      case AnnotationKind::Detection:
        for (std::size_t b = 0; b < s.boxes.size(); ++b) {
          const auto& lb = s.boxes[b];
          if (!lb.box.is_valid()) add(Kind::InvalidBox, s, "box " + std::to_string(b));
          if (lb.class_id >= vocab) {
            add(Kind::ClassOverflow, s, "box " + std::to_string(b) + " class " + std::to_string(lb.class_id));
          }
        }
        break;
      case AnnotationKind::Mask:
        if (!path_exists(s.mask)) {
          add(Kind::MissingFile, s, s.mask.string());
        } else if (vocab > 0) {
          try {
            auto map = load_mask(s.mask, std::max<std::size_t>(vocab, 1));
            if (!s.frame.empty() && path_exists(s.frame)) {
              auto frame = load_frame(s.frame);
              if (frame.width() != map.width() || frame.height() != map.height()) {
                add(Kind::MaskMismatch, s, "mask size differs from frame size");
              }
            }
          } catch (const Error& e) {
            add(e.code() == ErrorCode::ClassOverflow ? Kind::ClassOverflow : Kind::MaskMismatch, s, e.what());
          }
        }
        break;
      case AnnotationKind::Action:
        if (s.action_class >= vocab) add(Kind::ClassOverflow, s, "class " + std::to_string(s.action_class));
        if (s.action_frames.empty()) add(Kind::EmptyFrameRange, s, "no frames");
        for (const auto& f : s.action_frames) {
          if (!path_exists(f)) add(Kind::MissingFile, s, f.string());
        }
        break;
    }
  }
  return report;
}

std::optional<std::size_t> stratification_label(const Sample& sample) {
  switch (sample.kind) {
    case AnnotationKind::Action:
      return sample.action_class;
    case AnnotationKind::Detection: {
      if (sample.boxes.empty()) return std::nullopt;
      std::map<std::size_t, std::size_t> counts;
      for (const auto& b : sample.boxes) ++counts[b.class_id];
      // std::map iterates by ascending class id, so the first maximum wins ties.
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      return best->first;
    }
    case AnnotationKind::Mask:
      return std::nullopt;
  }
  return std::nullopt;
}

std::string FoldAssignment::to_json() const {
  json root;
  root["k"] = k;
  root["folds"] = json::object();
  for (const auto& [id, fold] : folds) root["folds"][id] = fold;
  if (!holdout.empty()) root["holdout"] = holdout;
  return root.dump(2) + "\n";
}

FoldAssignment FoldAssignment::from_json(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    schema_error("", std::string("not valid JSON: ") + e.what());
  }
  FoldAssignment out;
  out.k = require_index(require(root, "k", ""), "/k");
  const auto& folds = require(root, "folds", "");
  if (!folds.is_object()) schema_error("/folds", "expected object");
  for (const auto& [id, fold] : folds.items()) out.folds[id] = require_index(fold, "/folds/" + id);
  if (root.contains("holdout")) {
    for (const auto& id : root["holdout"]) out.holdout.push_back(require_string(id, "/holdout"));
  }
  return out;
}

FoldAssignment stratified_kfold(const DatasetIndex& index, std::size_t k, std::uint64_t seed,
                                double holdout_fraction) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "holdout fraction must lie in [0, 1)");
  }

  // Strata keyed by label; unlabeled samples form their own stratum, dealt first.
  std::map<std::optional<std::size_t>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < index.samples.size(); ++i) {
    strata[stratification_label(index.samples[i])].push_back(i);
  }

  CounterRng rng(seed);
  FoldAssignment out;
  out.k = k;
  std::vector<std::vector<std::size_t>> pools;
  std::size_t fold_candidates = 0;
  for (auto& [label, members] : strata) {
    // Fisher-Yates with the portable generator.
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.uniform_int(0, i - 1)]);
    }
    const auto held = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < held; ++i) out.holdout.push_back(index.samples[members[i]].id);
    pools.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(held), members.end());
    fold_candidates += pools.back().size();
  }

  if (k < 2 || k > fold_candidates) {
    throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " with " + std::to_string(fold_candidates) +
                                         " samples to fold");
  }

  std::size_t position = 0;
  for (const auto& pool : pools) {
    for (auto idx : pool) {
      out.folds[index.samples[idx].id] = position % k;
      ++position;
    }
  }
  return out;
}

}  // namespace aerovision
