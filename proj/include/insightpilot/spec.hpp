#pragma once

// Declarative description of a visual-analytics system: views, their
// encodings, and the coordinations between them. Parsed from JSON
// (`*.vaspec.json`); unknown keys are retained verbatim.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"

namespace insightpilot {

using ojson = nlohmann::ordered_json;

enum class FieldType { Quantitative, Temporal, Nominal, Ordinal };

inline std::string_view to_string(FieldType t) {
  switch (t) {
    case FieldType::Quantitative: return "quantitative";
    case FieldType::Temporal: return "temporal";
    case FieldType::Nominal: return "nominal";
    case FieldType::Ordinal: return "ordinal";
  }
  return "nominal";
}

inline std::optional<FieldType> field_type_from(std::string_view s) {
  if (s == "quantitative") return FieldType::Quantitative;
  if (s == "temporal") return FieldType::Temporal;
  if (s == "nominal") return FieldType::Nominal;
  if (s == "ordinal") return FieldType::Ordinal;
  return std::nullopt;
}

enum class CoordinationType { Filter, Brush, Highlight, Navigate };

inline std::string_view to_string(CoordinationType t) {
  switch (t) {
    case CoordinationType::Filter: return "filter";
    case CoordinationType::Brush: return "brush";
    case CoordinationType::Highlight: return "highlight";
    case CoordinationType::Navigate: return "navigate";
  }
  return "filter";
}

inline std::optional<CoordinationType> coordination_type_from(std::string_view s) {
  if (s == "filter") return CoordinationType::Filter;
  if (s == "brush") return CoordinationType::Brush;
  if (s == "highlight") return CoordinationType::Highlight;
  if (s == "navigate") return CoordinationType::Navigate;
  return std::nullopt;
}

struct Encoding {
  std::string field;
  FieldType fieldType = FieldType::Nominal;
  ojson extra = ojson::object();  ///< e.g. "aggregate"
};

struct Channel {
  std::string name;  ///< free-form: x, y, color, title, context, ...
  Encoding encoding;
};

struct Layer {
  std::string mark;
  std::vector<Channel> encoding;
  ojson extra = ojson::object();
};

struct ViewStyleInfo {
  std::string viewName;
  std::vector<Layer> layers;
  std::optional<ojson> tooltip;  ///< array of field names or {field: ...} objects
  ojson extra = ojson::object();

  /// Fields referenced by encodings, in declaration order, deduplicated.
  std::vector<std::string> encoded_fields() const {
    std::vector<std::string> out;
    for (const auto& l : layers)
      for (const auto& c : l.encoding)
        if (std::find(out.begin(), out.end(), c.encoding.field) == out.end()) out.push_back(c.encoding.field);
    return out;
  }

  const Encoding* encoding_for_field(std::string_view field) const {
    for (const auto& l : layers)
      for (const auto& c : l.encoding)
        if (c.encoding.field == field) return &c.encoding;
    return nullptr;
  }
};

struct Interaction {
  std::string trigger;
  std::string effect;
};

struct ViewCoordinationInfo {
  std::string sourceViewName;
  std::string targetViewName;
  CoordinationType coordinationType = CoordinationType::Filter;
  std::vector<Interaction> interaction;
  ojson extra = ojson::object();
};

struct SystemInfo {
  std::string name;
  long long viewCount = 0;
  ojson extra = ojson::object();
};

struct SystemSpec {
  SystemInfo systemInfo;
  std::vector<ViewStyleInfo> viewsInfo;
  std::vector<ViewCoordinationInfo> coordinations;
  ojson extra = ojson::object();

  const ViewStyleInfo* find_view(std::string_view name) const {
    for (const auto& v : viewsInfo)
      if (v.viewName == name) return &v;
    return nullptr;
  }

  const ViewStyleInfo& view(std::string_view name) const {
    if (const auto* v = find_view(name)) return *v;
    fail(ErrorCode::UnknownView, "no view named '" + std::string(name) + "'", std::string(name));
  }
};

struct Finding {
  std::string severity;  ///< "error" | "warning"
  std::string path;
  std::string message;
  bool operator==(const Finding&) const = default;
};

using ValidationReport = std::vector<Finding>;

namespace detail {

inline void expect_type(const ojson& j, bool ok, const std::string& path, std::string_view what) {
  if (!ok) fail(ErrorCode::SchemaError, path + " must be " + std::string(what) + ", got " + j.type_name(), path);
}

inline ojson leftovers(const ojson& obj, std::initializer_list<std::string_view> known) {
  ojson extra = ojson::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) extra[it.key()] = it.value();
  }
  return extra;
}

inline const ojson& require(const ojson& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::SchemaError, "missing " + path + "." + key, path + "." + key);
  return *it;
}

inline std::string require_string(const ojson& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  expect_type(v, v.is_string(), path + "." + key, "a string");
  return v.get<std::string>();
}

inline Encoding parse_encoding(const ojson& j, const std::string& path) {
  expect_type(j, j.is_object(), path, "an object");
  Encoding e;
  e.field = require_string(j, "field", path);
  const char* typeKey = j.contains("fieldType") ? "fieldType" : "type";
  std::string t = require_string(j, typeKey, path);
  auto ft = field_type_from(t);
  if (!ft) fail(ErrorCode::SchemaError, path + "." + typeKey + " has unknown type '" + t + "'", path + "." + typeKey);
  e.fieldType = *ft;
  e.extra = leftovers(j, {"field", "fieldType", "type"});
  return e;
}

inline Layer parse_layer(const ojson& j, const std::string& path) {
  expect_type(j, j.is_object(), path, "an object");
  Layer l;
  const auto& mark = require(j, "mark", path);
  if (mark.is_string()) {
    l.mark = mark.get<std::string>();
  } else if (mark.is_object() && mark.contains("type") && mark["type"].is_string()) {
    l.mark = mark["type"].get<std::string>();
  } else {
    fail(ErrorCode::SchemaError, path + ".mark must be a string", path + ".mark");
  }
  const auto& enc = require(j, "encoding", path);
  expect_type(enc, enc.is_object(), path + ".encoding", "an object");
  for (auto it = enc.begin(); it != enc.end(); ++it)
    l.encoding.push_back({it.key(), parse_encoding(it.value(), path + ".encoding." + it.key())});
  l.extra = leftovers(j, {"mark", "encoding"});
  return l;
}

inline ViewStyleInfo parse_view(const ojson& j, const std::string& path) {
  expect_type(j, j.is_object(), path, "an object");
  ViewStyleInfo v;
  v.viewName = require_string(j, "viewName", path);
  const auto& layers = require(j, "layers", path);
  expect_type(layers, layers.is_array(), path + ".layers", "an array");
  for (std::size_t i = 0; i < layers.size(); ++i)
    v.layers.push_back(parse_layer(layers[i], path + ".layers[" + std::to_string(i) + "]"));
  if (auto it = j.find("tooltip"); it != j.end() && !it->is_null()) {
    expect_type(*it, it->is_array(), path + ".tooltip", "an array");
    v.tooltip = *it;
  }
  v.extra = leftovers(j, {"viewName", "layers", "tooltip"});
  return v;
}

inline ViewCoordinationInfo parse_coordination(const ojson& j, const std::string& path) {
  expect_type(j, j.is_object(), path, "an object");
  ViewCoordinationInfo c;
  c.sourceViewName = require_string(j, "sourceViewName", path);
  c.targetViewName = require_string(j, "targetViewName", path);
  std::string t = require_string(j, "coordinationType", path);
  auto ct = coordination_type_from(t);
  if (!ct)
    fail(ErrorCode::SchemaError, path + ".coordinationType has unknown value '" + t + "'", path + ".coordinationType");
  c.coordinationType = *ct;
  if (auto it = j.find("interaction"); it != j.end()) {
    expect_type(*it, it->is_array(), path + ".interaction", "an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      std::string ip = path + ".interaction[" + std::to_string(i) + "]";
      const auto& e = (*it)[i];
      expect_type(e, e.is_object(), ip, "an object");
      c.interaction.push_back({e.value("trigger", ""), e.value("effect", "")});
    }
  }
  c.extra = leftovers(j, {"sourceViewName", "targetViewName", "coordinationType", "interaction"});
  return c;
}

inline std::vector<std::string> tooltip_fields(const ojson& tooltip) {
  std::vector<std::string> out;
  for (const auto& t : tooltip) {
    if (t.is_string()) out.push_back(t.get<std::string>());
    else if (t.is_object() && t.contains("field") && t["field"].is_string()) out.push_back(t["field"].get<std::string>());
  }
  return out;
}

}  // namespace detail

/// Checks every structural invariant; with `columns`, also that each encoded
/// or tooltip field exists in the dataset. Findings come back in a stable
/// order (document order).
inline ValidationReport validate_spec(const SystemSpec& spec,
                                      const std::optional<std::vector<std::string>>& columns = std::nullopt) {
  ValidationReport report;
  auto error = [&](std::string path, std::string msg) { report.push_back({"error", std::move(path), std::move(msg)}); };
  if (spec.systemInfo.viewCount != static_cast<long long>(spec.viewsInfo.size()))
    error("systemInfo.viewCount", "viewCount " + std::to_string(spec.systemInfo.viewCount) + " but " +
                                      std::to_string(spec.viewsInfo.size()) + " views declared");
  std::set<std::string> seen;
  std::set<std::string> known;
  if (columns) known.insert(columns->begin(), columns->end());
  for (std::size_t k = 0; k < spec.viewsInfo.size(); ++k) {
    const auto& v = spec.viewsInfo[k];
    const std::string vp = "viewsInfo[" + std::to_string(k) + "]";
    if (v.viewName.empty()) error(vp + ".viewName", "viewName is empty");
    else if (!seen.insert(v.viewName).second) error(vp + ".viewName", "duplicate viewName '" + v.viewName + "'");
    if (v.layers.empty()) error(vp + ".layers", "view has no layers");
    for (std::size_t i = 0; i < v.layers.size(); ++i) {
      const auto& l = v.layers[i];
      const std::string lp = vp + ".layers[" + std::to_string(i) + "]";
      if (l.encoding.empty()) error(lp + ".encoding", "layer has no encoding channels");
      for (const auto& c : l.encoding) {
        const std::string fp = lp + ".encoding." + c.name + ".field";
        if (c.encoding.field.empty()) error(fp, "empty field reference");
        else if (columns && !known.contains(c.encoding.field))
          error(fp, "field '" + c.encoding.field + "' not in dataset");
      }
    }
    if (v.tooltip && columns) {
      auto fields = detail::tooltip_fields(*v.tooltip);
      for (std::size_t i = 0; i < fields.size(); ++i)
        if (!known.contains(fields[i]))
          error(vp + ".tooltip[" + std::to_string(i) + "]", "field '" + fields[i] + "' not in dataset");
    }
  }
  for (std::size_t c = 0; c < spec.coordinations.size(); ++c) {
    const auto& co = spec.coordinations[c];
    const std::string cp = "coordinations[" + std::to_string(c) + "]";
    if (!spec.find_view(co.sourceViewName))
      error(cp + ".sourceViewName", "unknown view '" + co.sourceViewName + "'");
    if (!spec.find_view(co.targetViewName))
      error(cp + ".targetViewName", "unknown view '" + co.targetViewName + "'");
    if (co.sourceViewName == co.targetViewName && co.coordinationType != CoordinationType::Highlight)
      error(cp + ".coordinationType", std::string(to_string(co.coordinationType)) +
                                          " coordination from a view onto itself ('" + co.sourceViewName + "')");
  }
  return report;
}

inline SystemSpec spec_from_json(const ojson& doc) {
  if (!doc.is_object()) fail(ErrorCode::SchemaError, "document root must be an object", "$");
  SystemSpec s;
  const auto& si = detail::require(doc, "systemInfo", "$");
  detail::expect_type(si, si.is_object(), "systemInfo", "an object");
  s.systemInfo.name = detail::require_string(si, "name", "systemInfo");
  const auto& vc = detail::require(si, "viewCount", "systemInfo");
  detail::expect_type(vc, vc.is_number_integer(), "systemInfo.viewCount", "an integer");
  s.systemInfo.viewCount = vc.get<long long>();
  s.systemInfo.extra = detail::leftovers(si, {"name", "viewCount"});
  const auto& views = detail::require(doc, "viewsInfo", "$");
  detail::expect_type(views, views.is_array(), "viewsInfo", "an array");
  for (std::size_t k = 0; k < views.size(); ++k)
    s.viewsInfo.push_back(detail::parse_view(views[k], "viewsInfo[" + std::to_string(k) + "]"));
  if (auto it = doc.find("coordinations"); it != doc.end()) {
    detail::expect_type(*it, it->is_array(), "coordinations", "an array");
    for (std::size_t c = 0; c < it->size(); ++c)
      s.coordinations.push_back(detail::parse_coordination((*it)[c], "coordinations[" + std::to_string(c) + "]"));
  }
  s.extra = detail::leftovers(doc, {"systemInfo", "viewsInfo", "coordinations"});
  return s;
}

/// Parses and validates a spec document. The first invariant violation is
/// raised as SchemaError carrying its path.
inline SystemSpec parse_spec(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::SyntaxError, e.what(), "byte " + std::to_string(e.byte));
  }
  SystemSpec spec = spec_from_json(doc);
  auto report = validate_spec(spec);
  if (!report.empty()) fail(ErrorCode::SchemaError, report.front().message, report.front().path);
  return spec;
}

inline ojson serialize_view(const ViewStyleInfo& v) {
  ojson vj = ojson::object();
  vj["viewName"] = v.viewName;
  ojson layers = ojson::array();
  for (const auto& l : v.layers) {
    ojson lj = ojson::object();
    lj["mark"] = l.mark;
    ojson enc = ojson::object();
    for (const auto& c : l.encoding) {
      ojson e = {{"field", c.encoding.field}, {"fieldType", to_string(c.encoding.fieldType)}};
      e.update(c.encoding.extra);
      enc[c.name] = e;
    }
    lj["encoding"] = enc;
    lj.update(l.extra);
    layers.push_back(lj);
  }
  vj["layers"] = layers;
  if (v.tooltip) vj["tooltip"] = *v.tooltip;
  vj.update(v.extra);
  return vj;
}

inline ojson serialize_coordination(const ViewCoordinationInfo& c) {
  ojson cj = {{"sourceViewName", c.sourceViewName},
              {"targetViewName", c.targetViewName},
              {"coordinationType", to_string(c.coordinationType)}};
  ojson inter = ojson::array();
  for (const auto& i : c.interaction) inter.push_back({{"trigger", i.trigger}, {"effect", i.effect}});
  cj["interaction"] = inter;
  cj.update(c.extra);
  return cj;
}

inline ojson serialize_spec(const SystemSpec& s) {
  ojson doc = ojson::object();
  ojson si = {{"name", s.systemInfo.name}, {"viewCount", s.systemInfo.viewCount}};
  si.update(s.systemInfo.extra);
  doc["systemInfo"] = si;
  ojson views = ojson::array();
  for (const auto& v : s.viewsInfo) views.push_back(serialize_view(v));
  doc["viewsInfo"] = views;
  ojson coords = ojson::array();
  for (const auto& c : s.coordinations) coords.push_back(serialize_coordination(c));
  doc["coordinations"] = coords;
  doc.update(s.extra);
  return doc;
}

struct CoordinationTarget {
  std::string targetViewName;
  CoordinationType coordinationType;
  bool operator==(const CoordinationTarget&) const = default;
};

/// Outgoing coordinations of `sourceView`, in declaration order.
inline std::vector<CoordinationTarget> coordination_targets(const SystemSpec& spec, std::string_view sourceView) {
  if (!spec.find_view(sourceView))
    fail(ErrorCode::UnknownView, "no view named '" + std::string(sourceView) + "'", std::string(sourceView));
  std::vector<CoordinationTarget> out;
  for (const auto& c : spec.coordinations)
    if (c.sourceViewName == sourceView) out.push_back({c.targetViewName, c.coordinationType});
  return out;
}

/// View names a selection on `sourceView` can affect, the view itself first.
inline std::vector<std::string> reachable_views(const SystemSpec& spec, std::string_view sourceView) {
  std::vector<std::string> out{std::string(sourceView)};
  for (const auto& t : coordination_targets(spec, sourceView))
    if (std::find(out.begin(), out.end(), t.targetViewName) == out.end()) out.push_back(t.targetViewName);
  return out;
}

}  // namespace insightpilot
