// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerfedit/core/error.hpp"
#include "nerfedit/fields/model.hpp"
#include "nerfedit/fields/radiance_field.hpp"

namespace nerfedit::fields {

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json to_json(const EncodingConfig& e) {
  return {{"num_freqs", e.num_freqs}, {"include_identity", e.include_identity}};
}
inline EncodingConfig encoding_from_json(const nlohmann::json& j) {
  return {j.at("num_freqs").get<int>(), j.at("include_identity").get<bool>()};
}

inline nlohmann::json to_json(const PretrainedArchitecture& a) {
  return {{"type", "pretrained"},     {"depth", a.depth},
          {"width", a.width},         {"skip_layer", a.skip_layer},
          {"color_width", a.color_width}, {"position_encoding", to_json(a.position)},
          {"direction_encoding", to_json(a.direction)}};
}
inline PretrainedArchitecture pretrained_arch_from_json(const nlohmann::json& j) {
  require(j.at("type") == "pretrained", "checkpoint: expected a pretrained architecture");
  PretrainedArchitecture a;
  a.depth = j.at("depth");
  a.width = j.at("width");
  a.skip_layer = j.at("skip_layer");
  a.color_width = j.at("color_width");
  a.position = encoding_from_json(j.at("position_encoding"));
  a.direction = encoding_from_json(j.at("direction_encoding"));
  return a;
}

inline nlohmann::json to_json(const EditableArchitecture& a) {
  return {{"type", "editable"},
          {"width", a.width},
          {"residual_blocks", a.residual_blocks},
          {"color_width", a.color_width},
          {"position_encoding", to_json(a.position)},
          {"direction_encoding", to_json(a.direction)},
          {"initial_blend", a.initial_blend},
          {"density_head_scale", a.density_head_scale}};
}
inline EditableArchitecture editable_arch_from_json(const nlohmann::json& j) {
  require(j.at("type") == "editable", "checkpoint: expected an editable architecture");
  EditableArchitecture a;
  a.width = j.at("width");
  a.residual_blocks = j.at("residual_blocks");
  a.color_width = j.at("color_width");
  a.position = encoding_from_json(j.at("position_encoding"));
  a.direction = encoding_from_json(j.at("direction_encoding"));
  a.initial_blend = j.at("initial_blend");
  a.density_head_scale = j.at("density_head_scale");
  return a;
}

namespace detail {

struct NetworkEntry {
  std::string role;
  nlohmann::json architecture;
  std::vector<ParamSpec> specs;
  size_t payload_offset = 0;  // in scalars
  size_t count = 0;
};

inline std::filesystem::path payload_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

template <typename T>
void write_checkpoint(const std::filesystem::path& manifest_path, const std::string& kind,
                      const std::vector<std::pair<std::string, std::pair<nlohmann::json, const ParameterSet<T>*>>>& nets,
                      const nlohmann::json& metadata = nlohmann::json::object()) {
  if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());
  const auto bin = payload_path(manifest_path);
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw RuntimeFailure("checkpoint: cannot write " + bin.string());
  nlohmann::json networks = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& [role, entry] : nets) {
    const auto& [arch, params] = entry;
    nlohmann::json plist = nlohmann::json::array();
    for (const auto& s : params->specs())
      plist.push_back({{"name", s.name}, {"shape", {s.rows, s.cols}}, {"offset", s.offset}});
    networks.push_back({{"role", role},
                        {"architecture", arch},
                        {"parameters", plist},
                        {"payload_offset", offset},
                        {"count", params->size()}});
    for (T v : params->flat()) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
    offset += params->size();
  }
  nlohmann::json manifest = {{"format_version", kCheckpointFormatVersion},
                             {"kind", kind},
                             {"scalar", "float32"},
                             {"payload", bin.filename().string()},
                             {"networks", networks},
                             {"metadata", metadata}};
  std::ofstream m(manifest_path);
  if (!m) throw RuntimeFailure("checkpoint: cannot write " + manifest_path.string());
  m << manifest.dump(2) << "\n";
}

struct LoadedCheckpoint {
  std::string kind;
  std::vector<NetworkEntry> networks;
  std::vector<float> payload;
  nlohmann::json metadata = nlohmann::json::object();
};

inline LoadedCheckpoint read_checkpoint(const std::filesystem::path& manifest_path) {
  std::ifstream m(manifest_path);
  if (!m) throw ValidationError("checkpoint: missing manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed manifest: ") + e.what());
  }
  require(j.value("format_version", -1) == kCheckpointFormatVersion, "checkpoint: unsupported format_version");
  require(j.value("scalar", "") == "float32", "checkpoint: unsupported scalar type");
  LoadedCheckpoint ck;
  ck.kind = j.at("kind");
  if (j.contains("metadata")) ck.metadata = j.at("metadata");
  const auto bin = manifest_path.parent_path() / j.at("payload").get<std::string>();
  std::ifstream in(bin, std::ios::binary | std::ios::ate);
  if (!in) throw ValidationError("checkpoint: missing payload " + bin.string());
  const auto bytes = static_cast<size_t>(in.tellg());
  require(bytes % sizeof(float) == 0, "checkpoint: truncated payload");
  ck.payload.resize(bytes / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(ck.payload.data()), static_cast<std::streamsize>(bytes));
  for (const auto& n : j.at("networks")) {
    NetworkEntry e;
    e.role = n.at("role");
    e.architecture = n.at("architecture");
    e.payload_offset = n.at("payload_offset");
    e.count = n.at("count");
    for (const auto& p : n.at("parameters"))
      e.specs.push_back({p.at("name"), p.at("shape")[0].get<int>(), p.at("shape")[1].get<int>(), p.at("offset")});
    require(e.payload_offset + e.count <= ck.payload.size(), "checkpoint: payload shorter than manifest");
    ck.networks.push_back(std::move(e));
  }
  return ck;
}

/// Copies a network's payload into a parameter set after shape validation.
template <typename T>
ParameterSet<T> fill_params(const ParameterSet<T>& layout, const NetworkEntry& e, const std::vector<float>& payload) {
  require(e.specs.size() == layout.specs().size(), "checkpoint: parameter count mismatch for " + e.role);
  for (size_t i = 0; i < e.specs.size(); ++i) {
    const auto& a = e.specs[i];
    const auto& b = layout.specs()[i];
    require(a.name == b.name && a.rows == b.rows && a.cols == b.cols && a.offset == b.offset,
            "checkpoint: shape mismatch for " + e.role + "/" + b.name);
  }
  require(e.count == layout.size(), "checkpoint: payload size mismatch for " + e.role);
  ParameterSet<T> p = layout.zeros_like();
  auto flat = p.flat();
  for (size_t i = 0; i < e.count; ++i) flat[i] = static_cast<T>(payload[e.payload_offset + i]);
  return p;
}

}  // namespace detail

template <typename T>
void save_pretrained(const std::filesystem::path& manifest, const PretrainedModel<T>& model) {
  std::vector<std::pair<std::string, std::pair<nlohmann::json, const ParameterSet<T>*>>> nets;
  nets.push_back({"coarse", {to_json(model.coarse.architecture()), &model.coarse.params()}});
  if (model.fine) nets.push_back({"fine", {to_json(model.fine->architecture()), &model.fine->params()}});
  detail::write_checkpoint<T>(manifest, "pretrained", nets);
}

template <typename T>
PretrainedModel<T> load_pretrained(const std::filesystem::path& manifest) {
  auto ck = detail::read_checkpoint(manifest);
  require(ck.kind == "pretrained", "checkpoint: " + manifest.string() + " is not a pretrained checkpoint");
  std::optional<PretrainedField<T>> coarse, fine;
  for (const auto& e : ck.networks) {
    const auto arch = pretrained_arch_from_json(e.architecture);
    PretrainedField<T> layout(arch);
    auto params = detail::fill_params(layout.params(), e, ck.payload);
    if (e.role == "coarse") coarse.emplace(arch, std::move(params));
    else if (e.role == "fine") fine.emplace(arch, std::move(params));
    else throw ValidationError("checkpoint: unknown network role " + e.role);
  }
  require(coarse.has_value(), "checkpoint: missing coarse network");
  return PretrainedModel<T>{std::move(*coarse), std::move(fine)};
}

/// `metadata` is free-form (the trainer records the enabled operations there).
template <typename T>
void save_editable(const std::filesystem::path& manifest, const EditableField<T>& field,
                   const nlohmann::json& metadata = nlohmann::json::object()) {
  detail::write_checkpoint<T>(manifest, "editable", {{"editable", {to_json(field.architecture()), &field.params()}}},
                              metadata);
}

inline nlohmann::json read_checkpoint_metadata(const std::filesystem::path& manifest) {
  return detail::read_checkpoint(manifest).metadata;
}

template <typename T>
EditableField<T> load_editable(const std::filesystem::path& manifest) {
  auto ck = detail::read_checkpoint(manifest);
  require(ck.kind == "editable" && ck.networks.size() == 1, "checkpoint: " + manifest.string() + " is not an editable checkpoint");
  const auto arch = editable_arch_from_json(ck.networks[0].architecture);
  EditableField<T> layout(arch);
  return EditableField<T>(arch, detail::fill_params(layout.params(), ck.networks[0], ck.payload));
}

}  // namespace nerfedit::fields
