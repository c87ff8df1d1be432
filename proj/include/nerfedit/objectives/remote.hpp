// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "nerfedit/core/error.hpp"
#include "nerfedit/objectives/embedding.hpp"

namespace nerfedit::objectives {

/// HTTP embedder. Images travel as row-major float arrays in [0,1].
///   POST /embed_text      {"text"}                              -> {"embedding": [...]}
///   POST /embed_image     {"width","height","pixels"}           -> {"embedding": [...]}
///   POST /embed_image_vjp {"width","height","pixels","grad"}    -> {"pixels": [...]}
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(std::string base_url, int dim) : base_url_(std::move(base_url)), dim_(dim) {
    require(dim > 0, "RemoteEmbedder: dim must be positive");
  }

  [[nodiscard]] int dim() const override { return dim_; }

  Embedding embed_image(const Image<double>& image) override {
    return to_embedding(post("/embed_image", image_json(image)).at("embedding"));
  }

  Image<double> embed_image_vjp(const Image<double>& image, const Embedding& grad) override {
    auto req = image_json(image);
    req["grad"] = std::vector<double>(grad.data(), grad.data() + grad.size());
    const auto body = post("/embed_image_vjp", req);
    const auto& px = body.at("pixels");
    if (px.size() != image.data.size()) throw RuntimeFailure("RemoteEmbedder: vjp size mismatch");
    Image<double> out(image.width, image.height, image.channels);
    for (size_t i = 0; i < px.size(); ++i) out.data[i] = px[i].get<double>();
    return out;
  }

  Embedding embed_text(std::string_view text) override {
    return to_embedding(post("/embed_text", {{"text", text}}).at("embedding"));
  }

 private:
  static nlohmann::json image_json(const Image<double>& image) {
    return {{"width", image.width}, {"height", image.height}, {"channels", image.channels}, {"pixels", image.data}};
  }

  Embedding to_embedding(const nlohmann::json& v) const {
    if (!v.is_array() || static_cast<int>(v.size()) != dim_)
      throw RuntimeFailure("RemoteEmbedder: embedding dimension does not match configured dim");
    Embedding e(dim_);
    for (int i = 0; i < dim_; ++i) e(i) = v[i].get<double>();
    return e;
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& req) const {
    httplib::Client cli(base_url_);
    cli.set_read_timeout(60, 0);
    auto res = cli.Post(path, req.dump(), "application/json");
    if (!res) throw RuntimeFailure("RemoteEmbedder: request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw RuntimeFailure("RemoteEmbedder: HTTP " + std::to_string(res->status) + " on " + path);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw RuntimeFailure(std::string("RemoteEmbedder: malformed response: ") + e.what());
    }
  }

  std::string base_url_;
  int dim_;
};

}  // namespace nerfedit::objectives
