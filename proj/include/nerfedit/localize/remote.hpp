// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "nerfedit/core/error.hpp"
#include "nerfedit/io/base64.hpp"
#include "nerfedit/io/png.hpp"
#include "nerfedit/localize/providers.hpp"

namespace nerfedit::localize {

/// HTTP provider. POST {base}/segment with JSON
///   {"text", "width", "height", "channels": 3, "image_b64": <8-bit HWC bytes>}
/// and expects {"width", "height", "probabilities": [row-major floats]}.
class RemoteSegmenter final : public SegmentationProvider {
 public:
  RemoteSegmenter(std::string base_url, int resolution = 352, std::string path = "/segment")
      : base_url_(std::move(base_url)), path_(std::move(path)), resolution_(resolution) {}

  [[nodiscard]] int resolution() const override { return resolution_; }

  Image<float> segment(const Image<float>& image, std::string_view text) override {
    const auto bytes = io::to_8bit(image);
    nlohmann::json req = {{"text", text},
                          {"width", image.width},
                          {"height", image.height},
                          {"channels", image.channels},
                          {"image_b64", io::base64_encode(bytes.data)}};
    httplib::Client cli(base_url_);
    cli.set_read_timeout(60, 0);
    auto res = cli.Post(path_, req.dump(), "application/json");
    if (!res) throw RuntimeFailure("RemoteSegmenter: request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw RuntimeFailure("RemoteSegmenter: HTTP " + std::to_string(res->status));
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw RuntimeFailure(std::string("RemoteSegmenter: malformed response: ") + e.what());
    }
    const int w = body.at("width"), h = body.at("height");
    const auto& probs = body.at("probabilities");
    if (w != resolution_ || h != resolution_ || probs.size() != static_cast<size_t>(w) * h)
      throw RuntimeFailure("RemoteSegmenter: response size does not match declared resolution");
    Image<float> p(w, h, 1);
    for (size_t i = 0; i < probs.size(); ++i) p.data[i] = std::clamp(probs[i].get<float>(), 0.0f, 1.0f);
    return p;
  }

 private:
  std::string base_url_;
  std::string path_;
  int resolution_;
};

}  // namespace nerfedit::localize
