// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/checkpoint.hpp"
#include "nerfedit/fields/encoding.hpp"
#include "nerfedit/fields/layers.hpp"
#include "nerfedit/fields/model.hpp"
#include "nerfedit/fields/parameters.hpp"
#include "nerfedit/fields/radiance_field.hpp"
#include "nerfedit/render/camera.hpp"
#include "nerfedit/render/composite.hpp"
#include "nerfedit/render/renderer.hpp"
#include "nerfedit/render/sampling.hpp"
#include "nerfedit/render/toggles.hpp"
#include "nerfedit/localize/mask.hpp"
#include "nerfedit/localize/providers.hpp"
#include "nerfedit/localize/regions.hpp"
#include "nerfedit/localize/remote.hpp"
#include "nerfedit/objectives/embedding.hpp"
#include "nerfedit/objectives/losses.hpp"
#include "nerfedit/objectives/remote.hpp"
#include "nerfedit/objectives/schedule.hpp"
#include "nerfedit/augment/augment.hpp"
#include "nerfedit/io/base64.hpp"
#include "nerfedit/io/metrics.hpp"
#include "nerfedit/io/png.hpp"
#include "nerfedit/io/scene.hpp"
#include "nerfedit/train/adam.hpp"
#include "nerfedit/train/config.hpp"
#include "nerfedit/train/desk_scene.hpp"
#include "nerfedit/train/edit.hpp"
#include "nerfedit/train/pretrain.hpp"
