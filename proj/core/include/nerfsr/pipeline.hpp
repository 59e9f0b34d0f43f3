// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfsr/field.hpp"
#include "nerfsr/geometry.hpp"
#include "nerfsr/renderer.hpp"
#include "nerfsr/sr.hpp"

namespace nerfsr {

enum class Upscaler { None, Bilinear, Network };

/// Radiance field rendered at 1/ratio resolution followed by an upscaler.
/// Non-owning; the referenced models must outlive the pipeline.
struct Pipeline {
  const RadianceField* field = nullptr;
  const SRNetwork* sr = nullptr;
  Upscaler upscaler = Upscaler::None;
  int ratio = 1;
  RenderConfig render;

  std::size_t field_bytes() const;
  std::size_t sr_bytes() const;
  std::size_t total_bytes() const { return field_bytes() + sr_bytes(); }
};

struct PipelineOutput {
  Image lr;
  Image hr;
  double seconds = 0.0;
};

/// Renders the LR view of `hr_camera` and upscales it to HR.
PipelineOutput render_pipeline(const Pipeline& pipeline, const CameraModel& hr_camera);

}  // namespace nerfsr
