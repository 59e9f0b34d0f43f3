// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/pipeline.hpp"

#include <chrono>

#include "nerfsr/image.hpp"

namespace nerfsr {

std::size_t Pipeline::field_bytes() const { return field ? field->size_bytes() : 0; }

std::size_t Pipeline::sr_bytes() const {
  return upscaler == Upscaler::Network && sr ? sr->size_bytes() : 0;
}

PipelineOutput render_pipeline(const Pipeline& pipeline, const CameraModel& hr_camera) {
  if (!pipeline.field) throw ConfigError("pipeline has no radiance field");
  const auto start = std::chrono::steady_clock::now();
  PipelineOutput out;
  const CameraModel lr_camera = downscale_camera(hr_camera, pipeline.ratio);
  out.lr = render_image(*pipeline.field, lr_camera, pipeline.render).rgb;
  switch (pipeline.upscaler) {
    case Upscaler::None:
      if (pipeline.ratio != 1) throw ConfigError("pipeline without upscaler must have ratio 1");
      out.hr = out.lr;
      break;
    case Upscaler::Bilinear:
      out.hr = bilinear_upscale(out.lr, pipeline.ratio);
      break;
    case Upscaler::Network:
      if (!pipeline.sr) throw ConfigError("pipeline upscaler is a network but none is attached");
      if (pipeline.sr->ratio() != pipeline.ratio)
        throw ConfigError("SR network ratio " + std::to_string(pipeline.sr->ratio()) +
                          " does not match pipeline ratio " + std::to_string(pipeline.ratio));
      out.hr = pipeline.sr->upscale(out.lr);
      break;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace nerfsr
