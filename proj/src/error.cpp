/*
 * Copyright (c) 2026, The mvgc Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mvgc/error.hpp"

namespace mvgc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateDepth: return "DegenerateDepth";
    case ErrorCode::kUnknownPreset: return "UnknownPreset";
    case ErrorCode::kInvalidShift: return "InvalidShift";
    case ErrorCode::kInvalidRig: return "InvalidRig";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidScene: return "InvalidScene";
    case ErrorCode::kNoSamples: return "NoSamples";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

}  // namespace mvgc
