/* Copyright 2026 The EgoNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <string>

#include "egonet/tensor.hpp"

namespace egonet {

// One network-ready frame: inputs in [0, 1] and a binary action-object mask.
struct Sample {
  std::string frame_id;
  std::string scene_id;
  Tensor rgb;    // 3 x H x W
  Tensor dhg;    // 3 x H x W
  Tensor label;  // H x W, values 0 or 1
};

}  // namespace egonet
