// Copyright 2026 The qsynth Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qsynth/policy_training.h"

namespace qsynth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Entry point of the qsynth binary. Messages go to `out` and `err`.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Random small policy, batch and reference used by the gradcheck command.
struct GradCheckProblem {
  CategoricalRewritePolicy policy;
  CategoricalRewritePolicy reference;
  std::vector<BatchEntry> batch;
  TrainConfig cfg;
};

GradCheckProblem MakeGradCheckProblem(uint64_t seed);

}  // namespace qsynth::cli
