// Copyright 2026 The kvpf Authors.
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

#ifndef KVPF_GRADCHECK_H_
#define KVPF_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kvpf/tensor.h"

namespace kvpf {

struct GradCheckOptions {
  Real epsilon = 1e-3;
  // Coordinates checked across all parameters; 0 checks every coordinate.
  // Budgets below 200 are raised to 200.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

struct ParamGradError {
  std::string name;
  Real max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;
};

struct GradCheckReport {
  Real max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  // Coordinates where every step down to 1e-6 crossed a relu kink.
  std::size_t coords_skipped = 0;
  std::vector<ParamGradError> per_param;
};

// |a - b| / max(1e-8, |a| + |b|)
Real relative_error(Real analytic, Real numeric);

// Compares backward() of the scalar built by `f` against fourth-order finite
// differences over the parameters' coordinates. A step whose stencil changes
// the relu sign pattern (testing::kink_signature) falls back to a one-sided
// stencil on the smooth side, then to a tenth of the step, down to 1e-6; a
// coordinate with no smooth stencil is skipped. `f` must rebuild its graph
// from the current parameter values on every call. Parameter gradients are
// zeroed before and left holding the analytic gradient afterwards. Throws
// std::runtime_error if f is non-finite and std::invalid_argument if epsilon
// lies outside [1e-6, 1e-2].
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  std::span<Parameter> params,
                                  const GradCheckOptions& options = {});

}  // namespace kvpf

#endif  // KVPF_GRADCHECK_H_
