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

#include "kvpf/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

namespace kvpf {
namespace {

Real evaluate(const std::function<Tensor()>& f, std::uint64_t* signature) {
  testing::reset_kink_signature();
  const Real v = f().item();
  *signature = testing::kink_signature();
  if (!std::isfinite(v)) throw std::runtime_error("gradcheck: objective is not finite");
  return v;
}

}  // namespace

Real relative_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) /
         std::max<Real>(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  std::span<Parameter> params,
                                  const GradCheckOptions& options) {
  const Real eps = options.epsilon;
  if (!(eps >= 1e-6 * (1 - 1e-9) && eps <= 1e-2 * (1 + 1e-9))) {
    throw std::invalid_argument("gradcheck: epsilon must lie in [1e-6, 1e-2]");
  }
  for (Parameter& p : params) p.tensor.zero_grad();
  testing::reset_kink_signature();
  Tensor loss = f();
  const std::uint64_t base = testing::kink_signature();
  const Real f0 = loss.item();
  if (!std::isfinite(loss.item())) throw std::runtime_error("gradcheck: objective is not finite");
  backward(loss);

  size_t total = 0;
  for (const Parameter& p : params) total += p.tensor.size();
  size_t per_param = total;
  if (options.max_coords != 0 && total > std::max<size_t>(options.max_coords, 200)) {
    const size_t budget = std::max<size_t>(options.max_coords, 200);
    per_param = std::max<size_t>(1, (budget + params.size() - 1) / std::max<size_t>(1, params.size()));
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (Parameter& p : params) {
    ParamGradError entry{p.name, 0.0, 0, 0};
    std::vector<size_t> coords(p.tensor.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > per_param) {
      for (size_t i = 0; i < per_param; ++i) {
        std::swap(coords[i], coords[i + rng() % (coords.size() - i)]);
      }
      coords.resize(per_param);
    }
    // Copy the analytic gradient before f() calls rebuild anything.
    std::vector<Real> analytic(p.tensor.size(), 0.0);
    if (!p.tensor.grad().empty()) {
      std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), analytic.begin());
    }
    auto values = p.tensor.mutable_values();
    for (size_t c : coords) {
      const Real saved = values[c];
      bool smooth = false;
      for (Real h = eps; h >= 1e-6 * (1 - 1e-9) && !smooth; h /= 10) {
        // f at saved + k*h for k in [-4, 4], evaluated on demand.
        std::optional<Real> f_at[9];
        bool crossed[9] = {};
        f_at[4] = f0;
        auto at = [&](int k) {
          if (!f_at[k + 4]) {
            std::uint64_t sig = 0;
            values[c] = saved + k * h;
            f_at[k + 4] = evaluate(f, &sig);
            values[c] = saved;
            crossed[k + 4] = sig != base;
          }
          return *f_at[k + 4];
        };
        auto clean = [&](int from, int to) {
          bool ok = true;
          for (int k = from; k <= to && ok; ++k) {
            at(k);
            ok = !crossed[k + 4];
          }
          return ok;
        };
        // Fourth-order central difference, or a fourth-order one-sided
        // difference when a kink lies on the other side.
        std::optional<Real> numeric;
        if (clean(-2, 2)) {
          numeric = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h);
        } else if (clean(1, 4)) {
          numeric = (-25 * f0 + 48 * at(1) - 36 * at(2) + 16 * at(3) - 3 * at(4)) / (12 * h);
        } else if (clean(-4, -1)) {
          numeric = (25 * f0 - 48 * at(-1) + 36 * at(-2) - 16 * at(-3) + 3 * at(-4)) / (12 * h);
        }
        if (!numeric) continue;
        smooth = true;
        entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[c], *numeric));
        ++entry.coords_checked;
      }
      if (!smooth) ++entry.coords_skipped;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.coords_checked += entry.coords_checked;
    report.coords_skipped += entry.coords_skipped;
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace kvpf
