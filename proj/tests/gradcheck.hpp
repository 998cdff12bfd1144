// Copyright 2026 The VNet Authors
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

// Finite-difference comparison for scalar functions built on a tape.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "vnet/tape.hpp"

namespace gradcheck {

struct Report {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Builds the graph with `f`, backpropagates, then perturbs `samples`
/// randomly chosen coordinates of each input by +-h and compares.
inline Report compare(const std::function<vnet::Var(vnet::Tape&)>& f,
                      const std::vector<vnet::Var>& inputs, std::size_t samples, double h,
                      double floor, std::mt19937_64& rng) {
  {
    vnet::Tape tape;
    for (const auto& v : inputs) vnet::zero_grad(v);
    const vnet::Var root = f(tape);
    tape.backward(root);
  }
  auto value = [&] {
    vnet::Tape tape(false);
    return f(tape)->value[0];
  };
  Report r;
  for (const auto& v : inputs) {
    const std::size_t n = v->value.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, samples));
    for (std::size_t i : idx) {
      const double analytic = v->grad.empty() ? 0.0 : v->grad[i];
      const double numeric = oracle::central_difference(v->value[i], h, value);
      r.max_rel_error = std::max(r.max_rel_error, oracle::relative_error(analytic, numeric, floor));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace gradcheck
