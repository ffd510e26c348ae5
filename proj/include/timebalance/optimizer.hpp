// Copyright (c) 2026 The TimeBalance Authors. All Rights Reserved.
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

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "timebalance/common.hpp"
#include "timebalance/nn.hpp"

namespace tb {

// Linear warmup (lr at epoch e < warmup is base_lr * e / warmup) followed by
// halving on a training-loss plateau: no relative improvement above the
// threshold for `patience` consecutive epochs.
struct LrSchedule {
  double base_lr = 1e-3;
  int warmup_epochs = 10;
  int patience = 5;
  double plateau_threshold = 1e-3;

  double scale = 1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  double lr_for_epoch(int epoch) const {
    if (epoch < warmup_epochs)
      return base_lr * static_cast<double>(epoch) / static_cast<double>(warmup_epochs);
    return base_lr * scale;
  }

  // Call once per epoch with the epoch-mean training loss; plateau tracking
  // starts after warmup.
  void observe_epoch_loss(int epoch, double loss) {
    if (epoch < warmup_epochs) return;
    if (best_loss == std::numeric_limits<double>::infinity()) {
      best_loss = loss;
      return;
    }
    const double denom = std::max(std::abs(best_loss), 1e-12);
    if ((best_loss - loss) / denom > plateau_threshold) {
      best_loss = loss;
      bad_epochs = 0;
    } else if (++bad_epochs >= patience) {
      scale *= 0.5;
      bad_epochs = 0;
    }
  }
};

// Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) over a named subset of the
// model parameters. Moments are matched to parameters by name so the state
// survives checkpoint round-trips.
class AdamState {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  AdamState() = default;

  static AdamState create(const LrSchedule& schedule,
                          const std::vector<Param<float>*>& params) {
    AdamState s;
    s.schedule = schedule;
    for (const auto* p : params) {
      s.names.push_back(p->name);
      s.m.emplace_back(p->value.size(), 0.0f);
      s.v.emplace_back(p->value.size(), 0.0f);
    }
    return s;
  }

  void step(const std::vector<Param<float>*>& params, double lr) {
    check_contract(params.size() == names.size(), "optimizer parameter set changed");
    ++step_count;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param<float>& p = *params[k];
      check_contract(p.name == names[k], "optimizer parameter order changed");
      auto& mk = m[k];
      auto& vk = v[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        mk[i] = static_cast<float>(kBeta1 * mk[i] + (1.0 - kBeta1) * g);
        vk[i] = static_cast<float>(kBeta2 * vk[i] + (1.0 - kBeta2) * g * g);
        const double mhat = mk[i] / bc1;
        const double vhat = vk[i] / bc2;
        p.value[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + kEps));
      }
    }
  }

  LrSchedule schedule;
  std::int64_t step_count = 0;
  std::vector<std::string> names;
  std::vector<std::vector<float>> m, v;
};

}  // namespace tb
