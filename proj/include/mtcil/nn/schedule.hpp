// Copyright 2026 The mtcil Authors
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

#include <limits>
#include <vector>

#include "mtcil/common.hpp"

namespace mtcil::nn {

// Divide the learning rate by 10 once validation loss has stopped improving
// for more than `patience` epochs. The plateau length counts the epoch that
// set the current best, so [.8, .8, .8, .8, .8, .8] is six epochs long.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(int patience = 5, double tolerance = 1e-6, double factor = 0.1)
      : patience_(patience), tolerance_(tolerance), factor_(factor) {}

  // Feed one epoch's validation loss; returns the learning rate to use next.
  double step(double val_loss, double lr) {
    if (val_loss < best_ - tolerance_) {
      best_ = val_loss;
      plateau_ = 1;
    } else {
      ++plateau_;
    }
    if (plateau_ > patience_) {
      plateau_ = 0;
      ++cuts_;
      return lr * factor_;
    }
    return lr;
  }

  int cuts() const { return cuts_; }
  double best() const { return best_; }

 private:
  int patience_;
  double tolerance_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int plateau_ = 0;
  int cuts_ = 0;
};

// Stateless form: replays the whole history and cuts `current_lr` only if the
// last epoch triggers a cut.
inline double lr_schedule(const std::vector<double>& history, double current_lr) {
  if (history.empty()) fail("lr_schedule: empty history");
  PlateauSchedule s;
  double out = current_lr;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double next = s.step(history[i], current_lr);
    if (i + 1 == history.size()) out = next;
  }
  return out;
}

}  // namespace mtcil::nn
