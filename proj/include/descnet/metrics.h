// Copyright 2026 The descnet Authors.
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

#ifndef DESCNET_METRICS_H_
#define DESCNET_METRICS_H_

#include <span>
#include <vector>

namespace descnet::confidence {

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;  // gold count
  int predicted = 0;
};

struct PrfReport {
  std::vector<ClassPrf> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// One-vs-rest precision, recall and F1 per class (0 when undefined) and
// their unweighted means over all class_count classes.
PrfReport macro_prf(std::span<const int> predicted, std::span<const int> gold,
                    int class_count);

}  // namespace descnet::confidence

#endif  // DESCNET_METRICS_H_
