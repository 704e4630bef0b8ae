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

// Lloyd's K-means over entity representations, and the per-cluster class
// statistics used for noise flagging and confidence grading.

#ifndef DESCNET_KMEANS_H_
#define DESCNET_KMEANS_H_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace descnet::cluster {

using PointMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Init { kKmeansPlusPlus, kRandom };

struct ClusterConfig {
  int k = 64;
  int max_iters = 100;
  // Stop when the objective improves by less than this fraction.
  double rel_tolerance = 1e-6;
  uint64_t seed = 1;
  Init init = Init::kKmeansPlusPlus;
  bool unit_normalize = false;
  int workers = 1;
};

struct Clustering {
  std::vector<int> assignments;  // per point
  PointMatrix centroids;         // K x R
  double objective = 0.0;        // sum of squared distances
  int iterations_run = 0;
  bool converged = false;        // assignments stable
  // Objective after each assignment step; non-increasing.
  std::vector<double> objective_history;

  int k() const { return static_cast<int>(centroids.rows()); }
};

// One point per row. Every returned assignment is the point's nearest
// centroid, ties to the lowest cluster id. Empty clusters are reseeded with
// the point farthest from its centroid.
Clustering kmeans_fit(const PointMatrix& points, const ClusterConfig& config);

struct ClusterSummary {
  int size = 0;   // all points
  int known = 0;  // points with a label
  std::vector<int> histogram;  // known points per class
  double entropy_bits = 0.0;
  double largest_share = 0.0;
  int largest_class = -1;
};

// Sorted values with their empirical cumulative distribution.
struct Distribution {
  std::vector<double> values;
  std::vector<double> cdf;
};

struct ClusterStats {
  std::vector<ClusterSummary> clusters;
  Distribution size;           // over all clusters
  Distribution entropy;        // over clusters with known points
  Distribution largest_share;  // over clusters with known points
};

// labels[i] < 0 marks an unknown point: counted in size, not in histograms.
ClusterStats cluster_stats(std::span<const int> assignments,
                           std::span<const int> labels, int k, int class_count);

Distribution make_distribution(std::vector<double> values);

struct Quartiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Linear interpolation between order statistics. Empty input gives zeros.
Quartiles quartiles(std::vector<double> values);

struct ClassProfile {
  // Count of the class in each cluster containing it, ascending.
  std::vector<int> counts;
  Quartiles summary;
};

std::vector<ClassProfile> class_cluster_profile(std::span<const int> assignments,
                                                std::span<const int> labels,
                                                int k, int class_count);

}  // namespace descnet::cluster

#endif  // DESCNET_KMEANS_H_
