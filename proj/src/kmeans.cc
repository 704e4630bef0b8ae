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

#include "descnet/kmeans.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "descnet/random.h"
#include "descnet/text.h"

namespace descnet::cluster {

namespace {

double squared_distance(const PointMatrix& a, Eigen::Index i,
                        const PointMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

PointMatrix init_centroids(const PointMatrix& x, const ClusterConfig& cfg,
                           Rng& rng) {
  const auto n = x.rows();
  const int k = cfg.k;
  PointMatrix c(k, x.cols());
  std::vector<bool> chosen(n, false);
  if (cfg.init == Init::kRandom) {
    std::vector<Eigen::Index> ids(n);
    for (Eigen::Index i = 0; i < n; ++i) ids[i] = i;
    auto picks = rng.sample(ids, k);
    for (int j = 0; j < k; ++j) c.row(j) = x.row(picks[j]);
    return c;
  }
  // k-means++: D^2 weighting; uniform over unchosen points if all weights
  // vanish (duplicate points).
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(n));
  c.row(0) = x.row(first);
  chosen[first] = true;
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x, i, c, j - 1));
      if (!chosen[i]) total += d2[i];
    }
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        pick = i;
        if (u < d2[i]) break;
        u -= d2[i];
      }
    }
    if (pick < 0) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[rng.below(free.size())];
    }
    chosen[pick] = true;
    c.row(j) = x.row(pick);
  }
  return c;
}

void assign_range(const PointMatrix& x, const Eigen::VectorXd& x_norms,
                  const PointMatrix& c, const Eigen::VectorXd& c_norms,
                  Eigen::Index begin, Eigen::Index end, std::vector<int>& out) {
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index b = begin; b < end; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, end - b);
    const Eigen::MatrixXd dots = x.middleRows(b, rows) * c.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < c.rows(); ++j) {
        const double d = x_norms[b + i] + c_norms[j] - 2.0 * dots(i, j);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(j);
        }
      }
      out[b + i] = best;
    }
  }
}

std::vector<int> assign(const PointMatrix& x, const Eigen::VectorXd& x_norms,
                        const PointMatrix& c, int workers) {
  const Eigen::VectorXd c_norms = c.rowwise().squaredNorm();
  std::vector<int> out(x.rows());
  const auto n = x.rows();
  const auto w = std::clamp<Eigen::Index>(workers, 1, std::max<Eigen::Index>(n, 1));
  if (w == 1) {
    assign_range(x, x_norms, c, c_norms, 0, n, out);
    return out;
  }
  std::vector<std::thread> threads;
  for (Eigen::Index t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      assign_range(x, x_norms, c, c_norms, n * t / w, n * (t + 1) / w, out);
    });
  }
  for (auto& th : threads) th.join();
  return out;
}

double objective(const PointMatrix& x, const PointMatrix& c,
                 const std::vector<int>& a) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sum += squared_distance(x, i, c, a[i]);
  return sum;
}

}  // namespace

Clustering kmeans_fit(const PointMatrix& points, const ClusterConfig& cfg) {
  const auto n = points.rows();
  if (cfg.k < 1) throw Error("kmeans: K must be >= 1");
  if (n < cfg.k) {
    throw Error("kmeans: K = " + std::to_string(cfg.k) + " exceeds " +
                std::to_string(n) + " points");
  }
  if (cfg.max_iters < 1) throw Error("kmeans: max_iters must be >= 1");
  if (!points.allFinite()) throw Error("kmeans: non-finite input");

  PointMatrix x = points;
  if (cfg.unit_normalize) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = x.row(i).norm();
      if (norm > 0.0) x.row(i) /= norm;
    }
  }
  const Eigen::VectorXd x_norms = x.rowwise().squaredNorm();
  Rng rng(derive_seed(cfg.seed, "kmeans"));

  Clustering out;
  out.centroids = init_centroids(x, cfg, rng);
  std::vector<int> current;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    std::vector<int> next = assign(x, x_norms, out.centroids, cfg.workers);
    const double j = objective(x, out.centroids, next);
    out.objective_history.push_back(j);
    out.iterations_run = it;
    const bool stable = next == current;
    current = std::move(next);
    out.objective = j;
    if (stable) {
      out.converged = true;
      break;
    }
    const auto& h = out.objective_history;
    if (h.size() >= 2 && h[h.size() - 2] - j <= cfg.rel_tolerance * h[h.size() - 2]) {
      break;
    }
    if (it == cfg.max_iters) break;

    // Means in point order, then repair empty clusters.
    PointMatrix sums = PointMatrix::Zero(cfg.k, x.cols());
    std::vector<int> counts(cfg.k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(current[i]) += x.row(i);
      ++counts[current[i]];
    }
    std::vector<int> empty;
    for (int c = 0; c < cfg.k; ++c) {
      if (counts[c] > 0) {
        out.centroids.row(c) = sums.row(c) / counts[c];
      } else {
        empty.push_back(c);
      }
    }
    if (!empty.empty()) {
      std::vector<double> d(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        d[i] = squared_distance(x, i, out.centroids, current[i]);
      }
      for (int c : empty) {
        Eigen::Index far = 0;
        for (Eigen::Index i = 1; i < n; ++i) {
          if (d[i] > d[far]) far = i;
        }
        out.centroids.row(c) = x.row(far);
        d[far] = -1.0;
      }
    }
  }
  out.assignments = std::move(current);
  return out;
}

Distribution make_distribution(std::vector<double> values) {
  Distribution d;
  std::sort(values.begin(), values.end());
  d.cdf.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    d.cdf[i] = static_cast<double>(i + 1) / static_cast<double>(values.size());
  }
  d.values = std::move(values);
  return d;
}

ClusterStats cluster_stats(std::span<const int> assignments,
                           std::span<const int> labels, int k, int class_count) {
  if (assignments.size() != labels.size()) {
    throw Error("cluster_stats: assignments and labels differ in length");
  }
  ClusterStats s;
  s.clusters.resize(k);
  for (auto& c : s.clusters) c.histogram.assign(class_count, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    ClusterSummary& c = s.clusters.at(assignments[i]);
    ++c.size;
    if (labels[i] >= 0) {
      ++c.known;
      ++c.histogram.at(labels[i]);
    }
  }
  std::vector<double> sizes, entropies, shares;
  for (auto& c : s.clusters) {
    sizes.push_back(c.size);
    if (c.known == 0) continue;
    int top = 0;
    for (int l = 0; l < class_count; ++l) {
      const int h = c.histogram[l];
      if (h > top) {
        top = h;
        c.largest_class = l;
      }
      if (h > 0) {
        const double p = static_cast<double>(h) / c.known;
        c.entropy_bits -= p * std::log2(p);
      }
    }
    c.entropy_bits = std::max(c.entropy_bits, 0.0);
    c.largest_share = static_cast<double>(top) / c.known;
    entropies.push_back(c.entropy_bits);
    shares.push_back(c.largest_share);
  }
  s.size = make_distribution(std::move(sizes));
  s.entropy = make_distribution(std::move(entropies));
  s.largest_share = make_distribution(std::move(shares));
  return s;
}

Quartiles quartiles(std::vector<double> v) {
  Quartiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double frac) {
    const double pos = frac * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.min = v.front();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.max = v.back();
  return q;
}

std::vector<ClassProfile> class_cluster_profile(std::span<const int> assignments,
                                                std::span<const int> labels,
                                                int k, int class_count) {
  const ClusterStats stats = cluster_stats(assignments, labels, k, class_count);
  std::vector<ClassProfile> out(class_count);
  for (const auto& c : stats.clusters) {
    for (int l = 0; l < class_count; ++l) {
      if (c.histogram[l] > 0) out[l].counts.push_back(c.histogram[l]);
    }
  }
  for (auto& p : out) {
    std::sort(p.counts.begin(), p.counts.end());
    p.summary = quartiles(std::vector<double>(p.counts.begin(), p.counts.end()));
  }
  return out;
}

}  // namespace descnet::cluster
