#pragma once

// Shared generators and brute-force oracles for the tests. The oracles are
// deliberately naive (explicit pixel sets, BFS flood fill, pair counting,
// Householder QR, Newton iterations) and share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "nested_metaseg/random.hpp"
#include "nested_metaseg/tensor.hpp"

namespace nms_test {

using namespace nested_metaseg;

inline ProbabilityField random_field(Rng& rng, int rows, int cols, int classes, double peak = 3.0) {
  Tensor3 t(rows, cols, classes);
  std::vector<double> e(static_cast<std::size_t>(classes));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (auto& v : e) s += v = std::exp(peak * rng.normal());
      auto p = t.pixel(r, c);
      for (std::size_t k = 0; k < e.size(); ++k) p[k] = static_cast<float>(e[k] / s);
    }
  }
  return ProbabilityField(std::move(t));
}

inline LabelMap random_labels(Rng& rng, int rows, int cols, int classes) {
  LabelMap m(rows, cols);
  for (auto& v : m.data) v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(classes)));
  return m;
}

// Random axis-aligned rectangles painted over class 0.
inline LabelMap random_rectangles(Rng& rng, int rows, int cols, int classes, int count) {
  LabelMap m(rows, cols, 0);
  for (int i = 0; i < count; ++i) {
    const int r0 = rng.uniform_int(0, rows - 1), r1 = rng.uniform_int(r0, rows - 1);
    const int c0 = rng.uniform_int(0, cols - 1), c1 = rng.uniform_int(c0, cols - 1);
    const int cls = rng.uniform_int(0, classes - 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) m.at(r, c) = cls;
    }
  }
  return m;
}

// 8-connected flood fill; ids in raster order of first pixel, 0 for skipped.
inline std::vector<int> flood_fill(const LabelMap& m, int skip = -1) {
  std::vector<int> ids(m.data.size(), 0);
  int next = 0;
  for (int r0 = 0; r0 < m.rows; ++r0) {
    for (int c0 = 0; c0 < m.cols; ++c0) {
      if (ids[m.index(r0, c0)] != 0 || m.at(r0, c0) == skip) continue;
      ++next;
      std::deque<std::pair<int, int>> queue{{r0, c0}};
      ids[m.index(r0, c0)] = next;
      while (!queue.empty()) {
        const auto [r, c] = queue.front();
        queue.pop_front();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= m.rows || cc >= m.cols) continue;
            if (ids[m.index(rr, cc)] != 0 || m.at(rr, cc) != m.at(r0, c0)) continue;
            ids[m.index(rr, cc)] = next;
            queue.emplace_back(rr, cc);
          }
        }
      }
    }
  }
  return ids;
}

struct OracleIoU {
  bool has_ground_truth = false;
  std::int64_t intersection = 0, union_size = 0, adjusted_union = 0;
};

// Materializes k, K' and Q as explicit pixel sets. Q holds the other
// predicted segments of k's class that meet K'.
inline std::vector<OracleIoU> brute_force_iou(const LabelMap& pred, const LabelMap& gt) {
  const std::vector<int> pid = flood_fill(pred);
  const std::vector<int> gid = flood_fill(gt, kIgnoreLabel);
  const int n_pred = pid.empty() ? 0 : *std::max_element(pid.begin(), pid.end());
  std::vector<OracleIoU> out(static_cast<std::size_t>(n_pred));
  for (int k = 1; k <= n_pred; ++k) {
    std::set<std::size_t> kset;
    int cls = -1;
    for (std::size_t i = 0; i < pid.size(); ++i) {
      if (pid[i] == k) {
        cls = pred.data[i];
        if (gt.data[i] != kIgnoreLabel) kset.insert(i);
      }
    }
    OracleIoU& o = out[static_cast<std::size_t>(k - 1)];
    o.has_ground_truth = !kset.empty();
    if (!o.has_ground_truth) continue;
    std::set<int> touching;
    for (std::size_t i : kset) {
      if (gid[i] != 0 && gt.data[i] == cls) touching.insert(gid[i]);
    }
    std::set<std::size_t> kprime;
    for (std::size_t i = 0; i < gid.size(); ++i) {
      if (touching.count(gid[i])) kprime.insert(i);
    }
    std::set<int> qids;
    for (std::size_t i : kprime) {
      if (pid[i] != k && pred.data[i] == cls) qids.insert(pid[i]);
    }
    std::set<std::size_t> q;
    for (std::size_t i = 0; i < pid.size(); ++i) {
      if (qids.count(pid[i])) q.insert(i);
    }
    std::set<std::size_t> inter, uni, kpq, adj;
    std::set_intersection(kset.begin(), kset.end(), kprime.begin(), kprime.end(), std::inserter(inter, inter.end()));
    std::set_union(kset.begin(), kset.end(), kprime.begin(), kprime.end(), std::inserter(uni, uni.end()));
    std::set_difference(kprime.begin(), kprime.end(), q.begin(), q.end(), std::inserter(kpq, kpq.end()));
    std::set_union(kset.begin(), kset.end(), kpq.begin(), kpq.end(), std::inserter(adj, adj.end()));
    o.intersection = static_cast<std::int64_t>(inter.size());
    o.union_size = static_cast<std::int64_t>(uni.size());
    o.adjusted_union = static_cast<std::int64_t>(adj.size());
  }
  return out;
}

inline double pair_count_auroc(const std::vector<double>& scores, const std::vector<double>& labels) {
  double concordant = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] < 0.5) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] > 0.5) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return pairs > 0.0 ? concordant / pairs : 0.5;
}

using Matrix = std::vector<std::vector<double>>;  // row-major, rows of equal length

// Least squares min ||A x - b|| by Householder QR and back substitution.
inline std::vector<double> qr_least_squares(Matrix a, std::vector<double> b) {
  const std::size_t m = a.size(), n = a.front().size();
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) norm += a[i][j] * a[i][j];
    norm = std::sqrt(norm);
    const double alpha = a[j][j] > 0 ? -norm : norm;
    std::vector<double> v(m, 0.0);
    for (std::size_t i = j; i < m; ++i) v[i] = a[i][j];
    v[j] -= alpha;
    double vv = 0.0;
    for (std::size_t i = j; i < m; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    for (std::size_t k = j; k < n; ++k) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += v[i] * a[i][k];
      for (std::size_t i = j; i < m; ++i) a[i][k] -= 2.0 * dot / vv * v[i];
    }
    double dot = 0.0;
    for (std::size_t i = j; i < m; ++i) dot += v[i] * b[i];
    for (std::size_t i = j; i < m; ++i) b[i] -= 2.0 * dot / vv * v[i];
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t j = n; j-- > 0;) {
    double s = b[j];
    for (std::size_t k = j + 1; k < n; ++k) s -= a[j][k] * x[k];
    x[j] = s / a[j][j];
  }
  return x;
}

// Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t p = j;
    for (std::size_t i = j + 1; i < n; ++i) {
      if (std::abs(a[i][j]) > std::abs(a[p][j])) p = i;
    }
    std::swap(a[j], a[p]);
    std::swap(b[j], b[p]);
    for (std::size_t i = j + 1; i < n; ++i) {
      const double f = a[i][j] / a[j][j];
      for (std::size_t k = j; k < n; ++k) a[i][k] -= f * a[j][k];
      b[i] -= f * b[j];
    }
  }
  std::vector<double> x(n);
  for (std::size_t j = n; j-- > 0;) {
    double s = b[j];
    for (std::size_t k = j + 1; k < n; ++k) s -= a[j][k] * x[k];
    x[j] = s / a[j][j];
  }
  return x;
}

// Logistic MLE on raw features (intercept first) by Newton's method.
inline std::vector<double> newton_logistic(const Matrix& x, const std::vector<double>& y, int iterations = 50) {
  const std::size_t n = x.size(), d = x.front().size() + 1;
  std::vector<double> beta(d, 0.0);
  for (int it = 0; it < iterations; ++it) {
    Matrix h(d, std::vector<double>(d, 0.0));
    std::vector<double> g(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double z = beta[0];
      for (std::size_t j = 1; j < d; ++j) z += beta[j] * x[i][j - 1];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double w = p * (1.0 - p);
      for (std::size_t a = 0; a < d; ++a) {
        const double xa = a == 0 ? 1.0 : x[i][a - 1];
        g[a] += (y[i] - p) * xa;
        for (std::size_t b = 0; b < d; ++b) h[a][b] += w * xa * (b == 0 ? 1.0 : x[i][b - 1]);
      }
    }
    const std::vector<double> step = solve_dense(h, g);
    double change = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      beta[a] += step[a];
      change = std::max(change, std::abs(step[a]));
    }
    if (change < 1e-12) break;
  }
  return beta;
}

// Symmetrized KL written out as KL(a||b) + KL(b||a), scaled by 1/(2C).
inline double scalar_symmetric_kl(const std::vector<double>& a, const std::vector<double>& b) {
  auto clamp = [](double v) { return std::max(v, 1e-10); };
  double kab = 0.0, kba = 0.0;
  for (std::size_t y = 0; y < a.size(); ++y) {
    kab += a[y] * (std::log(clamp(a[y])) - std::log(clamp(b[y])));
    kba += b[y] * (std::log(clamp(b[y])) - std::log(clamp(a[y])));
  }
  return (kab + kba) / (2.0 * static_cast<double>(a.size()));
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nms_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nms_test
