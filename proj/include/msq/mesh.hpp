// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "msq/error.hpp"
#include "msq/hermite.hpp"
#include "msq/refdensity.hpp"

namespace msq {

/// Tensor-product partition of a box. Basis functions live on interior nodes
/// only; index = lexicographic(node - 1) * 2^Dim + sum_j type_j 2^j.
template <int Dim>
class LatticeMesh {
 public:
  static constexpr int kLocal = 1 << (2 * Dim);  ///< local basis functions per element

  explicit LatticeMesh(std::array<std::vector<double>, Dim> points) : points_(std::move(points)) {
    std::size_t stride = 1;
    for (int j = 0; j < Dim; ++j) {
      const auto& y = points_[j];
      require(y.size() >= 2, "mesh: each dimension needs at least one element");
      for (std::size_t l = 1; l < y.size(); ++l) {
        require(y[l] > y[l - 1], "mesh: partition points must be strictly increasing");
      }
      node_stride_[j] = stride;
      stride *= static_cast<std::size_t>(segments(j) - 1);
    }
    interior_nodes_ = stride;
  }

  [[nodiscard]] int segments(int j) const { return static_cast<int>(points_[j].size()) - 1; }
  [[nodiscard]] const std::vector<double>& points(int j) const { return points_[j]; }
  [[nodiscard]] double width(int j, int l) const { return points_[j][l + 1] - points_[j][l]; }
  [[nodiscard]] double lower(int j) const { return points_[j].front(); }
  [[nodiscard]] double upper(int j) const { return points_[j].back(); }

  [[nodiscard]] std::size_t element_count() const {
    std::size_t c = 1;
    for (int j = 0; j < Dim; ++j) c *= static_cast<std::size_t>(segments(j));
    return c;
  }

  /// m_C = 2^Dim prod_j (n_j - 1).
  [[nodiscard]] std::size_t basis_count() const { return interior_nodes_ << Dim; }

  /// Largest ratio between any two element widths.
  [[nodiscard]] double aspect_bound() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int j = 0; j < Dim; ++j) {
      for (int l = 0; l < segments(j); ++l) {
        lo = std::min(lo, width(j, l));
        hi = std::max(hi, width(j, l));
      }
    }
    return hi / lo;
  }

  [[nodiscard]] TruncationBox box() const {
    TruncationBox b;
    for (int j = 0; j < Dim; ++j) {
      b.lower.push_back(lower(j));
      b.upper.push_back(upper(j));
    }
    return b;
  }

  [[nodiscard]] std::array<int, Dim> element_coords(std::size_t e) const {
    std::array<int, Dim> c{};
    for (int j = 0; j < Dim; ++j) {
      c[j] = static_cast<int>(e % static_cast<std::size_t>(segments(j)));
      e /= static_cast<std::size_t>(segments(j));
    }
    return c;
  }

  /// Global index of basis (node, type) or -1 for boundary nodes.
  [[nodiscard]] std::int64_t basis_index(const std::array<int, Dim>& node, const std::array<int, Dim>& type) const {
    std::size_t lin = 0;
    int flags = 0;
    for (int j = 0; j < Dim; ++j) {
      if (node[j] <= 0 || node[j] >= segments(j)) return -1;
      lin += static_cast<std::size_t>(node[j] - 1) * node_stride_[j];
      flags |= type[j] << j;
    }
    return static_cast<std::int64_t>((lin << Dim) | static_cast<std::size_t>(flags));
  }

  /// Global indices of the kLocal local functions of an element; local a has
  /// per-dimension code (a >> 2j) & 3 = 2*corner + type.
  [[nodiscard]] std::array<std::int64_t, kLocal> local_indices(const std::array<int, Dim>& elem) const {
    std::array<std::int64_t, kLocal> out{};
    for (int a = 0; a < kLocal; ++a) {
      std::array<int, Dim> node{};
      std::array<int, Dim> type{};
      for (int j = 0; j < Dim; ++j) {
        const int code = (a >> (2 * j)) & 3;
        node[j] = elem[j] + (code >> 1);
        type[j] = code & 1;
      }
      out[a] = basis_index(node, type);
    }
    return out;
  }

  /// Element containing x (clamped to the box) and local coordinates in [0, 1].
  void locate(const double* x, std::array<int, Dim>& elem, std::array<double, Dim>& t) const {
    for (int j = 0; j < Dim; ++j) {
      const auto& y = points_[j];
      const double xj = std::clamp(x[j], y.front(), y.back());
      auto it = std::upper_bound(y.begin(), y.end(), xj);
      int l = static_cast<int>(it - y.begin()) - 1;
      l = std::clamp(l, 0, segments(j) - 1);
      elem[j] = l;
      t[j] = (xj - y[l]) / width(j, l);
    }
  }

  [[nodiscard]] bool inside(const double* x) const {
    for (int j = 0; j < Dim; ++j) {
      if (x[j] < lower(j) || x[j] > upper(j)) return false;
    }
    return true;
  }

 private:
  std::array<std::vector<double>, Dim> points_;
  std::array<std::size_t, Dim> node_stride_{};
  std::size_t interior_nodes_ = 0;
};

/// Uniform partition; element_size must divide every box extent.
template <int Dim>
LatticeMesh<Dim> build_mesh(const TruncationBox& box, double element_size) {
  require(element_size > 0.0, "mesh: element size must be > 0");
  require(box.dimension() == Dim, "mesh: box dimension mismatch");
  std::array<std::vector<double>, Dim> pts;
  for (int j = 0; j < Dim; ++j) {
    const double extent = box.upper[static_cast<std::size_t>(j)] - box.lower[static_cast<std::size_t>(j)];
    const double ratio = extent / element_size;
    const long count = std::lround(ratio);
    require(count >= 1 && std::abs(ratio - static_cast<double>(count)) <= 1e-9 * std::max(1.0, ratio),
            "mesh: element size must divide the box extent");
    for (long l = 0; l <= count; ++l) {
      pts[j].push_back(box.lower[static_cast<std::size_t>(j)] + static_cast<double>(l) * element_size);
    }
    pts[j].back() = box.upper[static_cast<std::size_t>(j)];
  }
  return LatticeMesh<Dim>(std::move(pts));
}

template <int Dim>
LatticeMesh<Dim> build_mesh(const TruncationBox& box, const std::array<int, Dim>& counts) {
  require(box.dimension() == Dim, "mesh: box dimension mismatch");
  std::array<std::vector<double>, Dim> pts;
  for (int j = 0; j < Dim; ++j) {
    require(counts[j] >= 1, "mesh: element count must be >= 1");
    const double lo = box.lower[static_cast<std::size_t>(j)];
    const double hi = box.upper[static_cast<std::size_t>(j)];
    for (int l = 0; l <= counts[j]; ++l) pts[j].push_back(lo + (hi - lo) * l / counts[j]);
    pts[j].back() = hi;
  }
  return LatticeMesh<Dim>(std::move(pts));
}

template <int Dim>
struct HermiteBasis {
  std::array<int, Dim> node{};
  std::array<int, Dim> type{};
};

template <int Dim>
struct BasisValue {
  double value = 0.0;
  std::array<double, Dim> grad{};
  std::array<std::array<double, Dim>, Dim> hess{};
};

/// Tensor-product basis value and derivatives; zero outside the 2^Dim
/// elements around the node.
template <int Dim>
BasisValue<Dim> evaluate_basis(const LatticeMesh<Dim>& mesh, const HermiteBasis<Dim>& b, const double* x) {
  std::array<Shape1D, Dim> s{};
  for (int j = 0; j < Dim; ++j) {
    const auto& y = mesh.points(j);
    const int i = b.node[j];
    if (i < 0 || i > mesh.segments(j)) return {};
    const double xj = x[j];
    if (i < mesh.segments(j) && xj >= y[i] && xj <= y[i + 1]) {
      s[j] = hermite_shape(b.type[j], (xj - y[i]) / mesh.width(j, i), mesh.width(j, i));
    } else if (i > 0 && xj >= y[i - 1] && xj < y[i]) {
      s[j] = hermite_shape(2 + b.type[j], (xj - y[i - 1]) / mesh.width(j, i - 1), mesh.width(j, i - 1));
    } else {
      return {};
    }
  }
  BasisValue<Dim> out;
  out.value = 1.0;
  for (int j = 0; j < Dim; ++j) out.value *= s[j].value;
  for (int m = 0; m < Dim; ++m) {
    for (int l = 0; l < Dim; ++l) {
      double g = 1.0;
      double h = 1.0;
      for (int j = 0; j < Dim; ++j) {
        if (j == m && j == l) {
          h *= s[j].d2;
        } else if (j == m || j == l) {
          h *= s[j].d1;
        } else {
          h *= s[j].value;
        }
        if (l == 0) g *= (j == m) ? s[j].d1 : s[j].value;
      }
      out.hess[m][l] = h;
      if (l == 0) out.grad[m] = g;
    }
  }
  return out;
}

}  // namespace msq
