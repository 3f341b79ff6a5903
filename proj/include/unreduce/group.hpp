#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unreduce/core.hpp"
#include "unreduce/expm.hpp"

namespace unreduce {

/// Optional concrete realization of the structure group: a linear map from
/// algebra coordinates to m x m matrices plus an exponential. When `exp` is
/// not supplied the generic `expm` is used.
struct MatrixRealization {
  int dim = 0;
  std::function<Mat(const Vec&)> algebra_matrix;
  std::function<Mat(const Mat&)> exp;

  [[nodiscard]] Mat exponential(const Mat& xi) const {
    return exp ? exp(xi) : expm(xi);
  }
};

/// Structure group data: fiber dimension k, structure constants C^c_{ab}
/// stored as k matrices with structure[c](a, b) = C^c_{ab}, basis names,
/// and an optional matrix realization.
struct GroupModel {
  int fiber_dim = 0;
  std::vector<Mat> structure;
  std::vector<std::string> basis_names;
  std::optional<MatrixRealization> realization;

  [[nodiscard]] double C(int c, int a, int b) const { return structure[c](a, b); }

  [[nodiscard]] bool is_abelian() const {
    for (const auto& m : structure) {
      if (m.cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
  }
};

/// Checks antisymmetry in the lower indices (exact) and the Jacobi identity
/// (within 1e-12; exact for rational constants). Throws validation_error.
inline void validate_group(const GroupModel& g) {
  const int k = g.fiber_dim;
  if (static_cast<int>(g.structure.size()) != k) {
    throw validation_error("group: expected " + std::to_string(k) +
                           " structure matrices, got " + std::to_string(g.structure.size()));
  }
  if (static_cast<int>(g.basis_names.size()) != k) {
    throw validation_error("group: basis_names size mismatch");
  }
  for (int c = 0; c < k; ++c) {
    if (g.structure[c].rows() != k || g.structure[c].cols() != k) {
      throw validation_error("group: structure matrix " + std::to_string(c) + " is not k x k");
    }
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        if (g.C(c, a, b) != -g.C(c, b, a)) {
          throw validation_error("group: structure constants not antisymmetric at (" +
                                 std::to_string(c) + "," + std::to_string(a) + "," +
                                 std::to_string(b) + ")");
        }
      }
    }
  }
  // Jacobi: sum_d (C^d_{ab} C^e_{dc} + C^d_{bc} C^e_{da} + C^d_{ca} C^e_{db}) = 0.
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      for (int c = 0; c < k; ++c) {
        for (int e = 0; e < k; ++e) {
          double s = 0.0;
          for (int d = 0; d < k; ++d) {
            s += g.C(d, a, b) * g.C(e, d, c) + g.C(d, b, c) * g.C(e, d, a) +
                 g.C(d, c, a) * g.C(e, d, b);
          }
          if (std::abs(s) > 1e-12) {
            throw validation_error("group: Jacobi identity fails at (" + std::to_string(a) +
                                   "," + std::to_string(b) + "," + std::to_string(c) + "," +
                                   std::to_string(e) + "), residual " + fmt_double(s));
          }
        }
      }
    }
  }
}

/// Infinitesimal invariance of a symmetric bilinear form B on the algebra:
/// returns max over (a, b, c) of |sum_d (B_{db} C^d_{ca} + B_{ad} C^d_{cb})|.
/// Zero means B is invariant under the adjoint action of the identity
/// component.
[[nodiscard]] inline double ad_invariance_check(const GroupModel& g, const Mat& B) {
  const int k = g.fiber_dim;
  if (B.rows() != k || B.cols() != k) {
    throw validation_error("ad_invariance_check: form must be " + std::to_string(k) + " x " +
                           std::to_string(k));
  }
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-14) {
    throw validation_error("ad_invariance_check: form is not symmetric");
  }
  double worst = 0.0;
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      for (int c = 0; c < k; ++c) {
        double s = 0.0;
        for (int d = 0; d < k; ++d) {
          s += B(d, b) * g.C(d, c, a) + B(a, d) * g.C(d, c, b);
        }
        worst = std::max(worst, std::abs(s));
      }
    }
  }
  return worst;
}

namespace groups {

/// Expands each pairwise bracket of `basis` back in `basis` by least squares
/// on the flattened matrices. Antisymmetry is enforced by construction.
inline std::vector<Mat> structure_from_matrix_basis(const std::vector<Mat>& basis) {
  const int k = static_cast<int>(basis.size());
  const Eigen::Index m2 = basis[0].size();
  Mat flat(m2, k);
  for (int a = 0; a < k; ++a) {
    flat.col(a) = Eigen::Map<const Vec>(basis[a].data(), m2);
  }
  Eigen::ColPivHouseholderQR<Mat> qr(flat);
  if (qr.rank() < k) {
    throw validation_error("structure_from_matrix_basis: basis matrices are linearly dependent");
  }
  std::vector<Mat> C(k, Mat::Zero(k, k));
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      Mat br = basis[a] * basis[b] - basis[b] * basis[a];
      Vec coeff = qr.solve(Eigen::Map<const Vec>(br.data(), m2));
      Mat recon = Mat::Zero(basis[0].rows(), basis[0].cols());
      for (int c = 0; c < k; ++c) {
        recon += coeff[c] * basis[c];
      }
      if ((recon - br).cwiseAbs().maxCoeff() > 1e-10) {
        throw validation_error("structure_from_matrix_basis: bracket leaves the span of the basis");
      }
      for (int c = 0; c < k; ++c) {
        C[c](a, b) = coeff[c];
        C[c](b, a) = -coeff[c];
      }
    }
  }
  return C;
}

[[nodiscard]] inline Mat hat3(const Vec& w) {
  Mat m(3, 3);
  m << 0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0;
  return m;
}

/// so(3) with the cross-product basis: [e_a, e_b] = eps_{abc} e_c.
inline GroupModel so3() {
  GroupModel g;
  g.fiber_dim = 3;
  g.basis_names = {"e1", "e2", "e3"};
  g.structure.assign(3, Mat::Zero(3, 3));
  g.structure[2](0, 1) = 1.0;
  g.structure[2](1, 0) = -1.0;
  g.structure[0](1, 2) = 1.0;
  g.structure[0](2, 1) = -1.0;
  g.structure[1](2, 0) = 1.0;
  g.structure[1](0, 2) = -1.0;
  MatrixRealization r;
  r.dim = 3;
  r.algebra_matrix = [](const Vec& xi) { return hat3(xi); };
  g.realization = r;
  return g;
}

/// Planar rotation group; one angle coordinate, abelian.
inline GroupModel circle() {
  GroupModel g;
  g.fiber_dim = 1;
  g.basis_names = {"w"};
  g.structure.assign(1, Mat::Zero(1, 1));
  return g;
}

/// Additive real line (translations); abelian, no matrix realization.
inline GroupModel real_line() {
  GroupModel g;
  g.fiber_dim = 1;
  g.basis_names = {"t"};
  g.structure.assign(1, Mat::Zero(1, 1));
  return g;
}

/// Multiplicative positive reals realized as 1 x 1 matrices.
inline GroupModel positive_reals() {
  GroupModel g;
  g.fiber_dim = 1;
  g.basis_names = {"s"};
  g.structure.assign(1, Mat::Zero(1, 1));
  MatrixRealization r;
  r.dim = 1;
  r.algebra_matrix = [](const Vec& xi) {
    Mat m(1, 1);
    m(0, 0) = xi[0];
    return m;
  };
  g.realization = r;
  return g;
}

/// Basis of traceless n x n matrices: elementary off-diagonal units E_{ij}
/// in row-major (i, j) order, then diagonal differences
/// H_i = e_{ii} - e_{i+1,i+1} for i = 1..n-1.
inline std::vector<Mat> sl_basis(int n) {
  std::vector<Mat> basis;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      Mat m = Mat::Zero(n, n);
      m(i, j) = 1.0;
      basis.push_back(m);
    }
  }
  for (int i = 0; i + 1 < n; ++i) {
    Mat m = Mat::Zero(n, n);
    m(i, i) = 1.0;
    m(i + 1, i + 1) = -1.0;
    basis.push_back(m);
  }
  return basis;
}

inline std::vector<std::string> sl_basis_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      names.push_back("E" + std::to_string(i + 1) + std::to_string(j + 1));
    }
  }
  for (int i = 0; i + 1 < n; ++i) {
    names.push_back("H" + std::to_string(i + 1));
  }
  return names;
}

inline MatrixRealization span_realization(std::vector<Mat> basis) {
  MatrixRealization r;
  r.dim = static_cast<int>(basis[0].rows());
  r.algebra_matrix = [basis = std::move(basis)](const Vec& xi) {
    Mat m = Mat::Zero(basis[0].rows(), basis[0].cols());
    for (size_t a = 0; a < basis.size(); ++a) {
      m += xi[static_cast<Eigen::Index>(a)] * basis[a];
    }
    return m;
  };
  return r;
}

/// sl(n) with the basis from sl_basis().
inline GroupModel special_linear(int n) {
  GroupModel g;
  auto basis = sl_basis(n);
  g.fiber_dim = static_cast<int>(basis.size());
  g.basis_names = sl_basis_names(n);
  g.structure = structure_from_matrix_basis(basis);
  g.realization = span_realization(basis);
  return g;
}

/// gl(n) with basis {Id} followed by the sl(n) basis.
inline GroupModel general_linear(int n) {
  GroupModel g;
  std::vector<Mat> basis;
  basis.push_back(Mat::Identity(n, n));
  for (auto& m : sl_basis(n)) basis.push_back(std::move(m));
  g.fiber_dim = static_cast<int>(basis.size());
  g.basis_names.push_back("I");
  for (auto& s : sl_basis_names(n)) g.basis_names.push_back(std::move(s));
  g.structure = structure_from_matrix_basis(basis);
  g.realization = span_realization(basis);
  return g;
}

}  // namespace groups
}  // namespace unreduce
