#pragma once

// Truncated Fock-space operators for the atom x cavity x oscillator system.
// Factor order is fixed: atom (2) x cavity (d) x oscillator (d), basis index
// ((i_atom * cavity_dim) + i_cav) * osc_dim + i_osc.

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace hoc {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using cplx = std::complex<double>;

struct invalid_dimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct invalid_index : std::out_of_range {
  using std::out_of_range::out_of_range;
};

enum class Subsystem { atom = 0, cavity = 1, oscillator = 2 };

struct SpaceSpec {
  int atom_dim = 2;
  int cavity_dim = 3;
  int osc_dim = 3;

  SpaceSpec() = default;
  SpaceSpec(int cav, int osc) : cavity_dim(cav), osc_dim(osc) {
    if (cavity_dim < 2 || osc_dim < 2) throw invalid_dimension("mode truncation must be >= 2");
  }

  int total() const { return atom_dim * cavity_dim * osc_dim; }

  int dim_of(Subsystem s) const {
    switch (s) {
      case Subsystem::atom: return atom_dim;
      case Subsystem::cavity: return cavity_dim;
      default: return osc_dim;
    }
  }

  /// Composite basis index of |i_atom, i_cav, i_osc>.
  int index(int ia, int ic, int io) const {
    return (ia * cavity_dim + ic) * osc_dim + io;
  }

  bool operator==(const SpaceSpec& o) const {
    return atom_dim == o.atom_dim && cavity_dim == o.cavity_dim && osc_dim == o.osc_dim;
  }
};

/// Fock-basis lowering operator, <n-1|a|n> = sqrt(n).
inline Mat annihilator(int dim) {
  if (dim < 2) throw invalid_dimension("annihilator needs dim >= 2");
  Mat a = Mat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

/// a^dag a on a single mode.
inline Mat number_op(int dim) {
  Mat a = annihilator(dim);
  return a.adjoint() * a;
}

inline Mat kron(const Mat& A, const Mat& B) {
  Mat C(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      C.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return C;
}

/// Embed a single-mode operator into the composite space, identity elsewhere.
inline Mat embed(const Mat& op, Subsystem which, const SpaceSpec& space) {
  const int d = space.dim_of(which);
  if (op.rows() != d || op.cols() != d)
    throw invalid_dimension("embedded operator does not match the subsystem dimension");
  const Mat ia = Mat::Identity(space.atom_dim, space.atom_dim);
  const Mat ic = Mat::Identity(space.cavity_dim, space.cavity_dim);
  const Mat io = Mat::Identity(space.osc_dim, space.osc_dim);
  switch (which) {
    case Subsystem::atom: return kron(op, kron(ic, io));
    case Subsystem::cavity: return kron(ia, kron(op, io));
    default: return kron(ia, kron(ic, op));
  }
}

/// Basis vector |n_atom, n_cav, n_osc> in the ordered product basis.
inline Vec fock_state(const SpaceSpec& space, int n_atom, int n_cav, int n_osc) {
  if (n_atom < 0 || n_atom >= space.atom_dim || n_cav < 0 || n_cav >= space.cavity_dim ||
      n_osc < 0 || n_osc >= space.osc_dim)
    throw invalid_index("fock_state index outside the truncation");
  Vec v = Vec::Zero(space.total());
  v(space.index(n_atom, n_cav, n_osc)) = 1.0;
  return v;
}

/// Projector onto Fock level `level` of one subsystem, embedded in the full space.
inline Mat level_projector(const SpaceSpec& space, Subsystem which, int level) {
  const int d = space.dim_of(which);
  if (level < 0 || level >= d) throw invalid_index("projector level outside the truncation");
  Mat p = Mat::Zero(d, d);
  p(level, level) = 1.0;
  return embed(p, which, space);
}

inline bool is_hermitian(const Mat& m, double tol = 1e-12) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

}  // namespace hoc
