#pragma once

#include <stdexcept>
#include <vector>

#include "swf/state.h"

namespace swf {

class SingularTransform : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// T = I + alpha beta^T with T N(x+) = N(x-).
struct DirectTransform {
  VecX alpha;  // N_theta(x-) - N_theta(x+)
  VecX beta;   // yaw row of the pseudoinverse of N(x+)

  double denom() const { return 1.0 + beta.dot(alpha); }
};

/// T^-1 = I + alpha_p beta^T.
struct RankOneInverse {
  VecX alpha_p;
  VecX beta;
};

/// From two N x 4 bases sharing a layout. Throws SingularTransform when
/// |1 + beta^T alpha| < 1e-12.
DirectTransform make_direct(const MatX& n_minus, const MatX& n_plus);
DirectTransform make_direct(const SwfState& x_minus, const SwfState& x_plus);

RankOneInverse invert_direct(const DirectTransform& t);

/// m <- T^-1 m.
void apply_left(MatX& m, const DirectTransform& t);

/// P <- T^-1 P T^-T in O(N^2), symmetrized.
void apply_direct(MatX& p, const DirectTransform& t);

MatX dense(const DirectTransform& t);

/// Factored T^-1 = T_F T_W T_I T_R from the auxiliary matrix at two estimates.
struct IndirectTransform {
  ErrorLayout layout;
  Mat3 rot_rel = Mat3::Identity();  // R+^T R-
  Mat3 rot_plus = Mat3::Identity();
  Vec3 dpos = Vec3::Zero();  // p- - p+
  Vec3 dvel = Vec3::Zero();
  struct Clone {
    Mat3 rot_rel;
    Mat3 rot_minus;
    Vec3 dpos;
  };
  std::vector<Clone> clones;
  std::vector<Vec3> dfeat;  // pf- - pf+
};

IndirectTransform make_indirect(const SwfState& x_minus, const SwfState& x_plus);

/// m <- T^-1 m, factor by factor.
void apply_left(MatX& m, const IndirectTransform& t);

/// P <- T^-1 P T^-T in O(N^2), symmetrized.
void apply_indirect(MatX& p, const IndirectTransform& t);

/// Symmetrizes and, if a cheap probe sees a negative eigenvalue below
/// -1e-9, adds 1e-12 trace/N jitter. Returns true when jitter was added.
bool repair_psd(MatX& p);

}  // namespace swf
