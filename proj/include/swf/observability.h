#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "swf/state.h"

namespace swf {

/// N x 4 basis [N_p | N_theta] of the four unobservable directions
/// (global translation, yaw about gravity) evaluated at x.
MatX build_basis(const SwfState& x);

/// Basis of an MSCKF-only state (current IMU + clones). Throws InvalidInput
/// when x carries features.
MatX build_top_blocks(const SwfState& x);

/// 3x4 [I | [p]x g] rows of one feature.
Eigen::Matrix<double, 3, 4> feature_sub_basis(const Vec3& p);

/// Auxiliary matrix that makes the basis state independent:
/// build_aux(x) * build_basis(x) == build_const_basis(layout).
MatX build_aux(const SwfState& x);

/// Identity stacks in the position column block, -g in every theta row's
/// yaw column.
MatX build_const_basis(const ErrorLayout& layout);

class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest principal angle (rad) between the column spans. Throws
/// RankDeficient if either input loses rank; spans of different dimension
/// return pi/2.
double subspace_distance(const MatX& a, const MatX& b);

/// Orthonormal basis of span(a) (thin QR); columns below tol * max are dropped.
MatX orthonormal_span(const MatX& a, double tol = 1e-12);

enum class Status { Aligned, Misaligned, Mismatched };
const char* to_string(Status s);

struct SubspaceStatus {
  Status status = Status::Aligned;
  int dim = 4;
  double angle = 0.0;
};

struct AuditConfig {
  double tol_angle = 1e-6;
  double null_tol = 1e-9;   // ||H b|| < null_tol * ||H|| counts as unobservable
  double min_gap = 10.0;    // required singular-value gap for a rank decision
  bool keep_log = false;    // record steps for info_nullspace_crosscheck
};

/// dim != 4 -> Mismatched; angle to build_basis(xstar) < tol -> Aligned.
SubspaceStatus classify(const MatX& basis, const SwfState& xstar, double tol_angle = 1e-6);

struct AuditRecord {
  double t = 0.0;
  std::string step;
  SubspaceStatus status;
  bool inconclusive = false;
};

/// One entry of the Jacobian log used by the information-form crosscheck.
struct LogStep {
  enum class Kind { Propagate, Update, Augment, Marginalize, Transform, FeatureInit };
  Kind kind = Kind::Update;
  MatX a;  // Phi (15x15) | H | T^-1 (dense) | hx1
  MatX b;  // Qd (15x15)  | -  | -            | hf1
  VecX rdiag;
  std::vector<int> keep;  // marginalize: surviving rows
  int insert_at = 0;      // augment: row of the new clone block
};

/// Tracks the estimator's unobservable subspace by pushing a basis through
/// every filter step, independent of the covariance.
class Auditor {
 public:
  Auditor(const SwfState& x0, AuditConfig cfg = {});

  /// B <- Phi_full B; Phi acts on the IMU rows only.
  void propagate(const Eigen::Matrix<double, 15, 15>& phi, const Eigen::Matrix<double, 15, 15>& qd);
  /// B <- B null(H B).
  void update(const MatX& h, const VecX& rdiag);
  /// Appends clone rows copied from the current pose rows (new clone goes
  /// after the existing clones).
  void augment();
  /// Keeps the listed rows (ascending); `clones_after` is the clone count of
  /// the reduced layout.
  void marginalize(const std::vector<int>& keep, int clones_after);
  /// B <- T^-1 B through a caller-supplied left multiplication.
  void transform(const std::function<void(MatX&)>& apply_inverse_left);
  /// New feature constrained by hx1 dx + hf1 df = r1: appends -hf1^-1 hx1 B.
  void feature_init(const MatX& hx1, const Eigen::Matrix3d& hf1, const VecX& r1diag);

  SubspaceStatus classify(const SwfState& xstar) const;
  /// Classifies against xstar and appends a record.
  const AuditRecord& record(double t, const std::string& step, const SwfState& xstar);

  const MatX& basis() const { return basis_; }
  int rows() const { return static_cast<int>(basis_.rows()); }
  const std::vector<AuditRecord>& records() const { return records_; }
  const std::vector<LogStep>& log() const { return log_; }
  const MatX& initial_basis() const { return initial_; }
  int num_clones() const { return num_clones_; }

 private:
  void reorthonormalize();

  AuditConfig cfg_;
  MatX basis_;
  MatX initial_;
  int num_clones_ = 0;
  bool pending_inconclusive_ = false;
  std::vector<AuditRecord> records_;
  std::vector<LogStep> log_;
};

struct CrosscheckResult {
  MatX nullspace;  // orthonormal columns
  bool inconclusive = false;
  VecX eigenvalues;
};

/// Accumulates the information matrix explicitly along the log, starting
/// from `prior` (use a prior that is zero on the unobservable directions),
/// and returns its numerical nullspace (eigenvalues of the Jacobi-scaled
/// information below rel_tol * max).
CrosscheckResult info_nullspace_crosscheck(const MatX& prior, std::span<const LogStep> log, double rel_tol = 1e-8,
                                           double min_gap = 10.0);

/// prior projected onto the orthogonal complement of span(n).
MatX prior_without_directions(const MatX& prior, const MatX& n);

}  // namespace swf
