#include "expo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace expo {

namespace {

using Vec2 = Eigen::Vector2d;

// Hartley normalisation: centroid to origin, mean distance sqrt(2).
Mat3 normalizer(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

Vec2 apply(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * p.homogeneous();
  return q.hnormalized();
}

bool finite(const Mat3& m) { return m.allFinite(); }

double transfer_error_sq(const Mat3& h, const Vec2& a, const Vec2& b) {
  const Vec3 q = h * a.homogeneous();
  if (std::abs(q.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  return (q.hnormalized() - b).squaredNorm();
}

Mat3 normalize_h(Mat3 h) {
  if (std::abs(h(2, 2)) > 1e-12) h /= h(2, 2);
  return h;
}

void gather(const MatchSet& matches, const std::vector<Keypoint>& kps_a, const std::vector<Keypoint>& kps_b,
            std::vector<Vec2>& a, std::vector<Vec2>& b) {
  a.clear();
  b.clear();
  for (const auto& m : matches) {
    a.emplace_back(kps_a.at(m.index_a).x, kps_a.at(m.index_a).y);
    b.emplace_back(kps_b.at(m.index_b).x, kps_b.at(m.index_b).y);
  }
}

std::vector<int> sample_indices(std::mt19937_64& rng, int n, int k) {
  std::vector<int> out;
  while (static_cast<int>(out.size()) < k) {
    const int v = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

template <class Pred>
std::vector<Vec2> pick(const std::vector<Vec2>& pts, const std::vector<int>& idx, Pred) {
  std::vector<Vec2> out;
  for (int i : idx) out.push_back(pts[i]);
  return out;
}

std::vector<Vec2> pick(const std::vector<Vec2>& pts, const std::vector<int>& idx) {
  std::vector<Vec2> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(pts[i]);
  return out;
}

// ORB-SLAM style model scores with unit pixel sigma.
constexpr double kChi2Dof2 = 5.991;
constexpr double kChi2Dof1 = 3.841;

double score_homography(const Mat3& h, const std::vector<Vec2>& a, const std::vector<Vec2>& b, std::vector<bool>& in) {
  const Mat3 hinv = h.inverse();
  double score = 0.0;
  in.assign(a.size(), false);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e1 = transfer_error_sq(h, a[i], b[i]);
    const double e2 = transfer_error_sq(hinv, b[i], a[i]);
    bool ok = true;
    if (e1 > kChi2Dof2) ok = false; else score += kChi2Dof2 - e1;
    if (e2 > kChi2Dof2) ok = false; else score += kChi2Dof2 - e2;
    in[i] = ok;
  }
  return score;
}

double score_fundamental(const Mat3& f, const std::vector<Vec2>& a, const std::vector<Vec2>& b, std::vector<bool>& in) {
  double score = 0.0;
  in.assign(a.size(), false);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 xa = a[i].homogeneous();
    const Vec3 xb = b[i].homogeneous();
    const Vec3 lb = f * xa;  // epipolar line in b
    const Vec3 la = f.transpose() * xb;
    const double num = xb.dot(lb);
    const double e1 = num * num / std::max(lb.head<2>().squaredNorm(), 1e-300);
    const double e2 = num * num / std::max(la.head<2>().squaredNorm(), 1e-300);
    bool ok = true;
    if (e1 > kChi2Dof1) ok = false; else score += kChi2Dof2 - e1;
    if (e2 > kChi2Dof1) ok = false; else score += kChi2Dof2 - e2;
    in[i] = ok;
  }
  return score;
}

struct Hypothesis {
  Mat3 R;
  Vec3 t;
};

struct HypothesisCheck {
  int good = 0;
  double mean_error = std::numeric_limits<double>::infinity();
};

Vec3 triangulate(const Eigen::Matrix<double, 3, 4>& p1, const Eigen::Matrix<double, 3, 4>& p2, const Vec2& a,
                 const Vec2& b) {
  Eigen::Matrix4d m;
  m.row(0) = a.x() * p1.row(2) - p1.row(0);
  m.row(1) = a.y() * p1.row(2) - p1.row(1);
  m.row(2) = b.x() * p2.row(2) - p2.row(0);
  m.row(3) = b.y() * p2.row(2) - p2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(m, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  return x.head<3>() / x(3);
}

HypothesisCheck check_hypothesis(const Hypothesis& hyp, const Mat3& k, const std::vector<Vec2>& a,
                                 const std::vector<Vec2>& b, const std::vector<bool>& in) {
  Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Zero();
  p1.leftCols<3>() = k;
  Eigen::Matrix<double, 3, 4> p2;
  p2.leftCols<3>() = k * hyp.R;
  p2.col(3) = k * hyp.t;
  HypothesisCheck out;
  double err_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!in[i]) continue;
    const Vec3 x1 = triangulate(p1, p2, a[i], b[i]);
    if (!x1.allFinite() || x1.z() <= 0.0) continue;
    const Vec3 x2 = hyp.R * x1 + hyp.t;
    if (x2.z() <= 0.0) continue;
    const double e1 = ((k * x1).hnormalized() - a[i]).squaredNorm();
    const double e2 = ((k * x2).hnormalized() - b[i]).squaredNorm();
    if (e1 > 4.0 || e2 > 4.0) continue;
    ++out.good;
    err_sum += 0.5 * (std::sqrt(e1) + std::sqrt(e2));
  }
  if (out.good > 0) out.mean_error = err_sum / out.good;
  return out;
}

std::vector<Hypothesis> decompose_essential(const Mat3& e) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  Mat3 r1 = u * w * v.transpose();
  Mat3 r2 = u * w.transpose() * v.transpose();
  if (r1.determinant() < 0) r1 = -r1;
  if (r2.determinant() < 0) r2 = -r2;
  Vec3 t = u.col(2).normalized();
  return {{r1, t}, {r1, -t}, {r2, t}, {r2, -t}};
}

// Faugeras decomposition restricted to the four d' > 0 solutions.
std::vector<Hypothesis> decompose_homography(const Eigen::JacobiSVD<Mat3>& svd) {
  const Mat3 u = svd.matrixU();
  const Mat3 vt = svd.matrixV().transpose();
  const Vec3 w = svd.singularValues();
  const double s = u.determinant() * vt.determinant();
  const double d1 = w(0), d2 = w(1), d3 = w(2);
  const double aux1 = std::sqrt((d1 * d1 - d2 * d2) / (d1 * d1 - d3 * d3));
  const double aux3 = std::sqrt((d2 * d2 - d3 * d3) / (d1 * d1 - d3 * d3));
  const double x1[] = {aux1, aux1, -aux1, -aux1};
  const double x3[] = {aux3, -aux3, aux3, -aux3};
  const double aux_s = std::sqrt((d1 * d1 - d2 * d2) * (d2 * d2 - d3 * d3)) / ((d1 + d3) * d2);
  const double ctheta = (d2 * d2 + d1 * d3) / ((d1 + d3) * d2);
  const double stheta[] = {aux_s, -aux_s, -aux_s, aux_s};
  std::vector<Hypothesis> out;
  for (int i = 0; i < 4; ++i) {
    Mat3 rp;
    rp << ctheta, 0, -stheta[i], 0, 1, 0, stheta[i], 0, ctheta;
    const Mat3 r = s * u * rp * vt;
    const Vec3 tp(x1[i], 0.0, -x3[i]);
    const Vec3 t = (u * tp * (d1 - d3)).normalized();
    out.push_back({r, t});
  }
  return out;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace

Mat3 fit_homography(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.size() < 4 || a.size() != b.size()) throw EstimationError("homography needs >= 4 correspondences");
  const Mat3 ta = normalizer(a);
  const Mat3 tb = normalizer(b);
  Eigen::MatrixXd m(2 * a.size(), 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 p = apply(ta, a[i]);
    const Vec2 q = apply(tb, b[i]);
    m.row(2 * i) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
    m.row(2 * i + 1) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(), -q.x() * p.y(), -q.x();
  }
  Eigen::MatrixXd mm = m;
  if (mm.rows() < 9) {
    mm.conservativeResize(9, 9);
    mm.bottomRows(9 - m.rows()).setZero();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mm, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return normalize_h(tb.inverse() * hn * ta);
}

Mat3 fit_fundamental(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.size() < 8 || a.size() != b.size()) throw EstimationError("fundamental matrix needs >= 8 correspondences");
  const Mat3 ta = normalizer(a);
  const Mat3 tb = normalizer(b);
  Eigen::MatrixXd m(a.size(), 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 p = apply(ta, a[i]);
    const Vec2 q = apply(tb, b[i]);
    m.row(i) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(), q.y(), p.x(), p.y(), 1;
  }
  Eigen::MatrixXd mm = m;
  if (mm.rows() < 9) {
    mm.conservativeResize(9, 9);
    mm.bottomRows(9 - m.rows()).setZero();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mm, Eigen::ComputeFullV);
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Mat3 fn;
  fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  Eigen::JacobiSVD<Mat3> svd2(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sv = svd2.singularValues();
  sv(2) = 0.0;
  fn = svd2.matrixU() * sv.asDiagonal() * svd2.matrixV().transpose();
  return tb.transpose() * fn * ta;
}

HomographyFit ransac_homography(const MatchSet& matches, const std::vector<Keypoint>& kps_a,
                                const std::vector<Keypoint>& kps_b, const RansacOptions& options) {
  if (matches.size() < 4) throw EstimationError("homography estimation needs >= 4 matches");
  std::vector<Vec2> a, b;
  gather(matches, kps_a, kps_b, a, b);
  const int n = static_cast<int>(a.size());
  const double th2 = options.threshold_px * options.threshold_px;

  auto evaluate = [&](const Mat3& h, std::vector<bool>& in, double& err) {
    const Mat3 hinv = h.inverse();
    int count = 0;
    err = 0.0;
    in.assign(a.size(), false);
    for (int i = 0; i < n; ++i) {
      const double e1 = transfer_error_sq(h, a[i], b[i]);
      const double e2 = transfer_error_sq(hinv, b[i], a[i]);
      if (e1 <= th2 && e2 <= th2) {
        in[i] = true;
        ++count;
        err += e1 + e2;
      }
    }
    return count;
  };

  std::mt19937_64 rng(options.seed);
  HomographyFit best;
  double best_err = std::numeric_limits<double>::infinity();
  int iterations = options.max_iterations;
  std::vector<bool> in;
  for (int it = 0; it < iterations; ++it) {
    const auto idx = sample_indices(rng, n, 4);
    Mat3 h;
    try {
      h = fit_homography(pick(a, idx), pick(b, idx));
    } catch (const EstimationError&) {
      continue;
    }
    if (!finite(h) || std::abs(h.determinant()) < 1e-12) continue;
    double err = 0.0;
    const int count = evaluate(h, in, err);
    if (count > best.inlier_count || (count == best.inlier_count && err < best_err)) {
      best.H = h;
      best.inliers = in;
      best.inlier_count = count;
      best_err = err;
      const double w = static_cast<double>(count) / n;
      const double p_fail = 1.0 - std::pow(w, 4);
      if (p_fail <= 1e-12) {
        iterations = std::min(iterations, it + 1);
      } else {
        const double need = std::log(1.0 - options.confidence) / std::log(p_fail);
        if (need < iterations) iterations = std::max(it + 1, static_cast<int>(std::ceil(need)));
      }
    }
  }
  if (best.inlier_count < 4) throw EstimationError("no homography with >= 4 inliers");

  std::vector<Vec2> ia, ib;
  for (int i = 0; i < n; ++i) {
    if (best.inliers[i]) {
      ia.push_back(a[i]);
      ib.push_back(b[i]);
    }
  }
  const Mat3 refit = fit_homography(ia, ib);
  if (finite(refit) && std::abs(refit.determinant()) > 1e-12) {
    double err = 0.0;
    const int count = evaluate(refit, in, err);
    if (count >= best.inlier_count) {
      best.H = refit;
      best.inliers = in;
      best.inlier_count = count;
    }
  }
  best.H = normalize_h(best.H);
  return best;
}

PoseEstimate two_view_pose(const MatchSet& matches, const std::vector<Keypoint>& kps_a,
                           const std::vector<Keypoint>& kps_b, const Intrinsics& intr, const TwoViewOptions& options) {
  if (matches.size() < 8) throw EstimationError("two-view reconstruction needs >= 8 matches");
  std::vector<Vec2> a, b;
  gather(matches, kps_a, kps_b, a, b);
  const int n = static_cast<int>(a.size());

  std::mt19937_64 rng(options.seed);
  std::vector<std::vector<int>> sets;
  for (int it = 0; it < options.iterations; ++it) sets.push_back(sample_indices(rng, n, 8));

  Mat3 best_h = Mat3::Identity();
  Mat3 best_f = Mat3::Zero();
  double sh = -1.0;
  double sf = -1.0;
  std::vector<bool> in_h, in_f, tmp;
  for (const auto& set : sets) {
    const auto sa = pick(a, set);
    const auto sb = pick(b, set);
    try {
      const Mat3 h = fit_homography(sa, sb);
      if (finite(h) && std::abs(h.determinant()) > 1e-12) {
        const double s = score_homography(h, a, b, tmp);
        if (s > sh) {
          sh = s;
          best_h = h;
          in_h = tmp;
        }
      }
    } catch (const EstimationError&) {
    }
    try {
      const Mat3 f = fit_fundamental(sa, sb);
      if (finite(f)) {
        const double s = score_fundamental(f, a, b, tmp);
        if (s > sf) {
          sf = s;
          best_f = f;
          in_f = tmp;
        }
      }
    } catch (const EstimationError&) {
    }
  }
  sh = std::max(sh, 0.0);
  sf = std::max(sf, 0.0);
  if (sh + sf <= 0.0) throw EstimationError("neither homography nor fundamental matrix found support");

  Mat3 k;
  k << intr.fx, 0, intr.cx, 0, intr.fy, intr.cy, 0, 0, 1;
  const Mat3 kinv = k.inverse();

  const bool use_h = sh / (sh + sf) > options.model_ratio;
  std::vector<bool> in = use_h ? in_h : in_f;
  const int inliers = static_cast<int>(std::count(in.begin(), in.end(), true));
  if (inliers < 8) throw EstimationError("too few inliers for two-view reconstruction");

  // Refit the winning model on its inliers.
  std::vector<Vec2> ia, ib;
  for (int i = 0; i < n; ++i) {
    if (in[i]) {
      ia.push_back(a[i]);
      ib.push_back(b[i]);
    }
  }
  PoseEstimate out;
  out.from_homography = use_h;
  out.inlier_count = inliers;
  std::vector<Hypothesis> hyps;
  if (use_h) {
    Mat3 h = fit_homography(ia, ib);
    if (!finite(h)) h = best_h;
    const Mat3 a_mat = kinv * h * k;
    Eigen::JacobiSVD<Mat3> svd(a_mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 w = svd.singularValues();
    if ((w(0) - w(2)) / w(1) < options.rotation_only_tolerance) {
      // No parallax: the homography is a conjugated rotation.
      out.rotation = nearest_rotation(a_mat / std::cbrt(a_mat.determinant()));
      out.translation = Vec3::Zero();
      out.degenerate_translation = true;
      const Mat3 hr = k * out.rotation * kinv;
      double err = 0.0;
      for (std::size_t i = 0; i < ia.size(); ++i) err += std::sqrt(transfer_error_sq(hr, ia[i], ib[i]));
      out.mean_reproj_error = err / static_cast<double>(ia.size());
      return out;
    }
    hyps = decompose_homography(svd);
  } else {
    Mat3 f = fit_fundamental(ia, ib);
    if (!finite(f)) f = best_f;
    hyps = decompose_essential(k.transpose() * f * k);
  }

  int best_idx = -1;
  HypothesisCheck best;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto c = check_hypothesis(hyps[i], k, a, b, in);
    if (c.good > best.good || (c.good == best.good && c.good > 0 && c.mean_error < best.mean_error)) {
      best = c;
      best_idx = static_cast<int>(i);
    }
  }
  if (best_idx < 0 || best.good * 2 < inliers) {
    throw AmbiguousMotionError("no motion hypothesis puts >= 50% of points in front of both cameras");
  }
  out.rotation = nearest_rotation(hyps[best_idx].R);
  const Vec3 t = hyps[best_idx].t;
  if (t.norm() > 1e-6) {
    out.translation = t.normalized();
  } else {
    out.degenerate_translation = true;
  }
  out.mean_reproj_error = best.mean_error;
  return out;
}

}  // namespace expo
