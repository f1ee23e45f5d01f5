#include "m4nls/linearization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace m4nls {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd field_to_vec(const Field& f) {
  VectorXd v(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) v[long(i)] = f.values[i].real();
  return v;
}

Field vec_to_field(const GridPtr& grid, const VectorXd& v) {
  Field f = Field::zeros(grid, FieldKind::real);
  for (long i = 0; i < v.size(); ++i) f.values[std::size_t(i)] = cplx(v[i], 0.0);
  return f;
}

// |u*|^(2 sigma) sampled once; the linearized operators differ only in the
// multiple of this potential.
std::vector<double> potential_of(const Field& u_star, double sigma) {
  std::vector<double> pot(u_star.size());
  for (std::size_t i = 0; i < u_star.size(); ++i) {
    const double m2 = std::norm(u_star.values[i]);
    pot[i] = m2 < 1e-300 ? 0.0 : std::exp(sigma * std::log(m2));
  }
  return pot;
}

struct LinearizedApplier {
  GridPtr grid;
  Params params;
  std::vector<double> pot;
  double coupling;  // 2 sigma + 1 for L1, 1 for L2

  VectorXd operator()(const VectorXd& v) const {
    Field f = vec_to_field(grid, v);
    Field lin = apply_linear_operator(params, f);
    VectorXd out(v.size());
    for (long i = 0; i < v.size(); ++i)
      out[i] = lin.values[std::size_t(i)].real() - coupling * pot[std::size_t(i)] * v[i];
    return out;
  }

  // preconditioner: inverse of the constant-coefficient part
  VectorXd precondition(const VectorXd& v) const {
    Field f = vec_to_field(grid, v);
    Field out = invert_linear(params, f);
    return field_to_vec(out);
  }
};

double deterministic_uniform(std::uint64_t& state) {
  // splitmix64 step, mapped to [-1, 1)
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z = z ^ (z >> 31);
  return 2.0 * (double(z >> 11) * 0x1.0p-53) - 1.0;
}

MatrixXd orthonormalize(const MatrixXd& s, double drop_tol = 1e-12) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(s);
  const long r = std::min<long>(s.cols(), qr.rank());
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(s.rows(), r);
  // drop columns whose diagonal R entry collapsed
  long keep = 0;
  const double scale = std::abs(qr.matrixR()(0, 0));
  for (long c = 0; c < r; ++c)
    if (std::abs(qr.matrixR()(c, c)) > drop_tol * scale) ++keep;
  return q.leftCols(std::max<long>(keep, 1));
}

}  // namespace

Field apply_linearized(const Field& u_star, const Field& v, const Params& p, LinearizedOp which) {
  if (!u_star.grid->compatible_with(*v.grid))
    throw std::invalid_argument("apply_linearized: grid mismatch");
  Field lin = apply_linear_operator(p, v);
  const double coupling = which == LinearizedOp::L1 ? 2.0 * p.sigma + 1.0 : 1.0;
  const auto pot = potential_of(u_star, p.sigma);
  for (std::size_t i = 0; i < lin.values.size(); ++i)
    lin.values[i] -= coupling * pot[i] * v.values[i];
  return lin;
}

SpectrumReport smallest_eigenpairs(const Field& u_star, const Params& p, LinearizedOp which,
                                   int k, const EigenOptions& opt) {
  if (k < 1 || k > 10) throw std::invalid_argument("smallest_eigenpairs: k must be in 1..10");
  const long n = long(u_star.size());
  LinearizedApplier A{u_star.grid, p, potential_of(u_star, p.sigma),
                      which == LinearizedOp::L1 ? 2.0 * p.sigma + 1.0 : 1.0};

  const int m = std::min<long>(k + 2, n);

  // Seed block: u*, its partial derivatives (good kernel guesses), randoms.
  MatrixXd x(n, m);
  int col = 0;
  x.col(col++) = field_to_vec(u_star);
  for (int d = 0; d < p.dim && col < m; ++d)
    x.col(col++) = field_to_vec(derivative_axis(u_star, d));
  std::uint64_t rng = opt.seed;
  for (; col < m; ++col)
    for (long i = 0; i < n; ++i) x(i, col) = deterministic_uniform(rng);
  x = orthonormalize(x);

  auto apply_block = [&](const MatrixXd& s) {
    MatrixXd out(n, s.cols());
    for (long c = 0; c < s.cols(); ++c) out.col(c) = A(s.col(c));
    return out;
  };

  // Rayleigh-Ritz in the initial block
  MatrixXd ax = apply_block(x);
  Eigen::SelfAdjointEigenSolver<MatrixXd> small(x.transpose() * ax);
  VectorXd theta = small.eigenvalues();
  x = x * small.eigenvectors();
  ax = ax * small.eigenvectors();

  MatrixXd p_dir(n, 0);
  VectorXd resnorm = VectorXd::Constant(m, 1.0);

  for (int it = 0; it < opt.max_iter; ++it) {
    MatrixXd r = ax - x * theta.asDiagonal();
    bool done = true;
    for (int c = 0; c < std::min(k, int(x.cols())); ++c) {
      resnorm[c] = r.col(c).norm();  // unit eigenvector normalization
      if (resnorm[c] > opt.tol) done = false;
    }
    if (done) break;

    MatrixXd w(n, r.cols());
    for (long c = 0; c < r.cols(); ++c) w.col(c) = A.precondition(r.col(c));

    MatrixXd s(n, x.cols() + w.cols() + p_dir.cols());
    s << x, w, p_dir;
    s = orthonormalize(s);
    MatrixXd as = apply_block(s);
    Eigen::SelfAdjointEigenSolver<MatrixXd> rr(s.transpose() * as);
    const long take = std::min<long>(m, s.cols());
    MatrixXd c = rr.eigenvectors().leftCols(take);
    theta = rr.eigenvalues().head(take);
    MatrixXd x_new = s * c;
    ax = as * c;
    // conjugate directions: the part of the new block outside the old one
    MatrixXd cp = c;
    cp.topRows(std::min<long>(x.cols(), cp.rows())).setZero();
    p_dir = s * cp;
    if (p_dir.cols() > 0) p_dir = orthonormalize(p_dir, 1e-8);
    x = x_new;
  }

  SpectrumReport rep;
  rep.op = which;
  const double cell = std::sqrt(u_star.grid->cell_volume());
  const int count = std::min<long>(k, x.cols());
  for (int c = 0; c < count; ++c) {
    rep.eigenvalues.push_back(theta[c]);
    VectorXd r = A(x.col(c)) - theta[c] * x.col(c);
    rep.eigen_residuals.push_back(r.norm());
    VectorXd ev = x.col(c) / (x.col(c).norm() * cell);  // unit L2 integral norm
    rep.eigenvectors.push_back(vec_to_field(u_star.grid, ev));
  }

  // kernel tolerance: either supplied or from the gap estimate
  double ktol = opt.kernel_tol;
  const double scale =
      std::max({std::abs(rep.eigenvalues.front()), std::abs(rep.eigenvalues.back()), 1e-30});
  if (ktol <= 0.0) {
    double gap = 0.0;
    for (double ev : rep.eigenvalues)
      if (ev > 1e-4 * scale) {
        gap = ev;
        break;
      }
    ktol = gap > 0.0 ? 1e-6 * gap : 1e-10 * scale;
  }
  rep.kernel_tol = ktol;
  for (double ev : rep.eigenvalues) {
    if (ev <= -ktol) ++rep.n_negative;
    if (std::abs(ev) < ktol) ++rep.kernel_dim_est;
  }

  const double res = el_residual(p, u_star);
  if (res > 1e-6) {
    std::ostringstream os;
    os << "u_star residual too large (" << res << ")";
    rep.warning = os.str();
  }

  for (double r : rep.eigen_residuals)
    if (r > 10 * opt.tol)
      throw NumericalError("smallest_eigenpairs: eigensolver did not reach the "
                           "residual tolerance within the iteration budget");
  return rep;
}

NondegeneracyReport nondegeneracy_report(const Field& u_star, const Params& p,
                                         double kernel_tol) {
  const int k = std::min(p.dim + 4, 10);
  EigenOptions opt;
  opt.kernel_tol = kernel_tol;
  SpectrumReport rep = smallest_eigenpairs(u_star, p, LinearizedOp::L1, k, opt);

  NondegeneracyReport out;
  out.kernel_tol = rep.kernel_tol;
  const double scale =
      std::max({std::abs(rep.eigenvalues.front()), std::abs(rep.eigenvalues.back()), 1e-30});
  for (double ev : rep.eigenvalues)
    if (ev > std::max(rep.kernel_tol, 1e-4 * scale)) {
      out.spectral_gap = ev;
      break;
    }
  if (kernel_tol > 0.0 && out.spectral_gap > 0.0 && kernel_tol >= out.spectral_gap) {
    std::ostringstream os;
    os << "nondegeneracy_report: kernel tolerance " << kernel_tol
       << " is coarser than the spectral gap " << out.spectral_gap;
    throw NumericalError(os.str());
  }
  out.kernel_dim = rep.kernel_dim_est;
  out.kernel_dim_beyond_translations = std::max(0, rep.kernel_dim_est - p.dim);
  out.verdict = out.kernel_dim_beyond_translations == 0 ? "nondegenerate at tolerance"
                                                        : "extra kernel directions detected";
  return out;
}

StabilityConditionResult stability_condition(const Field& u_star, const Params& p) {
  if (u_star.max_abs() == 0.0)
    throw std::invalid_argument("stability_condition: zero right-hand side");
  const long n = long(u_star.size());

  SpectrumReport spec = smallest_eigenpairs(u_star, p, LinearizedOp::L1, p.dim + 2);
  LinearizedApplier A{u_star.grid, p, potential_of(u_star, p.sigma), 2.0 * p.sigma + 1.0};

  // orthonormal kernel basis (plain dot product)
  std::vector<VectorXd> kernel;
  for (std::size_t i = 0; i < spec.eigenvalues.size(); ++i) {
    if (std::abs(spec.eigenvalues[i]) < spec.kernel_tol) {
      VectorXd e = field_to_vec(spec.eigenvectors[i]);
      for (const auto& q : kernel) e -= q.dot(e) * q;
      const double nn = e.norm();
      if (nn > 1e-12) kernel.push_back(e / nn);
    }
  }

  VectorXd b = field_to_vec(u_star);
  const double bnorm = b.norm();
  for (const auto& q : kernel) {
    const double comp = std::abs(q.dot(b)) / bnorm;
    if (comp > 1e-6) {
      std::ostringstream os;
      os << "stability_condition: right-hand side has kernel component " << comp;
      throw NumericalError(os.str());
    }
  }

  auto project = [&](VectorXd v) {
    for (const auto& q : kernel) v -= q.dot(v) * q;
    return v;
  };
  auto a_op = [&](const VectorXd& v) { return project(A(project(v))); };
  auto m_op = [&](const VectorXd& v) { return project(A.precondition(project(v))); };

  b = project(b);

  // preconditioned MINRES on the deflated system
  VectorXd x = VectorXd::Zero(n);
  VectorXd r1 = b;
  VectorXd y = m_op(r1);
  double beta1 = std::sqrt(r1.dot(y));
  StabilityConditionResult out;
  out.kernel_dim = int(kernel.size());
  if (beta1 == 0.0) {
    out.integral = 0.0;
    out.solve_residual = 0.0;
    return out;
  }
  VectorXd r2 = r1;
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  VectorXd w = VectorXd::Zero(n), w2 = VectorXd::Zero(n);
  const int maxit = 2000;
  const double target = 1e-10;
  int itn = 0;
  for (itn = 1; itn <= maxit; ++itn) {
    const double s = 1.0 / beta;
    VectorXd v = s * y;
    y = a_op(v);
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    y = m_op(r2);
    oldb = beta;
    beta = std::sqrt(std::max(r2.dot(y), 0.0));
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    VectorXd w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;
    if (phibar <= target * beta1) {
      const double true_res = (a_op(x) - b).norm() / bnorm;
      if (true_res < 1e-9) break;
    }
    if (beta <= 1e-300) break;
  }
  out.iterations = itn;
  out.solve_residual = (a_op(x) - b).norm() / bnorm;
  if (out.solve_residual > 1e-8)
    throw NumericalError("stability_condition: deflated solve did not converge");
  Field v_field = vec_to_field(u_star.grid, x);
  out.integral = inner_l2(v_field, u_star);
  return out;
}

}  // namespace m4nls
