#include "dcflex/closed_loop.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace dcflex {

namespace {

using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// same bound test as the controller's projection, so signatures and
// projected rates always agree
bool at_bound(double x, double bound) {
  return std::abs(x - bound) <= 1e-12 * std::max(1.0, std::abs(bound));
}

// dt*phi1(z) with phi1(z) = (e^z - 1)/z; series near 0, and for strongly
// damped modes e^z underflows leaving the correct -1/lambda limit
std::complex<double> dt_phi1(std::complex<double> lambda, double dt) {
  const std::complex<double> z = lambda * dt;
  if (std::abs(z) < 1e-8) return dt * (1.0 + z / 2.0 + z * z / 6.0);
  return (std::exp(z) - 1.0) / lambda;
}

// Osborne balancing, radix-2 so it is exact in floating point. Returns the
// diagonal d with B = d^-1 A d having commensurate row/column norms; the
// eigensolver is much happier when entries span 1e-6..1e10.
Eigen::VectorXd balance(Eigen::MatrixXd& A) {
  const Eigen::Index N = A.rows();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(N);
  for (int pass = 0; pass < 100; ++pass) {
    bool done = true;
    for (Eigen::Index i = 0; i < N; ++i) {
      double c = A.col(i).cwiseAbs().sum() - std::abs(A(i, i));
      double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      while (c < r / 2.0) {
        c *= 2.0;
        r /= 2.0;
        f *= 2.0;
      }
      while (c >= r * 2.0) {
        c /= 2.0;
        r *= 2.0;
        f /= 2.0;
      }
      if (f != 1.0 && c + r < 0.95 * s) {
        d[i] *= f;
        A.col(i) *= f;
        A.row(i) /= f;
        done = false;
      }
    }
    if (done) break;
  }
  return d;
}

}  // namespace

struct ClosedLoopSystem::Piece {
  std::vector<int> free_idx;
  std::vector<int> pinned_idx;
  Eigen::VectorXd pinned_vals;  // aligned with pinned_idx
  Eigen::MatrixXd A_ff;
  Eigen::VectorXd b_eff;
  double a_norm = 0.0;
  // modal factors of the balanced reduced matrix
  Eigen::VectorXd dscale;
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd S;
  Eigen::PartialPivLU<Eigen::MatrixXcd> S_lu;
  bool modal_ok = false;
};

ClosedLoopSystem::ClosedLoopSystem(GridTopology topo, GridParams params,
                                   ControllerGains gains,
                                   ConstraintSpec constraints)
    : topo_(std::move(topo)),
      p_(std::move(params)),
      gains_(gains),
      constraints_(constraints) {
  topo_.validate();
  p_.validate(topo_);
  gains_.validate();
  if (constraints_.voltage_band && !(constraints_.tau_eta > 0.0))
    throw std::invalid_argument("closed loop: tau_eta must be > 0");
  lay_.n = topo_.n_nodes;
  lay_.m = topo_.n_edges();
  lay_.band = constraints_.voltage_band;
}

ClosedLoopSystem::~ClosedLoopSystem() = default;
ClosedLoopSystem::ClosedLoopSystem(ClosedLoopSystem&&) noexcept = default;
ClosedLoopSystem& ClosedLoopSystem::operator=(ClosedLoopSystem&&) noexcept =
    default;

Eigen::VectorXd ClosedLoopSystem::pack(const GridState& gs,
                                       const ControllerState& cs) const {
  const int n = lay_.n, m = lay_.m;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay_.size());
  for (int i = 0; i < n; ++i) {
    x[lay_.I_s(i)] = gs.I_s[i];
    x[lay_.V(i)] = gs.V[i];
    x[lay_.u_s(i)] = cs.u_s_star[i];
    x[lay_.u_l(i)] = cs.u_l_star[i];
    x[lay_.I_s_star(i)] = cs.I_s_star[i];
    x[lay_.V_star(i)] = cs.V_star[i];
    x[lay_.lambda_a(i)] = cs.lambda_a[i];
    x[lay_.lambda_b(i)] = cs.lambda_b[i];
    if (lay_.band) {
      x[lay_.eta_min(i)] = cs.eta_min[i];
      x[lay_.eta_max(i)] = cs.eta_max[i];
    }
  }
  for (int k = 0; k < m; ++k) x[lay_.I(k)] = gs.I[k];
  return x;
}

void ClosedLoopSystem::unpack(const Eigen::VectorXd& x, GridState& gs,
                              ControllerState& cs) const {
  const int n = lay_.n, m = lay_.m;
  if (x.size() != lay_.size())
    throw std::invalid_argument("closed loop: state size mismatch");
  gs.I_s.resize(n);
  gs.I.resize(m);
  gs.V.resize(n);
  cs = ControllerState::zero(n);
  for (int i = 0; i < n; ++i) {
    gs.I_s[i] = x[lay_.I_s(i)];
    gs.V[i] = x[lay_.V(i)];
    cs.u_s_star[i] = x[lay_.u_s(i)];
    cs.u_l_star[i] = x[lay_.u_l(i)];
    cs.I_s_star[i] = x[lay_.I_s_star(i)];
    cs.V_star[i] = x[lay_.V_star(i)];
    cs.lambda_a[i] = x[lay_.lambda_a(i)];
    cs.lambda_b[i] = x[lay_.lambda_b(i)];
    if (lay_.band) {
      cs.eta_min[i] = x[lay_.eta_min(i)];
      cs.eta_max[i] = x[lay_.eta_max(i)];
    }
  }
  for (int k = 0; k < m; ++k) gs.I[k] = x[lay_.I(k)];
}

Eigen::VectorXd ClosedLoopSystem::cold_start() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay_.size());
  for (int i = 0; i < lay_.n; ++i) {
    x[lay_.V(i)] = p_.V_d[i];
    x[lay_.V_star(i)] = p_.V_d[i];
    x[lay_.u_s(i)] = p_.V_d[i];
    x[lay_.u_l(i)] = 1.0;
  }
  return x;
}

Eigen::VectorXd ClosedLoopSystem::rate(const Eigen::VectorXd& x) const {
  GridState gs;
  ControllerState cs;
  unpack(x, gs, cs);
  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, p_, constraints_, input, ports);

  ControllerState crate =
      controller_derivative(topo_, p_, gains_, constraints_, cs, ports);
  project_box_rates(p_, constraints_, cs, crate);

  const int n = lay_.n, m = lay_.m;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(lay_.size());
  // plant rows, literal (the controller output is applied unsaturated); the
  // source/load filter sums are small so long double is belt and braces here
  VectorXld bi = VectorXld::Zero(n);
  for (int k = 0; k < m; ++k) {
    const auto [ea, eb] = topo_.edges[k];
    const long double Ik = x[lay_.I(k)];
    bi[ea] += Ik;
    bi[eb] -= Ik;
    r[lay_.I(k)] = static_cast<double>(
        (-static_cast<long double>(p_.R_line[k]) * Ik -
         (static_cast<long double>(x[lay_.V(ea)]) - x[lay_.V(eb)])) /
        p_.L_line[k]);
  }
  for (int i = 0; i < n; ++i) {
    r[lay_.I_s(i)] = static_cast<double>(
        (-static_cast<long double>(p_.R_s[i]) * x[lay_.I_s(i)] -
         x[lay_.V(i)] + x[lay_.u_s(i)]) /
        p_.L_s[i]);
    r[lay_.V(i)] = static_cast<double>(
        (static_cast<long double>(x[lay_.I_s(i)]) + bi[i] -
         static_cast<long double>(p_.I_l[i]) * input.u_l[i]) /
        p_.C[i]);
    r[lay_.u_s(i)] = crate.u_s_star[i];
    r[lay_.u_l(i)] = crate.u_l_star[i];
    r[lay_.I_s_star(i)] = crate.I_s_star[i];
    r[lay_.V_star(i)] = crate.V_star[i];
    r[lay_.lambda_a(i)] = crate.lambda_a[i];
    r[lay_.lambda_b(i)] = crate.lambda_b[i];
    if (lay_.band) {
      r[lay_.eta_min(i)] = crate.eta_min[i];
      r[lay_.eta_max(i)] = crate.eta_max[i];
    }
  }
  return r;
}

std::vector<char> ClosedLoopSystem::signature(const Eigen::VectorXd& x) const {
  GridState gs;
  ControllerState cs;
  unpack(x, gs, cs);
  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, p_, constraints_, input, ports);
  const ControllerState crate =
      controller_derivative(topo_, p_, gains_, constraints_, cs, ports);

  const int n = lay_.n;
  std::vector<char> sig(static_cast<std::size_t>(lay_.band ? 3 * n : n), 0);
  for (int i = 0; i < n; ++i) {
    if (constraints_.clamp_u_l) {
      // strictly outside the box counts as pinned so an overshooting trial
      // step disagrees with the pre-step signature and gets rejected
      if (cs.u_l_star[i] < p_.u_l_min[i] && !at_bound(cs.u_l_star[i], p_.u_l_min[i]))
        sig[static_cast<std::size_t>(i)] = 1;
      else if (cs.u_l_star[i] > 1.0 && !at_bound(cs.u_l_star[i], 1.0))
        sig[static_cast<std::size_t>(i)] = 2;
      else if (at_bound(cs.u_l_star[i], p_.u_l_min[i]) && crate.u_l_star[i] < 0.0)
        sig[static_cast<std::size_t>(i)] = 1;
      else if (at_bound(cs.u_l_star[i], 1.0) && crate.u_l_star[i] > 0.0)
        sig[static_cast<std::size_t>(i)] = 2;
    }
    if (lay_.band) {
      // same branch test as the multiplier dynamics
      if (cs.eta_min[i] > 0.0 || p_.V_min[i] - cs.V_star[i] > 0.0)
        sig[static_cast<std::size_t>(n + i)] = 1;
      if (cs.eta_max[i] > 0.0 || cs.V_star[i] - p_.V_max[i] > 0.0)
        sig[static_cast<std::size_t>(2 * n + i)] = 1;
    }
  }
  return sig;
}

void ClosedLoopSystem::snap(Eigen::VectorXd& x) const {
  const int n = lay_.n;
  for (int i = 0; i < n; ++i) {
    if (constraints_.clamp_u_l)
      x[lay_.u_l(i)] = std::clamp(x[lay_.u_l(i)], p_.u_l_min[i], 1.0);
    if (lay_.band) {
      x[lay_.eta_min(i)] = std::max(x[lay_.eta_min(i)], 0.0);
      x[lay_.eta_max(i)] = std::max(x[lay_.eta_max(i)], 0.0);
    }
  }
}

void ClosedLoopSystem::assemble(const std::vector<char>& sig,
                                Piece& piece) const {
  const int n = lay_.n, m = lay_.m, N = lay_.size();
  const WelfareWeights& w = gains_.weights;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(N);

  for (int i = 0; i < n; ++i) {
    A(lay_.I_s(i), lay_.I_s(i)) = -p_.R_s[i] / p_.L_s[i];
    A(lay_.I_s(i), lay_.V(i)) = -1.0 / p_.L_s[i];
    A(lay_.I_s(i), lay_.u_s(i)) = 1.0 / p_.L_s[i];

    A(lay_.V(i), lay_.I_s(i)) = 1.0 / p_.C[i];
    A(lay_.V(i), lay_.u_l(i)) = -p_.I_l[i] / p_.C[i];

    A(lay_.u_s(i), lay_.u_s(i)) = -w.beta / gains_.tau_s;
    A(lay_.u_s(i), lay_.lambda_a(i)) = -1.0 / gains_.tau_s;
    A(lay_.u_s(i), lay_.I_s(i)) = -1.0 / gains_.tau_s;

    const double q = w.alpha * p_.I_l[i] * p_.I_l[i] / p_.pi_u[i];
    A(lay_.u_l(i), lay_.u_l(i)) = -q / gains_.tau_l;
    b[lay_.u_l(i)] = q / gains_.tau_l;
    A(lay_.u_l(i), lay_.lambda_b(i)) = p_.I_l[i] / gains_.tau_l;
    A(lay_.u_l(i), lay_.V(i)) = p_.I_l[i] / gains_.tau_l;

    A(lay_.I_s_star(i), lay_.I_s_star(i)) = -w.alpha / p_.pi_c[i] / gains_.tau_I;
    A(lay_.I_s_star(i), lay_.lambda_a(i)) = p_.R_s[i] / gains_.tau_I;
    A(lay_.I_s_star(i), lay_.lambda_b(i)) = -1.0 / gains_.tau_I;

    A(lay_.V_star(i), lay_.V_star(i)) = -w.gamma / gains_.tau_V;
    b[lay_.V_star(i)] = w.gamma * p_.V_d[i] / gains_.tau_V;
    A(lay_.V_star(i), lay_.lambda_a(i)) = 1.0 / gains_.tau_V;

    A(lay_.lambda_a(i), lay_.u_s(i)) = 1.0 / gains_.tau_a;
    A(lay_.lambda_a(i), lay_.I_s_star(i)) = -p_.R_s[i] / gains_.tau_a;
    A(lay_.lambda_a(i), lay_.V_star(i)) = -1.0 / gains_.tau_a;

    A(lay_.lambda_b(i), lay_.u_l(i)) = -p_.I_l[i] / gains_.tau_b;
    A(lay_.lambda_b(i), lay_.I_s_star(i)) = 1.0 / gains_.tau_b;
  }
  for (int k = 0; k < m; ++k) {
    const auto [ea, eb] = topo_.edges[k];
    A(lay_.I(k), lay_.I(k)) = -p_.R_line[k] / p_.L_line[k];
    A(lay_.I(k), lay_.V(ea)) = -1.0 / p_.L_line[k];
    A(lay_.I(k), lay_.V(eb)) = 1.0 / p_.L_line[k];
    A(lay_.V(ea), lay_.I(k)) += 1.0 / p_.C[ea];
    A(lay_.V(eb), lay_.I(k)) -= 1.0 / p_.C[eb];
    const double g = 1.0 / p_.R_line[k];
    A(lay_.V_star(ea), lay_.lambda_b(ea)) += g / gains_.tau_V;
    A(lay_.V_star(ea), lay_.lambda_b(eb)) -= g / gains_.tau_V;
    A(lay_.V_star(eb), lay_.lambda_b(eb)) += g / gains_.tau_V;
    A(lay_.V_star(eb), lay_.lambda_b(ea)) -= g / gains_.tau_V;
    A(lay_.lambda_b(ea), lay_.V_star(ea)) -= g / gains_.tau_b;
    A(lay_.lambda_b(ea), lay_.V_star(eb)) += g / gains_.tau_b;
    A(lay_.lambda_b(eb), lay_.V_star(eb)) -= g / gains_.tau_b;
    A(lay_.lambda_b(eb), lay_.V_star(ea)) += g / gains_.tau_b;
  }
  if (lay_.band) {
    for (int i = 0; i < n; ++i) {
      A(lay_.V_star(i), lay_.eta_min(i)) = 1.0 / gains_.tau_V;
      A(lay_.V_star(i), lay_.eta_max(i)) = -1.0 / gains_.tau_V;
      if (sig[static_cast<std::size_t>(n + i)]) {
        A(lay_.eta_min(i), lay_.V_star(i)) = -1.0 / constraints_.tau_eta;
        b[lay_.eta_min(i)] = p_.V_min[i] / constraints_.tau_eta;
      }
      if (sig[static_cast<std::size_t>(2 * n + i)]) {
        A(lay_.eta_max(i), lay_.V_star(i)) = 1.0 / constraints_.tau_eta;
        b[lay_.eta_max(i)] = -p_.V_max[i] / constraints_.tau_eta;
      }
    }
  }

  // split into integrated coordinates and held ones (u_l* at a bound, parked
  // band multipliers); held values enter the free rows as constants
  std::vector<bool> is_pinned(static_cast<std::size_t>(N), false);
  std::vector<double> pin_val(static_cast<std::size_t>(N), 0.0);
  for (int i = 0; i < n; ++i) {
    if (sig[static_cast<std::size_t>(i)] == 1) {
      is_pinned[static_cast<std::size_t>(lay_.u_l(i))] = true;
      pin_val[static_cast<std::size_t>(lay_.u_l(i))] = p_.u_l_min[i];
    } else if (sig[static_cast<std::size_t>(i)] == 2) {
      is_pinned[static_cast<std::size_t>(lay_.u_l(i))] = true;
      pin_val[static_cast<std::size_t>(lay_.u_l(i))] = 1.0;
    }
    if (lay_.band) {
      if (!sig[static_cast<std::size_t>(n + i)])
        is_pinned[static_cast<std::size_t>(lay_.eta_min(i))] = true;
      if (!sig[static_cast<std::size_t>(2 * n + i)])
        is_pinned[static_cast<std::size_t>(lay_.eta_max(i))] = true;
    }
  }
  piece.free_idx.clear();
  piece.pinned_idx.clear();
  for (int j = 0; j < N; ++j) {
    if (is_pinned[static_cast<std::size_t>(j)])
      piece.pinned_idx.push_back(j);
    else
      piece.free_idx.push_back(j);
  }
  const int F = static_cast<int>(piece.free_idx.size());
  piece.pinned_vals.resize(static_cast<Eigen::Index>(piece.pinned_idx.size()));
  for (std::size_t j = 0; j < piece.pinned_idx.size(); ++j)
    piece.pinned_vals[static_cast<Eigen::Index>(j)] =
        pin_val[static_cast<std::size_t>(piece.pinned_idx[j])];

  piece.A_ff.resize(F, F);
  piece.b_eff.resize(F);
  for (int r0 = 0; r0 < F; ++r0) {
    const int gr = piece.free_idx[static_cast<std::size_t>(r0)];
    double acc = b[gr];
    for (std::size_t j = 0; j < piece.pinned_idx.size(); ++j)
      acc += A(gr, piece.pinned_idx[j]) * piece.pinned_vals[static_cast<Eigen::Index>(j)];
    piece.b_eff[r0] = acc;
    for (int c = 0; c < F; ++c)
      piece.A_ff(r0, c) = A(gr, piece.free_idx[static_cast<std::size_t>(c)]);
  }
  piece.a_norm = piece.A_ff.cwiseAbs().rowwise().sum().maxCoeff();

  // factor the balanced matrix and accept the modal path only if it
  // reproduces a short-step Taylor increment on a generic vector
  Eigen::MatrixXd B = piece.A_ff;
  piece.dscale = balance(B);
  Eigen::EigenSolver<Eigen::MatrixXd> es(B);
  piece.modal_ok = false;
  if (es.info() == Eigen::Success) {
    piece.lambda = es.eigenvalues();
    piece.S = es.eigenvectors();
    piece.S_lu = Eigen::PartialPivLU<Eigen::MatrixXcd>(piece.S);

    Eigen::VectorXd probe = piece.b_eff;
    if (probe.lpNorm<Eigen::Infinity>() < 1e-300) probe = Eigen::VectorXd::Ones(F);
    const double dtp = piece.a_norm > 0.0 ? 0.5 / piece.a_norm : 1.0;

    Eigen::VectorXcd wv =
        piece.S_lu.solve(probe.cwiseQuotient(piece.dscale).cast<std::complex<double>>());
    for (int j = 0; j < F; ++j) wv[j] *= dt_phi1(piece.lambda[j], dtp);
    const Eigen::VectorXd inc_modal = piece.dscale.cwiseProduct((piece.S * wv).real());

    Eigen::VectorXd term = dtp * probe;
    Eigen::VectorXd inc_taylor = term;
    for (int k = 2; k <= 12; ++k) {
      term = (dtp / k) * (piece.A_ff * term);
      inc_taylor += term;
    }
    const double scale = std::max(inc_taylor.lpNorm<Eigen::Infinity>(), 1e-300);
    const double err = (inc_modal - inc_taylor).lpNorm<Eigen::Infinity>() / scale;
    piece.modal_ok = std::isfinite(err) && err < 1e-8;
  }
}

const ClosedLoopSystem::Piece& ClosedLoopSystem::piece_for(
    const std::vector<char>& sig) const {
  auto it = pieces_.find(sig);
  if (it == pieces_.end()) {
    auto piece = std::make_unique<Piece>();
    assemble(sig, *piece);
    it = pieces_.emplace(sig, std::move(piece)).first;
  }
  return *it->second;
}

ClosedLoopSystem::StepResult ClosedLoopSystem::step(const Eigen::VectorXd& x,
                                                    double dt,
                                                    double* supply_increment) const {
  if (!(dt > 0.0)) throw std::invalid_argument("closed loop: step dt must be > 0");
  const Piece& piece = piece_for(signature(x));
  const int F = static_cast<int>(piece.free_idx.size());

  const Eigen::VectorXd rfull = rate(x);
  Eigen::VectorXd rf(F);
  for (int j = 0; j < F; ++j) rf[j] = rfull[piece.free_idx[static_cast<std::size_t>(j)]];

  StepResult out;
  out.x = x;
  auto supply_rate = [&](const Eigen::VectorXd& rv) {
    double s = 0.0;
    for (int i = 0; i < lay_.n; ++i)
      s += rv[lay_.u_s(i)] * rv[lay_.I_s(i)] -
           rv[lay_.u_l(i)] * p_.I_l[i] * rv[lay_.V(i)];
    return s;
  };

  if (piece.modal_ok) {
    const Eigen::VectorXcd wv =
        piece.S_lu.solve(rf.cwiseQuotient(piece.dscale).cast<std::complex<double>>());
    Eigen::VectorXcd g(F);
    for (int j = 0; j < F; ++j) g[j] = dt_phi1(piece.lambda[j], dt) * wv[j];
    const Eigen::VectorXd inc = piece.dscale.cwiseProduct((piece.S * g).real());
    for (int j = 0; j < F; ++j)
      out.x[piece.free_idx[static_cast<std::size_t>(j)]] += inc[j];

    if (supply_increment) {
      // Gauss-3 on [0, dt]; the rate along the piece flow is e^{A tau} r,
      // directly evaluable from the modal coefficients
      static const double c[3] = {0.5 * (1.0 - std::sqrt(0.6)), 0.5,
                                  0.5 * (1.0 + std::sqrt(0.6))};
      static const double wq[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
      double acc = 0.0;
      Eigen::VectorXd rtau = Eigen::VectorXd::Zero(lay_.size());
      for (int qn = 0; qn < 3; ++qn) {
        Eigen::VectorXcd e(F);
        for (int j = 0; j < F; ++j)
          e[j] = std::exp(piece.lambda[j] * (c[qn] * dt)) * wv[j];
        const Eigen::VectorXd rft = piece.dscale.cwiseProduct((piece.S * e).real());
        for (int j = 0; j < F; ++j)
          rtau[piece.free_idx[static_cast<std::size_t>(j)]] = rft[j];
        acc += wq[qn] * supply_rate(rtau);
      }
      *supply_increment += dt * acc;
    }
  } else {
    out.used_fallback = true;
    // dense expm of the augmented system: top-right block of
    // exp([[A, r],[0, 0]] dt) is exactly dt phi1(A dt) r
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(F + 1, F + 1);
    M.topLeftCorner(F, F) = piece.A_ff * dt;
    M.topRightCorner(F, 1) = rf * dt;
    const Eigen::MatrixXd E = M.exp();
    for (int j = 0; j < F; ++j)
      out.x[piece.free_idx[static_cast<std::size_t>(j)]] += E(j, F);
    if (supply_increment) {
      const Eigen::VectorXd r1 = rate(out.x);
      *supply_increment += 0.5 * dt * (supply_rate(rfull) + supply_rate(r1));
    }
  }
  return out;
}

Eigen::VectorXd ClosedLoopSystem::piece_equilibrium(const Eigen::VectorXd& x) const {
  const Piece& piece = piece_for(signature(x));
  const int F = static_cast<int>(piece.free_idx.size());

  // the piece matrix carries a slow consensus mode (uniform lambda_b offset
  // balanced by u_l shifts of order pi_u/alpha) whose singular value sits
  // some fifteen decades under the stiff rows, so the factorization has to
  // run in extended precision to see it as regular
  const Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> Ald =
      piece.A_ff.cast<long double>();
  const VectorXld bld = piece.b_eff.cast<long double>();
  Eigen::FullPivLU<Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>>
      lu(Ald);
  if (!lu.isInvertible())
    throw std::runtime_error("closed loop: active piece has no unique equilibrium");
  VectorXld xf_ld = lu.solve(-bld);
  for (int it = 0; it < 2; ++it)
    xf_ld += lu.solve(-(Ald * xf_ld + bld));
  Eigen::VectorXd xf = xf_ld.cast<double>();
  const VectorXld res = Ald * xf.cast<long double>() + bld;
  for (int r0 = 0; r0 < F; ++r0) {
    const long double scale =
        Ald.row(r0).cwiseAbs().dot(xf.cast<long double>().cwiseAbs()) +
        std::abs(piece.b_eff[r0]);
    if (static_cast<double>(std::abs(res[r0])) > 1e-9 * std::max(1.0, static_cast<double>(scale)))
      throw std::runtime_error("closed loop: piece equilibrium refinement failed");
  }

  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(lay_.size());
  for (int j = 0; j < F; ++j)
    xbar[piece.free_idx[static_cast<std::size_t>(j)]] = xf[j];
  for (std::size_t j = 0; j < piece.pinned_idx.size(); ++j)
    xbar[piece.pinned_idx[j]] = piece.pinned_vals[static_cast<Eigen::Index>(j)];
  return xbar;
}

double ClosedLoopSystem::plant_storage(const Eigen::VectorXd& r) const {
  double s = 0.0;
  for (int i = 0; i < lay_.n; ++i)
    s += p_.L_s[i] * r[lay_.I_s(i)] * r[lay_.I_s(i)] +
         p_.C[i] * r[lay_.V(i)] * r[lay_.V(i)];
  for (int k = 0; k < lay_.m; ++k)
    s += p_.L_line[k] * r[lay_.I(k)] * r[lay_.I(k)];
  return 0.5 * s;
}

double ClosedLoopSystem::ctrl_storage(const Eigen::VectorXd& r) const {
  double s = 0.0;
  for (int i = 0; i < lay_.n; ++i) {
    s += gains_.tau_s * r[lay_.u_s(i)] * r[lay_.u_s(i)] +
         gains_.tau_l * r[lay_.u_l(i)] * r[lay_.u_l(i)] +
         gains_.tau_I * r[lay_.I_s_star(i)] * r[lay_.I_s_star(i)] +
         gains_.tau_V * r[lay_.V_star(i)] * r[lay_.V_star(i)] +
         gains_.tau_a * r[lay_.lambda_a(i)] * r[lay_.lambda_a(i)] +
         gains_.tau_b * r[lay_.lambda_b(i)] * r[lay_.lambda_b(i)];
    if (lay_.band)
      s += constraints_.tau_eta * (r[lay_.eta_min(i)] * r[lay_.eta_min(i)] +
                                   r[lay_.eta_max(i)] * r[lay_.eta_max(i)]);
  }
  return 0.5 * s;
}

KktResidual ClosedLoopSystem::kkt(const Eigen::VectorXd& x) const {
  GridState gs;
  ControllerState cs;
  unpack(x, gs, cs);
  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, p_, constraints_, input, ports);
  return kkt_residual(topo_, p_, gains_.weights, constraints_, cs, &ports);
}

double ClosedLoopSystem::plant_residual(const Eigen::VectorXd& x) const {
  GridState gs;
  ControllerState cs;
  unpack(x, gs, cs);
  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, p_, constraints_, input, ports);

  // componentwise circuit relations at steady state, relative to state size
  long double worst = 0.0L;
  double nrm = 1.0;
  for (int i = 0; i < lay_.n; ++i)
    nrm = std::max({nrm, std::abs(gs.V[i]), std::abs(gs.I_s[i])});
  for (int k = 0; k < lay_.m; ++k) nrm = std::max(nrm, std::abs(gs.I[k]));

  VectorXld bi = VectorXld::Zero(lay_.n);
  for (int k = 0; k < lay_.m; ++k) {
    const auto [ea, eb] = topo_.edges[k];
    bi[ea] += static_cast<long double>(gs.I[k]);
    bi[eb] -= static_cast<long double>(gs.I[k]);
    const long double rk = static_cast<long double>(gs.I[k]) +
                           (static_cast<long double>(gs.V[ea]) - gs.V[eb]) /
                               p_.R_line[k];
    worst = std::max(worst, std::abs(rk));
  }
  for (int i = 0; i < lay_.n; ++i) {
    const long double rv = static_cast<long double>(gs.V[i]) +
                           static_cast<long double>(p_.R_s[i]) * gs.I_s[i] -
                           input.u_s[i];
    const long double ris = static_cast<long double>(gs.I_s[i]) + bi[i] -
                            static_cast<long double>(p_.I_l[i]) * input.u_l[i];
    worst = std::max({worst, std::abs(rv), std::abs(ris)});
  }
  return static_cast<double>(worst) / nrm;
}

}  // namespace dcflex
