#include "codesign/circuits.hpp"

#include <algorithm>
#include <cmath>

#include "codesign/diffkit.hpp"

namespace codesign::circuits {

namespace {

constexpr double kBoltzmann = 1.380649e-23;  // J/K
constexpr double kPlanck = 6.62607015e-34;   // J s

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(std::string(what) + " must be strictly positive");
  }
}

}  // namespace

void FluxoniumParams::validate() const {
  require_positive(e_c, "fluxonium E_C");
  require_positive(e_j, "fluxonium E_J");
  require_positive(e_l, "fluxonium E_L");
}

void TransmonParams::validate() const {
  require_positive(e_c, "transmon E_C");
  require_positive(e_j, "transmon E_J");
}

void ControlParams::validate() const {
  require_positive(t_ramp, "t_ramp");
  if (!(t_plateau >= 0.0)) throw ValidationError("t_plateau must be non-negative");
  if (!std::isfinite(phi_p)) throw ValidationError("phi_p must be finite");
}

void PhaseGrid::validate() const {
  if (n_basis < 3) throw ValidationError("invalid grid: n_basis must be at least 3");
  if (!(phi_min < phi_max)) throw ValidationError("invalid grid: phi_min must be below phi_max");
}

RealVector PhaseGrid::points() const {
  return RealVector::LinSpaced(n_basis, phi_min, phi_max);
}

double PhysicalConstants::kT_over_h() const { return kBoltzmann * temperature / kPlanck * 1e-9; }

void PhysicalConstants::validate() const {
  require_positive(tan_delta_c, "tan_delta_c");
  require_positive(temperature, "temperature");
  require_positive(c_f, "c_f");
}

FluxoniumOperators fluxonium_operators(const PhaseGrid& grid) {
  grid.validate();
  const int n = grid.n_basis;
  const double h = grid.spacing();
  FluxoniumOperators ops;
  ops.phi = grid.points();
  ops.n_squared.resize(n, n);
  ops.derivative.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        ops.n_squared(i, j) = kPi * kPi / (3.0 * h * h);
        ops.derivative(i, j) = 0.0;
      } else {
        const double k = i - j;
        const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
        ops.n_squared(i, j) = 2.0 * sign / (k * k * h * h);
        ops.derivative(i, j) = sign / (k * h);
      }
    }
  }
  return ops;
}

RealMatrix fluxonium_hamiltonian(const FluxoniumParams& p, double phi_ext,
                                 const FluxoniumOperators& ops) {
  p.validate();
  RealMatrix h = 4.0 * p.e_c * ops.n_squared;
  const RealVector shifted = ops.phi.array() + phi_ext;
  h.diagonal().array() +=
      0.5 * p.e_l * shifted.array().square() - p.e_j * ops.phi.array().cos();
  return h;
}

RealMatrix fluxonium_hamiltonian(const FluxoniumParams& p, double phi_ext, const PhaseGrid& grid) {
  return fluxonium_hamiltonian(p, phi_ext, fluxonium_operators(grid));
}

FluxoniumAdjoint fluxonium_hamiltonian_vjp(const RealMatrix& h_bar, const FluxoniumParams& p,
                                           double phi_ext, const FluxoniumOperators& ops) {
  const RealVector diag = h_bar.diagonal();
  const RealVector shifted = ops.phi.array() + phi_ext;
  FluxoniumAdjoint a;
  a.e_c = 4.0 * h_bar.cwiseProduct(ops.n_squared).sum();
  a.e_j = -diag.dot(ops.phi.array().cos().matrix());
  a.e_l = 0.5 * diag.dot(shifted.array().square().matrix());
  a.phi_ext = p.e_l * diag.dot(shifted);
  return a;
}

double transmon_ej_eff(const TransmonParams& p, double phi_ext) {
  return p.e_j * std::abs(std::cos(0.5 * phi_ext));
}

double transmon_ej_eff_dphi(const TransmonParams& p, double phi_ext) {
  const double c = std::cos(0.5 * phi_ext);
  const double sign = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
  return -0.5 * p.e_j * std::sin(0.5 * phi_ext) * sign;
}

RealMatrix transmon_hamiltonian(const TransmonParams& p, double phi_ext, int charge_cutoff) {
  p.validate();
  if (charge_cutoff < 1) throw ValidationError("transmon charge cutoff must be at least 1");
  const int dim = 2 * charge_cutoff + 1;
  const double hop = -0.5 * transmon_ej_eff(p, phi_ext);
  RealMatrix h = RealMatrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const double n = i - charge_cutoff;
    h(i, i) = 4.0 * p.e_c * n * n;
    if (i + 1 < dim) {
      h(i, i + 1) = hop;
      h(i + 1, i) = hop;
    }
  }
  return h;
}

RealMatrix transmon_charge_operator(int charge_cutoff) {
  if (charge_cutoff < 1) throw ValidationError("transmon charge cutoff must be at least 1");
  return RealVector::LinSpaced(2 * charge_cutoff + 1, -charge_cutoff, charge_cutoff).asDiagonal();
}

TransmonAdjoint transmon_hamiltonian_vjp(const RealMatrix& h_bar, const TransmonParams& p,
                                         double phi_ext) {
  const Eigen::Index dim = h_bar.rows();
  const int cutoff = static_cast<int>((dim - 1) / 2);
  double n2 = 0.0;
  double hop = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double n = static_cast<double>(i - cutoff);
    n2 += h_bar(i, i) * n * n;
    if (i + 1 < dim) hop += h_bar(i, i + 1) + h_bar(i + 1, i);
  }
  const double ej_eff_bar = -0.5 * hop;
  TransmonAdjoint a;
  a.e_c = 4.0 * n2;
  a.e_j = ej_eff_bar * std::abs(std::cos(0.5 * phi_ext));
  a.phi_ext = ej_eff_bar * transmon_ej_eff_dphi(p, phi_ext);
  return a;
}

double trapezoid_flux(const ControlParams& c, double t) {
  using diffkit::relu;
  const double rise = relu(t / c.t_ramp);
  const double fall = relu((2.0 * c.t_ramp + c.t_plateau - t) / c.t_ramp);
  return kPi + c.phi_p * std::min({rise, 1.0, fall});
}

TrapezoidDrive::TrapezoidDrive(const ControlParams& c) : c_(c) { c_.validate(); }

double TrapezoidDrive::value(double t) const { return trapezoid_flux(c_, t) - kPi; }

TrapezoidDrive::Branch TrapezoidDrive::branch_at(double t) const {
  const double rise = t / c_.t_ramp;
  const double fall = (2.0 * c_.t_ramp + c_.t_plateau - t) / c_.t_ramp;
  const double m = std::min({rise, 1.0, fall});
  if (m <= 0.0) return Branch::Zero;
  if (m == rise) return Branch::Rise;
  if (m == 1.0) return Branch::Flat;
  return Branch::Fall;
}

double TrapezoidDrive::time_derivative(double, double seg_begin, double seg_end) const {
  switch (branch_at(0.5 * (seg_begin + seg_end))) {
    case Branch::Rise:
      return c_.phi_p / c_.t_ramp;
    case Branch::Fall:
      return -c_.phi_p / c_.t_ramp;
    default:
      return 0.0;
  }
}

void TrapezoidDrive::accumulate_param_grad(double t, double seg_begin, double seg_end,
                                           double scale, std::span<double> grad) const {
  const double tr = c_.t_ramp;
  switch (branch_at(0.5 * (seg_begin + seg_end))) {
    case Branch::Rise:
      grad[0] += scale * (-c_.phi_p * t / (tr * tr));
      grad[2] += scale * (t / tr);
      break;
    case Branch::Flat:
      grad[2] += scale;
      break;
    case Branch::Fall:
      grad[0] += scale * (-c_.phi_p * (c_.t_plateau - t) / (tr * tr));
      grad[1] += scale * (c_.phi_p / tr);
      grad[2] += scale * ((2.0 * tr + c_.t_plateau - t) / tr);
      break;
    case Branch::Zero:
      break;
  }
}

std::vector<Breakpoint> TrapezoidDrive::breakpoints() const {
  return {
      {0.0, {0.0, 0.0, 0.0}},
      {c_.t_ramp, {1.0, 0.0, 0.0}},
      {c_.t_ramp + c_.t_plateau, {1.0, 1.0, 0.0}},
      {c_.gate_time(), {2.0, 1.0, 0.0}},
  };
}

// ---------------------------------------------------------------------------

namespace {

/// Decodes a product index into per-subsystem labels.
std::vector<int> decode(Eigen::Index index, const std::vector<int>& levels) {
  std::vector<int> label(levels.size());
  for (std::size_t i = levels.size(); i-- > 0;) {
    label[i] = static_cast<int>(index % levels[i]);
    index /= levels[i];
  }
  return label;
}

ComplexMatrix embed_identity(const ComplexMatrix& op, std::size_t site, const std::vector<int>& levels) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const ComplexMatrix factor = (i == site) ? op : ComplexMatrix::Identity(levels[i], levels[i]);
    out = kron<cplx>(out, factor);
  }
  return out;
}

ComplexMatrix embed_pair(const ComplexMatrix& a, std::size_t site_a, const ComplexMatrix& b,
                         std::size_t site_b, const std::vector<int>& levels) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    ComplexMatrix factor;
    if (i == site_a) {
      factor = a;
    } else if (i == site_b) {
      factor = b;
    } else {
      factor = ComplexMatrix::Identity(levels[i], levels[i]);
    }
    out = kron<cplx>(out, factor);
  }
  return out;
}

}  // namespace

Eigen::Index TruncatedSystem::index_of(const std::vector<int>& label) const {
  const auto it = labels.find(label);
  if (it == labels.end()) throw ValidationError("unknown product label");
  return it->second;
}

CoupledSystemBuild coupled_system(const std::vector<Subsystem>& subsystems,
                                  const std::vector<Coupling>& couplings, int levels) {
  if (subsystems.empty()) throw ValidationError("coupled_system: no subsystems");
  CoupledSystemBuild build;
  build.couplings = couplings;
  auto& sys = build.system;
  for (const auto& sub : subsystems) {
    const Eigen::Index n = sub.hamiltonian.rows();
    if (levels < 1 || levels > n) throw ValidationError("coupled_system: invalid truncation level");
    if (sub.coupling_op.rows() != n || sub.coupling_op.cols() != n) {
      throw ValidationError("coupled_system: coupling operator shape mismatch");
    }
    SubsystemTruncation part;
    part.spectrum = spectral::eigh(sub.hamiltonian);
    part.levels = levels;
    if (levels < n && part.spectrum.values(levels) - part.spectrum.values(levels - 1) < 1e-9) {
      throw GaugeAmbiguityError("coupled_system: truncation boundary inside a degenerate level");
    }
    const RealMatrix p = part.spectrum.vectors.leftCols(levels);
    const ComplexMatrix pc = p.cast<cplx>();
    part.coupling_projected = pc.transpose() * sub.coupling_op * pc;
    if (sub.control_op) {
      part.control_projected = ComplexMatrix(pc.transpose() * (*sub.control_op) * pc);
    }
    build.parts.push_back(std::move(part));
    sys.levels.push_back(levels);
  }

  Eigen::Index dim = 1;
  for (int l : sys.levels) dim *= l;
  for (Eigen::Index idx = 0; idx < dim; ++idx) sys.labels.emplace(decode(idx, sys.levels), idx);

  sys.drift = ComplexMatrix::Zero(dim, dim);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    const auto label = decode(idx, sys.levels);
    double e = 0.0;
    for (std::size_t i = 0; i < label.size(); ++i) e += build.parts[i].spectrum.values(label[i]);
    sys.drift(idx, idx) = e;
  }
  for (const auto& c : couplings) {
    if (c.first >= subsystems.size() || c.second >= subsystems.size() || c.first == c.second) {
      throw ValidationError("coupled_system: invalid coupling indices");
    }
    sys.drift += c.strength * embed_pair(build.parts[c.first].coupling_projected, c.first,
                                         build.parts[c.second].coupling_projected, c.second,
                                         sys.levels);
  }
  sys.drift = 0.5 * (sys.drift + sys.drift.adjoint()).eval();
  for (std::size_t i = 0; i < build.parts.size(); ++i) {
    if (build.parts[i].control_projected) {
      sys.controls.push_back(embed_identity(*build.parts[i].control_projected, i, sys.levels));
    }
  }
  return build;
}

CoupledSystemAdjoint coupled_system_vjp(const CoupledSystemBuild& build,
                                        const ComplexMatrix& drift_bar,
                                        const std::vector<ComplexMatrix>& controls_bar) {
  const auto& sys = build.system;
  const auto& levels = sys.levels;
  const Eigen::Index dim = sys.dimension();
  CoupledSystemAdjoint adj;
  for (std::size_t i = 0; i < build.parts.size(); ++i) {
    SubsystemAdjoint a;
    a.energies = RealVector::Zero(levels[i]);
    a.coupling_projected = ComplexMatrix::Zero(levels[i], levels[i]);
    if (build.parts[i].control_projected) a.control_projected = ComplexMatrix::Zero(levels[i], levels[i]);
    adj.parts.push_back(std::move(a));
  }
  std::vector<std::vector<int>> labels(static_cast<std::size_t>(dim));
  for (Eigen::Index idx = 0; idx < dim; ++idx) labels[static_cast<std::size_t>(idx)] = decode(idx, levels);

  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    const auto& label = labels[static_cast<std::size_t>(idx)];
    for (std::size_t i = 0; i < label.size(); ++i) {
      adj.parts[i].energies(label[i]) += drift_bar(idx, idx).real();
    }
  }

  // Entry (p, q) of an embedded product acts on sites listed in `sites` and is
  // the identity elsewhere.
  auto others_equal = [&](const std::vector<int>& lp, const std::vector<int>& lq, std::size_t s1,
                          std::size_t s2) {
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (i != s1 && i != s2 && lp[i] != lq[i]) return false;
    }
    return true;
  };

  for (const auto& c : build.couplings) {
    const auto& sa = build.parts[c.first].coupling_projected;
    const auto& sb = build.parts[c.second].coupling_projected;
    double j_bar = 0.0;
    for (Eigen::Index p = 0; p < dim; ++p) {
      const auto& lp = labels[static_cast<std::size_t>(p)];
      for (Eigen::Index q = 0; q < dim; ++q) {
        const auto& lq = labels[static_cast<std::size_t>(q)];
        if (!others_equal(lp, lq, c.first, c.second)) continue;
        const cplx g = drift_bar(p, q);
        if (g == 0.0) continue;
        const cplx va = sa(lp[c.first], lq[c.first]);
        const cplx vb = sb(lp[c.second], lq[c.second]);
        j_bar += std::real(std::conj(g) * va * vb);
        adj.parts[c.first].coupling_projected(lp[c.first], lq[c.first]) +=
            c.strength * g * std::conj(vb);
        adj.parts[c.second].coupling_projected(lp[c.second], lq[c.second]) +=
            c.strength * g * std::conj(va);
      }
    }
    adj.couplings.push_back(j_bar);
  }

  std::size_t k = 0;
  for (std::size_t i = 0; i < build.parts.size(); ++i) {
    if (!build.parts[i].control_projected) continue;
    if (k < controls_bar.size() && controls_bar[k].size() > 0) {
      const auto& cbar = controls_bar[k];
      for (Eigen::Index p = 0; p < dim; ++p) {
        const auto& lp = labels[static_cast<std::size_t>(p)];
        for (Eigen::Index q = 0; q < dim; ++q) {
          const auto& lq = labels[static_cast<std::size_t>(q)];
          if (!others_equal(lp, lq, i, i)) continue;
          adj.parts[i].control_projected(lp[i], lq[i]) += cbar(p, q);
        }
      }
    }
    ++k;
  }
  return adj;
}

RealMatrix projection_vjp(const RealMatrix& p, const ComplexMatrix& s, const ComplexMatrix& b_bar) {
  const ComplexMatrix pc = p.cast<cplx>();
  return (s * pc * b_bar.adjoint() + s.transpose() * pc * b_bar.conjugate()).real();
}

RealMatrix truncation_vjp(const SubsystemTruncation& part, const ComplexMatrix& coupling_op,
                          const ComplexMatrix* control_op, const SubsystemAdjoint& adjoint,
                          const RealMatrix& extra_vectors_bar) {
  const RealMatrix p = part.spectrum.vectors.leftCols(part.levels);
  RealMatrix v_bar = RealMatrix::Zero(p.rows(), p.cols());
  if (adjoint.coupling_projected.size() > 0) {
    v_bar += projection_vjp(p, coupling_op, adjoint.coupling_projected);
  }
  if (control_op != nullptr && adjoint.control_projected.size() > 0) {
    v_bar += projection_vjp(p, *control_op, adjoint.control_projected);
  }
  if (extra_vectors_bar.size() > 0) v_bar += extra_vectors_bar;
  diffkit::SpectrumAdjoint<double> sa;
  sa.eigenvalues = adjoint.energies;
  sa.eigenvectors = v_bar;
  return diffkit::eigh_vjp(part.spectrum, sa);
}

}  // namespace codesign::circuits
