#include "codesign/chain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <armadillo>

namespace codesign::harness {

int ChainConfig::effective_levels() const {
  if (levels > 0) return levels;
  return n_fm >= 6 ? 4 : 5;
}

void ChainConfig::validate() const {
  if (n_fm < 3 || n_fm > 6) throw ValidationError("chain: n_fm must lie in 3..6");
  if (levels < 0 || levels == 1) throw ValidationError("chain: levels must be 0 (auto) or at least 2");
  if (repeats < 1 || warmup < 0) throw ValidationError("chain: repeats must be positive");
  site.validate();
  grid.validate();
}

ChainParams ChainParams::uniform(const ChainConfig& cfg) {
  ChainParams p;
  p.sites.assign(static_cast<std::size_t>(cfg.n_fm), cfg.site);
  p.couplings.assign(static_cast<std::size_t>(cfg.n_fm - 1), cfg.j_c);
  return p;
}

diffkit::ParamVector ChainParams::to_vector() const {
  using diffkit::Unit;
  diffkit::ParamVector v;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const std::string s = "site" + std::to_string(i);
    v.add(s + ".e_c", sites[i].e_c, Unit::GHz).add(s + ".e_j", sites[i].e_j, Unit::GHz);
    v.add(s + ".e_l", sites[i].e_l, Unit::GHz);
  }
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    v.add("bond" + std::to_string(i) + ".j_c", couplings[i], Unit::GHz);
  }
  return v;
}

ChainParams ChainParams::from_vector(const diffkit::ParamVector& v, int n_fm) {
  ChainParams p;
  for (int i = 0; i < n_fm; ++i) {
    const std::string s = "site" + std::to_string(i);
    p.sites.push_back({v.value(s + ".e_c"), v.value(s + ".e_j"), v.value(s + ".e_l")});
  }
  for (int i = 0; i + 1 < n_fm; ++i) p.couplings.push_back(v.value("bond" + std::to_string(i) + ".j_c"));
  return p;
}

namespace {

struct Site {
  circuits::SubsystemTruncation part;
  RealVector energies;  ///< kept eigenvalues
  RealMatrix a;         ///< P^T D P, so that n' = -i a
};

long ipow(long b, int e) {
  long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

ChainResult chain_ground_energy(const ChainParams& p, int levels, const circuits::PhaseGrid& grid,
                                bool with_gradient) {
  const int n = static_cast<int>(p.sites.size());
  if (n < 2) throw ValidationError("chain: at least two sites are required");
  if (static_cast<int>(p.couplings.size()) != n - 1) throw ValidationError("chain: expected n - 1 couplings");
  for (const auto& s : p.sites) s.validate();
  const auto ops = circuits::fluxonium_operators(grid);
  const long lv = levels;
  if (levels < 2 || levels > grid.n_basis) throw ValidationError("chain: invalid level count");

  std::vector<Site> sites(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& s = sites[static_cast<std::size_t>(i)];
    s.part.spectrum = spectral::eigh(circuits::fluxonium_hamiltonian(p.sites[static_cast<std::size_t>(i)],
                                                                     circuits::kPi, ops));
    s.part.levels = levels;
    const RealMatrix pk = s.part.spectrum.vectors.leftCols(levels);
    s.energies = s.part.spectrum.values.head(levels);
    s.a = pk.transpose() * ops.derivative * pk;
    s.part.coupling_projected = cplx(0.0, -1.0) * s.a.cast<cplx>();
  }

  const long dim = ipow(lv, n);
  std::vector<long> stride(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) stride[static_cast<std::size_t>(i)] = ipow(lv, n - 1 - i);

  // J n' (x) n' = -J a (x) a in the product basis.
  std::vector<arma::uword> rows;
  std::vector<arma::uword> cols;
  std::vector<double> vals;
  std::vector<int> digit(static_cast<std::size_t>(n));
  for (long idx = 0; idx < dim; ++idx) {
    long rest = idx;
    double diag = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      digit[iu] = static_cast<int>(rest / stride[iu]);
      rest %= stride[iu];
      diag += sites[iu].energies(digit[iu]);
    }
    rows.push_back(static_cast<arma::uword>(idx));
    cols.push_back(static_cast<arma::uword>(idx));
    vals.push_back(diag);
    for (int b = 0; b + 1 < n; ++b) {
      const auto bu = static_cast<std::size_t>(b);
      const double j = p.couplings[bu];
      if (j == 0.0) continue;
      const RealMatrix& a1 = sites[bu].a;
      const RealMatrix& a2 = sites[bu + 1].a;
      const long base = idx - digit[bu] * stride[bu] - digit[bu + 1] * stride[bu + 1];
      for (long x = 0; x < lv; ++x) {
        const double ax = a1(digit[bu], x);
        if (ax == 0.0) continue;
        for (long y = 0; y < lv; ++y) {
          const double v = -j * ax * a2(digit[bu + 1], y);
          if (v == 0.0) continue;
          rows.push_back(static_cast<arma::uword>(idx));
          cols.push_back(static_cast<arma::uword>(base + x * stride[bu] + y * stride[bu + 1]));
          vals.push_back(v);
        }
      }
    }
  }
  arma::umat loc(2, rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    loc(0, k) = rows[k];
    loc(1, k) = cols[k];
  }
  const arma::sp_mat h(true, loc, arma::vec(vals), static_cast<arma::uword>(dim), static_cast<arma::uword>(dim));

  arma::vec evals;
  arma::mat evecs;
  arma::eigs_opts opts;
  opts.tol = 1e-14;
  if (!arma::eigs_sym(evals, evecs, h, 1, "sa", opts) || evals.n_elem < 1) {
    throw SolverFailure("chain: sparse eigensolver did not converge");
  }
  ChainResult out;
  out.ground_energy = evals(0);
  if (!with_gradient) return out;

  const Eigen::Map<const RealVector> psi(evecs.colptr(0), dim);
  const diffkit::ParamVector names = p.to_vector();
  out.gradient = diffkit::Gradient::zeros(names);

  std::vector<RealVector> e_bar(static_cast<std::size_t>(n), RealVector::Zero(lv));
  std::vector<RealMatrix> a_bar(static_cast<std::size_t>(n), RealMatrix::Zero(lv, lv));

  // Site populations: psi viewed as (left, k, right) with right fastest.
  for (int i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const long right = stride[iu];
    const long left = dim / (right * lv);
    for (long l = 0; l < left; ++l) {
      const Eigen::Map<const RealMatrix> m(psi.data() + l * lv * right, right, lv);
      e_bar[iu] += m.colwise().squaredNorm().transpose();
    }
  }

  // Two-site reduced density matrices, index a * levels + b.
  for (int b = 0; b + 1 < n; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    const long right = stride[bu + 1];
    const long left = dim / (right * lv * lv);
    RealMatrix r = RealMatrix::Zero(lv * lv, lv * lv);
    for (long l = 0; l < left; ++l) {
      const Eigen::Map<const RealMatrix> m(psi.data() + l * lv * lv * right, right, lv * lv);
      r.noalias() += m.transpose() * m;
    }
    const RealMatrix& a1 = sites[bu].a;
    const RealMatrix& a2 = sites[bu + 1].a;
    const double j = p.couplings[bu];
    double dj = 0.0;
    for (long x = 0; x < lv; ++x) {
      for (long xp = 0; xp < lv; ++xp) {
        for (long y = 0; y < lv; ++y) {
          for (long yp = 0; yp < lv; ++yp) {
            const double rv = r(x * lv + y, xp * lv + yp);
            dj -= rv * a1(x, xp) * a2(y, yp);
            a_bar[bu](x, xp) -= j * rv * a2(y, yp);
            a_bar[bu + 1](y, yp) -= j * rv * a1(x, xp);
          }
        }
      }
    }
    out.gradient.at("bond" + std::to_string(b) + ".j_c") = dj;
  }

  for (int i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    circuits::SubsystemAdjoint adj;
    adj.energies = e_bar[iu];
    adj.coupling_projected = cplx(0.0, -1.0) * a_bar[iu].cast<cplx>();
    const RealMatrix h_bar = circuits::truncation_vjp(sites[iu].part, ops.n_op(), nullptr, adj);
    const auto fa = circuits::fluxonium_hamiltonian_vjp(h_bar, p.sites[iu], circuits::kPi, ops);
    const std::string s = "site" + std::to_string(i);
    out.gradient.at(s + ".e_c") = fa.e_c;
    out.gradient.at(s + ".e_j") = fa.e_j;
    out.gradient.at(s + ".e_l") = fa.e_l;
  }
  return out;
}

namespace {

template <typename F>
TimingStats time_runs(const F& fn, int warmup, int repeats) {
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto start = clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t m = t.size() / 2;
  const double median = t.size() % 2 == 1 ? t[m] : 0.5 * (t[m - 1] + t[m]);
  return {median, t.front(), t.back()};
}

}  // namespace

BenchReport bench_diag_chain(const ChainConfig& cfg) {
  cfg.validate();
  BenchReport r;
  r.n_fm = cfg.n_fm;
  r.levels = cfg.effective_levels();
  r.dimension = ipow(r.levels, cfg.n_fm);
  const ChainParams p = ChainParams::uniform(cfg);
  const diffkit::ParamVector x = p.to_vector();
  r.n_params = static_cast<int>(x.size());

  auto value = [&](const diffkit::ParamVector& v) {
    return chain_ground_energy(ChainParams::from_vector(v, cfg.n_fm), r.levels, cfg.grid, false).ground_energy;
  };
  auto grad = [&](const diffkit::ParamVector& v) {
    return chain_ground_energy(ChainParams::from_vector(v, cfg.n_fm), r.levels, cfg.grid, true).gradient;
  };
  // Steps of 1e-6 sit in the roundoff regime of the sparse solver.
  diffkit::FiniteDiffOptions fd;
  fd.rel_step = 1e-4;
  const auto check = diffkit::check_gradient(value, grad, x, 1e-5, 1e-8, fd);
  r.gradcheck_max_rel_error = check.max_rel_error;
  r.gradcheck_pass = check.all_pass;
  r.ground_energy = chain_ground_energy(p, r.levels, cfg.grid, false).ground_energy;
  if (!r.gradcheck_pass) return r;

  r.value_time = time_runs([&] { chain_ground_energy(p, r.levels, cfg.grid, false); }, cfg.warmup, cfg.repeats);
  r.gradient_time = time_runs([&] { chain_ground_energy(p, r.levels, cfg.grid, true); }, cfg.warmup, cfg.repeats);
  r.ratio = r.gradient_time.median / r.value_time.median;
  r.speedup = (r.n_params + 1) / r.ratio;
  return r;
}

}  // namespace codesign::harness
